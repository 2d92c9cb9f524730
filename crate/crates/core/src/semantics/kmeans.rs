use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ClusterAssignment;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            restarts: 5,
            max_iters: 100,
            seed: 0,
        }
    }
}

struct Run {
    labels: Vec<usize>,
    cost: f64,
    trace: Vec<f64>,
}

/// Squared distances from every row to every center, `n × c`.
fn sq_distances(x: &DMatrix<f64>, x_norms: &[f64], centers: &DMatrix<f64>) -> DMatrix<f64> {
    let c_norms: Vec<f64> = centers.row_iter().map(|r| r.norm_squared()).collect();
    let mut d = x * centers.transpose();
    for i in 0..d.nrows() {
        for k in 0..d.ncols() {
            d[(i, k)] = (x_norms[i] + c_norms[k] - 2.0 * d[(i, k)]).max(0.0);
        }
    }
    d
}

fn assign(d: &DMatrix<f64>, labels: &mut [usize], best: &mut [f64]) {
    for i in 0..d.nrows() {
        let mut lab = 0;
        let mut val = d[(i, 0)];
        for k in 1..d.ncols() {
            if d[(i, k)] < val {
                val = d[(i, k)];
                lab = k;
            }
        }
        labels[i] = lab;
        best[i] = val;
    }
}

/// k-means++ seeding. When every remaining point coincides with a chosen
/// center, the rest of the centers duplicate the first and stay empty.
fn seed_centers(x: &DMatrix<f64>, x_norms: &[f64], c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = x.nrows();
    let mut centers = DMatrix::zeros(c, x.ncols());
    let first = rng.random_range(0..n);
    centers.row_mut(0).copy_from(&x.row(first));
    let mut closest: Vec<f64> = (0..n)
        .map(|i| (x_norms[i] + x_norms[first] - 2.0 * x.row(i).dot(&x.row(first))).max(0.0))
        .collect();
    for k in 1..c {
        let total: f64 = closest.iter().sum();
        if total <= 0.0 {
            for kk in k..c {
                centers.row_mut(kk).copy_from(&x.row(first));
            }
            break;
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = n - 1;
        for (i, &w) in closest.iter().enumerate() {
            if target < w {
                pick = i;
                break;
            }
            target -= w;
        }
        centers.row_mut(k).copy_from(&x.row(pick));
        for i in 0..n {
            let d = (x_norms[i] + x_norms[pick] - 2.0 * x.row(i).dot(&x.row(pick))).max(0.0);
            if d < closest[i] {
                closest[i] = d;
            }
        }
    }
    centers
}

fn lloyd(x: &DMatrix<f64>, x_norms: &[f64], c: usize, max_iters: usize, rng: &mut ChaCha8Rng) -> Run {
    let n = x.nrows();
    let mut centers = seed_centers(x, x_norms, c, rng);
    let mut labels = vec![0usize; n];
    let mut best = vec![0.0; n];
    let mut trace = Vec::new();
    let mut first = true;
    for _ in 0..max_iters.max(1) {
        let d = sq_distances(x, x_norms, &centers);
        let previous = labels.clone();
        assign(&d, &mut labels, &mut best);
        trace.push(best.iter().sum());
        if !first && previous == labels {
            break;
        }
        first = false;

        let mut sums = DMatrix::<f64>::zeros(c, x.ncols());
        let mut counts = vec![0usize; c];
        for i in 0..n {
            let mut row = sums.row_mut(labels[i]);
            row += x.row(i);
            counts[labels[i]] += 1;
        }
        for k in 0..c {
            if counts[k] > 0 {
                centers.row_mut(k).copy_from(&(sums.row(k) / counts[k] as f64));
            } else {
                // Re-seed from the point farthest from its center, if any
                // point is away from its center at all.
                let far = (0..n).fold(0, |a, i| if best[i] > best[a] { i } else { a });
                if best[far] > 0.0 {
                    centers.row_mut(k).copy_from(&x.row(far));
                    counts[labels[far]] -= 1;
                    labels[far] = k;
                    best[far] = 0.0;
                }
            }
        }
    }
    let cost = best.iter().sum();
    Run { labels, cost, trace }
}

/// Lloyd's algorithm with k-means++ seeding; the restart with the lowest
/// within-cluster sum of squares wins (earliest on ties).
pub fn kmeans(x: &DMatrix<f64>, c: usize, opts: &KMeansOptions) -> Result<ClusterAssignment> {
    let n = x.nrows();
    if c == 0 || c > n {
        return Err(Error::validation(format!(
            "k-means needs 1 <= c <= n, got c = {c}, n = {n}"
        )));
    }
    let x_norms: Vec<f64> = x.row_iter().map(|r| r.norm_squared()).collect();
    let mut best: Option<Run> = None;
    for r in 0..opts.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(r as u64);
        let run = lloyd(x, &x_norms, c, opts.max_iters, &mut rng);
        if best.as_ref().is_none_or(|b| run.cost < b.cost) {
            best = Some(run);
        }
    }
    let run = best.expect("at least one restart");
    let mut out = ClusterAssignment::from_labels(run.labels, c);
    out.objective_trace = run.trace;
    Ok(out)
}
