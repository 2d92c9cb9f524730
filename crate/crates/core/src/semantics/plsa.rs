use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{argmax, ClusterAssignment};
use crate::linalg::SparseMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct PlsaOptions {
    pub max_iters: usize,
    pub restarts: usize,
    /// Stop once the relative log-likelihood gain falls below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for PlsaOptions {
    fn default() -> Self {
        PlsaOptions {
            max_iters: 200,
            restarts: 5,
            tol: 1e-9,
            seed: 0,
        }
    }
}

struct PlsaRun {
    doc_topic: DMatrix<f64>,
    trace: Vec<f64>,
}

fn normalize_rows(m: &mut DMatrix<f64>) {
    for mut row in m.row_iter_mut() {
        let s = row.sum();
        if s > 0.0 {
            row /= s;
        }
    }
}

/// One EM sweep. Returns the log-likelihood of the parameters on entry and
/// the updated parameters.
fn em_step(
    t: &SparseMatrix,
    doc_topic: &DMatrix<f64>,
    topic_word: &DMatrix<f64>,
) -> (f64, DMatrix<f64>, DMatrix<f64>) {
    let c = doc_topic.ncols();
    let mut new_dt = DMatrix::zeros(doc_topic.nrows(), c);
    let mut new_tw = DMatrix::zeros(c, topic_word.ncols());
    let mut ll = 0.0;
    let mut joint = vec![0.0; c];
    for d in 0..t.nrows() {
        let (idx, val) = t.row(d);
        for (&w, &count) in idx.iter().zip(val) {
            let mut total = 0.0;
            for z in 0..c {
                joint[z] = doc_topic[(d, z)] * topic_word[(z, w)];
                total += joint[z];
            }
            if total <= 0.0 {
                continue;
            }
            ll += count * total.ln();
            for z in 0..c {
                let r = count * joint[z] / total;
                new_dt[(d, z)] += r;
                new_tw[(z, w)] += r;
            }
        }
        if idx.is_empty() {
            new_dt.row_mut(d).copy_from(&doc_topic.row(d));
        }
    }
    normalize_rows(&mut new_dt);
    normalize_rows(&mut new_tw);
    (ll, new_dt, new_tw)
}

fn log_likelihood(t: &SparseMatrix, doc_topic: &DMatrix<f64>, topic_word: &DMatrix<f64>) -> f64 {
    t.triplets()
        .map(|(d, w, count)| {
            let p = doc_topic.row(d).dot(&topic_word.column(w).transpose());
            if p > 0.0 {
                count * p.ln()
            } else {
                0.0
            }
        })
        .sum()
}

fn run(t: &SparseMatrix, c: usize, opts: &PlsaOptions, rng: &mut ChaCha8Rng) -> PlsaRun {
    let mut doc_topic = DMatrix::from_fn(t.nrows(), c, |_, _| rng.random_range(0.1..1.0));
    let mut topic_word = DMatrix::from_fn(c, t.ncols(), |_, _| rng.random_range(0.1..1.0));
    normalize_rows(&mut doc_topic);
    normalize_rows(&mut topic_word);
    let mut trace = Vec::new();
    for _ in 0..opts.max_iters {
        let (ll, dt, tw) = em_step(t, &doc_topic, &topic_word);
        if let Some(&prev) = trace.last() {
            if ll - prev <= opts.tol * f64::abs(prev) {
                trace.push(ll);
                doc_topic = dt;
                topic_word = tw;
                break;
            }
        }
        trace.push(ll);
        doc_topic = dt;
        topic_word = tw;
    }
    trace.push(log_likelihood(t, &doc_topic, &topic_word));
    PlsaRun { doc_topic, trace }
}

/// pLSA fitted by EM; each document takes the topic with the highest
/// posterior. Empty documents take the globally most probable topic.
pub fn plsa_cluster(t: &SparseMatrix, c: usize, opts: &PlsaOptions) -> Result<ClusterAssignment> {
    if c == 0 {
        return Err(Error::validation("pLSA needs at least one topic"));
    }
    if let Some(v) = t.values().iter().find(|&&v| v < 0.0) {
        return Err(Error::validation(format!("pLSA needs nonnegative counts, found {v}")));
    }
    let mut best: Option<PlsaRun> = None;
    for r in 0..opts.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(r as u64);
        let candidate = run(t, c, opts, &mut rng);
        let better = best
            .as_ref()
            .is_none_or(|b| candidate.trace.last() > b.trace.last());
        if better {
            best = Some(candidate);
        }
    }
    let best = best.expect("at least one restart");
    let doc_len = t.row_sums();
    let mut topic_mass = vec![0.0; c];
    for d in 0..t.nrows() {
        for z in 0..c {
            topic_mass[z] += doc_len[d] * best.doc_topic[(d, z)];
        }
    }
    let global = argmax(topic_mass.iter().copied());
    let empty: Vec<usize> = (0..t.nrows()).filter(|&d| t.row_nnz(d) == 0).collect();
    let mut posteriors = best.doc_topic;
    for &d in &empty {
        posteriors.row_mut(d).fill(0.0);
        posteriors[(d, global)] = 1.0;
    }
    let labels = posteriors
        .row_iter()
        .map(|r| argmax(r.iter().copied()))
        .collect();
    let mut out = ClusterAssignment::from_labels(labels, c);
    out.flagged_items = empty;
    out.objective_trace = best.trace;
    out.posteriors = Some(posteriors);
    Ok(out)
}
