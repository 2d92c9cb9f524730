//! Two-dimensional export of latent coordinates for external plotting.

use crate::cca::{MultiViewModel, ViewInput};
use crate::{Error, Result};

/// One exported point.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPoint {
    pub id: String,
    pub view: String,
    pub x1: f64,
    pub x2: f64,
    pub label: String,
}

/// First two latent coordinates of each `(id, view, input, label)`.
pub fn export_latent_2d<'a>(
    model: &MultiViewModel,
    items: impl IntoIterator<Item = (&'a str, usize, &'a ViewInput, &'a str)>,
) -> Result<Vec<LatentPoint>> {
    if model.dim() < 2 {
        return Err(Error::validation(format!("export needs d >= 2, model has d = {}", model.dim())));
    }
    items
        .into_iter()
        .map(|(id, view, input, label)| {
            let p = model.project(view, input)?;
            Ok(LatentPoint {
                id: id.to_string(),
                view: model.views[view].role.name().to_string(),
                x1: p.latent[0],
                x2: p.latent[1],
                label: label.to_string(),
            })
        })
        .collect()
}

pub fn to_tsv(points: &[LatentPoint]) -> String {
    let mut out = String::from("id\tview\tx1\tx2\tlabel\n");
    for p in points {
        out.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", p.id, p.view, p.x1, p.x2, p.label));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cca::{fit_cca, CcaOptions, ViewRole, ViewSet};
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn model(d: usize) -> (crate::cca::MultiViewModel, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DMatrix::from_fn(80, 4, |_, _| StandardNormal.sample(&mut rng));
        let y = &x * DMatrix::from_fn(4, 3, |_, _| StandardNormal.sample(&mut rng))
            + DMatrix::from_fn(80, 3, |_, _| StandardNormal.sample(&mut rng));
        let vs = ViewSet::from_matrices(vec![(ViewRole::Visual, x.clone()), (ViewRole::Text, y)]).unwrap();
        (fit_cca(&vs, d, &CcaOptions::default()).unwrap(), x)
    }

    #[test]
    fn coordinates_are_leading_projection_columns() {
        let (m, x) = model(4);
        let inputs: Vec<ViewInput> = (0..10).map(|i| ViewInput::Features(x.row(i).iter().copied().collect())).collect();
        let ids: Vec<String> = (0..10).map(|i| format!("i{i}")).collect();
        let pts = export_latent_2d(&m, ids.iter().zip(&inputs).map(|(id, inp)| (id.as_str(), 0, inp, "a"))).unwrap();
        let full = m.project_features(0, &x.rows(0, 10).into_owned()).unwrap();
        for (i, p) in pts.iter().enumerate() {
            assert_eq!((p.x1, p.x2), (full[(i, 0)], full[(i, 1)]));
            assert_eq!(p.view, "visual");
        }
        let same = export_latent_2d(&m, [("a", 0, &inputs[3], "x"), ("b", 0, &inputs[3], "x")]).unwrap();
        assert_eq!((same[0].x1, same[0].x2), (same[1].x1, same[1].x2));
        assert!(to_tsv(&pts).starts_with("id\tview\tx1\tx2\tlabel\ni0\tvisual\t"));
    }

    #[test]
    fn rejects_one_dimensional_models() {
        let (m, x) = model(1);
        let input = ViewInput::Features(x.row(0).iter().copied().collect());
        assert!(matches!(export_latent_2d(&m, [("a", 0, &input, "")]), Err(Error::Validation(_))));
    }
}
