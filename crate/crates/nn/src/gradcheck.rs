use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Graph, ParamId, ParamStore, Result, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub coords_checked: usize,
}

/// Denominator floor for the relative error; gradients smaller than this
/// are compared in absolute terms.
const REL_FLOOR: f64 = 1e-6;

/// Compares reverse-mode gradients of `f` against the fourth-order central
/// difference `(f(θ−2ε) − 8f(θ−ε) + 8f(θ+ε) − f(θ+2ε)) / 12ε` on a seeded
/// sample of `n_coords` trainable coordinates (all of them when fewer exist).
pub fn grad_check<F>(store: &mut ParamStore, f: F, eps: f64, n_coords: usize, seed: u64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph) -> Result<Var>,
{
    let analytic = {
        let mut g = Graph::new(store);
        let loss = f(&mut g)?;
        let grads = g.backward(loss)?;
        let mut scratch = store.clone();
        scratch.zero_grad();
        grads.accumulate_into(&mut scratch, 1.0);
        scratch
    };

    let coords: Vec<(ParamId, usize)> = store
        .iter()
        .filter(|(_, _, t)| t.requires_grad())
        .flat_map(|(id, _, t)| (0..t.len()).map(move |j| (id, j)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked: Vec<usize> = if coords.len() <= n_coords {
        (0..coords.len()).collect()
    } else {
        let mut v = sample(&mut rng, coords.len(), n_coords).into_vec();
        v.sort_unstable();
        v
    };

    let eval = |store: &ParamStore| -> Result<f64> {
        let mut g = Graph::new(store);
        let loss = f(&mut g)?;
        Ok(g.scalar(loss))
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        coords_checked: picked.len(),
    };
    for &c in &picked {
        let (id, j) = coords[c];
        let orig = store.get(id).values()[j];
        let mut at = |offset: f64| -> Result<f64> {
            store.get_mut(id).values_mut()[j] = orig + offset;
            eval(store)
        };
        let (p1, m1, p2, m2) = (at(eps)?, at(-eps)?, at(2.0 * eps)?, at(-2.0 * eps)?);
        store.get_mut(id).values_mut()[j] = orig;

        let numeric = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * eps);
        let exact = analytic.get(id).grad().map_or(0.0, |g| g[j]);
        let rel = (exact - numeric).abs() / exact.abs().max(numeric.abs()).max(REL_FLOOR);
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_param = store.name(id).to_string();
            report.worst_index = j;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor;

    #[test]
    fn squared_norm_passes() {
        let mut store = ParamStore::new();
        let id = store.add("t", Tensor::row(vec![0.3, -1.2, 2.2])).unwrap();
        let report = grad_check(
            &mut store,
            |g| {
                let t = g.param(id);
                let sq = g.mul(t, t)?;
                g.sum(sq)
            },
            1e-4,
            200,
            0,
        )
        .unwrap();
        assert_eq!(report.coords_checked, 3);
        assert!(report.max_rel_error < 1e-10, "{report:?}");
    }
}
