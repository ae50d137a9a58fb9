//! Central finite-difference verification of [`Graph::backward`].

use super::graph::{Graph, GraphError, NodeId};
use crate::tensor::Tensor;

/// Worst disagreement found by [`finite_difference_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// `(parameter index, flat entry index)` of the worst entry.
    pub worst: Option<(usize, usize)>,
    pub analytic: f64,
    pub numeric: f64,
    pub entries_checked: usize,
}

/// Compares backward gradients to `(L(θ+h) − L(θ−h)) / 2h` for every entry
/// of every parameter.
///
/// `build` receives a fresh graph and one parameter node per tensor of
/// `params` (registered with ids `0..params.len()`) and returns the scalar
/// loss node. Relative error uses `max(|analytic|, |numeric|, 1e-8)` as the
/// denominator.
pub fn finite_difference_check<F, E>(params: &[Tensor], step: f64, build: F) -> Result<GradCheckReport, E>
where
    F: for<'g> Fn(&mut Graph<'g>, &[NodeId]) -> Result<NodeId, E>,
    E: From<GraphError>,
{
    let evaluate = |values: &[Tensor]| -> Result<f64, E> {
        let mut g = Graph::new();
        let nodes: Vec<NodeId> = values.iter().enumerate().map(|(i, t)| g.param(i, t)).collect();
        let out = build(&mut g, &nodes)?;
        Ok(g.value(out).item())
    };

    let mut g = Graph::new();
    let nodes: Vec<NodeId> = params.iter().enumerate().map(|(i, t)| g.param(i, t)).collect();
    let out = build(&mut g, &nodes)?;
    let grads = g.backward(out)?;

    let mut report =
        GradCheckReport { max_relative_error: 0.0, worst: None, analytic: 0.0, numeric: 0.0, entries_checked: 0 };
    let mut perturbed = params.to_vec();
    for (p, tensor) in params.iter().enumerate() {
        let analytic = grads.get(p).expect("every parameter leaf has a gradient");
        for k in 0..tensor.numel() {
            let original = tensor.data()[k];
            perturbed[p].data_mut()[k] = original + step;
            let plus = evaluate(&perturbed)?;
            perturbed[p].data_mut()[k] = original - step;
            let minus = evaluate(&perturbed)?;
            perturbed[p].data_mut()[k] = original;

            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic.data()[k];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            let err = (a - numeric).abs() / denom;
            report.entries_checked += 1;
            if report.worst.is_none() || err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = Some((p, k));
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    #[test]
    fn linear_layer_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(&mut rng, &[1, 4]);
        let params = vec![random(&mut rng, &[4, 3]), random(&mut rng, &[1, 3])];
        let report = finite_difference_check(&params, 1e-6, |g, p| -> Result<_, GraphError> {
            let xn = g.input(x.clone());
            let h = g.matmul(xn, p[0])?;
            let h = g.add(h, p[1])?;
            g.sum(h)
        })
        .unwrap();
        assert!(report.max_relative_error < 1e-8, "{report:?}");
        assert_eq!(report.entries_checked, 15);
    }

    #[test]
    fn tanh_chain_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random(&mut rng, &[1, 5]);
        let params = vec![random(&mut rng, &[5, 6]), random(&mut rng, &[6, 4]), random(&mut rng, &[4, 3])];
        let report = finite_difference_check(&params, 1e-6, |g, p| -> Result<_, GraphError> {
            let mut h = g.input(x.clone());
            for w in p {
                h = g.matmul(h, *w)?;
                h = g.tanh(h)?;
            }
            let prod = g.mul(h, h)?;
            g.sum(prod)
        })
        .unwrap();
        assert!(report.max_relative_error < 1e-5, "{report:?}");
    }

    #[test]
    fn empty_parameter_set_is_vacuous() {
        let report = finite_difference_check(&[], 1e-6, |g, _| -> Result<_, GraphError> {
            let c = g.input(Tensor::scalar(2.0));
            g.sum(c)
        })
        .unwrap();
        assert_eq!(report.max_relative_error, 0.0);
        assert_eq!(report.entries_checked, 0);
        assert_eq!(report.worst, None);
    }
}
