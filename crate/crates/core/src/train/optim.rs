use crate::model::ModelParameters;
use crate::tensor::{Precision, Tensor};

use super::TrainError;

pub const DEFAULT_MAX_NORM: f64 = 1.0;
pub const ADADELTA_RHO: f64 = 0.95;
pub const ADADELTA_EPSILON: f64 = 1e-6;

/// Global L2 norm over every gradient entry.
pub fn global_norm(grads: &[Tensor]) -> f64 {
    grads.iter().map(Tensor::sum_squares).sum::<f64>().sqrt()
}

/// Rescales all gradients by `max_norm / norm` when the global norm exceeds
/// `max_norm`. Returns the norm before clipping.
pub fn clip_gradients(grads: &mut [Tensor], max_norm: f64) -> Result<f64, TrainError> {
    let norm = global_norm(grads);
    if !norm.is_finite() {
        return Err(TrainError::NonFinite(format!("gradient norm is {norm}")));
    }
    if norm > max_norm {
        let factor = max_norm / norm;
        for g in grads.iter_mut() {
            g.scale_inplace(factor);
        }
    }
    Ok(norm)
}

/// Running averages of squared gradients and squared updates.
#[derive(Debug, Clone, PartialEq)]
pub struct Adadelta {
    pub rho: f64,
    pub epsilon: f64,
    pub mean_sq_grad: Vec<Tensor>,
    pub mean_sq_update: Vec<Tensor>,
}

impl Adadelta {
    pub fn new(params: &ModelParameters) -> Self {
        Self::with_constants(params, ADADELTA_RHO, ADADELTA_EPSILON)
    }

    pub fn with_constants(params: &ModelParameters, rho: f64, epsilon: f64) -> Self {
        let zeros: Vec<Tensor> = params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
        Adadelta { rho, epsilon, mean_sq_grad: zeros.clone(), mean_sq_update: zeros }
    }

    /// Applies one update in place. Nothing is modified when any update
    /// entry would be non-finite.
    pub fn step(
        &mut self,
        params: &mut ModelParameters,
        grads: &[Tensor],
        precision: Precision,
    ) -> Result<(), TrainError> {
        if grads.len() != self.mean_sq_grad.len() {
            return Err(TrainError::NonFinite(format!(
                "expected {} gradient tensors, got {}",
                self.mean_sq_grad.len(),
                grads.len()
            )));
        }
        let (rho, eps) = (self.rho, self.epsilon);
        let mut updates = Vec::with_capacity(grads.len());
        let mut new_g2 = Vec::with_capacity(grads.len());
        for (k, g) in grads.iter().enumerate() {
            let eg2 = self.mean_sq_grad[k].data();
            let edx2 = self.mean_sq_update[k].data();
            let mut g2 = Vec::with_capacity(g.numel());
            let mut dx = Vec::with_capacity(g.numel());
            for ((&gi, &a), &b) in g.data().iter().zip(eg2).zip(edx2) {
                let acc = rho * a + (1.0 - rho) * gi * gi;
                let d = -((b + eps).sqrt() / (acc + eps).sqrt()) * gi;
                if !d.is_finite() {
                    return Err(TrainError::NonFinite(format!("update of parameter tensor {k} is {d}")));
                }
                g2.push(acc);
                dx.push(d);
            }
            new_g2.push(g2);
            updates.push(dx);
        }
        for (k, (g2, dx)) in new_g2.into_iter().zip(updates).enumerate() {
            self.mean_sq_grad[k].data_mut().copy_from_slice(&g2);
            for (acc, d) in self.mean_sq_update[k].data_mut().iter_mut().zip(&dx) {
                *acc = rho * *acc + (1.0 - rho) * d * d;
            }
            let p = &mut params.tensors_mut()[k];
            for (x, d) in p.data_mut().iter_mut().zip(&dx) {
                *x = precision.round(*x + d);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    NoImprovement,
    Stop,
}

/// Patience counted in evaluations without a strict improvement.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: Option<f64>,
    pub best_index: Option<usize>,
    pub since_improvement: usize,
    evaluations: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping { patience, best: None, best_index: None, since_improvement: 0, evaluations: 0 }
    }

    pub fn observe(&mut self, score: f64) -> Verdict {
        let index = self.evaluations;
        self.evaluations += 1;
        if self.best.is_none_or(|b| score > b) {
            self.best = Some(score);
            self.best_index = Some(index);
            self.since_improvement = 0;
            return Verdict::Improved;
        }
        self.since_improvement += 1;
        if self.since_improvement >= self.patience {
            Verdict::Stop
        } else {
            Verdict::NoImprovement
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Hyperparameters, Model};

    #[test]
    fn clipping_examples() {
        let mut g = vec![Tensor::row(vec![1.2, 1.6]), Tensor::row(vec![0.0])];
        assert!((clip_gradients(&mut g, 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((g[0].data()[0] - 0.6).abs() < 1e-15 && (g[0].data()[1] - 0.8).abs() < 1e-15);

        let mut small = vec![Tensor::row(vec![0.42, 0.56])];
        let before = small.clone();
        clip_gradients(&mut small, 1.0).unwrap();
        assert_eq!(small, before);

        let mut bad = vec![Tensor::row(vec![f64::NAN])];
        assert!(matches!(clip_gradients(&mut bad, 1.0), Err(TrainError::NonFinite(_))));
    }

    fn tiny() -> Model {
        Model::init(Hyperparameters::new(5, 5, 2, 2)).unwrap()
    }

    #[test]
    fn first_step_with_unit_gradient() {
        let mut m = tiny();
        let before = m.params.clone();
        let mut opt = Adadelta::new(&m.params);
        let grads: Vec<Tensor> = m.params.tensors().iter().map(|t| Tensor::filled(t.shape(), 1.0)).collect();
        opt.step(&mut m.params, &grads, Precision::F64).unwrap();
        // mpmath: -sqrt(1e-6)/sqrt(0.05 + 1e-6)
        let expected = -0.004_472_091_234_8;
        for (a, b) in m.params.tensors().iter().zip(before.tensors()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_gradient_decays_accumulators_only() {
        let mut m = tiny();
        let mut opt = Adadelta::new(&m.params);
        let ones: Vec<Tensor> = m.params.tensors().iter().map(|t| Tensor::filled(t.shape(), 1.0)).collect();
        opt.step(&mut m.params, &ones, Precision::F64).unwrap();
        let params = m.params.clone();
        let g2 = opt.mean_sq_grad.clone();
        let zeros: Vec<Tensor> = m.params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
        opt.step(&mut m.params, &zeros, Precision::F64).unwrap();
        assert_eq!(m.params, params);
        for (a, b) in opt.mean_sq_grad.iter().zip(&g2) {
            assert!(a.data().iter().zip(b.data()).all(|(x, y)| *x == ADADELTA_RHO * y));
        }
    }

    #[test]
    fn stopping_trace() {
        let mut es = EarlyStopping::new(3);
        let verdicts: Vec<Verdict> = [10.0, 11.0, 10.5, 10.4, 10.3].iter().map(|&s| es.observe(s)).collect();
        assert_eq!(
            verdicts,
            [Verdict::Improved, Verdict::Improved, Verdict::NoImprovement, Verdict::NoImprovement, Verdict::Stop]
        );
        assert_eq!(es.best, Some(11.0));
        assert_eq!(es.best_index, Some(1));
    }
}
