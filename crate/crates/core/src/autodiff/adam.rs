use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::Tensor;

/// Bias-corrected Adam.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(lr: f64, params: &[Tensor]) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(Error::Shape {
                op: "adam_step",
                detail: format!("{} params, {} grads, {} moments", params.len(), grads.len(), self.m.len()),
            });
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::Shape {
                    op: "adam_step",
                    detail: format!("param {:?} vs grad {:?}", p.shape(), g.shape()),
                });
            }
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let pd = p.data_mut();
            let (md, vd) = (m.data_mut(), v.data_mut());
            for i in 0..pd.len() {
                let gi = g.data()[i];
                md[i] = self.beta1 * md[i] + (1.0 - self.beta1) * gi;
                vd[i] = self.beta2 * vd[i] + (1.0 - self.beta2) * gi * gi;
                let mhat = md[i] / bc1;
                let vhat = vd[i] / bc2;
                pd[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![Tensor::row_vector(vec![1.0, -2.0])];
        let mut opt = Adam::new(0.1, &p);
        let before = p.clone();
        opt.step(&mut p, &[Tensor::zeros(1, 2)]).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_closed_form() {
        let g = [0.5, -3.0, 1e-6];
        let mut p = vec![Tensor::row_vector(vec![0.0; 3])];
        let mut opt = Adam::new(0.01, &p);
        opt.step(&mut p, &[Tensor::row_vector(g.to_vec())]).unwrap();
        for (i, &gi) in g.iter().enumerate() {
            let expected = -0.01 * gi / (gi.abs() + 1e-8);
            assert!((p[0].data()[i] - expected).abs() < 1e-15, "{i}");
        }
    }

    #[test]
    fn deterministic_trajectories() {
        let run = || {
            let mut p = vec![Tensor::row_vector(vec![1.0, 2.0])];
            let mut opt = Adam::new(0.05, &p);
            for k in 0..20 {
                let g: Vec<f64> = p[0].data().iter().map(|x| 2.0 * x + k as f64 * 0.01).collect();
                opt.step(&mut p, &[Tensor::row_vector(g)]).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn shape_mismatch() {
        let mut p = vec![Tensor::zeros(2, 2)];
        let mut opt = Adam::new(0.1, &p);
        assert!(opt.step(&mut p, &[Tensor::zeros(1, 2)]).is_err());
    }
}
