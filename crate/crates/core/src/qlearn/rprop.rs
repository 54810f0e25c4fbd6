use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpropParams {
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub delta_init: f64,
    pub delta_min: f64,
    pub delta_max: f64,
}

impl Default for RpropParams {
    fn default() -> Self {
        Self { eta_plus: 1.2, eta_minus: 0.5, delta_init: 0.1, delta_min: 1e-6, delta_max: 50.0 }
    }
}

impl RpropParams {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.eta_minus
            && self.eta_minus < 1.0
            && 1.0 < self.eta_plus
            && 0.0 < self.delta_min
            && self.delta_min <= self.delta_init
            && self.delta_init <= self.delta_max;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(alloc::format!("invalid RPROP parameters {self:?}")))
        }
    }
}

/// Per-weight step sizes and last gradient signs of the sign-based update.
///
/// On a sign change the step shrinks and the weight is left alone for that
/// round; the stored sign is reset so the following round moves again.
#[derive(Debug, Clone, PartialEq)]
pub struct RpropState {
    pub params: RpropParams,
    pub deltas: Vec<f64>,
    pub prev_sign: Vec<i8>,
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

impl RpropState {
    pub fn new(num_weights: usize, params: RpropParams) -> Self {
        Self { params, deltas: alloc::vec![params.delta_init; num_weights], prev_sign: alloc::vec![0; num_weights] }
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn rprop_step(&mut self, gradient: &[f64], weights: &mut [f64]) -> Result<()> {
        if gradient.len() != self.deltas.len() || weights.len() != self.deltas.len() {
            return Err(Error::DimensionMismatch {
                expected: self.deltas.len(),
                got: gradient.len().min(weights.len()),
            });
        }
        let p = self.params;
        for ((w, &g), (delta, prev)) in
            weights.iter_mut().zip(gradient).zip(self.deltas.iter_mut().zip(self.prev_sign.iter_mut()))
        {
            let s = sign(g);
            match s * *prev {
                1 => {
                    *delta = (*delta * p.eta_plus).min(p.delta_max);
                    *w -= s as f64 * *delta;
                    *prev = s;
                }
                -1 => {
                    *delta = (*delta * p.eta_minus).max(p.delta_min);
                    *prev = 0;
                }
                _ => {
                    *w -= s as f64 * *delta;
                    *prev = s;
                }
            }
        }
        Ok(())
    }
}
