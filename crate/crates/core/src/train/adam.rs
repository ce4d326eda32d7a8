//! Adam over a flat parameter vector with per-entry learning-rate groups.

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.99;
pub const EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    /// One bias-corrected update; `lr[k]` is the learning rate of entry
    /// `k`. Entries with zero gradient history do not move.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "parameter count changed");
        assert_eq!(grads.len(), params.len());
        self.step += 1;
        let bc1 = 1.0 - BETA1.powi(self.step as i32);
        let bc2 = 1.0 - BETA2.powi(self.step as i32);
        for k in 0..params.len() {
            let g = grads[k];
            self.m[k] = BETA1 * self.m[k] + (1.0 - BETA1) * g;
            self.v[k] = BETA2 * self.v[k] + (1.0 - BETA2) * g * g;
            let mh = self.m[k] / bc1;
            let vh = self.v[k] / bc2;
            params[k] -= lr[k] * mh / (vh.sqrt() + EPS);
        }
    }
}

/// Scales `grads` so that their global L2 norm is at most `max_norm`;
/// returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let n = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if n > max_norm && n.is_finite() {
        let s = max_norm / n;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grads_leave_params() {
        let mut s = AdamState::new(3);
        let mut p = vec![1.0, -2.0, 3.0];
        s.step(&mut p, &[0.0; 3], &[0.1; 3]);
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_by_hand() {
        let mut s = AdamState::new(2);
        let mut p = vec![0.5, 0.5];
        s.step(&mut p, &[0.2, -3.0], &[0.01, 0.1]);
        // m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps)
        assert!((p[0] - (0.5 - 0.01 * 0.2 / (0.2 + EPS))).abs() < 1e-15);
        assert!((p[1] - (0.5 + 0.1 * 3.0 / (3.0 + EPS))).abs() < 1e-15);
    }

    #[test]
    fn two_steps_match_scalar_oracle() {
        let g = [[0.3, -0.1], [-0.7, 0.4]];
        let lr = [0.05, 0.02];
        let mut s = AdamState::new(2);
        let mut p = vec![1.0, 2.0];
        for gs in &g {
            s.step(&mut p, gs, &lr);
        }
        for k in 0..2 {
            let (mut m, mut v, mut x) = (0.0, 0.0, [1.0, 2.0][k]);
            for (t, gs) in g.iter().enumerate() {
                let t = t as i32 + 1;
                m = 0.9 * m + 0.1 * gs[k];
                v = 0.99 * v + 0.01 * gs[k] * gs[k];
                let mh = m / (1.0 - 0.9f64.powi(t));
                let vh = v / (1.0 - 0.99f64.powi(t));
                x -= lr[k] * mh / (vh.sqrt() + 1e-8);
            }
            assert!((p[k] - x).abs() < 1e-12);
        }
    }

    #[test]
    fn clipping() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_global_norm(&mut g, 10.0), 5.0);
        assert_eq!(g, vec![3.0, 4.0]);
        clip_global_norm(&mut g, 1.0);
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
    }
}
