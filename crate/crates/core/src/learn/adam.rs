//! Adam with bias correction.

use super::Scalar;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Adam<F: Scalar> {
    m: Vec<F>,
    v: Vec<F>,
    steps: u64,
}

impl<F: Scalar> Adam<F> {
    pub fn new(n: usize) -> Self {
        Adam {
            m: vec![F::zero(); n],
            v: vec![F::zero(); n],
            steps: 0,
        }
    }

    /// Number of applied (not skipped) steps.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update. Returns `false`, leaving everything untouched,
    /// when any gradient is non-finite.
    pub fn step(&mut self, params: &mut [F], grads: &[F], lr: f64) -> bool {
        assert_eq!(params.len(), grads.len(), "parameter/gradient length mismatch");
        assert_eq!(params.len(), self.m.len(), "optimiser sized for another network");
        if grads.iter().any(|g| !g.is_finite()) {
            log::warn!("skipping Adam step: non-finite gradient");
            return false;
        }
        self.steps += 1;
        let t = self.steps as i32;
        let c = |x: f64| F::from_f64(x).unwrap();
        let (b1, b2) = (c(BETA1), c(BETA2));
        let corr1 = 1.0 - BETA1.powi(t);
        let corr2 = 1.0 - BETA2.powi(t);
        // lr * m_hat / (sqrt(v_hat) + eps) with the corrections folded in
        let step = c(lr * corr2.sqrt() / corr1);
        let eps = c(EPS * corr2.sqrt());
        for ((p, &g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = b1 * *m + (F::one() - b1) * g;
            *v = b2 * *v + (F::one() - b2) * g * g;
            *p -= step * *m / (v.sqrt() + eps);
        }
        true
    }

    /// Moment buffers, for checkpoint inspection.
    pub fn moments(&self) -> (&[F], &[F]) {
        (&self.m, &self.v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_is_sign_like() {
        let mut p = vec![1.0f64, 1.0, 1.0];
        let g = [0.5, -2.0, 1e-3];
        let mut opt = Adam::new(3);
        assert!(opt.step(&mut p, &g, 0.01));
        for (pi, gi) in p.iter().zip(g) {
            let expected = 1.0 - 0.01 * gi / (gi.abs() + EPS);
            assert!((pi - expected).abs() < 1e-12, "{pi} vs {expected}");
        }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut p = vec![0.3f32, -4.0];
        let mut opt = Adam::new(2);
        for _ in 0..100 {
            opt.step(&mut p, &[0.0, 0.0], 1e-3);
        }
        assert_eq!(p, vec![0.3, -4.0]);
    }

    #[test]
    fn non_finite_gradient_is_skipped() {
        let mut p = vec![1.0f64, 2.0];
        let mut opt = Adam::new(2);
        assert!(!opt.step(&mut p, &[f64::NAN, 1.0], 0.1));
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(opt.steps(), 0);
    }

    #[test]
    fn identical_runs_agree() {
        let run = || {
            let mut p = vec![0.0f32; 4];
            let mut opt = Adam::new(4);
            for k in 0..50 {
                let g: Vec<f32> = (0..4).map(|i| ((i * 7 + k) % 5) as f32 - 2.0).collect();
                opt.step(&mut p, &g, 3e-4);
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn minimises_a_quadratic() {
        let mut p = vec![5.0f64];
        let mut opt = Adam::new(1);
        for _ in 0..2000 {
            let g = [2.0 * (p[0] - 1.5)];
            opt.step(&mut p, &g, 0.05);
        }
        assert!((p[0] - 1.5).abs() < 1e-3);
    }
}
