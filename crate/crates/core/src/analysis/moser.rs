use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Convergence target for the last iterate.
pub const MOSER_TARGET: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoserParams {
    pub c: f64,
    pub b: f64,
    pub beta: f64,
    pub x0: f64,
    pub iterations: usize,
}

impl MoserParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.c > 0.0 && self.b > 1.0 && self.beta > 0.0 && self.x0 >= 0.0;
        if !ok || ![self.c, self.b, self.beta, self.x0].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need C > 0, B > 1, beta > 0, x0 >= 0; got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoserOutcome {
    pub iterates: Vec<f64>,
    pub threshold: f64,
    pub seed_within_threshold: bool,
    /// The recursion overflowed; iteration stopped there.
    pub diverged: bool,
    /// Seed condition held and the last iterate is below the target.
    pub verdict: bool,
}

/// `C^{-1/β} B^{-1/β²}`
pub fn moser_threshold(c: f64, b: f64, beta: f64) -> f64 {
    c.powf(-1.0 / beta) * b.powf(-1.0 / (beta * beta))
}

/// Iterate `x_{i+1} = C B^i x_i^{1+β}` exactly.
pub fn moser_limit_check(params: &MoserParams) -> Result<MoserOutcome> {
    params.validate()?;
    let MoserParams { c, b, beta, x0, iterations } = *params;
    let threshold = moser_threshold(c, b, beta);
    let mut iterates = Vec::with_capacity(iterations + 1);
    iterates.push(x0);
    let mut x = x0;
    let mut diverged = false;
    for i in 0..iterations {
        x = c * b.powi(i as i32) * x.powf(1.0 + beta);
        if !x.is_finite() {
            diverged = true;
            break;
        }
        iterates.push(x);
    }
    let seed_within_threshold = x0 <= threshold;
    let last = *iterates.last().expect("x0 is always recorded");
    Ok(MoserOutcome {
        verdict: seed_within_threshold && !diverged && last < MOSER_TARGET,
        iterates,
        threshold,
        seed_within_threshold,
        diverged,
    })
}

/// Random `(C, B, β)` with `C ∈ [0.5, 10]`, `B ∈ (1, 8]`, `β ∈ [0.2, 2]`,
/// seeded at the threshold.
pub fn moser_random_family(count: usize, iterations: usize, seed: u64) -> Vec<MoserParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let c = rng.gen_range(0.5..=10.0);
            // (1, 8]: 8 - U[0, 7) never hits 1
            let b = 8.0 - rng.gen_range(0.0..7.0);
            let beta = rng.gen_range(0.2..=2.0);
            MoserParams { c, b, beta, x0: moser_threshold(c, b, beta), iterations }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn halving_example() {
        let out = moser_limit_check(&MoserParams { c: 1.0, b: 2.0, beta: 1.0, x0: 0.5, iterations: 3 }).unwrap();
        assert_eq!(out.threshold, 0.5);
        assert_eq!(out.iterates, vec![0.5, 0.25, 0.125, 0.0625]);
        assert!(out.seed_within_threshold);
    }

    #[test]
    fn zero_seed_stays_zero() {
        let out = moser_limit_check(&MoserParams { c: 3.0, b: 2.0, beta: 0.5, x0: 0.0, iterations: 20 }).unwrap();
        assert!(out.iterates.iter().all(|&x| x == 0.0));
        assert!(out.verdict);
    }

    #[test]
    fn above_threshold_reported() {
        let out = moser_limit_check(&MoserParams { c: 1.0, b: 2.0, beta: 1.0, x0: 0.8, iterations: 50 }).unwrap();
        assert!(!out.seed_within_threshold);
        assert!(!out.verdict);
        assert!(out.diverged);
    }

    #[test]
    fn invalid_params() {
        assert!(moser_limit_check(&MoserParams { c: 1.0, b: 1.0, beta: 1.0, x0: 0.1, iterations: 5 }).is_err());
    }

    proptest! {
        // at the threshold the exact recursion is x_i = T · B^{-i/β}; rounding
        // errors grow by a factor (1 + β) per step
        #[test]
        fn closed_form_at_threshold(c in 0.5f64..10.0, b in 1.01f64..8.0, beta in 0.2f64..2.0) {
            let t = moser_threshold(c, b, beta);
            let out = moser_limit_check(&MoserParams { c, b, beta, x0: t, iterations: 20 }).unwrap();
            for (i, &x) in out.iterates.iter().enumerate() {
                let exact = t * b.powf(-(i as f64) / beta);
                let tol = 1e-13 * (1.0 + beta).powi(i as i32);
                prop_assert!((x - exact).abs() <= tol * exact, "i = {}: {} vs {}", i, x, exact);
            }
        }

        #[test]
        fn below_threshold_is_monotone(c in 0.5f64..10.0, b in 1.01f64..8.0, beta in 0.2f64..2.0, f in 0.0f64..1.0) {
            let t = moser_threshold(c, b, beta);
            let out = moser_limit_check(&MoserParams { c, b, beta, x0: f * t, iterations: 30 }).unwrap();
            prop_assert!(out.iterates.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        }
    }
}
