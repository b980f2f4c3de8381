//! Multiplicative uniform noise `value * (1 + delta * (-1 + 2 r))`, with `r`
//! uniform on `[0, 1)` drawn independently per entry.
//!
//! Draws come from ChaCha8 seeded with `seed_from_u64(seed)` and are consumed
//! in the series' storage order (boundary node major, time level minor), so a
//! given seed reproduces the same output bit for bit on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fields::BoundarySeries;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub delta: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(delta: f64, seed: u64) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::Config(format!("noise level must be >= 0, got {delta}")));
        }
        Ok(Self { delta, seed })
    }

    pub fn none() -> Self {
        Self { delta: 0.0, seed: 0 }
    }
}

pub fn apply_noise(data: &BoundarySeries, spec: &NoiseSpec) -> BoundarySeries {
    let mut out = data.clone();
    if spec.delta == 0.0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for v in out.values_mut() {
        let r: f64 = rng.random();
        *v *= 1.0 + spec.delta * (-1.0 + 2.0 * r);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::BoundaryKind;
    use crate::grid::GridSpec;
    use proptest::prelude::*;

    fn data() -> BoundarySeries {
        let g = GridSpec::new(1.0, 6, 4, 0.2).unwrap();
        BoundarySeries::from_fn(g, BoundaryKind::FluxRate, |x, y, t| {
            if x == 1.0 && y > 0.0 {
                0.0
            } else {
                (3.0 * x - y).sin() + t
            }
        })
        .unwrap()
    }

    #[test]
    fn zero_delta_is_identity() {
        let d = data();
        assert_eq!(apply_noise(&d, &NoiseSpec::new(0.0, 42).unwrap()), d);
    }

    #[test]
    fn bounded_relative_perturbation() {
        let d = data();
        let out = apply_noise(&d, &NoiseSpec::new(0.1, 3).unwrap());
        for (a, b) in d.values().iter().zip(out.values()) {
            assert!((a - b).abs() <= 0.1 * a.abs() + 1e-15);
        }
    }

    #[test]
    fn zeros_stay_zero() {
        let d = data();
        let out = apply_noise(&d, &NoiseSpec::new(0.5, 1).unwrap());
        for (a, b) in d.values().iter().zip(out.values()) {
            if *a == 0.0 {
                assert_eq!(*b, 0.0);
            }
        }
    }

    #[test]
    fn seed_reproducibility() {
        let d = data();
        let a = apply_noise(&d, &NoiseSpec::new(0.05, 17).unwrap());
        let b = apply_noise(&d, &NoiseSpec::new(0.05, 17).unwrap());
        let c = apply_noise(&d, &NoiseSpec::new(0.05, 18).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn negative_delta_rejected() {
        assert!(NoiseSpec::new(-0.1, 0).is_err());
        assert!(NoiseSpec::new(f64::NAN, 0).is_err());
    }

    proptest! {
        #[test]
        fn perturbation_never_exceeds_delta(delta in 0.0f64..1.0, seed in any::<u64>()) {
            let d = data();
            let out = apply_noise(&d, &NoiseSpec::new(delta, seed).unwrap());
            for (a, b) in d.values().iter().zip(out.values()) {
                prop_assert!((a - b).abs() <= delta * a.abs() * (1.0 + 1e-12));
            }
        }
    }
}
