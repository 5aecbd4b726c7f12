//! Initial-condition presets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

use crate::domain::{eigen_system, from_modal, Domain, Field, ModalCoeffs, C64};
use crate::error::{Error, Result};

/// Number of modes excited by [`InitialCondition::random_smooth`].
pub const DEFAULT_RANDOM_MODES: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// The `k`-th eigenfunction (1-based, eigenvalue order).
    SingleMode { k: usize },
    /// `Σ_k amplitude·k^{−decay}·e^{iφ_k} ω_k` over the first `modes`
    /// eigenfunctions, phases drawn from a seeded generator.
    RandomSmooth {
        seed: u64,
        decay: f64,
        modes: usize,
        amplitude: f64,
    },
    Constant(C64),
}

impl InitialCondition {
    pub fn random_smooth(seed: u64) -> Self {
        InitialCondition::RandomSmooth {
            seed,
            decay: 2.0,
            modes: DEFAULT_RANDOM_MODES,
            amplitude: 1.0,
        }
    }

    pub fn build(&self, domain: &Domain) -> Result<Field> {
        match *self {
            InitialCondition::SingleMode { k } => {
                if k == 0 {
                    return Err(Error::InvalidParameters("mode index is 1-based".into()));
                }
                Ok(eigen_system(domain, k)?.eigenfunction(k - 1))
            }
            InitialCondition::RandomSmooth {
                seed,
                decay,
                modes,
                amplitude,
            } => {
                if modes == 0 || !decay.is_finite() || !amplitude.is_finite() {
                    return Err(Error::InvalidParameters(
                        "random_smooth needs at least one mode and finite decay and amplitude".into(),
                    ));
                }
                let count = modes.min(domain.max_modes());
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let coeffs = (1..=count)
                    .map(|k| {
                        let phase: f64 = rng.gen_range(0.0..TAU);
                        C64::from_polar(amplitude * (k as f64).powf(-decay), phase)
                    })
                    .collect();
                Ok(from_modal(&ModalCoeffs::new(domain, coeffs)?))
            }
            InitialCondition::Constant(c) => Ok(Field::constant(domain, c)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{to_modal, Boundary, DomainSpec};
    use std::f64::consts::PI;

    fn dirichlet() -> Domain {
        Domain::new(DomainSpec::interval(PI, 63, Boundary::Dirichlet)).unwrap()
    }

    #[test]
    fn single_mode_is_unit() {
        let u = InitialCondition::SingleMode { k: 3 }.build(&dirichlet()).unwrap();
        assert!((u.l2_sq() - 1.0).abs() < 1e-12);
        assert!(InitialCondition::SingleMode { k: 0 }.build(&dirichlet()).is_err());
    }

    #[test]
    fn random_smooth_is_seeded_and_band_limited() {
        let d = dirichlet();
        let a = InitialCondition::random_smooth(7).build(&d).unwrap();
        let b = InitialCondition::random_smooth(7).build(&d).unwrap();
        let c = InitialCondition::random_smooth(8).build(&d).unwrap();
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), c.values());

        let m = to_modal(&a, d.max_modes()).unwrap();
        for (k, c) in m.coeffs().iter().enumerate() {
            let want = if k < DEFAULT_RANDOM_MODES {
                ((k + 1) as f64).powi(-2)
            } else {
                0.0
            };
            assert!((c.norm() - want).abs() < 1e-12, "mode {k}");
        }
    }

    #[test]
    fn constant_preset() {
        let d = Domain::new(DomainSpec::interval(1.0, 33, Boundary::Neumann)).unwrap();
        let u = InitialCondition::Constant(C64::new(0.5, 0.0)).build(&d).unwrap();
        assert!((u.l2_sq() - 0.25).abs() < 1e-14);
    }
}
