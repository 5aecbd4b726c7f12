//! Hypothesis checks and predicted decay envelopes for each stabilization
//! result.
//!
//! A certificate never fails because a hypothesis is violated: it records a
//! signed margin for every inequality (positive means satisfied) so parameter
//! sweeps can map feasibility regions. Errors are reserved for inputs outside
//! the domain of the formulas themselves.

use std::f64::consts::PI;
use std::fmt;

use crate::domain::{Boundary, EigenSystem};
use crate::dynamics::CgleParams;
use crate::error::{Error, Result};

/// Fraction of `ω` used for `ε` when none is configured.
pub const DEFAULT_EPSILON_FRACTION: f64 = 0.05;

const CRITICAL_POWER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    Volume,
    ModalL2,
    ModalH1,
    Steering1,
    Steering2,
    Nodal,
}

impl Theorem {
    pub fn name(&self) -> &'static str {
        match self {
            Theorem::Volume => "volume-elements L2 decay",
            Theorem::ModalL2 => "modal L2 decay",
            Theorem::ModalH1 => "modal H1 decay",
            Theorem::Steering1 => "steering to any solution",
            Theorem::Steering2 => "steering to a decaying solution",
            Theorem::Nodal => "nodal L2 decay",
        }
    }
}

/// What a certificate's envelope bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundedQuantity {
    /// `‖u(t)‖²`
    SolutionL2Sq,
    /// `‖u(t)‖` (unsquared)
    SolutionL2,
    /// `‖u(t) − v(t)‖²`
    ErrorL2Sq,
    /// `‖∇u(t)‖²`
    GradientL2Sq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub name: &'static str,
    pub statement: String,
    pub satisfied: bool,
    /// Signed slack of the inequality; positive means satisfied.
    pub margin: f64,
}

impl Hypothesis {
    fn strict(name: &'static str, statement: impl Into<String>, margin: f64) -> Self {
        Self {
            name,
            statement: statement.into(),
            satisfied: margin > 0.0,
            margin,
        }
    }

    fn non_strict(name: &'static str, statement: impl Into<String>, margin: f64) -> Self {
        Self {
            name,
            statement: statement.into(),
            satisfied: margin >= 0.0,
            margin,
        }
    }
}

/// Growth-power regime for the H¹ result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerBranch {
    /// `p < 4/n`: decay for all initial data.
    Subcritical,
    /// `p = 4/n`: decay only for sufficiently small `‖u0‖`.
    Critical,
    /// `p > 4/n`: not covered.
    Supercritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteeringCase {
    /// `γ̃ ∈ (γλ_1/λ_{N+1}, λλ_1)`, i.e. `ω̃ > 0`.
    I,
    /// `γ̃ ≤ γλ_1/λ_{N+1}`, i.e. `ω̃ ≤ 0`.
    II,
}

/// Rate constants, one variant per theorem.
#[derive(Debug, Clone, PartialEq)]
pub enum Rates {
    Volume {
        h: f64,
        nu: f64,
        m: f64,
        exponent: f64,
    },
    ModalL2 {
        omega: f64,
    },
    ModalH1 {
        omega: f64,
        delta: f64,
        theta: f64,
        xi: f64,
        a: f64,
        b: f64,
        /// Undefined on the critical and supercritical branches.
        zeta: Option<f64>,
        branch: PowerBranch,
    },
    Steering1 {
        omega: f64,
        c_p: f64,
    },
    Steering2 {
        omega: f64,
        omega_tilde: f64,
        epsilon: f64,
        gamma_gap: f64,
        /// `2(λλ_1 − γ̃)`, decay exponent of `‖v‖²`.
        target_exponent: f64,
        case: SteeringCase,
        c_p: f64,
    },
    Nodal {
        h: f64,
        /// Decay rate of the unsquared norm.
        rate: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub theorem: Theorem,
    pub hypotheses: Vec<Hypothesis>,
    pub rates: Rates,
    pub notes: Vec<String>,
}

impl Certificate {
    pub fn satisfied(&self) -> bool {
        self.hypotheses.iter().all(|h| h.satisfied)
    }

    pub fn failing(&self) -> impl Iterator<Item = &Hypothesis> {
        self.hypotheses.iter().filter(|h| !h.satisfied)
    }

    pub fn bounded_quantity(&self) -> BoundedQuantity {
        match self.theorem {
            Theorem::Volume | Theorem::ModalL2 => BoundedQuantity::SolutionL2Sq,
            Theorem::ModalH1 => BoundedQuantity::GradientL2Sq,
            Theorem::Steering1 | Theorem::Steering2 => BoundedQuantity::ErrorL2Sq,
            Theorem::Nodal => BoundedQuantity::SolutionL2,
        }
    }

    /// Decay exponent of the bounded quantity, squared, as given by the
    /// formulas whether or not the hypotheses hold. For the two-term steering
    /// envelope this is the slower of the two exponents.
    pub fn formula_exponent(&self) -> f64 {
        match &self.rates {
            Rates::Volume { exponent, .. } => *exponent,
            Rates::ModalL2 { omega } => *omega,
            Rates::ModalH1 { delta, .. } => *delta,
            Rates::Steering1 { omega, .. } => *omega,
            Rates::Steering2 {
                omega,
                epsilon,
                target_exponent,
                case,
                ..
            } => match case {
                SteeringCase::I => (omega - epsilon).min(*target_exponent),
                SteeringCase::II => omega - epsilon,
            },
            Rates::Nodal { rate, .. } => 2.0 * rate,
        }
    }

    /// Squared-norm decay exponent, reported only when every hypothesis holds.
    pub fn exponent(&self) -> Option<f64> {
        self.satisfied().then(|| self.formula_exponent())
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "theorem: {}", self.theorem.name())?;
        writeln!(f, "{:<34} {:>8} {:>16}  statement", "hypothesis", "holds", "margin")?;
        for h in &self.hypotheses {
            writeln!(
                f,
                "{:<34} {:>8} {:>16.9}  {}",
                h.name,
                if h.satisfied { "yes" } else { "NO" },
                h.margin,
                h.statement
            )?;
        }
        match &self.rates {
            Rates::Volume { h, nu, m, exponent } => {
                writeln!(f, "h = {h:.9}, nu = {nu:.9}, m = {m:.9}")?;
                writeln!(f, "squared-norm exponent mu*nu = {exponent:.9}")?;
            }
            Rates::ModalL2 { omega } => writeln!(f, "omega = {omega:.9}")?,
            Rates::ModalH1 {
                omega,
                delta,
                theta,
                xi,
                a,
                b,
                zeta,
                branch,
            } => {
                writeln!(f, "omega = {omega:.9}, delta = {delta:.9}, branch = {branch:?}")?;
                writeln!(f, "theta = {theta:.9}, xi = {xi:.9}, a = {a:.9}, b = {b:.9}")?;
                match zeta {
                    Some(z) => writeln!(f, "zeta = {z:.9}")?,
                    None => writeln!(f, "zeta = undefined")?,
                }
            }
            Rates::Steering1 { omega, c_p } => writeln!(f, "omega = {omega:.9}, C_p = {c_p:.9}")?,
            Rates::Steering2 {
                omega,
                omega_tilde,
                epsilon,
                target_exponent,
                case,
                c_p,
                ..
            } => {
                writeln!(f, "omega = {omega:.9}, omega_tilde = {omega_tilde:.9}, case = {case:?}")?;
                writeln!(
                    f,
                    "epsilon = {epsilon:.9}, target exponent = {target_exponent:.9}, C_p = {c_p:.9}"
                )?;
            }
            Rates::Nodal { h, rate } => {
                writeln!(f, "h = {h:.9}, norm decay rate = {rate:.9}")?;
            }
        }
        match self.exponent() {
            Some(e) => writeln!(f, "predicted exponent = {e:.9}")?,
            None => writeln!(f, "predicted exponent = n/a (hypotheses violated)")?,
        }
        for note in &self.notes {
            writeln!(f, "note: {note}")?;
        }
        Ok(())
    }
}

fn damping(params: &CgleParams) -> Hypothesis {
    let oracle = params.linear_oracle && params.kappa == 0.0 && params.beta == 0.0;
    Hypothesis {
        name: "nonlinear_damping",
        statement: "kappa > 0".into(),
        satisfied: params.kappa > 0.0 || oracle,
        margin: params.kappa,
    }
}

fn gain_dominates_growth(params: &CgleParams) -> Hypothesis {
    Hypothesis::non_strict("gain_dominates_growth", "mu >= gamma", params.mu - params.gamma)
}

fn tail_eigenvalue(params: &CgleParams, lambda_next: f64) -> Hypothesis {
    Hypothesis::strict(
        "tail_eigenvalue",
        "lambda_{N+1} > gamma/lambda",
        lambda_next - params.gamma / params.lambda,
    )
}

/// `(λ_1, λ_{N+1})` from a Dirichlet eigensystem with at least `N+1` modes.
fn spectral_pair(params: &CgleParams, eigsys: &EigenSystem) -> Result<(f64, f64)> {
    if eigsys.domain().boundary() != Boundary::Dirichlet {
        return Err(Error::Certificate(
            "modal results need the Dirichlet eigensystem".into(),
        ));
    }
    let n = params.n_controllers;
    if n == 0 || eigsys.len() < n + 1 {
        return Err(Error::Certificate(format!(
            "need {} eigenvalues, the eigensystem holds {}",
            n + 1,
            eigsys.len()
        )));
    }
    Ok((eigsys.lambda(1), eigsys.lambda(n + 1)))
}

fn modal_omega(params: &CgleParams, lambda_1: f64, lambda_next: f64) -> f64 {
    2.0 * (params.lambda - params.gamma / lambda_next) * lambda_1
}

/// `C_p = |p| / (2√(p+1))`.
pub fn c_p(p: f64) -> f64 {
    p.abs() / (2.0 * (p + 1.0).sqrt())
}

/// Finite volume elements on a Neumann interval of length `length`.
pub fn certify_volume(params: &CgleParams, length: f64) -> Certificate {
    let n = params.n_controllers as f64;
    let h = length / n;
    let inv_n2 = 1.0 / (n * n);
    let bound = if params.mu > 0.0 {
        (1.0 - 4.0 * params.gamma / params.mu).min(4.0 * params.lambda / (params.mu * length * length))
    } else {
        f64::NEG_INFINITY
    };
    let mut hypotheses = vec![
        damping(params),
        Hypothesis::strict(
            "cell_resolution",
            "1/N^2 < min{1 - 4 gamma/mu, 4 lambda/(mu L^2)}",
            bound - inv_n2,
        ),
    ];
    if params.mu <= 0.0 {
        hypotheses.push(Hypothesis::strict("positive_gain", "mu > 0", params.mu));
    }
    let (nu, m) = if params.mu > 0.0 {
        (
            0.5 - 2.0 * params.gamma / params.mu - 0.5 * inv_n2,
            2.0 * params.lambda / params.mu - 0.5 * h * h,
        )
    } else {
        (f64::NEG_INFINITY, f64::INFINITY)
    };
    let mut notes = Vec::new();
    if !(params.mu > 4.0 * params.gamma) {
        notes.push("mu <= 4 gamma: no number of cells satisfies the resolution condition".into());
    }
    Certificate {
        theorem: Theorem::Volume,
        hypotheses,
        rates: Rates::Volume {
            h,
            nu,
            m,
            exponent: params.mu * nu,
        },
        notes,
    }
}

/// Finitely many Fourier modes, L² decay with `ω = 2(λ − γ/λ_{N+1})λ_1`.
pub fn certify_modal_l2(params: &CgleParams, eigsys: &EigenSystem) -> Result<Certificate> {
    let (l1, ln) = spectral_pair(params, eigsys)?;
    Ok(Certificate {
        theorem: Theorem::ModalL2,
        hypotheses: vec![
            damping(params),
            gain_dominates_growth(params),
            tail_eigenvalue(params, ln),
        ],
        rates: Rates::ModalL2 {
            omega: modal_omega(params, l1, ln),
        },
        notes: Vec::new(),
    })
}

/// Gagliardo–Nirenberg exponents for dimension `n` and power `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationExponents {
    pub theta: f64,
    pub xi: f64,
    pub a: f64,
    pub b: f64,
}

pub fn interpolation_exponents(n: usize, p: f64) -> InterpolationExponents {
    let n = n as f64;
    InterpolationExponents {
        theta: n * p / (4.0 * (p + 2.0)),
        xi: ((n + 2.0) * p + 4.0) / (4.0 * (p + 2.0)),
        a: n * p / 4.0,
        b: (4.0 - n) * p / 4.0,
    }
}

/// Gradient decay at any rate `δ ∈ (0, ω)` (constant unquantified).
pub fn certify_modal_h1(params: &CgleParams, eigsys: &EigenSystem, n: usize, delta: f64) -> Result<Certificate> {
    let l2 = certify_modal_l2(params, eigsys)?;
    let omega = match l2.rates {
        Rates::ModalL2 { omega } => omega,
        _ => unreachable!(),
    };
    if n == 0 {
        return Err(Error::Certificate("dimension must be at least 1".into()));
    }
    if !(delta > 0.0) || (omega > 0.0 && delta >= omega) {
        return Err(Error::Certificate(format!(
            "delta = {delta} must lie in (0, omega) with omega = {omega}"
        )));
    }
    let ex = interpolation_exponents(n, params.p);
    let critical = 4.0 / n as f64;
    let gap = critical - params.p;
    let branch = if gap.abs() <= CRITICAL_POWER_TOL {
        PowerBranch::Critical
    } else if gap > 0.0 {
        PowerBranch::Subcritical
    } else {
        PowerBranch::Supercritical
    };
    let mut hypotheses = l2.hypotheses;
    let mut notes = vec!["the multiplicative constant is not quantified; only the rate can be checked".to_string()];
    let zeta = match branch {
        PowerBranch::Subcritical => {
            let z = 2.0 * (1.0 + ex.b) / (1.0 - ex.a);
            hypotheses.push(Hypothesis::strict("power_index", "p < 4/n", gap));
            hypotheses.push(Hypothesis::strict("zeta_exceeds_two", "zeta = 2(1+b)/(1-a) > 2", z - 2.0));
            Some(z)
        }
        PowerBranch::Critical => {
            hypotheses.push(Hypothesis {
                name: "power_index",
                statement: "p = 4/n (small data)".into(),
                satisfied: true,
                margin: 0.0,
            });
            notes.push("p = 4/n: decay requires a sufficiently small initial L2 norm".into());
            None
        }
        PowerBranch::Supercritical => {
            hypotheses.push(Hypothesis::strict("power_index", "p <= 4/n", gap));
            None
        }
    };
    Ok(Certificate {
        theorem: Theorem::ModalH1,
        hypotheses,
        rates: Rates::ModalH1 {
            omega,
            delta,
            theta: ex.theta,
            xi: ex.xi,
            a: ex.a,
            b: ex.b,
            zeta,
            branch,
        },
        notes,
    })
}

fn frequency_hypothesis(params: &CgleParams) -> Hypothesis {
    let cp = c_p(params.p);
    let needed = if params.beta == 0.0 { 0.0 } else { params.beta.abs() / cp };
    Hypothesis::non_strict(
        "dissipation_dominates_frequency",
        format!("kappa >= |beta|/C_p = {needed:.9}"),
        params.kappa - needed,
    )
}

/// Steering to any solution of the uncontrolled equation.
pub fn certify_steering1(params: &CgleParams, eigsys: &EigenSystem) -> Result<Certificate> {
    if params.p <= -1.0 {
        return Err(Error::Certificate(format!("p = {} must exceed -1", params.p)));
    }
    let (l1, ln) = spectral_pair(params, eigsys)?;
    Ok(Certificate {
        theorem: Theorem::Steering1,
        hypotheses: vec![
            damping(params),
            gain_dominates_growth(params),
            tail_eigenvalue(params, ln),
            frequency_hypothesis(params),
        ],
        rates: Rates::Steering1 {
            omega: modal_omega(params, l1, ln),
            c_p: c_p(params.p),
        },
        notes: Vec::new(),
    })
}

/// Steering to a solution of the stable target equation with gain `γ̃`.
pub fn certify_steering2(params: &CgleParams, eigsys: &EigenSystem) -> Result<Certificate> {
    let gamma_tilde = params
        .gamma_tilde
        .ok_or_else(|| Error::Certificate("gamma_tilde is required".into()))?;
    let base = certify_steering1(params, eigsys)?;
    let (l1, ln) = spectral_pair(params, eigsys)?;
    let ceiling = params.lambda * l1;
    if gamma_tilde >= ceiling {
        return Err(Error::Certificate(format!(
            "gamma_tilde = {gamma_tilde} must be below lambda*lambda_1 = {ceiling}"
        )));
    }
    let omega = modal_omega(params, l1, ln);
    let epsilon = params.epsilon.unwrap_or(DEFAULT_EPSILON_FRACTION * omega);
    if omega > 0.0 && !(epsilon > 0.0 && epsilon < omega) {
        return Err(Error::Certificate(format!(
            "epsilon = {epsilon} must lie in (0, omega) with omega = {omega}"
        )));
    }
    let threshold = params.gamma * l1 / ln;
    let omega_tilde = 2.0 * (gamma_tilde - threshold);
    let case = if gamma_tilde > threshold {
        SteeringCase::I
    } else {
        SteeringCase::II
    };
    let mut hypotheses = base.hypotheses;
    hypotheses.push(Hypothesis::strict(
        "target_gain_window",
        "gamma_tilde < lambda*lambda_1",
        ceiling - gamma_tilde,
    ));
    if case == SteeringCase::I {
        // The first-case envelope divides by ω̃ − ε.
        hypotheses.push(Hypothesis::strict(
            "epsilon_below_omega_tilde",
            "epsilon < omega_tilde",
            omega_tilde - epsilon,
        ));
    }
    Ok(Certificate {
        theorem: Theorem::Steering2,
        hypotheses,
        rates: Rates::Steering2 {
            omega,
            omega_tilde,
            epsilon,
            gamma_gap: (gamma_tilde - params.gamma).abs(),
            target_exponent: 2.0 * (ceiling - gamma_tilde),
            case,
            c_p: c_p(params.p),
        },
        notes: vec![
            "the same epsilon enters both exponentials of the envelope".into(),
        ],
    })
}

/// Nodal observables on a Dirichlet interval of length `length`.
pub fn certify_nodal(params: &CgleParams, length: f64) -> Certificate {
    let h = length / params.n_controllers as f64;
    let lambda_1 = (PI / length).powi(2);
    let diffusion_gap = params.lambda - params.mu * h * h;
    let gain_gap = params.mu / 4.0 - params.gamma;
    Certificate {
        theorem: Theorem::Nodal,
        hypotheses: vec![
            damping(params),
            Hypothesis::non_strict("diffusion_dominates_actuation", "lambda >= mu h^2", diffusion_gap),
            Hypothesis::strict("gain_dominates_growth", "mu/4 > gamma", gain_gap),
        ],
        rates: Rates::Nodal {
            h,
            rate: lambda_1 * diffusion_gap + gain_gap,
        },
        notes: Vec::new(),
    }
}

/// Norms at `t = 0` entering the envelopes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InitialNorms {
    /// `‖u0‖²`
    pub l2_sq: f64,
    /// `‖u0 − v0‖²`
    pub error_l2_sq: f64,
    /// `‖v0‖²`
    pub target_l2_sq: f64,
}

/// Envelope of the certificate's bounded quantity at time `t`.
pub fn envelope_at(cert: &Certificate, init: &InitialNorms, t: f64) -> Result<f64> {
    if !cert.satisfied() {
        return Err(Error::Certificate(format!(
            "hypotheses of the {} result are violated",
            cert.theorem.name()
        )));
    }
    envelope_formula(cert, init, t)
}

/// Evaluates the envelope formula without checking the hypotheses.
pub fn envelope_formula(cert: &Certificate, init: &InitialNorms, t: f64) -> Result<f64> {
    match &cert.rates {
        Rates::Volume { exponent, .. } => Ok((-exponent * t).exp() * init.l2_sq),
        Rates::ModalL2 { omega } => Ok((-omega * t).exp() * init.l2_sq),
        Rates::ModalH1 { .. } => Err(Error::Certificate(
            "the gradient envelope has an unquantified constant".into(),
        )),
        Rates::Steering1 { omega, .. } => Ok((-omega * t).exp() * init.error_l2_sq),
        Rates::Steering2 {
            omega,
            omega_tilde,
            epsilon,
            gamma_gap,
            target_exponent,
            case,
            ..
        } => {
            let forcing = gamma_gap * gamma_gap / epsilon * init.target_l2_sq;
            let lead = (-(omega - epsilon) * t).exp();
            Ok(match case {
                SteeringCase::I => {
                    lead * init.error_l2_sq + forcing / (omega_tilde - epsilon) * (-target_exponent * t).exp()
                }
                SteeringCase::II => lead * init.error_l2_sq + forcing / (epsilon - omega_tilde) * lead,
            })
        }
        Rates::Nodal { rate, .. } => Ok((-rate * t).exp() * init.l2_sq.sqrt()),
    }
}

/// Envelope for `‖u(t)‖²` in the steering-to-decay setting.
pub fn solution_envelope_at(cert: &Certificate, init: &InitialNorms, t: f64) -> Result<f64> {
    if !cert.satisfied() {
        return Err(Error::Certificate("steering hypotheses are violated".into()));
    }
    solution_envelope_formula(cert, init, t)
}

pub fn solution_envelope_formula(cert: &Certificate, init: &InitialNorms, t: f64) -> Result<f64> {
    match &cert.rates {
        Rates::Steering2 {
            omega,
            omega_tilde,
            epsilon,
            gamma_gap,
            target_exponent,
            case,
            ..
        } => {
            let coupling = gamma_gap * gamma_gap / epsilon;
            let lead = (-(omega - epsilon) * t).exp();
            let target = (-target_exponent * t).exp();
            Ok(match case {
                SteeringCase::I => {
                    lead * init.error_l2_sq
                        + init.target_l2_sq * (coupling / (omega_tilde - epsilon) + 1.0) * target
                }
                SteeringCase::II => {
                    lead * (init.error_l2_sq + coupling * init.target_l2_sq / (epsilon - omega_tilde))
                        + init.target_l2_sq * target
                }
            })
        }
        _ => Err(Error::Certificate(
            "solution envelopes exist only for steering to a decaying solution".into(),
        )),
    }
}
