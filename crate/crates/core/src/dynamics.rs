//! Right-hand side assembly and time integration of
//!
//! ```text
//! u_t = (λ + iα) Δu − (κ + iβ)|u|^p u + γ u + control
//! ```
//!
//! The diagonal linear part is propagated exactly in the eigenbasis; the
//! nonlinearity and the feedback are advanced with Kutta's three-stage
//! Runge–Kutta method in integrating-factor (Lawson) form. All propagators
//! run forward in time, so the stiff diffusion never amplifies round-off.

use crate::controllers::{Controller, ControllerSpec, SteeringTarget};
use crate::domain::{compute_norms, laplacian_apply, Domain, Field, ModalCoeffs, C64};
use crate::error::{Error, Result};

/// Pointwise magnitude above which a run is declared blown up.
pub const BLOW_UP_THRESHOLD: f64 = 1e6;

const MAX_DEFAULT_DT: f64 = 1e-3;

/// Scalar physical and control parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CgleParams {
    /// Diffusion `λ > 0`.
    pub lambda: f64,
    /// Linear dispersion `α`.
    pub alpha: f64,
    /// Nonlinear damping `κ`.
    pub kappa: f64,
    /// Nonlinear frequency `β`.
    pub beta: f64,
    /// Linear gain `γ`.
    pub gamma: f64,
    /// Source-power index `p > 0`.
    pub p: f64,
    /// Feedback gain `μ ≥ 0`.
    pub mu: f64,
    /// Number of controllers `N ≥ 1`.
    pub n_controllers: usize,
    /// Gain `γ̃` of a stable steering target.
    pub gamma_tilde: Option<f64>,
    /// Slack `ε` in the steering-to-decay envelopes.
    pub epsilon: Option<f64>,
    /// Permits `κ = β = 0`, the linear regime with an exact modal solution.
    pub linear_oracle: bool,
}

impl Default for CgleParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            alpha: 0.0,
            kappa: 1.0,
            beta: 0.0,
            gamma: 0.0,
            p: 2.0,
            mu: 0.0,
            n_controllers: 1,
            gamma_tilde: None,
            epsilon: None,
            linear_oracle: false,
        }
    }
}

impl CgleParams {
    pub fn validate(&self) -> Result<()> {
        let scalars = [
            ("lambda", self.lambda),
            ("alpha", self.alpha),
            ("kappa", self.kappa),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("p", self.p),
            ("mu", self.mu),
        ];
        if let Some((name, _)) = scalars.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParameters(format!("{name} is not finite")));
        }
        let bad = |msg: &str| Err(Error::InvalidParameters(msg.into()));
        if self.lambda <= 0.0 {
            return bad("lambda must be positive");
        }
        if self.n_controllers == 0 {
            return bad("at least one controller is required");
        }
        if self.p <= 0.0 {
            return bad("p must be positive");
        }
        if self.mu < 0.0 {
            return bad("mu must be nonnegative");
        }
        if self.kappa < 0.0 {
            return bad("kappa must be nonnegative");
        }
        if self.linear_oracle {
            if self.kappa != 0.0 || self.beta != 0.0 {
                return bad("linear oracle mode requires kappa = beta = 0");
            }
        } else if self.kappa == 0.0 {
            return bad("kappa = 0 is only allowed in linear oracle mode");
        }
        Ok(())
    }

    fn nonlinear_coefficient(&self) -> C64 {
        C64::new(self.kappa, self.beta)
    }

    fn is_linear(&self) -> bool {
        self.kappa == 0.0 && self.beta == 0.0
    }
}

/// `−(κ + iβ)|u|^p u`, with the value at `u = 0` defined as 0.
fn nonlinear_term(values: &[C64], params: &CgleParams) -> Vec<C64> {
    if params.is_linear() {
        return vec![C64::new(0.0, 0.0); values.len()];
    }
    let coef = -params.nonlinear_coefficient();
    values
        .iter()
        .map(|&u| {
            let r = u.norm();
            if r == 0.0 {
                C64::new(0.0, 0.0)
            } else {
                coef * u * r.powf(params.p)
            }
        })
        .collect()
}

/// Right-hand side `(λ+iα)Δu − (κ+iβ)|u|^p u + γu + control`.
pub fn assemble_rhs(u: &Field, params: &CgleParams, control: &Field) -> Result<Field> {
    if !u.same_grid(control) {
        return Err(Error::GridMismatch);
    }
    let lap = laplacian_apply(u);
    let diffusion = C64::new(params.lambda, params.alpha);
    let nl = nonlinear_term(u.values(), params);
    let values = u
        .values()
        .iter()
        .zip(lap.values())
        .zip(nl)
        .zip(control.values())
        .map(|(((u, l), n), c)| diffusion * l + n + u * params.gamma + c)
        .collect();
    Field::from_values(u.domain(), values)
}

/// Diagonal propagator `exp[(g − (λ+iα)λ_s) τ]` for every spectral slot.
fn propagator(domain: &Domain, params: &CgleParams, gain: f64, tau: f64) -> Vec<C64> {
    let diffusion = C64::new(params.lambda, params.alpha);
    domain
        .slot_eigenvalues()
        .iter()
        .map(|&ev| ((C64::new(gain, 0.0) - diffusion * ev) * tau).exp())
        .collect()
}

/// One integrator bound to a grid, parameter set, controller and step size.
pub struct Integrator {
    domain: Domain,
    params: CgleParams,
    controller: Controller,
    dt: f64,
    /// Full and half-step propagators for the controlled state.
    full_u: Vec<C64>,
    half_u: Vec<C64>,
    /// Same for the co-evolved target, if any.
    target: Option<(Vec<C64>, Vec<C64>)>,
}

impl Integrator {
    pub fn new(domain: &Domain, params: &CgleParams, spec: &ControllerSpec, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameters(format!("time step {dt} must be positive")));
        }
        let controller = Controller::new(spec, params, domain)?;
        let target = match spec {
            ControllerSpec::Steering(kind) => {
                let gain = target_gain(params, *kind)?;
                Some((
                    propagator(domain, params, gain, dt),
                    propagator(domain, params, gain, 0.5 * dt),
                ))
            }
            _ => None,
        };
        Ok(Self {
            domain: domain.clone(),
            params: params.clone(),
            controller,
            dt,
            full_u: propagator(domain, params, params.gamma, dt),
            half_u: propagator(domain, params, params.gamma, 0.5 * dt),
            target,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Explicit terms for the stacked state `[u]` or `[u, v]` (grid values).
    fn explicit(&self, state: &[Vec<C64>]) -> Result<Vec<Vec<C64>>> {
        let u = Field::from_values(&self.domain, state[0].clone())?;
        let v = match state.get(1) {
            Some(vals) => Some(Field::from_values(&self.domain, vals.clone())?),
            None => None,
        };
        let control = self.controller.apply(&u, v.as_ref())?;
        let mut nu = nonlinear_term(&state[0], &self.params);
        for (n, c) in nu.iter_mut().zip(control.values()) {
            *n += c;
        }
        let mut out = vec![nu];
        if let Some(vals) = state.get(1) {
            out.push(nonlinear_term(vals, &self.params));
        }
        Ok(out)
    }

    fn props(&self, component: usize) -> (&[C64], &[C64]) {
        match component {
            0 => (&self.full_u, &self.half_u),
            _ => {
                let (f, h) = self.target.as_ref().expect("target propagators");
                (f, h)
            }
        }
    }

    /// Advances the stacked grid state by one step.
    fn advance(&self, state: &[Vec<C64>]) -> Result<Vec<Vec<C64>>> {
        let h = self.dt;
        let d = &self.domain;
        let fwd = |s: Vec<Vec<C64>>| -> Vec<Vec<C64>> { s.iter().map(|v| d.forward(v)).collect() };

        let hat0: Vec<Vec<C64>> = state.iter().map(|v| d.forward(v)).collect();
        let k1 = fwd(self.explicit(state)?);

        let stage2: Vec<Vec<C64>> = (0..state.len())
            .map(|c| {
                let (_, half) = self.props(c);
                let s: Vec<C64> = hat0[c]
                    .iter()
                    .zip(&k1[c])
                    .zip(half)
                    .map(|((u, k), e)| e * (u + k * (0.5 * h)))
                    .collect();
                d.backward(&s)
            })
            .collect();
        let k2 = fwd(self.explicit(&stage2)?);

        let stage3: Vec<Vec<C64>> = (0..state.len())
            .map(|c| {
                let (full, half) = self.props(c);
                let s: Vec<C64> = (0..hat0[c].len())
                    .map(|i| full[i] * (hat0[c][i] - k1[c][i] * h) + half[i] * k2[c][i] * (2.0 * h))
                    .collect();
                d.backward(&s)
            })
            .collect();
        let k3 = fwd(self.explicit(&stage3)?);

        Ok((0..state.len())
            .map(|c| {
                let (full, half) = self.props(c);
                let s: Vec<C64> = (0..hat0[c].len())
                    .map(|i| {
                        full[i] * hat0[c][i]
                            + (full[i] * k1[c][i] + half[i] * k2[c][i] * 4.0 + k3[c][i]) * (h / 6.0)
                    })
                    .collect();
                d.backward(&s)
            })
            .collect())
    }

    /// One step of the controlled equation alone (no target).
    pub fn step(&self, u: &Field) -> Result<Field> {
        if self.target.is_some() {
            return Err(Error::Controller(
                "steering integrators advance (u, v) pairs; use step_pair".into(),
            ));
        }
        let next = self.advance(&[u.values().to_vec()])?;
        Field::from_values(&self.domain, next.into_iter().next().expect("one component"))
    }

    /// One step of the controlled state and its steering target.
    pub fn step_pair(&self, u: &Field, v: &Field) -> Result<(Field, Field)> {
        if self.target.is_none() {
            return Err(Error::Controller("no steering target configured".into()));
        }
        if !u.same_grid(v) {
            return Err(Error::GridMismatch);
        }
        let mut next = self.advance(&[u.values().to_vec(), v.values().to_vec()])?.into_iter();
        let u1 = Field::from_values(&self.domain, next.next().expect("u"))?;
        let v1 = Field::from_values(&self.domain, next.next().expect("v"))?;
        Ok((u1, v1))
    }
}

fn target_gain(params: &CgleParams, kind: SteeringTarget) -> Result<f64> {
    match kind {
        SteeringTarget::AnySolution => Ok(params.gamma),
        SteeringTarget::StableTarget => params.gamma_tilde.ok_or_else(|| {
            Error::InvalidParameters("a stable steering target needs gamma_tilde".into())
        }),
    }
}

fn diverged_state(f: &Field) -> bool {
    !f.is_finite() || f.max_abs() > BLOW_UP_THRESHOLD
}

/// Single step of `u` from scratch. Simulations should reuse an [`Integrator`].
pub fn step(u: &Field, params: &CgleParams, controller: &ControllerSpec, dt: f64) -> Result<Field> {
    let integrator = Integrator::new(u.domain(), params, controller, dt)?;
    let next = integrator.step(u)?;
    if diverged_state(&next) {
        return Err(Error::Diverged {
            time: dt,
            partial: Box::new(TrajectoryRecord::empty(params, controller, dt)),
        });
    }
    Ok(next)
}

/// Time step used when none is given: `min(1e-3, 0.1/(|γ| + μ + κ·max|u0|^p))`.
pub fn default_dt(params: &CgleParams, u0: &Field) -> f64 {
    let rate = params.gamma.abs() + params.mu + params.kappa * u0.max_abs().powf(params.p);
    if rate > 0.0 {
        MAX_DEFAULT_DT.min(0.1 / rate)
    } else {
        MAX_DEFAULT_DT
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub t_final: f64,
    /// `None` selects [`default_dt`].
    pub dt: Option<f64>,
    pub sample_every: f64,
}

/// Sampled norms of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub l2_sq: Vec<f64>,
    pub h1_semi_sq: Vec<f64>,
    pub lpp: Vec<f64>,
    /// `‖u − v‖²`, present for steering runs.
    pub z_l2_sq: Option<Vec<f64>>,
    /// `‖v‖²`, present for steering runs.
    pub v_l2_sq: Option<Vec<f64>>,
    pub params: CgleParams,
    pub controller: ControllerSpec,
    pub dt: f64,
}

impl TrajectoryRecord {
    fn empty(params: &CgleParams, controller: &ControllerSpec, dt: f64) -> Self {
        let target = controller.needs_target();
        Self {
            times: Vec::new(),
            l2_sq: Vec::new(),
            h1_semi_sq: Vec::new(),
            lpp: Vec::new(),
            z_l2_sq: target.then(Vec::new),
            v_l2_sq: target.then(Vec::new),
            params: params.clone(),
            controller: controller.clone(),
            dt,
        }
    }

    fn push(&mut self, t: f64, u: &Field, v: Option<&Field>) {
        let n = compute_norms(u, self.params.p);
        self.times.push(t);
        self.l2_sq.push(n.l2_sq);
        self.h1_semi_sq.push(n.h1_seminorm_sq);
        self.lpp.push(n.lpp);
        if let (Some(v), Some(zs), Some(vs)) = (v, self.z_l2_sq.as_mut(), self.v_l2_sq.as_mut()) {
            let z = u.try_sub(v).expect("same grid");
            zs.push(z.l2_sq());
            vs.push(v.l2_sq());
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// A finished run: the record plus the final states.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub record: TrajectoryRecord,
    pub final_state: Field,
    pub final_target: Option<Field>,
}

/// Integrates from `u0` (and the steering target `v0`) to `t_final`,
/// sampling norms at every multiple of `sample_every`.
///
/// The step is shrunk if needed so that `sample_every` is an integer
/// number of steps.
pub fn simulate(
    u0: &Field,
    v0: Option<&Field>,
    params: &CgleParams,
    controller: &ControllerSpec,
    settings: &RunSettings,
) -> Result<Trajectory> {
    params.validate()?;
    let RunSettings {
        t_final,
        dt,
        sample_every,
    } = *settings;
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidParameters("t_final must be positive".into()));
    }
    if !(sample_every > 0.0 && sample_every <= t_final) {
        return Err(Error::InvalidParameters(
            "sample_every must lie in (0, t_final]".into(),
        ));
    }
    let target0 = match (controller.needs_target(), v0) {
        (true, Some(v)) => {
            if !u0.same_grid(v) {
                return Err(Error::GridMismatch);
            }
            Some(v.clone())
        }
        (true, None) => {
            return Err(Error::InvalidParameters(
                "steering runs need a target initial state".into(),
            ))
        }
        (false, _) => None,
    };

    let requested = dt.unwrap_or_else(|| default_dt(params, u0));
    if !(requested > 0.0) {
        return Err(Error::InvalidParameters("dt must be positive".into()));
    }
    let steps_per_sample = (sample_every / requested - 1e-9).ceil().max(1.0) as usize;
    let dt = sample_every / steps_per_sample as f64;
    let samples = (t_final / sample_every + 1e-9).floor() as usize;

    let integrator = Integrator::new(u0.domain(), params, controller, dt)?;
    let mut record = TrajectoryRecord::empty(params, controller, dt);
    let mut u = u0.clone();
    let mut v = target0;
    record.push(0.0, &u, v.as_ref());

    for sample in 1..=samples {
        for s in 0..steps_per_sample {
            let t = ((sample - 1) * steps_per_sample + s + 1) as f64 * dt;
            let stepped = match &v {
                Some(vv) => integrator.step_pair(&u, vv).map(|(a, b)| (a, Some(b))),
                None => integrator.step(&u).map(|a| (a, None)),
            };
            let (un, vn) = stepped?;
            if diverged_state(&un) || vn.as_ref().is_some_and(diverged_state) {
                return Err(Error::Diverged {
                    time: t,
                    partial: Box::new(record),
                });
            }
            u = un;
            v = vn;
        }
        record.push(sample as f64 * sample_every, &u, v.as_ref());
    }

    Ok(Trajectory {
        record,
        final_state: u,
        final_target: v,
    })
}

/// Exact solution of the linear (`κ = β = 0`) modally controlled equation:
/// `c_k(t) = c_k(0) exp[(γ − λλ_k − μ·1{k≤N}) t] exp[−iαλ_k t]`.
pub fn linear_modal_exact(c0: &ModalCoeffs, params: &CgleParams, t: f64) -> Result<ModalCoeffs> {
    if params.kappa != 0.0 || params.beta != 0.0 {
        return Err(Error::InvalidParameters(
            "the exact modal solution needs kappa = beta = 0".into(),
        ));
    }
    let eigsys = crate::domain::eigen_system(c0.domain(), c0.len())?;
    let coeffs = c0
        .coeffs()
        .iter()
        .zip(eigsys.eigenvalues())
        .enumerate()
        .map(|(k, (c, ev))| {
            let damping = if k < params.n_controllers { params.mu } else { 0.0 };
            let growth = (params.gamma - params.lambda * ev - damping) * t;
            c * C64::new(growth, -params.alpha * ev * t).exp()
        })
        .collect();
    ModalCoeffs::new(c0.domain(), coeffs)
}
