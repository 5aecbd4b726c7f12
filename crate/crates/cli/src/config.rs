//! Flat experiment configuration, one experiment per file.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use cgle_core::certificates::{
    certify_modal_h1, certify_modal_l2, certify_nodal, certify_steering1, certify_steering2, certify_volume,
    Certificate, Rates,
};
use cgle_core::{
    eigen_system, Boundary, CgleParams, ControllerSpec, Domain, DomainSpec, Field, InitialCondition, NodalPlacement,
    RunSettings, SteeringTarget, C64,
};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Interval,
    Rectangle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    None,
    Volume,
    Modal,
    Nodal,
    SteeringAny,
    SteeringStable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    SingleMode,
    RandomSmooth,
    Constant,
}

fn default_name() -> String {
    "experiment".into()
}
fn default_length() -> f64 {
    PI
}
fn default_resolution() -> usize {
    63
}
fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn one_usize() -> usize {
    1
}
fn default_modes() -> usize {
    cgle_core::initial::DEFAULT_RANDOM_MODES
}
fn default_target_seed() -> u64 {
    1
}
fn default_t_final() -> f64 {
    10.0
}
fn default_sample_every() -> f64 {
    0.1
}
fn yes() -> bool {
    true
}
fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,

    #[serde(default = "GeometryKind::default_kind")]
    pub geometry: GeometryKind,
    #[serde(default = "default_length")]
    pub length: f64,
    /// Second side of a rectangle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_y: Option<f64>,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "BoundaryKind::default_kind")]
    pub boundary: BoundaryKind,

    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default)]
    pub mu: f64,
    #[serde(default = "one_usize")]
    pub n_controllers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_tilde: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub linear_oracle: bool,

    #[serde(default = "ControllerKind::default_kind")]
    pub controller: ControllerKind,
    /// Certify the modal controller by the gradient result instead of L².
    #[serde(default)]
    pub certify_h1: bool,
    /// Rate for the gradient result; defaults to half of `ω`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h1_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodal_observation: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodal_actuation: Option<Vec<f64>>,

    #[serde(default = "InitialKind::default_kind")]
    pub initial: InitialKind,
    #[serde(default = "one_usize")]
    pub mode: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "two")]
    pub decay: f64,
    #[serde(default = "default_modes")]
    pub modes: usize,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub constant_re: f64,
    #[serde(default)]
    pub constant_im: f64,

    /// Preset for the steering target; shares decay, modes and amplitude.
    #[serde(default = "InitialKind::default_kind")]
    pub target_initial: InitialKind,
    #[serde(default = "one_usize")]
    pub target_mode: usize,
    #[serde(default = "default_target_seed")]
    pub target_seed: u64,
    #[serde(default)]
    pub target_constant_re: f64,
    #[serde(default)]
    pub target_constant_im: f64,

    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_sample_every")]
    pub sample_every: f64,

    /// Trajectory file name inside the output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,

    #[serde(default = "yes")]
    pub verify: bool,
    /// Also check `‖u‖²` against the solution envelope when steering to a
    /// decaying target.
    #[serde(default = "yes")]
    pub verify_solution: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack: Option<f64>,
    #[serde(default = "half")]
    pub fit_window: f64,
}

impl GeometryKind {
    fn default_kind() -> Self {
        GeometryKind::Interval
    }
}

impl BoundaryKind {
    fn default_kind() -> Self {
        BoundaryKind::Dirichlet
    }
}

impl ControllerKind {
    fn default_kind() -> Self {
        ControllerKind::None
    }
}

impl InitialKind {
    fn default_kind() -> Self {
        InitialKind::RandomSmooth
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("every field has a default")
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn domain(&self) -> Result<Domain, CliError> {
        let boundary = match self.boundary {
            BoundaryKind::Dirichlet => Boundary::Dirichlet,
            BoundaryKind::Neumann => Boundary::Neumann,
        };
        let spec = match self.geometry {
            GeometryKind::Interval => DomainSpec::interval(self.length, self.resolution, boundary),
            GeometryKind::Rectangle => {
                if boundary != Boundary::Dirichlet {
                    return Err(CliError::Config("rectangles support Dirichlet only".into()));
                }
                DomainSpec::rectangle(self.length, self.length_y.unwrap_or(self.length), self.resolution)
            }
        };
        Ok(Domain::new(spec)?)
    }

    pub fn params(&self) -> CgleParams {
        CgleParams {
            lambda: self.lambda,
            alpha: self.alpha,
            kappa: self.kappa,
            beta: self.beta,
            gamma: self.gamma,
            p: self.p,
            mu: self.mu,
            n_controllers: self.n_controllers,
            gamma_tilde: self.gamma_tilde,
            epsilon: self.epsilon,
            linear_oracle: self.linear_oracle,
        }
    }

    pub fn controller(&self) -> Result<ControllerSpec, CliError> {
        Ok(match self.controller {
            ControllerKind::None => ControllerSpec::None,
            ControllerKind::Volume => ControllerSpec::VolumeElements,
            ControllerKind::Modal => ControllerSpec::Modal,
            ControllerKind::Nodal => {
                let placement = match (&self.nodal_observation, &self.nodal_actuation) {
                    (None, None) => None,
                    (Some(obs), Some(act)) => Some(NodalPlacement {
                        observation: obs.clone(),
                        actuation: act.clone(),
                    }),
                    _ => {
                        return Err(CliError::Config(
                            "give both nodal_observation and nodal_actuation or neither".into(),
                        ))
                    }
                };
                ControllerSpec::Nodal(placement)
            }
            ControllerKind::SteeringAny => ControllerSpec::Steering(SteeringTarget::AnySolution),
            ControllerKind::SteeringStable => ControllerSpec::Steering(SteeringTarget::StableTarget),
        })
    }

    fn preset(&self, kind: InitialKind, mode: usize, seed: u64, re: f64, im: f64) -> InitialCondition {
        match kind {
            InitialKind::SingleMode => InitialCondition::SingleMode { k: mode },
            InitialKind::RandomSmooth => InitialCondition::RandomSmooth {
                seed,
                decay: self.decay,
                modes: self.modes,
                amplitude: self.amplitude,
            },
            InitialKind::Constant => InitialCondition::Constant(C64::new(re, im)),
        }
    }

    pub fn initial_condition(&self) -> InitialCondition {
        self.preset(self.initial, self.mode, self.seed, self.constant_re, self.constant_im)
    }

    pub fn target_condition(&self) -> InitialCondition {
        self.preset(
            self.target_initial,
            self.target_mode,
            self.target_seed,
            self.target_constant_re,
            self.target_constant_im,
        )
    }

    /// Initial state and, for steering, the target's initial state.
    pub fn initial_states(&self, domain: &Domain) -> Result<(Field, Option<Field>), CliError> {
        let u0 = self.initial_condition().build(domain)?;
        let v0 = if self.controller()?.needs_target() {
            Some(self.target_condition().build(domain)?)
        } else {
            None
        };
        Ok((u0, v0))
    }

    pub fn settings(&self) -> RunSettings {
        RunSettings {
            t_final: self.t_final,
            dt: self.dt,
            sample_every: self.sample_every,
        }
    }

    /// The certificate of the result that covers the configured controller,
    /// `None` for the uncontrolled equation.
    pub fn certificate(&self, domain: &Domain) -> Result<Option<Certificate>, CliError> {
        let params = self.params();
        let n = params.n_controllers;
        let interval_length = || -> Result<f64, CliError> {
            if domain.is_interval() {
                Ok(domain.characteristic_length())
            } else {
                Err(CliError::Config("this controller is analysed on intervals only".into()))
            }
        };
        let modal_system = || -> Result<_, CliError> {
            if domain.boundary() != Boundary::Dirichlet {
                return Err(CliError::Config("modal results are stated for Dirichlet domains".into()));
            }
            Ok(eigen_system(domain, n + 1)?)
        };
        let cert = match self.controller {
            ControllerKind::None => return Ok(None),
            ControllerKind::Volume => {
                if domain.boundary() != Boundary::Neumann {
                    return Err(CliError::Config(
                        "the volume-element result is stated for Neumann intervals".into(),
                    ));
                }
                certify_volume(&params, interval_length()?)
            }
            ControllerKind::Modal if self.certify_h1 => {
                let es = modal_system()?;
                let omega = match certify_modal_l2(&params, &es)?.rates {
                    Rates::ModalL2 { omega } => omega,
                    _ => unreachable!(),
                };
                let delta = self.h1_delta.unwrap_or(0.5 * omega);
                certify_modal_h1(&params, &es, domain.dimension(), delta)?
            }
            ControllerKind::Modal => certify_modal_l2(&params, &modal_system()?)?,
            ControllerKind::Nodal => {
                if domain.boundary() != Boundary::Dirichlet {
                    return Err(CliError::Config("the nodal result is stated for Dirichlet intervals".into()));
                }
                certify_nodal(&params, interval_length()?)
            }
            ControllerKind::SteeringAny => certify_steering1(&params, &modal_system()?)?,
            ControllerKind::SteeringStable => certify_steering2(&params, &modal_system()?)?,
        };
        Ok(Some(cert))
    }

    /// Sets a scalar field by name, as used by sweeps.
    pub fn set_scalar(&mut self, name: &str, value: f64) -> Result<(), CliError> {
        let count = || -> Result<usize, CliError> {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(CliError::Config(format!("{name} must be a non-negative integer, got {value}")))
            }
        };
        match name {
            "lambda" => self.lambda = value,
            "alpha" => self.alpha = value,
            "kappa" => self.kappa = value,
            "beta" => self.beta = value,
            "gamma" => self.gamma = value,
            "p" => self.p = value,
            "mu" => self.mu = value,
            "n_controllers" | "N" => self.n_controllers = count()?,
            "gamma_tilde" => self.gamma_tilde = Some(value),
            "epsilon" => self.epsilon = Some(value),
            "length" => self.length = value,
            "resolution" => self.resolution = count()?,
            "dt" => self.dt = Some(value),
            "t_final" => self.t_final = value,
            "seed" => self.seed = count()? as u64,
            _ => return Err(CliError::Config(format!("unknown sweep parameter {name}"))),
        }
        Ok(())
    }
}
