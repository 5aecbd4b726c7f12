//! The four finite-parameter feedback laws.
//!
//! Each law maps the current state to a forcing field added to the right-hand
//! side. The gain `μ` and the controller count `N` come from [`CgleParams`].

use std::fmt;

use crate::domain::{Boundary, Domain, EigenSystem, Field, C64};
use crate::dynamics::CgleParams;
use crate::error::{Error, Result};

/// Which solution a steering controller tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteeringTarget {
    /// Any solution of the uncontrolled equation (same linear gain `γ`).
    AnySolution,
    /// A solution of the uncontrolled equation with gain `γ̃ < λλ_1`.
    StableTarget,
}

/// Observation points `x̄_k` and actuation points `x_k`, one per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalPlacement {
    pub observation: Vec<f64>,
    pub actuation: Vec<f64>,
}

impl NodalPlacement {
    pub fn midpoints(length: f64, n: usize) -> Self {
        let h = length / n as f64;
        let mids: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) * h).collect();
        Self {
            observation: mids.clone(),
            actuation: mids,
        }
    }

    /// Checks `x_k, x̄_k ∈ [(k-1)h, kh)` for every cell.
    pub fn validate(&self, length: f64, n: usize) -> Result<()> {
        if self.observation.len() != n || self.actuation.len() != n {
            return Err(Error::Controller(format!(
                "nodal placement needs exactly {n} observation and actuation points"
            )));
        }
        let h = length / n as f64;
        for k in 0..n {
            let (lo, hi) = (k as f64 * h, (k + 1) as f64 * h);
            for (label, x) in [("observation", self.observation[k]), ("actuation", self.actuation[k])] {
                if !(x >= lo && x < hi) {
                    return Err(Error::Controller(format!(
                        "{label} point {x} lies outside cell {} = [{lo}, {hi})",
                        k + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum ControllerSpec {
    #[default]
    None,
    VolumeElements,
    Modal,
    /// `None` placement means cell midpoints.
    Nodal(Option<NodalPlacement>),
    Steering(SteeringTarget),
}

impl ControllerSpec {
    pub fn needs_target(&self) -> bool {
        matches!(self, ControllerSpec::Steering(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            ControllerSpec::None => "none",
            ControllerSpec::VolumeElements => "volume",
            ControllerSpec::Modal => "modal",
            ControllerSpec::Nodal(_) => "nodal",
            ControllerSpec::Steering(SteeringTarget::AnySolution) => "steering-any",
            ControllerSpec::Steering(SteeringTarget::StableTarget) => "steering-stable",
        }
    }
}

impl fmt::Display for ControllerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Piecewise-constant cell averages `I_h u = Σ ū_k χ_{J_k}`.
///
/// Cell boundaries must fall on grid nodes, i.e. the number of grid
/// intervals (`M+1` Dirichlet, `M-1` Neumann) must be divisible by `N`.
/// Averages use the composite trapezoid rule; a node on a cell boundary
/// belongs to the cell on its right, the last node to the last cell.
pub fn volume_interpolant(u: &Field, n: usize) -> Result<Field> {
    let cells = CellLayout::new(u.domain(), n)?;
    let means = cells.means(u);
    let values = (0..u.values().len())
        .map(|j| means[cells.cell_of(j)])
        .collect();
    Field::from_values(u.domain(), values)
}

/// The `N` cell averages `ū_k`, left to right.
pub fn cell_means(u: &Field, n: usize) -> Result<Vec<C64>> {
    Ok(CellLayout::new(u.domain(), n)?.means(u))
}

struct CellLayout {
    per_cell: usize,
    cells: usize,
    /// Offset from storage index to extended (boundary-inclusive) index.
    offset: usize,
    boundary: Boundary,
}

impl CellLayout {
    fn new(domain: &Domain, n: usize) -> Result<Self> {
        if !domain.is_interval() {
            return Err(Error::Controller(
                "cell averages are only defined on intervals".into(),
            ));
        }
        if n == 0 {
            return Err(Error::Controller("need at least one cell".into()));
        }
        let m = domain.resolution();
        let (intervals, offset) = match domain.boundary() {
            Boundary::Dirichlet => (m + 1, 1),
            Boundary::Neumann => (m - 1, 0),
        };
        if intervals % n != 0 {
            return Err(Error::Controller(format!(
                "grid with {intervals} intervals cannot be split into {n} aligned cells"
            )));
        }
        Ok(Self {
            per_cell: intervals / n,
            cells: n,
            offset,
            boundary: domain.boundary(),
        })
    }

    fn extended(&self, u: &Field) -> Vec<C64> {
        match self.boundary {
            Boundary::Neumann => u.values().to_vec(),
            Boundary::Dirichlet => {
                let zero = C64::new(0.0, 0.0);
                std::iter::once(zero)
                    .chain(u.values().iter().copied())
                    .chain(std::iter::once(zero))
                    .collect()
            }
        }
    }

    fn means(&self, u: &Field) -> Vec<C64> {
        let ext = self.extended(u);
        (0..self.cells)
            .map(|k| {
                let (a, b) = (k * self.per_cell, (k + 1) * self.per_cell);
                let inner: C64 = ext[a..=b].iter().sum();
                (inner - (ext[a] + ext[b]) * 0.5) / self.per_cell as f64
            })
            .collect()
    }

    fn cell_of(&self, storage_index: usize) -> usize {
        ((storage_index + self.offset) / self.per_cell).min(self.cells - 1)
    }
}

/// `-μ I_h u`.
pub fn apply_volume_controller(u: &Field, params: &CgleParams) -> Result<Field> {
    Ok(volume_interpolant(u, params.n_controllers)?.scaled(C64::new(-params.mu, 0.0)))
}

/// `-μ Σ_{k≤N} (u, ω_k) ω_k`.
pub fn apply_modal_controller(u: &Field, params: &CgleParams, eigsys: &EigenSystem) -> Result<Field> {
    let slots = controlled_slots(u.domain(), params.n_controllers, eigsys)?;
    Ok(modal_feedback(u, &slots, params.mu))
}

/// `-μ h Σ u(x̄_k) δ(x - x_k)`, with the delta at the node nearest `x_k`
/// scaled by `1/Δx`.
pub fn apply_nodal_controller(u: &Field, params: &CgleParams, placement: &NodalPlacement) -> Result<Field> {
    let nodes = NodalNodes::new(u.domain(), params.n_controllers, placement)?;
    Ok(nodes.apply(u, params.mu))
}

/// Modal feedback on the tracking error `u - v`.
pub fn apply_steering_controller(
    u: &Field,
    v: &Field,
    params: &CgleParams,
    eigsys: &EigenSystem,
) -> Result<Field> {
    let z = u.try_sub(v)?;
    apply_modal_controller(&z, params, eigsys)
}

fn controlled_slots(domain: &Domain, n: usize, eigsys: &EigenSystem) -> Result<Vec<usize>> {
    if domain.boundary() != Boundary::Dirichlet {
        return Err(Error::Controller(
            "modal feedback requires Dirichlet eigenfunctions".into(),
        ));
    }
    if eigsys.domain() != domain {
        return Err(Error::GridMismatch);
    }
    if n == 0 || n > eigsys.len() {
        return Err(Error::ModeCount {
            requested: n,
            available: eigsys.len(),
        });
    }
    Ok(eigsys.pairs()[..n].iter().map(|p| p.slot).collect())
}

fn modal_feedback(u: &Field, slots: &[usize], mu: f64) -> Field {
    let domain = u.domain();
    let full = domain.forward(u.values());
    let mut projected = vec![C64::new(0.0, 0.0); full.len()];
    for &s in slots {
        projected[s] = full[s] * (-mu);
    }
    Field::from_values(domain, domain.backward(&projected)).expect("same grid")
}

struct NodalNodes {
    observe: Vec<Option<usize>>,
    actuate: Vec<usize>,
    /// `h / Δx`.
    weight: f64,
}

impl NodalNodes {
    fn new(domain: &Domain, n: usize, placement: &NodalPlacement) -> Result<Self> {
        if !domain.is_interval() || domain.boundary() != Boundary::Dirichlet {
            return Err(Error::Controller(
                "nodal feedback requires a Dirichlet interval".into(),
            ));
        }
        let length = domain.lengths()[0];
        placement.validate(length, n)?;
        let dx = domain.spacing();
        let m = domain.resolution();
        // Extended index e: node x = e·Δx, interior nodes are e = 1..=M.
        let nearest = |x: f64| (x / dx).round() as usize;
        let observe = placement
            .observation
            .iter()
            .map(|&x| match nearest(x) {
                e if e == 0 || e > m => None,
                e => Some(e - 1),
            })
            .collect();
        let actuate = placement
            .actuation
            .iter()
            .map(|&x| match nearest(x) {
                e if e == 0 || e > m => Err(Error::Controller(format!(
                    "actuation point {x} collides with a boundary node"
                ))),
                e => Ok(e - 1),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            observe,
            actuate,
            weight: (length / n as f64) / dx,
        })
    }

    fn apply(&self, u: &Field, mu: f64) -> Field {
        let mut out = Field::zeros(u.domain());
        let vals = u.values();
        for (obs, &act) in self.observe.iter().zip(&self.actuate) {
            let observed = obs.map_or(C64::new(0.0, 0.0), |j| vals[j]);
            out.values_mut()[act] -= observed * (mu * self.weight);
        }
        out
    }
}

/// A controller bound to a grid, ready to be evaluated every stage.
pub struct Controller {
    spec: ControllerSpec,
    mu: f64,
    law: Law,
}

enum Law {
    None,
    Volume(usize),
    Modal(Vec<usize>),
    Nodal(NodalNodes),
    Steering(Vec<usize>),
}

impl Controller {
    pub fn new(spec: &ControllerSpec, params: &CgleParams, domain: &Domain) -> Result<Self> {
        let n = params.n_controllers;
        let law = match spec {
            ControllerSpec::None => Law::None,
            ControllerSpec::VolumeElements => {
                CellLayout::new(domain, n)?;
                Law::Volume(n)
            }
            ControllerSpec::Modal | ControllerSpec::Steering(_) => {
                let eigsys = crate::domain::eigen_system(domain, n)?;
                let slots = controlled_slots(domain, n, &eigsys)?;
                if spec.needs_target() {
                    Law::Steering(slots)
                } else {
                    Law::Modal(slots)
                }
            }
            ControllerSpec::Nodal(placement) => {
                let placement = match placement {
                    Some(p) => p.clone(),
                    None => {
                        if !domain.is_interval() {
                            return Err(Error::Controller(
                                "nodal feedback requires a Dirichlet interval".into(),
                            ));
                        }
                        NodalPlacement::midpoints(domain.lengths()[0], n)
                    }
                };
                Law::Nodal(NodalNodes::new(domain, n, &placement)?)
            }
        };
        Ok(Self {
            spec: spec.clone(),
            mu: params.mu,
            law,
        })
    }

    pub fn spec(&self) -> &ControllerSpec {
        &self.spec
    }

    /// Feedback field for state `u`; `target` is required by steering laws.
    pub fn apply(&self, u: &Field, target: Option<&Field>) -> Result<Field> {
        match &self.law {
            Law::None => Ok(Field::zeros(u.domain())),
            Law::Volume(n) => Ok(volume_interpolant(u, *n)?.scaled(C64::new(-self.mu, 0.0))),
            Law::Modal(slots) => Ok(modal_feedback(u, slots, self.mu)),
            Law::Nodal(nodes) => Ok(nodes.apply(u, self.mu)),
            Law::Steering(slots) => {
                let v = target.ok_or_else(|| {
                    Error::Controller("steering feedback needs the target state".into())
                })?;
                Ok(modal_feedback(&u.try_sub(v)?, slots, self.mu))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_domain, eigen_system, DomainSpec};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn params(mu: f64, n: usize) -> CgleParams {
        CgleParams {
            mu,
            n_controllers: n,
            ..CgleParams::default()
        }
    }

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn interpolant_of_constant_and_linear() {
        let d = build_domain(DomainSpec::interval(1.0, 65, Boundary::Neumann)).unwrap();
        let c = Field::constant(&d, C64::new(0.3, -1.2));
        assert!(volume_interpolant(&c, 4).unwrap().max_diff(&c).unwrap() < 1e-14);

        let lin = Field::from_fn(&d, |x, _| re(x));
        let ih = volume_interpolant(&lin, 2).unwrap();
        for (x, v) in d.grid_x().iter().zip(ih.values()) {
            let want = if *x < 0.5 { 0.25 } else { 0.75 };
            assert_abs_diff_eq!(v.re, want, epsilon = 1e-14);
        }
    }

    #[test]
    fn interpolant_is_linear() {
        let d = build_domain(DomainSpec::interval(2.0, 33, Boundary::Neumann)).unwrap();
        let u = Field::from_fn(&d, |x, _| C64::new(x.sin(), x * x));
        let v = Field::from_fn(&d, |x, _| C64::new((3.0 * x).cos(), -x));
        let (a, b) = (C64::new(0.5, 2.0), C64::new(-1.5, 0.25));
        let lhs = volume_interpolant(&u.combine(a, &v, b).unwrap(), 8).unwrap();
        let rhs = volume_interpolant(&u, 8)
            .unwrap()
            .combine(a, &volume_interpolant(&v, 8).unwrap(), b)
            .unwrap();
        assert!(lhs.max_diff(&rhs).unwrap() < 1e-12);
    }

    #[test]
    fn misaligned_cells_rejected() {
        let d = build_domain(DomainSpec::interval(1.0, 64, Boundary::Neumann)).unwrap();
        assert!(volume_interpolant(&Field::zeros(&d), 2).is_err());
        let r = build_domain(DomainSpec::rectangle(1.0, 1.0, 31)).unwrap();
        assert!(volume_interpolant(&Field::zeros(&r), 2).is_err());
    }

    #[test]
    fn volume_controller_values() {
        let d = build_domain(DomainSpec::interval(1.0, 65, Boundary::Neumann)).unwrap();
        let one = Field::constant(&d, re(1.0));
        let out = apply_volume_controller(&one, &params(2.0, 4)).unwrap();
        assert!(out.values().iter().all(|v| (v - re(-2.0)).norm() < 1e-14));
        let out = apply_volume_controller(&one, &params(0.0, 4)).unwrap();
        assert_eq!(out.max_abs(), 0.0);
    }

    #[test]
    fn volume_controller_on_sine_quarters() {
        // Exact cell means of sin(2πx) over quarter cells are ±2/π; the
        // trapezoid rule on Δx = 1/256 is accurate to ~1e-5.
        let d = build_domain(DomainSpec::interval(1.0, 255, Boundary::Dirichlet)).unwrap();
        let u = Field::from_fn(&d, |x, _| re((2.0 * PI * x).sin()));
        let out = apply_volume_controller(&u, &params(1.0, 4)).unwrap();
        let expected = [-2.0 / PI, -2.0 / PI, 2.0 / PI, 2.0 / PI];
        for (x, v) in d.grid_x().iter().zip(out.values()) {
            let cell = ((x * 4.0) as usize).min(3);
            assert_abs_diff_eq!(v.re, expected[cell], epsilon = 5e-5);
        }
    }

    #[test]
    fn modal_controller_projection() {
        let d = build_domain(DomainSpec::interval(PI, 32, Boundary::Dirichlet)).unwrap();
        let es = eigen_system(&d, 8).unwrap();
        let w = |k: usize| es.eigenfunction(k - 1);

        let out = apply_modal_controller(&w(1), &params(2.0, 1), &es).unwrap();
        assert!(out.max_diff(&w(1).scaled(re(-2.0))).unwrap() < 1e-12);

        let u = w(1).try_add(&w(3)).unwrap();
        let out = apply_modal_controller(&u, &params(1.0, 2), &es).unwrap();
        assert!(out.max_diff(&w(1).scaled(re(-1.0))).unwrap() < 1e-12);

        let orth = w(4).combine(re(1.0), &w(7), C64::new(0.0, 3.0)).unwrap();
        let out = apply_modal_controller(&orth, &params(5.0, 3), &es).unwrap();
        assert!(out.max_abs() < 1e-10);

        assert!(apply_modal_controller(&u, &params(1.0, 9), &es).is_err());
        let n = build_domain(DomainSpec::interval(PI, 32, Boundary::Neumann)).unwrap();
        let en = eigen_system(&n, 4).unwrap();
        assert!(apply_modal_controller(&Field::zeros(&n), &params(1.0, 1), &en).is_err());
    }

    #[test]
    fn nodal_spike() {
        let d = build_domain(DomainSpec::interval(PI, 63, Boundary::Dirichlet)).unwrap();
        let u = Field::constant(&d, re(1.0));
        let placement = NodalPlacement::midpoints(PI, 1);
        let out = apply_nodal_controller(&u, &params(1.0, 1), &placement).unwrap();
        let dx = d.spacing();
        let nonzero: Vec<(usize, C64)> = out
            .values()
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, v)| v.norm() > 0.0)
            .collect();
        assert_eq!(nonzero.len(), 1);
        let (j, v) = nonzero[0];
        assert_abs_diff_eq!(d.grid_x()[j], PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.re, -PI / dx, epsilon = 1e-10);

        let zero = apply_nodal_controller(&Field::zeros(&d), &params(1.0, 1), &placement).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn nodal_duality_pairing() {
        let d = build_domain(DomainSpec::interval(PI, 63, Boundary::Dirichlet)).unwrap();
        let placement = NodalPlacement {
            observation: vec![0.3, 1.0, 1.9, 2.5],
            actuation: vec![0.6, 1.2, 1.7, 3.0],
        };
        let p = params(1.7, 4);
        let u = Field::from_fn(&d, |x, _| C64::new(x.sin(), (2.0 * x).sin()));
        let v = Field::from_fn(&d, |x, _| C64::new((3.0 * x).sin(), x * (PI - x)));
        let ctrl = apply_nodal_controller(&u, &p, &placement).unwrap();
        let lhs = ctrl.inner(&v).unwrap();

        let dx = d.spacing();
        let at = |f: &Field, x: f64| f.values()[(x / dx).round() as usize - 1];
        let h = PI / 4.0;
        let rhs: C64 = placement
            .observation
            .iter()
            .zip(&placement.actuation)
            .map(|(&xo, &xa)| at(&u, xo) * at(&v, xa).conj() * (-p.mu * h))
            .sum();
        assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn nodal_rejects_bad_points() {
        let d = build_domain(DomainSpec::interval(PI, 63, Boundary::Dirichlet)).unwrap();
        let u = Field::zeros(&d);
        let outside = NodalPlacement {
            observation: vec![0.1, 2.0],
            actuation: vec![1.7, 2.0],
        };
        assert!(apply_nodal_controller(&u, &params(1.0, 2), &outside).is_err());
        let at_boundary = NodalPlacement {
            observation: vec![0.5],
            actuation: vec![0.001],
        };
        assert!(apply_nodal_controller(&u, &params(1.0, 1), &at_boundary).is_err());
    }

    #[test]
    fn steering_controller() {
        let d = build_domain(DomainSpec::interval(PI, 32, Boundary::Dirichlet)).unwrap();
        let es = eigen_system(&d, 4).unwrap();
        let u = Field::from_fn(&d, |x, _| C64::new(x.sin() * x, (2.0 * x).sin()));
        let p = params(1.0, 2);
        assert!(apply_steering_controller(&u, &u, &p, &es).unwrap().max_abs() < 1e-15);
        let zero = Field::zeros(&d);
        let a = apply_steering_controller(&u, &zero, &p, &es).unwrap();
        let b = apply_modal_controller(&u, &p, &es).unwrap();
        assert!(a.max_diff(&b).unwrap() < 1e-14);

        let v = u.try_sub(&es.eigenfunction(1)).unwrap();
        let out = apply_steering_controller(&u, &v, &params(1.0, 1), &es).unwrap();
        assert!(out.max_abs() < 1e-12);

        let other = build_domain(DomainSpec::interval(PI, 48, Boundary::Dirichlet)).unwrap();
        assert!(apply_steering_controller(&u, &Field::zeros(&other), &p, &es).is_err());
    }
}
