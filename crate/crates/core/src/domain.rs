//! Geometry, Laplacian eigensystem, grid/modal transforms and norms.
//!
//! Every supported domain has closed-form eigenfunctions of `-Δ`:
//!
//! * interval `(0, L)`, Dirichlet: `sqrt(2/L) sin(kπx/L)`, `k >= 1`, on the
//!   `M` interior nodes `x_j = jL/(M+1)`;
//! * interval `(0, L)`, Neumann: `1/sqrt(L)` and `sqrt(2/L) cos(kπx/L)` on the
//!   `M` nodes `x_j = jL/(M-1)` including both endpoints;
//! * rectangle `(0, Lx) x (0, Ly)`, Dirichlet: tensor products of the sine
//!   basis on an `M x M` interior grid.
//!
//! The quadrature is the rectangle rule on interior nodes (Dirichlet) and the
//! trapezoid rule (Neumann). With these rules the sampled eigenfunctions are
//! exactly orthonormal, so the discrete sine/cosine transforms below are the
//! quadrature inner products `(f, ω_k)` and Parseval holds to round-off.
//!
//! The Neumann grid carries one extra cosine (`k = M-1`, the grid Nyquist
//! mode) whose discrete norm is 2 instead of 1. It is kept in the internal
//! transform so grid values and coefficients are in bijection, but it is not
//! part of the public [`EigenSystem`].

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;

const MIN_RESOLUTION: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    Interval { length: f64 },
    Rectangle { lx: f64, ly: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Dirichlet,
    Neumann,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Dirichlet => f.write_str("dirichlet"),
            Boundary::Neumann => f.write_str("neumann"),
        }
    }
}

/// Everything needed to build a [`Domain`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    pub geometry: Geometry,
    /// Grid points per axis: interior nodes for Dirichlet, nodes including
    /// both endpoints for Neumann.
    pub resolution: usize,
    pub boundary: Boundary,
}

impl DomainSpec {
    pub fn interval(length: f64, resolution: usize, boundary: Boundary) -> Self {
        Self {
            geometry: Geometry::Interval { length },
            resolution,
            boundary,
        }
    }

    pub fn rectangle(lx: f64, ly: f64, resolution: usize) -> Self {
        Self {
            geometry: Geometry::Rectangle { lx, ly },
            resolution,
            boundary: Boundary::Dirichlet,
        }
    }
}

/// Uniform grid plus its spectral machinery. Cheap to clone and `Send + Sync`.
#[derive(Clone)]
pub struct Domain {
    inner: Arc<DomainInner>,
}

struct DomainInner {
    spec: DomainSpec,
    axes: Vec<Axis>,
    /// Eigenvalue of the basis function stored at each spectral slot.
    slot_eigenvalues: Vec<f64>,
    /// Discrete squared norm of the basis function at each slot.
    slot_norms: Vec<f64>,
    /// Quadrature weight of each node.
    weights: Vec<f64>,
    /// Public modes in eigen order: (eigenvalue, descriptor, slot).
    ordered: Vec<Eigenpair>,
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Domain").field("spec", &self.inner.spec).finish()
    }
}

impl PartialEq for Domain {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self.inner.spec == other.inner.spec
    }
}

/// Builds a domain, validating lengths, resolution and boundary support.
pub fn build_domain(spec: DomainSpec) -> Result<Domain> {
    Domain::new(spec)
}

impl Domain {
    pub fn new(spec: DomainSpec) -> Result<Self> {
        if spec.resolution < MIN_RESOLUTION {
            return Err(Error::InvalidDomain(format!(
                "resolution {} is below the minimum of {MIN_RESOLUTION}",
                spec.resolution
            )));
        }
        let lengths: Vec<f64> = match spec.geometry {
            Geometry::Interval { length } => vec![length],
            Geometry::Rectangle { lx, ly } => {
                if spec.boundary == Boundary::Neumann {
                    return Err(Error::InvalidDomain(
                        "Neumann boundary conditions are only supported on intervals".into(),
                    ));
                }
                vec![lx, ly]
            }
        };
        if let Some(bad) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidDomain(format!(
                "lengths must be positive and finite, got {bad}"
            )));
        }

        let mut planner = FftPlanner::new();
        let axes: Vec<Axis> = lengths
            .iter()
            .map(|&l| Axis::new(l, spec.resolution, spec.boundary, &mut planner))
            .collect();

        let (slot_eigenvalues, slot_norms, weights) = match axes.as_slice() {
            [a] => (a.eigenvalues.clone(), a.norms.clone(), a.weights.clone()),
            [a, b] => {
                let mut ev = Vec::with_capacity(a.n * b.n);
                let mut nr = Vec::with_capacity(a.n * b.n);
                let mut w = Vec::with_capacity(a.n * b.n);
                for i in 0..a.n {
                    for j in 0..b.n {
                        ev.push(a.eigenvalues[i] + b.eigenvalues[j]);
                        nr.push(a.norms[i] * b.norms[j]);
                        w.push(a.weights[i] * b.weights[j]);
                    }
                }
                (ev, nr, w)
            }
            _ => unreachable!("domains have one or two axes"),
        };

        let ordered = public_modes(&axes, &slot_eigenvalues);

        Ok(Self {
            inner: Arc::new(DomainInner {
                spec,
                axes,
                slot_eigenvalues,
                slot_norms,
                weights,
                ordered,
            }),
        })
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.inner.spec
    }

    pub fn boundary(&self) -> Boundary {
        self.inner.spec.boundary
    }

    pub fn resolution(&self) -> usize {
        self.inner.spec.resolution
    }

    /// Spatial dimension `n` (1 for intervals, 2 for rectangles).
    pub fn dimension(&self) -> usize {
        self.inner.axes.len()
    }

    pub fn is_interval(&self) -> bool {
        self.dimension() == 1
    }

    /// Axis lengths, `[L]` or `[Lx, Ly]`.
    pub fn lengths(&self) -> Vec<f64> {
        self.inner.axes.iter().map(|a| a.length).collect()
    }

    /// Length used in the equivalent H¹ norm. For rectangles the longer side.
    pub fn characteristic_length(&self) -> f64 {
        self.inner
            .axes
            .iter()
            .map(|a| a.length)
            .fold(0.0, f64::max)
    }

    /// Grid spacing along the first axis.
    pub fn spacing(&self) -> f64 {
        self.inner.axes[0].spacing
    }

    pub fn node_count(&self) -> usize {
        self.inner.weights.len()
    }

    /// Node coordinates along the first axis.
    pub fn grid_x(&self) -> Vec<f64> {
        self.inner.axes[0].nodes()
    }

    /// Node coordinates along the second axis (empty for intervals).
    pub fn grid_y(&self) -> Vec<f64> {
        self.inner.axes.get(1).map(Axis::nodes).unwrap_or_default()
    }

    /// Coordinates of every node in storage order (row-major, `x` outermost).
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        let xs = self.grid_x();
        match self.inner.axes.get(1) {
            None => xs.into_iter().map(|x| (x, 0.0)).collect(),
            Some(ay) => {
                let ys = ay.nodes();
                xs.iter()
                    .flat_map(|&x| ys.iter().map(move |&y| (x, y)))
                    .collect()
            }
        }
    }

    /// Quadrature weights, one per node.
    pub fn weights(&self) -> &[f64] {
        &self.inner.weights
    }

    /// Number of modes available to [`eigen_system`] and [`to_modal`].
    pub fn max_modes(&self) -> usize {
        self.inner.ordered.len()
    }

    /// Quadrature inner product `Σ w_j a_j conj(b_j)`.
    pub fn inner_product(&self, a: &[C64], b: &[C64]) -> C64 {
        self.inner
            .weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| x * y.conj() * *w)
            .sum()
    }

    /// Eigenvalue attached to each spectral slot of the full transform.
    pub(crate) fn slot_eigenvalues(&self) -> &[f64] {
        &self.inner.slot_eigenvalues
    }

    pub(crate) fn slot_norms(&self) -> &[f64] {
        &self.inner.slot_norms
    }

    pub(crate) fn ordered_modes(&self) -> &[Eigenpair] {
        &self.inner.ordered
    }

    /// Grid values to full spectral coefficients (`f = Σ c_s φ_s`).
    pub(crate) fn forward(&self, values: &[C64]) -> Vec<C64> {
        let mut data = values.to_vec();
        self.transform(&mut data, Direction::Forward);
        data
    }

    /// Full spectral coefficients back to grid values.
    pub(crate) fn backward(&self, coeffs: &[C64]) -> Vec<C64> {
        let mut data = coeffs.to_vec();
        self.transform(&mut data, Direction::Backward);
        data
    }

    fn transform(&self, data: &mut [C64], dir: Direction) {
        match self.inner.axes.as_slice() {
            [a] => a.apply(data, dir),
            [a, b] => {
                for row in data.chunks_mut(b.n) {
                    b.apply(row, dir);
                }
                let mut column = vec![C64::new(0.0, 0.0); a.n];
                for j in 0..b.n {
                    for i in 0..a.n {
                        column[i] = data[i * b.n + j];
                    }
                    a.apply(&mut column, dir);
                    for i in 0..a.n {
                        data[i * b.n + j] = column[i];
                    }
                }
            }
            _ => unreachable!(),
        }
    }
}

#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Backward,
}

struct Axis {
    length: f64,
    n: usize,
    boundary: Boundary,
    spacing: f64,
    eigenvalues: Vec<f64>,
    norms: Vec<f64>,
    weights: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl Axis {
    fn new(length: f64, n: usize, boundary: Boundary, planner: &mut FftPlanner<f64>) -> Self {
        match boundary {
            Boundary::Dirichlet => {
                let spacing = length / (n + 1) as f64;
                Self {
                    length,
                    n,
                    boundary,
                    spacing,
                    eigenvalues: (1..=n).map(|k| (k as f64 * PI / length).powi(2)).collect(),
                    norms: vec![1.0; n],
                    weights: vec![spacing; n],
                    fft: planner.plan_fft_forward(2 * (n + 1)),
                }
            }
            Boundary::Neumann => {
                let spacing = length / (n - 1) as f64;
                let mut weights = vec![spacing; n];
                weights[0] *= 0.5;
                weights[n - 1] *= 0.5;
                let mut norms = vec![1.0; n];
                norms[n - 1] = 2.0;
                Self {
                    length,
                    n,
                    boundary,
                    spacing,
                    eigenvalues: (0..n).map(|k| (k as f64 * PI / length).powi(2)).collect(),
                    norms,
                    weights,
                    fft: planner.plan_fft_forward(2 * (n - 1)),
                }
            }
        }
    }

    fn nodes(&self) -> Vec<f64> {
        match self.boundary {
            Boundary::Dirichlet => (1..=self.n).map(|j| j as f64 * self.spacing).collect(),
            Boundary::Neumann => (0..self.n).map(|j| j as f64 * self.spacing).collect(),
        }
    }

    fn apply(&self, data: &mut [C64], dir: Direction) {
        let root = (2.0 / self.length).sqrt();
        match (self.boundary, dir) {
            (Boundary::Dirichlet, Direction::Forward) => {
                self.sine_sum(data);
                let scale = self.spacing * root;
                data.iter_mut().for_each(|c| *c *= scale);
            }
            (Boundary::Dirichlet, Direction::Backward) => {
                self.sine_sum(data);
                data.iter_mut().for_each(|c| *c *= root);
            }
            (Boundary::Neumann, Direction::Forward) => {
                // cosine_sum yields Σ'' f_j cos(πjk/(n-1)).
                self.cosine_sum(data);
                let last = self.n - 1;
                data[0] *= self.spacing / self.length.sqrt();
                for c in &mut data[1..last] {
                    *c *= self.spacing * root;
                }
                data[last] *= 0.5 * self.spacing * root;
            }
            (Boundary::Neumann, Direction::Backward) => {
                let last = self.n - 1;
                data[0] *= 2.0 / self.length.sqrt();
                for c in &mut data[1..last] {
                    *c *= root;
                }
                data[last] *= 2.0 * root;
                self.cosine_sum(data);
            }
        }
    }

    /// In place `S_k = Σ_{j=1..n} f_j sin(πjk/(n+1))` via an odd extension.
    fn sine_sum(&self, data: &mut [C64]) {
        let n = self.n;
        let m = 2 * (n + 1);
        let zero = C64::new(0.0, 0.0);
        let mut ext = vec![zero; m];
        for j in 1..=n {
            ext[j] = data[j - 1];
            ext[m - j] = -data[j - 1];
        }
        self.fft.process(&mut ext);
        let half_i = C64::new(0.0, 0.5);
        for k in 1..=n {
            data[k - 1] = ext[k] * half_i;
        }
    }

    /// In place `Σ''_{j=0..n-1} f_j cos(πjk/(n-1))` (endpoint terms halved)
    /// via an even extension.
    fn cosine_sum(&self, data: &mut [C64]) {
        let n = self.n;
        let m = 2 * (n - 1);
        let mut ext = vec![C64::new(0.0, 0.0); m];
        ext[..n].copy_from_slice(data);
        for j in 1..n - 1 {
            ext[m - j] = data[j];
        }
        self.fft.process(&mut ext);
        for k in 0..n {
            data[k] = ext[k] * 0.5;
        }
    }
}

/// Mode label: the integer index `k` on intervals, `(j, k)` on rectangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    Single(usize),
    Pair(usize, usize),
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Single(k) => write!(f, "{k}"),
            Mode::Pair(j, k) => write!(f, "({j},{k})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenpair {
    pub eigenvalue: f64,
    pub mode: Mode,
    pub(crate) slot: usize,
}

fn public_modes(axes: &[Axis], slot_eigenvalues: &[f64]) -> Vec<Eigenpair> {
    match axes {
        [a] => {
            let (count, offset) = match a.boundary {
                // Descriptor k labels sin(kπx/L).
                Boundary::Dirichlet => (a.n, 1),
                // Descriptor k labels cos((k-1)πx/L); Nyquist cosine excluded.
                Boundary::Neumann => (a.n - 1, 1),
            };
            (0..count)
                .map(|s| Eigenpair {
                    eigenvalue: slot_eigenvalues[s],
                    mode: Mode::Single(s + offset),
                    slot: s,
                })
                .collect()
        }
        [a, b] => {
            let mut pairs: Vec<Eigenpair> = (0..a.n)
                .flat_map(|i| {
                    (0..b.n).map(move |j| (i, j))
                })
                .map(|(i, j)| Eigenpair {
                    eigenvalue: slot_eigenvalues[i * b.n + j],
                    mode: Mode::Pair(i + 1, j + 1),
                    slot: i * b.n + j,
                })
                .collect();
            pairs.sort_by(|p, q| {
                p.eigenvalue
                    .partial_cmp(&q.eigenvalue)
                    .unwrap_or(Ordering::Equal)
                    .then(p.mode.cmp(&q.mode))
            });
            pairs
        }
        _ => unreachable!(),
    }
}

/// The first `count` Laplacian eigenpairs in nondecreasing eigenvalue order.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    domain: Domain,
    pairs: Vec<Eigenpair>,
}

pub fn eigen_system(domain: &Domain, count: usize) -> Result<EigenSystem> {
    let available = domain.max_modes();
    if count == 0 || count > available {
        return Err(Error::ModeCount {
            requested: count,
            available,
        });
    }
    Ok(EigenSystem {
        domain: domain.clone(),
        pairs: domain.ordered_modes()[..count].to_vec(),
    })
}

impl EigenSystem {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[Eigenpair] {
        &self.pairs
    }

    /// `λ_k` for the 1-based index `k` used throughout the stabilization theory.
    pub fn lambda(&self, k: usize) -> f64 {
        self.pairs[k - 1].eigenvalue
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.eigenvalue).collect()
    }

    /// Samples the `index`-th (0-based) eigenfunction on the grid.
    pub fn eigenfunction(&self, index: usize) -> Field {
        let mut coeffs = vec![C64::new(0.0, 0.0); self.domain.node_count()];
        coeffs[self.pairs[index].slot] = C64::new(1.0, 0.0);
        Field {
            domain: self.domain.clone(),
            values: self.domain.backward(&coeffs),
        }
    }
}

/// Complex grid function. Dirichlet fields are implicitly zero on the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    domain: Domain,
    values: Vec<C64>,
}

impl Field {
    pub fn zeros(domain: &Domain) -> Self {
        Self {
            domain: domain.clone(),
            values: vec![C64::new(0.0, 0.0); domain.node_count()],
        }
    }

    pub fn from_values(domain: &Domain, values: Vec<C64>) -> Result<Self> {
        if values.len() != domain.node_count() {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            domain: domain.clone(),
            values,
        })
    }

    /// Samples `f(x, y)` at every node (`y = 0` on intervals).
    pub fn from_fn(domain: &Domain, f: impl Fn(f64, f64) -> C64) -> Self {
        let values = domain.nodes().into_iter().map(|(x, y)| f(x, y)).collect();
        Self {
            domain: domain.clone(),
            values,
        }
    }

    pub fn constant(domain: &Domain, c: C64) -> Self {
        Self {
            domain: domain.clone(),
            values: vec![c; domain.node_count()],
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        self.domain == other.domain && self.values.len() == other.values.len()
    }

    fn zip_with(&self, other: &Field, f: impl Fn(C64, C64) -> C64) -> Result<Field> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        Ok(Field {
            domain: self.domain.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    pub fn try_add(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn try_sub(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: C64, other: &Field, b: C64) -> Result<Field> {
        self.zip_with(other, |x, y| a * x + b * y)
    }

    pub fn scaled(&self, s: C64) -> Field {
        Field {
            domain: self.domain.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// Quadrature inner product `(self, other)`.
    pub fn inner(&self, other: &Field) -> Result<C64> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        Ok(self.domain.inner_product(&self.values, &other.values))
    }

    pub fn l2_sq(&self) -> f64 {
        self.domain.inner_product(&self.values, &self.values).re
    }

    /// Largest pointwise difference; grids must match.
    pub fn max_diff(&self, other: &Field) -> Result<f64> {
        Ok(self.try_sub(other)?.max_abs())
    }
}

/// Eigenfunction coefficients ordered as the domain's [`EigenSystem`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModalCoeffs {
    domain: Domain,
    coeffs: Vec<C64>,
}

impl ModalCoeffs {
    pub fn new(domain: &Domain, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() > domain.max_modes() {
            return Err(Error::ModeCount {
                requested: coeffs.len(),
                available: domain.max_modes(),
            });
        }
        Ok(Self {
            domain: domain.clone(),
            coeffs,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Quadrature inner products `(f, ω_k)` for the first `count` eigenfunctions.
pub fn to_modal(f: &Field, count: usize) -> Result<ModalCoeffs> {
    let domain = f.domain();
    let available = domain.max_modes();
    if count == 0 || count > available {
        return Err(Error::ModeCount {
            requested: count,
            available,
        });
    }
    let full = domain.forward(f.values());
    let coeffs = domain.ordered_modes()[..count]
        .iter()
        .map(|p| full[p.slot])
        .collect();
    Ok(ModalCoeffs {
        domain: domain.clone(),
        coeffs,
    })
}

/// Evaluates `Σ c_k ω_k` on the grid.
pub fn from_modal(c: &ModalCoeffs) -> Field {
    let domain = &c.domain;
    let mut full = vec![C64::new(0.0, 0.0); domain.node_count()];
    for (p, v) in domain.ordered_modes().iter().zip(&c.coeffs) {
        full[p.slot] = *v;
    }
    Field {
        domain: domain.clone(),
        values: domain.backward(&full),
    }
}

/// `Δf` by modal multiplication with `-λ_k`.
pub fn laplacian_apply(f: &Field) -> Field {
    let domain = f.domain();
    let mut full = domain.forward(f.values());
    for (c, lam) in full.iter_mut().zip(domain.slot_eigenvalues()) {
        *c *= -lam;
    }
    Field {
        domain: domain.clone(),
        values: domain.backward(&full),
    }
}

/// Squared norms used by the decay theorems.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Norms {
    /// `‖f‖²`
    pub l2_sq: f64,
    /// `‖∇f‖²`
    pub h1_seminorm_sq: f64,
    /// `‖f‖²/L² + ‖∇f‖²`
    pub h1_equiv_sq: f64,
    /// `∫|f|^{p+2}`
    pub lpp: f64,
}

pub fn compute_norms(f: &Field, p: f64) -> Norms {
    let domain = f.domain();
    let l2_sq = f.l2_sq();
    let h1_seminorm_sq = gradient_sq(f);
    let len = domain.characteristic_length();
    let lpp = domain
        .weights()
        .iter()
        .zip(f.values())
        .map(|(w, v)| w * v.norm().powf(p + 2.0))
        .sum();
    Norms {
        l2_sq,
        h1_seminorm_sq,
        h1_equiv_sq: l2_sq / (len * len) + h1_seminorm_sq,
        lpp,
    }
}

/// `‖∇f‖² = -(Δf, f)` evaluated spectrally.
pub fn gradient_sq(f: &Field) -> f64 {
    let domain = f.domain();
    let full = domain.forward(f.values());
    full.iter()
        .zip(domain.slot_eigenvalues())
        .zip(domain.slot_norms())
        .map(|((c, lam), nrm)| lam * nrm * c.norm_sqr())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn dirichlet_grid_excludes_endpoints() {
        let d = build_domain(DomainSpec::interval(1.0, 64, Boundary::Dirichlet)).unwrap();
        let x = d.grid_x();
        assert_eq!(x.len(), 64);
        assert_abs_diff_eq!(x[0], 1.0 / 65.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[63], 64.0 / 65.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.spacing(), 1.0 / 65.0, epsilon = 1e-15);
    }

    #[test]
    fn neumann_grid_includes_endpoints() {
        let d = build_domain(DomainSpec::interval(PI, 32, Boundary::Neumann)).unwrap();
        let x = d.grid_x();
        assert_eq!(x.len(), 32);
        assert_eq!(x[0], 0.0);
        assert_abs_diff_eq!(x[31], PI, epsilon = 1e-14);
    }

    #[test]
    fn rejects_bad_domains() {
        assert!(build_domain(DomainSpec {
            geometry: Geometry::Rectangle { lx: PI, ly: PI },
            resolution: 32,
            boundary: Boundary::Neumann,
        })
        .is_err());
        assert!(build_domain(DomainSpec::interval(0.0, 32, Boundary::Dirichlet)).is_err());
        assert!(build_domain(DomainSpec::interval(-1.0, 32, Boundary::Dirichlet)).is_err());
        assert!(build_domain(DomainSpec::interval(1.0, 15, Boundary::Dirichlet)).is_err());
    }

    #[test]
    fn closed_form_eigenvalues() {
        let d = build_domain(DomainSpec::interval(PI, 32, Boundary::Dirichlet)).unwrap();
        let es = eigen_system(&d, 3).unwrap();
        for (got, want) in es.eigenvalues().iter().zip([1.0, 4.0, 9.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }

        let d = build_domain(DomainSpec::interval(1.0, 32, Boundary::Neumann)).unwrap();
        let es = eigen_system(&d, 3).unwrap();
        for (got, want) in es.eigenvalues().iter().zip([0.0, PI * PI, 4.0 * PI * PI]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        assert_eq!(es.pairs()[0].mode, Mode::Single(1));

        let d = build_domain(DomainSpec::rectangle(PI, PI, 32)).unwrap();
        let es = eigen_system(&d, 3).unwrap();
        for (got, want) in es.eigenvalues().iter().zip([2.0, 5.0, 5.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        let modes: Vec<Mode> = es.pairs().iter().map(|p| p.mode).collect();
        assert_eq!(modes, vec![Mode::Pair(1, 1), Mode::Pair(1, 2), Mode::Pair(2, 1)]);
    }

    #[test]
    fn too_many_modes_is_an_error() {
        let d = build_domain(DomainSpec::interval(1.0, 16, Boundary::Neumann)).unwrap();
        assert_eq!(d.max_modes(), 15);
        assert!(matches!(
            eigen_system(&d, 16),
            Err(Error::ModeCount { requested: 16, available: 15 })
        ));
        assert!(to_modal(&Field::zeros(&d), 0).is_err());
    }

    #[test]
    fn eigenfunction_has_unit_coefficient() {
        let d = build_domain(DomainSpec::interval(PI, 32, Boundary::Dirichlet)).unwrap();
        let es = eigen_system(&d, 8).unwrap();
        let w2 = es.eigenfunction(1);
        let cs = to_modal(&w2, 8).unwrap();
        for (k, v) in cs.coeffs().iter().enumerate() {
            let want = if k == 1 { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(v.re, want, epsilon = 1e-10);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-10);
        }
        let back = from_modal(&cs);
        assert!(back.max_diff(&w2).unwrap() < 1e-12);
        let zero = to_modal(&Field::zeros(&d), 8).unwrap();
        assert!(zero.coeffs().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn sampled_eigenfunctions_match_closed_form() {
        let d = build_domain(DomainSpec::interval(2.0, 20, Boundary::Neumann)).unwrap();
        let es = eigen_system(&d, 4).unwrap();
        let f = es.eigenfunction(2);
        for (x, v) in d.grid_x().iter().zip(f.values()) {
            let want = (2.0f64 / 2.0).sqrt() * (2.0 * PI * x / 2.0).cos();
            assert_abs_diff_eq!(v.re, want, epsilon = 1e-12);
        }
        let f0 = es.eigenfunction(0);
        for v in f0.values() {
            assert_abs_diff_eq!(v.re, 1.0 / 2.0f64.sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn laplacian_of_eigenfunctions() {
        let d = build_domain(DomainSpec::interval(PI, 32, Boundary::Dirichlet)).unwrap();
        let es = eigen_system(&d, 4).unwrap();
        let w1 = es.eigenfunction(0);
        let w3 = es.eigenfunction(2);
        let lap = laplacian_apply(&w1);
        assert!(lap.max_diff(&w1.scaled(c(-1.0))).unwrap() < 1e-11);

        let f = w1.combine(c(1.0), &w3, c(2.0)).unwrap();
        let want = w1.combine(c(-1.0), &w3, c(-18.0)).unwrap();
        assert!(laplacian_apply(&f).max_diff(&want).unwrap() < 1e-10);

        let n = build_domain(DomainSpec::interval(1.0, 33, Boundary::Neumann)).unwrap();
        let k = Field::constant(&n, C64::new(0.7, -0.2));
        assert!(laplacian_apply(&k).max_abs() < 1e-11);
    }

    #[test]
    fn norms_of_sine() {
        let d = build_domain(DomainSpec::interval(PI, 64, Boundary::Dirichlet)).unwrap();
        let f = Field::from_fn(&d, |x, _| c(x.sin()));
        let n = compute_norms(&f, 2.0);
        assert_abs_diff_eq!(n.l2_sq, PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(n.h1_seminorm_sq, PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(n.lpp, 3.0 * PI / 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(n.h1_equiv_sq, 0.5 / PI + PI / 2.0, epsilon = 1e-12);

        let z = compute_norms(&Field::zeros(&d), 2.0);
        assert_eq!(z, Norms::default());

        let es = eigen_system(&d, 1).unwrap();
        assert_abs_diff_eq!(compute_norms(&es.eigenfunction(0), 3.0).l2_sq, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn rectangle_transform_round_trip() {
        let d = build_domain(DomainSpec::rectangle(PI, 2.0, 16)).unwrap();
        let es = eigen_system(&d, 10).unwrap();
        let f = es
            .eigenfunction(0)
            .combine(c(1.0), &es.eigenfunction(7), C64::new(0.0, 2.0))
            .unwrap();
        let cs = to_modal(&f, d.max_modes()).unwrap();
        assert_abs_diff_eq!(cs.coeffs()[0].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cs.coeffs()[7].im, 2.0, epsilon = 1e-12);
        assert!(from_modal(&cs).max_diff(&f).unwrap() < 1e-12);
        assert_abs_diff_eq!(cs.energy(), f.l2_sq(), epsilon = 1e-12);
        let lap = laplacian_apply(&es.eigenfunction(3));
        let want = es.eigenfunction(3).scaled(c(-es.lambda(4)));
        assert!(lap.max_diff(&want).unwrap() < 1e-10);
    }

    #[test]
    fn neumann_full_transform_is_a_bijection() {
        let d = build_domain(DomainSpec::interval(1.5, 17, Boundary::Neumann)).unwrap();
        let f = Field::from_fn(&d, |x, _| C64::new(x * x - x, (3.0 * x).sin()));
        let back = d.backward(&d.forward(f.values()));
        for (a, b) in back.iter().zip(f.values()) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
