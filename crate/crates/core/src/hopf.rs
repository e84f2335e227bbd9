//! The Hopf formula for the Hamilton–Jacobi equation
//! `d_t f = (2 / alpha) d_1 f d_2 f` on `Omega_rho = {h1 <= rho (1 - t), t <= 1}`
//! with separable convex initial data, and a numerical weak-solution check.
//!
//! With `psi = psi1(y1) + psi2(y2)` the formula reads
//! `f(t, x) = sup_z { z . x - psi1*(z1) - psi2*(z2) + t H(z) }` where the
//! conjugates are taken over `y1 in [0, rho]` and `y2 in [0, Y_MAX]`.
//! Conjugates are tabulated once on fine uniform grids; each evaluation of
//! `f` is then a grid-seeded golden-section search in `z2` around a
//! golden-section search in `z1` (the `z1` objective is concave).

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::{golden_max, grid_golden_max};
use crate::saddle::hamiltonian;

/// Tolerance of the sampled shape checks on initial data.
pub const SHAPE_TOL: f64 = 1e-9;

const SHAPE_SAMPLES: usize = 2000;

/// `Omega_rho`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainOmega {
    pub rho: f64,
}

impl DomainOmega {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::invalid("rho", format!("must be positive, got {rho}")));
        }
        Ok(DomainOmega { rho })
    }

    pub fn contains(&self, t: f64, x: [f64; 2]) -> bool {
        (0.0..=1.0).contains(&t) && x[0] >= 0.0 && x[0] <= self.rho * (1.0 - t) && x[1] >= 0.0
    }
}

/// Piecewise-linear function through `(nodes, values)`, extended linearly
/// with the end slopes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearTable {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
}

impl LinearTable {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(Error::Precondition(format!(
                "linear table needs >= 2 nodes and matching values ({} nodes, {} values)",
                nodes.len(),
                values.len()
            )));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Precondition("table nodes must increase strictly".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite table value".into()));
        }
        Ok(LinearTable { nodes, values })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        let j = self.nodes.partition_point(|&t| t <= x).clamp(1, n - 1);
        let (x0, x1) = (self.nodes[j - 1], self.nodes[j]);
        let (y0, y1) = (self.values[j - 1], self.values[j]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// One component of separable initial data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    /// `c y`
    Linear { c: f64 },
    /// `a y + b y^2`
    Quadratic { a: f64, b: f64 },
    /// `m (sqrt(w^2 + y^2) - w)`
    Hyperbolic { m: f64, w: f64 },
    /// `c (exp(k y) - 1)`
    Exponential { c: f64, k: f64 },
    /// `m (log(1 + exp(y - s)) - log(1 + exp(-s)))`
    Softplus { m: f64, s: f64 },
    Table(LinearTable),
    /// `inner + offset`
    Shifted { inner: Box<Profile>, offset: f64 },
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl Profile {
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            Profile::Linear { c } => c * y,
            Profile::Quadratic { a, b } => a * y + b * y * y,
            Profile::Hyperbolic { m, w } => m * ((w * w + y * y).sqrt() - w),
            Profile::Exponential { c, k } => c * (k * y).exp_m1(),
            Profile::Softplus { m, s } => m * (softplus(y - s) - softplus(-s)),
            Profile::Table(t) => t.eval(y),
            Profile::Shifted { inner, offset } => inner.eval(y) + offset,
        }
    }

    pub fn shifted(self, offset: f64) -> Profile {
        Profile::Shifted {
            inner: Box::new(self),
            offset,
        }
    }

    /// Sample points used for shape checks on `[0, hi]`.
    fn samples(&self, hi: f64) -> Vec<f64> {
        match self {
            Profile::Table(t) => {
                let mut xs: Vec<f64> = t.nodes.iter().copied().filter(|&x| x <= hi).collect();
                if xs.first() != Some(&0.0) {
                    xs.insert(0, 0.0);
                }
                if xs.last().is_some_and(|&x| x < hi) {
                    xs.push(hi);
                }
                xs
            }
            Profile::Shifted { inner, .. } => inner.samples(hi),
            _ => (0..=SHAPE_SAMPLES)
                .map(|i| hi * i as f64 / SHAPE_SAMPLES as f64)
                .collect(),
        }
    }
}

/// Largest difference quotient, after checking finiteness, monotonicity and
/// convexity on the samples.
fn check_shape(p: &Profile, hi: f64, name: &str) -> Result<f64> {
    let xs = p.samples(hi);
    let vs: Vec<f64> = xs.iter().map(|&x| p.eval(x)).collect();
    if let Some(v) = vs.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(name, format!("non-finite value {v}")));
    }
    let slopes: Vec<f64> = xs
        .windows(2)
        .zip(vs.windows(2))
        .map(|(x, v)| (v[1] - v[0]) / (x[1] - x[0]))
        .collect();
    if let Some(s) = slopes.iter().find(|&&s| s < -SHAPE_TOL) {
        return Err(Error::invalid(name, format!("decreasing (slope {s})")));
    }
    for w in slopes.windows(2) {
        if w[1] - w[0] < -SHAPE_TOL {
            return Err(Error::invalid(
                name,
                format!("not convex (slope drops from {} to {})", w[0], w[1]),
            ));
        }
    }
    Ok(slopes.iter().copied().fold(0.0, f64::max))
}

/// `psi(y) = psi1(y1) + psi2(y2)` with the `z2` box `[0, alpha rho / 2]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparableInitialData {
    pub psi1: Profile,
    pub psi2: Profile,
    pub alpha: f64,
    pub rho: f64,
}

impl SeparableInitialData {
    pub fn new(psi1: Profile, psi2: Profile, alpha: f64, rho: f64) -> Result<Self> {
        let d = SeparableInitialData { psi1, psi2, alpha, rho };
        d.validate()?;
        Ok(d)
    }

    pub fn z2_max(&self) -> f64 {
        self.alpha * self.rho / 2.0
    }

    pub fn h2_max_default(&self) -> f64 {
        4.0 * self.alpha * self.rho
    }

    pub fn eval(&self, y: [f64; 2]) -> f64 {
        self.psi1.eval(y[0]) + self.psi2.eval(y[1])
    }

    /// Lipschitz constant of `psi1` on `[0, rho]` estimated on samples.
    pub fn psi1_lipschitz(&self) -> Result<f64> {
        check_shape(&self.psi1, self.rho, "psi1")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::invalid("alpha", format!("must be positive, got {}", self.alpha)));
        }
        DomainOmega::new(self.rho)?;
        self.psi1_lipschitz()?;
        let slope = check_shape(&self.psi2, 4.0 * self.h2_max_default(), "psi2")?;
        if slope > self.z2_max() + SHAPE_TOL {
            return Err(Error::invalid(
                "psi2",
                format!("slope {slope} exceeds alpha rho / 2 = {}", self.z2_max()),
            ));
        }
        Ok(())
    }

    pub fn shifted(&self, offset: f64) -> Self {
        SeparableInitialData {
            psi1: self.psi1.clone().shifted(offset),
            ..self.clone()
        }
    }
}

/// Smooth strictly convex initial data with `(2 / alpha)^2 psi1'' psi2'' < 1`,
/// for which the Hopf solution is classical.
pub fn registry() -> Vec<(&'static str, SeparableInitialData)> {
    vec![
        (
            "quadratic-hyperbolic",
            SeparableInitialData {
                psi1: Profile::Quadratic { a: 0.3, b: 0.2 },
                psi2: Profile::Hyperbolic { m: 0.4, w: 1.0 },
                alpha: 1.0,
                rho: 1.0,
            },
        ),
        (
            "exponential-softplus",
            SeparableInitialData {
                psi1: Profile::Exponential { c: 0.5, k: 0.8 },
                psi2: Profile::Softplus { m: 0.6, s: 1.0 },
                alpha: 2.0,
                rho: 0.8,
            },
        ),
    ]
}

const LINEAR_KINK_TOL: f64 = 1e-8;

fn linear_parts(p: &Profile) -> Option<(f64, f64)> {
    match p {
        Profile::Linear { c } => Some((*c, 0.0)),
        Profile::Shifted { inner, offset } => linear_parts(inner).map(|(c, o)| (c, o + offset)),
        _ => None,
    }
}

/// `g*(z) = sup_{y in [lo, hi]} z y - g(y)` tabulated on `cells + 1`
/// uniform `z` nodes of `[0, z_hi]`, with the maximizers.
#[derive(Clone, Debug)]
struct ConjugateTable {
    z_hi: f64,
    step: f64,
    values: Vec<f64>,
    argmax: Vec<f64>,
    /// Exact form for (shifted) linear profiles, whose conjugate has a kink
    /// that interpolation would smear: `(c, offset, lo, hi)`.
    linear: Option<(f64, f64, f64, f64)>,
}

impl ConjugateTable {
    fn build(p: &Profile, lo: f64, hi: f64, z_hi: f64, cells: usize) -> Self {
        let step = z_hi / cells as f64;
        let tol = 1e-13 * (hi - lo).max(1.0);
        let (values, argmax) = (0..=cells)
            .into_par_iter()
            .map(|i| {
                let z = i as f64 * step;
                let e = golden_max(|y| z * y - p.eval(y), lo, hi, tol);
                (e.value, e.x)
            })
            .unzip();
        ConjugateTable {
            z_hi,
            step,
            values,
            argmax,
            linear: linear_parts(p).map(|(c, offset)| (c, offset, lo, hi)),
        }
    }

    #[inline]
    fn locate(&self, z: f64) -> (usize, f64) {
        let s = (z / self.step).clamp(0.0, (self.values.len() - 1) as f64);
        let i = (s as usize).min(self.values.len() - 2);
        (i, s - i as f64)
    }

    #[inline]
    fn eval(&self, z: f64) -> f64 {
        if let Some((c, offset, lo, hi)) = self.linear {
            let y = if z > c { hi } else { lo };
            return (z - c) * y - offset;
        }
        let (i, f) = self.locate(z);
        self.values[i] + f * (self.values[i + 1] - self.values[i])
    }

    fn maximizer(&self, z: f64) -> f64 {
        if let Some((c, _, lo, hi)) = self.linear {
            // every y is optimal at the kink itself
            return if z > c + LINEAR_KINK_TOL * c.abs().max(1.0) { hi } else { lo };
        }
        let (i, f) = self.locate(z);
        self.argmax[i] + f * (self.argmax[i + 1] - self.argmax[i])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HopfOptions {
    /// Cap on `z1`; defaults to `1.5 Lip(psi1) + 1e-3`.
    pub r_cap: Option<f64>,
    /// Cap on `y2`; defaults to `1.25 (H2_MAX + 2 R_CAP / alpha)`.
    pub y_max: Option<f64>,
    /// Largest `h2` of fields; defaults to `4 alpha rho`.
    pub h2_max: Option<f64>,
    /// Cells of the initial `z2` grid.
    pub outer_cells: usize,
    /// Cells of each conjugate table.
    pub conjugate_cells: usize,
}

impl Default for HopfOptions {
    fn default() -> Self {
        HopfOptions {
            r_cap: None,
            y_max: None,
            h2_max: None,
            outer_cells: 64,
            conjugate_cells: 1 << 16,
        }
    }
}

/// Value of the formula together with its optimizer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopfPoint {
    pub value: f64,
    pub z: [f64; 2],
    pub y: [f64; 2],
}

/// Initial data with tabulated conjugates, ready for repeated evaluation.
#[derive(Clone, Debug)]
pub struct HopfSolver {
    data: SeparableInitialData,
    domain: DomainOmega,
    r_cap: f64,
    y_max: f64,
    h2_max: f64,
    outer_cells: usize,
    conj1: ConjugateTable,
    conj2: ConjugateTable,
}

impl HopfSolver {
    pub fn new(data: SeparableInitialData, options: &HopfOptions) -> Result<Self> {
        data.validate()?;
        if options.outer_cells < 4 || options.conjugate_cells < 16 {
            return Err(Error::Precondition(format!(
                "outer_cells {} (>= 4) and conjugate_cells {} (>= 16) too small",
                options.outer_cells, options.conjugate_cells
            )));
        }
        let lip = data.psi1_lipschitz()?;
        let r_cap = options.r_cap.unwrap_or(1.5 * lip + 1e-3);
        if !(r_cap > lip) {
            return Err(Error::Precondition(format!(
                "R_CAP = {r_cap} must exceed the Lipschitz constant {lip} of psi1"
            )));
        }
        let h2_max = options.h2_max.unwrap_or_else(|| data.h2_max_default());
        let y_max = options
            .y_max
            .unwrap_or(1.25 * (h2_max + 2.0 * r_cap / data.alpha));
        if !(y_max > h2_max) {
            return Err(Error::Precondition(format!(
                "Y_MAX = {y_max} must exceed H2_MAX = {h2_max}"
            )));
        }
        let conj1 = ConjugateTable::build(&data.psi1, 0.0, data.rho, r_cap, options.conjugate_cells);
        let conj2 = ConjugateTable::build(&data.psi2, 0.0, y_max, data.z2_max(), options.conjugate_cells);
        Ok(HopfSolver {
            domain: DomainOmega::new(data.rho)?,
            data,
            r_cap,
            y_max,
            h2_max,
            outer_cells: options.outer_cells,
            conj1,
            conj2,
        })
    }

    pub fn data(&self) -> &SeparableInitialData {
        &self.data
    }

    pub fn domain(&self) -> DomainOmega {
        self.domain
    }

    pub fn r_cap(&self) -> f64 {
        self.r_cap
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn h2_max(&self) -> f64 {
        self.h2_max
    }

    fn inner(&self, t: f64, x1: f64, z2: f64) -> (f64, f64) {
        let u = x1 + 2.0 * t * z2 / self.data.alpha;
        let e = golden_max(
            |z1| z1 * u - self.conj1.eval(z1),
            0.0,
            self.conj1.z_hi,
            1e-12 * self.r_cap.max(1.0),
        );
        (e.value, e.x)
    }

    /// `f(t, x)` and its optimizer.
    pub fn evaluate(&self, t: f64, x: [f64; 2]) -> Result<HopfPoint> {
        // a relative slack absorbs rounding in callers' x1 = u (1 - t)
        let slack = 1e-12 * self.domain.rho;
        let inside = (0.0..=1.0).contains(&t)
            && x[0] >= 0.0
            && x[0] <= self.domain.rho * (1.0 - t) + slack
            && x[1] >= 0.0
            && x[1].is_finite();
        if !inside {
            return Err(Error::Precondition(format!(
                "(t, x) = ({t}, {x:?}) outside Omega_rho with rho = {}",
                self.domain.rho
            )));
        }
        let outer = grid_golden_max(
            |z2| z2 * x[1] - self.conj2.eval(z2) + self.inner(t, x[0], z2).0,
            0.0,
            self.data.z2_max(),
            self.outer_cells,
            1e-12,
        );
        let z2 = outer.x;
        let (_, z1) = self.inner(t, x[0], z2);
        // characteristics: y = x + t grad H(z)
        let y = [self.conj1.maximizer(z1), self.conj2.maximizer(z2)];
        if z1 >= self.r_cap * (1.0 - 1e-9) {
            return Err(Error::Truncation(format!(
                "z1 = {z1} reaches R_CAP = {} at (t, x) = ({t}, {x:?})",
                self.r_cap
            )));
        }
        if y[1] >= self.y_max * (1.0 - 1e-9) {
            return Err(Error::Truncation(format!(
                "y2 = {} reaches Y_MAX = {} at (t, x) = ({t}, {x:?})",
                y[1], self.y_max
            )));
        }
        Ok(HopfPoint {
            value: outer.value,
            z: [z1, z2],
            y,
        })
    }
}

/// `f(t, x)` by the Hopf formula.
pub fn hopf_evaluate(t: f64, x: [f64; 2], solver: &HopfSolver) -> Result<f64> {
    Ok(solver.evaluate(t, x)?.value)
}

/// Cells of a field grid, uniform in `(t, u = h1 / (1 - t), h2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldGrid {
    pub t_cells: usize,
    pub u_cells: usize,
    pub h2_cells: usize,
}

impl FieldGrid {
    pub fn cubic(cells: usize) -> Self {
        FieldGrid {
            t_cells: cells,
            u_cells: cells,
            h2_cells: cells,
        }
    }

    pub fn refined(&self) -> Self {
        FieldGrid {
            t_cells: 2 * self.t_cells,
            u_cells: 2 * self.u_cells,
            h2_cells: 2 * self.h2_cells,
        }
    }

    fn len(&self) -> usize {
        (self.t_cells + 1) * (self.u_cells + 1) * (self.h2_cells + 1)
    }
}

/// `f` on a grid over `Omega_rho` with `h2 <= H2_MAX`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopfField {
    pub grid: FieldGrid,
    pub rho: f64,
    pub alpha: f64,
    pub h2_max: f64,
    /// Indexed `[it][iu][ih]`, `ih` fastest.
    pub values: Vec<f64>,
}

impl HopfField {
    pub fn compute(solver: &HopfSolver, grid: FieldGrid) -> Result<Self> {
        if grid.t_cells < 2 || grid.u_cells < 2 || grid.h2_cells < 2 {
            return Err(Error::Precondition("field grids need >= 2 cells per axis".into()));
        }
        let probe = HopfField {
            grid,
            rho: solver.data.rho,
            alpha: solver.data.alpha,
            h2_max: solver.h2_max,
            values: Vec::new(),
        };
        let values = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let (it, iu, ih) = probe.unflatten(k);
                let (t, h1, h2) = probe.point(it, iu, ih);
                hopf_evaluate(t, [h1, h2], solver)
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite field value {v}")));
        }
        Ok(HopfField { values, ..probe })
    }

    fn unflatten(&self, k: usize) -> (usize, usize, usize) {
        let nh = self.grid.h2_cells + 1;
        let nu = self.grid.u_cells + 1;
        (k / (nu * nh), (k / nh) % nu, k % nh)
    }

    fn index(&self, it: usize, iu: usize, ih: usize) -> usize {
        (it * (self.grid.u_cells + 1) + iu) * (self.grid.h2_cells + 1) + ih
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.grid.t_cells as f64
    }

    pub fn du(&self) -> f64 {
        self.rho / self.grid.u_cells as f64
    }

    pub fn dh2(&self) -> f64 {
        self.h2_max / self.grid.h2_cells as f64
    }

    /// `(t, h1, h2)` of a grid node.
    pub fn point(&self, it: usize, iu: usize, ih: usize) -> (f64, f64, f64) {
        let t = if it == self.grid.t_cells { 1.0 } else { it as f64 * self.dt() };
        let u = if iu == self.grid.u_cells { self.rho } else { iu as f64 * self.du() };
        let h2 = if ih == self.grid.h2_cells { self.h2_max } else { ih as f64 * self.dh2() };
        (t, u * (1.0 - t), h2)
    }

    pub fn value(&self, it: usize, iu: usize, ih: usize) -> f64 {
        self.values[self.index(it, iu, ih)]
    }

    /// `d_t f - H(grad f)` by central differences at an interior node, using
    /// `f_h1 = g_u / (1 - t)` and `f_t = g_t + u f_h1`.
    pub fn residual(&self, it: usize, iu: usize, ih: usize) -> Option<f64> {
        let g = &self.grid;
        let interior = |i: usize, n: usize| i >= 1 && i < n;
        if !(interior(it, g.t_cells) && interior(iu, g.u_cells) && interior(ih, g.h2_cells)) {
            return None;
        }
        let (t, _, _) = self.point(it, iu, ih);
        let u = iu as f64 * self.du();
        let g_t = (self.value(it + 1, iu, ih) - self.value(it - 1, iu, ih)) / (2.0 * self.dt());
        let g_u = (self.value(it, iu + 1, ih) - self.value(it, iu - 1, ih)) / (2.0 * self.du());
        let f_2 = (self.value(it, iu, ih + 1) - self.value(it, iu, ih - 1)) / (2.0 * self.dh2());
        let f_1 = g_u / (1.0 - t);
        let f_t = g_t + u * f_1;
        Some(f_t - hamiltonian([f_1, f_2], self.alpha))
    }

    /// Writes `t,h1,h2,f,residual`; the residual is empty off the interior.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "h1", "h2", "f", "residual"])?;
        for it in 0..=self.grid.t_cells {
            for iu in 0..=self.grid.u_cells {
                for ih in 0..=self.grid.h2_cells {
                    let (t, h1, h2) = self.point(it, iu, ih);
                    let r = self.residual(it, iu, ih).map(|r| r.to_string()).unwrap_or_default();
                    w.write_record([
                        t.to_string(),
                        h1.to_string(),
                        h2.to_string(),
                        self.value(it, iu, ih).to_string(),
                        r,
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeakSolutionTolerances {
    /// Cells excluded next to the face `h1 = rho (1 - t)`.
    pub band_cells: usize,
    /// Rectangle sizes, in cells, of the partial-convexity check.
    pub lambdas: [usize; 3],
    pub derivative: f64,
    pub partial_convexity: f64,
}

impl Default for WeakSolutionTolerances {
    fn default() -> Self {
        WeakSolutionTolerances {
            band_cells: 2,
            lambdas: [1, 2, 4],
            derivative: 1e-8,
            partial_convexity: 1e-8,
        }
    }
}

/// Diagnostics of [`verify_weak_solution`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakSolutionReport {
    pub residual_max: f64,
    pub residual_p95: f64,
    pub residual_points: usize,
    pub partial_convexity_min: f64,
    pub d1_min: f64,
    pub d1_max: f64,
    pub d2_min: f64,
    pub d2_max: f64,
    pub d2_bound: f64,
    pub lipschitz: f64,
    pub derivative_ranges_ok: bool,
    pub partial_convexity_ok: bool,
}

fn quantile(mut v: Vec<f64>, q: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = ((v.len() - 1) as f64 * q).round() as usize;
    v[k]
}

/// Residual, derivative-range and partial-convexity diagnostics of a field.
/// Derivative ranges use difference quotients between neighbouring nodes,
/// which are averages of the derivative along the segment.
pub fn verify_weak_solution(field: &HopfField, tol: &WeakSolutionTolerances) -> WeakSolutionReport {
    let g = field.grid;
    let mut residuals = Vec::new();
    for it in 0..=g.t_cells {
        for iu in 0..=g.u_cells {
            if iu + tol.band_cells >= g.u_cells {
                continue;
            }
            for ih in 0..=g.h2_cells {
                if let Some(r) = field.residual(it, iu, ih) {
                    residuals.push(r.abs());
                }
            }
        }
    }

    let (mut d1_min, mut d1_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut d2_min, mut d2_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut lipschitz: f64 = 0.0;
    let mut pc_min = f64::INFINITY;
    for it in 0..=g.t_cells {
        let (t, _, _) = field.point(it, 0, 0);
        let dh1 = field.du() * (1.0 - t);
        for iu in 0..=g.u_cells {
            for ih in 0..=g.h2_cells {
                let f = field.value(it, iu, ih);
                if iu < g.u_cells && dh1 > 0.0 {
                    let q = (field.value(it, iu + 1, ih) - f) / dh1;
                    d1_min = d1_min.min(q);
                    d1_max = d1_max.max(q);
                    lipschitz = lipschitz.max(q.abs());
                }
                if ih < g.h2_cells {
                    let q = (field.value(it, iu, ih + 1) - f) / field.dh2();
                    d2_min = d2_min.min(q);
                    d2_max = d2_max.max(q);
                    lipschitz = lipschitz.max(q.abs());
                }
                for &k in &tol.lambdas {
                    if iu + k <= g.u_cells && ih + k <= g.h2_cells && dh1 > 0.0 {
                        let inc = field.value(it, iu + k, ih + k) + f
                            - field.value(it, iu + k, ih)
                            - field.value(it, iu, ih + k);
                        pc_min = pc_min.min(inc);
                    }
                }
            }
        }
    }
    let d2_bound = field.alpha * field.rho / 2.0;
    let derivative_ranges_ok = d1_min >= -tol.derivative
        && d2_min >= -tol.derivative
        && d2_max <= d2_bound + tol.derivative;
    WeakSolutionReport {
        residual_max: residuals.iter().copied().fold(0.0, f64::max),
        residual_p95: quantile(residuals.clone(), 0.95),
        residual_points: residuals.len(),
        partial_convexity_min: pc_min,
        d1_min,
        d1_max,
        d2_min,
        d2_max,
        d2_bound,
        lipschitz,
        derivative_ranges_ok,
        partial_convexity_ok: pc_min >= -tol.partial_convexity,
    }
}

/// Residuals of a coarse field and of its refinement, compared at the
/// coarse interior nodes outside the boundary band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub coarse: FieldGrid,
    pub coarse_max: f64,
    pub fine_max: f64,
    pub ratio: f64,
}

pub fn residual_convergence(
    solver: &HopfSolver,
    coarse_grid: FieldGrid,
    band_cells: usize,
) -> Result<(ConvergenceStudy, HopfField, HopfField)> {
    let coarse = HopfField::compute(solver, coarse_grid)?;
    let fine = HopfField::compute(solver, coarse_grid.refined())?;
    let g = coarse_grid;
    let (mut coarse_max, mut fine_max) = (0.0f64, 0.0f64);
    for it in 1..g.t_cells {
        for iu in 1..g.u_cells {
            if iu + band_cells >= g.u_cells {
                continue;
            }
            for ih in 1..g.h2_cells {
                if let (Some(a), Some(b)) = (
                    coarse.residual(it, iu, ih),
                    fine.residual(2 * it, 2 * iu, 2 * ih),
                ) {
                    coarse_max = coarse_max.max(a.abs());
                    fine_max = fine_max.max(b.abs());
                }
            }
        }
    }
    let study = ConvergenceStudy {
        coarse: coarse_grid,
        coarse_max,
        fine_max,
        ratio: coarse_max / fine_max,
    };
    Ok((study, coarse, fine))
}
