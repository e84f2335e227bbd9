//! Scalar channel density and the potentials `Psi_0` (prior channel) and
//! `Psi_l` (layer channels), evaluated by Gauss–Hermite quadrature.
//!
//! Logarithms of inner integrals are always taken in shifted form: the
//! integrand of `Psi_l` contains `exp(-(y - sqrt(h2) phi)^2 / 2)`, which
//! underflows long before `h2` reaches its supported limit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ActivationSpec, PriorSpec};
use crate::quadrature::{log_sum_exp, GaussHermiteRule};

/// Largest `h2` accepted by [`psi_layer`].
pub const H2_LIMIT: f64 = 1e4;

/// Default finite-difference step, relative to the scale of the coordinate.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

// Below this the factorized inner sum is recomputed with an explicit shift.
const FACTORIZED_FLOOR: f64 = 1e-280;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureOrders {
    /// Per-axis order of the outer `(V, W, Z)` tensor rule.
    pub outer: usize,
    /// Order of the inner integral over `w` inside the logarithm.
    pub inner: usize,
    /// Order of the `Z'` rule in `Psi_0`.
    pub prior: usize,
}

impl Default for QuadratureOrders {
    fn default() -> Self {
        QuadratureOrders {
            outer: 40,
            inner: 60,
            prior: 200,
        }
    }
}

impl QuadratureOrders {
    pub fn doubled(&self) -> Self {
        QuadratureOrders {
            outer: 2 * self.outer,
            inner: 2 * self.inner,
            prior: 2 * self.prior,
        }
    }
}

/// Rules for the three quadratures used by the potentials.
#[derive(Clone, Debug)]
pub struct PotentialRules {
    pub outer: GaussHermiteRule,
    pub inner: GaussHermiteRule,
    pub prior: GaussHermiteRule,
}

impl PotentialRules {
    pub fn new(orders: QuadratureOrders) -> Result<Self> {
        Ok(PotentialRules {
            outer: GaussHermiteRule::new(orders.outer)?,
            inner: GaussHermiteRule::new(orders.inner)?,
            prior: GaussHermiteRule::new(orders.prior)?,
        })
    }

    pub fn orders(&self) -> QuadratureOrders {
        QuadratureOrders {
            outer: self.outer.order(),
            inner: self.inner.order(),
            prior: self.prior.order(),
        }
    }
}

impl Default for PotentialRules {
    fn default() -> Self {
        PotentialRules::new(QuadratureOrders::default()).expect("default orders are in range")
    }
}

/// A point `(h1, h2)` of the domain `[0, rho] x R_+` of `Psi_l(.; rho)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialPoint {
    pub h1: f64,
    pub h2: f64,
    pub rho: f64,
}

impl PotentialPoint {
    pub fn new(h1: f64, h2: f64, rho: f64) -> Result<Self> {
        let p = PotentialPoint { h1, h2, rho };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::Precondition(format!("rho = {} must be positive", self.rho)));
        }
        if !(self.h1 >= 0.0 && self.h1 <= self.rho) {
            return Err(Error::Precondition(format!(
                "h1 = {} outside [0, rho = {}]",
                self.h1, self.rho
            )));
        }
        if !(self.h2 >= 0.0 && self.h2 <= H2_LIMIT) {
            return Err(Error::Precondition(format!(
                "h2 = {} outside the supported range [0, {H2_LIMIT}]",
                self.h2
            )));
        }
        Ok(())
    }
}

/// `P~_{h2}(y | z) = sum_a P(a) exp(-(y - sqrt(h2) phi(z, a))^2 / 2)`.
pub fn channel_density(y: f64, z: f64, h2: f64, act: &ActivationSpec) -> f64 {
    log_channel_density(y, z, h2, act).exp()
}

/// Logarithm of [`channel_density`], shifted so it stays finite for large `h2`.
pub fn log_channel_density(y: f64, z: f64, h2: f64, act: &ActivationSpec) -> f64 {
    let gain = h2.sqrt();
    let terms: Vec<f64> = act
        .branches()
        .iter()
        .map(|(b, p)| {
            let d = y - gain * b.eval(z);
            p.ln() - 0.5 * d * d
        })
        .collect();
    log_sum_exp(&terms)
}

/// `Psi_0(r) = E log sum_x P(x) exp(r X x + sqrt(r) Z' x - r x^2 / 2)`.
pub fn psi0(r: f64, prior: &PriorSpec, rule: &GaussHermiteRule) -> Result<f64> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::Precondition(format!("Psi_0 needs r >= 0, got {r}")));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let sr = r.sqrt();
    let log_w: Vec<f64> = prior.atoms.iter().map(|a| a.weight.ln()).collect();
    let mut terms = vec![0.0; prior.atoms.len()];
    let mut total = 0.0;
    for truth in &prior.atoms {
        let inner = rule.expect(|z| {
            for ((t, atom), lw) in terms.iter_mut().zip(&prior.atoms).zip(&log_w) {
                let x = atom.value;
                *t = lw + r * truth.value * x + sr * z * x - 0.5 * r * x * x;
            }
            log_sum_exp(&terms)
        });
        total += truth.weight * inner;
    }
    Ok(total)
}

/// `Psi_l(h1, h2; rho)` of a layer channel with activation `act`.
///
/// Outer expectation over `(V, W, Z)` by the tensor rule `rules.outer` and the
/// true side-information atom; inner integral over `w` by `rules.inner`
/// together with the side-information sum, inside a shifted logarithm. At
/// `h1 == rho` the inner integrand does not depend on `w` and the collapsed
/// two-dimensional form is used.
pub fn psi_layer(
    h1: f64,
    h2: f64,
    rho: f64,
    act: &ActivationSpec,
    rules: &PotentialRules,
) -> Result<f64> {
    PotentialPoint { h1, h2, rho }.validate()?;
    if h1 == rho {
        return Ok(psi_layer_collapsed(h2, rho, act, &rules.outer, &rules.prior));
    }

    let branches = act.branches();
    let gain = h2.sqrt();
    let (mean_scale, sigma) = (h1.sqrt(), (rho - h1).sqrt());
    let outer = &rules.outer;
    let inner = &rules.inner;
    let kb = inner.order() * branches.len();

    // log(w_k P(a_b)) for every inner node/atom pair
    let log_c: Vec<f64> = inner
        .weights()
        .iter()
        .flat_map(|w| branches.iter().map(move |(_, p)| w.ln() + p.ln()))
        .collect();

    let m = outer.order();
    let mut amp = vec![0.0; kb];
    let mut base = vec![0.0; kb];
    let mut ez = vec![0.0; m * kb];
    let mut ez_shift = vec![0.0; m];
    let mut eu = vec![0.0; kb];
    let mut scratch = vec![0.0; kb];

    let mut total = 0.0;
    for (v, wv) in outer.iter() {
        let mean = mean_scale * v;
        for (k, w) in inner.nodes().iter().enumerate() {
            let s = mean + sigma * w;
            for (b, (branch, _)) in branches.iter().enumerate() {
                amp[k * branches.len() + b] = gain * branch.eval(s);
            }
        }
        for i in 0..kb {
            base[i] = log_c[i] - 0.5 * amp[i] * amp[i];
        }
        for (zi, z) in outer.nodes().iter().enumerate() {
            let shift = amp.iter().fold(f64::NEG_INFINITY, |acc, a| acc.max(z * a));
            ez_shift[zi] = shift;
            let row = &mut ez[zi * kb..(zi + 1) * kb];
            for (e, a) in row.iter_mut().zip(&amp) {
                *e = (z * a - shift).exp();
            }
        }

        let mut v_total = 0.0;
        for (w_node, ww) in outer.iter() {
            let s_true = mean + sigma * w_node;
            for (branch, p_true) in &branches {
                let u = gain * branch.eval(s_true);
                let mut shift = f64::NEG_INFINITY;
                for i in 0..kb {
                    scratch[i] = base[i] + u * amp[i];
                    shift = shift.max(scratch[i]);
                }
                for i in 0..kb {
                    eu[i] = (scratch[i] - shift).exp();
                }
                let mut z_total = 0.0;
                for (zi, (z, wz)) in outer.iter().enumerate() {
                    let row = &ez[zi * kb..(zi + 1) * kb];
                    let s: f64 = eu.iter().zip(row).map(|(a, b)| a * b).sum();
                    let y = u + z;
                    let log_inner = if s > FACTORIZED_FLOOR {
                        s.ln() + shift + ez_shift[zi]
                    } else {
                        for i in 0..kb {
                            scratch[i] = base[i] + y * amp[i];
                        }
                        log_sum_exp(&scratch)
                    };
                    z_total += wz * (log_inner - 0.5 * y * y);
                }
                v_total += ww * p_true * z_total;
            }
        }
        total += wv * v_total;
    }
    if !total.is_finite() {
        return Err(Error::Numeric(format!(
            "Psi_l({h1}, {h2}; {rho}) evaluated to {total}"
        )));
    }
    Ok(total)
}

/// `Psi_l(rho, h2; rho) = E log P~_{h2}(sqrt(h2) phi(sqrt(rho) V, A) + Z | sqrt(rho) V)`.
fn psi_layer_collapsed(
    h2: f64,
    rho: f64,
    act: &ActivationSpec,
    rule: &GaussHermiteRule,
    noise: &GaussHermiteRule,
) -> f64 {
    let branches = act.branches();
    let gain = h2.sqrt();
    let scale = rho.sqrt();
    let mut amp = vec![0.0; branches.len()];
    let mut terms = vec![0.0; branches.len()];
    rule.expect(|v| {
        let s = scale * v;
        for (a, (b, _)) in amp.iter_mut().zip(&branches) {
            *a = gain * b.eval(s);
        }
        let mut acc = 0.0;
        for (i, (_, p_true)) in branches.iter().enumerate() {
            acc += p_true
                * noise.expect(|z| {
                    let y = amp[i] + z;
                    for ((t, a), (_, p)) in terms.iter_mut().zip(&amp).zip(&branches) {
                        let d = y - a;
                        *t = p.ln() - 0.5 * d * d;
                    }
                    log_sum_exp(&terms)
                });
        }
        acc
    })
}

/// Coordinate of a partial derivative of `Psi_l`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coordinate {
    H1,
    H2,
}

/// Finite-difference derivative of a function on `[lo, hi]` at `x`: central
/// when both neighbours are inside, second-order one-sided otherwise.
pub fn box_derivative(
    mut f: impl FnMut(f64) -> Result<f64>,
    x: f64,
    lo: f64,
    hi: f64,
    step: f64,
) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::Precondition(format!("step {step} must be positive")));
    }
    if hi - lo < 2.0 * step {
        return Err(Error::Precondition(format!(
            "box [{lo}, {hi}] too narrow for step {step}"
        )));
    }
    if x - step >= lo && x + step <= hi {
        Ok((f(x + step)? - f(x - step)?) / (2.0 * step))
    } else if x - step < lo {
        let (f0, f1, f2) = (f(x)?, f(x + step)?, f(x + 2.0 * step)?);
        Ok((-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * step))
    } else {
        let (f0, f1, f2) = (f(x)?, f(x - step)?, f(x - 2.0 * step)?);
        Ok((3.0 * f0 - 4.0 * f1 + f2) / (2.0 * step))
    }
}

/// Partial derivative of `Psi_l` by finite differences with absolute `step`.
pub fn psi_partial(
    which: Coordinate,
    point: PotentialPoint,
    act: &ActivationSpec,
    rules: &PotentialRules,
    step: f64,
) -> Result<f64> {
    point.validate()?;
    let PotentialPoint { h1, h2, rho } = point;
    match which {
        Coordinate::H1 => box_derivative(|x| psi_layer(x, h2, rho, act, rules), h1, 0.0, rho, step),
        Coordinate::H2 => {
            box_derivative(|x| psi_layer(h1, x, rho, act, rules), h2, 0.0, H2_LIMIT, step)
        }
    }
}

/// `Psi_0'(r)` by finite differences with absolute `step`.
pub fn psi0_derivative(r: f64, prior: &PriorSpec, rule: &GaussHermiteRule, step: f64) -> Result<f64> {
    box_derivative(|x| psi0(x, prior, rule), r, 0.0, H2_LIMIT, step)
}

/// The default absolute step for a coordinate at `point`.
pub fn default_step(which: Coordinate, point: &PotentialPoint) -> f64 {
    match which {
        Coordinate::H1 => DEFAULT_FD_STEP * point.rho,
        Coordinate::H2 => DEFAULT_FD_STEP * point.h2.max(1.0),
    }
}
