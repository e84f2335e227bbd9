//! The limit objective `phi_L` and its nested sup-inf over per-layer
//! variables `y^(l), z^(l)`, solved by nested grid search ([`solve_grid`])
//! and by iterating the first-order stationarity conditions
//! ([`solve_fixed_point`]).

mod fixed_point;
mod grid;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, RhoSequence};
use crate::potentials::{psi0, psi_layer, PotentialRules};

pub use fixed_point::{
    iterate_from, restart_points, solve_fixed_point, stationarity_map, FixedPointOptions, Trajectory,
    RESTART_AGREEMENT,
};
pub use grid::{solve_grid, GridOptions};

/// Variables of one layer: `y = (y1, y2)` and `z = (z1, z2)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LayerVariables {
    pub y1: f64,
    pub y2: f64,
    pub z1: f64,
    pub z2: f64,
}

/// `y^(l), z^(l)` for `l = 1..L`, stored at index `l - 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaddleVariables {
    pub layers: Vec<LayerVariables>,
}

impl SaddleVariables {
    pub fn zeros(depth: usize) -> Self {
        SaddleVariables {
            layers: vec![LayerVariables::default(); depth],
        }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Layer `l` (1-based).
    pub fn layer(&self, l: usize) -> &LayerVariables {
        &self.layers[l - 1]
    }

    pub(crate) fn to_flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|v| [v.y1, v.y2, v.z1, v.z2])
            .collect()
    }

    pub(crate) fn from_flat(flat: &[f64]) -> Self {
        SaddleVariables {
            layers: flat
                .chunks_exact(4)
                .map(|c| LayerVariables { y1: c[0], y2: c[1], z1: c[2], z2: c[3] })
                .collect(),
        }
    }

    /// `max |a - b|` over all coordinates.
    pub fn distance(&self, other: &SaddleVariables) -> f64 {
        self.to_flat()
            .iter()
            .zip(other.to_flat())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Checks the boxes `y1 in [0, rho_{l-1}]`, `y2 >= 0`, `z1 >= 0`,
    /// `z2 in [0, alpha_{l-1} rho_{l-1} / 2]`.
    pub fn check_boxes(&self, model: &ModelSpec, rho: &RhoSequence) -> Result<()> {
        if self.depth() != model.depth() {
            return Err(Error::Precondition(format!(
                "{} layers of variables for a depth-{} model",
                self.depth(),
                model.depth()
            )));
        }
        for (i, v) in self.layers.iter().enumerate() {
            let l = i + 1;
            let r = rho.get(l - 1);
            let z2_max = model.alpha(l - 1) * r / 2.0;
            let ok = (0.0..=r).contains(&v.y1)
                && v.y2 >= 0.0
                && v.y2.is_finite()
                && v.z1 >= 0.0
                && v.z1.is_finite()
                && (0.0..=z2_max).contains(&v.z2);
            if !ok {
                return Err(Error::Precondition(format!(
                    "layer {l} variables {v:?} outside y1 in [0, {r}], y2 >= 0, z1 >= 0, z2 in [0, {z2_max}]"
                )));
            }
        }
        Ok(())
    }
}

/// Finite truncations of the unbounded coordinates: `z1 <= r_cap`, `y2 <= y_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Caps {
    pub r_cap: f64,
    pub y_max: f64,
}

impl Caps {
    /// `8 max(beta, 1) max_l alpha_l max_l rho_l` for both caps.
    pub fn default_for(model: &ModelSpec, rho: &RhoSequence) -> Self {
        let alpha_max = (0..=model.depth()).map(|l| model.alpha(l)).fold(0.0, f64::max);
        let cap = 8.0 * model.beta.max(1.0) * alpha_max * rho.max();
        Caps { r_cap: cap, y_max: cap }
    }
}

/// `H(p) = (2 / alpha) p1 p2`.
pub fn hamiltonian(p: [f64; 2], alpha: f64) -> f64 {
    2.0 / alpha * p[0] * p[1]
}

/// `phi_L(y, z)`, assembled term by term.
pub fn phi_objective(
    vars: &SaddleVariables,
    model: &ModelSpec,
    rho: &RhoSequence,
    rules: &PotentialRules,
) -> Result<f64> {
    vars.check_boxes(model, rho)?;
    let depth = model.depth();
    let mut value = psi0(vars.layer(1).y2, &model.prior, &rules.prior)?;
    for l in 1..=depth {
        let v = vars.layer(l);
        let h2 = if l == depth { model.beta } else { vars.layer(l + 1).y2 };
        value += model.alpha(l) * psi_layer(v.y1, h2, rho.get(l - 1), model.activation(l), rules)?;
        value += -v.y1 * v.z1 - v.y2 * v.z2 + hamiltonian([v.z1, v.z2], model.alpha(l - 1));
        if l >= 2 {
            value += model.alpha(l - 1) / 2.0 * (1.0 + rho.get(l - 1) * v.y2);
        }
    }
    Ok(value)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Grid,
    FixedPoint,
}

/// A named observation a solver makes about its own output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub name: String,
    pub value: f64,
    pub detail: String,
}

impl Diagnostic {
    pub fn new(name: &str, value: f64, detail: impl Into<String>) -> Self {
        Diagnostic {
            name: name.to_string(),
            value,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaddlePointResult {
    pub variables: SaddleVariables,
    pub value: f64,
    pub method: Method,
    /// `max |x - T(x)|` of the stationarity map at `variables`.
    pub residual: f64,
    pub iterations: usize,
    /// True when no global-optimality argument backs the result.
    pub heuristic: bool,
    pub diagnostics: Vec<Diagnostic>,
}

impl SaddlePointResult {
    pub fn diagnostic(&self, name: &str) -> Option<&Diagnostic> {
        self.diagnostics.iter().find(|d| d.name == name)
    }
}

/// Everything a solver needs besides its own options.
#[derive(Clone, Debug)]
pub struct SaddleProblem {
    pub model: ModelSpec,
    pub rho: RhoSequence,
    pub rules: PotentialRules,
    pub caps: Caps,
}

impl SaddleProblem {
    pub fn new(model: ModelSpec, rho: RhoSequence, rules: PotentialRules) -> Result<Self> {
        model.validate()?;
        if rho.values.len() != model.depth() + 1 {
            return Err(Error::Precondition(format!(
                "rho has {} entries for a depth-{} model",
                rho.values.len(),
                model.depth()
            )));
        }
        let caps = Caps::default_for(&model, &rho);
        Ok(SaddleProblem { model, rho, rules, caps })
    }

    pub fn with_caps(mut self, caps: Caps) -> Self {
        self.caps = caps;
        self
    }

    pub fn objective(&self, vars: &SaddleVariables) -> Result<f64> {
        phi_objective(vars, &self.model, &self.rho, &self.rules)
    }

    /// Upper end of the `z2` box of layer `l`.
    pub(crate) fn z2_max(&self, l: usize) -> f64 {
        self.model.alpha(l - 1) * self.rho.get(l - 1) / 2.0
    }
}
