use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Diagnostic, LayerVariables, Method, SaddlePointResult, SaddleProblem, SaddleVariables};
use crate::error::{Error, Result};
use crate::potentials::{
    box_derivative, psi0, psi_layer, DEFAULT_FD_STEP, H2_LIMIT,
};

/// Spread of converged restart values above which a disagreement is reported.
pub const RESTART_AGREEMENT: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixedPointOptions {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            damping: 0.5,
            tol: 1e-7,
            max_iter: 500,
            restarts: 8,
            seed: 0,
        }
    }
}

/// `T(x)`: each coordinate set to the value that makes its partial
/// derivative of `phi_L` vanish, then projected onto the (capped) boxes.
pub fn stationarity_map(x: &SaddleVariables, problem: &SaddleProblem) -> Result<SaddleVariables> {
    let model = &problem.model;
    let rho = &problem.rho;
    let rules = &problem.rules;
    let depth = model.depth();
    let caps = problem.caps;
    let mut out = Vec::with_capacity(depth);
    for l in 1..=depth {
        let v = x.layer(l);
        let c = 2.0 / model.alpha(l - 1);
        let r = rho.get(l - 1);
        let h2 = if l == depth { model.beta } else { x.layer(l + 1).y2 };
        let act = model.activation(l);
        let d1 = box_derivative(
            |h1| psi_layer(h1, h2, r, act, rules),
            v.y1,
            0.0,
            r,
            DEFAULT_FD_STEP * r,
        )?;
        let z2 = if l == 1 {
            box_derivative(
                |s| psi0(s, &model.prior, &rules.prior),
                v.y2,
                0.0,
                H2_LIMIT,
                DEFAULT_FD_STEP * v.y2.max(1.0),
            )?
        } else {
            let below = x.layer(l - 1);
            let r_below = rho.get(l - 2);
            let d2 = box_derivative(
                |s| psi_layer(below.y1, s, r_below, model.activation(l - 1), rules),
                v.y2,
                0.0,
                H2_LIMIT,
                DEFAULT_FD_STEP * v.y2.max(1.0),
            )?;
            model.alpha(l - 1) * (d2 + r / 2.0)
        };
        out.push(LayerVariables {
            y1: (c * v.z2).clamp(0.0, r),
            y2: (c * v.z1).clamp(0.0, caps.y_max),
            z1: (model.alpha(l) * d1).clamp(0.0, caps.r_cap),
            z2: z2.clamp(0.0, problem.z2_max(l)),
        });
    }
    Ok(SaddleVariables { layers: out })
}

/// One damped iteration run from `start`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub start: SaddleVariables,
    pub end: SaddleVariables,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Iterates `x <- x + damping (T(x) - x)` until `max |x - T(x)| < tol`.
pub fn iterate_from(
    problem: &SaddleProblem,
    start: &SaddleVariables,
    damping: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Trajectory> {
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::Precondition(format!("damping {damping} outside (0, 1]")));
    }
    let mut x = start.to_flat();
    let mut residual = f64::INFINITY;
    for it in 0..max_iter {
        let t = stationarity_map(&SaddleVariables::from_flat(&x), problem)?.to_flat();
        residual = x.iter().zip(&t).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if residual < tol {
            return Ok(Trajectory {
                start: start.clone(),
                end: SaddleVariables::from_flat(&x),
                residual,
                iterations: it,
                converged: true,
            });
        }
        for (a, b) in x.iter_mut().zip(&t) {
            *a += damping * (b - *a);
        }
    }
    Ok(Trajectory {
        start: start.clone(),
        end: SaddleVariables::from_flat(&x),
        residual,
        iterations: max_iter,
        converged: false,
    })
}

/// Uniform draws in the capped boxes, one per restart.
pub fn restart_points(problem: &SaddleProblem, restarts: usize, seed: u64) -> Vec<SaddleVariables> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = problem.model.depth();
    (0..restarts)
        .map(|_| SaddleVariables {
            layers: (1..=depth)
                .map(|l| LayerVariables {
                    y1: rng.random::<f64>() * problem.rho.get(l - 1),
                    y2: rng.random::<f64>() * problem.caps.y_max,
                    z1: rng.random::<f64>() * problem.caps.r_cap,
                    z2: rng.random::<f64>() * problem.z2_max(l),
                })
                .collect(),
        })
        .collect()
}

/// Errors if `vars` sits on a truncation cap.
pub(crate) fn check_interior(problem: &SaddleProblem, vars: &SaddleVariables, slack: f64) -> Result<()> {
    for (i, v) in vars.layers.iter().enumerate() {
        if v.z1 >= problem.caps.r_cap - slack {
            return Err(Error::Truncation(format!(
                "z1 of layer {} = {} reaches R_CAP = {}",
                i + 1,
                v.z1,
                problem.caps.r_cap
            )));
        }
        if v.y2 >= problem.caps.y_max - slack {
            return Err(Error::Truncation(format!(
                "y2 of layer {} = {} reaches Y_MAX = {}",
                i + 1,
                v.y2,
                problem.caps.y_max
            )));
        }
    }
    Ok(())
}

/// Damped fixed-point iteration of [`stationarity_map`] from
/// `options.restarts` random starts; returns the converged run with the
/// largest objective.
pub fn solve_fixed_point(problem: &SaddleProblem, options: &FixedPointOptions) -> Result<SaddlePointResult> {
    if options.restarts == 0 {
        return Err(Error::Precondition("at least one restart is required".into()));
    }
    let starts = restart_points(problem, options.restarts, options.seed);
    let runs: Vec<Trajectory> = starts
        .par_iter()
        .map(|s| iterate_from(problem, s, options.damping, options.tol, options.max_iter))
        .collect::<Result<_>>()?;

    let mut converged = Vec::new();
    for run in runs.iter().filter(|r| r.converged) {
        converged.push((run, problem.objective(&run.end)?));
    }
    if converged.is_empty() {
        let best = runs.iter().map(|r| r.residual).fold(f64::INFINITY, f64::min);
        return Err(Error::NonConvergence {
            what: format!("fixed-point iteration ({} restarts)", runs.len()),
            best_residual: best,
        });
    }
    let mut best = 0;
    for (i, (_, v)) in converged.iter().enumerate() {
        if *v > converged[best].1 {
            best = i;
        }
    }
    let (run, value) = converged[best];
    // damped iterates approach a binding cap only geometrically
    check_interior(problem, &run.end, 10.0 * options.tol)?;

    let lo = converged.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let hi = converged.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let mut diagnostics = vec![
        Diagnostic::new(
            "converged-restarts",
            converged.len() as f64,
            format!("{} of {} restarts converged", converged.len(), runs.len()),
        ),
        Diagnostic::new("restart-spread", hi - lo, "max - min objective over converged restarts"),
    ];
    if hi - lo > RESTART_AGREEMENT {
        diagnostics.push(Diagnostic::new(
            "restart-disagreement",
            hi - lo,
            format!(
                "converged restarts reach values in [{lo}, {hi}]; the largest is reported"
            ),
        ));
    }
    Ok(SaddlePointResult {
        variables: run.end.clone(),
        value,
        method: Method::FixedPoint,
        residual: run.residual,
        iterations: run.iterations,
        heuristic: problem.model.depth() >= 3,
        diagnostics,
    })
}
