use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fixed_point::{check_interior, stationarity_map};
use super::{Diagnostic, LayerVariables, Method, SaddlePointResult, SaddleProblem, SaddleVariables};
use crate::error::{Error, Result};
use crate::interp::{quadratic_nodes, uniform_nodes, CubicTable};
use crate::optimize::{golden_max, grid_golden_min, zoom_max};
use crate::potentials::{psi0, psi_layer};

const GOLDEN_TOL: f64 = 1e-11;
const Z1_CELLS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridOptions {
    /// Cells of the initial `z2` grid of every stage.
    pub resolution: usize,
    /// Zoom rounds of the `z2` search, each with `4 * resolution` cells.
    pub refine_rounds: usize,
    /// Cells of the `Psi_l` tables along `y1` and of the value-function
    /// table along `y2` (the `Psi_0` table uses four times as many).
    pub table_cells: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            resolution: 16,
            refine_rounds: 3,
            table_cells: 64,
        }
    }
}

/// One `sup_z inf_y` stage: `alpha_l Psi_l(y1, s)` tabulated in `y1`, the
/// lower-stage value `W(y2)` tabulated in `y2`.
struct Stage<'a> {
    psi: &'a CubicTable,
    below: &'a CubicTable,
    coupling: f64,
    constant: f64,
    z1_max: f64,
    z2_max: f64,
}

#[derive(Clone, Debug)]
struct StageSolution {
    value: f64,
    vars: LayerVariables,
    cell_variation: f64,
    round_changes: Vec<f64>,
}

impl Stage<'_> {
    /// `inf_{y1} alpha Psi(y1) - y1 z1` and its minimizer.
    fn lower_y1(&self, z1: f64) -> (f64, f64) {
        let cells = self.psi.nodes().len() - 1;
        let e = grid_golden_min(
            |y| self.psi.eval(y) - y * z1,
            self.psi.lo(),
            self.psi.hi(),
            cells,
            GOLDEN_TOL,
        );
        (e.value, e.x)
    }

    /// `inf_{y2} W(y2) - y2 z2` and its minimizer.
    fn lower_y2(&self, z2: f64) -> (f64, f64) {
        let cells = 4 * (self.below.nodes().len() - 1);
        let e = grid_golden_min(
            |y| self.below.eval(y) - y * z2,
            self.below.lo(),
            self.below.hi(),
            cells,
            GOLDEN_TOL,
        );
        (e.value, e.x)
    }

    /// `sup_{z1} inf_{y1} ... + coupling z1 z2`; concave in `z1`.
    fn upper_z1(&self, z2: f64) -> (f64, f64) {
        let f = |z1: f64| self.lower_y1(z1).0 + self.coupling * z1 * z2;
        let h = self.z1_max / Z1_CELLS as f64;
        let mut best = (0usize, f64::NEG_INFINITY);
        for i in 0..=Z1_CELLS {
            let v = f(i as f64 * h);
            if v > best.1 {
                best = (i, v);
            }
        }
        let lo = best.0.saturating_sub(1) as f64 * h;
        let hi = ((best.0 + 1) as f64 * h).min(self.z1_max);
        let e = golden_max(f, lo, hi, GOLDEN_TOL);
        if e.value >= best.1 {
            (e.value, e.x)
        } else {
            (best.1, best.0 as f64 * h)
        }
    }

    fn solve(&self, options: &GridOptions) -> StageSolution {
        let zoom = zoom_max(
            |z2| self.lower_y2(z2).0 + self.upper_z1(z2).0,
            0.0,
            self.z2_max,
            options.resolution,
            options.refine_rounds,
        );
        let z2 = zoom.best.x;
        let (_, z1) = self.upper_z1(z2);
        let (_, y1) = self.lower_y1(z1);
        let (_, y2) = self.lower_y2(z2);
        StageSolution {
            value: zoom.best.value + self.constant,
            vars: LayerVariables { y1, y2, z1, z2 },
            cell_variation: zoom.cell_variation,
            round_changes: zoom.round_changes,
        }
    }
}

/// Largest `z1` worth searching for a convex table `psi`: beyond its
/// steepest slope the `z1` objective is nonincreasing.
fn z1_bound(psi: &CubicTable, r_cap: f64) -> f64 {
    let (x, v) = (psi.nodes(), psi.values());
    let slope = x
        .windows(2)
        .zip(v.windows(2))
        .map(|(xw, vw)| (vw[1] - vw[0]) / (xw[1] - xw[0]))
        .fold(0.0, f64::max);
    (1.05 * slope + 1e-3).min(r_cap)
}

fn psi_table(problem: &SaddleProblem, l: usize, h2: f64, cells: usize) -> Result<CubicTable> {
    let r = problem.rho.get(l - 1);
    let alpha = problem.model.alpha(l);
    let act = problem.model.activation(l);
    let nodes = uniform_nodes(0.0, r, cells);
    let values = nodes
        .par_iter()
        .map(|&y1| Ok(alpha * psi_layer(y1, h2, r, act, &problem.rules)?))
        .collect::<Result<Vec<f64>>>()?;
    CubicTable::new(nodes, values)
}

/// Nested grid search for depth `L <= 2`: each `sup_z inf_y` stage is
/// solved on a zooming `z2` grid with inner one-dimensional searches, using
/// tabulated `Psi_l` and, for `L = 2`, a tabulated first-stage value
/// function of `y^(2)_2`.
pub fn solve_grid(problem: &SaddleProblem, options: &GridOptions) -> Result<SaddlePointResult> {
    let depth = problem.model.depth();
    if depth > 2 {
        return Err(Error::Unsupported(format!(
            "grid search needs depth <= 2 (got {depth}); use solve_fixed_point"
        )));
    }
    if options.resolution < 8 {
        return Err(Error::Precondition(format!(
            "grid resolution {} below 8",
            options.resolution
        )));
    }
    if options.table_cells < 8 {
        return Err(Error::Precondition(format!(
            "table_cells {} below 8",
            options.table_cells
        )));
    }
    let model = &problem.model;
    let caps = problem.caps;
    let cells = options.table_cells;

    let y_nodes = quadratic_nodes(caps.y_max, 4 * cells);
    let psi0_table = CubicTable::from_fn(y_nodes, |y| psi0(y, &model.prior, &problem.rules.prior))?;

    let stage = |psi: &CubicTable, below: &CubicTable, l: usize| -> StageSolution {
        let constant = if l >= 2 { model.alpha(l - 1) / 2.0 } else { 0.0 };
        Stage {
            psi,
            below,
            coupling: 2.0 / model.alpha(l - 1),
            constant,
            z1_max: z1_bound(psi, caps.r_cap),
            z2_max: problem.z2_max(l),
        }
        .solve(options)
    };

    let top_psi = psi_table(problem, depth, model.beta, cells)?;
    let mut solutions = Vec::with_capacity(depth);
    if depth == 1 {
        solutions.push(stage(&top_psi, &psi0_table, 1));
    } else {
        // V_1(s) on a grid of s = y^(2)_2, then W_1(s) = V_1(s) + alpha_1 rho_1 s / 2
        let s_nodes = quadratic_nodes(caps.y_max, cells);
        let lower = s_nodes
            .par_iter()
            .map(|&s| {
                let psi = psi_table(problem, 1, s, cells)?;
                let v = stage(&psi, &psi0_table, 1).value;
                Ok(v + model.alpha(1) * problem.rho.get(1) * s / 2.0)
            })
            .collect::<Result<Vec<f64>>>()?;
        let w1 = CubicTable::new(s_nodes, lower)?;
        let top = stage(&top_psi, &w1, 2);
        let psi_at = psi_table(problem, 1, top.vars.y2, cells)?;
        solutions.push(stage(&psi_at, &psi0_table, 1));
        solutions.push(top);
    }

    let variables = SaddleVariables {
        layers: solutions.iter().map(|s| s.vars).collect(),
    };
    let top = solutions.last().expect("depth >= 1");
    let final_cell = caps.y_max / (4 * cells) as f64;
    check_interior(problem, &variables, final_cell.min(1e-6 * caps.r_cap))?;

    let image = stationarity_map(&variables, problem)?;
    let residual = variables.distance(&image);
    let contraction = top
        .round_changes
        .windows(2)
        .all(|w| w[1] <= w[0]);
    let mut diagnostics = vec![
        Diagnostic::new(
            "cell-variation",
            solutions.iter().map(|s| s.cell_variation).fold(0.0, f64::max),
            "largest objective change to a neighbouring cell of the final z2 grid",
        ),
        Diagnostic::new(
            "refinement-contraction",
            if contraction { 1.0 } else { 0.0 },
            format!("incumbent changes per round: {:?}", top.round_changes),
        ),
    ];
    if depth == 2 {
        diagnostics.push(Diagnostic::new(
            "first-stage-value",
            solutions[0].value,
            "first-stage value at the selected y^(2)_2, from a fresh table",
        ));
    }
    Ok(SaddlePointResult {
        variables,
        value: top.value,
        method: Method::Grid,
        residual,
        iterations: 0,
        heuristic: false,
        diagnostics,
    })
}
