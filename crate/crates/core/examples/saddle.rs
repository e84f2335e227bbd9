//! Solves the two-layer sup-inf by grid search and by fixed-point iteration.

use mlglm::model::{ActivationSpec, LayerSpec, ModelSpec, PriorSpec};
use mlglm::potentials::PotentialRules;
use mlglm::recursion::compute_rho_default;
use mlglm::saddle::{solve_fixed_point, solve_grid, FixedPointOptions, GridOptions, SaddleProblem};

fn main() -> mlglm::Result<()> {
    let layers = vec![
        LayerSpec { alpha: 0.5, activation: ActivationSpec::tanh(1.0) },
        LayerSpec { alpha: 1.5, activation: ActivationSpec::tanh(1.0) },
    ];
    let model = ModelSpec::new(PriorSpec::rademacher(), layers, 1.0)?;
    let rho = compute_rho_default(&model)?;
    let problem = SaddleProblem::new(model, rho, PotentialRules::default())?;

    let grid = solve_grid(&problem, &GridOptions::default())?;
    let fixed = solve_fixed_point(&problem, &FixedPointOptions::default())?;
    for r in [&grid, &fixed] {
        println!("{:?}: value {:.8}, residual {:.1e}", r.method, r.value, r.residual);
        for (l, v) in r.variables.layers.iter().enumerate() {
            println!("  layer {}: y = ({:.5}, {:.5}), z = ({:.5}, {:.5})", l + 1, v.y1, v.y2, v.z1, v.z2);
        }
    }
    println!("difference {:.2e}", grid.value - fixed.value);
    Ok(())
}
