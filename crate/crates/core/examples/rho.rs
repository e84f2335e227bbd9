//! Second moments along a tanh chain, next to their finite-n estimates.

use mlglm::model::{empirical_rho, ActivationSpec, LayerSpec, ModelSpec, PriorSpec};
use mlglm::recursion::compute_rho_default;

fn main() -> mlglm::Result<()> {
    let layers = (0..3)
        .map(|_| LayerSpec { alpha: 1.0, activation: ActivationSpec::tanh(1.5) })
        .collect();
    let model = ModelSpec::new(PriorSpec::rademacher(), layers, 1.0)?;
    let rho = compute_rho_default(&model)?;
    println!("rho = {:?}", rho.values);

    for n in [50, 200, 800] {
        let emp = empirical_rho(&model, n, 200, 11)?;
        println!(
            "n = {n:4}: mean |X^(L)|^2 / n_L = {:.5} (sd {:.5})",
            emp.mean,
            emp.variance.sqrt()
        );
    }
    Ok(())
}
