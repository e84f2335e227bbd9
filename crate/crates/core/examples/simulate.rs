//! Exact finite-n free energies of a one-layer model by enumeration.

use mlglm::model::{ActivationSpec, LayerSpec, ModelSpec, PriorSpec};
use mlglm::simulate::estimate_free_energy;

fn main() -> mlglm::Result<()> {
    let layers = vec![LayerSpec { alpha: 1.0, activation: ActivationSpec::tanh(1.0) }];
    for beta in [0.0, 1.0, 2.0] {
        let model = ModelSpec::new(PriorSpec::rademacher(), layers.clone(), beta)?;
        for n in [6, 10, 14] {
            let e = estimate_free_energy(&model, n, 100, 3)?;
            println!("beta {beta}, n {n:2}: E F = {:.5} +- {:.5}", e.mean, e.stderr);
        }
    }
    Ok(())
}
