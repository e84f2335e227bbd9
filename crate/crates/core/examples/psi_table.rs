//! Tabulates Psi_0 and Psi_1 for a scaled-sine layer with side information.

use mlglm::model::{ActivationSpec, PriorSpec, SideInfoAtom};
use mlglm::potentials::{psi0, psi_layer, PotentialRules};

fn main() -> mlglm::Result<()> {
    let rules = PotentialRules::default();
    let prior = PriorSpec::rademacher();
    for r in [0.0, 0.5, 1.0, 2.0, 4.0] {
        println!("Psi_0({r}) = {:.10}", psi0(r, &prior, &rules.prior)?);
    }

    let act = ActivationSpec::sine(1.2).with_side_info(vec![
        SideInfoAtom { params: vec![1.0], weight: 0.7 },
        SideInfoAtom { params: vec![0.5, 0.3], weight: 0.3 },
    ]);
    let rho = 1.0;
    println!("\n h1 \\ h2      0.0          1.0          3.0");
    for h1 in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let row: Vec<String> = [0.0, 1.0, 3.0]
            .iter()
            .map(|&h2| psi_layer(h1, h2, rho, &act, &rules).map(|v| format!("{v:12.8}")))
            .collect::<mlglm::Result<_>>()?;
        println!("{h1:5.2}  {}", row.join(" "));
    }
    Ok(())
}
