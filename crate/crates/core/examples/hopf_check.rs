//! Builds the Hopf solution for each registry datum and checks it as a weak
//! solution of the Hamilton-Jacobi equation.

use mlglm::hopf::{
    registry, residual_convergence, verify_weak_solution, FieldGrid, HopfOptions, HopfSolver,
    WeakSolutionTolerances,
};

fn main() -> mlglm::Result<()> {
    for (name, data) in registry() {
        let solver = HopfSolver::new(data, &HopfOptions::default())?;
        let (study, field, _) = residual_convergence(&solver, FieldGrid::cubic(16), 2)?;
        let report = verify_weak_solution(&field, &WeakSolutionTolerances::default());
        println!("{name}");
        println!(
            "  residual max {:.2e} -> {:.2e} on halving (ratio {:.2})",
            study.coarse_max, study.fine_max, study.ratio
        );
        println!("  partial convexity min {:.2e}", report.partial_convexity_min);
        println!(
            "  d1 in [{:.4}, {:.4}], d2 in [{:.4}, {:.4}] (bound {:.4})",
            report.d1_min, report.d1_max, report.d2_min, report.d2_max, report.d2_bound
        );
    }
    Ok(())
}
