//! Analytic gradients against central finite differences on small random
//! networks.

use emwavenet::autograd::{gradcheck, FdSteps, GradCheckInstance};

fn main() -> emwavenet::Result<()> {
    for seed in 0..5 {
        let report = gradcheck(16, 2, 3, seed)?;
        println!(
            "seed {seed}: max rel error {:.2e} over {} entries",
            report.max_rel_error, report.compared
        );
    }

    let inst = GradCheckInstance::random(16, 2, 3, 11)?;
    let analytic = inst.analytic()?;
    for h in [1e-2, 1e-4, 1e-6] {
        let numeric = inst.numeric(FdSteps { amp: h, phase: h / 10.0 })?;
        println!("step {h:e}: max rel error {:.2e}", analytic.max_rel_error(&numeric, 1e-12));
    }
    Ok(())
}
