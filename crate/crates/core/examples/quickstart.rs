//! Runs RS-SVRG and RS-SGD on a small ranking instance and prints the gap per epoch.

use rssvrg::bench::{reference_optimum, run_comparison, Experiment, ReferenceBudget};
use rssvrg::{Exec, SolverKind};

fn main() -> rssvrg::Result<()> {
    let exp = Experiment {
        n_pairs: 300,
        epochs: 6,
        ..Experiment::default()
    };
    let problem = exp.problem()?;
    let reference = reference_optimum(&problem, &exp, &ReferenceBudget::default())?;
    let solvers = [SolverKind::RsSvrg, SolverKind::RsSgd];
    let cmp = run_comparison(&problem, &exp, &solvers, &[1], reference, Exec::default())?;

    println!("p* = {:.10}", cmp.reference.p_star);
    for trace in &cmp.traces {
        for r in &trace.records {
            println!(
                "{:8} epoch {:2}  evals {:7}  gap {:.4e}",
                trace.solver,
                r.epoch,
                r.grad_evals,
                cmp.reference.gap(r.objective)?
            );
        }
    }
    Ok(())
}
