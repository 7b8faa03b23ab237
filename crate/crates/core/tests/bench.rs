use std::sync::Arc;

use rssvrg::bench::{
    estimate_variance_b, reference_optimum, run_comparison, run_study, seed_range, study_json,
    write_comparison_csv, Experiment, ReferenceBudget, StudyAxis, TRACE_HEADER,
};
use rssvrg::objective::AbsComponents;
use rssvrg::solvers::run;
use rssvrg::{CompositeProblem, Exec, Regularizer, SmoothingKind, SolverKind};

fn small() -> Experiment {
    Experiment {
        n_pairs: 200,
        epochs: 6,
        ..Experiment::default()
    }
}

fn quick_budget() -> ReferenceBudget {
    ReferenceBudget {
        svrg_epochs: 12,
        fgd_iters: 5_000,
        polish_iters: 2_000,
        ..ReferenceBudget::default()
    }
}

#[test]
fn abs_variance_matches_bernoulli() {
    let p = CompositeProblem::new(Arc::new(AbsComponents::new(1)), Regularizer::None).unwrap();
    let b = estimate_variance_b(&p, SmoothingKind::Gaussian, &[0.0], 1.0, 5, 4000, 3, Exec::default())
        .unwrap();
    // reference batch of 100·m draws adds 1/(100m) to the expected squared error
    let expect = 1.0 / 5.0 + 1.0 / 500.0;
    assert!((b.mean - expect).abs() <= 3.0 * b.stderr, "{b:?}");
}

#[test]
fn hinge_variance_follows_inverse_m() {
    let exp = Experiment::default();
    let p = exp.problem().unwrap();
    let x = vec![0.0; p.dim()];
    let b5 = estimate_variance_b(&p, exp.dist, &x, 0.125, 5, 2000, 4, Exec::default()).unwrap();
    let b50 = estimate_variance_b(&p, exp.dist, &x, 0.125, 50, 2000, 4, Exec::default()).unwrap();
    let ratio = b5.mean / b50.mean;
    assert!((ratio / 10.0 - 1.0).abs() <= 0.2, "ratio {ratio}");
}

#[test]
fn variance_estimate_identical_across_exec_modes() {
    let exp = small();
    let p = exp.problem().unwrap();
    let x = vec![0.001; p.dim()];
    let a = estimate_variance_b(&p, exp.dist, &x, 0.125, 5, 40, 9, Exec::Parallel).unwrap();
    let b = estimate_variance_b(&p, exp.dist, &x, 0.125, 5, 40, 9, Exec::Sequential).unwrap();
    assert_eq!(a, b);
}

#[test]
fn single_solver_single_seed_equals_direct_call() {
    let exp = small();
    let p = exp.problem().unwrap();
    let reference = reference_optimum(&p, &exp, &quick_budget()).unwrap();
    let cmp = run_comparison(&p, &exp, &[SolverKind::RsSag], &[11], reference, Exec::default()).unwrap();
    let direct = run(&p, &exp.solver_config(&p, SolverKind::RsSag, 11).unwrap()).unwrap();
    assert_eq!(cmp.traces.len(), 1);
    assert_eq!(cmp.traces[0].final_point, direct.final_point);
    assert_eq!(cmp.traces[0].records.len(), direct.records.len());
}

#[test]
fn comparison_gaps_are_nonnegative_and_deterministic() {
    let exp = small();
    let p = exp.problem().unwrap();
    let reference = reference_optimum(&p, &exp, &quick_budget()).unwrap();
    let seeds = seed_range(1, 3);
    let render = |exec| {
        let cmp = run_comparison(&p, &exp, &SolverKind::ALL, &seeds, reference.clone(), exec).unwrap();
        for t in &cmp.traces {
            for r in &t.records {
                assert!(cmp.reference.gap(r.objective).unwrap() >= 0.0);
            }
        }
        write_comparison_csv(Vec::new(), &cmp, exp.dist, false).unwrap()
    };
    let a = render(Exec::Parallel);
    let b = render(Exec::Sequential);
    assert_eq!(a, b);

    let mut rdr = csv::Reader::from_reader(a.as_slice());
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), TRACE_HEADER);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 5 * 3 * exp.epochs + 1);
    for row in &rows {
        row[5].parse::<u64>().unwrap();
        row[6].parse::<f64>().unwrap();
        assert!(row[7].parse::<f64>().unwrap() >= 0.0);
    }
}

#[test]
fn study_with_single_grid_point() {
    let exp = small();
    let study = run_study(
        StudyAxis::SamplingM,
        &[5],
        &exp,
        &[1, 2],
        &quick_budget(),
        Exec::default(),
    )
    .unwrap();
    assert_eq!(study.grid(), vec![5]);
    assert_eq!(study.points[0].traces.len(), 2);
    let doc: serde_json::Value = serde_json::from_str(&study_json(&study, &exp).unwrap()).unwrap();
    assert_eq!(doc["grid"], serde_json::json!([5]));
    assert_eq!(doc["median_final_gap"].as_array().unwrap().len(), 1);
    assert_eq!(doc["config"]["n_pairs"], 200);
}

#[test]
fn reference_is_below_every_solver() {
    let exp = small();
    let p = exp.problem().unwrap();
    let reference = reference_optimum(&p, &exp, &quick_budget()).unwrap();
    assert!((p.evaluate(&reference.x_star).unwrap() - reference.p_star).abs() < 1e-12);
    assert!(reference.p_star <= p.evaluate(&vec![0.0; p.dim()]).unwrap());
}
