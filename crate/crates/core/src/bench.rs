//! Experiment harness: reference optima, bound calculators, variance
//! estimates, solver comparisons, parameter studies and their CSV/JSON output.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::linalg::{axpy, dist_sq};
use crate::objective::{CompositeProblem, Point};
use crate::ranking::{RankingInstance, RegSetting};
use crate::rng::substream;
use crate::smoothing::{
    sample_batch, smoothed_component_grad, McEstimate, SmoothingDistribution, SmoothingKind,
};
use crate::solvers::{
    run, run_rs_svrg, EpochSchedule, RunTrace, SolverConfig, SolverKind, DEFAULT_C_STEP,
    DEFAULT_PHI,
};

/// Gaps below `-GAP_TOLERANCE` mean the reference optimum was beaten.
pub const GAP_TOLERANCE: f64 = 1e-9;

/// Problem and schedule settings shared by every run of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub n_pairs: usize,
    pub dim: usize,
    /// Seed of the ranking instance (shared by all solvers and run seeds).
    pub instance_seed: u64,
    pub reg: RegSetting,
    pub dist: SmoothingKind,
    pub m_samples: usize,
    pub inner_m: usize,
    pub epochs: usize,
    pub a0: f64,
    pub phi: f64,
    pub c_step: f64,
    pub max_inner: Option<usize>,
    /// Shrink the feature range by `√(d/10)` to keep `‖u_i‖₂` comparable
    /// across dimensions.
    pub scale_features: bool,
}

impl Default for Experiment {
    fn default() -> Self {
        Self {
            n_pairs: 1000,
            dim: 10,
            instance_seed: 7,
            reg: RegSetting::Ridge,
            dist: SmoothingKind::Gaussian,
            m_samples: 5,
            inner_m: 2,
            epochs: 10,
            a0: 1.0,
            phi: DEFAULT_PHI,
            c_step: DEFAULT_C_STEP,
            max_inner: None,
            scale_features: false,
        }
    }
}

impl Experiment {
    pub fn instance(&self) -> Result<RankingInstance> {
        let range = if self.scale_features {
            RankingInstance::dimension_scaled_range(self.dim)
        } else {
            crate::ranking::FEATURE_MAX
        };
        Ok(RankingInstance::generate_scaled(self.n_pairs, self.dim, self.instance_seed, range)?
            .with_reg(self.reg))
    }

    pub fn problem(&self) -> Result<CompositeProblem> {
        self.instance()?.to_problem()
    }

    pub fn schedule(&self, problem: &CompositeProblem) -> Result<EpochSchedule> {
        EpochSchedule::for_problem(problem, self.dist, self.a0, self.phi, self.inner_m, self.c_step)?
            .with_max_inner(self.max_inner)
    }

    pub fn solver_config(
        &self,
        problem: &CompositeProblem,
        solver: SolverKind,
        seed: u64,
    ) -> Result<SolverConfig> {
        Ok(SolverConfig {
            solver,
            schedule: self.schedule(problem)?,
            dist: self.dist,
            m_samples: self.m_samples,
            epochs: self.epochs,
            seed,
            x_init: None,
        })
    }
}

/// Budget of the reference-optimum search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBudget {
    pub svrg_epochs: usize,
    pub svrg_inner_m: usize,
    /// Cap on the reference RS-SVRG inner loop.
    pub svrg_max_inner: usize,
    pub fgd_iters: usize,
    /// Diminishing-step polish iterations started from the best point.
    pub polish_iters: usize,
    pub seed: u64,
}

impl Default for ReferenceBudget {
    fn default() -> Self {
        Self {
            svrg_epochs: 25,
            svrg_inner_m: 8,
            svrg_max_inner: 1 << 14,
            fgd_iters: 100_000,
            polish_iters: 20_000,
            seed: 0x5eed,
        }
    }
}

/// Best objective value found by the reference search; an upper bound on
/// the true minimum.
#[derive(Clone, Debug, PartialEq)]
pub struct Reference {
    pub p_star: f64,
    pub x_star: Point,
}

impl Reference {
    /// `P − p*`, rejecting values that beat the reference by more than the
    /// tolerance.
    pub fn gap(&self, objective: f64) -> Result<f64> {
        let g = objective - self.p_star;
        if g < -GAP_TOLERANCE {
            return Err(invalid(format!(
                "objective {objective} beats reference optimum {} by more than {GAP_TOLERANCE}",
                self.p_star
            )));
        }
        Ok(g.max(0.0))
    }

    /// Lowers `p*` to any better value seen in `traces`.
    pub fn absorb(&mut self, traces: &[RunTrace]) {
        for t in traces {
            let last = t.records.iter().enumerate().min_by(|a, b| {
                a.1.objective.total_cmp(&b.1.objective).then(a.0.cmp(&b.0))
            });
            if let Some((k, r)) = last {
                if r.objective < self.p_star {
                    self.p_star = r.objective;
                    if k + 1 == t.records.len() {
                        self.x_star = t.final_point.clone();
                    }
                }
            }
        }
    }
}

/// Approximates `min P` by the best point seen across a long capped RS-SVRG
/// run, constant-step proximal full subgradient descent, and a
/// diminishing-step polish from the best point.
pub fn reference_optimum(
    problem: &CompositeProblem,
    experiment: &Experiment,
    budget: &ReferenceBudget,
) -> Result<Reference> {
    let reg = problem.regularizer();
    let schedule = EpochSchedule::for_problem(
        problem,
        experiment.dist,
        experiment.a0,
        experiment.phi,
        budget.svrg_inner_m,
        experiment.c_step,
    )?
    .with_max_inner(Some(budget.svrg_max_inner))?;
    let cfg = SolverConfig {
        solver: SolverKind::RsSvrg,
        schedule,
        dist: experiment.dist,
        m_samples: experiment.m_samples,
        epochs: budget.svrg_epochs,
        seed: budget.seed,
        x_init: None,
    };

    let mut best_x = vec![0.0; problem.dim()];
    let mut best = problem.evaluate_unchecked(&best_x);
    let consider = |x: &[f64], best: &mut f64, best_x: &mut Point| -> Result<()> {
        let v = problem.evaluate_unchecked(x);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                solver: "reference",
                epoch: 0,
                step: 0,
            });
        }
        if v < *best {
            *best = v;
            best_x.copy_from_slice(x);
        }
        Ok(())
    };

    if budget.svrg_epochs > 0 {
        let tr = run_rs_svrg(problem, &cfg)?;
        consider(&tr.final_point, &mut best, &mut best_x)?;
    }

    let gamma = cfg.constant_step();
    let mut x = vec![0.0; problem.dim()];
    for _ in 0..budget.fgd_iters {
        let g = problem.full_subgradient(&x)?;
        axpy(-gamma, &g, &mut x);
        reg.prox_in_place(&mut x, gamma)?;
        consider(&x, &mut best, &mut best_x)?;
    }

    let mut x = best_x.clone();
    for k in 1..=budget.polish_iters {
        let step = gamma / (k as f64).sqrt();
        let g = problem.full_subgradient(&x)?;
        axpy(-step, &g, &mut x);
        reg.prox_in_place(&mut x, step)?;
        consider(&x, &mut best, &mut best_x)?;
    }

    Ok(Reference {
        p_star: best,
        x_star: best_x,
    })
}

/// Inputs of the convergence constant `D` and its high-probability variant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// `P(x^φ) − P(x*)`
    pub gap0: f64,
    /// `‖x^φ − x*‖₂²`
    pub dist_sq0: f64,
    pub l0: f64,
    pub l1: f64,
    pub a0: f64,
    pub inner_m: f64,
    /// Variance bound `B`.
    pub b: f64,
    pub m: f64,
    pub sigma: f64,
    pub delta1: f64,
    pub delta2: f64,
}

impl Default for BoundInputs {
    fn default() -> Self {
        Self {
            gap0: 0.0,
            dist_sq0: 0.0,
            l0: 0.0,
            l1: 1.0,
            a0: 1.0,
            inner_m: 1.0,
            b: 0.0,
            m: 1.0,
            sigma: 0.0,
            delta1: 0.5,
            delta2: 0.5,
        }
    }
}

impl BoundInputs {
    fn validate(&self) -> Result<()> {
        let named = [
            ("gap0", self.gap0),
            ("dist_sq0", self.dist_sq0),
            ("l0", self.l0),
            ("l1", self.l1),
            ("a0", self.a0),
            ("M", self.inner_m),
            ("B", self.b),
            ("m", self.m),
            ("sigma", self.sigma),
        ];
        if let Some((name, v)) = named.iter().find(|(_, v)| !(*v >= 0.0 && v.is_finite())) {
            return Err(invalid(format!("bound input {name} must be finite and ≥ 0, got {v}")));
        }
        if self.l1 == 0.0 || self.inner_m == 0.0 {
            return Err(invalid("bound needs L1 > 0 and M > 0"));
        }
        Ok(())
    }
}

/// `D = 2·gap0 + 25·L₁·dist²/(a₀M) + 3·L₀·a₀ + a₀·M·B/(24·L₁)`.
pub fn compute_bound_d(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let BoundInputs {
        gap0,
        dist_sq0,
        l0,
        l1,
        a0,
        inner_m,
        b,
        ..
    } = *inputs;
    Ok(2.0 * gap0 + 25.0 * l1 * dist_sq0 / (a0 * inner_m) + 3.0 * l0 * a0 + a0 * inner_m * b / (24.0 * l1))
}

/// `D` specialised to a smoothing density: `L₁ = l1_factor·L₀`, bias term
/// `3·bias_factor·L₀·a₀` and `B = variance_factor·L₀²/m`.
pub fn compute_bound_d_for(inputs: &BoundInputs, dist: &SmoothingDistribution) -> Result<f64> {
    let c = dist.constants();
    let l1 = c.l1_factor * inputs.l0;
    let b = c.variance_factor * inputs.l0 * inputs.l0 / inputs.m;
    let generic = BoundInputs { l1, b, ..*inputs };
    let d = compute_bound_d(&generic)?;
    Ok(d + 3.0 * (c.bias_factor - 1.0) * inputs.l0 * inputs.a0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DPrime {
    pub d: f64,
    /// `(a₀/(24L₁))·max{8σ² log(1/δ₂), 12σ² √(M log(1/δ₂))}`
    pub extra: f64,
    pub value: f64,
}

impl DPrime {
    /// Smallest real `s` with `s ≥ log(D′/(δ₁ε)) / log 2`.
    pub fn stage_threshold(&self, delta1: f64, eps: f64) -> Result<f64> {
        if !(delta1 > 0.0 && delta1 < 1.0) {
            return Err(invalid(format!("δ₁ must lie in (0,1), got {delta1}")));
        }
        if eps.is_nan() || eps <= 0.0 {
            return Err(invalid("ε must be positive"));
        }
        Ok((self.value / (delta1 * eps)).ln() / std::f64::consts::LN_2)
    }
}

/// High-probability constant `D′` for an inner count `inner_m`.
pub fn compute_bound_dprime(inputs: &BoundInputs, inner_m: f64) -> Result<DPrime> {
    let d = compute_bound_d(inputs)?;
    for (name, delta) in [("δ₁", inputs.delta1), ("δ₂", inputs.delta2)] {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid(format!("{name} must lie in (0,1), got {delta}")));
        }
    }
    if inner_m.is_nan() || inner_m <= 0.0 {
        return Err(invalid("M must be positive"));
    }
    let log_inv = (1.0 / inputs.delta2).ln();
    let s2 = inputs.sigma * inputs.sigma;
    let extra = inputs.a0 / (24.0 * inputs.l1)
        * f64::max(8.0 * s2 * log_inv, 12.0 * s2 * (inner_m * log_inv).sqrt());
    Ok(DPrime {
        d,
        extra,
        value: d + extra,
    })
}

/// Estimates the second moment `E‖g̃_i(x) − ∇E f_i(x + aZ)‖²` of the
/// `m`-sample smoothed gradient.
///
/// Each repetition picks a random component, compares a fresh `m`-sample
/// estimate against a `100·m`-sample reference, and records the squared
/// error. Returns the mean and its standard error over repetitions.
#[allow(clippy::too_many_arguments)]
pub fn estimate_variance_b(
    problem: &CompositeProblem,
    dist: SmoothingKind,
    x: &[f64],
    radius: f64,
    m: usize,
    n_rep: usize,
    seed: u64,
    exec: Exec,
) -> Result<McEstimate> {
    if n_rep < 30 {
        return Err(invalid("variance estimate needs at least 30 repetitions"));
    }
    if m == 0 {
        return Err(invalid("m must be at least 1"));
    }
    let dist = SmoothingDistribution::new(dist, problem.dim())?;
    let n = problem.n_components();
    let sq: Vec<Result<f64>> = exec.map_range(n_rep, |r| {
        let mut rng = substream(seed, r as u64);
        let i = rng.gen_range(0..n);
        let reference = sample_batch(&dist, 100 * m, radius, 0, &mut rng)?;
        let batch = sample_batch(&dist, m, radius, 0, &mut rng)?;
        let g_ref = smoothed_component_grad(problem, i, x, &reference)?;
        let g = smoothed_component_grad(problem, i, x, &batch)?;
        Ok(dist_sq(&g, &g_ref))
    });
    let sq = sq.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(McEstimate::from_samples(&sq))
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

/// Traces of several solvers over a shared seed set on one problem.
#[derive(Clone, Debug)]
pub struct Comparison {
    pub reference: Reference,
    /// Solver-major, seed-minor order.
    pub traces: Vec<RunTrace>,
}

impl Comparison {
    pub fn traces_for(&self, solver: SolverKind) -> impl Iterator<Item = &RunTrace> {
        self.traces.iter().filter(move |t| t.solver == solver)
    }

    /// Median over seeds of the gap at `epoch` (1-based).
    pub fn median_gap_at(&self, solver: SolverKind, epoch: usize) -> Result<f64> {
        let gaps = self
            .traces_for(solver)
            .map(|t| self.reference.gap(t.records[epoch - 1].objective))
            .collect::<Result<Vec<_>>>()?;
        Ok(median(&gaps))
    }

    pub fn median_final_gap(&self, solver: SolverKind) -> Result<f64> {
        let gaps = self
            .traces_for(solver)
            .map(|t| self.reference.gap(t.final_objective()))
            .collect::<Result<Vec<_>>>()?;
        Ok(median(&gaps))
    }
}

/// Runs each solver for each seed on `problem`; gaps are measured against
/// `reference`, which is lowered if any run beats it.
pub fn run_comparison(
    problem: &CompositeProblem,
    experiment: &Experiment,
    solvers: &[SolverKind],
    seeds: &[u64],
    reference: Reference,
    exec: Exec,
) -> Result<Comparison> {
    let jobs: Vec<(SolverKind, u64)> = solvers
        .iter()
        .flat_map(|s| seeds.iter().map(move |seed| (*s, *seed)))
        .collect();
    let traces = exec
        .map(jobs, |(solver, seed)| {
            let cfg = experiment.solver_config(problem, solver, seed)?;
            run(problem, &cfg)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut reference = reference;
    reference.absorb(&traces);
    Ok(Comparison { reference, traces })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyAxis {
    #[serde(alias = "m")]
    SamplingM,
    #[serde(alias = "d")]
    DimensionD,
}

impl std::str::FromStr for StudyAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m" | "sampling_m" => Ok(StudyAxis::SamplingM),
            "d" | "dimension_d" => Ok(StudyAxis::DimensionD),
            other => Err(invalid(format!("unknown study axis '{other}' (expected m or d)"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct StudyPoint {
    pub value: usize,
    pub reference: Reference,
    pub traces: Vec<RunTrace>,
    pub median_final_gap: f64,
}

#[derive(Clone, Debug)]
pub struct StudyResult {
    pub axis: StudyAxis,
    pub points: Vec<StudyPoint>,
}

impl StudyResult {
    pub fn grid(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn median_final_gaps(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.median_final_gap).collect()
    }
}

/// Sweeps the sample count `m` or the dimension `d` of `base`, running
/// RS-SVRG for every seed at every grid value.
///
/// The dimension sweep regenerates the instance per `d`; set
/// `base.scale_features` to keep `‖u_i‖₂` comparable across `d`.
pub fn run_study(
    axis: StudyAxis,
    grid: &[usize],
    base: &Experiment,
    seeds: &[u64],
    reference_budget: &ReferenceBudget,
    exec: Exec,
) -> Result<StudyResult> {
    if grid.is_empty() {
        return Err(invalid("study grid must be nonempty"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("study grid must be strictly increasing"));
    }
    if seeds.is_empty() {
        return Err(invalid("study needs at least one seed"));
    }
    let shared = match axis {
        StudyAxis::SamplingM => {
            let problem = base.problem()?;
            let reference = reference_optimum(&problem, base, reference_budget)?;
            Some((problem, reference))
        }
        StudyAxis::DimensionD => None,
    };

    let points = exec
        .map(grid.to_vec(), |value| -> Result<StudyPoint> {
            let exp = match axis {
                StudyAxis::SamplingM => Experiment {
                    m_samples: value,
                    ..base.clone()
                },
                StudyAxis::DimensionD => Experiment {
                    dim: value,
                    ..base.clone()
                },
            };
            let (problem, reference) = match &shared {
                Some((p, r)) => (p.clone(), r.clone()),
                None => {
                    let p = exp.problem()?;
                    let r = reference_optimum(&p, &exp, reference_budget)?;
                    (p, r)
                }
            };
            let cmp = run_comparison(&problem, &exp, &[SolverKind::RsSvrg], seeds, reference, exec)?;
            Ok(StudyPoint {
                value,
                median_final_gap: cmp.median_final_gap(SolverKind::RsSvrg)?,
                reference: cmp.reference,
                traces: cmp.traces,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyResult { axis, points })
}

/// Header of `traces.csv`.
pub const TRACE_HEADER: [&str; 9] = [
    "run_id", "solver", "dist", "seed", "epoch", "grad_evals", "objective", "gap", "wall_ms",
];

/// Fixed 17-significant-digit rendering used for every serialized float.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Streams trace rows in the `traces.csv` schema.
pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
    wall_clock: bool,
}

impl<W: Write> TraceWriter<W> {
    /// With `wall_clock = false` the `wall_ms` column is written as zero so
    /// output depends only on seeds and configuration.
    pub fn new(w: W, wall_clock: bool) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(w);
        inner.write_record(TRACE_HEADER)?;
        Ok(Self { inner, wall_clock })
    }

    /// One row with `solver = reference`, epoch 0 and zero gap.
    pub fn write_reference(&mut self, run_id: &str, dist: SmoothingKind, reference: &Reference) -> Result<()> {
        self.inner.write_record([
            run_id.to_string(),
            "reference".to_string(),
            dist.name().to_string(),
            "0".to_string(),
            "0".to_string(),
            "0".to_string(),
            fmt_f64(reference.p_star),
            fmt_f64(0.0),
            fmt_f64(0.0),
        ])?;
        Ok(())
    }

    pub fn write_trace(&mut self, run_id: &str, trace: &RunTrace, reference: &Reference) -> Result<()> {
        for r in &trace.records {
            let wall = if self.wall_clock { r.wall_ms } else { 0.0 };
            self.inner.write_record([
                run_id.to_string(),
                trace.solver.name().to_string(),
                trace.dist.name().to_string(),
                trace.seed.to_string(),
                r.epoch.to_string(),
                r.grad_evals.to_string(),
                fmt_f64(r.objective),
                fmt_f64(reference.gap(r.objective)?),
                fmt_f64(wall),
            ])?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        self.inner
            .into_inner()
            .map_err(|e| Error::Io(e.into_error()))
    }
}

/// Default run id: `<solver>-s<seed>`, optionally prefixed by a study value.
pub fn run_id(prefix: Option<&str>, trace: &RunTrace) -> String {
    match prefix {
        Some(p) => format!("{p}/{}-s{}", trace.solver, trace.seed),
        None => format!("{}-s{}", trace.solver, trace.seed),
    }
}

pub fn write_comparison_csv<W: Write>(w: W, cmp: &Comparison, dist: SmoothingKind, wall_clock: bool) -> Result<W> {
    let mut tw = TraceWriter::new(w, wall_clock)?;
    tw.write_reference("reference", dist, &cmp.reference)?;
    for t in &cmp.traces {
        tw.write_trace(&run_id(None, t), t, &cmp.reference)?;
    }
    tw.finish()
}

pub fn write_study_csv<W: Write>(w: W, study: &StudyResult, dist: SmoothingKind, wall_clock: bool) -> Result<W> {
    let key = match study.axis {
        StudyAxis::SamplingM => "m",
        StudyAxis::DimensionD => "d",
    };
    let mut tw = TraceWriter::new(w, wall_clock)?;
    for p in &study.points {
        let prefix = format!("{key}={}", p.value);
        tw.write_reference(&format!("{prefix}/reference"), dist, &p.reference)?;
        for t in &p.traces {
            tw.write_trace(&run_id(Some(&prefix), t), t, &p.reference)?;
        }
    }
    tw.finish()
}

#[derive(Serialize)]
struct StudyJson<'a, C: Serialize> {
    axis: StudyAxis,
    grid: Vec<usize>,
    median_final_gap: Vec<Box<serde_json::value::RawValue>>,
    config: &'a C,
}

/// Renders a float as a JSON number with 17 significant digits.
pub fn raw_f64(v: f64) -> Result<Box<serde_json::value::RawValue>> {
    if !v.is_finite() {
        return Err(invalid("cannot serialize a non-finite float to JSON"));
    }
    Ok(serde_json::value::RawValue::from_string(fmt_f64(v))?)
}

/// `{axis, grid, median_final_gap, config}`.
pub fn study_json<C: Serialize>(study: &StudyResult, config: &C) -> Result<String> {
    let doc = StudyJson {
        axis: study.axis,
        grid: study.grid(),
        median_final_gap: study
            .median_final_gaps()
            .into_iter()
            .map(raw_f64)
            .collect::<Result<_>>()?,
        config,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Seeds `base, base+1, …` used for medians.
pub fn seed_range(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|k| base.wrapping_add(k)).collect()
}

/// Empirical check of `gap_s ≤ 2^{-s}·D` for every recorded epoch.
pub fn satisfies_rate_bound(trace: &RunTrace, reference: &Reference, d: f64) -> Result<bool> {
    for r in &trace.records {
        if reference.gap(r.objective)? > 0.5f64.powi(r.epoch as i32) * d {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Convenience: bound inputs for the start point `x_init` of an experiment.
pub fn bound_inputs_at_start(
    problem: &CompositeProblem,
    schedule: &EpochSchedule,
    reference: &Reference,
    x_init: &[f64],
    b: f64,
    m: usize,
) -> Result<BoundInputs> {
    let p0 = problem.evaluate(x_init)?;
    Ok(BoundInputs {
        gap0: reference.gap(p0)?,
        dist_sq0: dist_sq(x_init, &reference.x_star),
        l0: problem.lipschitz_l0(),
        l1: schedule.l1,
        a0: schedule.a0,
        inner_m: schedule.inner_m as f64,
        b,
        m: m as f64,
        ..BoundInputs::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{AbsComponents, LinearComponents, Regularizer};
    use std::sync::Arc;

    #[test]
    fn bound_d_unit_inputs() {
        let d = compute_bound_d(&BoundInputs {
            gap0: 1.0,
            dist_sq0: 1.0,
            l0: 1.0,
            l1: 1.0,
            a0: 1.0,
            inner_m: 2.0,
            b: 1.0,
            ..Default::default()
        })
        .unwrap();
        assert!((d - (2.0 + 12.5 + 3.0 + 1.0 / 12.0)).abs() < 1e-12);
        assert!((d - 17.583333333333333).abs() < 1e-12);
    }

    #[test]
    fn bound_d_null_case_and_errors() {
        let zero = BoundInputs {
            l1: 1.0,
            inner_m: 2.0,
            ..Default::default()
        };
        assert_eq!(compute_bound_d(&zero).unwrap(), 0.0);
        assert!(compute_bound_d(&BoundInputs { l1: 0.0, ..zero }).is_err());
        assert!(compute_bound_d(&BoundInputs { inner_m: 0.0, ..zero }).is_err());
        assert!(compute_bound_d(&BoundInputs { b: -1.0, ..zero }).is_err());
    }

    #[test]
    fn gaussian_specialisation_matches_generic_form() {
        // re-derived by hand: 2·gap0 + 25·L₀·dist²/(a₀M) + 3·L₀·√d·a₀ + a₀·M·L₀/(24m)
        let (gap0, dist_sq0, l0, d, a0, m_inner, m) = (0.3, 0.7, 2.0, 4usize, 1.0, 2.0, 5.0);
        let want = 2.0 * gap0
            + 25.0 * l0 * dist_sq0 / (a0 * m_inner)
            + 3.0 * l0 * (d as f64).sqrt() * a0
            + a0 * m_inner * l0 / (24.0 * m);
        let dist = SmoothingDistribution::new(SmoothingKind::Gaussian, d).unwrap();
        let got = compute_bound_d_for(
            &BoundInputs {
                gap0,
                dist_sq0,
                l0,
                a0,
                inner_m: m_inner,
                m,
                ..Default::default()
            },
            &dist,
        )
        .unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn dprime_cases() {
        let base = BoundInputs {
            gap0: 1.0,
            dist_sq0: 1.0,
            l0: 1.0,
            l1: 1.0,
            a0: 1.0,
            inner_m: 2.0,
            b: 1.0,
            delta1: 0.1,
            delta2: 0.2,
            ..Default::default()
        };
        let dp = compute_bound_dprime(&base, 2.0).unwrap();
        assert_eq!(dp.value, dp.d);
        assert_eq!(dp.extra, 0.0);

        let unit = BoundInputs {
            sigma: 1.0,
            delta2: (-1.0f64).exp(),
            inner_m: 1.0,
            ..base
        };
        let dp = compute_bound_dprime(&unit, 1.0).unwrap();
        assert!((dp.extra - 0.5).abs() < 1e-12);

        let s = dp.stage_threshold(0.1, dp.value / 0.1).unwrap();
        assert!(s.abs() < 1e-12);
        assert!(compute_bound_dprime(&BoundInputs { delta2: 1.0, ..base }, 1.0).is_err());
        assert!(compute_bound_dprime(&BoundInputs { delta1: 0.0, ..base }, 1.0).is_err());
    }

    #[test]
    fn median_cases() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn reference_for_abs_value() {
        let p = CompositeProblem::new(Arc::new(AbsComponents::new(1)), Regularizer::None).unwrap();
        let exp = Experiment {
            dim: 1,
            ..Default::default()
        };
        let budget = ReferenceBudget {
            fgd_iters: 1000,
            ..Default::default()
        };
        let r = reference_optimum(&p, &exp, &budget).unwrap();
        assert!(r.p_star <= 1e-4);
        assert!(r.x_star[0].abs() <= 1e-4);
    }

    #[test]
    fn reference_for_linear_ridge() {
        let lin = LinearComponents::new(1, vec![1.0]).unwrap();
        let p = CompositeProblem::new(Arc::new(lin), Regularizer::Ridge { lambda1: 0.5 }).unwrap();
        let exp = Experiment {
            dim: 1,
            ..Default::default()
        };
        let r = reference_optimum(&p, &exp, &ReferenceBudget::default()).unwrap();
        assert!((r.p_star + 0.5).abs() < 1e-9, "{}", r.p_star);
        assert!((r.x_star[0] + 1.0).abs() < 1e-4);
    }

    #[test]
    fn linear_components_have_zero_variance() {
        let lin = LinearComponents::new(2, vec![1.0, 2.0, -3.0, 0.5]).unwrap();
        let p = CompositeProblem::new(Arc::new(lin), Regularizer::None).unwrap();
        let b = estimate_variance_b(&p, SmoothingKind::Gaussian, &[0.1, 0.2], 1.0, 5, 30, 3, Exec::Sequential)
            .unwrap();
        assert_eq!(b.mean, 0.0);
    }

    #[test]
    fn abs_value_variance_is_one_over_m() {
        let p = CompositeProblem::new(Arc::new(AbsComponents::new(1)), Regularizer::None).unwrap();
        let b = estimate_variance_b(&p, SmoothingKind::Gaussian, &[0.0], 1.0, 5, 4000, 21, Exec::Parallel)
            .unwrap();
        // sign(Z) has variance 1; the 500-sample reference adds 1/500
        let want = 1.0 / 5.0 + 1.0 / 500.0;
        assert!((b.mean - want).abs() <= 3.0 * b.stderr, "{b:?}");
    }

    #[test]
    fn reference_gap_tolerance() {
        let r = Reference {
            p_star: 1.0,
            x_star: vec![0.0],
        };
        assert_eq!(r.gap(1.0 - 1e-12).unwrap(), 0.0);
        assert!(r.gap(0.5).is_err());
        assert_eq!(r.gap(1.5).unwrap(), 0.5);
    }

    #[test]
    fn trace_csv_schema() {
        let p = CompositeProblem::new(Arc::new(AbsComponents::new(1)), Regularizer::None).unwrap();
        let exp = Experiment {
            dim: 1,
            epochs: 3,
            ..Default::default()
        };
        let reference = Reference {
            p_star: 0.0,
            x_star: vec![0.0],
        };
        let cmp = run_comparison(&p, &exp, &[SolverKind::RsSvrg, SolverKind::ProxSgd], &[1, 2], reference, Exec::Parallel)
            .unwrap();
        let out = write_comparison_csv(Vec::new(), &cmp, SmoothingKind::Gaussian, false).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TRACE_HEADER.join(","));
        assert_eq!(text.lines().count(), 1 + 1 + 2 * 2 * 3);
        assert!(text.contains("reference,reference,gaussian,0,0,0,"));
    }

    #[test]
    fn study_json_shape() {
        let study = StudyResult {
            axis: StudyAxis::SamplingM,
            points: vec![StudyPoint {
                value: 5,
                reference: Reference {
                    p_star: 0.0,
                    x_star: vec![],
                },
                traces: vec![],
                median_final_gap: 0.1,
            }],
        };
        let s = study_json(&study, &serde_json::json!({"a": 1})).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["axis"], "sampling_m");
        assert_eq!(v["grid"][0], 5);
        assert_eq!(v["median_final_gap"][0].as_f64().unwrap(), 0.1);
        assert!(s.contains("1.0000000000000001e-1"));
    }

    #[test]
    fn study_grid_validation() {
        let exp = Experiment::default();
        let b = ReferenceBudget::default();
        assert!(run_study(StudyAxis::SamplingM, &[], &exp, &[1], &b, Exec::Sequential).is_err());
        assert!(run_study(StudyAxis::SamplingM, &[5, 1], &exp, &[1], &b, Exec::Sequential).is_err());
    }
}
