//! RS-SVRG and the baseline solvers.
//!
//! Every solver reports a [`RunTrace`] with one record per epoch. Baselines
//! have no epochs of their own: they are driven until their cumulative count
//! of component-subgradient calls reaches the RS-SVRG budget at each epoch
//! boundary, and a record is taken there.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{all_finite, axpy, dist_sq};
use crate::objective::{CompositeProblem, Point};
use crate::rng::{seeded, SolverRng};
use crate::smoothing::{
    add_smoothed_component_grad, sample_batch, smoothed_gradient_table, PerturbationBatch,
    Scratch, SmoothingDistribution, SmoothingKind,
};

/// Step divisor in `γ_s = a_s / (c·L₁)`.
pub const DEFAULT_C_STEP: f64 = 25.0;
pub const DEFAULT_PHI: f64 = 0.125;

/// Per-epoch radius, step size and inner-loop length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochSchedule {
    pub a0: f64,
    pub phi: f64,
    /// Base inner count `M`; epoch `s` runs `2^s·M` steps.
    pub inner_m: usize,
    /// Smoothness constant `L₁`.
    pub l1: f64,
    pub c_step: f64,
    /// Optional cap on `M_s`.
    pub max_inner: Option<usize>,
}

impl EpochSchedule {
    pub fn new(a0: f64, phi: f64, inner_m: usize, l1: f64, c_step: f64) -> Result<Self> {
        let s = Self {
            a0,
            phi,
            inner_m,
            l1,
            c_step,
            max_inner: None,
        };
        s.validate()?;
        Ok(s)
    }

    /// Uses `L₁ = l1_factor·L₀` for the problem and smoothing density.
    pub fn for_problem(
        problem: &CompositeProblem,
        dist: SmoothingKind,
        a0: f64,
        phi: f64,
        inner_m: usize,
        c_step: f64,
    ) -> Result<Self> {
        let d = SmoothingDistribution::new(dist, problem.dim())?;
        let l1 = d.constants().l1_factor * problem.lipschitz_l0();
        Self::new(a0, phi, inner_m, l1, c_step)
    }

    pub fn with_max_inner(mut self, cap: Option<usize>) -> Result<Self> {
        self.max_inner = cap;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a0 > 0.0 && self.a0.is_finite()) {
            return Err(invalid(format!("a0 must be positive, got {}", self.a0)));
        }
        if !(self.phi > 0.0 && self.phi < 1.0) {
            return Err(invalid(format!("phi must lie in (0,1), got {}", self.phi)));
        }
        if self.inner_m == 0 {
            return Err(invalid("inner count M must be at least 1"));
        }
        if !(self.l1 > 0.0 && self.l1.is_finite()) {
            return Err(invalid(format!("L1 must be positive, got {}", self.l1)));
        }
        if !(self.c_step > 0.0 && self.c_step.is_finite()) {
            return Err(invalid(format!("c_step must be positive, got {}", self.c_step)));
        }
        if self.max_inner == Some(0) {
            return Err(invalid("inner-loop cap must be at least 1"));
        }
        Ok(())
    }

    /// `a_s = a0·φ^s`.
    pub fn radius(&self, s: usize) -> f64 {
        self.a0 * self.phi.powi(s as i32)
    }

    /// `γ_s = a_s / (c·L₁)`.
    pub fn step(&self, s: usize) -> f64 {
        self.radius(s) / (self.c_step * self.l1)
    }

    /// `M_s = 2^s·M`, saturating, then capped.
    pub fn inner_len(&self, s: usize) -> usize {
        let m = if s >= usize::BITS as usize {
            usize::MAX
        } else {
            (1usize << s).saturating_mul(self.inner_m)
        };
        self.max_inner.map_or(m, |cap| m.min(cap))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    RsSvrg,
    ProxSgd,
    ProxFgd,
    RsSgd,
    RsSag,
}

impl SolverKind {
    pub const ALL: [SolverKind; 5] = [
        SolverKind::RsSvrg,
        SolverKind::ProxSgd,
        SolverKind::ProxFgd,
        SolverKind::RsSgd,
        SolverKind::RsSag,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::RsSvrg => "rs_svrg",
            SolverKind::ProxSgd => "prox_sgd",
            SolverKind::ProxFgd => "prox_fgd",
            SolverKind::RsSgd => "rs_sgd",
            SolverKind::RsSag => "rs_sag",
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                invalid(format!(
                    "unknown solver '{s}' (expected rs_svrg, prox_sgd, prox_fgd, rs_sgd, rs_sag)"
                ))
            })
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub solver: SolverKind,
    pub schedule: EpochSchedule,
    pub dist: SmoothingKind,
    pub m_samples: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Starting point; the zero vector when absent.
    pub x_init: Option<Point>,
}

impl SolverConfig {
    pub fn validate(&self, problem: &CompositeProblem) -> Result<()> {
        self.schedule.validate()?;
        if self.m_samples == 0 {
            return Err(invalid("smoothing sample count m must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(invalid("epoch count S must be at least 1"));
        }
        if let Some(x) = &self.x_init {
            check_dim(problem.dim(), x.len())?;
            if !all_finite(x) {
                return Err(invalid("initial point has non-finite entries"));
            }
        }
        Ok(())
    }

    fn start(&self, problem: &CompositeProblem) -> Point {
        self.x_init
            .clone()
            .unwrap_or_else(|| vec![0.0; problem.dim()])
    }

    /// Radius used by the fixed-radius smoothed baselines: `a0·φ`.
    pub fn baseline_radius(&self) -> f64 {
        self.schedule.radius(1)
    }

    /// Constant step of Prox-FGD and RS-SAG: `a0 / (c·L₁)`.
    pub fn constant_step(&self) -> f64 {
        self.schedule.step(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// `P` at the reported point (the anchor `x̃_s` for RS-SVRG, the current
    /// iterate for baselines).
    pub objective: f64,
    /// Cumulative component-subgradient calls.
    pub grad_evals: u64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub solver: SolverKind,
    pub dist: SmoothingKind,
    pub seed: u64,
    pub records: Vec<EpochRecord>,
    pub final_point: Point,
    /// Mean of `‖v_t − g̃(x_{t−1})‖²` over each epoch's inner loop (RS-SVRG
    /// with diagnostics enabled only).
    pub inner_variance: Option<Vec<f64>>,
}

impl RunTrace {
    pub fn final_objective(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.objective)
    }
}

/// `v = g_cur_i − g_anchor_i + g_anchor_full`.
pub fn variance_reduced_gradient(
    g_cur_i: &[f64],
    g_anchor_i: &[f64],
    g_anchor_full: &[f64],
) -> Result<Point> {
    check_dim(g_cur_i.len(), g_anchor_i.len())?;
    check_dim(g_cur_i.len(), g_anchor_full.len())?;
    Ok(g_cur_i
        .iter()
        .zip(g_anchor_i)
        .zip(g_anchor_full)
        .map(|((c, a), f)| c - a + f)
        .collect())
}

/// Cumulative RS-SVRG subgradient-call counts at the end of epochs `1..=S`.
pub fn svrg_budgets(n: usize, m: usize, schedule: &EpochSchedule, epochs: usize) -> Vec<u64> {
    let mut total = 0u64;
    (1..=epochs)
        .map(|s| {
            total += (n * m) as u64 + 2 * (m as u64) * schedule.inner_len(s) as u64;
            total
        })
        .collect()
}

/// Runs the solver named in `config.solver`.
pub fn run(problem: &CompositeProblem, config: &SolverConfig) -> Result<RunTrace> {
    match config.solver {
        SolverKind::RsSvrg => run_rs_svrg(problem, config),
        SolverKind::ProxSgd => run_prox_sgd(problem, config),
        SolverKind::ProxFgd => run_prox_fgd(problem, config),
        SolverKind::RsSgd => run_rs_sgd(problem, config),
        SolverKind::RsSag => run_rs_sag(problem, config),
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Randomized-smoothing SVRG.
///
/// Epoch `s = 1..S`: anchor `x̃ = x̃_{s−1}`; draw `m` perturbations at radius
/// `a_s`; compute `g̃_i(x̃)` for all `i` and their mean `g̃`; run `M_s` inner
/// steps `x_t = prox_{γ_s R}(x_{t−1} − γ_s v_t)` with
/// `v_t = g̃_I(x_{t−1}) − g̃_I(x̃) + g̃`; set `x̃_s` to the average of the
/// inner iterates and warm-start the next epoch from the last one.
pub fn run_rs_svrg(problem: &CompositeProblem, config: &SolverConfig) -> Result<RunTrace> {
    run_rs_svrg_inner(problem, config, false)
}

/// [`run_rs_svrg`] that also records the per-epoch mean squared deviation of
/// `v_t` from the full smoothed gradient at `x_{t−1}` (same batch). The extra
/// full-gradient evaluations are not counted in `grad_evals`.
pub fn run_rs_svrg_with_variance(
    problem: &CompositeProblem,
    config: &SolverConfig,
) -> Result<RunTrace> {
    run_rs_svrg_inner(problem, config, true)
}

fn run_rs_svrg_inner(
    problem: &CompositeProblem,
    config: &SolverConfig,
    track_variance: bool,
) -> Result<RunTrace> {
    config.validate(problem)?;
    let start = Instant::now();
    let (n, d, m) = (problem.n_components(), problem.dim(), config.m_samples);
    let sched = &config.schedule;
    let reg = problem.regularizer();
    let dist = SmoothingDistribution::new(config.dist, d)?;
    let mut rng = seeded(config.seed);
    let mut scratch = Scratch::new(d);

    let mut x = config.start(problem);
    let mut anchor = x.clone();
    let mut v = vec![0.0; d];
    let mut acc = vec![0.0; d];
    let mut evals = 0u64;
    let mut records = Vec::with_capacity(config.epochs);
    let mut variances = track_variance.then(Vec::new);

    for s in 1..=config.epochs {
        let gamma = sched.step(s);
        let inner = sched.inner_len(s);
        let batch = sample_batch(&dist, m, sched.radius(s), s, &mut rng)?;
        let table = smoothed_gradient_table(problem, &anchor, &batch)?;
        evals += (n * m) as u64;

        acc.iter_mut().for_each(|a| *a = 0.0);
        let mut var_sum = 0.0;
        for t in 1..=inner {
            let i = rng.gen_range(0..n);
            // v = g̃ − g̃_i(x̃) + g̃_i(x)
            v.copy_from_slice(table.mean());
            axpy(-1.0, table.row(i), &mut v);
            add_smoothed_component_grad(problem, i, &x, &batch, 1.0, &mut v, &mut scratch);
            evals += 2 * m as u64;

            if track_variance {
                let full = smoothed_gradient_table(problem, &x, &batch)?;
                var_sum += dist_sq(&v, full.mean());
            }

            axpy(-gamma, &v, &mut x);
            reg.prox_in_place(&mut x, gamma)?;
            if !all_finite(&x) {
                return Err(Error::NonFinite {
                    solver: "rs_svrg",
                    epoch: s,
                    step: t,
                });
            }
            axpy(1.0, &x, &mut acc);
        }
        let inv = 1.0 / inner as f64;
        anchor.iter_mut().zip(&acc).for_each(|(a, s)| *a = s * inv);
        if let Some(vs) = variances.as_mut() {
            vs.push(var_sum * inv);
        }

        let objective = problem.evaluate_unchecked(&anchor);
        if !objective.is_finite() {
            return Err(Error::NonFinite {
                solver: "rs_svrg",
                epoch: s,
                step: inner,
            });
        }
        records.push(EpochRecord {
            epoch: s,
            objective,
            grad_evals: evals,
            wall_ms: elapsed_ms(start),
        });
    }

    Ok(RunTrace {
        solver: SolverKind::RsSvrg,
        dist: config.dist,
        seed: config.seed,
        records,
        final_point: anchor,
        inner_variance: variances,
    })
}

/// One update rule of a budget-driven baseline.
trait Stepper {
    const KIND: SolverKind;

    /// Subgradient calls consumed per step.
    fn cost(&self) -> u64;

    /// Performs step `t` (1-based) in place.
    fn step(&mut self, t: u64, x: &mut Point, rng: &mut SolverRng) -> Result<()>;
}

fn drive<S: Stepper>(
    problem: &CompositeProblem,
    config: &SolverConfig,
    mut stepper: S,
    budgets: &[u64],
) -> Result<RunTrace> {
    let start = Instant::now();
    let mut rng = seeded(config.seed);
    let mut x = config.start(problem);
    let cost = stepper.cost();
    let mut evals = 0u64;
    let mut t = 0u64;
    let mut records = Vec::with_capacity(budgets.len());
    for (k, &budget) in budgets.iter().enumerate() {
        while evals + cost <= budget {
            t += 1;
            stepper.step(t, &mut x, &mut rng)?;
            evals += cost;
            if !all_finite(&x) {
                return Err(Error::NonFinite {
                    solver: S::KIND.name(),
                    epoch: k + 1,
                    step: t as usize,
                });
            }
        }
        let objective = problem.evaluate_unchecked(&x);
        if !objective.is_finite() {
            return Err(Error::NonFinite {
                solver: S::KIND.name(),
                epoch: k + 1,
                step: t as usize,
            });
        }
        records.push(EpochRecord {
            epoch: k + 1,
            objective,
            grad_evals: evals,
            wall_ms: elapsed_ms(start),
        });
    }
    Ok(RunTrace {
        solver: S::KIND,
        dist: config.dist,
        seed: config.seed,
        records,
        final_point: x,
        inner_variance: None,
    })
}

struct ProxSgd<'a> {
    problem: &'a CompositeProblem,
    g: Point,
}

impl Stepper for ProxSgd<'_> {
    const KIND: SolverKind = SolverKind::ProxSgd;

    fn cost(&self) -> u64 {
        1
    }

    fn step(&mut self, t: u64, x: &mut Point, rng: &mut SolverRng) -> Result<()> {
        let gamma = 1.0 / (t as f64).sqrt();
        let i = rng.gen_range(0..self.problem.n_components());
        self.g.iter_mut().for_each(|v| *v = 0.0);
        self.problem
            .components()
            .add_subgradient(i, x, 1.0, &mut self.g);
        axpy(-gamma, &self.g, x);
        self.problem.regularizer().prox_in_place(x, gamma)
    }
}

struct ProxFgd<'a> {
    problem: &'a CompositeProblem,
    gamma: f64,
}

impl Stepper for ProxFgd<'_> {
    const KIND: SolverKind = SolverKind::ProxFgd;

    fn cost(&self) -> u64 {
        self.problem.n_components() as u64
    }

    fn step(&mut self, _t: u64, x: &mut Point, _rng: &mut SolverRng) -> Result<()> {
        let g = self.problem.full_subgradient(x)?;
        axpy(-self.gamma, &g, x);
        self.problem.regularizer().prox_in_place(x, self.gamma)
    }
}

struct RsSgd<'a> {
    problem: &'a CompositeProblem,
    dist: SmoothingDistribution,
    m: usize,
    radius: f64,
    g: Point,
    scratch: Scratch,
}

impl Stepper for RsSgd<'_> {
    const KIND: SolverKind = SolverKind::RsSgd;

    fn cost(&self) -> u64 {
        self.m as u64
    }

    fn step(&mut self, t: u64, x: &mut Point, rng: &mut SolverRng) -> Result<()> {
        let gamma = 1.0 / (t as f64).sqrt();
        let i = rng.gen_range(0..self.problem.n_components());
        let batch = sample_batch(&self.dist, self.m, self.radius, 0, rng)?;
        self.g.iter_mut().for_each(|v| *v = 0.0);
        add_smoothed_component_grad(self.problem, i, x, &batch, 1.0, &mut self.g, &mut self.scratch);
        axpy(-gamma, &self.g, x);
        self.problem.regularizer().prox_in_place(x, gamma)
    }
}

struct RsSag<'a> {
    problem: &'a CompositeProblem,
    dist: SmoothingDistribution,
    m: usize,
    radius: f64,
    gamma: f64,
    table: Vec<f64>,
    sum: Point,
    g: Point,
    scratch: Scratch,
}

impl Stepper for RsSag<'_> {
    const KIND: SolverKind = SolverKind::RsSag;

    fn cost(&self) -> u64 {
        self.m as u64
    }

    fn step(&mut self, _t: u64, x: &mut Point, rng: &mut SolverRng) -> Result<()> {
        let n = self.problem.n_components();
        let d = x.len();
        let i = rng.gen_range(0..n);
        let batch: PerturbationBatch = sample_batch(&self.dist, self.m, self.radius, 0, rng)?;
        self.g.iter_mut().for_each(|v| *v = 0.0);
        add_smoothed_component_grad(self.problem, i, x, &batch, 1.0, &mut self.g, &mut self.scratch);
        let row = &mut self.table[i * d..(i + 1) * d];
        for ((s, r), g) in self.sum.iter_mut().zip(row.iter_mut()).zip(&self.g) {
            *s += g - *r;
            *r = *g;
        }
        axpy(-self.gamma / n as f64, &self.sum, x);
        self.problem.regularizer().prox_in_place(x, self.gamma)
    }
}

fn default_budgets(problem: &CompositeProblem, config: &SolverConfig) -> Vec<u64> {
    svrg_budgets(
        problem.n_components(),
        config.m_samples,
        &config.schedule,
        config.epochs,
    )
}

/// Proximal stochastic subgradient descent with `γ_t = 1/√t`.
pub fn run_prox_sgd(problem: &CompositeProblem, config: &SolverConfig) -> Result<RunTrace> {
    run_baseline_with_budgets(problem, config, SolverKind::ProxSgd, &default_budgets(problem, config))
}

/// Proximal full subgradient descent with constant step `a0/(c·L₁)`.
pub fn run_prox_fgd(problem: &CompositeProblem, config: &SolverConfig) -> Result<RunTrace> {
    run_baseline_with_budgets(problem, config, SolverKind::ProxFgd, &default_budgets(problem, config))
}

/// Smoothed proximal SGD: fresh `m`-sample batch at radius `a0·φ` every
/// step, `γ_t = 1/√t`.
pub fn run_rs_sgd(problem: &CompositeProblem, config: &SolverConfig) -> Result<RunTrace> {
    run_baseline_with_budgets(problem, config, SolverKind::RsSgd, &default_budgets(problem, config))
}

/// Smoothed proximal SAG: a zero-initialized table of the last smoothed
/// gradient seen per component, averaged with weight `1/N`, constant step
/// `a0/(c·L₁)`.
pub fn run_rs_sag(problem: &CompositeProblem, config: &SolverConfig) -> Result<RunTrace> {
    run_baseline_with_budgets(problem, config, SolverKind::RsSag, &default_budgets(problem, config))
}

/// Runs a baseline against explicit cumulative budgets, one record per
/// budget. Each record is taken after the last step that fits in its budget.
pub fn run_baseline_with_budgets(
    problem: &CompositeProblem,
    config: &SolverConfig,
    kind: SolverKind,
    budgets: &[u64],
) -> Result<RunTrace> {
    config.validate(problem)?;
    if budgets.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("budgets must be nondecreasing"));
    }
    let d = problem.dim();
    let dist = SmoothingDistribution::new(config.dist, d)?;
    match kind {
        SolverKind::RsSvrg => Err(invalid("RS-SVRG is epoch driven; use run_rs_svrg")),
        SolverKind::ProxSgd => drive(
            problem,
            config,
            ProxSgd {
                problem,
                g: vec![0.0; d],
            },
            budgets,
        ),
        SolverKind::ProxFgd => drive(
            problem,
            config,
            ProxFgd {
                problem,
                gamma: config.constant_step(),
            },
            budgets,
        ),
        SolverKind::RsSgd => drive(
            problem,
            config,
            RsSgd {
                problem,
                dist,
                m: config.m_samples,
                radius: config.baseline_radius(),
                g: vec![0.0; d],
                scratch: Scratch::new(d),
            },
            budgets,
        ),
        SolverKind::RsSag => drive(
            problem,
            config,
            RsSag {
                problem,
                dist,
                m: config.m_samples,
                radius: config.baseline_radius(),
                gamma: config.constant_step(),
                table: vec![0.0; problem.n_components() * d],
                sum: vec![0.0; d],
                g: vec![0.0; d],
                scratch: Scratch::new(d),
            },
            budgets,
        ),
    }
}
