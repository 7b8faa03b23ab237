//! Convolution smoothing `F_a(x) = E[F(x + aZ)]` and its sampled gradients.
//!
//! A [`PerturbationBatch`] holds the `m` draws `Z_1..Z_m` of one epoch. The
//! smoothed component gradient at `x` is the average of the component's
//! subgradients at the perturbed points `x + a Z_j`; reusing the same batch at
//! different points gives common random numbers across the anchor and inner
//! gradients of an epoch.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::linalg::{axpy, norm2};
use crate::objective::{CompositeProblem, Point};

/// Smoothing density `μ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SmoothingKind {
    /// Uniform on the unit l2 ball.
    #[serde(rename = "l2ball")]
    L2Ball,
    /// Standard normal with identity covariance.
    #[serde(rename = "gaussian")]
    Gaussian,
    /// Uniform on the unit l∞ ball (the cube `[-1, 1]^d`).
    #[serde(rename = "linfball")]
    LinfBall,
}

impl SmoothingKind {
    pub const ALL: [SmoothingKind; 3] = [
        SmoothingKind::L2Ball,
        SmoothingKind::Gaussian,
        SmoothingKind::LinfBall,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SmoothingKind::L2Ball => "l2ball",
            SmoothingKind::Gaussian => "gaussian",
            SmoothingKind::LinfBall => "linfball",
        }
    }
}

impl std::str::FromStr for SmoothingKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2ball" => Ok(SmoothingKind::L2Ball),
            "gaussian" => Ok(SmoothingKind::Gaussian),
            "linfball" => Ok(SmoothingKind::LinfBall),
            other => Err(invalid(format!(
                "unknown smoothing distribution '{other}' (expected l2ball, gaussian, linfball)"
            ))),
        }
    }
}

impl std::fmt::Display for SmoothingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Constants that plug a smoothing density into the convergence bounds.
///
/// With loss Lipschitz constant `L₀` and radius `a`:
/// the smoothed loss has an `l1_factor·L₀/a`-Lipschitz gradient,
/// `F_a ≤ F + bias_factor·L₀·a`, and the `m`-sample gradient estimator has
/// second moment at most `variance_factor·L₀²/m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionConstants {
    pub l1_factor: f64,
    pub bias_factor: f64,
    pub variance_factor: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothingDistribution {
    kind: SmoothingKind,
    dim: usize,
}

impl SmoothingDistribution {
    pub fn new(kind: SmoothingKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("smoothing distribution needs d ≥ 1"));
        }
        Ok(Self { kind, dim })
    }

    pub fn kind(&self) -> SmoothingKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constants(&self) -> DistributionConstants {
        let d = self.dim as f64;
        match self.kind {
            SmoothingKind::L2Ball => DistributionConstants {
                l1_factor: d.sqrt(),
                bias_factor: 1.0,
                variance_factor: 1.0,
            },
            SmoothingKind::Gaussian => DistributionConstants {
                l1_factor: 1.0,
                bias_factor: d.sqrt(),
                variance_factor: 1.0,
            },
            SmoothingKind::LinfBall => DistributionConstants {
                l1_factor: 1.0,
                bias_factor: d / 2.0,
                variance_factor: 4.0,
            },
        }
    }

    /// Writes one draw into `out` (length `d`).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        match self.kind {
            SmoothingKind::Gaussian => {
                for v in out.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
            }
            SmoothingKind::LinfBall => {
                for v in out.iter_mut() {
                    *v = rng.gen_range(-1.0..=1.0);
                }
            }
            SmoothingKind::L2Ball => {
                // uniform direction times radius U^{1/d}
                loop {
                    for v in out.iter_mut() {
                        *v = rng.sample(StandardNormal);
                    }
                    let n = norm2(out);
                    if n > 0.0 {
                        let r = rng.gen::<f64>().powf(1.0 / self.dim as f64);
                        for v in out.iter_mut() {
                            *v *= r / n;
                        }
                        break;
                    }
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let mut z = vec![0.0; self.dim];
        self.sample_into(rng, &mut z);
        z
    }
}

impl Distribution<Vec<f64>> for SmoothingDistribution {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        SmoothingDistribution::sample(self, rng)
    }
}

/// The `m` perturbation draws of one epoch at radius `a_s`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationBatch {
    dim: usize,
    samples: Vec<f64>,
    radius: f64,
    epoch: usize,
}

impl PerturbationBatch {
    /// Wraps explicit draws (row-major, `m × dim`).
    pub fn from_samples(dim: usize, samples: Vec<f64>, radius: f64, epoch: usize) -> Result<Self> {
        if dim == 0 || samples.is_empty() || !samples.len().is_multiple_of(dim) {
            return Err(invalid("perturbation batch needs m ≥ 1 draws of length d"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid(format!("smoothing radius must be positive, got {radius}")));
        }
        Ok(Self {
            dim,
            samples,
            radius,
            epoch,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn sample(&self, j: usize) -> &[f64] {
        &self.samples[j * self.dim..(j + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.dim)
    }
}

/// Draws `m` i.i.d. perturbations at `radius`.
pub fn sample_batch<R: Rng + ?Sized>(
    dist: &SmoothingDistribution,
    m: usize,
    radius: f64,
    epoch: usize,
    rng: &mut R,
) -> Result<PerturbationBatch> {
    if m == 0 {
        return Err(invalid("smoothing sample count m must be at least 1"));
    }
    let d = dist.dim();
    let mut samples = vec![0.0; m * d];
    for z in samples.chunks_exact_mut(d) {
        dist.sample_into(rng, z);
    }
    PerturbationBatch::from_samples(d, samples, radius, epoch)
}

/// Reusable buffer for the perturbed point `x + aZ`.
#[derive(Debug)]
pub(crate) struct Scratch {
    point: Vec<f64>,
    acc: Vec<f64>,
}

impl Scratch {
    pub(crate) fn new(dim: usize) -> Self {
        Self {
            point: vec![0.0; dim],
            acc: vec![0.0; dim],
        }
    }
}

/// Adds `scale · g̃_i(x)` to `out` without validation.
pub(crate) fn add_smoothed_component_grad(
    problem: &CompositeProblem,
    i: usize,
    x: &[f64],
    batch: &PerturbationBatch,
    scale: f64,
    out: &mut [f64],
    scratch: &mut Scratch,
) {
    let comps = problem.components();
    let a = batch.radius();
    let m = batch.len() as f64;
    let Scratch { point, acc } = scratch;
    acc.iter_mut().for_each(|v| *v = 0.0);
    for z in batch.iter() {
        for ((pk, xk), zk) in point.iter_mut().zip(x).zip(z) {
            *pk = xk + a * zk;
        }
        comps.add_subgradient(i, point, 1.0, acc);
    }
    // sum first, divide once: keeps constant subgradients exact
    for (o, g) in out.iter_mut().zip(acc.iter()) {
        *o += scale * (g / m);
    }
}

fn check_batch(problem: &CompositeProblem, x: &[f64], batch: &PerturbationBatch) -> Result<()> {
    check_dim(problem.dim(), x.len())?;
    check_dim(problem.dim(), batch.dim())
}

/// `g̃_i(x) = (1/m) Σ_j ∂f_i(x + a Z_j)`.
pub fn smoothed_component_grad(
    problem: &CompositeProblem,
    i: usize,
    x: &[f64],
    batch: &PerturbationBatch,
) -> Result<Point> {
    check_batch(problem, x, batch)?;
    if i >= problem.n_components() {
        return Err(crate::Error::IndexOutOfRange {
            index: i,
            len: problem.n_components(),
        });
    }
    let mut g = vec![0.0; problem.dim()];
    let mut scratch = Scratch::new(problem.dim());
    add_smoothed_component_grad(problem, i, x, batch, 1.0, &mut g, &mut scratch);
    Ok(g)
}

/// Per-component smoothed gradients at `x` (row-major `N × d`) and their mean.
#[derive(Clone, Debug)]
pub struct GradientTable {
    dim: usize,
    rows: Vec<f64>,
    mean: Point,
}

impl GradientTable {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Computes `g̃_i(x)` for every component plus `g̃(x) = (1/N) Σ g̃_i(x)`.
pub fn smoothed_gradient_table(
    problem: &CompositeProblem,
    x: &[f64],
    batch: &PerturbationBatch,
) -> Result<GradientTable> {
    check_batch(problem, x, batch)?;
    let (n, d) = (problem.n_components(), problem.dim());
    let mut rows = vec![0.0; n * d];
    let mut scratch = Scratch::new(d);
    for (i, row) in rows.chunks_exact_mut(d).enumerate() {
        add_smoothed_component_grad(problem, i, x, batch, 1.0, row, &mut scratch);
    }
    let mut mean = vec![0.0; d];
    for row in rows.chunks_exact(d) {
        axpy(1.0, row, &mut mean);
    }
    let inv = 1.0 / n as f64;
    mean.iter_mut().for_each(|v| *v *= inv);
    Ok(GradientTable { dim: d, rows, mean })
}

/// `g̃(x) = (1/N) Σ_i g̃_i(x)`.
pub fn smoothed_full_grad(
    problem: &CompositeProblem,
    x: &[f64],
    batch: &PerturbationBatch,
) -> Result<Point> {
    Ok(smoothed_gradient_table(problem, x, batch)?.mean)
}

/// Monte-Carlo mean with its standard error (sample std / √n).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            stderr: (var / n).sqrt(),
        }
    }
}

/// Estimates `F_a(x) = E[F(x + aZ)]` from `n_mc` independent draws.
pub fn estimate_smoothed_value<R: Rng + ?Sized>(
    problem: &CompositeProblem,
    dist: &SmoothingDistribution,
    x: &[f64],
    radius: f64,
    n_mc: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    let mut est = estimate_smoothing_increments(problem, dist, x, &[radius], n_mc, rng)?;
    let inc = est.remove(0);
    let base = problem.loss_unchecked(x);
    Ok(McEstimate {
        mean: base + inc.mean,
        stderr: inc.stderr,
    })
}

/// Paired estimates of `F_{r_k}(x) − F_{r_{k−1}}(x)` (with `r_0 = 0`, so the
/// first entry is `F_{r_1}(x) − F(x)`), all radii sharing the same draws.
///
/// Sharing draws makes the standard errors those of the differences, which is
/// what ordering checks between radii need.
pub fn estimate_smoothing_increments<R: Rng + ?Sized>(
    problem: &CompositeProblem,
    dist: &SmoothingDistribution,
    x: &[f64],
    radii: &[f64],
    n_mc: usize,
    rng: &mut R,
) -> Result<Vec<McEstimate>> {
    check_dim(problem.dim(), x.len())?;
    check_dim(problem.dim(), dist.dim())?;
    if n_mc < 2 {
        return Err(invalid("Monte-Carlo estimates need at least 2 draws"));
    }
    if radii.is_empty() || radii.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
        return Err(invalid("radii must be nonempty, finite and nonnegative"));
    }
    let base = problem.loss_unchecked(x);
    let mut draws = vec![vec![0.0; n_mc]; radii.len()];
    let mut z = vec![0.0; x.len()];
    let mut p = vec![0.0; x.len()];
    for k in 0..n_mc {
        dist.sample_into(rng, &mut z);
        let mut prev = base;
        for (r, col) in radii.iter().zip(draws.iter_mut()) {
            for ((pk, xk), zk) in p.iter_mut().zip(x).zip(&z) {
                *pk = xk + r * zk;
            }
            let v = problem.loss_unchecked(&p);
            col[k] = v - prev;
            prev = v;
        }
    }
    Ok(draws.iter().map(|c| McEstimate::from_samples(c)).collect())
}
