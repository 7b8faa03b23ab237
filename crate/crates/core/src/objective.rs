//! Composite objectives `P(x) = (1/N) Σ f_i(x) + R(x)`.
//!
//! The loss part is described by a [`Components`] implementation giving
//! per-component values and one deterministic subgradient per point. The
//! regularizer is one of the separable penalties in [`Regularizer`], each with
//! a closed-form proximal map.
//!
//! Component indices are zero-based: valid indices are `0..N`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{axpy, dot, norm2, sign0};

/// Dense decision variable of length `d`.
pub type Point = Vec<f64>;

/// A finite family of convex, possibly nonsmooth, component functions.
pub trait Components: Send + Sync + fmt::Debug {
    /// Dimension `d` of the decision variable.
    fn dim(&self) -> usize;

    /// Number of components `N`.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `f_i(x)`. Callers guarantee `i < len()` and `x.len() == dim()`.
    fn value(&self, i: usize, x: &[f64]) -> f64;

    /// Adds `scale * g` to `out` where `g ∈ ∂f_i(x)` is this family's
    /// deterministic subgradient choice.
    fn add_subgradient(&self, i: usize, x: &[f64], scale: f64, out: &mut [f64]);

    /// Lipschitz constant of `f_i` w.r.t. the l2 norm, when known.
    fn lipschitz(&self, _i: usize) -> Option<f64> {
        None
    }
}

/// Hinge losses `f_i(w) = max{1 - u_iᵀw, 0}` over difference vectors `u_i`.
///
/// At the kink `u_iᵀw = 1` the zero subgradient is returned.
#[derive(Clone, Debug)]
pub struct HingeComponents {
    dim: usize,
    diffs: Vec<f64>,
}

impl HingeComponents {
    /// `diffs` is row-major, one row of length `dim` per component.
    pub fn new(dim: usize, diffs: Vec<f64>) -> Result<Self> {
        if dim == 0 || diffs.is_empty() || !diffs.len().is_multiple_of(dim) {
            return Err(invalid(format!(
                "hinge data of length {} is not a nonempty multiple of dim {}",
                diffs.len(),
                dim
            )));
        }
        Ok(Self { dim, diffs })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.diffs[i * self.dim..(i + 1) * self.dim]
    }
}

impl Components for HingeComponents {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.diffs.len() / self.dim
    }

    fn value(&self, i: usize, x: &[f64]) -> f64 {
        (1.0 - dot(self.row(i), x)).max(0.0)
    }

    fn add_subgradient(&self, i: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        let u = self.row(i);
        if 1.0 - dot(u, x) > 0.0 {
            axpy(-scale, u, out);
        }
    }

    fn lipschitz(&self, i: usize) -> Option<f64> {
        Some(norm2(self.row(i)))
    }
}

/// Linear components `f_i(x) = c_iᵀx`.
#[derive(Clone, Debug)]
pub struct LinearComponents {
    dim: usize,
    coefs: Vec<f64>,
}

impl LinearComponents {
    pub fn new(dim: usize, coefs: Vec<f64>) -> Result<Self> {
        if dim == 0 || coefs.is_empty() || !coefs.len().is_multiple_of(dim) {
            return Err(invalid("linear coefficients must be a nonempty multiple of dim"));
        }
        Ok(Self { dim, coefs })
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.coefs[i * self.dim..(i + 1) * self.dim]
    }
}

impl Components for LinearComponents {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.coefs.len() / self.dim
    }

    fn value(&self, i: usize, x: &[f64]) -> f64 {
        dot(self.row(i), x)
    }

    fn add_subgradient(&self, i: usize, _x: &[f64], scale: f64, out: &mut [f64]) {
        axpy(scale, self.row(i), out);
    }

    fn lipschitz(&self, i: usize) -> Option<f64> {
        Some(norm2(self.row(i)))
    }
}

/// A single component `f(x) = ‖x‖₁`, with `sign(0) = 0` at kinks.
#[derive(Clone, Debug)]
pub struct AbsComponents {
    dim: usize,
}

impl AbsComponents {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl Components for AbsComponents {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        1
    }

    fn value(&self, _i: usize, x: &[f64]) -> f64 {
        x.iter().map(|v| v.abs()).sum()
    }

    fn add_subgradient(&self, _i: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(x) {
            *o += scale * sign0(*v);
        }
    }

    fn lipschitz(&self, _i: usize) -> Option<f64> {
        Some((self.dim as f64).sqrt())
    }
}

/// `N` identically zero components.
#[derive(Clone, Debug)]
pub struct ZeroComponents {
    dim: usize,
    n: usize,
}

impl ZeroComponents {
    pub fn new(dim: usize, n: usize) -> Self {
        Self { dim, n }
    }
}

impl Components for ZeroComponents {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.n
    }

    fn value(&self, _i: usize, _x: &[f64]) -> f64 {
        0.0
    }

    fn add_subgradient(&self, _i: usize, _x: &[f64], _scale: f64, _out: &mut [f64]) {}

    fn lipschitz(&self, _i: usize) -> Option<f64> {
        Some(0.0)
    }
}

/// Separable regularizer `R(x) = λ₁‖x‖₂² + λ₂‖x‖₁`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularizer {
    None,
    L1 { lambda2: f64 },
    Ridge { lambda1: f64 },
    ElasticNet { lambda1: f64, lambda2: f64 },
}

impl Regularizer {
    /// `(λ₁, λ₂)`.
    pub fn weights(&self) -> (f64, f64) {
        match *self {
            Regularizer::None => (0.0, 0.0),
            Regularizer::L1 { lambda2 } => (0.0, lambda2),
            Regularizer::Ridge { lambda1 } => (lambda1, 0.0),
            Regularizer::ElasticNet { lambda1, lambda2 } => (lambda1, lambda2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (l1, l2) = self.weights();
        if !(l1 >= 0.0 && l1.is_finite() && l2 >= 0.0 && l2.is_finite()) {
            return Err(invalid(format!(
                "regularizer weights must be finite and nonnegative, got λ₁={l1}, λ₂={l2}"
            )));
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let (l1, l2) = self.weights();
        let mut r = 0.0;
        if l1 != 0.0 {
            r += l1 * x.iter().map(|v| v * v).sum::<f64>();
        }
        if l2 != 0.0 {
            r += l2 * x.iter().map(|v| v.abs()).sum::<f64>();
        }
        r
    }

    /// `argmin_x ½‖x − y‖² + γR(x)`.
    pub fn prox(&self, y: &[f64], gamma: f64) -> Result<Point> {
        let mut x = y.to_vec();
        self.prox_in_place(&mut x, gamma)?;
        Ok(x)
    }

    /// In-place variant of [`Regularizer::prox`].
    ///
    /// Each coordinate is soft-thresholded at `γλ₂` and then scaled by
    /// `1/(1 + 2γλ₁)`; since `R` is separable this is the exact minimizer.
    pub fn prox_in_place(&self, y: &mut [f64], gamma: f64) -> Result<()> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid(format!("prox step must be positive, got {gamma}")));
        }
        let (l1, l2) = self.weights();
        let thresh = gamma * l2;
        let shrink = 1.0 / (1.0 + 2.0 * gamma * l1);
        if thresh == 0.0 && l1 == 0.0 {
            return Ok(());
        }
        for v in y.iter_mut() {
            let soft = sign0(*v) * (v.abs() - thresh).max(0.0);
            *v = soft * shrink;
        }
        Ok(())
    }
}

/// `P(x) = (1/N) Σ f_i(x) + R(x)` with Lipschitz metadata.
#[derive(Clone, Debug)]
pub struct CompositeProblem {
    components: Arc<dyn Components>,
    regularizer: Regularizer,
    lipschitz_l0: f64,
    component_lipschitz: Option<Vec<f64>>,
}

impl CompositeProblem {
    /// Builds a problem; `L₀` defaults to the largest per-component Lipschitz
    /// constant the family reports.
    pub fn new(components: Arc<dyn Components>, regularizer: Regularizer) -> Result<Self> {
        regularizer.validate()?;
        if components.dim() == 0 || components.is_empty() {
            return Err(invalid("problem needs d ≥ 1 and N ≥ 1"));
        }
        let per: Option<Vec<f64>> = (0..components.len())
            .map(|i| components.lipschitz(i))
            .collect();
        let l0 = per
            .as_ref()
            .map(|v| v.iter().cloned().fold(0.0, f64::max))
            .unwrap_or(0.0);
        Ok(Self {
            components,
            regularizer,
            lipschitz_l0: l0,
            component_lipschitz: per,
        })
    }

    pub fn with_lipschitz(mut self, l0: f64) -> Result<Self> {
        if !(l0 >= 0.0 && l0.is_finite()) {
            return Err(invalid(format!("L₀ must be finite and nonnegative, got {l0}")));
        }
        self.lipschitz_l0 = l0;
        Ok(self)
    }

    pub fn with_component_lipschitz(mut self, l: Vec<f64>) -> Result<Self> {
        check_dim(self.n_components(), l.len())?;
        self.component_lipschitz = Some(l);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.components.dim()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &dyn Components {
        self.components.as_ref()
    }

    pub fn regularizer(&self) -> Regularizer {
        self.regularizer
    }

    pub fn lipschitz_l0(&self) -> f64 {
        self.lipschitz_l0
    }

    /// `L_i`, falling back to `L₀` when per-component constants are unknown.
    pub fn component_lipschitz(&self, i: usize) -> f64 {
        self.component_lipschitz
            .as_ref()
            .map_or(self.lipschitz_l0, |v| v[i])
    }

    /// `(1/N) Σ L_i`.
    pub fn mean_component_lipschitz(&self) -> f64 {
        let n = self.n_components();
        (0..n).map(|i| self.component_lipschitz(i)).sum::<f64>() / n as f64
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        check_dim(self.dim(), x.len())
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.n_components() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: i,
                len: self.n_components(),
            })
        }
    }

    pub fn component_value(&self, i: usize, x: &[f64]) -> Result<f64> {
        self.check_index(i)?;
        self.check_point(x)?;
        Ok(self.components.value(i, x))
    }

    pub fn component_subgradient(&self, i: usize, x: &[f64]) -> Result<Point> {
        self.check_index(i)?;
        self.check_point(x)?;
        let mut g = vec![0.0; self.dim()];
        self.components.add_subgradient(i, x, 1.0, &mut g);
        Ok(g)
    }

    /// `F(x) = (1/N) Σ f_i(x)`, summed in index order.
    pub fn loss(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.loss_unchecked(x))
    }

    pub(crate) fn loss_unchecked(&self, x: &[f64]) -> f64 {
        let n = self.n_components();
        (0..n).map(|i| self.components.value(i, x)).sum::<f64>() / n as f64
    }

    /// `P(x) = F(x) + R(x)`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.evaluate_unchecked(x))
    }

    pub(crate) fn evaluate_unchecked(&self, x: &[f64]) -> f64 {
        self.loss_unchecked(x) + self.regularizer.value(x)
    }

    /// `(1/N) Σ ∂f_i(x)` with each component's deterministic subgradient.
    pub fn full_subgradient(&self, x: &[f64]) -> Result<Point> {
        self.check_point(x)?;
        let n = self.n_components();
        let mut g = vec![0.0; self.dim()];
        let w = 1.0 / n as f64;
        for i in 0..n {
            self.components.add_subgradient(i, x, w, &mut g);
        }
        Ok(g)
    }
}
