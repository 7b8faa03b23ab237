//! Synthetic bipartite-ranking instances with a linear ranker.
//!
//! Each training pair `(x_i, y_i)` has features drawn uniformly from
//! `[0, feature_max]`, and with `ρ(x) = wᵀx + b` the pair's hinge loss only
//! depends on the difference `u_i = x_i − y_i` (the bias cancels). The
//! decision variable is therefore `w ∈ ℝ^d`.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::norm2;
use crate::objective::{CompositeProblem, HingeComponents, Regularizer};
use crate::rng::seeded;

pub const FEATURE_MAX: f64 = 100.0;
pub const REG_WEIGHT: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegSetting {
    /// `λ₁ = 0, λ₂ = 0.01`
    Lasso,
    /// `λ₁ = 0.01, λ₂ = 0`
    Ridge,
    /// `λ₁ = λ₂ = 0.01`
    Elastic,
}

impl RegSetting {
    pub fn regularizer(self) -> Regularizer {
        match self {
            RegSetting::Lasso => Regularizer::L1 { lambda2: REG_WEIGHT },
            RegSetting::Ridge => Regularizer::Ridge { lambda1: REG_WEIGHT },
            RegSetting::Elastic => Regularizer::ElasticNet {
                lambda1: REG_WEIGHT,
                lambda2: REG_WEIGHT,
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RegSetting::Lasso => "lasso",
            RegSetting::Ridge => "ridge",
            RegSetting::Elastic => "elastic",
        }
    }
}

impl std::str::FromStr for RegSetting {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lasso" => Ok(RegSetting::Lasso),
            "ridge" => Ok(RegSetting::Ridge),
            "elastic" => Ok(RegSetting::Elastic),
            other => Err(invalid(format!(
                "unknown regularizer '{other}' (expected lasso, ridge, elastic)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankingInstance {
    n_pairs: usize,
    dim: usize,
    diffs: Vec<f64>,
    reg: RegSetting,
}

impl RankingInstance {
    /// `n_pairs` pairs with features uniform on `[0, 100]`.
    pub fn generate(n_pairs: usize, dim: usize, seed: u64) -> Result<Self> {
        Self::generate_scaled(n_pairs, dim, seed, FEATURE_MAX)
    }

    /// Same as [`RankingInstance::generate`] with features on `[0, feature_max]`.
    pub fn generate_scaled(n_pairs: usize, dim: usize, seed: u64, feature_max: f64) -> Result<Self> {
        if n_pairs == 0 || dim == 0 {
            return Err(invalid("ranking instance needs N ≥ 1 and d ≥ 1"));
        }
        if !(feature_max > 0.0 && feature_max.is_finite()) {
            return Err(invalid("feature range must be positive"));
        }
        let mut rng = seeded(seed);
        let mut diffs = Vec::with_capacity(n_pairs * dim);
        let mut pos = vec![0.0; dim];
        for _ in 0..n_pairs {
            for v in pos.iter_mut() {
                *v = rng.gen_range(0.0..=feature_max);
            }
            for p in &pos {
                let neg: f64 = rng.gen_range(0.0..=feature_max);
                diffs.push(p - neg);
            }
        }
        Ok(Self {
            n_pairs,
            dim,
            diffs,
            reg: RegSetting::Ridge,
        })
    }

    /// Feature range that keeps `E‖u_i‖₂` at its `d = 10` value.
    pub fn dimension_scaled_range(dim: usize) -> f64 {
        FEATURE_MAX / (dim as f64 / 10.0).sqrt()
    }

    pub fn with_reg(mut self, reg: RegSetting) -> Self {
        self.reg = reg;
        self
    }

    pub fn n_pairs(&self) -> usize {
        self.n_pairs
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn reg(&self) -> RegSetting {
        self.reg
    }

    pub fn diff(&self, i: usize) -> &[f64] {
        &self.diffs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn diffs(&self) -> &[f64] {
        &self.diffs
    }

    /// `max_i ‖u_i‖₂`.
    pub fn lipschitz_l0(&self) -> f64 {
        self.diffs
            .chunks_exact(self.dim)
            .map(norm2)
            .fold(0.0, f64::max)
    }

    /// Hinge components over the differences with the configured regularizer
    /// and `L₀ = max_i ‖u_i‖₂`.
    pub fn to_problem(&self) -> Result<CompositeProblem> {
        let comps = HingeComponents::new(self.dim, self.diffs.clone())?;
        CompositeProblem::new(Arc::new(comps), self.reg.regularizer())?
            .with_lipschitz(self.lipschitz_l0())
    }

    /// CSV with header `u0,...,u{d-1}` and one row per pair.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record((0..self.dim).map(|j| format!("u{j}")))?;
        for row in self.diffs.chunks_exact(self.dim) {
            wr.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, reg: RegSetting) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let dim = rd.headers()?.len();
        if dim == 0 {
            return Err(invalid("instance CSV has no columns"));
        }
        let mut diffs = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            if rec.len() != dim {
                return Err(invalid(format!("row has {} fields, expected {dim}", rec.len())));
            }
            for f in rec.iter() {
                let v: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| invalid(format!("bad number '{f}' in instance CSV")))?;
                if !v.is_finite() {
                    return Err(invalid("non-finite entry in instance CSV"));
                }
                diffs.push(v);
            }
        }
        if diffs.is_empty() {
            return Err(invalid("instance CSV has no rows"));
        }
        Ok(Self {
            n_pairs: diffs.len() / dim,
            dim,
            diffs,
            reg,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: &Path, reg: RegSetting) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, reg)
    }
}
