use std::path::{Path, PathBuf};

use clap::Args;
use rssvrg::bench::{Experiment, StudyAxis};
use rssvrg::{RegSetting, SmoothingKind, SolverKind};
use serde::{Deserialize, Serialize};

/// Flags shared by `run`, `compare` and `study`. Every field is optional so
/// that unset flags fall back to the config file, then to the defaults.
#[derive(Args, Clone, Debug, Default)]
pub struct RunFlags {
    /// Solver(s); comma separated. `run` takes exactly one.
    #[arg(long, value_delimiter = ',')]
    pub solver: Option<Vec<SolverKind>>,
    /// Smoothing distribution: l2ball, gaussian or linfball.
    #[arg(long)]
    pub dist: Option<SmoothingKind>,
    /// Regularizer: lasso, ridge or elastic.
    #[arg(long)]
    pub reg: Option<RegSetting>,
    #[arg(long)]
    pub n_pairs: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Smoothing samples per epoch (m).
    #[arg(long)]
    pub m_samples: Option<usize>,
    /// Base inner-loop length (M); epoch s runs 2^s·M steps.
    #[arg(long)]
    pub inner_m: Option<usize>,
    /// Number of epochs (S).
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub a0: Option<f64>,
    #[arg(long)]
    pub phi: Option<f64>,
    #[arg(long)]
    pub c_step: Option<f64>,
    /// Instance seed and first run seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of run seeds (seed, seed+1, ...) for medians.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Upper limit on the inner-loop length M_s.
    #[arg(long)]
    pub budget_cap: Option<usize>,
    /// Load the ranking instance from a CSV file.
    #[arg(long)]
    pub data_in: Option<PathBuf>,
    /// Save the ranking instance to a CSV file.
    #[arg(long)]
    pub data_out: Option<PathBuf>,
    /// Shrink features by √(d/10) (default on for the dimension study).
    #[arg(long)]
    pub scale_features: Option<bool>,
    /// Study axis: m or d.
    #[arg(long)]
    pub axis: Option<StudyAxis>,
    /// Study grid; comma separated.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    /// Record wall-clock times in traces.csv (breaks byte determinism).
    #[arg(long)]
    pub wall_clock: bool,
    /// Run independent jobs on one thread.
    #[arg(long)]
    pub sequential: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// JSON file with the same keys as config.json; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Config-file view: every key optional, unknown keys rejected.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// Present in config.json; must name the running command if given.
    pub command: Option<String>,
    pub solver: Option<Vec<SolverKind>>,
    pub dist: Option<SmoothingKind>,
    pub reg: Option<RegSetting>,
    pub n_pairs: Option<usize>,
    pub dim: Option<usize>,
    pub m_samples: Option<usize>,
    pub inner_m: Option<usize>,
    pub epochs: Option<usize>,
    pub a0: Option<f64>,
    pub phi: Option<f64>,
    pub c_step: Option<f64>,
    pub seed: Option<u64>,
    pub seeds: Option<usize>,
    pub budget_cap: Option<usize>,
    pub data_in: Option<PathBuf>,
    pub data_out: Option<PathBuf>,
    pub scale_features: Option<bool>,
    pub axis: Option<StudyAxis>,
    pub grid: Option<Vec<usize>>,
    pub wall_clock: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }
}

/// Fully resolved settings, written back out as config.json.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EffectiveConfig {
    pub command: &'static str,
    pub solver: Vec<SolverKind>,
    pub dist: SmoothingKind,
    pub reg: RegSetting,
    pub n_pairs: usize,
    pub dim: usize,
    pub m_samples: usize,
    pub inner_m: usize,
    pub epochs: usize,
    pub a0: f64,
    pub phi: f64,
    pub c_step: f64,
    pub seed: u64,
    pub seeds: usize,
    pub budget_cap: Option<usize>,
    pub data_in: Option<PathBuf>,
    pub data_out: Option<PathBuf>,
    pub scale_features: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis: Option<StudyAxis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<usize>>,
    pub wall_clock: bool,
}

impl EffectiveConfig {
    pub fn resolve(command: &'static str, flags: &RunFlags, file: FileConfig) -> Result<Self, String> {
        if let Some(c) = &file.command {
            if c != command {
                return Err(format!("config file is for '{c}', not '{command}'"));
            }
        }
        let base = Experiment::default();
        let is_study = command == "study";
        let axis = flags.axis.or(file.axis).or(is_study.then_some(StudyAxis::SamplingM));
        let default_solvers = match command {
            "compare" => SolverKind::ALL.to_vec(),
            "study" | "run" => vec![SolverKind::RsSvrg],
            _ => unreachable!(),
        };
        let solver = flags.solver.clone().or(file.solver).unwrap_or(default_solvers);
        if solver.is_empty() {
            return Err("--solver needs at least one value".into());
        }
        if command == "run" && solver.len() != 1 {
            return Err("run takes exactly one --solver".into());
        }
        if is_study && solver != [SolverKind::RsSvrg] {
            return Err("study runs rs_svrg only".into());
        }
        let default_grid = match axis {
            Some(StudyAxis::SamplingM) => vec![1, 5, 50, 100],
            Some(StudyAxis::DimensionD) => vec![10, 50, 200],
            None => Vec::new(),
        };
        let grid = if is_study {
            Some(flags.grid.clone().or(file.grid).unwrap_or(default_grid))
        } else {
            None
        };
        let cfg = Self {
            command,
            solver,
            dist: flags.dist.or(file.dist).unwrap_or(base.dist),
            reg: flags.reg.or(file.reg).unwrap_or(base.reg),
            n_pairs: flags.n_pairs.or(file.n_pairs).unwrap_or(base.n_pairs),
            dim: flags.dim.or(file.dim).unwrap_or(base.dim),
            m_samples: flags.m_samples.or(file.m_samples).unwrap_or(base.m_samples),
            inner_m: flags.inner_m.or(file.inner_m).unwrap_or(base.inner_m),
            epochs: flags.epochs.or(file.epochs).unwrap_or(base.epochs),
            a0: flags.a0.or(file.a0).unwrap_or(base.a0),
            phi: flags.phi.or(file.phi).unwrap_or(base.phi),
            c_step: flags.c_step.or(file.c_step).unwrap_or(base.c_step),
            seed: flags.seed.or(file.seed).unwrap_or(base.instance_seed),
            seeds: flags
                .seeds
                .or(file.seeds)
                .unwrap_or(if command == "run" { 1 } else { 10 }),
            budget_cap: flags.budget_cap.or(file.budget_cap),
            data_in: flags.data_in.clone().or(file.data_in),
            data_out: flags.data_out.clone().or(file.data_out),
            scale_features: flags
                .scale_features
                .or(file.scale_features)
                .unwrap_or(axis == Some(StudyAxis::DimensionD) && is_study),
            axis: if is_study { axis } else { None },
            grid,
            wall_clock: flags.wall_clock || file.wall_clock.unwrap_or(false),
        };
        if cfg.seeds == 0 {
            return Err("--seeds must be at least 1".into());
        }
        if is_study && cfg.data_in.is_some() {
            return Err("--data-in is not supported by study".into());
        }
        Ok(cfg)
    }

    pub fn experiment(&self) -> Experiment {
        Experiment {
            n_pairs: self.n_pairs,
            dim: self.dim,
            instance_seed: self.seed,
            reg: self.reg,
            dist: self.dist,
            m_samples: self.m_samples,
            inner_m: self.inner_m,
            epochs: self.epochs,
            a0: self.a0,
            phi: self.phi,
            c_step: self.c_step,
            max_inner: self.budget_cap,
            scale_features: self.scale_features,
        }
    }
}
