mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rssvrg::bench::{
    compute_bound_d, compute_bound_d_for, compute_bound_dprime, reference_optimum,
    run_comparison, run_study, seed_range, study_json, write_comparison_csv, write_study_csv,
    BoundInputs, DPrime, ReferenceBudget,
};
use rssvrg::{CompositeProblem, Exec, RankingInstance, SmoothingDistribution, SmoothingKind};

use config::{EffectiveConfig, FileConfig, RunFlags};

#[derive(Parser, Debug)]
#[command(name = "rssvrg", version, about = "Randomized-smoothing SVRG experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one solver over one or more seeds.
    Run(RunFlags),
    /// Run every solver on a shared instance and seed set.
    Compare(RunFlags),
    /// Sweep the sample count m or the dimension d.
    Study(RunFlags),
    /// Evaluate the convergence constants D and D'.
    Bounds(BoundFlags),
}

#[derive(Args, Debug)]
struct BoundFlags {
    #[arg(long)]
    gap0: f64,
    #[arg(long)]
    dist_sq0: f64,
    #[arg(long)]
    l0: f64,
    /// Required unless --dist is given.
    #[arg(long)]
    l1: Option<f64>,
    #[arg(long)]
    a0: f64,
    #[arg(long)]
    inner_m: f64,
    /// Required unless --dist is given.
    #[arg(long)]
    b: Option<f64>,
    /// Samples per epoch; used with --dist.
    #[arg(long, default_value_t = 1.0)]
    m: f64,
    /// Derive L1, B and the bias term from a smoothing distribution.
    #[arg(long, requires = "dim")]
    dist: Option<SmoothingKind>,
    #[arg(long)]
    dim: Option<usize>,
    /// Sub-Gaussian scale; prints D' when given.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    delta1: f64,
    #[arg(long, default_value_t = 0.1)]
    delta2: f64,
    /// Print the number of stages needed for accuracy eps (with --sigma).
    #[arg(long)]
    eps: Option<f64>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<rssvrg::Error> for Failure {
    fn from(e: rssvrg::Error) -> Self {
        if e.is_config_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let line = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("{line}");
            return ExitCode::from(2);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(flags) => experiment("run", &flags),
        Command::Compare(flags) => experiment("compare", &flags),
        Command::Study(flags) => experiment("study", &flags),
        Command::Bounds(flags) => bounds(&flags),
    }
}

fn bounds(f: &BoundFlags) -> Result<(), Failure> {
    let mut inputs = BoundInputs {
        gap0: f.gap0,
        dist_sq0: f.dist_sq0,
        l0: f.l0,
        l1: f.l1.unwrap_or(f64::NAN),
        a0: f.a0,
        inner_m: f.inner_m,
        b: f.b.unwrap_or(f64::NAN),
        m: f.m,
        sigma: f.sigma.unwrap_or(0.0),
        delta1: f.delta1,
        delta2: f.delta2,
    };
    let d = match (f.dist, f.dim) {
        (Some(kind), Some(dim)) => {
            let dist = SmoothingDistribution::new(kind, dim)?;
            let c = dist.constants();
            inputs.l1 = c.l1_factor * f.l0;
            inputs.b = c.variance_factor * f.l0 * f.l0 / f.m;
            compute_bound_d_for(&inputs, &dist)?
        }
        _ => {
            if f.l1.is_none() || f.b.is_none() {
                return Err(Failure::Config("bounds needs --l1 and --b (or --dist and --dim)".into()));
            }
            compute_bound_d(&inputs)?
        }
    };
    println!("D = {d}");
    if f.sigma.is_some() {
        let extra = compute_bound_dprime(&inputs, f.inner_m)?.extra;
        let dp = DPrime { d, extra, value: d + extra };
        println!("D' = {}", dp.value);
        if let Some(eps) = f.eps {
            println!("stages = {}", dp.stage_threshold(f.delta1, eps)?.ceil());
        }
    }
    Ok(())
}

fn load_problem(cfg: &mut EffectiveConfig) -> Result<CompositeProblem, Failure> {
    let instance = match &cfg.data_in {
        Some(path) => {
            let inst = RankingInstance::load(path, cfg.reg)?;
            cfg.n_pairs = inst.n_pairs();
            cfg.dim = inst.dim();
            inst
        }
        None => cfg.experiment().instance()?,
    };
    if let Some(path) = &cfg.data_out {
        instance.save(path)?;
    }
    Ok(instance.to_problem()?)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_failure(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn experiment(command: &'static str, flags: &RunFlags) -> Result<(), Failure> {
    let file = match &flags.config {
        Some(path) => FileConfig::load(path).map_err(Failure::Config)?,
        None => FileConfig::default(),
    };
    let mut cfg = EffectiveConfig::resolve(command, flags, file).map_err(Failure::Config)?;
    let exec = if flags.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    std::fs::create_dir_all(&flags.out_dir).map_err(|e| io_failure(&flags.out_dir, e))?;
    let seeds = seed_range(cfg.seed, cfg.seeds);
    let budget = ReferenceBudget::default();
    let traces_path = flags.out_dir.join("traces.csv");

    if command == "study" {
        let (axis, grid) = (cfg.axis.expect("study axis"), cfg.grid.clone().expect("study grid"));
        let exp = cfg.experiment();
        if let Some(path) = &cfg.data_out {
            exp.instance()?.save(path)?;
        }
        let study = run_study(axis, &grid, &exp, &seeds, &budget, exec)?;
        let doc = study_json(&study, &cfg)?;
        write_study_csv(create(&traces_path)?, &study, cfg.dist, cfg.wall_clock)?
            .flush()
            .map_err(|e| io_failure(&traces_path, e))?;
        write_text(&flags.out_dir.join("study.json"), &(doc + "\n"))?;
    } else {
        let problem = load_problem(&mut cfg)?;
        let exp = cfg.experiment();
        // fail on bad settings before the reference search
        for &solver in &cfg.solver {
            exp.solver_config(&problem, solver, cfg.seed)?.validate(&problem)?;
        }
        let reference = reference_optimum(&problem, &exp, &budget)?;
        let cmp = run_comparison(&problem, &exp, &cfg.solver, &seeds, reference, exec)?;
        write_comparison_csv(create(&traces_path)?, &cmp, cfg.dist, cfg.wall_clock)?
            .flush()
            .map_err(|e| io_failure(&traces_path, e))?;
    }
    let text = serde_json::to_string_pretty(&cfg).map_err(|e| Failure::Runtime(e.to_string()))?;
    write_text(&flags.out_dir.join("config.json"), &(text + "\n"))
}
