use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bandit_lab::config::{parse_assignment, parse_list, Settings};
use bandit_lab::harness::{grid_search, run, summarize, write_outputs, RunConfig, SelectionMetric};
use bandit_lab::policy::Algorithm;
use bandit_lab::{BanditError, Result};

// Like `println!`, but a closed stdout (e.g. `| head`) is not an error.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(name = "bandit-lab", version, about = "Contextual bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm over every seed.
    Run {
        #[arg(long)]
        algo: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Grid-search hyperparameters for one algorithm, then run the best point.
    Grid {
        #[arg(long)]
        algo: Option<String>,
        /// `key=v1,v2,...`; repeat for more axes.
        #[arg(long = "grid", required = true)]
        grid: Vec<String>,
        /// `final` (mean final regret) or `area` (mean regret curve).
        #[arg(long, default_value = "final")]
        metric: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run several algorithms on the same environment and seeds.
    Compare {
        #[arg(long)]
        algos: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// `synthetic-linear`, `synthetic-quadratic`, `synthetic-cosine` or `csv:PATH`.
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    rounds: Option<usize>,
    /// Comma-separated seeds.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    arms: Option<usize>,
    /// `gaussian:SIGMA`, `bernoulli` or `none`.
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    label_column: Option<String>,
    /// Flat `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hyperparameter override `key=value`; repeatable.
    #[arg(long = "set")]
    set: Vec<String>,
}

impl Common {
    fn settings(&self, algos: Option<&str>) -> Result<Settings> {
        let mut s = match &self.config {
            Some(path) => Settings::from_file(path)?,
            None => Settings::default(),
        };
        let flags = [
            ("algos", algos.map(str::to_string)),
            ("env", self.env.clone()),
            ("rounds", self.rounds.map(|v| v.to_string())),
            ("seeds", self.seeds.clone()),
            ("dim", self.dim.map(|v| v.to_string())),
            ("arms", self.arms.map(|v| v.to_string())),
            ("noise", self.noise.clone()),
            ("label_column", self.label_column.clone()),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                s.apply(key, &v)?;
            }
        }
        if let Some(out) = &self.out {
            s.out = Some(out.clone());
        }
        for assignment in &self.set {
            let (k, v) = parse_assignment(assignment)?;
            s.apply(&k, &v)?;
        }
        Ok(s)
    }
}

fn single_algorithm(s: &Settings) -> Result<Algorithm> {
    match s.algos.as_deref() {
        Some([a]) => Ok(*a),
        Some(_) => Err(BanditError::InvalidConfig("exactly one algorithm expected".into())),
        None => Err(BanditError::InvalidConfig("missing `algo`".into())),
    }
}

fn out_dir(s: &Settings) -> Result<PathBuf> {
    s.out
        .clone()
        .ok_or_else(|| BanditError::InvalidConfig("missing `out`".into()))
}

fn base_config(s: &Settings, algorithm: Algorithm) -> Result<RunConfig> {
    let mut cfg = RunConfig::new(algorithm, s.env_spec()?, s.rounds(), s.seeds())
        .with_hyperparams(s.hyperparams.clone());
    cfg.output_path = s.out.clone();
    cfg.validate()?;
    Ok(cfg)
}

fn execute(command: Command) -> Result<PathBuf> {
    match command {
        Command::Run { algo, common } => {
            let s = common.settings(algo.as_deref())?;
            let out = out_dir(&s)?;
            let cfg = base_config(&s, single_algorithm(&s)?)?;
            let traces = run(&cfg)?;
            let summary = summarize(&traces);
            with_cleanup(&out, || write_outputs(&traces, &summary, &out).map(|_| ()))?;
            for a in &summary.algorithms {
                say!(
                    "{}: mean_final_regret={} std={} seeds={}",
                    a.algorithm, a.mean_final_regret, a.std_final_regret, a.seed_count
                );
            }
            Ok(out)
        }
        Command::Grid {
            algo,
            grid,
            metric,
            common,
        } => {
            let s = common.settings(algo.as_deref())?;
            let out = out_dir(&s)?;
            let cfg = base_config(&s, single_algorithm(&s)?)?;
            let metric: SelectionMetric = metric.parse()?;
            let axes = grid
                .iter()
                .map(|g| {
                    let (k, v) = parse_assignment(g)?;
                    Ok((k, parse_list::<f64>(&v, "grid value")?))
                })
                .collect::<Result<Vec<_>>>()?;
            let result = grid_search(&cfg, &axes, metric)?;
            let best_cfg = cfg.clone().with_hyperparams(result.best.clone());
            let traces = run(&best_cfg)?;
            let summary = summarize(&traces);
            with_cleanup(&out, || {
                write_outputs(&traces, &summary, &out)?;
                let mut text = String::from("hyperparams,score\n");
                for p in &result.points {
                    text.push_str(&format!("\"{}\",{}\n", p.hyperparams, p.score));
                }
                write_file(&out.join("grid.csv"), &text)?;
                let best: String = result.best.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
                write_file(&out.join("best.conf"), &best)
            })?;
            say!("best: {} score={} runs={}", result.best, result.best_score, result.runs);
            Ok(out)
        }
        Command::Compare { algos, common } => {
            let s = common.settings(algos.as_deref())?;
            let out = out_dir(&s)?;
            let list = s
                .algos
                .clone()
                .ok_or_else(|| BanditError::InvalidConfig("missing `algos`".into()))?;
            let mut traces = Vec::new();
            for a in list {
                traces.extend(run(&base_config(&s, a)?)?);
            }
            let summary = summarize(&traces);
            with_cleanup(&out, || write_outputs(&traces, &summary, &out).map(|_| ()))?;
            for a in &summary.algorithms {
                say!(
                    "{}: mean_final_regret={} std={} seeds={}",
                    a.algorithm, a.mean_final_regret, a.std_final_regret, a.seed_count
                );
            }
            Ok(out)
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| BanditError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Removes `dir` when this call created it and `f` fails.
fn with_cleanup(dir: &Path, f: impl FnOnce() -> Result<()>) -> Result<()> {
    let existed = dir.exists();
    let result = f();
    if result.is_err() && !existed {
        let _ = std::fs::remove_dir_all(dir);
    }
    result
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(out) => {
            say!("outputs: {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}: {}", e.code(), e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
