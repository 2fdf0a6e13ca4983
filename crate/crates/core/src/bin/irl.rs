use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use irl_core::baselines::{default_scaling_grid, scaling_sensitivity_demo, write_scaling_csv};
use irl_core::env::{make_gridworld, make_sailing, GridworldSpec, SailingSpec};
use irl_core::expert::{read_trajectories_csv, sample_episodes, write_trajectories_csv, ExpertDataset};
use irl_core::harness::{
    evaluate_theta, expert_target, fit, run_experiment, sweep_samples, write_records_csv, write_summary_csv, EnvironmentSource,
    ExperimentConfig, ExpertMode, Fitted, MethodName, RunContext, Treatment,
};
use irl_core::io::{load_environment, read_json, save_environment, write_json};
use irl_core::{Error, Result};

#[derive(Parser)]
#[command(name = "irl", version, about = "Tabular inverse reinforcement learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random-feature grid world and its ground truth.
    GenGridworld {
        #[arg(long, default_value_t = 10)]
        size: usize,
        #[arg(long, default_value_t = 5)]
        features: usize,
        #[arg(long, default_value_t = 0.7)]
        success_prob: f64,
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate the sailing lake and its ground truth.
    GenSailing {
        #[arg(long, default_value_t = 4)]
        size: usize,
        #[arg(long, default_value_t = 0.4)]
        p_stay: f64,
        #[arg(long, default_value_t = 0.99)]
        gamma: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample demonstrations from the optimal policy of a model file.
    SimulateExpert {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 100)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a reward to one model and write the training trace.
    Train(TrainArgs),
    /// Score a reward vector against a model's expert.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated reward weights.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "theta_file")]
        theta: Option<Vec<f64>>,
        /// JSON array of reward weights.
        #[arg(long)]
        theta_file: Option<PathBuf>,
        #[arg(long, default_value_t = 10.0)]
        beta: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment once per episode count and summarize.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Comma-separated episode counts.
        #[arg(long, value_delimiter = ',', default_value = "1,2,5,10")]
        grid: Vec<usize>,
        /// Summary CSV; defaults to `<out stem>.summary.csv`.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Tabulate the feature-scaling sensitivity of feature matching.
    DemoScaling {
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 1.0)]
        phi_e2: f64,
        /// Comma-separated ratios λ1/λ2.
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a configured experiment and write one record per run and method.
    Run {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    model: PathBuf,
    /// Demonstrations to fit; the exact expert is used when neither this nor
    /// `--episodes` is given.
    #[arg(long, conflicts_with = "episodes")]
    trajectories: Option<PathBuf>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long, default_value_t = 100)]
    horizon: usize,
    #[arg(long, default_value = "natural")]
    method: MethodName,
    #[arg(long, default_value_t = 10.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    step_size: f64,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value = "none")]
    treatment: Treatment,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the fitted reward weights as JSON.
    #[arg(long)]
    theta_out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated method names.
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<MethodName>>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    treatment: Option<Treatment>,
    #[arg(long)]
    repetitions: Option<usize>,
    /// Record wall-clock seconds per run.
    #[arg(long)]
    timing: bool,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg: ExperimentConfig = match &self.config {
            Some(path) => read_json(path)?,
            None => ExperimentConfig::default(),
        };
        if let EnvironmentSource::File { path } = &mut cfg.environment {
            // Relative model paths are taken from the config's directory.
            if let Some(dir) = self.config.as_deref().and_then(Path::parent) {
                if path.is_relative() {
                    *path = dir.join(&*path);
                }
            }
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = &self.method {
            cfg.methods = m.clone();
        }
        if let Some(b) = self.beta {
            cfg.beta = b;
        }
        if let Some(s) = self.step_size {
            cfg.step_size = s;
        }
        if let Some(i) = self.iters {
            cfg.iters = i;
        }
        if self.episodes.is_some() || self.horizon.is_some() {
            let (e0, h0) = match cfg.expert {
                ExpertMode::Sampled { episodes, horizon } => (episodes, horizon),
                ExpertMode::Exact => (10, 100),
            };
            cfg.expert = ExpertMode::Sampled { episodes: self.episodes.unwrap_or(e0), horizon: self.horizon.unwrap_or(h0) };
        }
        if let Some(t) = self.treatment {
            cfg.treatment = t;
        }
        if let Some(r) = self.repetitions {
            cfg.repetitions = r;
        }
        if self.timing {
            cfg.timing = true;
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn train(args: &TrainArgs) -> Result<()> {
    let env = load_environment(&args.model)?;
    let source = EnvironmentSource::File { path: args.model.clone() };
    let expert = match args.episodes {
        Some(episodes) => ExpertMode::Sampled { episodes, horizon: args.horizon },
        None => ExpertMode::Exact,
    };
    let cfg = ExperimentConfig {
        environment: source,
        expert,
        methods: vec![args.method],
        step_size: args.step_size,
        iters: args.iters,
        beta: args.beta,
        treatment: args.treatment,
        repetitions: 1,
        seed: args.seed,
        ..Default::default()
    };
    cfg.validate()?;
    let mut ctx = irl_core::harness::prepare_run(&cfg, 0)?;
    if let Some(path) = &args.trajectories {
        let trajs = read_trajectories_csv(File::open(path)?)?;
        ctx = with_trajectories(ctx, trajs)?;
    }
    let fitted = fit(&ctx, &cfg, args.method)?;
    let mut out = output(Some(&args.out))?;
    match &fitted {
        Fitted::Gradient(trace) => trace.write_csv(&mut out)?,
        Fitted::Baseline(res) => {
            res.write_csv(&mut out)?;
            let best = res.best_index.expect("selected");
            eprintln!("best candidate {best} of {}", res.candidates.len());
        }
    }
    out.flush()?;
    let (eval, _) = evaluate_theta(&env, &ctx.learner_features, fitted.theta(), &ctx.eval_target, args.beta)?;
    eprintln!(
        "loss_greedy {} loss_boltzmann {} disagreement {}",
        eval.loss_greedy, eval.loss_boltzmann, eval.disagreement
    );
    if let Some(path) = &args.theta_out {
        write_json(&fitted.theta().to_vec(), path)?;
    }
    Ok(())
}

fn with_trajectories(mut ctx: RunContext, trajs: Vec<irl_core::expert::Trajectory>) -> Result<RunContext> {
    let gamma = ctx.env.mdp.gamma();
    ctx.mu_e = irl_core::baselines::expert_feature_expectation(&trajs, &ctx.learner_features, gamma)?;
    let data = ExpertDataset::new(trajs, ctx.env.mdp.n_states(), ctx.env.mdp.n_actions())?;
    ctx.train_target = data.target()?;
    ctx.dataset = Some(data);
    Ok(ctx)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenGridworld { size, features, success_prob, gamma, seed, out } => {
            let env = make_gridworld(&GridworldSpec { size, n_features: features, success_prob, gamma, seed })?;
            save_environment(&env, &out)
        }
        Command::GenSailing { size, p_stay, gamma, out } => {
            let env = make_sailing(&SailingSpec { p_stay, gamma, ..SailingSpec::with_size(size) })?;
            save_environment(&env, &out)
        }
        Command::SimulateExpert { model, episodes, horizon, seed, out } => {
            let env = load_environment(&model)?;
            let trajs =
                sample_episodes(&env.mdp, &env.truth.optimal_policy, episodes, horizon, seed, Some(&env.terminal))?;
            let mut w = output(Some(&out))?;
            write_trajectories_csv(&trajs, &mut w)?;
            w.flush()?;
            Ok(())
        }
        Command::Train(args) => train(&args),
        Command::Evaluate { model, theta, theta_file, beta, out } => {
            let env = load_environment(&model)?;
            let theta = match (theta, theta_file) {
                (Some(t), _) => t,
                (None, Some(path)) => read_json::<Vec<f64>>(&path)?,
                (None, None) => return Err(Error::Config("pass --theta or --theta-file".into())),
            };
            let target = expert_target(&env)?;
            let (eval, _) = evaluate_theta(&env, &env.features, &theta, &target, beta)?;
            let mut w = csv::Writer::from_writer(output(out.as_deref())?);
            w.write_record(["loss_greedy", "loss_boltzmann", "disagreement"])?;
            w.write_record([eval.loss_greedy, eval.loss_boltzmann, eval.disagreement].map(|v| v.to_string()))?;
            w.flush()?;
            Ok(())
        }
        Command::Sweep { exp, grid, summary } => {
            let cfg = exp.resolve()?;
            let (records, rows) = sweep_samples(&cfg, &grid)?;
            let mut w = output(cfg.output.as_deref())?;
            write_records_csv(&records, &mut w)?;
            w.flush()?;
            let summary_path = summary.or_else(|| {
                cfg.output.as_ref().map(|o| {
                    let stem = o.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
                    o.with_file_name(format!("{stem}.summary.csv"))
                })
            });
            let mut s = output(summary_path.as_deref())?;
            write_summary_csv(&rows, &mut s)?;
            s.flush()?;
            Ok(())
        }
        Command::DemoScaling { epsilon, phi_e2, ratios, out } => {
            let lambdas = match ratios {
                Some(r) => r.into_iter().map(|x| (x, 1.0)).collect(),
                None => default_scaling_grid(),
            };
            let rows = scaling_sensitivity_demo(epsilon, phi_e2, &lambdas)?;
            let mut w = output(out.as_deref())?;
            write_scaling_csv(&rows, &mut w)?;
            w.flush()?;
            Ok(())
        }
        Command::Run { exp } => {
            let cfg = exp.resolve()?;
            let records = run_experiment(&cfg)?;
            let mut w = output(cfg.output.as_deref())?;
            write_records_csv(&records, &mut w)?;
            w.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
