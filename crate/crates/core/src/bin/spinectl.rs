use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use spinectl::config::RunConfig;
use spinectl::dynamics::{build_chain, pose_feature, quat, ChainConfig, ChainModel};
use spinectl::env::{EnvConfig, EnvHandle, SpineEnv};
use spinectl::eval::{plot_csvs, run_eval, timing_benchmark, trial_targets, Controller, TrialConfig};
use spinectl::fdat::FdatSolver;
use spinectl::nn::{Checkpoint, GaussianPolicy};
use spinectl::ppo::train;
use spinectl::service::{serve, ServiceConfig};

type Res<T> = Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(name = "spinectl", version, about = "Train, track, evaluate and serve muscle-driven chain controllers")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration (sections: model, env, ppo, trial, fdat).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file or directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Fdat,
    Policy,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a policy with PPO; writes train_log.csv and checkpoint.json.
    Train {
        #[command(flatten)]
        common: Common,
        /// Environment step budget.
        #[arg(long, default_value_t = 200_000)]
        steps: u64,
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a controller over seeded trials; writes a per-trial CSV.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        controller: Kind,
        /// Policy checkpoint, required for --controller policy.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Track one seeded target with the per-step solver.
    FdatTrack {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        steps: usize,
    },
    /// Run the HTTP environment service.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        #[arg(long)]
        model_config: Option<PathBuf>,
        #[arg(long)]
        env_config: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        max_sessions: usize,
        #[arg(long, default_value_t = 300)]
        idle_timeout_secs: u64,
    },
    /// Median per-step time of the solver and a policy on the same states.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        /// Time this policy instead of a freshly initialized one.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Render SVG charts from evaluation reports or a training log.
    Plot {
        #[command(flatten)]
        common: Common,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

fn load(common: &Common) -> Res<RunConfig> {
    Ok(match &common.config {
        Some(p) => RunConfig::from_json_file(p)?,
        None => RunConfig::default(),
    })
}

fn model_of(cfg: &ChainConfig) -> Res<Arc<ChainModel>> {
    Ok(Arc::new(build_chain(cfg)?))
}

fn out_or(common: &Common, default: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn ensure_parent(p: &Path) -> Res<()> {
    if let Some(d) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(d)?;
    }
    Ok(())
}

fn cmd_train(common: Common, steps: u64, resume: Option<PathBuf>) -> Res<()> {
    let mut cfg = load(&common)?;
    if let Some(s) = common.seed {
        cfg.ppo.seed = s;
    }
    let model = model_of(&cfg.model)?;
    let env_cfg = cfg.env.clone();
    let factory = move |_: usize| -> Result<Box<dyn EnvHandle>, _> { Ok(Box::new(SpineEnv::new(model.clone(), env_cfg.clone())?)) };
    let out = out_or(&common, "runs/train");
    std::fs::create_dir_all(&out)?;
    let resume = resume.map(|p| Checkpoint::load(&p)).transpose()?;
    let res = train(&factory, &cfg.ppo, steps, Some(&out), resume)?;
    let last = res.log.last();
    println!(
        "{}",
        json!({
            "steps": res.step,
            "meanReturn": last.map(|r| r.mean_return),
            "successRate": last.map(|r| r.success_rate),
            "checkpoint": out.join("checkpoint.json"),
        })
    );
    Ok(())
}

fn cmd_eval(common: Common, kind: Kind, checkpoint: Option<PathBuf>, trials: Option<usize>, samples: Option<usize>) -> Res<()> {
    let cfg = load(&common)?;
    let trial = TrialConfig {
        n_trials: trials.unwrap_or(cfg.trial.n_trials),
        samples_per_trial: samples.unwrap_or(cfg.trial.samples_per_trial),
        seed: common.seed.unwrap_or(cfg.trial.seed),
    };
    let controller = match kind {
        Kind::Fdat => Controller::Fdat(cfg.fdat),
        Kind::Policy => {
            let p = checkpoint.expect("checked in main");
            Controller::from_checkpoint(Checkpoint::load(&p)?)
        }
    };
    let model = model_of(&cfg.model)?;
    let report = run_eval(&trial, &model, &cfg.env, &controller)?;
    let out = out_or(&common, "report.csv");
    ensure_parent(&out)?;
    report.save_csv(&out)?;
    println!(
        "{}",
        json!({
            "controller": report.controller,
            "trials": report.trials.len(),
            "errorC": report.error_c,
            "errorS": report.error_s,
            "errorT": report.error_t,
            "errorE": report.error_e,
            "meanStepTime": report.mean_step_time,
            "numMuscles": report.num_muscles,
            "report": out,
        })
    );
    Ok(())
}

fn cmd_fdat_track(common: Common, steps: usize) -> Res<()> {
    let cfg = load(&common)?;
    let model = model_of(&cfg.model)?;
    let seed = common.seed.unwrap_or(cfg.trial.seed);
    let target = trial_targets(&TrialConfig { n_trials: 1, samples_per_trial: 1, seed }, model.num_bodies(), &cfg.env.target_domain)
        .remove(0)
        .feature();
    let mut solver = FdatSolver::new(&model, cfg.fdat, cfg.env.dt);
    let tr = solver.track(&model, &model.rest_state(), &[target.clone()], steps)?;
    let out = out_or(&common, "fdat_track.csv");
    ensure_parent(&out)?;
    let mut w = csv::Writer::from_path(&out)?;
    w.write_record(["step", "errorDeg", "activationNorm", "solveTime"])?;
    let n = model.num_bodies();
    let mut last = f64::NAN;
    for (k, ((s, a), t)) in tr.states.iter().skip(1).zip(&tr.activations).zip(&tr.solve_times).enumerate() {
        let u = pose_feature(&model, s);
        last = quat::summed_angle(u.as_slice(), target.as_slice(), n).to_degrees();
        let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        w.write_record([(k + 1).to_string(), last.to_string(), norm.to_string(), t.to_string()])?;
    }
    w.flush()?;
    println!("{}", json!({ "steps": steps, "finalErrorDeg": last, "trace": out }));
    Ok(())
}

fn cmd_serve(common: Common, bind: SocketAddr, model_config: Option<PathBuf>, env_config: Option<PathBuf>, max_sessions: usize, idle: u64) -> Res<()> {
    let cfg = load(&common)?;
    let chain = match model_config {
        Some(p) => ChainConfig::from_json_file(p)?,
        None => cfg.model,
    };
    let env = match env_config {
        Some(p) => EnvConfig::from_json_file(p)?,
        None => cfg.env,
    };
    let model = model_of(&chain)?;
    let svc = ServiceConfig {
        bind,
        max_sessions,
        idle_timeout: std::time::Duration::from_secs(idle),
    }
    .with_port_override()?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(svc.bind).await?;
        let addr = listener.local_addr()?;
        if let Some(out) = &common.out {
            ensure_parent(out)?;
            std::fs::write(out, json!({ "address": addr.to_string() }).to_string())?;
        }
        eprintln!("listening on http://{addr}");
        serve(listener, model, env, svc, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        Ok(())
    })
}

fn cmd_bench(common: Common, steps: usize, checkpoint: Option<PathBuf>) -> Res<()> {
    let cfg = load(&common)?;
    let model = model_of(&cfg.model)?;
    let seed = common.seed.unwrap_or(0);
    let obs_dim = SpineEnv::new(model.clone(), cfg.env.clone())?.obs_dim();
    let policy = match checkpoint {
        Some(p) => Checkpoint::load(&p)?.policy,
        None => GaussianPolicy::with_hidden(obs_dim, model.num_muscles(), &cfg.ppo.policy_hidden, &mut ChaCha8Rng::seed_from_u64(seed))?,
    };
    let t = timing_benchmark(&model, &cfg.env, &cfg.fdat, &policy, steps, seed)?;
    let line = serde_json::to_string(&t)?;
    if let Some(out) = &common.out {
        ensure_parent(out)?;
        std::fs::write(out, &line)?;
    }
    println!("{line}");
    Ok(())
}

fn cmd_plot(common: Common, inputs: Vec<PathBuf>) -> Res<()> {
    let out = out_or(&common, "plot.svg");
    ensure_parent(&out)?;
    let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    plot_csvs(&refs, &out)?;
    println!("{}", json!({ "image": out }));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    if let Cmd::Eval { controller: Kind::Policy, checkpoint: None, .. } = cli.cmd {
        Cli::command()
            .error(ErrorKind::MissingRequiredArgument, "--controller policy needs --checkpoint <PATH>")
            .exit();
    }
    let result = match cli.cmd {
        Cmd::Train { common, steps, resume } => cmd_train(common, steps, resume),
        Cmd::Eval { common, controller, checkpoint, trials, samples } => cmd_eval(common, controller, checkpoint, trials, samples),
        Cmd::FdatTrack { common, steps } => cmd_fdat_track(common, steps),
        Cmd::Serve { common, bind, model_config, env_config, max_sessions, idle_timeout_secs } => {
            cmd_serve(common, bind, model_config, env_config, max_sessions, idle_timeout_secs)
        }
        Cmd::Bench { common, steps, checkpoint } => cmd_bench(common, steps, checkpoint),
        Cmd::Plot { common, inputs } => cmd_plot(common, inputs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
