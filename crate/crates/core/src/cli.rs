//! Command-line front end. `main` only forwards to [`run`], which keeps the
//! whole CLI callable (and testable) in-process.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{read_gains, write_gains, Config};
use crate::dynamics::{pitch_transfer_function, poles, yaw_transfer_function, RobotState, TransferFunction};
use crate::error::{Error, Result};
use crate::harness::{compare, settling_time, CompareSetup, Termination, Trajectory, TrajectoryMeta};
use crate::pid::{tune_pid, PidController, HARDWARE_REFERENCE_GAINS};
use crate::rl::{load_model, run_rl_episode, save_model, train};
use crate::sim::{run_episode, ConstantForce, Plant};

/// Exit status for bad arguments, unreadable inputs and invalid configs.
pub const EXIT_USAGE: i32 = 2;
/// Exit status for failures while running a valid request.
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "balance-lab",
    version,
    about = "Self-balancing robot simulation: PID vs actor-critic"
)]
struct Cli {
    /// TOML experiment configuration (defaults apply to anything omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for sensor noise and training; overrides seeds in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ControllerKind {
    None,
    Pid,
    Rl,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one episode; `--out` receives the trajectory file.
    Simulate {
        #[arg(long, value_enum, default_value_t = ControllerKind::Pid)]
        controller: ControllerKind,
        /// Initial pitch (rad).
        #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
        phi0: f64,
        /// Gains file for the PID controller (default: the config's gains).
        #[arg(long)]
        gains: Option<PathBuf>,
        /// Model file, required with `--controller rl`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Grid-search PID gains; `--out` receives the gains file.
    TunePid,
    /// Train the actor-critic policy; `--out` receives the model file.
    Train {
        /// Also write the per-episode training log (TOML).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Greedy evaluation episodes from seeded random initial pitches;
    /// `--out` receives one trajectory file per episode.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
    },
    /// PID vs policy on the configured grid; `--out` receives trajectories
    /// and report.toml (the report goes to stdout without it).
    Compare {
        #[arg(long)]
        model: PathBuf,
        /// Gains file (default: the config's gains).
        #[arg(long)]
        gains: Option<PathBuf>,
    },
    /// Pitch and position transfer functions and their poles.
    AnalyzeTf,
}

/// Parses `args` (program name first), executes, and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Io { .. } | Error::Model(_) | Error::TrajectoryFormat(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn io_out(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.rl.seed = seed;
        cfg.pid.tune.seed = seed;
    }
    Ok(cfg)
}

fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    traj.write(std::io::BufWriter::new(file))
        .map_err(|e| Error::io(path, e))
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(&cli)?;
    let seed = cli.seed.unwrap_or(0);
    let hash = cfg.hash();
    let plant = cfg.plant();
    let meta = |controller: &str, seed: u64| TrajectoryMeta {
        controller: controller.into(),
        seed,
        config_hash: hash.clone(),
    };

    match &cli.command {
        Command::Simulate {
            controller,
            phi0,
            gains,
            model,
        } => {
            if !phi0.is_finite() {
                return Err(usage("--phi0 must be finite"));
            }
            let initial = RobotState::tilted(*phi0);
            let mut env = Plant::new(plant, seed)?;
            let traj = match controller {
                ControllerKind::None => run_episode(&mut env, &mut ConstantForce(0.0), initial, meta("none", seed))?,
                ControllerKind::Pid => {
                    let gains = match gains {
                        Some(path) => read_gains(path)?,
                        None => cfg.pid.gains(),
                    };
                    let mut pid = PidController::new(gains, cfg.pid.setpoint(), plant.params.force_limit)
                        .with_position_loop(cfg.pid.position_loop);
                    run_episode(&mut env, &mut pid, initial, meta("pid", seed))?
                }
                ControllerKind::Rl => {
                    let path = model.as_ref().ok_or_else(|| usage("--controller rl needs --model"))?;
                    let model = load_model(path)?;
                    let mut traj = run_rl_episode(&model, initial, &plant, &cfg.rl, seed)?;
                    traj.meta = meta("rl", seed);
                    traj
                }
            };
            if let Some(path) = &cli.out {
                write_trajectory(path, &traj)?;
            }
            let settle = settling_time(&traj, cfg.harness.band);
            writeln!(
                out,
                "termination {} at t={:.4} s, max |phi| {:.6} rad, settling {}",
                traj.termination,
                traj.duration(),
                traj.max_abs_phi(),
                settle.map_or("unsettled".to_string(), |t| format!("{t:.4} s")),
            )
            .map_err(io_out)?;
        }

        Command::TunePid => {
            let report = tune_pid(&cfg.pid.tune, &plant)?;
            let best = report
                .scores
                .iter()
                .find(|s| s.gains == report.best)
                .expect("best gains come from the scores");
            writeln!(
                out,
                "best gains kp={} ki={} kd={} (cost {:.6}, mean settling {:.4} s, falls {})",
                report.best.kp, report.best.ki, report.best.kd, report.best_cost, best.mean_settling, best.falls
            )
            .map_err(io_out)?;
            writeln!(
                out,
                "hardware reference gains kp={} ki={} kd={} (not expected to stabilise the simulator)",
                HARDWARE_REFERENCE_GAINS.kp, HARDWARE_REFERENCE_GAINS.ki, HARDWARE_REFERENCE_GAINS.kd
            )
            .map_err(io_out)?;
            if let Some(path) = &cli.out {
                write_gains(path, &report.best)?;
            }
        }

        Command::Train { log } => {
            let path = cli
                .out
                .as_ref()
                .ok_or_else(|| usage("train needs --out <model file>"))?;
            let (model, train_log) = train(&plant, &cfg.rl)?;
            save_model(&model, path)?;
            if let Some(log_path) = log {
                let text = toml::to_string(&train_log).expect("training log serialises");
                std::fs::write(log_path, text).map_err(|e| Error::io(log_path, e))?;
            }
            let recent = train_log.mean_recent_reward(100);
            writeln!(
                out,
                "trained {} episodes; mean reward of last 100: {:.3} of {} ({:.1}%)",
                train_log.episodes.len(),
                recent,
                cfg.rl.max_episode_reward(),
                100.0 * recent / cfg.rl.max_episode_reward()
            )
            .map_err(io_out)?;
        }

        Command::Evaluate { model, episodes } => {
            let model = load_model(model)?;
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let range = cfg.rl.init_phi_range;
            let (mut reward_sum, mut falls, mut settled, mut settle_sum) = (0.0, 0, 0, 0.0);
            for i in 0..*episodes {
                let phi0 = if range > 0.0 {
                    rng.random_range(-range..=range)
                } else {
                    0.0
                };
                let ep_seed = seed.wrapping_add(i as u64);
                let mut traj = run_rl_episode(&model, RobotState::tilted(phi0), &plant, &cfg.rl, ep_seed)?;
                traj.meta = meta("rl", ep_seed);
                let settle = settling_time(&traj, cfg.harness.band);
                reward_sum += traj.total_reward();
                falls += usize::from(traj.termination == Termination::Fell);
                if let Some(t) = settle {
                    settled += 1;
                    settle_sum += t;
                }
                if let Some(dir) = &cli.out {
                    write_trajectory(&dir.join(format!("episode{i:03}.traj")), &traj)?;
                }
                writeln!(
                    out,
                    "episode {i}: phi0 {phi0:+.5} {} reward {:.3} settling {}",
                    traj.termination,
                    traj.total_reward(),
                    settle.map_or("unsettled".to_string(), |t| format!("{t:.4} s"))
                )
                .map_err(io_out)?;
            }
            let n = (*episodes).max(1) as f64;
            writeln!(
                out,
                "mean reward {:.3} over {episodes} episodes, {falls} falls, {settled} settled{}",
                reward_sum / n,
                if settled > 0 {
                    format!(" (mean settling {:.4} s)", settle_sum / settled as f64)
                } else {
                    String::new()
                }
            )
            .map_err(io_out)?;
        }

        Command::Compare { model, gains } => {
            let model = load_model(model)?;
            let gains = match gains {
                Some(path) => read_gains(path)?,
                None => cfg.pid.gains(),
            };
            let setup = CompareSetup {
                plant,
                gains,
                setpoint: cfg.pid.setpoint(),
                position_loop: cfg.pid.position_loop,
                model: &model,
                rl: &cfg.rl,
                harness: &cfg.harness,
                seed,
                config_hash: hash.clone(),
            };
            let result = compare(&setup)?;
            match &cli.out {
                Some(dir) => {
                    result.write(dir)?;
                    let r = &result.report;
                    let show = |v: Option<f64>| v.map_or("unsettled".to_string(), |v| format!("{v:.6}"));
                    writeln!(
                        out,
                        "pid: settling {} s, distance {} m, falls {}\nrl:  settling {} s, distance {} m, falls {}",
                        show(r.pid.mean_settling_time),
                        show(r.pid.mean_distance),
                        r.pid.falls,
                        show(r.rl.mean_settling_time),
                        show(r.rl.mean_distance),
                        r.rl.falls
                    )
                    .map_err(io_out)?;
                }
                None => write!(out, "{}", result.report.to_toml_string()).map_err(io_out)?,
            }
        }

        Command::AnalyzeTf => {
            let params = plant.params;
            let pitch = pitch_transfer_function(&params)?;
            let yaw = yaw_transfer_function(&params)?;
            print_tf(out, "pitch phi(s)/F(s)", &pitch)?;
            print_tf(out, "position x(s)/F(s)", &yaw)?;
            let set = poles(&pitch)?;
            let verdict = if set.is_unstable() { "UNSTABLE" } else { "STABLE" };
            writeln!(
                out,
                "open loop {verdict}: {} pole(s) with Re > 0, {} marginal, max |den(pole)| {:e}",
                set.unstable_count, set.marginal_count, set.max_residual
            )
            .map_err(io_out)?;
        }
    }
    Ok(())
}

fn print_tf(out: &mut dyn Write, name: &str, tf: &TransferFunction) -> Result<()> {
    let coeffs = |c: &[f64]| c.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(", ");
    let set = poles(tf)?;
    writeln!(out, "{name}").map_err(io_out)?;
    writeln!(out, "  numerator   [{}]", coeffs(&tf.numerator)).map_err(io_out)?;
    writeln!(out, "  denominator [{}]", coeffs(&tf.denominator)).map_err(io_out)?;
    for p in &set.poles {
        writeln!(out, "  pole {:+.12e} {:+.12e}i", p.re, p.im).map_err(io_out)?;
    }
    Ok(())
}
