//! Command-line surface: training, conditioning, sampling, marginals,
//! segmentation, the striking simulation and the experiment studies.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector, Vector3};
use promp_core::adaptation::{self, JointTarget, LaplaceOptions, TaskTarget};
use promp_core::kinematics::{validate_jacobian, PlanarArm, XzPlanarArm};
use promp_core::tabletennis::{play_trial, striking_scenario, HitTimePrior, StrikingScenario};
use promp_core::training::{
    em_train, em_train_approx, least_squares_train, EmOptions, NIWPrior, S0Rule, TrainingMode,
};
use promp_core::{BasisConfig, GaussianState, Order};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::Deserialize;

use crate::demos::{self, SegmentOptions};
use crate::experiments::{
    self, BootstrapResult, CondnumConfig, ConvergenceConfig, EmCurveConfig, StudyResult,
};
use crate::model_file;
use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "promp",
    about = "Learn, adapt and simulate probabilistic movement primitives",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON config carrying defaults such as the arm description.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a movement primitive to demonstration files.
    Train(TrainArgs),
    /// Condition a model on a joint- or task-space target.
    Condition(ConditionArgs),
    /// Draw trajectories from a model.
    Sample(SampleArgs),
    /// Mean and standard deviation of the model over a phase grid.
    Marginal(MarginalArgs),
    /// Cut recordings into strike segments around hit times.
    Segment(SegmentArgs),
    /// Run simulated striking trials.
    TtSim(TtSimArgs),
    /// Reproduction studies; results as CSV.
    Exp(ExpArgs),
    /// Operator latency benchmark (same as `exp latency`).
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PriorChoice {
    /// Maximum a posteriori with the Normal-Inverse-Wishart prior.
    Map,
    /// Maximum likelihood.
    Mle,
    /// Maximum likelihood with block-diagonal weight covariance.
    MleBlockdiag,
    /// Per-demonstration least squares baseline.
    Ls,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Demonstration files (.csv one-per-demo, .json many-per-file).
    #[arg(required = true)]
    pub demos: Vec<PathBuf>,
    /// Estimator; flags override values from --config.
    #[arg(long, value_enum)]
    pub prior: Option<PriorChoice>,
    /// Number of basis functions per degree of freedom.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub poly_degree: Option<usize>,
    /// Ridge parameter for the least-squares trainer.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Mean pseudo-count of the prior; 0 keeps the mean non-informative.
    #[arg(long)]
    pub k0: Option<f64>,
    /// Inverse-Wishart degrees of freedom; defaults to K*D + 1.
    #[arg(long)]
    pub v0: Option<f64>,
    /// Restrict the observation noise to its diagonal.
    #[arg(long)]
    pub diag_noise: bool,
    /// Use the point-estimate E-step.
    #[arg(long)]
    pub approx: bool,
}

/// Training defaults accepted in config files; CLI flags win.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub prior: Option<String>,
    pub k: Option<usize>,
    pub poly_degree: Option<usize>,
    pub lambda: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub k0: Option<f64>,
    pub v0: Option<f64>,
    pub diag_noise: Option<bool>,
}

#[derive(Debug, Args)]
pub struct ConditionArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Phase of the target, in [0, 1].
    #[arg(long)]
    pub at: f64,
    /// Joint-space target value, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub joint: Option<Vec<f64>>,
    /// Derivative order of the joint target: 0 position, 1 velocity,
    /// 2 acceleration.
    #[arg(long, default_value_t = 0)]
    pub order: u32,
    /// Covariance of an uncertain joint target: D diagonal entries or a
    /// full row-major D*D matrix.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub cov: Option<Vec<f64>>,
    /// Task-space target position, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub task: Option<Vec<f64>>,
    /// Covariance of the task target: X diagonal entries or row-major X*X.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub task_cov: Option<Vec<f64>>,
    /// Arm description JSON, required for task targets.
    #[arg(long)]
    pub arm: Option<PathBuf>,
    /// Skip the load-time Jacobian consistency check of the arm.
    #[arg(long)]
    pub no_fk_check: bool,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub trajectories: usize,
    #[arg(long, default_value_t = 100)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct MarginalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub order: u32,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(required = true)]
    pub demos: Vec<PathBuf>,
    /// Hit times (seconds, in recording time), comma separated; applied to
    /// every input recording.
    #[arg(long, value_delimiter = ',', required = true)]
    pub hit_times: Vec<f64>,
    #[arg(long, default_value_t = 6)]
    pub min_segments: usize,
    /// Speed fraction below which a sample counts as a velocity zero.
    #[arg(long, default_value_t = 0.01)]
    pub zero_fraction: f64,
    /// Moving-average window for the speed profile; 0 disables smoothing.
    #[arg(long, default_value_t = 0)]
    pub smooth: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum HitPriorChoice {
    Gaussian,
    Uniform,
}

#[derive(Debug, Args)]
pub struct TtSimArgs {
    /// Trained model; a built-in synthetic striking model when omitted.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Arm description JSON; required together with --model.
    #[arg(long)]
    pub arm: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, value_enum, default_value_t = OnOff::On)]
    pub replan: OnOff,
    #[arg(long, value_enum, default_value_t = HitPriorChoice::Gaussian)]
    pub hit_prior: HitPriorChoice,
    /// Movement duration in seconds; defaults to the scenario's.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Standard deviation of the per-trial aim perturbation (m).
    #[arg(long, default_value_t = 0.05)]
    pub perturbation: f64,
    /// Skip the load-time Jacobian consistency check of the arm.
    #[arg(long)]
    pub no_fk_check: bool,
}

#[derive(Debug, Args)]
pub struct ExpArgs {
    #[command(subcommand)]
    pub study: StudyCommand,
    /// Emit gnuplot-ready whitespace columns instead of CSV.
    #[arg(long, global = true)]
    pub plot_data: bool,
}

#[derive(Debug, Subcommand)]
pub enum StudyCommand {
    /// Condition number of the learned covariance vs training-set size.
    Condnum {
        #[arg(long, default_value_t = 7)]
        dof: usize,
        #[arg(long, default_value_t = 100)]
        n_max: usize,
    },
    /// Parameter estimation error on the correlated generator.
    Convergence {
        #[arg(long, default_value_t = 40)]
        n_max: usize,
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
    },
    /// Exact vs point-estimate EM likelihood per iteration.
    Emcurve {
        #[arg(long, default_value_t = 8)]
        iterations: usize,
    },
    /// Conditioning operator latency across model sizes.
    Latency {
        #[arg(long, default_value_t = 1000)]
        reps: usize,
    },
    /// Bootstrap histogram of a success rate.
    Bootstrap {
        /// Read outcomes from the `hit` column of a tt-sim CSV.
        #[arg(long)]
        trials_csv: Option<PathBuf>,
        /// Synthesize Bernoulli outcomes instead.
        #[arg(long, default_value_t = 0.6)]
        prob: f64,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 5000)]
        resamples: usize,
        #[arg(long, default_value_t = 50)]
        sample_size: usize,
    },
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
}

/// Arm description accepted in config files and `--arm` arguments.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ArmFile {
    Planar { link_lengths: Vec<f64> },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct ConfigFile {
    pub arm: Option<ArmFile>,
    pub train: Option<TrainConfig>,
}

fn load_config(path: Option<&Path>) -> crate::Result<ConfigFile> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn load_arm_file(path: &Path) -> crate::Result<ArmFile> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn build_arm(file: &ArmFile) -> crate::Result<PlanarArm> {
    match file {
        ArmFile::Planar { link_lengths } => Ok(PlanarArm::new(link_lengths.clone())?),
    }
}

fn write_output(out: Option<&Path>, content: &str) -> crate::Result<()> {
    match out {
        Some(path) => fs::write(path, content).map_err(|e| CliError::io(path, e)),
        None => {
            std::io::stdout()
                .write_all(content.as_bytes())
                .map_err(|e| CliError::io("<stdout>", e))?;
            Ok(())
        }
    }
}

/// Parse a covariance given either as `dim` diagonal entries or a full
/// row-major matrix.
fn parse_covariance(values: &[f64], dim: usize, what: &str) -> crate::Result<DMatrix<f64>> {
    if values.len() == dim {
        Ok(DMatrix::from_diagonal(&DVector::from_row_slice(values)))
    } else if values.len() == dim * dim {
        Ok(DMatrix::from_row_slice(dim, dim, values))
    } else {
        Err(CliError::InconsistentDimension(format!(
            "{what} needs {dim} diagonal entries or {} row-major entries, got {}",
            dim * dim,
            values.len()
        )))
    }
}

pub fn run(cli: Cli) -> crate::Result<()> {
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Train(args) => run_train(args, cli.out.as_deref(), &config),
        Command::Condition(args) => run_condition(args, cli.seed, cli.out.as_deref(), &config),
        Command::Sample(args) => run_sample(args, cli.seed, cli.out.as_deref()),
        Command::Marginal(args) => run_marginal(args, cli.out.as_deref()),
        Command::Segment(args) => run_segment(args, cli.out.as_deref()),
        Command::TtSim(args) => run_tt_sim(args, cli.seed, cli.out.as_deref(), &config),
        Command::Exp(args) => run_exp(args, cli.seed, cli.out.as_deref()),
        Command::Bench(args) => run_exp(
            ExpArgs {
                study: StudyCommand::Latency { reps: args.reps },
                plot_data: false,
            },
            cli.seed,
            cli.out.as_deref(),
        ),
    }
}

fn run_train(args: TrainArgs, out: Option<&Path>, config: &ConfigFile) -> crate::Result<()> {
    let defaults = config.train.clone().unwrap_or_default();
    let prior = match args.prior {
        Some(p) => p,
        None => match defaults.prior.as_deref() {
            None | Some("map") => PriorChoice::Map,
            Some("mle") => PriorChoice::Mle,
            Some("mle-blockdiag") => PriorChoice::MleBlockdiag,
            Some("ls") => PriorChoice::Ls,
            Some(other) => {
                return Err(CliError::Input(format!(
                    "unknown prior '{other}' in config (expected map, mle, mle-blockdiag or ls)"
                )))
            }
        },
    };
    let k = args.k.or(defaults.k).unwrap_or(5);
    let poly_degree = args.poly_degree.or(defaults.poly_degree).unwrap_or(1);
    let lambda = args.lambda.or(defaults.lambda).unwrap_or(0.0);

    let demos = demos::load_demo_files(&args.demos)?;
    let dof = demos[0].dof();
    if k < poly_degree + 1 {
        return Err(CliError::Input(format!(
            "--k {k} cannot fit a degree-{poly_degree} polynomial block"
        )));
    }
    let basis = BasisConfig::with_default_rbfs(k - poly_degree - 1, poly_degree);
    let dim = basis.k() * dof;
    let opts = EmOptions {
        tol: args.tol.or(defaults.tol).unwrap_or(1e-6),
        max_iter: args.max_iter.or(defaults.max_iter).unwrap_or(200),
        diagonal_sigma_y: args.diag_noise || defaults.diag_noise.unwrap_or(false),
        ..EmOptions::default()
    };

    let (model, report) = match prior {
        PriorChoice::Ls => least_squares_train(&demos, &basis, dof, lambda)?,
        choice => {
            let mode = match choice {
                PriorChoice::Map => TrainingMode::Map(NIWPrior {
                    k0: args.k0.or(defaults.k0).unwrap_or(0.0),
                    m0: DVector::zeros(dim),
                    v0: args.v0.or(defaults.v0).unwrap_or((dim + 1) as f64),
                    s0: S0Rule::Adaptive,
                }),
                PriorChoice::Mle => TrainingMode::Mle,
                PriorChoice::MleBlockdiag => TrainingMode::MleBlockDiag,
                PriorChoice::Ls => unreachable!(),
            };
            if args.approx {
                em_train_approx(&demos, &basis, dof, &mode, &opts)?
            } else {
                em_train(&demos, &basis, dof, &mode, &opts)?
            }
        }
    };

    eprintln!(
        "trained on {} demonstrations (D={dof}, K={}): {} iterations, converged: {}{}",
        demos.len(),
        basis.k(),
        report.iterations,
        report.converged,
        if report.rank_deficient {
            " [rank deficient: fewer demonstrations than weight dimensions]"
        } else {
            ""
        }
    );
    if let Some(obj) = report.objective_trace.last() {
        eprintln!("final objective: {obj:.6}");
    }

    match out {
        Some(path) => model_file::save_model(path, &model),
        None => {
            let file = model_file::ModelFile::from_promp(&model);
            let json = serde_json::to_string_pretty(&file)
                .map_err(|e| CliError::Input(format!("cannot serialize model: {e}")))?;
            write_output(None, &json)
        }
    }
}

fn run_condition(
    args: ConditionArgs,
    seed: u64,
    out: Option<&Path>,
    config: &ConfigFile,
) -> crate::Result<()> {
    let model = model_file::load_model(&args.model)?;
    let order = Order::from_index(args.order)?;

    let conditioned = match (&args.joint, &args.task) {
        (Some(joint), None) => {
            if joint.len() != model.dof() {
                return Err(CliError::InconsistentDimension(format!(
                    "--joint has {} values, model has {} joints",
                    joint.len(),
                    model.dof()
                )));
            }
            let value = DVector::from_row_slice(joint);
            let target = match &args.cov {
                None => JointTarget::exact(args.at, order, value),
                Some(cov) => {
                    let cov = parse_covariance(cov, model.dof(), "--cov")?;
                    JointTarget::gaussian(args.at, order, GaussianState::new(value, cov)?)
                }
            };
            adaptation::condition_joint(&model, &target)?
        }
        (None, Some(task)) => {
            let arm_file = match (&args.arm, &config.arm) {
                (Some(path), _) => load_arm_file(path)?,
                (None, Some(arm)) => arm.clone(),
                (None, None) => {
                    return Err(CliError::Input(
                        "task-space conditioning needs --arm or an arm in --config".into(),
                    ))
                }
            };
            let arm = build_arm(&arm_file)?;
            if !args.no_fk_check {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                validate_jacobian(&arm, 100, &mut rng)?;
            }
            if task.len() != arm.output_dim() {
                return Err(CliError::InconsistentDimension(format!(
                    "--task has {} values, arm task space has {}",
                    task.len(),
                    arm.output_dim()
                )));
            }
            let cov = match &args.task_cov {
                Some(c) => parse_covariance(c, task.len(), "--task-cov")?,
                None => DMatrix::identity(task.len(), task.len()) * 1e-4,
            };
            let target = TaskTarget {
                z: args.at,
                dist: GaussianState::new(DVector::from_row_slice(task), cov)?,
            };
            let (conditioned, report) =
                adaptation::condition_task(&model, &target, &arm, &LaplaceOptions::default())?;
            eprintln!(
                "task conditioning: {} optimizer iterations, gradient norm {:.3e}, \
                 Hessian condition {:.3e}",
                report.iterations, report.gradient_norm, report.hessian_condition
            );
            conditioned
        }
        _ => {
            return Err(CliError::Input(
                "specify exactly one of --joint or --task".into(),
            ))
        }
    };

    match out {
        Some(path) => model_file::save_model(path, &conditioned),
        None => {
            let file = model_file::ModelFile::from_promp(&conditioned);
            let json = serde_json::to_string_pretty(&file)
                .map_err(|e| CliError::Input(format!("cannot serialize model: {e}")))?;
            write_output(None, &json)
        }
    }
}

use promp_core::kinematics::ForwardKinematics as _;

fn run_sample(args: SampleArgs, seed: u64, out: Option<&Path>) -> crate::Result<()> {
    let model = model_file::load_model(&args.model)?;
    if args.points < 2 {
        return Err(CliError::Input("--points must be at least 2".into()));
    }
    let phases: Vec<f64> = (0..args.points)
        .map(|i| i as f64 / (args.points - 1) as f64)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = String::new();
    let _ = write!(csv, "traj,z");
    for d in 0..model.dof() {
        let _ = write!(csv, ",q{d}");
    }
    let _ = writeln!(csv);
    for t in 0..args.trajectories {
        let traj = model.sample_trajectory(&phases, &mut rng)?;
        for (i, &z) in phases.iter().enumerate() {
            let _ = write!(csv, "{t},{z}");
            for d in 0..model.dof() {
                let _ = write!(csv, ",{}", traj[(i, d)]);
            }
            let _ = writeln!(csv);
        }
    }
    write_output(out, &csv)
}

fn run_marginal(args: MarginalArgs, out: Option<&Path>) -> crate::Result<()> {
    let model = model_file::load_model(&args.model)?;
    let order = Order::from_index(args.order)?;
    if args.points < 2 {
        return Err(CliError::Input("--points must be at least 2".into()));
    }
    let mut csv = String::new();
    let _ = write!(csv, "z");
    for d in 0..model.dof() {
        let _ = write!(csv, ",mean_q{d},std_q{d}");
    }
    let _ = writeln!(csv);
    for i in 0..args.points {
        let z = i as f64 / (args.points - 1) as f64;
        let marginal = model.marginal_at(z, order)?;
        let _ = write!(csv, "{z}");
        for d in 0..model.dof() {
            let _ = write!(
                csv,
                ",{},{}",
                marginal.mean()[d],
                marginal.cov()[(d, d)].sqrt()
            );
        }
        let _ = writeln!(csv);
    }
    write_output(out, &csv)
}

fn run_segment(args: SegmentArgs, out: Option<&Path>) -> crate::Result<()> {
    let opts = SegmentOptions {
        zero_fraction: args.zero_fraction,
        smoothing: args.smooth,
    };
    let mut all_segments = Vec::new();
    let mut total_dropped = 0usize;
    for path in &args.demos {
        for demo in demos::load_demos(path)? {
            let seg = demos::segment_strikes(&demo, &args.hit_times, &opts)?;
            for d in &seg.dropped {
                eprintln!(
                    "dropped hit at t={:.4} in {}: {}",
                    d.hit_time,
                    path.display(),
                    d.reason
                );
            }
            total_dropped += seg.dropped.len();
            all_segments.extend(seg.segments);
        }
    }
    eprintln!(
        "{} strike segments extracted, {} hits dropped",
        all_segments.len(),
        total_dropped
    );
    let segmentation = demos::Segmentation {
        segments: all_segments,
        dropped: Vec::new(),
    };
    demos::require_min_segments(&segmentation, args.min_segments)?;
    match out {
        Some(path) => demos::save_demos_json(path, &segmentation.segments),
        None => {
            let records: Vec<demos::DemoRecord> = segmentation
                .segments
                .iter()
                .enumerate()
                .map(|(i, d)| demos::DemoRecord::from_demonstration(format!("segment{i}"), d))
                .collect();
            let json = serde_json::to_string_pretty(&records)
                .map_err(|e| CliError::Input(format!("cannot serialize segments: {e}")))?;
            write_output(None, &json)
        }
    }
}

fn run_tt_sim(
    args: TtSimArgs,
    seed: u64,
    out: Option<&Path>,
    config: &ConfigFile,
) -> crate::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scenario = match (&args.model, &args.arm, &config.arm) {
        (Some(model_path), arm_path, config_arm) => {
            let model = model_file::load_model(model_path)?;
            let arm_file = match (arm_path, config_arm) {
                (Some(p), _) => load_arm_file(p)?,
                (None, Some(a)) => a.clone(),
                (None, None) => {
                    return Err(CliError::Input(
                        "--model needs an arm via --arm or --config".into(),
                    ))
                }
            };
            let arm = build_arm(&arm_file)?;
            if !args.no_fk_check {
                let mut check_rng = ChaCha8Rng::seed_from_u64(seed);
                validate_jacobian(&arm, 100, &mut check_rng)?;
            }
            if arm.input_dim() != model.dof() {
                return Err(CliError::InconsistentDimension(format!(
                    "arm has {} joints, model has {}",
                    arm.input_dim(),
                    model.dof()
                )));
            }
            StrikingScenario::new(model, XzPlanarArm::new(arm), args.duration.unwrap_or(0.5))?
        }
        (None, _, _) => striking_scenario(&mut rng)?,
    };

    let mut opts = scenario.trial_options();
    if let Some(duration) = args.duration {
        opts.duration = duration;
    }
    opts.replan = matches!(args.replan, OnOff::On);
    opts.hit_prior = match args.hit_prior {
        HitPriorChoice::Gaussian => HitTimePrior::standard(),
        HitPriorChoice::Uniform => HitTimePrior::Uniform,
    };

    let mut csv = String::from("trial,hit,min_distance,t0,replans\n");
    let mut hits = 0usize;
    let mut no_moves = 0usize;
    for trial in 0..args.trials {
        let mut trial_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1 + trial as u64));
        let offset = Vector3::new(
            args.perturbation * randn(&mut trial_rng),
            0.0,
            args.perturbation * randn(&mut trial_rng),
        );
        let flight_time = 0.75 + 0.1 * trial_rng.random_range(-1.0..1.0);
        let ball = scenario.aimed_ball(flight_time, offset, &mut trial_rng)?;
        let outcome = play_trial(&scenario.promp, &scenario.arm, &ball, &opts)?;
        if outcome.hit {
            hits += 1;
        }
        if outcome.no_move() {
            no_moves += 1;
        }
        let _ = writeln!(
            csv,
            "{trial},{},{},{},{}",
            outcome.hit as u8,
            if outcome.min_distance.is_finite() {
                format!("{:.6}", outcome.min_distance)
            } else {
                "inf".into()
            },
            outcome
                .start_time
                .map(|t| format!("{t:.6}"))
                .unwrap_or_default(),
            outcome.replans
        );
    }
    eprintln!("{hits}/{} hits ({} declined)", args.trials, no_moves);
    write_output(out, &csv)
}

fn randn(rng: &mut ChaCha8Rng) -> f64 {
    rand_distr::StandardNormal.sample(rng)
}

fn run_exp(args: ExpArgs, seed: u64, out: Option<&Path>) -> crate::Result<()> {
    let study: StudyResult = match args.study {
        StudyCommand::Condnum { dof, n_max } => {
            let cfg = CondnumConfig {
                dof,
                n_max,
                ..CondnumConfig::default()
            };
            experiments::condnum_study(&cfg, seed)?
        }
        StudyCommand::Convergence { n_max, repetitions } => {
            let cfg = ConvergenceConfig {
                n_values: (1..=n_max).collect(),
                repetitions,
                ..ConvergenceConfig::default()
            };
            experiments::convergence_study(&cfg, seed)?
        }
        StudyCommand::Emcurve { iterations } => {
            let cfg = EmCurveConfig {
                iterations,
                ..EmCurveConfig::default()
            };
            experiments::em_curve_study(&cfg, seed)?
        }
        StudyCommand::Latency { reps } => {
            let sizes = [(5, 7), (5, 14), (5, 28), (5, 42), (5, 56), (5, 70)];
            experiments::latency_bench(&sizes, reps, seed)?
        }
        StudyCommand::Bootstrap {
            trials_csv,
            prob,
            count,
            resamples,
            sample_size,
        } => {
            let outcomes = match trials_csv {
                Some(path) => read_hit_column(&path)?,
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(17));
                    (0..count).map(|_| rng.random_bool(prob)).collect()
                }
            };
            let result: BootstrapResult =
                experiments::bootstrap_rates(&outcomes, resamples, sample_size, seed)?;
            eprintln!(
                "bootstrap mean rate {:.4}, central 90% interval [{:.4}, {:.4}]",
                result.mean, result.interval90.0, result.interval90.1
            );
            result.to_study(seed)
        }
    };
    let rendered = if args.plot_data {
        study.to_plot_data()
    } else {
        study.to_csv()
    };
    write_output(out, &rendered)
}

fn read_hit_column(path: &Path) -> crate::Result<Vec<bool>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: 1,
        column: 0,
        message: e.to_string(),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: 1,
            column: 0,
            message: e.to_string(),
        })?
        .clone();
    let hit_idx = headers
        .iter()
        .position(|h| h == "hit")
        .ok_or_else(|| CliError::Input(format!("{} has no 'hit' column", path.display())))?;
    let mut outcomes = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            column: 0,
            message: e.to_string(),
        })?;
        outcomes.push(record.get(hit_idx) == Some("1"));
    }
    Ok(outcomes)
}
