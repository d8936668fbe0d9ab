use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rfelm::core_file::{load_core, save_core, CoreFile};
use rfelm::experiment::{run_experiment, RunOptions};
use rfelm::model_file::{header_len, import_model, model_file_size};
use rfelm::ExperimentConfig;
use rfelm_core::energy::{estimate_raw, EnergyParams};
use rfelm_core::expansion::count_weight_vectors;
use rfelm_core::hw_model::{sample_core, CenteringMode, MismatchSpec, QuantSpec, D_PHYS, N_PHYS};
use rfelm_core::trainer::evaluate;
use rfelm_core::{Labeled, Test};

/// Exit codes: 0 success, 1 run failures, 2 configuration errors.
#[derive(Parser)]
#[command(name = "rfelm", version, about = "Random-feature ELM simulator for MNIST")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep from a config file or a preset.
    Run(RunArgs),
    /// Print a preset configuration as TOML.
    ShowConfig {
        #[arg(long, conflicts_with = "smoke")]
        table1: bool,
        #[arg(long)]
        smoke: bool,
    },
    /// Sample a core and save it as TOML.
    SampleCore {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0.6)]
        sigma_w: f64,
        #[arg(long, default_value_t = 0.0)]
        sigma_cco: f64,
        /// Also store the explicit weights and gains.
        #[arg(long)]
        weights: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Describe a saved core file.
    ShowCore { path: PathBuf },
    /// Energy per classification.
    Energy {
        /// Raw virtual neurons evaluated.
        #[arg(long)]
        neurons: usize,
        /// Cognizant neurons.
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value = "pairwise")]
        centering: String,
        #[arg(long)]
        json: bool,
    },
    /// Number of distinct weight vectors a D x N mirror array can supply.
    CountWeights { d: usize, n: usize },
    /// Print a model file's header and size accounting.
    InspectModel { path: PathBuf },
    /// Score a saved model on the MNIST test set, regenerating its features.
    Evaluate {
        model: PathBuf,
        #[arg(long, default_value = "data/mnist")]
        data_dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, conflicts_with_all = ["table1", "smoke"])]
    config: Option<PathBuf>,
    /// The three-seed L = 128/640/1280 grid for both activations.
    #[arg(long, conflicts_with = "smoke")]
    table1: bool,
    /// A single small point.
    #[arg(long)]
    smoke: bool,
    /// Replace the seed list.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Keep only these feature counts.
    #[arg(long = "features")]
    features: Vec<usize>,
    /// Keep only these activations.
    #[arg(long = "activation")]
    activations: Vec<String>,
    /// Replace the CCO gain spread list.
    #[arg(long = "sigma-cco")]
    sigma_cco: Vec<f64>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skip points with a completion marker in the output directory.
    #[arg(long)]
    resume: bool,
}

enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Run(e.into())
    }
}

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn resolve_config(a: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match (&a.config, a.table1, a.smoke) {
        (Some(p), _, _) => ExperimentConfig::load(p).map_err(config_err)?,
        (None, true, _) => ExperimentConfig::table1(),
        (None, _, true) => ExperimentConfig::smoke(),
        _ => return Err(config_err(anyhow::anyhow!("give --config, --table1 or --smoke"))),
    };
    if !a.seeds.is_empty() {
        cfg.seeds = a.seeds.clone();
    }
    if !a.features.is_empty() {
        cfg.features.retain(|l| a.features.contains(l));
    }
    if !a.activations.is_empty() {
        cfg.activations.retain(|k| a.activations.contains(k));
    }
    if !a.sigma_cco.is_empty() {
        cfg.core.sigma_cco = a.sigma_cco.clone();
    }
    if let Some(d) = &a.data_dir {
        cfg.data_dir = d.clone();
    }
    if let Some(o) = &a.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate().map_err(config_err)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Run(a) => {
            let cfg = resolve_config(&a)?;
            let summary = match run_experiment(&cfg, RunOptions { resume: a.resume, data: None }) {
                Ok(s) => s,
                Err(e) if e.is_config() => return Err(config_err(e)),
                Err(e) => return Err(e.into()),
            };
            for agg in &summary.aggregates {
                println!(
                    "{:<9} L={:<5} b={} sigma_cco={} theta={}: error {:.2}% M/L {:.3} over {} seed(s)",
                    agg.activation, agg.l, agg.bits_beta, agg.sigma_cco, agg.theta, agg.mean_test_error_pct, agg.mean_m_over_l, agg.seeds
                );
            }
            println!("results in {}", cfg.out_dir.join("results.csv").display());
            if summary.failed > 0 {
                eprintln!("{} point(s) failed", summary.failed);
            }
            Ok(summary.failed == 0)
        }
        Command::ShowConfig { table1: _, smoke } => {
            let cfg = if smoke { ExperimentConfig::smoke() } else { ExperimentConfig::table1() };
            print!("{}", cfg.to_toml());
            Ok(true)
        }
        Command::SampleCore { seed, sigma_w, sigma_cco, weights, out } => {
            let spec = MismatchSpec { sigma_w, sigma_cco, seed };
            let core = sample_core(&spec, D_PHYS, N_PHYS, QuantSpec::default()).map_err(config_err)?;
            save_core(&out, &CoreFile::describe(&spec, &core, weights))?;
            println!("wrote {}", out.display());
            Ok(true)
        }
        Command::ShowCore { path } => {
            let file = load_core(&path)?;
            let core = file.build().with_context(|| format!("building core from {}", path.display()))?;
            let w = core.weights();
            let mean = w.iter().sum::<f64>() / w.len() as f64;
            println!("seed {} sigma_w {} sigma_cco {}", file.seed, file.sigma_w, file.sigma_cco);
            println!("{} x {} mirrors, mean weight {mean:.4}", core.d_phys(), core.n_phys());
            println!("explicit weights stored: {}", file.weights.is_some());
            Ok(true)
        }
        Command::Energy { neurons, m, classes, centering, json } => {
            let mode: CenteringMode = centering.parse().map_err(config_err)?;
            let r = estimate_raw(neurons, D_PHYS, m, classes, &EnergyParams::default(), mode);
            if json {
                let v = serde_json::json!({
                    "neurons": r.l_total,
                    "conversions": r.conversions,
                    "m_cognizant": r.m_cognizant,
                    "classes": r.classes,
                    "accumulations": r.accumulations,
                    "centering_subtractions": r.centering_subtractions,
                    "first_stage_fj": r.first_stage.0.to_string(),
                    "second_stage_fj": r.second_stage.0.to_string(),
                    "total_fj": r.total.0.to_string(),
                    "per_analog_mac_fj": r.e_per_analog_mac.0.to_string(),
                    "digital_mac_equivalent_fj": r.digital_mac_equivalent.0.to_string(),
                });
                println!("{}", serde_json::to_string_pretty(&v)?);
            } else {
                println!("conversions       {}", r.conversions);
                println!("first stage       {} ({:.3} uJ)", r.first_stage, r.first_stage.as_uj());
                println!(
                    "second stage      {} ({:.3} nJ; {} accumulations + {} centering subtractions)",
                    r.second_stage,
                    r.second_stage.as_nj(),
                    r.accumulations,
                    r.centering_subtractions
                );
                println!("total             {} ({:.3} uJ)", r.total, r.total.as_uj());
                println!("per analog MAC    {}", r.e_per_analog_mac);
                println!("as digital MACs   {} ({:.3} uJ)", r.digital_mac_equivalent, r.digital_mac_equivalent.as_uj());
            }
            Ok(true)
        }
        Command::CountWeights { d, n } => {
            if d == 0 || n == 0 {
                return Err(config_err(anyhow::anyhow!("dimensions must be positive")));
            }
            println!("{}", count_weight_vectors(d, n));
            Ok(true)
        }
        Command::InspectModel { path } => {
            let model = import_model(&path)?;
            let size = std::fs::metadata(&path)?.len();
            let b = &model.beta;
            println!("activation {} th {}", model.activation.kind.name(), model.activation.th);
            println!("L {} M {} classes {} bits {}", model.mask.len(), b.rows(), b.cols(), b.bits());
            println!("A {} scale {} theta {}", model.a_reg, b.scale(), model.mask.theta());
            println!("core seed {} full scale {}", model.core_seed(), model.source.full_scale);
            println!(
                "file {size} bytes (expected {})",
                model_file_size(header_len(&model), model.mask.len(), b.rows(), b.cols(), b.bits())
            );
            Ok(true)
        }
        Command::Evaluate { model, data_dir } => {
            let model = import_model(&model)?;
            let mnist = match rfelm::load_mnist(&data_dir) {
                Ok(m) => m,
                Err(e @ rfelm::DataError::Missing { .. }) => return Err(config_err(e)),
                Err(e) => return Err(e.into()),
            };
            let s = &model.source;
            let core = sample_core(&s.mismatch, s.plan.d_phys(), s.plan.n_phys(), s.quant)?;
            // full scale is stored, so only the test features are needed
            let inputs = rfelm::pipeline::Inputs::new(&mnist.test, &s.quant, s.plan.d_phys())?;
            let features = rfelm::pipeline::expand_parallel(&core, &inputs, &s.plan, s.full_scale)?;
            let test: Labeled<Test> = Labeled::new(features, inputs.labels.clone())?;
            let e = evaluate(&model, &test)?;
            println!("test error {:.2}% ({} of {})", e.error_percent(), e.errors, e.total);
            println!(
                "ops: {} additions, {} subtractions, {} multiplications",
                e.ops.additions, e.ops.subtractions, e.ops.multiplications
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
