//! Sweep execution and result files.
//!
//! Output directory layout:
//!
//! ```text
//! config.toml          the resolved configuration of the run
//! results.csv          one row per point, columns as in `PointResult`
//! summary.json         points with timings plus per-setting means over seeds
//! points/<id>.json     completion marker of one point (used by --resume)
//! models/<id>.rfm      trained model of one point
//! ```
//!
//! `results.csv` and the model files carry no timing, so two runs of the
//! same configuration produce byte-identical copies of them.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rfelm_core::data::split_train_val;
use rfelm_core::expansion::ExpansionPlan;
use rfelm_core::nonlinearity::ActivationKind;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, ExperimentConfig};
use crate::error::FileError;
use crate::mnist::{load_mnist, DataError, Mnist};
use crate::model_file::export_model;
use crate::pipeline::{run_point, seed_features, Inputs, PointSettings};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    File(#[from] FileError),
    #[error("{context}: {source}")]
    Core { context: String, source: rfelm_core::Error },
}

impl RunError {
    /// True for problems with the inputs of a run rather than the run itself.
    pub fn is_config(&self) -> bool {
        matches!(self, RunError::Config(_) | RunError::Data(DataError::Missing { .. }))
    }
}

/// One CSV row. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub id: String,
    pub seed: u64,
    pub sigma_cco: f64,
    pub activation: String,
    #[serde(rename = "L")]
    pub l: usize,
    pub factor_e: usize,
    pub bits_beta: u32,
    pub theta: f64,
    pub status: String,
    #[serde(rename = "M")]
    pub m: Option<usize>,
    #[serde(rename = "M_over_L")]
    pub m_over_l: Option<f64>,
    pub a_reg: Option<f64>,
    pub th: Option<f64>,
    pub val_accuracy: Option<f64>,
    pub test_error_pct: Option<f64>,
    pub float_test_error_pct: Option<f64>,
    pub conversions: Option<usize>,
    pub accumulations: Option<u64>,
    pub centering_subtractions: Option<u64>,
    pub first_stage_fj: Option<u128>,
    pub second_stage_fj: Option<u128>,
    pub total_fj: Option<u128>,
    pub tristate_multiplications: Option<u64>,
    pub error: Option<String>,
}

/// Completion marker: the row plus what is deliberately kept out of it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointRecord {
    pub result: PointResult,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Aggregate {
    pub sigma_cco: f64,
    pub activation: String,
    #[serde(rename = "L")]
    pub l: usize,
    pub bits_beta: u32,
    pub theta: f64,
    pub seeds: usize,
    pub mean_test_error_pct: f64,
    pub mean_m_over_l: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub points: Vec<PointRecord>,
    pub aggregates: Vec<Aggregate>,
    pub failed: usize,
    pub wall_seconds: f64,
}

impl Summary {
    pub fn results(&self) -> impl Iterator<Item = &PointResult> {
        self.points.iter().map(|p| &p.result)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Reuse completed points found in the output directory.
    pub resume: bool,
    /// Already-loaded data; otherwise read from `data_dir`.
    pub data: Option<Mnist>,
}

struct Point {
    seed: u64,
    sigma_cco: f64,
    l: usize,
    kind: ActivationKind,
    bits_beta: u32,
    theta: f64,
}

impl Point {
    fn id(&self) -> String {
        format!("s{}_cco{}_L{}_{}_b{}_t{}", self.seed, self.sigma_cco, self.l, self.kind.name(), self.bits_beta, self.theta)
    }

    fn pending(&self, per: usize, status: &str) -> PointResult {
        PointResult {
            id: self.id(),
            seed: self.seed,
            sigma_cco: self.sigma_cco,
            activation: self.kind.name().into(),
            l: self.l,
            factor_e: self.l / per,
            bits_beta: self.bits_beta,
            theta: self.theta,
            status: status.into(),
            m: None,
            m_over_l: None,
            a_reg: None,
            th: None,
            val_accuracy: None,
            test_error_pct: None,
            float_test_error_pct: None,
            conversions: None,
            accumulations: None,
            centering_subtractions: None,
            first_stage_fj: None,
            second_stage_fj: None,
            total_fj: None,
            tristate_multiplications: None,
            error: None,
        }
    }
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T, RunError> {
    r.map_err(|e| FileError::io(path, e).into())
}

fn core_err(context: impl Into<String>) -> impl FnOnce(rfelm_core::Error) -> RunError {
    let context = context.into();
    move |source| RunError::Core { context, source }
}

fn marker_path(out: &Path, id: &str) -> PathBuf {
    out.join("points").join(format!("{id}.json"))
}

fn read_marker(path: &Path) -> Option<PointRecord> {
    serde_json::from_slice(&fs::read(path).ok()?).ok()
}

/// Runs every point of `cfg` in order and writes the output directory.
pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Summary, RunError> {
    cfg.validate()?;
    let started = Instant::now();
    let out = &cfg.out_dir;
    io(out, fs::create_dir_all(out.join("points")))?;
    if cfg.save_models {
        io(out, fs::create_dir_all(out.join("models")))?;
    }
    io(out, fs::write(out.join("config.toml"), cfg.to_toml()))?;

    let kinds = cfg.activation_kinds()?;
    let encoding = cfg.target_encoding()?;
    let centering = cfg.core.centering()?;
    let quant = cfg.core.quant();
    let per = centering.outputs_per_conversion(cfg.core.n_phys);
    let max_l = *cfg.features.iter().max().unwrap();
    let plan = ExpansionPlan::new(cfg.core.d_phys, cfg.core.n_phys, max_l / per, centering).map_err(core_err("plan"))?;

    let mut points = Vec::new();
    for &seed in &cfg.seeds {
        for &sigma_cco in &cfg.core.sigma_cco {
            let mut group = Vec::new();
            for &l in &cfg.features {
                for &kind in &kinds {
                    for &bits_beta in &cfg.bits_beta {
                        for &theta in &cfg.theta {
                            group.push(Point { seed, sigma_cco, l, kind, bits_beta, theta });
                        }
                    }
                }
            }
            points.push(group);
        }
    }

    let mut data: Option<(Inputs, Inputs)> = None;
    let mut supplied = opts.data;
    let mut records = Vec::new();
    for group in points {
        let mut done: Vec<Option<PointRecord>> = group
            .iter()
            .map(|p| if opts.resume { read_marker(&marker_path(out, &p.id())) } else { None })
            .collect();
        if done.iter().all(Option::is_some) {
            log::info!("seed {} sigma_cco {}: all points already complete", group[0].seed, group[0].sigma_cco);
            records.extend(done.into_iter().flatten());
            continue;
        }
        if data.is_none() {
            let mnist = match supplied.take() {
                Some(m) => m,
                None => load_mnist(&cfg.data_dir)?,
            };
            let train = cfg.train_limit.map_or(mnist.train.clone(), |n| mnist.train.truncated(n));
            let test = cfg.test_limit.map_or(mnist.test.clone(), |n| mnist.test.truncated(n));
            let width = cfg.core.d_phys;
            data = Some((
                Inputs::new(&train, &quant, width).map_err(core_err("train inputs"))?,
                Inputs::new(&test, &quant, width).map_err(core_err("test inputs"))?,
            ));
        }
        let (train_inputs, test_inputs) = data.as_ref().unwrap();
        let (seed, sigma_cco) = (group[0].seed, group[0].sigma_cco);
        let t = Instant::now();
        let mismatch = cfg.core.mismatch(seed, sigma_cco);
        let features = match seed_features(mismatch, quant, plan, train_inputs, test_inputs) {
            Ok(f) => f,
            Err(e) => {
                log::warn!("seed {seed} sigma_cco {sigma_cco}: no features: {e}");
                for (p, prior) in group.iter().zip(done) {
                    let result = prior.map(|r| r.result).unwrap_or_else(|| PointResult {
                        error: Some(format!("features: {e}")),
                        ..p.pending(per, "failed")
                    });
                    let record = PointRecord { result, wall_seconds: 0.0 };
                    let marker = marker_path(out, &record.result.id);
                    io(&marker, fs::write(&marker, serde_json::to_vec_pretty(&record).expect("serializable")))?;
                    records.push(record);
                }
                continue;
            }
        };
        log::info!(
            "seed {seed} sigma_cco {sigma_cco}: {} features per image, full scale {:.3}, {:.1}s",
            plan.l_effective(),
            features.full_scale,
            t.elapsed().as_secs_f64()
        );
        let split = split_train_val(&train_inputs.labels, cfg.split.fit, cfg.split.validation, seed)
            .map_err(core_err("split"))?;

        for (p, prior) in group.iter().zip(done.iter_mut()) {
            if let Some(r) = prior.take() {
                records.push(r);
                continue;
            }
            let t = Instant::now();
            let settings = PointSettings {
                features: p.l,
                kind: p.kind,
                bits_beta: p.bits_beta,
                theta: p.theta,
                encoding,
                a_exponents: cfg.grid.a_exponents.clone(),
                th_exponents: cfg.grid.th_exponents(p.kind).to_vec(),
                float_reference: cfg.float_reference,
            };
            let id = p.id();
            let result = match run_point(&features, &split, &settings) {
                Ok(o) => {
                    if cfg.save_models {
                        export_model(&o.model, &out.join("models").join(format!("{id}.rfm")))?;
                    }
                    let m = o.model.mask.m_count();
                    PointResult {
                        m: Some(m),
                        m_over_l: Some(m as f64 / p.l as f64),
                        a_reg: Some(o.model.a_reg),
                        th: Some(o.model.activation.th),
                        val_accuracy: Some(o.search.best.accuracy()),
                        test_error_pct: Some(o.test.error_percent()),
                        float_test_error_pct: o.float_test_error,
                        conversions: Some(o.energy.conversions),
                        accumulations: Some(o.energy.accumulations),
                        centering_subtractions: Some(o.energy.centering_subtractions),
                        first_stage_fj: Some(o.energy.first_stage.0),
                        second_stage_fj: Some(o.energy.second_stage.0),
                        total_fj: Some(o.energy.total.0),
                        tristate_multiplications: (p.kind == ActivationKind::Tristate).then_some(o.test.ops.multiplications),
                        ..p.pending(per, "ok")
                    }
                }
                Err(e) => {
                    log::warn!("{id} failed: {e}");
                    PointResult { error: Some(e.to_string()), ..p.pending(per, "failed") }
                }
            };
            let record = PointRecord { result, wall_seconds: t.elapsed().as_secs_f64() };
            match (record.result.m, record.result.test_error_pct) {
                (Some(m), Some(err)) => log::info!("{id}: M={m} test error {err:.2}% ({:.1}s)", record.wall_seconds),
                _ => log::info!("{id}: {} ({:.1}s)", record.result.status, record.wall_seconds),
            }
            let marker = marker_path(out, &id);
            io(&marker, fs::write(&marker, serde_json::to_vec_pretty(&record).expect("serializable")))?;
            records.push(record);
        }
    }

    write_csv(&out.join("results.csv"), records.iter().map(|r| &r.result))?;
    let failed = records.iter().filter(|r| r.result.status != "ok").count();
    let summary = Summary {
        name: cfg.name.clone(),
        aggregates: aggregate(&records),
        points: records,
        failed,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    let path = out.join("summary.json");
    io(&path, fs::write(&path, serde_json::to_vec_pretty(&summary).expect("serializable")))?;
    Ok(summary)
}

pub fn write_csv<'a>(path: &Path, rows: impl Iterator<Item = &'a PointResult>) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| FileError::format(path, 0, e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| FileError::format(path, 0, e.to_string()))?;
    }
    io(path, w.flush())
}

fn aggregate(records: &[PointRecord]) -> Vec<Aggregate> {
    let mut out: Vec<Aggregate> = Vec::new();
    let mut sums: Vec<(f64, f64)> = Vec::new();
    for r in records.iter().map(|r| &r.result).filter(|r| r.status == "ok") {
        let pos = out.iter().position(|a| {
            a.sigma_cco == r.sigma_cco && a.activation == r.activation && a.l == r.l && a.bits_beta == r.bits_beta && a.theta == r.theta
        });
        let k = pos.unwrap_or_else(|| {
            out.push(Aggregate {
                sigma_cco: r.sigma_cco,
                activation: r.activation.clone(),
                l: r.l,
                bits_beta: r.bits_beta,
                theta: r.theta,
                seeds: 0,
                mean_test_error_pct: 0.0,
                mean_m_over_l: 0.0,
            });
            sums.push((0.0, 0.0));
            out.len() - 1
        });
        out[k].seeds += 1;
        sums[k].0 += r.test_error_pct.unwrap_or(f64::NAN);
        sums[k].1 += r.m_over_l.unwrap_or(f64::NAN);
    }
    for (a, (err, ratio)) in out.iter_mut().zip(sums) {
        a.mean_test_error_pct = err / a.seeds as f64;
        a.mean_m_over_l = ratio / a.seeds as f64;
    }
    out
}
