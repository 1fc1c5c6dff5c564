use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use rul_core::dataio::{
    gen_synthetic, load_checkpoint, load_dataset, load_pronostia_bearing, load_record, save_checkpoint, save_dataset,
    save_record, BearingMeta, Checkpoint, PronostiaLayout, SyntheticConfig,
};
use rul_core::experiment::{build_split, compare_losses, mean_baseline_mae, SyntheticSplitConfig};
use rul_core::features::{
    build_dataset, detect_fpt_record, featurize_record, preprocess_record, ChannelPolicy, DatasetConfig, FptConfig,
    ImageConfig, LabeledSample, PreprocessConfig,
};
use rul_core::model::{Model, ModelConfig};
use rul_core::traineval::{evaluate, train_with, LossConfig, LossKind, Metrics, TrainConfig};

use crate::args::*;
use crate::error::{CliError, Kind};
use crate::output::{Outputs, RunManifest};
use crate::svg::rul_plot;

/// Bookkeeping shared by all commands, turned into the manifest at the end.
#[derive(Default)]
pub struct Ctx {
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub configs: BTreeMap<String, serde_json::Value>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl Ctx {
    fn config(&mut self, name: &str, value: &impl Serialize) {
        self.configs.insert(name.into(), serde_json::to_value(value).expect("config serializes"));
    }

    fn timed<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings_ms.insert(phase.into(), start.elapsed().as_secs_f64() * 1e3);
        out
    }

    fn input(&mut self, p: &Path) {
        self.inputs.push(p.to_path_buf());
    }
}

fn json_pretty(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializes");
    s.push('\n');
    s
}

fn absolute(p: &Path) -> Result<PathBuf, CliError> {
    std::path::absolute(p).map_err(|e| CliError::io(p, e))
}

/// Rewrites every path in the invocation as an absolute path so a manifest
/// can be replayed from any working directory.
fn absolutize(cmd: &mut Command) -> Result<(), CliError> {
    let out = absolute(cmd.out_dir())?;
    cmd.set_out_dir(out);
    match cmd {
        Command::Ingest(a) => a.dir = absolute(&a.dir)?,
        Command::Fpt(a) => a.record = absolute(&a.record)?,
        Command::Featurize(a) => {
            for r in &mut a.record {
                *r = absolute(r)?;
            }
        }
        Command::Train(a) => {
            a.data = absolute(&a.data)?;
            if let Some(v) = &mut a.val {
                *v = absolute(v)?;
            }
        }
        Command::Eval(a) => {
            a.checkpoint = absolute(&a.checkpoint)?;
            a.data = absolute(&a.data)?;
        }
        Command::Predict(a) => {
            a.checkpoint = absolute(&a.checkpoint)?;
            a.data = absolute(&a.data)?;
        }
        Command::Replay(a) => a.manifest = absolute(&a.manifest)?,
        Command::Synth(_) | Command::ExpLoss(_) => {}
    }
    Ok(())
}

pub fn execute(mut cmd: Command) -> Result<(), CliError> {
    if let Command::Replay(r) = cmd {
        let manifest = RunManifest::load(&r.manifest)?;
        let mut inner = manifest.invocation;
        if matches!(inner, Command::Replay(_)) {
            return Err(CliError::usage("a manifest never records a replay"));
        }
        inner.set_out_dir(r.out_dir);
        return execute(inner);
    }
    absolutize(&mut cmd)?;
    let mut out = Outputs::new(cmd.out_dir())?;
    let mut ctx = Ctx::default();
    let start = Instant::now();
    match &cmd {
        Command::Synth(a) => synth(a, &mut out, &mut ctx)?,
        Command::Ingest(a) => ingest(a, &mut out, &mut ctx)?,
        Command::Fpt(a) => fpt(a, &mut out, &mut ctx)?,
        Command::Featurize(a) => featurize(a, &mut out, &mut ctx)?,
        Command::Train(a) => train_cmd(a, &mut out, &mut ctx)?,
        Command::Eval(a) => eval(a, &mut out, &mut ctx)?,
        Command::Predict(a) => predict(a, &mut out, &mut ctx)?,
        Command::ExpLoss(a) => exp_loss(a, &mut out, &mut ctx)?,
        Command::Replay(_) => unreachable!("handled above"),
    }
    ctx.timings_ms.insert("total".into(), start.elapsed().as_secs_f64() * 1e3);
    let artifacts = out.names();
    let manifest = RunManifest {
        tool: "rul".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        output_dir: cmd.out_dir().clone(),
        invocation: cmd,
        seed: ctx.seed,
        inputs: ctx.inputs,
        artifacts,
        configs: ctx.configs,
        timings_ms: ctx.timings_ms,
    };
    out.write("manifest.json", json_pretty(&manifest))?;
    out.commit();
    Ok(())
}

fn synthetic_config(a: &SyntheticArgs, seed: u64) -> SyntheticConfig {
    SyntheticConfig {
        n_snapshots: a.snapshots,
        samples_per_snapshot: a.samples,
        sample_rate_hz: a.sample_rate,
        healthy_kurtosis_level: a.healthy_kurtosis,
        fault_onset_index: a.onset,
        fault_growth_rate: a.growth,
        noise_std: a.noise,
        impulse_rate_hz: a.impulse_rate,
        resonance_hz: a.resonance,
        decay_s: a.decay,
        seed,
    }
}

fn synth(a: &SynthArgs, out: &mut Outputs, ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = synthetic_config(&a.synthetic, a.seed);
    ctx.seed = Some(a.seed);
    ctx.config("synthetic", &cfg);
    let rec = ctx.timed("generate", || gen_synthetic(&cfg))?;
    let path = out.path("record.rrec");
    save_record(&path, &rec)?;
    println!("record {}: {} snapshots x {} samples -> {}", rec.bearing_id, rec.len(), rec.samples_per_snapshot(), path.display());
    Ok(())
}

fn ingest(a: &IngestArgs, out: &mut Outputs, ctx: &mut Ctx) -> Result<(), CliError> {
    let layout = PronostiaLayout {
        file_prefix: a.prefix.clone(),
        horizontal_column: a.h_col,
        vertical_column: a.v_col,
        ..PronostiaLayout::default()
    };
    ctx.input(&a.dir);
    ctx.config("layout", &layout);
    let rec = ctx.timed("load", || load_pronostia_bearing(&a.dir, &layout))?;
    let path = out.path("record.rrec");
    save_record(&path, &rec)?;
    println!("record {}: {} snapshots x {} samples -> {}", rec.bearing_id, rec.len(), rec.samples_per_snapshot(), path.display());
    Ok(())
}

fn fpt_config(a: &OnsetArgs, record_len: usize) -> FptConfig {
    let mut cfg = FptConfig::for_record_len(record_len);
    if let Some(b) = a.baseline {
        cfg.baseline_count = b;
    }
    cfg.consecutive_required = a.consecutive;
    cfg.sigma_multiplier = a.sigma;
    cfg.channel_policy = match a.channel {
        ChannelArg::Horizontal => ChannelPolicy::Horizontal,
        ChannelArg::Vertical => ChannelPolicy::Vertical,
        ChannelArg::Either => ChannelPolicy::Either,
    };
    cfg
}

fn fpt(a: &FptArgs, out: &mut Outputs, ctx: &mut Ctx) -> Result<(), CliError> {
    ctx.input(&a.record);
    let rec = load_record(&a.record)?;
    let cfg = fpt_config(&a.onset, rec.len());
    ctx.config("fpt", &cfg);
    let report = ctx.timed("detect", || detect_fpt_record(&rec, &cfg))?;
    out.write("fpt.json", json_pretty(&report))?;
    let mut csv = String::from("snapshot,horizontal,vertical\n");
    for (i, (h, v)) in report.horizontal.iter().zip(&report.vertical).enumerate() {
        csv.push_str(&format!("{i},{h},{v}\n"));
    }
    out.write("kurtosis.csv", csv)?;
    match report.fpt {
        Some(f) => println!("fpt: {f}"),
        None => println!("fpt: none"),
    }
    Ok(())
}

fn dataset_config(a: &ImageArgs) -> DatasetConfig {
    DatasetConfig {
        window_size: a.window,
        stride: a.stride,
        image: ImageConfig { level: a.level, side: a.image_side },
        preprocess: PreprocessConfig {
            wavelet_order: a.wavelet_order,
            denoise_levels: a.denoise_levels,
            savgol_window: a.savgol_window,
            savgol_order: a.savgol_order,
        },
    }
}

fn featurize(a: &FeaturizeArgs, out: &mut Outputs, ctx: &mut Ctx) -> Result<(), CliError> {
    if a.fpt.is_some() && a.record.len() != 1 {
        return Err(CliError::usage("--fpt applies to a single --record"));
    }
    let cfg = dataset_config(&a.image);
    ctx.config("dataset", &cfg);
    let mut samples = Vec::new();
    let mut bearings = Vec::new();
    let start = Instant::now();
    for path in &a.record {
        ctx.input(path);
        let rec = load_record(path)?;
        let fpt_cfg = fpt_config(&a.onset, rec.len());
        ctx.config(&format!("fpt.{}", rec.bearing_id), &fpt_cfg);
        let (fpt, part) = match a.fpt {
            Some(f) => (f, build_dataset(&preprocess_record(&rec, &cfg.preprocess)?, f, &cfg)?),
            None => {
                let f = featurize_record(&rec, &fpt_cfg, &cfg)?;
                (f.fpt, f.samples)
            }
        };
        println!("{}: fpt {fpt}, {} windows", rec.bearing_id, part.len());
        bearings.push(BearingMeta { bearing_id: rec.bearing_id.clone(), fpt: Some(fpt) });
        samples.extend(part);
    }
    ctx.timings_ms.insert("featurize".into(), start.elapsed().as_secs_f64() * 1e3);
    let path = out.path("dataset.rds");
    out.path("dataset.rds.json");
    save_dataset(&path, &samples, &bearings, Some(&cfg))?;
    println!("{} samples -> {}", samples.len(), path.display());
    Ok(())
}

fn load_samples(path: &Path, ctx: &mut Ctx) -> Result<Vec<LabeledSample>, CliError> {
    ctx.input(path);
    Ok(load_dataset(path)?.0)
}

fn train_cmd(a: &TrainArgs, out: &mut Outputs, ctx: &mut Ctx) -> Result<(), CliError> {
    let data = load_samples(&a.data, ctx)?;
    let val = a.val.as_ref().map(|p| load_samples(p, ctx)).transpose()?;
    let base = match a.preset {
        PresetArg::Full => ModelConfig::full(),
        PresetArg::Desk => ModelConfig::desk(),
    };
    let model_cfg = ModelConfig { dropout_p: a.dropout, ..base };
    if let Some(s) = data.first() {
        if s.hor.side != model_cfg.image_side {
            return Err(CliError::new(
                Kind::Data,
                "InputShape",
                format!("dataset images are {0}x{0}, the preset expects {1}x{1}", s.hor.side, model_cfg.image_side),
            ));
        }
    }
    let train_cfg = TrainConfig {
        learning_rate: a.lr,
        batch_size: a.batch,
        epochs: a.epochs,
        seed: a.seed,
        shuffle: !a.no_shuffle,
        ..TrainConfig::full()
    };
    let loss_cfg = LossConfig {
        kind: match a.loss {
            LossArg::Mse => LossKind::Mse,
            LossArg::Custom => LossKind::Custom,
        },
        lambda: a.lambda,
    };
    ctx.seed = Some(a.seed);
    ctx.config("model", &model_cfg);
    ctx.config("train", &train_cfg);
    ctx.config("loss", &loss_cfg);
    let outcome = ctx.timed("train", || {
        train_with(&data, &model_cfg, &train_cfg, &loss_cfg, val.as_deref(), |r| match r.val_mae {
            Some(v) => println!("epoch {:>4}  loss {:.6}  val_mae {:.6}", r.epoch, r.train_loss, v),
            None => println!("epoch {:>4}  loss {:.6}", r.epoch, r.train_loss),
        })
    })?;
    let ckpt = Checkpoint {
        model: model_cfg,
        params: outcome.params,
        extra: serde_json::json!({ "train": train_cfg, "loss": loss_cfg, "steps": outcome.steps }),
    };
    let path = out.path("checkpoint.ckpt");
    save_checkpoint(&path, &ckpt)?;
    out.write("history.csv", outcome.history.to_csv())?;
    println!("checkpoint -> {}", path.display());
    Ok(())
}

fn predictions(a_ckpt: &Path, a_data: &Path, ctx: &mut Ctx) -> Result<rul_core::traineval::PredictionBatch, CliError> {
    ctx.input(a_ckpt);
    let ckpt = load_checkpoint(a_ckpt)?;
    let data = load_samples(a_data, ctx)?;
    ctx.config("model", &ckpt.model);
    let model = Model::new(ckpt.model.clone())?;
    let batch = ctx.timed("predict", || evaluate(&model, &ckpt.params, &data))?;
    if let Some(i) = batch.preds().iter().position(|p| !p.is_finite()) {
        return Err(CliError::new(Kind::Numeric, "NonFinitePrediction", format!("prediction {i} is not finite")));
    }
    Ok(batch)
}

fn eval(a: &EvalArgs, out: &mut Outputs, ctx: &mut Ctx) -> Result<(), CliError> {
    let batch = predictions(&a.checkpoint, &a.data, ctx)?;
    let metrics = Metrics::of(&batch);
    out.write("metrics.json", json_pretty(&metrics))?;
    println!(
        "n {}  mae {:.6}  score_mean {:.6}  score_sum {:.6}  late_fraction {:.4}",
        metrics.n, metrics.mae, metrics.score_mean, metrics.score_sum, metrics.late_fraction
    );
    Ok(())
}

fn predict(a: &PredictArgs, out: &mut Outputs, ctx: &mut Ctx) -> Result<(), CliError> {
    let batch = predictions(&a.checkpoint, &a.data, ctx)?;
    let mut csv = String::from("window_index,true_rul,pred_rul,error\n");
    for (i, (p, t)) in batch.preds().iter().zip(batch.targets()).enumerate() {
        csv.push_str(&format!("{i},{t},{p},{}\n", p - t));
    }
    out.write("predictions.csv", csv)?;
    let title = format!("Predicted vs. true RUL ({} windows)", batch.len());
    out.write("predictions.svg", rul_plot(batch.targets(), batch.preds(), &title))?;
    println!("{} predictions written", batch.len());
    Ok(())
}

#[derive(Serialize)]
struct ExpLossReport {
    #[serde(flatten)]
    comparison: rul_core::experiment::LossComparison,
    mean_baseline_mae: f64,
    train_samples: usize,
    test_samples: usize,
}

fn exp_loss(a: &ExpLossArgs, out: &mut Outputs, ctx: &mut Ctx) -> Result<(), CliError> {
    let split_cfg = SyntheticSplitConfig {
        train_seeds: a.train_bearings.clone(),
        test_seeds: a.test_bearings.clone(),
        ..SyntheticSplitConfig::default()
    };
    let model_cfg = ModelConfig { dropout_p: a.dropout, ..ModelConfig::desk() };
    let train_cfg = TrainConfig {
        learning_rate: a.lr,
        batch_size: a.batch,
        epochs: a.epochs,
        seed: a.seed,
        ..TrainConfig::desk()
    };
    ctx.seed = Some(a.seed);
    ctx.config("split", &split_cfg);
    ctx.config("model", &model_cfg);
    ctx.config("train", &train_cfg);
    let split = ctx.timed("data", || build_split(&split_cfg))?;
    let comparison = ctx.timed("train", || compare_losses(&split, &model_cfg, &train_cfg, a.lambda))?;
    let report = ExpLossReport {
        mean_baseline_mae: mean_baseline_mae(&split.train, &split.test)?,
        train_samples: split.train.len(),
        test_samples: split.test.len(),
        comparison,
    };
    out.write("comparison.json", json_pretty(&report))?;
    let c = &report.comparison;
    println!("loss     mae       score_mean  late_fraction");
    println!("mse      {:.6}  {:.6}    {:.4}", c.mse.mae, c.mse.score_mean, c.mse.late_fraction);
    println!("custom   {:.6}  {:.6}    {:.4}", c.custom.mae, c.custom.score_mean, c.custom.late_fraction);
    println!("delta    {:+.6} {:+.6}   {:+.4}", c.delta_mae, c.delta_score_mean, c.delta_late_fraction);
    Ok(())
}
