use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

/// Remaining-useful-life pipeline for rolling-bearing vibration data.
///
/// Every command writes its artifacts and a `manifest.json` into `--out-dir`.
/// Options may also come from a flat JSON object passed with `--config`,
/// whose keys are flag names; flags given on the command line win.
#[derive(Debug, Parser)]
#[command(name = "rul", version, args_override_self = true)]
pub struct Cli {
    /// Flat JSON file of default flag values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Generate a synthetic run-to-failure record.
    Synth(SynthArgs),
    /// Read a PRONOSTIA bearing folder into a record.
    Ingest(IngestArgs),
    /// Kurtosis series and degradation onset of a record.
    Fpt(FptArgs),
    /// Turn records into a labeled image dataset.
    Featurize(FeaturizeArgs),
    /// Train a model on a dataset.
    Train(TrainArgs),
    /// Metrics of a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Per-window predictions as CSV and an SVG plot.
    Predict(PredictArgs),
    /// Train twin models with MSE and the late-penalty loss and compare them.
    ExpLoss(ExpLossArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn out_dir(&self) -> &PathBuf {
        match self {
            Command::Synth(a) => &a.out_dir,
            Command::Ingest(a) => &a.out_dir,
            Command::Fpt(a) => &a.out_dir,
            Command::Featurize(a) => &a.out_dir,
            Command::Train(a) => &a.out_dir,
            Command::Eval(a) => &a.out_dir,
            Command::Predict(a) => &a.out_dir,
            Command::ExpLoss(a) => &a.out_dir,
            Command::Replay(a) => &a.out_dir,
        }
    }

    pub fn set_out_dir(&mut self, dir: PathBuf) {
        match self {
            Command::Synth(a) => a.out_dir = dir,
            Command::Ingest(a) => a.out_dir = dir,
            Command::Fpt(a) => a.out_dir = dir,
            Command::Featurize(a) => a.out_dir = dir,
            Command::Train(a) => a.out_dir = dir,
            Command::Eval(a) => a.out_dir = dir,
            Command::Predict(a) => a.out_dir = dir,
            Command::ExpLoss(a) => a.out_dir = dir,
            Command::Replay(a) => a.out_dir = dir,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SyntheticArgs {
    /// Number of snapshots in the record.
    #[arg(long, default_value_t = 100)]
    pub snapshots: usize,
    /// Samples per snapshot.
    #[arg(long, default_value_t = 2560)]
    pub samples: usize,
    #[arg(long, default_value_t = 25_600.0)]
    pub sample_rate: f64,
    /// Snapshot index where the fault starts.
    #[arg(long, default_value_t = 50)]
    pub onset: usize,
    /// Burst amplitude growth per snapshot, in units of the noise level.
    #[arg(long, default_value_t = 1.0)]
    pub growth: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    /// Kurtosis of the healthy noise (3 is Gaussian).
    #[arg(long, default_value_t = 3.0)]
    pub healthy_kurtosis: f64,
    #[arg(long, default_value_t = 120.0)]
    pub impulse_rate: f64,
    #[arg(long, default_value_t = 3_000.0)]
    pub resonance: f64,
    /// Decay time constant of each burst in seconds.
    #[arg(long, default_value_t = 5e-4)]
    pub decay: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct IngestArgs {
    /// Bearing folder holding acc_NNNNN.csv files.
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Zero-based column of the horizontal acceleration.
    #[arg(long, default_value_t = 4)]
    pub h_col: usize,
    /// Zero-based column of the vertical acceleration.
    #[arg(long, default_value_t = 5)]
    pub v_col: usize,
    #[arg(long, default_value = "acc_")]
    pub prefix: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelArg {
    Horizontal,
    Vertical,
    Either,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct OnsetArgs {
    /// Healthy reference length; defaults to min(40, 20% of the record).
    #[arg(long)]
    pub baseline: Option<usize>,
    /// Consecutive out-of-band snapshots that mark the onset.
    #[arg(long, default_value_t = 3)]
    pub consecutive: usize,
    /// Half-width of the healthy band in standard deviations.
    #[arg(long, default_value_t = 3.0)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value_t = ChannelArg::Horizontal)]
    pub channel: ChannelArg,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FptArgs {
    /// Record file written by `synth` or `ingest`.
    #[arg(long)]
    pub record: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub onset: OnsetArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ImageArgs {
    /// Snapshots per window.
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    #[arg(long, default_value_t = 5)]
    pub stride: usize,
    /// Wavelet packet depth.
    #[arg(long, default_value_t = 3)]
    pub level: usize,
    /// Image side in pixels.
    #[arg(long, default_value_t = 64)]
    pub image_side: usize,
    /// Daubechies order used for denoising and packets.
    #[arg(long, default_value_t = 5)]
    pub wavelet_order: usize,
    #[arg(long, default_value_t = 2)]
    pub denoise_levels: usize,
    #[arg(long, default_value_t = 5)]
    pub savgol_window: usize,
    #[arg(long, default_value_t = 2)]
    pub savgol_order: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FeaturizeArgs {
    /// Record files; repeat for several bearings.
    #[arg(long, required = true, value_delimiter = ',')]
    pub record: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Use this onset instead of detecting one (single record only).
    #[arg(long)]
    pub fpt: Option<usize>,
    #[command(flatten)]
    pub image: ImageArgs,
    #[command(flatten)]
    pub onset: OnsetArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetArg {
    Full,
    Desk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossArg {
    Mse,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Dataset file written by `featurize`.
    #[arg(long)]
    pub data: PathBuf,
    /// Optional validation dataset; its MAE is logged per epoch.
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Architecture preset; the dataset image side must match it (full 64, desk 32).
    #[arg(long, value_enum, default_value_t = PresetArg::Full)]
    pub preset: PresetArg,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dropout probability in the regression head.
    #[arg(long, default_value_t = 0.3)]
    pub dropout: f64,
    #[arg(long, value_enum, default_value_t = LossArg::Custom)]
    pub loss: LossArg,
    /// Weight of the late-prediction penalty.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Keep the dataset order fixed across epochs.
    #[arg(long)]
    pub no_shuffle: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ExpLossArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Seed for initialization, shuffling and dropout of both runs.
    #[arg(long, default_value_t = 3)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 2e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 4)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.0)]
    pub dropout: f64,
    /// Generator seeds of the training bearings.
    #[arg(long, value_delimiter = ',', default_values_t = vec![101u64, 102, 103])]
    pub train_bearings: Vec<u64>,
    /// Generator seeds of the held-out bearings.
    #[arg(long, value_delimiter = ',', default_values_t = vec![201u64])]
    pub test_bearings: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// manifest.json of an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Where to write the re-created artifacts.
    #[arg(long)]
    pub out_dir: PathBuf,
}
