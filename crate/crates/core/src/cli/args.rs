use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::data::SynthSpec;
use crate::error::{Error, Result};
use crate::eval::SweepAxis;
use crate::inference::CombineConfig;
use crate::model::AttentionAxis;

#[derive(Debug, Parser)]
#[command(name = "dfan", version, about = "Zero-shot learning head over precomputed visual features")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset and write it to disk.
    Synth(SynthArgs),
    /// Train a head and write its checkpoint; logs one JSON line per epoch.
    Train(RunArgs),
    /// Evaluate a checkpoint; prints a JSON report.
    Eval(RunArgs),
    /// Compare analytic and finite-difference gradients of the training loss.
    Gradcheck(GradcheckArgs),
    /// Train and evaluate every ablation variant; prints CSV.
    Ablate(AblateArgs),
    /// Re-score a checkpoint over a coefficient grid; prints CSV.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// `β1 = β2 = 0.5`.
    FineGrained,
    /// `β1 = 0, β2 = 1`.
    CoarseGrained,
}

impl Preset {
    pub fn betas(self) -> (f64, f64) {
        match self {
            Preset::FineGrained => CombineConfig::FINE_GRAINED,
            Preset::CoarseGrained => CombineConfig::COARSE_GRAINED,
        }
    }
}

/// Paths and hyperparameters shared by the data-driven commands. The same
/// keys (kebab-case) may be given in a JSON file via `--config`; flags win.
#[derive(Clone, Debug, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct RunArgs {
    /// JSON file with defaults for any of these options.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Directory written by `synth`; fills in any unset input path.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub features_train: Option<PathBuf>,
    #[arg(long)]
    pub features_test_seen: Option<PathBuf>,
    #[arg(long)]
    pub features_test_unseen: Option<PathBuf>,
    #[arg(long)]
    pub semantic: Option<PathBuf>,
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Ablation variant to train or evaluate.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub wd: Option<f64>,
    #[arg(long)]
    pub hidden1: Option<usize>,
    #[arg(long)]
    pub hidden2: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub attention_axis: Option<AttentionAxis>,
    /// Scale every region and global feature to unit L2 norm on load.
    #[arg(long)]
    pub normalize_input: bool,
    /// Output file for CSV tables (stdout otherwise).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    /// Applies `--config`, then fills unset paths from `--data-dir`.
    pub fn resolve(self) -> Result<Self> {
        let mut args = match &self.config {
            Some(path) => {
                let text = std::fs::read(path).map_err(|e| Error::io(path, e))?;
                let file: RunArgs = serde_json::from_slice(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                self.over(file)
            }
            None => self,
        };
        if let Some(dir) = args.data_dir.clone() {
            let fill = |slot: &mut Option<PathBuf>, name: &str| {
                slot.get_or_insert_with(|| dir.join(name));
            };
            fill(&mut args.features_train, SynthFiles::TRAIN);
            fill(&mut args.features_test_seen, SynthFiles::TEST_SEEN);
            fill(&mut args.features_test_unseen, SynthFiles::TEST_UNSEEN);
            fill(&mut args.semantic, SynthFiles::SEMANTIC);
            fill(&mut args.split, SynthFiles::SPLIT);
        }
        Ok(args)
    }

    /// Field-wise `self` where set, `base` otherwise.
    fn over(self, base: RunArgs) -> RunArgs {
        RunArgs {
            config: self.config,
            data_dir: self.data_dir.or(base.data_dir),
            features_train: self.features_train.or(base.features_train),
            features_test_seen: self.features_test_seen.or(base.features_test_seen),
            features_test_unseen: self.features_test_unseen.or(base.features_test_unseen),
            semantic: self.semantic.or(base.semantic),
            split: self.split.or(base.split),
            checkpoint: self.checkpoint.or(base.checkpoint),
            variant: self.variant.or(base.variant),
            lambda: self.lambda.or(base.lambda),
            preset: self.preset.or(base.preset),
            beta1: self.beta1.or(base.beta1),
            beta2: self.beta2.or(base.beta2),
            gamma: self.gamma.or(base.gamma),
            epochs: self.epochs.or(base.epochs),
            batch: self.batch.or(base.batch),
            lr: self.lr.or(base.lr),
            wd: self.wd.or(base.wd),
            hidden1: self.hidden1.or(base.hidden1),
            hidden2: self.hidden2.or(base.hidden2),
            seed: self.seed.or(base.seed),
            attention_axis: self.attention_axis.or(base.attention_axis),
            normalize_input: self.normalize_input || base.normalize_input,
            out: self.out.or(base.out),
        }
    }

    pub fn require<'a>(slot: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        slot.as_deref()
            .ok_or_else(|| Error::Config(format!("missing --{flag}")))
    }

    pub fn combine(&self) -> Result<CombineConfig> {
        let (b1, b2) = self.preset.unwrap_or(Preset::FineGrained).betas();
        CombineConfig::new(self.beta1.unwrap_or(b1), self.beta2.unwrap_or(b2), self.gamma.unwrap_or(0.0))
    }
}

/// File names written by `synth`.
pub struct SynthFiles;

impl SynthFiles {
    pub const SEMANTIC: &'static str = "semantic.bin";
    pub const MANIFEST: &'static str = "semantic.manifest";
    pub const SPLIT: &'static str = "split.json";
    pub const TRAIN: &'static str = "train.dfz";
    pub const TEST_SEEN: &'static str = "test_seen.dfz";
    pub const TEST_UNSEEN: &'static str = "test_unseen.dfz";
}

#[derive(Clone, Debug, Args)]
pub struct SynthArgs {
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = SynthSpec::default().seen_classes)]
    pub seen_classes: usize,
    #[arg(long, default_value_t = SynthSpec::default().unseen_classes)]
    pub unseen_classes: usize,
    #[arg(long, default_value_t = SynthSpec::default().samples_per_class)]
    pub samples_per_class: usize,
    #[arg(long, default_value_t = SynthSpec::default().attributes)]
    pub attributes: usize,
    #[arg(long, default_value_t = SynthSpec::default().regions)]
    pub regions: usize,
    #[arg(long, default_value_t = SynthSpec::default().dim)]
    pub dim: usize,
    #[arg(long, default_value_t = SynthSpec::default().sigma)]
    pub sigma: f64,
    #[arg(long, default_value_t = SynthSpec::default().seed)]
    pub seed: u64,
}

impl SynthArgs {
    pub fn spec(&self) -> SynthSpec {
        SynthSpec {
            seen_classes: self.seen_classes,
            unseen_classes: self.unseen_classes,
            samples_per_class: self.samples_per_class,
            attributes: self.attributes,
            regions: self.regions,
            dim: self.dim,
            sigma: self.sigma,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 6)]
    pub regions: usize,
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    #[arg(long, default_value_t = 4)]
    pub attributes: usize,
    #[arg(long, default_value_t = 3)]
    pub seen_classes: usize,
    #[arg(long, default_value_t = 2)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Test hook: perturbs the analytic gradient of this parameter group.
    #[arg(long, hide = true)]
    pub corrupt: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AblationTable {
    Module,
    Loss,
    Both,
}

#[derive(Clone, Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, default_value = "both")]
    pub table: AblationTable,
    /// Explicit comma-separated variant list; overrides `--table`.
    #[arg(long, value_delimiter = ',')]
    pub variants: Vec<String>,
}

#[derive(Clone, Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum)]
    pub axis: SweepAxis,
    /// Comma-separated grid; the axis default when omitted.
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<f64>,
}
