use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use proxyhash::pipeline::Variant;
use proxyhash::Modality;

#[derive(Parser, Debug)]
#[command(name = "proxyhash", version, about = "Cross-modal hashing with learned category proxy codes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic paired dataset.
    GenData(GenDataArgs),
    /// Train the proxy, image and text networks.
    Train(TrainArgs),
    /// Encode one modality of a dataset with a trained model.
    Encode(EncodeArgs),
    /// Compute MAP, precision@N and precision-recall curves from code files.
    Eval(EvalArgs),
    /// Train and evaluate ablation variants.
    Ablate(AblateArgs),
    /// Train and evaluate once per value of one hyperparameter.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct GenDataArgs {
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub categories: usize,
    #[arg(long, default_value_t = 2500)]
    pub n: usize,
    /// Image feature dimension.
    #[arg(long, default_value_t = 64)]
    pub dv: usize,
    /// Text feature dimension.
    #[arg(long, default_value_t = 64)]
    pub dt: usize,
    /// Absolute noise scale: RMS length of the noise vector.
    #[arg(long, conflicts_with = "sigma_gap")]
    pub sigma: Option<f64>,
    /// Noise scale as a fraction of the smallest prototype gap [default: 0.5].
    #[arg(long)]
    pub sigma_gap: Option<f64>,
    /// Probability of each extra category.
    #[arg(long, default_value_t = 0.0)]
    pub multi_prob: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// key=value file of defaults for these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Options shared by every command that trains.
#[derive(Args, Debug, Clone)]
pub struct TrainingOptions {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Code length k.
    #[arg(long)]
    pub bits: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Learning rate of the image and text networks.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Mini-batch size of the image and text networks.
    #[arg(long)]
    pub batch: Option<usize>,
    /// Epoch cap of the image and text phase.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub phnet_lr: Option<f64>,
    #[arg(long)]
    pub phnet_epochs: Option<usize>,
    /// Seed for initialization and batch order.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Query count held out of the retrieval set [default: n/5].
    #[arg(long)]
    pub query: Option<usize>,
    /// Training count drawn from the retrieval set [default: all of it].
    #[arg(long)]
    pub train_count: Option<usize>,
    /// Seed of the split [default: --seed].
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// Z-score features with training-split statistics.
    #[arg(long)]
    pub standardize: bool,
    /// Run every epoch up to the cap instead of stopping at a plateau.
    #[arg(long)]
    pub no_early_stop: bool,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct TrainArgs {
    #[command(flatten)]
    pub training: TrainingOptions,
    /// Output model directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModalityArg {
    Img,
    Txt,
}

impl From<ModalityArg> for Modality {
    fn from(m: ModalityArg) -> Self {
        match m {
            ModalityArg::Img => Modality::Image,
            ModalityArg::Txt => Modality::Text,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Rows {
    All,
    Query,
    Retrieval,
    Train,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct EncodeArgs {
    /// Model directory written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub modality: ModalityArg,
    /// Output codes file.
    #[arg(long)]
    pub out: PathBuf,
    /// Which rows to encode; the split comes from the model directory.
    #[arg(long, value_enum, default_value_t = Rows::All)]
    pub rows: Rows,
    /// Also write the labels of the encoded rows.
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Task {
    I2t,
    T2i,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::I2t => "i2t",
            Task::T2i => "t2i",
        }
    }
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct EvalArgs {
    #[arg(long)]
    pub query_codes: PathBuf,
    #[arg(long)]
    pub query_labels: PathBuf,
    #[arg(long)]
    pub set_codes: PathBuf,
    #[arg(long)]
    pub set_labels: PathBuf,
    #[arg(long, value_enum)]
    pub task: Task,
    /// MAP cutoff.
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    /// Cutoffs of the precision@N curve.
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [1, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000])]
    pub pn_cutoffs: Vec<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Full,
    NoQuant,
    Pairwise,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Full => Variant::Full,
            VariantArg::NoQuant => Variant::NoQuant,
            VariantArg::Pairwise => Variant::Pairwise,
        }
    }
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct AblateArgs {
    #[command(flatten)]
    pub training: TrainingOptions,
    /// Variants to compare.
    #[arg(long, value_enum, value_delimiter = ',', num_args = 1.., default_values_t = [VariantArg::Full, VariantArg::NoQuant, VariantArg::Pairwise])]
    pub variant: Vec<VariantArg>,
    /// MAP cutoff.
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Param {
    Alpha,
    Beta,
    Eta,
    Mu,
    Lambda,
    Gamma,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct SweepArgs {
    #[command(flatten)]
    pub training: TrainingOptions,
    #[arg(long, value_enum)]
    pub param: Param,
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub values: Vec<f64>,
    /// MAP cutoff.
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}
