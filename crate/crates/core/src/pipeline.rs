//! Train-then-evaluate glue shared by the CLI and the test suites.

use std::str::FromStr;

use crate::codespace::{BinaryCode, ProxyCodebook};
use crate::data::{Modality, PairedDataset, Split};
use crate::error::{Error, Result};
use crate::network::Mlp;
use crate::retrieval::{mean_average_precision, RetrievalSet};
use crate::trainer::{
    encode_all, train_modalities, train_phnet, EpochReport, HashNetworks, Objective, TrainConfig,
    TrainReport,
};

/// Model variants compared in the ablation study.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Full,
    /// No instance quantization term (γ = 0).
    NoQuant,
    /// Pairwise likelihood loss in place of the margin-dynamic-softmax terms.
    Pairwise,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Full, Variant::NoQuant, Variant::Pairwise];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoQuant => "no-quant",
            Variant::Pairwise => "pairwise",
        }
    }

    pub fn configure(self, cfg: &TrainConfig) -> TrainConfig {
        let mut cfg = cfg.clone();
        match self {
            Variant::Full => {}
            Variant::NoQuant => cfg.hp.gamma = 0.0,
            Variant::Pairwise => cfg.objective = Objective::Pairwise,
        }
        cfg
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}, expected full|no-quant|pairwise")))
    }
}

#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub codebook: ProxyCodebook,
    pub phnet: Mlp,
    pub networks: HashNetworks,
    pub consensus: Vec<BinaryCode>,
    pub report: TrainReport,
}

/// Both training phases on `train`.
pub fn train(
    train: &PairedDataset,
    cfg: &TrainConfig,
    observer: impl FnMut(&EpochReport, &HashNetworks),
) -> Result<TrainedModel> {
    cfg.validate()?;
    let phnet = train_phnet(train.categories(), cfg)?;
    let modal = train_modalities(train, &phnet.codebook, cfg, observer)?;
    Ok(TrainedModel {
        codebook: phnet.codebook,
        phnet: phnet.network,
        networks: modal.networks,
        consensus: modal.consensus,
        report: TrainReport {
            phnet_losses: phnet.losses,
            modality: modal.report,
            converged: modal.converged,
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossModalMap {
    pub i2t: f64,
    pub t2i: f64,
}

pub fn encode_set(net: &Mlp, data: &PairedDataset, modality: Modality) -> Result<RetrievalSet> {
    RetrievalSet::new(encode_all(net, data.features(modality))?, data.labels())
}

/// MAP for image→text and text→image retrieval of the split's queries
/// against its retrieval set.
pub fn evaluate(networks: &HashNetworks, data: &PairedDataset, split: &Split, n: usize) -> Result<CrossModalMap> {
    let queries = data.subset(&split.query);
    let database = data.subset(&split.retrieval);
    let q_img = encode_set(&networks.img, &queries, Modality::Image)?;
    let q_txt = encode_set(&networks.txt, &queries, Modality::Text)?;
    let db_img = encode_set(&networks.img, &database, Modality::Image)?;
    let db_txt = encode_set(&networks.txt, &database, Modality::Text)?;
    Ok(CrossModalMap {
        i2t: mean_average_precision(&q_img, &db_txt, n)?,
        t2i: mean_average_precision(&q_txt, &db_img, n)?,
    })
}
