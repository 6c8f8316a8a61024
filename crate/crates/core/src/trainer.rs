//! Two-phase training.
//!
//! Phase one fits the proxy network on the `c` one-hot category vectors
//! (full batch) and quantizes its outputs into the proxy codebook. Phase two
//! alternates, every epoch, a pass of image mini-batches with the text
//! network frozen and a pass of text mini-batches with the image network
//! frozen, then refreshes every consensus code from the current outputs.
//! Consensus codes stay fixed within an epoch.
//!
//! Mini-batch gradients are sums over the batch rows, matching the summed
//! objective. Training stops at the epoch limit or once the mean loss over
//! the last `window` epochs moves by less than `tolerance` (relative) from
//! the mean over the `window` epochs before it.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codespace::{sgn, BinaryCode, ProxyCodebook};
use crate::data::{Modality, PairedDataset};
use crate::error::{check_dim, Error, Result};
use crate::network::{Mlp, SgdConfig};
use crate::objectives::{
    consensus_code, pairwise_loss_ablation, phnet_loss, quantization, Hyperparams, ObjectiveParts,
    Supervision,
};

pub const PHNET_HIDDEN: usize = 512;
pub const IMG_HIDDEN: usize = 512;
pub const TXT_HIDDEN: usize = 2048;

/// RNG streams derived from the run seed.
const STREAM_PHNET: u64 = 1;
const STREAM_MODALITY_INIT: u64 = 2;
const STREAM_BATCHES: u64 = 3;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Convergence {
    pub window: usize,
    pub tolerance: f64,
}

impl Default for Convergence {
    fn default() -> Self {
        Self { window: 10, tolerance: 1e-4 }
    }
}

impl Convergence {
    pub fn reached(&self, history: &[f64]) -> bool {
        let w = self.window;
        if w == 0 || history.len() < 2 * w {
            return false;
        }
        let n = history.len();
        let cur = history[n - w..].iter().sum::<f64>() / w as f64;
        let prev = history[n - 2 * w..n - w].iter().sum::<f64>() / w as f64;
        (cur - prev).abs() <= self.tolerance * prev.abs().max(f64::MIN_POSITIVE)
    }
}

/// Which per-modality loss drives phase two.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Objective {
    /// Margin-dynamic-softmax intra- and inter-modal terms plus quantization.
    #[default]
    MarginSoftmax,
    /// Pairwise likelihood against every proxy plus quantization.
    Pairwise,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub hp: Hyperparams,
    pub phnet: SgdConfig,
    pub modality: SgdConfig,
    pub img_hidden: Vec<usize>,
    pub txt_hidden: Vec<usize>,
    pub phnet_hidden: Vec<usize>,
    pub objective: Objective,
    pub convergence: Convergence,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hp: Hyperparams::default(),
            phnet: SgdConfig { learning_rate: 1e-3, batch_size: 1, epochs: 200, seed: 0 },
            modality: SgdConfig::default(),
            img_hidden: vec![IMG_HIDDEN],
            txt_hidden: vec![TXT_HIDDEN],
            phnet_hidden: vec![PHNET_HIDDEN],
            objective: Objective::MarginSoftmax,
            convergence: Convergence::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.hp.validate()?;
        self.phnet.validate()?;
        self.modality.validate()
    }
}

#[derive(Clone, Debug)]
pub struct PhnetOutcome {
    pub codebook: ProxyCodebook,
    pub network: Mlp,
    /// Loss before each update, one entry per epoch run.
    pub losses: Vec<f64>,
}

/// Fits the proxy network on the identity category matrix and emits
/// `g_i = sgn(F(y_i))`.
pub fn train_phnet(categories: usize, cfg: &TrainConfig) -> Result<PhnetOutcome> {
    if categories == 0 {
        return Err(Error::Config("need at least one category".into()));
    }
    cfg.hp.validate()?;
    cfg.phnet.validate()?;
    let mut rng = stream_rng(cfg.phnet.seed, STREAM_PHNET);
    let mut net = Mlp::xavier(categories, &cfg.phnet_hidden, cfg.hp.bits, &mut rng)?;
    let onehots = Array2::<f64>::eye(categories);
    let mut losses = Vec::new();
    for epoch in 0..cfg.phnet.epochs {
        let trace = net.forward_trace(onehots.view())?;
        let (loss, grad) = phnet_loss(trace.output().view(), cfg.hp.alpha, cfg.hp.beta)?;
        if !loss.is_finite() {
            return Err(Error::TrainingFailure { phase: "phnet", epoch });
        }
        losses.push(loss);
        let (grads, _) = net.backward(&trace, grad.view())?;
        net.sgd_step(&grads, cfg.phnet.learning_rate)?;
        if cfg.convergence.reached(&losses) {
            break;
        }
    }
    let out = net.forward_batch(onehots.view())?;
    let codes = out
        .rows()
        .into_iter()
        .map(|r| sgn(r.as_slice().expect("standard layout")))
        .collect::<Result<Vec<_>>>()?;
    Ok(PhnetOutcome { codebook: ProxyCodebook::new(codes)?, network: net, losses })
}

/// Image and text hashing networks.
#[derive(Clone, Debug, PartialEq)]
pub struct HashNetworks {
    pub img: Mlp,
    pub txt: Mlp,
}

impl HashNetworks {
    pub fn get(&self, modality: Modality) -> &Mlp {
        match modality {
            Modality::Image => &self.img,
            Modality::Text => &self.txt,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochReport {
    /// 1-based.
    pub epoch: usize,
    /// Mean per-instance objective after the epoch, with refreshed consensus
    /// codes.
    pub objective: f64,
    pub parts: ObjectiveParts,
    /// Fraction of consensus bits that flipped in the refresh.
    pub flipped: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub phnet_losses: Vec<f64>,
    /// Epoch 0 is the untrained state; one entry per epoch after that.
    pub modality: Vec<EpochReport>,
    pub converged: bool,
}

impl TrainReport {
    /// `(epoch, phase, loss)` rows; phnet epochs are 1-based, modality rows
    /// include the epoch-0 baseline.
    pub fn loss_rows(&self) -> Vec<(usize, &'static str, f64)> {
        let mut rows: Vec<_> = self
            .phnet_losses
            .iter()
            .enumerate()
            .map(|(e, &l)| (e + 1, "phnet", l))
            .collect();
        rows.extend(self.modality.iter().map(|r| (r.epoch, "modality", r.objective)));
        rows
    }

    pub fn write_loss_csv(&self, path: &Path) -> Result<()> {
        let mut s = String::from("epoch,phase,loss\n");
        for (epoch, phase, loss) in self.loss_rows() {
            writeln!(s, "{epoch},{phase},{loss:.9}").unwrap();
        }
        fs::write(path, s)?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ModalityOutcome {
    pub networks: HashNetworks,
    pub consensus: Vec<BinaryCode>,
    pub report: Vec<EpochReport>,
    pub converged: bool,
}

/// Mutable state of phase two.
struct TrainState {
    nets: HashNetworks,
    consensus: Vec<BinaryCode>,
    img_out: Array2<f64>,
    txt_out: Array2<f64>,
    rng: ChaCha8Rng,
}

/// Precomputed supervision for every training instance.
enum Targets {
    Margin(Vec<Supervision>),
    Pairwise { similar: Vec<Vec<bool>> },
}

impl Targets {
    fn new(data: &PairedDataset, codebook: &ProxyCodebook, objective: Objective) -> Result<Self> {
        check_dim(codebook.categories(), data.categories())?;
        Ok(match objective {
            Objective::MarginSoftmax => Targets::Margin(
                (0..data.len())
                    .map(|i| Supervision::new(&data.label_sets(i), codebook))
                    .collect::<Result<_>>()?,
            ),
            Objective::Pairwise => Targets::Pairwise {
                similar: data
                    .labels()
                    .rows()
                    .into_iter()
                    .map(|r| r.iter().map(|&l| l == 1).collect())
                    .collect(),
            },
        })
    }

    /// Objective terms of instance `i` and the gradient with respect to the
    /// code of `modality`.
    #[allow(clippy::too_many_arguments)]
    fn instance(
        &self,
        i: usize,
        img: &[f64],
        txt: &[f64],
        consensus: &BinaryCode,
        codebook: &ProxyCodebook,
        hp: &Hyperparams,
        modality: Modality,
    ) -> Result<(ObjectiveParts, Vec<f64>)> {
        match self {
            Targets::Margin(sup) => {
                let t = sup[i].total_objective(img, txt, consensus, hp)?;
                let grad = match modality {
                    Modality::Image => t.grad_img,
                    Modality::Text => t.grad_txt,
                };
                Ok((t.parts, grad))
            }
            Targets::Pairwise { similar } => {
                let pv = pairwise_loss_ablation(img, &similar[i], codebook)?;
                let pt = pairwise_loss_ablation(txt, &similar[i], codebook)?;
                let (qv, dqv) = quantization(img, consensus);
                let (qt, dqt) = quantization(txt, consensus);
                let (mut grad, dq) = match modality {
                    Modality::Image => (pv.grad, dqv),
                    Modality::Text => (pt.grad, dqt),
                };
                for (g, d) in grad.iter_mut().zip(&dq) {
                    *g += hp.gamma * d;
                }
                let parts = ObjectiveParts {
                    intra_img: pv.value,
                    intra_txt: pt.value,
                    inter: 0.0,
                    quantization: qv + qt,
                };
                Ok((parts, grad))
            }
        }
    }

    fn weighted(&self, parts: &ObjectiveParts, hp: &Hyperparams) -> f64 {
        match self {
            Targets::Margin(_) => parts.weighted(hp),
            Targets::Pairwise { .. } => parts.intra_img + parts.intra_txt + hp.gamma * parts.quantization,
        }
    }
}

fn to_f64(m: ArrayView2<'_, f32>) -> Array2<f64> {
    m.mapv(f64::from)
}

fn row(m: &Array2<f64>, i: usize) -> &[f64] {
    m.row(i).to_slice().expect("standard layout")
}

fn consensus_all(img: &Array2<f64>, txt: &Array2<f64>) -> Result<Vec<BinaryCode>> {
    (0..img.nrows()).map(|i| consensus_code(row(img, i), row(txt, i))).collect()
}

/// Runs phase two on `data` (the training subset) against a frozen codebook.
/// `observer` sees every epoch report (including the epoch-0 baseline) along
/// with the networks at that point.
pub fn train_modalities(
    data: &PairedDataset,
    codebook: &ProxyCodebook,
    cfg: &TrainConfig,
    mut observer: impl FnMut(&EpochReport, &HashNetworks),
) -> Result<ModalityOutcome> {
    cfg.hp.validate()?;
    cfg.modality.validate()?;
    check_dim(cfg.hp.bits, codebook.bits())?;
    if data.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    let hp = &cfg.hp;
    let sgd = &cfg.modality;
    let targets = Targets::new(data, codebook, cfg.objective)?;
    let img_x = to_f64(data.features(Modality::Image).view());
    let txt_x = to_f64(data.features(Modality::Text).view());

    let mut init_rng = stream_rng(sgd.seed, STREAM_MODALITY_INIT);
    let nets = HashNetworks {
        img: Mlp::xavier(img_x.ncols(), &cfg.img_hidden, hp.bits, &mut init_rng)?,
        txt: Mlp::xavier(txt_x.ncols(), &cfg.txt_hidden, hp.bits, &mut init_rng)?,
    };
    let img_out = nets.img.forward_batch(img_x.view())?;
    let txt_out = nets.txt.forward_batch(txt_x.view())?;
    let consensus = consensus_all(&img_out, &txt_out)?;
    let mut state = TrainState {
        nets,
        consensus,
        img_out,
        txt_out,
        rng: stream_rng(sgd.seed, STREAM_BATCHES),
    };

    let n = data.len();
    let batch = sgd.batch_size.min(n);
    let mut report = Vec::new();
    let baseline = epoch_report(0, &state, &targets, codebook, hp, 0.0)?;
    observer(&baseline, &state.nets);
    let mut history = vec![baseline.objective];
    report.push(baseline);
    let mut converged = false;

    for epoch in 1..=sgd.epochs {
        for modality in [Modality::Image, Modality::Text] {
            let x = match modality {
                Modality::Image => &img_x,
                Modality::Text => &txt_x,
            };
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut state.rng);
            for idx in order.chunks(batch) {
                let xb = x.select(Axis(0), idx);
                let net = match modality {
                    Modality::Image => &state.nets.img,
                    Modality::Text => &state.nets.txt,
                };
                let trace = net.forward_trace(xb.view())?;
                let out = trace.output();
                let mut upstream = Array2::<f64>::zeros(out.dim());
                for (r, &i) in idx.iter().enumerate() {
                    let own = out.row(r).to_slice().expect("standard layout");
                    let (img, txt) = match modality {
                        Modality::Image => (own, row(&state.txt_out, i)),
                        Modality::Text => (row(&state.img_out, i), own),
                    };
                    let (_, grad) =
                        targets.instance(i, img, txt, &state.consensus[i], codebook, hp, modality)?;
                    if grad.iter().any(|g| !g.is_finite()) {
                        return Err(Error::TrainingFailure { phase: "modality", epoch });
                    }
                    upstream.slice_mut(s![r, ..]).assign(&ndarray::ArrayView1::from(&grad[..]));
                }
                let (grads, _) = net.backward(&trace, upstream.view())?;
                match modality {
                    Modality::Image => state.nets.img.sgd_step(&grads, sgd.learning_rate)?,
                    Modality::Text => state.nets.txt.sgd_step(&grads, sgd.learning_rate)?,
                }
            }
            // The frozen network's outputs feed the other modality's pass.
            match modality {
                Modality::Image => state.img_out = state.nets.img.forward_batch(img_x.view())?,
                Modality::Text => state.txt_out = state.nets.txt.forward_batch(txt_x.view())?,
            }
        }

        let refreshed = consensus_all(&state.img_out, &state.txt_out)?;
        let flipped_bits: u32 = refreshed
            .iter()
            .zip(&state.consensus)
            .map(|(a, b)| crate::codespace::hamming_unchecked(a, b))
            .sum();
        state.consensus = refreshed;
        let flipped = f64::from(flipped_bits) / (n * hp.bits) as f64;

        let er = epoch_report(epoch, &state, &targets, codebook, hp, flipped)?;
        if !er.objective.is_finite() {
            return Err(Error::TrainingFailure { phase: "modality", epoch });
        }
        observer(&er, &state.nets);
        history.push(er.objective);
        report.push(er);
        if cfg.convergence.reached(&history[1..]) {
            converged = true;
            break;
        }
    }

    Ok(ModalityOutcome {
        networks: state.nets,
        consensus: state.consensus,
        report,
        converged,
    })
}

fn epoch_report(
    epoch: usize,
    state: &TrainState,
    targets: &Targets,
    codebook: &ProxyCodebook,
    hp: &Hyperparams,
    flipped: f64,
) -> Result<EpochReport> {
    let n = state.consensus.len();
    let mut parts = ObjectiveParts::default();
    for i in 0..n {
        let (p, _) = targets.instance(
            i,
            row(&state.img_out, i),
            row(&state.txt_out, i),
            &state.consensus[i],
            codebook,
            hp,
            Modality::Image,
        )?;
        parts.add(&p);
    }
    parts.scale(1.0 / n as f64);
    Ok(EpochReport {
        epoch,
        objective: targets.weighted(&parts, hp),
        parts,
        flipped,
    })
}

/// `sgn(H(x))` for a single feature vector.
pub fn encode(net: &Mlp, x: &[f64]) -> Result<BinaryCode> {
    sgn(net.forward(x)?.as_slice())
}

/// Codes for every row of a feature matrix.
pub fn encode_all(net: &Mlp, features: &Array2<f32>) -> Result<Vec<BinaryCode>> {
    check_dim(net.input_dim(), features.ncols())?;
    let mut codes = Vec::with_capacity(features.nrows());
    for chunk in features.axis_chunks_iter(Axis(0), 1024) {
        let out = net.forward_batch(to_f64(chunk).view())?;
        for r in out.rows() {
            codes.push(sgn(r.as_slice().expect("standard layout"))?);
        }
    }
    Ok(codes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convergence_rule() {
        let c = Convergence { window: 2, tolerance: 1e-3 };
        assert!(!c.reached(&[1.0, 1.0, 1.0]));
        assert!(c.reached(&[1.0, 1.0, 1.0, 1.0]));
        assert!(!c.reached(&[2.0, 2.0, 1.0, 1.0]));
        assert!(c.reached(&[5.0, 2.0, 1.0, 1.0, 1.0005, 0.9995]));
        assert!(!Convergence { window: 0, tolerance: 1.0 }.reached(&[1.0; 10]));
    }

    #[test]
    fn phnet_single_category() {
        let cfg = TrainConfig {
            hp: Hyperparams { bits: 8, ..Default::default() },
            phnet: SgdConfig { learning_rate: 0.01, batch_size: 1, epochs: 20, seed: 1 },
            ..Default::default()
        };
        let out = train_phnet(1, &cfg).unwrap();
        assert_eq!(out.codebook.categories(), 1);
        assert_eq!(out.codebook.bits(), 8);
    }

    #[test]
    fn phnet_zero_epochs_emits_initial_codes() {
        let cfg = TrainConfig {
            hp: Hyperparams { bits: 16, ..Default::default() },
            phnet: SgdConfig { learning_rate: 0.01, batch_size: 1, epochs: 0, seed: 1 },
            ..Default::default()
        };
        let out = train_phnet(3, &cfg).unwrap();
        assert!(out.losses.is_empty());
        assert_eq!(out.codebook.categories(), 3);
    }
}
