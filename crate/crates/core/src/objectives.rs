//! Loss functions over continuous codes and their gradients.
//!
//! Notation used throughout: `k` is the code length, `ḡ` the surrogate proxy
//! (mean of the instance's positive proxy codes), `Ω` the negative category
//! set and `u = b̂·ḡ − μk` the margin-shifted positive logit. The
//! margin-dynamic-softmax loss of a code `b̂` is
//!
//! ```text
//! L = −log( e^{ηu} / (e^{ηu} + Σ_{q∈Ω} e^{η b̂·g_q}) )
//!   = logsumexp(ηu, η b̂·g_q …) − ηu
//! ```
//!
//! and its gradient is `η (p₀ ḡ + Σ_q p_q g_q − ḡ)`, with `p` the softmax over
//! the same logits. Every softmax-style term goes through a max-subtracted
//! log-sum-exp.
//!
//! Quantization targets (`sgn(ĝ)` for proxies, the consensus code for
//! instances) are constants with respect to differentiation.

use ndarray::{Array2, ArrayView2};

use crate::codespace::{inner_product, surrogate_proxy, BinaryCode, ProxyCodebook};
use crate::error::{check_dim, Error, Result};

/// Positive (Υ) and negative (Ω) category indices of one instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelSets {
    positives: Vec<usize>,
    negatives: Vec<usize>,
}

impl LabelSets {
    pub fn from_multi_hot(row: &[u8]) -> Result<Self> {
        let mut positives = Vec::new();
        let mut negatives = Vec::new();
        for (j, &l) in row.iter().enumerate() {
            match l {
                0 => negatives.push(j),
                1 => positives.push(j),
                v => return Err(Error::InvalidLabel(format!("label {j} has value {v}"))),
            }
        }
        if positives.is_empty() {
            return Err(Error::InvalidLabel("instance has no category".into()));
        }
        Ok(Self { positives, negatives })
    }

    pub fn from_positives(positives: &[usize], categories: usize) -> Result<Self> {
        let mut row = vec![0u8; categories];
        for &p in positives {
            if p >= categories {
                return Err(Error::InvalidLabel(format!(
                    "category {p} out of range for {categories} categories"
                )));
            }
            row[p] = 1;
        }
        Self::from_multi_hot(&row)
    }

    pub fn positives(&self) -> &[usize] {
        &self.positives
    }

    pub fn negatives(&self) -> &[usize] {
        &self.negatives
    }

    pub fn categories(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn contains(&self, category: usize) -> bool {
        self.positives.binary_search(&category).is_ok()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparams {
    /// Bit-balance weight.
    pub alpha: f64,
    /// Proxy quantization weight.
    pub beta: f64,
    /// Softmax sharpness.
    pub eta: f64,
    /// Margin as a fraction of `k`.
    pub mu: f64,
    /// Inter-modal weight.
    pub lambda: f64,
    /// Instance quantization weight.
    pub gamma: f64,
    pub bits: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            beta: 0.1,
            eta: 0.3,
            mu: 0.3,
            lambda: 0.001,
            gamma: 0.01,
            bits: 32,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("lambda", self.lambda),
            ("gamma", self.gamma),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::Config(format!("eta must be > 0, got {}", self.eta)));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::Config(format!("mu must lie in [0, 1], got {}", self.mu)));
        }
        if self.bits == 0 {
            return Err(Error::Config("bits must be positive".into()));
        }
        Ok(())
    }
}

/// A loss value with its gradient with respect to one code.
#[derive(Clone, Debug, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// A loss value with gradients with respect to the image and text codes.
#[derive(Clone, Debug, PartialEq)]
pub struct PairLossGrad {
    pub value: f64,
    pub grad_img: Vec<f64>,
    pub grad_txt: Vec<f64>,
}

/// The optimal distribution of the entropy-smoothed margin objective.
/// Index 0 is the surrogate category; index `q + 1` is category `q`.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothedDistribution {
    pub p: Vec<f64>,
}

impl SmoothedDistribution {
    pub fn entropy(&self) -> f64 {
        -self
            .p
            .iter()
            .filter(|&&v| v > 0.0)
            .map(|&v| v * v.ln())
            .sum::<f64>()
    }
}

/// Precomputed per-instance supervision: the surrogate proxy and the
/// negative proxy codes as reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Supervision {
    surrogate: Vec<f64>,
    negatives: Vec<Vec<f64>>,
}

impl Supervision {
    pub fn new(labels: &LabelSets, codebook: &ProxyCodebook) -> Result<Self> {
        if labels.categories() != codebook.categories() {
            return Err(Error::InvalidLabel(format!(
                "labels cover {} categories, codebook has {}",
                labels.categories(),
                codebook.categories()
            )));
        }
        let surrogate = surrogate_proxy(codebook, labels.positives())?.into_inner();
        let negatives = labels
            .negatives()
            .iter()
            .map(|&q| codebook.code(q).to_f64())
            .collect();
        Ok(Self { surrogate, negatives })
    }

    pub fn bits(&self) -> usize {
        self.surrogate.len()
    }

    pub fn surrogate(&self) -> &[f64] {
        &self.surrogate
    }

    pub fn negative_codes(&self) -> &[Vec<f64>] {
        &self.negatives
    }

    pub fn margin_u(&self, code: &[f64], mu: f64) -> f64 {
        dot(code, &self.surrogate) - mu * self.bits() as f64
    }

    /// Numerator logit `η u_num`, denominator logits `η u_den` and
    /// `η den·g_q`; returns `(value, softmax over denominator logits)`.
    fn softmax_term(&self, u_num: f64, u_den: f64, den_code: &[f64], eta: f64) -> (f64, Vec<f64>) {
        let mut logits = Vec::with_capacity(self.negatives.len() + 1);
        logits.push(eta * u_den);
        logits.extend(self.negatives.iter().map(|g| eta * dot(den_code, g)));
        let (lse, p) = log_softmax_normalizer(&logits);
        (lse - eta * u_num, p)
    }

    /// Σ_j w_j·code_j over (ḡ, g_q…) given softmax weights in logit order.
    fn weighted_codes(&self, p: &[f64], scale: f64, out: &mut [f64]) {
        axpy(scale * p[0], &self.surrogate, out);
        for (g, &w) in self.negatives.iter().zip(&p[1..]) {
            axpy(scale * w, g, out);
        }
    }

    pub fn margin_dynamic_softmax(&self, code: &[f64], eta: f64, mu: f64) -> Result<LossGrad> {
        check_code(code, self.bits())?;
        let u = self.margin_u(code, mu);
        let (value, p) = self.softmax_term(u, u, code, eta);
        let mut grad = vec![0.0; code.len()];
        self.weighted_codes(&p, eta, &mut grad);
        axpy(-eta, &self.surrogate, &mut grad);
        Ok(LossGrad { value: value.max(0.0), grad })
    }

    pub fn inter_modal(&self, img: &[f64], txt: &[f64], eta: f64, mu: f64) -> Result<PairLossGrad> {
        check_code(img, self.bits())?;
        check_code(txt, self.bits())?;
        let (uv, ut) = (self.margin_u(img, mu), self.margin_u(txt, mu));
        let mut grad_img = vec![0.0; img.len()];
        let mut grad_txt = vec![0.0; txt.len()];

        // Numerator from the image code, denominator from the text code.
        let (first, p) = self.softmax_term(uv, ut, txt, eta);
        axpy(-eta, &self.surrogate, &mut grad_img);
        self.weighted_codes(&p, eta, &mut grad_txt);

        // And the mirrored pairing.
        let (second, p) = self.softmax_term(ut, uv, img, eta);
        axpy(-eta, &self.surrogate, &mut grad_txt);
        self.weighted_codes(&p, eta, &mut grad_img);

        Ok(PairLossGrad { value: first + second, grad_img, grad_txt })
    }

    pub fn total_objective(
        &self,
        img: &[f64],
        txt: &[f64],
        consensus: &BinaryCode,
        hp: &Hyperparams,
    ) -> Result<ObjectiveTerms> {
        check_dim(self.bits(), consensus.len())?;
        let sv = self.margin_dynamic_softmax(img, hp.eta, hp.mu)?;
        let st = self.margin_dynamic_softmax(txt, hp.eta, hp.mu)?;
        let inter = self.inter_modal(img, txt, hp.eta, hp.mu)?;
        let (qv, dqv) = quantization(img, consensus);
        let (qt, dqt) = quantization(txt, consensus);

        let mut grad_img = sv.grad;
        axpy(hp.lambda, &inter.grad_img, &mut grad_img);
        axpy(hp.gamma, &dqv, &mut grad_img);
        let mut grad_txt = st.grad;
        axpy(hp.lambda, &inter.grad_txt, &mut grad_txt);
        axpy(hp.gamma, &dqt, &mut grad_txt);

        let parts = ObjectiveParts {
            intra_img: sv.value,
            intra_txt: st.value,
            inter: inter.value,
            quantization: qv + qt,
        };
        Ok(ObjectiveTerms {
            value: parts.weighted(hp),
            parts,
            grad_img,
            grad_txt,
        })
    }

    pub fn margin_satisfied(&self, code: &BinaryCode, mu: f64) -> Result<bool> {
        check_dim(self.bits(), code.len())?;
        let pos = code.dot_real(&self.surrogate);
        let need = mu * self.bits() as f64;
        Ok(self.negatives.iter().all(|g| pos - code.dot_real(g) >= need))
    }

    /// The maximizer of the entropy-regularized margin objective, written
    /// out directly from its KKT solution.
    pub fn closed_form_distribution(&self, code: &[f64], categories: usize, negatives: &[usize], eta: f64, mu: f64) -> SmoothedDistribution {
        let u = self.margin_u(code, mu);
        let weights: Vec<f64> = self
            .negatives
            .iter()
            .map(|g| (eta * (dot(code, g) - u)).exp())
            .collect();
        let z = 1.0 + weights.iter().sum::<f64>();
        let mut p = vec![0.0; categories + 1];
        p[0] = 1.0 / z;
        for (&q, w) in negatives.iter().zip(&weights) {
            p[q + 1] = w / z;
        }
        SmoothedDistribution { p }
    }
}

/// Unweighted components of the modality objective.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ObjectiveParts {
    pub intra_img: f64,
    pub intra_txt: f64,
    pub inter: f64,
    pub quantization: f64,
}

impl ObjectiveParts {
    pub fn weighted(&self, hp: &Hyperparams) -> f64 {
        self.intra_img + self.intra_txt + hp.lambda * self.inter + hp.gamma * self.quantization
    }

    pub fn add(&mut self, other: &ObjectiveParts) {
        self.intra_img += other.intra_img;
        self.intra_txt += other.intra_txt;
        self.inter += other.inter;
        self.quantization += other.quantization;
    }

    pub fn scale(&mut self, s: f64) {
        self.intra_img *= s;
        self.intra_txt *= s;
        self.inter *= s;
        self.quantization *= s;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveTerms {
    pub value: f64,
    pub parts: ObjectiveParts,
    pub grad_img: Vec<f64>,
    pub grad_txt: Vec<f64>,
}

/// Per-bit column sums of the continuous proxy outputs (`c × k`).
pub fn bit_balance(proxies: ArrayView2<'_, f64>) -> Vec<f64> {
    proxies.sum_axis(ndarray::Axis(0)).to_vec()
}

/// PHNet loss over continuous proxy outputs `c × k`:
/// Σ_i Σ_{j≠i} max(0, ĝ_i·ĝ_j) + α Σ_b a_b² + β Σ_i ‖ĝ_i − sgn(ĝ_i)‖².
/// Returns the value and its gradient with respect to every output.
pub fn phnet_loss(proxies: ArrayView2<'_, f64>, alpha: f64, beta: f64) -> Result<(f64, Array2<f64>)> {
    let (c, k) = proxies.dim();
    if c == 0 || k == 0 {
        return Err(Error::InvalidInput("proxy matrix must be non-empty".into()));
    }
    let mut grad = Array2::<f64>::zeros((c, k));
    let mut hinge = 0.0;
    let gram = proxies.dot(&proxies.t());
    for i in 0..c {
        for j in 0..c {
            if i != j && gram[[i, j]] > 0.0 {
                hinge += gram[[i, j]];
                // (i, j) and (j, i) both contribute ĝ_j to ∂/∂ĝ_i.
                let mut row = grad.row_mut(i);
                row.scaled_add(2.0, &proxies.row(j));
            }
        }
    }

    let balance = bit_balance(proxies);
    let balance_term: f64 = balance.iter().map(|a| a * a).sum();
    for mut row in grad.rows_mut() {
        for (g, a) in row.iter_mut().zip(&balance) {
            *g += 2.0 * alpha * a;
        }
    }

    let mut quant = 0.0;
    for ((i, b), &v) in proxies.indexed_iter() {
        let r = v - if v >= 0.0 { 1.0 } else { -1.0 };
        quant += r * r;
        grad[[i, b]] += 2.0 * beta * r;
    }

    Ok((hinge + alpha * balance_term + beta * quant, grad))
}

/// `b̂·ḡ − μk`.
pub fn margin_u(code: &[f64], surrogate: &[f64], mu: f64) -> Result<f64> {
    check_dim(code.len(), surrogate.len())?;
    Ok(dot(code, surrogate) - mu * code.len() as f64)
}

pub fn margin_dynamic_softmax(
    code: &[f64],
    labels: &LabelSets,
    codebook: &ProxyCodebook,
    eta: f64,
    mu: f64,
) -> Result<LossGrad> {
    Supervision::new(labels, codebook)?.margin_dynamic_softmax(code, eta, mu)
}

/// Evaluates the entropy-regularized dual `Σ_q η p_q (b̂·g_q − u) + H(p)` at
/// the closed-form optimum `p`. Equals [`margin_dynamic_softmax`].
pub fn dual_form_oracle(
    code: &[f64],
    labels: &LabelSets,
    codebook: &ProxyCodebook,
    eta: f64,
    mu: f64,
) -> Result<f64> {
    let sup = Supervision::new(labels, codebook)?;
    check_code(code, sup.bits())?;
    let dist = sup.closed_form_distribution(code, codebook.categories(), labels.negatives(), eta, mu);
    let u = sup.margin_u(code, mu);
    let mut value = dist.entropy();
    for &q in labels.negatives() {
        let s = dot(code, &codebook.code(q).to_f64());
        value += eta * dist.p[q + 1] * (s - u);
    }
    // The surrogate slot contributes η p₀ (u − u) = 0.
    Ok(value)
}

pub fn closed_form_distribution(
    code: &[f64],
    labels: &LabelSets,
    codebook: &ProxyCodebook,
    eta: f64,
    mu: f64,
) -> Result<SmoothedDistribution> {
    let sup = Supervision::new(labels, codebook)?;
    check_code(code, sup.bits())?;
    Ok(sup.closed_form_distribution(code, codebook.categories(), labels.negatives(), eta, mu))
}

pub fn inter_modal_loss(
    img: &[f64],
    txt: &[f64],
    labels: &LabelSets,
    codebook: &ProxyCodebook,
    eta: f64,
    mu: f64,
) -> Result<PairLossGrad> {
    Supervision::new(labels, codebook)?.inter_modal(img, txt, eta, mu)
}

/// `sgn(b̂_v + b̂_t)` with sgn(0) = +1.
pub fn consensus_code(img: &[f64], txt: &[f64]) -> Result<BinaryCode> {
    check_dim(img.len(), txt.len())?;
    let sum: Vec<f64> = img.iter().zip(txt).map(|(a, b)| a + b).collect();
    crate::codespace::sgn(&sum)
}

pub fn total_objective(
    img: &[f64],
    txt: &[f64],
    labels: &LabelSets,
    codebook: &ProxyCodebook,
    consensus: &BinaryCode,
    hp: &Hyperparams,
) -> Result<ObjectiveTerms> {
    Supervision::new(labels, codebook)?.total_objective(img, txt, consensus, hp)
}

/// ‖b̂ − c‖² and its gradient with `c` held fixed.
pub fn quantization(code: &[f64], target: &BinaryCode) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let grad = code
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            let r = v - f64::from(target.get(j));
            value += r * r;
            2.0 * r
        })
        .collect();
    (value, grad)
}

/// Pairwise likelihood loss against every proxy:
/// −Σ_j (s_j Ω_j − log(1 + e^{Ω_j})) with Ω_j = ½ b̂·g_j.
pub fn pairwise_loss_ablation(code: &[f64], similar: &[bool], codebook: &ProxyCodebook) -> Result<LossGrad> {
    check_dim(codebook.categories(), similar.len())?;
    check_code(code, codebook.bits())?;
    let mut value = 0.0;
    let mut grad = vec![0.0; code.len()];
    for (g, &s) in codebook.codes().iter().zip(similar) {
        let omega = 0.5 * g.dot_real(code);
        let s = if s { 1.0 } else { 0.0 };
        value += softplus(omega) - s * omega;
        let w = 0.5 * (sigmoid(omega) - s);
        for (j, d) in grad.iter_mut().enumerate() {
            *d += w * f64::from(g.get(j));
        }
    }
    Ok(LossGrad { value, grad })
}

pub fn margin_satisfied(code: &BinaryCode, labels: &LabelSets, codebook: &ProxyCodebook, mu: f64) -> Result<bool> {
    check_dim(codebook.bits(), code.len())?;
    if labels.categories() != codebook.categories() {
        return Err(Error::InvalidLabel("label width does not match codebook".into()));
    }
    // Scaled by |Υ| so everything stays integral except μk|Υ|.
    let m = labels.positives().len() as i64;
    let mut pos = 0i64;
    for &e in labels.positives() {
        pos += inner_product(code, codebook.code(e))?;
    }
    let need = mu * code.len() as f64 * m as f64;
    for &q in labels.negatives() {
        let lhs = pos - m * inner_product(code, codebook.code(q))?;
        if (lhs as f64) < need {
            return Ok(false);
        }
    }
    Ok(true)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn check_code(code: &[f64], k: usize) -> Result<()> {
    check_dim(k, code.len())?;
    if code.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite code entry".into()));
    }
    Ok(())
}

/// Returns `(log Σ e^{z_i}, softmax(z))` with max subtraction.
pub fn log_softmax_normalizer(logits: &[f64]) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= sum);
    (max + sum.ln(), p)
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
