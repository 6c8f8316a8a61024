//! Paired two-modality datasets: the in-memory model, a synthetic Gaussian
//! cluster generator, query/retrieval/training splits and the on-disk layout.
//!
//! A dataset directory holds four files:
//!
//! - `meta.txt`: ASCII `key=value` lines with `n`, `d_v`, `d_t`, `c`
//!   (unknown keys are ignored)
//! - `img.f32`, `txt.f32`: row-major little-endian `f32` features
//! - `labels.u8`: `n × c` bytes, each 0 or 1

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::objectives::LabelSets;

pub const META_FILE: &str = "meta.txt";
pub const IMG_FILE: &str = "img.f32";
pub const TXT_FILE: &str = "txt.f32";
pub const LABELS_FILE: &str = "labels.u8";
const STANDARDIZER_MAGIC: &[u8; 4] = b"PXZ1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Modality {
    Image,
    Text,
}

impl Modality {
    pub fn name(self) -> &'static str {
        match self {
            Modality::Image => "img",
            Modality::Text => "txt",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairedDataset {
    img: Array2<f32>,
    txt: Array2<f32>,
    labels: Array2<u8>,
}

impl PairedDataset {
    pub fn new(img: Array2<f32>, txt: Array2<f32>, labels: Array2<u8>) -> Result<Self> {
        let n = img.nrows();
        check_dim(n, txt.nrows())?;
        check_dim(n, labels.nrows())?;
        if img.ncols() == 0 || txt.ncols() == 0 || labels.ncols() == 0 {
            return Err(Error::InvalidInput("feature and label widths must be positive".into()));
        }
        for (name, feats) in [("image", &img), ("text", &txt)] {
            if let Some((row, _)) = feats
                .axis_iter(Axis(0))
                .enumerate()
                .find(|(_, r)| r.iter().any(|v| !v.is_finite()))
            {
                return Err(Error::InvalidInput(format!("non-finite {name} feature in row {row}")));
            }
        }
        validate_labels(&labels)?;
        Ok(Self { img, txt, labels })
    }

    pub fn len(&self) -> usize {
        self.img.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn categories(&self) -> usize {
        self.labels.ncols()
    }

    pub fn dim(&self, modality: Modality) -> usize {
        self.features(modality).ncols()
    }

    pub fn features(&self, modality: Modality) -> &Array2<f32> {
        match modality {
            Modality::Image => &self.img,
            Modality::Text => &self.txt,
        }
    }

    pub fn labels(&self) -> &Array2<u8> {
        &self.labels
    }

    pub fn label_row(&self, i: usize) -> ArrayView1<'_, u8> {
        self.labels.row(i)
    }

    pub fn label_sets(&self, i: usize) -> LabelSets {
        LabelSets::from_multi_hot(self.labels.row(i).as_slice().expect("standard layout"))
            .expect("labels validated at construction")
    }

    pub fn subset(&self, indices: &[usize]) -> PairedDataset {
        PairedDataset {
            img: self.img.select(Axis(0), indices),
            txt: self.txt.select(Axis(0), indices),
            labels: self.labels.select(Axis(0), indices),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let meta = format!(
            "n={}\nd_v={}\nd_t={}\nc={}\n",
            self.len(),
            self.img.ncols(),
            self.txt.ncols(),
            self.categories()
        );
        fs::write(dir.join(META_FILE), meta)?;
        fs::write(dir.join(IMG_FILE), f32_bytes(&self.img))?;
        fs::write(dir.join(TXT_FILE), f32_bytes(&self.txt))?;
        fs::write(dir.join(LABELS_FILE), self.labels.as_standard_layout().as_slice().unwrap())?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join(META_FILE);
        let meta = read_file(&meta_path)?;
        let meta = parse_meta(&meta, &meta_path)?;
        let field = |key: &str| -> Result<usize> {
            meta.get(key).copied().ok_or_else(|| Error::Format {
                path: meta_path.clone(),
                msg: format!("missing key {key}"),
            })
        };
        let (n, dv, dt, c) = (field("n")?, field("d_v")?, field("d_t")?, field("c")?);
        if dv == 0 || dt == 0 || c == 0 {
            return Err(Error::Format {
                path: meta_path,
                msg: "d_v, d_t and c must be positive".into(),
            });
        }

        let img = read_f32_matrix(&dir.join(IMG_FILE), n, dv)?;
        let txt = read_f32_matrix(&dir.join(TXT_FILE), n, dt)?;
        let labels_path = dir.join(LABELS_FILE);
        let raw = read_file(&labels_path)?;
        if raw.len() != n * c {
            return Err(Error::Format {
                path: labels_path,
                msg: format!("expected {} bytes, found {}", n * c, raw.len()),
            });
        }
        let labels = Array2::from_shape_vec((n, c), raw).expect("length checked");
        validate_labels(&labels).map_err(|e| Error::Format { path: labels_path, msg: e.to_string() })?;

        Self::new(img, txt, labels).map_err(|e| Error::Format {
            path: dir.to_path_buf(),
            msg: e.to_string(),
        })
    }
}

fn validate_labels(labels: &Array2<u8>) -> Result<()> {
    for (i, row) in labels.axis_iter(Axis(0)).enumerate() {
        if let Some(v) = row.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidLabel(format!("row {i} holds label value {v}")));
        }
        if row.iter().all(|&v| v == 0) {
            return Err(Error::InvalidLabel(format!("row {i} has no category")));
        }
    }
    Ok(())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

fn parse_meta(bytes: &[u8], path: &Path) -> Result<HashMap<String, usize>> {
    let fmt = |msg: String| Error::Format { path: path.to_path_buf(), msg };
    let text = std::str::from_utf8(bytes).map_err(|_| fmt("not ASCII text".into()))?;
    let mut out = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| fmt(format!("line {}: expected key=value", lineno + 1)))?;
        let key = key.trim();
        if matches!(key, "n" | "d_v" | "d_t" | "c") {
            let v = value
                .trim()
                .parse()
                .map_err(|_| fmt(format!("line {}: {key} is not an integer", lineno + 1)))?;
            out.insert(key.to_string(), v);
        }
    }
    Ok(out)
}

fn f32_bytes(m: &Array2<f32>) -> Vec<u8> {
    m.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn read_f32_matrix(path: &Path, rows: usize, cols: usize) -> Result<Array2<f32>> {
    let raw = read_file(path)?;
    if raw.len() != rows * cols * 4 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: format!("expected {} bytes for {rows}x{cols} f32, found {}", rows * cols * 4, raw.len()),
        });
    }
    let values = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), values).expect("length checked"))
}

/// How the per-instance feature noise is scaled.
///
/// The noise added to a feature vector is isotropic Gaussian with
/// per-coordinate standard deviation `σ/√d`, so `σ` is the RMS length of the
/// noise vector and is directly comparable to distances between prototypes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseScale {
    Absolute(f64),
    /// `σ` as a fraction of the smallest distance between two prototypes of
    /// the same modality.
    GapFraction(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub categories: usize,
    pub n: usize,
    pub dim_img: usize,
    pub dim_txt: usize,
    pub noise: NoiseScale,
    pub multi_label_prob: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            categories: 8,
            n: 2500,
            dim_img: 64,
            dim_txt: 64,
            noise: NoiseScale::GapFraction(0.5),
            multi_label_prob: 0.0,
            seed: 0,
        }
    }
}

/// A generated dataset with the prototypes it was drawn from.
#[derive(Clone, Debug)]
pub struct SynthDataset {
    pub data: PairedDataset,
    pub img_prototypes: Array2<f64>,
    pub txt_prototypes: Array2<f64>,
    pub img_sigma: f64,
    pub txt_sigma: f64,
}

pub fn min_prototype_gap(prototypes: &Array2<f64>) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..prototypes.nrows() {
        for j in i + 1..prototypes.nrows() {
            let d = (&prototypes.row(i) - &prototypes.row(j)).mapv(|v| v * v).sum().sqrt();
            best = best.min(d);
        }
    }
    best
}

/// Draws one standard-normal prototype per category and modality, then
/// builds each instance from one uniformly chosen primary category plus each
/// other category independently with `multi_label_prob`. Features are the
/// mean of the chosen prototypes plus noise, independently per modality.
pub fn synth_generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    if cfg.categories < 2 {
        return Err(Error::Config("synthetic data needs at least 2 categories".into()));
    }
    if cfg.n == 0 || cfg.dim_img == 0 || cfg.dim_txt == 0 {
        return Err(Error::Config("n, d_v and d_t must be positive".into()));
    }
    if !(0.0..=1.0).contains(&cfg.multi_label_prob) {
        return Err(Error::Config("multi-label probability must lie in [0, 1]".into()));
    }
    let scale = match cfg.noise {
        NoiseScale::Absolute(s) | NoiseScale::GapFraction(s) => s,
    };
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::Config(format!("noise scale must be finite and >= 0, got {scale}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let c = cfg.categories;
    let img_prototypes = Array2::from_shape_simple_fn((c, cfg.dim_img), || rng.sample(StandardNormal));
    let txt_prototypes = Array2::from_shape_simple_fn((c, cfg.dim_txt), || rng.sample(StandardNormal));
    let sigma_for = |protos: &Array2<f64>| match cfg.noise {
        NoiseScale::Absolute(s) => s,
        NoiseScale::GapFraction(f) => f * min_prototype_gap(protos),
    };
    let (img_sigma, txt_sigma) = (sigma_for(&img_prototypes), sigma_for(&txt_prototypes));

    let mut img = Array2::<f32>::zeros((cfg.n, cfg.dim_img));
    let mut txt = Array2::<f32>::zeros((cfg.n, cfg.dim_txt));
    let mut labels = Array2::<u8>::zeros((cfg.n, c));
    for i in 0..cfg.n {
        let primary = rng.gen_range(0..c);
        labels[[i, primary]] = 1;
        for j in 0..c {
            if j != primary && rng.gen_bool(cfg.multi_label_prob) {
                labels[[i, j]] = 1;
            }
        }
        let chosen: Vec<usize> = (0..c).filter(|&j| labels[[i, j]] == 1).collect();
        for (out, protos, sigma) in [
            (&mut img, &img_prototypes, img_sigma),
            (&mut txt, &txt_prototypes, txt_sigma),
        ] {
            let d = protos.ncols();
            let sd = sigma / (d as f64).sqrt();
            for f in 0..d {
                let mean = chosen.iter().map(|&j| protos[[j, f]]).sum::<f64>() / chosen.len() as f64;
                let noise: f64 = rng.sample(StandardNormal);
                out[[i, f]] = (mean + sd * noise) as f32;
            }
        }
    }

    Ok(SynthDataset {
        data: PairedDataset::new(img, txt, labels)?,
        img_prototypes,
        txt_prototypes,
        img_sigma,
        txt_sigma,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitSpec {
    pub query: usize,
    pub train: usize,
    pub seed: u64,
}

/// Index sets of a split; all three are sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub query: Vec<usize>,
    pub retrieval: Vec<usize>,
    pub train: Vec<usize>,
}

/// Random disjoint query/retrieval partition, with the training set drawn
/// from the retrieval set.
pub fn split(n: usize, spec: &SplitSpec) -> Result<Split> {
    if spec.query >= n {
        return Err(Error::Config(format!(
            "query count {} leaves no retrieval items out of {n}",
            spec.query
        )));
    }
    if spec.train > n - spec.query {
        return Err(Error::Config(format!(
            "training count {} exceeds retrieval set size {}",
            spec.train,
            n - spec.query
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut query = order[..spec.query].to_vec();
    let mut retrieval = order[spec.query..].to_vec();
    retrieval.shuffle(&mut rng);
    let mut train = retrieval[..spec.train].to_vec();
    query.sort_unstable();
    retrieval.sort_unstable();
    train.sort_unstable();
    Ok(Split { query, retrieval, train })
}

/// Per-dimension z-scoring fitted on one subset and applied to any other.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(features: &Array2<f32>) -> Self {
        let n = features.nrows().max(1) as f64;
        let mut mean = vec![0.0; features.ncols()];
        let mut var = vec![0.0; features.ncols()];
        for row in features.rows() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += f64::from(v);
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        for row in features.rows() {
            for ((s, &v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (f64::from(v) - m).powi(2);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, features: &Array2<f32>) -> Result<Array2<f32>> {
        check_dim(self.dim(), features.ncols())?;
        let mut out = features.clone();
        for mut row in out.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = ((f64::from(*v) - m) / s) as f32;
            }
        }
        Ok(out)
    }

    /// `PXZ1`, u32 dimension, then the means and standard deviations as
    /// little-endian `f64`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = Vec::with_capacity(8 + 16 * self.dim());
        out.extend_from_slice(STANDARDIZER_MAGIC);
        out.extend_from_slice(&u32::try_from(self.dim()).map_err(|_| Error::InvalidInput("dimension exceeds u32".into()))?.to_le_bytes());
        for v in self.mean.iter().chain(&self.std) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = read_file(path)?;
        let fmt = |msg: String| Error::Format { path: path.to_path_buf(), msg };
        if raw.len() < 8 || &raw[..4] != STANDARDIZER_MAGIC {
            return Err(fmt("not a standardizer file".into()));
        }
        let d = u32::from_le_bytes(raw[4..8].try_into().unwrap()) as usize;
        if raw.len() != 8 + 16 * d {
            return Err(fmt(format!("expected {} bytes, found {}", 8 + 16 * d, raw.len())));
        }
        let values: Vec<f64> = raw[8..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let (mean, std) = values.split_at(d);
        if std.iter().any(|s| !(s.is_finite() && *s > 0.0)) || mean.iter().any(|m| !m.is_finite()) {
            return Err(fmt("non-finite or non-positive statistics".into()));
        }
        Ok(Self { mean: mean.to_vec(), std: std.to_vec() })
    }
}

impl PairedDataset {
    /// Image and text standardizers fitted on the rows in `fit_rows`.
    pub fn fit_standardizers(&self, fit_rows: &[usize]) -> (Standardizer, Standardizer) {
        let fit = self.subset(fit_rows);
        (Standardizer::fit(&fit.img), Standardizer::fit(&fit.txt))
    }

    pub fn standardize_with(&self, img: &Standardizer, txt: &Standardizer) -> Result<PairedDataset> {
        Ok(PairedDataset { img: img.apply(&self.img)?, txt: txt.apply(&self.txt)?, labels: self.labels.clone() })
    }

    /// Z-scores both modalities with statistics from the rows in `fit_rows`.
    pub fn standardized(&self, fit_rows: &[usize]) -> PairedDataset {
        let (img, txt) = self.fit_standardizers(fit_rows);
        self.standardize_with(&img, &txt).expect("fitted on the same columns")
    }
}

/// Reads a headerless `labels.u8` file holding `rows` rows; the category
/// count is inferred from the file length.
pub fn read_labels(path: &Path, rows: usize) -> Result<Array2<u8>> {
    let raw = read_file(path)?;
    let fmt = |msg: String| Error::Format { path: path.to_path_buf(), msg };
    if rows == 0 || raw.is_empty() || raw.len() % rows != 0 {
        return Err(fmt(format!("{} bytes cannot hold {rows} label rows", raw.len())));
    }
    let labels = Array2::from_shape_vec((rows, raw.len() / rows), raw).expect("length checked");
    validate_labels(&labels).map_err(|e| fmt(e.to_string()))?;
    Ok(labels)
}

pub fn write_labels(path: &Path, labels: &Array2<u8>) -> Result<()> {
    fs::write(path, labels.as_standard_layout().as_slice().unwrap())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tiny() -> PairedDataset {
        PairedDataset::new(
            array![[0.5f32, -1.0], [2.0, 0.25], [1.0, 1.0]],
            array![[1.0f32], [2.0], [3.0]],
            array![[1u8, 0, 0], [0, 1, 1], [1, 0, 1]],
        )
        .unwrap()
    }

    #[test]
    fn noiseless_categories_are_identical() {
        let cfg = SynthConfig {
            categories: 4,
            n: 60,
            dim_img: 5,
            dim_txt: 3,
            noise: NoiseScale::Absolute(0.0),
            multi_label_prob: 0.0,
            seed: 7,
        };
        let s = synth_generate(&cfg).unwrap();
        let d = &s.data;
        for i in 0..d.len() {
            for j in 0..d.len() {
                if d.label_row(i) == d.label_row(j) {
                    assert_eq!(d.features(Modality::Image).row(i), d.features(Modality::Image).row(j));
                    assert_eq!(d.features(Modality::Text).row(i), d.features(Modality::Text).row(j));
                }
            }
            assert_eq!(d.label_row(i).iter().filter(|&&v| v == 1).count(), 1);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig { n: 100, seed: 3, multi_label_prob: 0.2, ..Default::default() };
        assert_eq!(synth_generate(&cfg).unwrap().data, synth_generate(&cfg).unwrap().data);
        let other = SynthConfig { seed: 4, ..cfg.clone() };
        assert_ne!(synth_generate(&cfg).unwrap().data, synth_generate(&other).unwrap().data);
    }

    #[test]
    fn generator_rejects_bad_config() {
        let bad = [
            SynthConfig { categories: 1, ..Default::default() },
            SynthConfig { n: 0, ..Default::default() },
            SynthConfig { dim_txt: 0, ..Default::default() },
            SynthConfig { noise: NoiseScale::Absolute(-1.0), ..Default::default() },
            SynthConfig { multi_label_prob: 1.5, ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(synth_generate(&cfg), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = tiny();
        d.save(dir.path()).unwrap();
        assert_eq!(PairedDataset::load(dir.path()).unwrap(), d);
        let meta = fs::read_to_string(dir.path().join(META_FILE)).unwrap();
        assert_eq!(meta, "n=3\nd_v=2\nd_t=1\nc=3\n");
        assert_eq!(fs::read(dir.path().join(IMG_FILE)).unwrap().len(), 3 * 2 * 4);
    }

    #[test]
    fn unknown_meta_keys_are_ignored() {
        let dir = tempfile::tempdir().unwrap();
        tiny().save(dir.path()).unwrap();
        fs::write(dir.path().join(META_FILE), "c=3\nsource=synthetic\nn=3\nd_t=1\nd_v=2\n").unwrap();
        assert_eq!(PairedDataset::load(dir.path()).unwrap(), tiny());
    }

    #[test]
    fn truncated_file_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        tiny().save(dir.path()).unwrap();
        let path = dir.path().join(TXT_FILE);
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 2]).unwrap();
        match PairedDataset::load(dir.path()) {
            Err(Error::Format { path: p, .. }) => assert_eq!(p, path),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn zero_label_row_rejected_with_index() {
        let dir = tempfile::tempdir().unwrap();
        tiny().save(dir.path()).unwrap();
        fs::write(dir.path().join(LABELS_FILE), [1u8, 0, 0, 0, 0, 0, 1, 0, 1]).unwrap();
        let err = PairedDataset::load(dir.path()).unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
    }

    #[test]
    fn split_examples() {
        let s = split(10, &SplitSpec { query: 0, train: 4, seed: 1 }).unwrap();
        assert_eq!(s.retrieval, (0..10).collect::<Vec<_>>());
        assert!(split(10, &SplitSpec { query: 10, train: 0, seed: 1 }).is_err());
        assert!(split(10, &SplitSpec { query: 3, train: 8, seed: 1 }).is_err());

        let s = split(100, &SplitSpec { query: 20, train: 50, seed: 9 }).unwrap();
        assert_eq!((s.query.len(), s.retrieval.len(), s.train.len()), (20, 80, 50));
        assert!(s.query.iter().all(|q| s.retrieval.binary_search(q).is_err()));
        assert!(s.train.iter().all(|t| s.retrieval.binary_search(t).is_ok()));
        assert_eq!(s, split(100, &SplitSpec { query: 20, train: 50, seed: 9 }).unwrap());
    }

    #[test]
    fn standardizer_uses_fit_rows_only() {
        let d = tiny();
        let z = d.standardized(&[0, 1]);
        // image column 0 fitted on {0.5, 2.0}: mean 1.25, sd 0.75
        let col = z.features(Modality::Image).column(0).to_vec();
        assert!((col[0] + 1.0).abs() < 1e-6 && (col[1] - 1.0).abs() < 1e-6);
        assert!((col[2] + 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn standardizer_file_round_trip() {
        let d = tiny();
        let (img, _) = d.fit_standardizers(&[0, 1, 2]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pxz");
        img.save(&path).unwrap();
        assert_eq!(Standardizer::load(&path).unwrap(), img);
        fs::write(&path, b"PXZ1\x02\0\0\0").unwrap();
        assert!(matches!(Standardizer::load(&path), Err(Error::Format { .. })));
        assert!(matches!(img.apply(d.features(Modality::Text)), Err(Error::Dimension { expected: 2, got: 1 })));
    }

    #[test]
    fn label_file_infers_categories() {
        let d = tiny();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.u8");
        write_labels(&path, d.labels()).unwrap();
        assert_eq!(&read_labels(&path, 3).unwrap(), d.labels());
        assert!(read_labels(&path, 2).is_err());
        fs::write(&path, [1u8, 0, 0, 0]).unwrap();
        let err = read_labels(&path, 2).unwrap_err().to_string();
        assert!(err.contains("row 1"), "{err}");
    }
}
