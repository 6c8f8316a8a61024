//! Binary and continuous code representations and Hamming-space primitives.
//!
//! A [`BinaryCode`] stores a vector over {−1, +1} packed into 64-bit words:
//! element `j` lives in bit `j % 64` of word `j / 64`, a set bit meaning +1.
//! Bits past `k` in the last word are always zero, so two codes of the same
//! length can be compared word by word.
//!
//! The packed code file (`PXH1`) is:
//!
//! ```text
//! b"PXH1" | n: u32 LE | k: u32 LE | n × ceil(k/64) × u64 LE
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{check_dim, Error, Result};

const CODE_MAGIC: &[u8; 4] = b"PXH1";

#[inline]
pub(crate) fn words_for(k: usize) -> usize {
    k.div_ceil(64)
}

/// A length-`k` code over {−1, +1}, bit-packed LSB-first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryCode {
    k: usize,
    words: Vec<u64>,
}

impl BinaryCode {
    /// The all-(−1) code.
    pub fn negative_ones(k: usize) -> Self {
        Self { k, words: vec![0; words_for(k)] }
    }

    pub fn from_signs(signs: &[i8]) -> Result<Self> {
        if signs.is_empty() {
            return Err(Error::InvalidInput("code length must be positive".into()));
        }
        let mut code = Self::negative_ones(signs.len());
        for (j, &s) in signs.iter().enumerate() {
            match s {
                1 => code.words[j / 64] |= 1 << (j % 64),
                -1 => {}
                other => {
                    return Err(Error::InvalidInput(format!(
                        "element {j} is {other}, expected -1 or +1"
                    )))
                }
            }
        }
        Ok(code)
    }

    /// Builds a code from raw packed words, rejecting nonzero padding.
    pub fn from_words(k: usize, words: Vec<u64>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("code length must be positive".into()));
        }
        check_dim(words_for(k), words.len())?;
        let used = k % 64;
        if used != 0 {
            let last = words[words.len() - 1];
            if last >> used != 0 {
                return Err(Error::InvalidInput(format!(
                    "padding bits above bit {k} are not zero"
                )));
            }
        }
        Ok(Self { k, words })
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Element `j` as ±1.
    #[inline]
    pub fn get(&self, j: usize) -> i8 {
        assert!(j < self.k, "index {j} out of range for code of length {}", self.k);
        if (self.words[j / 64] >> (j % 64)) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    pub fn to_signs(&self) -> Vec<i8> {
        (0..self.k).map(|j| self.get(j)).collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.k).map(|j| f64::from(self.get(j))).collect()
    }

    /// The antipodal code (every element negated).
    pub fn negated(&self) -> Self {
        let mut words: Vec<u64> = self.words.iter().map(|w| !w).collect();
        let used = self.k % 64;
        if used != 0 {
            let last = words.len() - 1;
            words[last] &= (1u64 << used) - 1;
        }
        Self { k: self.k, words }
    }

    /// Real inner product with a real vector of the same length.
    pub fn dot_real(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.k);
        v.iter()
            .enumerate()
            .map(|(j, &x)| if self.get(j) > 0 { x } else { -x })
            .sum()
    }
}

/// A length-`k` real code with finite entries in [−1, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct ContinuousCode(Vec<f64>);

impl ContinuousCode {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("code length must be positive".into()));
        }
        if let Some((j, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || v.abs() > 1.0)
        {
            return Err(Error::InvalidInput(format!(
                "element {j} = {v} is not a finite value in [-1, 1]"
            )));
        }
        Ok(Self(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<&BinaryCode> for ContinuousCode {
    fn from(code: &BinaryCode) -> Self {
        Self(code.to_f64())
    }
}

/// One learned proxy code per category.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProxyCodebook {
    k: usize,
    codes: Vec<BinaryCode>,
}

impl ProxyCodebook {
    pub fn new(codes: Vec<BinaryCode>) -> Result<Self> {
        let first = codes
            .first()
            .ok_or_else(|| Error::InvalidInput("codebook needs at least one category".into()))?;
        let k = first.len();
        for code in &codes {
            check_dim(k, code.len())?;
        }
        Ok(Self { k, codes })
    }

    /// Number of categories.
    pub fn categories(&self) -> usize {
        self.codes.len()
    }

    pub fn bits(&self) -> usize {
        self.k
    }

    pub fn code(&self, category: usize) -> &BinaryCode {
        &self.codes[category]
    }

    pub fn codes(&self) -> &[BinaryCode] {
        &self.codes
    }
}

/// Element-wise sign with the tie rule sgn(0) = +1.
pub fn sgn(v: &[f64]) -> Result<BinaryCode> {
    if v.is_empty() {
        return Err(Error::InvalidInput("code length must be positive".into()));
    }
    let mut code = BinaryCode::negative_ones(v.len());
    for (j, &x) in v.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::InvalidInput(format!("element {j} is not finite")));
        }
        if x >= 0.0 {
            code.words[j / 64] |= 1 << (j % 64);
        }
    }
    Ok(code)
}

/// Σ a_j·b_j, computed as k − 2·popcount(a xor b).
pub fn inner_product(a: &BinaryCode, b: &BinaryCode) -> Result<i64> {
    let d = hamming_distance(a, b)?;
    Ok(a.k as i64 - 2 * d as i64)
}

pub fn hamming_distance(a: &BinaryCode, b: &BinaryCode) -> Result<u32> {
    check_dim(a.k, b.k)?;
    Ok(hamming_unchecked(a, b))
}

#[inline]
pub(crate) fn hamming_unchecked(a: &BinaryCode, b: &BinaryCode) -> u32 {
    a.words
        .iter()
        .zip(&b.words)
        .map(|(x, y)| (x ^ y).count_ones())
        .sum()
}

/// Mean of the proxy codes of the positive categories, as exact reals.
pub fn surrogate_proxy(codebook: &ProxyCodebook, positives: &[usize]) -> Result<ContinuousCode> {
    if positives.is_empty() {
        return Err(Error::InvalidLabel("positive category set is empty".into()));
    }
    let mut acc = vec![0.0; codebook.k];
    for &e in positives {
        if e >= codebook.categories() {
            return Err(Error::InvalidLabel(format!(
                "category {e} out of range for {} categories",
                codebook.categories()
            )));
        }
        let code = codebook.code(e);
        for (j, a) in acc.iter_mut().enumerate() {
            *a += f64::from(code.get(j));
        }
    }
    let scale = 1.0 / positives.len() as f64;
    acc.iter_mut().for_each(|a| *a *= scale);
    Ok(ContinuousCode(acc))
}

pub fn write_codes_to<W: Write>(mut w: W, codes: &[BinaryCode]) -> Result<()> {
    let k = codes.first().map_or(0, BinaryCode::len);
    if let Some(bad) = codes.iter().find(|c| c.len() != k) {
        return Err(Error::Dimension { expected: k, got: bad.len() });
    }
    w.write_all(CODE_MAGIC)?;
    w.write_all(&(codes.len() as u32).to_le_bytes())?;
    w.write_all(&(k as u32).to_le_bytes())?;
    for code in codes {
        for word in &code.words {
            w.write_all(&word.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a packed code file; returns the code length alongside the codes so
/// an empty file still reports `k`.
pub fn read_codes_from<R: Read>(mut r: R, path: &Path) -> Result<(usize, Vec<BinaryCode>)> {
    let fmt = |msg: String| Error::Format { path: path.to_path_buf(), msg };
    let mut header = [0u8; 12];
    r.read_exact(&mut header)
        .map_err(|_| fmt("truncated header".into()))?;
    if &header[..4] != CODE_MAGIC {
        return Err(fmt("bad magic, expected PXH1".into()));
    }
    let n = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let k = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    if k == 0 {
        return Err(fmt("code length is zero".into()));
    }
    let per = words_for(k);
    let mut codes = Vec::with_capacity(n.min(1 << 20));
    let mut buf = vec![0u8; per * 8];
    for i in 0..n {
        r.read_exact(&mut buf)
            .map_err(|_| fmt(format!("truncated at record {i} of {n}")))?;
        let words = buf
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let code = BinaryCode::from_words(k, words).map_err(|e| fmt(format!("record {i}: {e}")))?;
        codes.push(code);
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(fmt("trailing bytes after last record".into()));
    }
    Ok((k, codes))
}

pub fn write_codes(path: &Path, codes: &[BinaryCode]) -> Result<()> {
    write_codes_to(BufWriter::new(File::create(path)?), codes)
}

pub fn read_codes(path: &Path) -> Result<(usize, Vec<BinaryCode>)> {
    let file = File::open(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    read_codes_from(BufReader::new(file), path)
}

pub fn write_codebook(path: &Path, codebook: &ProxyCodebook) -> Result<()> {
    write_codes(path, codebook.codes())
}

pub fn read_codebook(path: &Path) -> Result<ProxyCodebook> {
    let (_, codes) = read_codes(path)?;
    ProxyCodebook::new(codes).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}
