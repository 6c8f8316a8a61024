//! Hamming ranking and hash lookup evaluation.
//!
//! A query and a retrieval item are relevant to each other when they share
//! at least one label. Rankings are exhaustive, sorted by Hamming distance
//! with ties broken by ascending retrieval index, so every metric is
//! deterministic. Per-query work runs on the rayon pool; results are merged
//! in query order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;

use crate::codespace::{hamming_unchecked, BinaryCode};
use crate::error::{check_dim, Error, Result};

/// Codes with their multi-hot label rows.
#[derive(Clone, Debug)]
pub struct RetrievalSet {
    k: usize,
    codes: Vec<BinaryCode>,
    labels: Vec<Vec<u64>>,
    categories: usize,
}

impl RetrievalSet {
    pub fn new(codes: Vec<BinaryCode>, labels: &Array2<u8>) -> Result<Self> {
        check_dim(codes.len(), labels.nrows())?;
        let k = codes.first().map_or(0, BinaryCode::len);
        for code in &codes {
            check_dim(k, code.len())?;
        }
        let categories = labels.ncols();
        let words = categories.div_ceil(64);
        let labels = labels
            .rows()
            .into_iter()
            .map(|row| {
                let mut bits = vec![0u64; words];
                for (j, &l) in row.iter().enumerate() {
                    if l != 0 {
                        bits[j / 64] |= 1 << (j % 64);
                    }
                }
                bits
            })
            .collect();
        Ok(Self { k, codes, labels, categories })
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn bits(&self) -> usize {
        self.k
    }

    pub fn codes(&self) -> &[BinaryCode] {
        &self.codes
    }

    fn relevant(&self, query_labels: &[u64], i: usize) -> bool {
        self.labels[i].iter().zip(query_labels).any(|(a, b)| a & b != 0)
    }

    fn check_compatible(&self, other: &RetrievalSet) -> Result<()> {
        if !self.is_empty() && !other.is_empty() {
            check_dim(self.k, other.k)?;
        }
        check_dim(self.categories, other.categories)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankedList {
    pub indices: Vec<usize>,
    pub distances: Vec<u32>,
}

/// All items by ascending Hamming distance to `query`, stable by index.
pub fn rank(query: &BinaryCode, set: &RetrievalSet) -> Result<RankedList> {
    if !set.is_empty() {
        check_dim(set.k, query.len())?;
    }
    let k = query.len();
    let distances: Vec<u32> = set.codes.iter().map(|c| hamming_unchecked(query, c)).collect();
    // Counting sort over the k + 1 possible distances keeps index order.
    let mut start = vec![0usize; k + 2];
    for &d in &distances {
        start[d as usize + 1] += 1;
    }
    for r in 1..start.len() {
        start[r] += start[r - 1];
    }
    let mut indices = vec![0; distances.len()];
    let mut sorted = vec![0; distances.len()];
    for (i, &d) in distances.iter().enumerate() {
        let slot = &mut start[d as usize];
        indices[*slot] = i;
        sorted[*slot] = d;
        *slot += 1;
    }
    Ok(RankedList { indices, distances: sorted })
}

/// AP over the first `n` entries of a ranked relevance list:
/// Σ_{i≤n} I(i)/N · (Σ_{j≤i} I(j))/i with N relevant entries in the top n.
/// Zero when nothing in the top n is relevant.
pub fn average_precision(relevance: &[bool], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("AP cutoff must be positive".into()));
    }
    if n > relevance.len() {
        return Err(Error::InvalidInput(format!(
            "AP cutoff {n} exceeds list length {}",
            relevance.len()
        )));
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &rel) in relevance[..n].iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(if hits == 0 { 0.0 } else { sum / hits as f64 })
}

fn ranked_relevance(queries: &RetrievalSet, q: usize, set: &RetrievalSet) -> Vec<bool> {
    let ranked = rank(&queries.codes[q], set).expect("dimensions checked by caller");
    ranked
        .indices
        .iter()
        .map(|&i| set.relevant(&queries.labels[q], i))
        .collect()
}

pub fn per_query_average_precision(queries: &RetrievalSet, set: &RetrievalSet, n: usize) -> Result<Vec<f64>> {
    if queries.is_empty() {
        return Err(Error::InvalidInput("query set is empty".into()));
    }
    if set.is_empty() {
        return Err(Error::InvalidInput("retrieval set is empty".into()));
    }
    queries.check_compatible(set)?;
    let cutoff = n.min(set.len());
    (0..queries.len())
        .into_par_iter()
        .map(|q| average_precision(&ranked_relevance(queries, q, set), cutoff))
        .collect()
}

/// Mean AP over all queries at cutoff `min(n, |set|)`.
pub fn mean_average_precision(queries: &RetrievalSet, set: &RetrievalSet, n: usize) -> Result<f64> {
    let aps = per_query_average_precision(queries, set, n)?;
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}

/// Fraction of relevant items among the top `n` ranked for one query.
pub fn precision_at_n(query: &BinaryCode, query_labels: &[u8], set: &RetrievalSet, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("N must be positive".into()));
    }
    if n > set.len() {
        return Err(Error::InvalidInput(format!("N = {n} exceeds set size {}", set.len())));
    }
    check_dim(set.categories, query_labels.len())?;
    let qset = RetrievalSet::new(
        vec![query.clone()],
        &Array2::from_shape_vec((1, query_labels.len()), query_labels.to_vec()).unwrap(),
    )?;
    qset.check_compatible(set)?;
    let rel = ranked_relevance(&qset, 0, set);
    Ok(rel[..n].iter().filter(|&&r| r).count() as f64 / n as f64)
}

/// Mean precision over queries at each requested `N` (values above the set
/// size are dropped).
pub fn precision_curve(queries: &RetrievalSet, set: &RetrievalSet, cutoffs: &[usize]) -> Result<Vec<(usize, f64)>> {
    if queries.is_empty() {
        return Err(Error::InvalidInput("query set is empty".into()));
    }
    queries.check_compatible(set)?;
    let cutoffs: Vec<usize> = cutoffs.iter().copied().filter(|&n| n > 0 && n <= set.len()).collect();
    let per_query: Vec<Vec<f64>> = (0..queries.len())
        .into_par_iter()
        .map(|q| {
            let rel = ranked_relevance(queries, q, set);
            let mut prefix = Vec::with_capacity(rel.len() + 1);
            prefix.push(0usize);
            for r in &rel {
                prefix.push(prefix.last().unwrap() + usize::from(*r));
            }
            cutoffs.iter().map(|&n| prefix[n] as f64 / n as f64).collect()
        })
        .collect();
    Ok(cutoffs
        .iter()
        .enumerate()
        .map(|(c, &n)| {
            let mean = per_query.iter().map(|p| p[c]).sum::<f64>() / per_query.len() as f64;
            (n, mean)
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrPoint {
    pub radius: u32,
    /// Mean over queries that retrieve at least one item at this radius.
    pub precision: f64,
    /// Mean over queries with at least one relevant item in the set.
    pub recall: f64,
    /// Number of queries whose lookup at this radius is non-empty.
    pub retrieved: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    /// Queries with no relevant item in the set, left out of recall.
    pub excluded_queries: Vec<usize>,
}

/// Per-query cumulative (retrieved, relevant retrieved) counts by radius,
/// plus the total relevant count.
fn radius_counts(queries: &RetrievalSet, q: usize, set: &RetrievalSet) -> (Vec<(usize, usize)>, usize) {
    let k = set.k;
    let mut hist = vec![(0usize, 0usize); k + 1];
    let mut total = 0;
    for (i, code) in set.codes.iter().enumerate() {
        let d = hamming_unchecked(&queries.codes[q], code) as usize;
        hist[d].0 += 1;
        if set.relevant(&queries.labels[q], i) {
            hist[d].1 += 1;
            total += 1;
        }
    }
    for r in 1..=k {
        hist[r].0 += hist[r - 1].0;
        hist[r].1 += hist[r - 1].1;
    }
    (hist, total)
}

/// Precision and recall of hash lookup at every radius 0..=k.
pub fn pr_curve(queries: &RetrievalSet, set: &RetrievalSet) -> Result<PrCurve> {
    if queries.is_empty() || set.is_empty() {
        return Err(Error::InvalidInput("query and retrieval sets must be non-empty".into()));
    }
    queries.check_compatible(set)?;
    let counts: Vec<(Vec<(usize, usize)>, usize)> = (0..queries.len())
        .into_par_iter()
        .map(|q| radius_counts(queries, q, set))
        .collect();
    let excluded_queries: Vec<usize> = counts
        .iter()
        .enumerate()
        .filter(|(_, (_, total))| *total == 0)
        .map(|(q, _)| q)
        .collect();
    let recall_queries = queries.len() - excluded_queries.len();

    let points = (0..=set.k)
        .map(|r| {
            let (mut psum, mut rsum, mut retrieved) = (0.0, 0.0, 0);
            for (hist, total) in &counts {
                let (got, hit) = hist[r];
                if got > 0 {
                    psum += hit as f64 / got as f64;
                    retrieved += 1;
                }
                if *total > 0 {
                    rsum += hit as f64 / *total as f64;
                }
            }
            PrPoint {
                radius: r as u32,
                precision: if retrieved > 0 { psum / retrieved as f64 } else { 0.0 },
                recall: if recall_queries > 0 { rsum / recall_queries as f64 } else { 0.0 },
                retrieved,
            }
        })
        .collect();
    Ok(PrCurve { points, excluded_queries })
}

/// One row of `map.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct MapRow {
    pub task: String,
    pub bits: usize,
    pub map: f64,
}

pub fn write_map_csv(path: &Path, rows: &[MapRow]) -> Result<()> {
    let mut s = String::from("task,bits,map\n");
    for r in rows {
        writeln!(s, "{},{},{:.6}", r.task, r.bits, r.map).unwrap();
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn write_pn_csv(path: &Path, curve: &[(usize, f64)]) -> Result<()> {
    let mut s = String::from("N,precision\n");
    for (n, p) in curve {
        writeln!(s, "{n},{p:.6}").unwrap();
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn write_pr_csv(path: &Path, curve: &PrCurve) -> Result<()> {
    let mut s = String::from("radius,precision,recall,retrieved\n");
    for p in &curve.points {
        writeln!(s, "{},{:.6},{:.6},{}", p.radius, p.precision, p.recall, p.retrieved).unwrap();
    }
    fs::write(path, s)?;
    Ok(())
}
