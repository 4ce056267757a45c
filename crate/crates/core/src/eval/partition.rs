use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};

/// Cluster label of every element.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Partition {
    pub labels: BTreeMap<String, usize>,
}

impl Partition {
    pub fn new(labels: BTreeMap<String, usize>) -> Self {
        Self { labels }
    }

    /// Both label vectors in a common element order.
    fn aligned(&self, other: &Partition) -> Result<(Vec<usize>, Vec<usize>)> {
        if self.labels.len() != other.labels.len() || self.labels.keys().zip(other.labels.keys()).any(|(a, b)| a != b) {
            return Err(Error::Data("partitions cover different element sets".into()));
        }
        Ok((self.labels.values().copied().collect(), other.labels.values().copied().collect()))
    }
}

/// Relabels to `0..k` by first appearance.
fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut names = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = names.len();
            *names.entry(*l).or_insert(next)
        })
        .collect()
}

/// Contingency counts with row and column sums.
struct Contingency {
    n: usize,
    cells: Vec<usize>,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

impl Contingency {
    fn new(a: &[usize], b: &[usize]) -> Self {
        let (a, b) = (canonical(a), canonical(b));
        let r = a.iter().max().map_or(0, |m| m + 1);
        let c = b.iter().max().map_or(0, |m| m + 1);
        let mut cells = vec![0; r * c];
        let mut rows = vec![0; r];
        let mut cols = vec![0; c];
        for (&i, &j) in a.iter().zip(&b) {
            cells[i * c + j] += 1;
            rows[i] += 1;
            cols[j] += 1;
        }
        Self { n: a.len(), cells, rows, cols }
    }
}

fn pairs(k: usize) -> u128 {
    let k = k as u128;
    k * k.saturating_sub(1) / 2
}

/// Adjusted Rand index of two label vectors over the same elements.
pub fn ari_from_labels(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "label vectors differ in length");
    let t = Contingency::new(a, b);
    let index: u128 = t.cells.iter().map(|&c| pairs(c)).sum();
    let sa: u128 = t.rows.iter().map(|&c| pairs(c)).sum();
    let sb: u128 = t.cols.iter().map(|&c| pairs(c)).sum();
    let total = pairs(t.n);
    // max - expected = ((sa + sb) / 2 - sa sb / total), scaled by 2 total
    let denom = total * (sa + sb) - 2 * sa * sb;
    if total == 0 || denom == 0 {
        return 1.0;
    }
    let num = 2.0 * (total as f64 * index as f64 - sa as f64 * sb as f64);
    num / denom as f64
}

pub fn adjusted_rand_index(p: &Partition, q: &Partition) -> Result<f64> {
    let (a, b) = p.aligned(q)?;
    Ok(ari_from_labels(&a, &b))
}

fn entropy(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

fn mutual_information(t: &Contingency) -> f64 {
    let n = t.n as f64;
    let c = t.cols.len();
    let mut mi = 0.0;
    for (i, &ai) in t.rows.iter().enumerate() {
        for (j, &bj) in t.cols.iter().enumerate() {
            let nij = t.cells[i * c + j];
            if nij > 0 {
                let nij = nij as f64;
                mi += nij / n * (n * nij / (ai as f64 * bj as f64)).ln();
            }
        }
    }
    mi
}

/// Expected mutual information of two partitions with the given cluster
/// sizes under the hypergeometric (permutation) model.
pub fn expected_mutual_information(rows: &[usize], cols: &[usize]) -> f64 {
    let n: usize = rows.iter().sum();
    assert_eq!(n, cols.iter().sum::<usize>(), "marginals disagree");
    let mut lf = vec![0.0f64; n + 1];
    for k in 1..=n {
        lf[k] = lf[k - 1] + (k as f64).ln();
    }
    let nf = n as f64;
    let mut emi = 0.0;
    for &a in rows {
        for &b in cols {
            let lo = (a + b).saturating_sub(n).max(1);
            let hi = a.min(b);
            for k in lo..=hi {
                let log_p = lf[a] + lf[b] + lf[n - a] + lf[n - b]
                    - lf[n]
                    - lf[k]
                    - lf[a - k]
                    - lf[b - k]
                    - lf[n + k - a - b];
                let kf = k as f64;
                emi += kf / nf * (nf * kf / (a as f64 * b as f64)).ln() * log_p.exp();
            }
        }
    }
    emi
}

/// Adjusted mutual information with max-entropy normalisation:
/// `(MI - E[MI]) / (max(H(a), H(b)) - E[MI])`. Identical partitions score
/// exactly 1; otherwise a vanishing denominator gives 0.
pub fn ami_from_labels(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "label vectors differ in length");
    // identical partitions: MI equals both entropies, so exactly 1
    if canonical(a) == canonical(b) {
        return 1.0;
    }
    let t = Contingency::new(a, b);
    let mi = mutual_information(&t);
    let emi = expected_mutual_information(&t.rows, &t.cols);
    let h = entropy(&t.rows, t.n).max(entropy(&t.cols, t.n));
    let denom = h - emi;
    if denom.abs() < 1e-12 {
        return 0.0;
    }
    (mi - emi) / denom
}

pub fn adjusted_mutual_information(p: &Partition, q: &Partition) -> Result<f64> {
    let (a, b) = p.aligned(q)?;
    Ok(ami_from_labels(&a, &b))
}
