use crate::error::{Error, Result};
use crate::net::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseReport {
    /// Mean over dimensions of the population variance across the batch.
    pub variance: f64,
    pub collapsed: bool,
    /// Batch mean; the constant the map sits at when collapsed.
    pub centroid: Vec<f64>,
}

pub fn detect_collapse<T: Scalar>(embeddings: &[Vec<T>], threshold: f64) -> Result<CollapseReport> {
    if embeddings.len() < 2 {
        return Err(Error::InsufficientInput("collapse check needs at least two embeddings".into()));
    }
    let d = embeddings[0].len();
    if d == 0 || embeddings.iter().any(|e| e.len() != d) {
        return Err(Error::Shape("embeddings differ in dimension".into()));
    }
    let n = embeddings.len() as f64;
    let mut centroid = vec![0.0; d];
    for e in embeddings {
        centroid.iter_mut().zip(e).for_each(|(c, &v)| *c += v.as_f64());
    }
    centroid.iter_mut().for_each(|c| *c /= n);
    let mut var = 0.0;
    for e in embeddings {
        var += e
            .iter()
            .zip(&centroid)
            .map(|(&v, &c)| (v.as_f64() - c).powi(2))
            .sum::<f64>();
    }
    let variance = var / (n * d as f64);
    Ok(CollapseReport {
        variance,
        collapsed: variance < threshold,
        centroid,
    })
}
