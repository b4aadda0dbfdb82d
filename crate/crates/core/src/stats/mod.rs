//! Empirical tests of edge limit laws.

pub mod gaps;
pub mod ks;
pub mod paths;
pub mod regression;
pub mod residual;
pub mod rigidity;
pub mod stieltjes;

use serde::Serialize;

use crate::error::{Error, Result};
use ks::{ks_two_sample, KsResult};

#[derive(Debug, Clone, Serialize)]
pub struct PairwiseKs {
    pub a: String,
    pub b: String,
    pub result: KsResult,
}

/// Two-sample KS between every pair of named samples of the edge statistic.
pub fn edge_law_compare(sources: &[(String, Vec<f64>)]) -> Result<Vec<PairwiseKs>> {
    if let Some((name, v)) = sources.iter().find(|(_, v)| v.len() < 500) {
        return Err(Error::InsufficientData(format!("{name}: {} samples, need 500", v.len())));
    }
    let mut out = Vec::new();
    for (p, (na, va)) in sources.iter().enumerate() {
        for (nb, vb) in &sources[p + 1..] {
            out.push(PairwiseKs {
                a: na.clone(),
                b: nb.clone(),
                result: ks_two_sample(va, vb),
            });
        }
    }
    Ok(out)
}
