//! JSON certificates for monochromatic sumsets and their re-verification.
//!
//! A certificate lists the set `X`, the claimed color and every element of
//! `X + X` with its color. [`verify_certificate`] recomputes all of it from
//! `X` and the oracle, trusting nothing else in the document.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::oracle::{ColoredSum, ColoringOracle, OracleError, WitnessCertificate};
use crate::pattern::IndexFamily;
use crate::pipeline2::CaseTag;
use crate::qvec::{sumset, QVec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    /// `construct2` or `construct-r`.
    pub pipeline: String,
    /// Oracle descriptor; absent for in-memory tables.
    pub oracle: Option<String>,
    pub r: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<CaseTag>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rho: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub families: Option<Vec<IndexFamily>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_levels: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_prime: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    pub color: usize,
    #[serde(rename = "X")]
    pub x: Vec<QVec>,
    pub sums: Vec<ColoredSum>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// The run configuration that produced this certificate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl Certificate {
    pub(crate) fn from_witness(pipeline: &str, oracle: &ColoringOracle, w: &WitnessCertificate) -> Self {
        Certificate {
            pipeline: pipeline.to_string(),
            oracle: oracle.descriptor(),
            r: oracle.r(),
            case: None,
            a: None,
            top: None,
            rho: Vec::new(),
            families: None,
            rho_levels: None,
            l_prime: None,
            l: None,
            color: w.color,
            x: w.x.clone(),
            sums: w.sums.clone(),
            note: None,
            config: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("certificate serializes");
        s.push('\n');
        s
    }
}

/// Ways a certificate can fail re-verification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Defect {
    EmptyX,
    /// A sum of `X + X` that the certificate does not list.
    MissingSum(QVec),
    /// A listed vector that is not in `X + X`.
    ExtraSum(QVec),
    DuplicateSum(QVec),
    /// Listed color differs from the oracle.
    WrongColor { vector: QVec, listed: usize, actual: usize },
    /// Oracle color differs from the claimed common color.
    NotMonochromatic { vector: QVec, claimed: usize, actual: usize },
    ColorCountMismatch { certificate: usize, oracle: usize },
}

/// Recomputes `X + X` and every color. An empty defect list means the
/// certificate is sound.
pub fn verify_certificate(cert: &Certificate, oracle: &ColoringOracle) -> Result<Vec<Defect>, OracleError> {
    let mut defects = Vec::new();
    if cert.r != oracle.r() {
        defects.push(Defect::ColorCountMismatch {
            certificate: cert.r,
            oracle: oracle.r(),
        });
    }
    if cert.x.is_empty() {
        defects.push(Defect::EmptyX);
        return Ok(defects);
    }
    let actual: BTreeSet<QVec> = sumset(&cert.x);
    let mut listed = BTreeSet::new();
    for s in &cert.sums {
        if !listed.insert(s.vector.clone()) {
            defects.push(Defect::DuplicateSum(s.vector.clone()));
        }
        if !actual.contains(&s.vector) {
            defects.push(Defect::ExtraSum(s.vector.clone()));
        }
    }
    for v in actual.difference(&listed) {
        defects.push(Defect::MissingSum(v.clone()));
    }
    for s in &cert.sums {
        let c = oracle.color(&s.vector)?;
        if c != s.color {
            defects.push(Defect::WrongColor {
                vector: s.vector.clone(),
                listed: s.color,
                actual: c,
            });
        }
    }
    for v in &actual {
        let c = oracle.color(v)?;
        if c != cert.color {
            defects.push(Defect::NotMonochromatic {
                vector: v.clone(),
                claimed: cert.color,
                actual: c,
            });
        }
    }
    Ok(defects)
}
