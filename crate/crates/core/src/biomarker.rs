//! Per-patient feature ranking with a two-component PCA and cross-patient
//! top-k histograms.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::ingest::{Action, Session};
use crate::kinematics::FeatureMatrix;

/// Number of principal components kept.
pub const N_COMPONENTS: usize = 2;

/// Default number of features per patient entering the histogram.
pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BiomarkerError {
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("need at least {needed} columns, got {got}")]
    TooFewColumns { needed: usize, got: usize },
    #[error("rows have inconsistent widths")]
    RaggedRows,
    #[error("matrix has rank 0 after standardization")]
    DegenerateMatrix,
    #[error("eigendecomposition did not converge")]
    NoConvergence,
}

pub type Result<T> = std::result::Result<T, BiomarkerError>;

/// Column means and sample standard deviations used to standardize a matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    /// Columns with (numerically) zero variance; they standardize to zeros.
    pub zero_variance: Vec<bool>,
}

impl Standardization {
    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| {
                if self.zero_variance[j] {
                    0.0
                } else {
                    (v - self.means[j]) / self.sds[j]
                }
            })
            .collect()
    }
}

/// Zero mean, unit sample standard deviation per column.
pub fn standardize_rows(rows: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Standardization)> {
    let n = rows.len();
    if n < 2 {
        return Err(BiomarkerError::TooFewRows { needed: 2, got: n });
    }
    let p = rows[0].len();
    if rows.iter().any(|r| r.len() != p) {
        return Err(BiomarkerError::RaggedRows);
    }
    let mut means = vec![0.0; p];
    let mut sds = vec![0.0; p];
    let mut zero_variance = vec![false; p];
    for j in 0..p {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let ss = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>();
        let sd = (ss / (n - 1) as f64).sqrt();
        means[j] = mean;
        sds[j] = sd;
        zero_variance[j] = !(sd > 1e-12 * (1.0 + mean.abs()));
    }
    let params = Standardization {
        means,
        sds,
        zero_variance,
    };
    let out = rows.iter().map(|r| params.apply(r)).collect();
    Ok((out, params))
}

pub fn standardize(m: &FeatureMatrix) -> Result<(FeatureMatrix, Standardization)> {
    let (rows, params) = standardize_rows(&m.rows)?;
    Ok((FeatureMatrix { rows, ..m.clone() }, params))
}

/// Who a model or ranking belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Scope {
    pub patient_id: String,
    pub session: Option<Session>,
    /// `None` when both actions were pooled.
    pub action: Option<Action>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub scope: Scope,
    pub columns: Vec<String>,
    pub standardization: Standardization,
    /// Unit-norm loading vectors, strongest component first.
    pub components: [Vec<f64>; N_COMPONENTS],
    pub singular_values: [f64; N_COMPONENTS],
    pub explained_variance_ratio: [f64; N_COMPONENTS],
}

impl PcaModel {
    /// Scores of a raw (unstandardized) row on each component.
    pub fn transform(&self, row: &[f64]) -> [f64; N_COMPONENTS] {
        let z = self.standardization.apply(row);
        let mut out = [0.0; N_COMPONENTS];
        for (c, comp) in self.components.iter().enumerate() {
            out[c] = comp.iter().zip(&z).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// Standardized row rebuilt from its component scores.
    pub fn reconstruct_standardized(&self, scores: &[f64; N_COMPONENTS]) -> Vec<f64> {
        let mut out = vec![0.0; self.columns.len()];
        for (comp, s) in self.components.iter().zip(scores) {
            for (o, l) in out.iter_mut().zip(comp) {
                *o += s * l;
            }
        }
        out
    }
}

/// Two-component PCA of the standardized matrix.
pub fn pca_fit(m: &FeatureMatrix) -> Result<PcaModel> {
    let scope = Scope {
        patient_id: m.patient_id.clone(),
        session: Some(m.session),
        action: match m.actions_present()[..] {
            [only] => Some(only),
            _ => None,
        },
    };
    pca_fit_rows(&m.columns, &m.rows, scope)
}

pub fn pca_fit_rows(columns: &[String], rows: &[Vec<f64>], scope: Scope) -> Result<PcaModel> {
    let n = rows.len();
    if n < 3 {
        return Err(BiomarkerError::TooFewRows { needed: 3, got: n });
    }
    let p = columns.len();
    if p < N_COMPONENTS {
        return Err(BiomarkerError::TooFewColumns {
            needed: N_COMPONENTS,
            got: p,
        });
    }
    if rows.iter().any(|r| r.len() != p) {
        return Err(BiomarkerError::RaggedRows);
    }
    let (z, standardization) = standardize_rows(rows)?;

    // Eigenvectors of the Gram matrix are the right singular vectors of the
    // standardized data; its eigenvalues are the squared singular values.
    let x = DMatrix::from_fn(n, p, |i, j| z[i][j]);
    let gram = x.tr_mul(&x);
    let total = gram.trace();
    let eig = gram
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or(BiomarkerError::NoConvergence)?;
    let lambda = &eig.eigenvalues;

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| lambda[b].total_cmp(&lambda[a]));

    let top = lambda[order[0]];
    if !(top > 0.0) || !(total > 0.0) {
        return Err(BiomarkerError::DegenerateMatrix);
    }
    let rank_tol = n.max(p) as f64 * f64::EPSILON * top;

    let mut components: [Vec<f64>; N_COMPONENTS] = Default::default();
    let mut singular_values = [0.0; N_COMPONENTS];
    let mut ratio = [0.0; N_COMPONENTS];
    for c in 0..N_COMPONENTS {
        let k = order[c];
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        // Deterministic sign: the largest-magnitude loading is positive.
        let pivot = v
            .iter()
            .enumerate()
            .fold(0, |best, (j, x)| if x.abs() > v[best].abs() { j } else { best });
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components[c] = v;
        if lambda[k] > rank_tol {
            singular_values[c] = lambda[k].sqrt();
            ratio[c] = lambda[k] / total;
        }
    }

    Ok(PcaModel {
        scope,
        columns: columns.to_vec(),
        standardization,
        components,
        singular_values,
        explained_variance_ratio: ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub feature: String,
    pub score: f64,
}

/// Features ordered by importance, strongest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub scope: Scope,
    pub entries: Vec<FeatureScore>,
}

impl ImportanceRanking {
    /// Sorts scores descending. Scores equal to 12 decimal places keep the
    /// given (column) order.
    pub fn from_scores(scope: Scope, scores: Vec<FeatureScore>) -> Self {
        let mut indexed: Vec<(usize, FeatureScore)> = scores.into_iter().enumerate().collect();
        indexed.sort_by_key(|(i, s)| (std::cmp::Reverse((s.score * 1e12).round() as i64), *i));
        ImportanceRanking {
            scope,
            entries: indexed.into_iter().map(|(_, s)| s).collect(),
        }
    }

    pub fn score_of(&self, feature: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.feature == feature).map(|e| e.score)
    }
}

/// Explained-variance-weighted absolute loadings, normalized to sum to one.
pub fn feature_importance(model: &PcaModel) -> ImportanceRanking {
    let mut raw: Vec<f64> = vec![0.0; model.columns.len()];
    for (comp, w) in model.components.iter().zip(&model.explained_variance_ratio) {
        for (r, l) in raw.iter_mut().zip(comp) {
            *r += w * l.abs();
        }
    }
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.iter_mut().for_each(|r| *r /= total);
    }
    let scores = model
        .columns
        .iter()
        .zip(raw)
        .map(|(feature, score)| FeatureScore {
            feature: feature.clone(),
            score,
        })
        .collect();
    ImportanceRanking::from_scores(model.scope.clone(), scores)
}

pub fn top_k_features(r: &ImportanceRanking, k: usize) -> Vec<String> {
    r.entries.iter().take(k).map(|e| e.feature.clone()).collect()
}

/// Number of patients listing each feature in their top-k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiomarkerHistogram {
    pub action: Action,
    /// Features in order of first appearance across the input lists.
    pub counts: Vec<(String, usize)>,
}

impl BiomarkerHistogram {
    pub fn count(&self, feature: &str) -> usize {
        self.counts.iter().find(|(f, _)| f == feature).map_or(0, |(_, c)| *c)
    }

    pub fn total(&self) -> usize {
        self.counts.iter().map(|(_, c)| c).sum()
    }

    /// Descending by count; equal counts keep first-appearance order.
    pub fn sorted(&self) -> Vec<(String, usize)> {
        let mut out = self.counts.clone();
        out.sort_by_key(|(_, c)| std::cmp::Reverse(*c));
        out
    }

    /// `feature,count`, sorted descending.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["feature", "count"])?;
        for (f, c) in self.sorted() {
            w.write_record([f, c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn aggregate_histogram(per_patient: &[Vec<String>], action: Action) -> BiomarkerHistogram {
    let mut counts: Vec<(String, usize)> = Vec::new();
    for list in per_patient {
        for (i, feature) in list.iter().enumerate() {
            if list[..i].contains(feature) {
                continue;
            }
            match counts.iter_mut().find(|(f, _)| f == feature) {
                Some((_, c)) => *c += 1,
                None => counts.push((feature.clone(), 1)),
            }
        }
    }
    BiomarkerHistogram { action, counts }
}
