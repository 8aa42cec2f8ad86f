//! Base probability objects and the one-step conditional weighting shared by
//! every dependency structure.
//!
//! A dependent draw conditioned on a parent outcome `i` puts mass
//! `p_i + δ(1 − p_i)` back on `i` and `p_j(1 − δ)` on every other category.
//! Category indices are 1-based at the public surface.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance accepted when constructing a [`Marginal`].
pub const MARGINAL_SUM_TOLERANCE: f64 = 1e-9;

/// Tolerance for algebraic identities on kernels (row sums, affine form).
pub const KERNEL_TOLERANCE: f64 = 1e-12;

/// Base category distribution `p` of the first element of every sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Marginal {
    probs: Vec<f64>,
}

impl Marginal {
    /// Validates `probs` without renormalizing.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::TooFewCategories(probs.len()));
        }
        for (idx, &value) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::ProbabilityOutOfRange { index: idx + 1, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > MARGINAL_SUM_TOLERANCE {
            return Err(Error::NotNormalized {
                sum,
                tolerance: MARGINAL_SUM_TOLERANCE,
            });
        }
        Ok(Marginal { probs })
    }

    /// Uniform distribution over `k` categories.
    pub fn uniform(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::TooFewCategories(k));
        }
        Marginal::new(vec![1.0 / k as f64; k])
    }

    /// Two-category marginal `(p, 1 − p)`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        Marginal::new(vec![p, 1.0 - p])
    }

    pub fn categories(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `p_j` for a 1-based category `j`.
    pub fn prob(&self, j: usize) -> Result<f64> {
        self.check_category(j)?;
        Ok(self.probs[j - 1])
    }

    pub(crate) fn check_category(&self, j: usize) -> Result<()> {
        if j == 0 || j > self.probs.len() {
            return Err(Error::CategoryIndex {
                index: j,
                categories: self.probs.len(),
            });
        }
        Ok(())
    }
}

impl<'de> Deserialize<'de> for Marginal {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let probs = Vec::<f64>::deserialize(de)?;
        Marginal::new(probs).map_err(serde::de::Error::custom)
    }
}

/// Dependency strength `δ ∈ [0, 1]`; 0 is independence, 1 copies the parent.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct DependencyCoefficient(f64);

impl DependencyCoefficient {
    pub const INDEPENDENT: DependencyCoefficient = DependencyCoefficient(0.0);
    pub const FULL: DependencyCoefficient = DependencyCoefficient(1.0);

    pub fn new(delta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::CoefficientOutOfRange(delta));
        }
        Ok(DependencyCoefficient(delta))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl<'de> Deserialize<'de> for DependencyCoefficient {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let delta = f64::deserialize(de)?;
        DependencyCoefficient::new(delta).map_err(serde::de::Error::custom)
    }
}

/// `P(ε_n = j | ε_α(n) = j) = p_j + δ(1 − p_j)`.
pub fn p_plus(p: &Marginal, delta: DependencyCoefficient, j: usize) -> Result<f64> {
    let pj = p.prob(j)?;
    Ok(pj + delta.0 * (1.0 - pj))
}

/// `P(ε_n = j | ε_α(n) = i) = p_j − δ p_j` for `i ≠ j`.
pub fn p_minus(p: &Marginal, delta: DependencyCoefficient, j: usize) -> Result<f64> {
    let pj = p.prob(j)?;
    Ok(pj - delta.0 * pj)
}

/// Row-stochastic `K × K` matrix of one-step conditionals. Row `i` is the
/// distribution of a child given its parent took category `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    k: usize,
    // row-major
    entries: Vec<f64>,
}

impl TransitionKernel {
    pub fn categories(&self) -> usize {
        self.k
    }

    /// Entry for 1-based `(from, to)`.
    pub fn get(&self, from: usize, to: usize) -> Result<f64> {
        for idx in [from, to] {
            if idx == 0 || idx > self.k {
                return Err(Error::CategoryIndex {
                    index: idx,
                    categories: self.k,
                });
            }
        }
        Ok(self.entries[(from - 1) * self.k + (to - 1)])
    }

    /// Row for a 0-based conditioning category.
    pub fn row(&self, from: usize) -> &[f64] {
        &self.entries[from * self.k..(from + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks_exact(self.k)
    }

    /// Largest deviation of any row sum from 1.
    pub fn max_row_sum_error(&self) -> f64 {
        self.rows()
            .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `k`-step kernel by repeated multiplication.
    pub fn power(&self, steps: usize) -> Vec<f64> {
        let k = self.k;
        let mut acc = vec![0.0; k * k];
        for i in 0..k {
            acc[i * k + i] = 1.0;
        }
        for _ in 0..steps {
            let mut next = vec![0.0; k * k];
            for i in 0..k {
                for l in 0..k {
                    let a = acc[i * k + l];
                    if a == 0.0 {
                        continue;
                    }
                    for j in 0..k {
                        next[i * k + j] += a * self.entries[l * k + j];
                    }
                }
            }
            acc = next;
        }
        acc
    }
}

/// Builds the kernel with `p_i⁺` on the diagonal and `p_j⁻` elsewhere.
pub fn transition_kernel(p: &Marginal, delta: DependencyCoefficient) -> TransitionKernel {
    let k = p.categories();
    let d = delta.value();
    let mut entries = Vec::with_capacity(k * k);
    for i in 0..k {
        for (j, &pj) in p.probs().iter().enumerate() {
            entries.push(if i == j { pj + d * (1.0 - pj) } else { pj - d * pj });
        }
    }
    TransitionKernel { k, entries }
}
