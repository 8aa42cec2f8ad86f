//! Exact probabilities for dependent categorical sequences.
//!
//! Every quantity is available through two independent routes:
//!
//! * **enumeration**: sum the probability of every outcome in `Ω_N^K`
//!   (capped at [`DEFAULT_ENUMERATION_CAP`] outcomes), and
//! * **propagation**: push the base marginal through powers of the transition
//!   kernel along the dependency tree, or use the closed-form covariance.
//!
//! The two routes share only the model parameters and the kernel entries.

use std::fmt;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::generators::GeneratorSpec;
use crate::graph::{build_tree, DependencyTree};
use crate::kernel::{transition_kernel, DependencyCoefficient, Marginal, TransitionKernel};

/// Default upper bound on `K^N` for enumeration.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// Tolerance for comparisons between exact computation paths.
pub const EXACT_TOLERANCE: f64 = 1e-10;

/// Attached to covariance output whose exponent is the tree distance.
pub const CONJECTURE_NOTE: &str = "conjectured — verified numerically";

/// A realized sequence `(ω_1, …, ω_N)` with 1-based categories.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Outcome(Vec<usize>);

impl Outcome {
    pub fn new(values: Vec<usize>, categories: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain {
                index: 0,
                lower: 1,
                upper: usize::MAX,
            });
        }
        if let Some(&bad) = values.iter().find(|&&v| v == 0 || v > categories) {
            return Err(Error::CategoryIndex { index: bad, categories });
        }
        Ok(Outcome(values))
    }

    pub(crate) fn from_zero_based(values: &[usize]) -> Self {
        Outcome(values.iter().map(|v| v + 1).collect())
    }

    pub fn values(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (idx, v) in self.0.iter().enumerate() {
            if idx > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

/// `K^N`, or `None` on overflow.
pub fn outcome_count(len: usize, categories: usize) -> Option<u64> {
    (categories as u64).checked_pow(u32::try_from(len).ok()?)
}

fn check_cap(len: usize, categories: usize, cap: u64) -> Result<u64> {
    match outcome_count(len, categories) {
        Some(count) if count <= cap => Ok(count),
        _ => Err(Error::EnumerationTooLarge {
            categories,
            length: len,
            cap,
        }),
    }
}

/// Largest `N` with `K^N ≤ cap`.
pub fn max_enumerable_length(categories: usize, cap: u64) -> usize {
    let mut len = 0;
    while matches!(outcome_count(len + 1, categories), Some(c) if c <= cap) {
        len += 1;
    }
    len
}

/// Lexicographic iterator over `Ω_N^K`.
#[derive(Debug, Clone)]
pub struct Outcomes {
    current: Option<Vec<usize>>,
    categories: usize,
}

impl Iterator for Outcomes {
    type Item = Outcome;

    fn next(&mut self) -> Option<Outcome> {
        let cur = self.current.as_mut()?;
        let out = Outcome(cur.clone());
        let mut pos = cur.len();
        loop {
            if pos == 0 {
                self.current = None;
                break;
            }
            pos -= 1;
            if cur[pos] < self.categories {
                cur[pos] += 1;
                break;
            }
            cur[pos] = 1;
        }
        Some(out)
    }
}

/// All `K^N` outcomes in lexicographic order, refusing when `K^N > cap`.
pub fn enumerate_outcomes(len: usize, categories: usize, cap: u64) -> Result<Outcomes> {
    if len == 0 {
        return Err(Error::Domain {
            index: 0,
            lower: 1,
            upper: usize::MAX,
        });
    }
    if categories < 2 {
        return Err(Error::TooFewCategories(categories));
    }
    check_cap(len, categories, cap)?;
    Ok(Outcomes {
        current: Some(vec![1; len]),
        categories,
    })
}

/// Distribution of `ε_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositionMarginal {
    pub n: usize,
    pub probs: Vec<f64>,
}

/// Which computation produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Enumeration,
    Propagation,
    ClosedForm,
    Empirical,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Enumeration => "enumeration",
            Method::Propagation => "propagation",
            Method::ClosedForm => "closed-form",
            Method::Empirical => "empirical",
        }
    }
}

/// Requested route for [`SequenceModel::joint_pair_probability`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JointRoute {
    /// Propagation, which is always available for a valid tree.
    #[default]
    Auto,
    Propagation,
    Enumeration,
}

/// A joint probability together with the route that computed it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointProbability {
    pub value: f64,
    pub method: Method,
}

/// Where the exponent of a closed-form covariance comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExponentBasis {
    /// Sequential dependence, exponent `n − m`.
    Theorem,
    /// First-kind dependence, exponent 1 from position 1 and 2 otherwise.
    Fk,
    /// Any other generator, exponent equal to the tree distance.
    TreeConjecture,
}

impl ExponentBasis {
    pub fn for_generator(spec: &GeneratorSpec) -> Self {
        match spec {
            GeneratorSpec::Sequential => ExponentBasis::Theorem,
            GeneratorSpec::Fk => ExponentBasis::Fk,
            _ => ExponentBasis::TreeConjecture,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ExponentBasis::Theorem => "theorem",
            ExponentBasis::Fk => "fk",
            ExponentBasis::TreeConjecture => "tree-conjecture",
        }
    }

    pub fn is_conjecture(self) -> bool {
        self == ExponentBasis::TreeConjecture
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(self.as_str())
    }
}

impl Serialize for ExponentBasis {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(self.as_str())
    }
}

/// `K × K` matrix of `Cov([ε_m = i], [ε_n = j])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCovariance {
    pub m: usize,
    pub n: usize,
    pub method: Method,
    pub exponent_basis: ExponentBasis,
    /// Power of `δ` used by the closed form; absent for computed matrices.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<&'static str>,
    pub matrix: Vec<Vec<f64>>,
}

impl CrossCovariance {
    pub fn categories(&self) -> usize {
        self.matrix.len()
    }

    /// Entry for 1-based categories.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i - 1][j - 1]
    }

    /// Largest absolute row or column sum.
    pub fn max_margin_sum(&self) -> f64 {
        let k = self.categories();
        let rows = self.matrix.iter().map(|r| r.iter().sum::<f64>().abs());
        let cols = (0..k).map(|j| self.matrix.iter().map(|r| r[j]).sum::<f64>().abs());
        rows.chain(cols).fold(0.0, f64::max)
    }

    /// Largest `|Λ_ij − Λ_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let k = self.categories();
        let mut worst = 0.0_f64;
        for i in 0..k {
            for j in 0..k {
                worst = worst.max((self.matrix[i][j] - self.matrix[j][i]).abs());
            }
        }
        worst
    }

    /// Largest entrywise difference to another matrix of the same shape.
    pub fn max_abs_diff(&self, other: &CrossCovariance) -> f64 {
        self.matrix
            .iter()
            .flatten()
            .zip(other.matrix.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("covariance serializes")
    }

    /// Header row `i,j=1,…,j=K`, then one row per `i`.
    pub fn to_csv(&self) -> String {
        let k = self.categories();
        let mut out = String::from("i");
        for j in 1..=k {
            out.push_str(&format!(",j={j}"));
        }
        out.push('\n');
        for (i, row) in self.matrix.iter().enumerate() {
            out.push_str(&(i + 1).to_string());
            for v in row {
                out.push_str(&format!(",{v:?}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Base marginal, dependency strength and generator, plus the derived kernel.
#[derive(Debug, Clone)]
pub struct SequenceModel {
    p: Marginal,
    delta: DependencyCoefficient,
    spec: GeneratorSpec,
    kernel: TransitionKernel,
    cap: u64,
}

impl SequenceModel {
    pub fn new(p: Marginal, delta: DependencyCoefficient, spec: GeneratorSpec) -> Self {
        let kernel = transition_kernel(&p, delta);
        SequenceModel {
            p,
            delta,
            spec,
            kernel,
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }

    pub fn with_enumeration_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    pub fn marginal(&self) -> &Marginal {
        &self.p
    }

    pub fn delta(&self) -> DependencyCoefficient {
        self.delta
    }

    pub fn generator(&self) -> &GeneratorSpec {
        &self.spec
    }

    pub fn kernel(&self) -> &TransitionKernel {
        &self.kernel
    }

    pub fn categories(&self) -> usize {
        self.p.categories()
    }

    pub fn enumeration_cap(&self) -> u64 {
        self.cap
    }

    pub fn tree(&self, len: usize) -> Result<DependencyTree> {
        build_tree(&self.spec, len)
    }

    /// `p_{ω_1} · Π_{l ≥ 2} T(ω_{α(l)}, ω_l)`.
    pub fn outcome_probability(&self, omega: &Outcome) -> Result<f64> {
        let k = self.categories();
        if let Some(&bad) = omega.values().iter().find(|&&v| v == 0 || v > k) {
            return Err(Error::CategoryIndex {
                index: bad,
                categories: k,
            });
        }
        let values = omega.values();
        let parents = self.spec.parents(values.len())?;
        let mut prob = self.p.probs()[values[0] - 1];
        for l in 2..=values.len() {
            let parent_value = values[parents[l] - 1];
            prob *= self.kernel.row(parent_value - 1)[values[l - 1] - 1];
        }
        Ok(prob)
    }

    /// Exhaustive driver over `Ω_len^K`.
    pub fn enumeration(&self, len: usize) -> Result<Enumeration<'_>> {
        if len == 0 {
            return Err(Error::Domain {
                index: 0,
                lower: 1,
                upper: usize::MAX,
            });
        }
        check_cap(len, self.categories(), self.cap)?;
        let parents = self.spec.parents(len)?;
        Ok(Enumeration {
            model: self,
            len,
            parents,
            parallel: true,
        })
    }

    /// Marginal of `ε_n` by propagating `p` along the path from the root.
    pub fn marginal_at(&self, n: usize) -> Result<PositionMarginal> {
        let tree = self.tree(n)?;
        let depth = tree.depth(n)?;
        Ok(PositionMarginal {
            n,
            probs: self.propagate_root(depth),
        })
    }

    /// Marginal of `ε_n` by summing over `Ω_n^K`.
    pub fn marginal_at_enumerated(&self, n: usize) -> Result<PositionMarginal> {
        let summary = self.enumeration(n)?.marginals();
        Ok(PositionMarginal {
            n,
            probs: summary.marginals[n - 1].clone(),
        })
    }

    fn propagate_root(&self, steps: usize) -> Vec<f64> {
        let k = self.categories();
        let mut dist = self.p.probs().to_vec();
        for _ in 0..steps {
            let mut next = vec![0.0; k];
            for (c, &mass) in dist.iter().enumerate() {
                for (j, &t) in self.kernel.row(c).iter().enumerate() {
                    next[j] += mass * t;
                }
            }
            dist = next;
        }
        dist
    }

    /// Full `K × K` joint of `(ε_m, ε_n)` through the lowest common ancestor.
    pub fn joint_matrix_propagated(&self, m: usize, n: usize) -> Result<Vec<Vec<f64>>> {
        let k = self.categories();
        let tree = self.tree(m.max(n))?;
        let lca = tree.lowest_common_ancestor(m, n)?;
        let base_depth = tree.depth(lca)?;
        let to_m = self.kernel.power(tree.depth(m)? - base_depth);
        let to_n = self.kernel.power(tree.depth(n)? - base_depth);
        let at_lca = self.propagate_root(base_depth);
        let mut joint = vec![vec![0.0; k]; k];
        for (c, &mass) in at_lca.iter().enumerate() {
            for i in 0..k {
                let left = mass * to_m[c * k + i];
                for j in 0..k {
                    joint[i][j] += left * to_n[c * k + j];
                }
            }
        }
        Ok(joint)
    }

    fn check_pair(&self, m: usize, n: usize) -> Result<()> {
        if m == 0 {
            return Err(Error::Domain {
                index: m,
                lower: 1,
                upper: n,
            });
        }
        if m >= n {
            return Err(Error::PositionOrder { m, n });
        }
        Ok(())
    }

    /// `P(ε_m = i, ε_n = j)` for `m < n` and 1-based categories.
    pub fn joint_pair_probability(
        &self,
        m: usize,
        i: usize,
        n: usize,
        j: usize,
        route: JointRoute,
    ) -> Result<JointProbability> {
        self.check_pair(m, n)?;
        self.p.check_category(i)?;
        self.p.check_category(j)?;
        match route {
            JointRoute::Auto | JointRoute::Propagation => {
                let joint = self.joint_matrix_propagated(m, n)?;
                Ok(JointProbability {
                    value: joint[i - 1][j - 1],
                    method: Method::Propagation,
                })
            }
            JointRoute::Enumeration => {
                let pair = self.enumeration(n)?.pair(m, n);
                Ok(JointProbability {
                    value: pair.joint[i - 1][j - 1],
                    method: Method::Enumeration,
                })
            }
        }
    }

    /// `Λ^{m,n}` from exhaustive enumeration of `Ω_n^K`: enumerated joint
    /// minus the product of enumerated marginals.
    pub fn cross_covariance_enumerated(&self, m: usize, n: usize) -> Result<CrossCovariance> {
        self.check_pair(m, n)?;
        let pair = self.enumeration(n)?.pair(m, n);
        let k = self.categories();
        let matrix = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| pair.joint[i][j] - pair.left[i] * pair.right[j])
                    .collect()
            })
            .collect();
        Ok(CrossCovariance {
            m,
            n,
            method: Method::Enumeration,
            exponent_basis: ExponentBasis::for_generator(&self.spec),
            exponent: None,
            note: None,
            matrix,
        })
    }

    /// `Λ^{m,n}` by propagation through the common ancestor.
    pub fn cross_covariance_propagated(&self, m: usize, n: usize) -> Result<CrossCovariance> {
        self.check_pair(m, n)?;
        let joint = self.joint_matrix_propagated(m, n)?;
        let left = self.marginal_at(m)?.probs;
        let right = self.marginal_at(n)?.probs;
        let k = self.categories();
        let matrix = (0..k)
            .map(|i| (0..k).map(|j| joint[i][j] - left[i] * right[j]).collect())
            .collect();
        Ok(CrossCovariance {
            m,
            n,
            method: Method::Propagation,
            exponent_basis: ExponentBasis::for_generator(&self.spec),
            exponent: None,
            note: None,
            matrix,
        })
    }

    /// Closed form `δ^d · (diag(p) − p pᵀ)`. The exponent is `n − m` for
    /// sequential dependence, 1 or 2 for first-kind dependence, and the tree
    /// distance otherwise (flagged as a conjecture).
    pub fn cross_covariance_closed_form(&self, m: usize, n: usize) -> Result<CrossCovariance> {
        self.check_pair(m, n)?;
        let basis = ExponentBasis::for_generator(&self.spec);
        let exponent = match basis {
            ExponentBasis::Theorem => n - m,
            ExponentBasis::Fk => {
                if m == 1 {
                    1
                } else {
                    2
                }
            }
            ExponentBasis::TreeConjecture => self.tree(n)?.tree_distance(m, n)?,
        };
        let scale = self.delta.value().powi(exponent as i32);
        let p = self.p.probs();
        let matrix = p
            .iter()
            .enumerate()
            .map(|(i, &pi)| {
                p.iter()
                    .enumerate()
                    .map(|(j, &pj)| {
                        if i == j {
                            scale * pi * (1.0 - pi)
                        } else {
                            -scale * pi * pj
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(CrossCovariance {
            m,
            n,
            method: Method::ClosedForm,
            exponent_basis: basis,
            exponent: Some(exponent),
            note: basis.is_conjecture().then_some(CONJECTURE_NOTE),
            matrix,
        })
    }
}

/// `P(ε_1 = ε_n = i) = p_i(p_i + (1 − p_i)δ^{n−1})` under sequential dependence.
pub fn theta_probability(n: usize, i: usize, p: &Marginal, delta: DependencyCoefficient) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain {
            index: n,
            lower: 2,
            upper: usize::MAX,
        });
    }
    let pi = p.prob(i)?;
    Ok(pi * (pi + (1.0 - pi) * delta.value().powi(n as i32 - 1)))
}

/// Sum of outcome probabilities over `{ω ∈ Ω_n : ω_1 = ω_n = i}` under
/// sequential dependence.
pub fn theta_probability_enumerated(
    n: usize,
    i: usize,
    p: &Marginal,
    delta: DependencyCoefficient,
    cap: u64,
) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain {
            index: n,
            lower: 2,
            upper: usize::MAX,
        });
    }
    p.check_category(i)?;
    let model = SequenceModel::new(p.clone(), delta, GeneratorSpec::Sequential).with_enumeration_cap(cap);
    let target = i - 1;
    Ok(model.enumeration(n)?.fold(
        || 0.0,
        |acc: &mut f64, omega, prob| {
            if omega[0] == target && omega[omega.len() - 1] == target {
                *acc += prob;
            }
        },
        |acc, part| *acc += part,
    ))
}

/// Totals gathered in one pass over `Ω_N^K`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalSummary {
    pub total: f64,
    /// `marginals[n − 1][i − 1] = P(ε_n = i)`.
    pub marginals: Vec<Vec<f64>>,
}

/// Joint and marginals of a position pair gathered over `Ω_n^K`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSummary {
    pub joint: Vec<Vec<f64>>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// Exhaustive enumeration over `Ω_len^K`, split into lexicographic prefix
/// blocks. Blocks are reduced in prefix order, so results do not depend on
/// whether blocks run in parallel.
#[derive(Debug, Clone)]
pub struct Enumeration<'a> {
    model: &'a SequenceModel,
    len: usize,
    parents: Vec<usize>,
    parallel: bool,
}

impl Enumeration<'_> {
    pub fn sequential(mut self) -> Self {
        self.parallel = false;
        self
    }

    pub fn length(&self) -> usize {
        self.len
    }

    /// Visits every outcome (0-based categories) with its probability.
    /// `visit` accumulates into a block-local value; `merge` folds blocks in
    /// lexicographic order.
    pub fn fold<A, I, V, M>(&self, init: I, visit: V, merge: M) -> A
    where
        A: Send,
        I: Fn() -> A + Sync,
        V: Fn(&mut A, &[usize], f64) + Sync,
        M: Fn(&mut A, A),
    {
        let k = self.model.categories();
        let prefix_len = (1..=self.len).find(|&l| k.pow(l as u32) >= 64).unwrap_or(self.len);
        let blocks = k.pow(prefix_len as u32);
        let run_block = |block: usize| {
            let mut omega = vec![0; self.len];
            let mut rest = block;
            for pos in (0..prefix_len).rev() {
                omega[pos] = rest % k;
                rest /= k;
            }
            let mut prob = 1.0;
            for pos in 0..prefix_len {
                prob *= self.factor(&omega, pos);
            }
            let mut acc = init();
            self.descend(prefix_len, &mut omega, prob, &mut acc, &mut &visit);
            acc
        };
        let parts: Vec<A> = if self.parallel {
            (0..blocks).into_par_iter().map(run_block).collect()
        } else {
            (0..blocks).map(run_block).collect()
        };
        let mut parts = parts.into_iter();
        let mut total = parts.next().expect("at least one block");
        for part in parts {
            merge(&mut total, part);
        }
        total
    }

    fn factor(&self, omega: &[usize], pos: usize) -> f64 {
        if pos == 0 {
            self.model.p.probs()[omega[0]]
        } else {
            let parent = self.parents[pos + 1] - 1;
            self.model.kernel.row(omega[parent])[omega[pos]]
        }
    }

    fn descend<A>(
        &self,
        pos: usize,
        omega: &mut Vec<usize>,
        prob: f64,
        acc: &mut A,
        visit: &mut impl FnMut(&mut A, &[usize], f64),
    ) {
        if pos == self.len {
            visit(acc, omega, prob);
            return;
        }
        for c in 0..self.model.categories() {
            omega[pos] = c;
            let factor = self.factor(omega, pos);
            self.descend(pos + 1, omega, prob * factor, acc, visit);
        }
    }

    /// Calls `f` with every outcome and its probability, in lexicographic
    /// order on the calling thread.
    pub fn for_each(&self, mut f: impl FnMut(Outcome, f64)) {
        let mut omega = vec![0; self.len];
        let mut visit = |_: &mut (), o: &[usize], prob: f64| f(Outcome::from_zero_based(o), prob);
        self.descend(0, &mut omega, 1.0, &mut (), &mut visit);
    }

    /// Total mass and the marginal of every position.
    pub fn marginals(&self) -> MarginalSummary {
        let k = self.model.categories();
        let len = self.len;
        let flat = self.fold(
            || vec![0.0; 1 + len * k],
            |acc: &mut Vec<f64>, omega, prob| {
                acc[0] += prob;
                for (pos, &c) in omega.iter().enumerate() {
                    acc[1 + pos * k + c] += prob;
                }
            },
            |acc, part| acc.iter_mut().zip(part).for_each(|(a, b)| *a += b),
        );
        MarginalSummary {
            total: flat[0],
            marginals: flat[1..].chunks(k).map(<[f64]>::to_vec).collect(),
        }
    }

    /// Joint of `(ε_m, ε_n)` and both marginals. Positions are 1-based and
    /// must lie within the enumerated length.
    pub fn pair(&self, m: usize, n: usize) -> PairSummary {
        assert!(m >= 1 && n >= 1 && m <= self.len && n <= self.len);
        let k = self.model.categories();
        let flat = self.fold(
            || vec![0.0; k * k + 2 * k],
            |acc: &mut Vec<f64>, omega, prob| {
                let (a, b) = (omega[m - 1], omega[n - 1]);
                acc[a * k + b] += prob;
                acc[k * k + a] += prob;
                acc[k * k + k + b] += prob;
            },
            |acc, part| acc.iter_mut().zip(part).for_each(|(a, b)| *a += b),
        );
        PairSummary {
            joint: flat[..k * k].chunks(k).map(<[f64]>::to_vec).collect(),
            left: flat[k * k..k * k + k].to_vec(),
            right: flat[k * k + k..].to_vec(),
        }
    }
}
