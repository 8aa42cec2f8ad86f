//! Seeded Monte Carlo generation of dependent sequences.
//!
//! Sequence `s` of a batch draws from its own ChaCha8 stream (`seed`, stream
//! `s`), so a batch is a pure function of the seed and parameters no matter
//! how many workers produce it.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{CrossCovariance, ExponentBasis, Method, Outcome, PositionMarginal, SequenceModel};
use crate::generators::GeneratorSpec;
use crate::kernel::{DependencyCoefficient, Marginal};

/// Identifier recorded in batch metadata.
pub const RNG_ALGORITHM: &str = "chacha8/seed_from_u64/stream=sequence-index";

/// Per-sequence random source.
pub fn sequence_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Cumulative sums with every entry from the last positive mass onward
/// pinned to 1, so a draw in `(0, 1]` never lands on a zero-mass tail.
fn cumulative(row: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cum: Vec<f64> = row
        .iter()
        .map(|&x| {
            acc += x;
            acc
        })
        .collect();
    let last = row.iter().rposition(|&x| x > 0.0).unwrap_or(row.len() - 1);
    cum[last..].iter_mut().for_each(|c| *c = 1.0);
    cum
}

/// Precomputed inverse-CDF tables for one model and sequence length.
#[derive(Debug, Clone)]
pub struct Sampler {
    len: usize,
    categories: usize,
    root: Vec<f64>,
    rows: Vec<Vec<f64>>,
    parents: Vec<usize>,
    metadata: BatchParameters,
}

#[derive(Debug, Clone, PartialEq)]
struct BatchParameters {
    p: Marginal,
    delta: DependencyCoefficient,
    generator: GeneratorSpec,
}

impl Sampler {
    pub fn new(model: &SequenceModel, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::Domain {
                index: 0,
                lower: 1,
                upper: usize::MAX,
            });
        }
        Ok(Sampler {
            len,
            categories: model.categories(),
            root: cumulative(model.marginal().probs()),
            rows: model.kernel().rows().map(cumulative).collect(),
            parents: model.generator().parents(len)?,
            metadata: BatchParameters {
                p: model.marginal().clone(),
                delta: model.delta(),
                generator: model.generator().clone(),
            },
        })
    }

    pub fn length(&self) -> usize {
        self.len
    }

    pub fn categories(&self) -> usize {
        self.categories
    }

    // Right-closed intervals: category j covers (cum[j-1], cum[j]].
    fn draw<R: Rng + ?Sized>(cum: &[f64], rng: &mut R) -> usize {
        let u = 1.0 - rng.gen::<f64>();
        cum.partition_point(|&c| c < u).min(cum.len() - 1)
    }

    /// Fills `out` (0-based categories) with one sequence in ascending position.
    pub fn fill<R: Rng + ?Sized>(&self, out: &mut [u32], rng: &mut R) {
        debug_assert_eq!(out.len(), self.len);
        out[0] = Self::draw(&self.root, rng) as u32;
        for pos in 1..self.len {
            let parent = out[self.parents[pos + 1] - 1] as usize;
            out[pos] = Self::draw(&self.rows[parent], rng) as u32;
        }
    }

    /// One sequence: `ω_1 ~ p`, then `ω_n ~ T(ω_{α(n)}, ·)` for `n = 2..N`.
    pub fn sample_sequence<R: Rng + ?Sized>(&self, rng: &mut R) -> Outcome {
        let mut buf = vec![0; self.len];
        self.fill(&mut buf, rng);
        Outcome::new(buf.iter().map(|&v| v as usize + 1).collect(), self.categories)
            .expect("sampled categories are in range")
    }

    /// `count` sequences from `seed`. `workers` bounds the thread count
    /// (`None` uses the global pool); the result does not depend on it.
    pub fn sample_batch(&self, seed: u64, count: usize, workers: Option<usize>) -> SampleBatch {
        let mut values = vec![0u32; count * self.len];
        let fill_all = |values: &mut [u32]| {
            values
                .par_chunks_mut(self.len)
                .enumerate()
                .for_each(|(idx, row)| self.fill(row, &mut sequence_rng(seed, idx as u64)));
        };
        match workers {
            Some(threads) => rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build()
                .expect("thread pool")
                .install(|| fill_all(&mut values)),
            None => fill_all(&mut values),
        }
        SampleBatch {
            metadata: BatchMetadata {
                algorithm: RNG_ALGORITHM,
                seed,
                count,
                length: self.len,
                categories: self.categories,
                p: self.metadata.p.clone(),
                delta: self.metadata.delta,
                generator: self.metadata.generator.clone(),
            },
            values,
        }
    }
}

/// Draws one sequence of length `len` from `model`.
pub fn sample_sequence<R: Rng + ?Sized>(model: &SequenceModel, len: usize, rng: &mut R) -> Result<Outcome> {
    Ok(Sampler::new(model, len)?.sample_sequence(rng))
}

/// Everything needed to reproduce a batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchMetadata {
    pub algorithm: &'static str,
    pub seed: u64,
    pub count: usize,
    #[serde(rename = "N")]
    pub length: usize,
    #[serde(rename = "K")]
    pub categories: usize,
    pub p: Marginal,
    pub delta: DependencyCoefficient,
    pub generator: GeneratorSpec,
}

/// `count` sampled sequences stored row-major with 0-based categories.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    metadata: BatchMetadata,
    values: Vec<u32>,
}

impl SampleBatch {
    pub fn metadata(&self) -> &BatchMetadata {
        &self.metadata
    }

    pub fn count(&self) -> usize {
        self.metadata.count
    }

    pub fn len(&self) -> usize {
        self.metadata.length
    }

    pub fn is_empty(&self) -> bool {
        self.metadata.count == 0
    }

    pub fn categories(&self) -> usize {
        self.metadata.categories
    }

    /// Row `idx` with 0-based categories.
    pub fn row(&self, idx: usize) -> &[u32] {
        &self.values[idx * self.len()..(idx + 1) * self.len()]
    }

    pub fn outcome(&self, idx: usize) -> Outcome {
        Outcome::new(
            self.row(idx).iter().map(|&v| v as usize + 1).collect(),
            self.categories(),
        )
        .expect("sampled categories are in range")
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        self.values.chunks_exact(self.len())
    }

    fn check_position(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.len() {
            return Err(Error::Domain {
                index: n,
                lower: 1,
                upper: self.len(),
            });
        }
        if self.is_empty() {
            return Err(Error::EmptyBatch);
        }
        Ok(())
    }

    /// Category counts at position `n`.
    pub fn counts(&self, n: usize) -> Result<Vec<u64>> {
        self.check_position(n)?;
        let mut counts = vec![0u64; self.categories()];
        for row in self.rows() {
            counts[row[n - 1] as usize] += 1;
        }
        Ok(counts)
    }

    /// Category frequencies at position `n`.
    pub fn empirical_marginals(&self, n: usize) -> Result<PositionMarginal> {
        let total = self.count() as f64;
        Ok(PositionMarginal {
            n,
            probs: self.counts(n)?.into_iter().map(|c| c as f64 / total).collect(),
        })
    }

    fn pair_counts(&self, m: usize, n: usize) -> Result<Vec<u64>> {
        self.check_position(m)?;
        self.check_position(n)?;
        if m >= n {
            return Err(Error::PositionOrder { m, n });
        }
        let k = self.categories();
        let mut counts = vec![0u64; k * k];
        for row in self.rows() {
            counts[row[m - 1] as usize * k + row[n - 1] as usize] += 1;
        }
        Ok(counts)
    }

    /// Population-normalized covariance of the indicator vectors at `m < n`.
    pub fn empirical_cross_covariance(&self, m: usize, n: usize) -> Result<CrossCovariance> {
        let k = self.categories();
        let total = self.count() as f64;
        let joint = self.pair_counts(m, n)?;
        let left = self.counts(m)?;
        let right = self.counts(n)?;
        let matrix = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| joint[i * k + j] as f64 / total - (left[i] as f64 / total) * (right[j] as f64 / total))
                    .collect()
            })
            .collect();
        Ok(CrossCovariance {
            m,
            n,
            method: Method::Empirical,
            exponent_basis: ExponentBasis::for_generator(&self.metadata.generator),
            exponent: None,
            note: None,
            matrix,
        })
    }

    /// Standard error of each covariance entry, estimated as the sample
    /// standard deviation of the centered indicator product over `√count`.
    pub fn cross_covariance_standard_errors(&self, m: usize, n: usize) -> Result<Vec<Vec<f64>>> {
        let k = self.categories();
        let total = self.count() as f64;
        let joint = self.pair_counts(m, n)?;
        let left: Vec<f64> = self.counts(m)?.iter().map(|&c| c as f64 / total).collect();
        let right: Vec<f64> = self.counts(n)?.iter().map(|&c| c as f64 / total).collect();
        let mut se = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in 0..k {
                // The centered product takes four values depending on which
                // indicators fire; weight each by its frequency.
                let both = joint[i * k + j] as f64 / total;
                let only_left = left[i] - both;
                let only_right = right[j] - both;
                let neither = 1.0 - both - only_left - only_right;
                let cells = [
                    (both, (1.0 - left[i]) * (1.0 - right[j])),
                    (only_left, (1.0 - left[i]) * -right[j]),
                    (only_right, -left[i] * (1.0 - right[j])),
                    (neither, left[i] * right[j]),
                ];
                let mean: f64 = cells.iter().map(|(w, v)| w * v).sum();
                let var: f64 = cells.iter().map(|(w, v)| w * (v - mean).powi(2)).sum();
                se[i][j] = (var / total).sqrt();
            }
        }
        Ok(se)
    }

    /// Header `eps_1,…,eps_N`, then one row of 1-based categories per sequence.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let header: Vec<String> = (1..=self.len()).map(|n| format!("eps_{n}")).collect();
        writeln!(out, "{}", header.join(","))?;
        let mut line = String::new();
        for row in self.rows() {
            line.clear();
            for (idx, &v) in row.iter().enumerate() {
                if idx > 0 {
                    line.push(',');
                }
                line.push_str(&(v + 1).to_string());
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    /// One JSON array of 1-based categories per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut line = String::new();
        for row in self.rows() {
            line.clear();
            line.push('[');
            for (idx, &v) in row.iter().enumerate() {
                if idx > 0 {
                    line.push(',');
                }
                line.push_str(&(v + 1).to_string());
            }
            line.push_str("]\n");
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn metadata_json(&self) -> String {
        serde_json::to_string_pretty(&self.metadata).expect("metadata serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::SequenceModel;

    fn model(p: &[f64], d: f64, spec: GeneratorSpec) -> SequenceModel {
        SequenceModel::new(
            Marginal::new(p.to_vec()).unwrap(),
            DependencyCoefficient::new(d).unwrap(),
            spec,
        )
    }

    #[test]
    fn cumulative_pins_tail() {
        assert_eq!(cumulative(&[0.25, 0.75, 0.0]), vec![0.25, 1.0, 1.0]);
        assert_eq!(cumulative(&[0.0, 1.0]), vec![0.0, 1.0]);
        let cum = cumulative(&[0.0, 1.0, 0.0]);
        let mut rng = sequence_rng(1, 0);
        for _ in 0..1000 {
            assert_eq!(Sampler::draw(&cum, &mut rng), 1);
        }
    }

    #[test]
    fn full_dependence_copies_first_element() {
        for spec in GeneratorSpec::BUILTINS {
            let batch = Sampler::new(&model(&[0.3, 0.3, 0.4], 1.0, spec), 12)
                .unwrap()
                .sample_batch(9, 500, None);
            for row in batch.rows() {
                assert!(row.iter().all(|&v| v == row[0]));
            }
            let first = batch.empirical_marginals(1).unwrap();
            assert_eq!(batch.empirical_marginals(12).unwrap().probs, first.probs);
        }
    }

    #[test]
    fn single_sequence_is_one_hot() {
        let batch = Sampler::new(&model(&[0.5, 0.5], 0.3, GeneratorSpec::Fk), 4)
            .unwrap()
            .sample_batch(3, 1, None);
        let probs = batch.empirical_marginals(3).unwrap().probs;
        assert_eq!(probs.iter().filter(|&&x| x == 1.0).count(), 1);
        assert_eq!(probs.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn empty_batch_errors() {
        let batch = Sampler::new(&model(&[0.5, 0.5], 0.3, GeneratorSpec::Fk), 4)
            .unwrap()
            .sample_batch(3, 0, None);
        assert_eq!(batch.empirical_marginals(1), Err(Error::EmptyBatch));
        assert!(matches!(batch.empirical_cross_covariance(1, 2), Err(Error::EmptyBatch)));
    }

    #[test]
    fn position_errors() {
        let batch = Sampler::new(&model(&[0.5, 0.5], 0.3, GeneratorSpec::Fk), 4)
            .unwrap()
            .sample_batch(3, 10, None);
        assert!(matches!(batch.empirical_marginals(5), Err(Error::Domain { .. })));
        assert!(matches!(
            batch.empirical_cross_covariance(3, 2),
            Err(Error::PositionOrder { .. })
        ));
    }

    #[test]
    fn batches_are_reproducible_across_workers() {
        let sampler = Sampler::new(&model(&[0.2, 0.5, 0.3], 0.6, GeneratorSpec::SinDrift), 20).unwrap();
        let a = sampler.sample_batch(42, 2000, Some(1));
        let b = sampler.sample_batch(42, 2000, Some(4));
        let c = sampler.sample_batch(42, 2000, None);
        assert_eq!(a, b);
        assert_eq!(a, c);
        let d = sampler.sample_batch(43, 2000, None);
        assert_ne!(a, d);
    }

    #[test]
    fn sequence_matches_batch_row() {
        let m = model(&[0.2, 0.5, 0.3], 0.6, GeneratorSpec::FloorSqrt);
        let sampler = Sampler::new(&m, 9).unwrap();
        let batch = sampler.sample_batch(5, 4, None);
        let single = sample_sequence(&m, 9, &mut sequence_rng(5, 3)).unwrap();
        assert_eq!(batch.outcome(3), single);
    }

    #[test]
    fn pair_frequency_matches_exact() {
        // P(ω = (1,1)) = p·p⁺ = 0.5 · 0.75 = 0.375 under sequential dependence.
        let m = model(&[0.5, 0.5], 0.5, GeneratorSpec::Sequential);
        let exact = m.outcome_probability(&Outcome::new(vec![1, 1], 2).unwrap()).unwrap();
        assert_eq!(exact, 0.375);
        let batch = Sampler::new(&m, 2).unwrap().sample_batch(2024, 1_000_000, None);
        let hits = batch.rows().filter(|r| r == &[0, 0]).count() as f64;
        assert!((hits / 1e6 - exact).abs() < 0.002, "{}", hits / 1e6);
    }

    #[test]
    fn independent_entries_are_uncorrelated() {
        let m = model(&[0.5, 0.3, 0.2], 0.0, GeneratorSpec::FloorSqrt);
        let batch = Sampler::new(&m, 6).unwrap().sample_batch(77, 200_000, None);
        let cov = batch.empirical_cross_covariance(2, 4).unwrap();
        assert!(cov.matrix.iter().flatten().all(|x| x.abs() < 0.005));
    }

    #[test]
    fn exports() {
        let m = model(&[0.5, 0.5], 0.5, GeneratorSpec::Sequential);
        let batch = Sampler::new(&m, 3).unwrap().sample_batch(1, 4, None);
        let mut csv = Vec::new();
        batch.write_csv(&mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "eps_1,eps_2,eps_3");
        assert_eq!(lines.len(), 5);
        let first: Vec<usize> = lines[1].split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(first, batch.outcome(0).values());

        let mut jsonl = Vec::new();
        batch.write_jsonl(&mut jsonl).unwrap();
        let rows: Vec<Vec<usize>> = String::from_utf8(jsonl)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[2], batch.outcome(2).values());

        let meta: serde_json::Value = serde_json::from_str(&batch.metadata_json()).unwrap();
        assert_eq!(meta["algorithm"], RNG_ALGORITHM);
        assert_eq!(meta["seed"], 1);
        assert_eq!(meta["N"], 3);
        assert_eq!(meta["K"], 2);
        assert_eq!(meta["generator"]["kind"], "sequential");
    }
}
