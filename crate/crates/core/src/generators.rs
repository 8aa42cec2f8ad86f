//! Dependency generators: maps `α` with `1 ≤ α(n) < n` that pick the earlier
//! position each element depends on directly.
//!
//! The builtin catalog covers first-kind dependence (`α ≡ 1`), sequential
//! dependence (`α(n) = n − 1`), `⌊√n⌋`, the nonmonotone
//! `⌊(√n/2)·sin n + n/2⌋`, and the least-prime-factor partition. Arbitrary
//! generators are given as explicit tables.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::primes::{self, PrimeSieve};

/// Distance below which a pre-floor value counts as sitting on an integer.
pub const FLOOR_BOUNDARY_TOLERANCE: f64 = 1e-9;

/// A dependency generator, builtin or tabulated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeneratorSpec {
    /// First-kind dependence, `α(n) = 1`.
    Fk,
    /// `α(n) = n − 1`.
    Sequential,
    /// `α(n) = ⌊√n⌋`.
    FloorSqrt,
    /// `α(n) = ⌊(√n / 2)·sin(n) + n / 2⌋`, sine in radians.
    SinDrift,
    /// `α(n) = m` where the `m`-th prime is the least prime dividing `n`.
    PrimePartition,
    /// User-supplied parents keyed by `n ≥ 2`.
    Table(BTreeMap<usize, usize>),
}

impl GeneratorSpec {
    pub const BUILTINS: [GeneratorSpec; 5] = [
        GeneratorSpec::Fk,
        GeneratorSpec::Sequential,
        GeneratorSpec::FloorSqrt,
        GeneratorSpec::SinDrift,
        GeneratorSpec::PrimePartition,
    ];

    pub fn kind(&self) -> &'static str {
        match self {
            GeneratorSpec::Fk => "fk",
            GeneratorSpec::Sequential => "sequential",
            GeneratorSpec::FloorSqrt => "floor_sqrt",
            GeneratorSpec::SinDrift => "sin_drift",
            GeneratorSpec::PrimePartition => "prime_partition",
            GeneratorSpec::Table(_) => "table",
        }
    }

    /// Parses a builtin kind name; `table` needs its entries and is rejected here.
    pub fn builtin(kind: &str) -> Option<GeneratorSpec> {
        Self::BUILTINS.into_iter().find(|g| g.kind() == kind)
    }

    /// `α(n)` before the range check. Fails only for `n < 2` or a table miss.
    pub fn evaluate_raw(&self, n: usize) -> Result<i64> {
        if n < 2 {
            return Err(Error::Domain {
                index: n,
                lower: 2,
                upper: usize::MAX,
            });
        }
        Ok(match self {
            GeneratorSpec::Fk => 1,
            GeneratorSpec::Sequential => n as i64 - 1,
            GeneratorSpec::FloorSqrt => n.isqrt() as i64,
            GeneratorSpec::SinDrift => sin_drift_value(n).floor() as i64,
            GeneratorSpec::PrimePartition => primes::partition_index(n) as i64,
            GeneratorSpec::Table(table) => *table.get(&n).ok_or(Error::IncompleteGenerator(n))? as i64,
        })
    }

    /// `α(n)`, checked against `1 ≤ α(n) < n`.
    pub fn evaluate(&self, n: usize) -> Result<usize> {
        let value = self.evaluate_raw(n)?;
        check_axiom(n, value)
    }

    /// Parents for every `n ∈ 2..=n_max`, indexed by `n` (entries 0 and 1 are
    /// unused and set to 0). Fails on the first violation.
    pub fn parents(&self, n_max: usize) -> Result<Vec<usize>> {
        let mut parents = vec![0; n_max.max(1) + 1];
        let mut err = None;
        self.for_each_raw(n_max, |n, value| {
            if err.is_some() {
                return;
            }
            match value.and_then(|v| check_axiom(n, v)) {
                Ok(parent) => parents[n] = parent,
                Err(e) => err = Some(e),
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(parents),
        }
    }

    /// Checks `1 ≤ α(n) ≤ n − 1` on `2..=n_max`. Violations are collected,
    /// never raised.
    pub fn validate(&self, n_max: usize) -> ValidationReport {
        let mut violations = Vec::new();
        self.for_each_raw(n_max, |n, value| match value {
            Ok(v) if v >= 1 && v < n as i64 => {}
            Ok(v) => violations.push(Violation::OutOfRange { n, value: v }),
            Err(_) => violations.push(Violation::Missing { n }),
        });
        let near_boundary = match self {
            GeneratorSpec::SinDrift => (2..=n_max)
                .filter(|&n| {
                    let x = sin_drift_value(n);
                    x != x.round() && (x - x.round()).abs() < FLOOR_BOUNDARY_TOLERANCE
                })
                .collect(),
            _ => Vec::new(),
        };
        ValidationReport {
            n_max,
            violations,
            near_boundary,
        }
    }

    fn for_each_raw(&self, n_max: usize, mut f: impl FnMut(usize, Result<i64>)) {
        if let GeneratorSpec::PrimePartition = self {
            let sieve = PrimeSieve::new(n_max);
            for n in 2..=n_max {
                let m = sieve.partition_index(n).expect("n within sieve");
                f(n, Ok(m as i64));
            }
        } else {
            for n in 2..=n_max {
                f(n, self.evaluate_raw(n));
            }
        }
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind())
    }
}

/// `prime_partition(n)`: rank of the least prime factor of `n`.
pub fn prime_partition(n: usize) -> Result<usize> {
    GeneratorSpec::PrimePartition.evaluate(n)
}

fn sin_drift_value(n: usize) -> f64 {
    let x = n as f64;
    x.sqrt() / 2.0 * x.sin() + x / 2.0
}

fn check_axiom(n: usize, value: i64) -> Result<usize> {
    if value >= 1 && value < n as i64 {
        Ok(value as usize)
    } else {
        Err(Error::AxiomViolation { n, value })
    }
}

/// A single `n` at which a generator leaves `{1, …, n − 1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    OutOfRange { n: usize, value: i64 },
    Missing { n: usize },
}

impl Violation {
    pub fn n(&self) -> usize {
        match *self {
            Violation::OutOfRange { n, .. } | Violation::Missing { n } => n,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::OutOfRange { n, value } if value >= n as i64 => {
                write!(f, "n={n}: α={value} ≥ n")
            }
            Violation::OutOfRange { n, value } => write!(f, "n={n}: α={value} < 1"),
            Violation::Missing { n } => write!(f, "n={n}: no table entry"),
        }
    }
}

/// Result of [`GeneratorSpec::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub n_max: usize,
    pub violations: Vec<Violation>,
    /// Positions whose pre-floor value lies within [`FLOOR_BOUNDARY_TOLERANCE`]
    /// of an integer without being one. The floor is still taken as-is.
    pub near_boundary: Vec<usize>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table: Option<BTreeMap<String, usize>>,
}

impl Serialize for GeneratorSpec {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let table = match self {
            GeneratorSpec::Table(t) => Some(t.iter().map(|(k, v)| (k.to_string(), *v)).collect()),
            _ => None,
        };
        RawSpec {
            kind: self.kind().to_string(),
            table,
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for GeneratorSpec {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawSpec::deserialize(de)?;
        match (raw.kind.as_str(), raw.table) {
            ("table", Some(entries)) => {
                let mut table = BTreeMap::new();
                for (key, parent) in entries {
                    let n: usize = key
                        .parse()
                        .map_err(|_| D::Error::custom(format!("table key {key:?} is not an integer")))?;
                    if n < 2 {
                        return Err(D::Error::custom(format!("table key {n} must be at least 2")));
                    }
                    table.insert(n, parent);
                }
                Ok(GeneratorSpec::Table(table))
            }
            ("table", None) => Err(D::Error::custom("kind \"table\" requires a \"table\" object")),
            (kind, None) => {
                GeneratorSpec::builtin(kind).ok_or_else(|| D::Error::custom(format!("unknown generator kind {kind:?}")))
            }
            (kind, Some(_)) => Err(D::Error::custom(format!(
                "\"table\" is only allowed with kind \"table\", not {kind:?}"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(pairs: &[(usize, usize)]) -> GeneratorSpec {
        GeneratorSpec::Table(pairs.iter().copied().collect())
    }

    #[test]
    fn builtin_examples() {
        assert_eq!(GeneratorSpec::Fk.evaluate(17).unwrap(), 1);
        assert_eq!(GeneratorSpec::Sequential.evaluate(17).unwrap(), 16);
        assert_eq!(GeneratorSpec::FloorSqrt.evaluate(16).unwrap(), 4);
        assert_eq!(GeneratorSpec::SinDrift.evaluate(13).unwrap(), 7);
        assert_eq!(GeneratorSpec::SinDrift.evaluate(8).unwrap(), 5);
    }

    #[test]
    fn prime_partition_examples() {
        assert_eq!(prime_partition(6).unwrap(), 1);
        assert_eq!(prime_partition(9).unwrap(), 2);
        assert_eq!(prime_partition(25).unwrap(), 3);
        assert_eq!(prime_partition(2).unwrap(), 1);
    }

    #[test]
    fn evaluate_errors() {
        assert!(matches!(
            GeneratorSpec::Sequential.evaluate(1),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(GeneratorSpec::Fk.evaluate(0), Err(Error::Domain { .. })));
        let t = table(&[(2, 1), (3, 3)]);
        assert_eq!(t.evaluate(2).unwrap(), 1);
        assert_eq!(t.evaluate(3), Err(Error::AxiomViolation { n: 3, value: 3 }));
        assert_eq!(t.evaluate(4), Err(Error::IncompleteGenerator(4)));
        // α(3) = 2 is prime rank 2 for n = 3, which equals n − 1: still valid.
        assert_eq!(GeneratorSpec::PrimePartition.evaluate(3).unwrap(), 2);
    }

    #[test]
    fn validate_reports_violations() {
        assert!(GeneratorSpec::Sequential.validate(100).is_valid());
        let report = table(&[(2, 1), (3, 3)]).validate(3);
        assert_eq!(report.violations, vec![Violation::OutOfRange { n: 3, value: 3 }]);
        let report = table(&[(3, 5)]).validate(3);
        assert_eq!(
            report.violations,
            vec![Violation::Missing { n: 2 }, Violation::OutOfRange { n: 3, value: 5 }]
        );
        assert_eq!(report.violations[1].to_string(), "n=3: α=5 ≥ n");
        let report = table(&[(2, 0)]).validate(2);
        assert_eq!(report.violations[0].to_string(), "n=2: α=0 < 1");
    }

    #[test]
    fn sin_drift_is_valid_to_ten_thousand() {
        let report = GeneratorSpec::SinDrift.validate(10_000);
        assert!(report.is_valid(), "{:?}", report.violations);
        assert!(report.near_boundary.is_empty());
    }

    #[test]
    fn parents_match_evaluate() {
        for spec in GeneratorSpec::BUILTINS {
            let parents = spec.parents(200).unwrap();
            for n in 2..=200 {
                assert_eq!(parents[n], spec.evaluate(n).unwrap(), "{spec} n={n}");
            }
        }
        assert!(matches!(
            table(&[(2, 1), (3, 3)]).parents(3),
            Err(Error::AxiomViolation { n: 3, value: 3 })
        ));
    }

    #[test]
    fn json_round_trip() {
        let t: GeneratorSpec = serde_json::from_str(r#"{"kind":"table","table":{"2":1,"3":2}}"#).unwrap();
        assert_eq!(t, table(&[(2, 1), (3, 2)]));
        assert_eq!(
            serde_json::to_string(&t).unwrap(),
            r#"{"kind":"table","table":{"2":1,"3":2}}"#
        );
        for spec in GeneratorSpec::BUILTINS {
            let text = serde_json::to_string(&spec).unwrap();
            assert_eq!(text, format!(r#"{{"kind":"{}"}}"#, spec.kind()));
            assert_eq!(serde_json::from_str::<GeneratorSpec>(&text).unwrap(), spec);
        }
        for bad in [
            r#"{"kind":"table"}"#,
            r#"{"kind":"table","table":{"1":1}}"#,
            r#"{"kind":"table","table":{"two":1}}"#,
            r#"{"kind":"fk","table":{"2":1}}"#,
            r#"{"kind":"wavy"}"#,
        ] {
            assert!(serde_json::from_str::<GeneratorSpec>(bad).is_err(), "{bad}");
        }
    }
}
