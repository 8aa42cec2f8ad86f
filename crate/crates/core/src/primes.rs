//! Smallest-prime-factor sieve used by the prime-partition generator.

/// Linear sieve over `0..=limit` recording each integer's least prime factor
/// and the 1-based rank of every prime.
#[derive(Debug, Clone)]
pub struct PrimeSieve {
    spf: Vec<u32>,
    rank: Vec<u32>,
}

impl PrimeSieve {
    pub fn new(limit: usize) -> Self {
        let len = limit + 1;
        let mut spf = vec![0u32; len];
        let mut rank = vec![0u32; len];
        let mut primes: Vec<u32> = Vec::new();
        for i in 2..len {
            if spf[i] == 0 {
                spf[i] = i as u32;
                primes.push(i as u32);
                rank[i] = primes.len() as u32;
            }
            let least = spf[i];
            for &q in &primes {
                let multiple = i * q as usize;
                if q > least || multiple >= len {
                    break;
                }
                spf[multiple] = q;
            }
        }
        PrimeSieve { spf, rank }
    }

    pub fn limit(&self) -> usize {
        self.spf.len() - 1
    }

    /// Least prime dividing `n`, or `None` for `n < 2` or `n` past the limit.
    pub fn smallest_prime_factor(&self, n: usize) -> Option<usize> {
        match self.spf.get(n) {
            Some(&p) if p != 0 => Some(p as usize),
            _ => None,
        }
    }

    /// `m` such that `p` is the `m`-th prime (`prime_rank(2) == 1`).
    pub fn prime_rank(&self, p: usize) -> Option<usize> {
        match self.rank.get(p) {
            Some(&r) if r != 0 => Some(r as usize),
            _ => None,
        }
    }

    /// Rank of the least prime factor of `n`.
    pub fn partition_index(&self, n: usize) -> Option<usize> {
        self.smallest_prime_factor(n).and_then(|p| self.prime_rank(p))
    }
}

/// Least prime factor of `n ≥ 2` by trial division.
pub fn smallest_prime_factor(n: usize) -> usize {
    debug_assert!(n >= 2);
    if n.is_multiple_of(2) {
        return 2;
    }
    let mut d = 3;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return d;
        }
        d += 2;
    }
    n
}

/// Index `m` of the partition block `{k p_m} \ ∪_{i<m} {k p_i}` containing `n`.
pub fn partition_index(n: usize) -> usize {
    let spf = smallest_prime_factor(n);
    PrimeSieve::new(spf)
        .prime_rank(spf)
        .expect("least prime factor is prime")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_prime(n: usize) -> bool {
        n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
    }

    #[test]
    fn sieve_matches_trial_division() {
        let sieve = PrimeSieve::new(10_000);
        for n in 2..=10_000 {
            assert_eq!(sieve.smallest_prime_factor(n), Some(smallest_prime_factor(n)));
        }
        assert_eq!(sieve.smallest_prime_factor(1), None);
        assert_eq!(sieve.smallest_prime_factor(10_001), None);
    }

    #[test]
    fn ranks_count_primes() {
        let sieve = PrimeSieve::new(1000);
        let mut count = 0;
        for n in 2..=1000 {
            if is_prime(n) {
                count += 1;
                assert_eq!(sieve.prime_rank(n), Some(count));
            } else {
                assert_eq!(sieve.prime_rank(n), None);
            }
        }
        assert_eq!(count, 168);
    }

    #[test]
    fn partition_examples() {
        assert_eq!(partition_index(6), 1);
        assert_eq!(partition_index(9), 2);
        assert_eq!(partition_index(25), 3);
        assert_eq!(partition_index(49), 4);
        assert_eq!(partition_index(97), 25);
    }
}
