//! Counter-based random values.
//!
//! Each value is a pure function of `(seed, stream, trial, site)`, so a site
//! receives the same draw whatever region, worker or order requested it.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn absorb(state: u64, word: u64) -> u64 {
    mix64(state.wrapping_add(GOLDEN) ^ mix64(word.wrapping_add(GOLDEN)))
}

/// Hash of a seed, a stream tag, a trial index and a lattice site.
pub fn site_hash(seed: u64, stream: u64, trial: u64, site: &[i64]) -> u64 {
    let mut h = absorb(mix64(seed), stream);
    h = absorb(h, trial);
    h = absorb(h, site.len() as u64);
    for &c in site {
        h = absorb(h, c as u64);
    }
    h
}

/// Maps 64 random bits to a uniform double in `[0, 1)` with 53 bits of precision.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform `[0, 1)` draw for a site.
pub fn site_uniform(seed: u64, stream: u64, trial: u64, site: &[i64]) -> f64 {
    unit_f64(site_hash(seed, stream, trial, site))
}

/// Derived seed for a labelled sub-experiment.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    let mut h = mix64(seed ^ 0x6A09_E667_F3BC_C909);
    for b in label.bytes() {
        h = absorb(h, u64::from(b));
    }
    absorb(h, index)
}

/// Small sequential generator for test fixtures and experiment setup,
/// seeded from a derived seed.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    pub fn next_f64(&mut self) -> f64 {
        unit_f64(self.next_u64())
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `lo..=hi`.
    pub fn range_i64(&mut self, lo: i64, hi: i64) -> i64 {
        assert!(lo <= hi);
        let span = (hi - lo) as u64 + 1;
        lo + (self.next_u64() % span) as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let a = site_uniform(7, 0, 3, &[1, -2]);
        let b = site_uniform(7, 0, 3, &[1, -2]);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn sensitive_to_every_input() {
        let base = site_hash(7, 0, 3, &[1, -2]);
        assert_ne!(base, site_hash(8, 0, 3, &[1, -2]));
        assert_ne!(base, site_hash(7, 1, 3, &[1, -2]));
        assert_ne!(base, site_hash(7, 0, 4, &[1, -2]));
        assert_ne!(base, site_hash(7, 0, 3, &[-2, 1]));
        assert_ne!(base, site_hash(7, 0, 3, &[1, -2, 0]));
    }

    #[test]
    fn unit_range() {
        assert_eq!(unit_f64(0), 0.0);
        assert!(unit_f64(u64::MAX) < 1.0);
    }

    #[test]
    fn splitmix_mean() {
        let mut g = SplitMix64::new(11);
        let n = 100_000;
        let mean = (0..n).map(|_| g.next_f64()).sum::<f64>() / n as f64;
        let se = (1.0 / 12.0 / n as f64).sqrt();
        assert!((mean - 0.5).abs() < 4.0 * se);
    }
}
