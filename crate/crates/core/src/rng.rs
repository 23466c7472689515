//! Counter-based random numbers.
//!
//! Every random draw in a sampled matrix is a pure function of
//! `(seed, realization, i, j)`: the Philox4x32-10 block cipher maps the
//! 128-bit counter `(i, j, realization)` under the 64-bit key `seed` to four
//! independent 32-bit words. No generator state is carried between draws,
//! so entries can be produced in any order or on any thread with identical
//! results.

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let product = u64::from(a) * u64::from(b);
    ((product >> 32) as u32, product as u32)
}

/// The Philox4x32 bijection with 10 rounds.
#[inline]
pub fn philox4x32(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(W0);
            k[1] = k[1].wrapping_add(W1);
        }
        let (hi0, lo0) = mulhilo(M0, c[0]);
        let (hi1, lo1) = mulhilo(M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// Keyed counter-based generator for one matrix realization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairRng {
    key: [u32; 2],
    realization: u64,
}

impl PairRng {
    pub fn new(seed: u64, realization: u64) -> Self {
        Self {
            key: [seed as u32, (seed >> 32) as u32],
            realization,
        }
    }

    /// The four raw words assigned to the unordered pair `(i, j)`.
    #[inline]
    pub fn words(&self, i: u32, j: u32) -> [u32; 4] {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        philox4x32(
            [lo, hi, self.realization as u32, (self.realization >> 32) as u32],
            self.key,
        )
    }

    /// Two uniforms in the open interval (0, 1) for the pair `(i, j)`:
    /// the first drives the connectivity mask, the second the entry value.
    #[inline]
    pub fn uniforms(&self, i: u32, j: u32) -> (f64, f64) {
        let w = self.words(i, j);
        (open_unit(w[0], w[1]), open_unit(w[2], w[3]))
    }
}

/// Maps 52 random bits to the midpoint grid of (0, 1); never returns 0 or 1.
#[inline]
pub fn open_unit(hi: u32, lo: u32) -> f64 {
    let bits = (u64::from(hi) << 20) ^ (u64::from(lo) >> 12);
    ((bits & ((1 << 52) - 1)) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Known-answer vectors published with the Random123 reference library.
    #[test]
    fn philox_known_answers() {
        assert_eq!(
            philox4x32([0, 0, 0, 0], [0, 0]),
            [0x6627_e8d5, 0xe169_c58d, 0xbc57_ac4c, 0x9b00_dbd8]
        );
        assert_eq!(
            philox4x32([u32::MAX; 4], [u32::MAX; 2]),
            [0x408f_276d, 0x41c8_3b0e, 0xa20b_c7c6, 0x6d54_51fd]
        );
        assert_eq!(
            philox4x32(
                [0x243f_6a88, 0x85a3_08d3, 0x1319_8a2e, 0x0370_7344],
                [0xa409_3822, 0x299f_31d0]
            ),
            [0xd16c_fe09, 0x94fd_cceb, 0x5001_e420, 0x2412_6ea1]
        );
    }

    #[test]
    fn pair_order_is_irrelevant() {
        let rng = PairRng::new(42, 7);
        assert_eq!(rng.uniforms(3, 9), rng.uniforms(9, 3));
        assert_ne!(rng.uniforms(3, 9), rng.uniforms(3, 10));
        assert_ne!(rng.uniforms(3, 9), PairRng::new(42, 8).uniforms(3, 9));
    }

    #[test]
    fn uniforms_are_open_and_centered() {
        assert!(open_unit(0, 0) > 0.0);
        assert!(open_unit(u32::MAX, u32::MAX) < 1.0);
        let rng = PairRng::new(1, 0);
        let n = 200_000u32;
        let mean: f64 = (0..n).map(|k| rng.uniforms(k, k + 1).1).sum::<f64>() / n as f64;
        // Standard error is (12 n)^{-1/2} ≈ 6.5e-4.
        assert!((mean - 0.5).abs() < 4e-3);
    }
}
