//! Counter-addressed Gaussian increments.
//!
//! Every value is a pure function of (seed, domain, particle, base interval,
//! dyadic level, position). Systems of any size that share a seed therefore
//! see the same Brownian motion B_i for each particle index i, and a rejected
//! step can be refined along the Brownian bridge without storing paths.

use serde::{Deserialize, Serialize};

/// Seed domains keep independent consumers of one user seed apart.
pub mod domain {
    pub const DYNAMICS: u64 = 0x6479_6e61_6d69_6373;
    pub const GBE: u64 = 0x6762_655f_7361_6d70;
    pub const SAO: u64 = 0x7361_6f5f_6e6f_6973;
    pub const LAB: u64 = 0x6c61_625f_696e_7374;
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash of an arbitrary word sequence, used to derive sub-seeds.
pub fn mix(words: &[u64]) -> u64 {
    words.iter().fold(0x2545_f491_4f6c_dd1d, |h, &w| splitmix64(h ^ w))
}

/// Maps a 64-bit word to a uniform in (0, 1), never hitting either endpoint.
#[inline]
fn to_open_unit(h: u64) -> f64 {
    ((h >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Inverse standard normal CDF (Wichura's AS 241, relative accuracy ~1e-16).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2509.080_928_730_122_7 * r + 33430.575_583_588_128) * r
                + 67265.770_927_008_700)
                * r
                + 45921.953_931_549_871)
                * r
                + 13731.693_765_509_461)
                * r
                + 1971.590_950_306_551_3)
                * r
                + 133.141_667_891_784_38)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((5226.495_278_852_545_4 * r + 28729.085_735_721_943) * r
                + 39307.895_800_092_710)
                * r
                + 21213.794_301_586_595)
                * r
                + 5394.196_021_424_751_1)
                * r
                + 687.187_007_492_057_91)
                * r
                + 42.313_330_701_600_911)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((7.745_450_142_783_414_1e-4 * r + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_61)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691_4)
            * r
            + 4.630_337_846_156_545_3)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_344_9e-4) * r
                + 0.015_198_666_563_616_457)
                * r
                + 0.148_103_976_427_480_07)
                * r
                + 0.689_767_334_985_100_0)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_758_8)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_89)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114_4)
            * r
            + 6.657_904_643_501_103_3)
            / (((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446_0e-7) * r
                + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_132_6e-4)
                * r
                + 0.014_875_361_290_850_615)
                * r
                + 0.136_929_880_922_735_81)
                * r
                + 0.599_832_206_555_887_94)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Deterministic source of the Brownian motions {B_i}, i ≥ 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSource {
    pub seed: u64,
    pub dt_base: f64,
    pub domain: u64,
}

impl NoiseSource {
    pub fn new(seed: u64, dt_base: f64) -> Self {
        Self::with_domain(seed, dt_base, domain::DYNAMICS)
    }

    pub fn with_domain(seed: u64, dt_base: f64, domain: u64) -> Self {
        assert!(dt_base > 0.0, "dt_base must be positive");
        Self {
            seed,
            dt_base,
            domain,
        }
    }

    /// Standard normal addressed by (particle, interval, level, position).
    #[inline]
    pub fn gaussian(&self, i: usize, k: u64, level: u32, pos: u64) -> f64 {
        let mut h = splitmix64(self.seed ^ self.domain);
        h = splitmix64(h ^ i as u64);
        h = splitmix64(h ^ k);
        h = splitmix64(h ^ ((level as u64) << 48) ^ pos);
        inverse_normal_cdf(to_open_unit(h))
    }

    /// B_i((k+1)dt) − B_i(k dt) for 1-based particle index i.
    #[inline]
    pub fn increment(&self, i: usize, k: u64) -> f64 {
        self.dt_base.sqrt() * self.gaussian(i, k, 0, 0)
    }

    /// Splits the increment `parent` of sub-interval `parent_pos` at `child_level − 1`
    /// into its two halves, conditionally on the parent (Brownian bridge midpoint).
    #[inline]
    pub fn split(&self, i: usize, k: u64, child_level: u32, parent_pos: u64, parent: f64) -> (f64, f64) {
        debug_assert!(child_level >= 1);
        let h_parent = self.dt_base / (1u64 << (child_level - 1)) as f64;
        let left = 0.5 * parent + 0.5 * h_parent.sqrt() * self.gaussian(i, k, child_level, parent_pos);
        (left, parent - left)
    }

    /// Increment over the `pos`-th sub-interval of length dt_base/2^level in base interval k.
    pub fn sub_increment(&self, i: usize, k: u64, level: u32, pos: u64) -> f64 {
        let mut inc = self.increment(i, k);
        for l in 1..=level {
            let parent_pos = pos >> (level - l + 1);
            let (left, right) = self.split(i, k, l, parent_pos, inc);
            inc = if (pos >> (level - l)) & 1 == 0 { left } else { right };
        }
        inc
    }

    /// B_i(k1 dt) − B_i(k0 dt), summed over base increments.
    pub fn brownian_between(&self, i: usize, k0: u64, k1: u64) -> f64 {
        (k0..k1).map(|k| self.increment(i, k)).sum()
    }

    /// B_i on the base grid: values at k0, k0+1, ..., k1 relative to B_i(k0 dt).
    pub fn brownian_path(&self, i: usize, k0: u64, k1: u64) -> Vec<f64> {
        let mut out = Vec::with_capacity((k1 - k0 + 1) as usize);
        let mut b = 0.0;
        out.push(b);
        for k in k0..k1 {
            b += self.increment(i, k);
            out.push(b);
        }
        out
    }
}
