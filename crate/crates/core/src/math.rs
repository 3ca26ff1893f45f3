//! Elementary functions: platform libm under `std`, the `libm` crate otherwise.

#[cfg(feature = "std")]
mod imp {
    #[inline]
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        x.ln()
    }
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
    #[inline]
    pub fn sin(x: f64) -> f64 {
        x.sin()
    }
    #[inline]
    pub fn cos(x: f64) -> f64 {
        x.cos()
    }
    #[inline]
    pub fn powf(x: f64, y: f64) -> f64 {
        x.powf(y)
    }
    #[inline]
    pub fn erfc(x: f64) -> f64 {
        libm::erfc(x)
    }
}

#[cfg(not(feature = "std"))]
mod imp {
    pub use libm::{cos, erfc, exp, log as ln, pow as powf, sin, sqrt};
}

pub(crate) use imp::*;

/// `e^{-h}` for finite `h ≥ 0`, flushed to zero below `e^{-708}`.
///
/// Cody–Waite reduction with a degree-13 Taylor polynomial and the `2ⁿ`
/// scale assembled with integer ops, so loops over slices vectorise. Every
/// correlation in the crate goes through this function, which keeps the
/// likelihood search, fitted models and batched Monte Carlo bit-consistent.
#[inline(always)]
pub(crate) fn exp_neg(h: f64) -> f64 {
    const LOG2E: f64 = core::f64::consts::LOG2_E;
    const LN2_HI: f64 = 6.931_471_803_691_238_164_90e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;
    // 1.5·2⁵²: adding it rounds to an integer held in the low mantissa bits
    const SHIFTER: f64 = 6_755_399_441_055_744.0;
    const C: [f64; 14] = [
        1.0,
        1.0,
        1.0 / 2.0,
        1.0 / 6.0,
        1.0 / 24.0,
        1.0 / 120.0,
        1.0 / 720.0,
        1.0 / 5040.0,
        1.0 / 40320.0,
        1.0 / 362_880.0,
        1.0 / 3_628_800.0,
        1.0 / 39_916_800.0,
        1.0 / 479_001_600.0,
        1.0 / 6_227_020_800.0,
    ];
    let t = -h.min(708.0);
    let k = t * LOG2E + SHIFTER;
    let n = k - SHIFTER;
    let r = (t - n * LN2_HI) - n * LN2_LO;
    let mut p = C[13];
    for c in C[..13].iter().rev() {
        p = p * r + c;
    }
    let e = (k.to_bits() as i64 - SHIFTER.to_bits() as i64 + 1023) as u64;
    let v = p * f64::from_bits(e << 52);
    if h > 708.0 {
        0.0
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_neg_matches_reference() {
        let mut worst = 0.0f64;
        for i in 0..200_000 {
            let h = i as f64 * 0.0035;
            let reference = libm::exp(-h);
            let rel = (exp_neg(h) - reference).abs() / reference;
            worst = worst.max(rel);
        }
        assert!(worst < 5e-16, "worst relative error {worst}");
        assert_eq!(exp_neg(0.0), 1.0);
        assert_eq!(exp_neg(1e6), 0.0);
        assert!((exp_neg(707.9) / libm::exp(-707.9) - 1.0).abs() < 1e-15);
    }
}
