//! Wide fixed-point numbers used by the moment/cumulant recursions.
//!
//! The recursions cancel many digits (the rectangular one loses roughly one
//! decimal digit per order), so they run on `BigInt / 2^FRAC_BITS` values.

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use std::ops::{Add, Mul, Sub};

const FRAC_BITS: u64 = 512;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Fixed(BigInt);

impl Fixed {
    pub fn zero() -> Self {
        Fixed(BigInt::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn one() -> Self {
        Fixed(BigInt::from(1) << FRAC_BITS)
    }

    /// Exact conversion (every finite f64 is a dyadic rational).
    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 || !x.is_finite() {
            return Self::zero();
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 0 { 1i64 } else { -1 };
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp - 1075) };
        let m = BigInt::from(mant) * sign;
        let shift = e + FRAC_BITS as i64;
        if shift >= 0 {
            Fixed(m << shift as u64)
        } else {
            Fixed(m >> (-shift) as u64)
        }
    }

    /// Exact value of `num / den` up to the last fractional bit.
    pub fn ratio(num: i64, den: i64) -> Self {
        Fixed((BigInt::from(num) << FRAC_BITS) / BigInt::from(den))
    }

    pub fn to_f64(&self) -> f64 {
        let v = &self.0;
        if v.is_zero() {
            return 0.0;
        }
        let bits = v.bits() as i64;
        // Keep 64 significant bits, then rescale.
        let drop = (bits - 64).max(0);
        let top = (v.abs() >> drop as u64).to_u64().unwrap_or(u64::MAX) as f64;
        let signed = if v.is_negative() { -top } else { top };
        ldexp(signed, drop - FRAC_BITS as i64)
    }
}

impl Add for &Fixed {
    type Output = Fixed;
    fn add(self, rhs: &Fixed) -> Fixed {
        Fixed(&self.0 + &rhs.0)
    }
}

impl Sub for &Fixed {
    type Output = Fixed;
    fn sub(self, rhs: &Fixed) -> Fixed {
        Fixed(&self.0 - &rhs.0)
    }
}

impl Mul for &Fixed {
    type Output = Fixed;
    fn mul(self, rhs: &Fixed) -> Fixed {
        Fixed((&self.0 * &rhs.0) >> FRAC_BITS)
    }
}

/// `x * 2^e` without overflowing intermediate powers.
pub(crate) fn ldexp(mut x: f64, mut e: i64) -> f64 {
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e as i32)
}
