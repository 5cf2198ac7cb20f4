//! Extended-range reals: value = mantissa * 2^scale with the binary scale kept
//! as a separate integer, so quantities like exp(-delta^-alpha) survive far
//! below the f64 underflow threshold.

use serde::Serialize;
use std::cmp::Ordering;
use std::fmt;

/// High bits of log2(e) for the double-double argument split in [`ExtendedReal::exp`].
const LOG2_E_HI: f64 = 1.4426950408889634;
/// Low correction: log2(e) - LOG2_E_HI.
const LOG2_E_LO: f64 = 2.0355273740931033e-17;

/// A real number `mantissa * 2^scale` with `|mantissa| in [1,2)` or exactly zero.
///
/// The scale is an `i64`, so the representable magnitude range is astronomically
/// wider than f64. Arithmetic renormalizes after every operation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExtendedReal {
    mantissa: f64,
    scale: i64,
}

impl ExtendedReal {
    pub const ZERO: ExtendedReal = ExtendedReal { mantissa: 0.0, scale: 0 };
    pub const ONE: ExtendedReal = ExtendedReal { mantissa: 1.0, scale: 0 };

    /// Build from an ordinary f64. Panics on NaN; infinities are rejected too
    /// since they have no finite scale.
    pub fn from_f64(v: f64) -> ExtendedReal {
        assert!(v.is_finite(), "ExtendedReal::from_f64 needs a finite value, got {v}");
        if v == 0.0 {
            return ExtendedReal::ZERO;
        }
        let bits = v.abs().to_bits();
        let raw_exp = (bits >> 52) as i64;
        if raw_exp == 0 {
            // subnormal: scale up first
            let scaled = v * f64::exp2(200.0);
            let mut r = ExtendedReal::from_f64(scaled);
            r.scale -= 200;
            return r;
        }
        let mantissa = f64::from_bits((bits & 0x000f_ffff_ffff_ffff) | (1023u64 << 52));
        ExtendedReal {
            mantissa: if v < 0.0 { -mantissa } else { mantissa },
            scale: raw_exp - 1023,
        }
    }

    /// Build from parts; mantissa is renormalized into [1,2).
    pub fn from_parts(mantissa: f64, scale: i64) -> ExtendedReal {
        let mut r = ExtendedReal::from_f64(mantissa);
        if !r.is_zero() {
            r.scale += scale;
        }
        r
    }

    /// exp(x) for any finite x, including x far outside the f64 exp range.
    ///
    /// The product x*log2(e) is formed in double-double so the fractional part
    /// keeps full precision even when |x| is ~1e12.
    pub fn exp(x: f64) -> ExtendedReal {
        assert!(x.is_finite(), "ExtendedReal::exp needs a finite argument");
        // y = x*log2(e) as hi + lo
        let p = x * LOG2_E_HI;
        let e1 = f64::mul_add(x, LOG2_E_HI, -p);
        let lo = e1 + x * LOG2_E_LO;
        let k = p.round();
        let frac = (p - k) + lo;
        // frac in about [-0.5-eps, 0.5+eps]
        let m = f64::exp2(frac);
        ExtendedReal::from_parts(m, k as i64)
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0.0
    }

    pub fn mantissa(&self) -> f64 {
        self.mantissa
    }

    pub fn scale2(&self) -> i64 {
        self.scale
    }

    pub fn signum(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            self.mantissa.signum()
        }
    }

    pub fn abs(&self) -> ExtendedReal {
        ExtendedReal { mantissa: self.mantissa.abs(), scale: self.scale }
    }

    pub fn neg(&self) -> ExtendedReal {
        ExtendedReal { mantissa: -self.mantissa, scale: self.scale }
    }

    /// Log-magnitude representation: (scale, log2 of |mantissa| in [0,1)).
    /// Returns None for zero. Exact round-trip partner of [`Self::from_log2_parts`].
    pub fn log2_parts(&self) -> Option<(i64, f64)> {
        if self.is_zero() {
            None
        } else {
            Some((self.scale, self.mantissa.abs().log2()))
        }
    }

    pub fn from_log2_parts(sign: f64, scale: i64, frac: f64) -> ExtendedReal {
        let m = f64::exp2(frac) * sign.signum();
        ExtendedReal::from_parts(m, scale)
    }

    /// log2 of |value| as a single f64 (loses the low bits once |scale| is huge).
    pub fn log2_abs(&self) -> f64 {
        match self.log2_parts() {
            None => f64::NEG_INFINITY,
            Some((s, f)) => s as f64 + f,
        }
    }

    pub fn log10_abs(&self) -> f64 {
        self.log2_abs() * std::f64::consts::LN_2 / std::f64::consts::LN_10
    }

    pub fn ln_abs(&self) -> f64 {
        self.log2_abs() * std::f64::consts::LN_2
    }

    /// Convert back to f64, saturating to 0 on underflow and ±inf on overflow.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        if self.scale > 1024 {
            return f64::INFINITY * self.mantissa.signum();
        }
        if self.scale < -1070 {
            return 0.0;
        }
        self.mantissa * f64::exp2(self.scale as f64)
    }

    pub fn mul(&self, other: &ExtendedReal) -> ExtendedReal {
        if self.is_zero() || other.is_zero() {
            return ExtendedReal::ZERO;
        }
        ExtendedReal::from_parts(self.mantissa * other.mantissa, self.scale + other.scale)
    }

    pub fn mul_f64(&self, v: f64) -> ExtendedReal {
        self.mul(&ExtendedReal::from_f64(v))
    }

    pub fn div(&self, other: &ExtendedReal) -> ExtendedReal {
        assert!(!other.is_zero(), "ExtendedReal division by zero");
        if self.is_zero() {
            return ExtendedReal::ZERO;
        }
        ExtendedReal::from_parts(self.mantissa / other.mantissa, self.scale - other.scale)
    }

    /// Sum with scale alignment; terms more than ~60 binary orders below the
    /// larger one vanish, exactly as they would in f64.
    pub fn add(&self, other: &ExtendedReal) -> ExtendedReal {
        if self.is_zero() {
            return *other;
        }
        if other.is_zero() {
            return *self;
        }
        let (hi, lo) = if self.scale >= other.scale { (self, other) } else { (other, self) };
        let shift = hi.scale - lo.scale;
        if shift > 1060 {
            return *hi;
        }
        let m = hi.mantissa + lo.mantissa * f64::exp2(-(shift as f64));
        ExtendedReal::from_parts(m, hi.scale)
    }

    /// |self|^p computed through the log-magnitude; accuracy degrades only
    /// when |scale| is so large that p*log2|x| loses low bits.
    pub fn powf_abs(&self, p: f64) -> ExtendedReal {
        if self.is_zero() {
            assert!(p > 0.0, "0^p undefined for p <= 0");
            return ExtendedReal::ZERO;
        }
        let (s, f) = self.log2_parts().unwrap();
        // split p*(s+f) into integer + fractional with the integer part exact
        let ip = p * s as f64;
        let ip_err = f64::mul_add(p, s as f64, -ip);
        let y = ip.round();
        let frac = (ip - y) + ip_err + p * f;
        ExtendedReal::from_parts(f64::exp2(frac), y as i64)
    }

    /// Magnitude comparison |self| vs |other|.
    pub fn cmp_abs(&self, other: &ExtendedReal) -> Ordering {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            (false, false) => {
                if self.scale != other.scale {
                    self.scale.cmp(&other.scale)
                } else {
                    self.mantissa.abs().partial_cmp(&other.mantissa.abs()).unwrap()
                }
            }
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        // decimal mantissa * 10^k, good enough for reports
        let l10 = self.log10_abs();
        let k = l10.floor();
        let m = 10f64.powf(l10 - k) * self.mantissa.signum();
        write!(f, "{:.12}e{}", m, k as i64)
    }
}
