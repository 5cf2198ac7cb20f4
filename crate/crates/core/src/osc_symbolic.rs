//! Exact symbolic engine for the family e^{-t^-alpha} (P sin(t^-beta) + Q cos(t^-beta)),
//! where P and Q are "polynomials" in fractional powers of 1/t whose exponents live on
//! the integer lattice a*alpha + b*beta + c. The family is closed under d/dt, which is
//! what makes exact degree bookkeeping possible without a general CAS.

use crate::xreal::ExtendedReal;
use serde::Serialize;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OscError {
    #[error("osc_symbolic: evaluation point must be positive, got t = {0}")]
    NonPositiveTime(f64),
    #[error("osc_symbolic: amplitude P0^2 + Q0^2 vanishes, phase undefined")]
    DegeneratePhase,
    #[error("osc_symbolic: node count exceeded cap {cap} on [{lo}, {hi}]")]
    NodeCountExceeded { cap: usize, lo: f64, hi: f64 },
    #[error("osc_symbolic: invalid interval [{lo}, {hi}], need 0 < lo < hi")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("osc_symbolic: shape parameters must be positive, got alpha={alpha}, beta={beta}")]
    InvalidShape { alpha: f64, beta: f64 },
    #[error("osc_symbolic: phase t^-beta overflows f64 at t = {t}")]
    PhaseOverflow { t: f64 },
    #[error("osc_symbolic: parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("osc_symbolic: operands have different (alpha, beta) bases")]
    BasisMismatch,
}

/// Exponent `a*alpha + b*beta + c` as an exact lattice point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct ExponentTriple {
    pub alpha_mult: u32,
    pub beta_mult: u32,
    pub shift: u32,
}

impl ExponentTriple {
    pub const ZERO: ExponentTriple = ExponentTriple { alpha_mult: 0, beta_mult: 0, shift: 0 };

    pub fn new(alpha_mult: u32, beta_mult: u32, shift: u32) -> Self {
        ExponentTriple { alpha_mult, beta_mult, shift }
    }

    /// Numeric exponent value for a concrete basis.
    pub fn value(&self, alpha: f64, beta: f64) -> f64 {
        self.alpha_mult as f64 * alpha + self.beta_mult as f64 * beta + self.shift as f64
    }

    fn bumped(&self, da: u32, db: u32, dc: u32) -> Self {
        ExponentTriple {
            alpha_mult: self.alpha_mult + da,
            beta_mult: self.beta_mult + db,
            shift: self.shift + dc,
        }
    }

    /// Deterministic tie-break order used when two triples collide numerically.
    fn merge_rank(&self) -> (u32, u32, u32) {
        (self.beta_mult, self.alpha_mult, self.shift)
    }
}

/// One term `coeff * t^{-exponent}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Term {
    pub coeff: f64,
    pub exponent: ExponentTriple,
}

/// Sparse "polynomial" over the exponent lattice, canonical for a fixed basis:
/// terms sorted by decreasing numeric exponent, no duplicates, no zero coefficients.
#[derive(Clone, Debug, PartialEq, Default, Serialize)]
pub struct FracPoly {
    terms: Vec<Term>,
}

/// Coefficients below this fraction of the largest one are dropped during
/// canonicalization; the only inexact step of the engine.
const COEFF_TRUNCATION: f64 = 1e-300;

impl FracPoly {
    pub fn zero() -> FracPoly {
        FracPoly { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> FracPoly {
        FracPoly::from_terms(vec![Term { coeff: c, exponent: ExponentTriple::ZERO }], 1.0, 1.0)
    }

    pub fn from_terms(terms: Vec<Term>, alpha: f64, beta: f64) -> FracPoly {
        let mut p = FracPoly { terms };
        p.canonicalize(alpha, beta);
        p
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Numeric degree (value of the leading exponent); -inf for the zero polynomial.
    pub fn degree(&self, alpha: f64, beta: f64) -> f64 {
        self.terms.first().map_or(f64::NEG_INFINITY, |t| t.exponent.value(alpha, beta))
    }

    pub fn leading_exponent(&self) -> Option<ExponentTriple> {
        self.terms.first().map(|t| t.exponent)
    }

    fn canonicalize(&mut self, alpha: f64, beta: f64) {
        if self.terms.is_empty() {
            return;
        }
        // sort by numeric exponent descending; ties in deterministic lattice order
        self.terms.sort_by(|x, y| {
            let vx = x.exponent.value(alpha, beta);
            let vy = y.exponent.value(alpha, beta);
            vy.partial_cmp(&vx)
                .unwrap()
                .then_with(|| y.exponent.merge_rank().cmp(&x.exponent.merge_rank()))
        });
        // merge runs with numerically equal exponents; representative is the
        // lattice-largest triple so the seed's pure-beta lead keeps its identity
        let mut merged: Vec<Term> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            match merged.last_mut() {
                Some(last)
                    if last.exponent.value(alpha, beta) == t.exponent.value(alpha, beta) =>
                {
                    last.coeff += t.coeff;
                }
                _ => merged.push(t),
            }
        }
        let max_abs = merged.iter().map(|t| t.coeff.abs()).fold(0.0, f64::max);
        merged.retain(|t| t.coeff != 0.0 && t.coeff.abs() >= COEFF_TRUNCATION * max_abs);
        self.terms = merged;
    }

    /// Sum of |coeff| * t^{-e}: a pointwise envelope for the polynomial part.
    pub fn envelope(&self, alpha: f64, beta: f64, t: f64) -> f64 {
        let pw = PowerTables::new(t, alpha, beta, self.max_lattice());
        self.terms.iter().map(|term| term.coeff.abs() * pw.neg_power(term.exponent)).sum()
    }

    fn max_lattice(&self) -> (u32, u32, u32) {
        let mut m = (0, 0, 0);
        for t in &self.terms {
            m.0 = m.0.max(t.exponent.alpha_mult);
            m.1 = m.1.max(t.exponent.beta_mult);
            m.2 = m.2.max(t.exponent.shift);
        }
        m
    }
}

/// Small tables of (t^-alpha)^a, (t^-beta)^b, (1/t)^c so term evaluation is a
/// few multiplies instead of a powf per term.
struct PowerTables {
    pa: Vec<f64>,
    pb: Vec<f64>,
    pc: Vec<f64>,
}

impl PowerTables {
    fn new(t: f64, alpha: f64, beta: f64, max: (u32, u32, u32)) -> PowerTables {
        let build = |base: f64, n: u32| {
            let mut v = Vec::with_capacity(n as usize + 1);
            let mut acc = 1.0;
            v.push(acc);
            for _ in 0..n {
                acc *= base;
                v.push(acc);
            }
            v
        };
        PowerTables {
            pa: build(t.powf(-alpha), max.0),
            pb: build(t.powf(-beta), max.1),
            pc: build(1.0 / t, max.2),
        }
    }

    fn neg_power(&self, e: ExponentTriple) -> f64 {
        self.pa[e.alpha_mult as usize] * self.pb[e.beta_mult as usize] * self.pc[e.shift as usize]
    }
}

/// A member of the closed family
/// `t -> e^{-t^-alpha} (P(t) sin(t^-beta) + Q(t) cos(t^-beta))`
/// with P(t) = sum c_i t^{-(a_i alpha + b_i beta + c_i)}.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OscFunction {
    alpha: f64,
    beta: f64,
    sin_poly: FracPoly,
    cos_poly: FracPoly,
}

impl OscFunction {
    pub fn new(
        alpha: f64,
        beta: f64,
        sin_poly: FracPoly,
        cos_poly: FracPoly,
    ) -> Result<OscFunction, OscError> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(OscError::InvalidShape { alpha, beta });
        }
        let sin_poly = FracPoly::from_terms(sin_poly.terms, alpha, beta);
        let cos_poly = FracPoly::from_terms(cos_poly.terms, alpha, beta);
        Ok(OscFunction { alpha, beta, sin_poly, cos_poly })
    }

    /// The seed phi(t) = e^{-t^-alpha} sin(t^-beta): P = 1, Q = 0.
    pub fn seed(alpha: f64, beta: f64) -> Result<OscFunction, OscError> {
        OscFunction::new(alpha, beta, FracPoly::constant(1.0), FracPoly::zero())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn sin_poly(&self) -> &FracPoly {
        &self.sin_poly
    }

    pub fn cos_poly(&self) -> &FracPoly {
        &self.cos_poly
    }

    pub fn is_zero(&self) -> bool {
        self.sin_poly.is_zero() && self.cos_poly.is_zero()
    }

    /// max(deg P, deg Q) as a numeric value; -inf for the zero function.
    pub fn degree(&self) -> f64 {
        self.sin_poly.degree(self.alpha, self.beta).max(self.cos_poly.degree(self.alpha, self.beta))
    }

    /// Lattice point of the numerically-largest exponent across both polynomials.
    pub fn leading_exponent(&self) -> Option<ExponentTriple> {
        let dp = self.sin_poly.degree(self.alpha, self.beta);
        let dq = self.cos_poly.degree(self.alpha, self.beta);
        if dp >= dq {
            self.sin_poly.leading_exponent().or_else(|| self.cos_poly.leading_exponent())
        } else {
            self.cos_poly.leading_exponent()
        }
    }

    /// Exact term-level derivative. A sin-term c t^{-e} spawns sin-terms at
    /// exponents e+1 (coeff -e c) and e+alpha+1 (coeff alpha c) plus a cos-term
    /// at e+beta+1 (coeff -beta c); symmetrically for cos with the +beta sign.
    pub fn differentiate(&self) -> OscFunction {
        let (alpha, beta) = (self.alpha, self.beta);
        let mut sin_terms: Vec<Term> = Vec::new();
        let mut cos_terms: Vec<Term> = Vec::new();
        let push = |v: &mut Vec<Term>, coeff: f64, exponent: ExponentTriple| {
            if coeff != 0.0 {
                v.push(Term { coeff, exponent });
            }
        };
        for t in self.sin_poly.terms() {
            let e = t.exponent.value(alpha, beta);
            push(&mut sin_terms, -e * t.coeff, t.exponent.bumped(0, 0, 1));
            push(&mut sin_terms, alpha * t.coeff, t.exponent.bumped(1, 0, 1));
            push(&mut cos_terms, -beta * t.coeff, t.exponent.bumped(0, 1, 1));
        }
        for t in self.cos_poly.terms() {
            let e = t.exponent.value(alpha, beta);
            push(&mut cos_terms, -e * t.coeff, t.exponent.bumped(0, 0, 1));
            push(&mut cos_terms, alpha * t.coeff, t.exponent.bumped(1, 0, 1));
            push(&mut sin_terms, beta * t.coeff, t.exponent.bumped(0, 1, 1));
        }
        OscFunction {
            alpha,
            beta,
            sin_poly: FracPoly::from_terms(sin_terms, alpha, beta),
            cos_poly: FracPoly::from_terms(cos_terms, alpha, beta),
        }
    }

    /// n-fold composition of [`Self::differentiate`]; n = 0 is the identity.
    pub fn nth_derivative(&self, n: usize) -> OscFunction {
        let mut f = self.clone();
        for _ in 0..n {
            f = f.differentiate();
        }
        f
    }

    /// Term-by-term sum; both operands must share the (alpha, beta) basis.
    pub fn add(&self, other: &OscFunction) -> Result<OscFunction, OscError> {
        if self.alpha != other.alpha || self.beta != other.beta {
            return Err(OscError::BasisMismatch);
        }
        let mut sin_terms = self.sin_poly.terms.clone();
        sin_terms.extend_from_slice(&other.sin_poly.terms);
        let mut cos_terms = self.cos_poly.terms.clone();
        cos_terms.extend_from_slice(&other.cos_poly.terms);
        OscFunction::new(
            self.alpha,
            self.beta,
            FracPoly { terms: sin_terms },
            FracPoly { terms: cos_terms },
        )
    }

    pub fn scale(&self, factor: f64) -> OscFunction {
        let map = |p: &FracPoly| FracPoly {
            terms: p.terms.iter().map(|t| Term { coeff: t.coeff * factor, ..*t }).collect(),
        };
        OscFunction::new(self.alpha, self.beta, map(&self.sin_poly), map(&self.cos_poly)).unwrap()
    }

    /// Full evaluation with the exponential factor carried in the extended scale,
    /// so nothing underflows even at t = 1e-3 with alpha = 4.
    pub fn evaluate(&self, t: f64) -> Result<ExtendedReal, OscError> {
        if !(t > 0.0) {
            return Err(OscError::NonPositiveTime(t));
        }
        let xarg = t.powf(-self.alpha);
        let u = t.powf(-self.beta);
        if !xarg.is_finite() || !u.is_finite() {
            return Err(OscError::PhaseOverflow { t });
        }
        let (s, c) = u.sin_cos();
        let osc = self.weighted_poly_sum(t, s, c);
        Ok(ExtendedReal::exp(-xarg).mul(&osc))
    }

    /// The oscillating factor P(t) sin + Q(t) cos alone (no exponential damping),
    /// as an extended real so the polynomial part cannot overflow.
    pub fn oscillating_part(&self, t: f64) -> Result<ExtendedReal, OscError> {
        if !(t > 0.0) {
            return Err(OscError::NonPositiveTime(t));
        }
        let u = t.powf(-self.beta);
        if !u.is_finite() {
            return Err(OscError::PhaseOverflow { t });
        }
        let (s, c) = u.sin_cos();
        Ok(self.weighted_poly_sum(t, s, c))
    }

    fn weighted_poly_sum(&self, t: f64, s: f64, c: f64) -> ExtendedReal {
        let max = {
            let a = self.sin_poly.max_lattice();
            let b = self.cos_poly.max_lattice();
            (a.0.max(b.0), a.1.max(b.1), a.2.max(b.2))
        };
        let pw = PowerTables::new(t, self.alpha, self.beta, max);
        let direct = |p: &FracPoly| -> f64 {
            p.terms.iter().map(|term| term.coeff * pw.neg_power(term.exponent)).sum()
        };
        let pv = direct(&self.sin_poly);
        let qv = direct(&self.cos_poly);
        if pv.is_finite() && qv.is_finite() {
            ExtendedReal::from_f64(pv).mul_f64(s).add(&ExtendedReal::from_f64(qv).mul_f64(c))
        } else {
            // overflow fallback: per-term extended accumulation via log2 magnitudes
            let log2t = t.log2();
            let slow = |p: &FracPoly, w: f64| -> ExtendedReal {
                let mut acc = ExtendedReal::ZERO;
                for term in p.terms() {
                    let e = term.exponent.value(self.alpha, self.beta);
                    let lg = -e * log2t;
                    let part = ExtendedReal::from_parts(
                        term.coeff * f64::exp2(lg - lg.floor()),
                        lg.floor() as i64,
                    );
                    acc = acc.add(&part);
                }
                acc.mul_f64(w)
            };
            slow(&self.sin_poly, s).add(&slow(&self.cos_poly, c))
        }
    }

    /// Pointwise envelope e^{-t^-alpha} (|P| + |Q|)(t): an upper bound for |f(t)|
    /// that is monotone-friendly for tail estimates.
    pub fn envelope(&self, t: f64) -> ExtendedReal {
        let xarg = t.powf(-self.alpha);
        let e = self.sin_poly.envelope(self.alpha, self.beta, t)
            + self.cos_poly.envelope(self.alpha, self.beta, t);
        ExtendedReal::exp(-xarg).mul_f64(e)
    }

    /// Degree-normalized polynomials in the substituted variable u = t^-beta:
    /// P0(u) = sum c u^{(e - D)/beta} with D = max degree, so max(deg P0, deg Q0) = 0.
    pub fn normalized_u_value(&self, u: f64) -> (f64, f64) {
        let d = self.degree();
        let eval = |p: &FracPoly| -> f64 {
            p.terms()
                .iter()
                .map(|t| {
                    let e = t.exponent.value(self.alpha, self.beta);
                    t.coeff * u.powf((e - d) / self.beta)
                })
                .sum()
        };
        (eval(&self.sin_poly), eval(&self.cos_poly))
    }

    /// Amplitude-phase form of psi(u) = P0(u) sin u + Q0(u) cos u, anchored on
    /// cosine: psi(u) = A(u) cos(u + theta), theta in (-pi, pi].
    pub fn amplitude_phase(&self, u: f64) -> Result<(f64, f64), OscError> {
        if self.is_zero() {
            return Err(OscError::DegeneratePhase);
        }
        let (p0, q0) = self.normalized_u_value(u);
        let amplitude = p0.hypot(q0);
        if amplitude == 0.0 || !amplitude.is_finite() {
            return Err(OscError::DegeneratePhase);
        }
        let mut theta = (-p0).atan2(q0);
        if theta == -std::f64::consts::PI {
            theta = std::f64::consts::PI;
        }
        Ok((amplitude, theta))
    }

    /// All zeros of P sin + Q cos on [lo, hi], each bracketed to relative width
    /// 1e-12. The scan grid density follows the local instantaneous frequency
    /// beta t^{-beta-1} so no half-period can be skipped.
    pub fn oscillation_nodes(
        &self,
        lo: f64,
        hi: f64,
        max_nodes: usize,
    ) -> Result<Vec<f64>, OscError> {
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(OscError::InvalidInterval { lo, hi });
        }
        if self.is_zero() {
            return Ok(Vec::new());
        }
        const OVERSAMPLE: f64 = 8.0;
        let lead = self.degree().max(1.0);
        let mut nodes = Vec::new();
        let mut t_prev = lo;
        let mut s_prev = self.oscillating_part(t_prev)?.signum();
        if s_prev == 0.0 {
            nodes.push(t_prev);
        }
        let mut t = lo;
        while t < hi {
            let freq = self.beta * t.powf(-self.beta - 1.0)
                + self.alpha * t.powf(-self.alpha - 1.0)
                + (lead + 1.0) / t;
            let step = ((hi - lo) / 16.0).min(std::f64::consts::PI / (OVERSAMPLE * freq));
            t = (t + step).min(hi);
            let s = self.oscillating_part(t)?.signum();
            if s == 0.0 {
                nodes.push(t);
            } else if s_prev != 0.0 && s != s_prev {
                nodes.push(self.bisect_node(t_prev, t));
            }
            if nodes.len() > max_nodes {
                return Err(OscError::NodeCountExceeded { cap: max_nodes, lo, hi });
            }
            t_prev = t;
            s_prev = s;
        }
        Ok(nodes)
    }

    fn bisect_node(&self, mut a: f64, mut b: f64) -> f64 {
        let sa = self.oscillating_part(a).map(|v| v.signum()).unwrap_or(0.0);
        while b - a > 1e-12 * a {
            let mid = 0.5 * (a + b);
            let sm = self.oscillating_part(mid).map(|v| v.signum()).unwrap_or(0.0);
            if sm == 0.0 {
                return mid;
            }
            if sm == sa {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    /// Plain-text term list: `alpha`/`beta` header lines, then one term per line
    /// as `sign coefficient a b c sin|cos`.
    pub fn to_term_list(&self) -> String {
        let mut out = String::new();
        writeln!(out, "alpha {:e}", self.alpha).unwrap();
        writeln!(out, "beta {:e}", self.beta).unwrap();
        let mut dump = |p: &FracPoly, tag: &str| {
            for t in p.terms() {
                let sign = if t.coeff < 0.0 { '-' } else { '+' };
                writeln!(
                    out,
                    "{} {:.17e} {} {} {} {}",
                    sign,
                    t.coeff.abs(),
                    t.exponent.alpha_mult,
                    t.exponent.beta_mult,
                    t.exponent.shift,
                    tag
                )
                .unwrap();
            }
        };
        dump(&self.sin_poly, "sin");
        dump(&self.cos_poly, "cos");
        out
    }

    pub fn from_term_list(text: &str) -> Result<OscFunction, OscError> {
        let mut alpha = None;
        let mut beta = None;
        let mut sin_terms = Vec::new();
        let mut cos_terms = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| OscError::Parse { line: idx + 1, msg: msg.to_string() };
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                ["alpha", v] => alpha = Some(v.parse::<f64>().map_err(|_| err("bad alpha"))?),
                ["beta", v] => beta = Some(v.parse::<f64>().map_err(|_| err("bad beta"))?),
                [sign, coeff, a, b, c, kind] => {
                    let mut co: f64 = coeff.parse().map_err(|_| err("bad coefficient"))?;
                    match *sign {
                        "+" => {}
                        "-" => co = -co,
                        _ => return Err(err("sign must be + or -")),
                    }
                    let exponent = ExponentTriple::new(
                        a.parse().map_err(|_| err("bad a"))?,
                        b.parse().map_err(|_| err("bad b"))?,
                        c.parse().map_err(|_| err("bad c"))?,
                    );
                    let term = Term { coeff: co, exponent };
                    match *kind {
                        "sin" => sin_terms.push(term),
                        "cos" => cos_terms.push(term),
                        _ => return Err(err("kind must be sin or cos")),
                    }
                }
                _ => return Err(err("expected 'sign coeff a b c sin|cos'")),
            }
        }
        let alpha = alpha.ok_or(OscError::Parse { line: 0, msg: "missing alpha".into() })?;
        let beta = beta.ok_or(OscError::Parse { line: 0, msg: "missing beta".into() })?;
        OscFunction::new(alpha, beta, FracPoly { terms: sin_terms }, FracPoly { terms: cos_terms })
    }
}
