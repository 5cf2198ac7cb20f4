//! Level-set interval covers: the finite disjoint family of sign-constant
//! intervals trapping {r/2 <= |phi| <= r}, delimited by crossings of r/4 and
//! 2r, plus the dyadic specialization r = 2^-k, the first-variation count
//! inequality, and log-log growth fits of the counts.

use crate::curve_geometry::SmoothFn;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoverError {
    #[error("level_set_cover: level r must be positive and finite, got {0}")]
    InvalidLevel(f64),
    #[error("level_set_cover: invalid domain [{lo}, {hi}]")]
    BadDomain { lo: f64, hi: f64 },
    #[error("level_set_cover: resolution must be positive, got {0}")]
    BadResolution(f64),
    #[error(
        "level_set_cover: resolution insufficient near [{lo}, {hi}]: {detail}; \
         refine the grid or supply a finer resolution"
    )]
    ResolutionInsufficient { lo: f64, hi: f64, detail: String },
}

/// One maximal sign-constant interval around a point of E_r, cut by the
/// crossings of |phi| = r/4 and |phi| = 2r (or the domain ends).
#[derive(Clone, Debug, Serialize)]
pub struct LevelInterval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
    /// sign of phi on the interval
    pub sign: i8,
    /// a sample with r/2 <= |phi| <= r inside the interval
    pub witness: f64,
}

/// The finite disjoint cover at level r with its count N(r; phi).
#[derive(Clone, Debug, Serialize)]
pub struct LevelCover {
    pub r: f64,
    pub intervals: Vec<LevelInterval>,
}

impl LevelCover {
    pub fn count(&self) -> usize {
        self.intervals.len()
    }

    /// Exact endpoint check of pairwise disjointness (intervals are emitted
    /// sorted; touching endpoints are disjoint unless both ends are closed).
    pub fn is_pairwise_disjoint(&self) -> bool {
        self.intervals.windows(2).all(|w| {
            w[0].hi < w[1].lo || (w[0].hi == w[1].lo && !(w[0].hi_closed && w[1].lo_closed))
        })
    }

    /// True when t lies in exactly one interval (endpoint flags honored).
    pub fn covers_exactly_once(&self, t: f64) -> bool {
        let mut hits = 0;
        for iv in &self.intervals {
            let in_lo = if iv.lo_closed { t >= iv.lo } else { t > iv.lo };
            let in_hi = if iv.hi_closed { t <= iv.hi } else { t < iv.hi };
            if in_lo && in_hi {
                hits += 1;
            }
        }
        hits == 1
    }
}

/// Hard ceiling on sweep samples per cover; beyond it the refine-or-fail
/// diagnostic fires rather than spinning forever.
const MAX_SAMPLES: usize = 30_000_000;
/// Bisection width for threshold crossings, relative to the domain span.
const CROSSING_WIDTH: f64 = 1e-13;

#[derive(Clone, Copy, PartialEq)]
enum Class {
    StopLow,
    StopHigh,
    Band,
}

fn classify(v: f64, r: f64) -> Class {
    let a = v.abs();
    if a <= r / 4.0 {
        Class::StopLow
    } else if a >= 2.0 * r {
        Class::StopHigh
    } else {
        Class::Band
    }
}

struct RunState {
    start: f64,
    start_closed: bool,
    witness: Option<f64>,
    sign: f64,
}

/// Build the level cover by a frequency-adaptive sweep: the local step keeps
/// (sampled |phi'|) * step <= r/8 so |phi| cannot jump across a quarter of the
/// band between samples, then every threshold crossing is bisected.
pub fn build_cover(
    phi: &dyn SmoothFn,
    domain: (f64, f64),
    r: f64,
    resolution: f64,
) -> Result<LevelCover, CoverError> {
    let (a, b) = domain;
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(CoverError::BadDomain { lo: a, hi: b });
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(CoverError::InvalidLevel(r));
    }
    if !(resolution > 0.0) {
        return Err(CoverError::BadResolution(resolution));
    }
    let span = b - a;
    let floor_step = (1e-14 * span).max(f64::EPSILON * b.abs());
    let cross_width = CROSSING_WIDTH * span;
    let is_stop = |t: f64| classify(phi.value(t), r) != Class::Band;

    let bisect = |mut clean: f64, mut stop: f64| -> f64 {
        // keep one certified point on each side of the stop-set boundary
        while (clean - stop).abs() > cross_width {
            let mid = 0.5 * (clean + stop);
            if is_stop(mid) {
                stop = mid;
            } else {
                clean = mid;
            }
        }
        let boundary = 0.5 * (clean + stop);
        // value-based endpoint convention: a crossing landing on a domain end
        // counts as that end
        if (boundary - a).abs() <= 4.0 * cross_width {
            a
        } else if (boundary - b).abs() <= 4.0 * cross_width {
            b
        } else {
            boundary
        }
    };

    let mut intervals: Vec<LevelInterval> = Vec::new();
    let mut run: Option<RunState> = None;
    let mut samples = 0usize;

    let mut t = a;
    let mut v = phi.value(t);
    let mut d = phi.deriv(1, t).abs();
    let mut cls = classify(v, r);
    if cls == Class::Band {
        run = Some(RunState {
            start: a,
            start_closed: true,
            witness: er_witness(v, r, t),
            sign: v.signum(),
        });
    }

    while t < b {
        // adaptive step: sampled local derivative bound with a 2x safety factor
        let mut h = resolution.min(span / 64.0);
        let (mut t2, mut v2, mut d2);
        loop {
            t2 = (t + h).min(b);
            v2 = phi.value(t2);
            d2 = phi.deriv(1, t2).abs();
            let bound = 2.0 * d.max(d2) + 1e-300;
            if bound * (t2 - t) <= r / 8.0 || h <= floor_step {
                break;
            }
            h = (r / (8.0 * bound)).max(floor_step);
        }
        if 2.0 * d.max(d2) * (t2 - t) > r / 8.0 && h <= floor_step {
            return Err(CoverError::ResolutionInsufficient {
                lo: t,
                hi: t2,
                detail: "required step fell below the floor".into(),
            });
        }
        samples += 1;
        if samples > MAX_SAMPLES {
            return Err(CoverError::ResolutionInsufficient {
                lo: t,
                hi: b,
                detail: format!("sample budget {MAX_SAMPLES} exhausted"),
            });
        }

        let cls2 = classify(v2, r);
        match (cls, cls2) {
            (Class::StopLow, Class::StopLow) | (Class::StopHigh, Class::StopHigh) => {}
            (Class::StopLow, Class::StopHigh) | (Class::StopHigh, Class::StopLow) => {
                return Err(CoverError::ResolutionInsufficient {
                    lo: t,
                    hi: t2,
                    detail: "adjacent samples jumped across the whole band".into(),
                });
            }
            (Class::Band, Class::Band) => {
                if v.signum() != v2.signum() && v != 0.0 && v2 != 0.0 {
                    return Err(CoverError::ResolutionInsufficient {
                        lo: t,
                        hi: t2,
                        detail: "sign flip inside the band hides a low excursion".into(),
                    });
                }
                if let Some(state) = run.as_mut() {
                    if state.witness.is_none() {
                        state.witness = er_witness(v2, r, t2);
                    }
                }
            }
            (Class::StopLow | Class::StopHigh, Class::Band) => {
                let boundary = bisect(t2, t);
                run = Some(RunState {
                    start: boundary,
                    start_closed: boundary == a,
                    witness: er_witness(v2, r, t2),
                    sign: v2.signum(),
                });
            }
            (Class::Band, Class::StopLow | Class::StopHigh) => {
                let boundary = bisect(t, t2);
                finish_run(&mut intervals, run.take(), boundary, boundary == b);
            }
        }
        t = t2;
        v = v2;
        d = d2;
        cls = cls2;
    }
    // run reaching the right end: empty stop set on the right, b_t = b, closed
    finish_run(&mut intervals, run.take(), b, true);

    Ok(LevelCover { r, intervals })
}

fn er_witness(v: f64, r: f64, t: f64) -> Option<f64> {
    (v.abs() >= r / 2.0 && v.abs() <= r).then_some(t)
}

fn finish_run(intervals: &mut Vec<LevelInterval>, run: Option<RunState>, hi: f64, hi_closed: bool) {
    if let Some(state) = run {
        if let Some(w) = state.witness {
            intervals.push(LevelInterval {
                lo: state.start,
                hi,
                lo_closed: state.start_closed,
                hi_closed,
                sign: if state.sign < 0.0 { -1 } else { 1 },
                witness: w,
            });
        }
    }
}

/// Cover at the dyadic level r = 2^-k; emitted intervals satisfy
/// 2^{-k-2} <= |phi| <= 2^{-k+1} on their closed hulls by construction.
pub fn dyadic_cover(
    phi: &dyn SmoothFn,
    domain: (f64, f64),
    k: i32,
    resolution: f64,
) -> Result<LevelCover, CoverError> {
    build_cover(phi, domain, f64::exp2(-k as f64), resolution)
}

/// Affine rescale of a SmoothFn onto [0, 1] with the chain-rule factors.
struct UnitRescale<'a> {
    inner: &'a dyn SmoothFn,
    lo: f64,
    span: f64,
}

impl SmoothFn for UnitRescale<'_> {
    fn deriv(&self, order: usize, s: f64) -> f64 {
        self.span.powi(order as i32) * self.inner.deriv(order, self.lo + s * self.span)
    }
}

/// View of phi' as the level function.
struct DerivView<'a> {
    inner: &'a dyn SmoothFn,
}

impl SmoothFn for DerivView<'_> {
    fn deriv(&self, order: usize, t: f64) -> f64 {
        self.inner.deriv(order + 1, t)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FirstVariationReport {
    /// N(r; phi) on the domain rescaled to [0, 1]
    pub count_base: usize,
    /// the derivative level (N/8) r used for the rescaled phi'
    pub deriv_level: f64,
    /// the same level expressed for the raw (unrescaled) phi'
    pub raw_deriv_level: f64,
    /// N((N/8) r; phi') on the rescaled domain; None when inapplicable
    pub count_deriv: Option<usize>,
    /// N/16
    pub threshold: f64,
    /// false when N < 20 and the inequality is not asserted
    pub applicable: bool,
    /// count_deriv >= N/16 (only meaningful when applicable)
    pub holds: bool,
}

/// Count inequality for the first derivative: when N(r; phi) = N >= 20 on
/// [0,1], the derivative must satisfy N((N/8) r; phi') >= N/16. General
/// domains are affinely rescaled to [0,1] first (the count of phi itself is
/// invariant; the derivative picks up the span factor, which is reported).
pub fn verify_first_variation(
    phi: &dyn SmoothFn,
    domain: (f64, f64),
    r: f64,
    resolution: f64,
) -> Result<FirstVariationReport, CoverError> {
    let (a, b) = domain;
    if !(a < b) {
        return Err(CoverError::BadDomain { lo: a, hi: b });
    }
    let span = b - a;
    let rescaled = UnitRescale { inner: phi, lo: a, span };
    let base = build_cover(&rescaled, (0.0, 1.0), r, resolution / span)?;
    let n = base.count();
    if n < 20 {
        return Ok(FirstVariationReport {
            count_base: n,
            deriv_level: f64::NAN,
            raw_deriv_level: f64::NAN,
            count_deriv: None,
            threshold: n as f64 / 16.0,
            applicable: false,
            holds: false,
        });
    }
    let level = n as f64 / 8.0 * r;
    let deriv = DerivView { inner: &rescaled };
    let dcover = build_cover(&deriv, (0.0, 1.0), level, resolution / span)?;
    let nd = dcover.count();
    Ok(FirstVariationReport {
        count_base: n,
        deriv_level: level,
        raw_deriv_level: level / span,
        count_deriv: Some(nd),
        threshold: n as f64 / 16.0,
        applicable: true,
        holds: nd as f64 >= n as f64 / 16.0,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelCount {
    pub k: i32,
    pub count: Option<usize>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    pub per_level: Vec<LevelCount>,
    /// least-squares slope of log2 N_k against k over levels with N_k >= 1
    pub slope: Option<f64>,
    /// true when some level failed to resolve
    pub gaps: bool,
}

/// Sweep k over [k_lo, k_hi], count N(2^-k), and fit the growth exponent.
/// Individual level failures become gap flags, not hard errors.
pub fn growth_exponent(
    phi: &dyn SmoothFn,
    domain: (f64, f64),
    k_range: (i32, i32),
    resolution: f64,
) -> GrowthReport {
    let mut per_level = Vec::new();
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut gaps = false;
    for k in k_range.0..=k_range.1 {
        match dyadic_cover(phi, domain, k, resolution) {
            Ok(cover) => {
                let n = cover.count();
                if n >= 1 {
                    pts.push((k as f64, (n as f64).log2()));
                }
                per_level.push(LevelCount { k, count: Some(n), error: None });
            }
            Err(e) => {
                gaps = true;
                per_level.push(LevelCount { k, count: None, error: Some(e.to_string()) });
            }
        }
    }
    GrowthReport { per_level, slope: least_squares_slope(&pts), gaps }
}

pub fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// k0 = ceil(-log2 sup|phi|) - 1 from a dense sample of |phi|: the smallest
/// dyadic index whose band can meet the range of phi, up to sampling.
pub fn dyadic_level_floor(phi: &dyn SmoothFn, domain: (f64, f64), samples: usize) -> i32 {
    let (a, b) = domain;
    let mut sup: f64 = 0.0;
    for i in 0..=samples {
        let t = a + (b - a) * i as f64 / samples as f64;
        let v = phi.value(t).abs();
        if v.is_finite() {
            sup = sup.max(v);
        }
    }
    ((-sup.log2()).ceil() as i32) - 1
}
