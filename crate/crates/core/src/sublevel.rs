//! Level-set and sublevel-set decompositions of a function of one variable,
//! plus the derivative-interpolation constants C̃_m(ε).

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SublevelError {
    #[error("sampling cannot separate dyadic bands near t = {0}")]
    ResolutionInsufficient(f64),
    #[error("level {lambda:e} exceeds sup|g| ≈ {max:e}")]
    LevelExceedsMax { lambda: f64, max: f64 },
    #[error("|g'| reaches {0:e} > 1")]
    SlopeBoundViolated(f64),
    #[error("thickening Cλ = {0:e} exceeds |I|")]
    ThickeningExceedsInterval(f64),
    #[error("k = {k} is smaller than 1/ε (need {need})")]
    KTooSmall { k: usize, need: usize },
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IntervalTag {
    /// Maximal component of {λ ≤ |g| < 2λ}.
    Band,
    /// Component of V_λ.
    Sublevel,
    /// Component of a δ-thickened V_λ.
    Thickened,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub tag: IntervalTag,
}

impl Interval {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo && t <= self.hi
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IntervalDecomposition {
    pub base: (f64, f64),
    pub level: f64,
    pub intervals: Vec<Interval>,
    pub r: u32,
    /// Estimate of ‖g^{(r)}‖_∞.
    pub c_r: f64,
}

impl IntervalDecomposition {
    fn growth(&self) -> f64 {
        let r = self.r.max(1) as f64;
        r * (1.0 + (self.base.1 - self.base.0) * self.c_r.powf(1.0 / r) * self.level.powf(-1.0 / r))
    }

    /// 10r(1 + |I| C_r^{1/r} λ^{-1/r}).
    pub fn band_bound(&self) -> f64 {
        10.0 * self.growth()
    }

    /// 30r(1 + |I| C_r^{1/r} λ^{-1/r}).
    pub fn sublevel_bound(&self) -> f64 {
        30.0 * self.growth()
    }

    pub fn contains(&self, t: f64) -> bool {
        self.intervals.iter().any(|i| i.contains(t))
    }

    pub fn is_disjoint(&self) -> bool {
        let mut v: Vec<&Interval> = self.intervals.iter().collect();
        v.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        v.windows(2).all(|w| w[0].hi < w[1].lo)
    }
}

/// Sampling options for the decompositions.
#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    /// Base step of the uniform scan; `None` picks |I|/4096 (levels) or
    /// min(λ/100, |I|/2000) (sublevel sets).
    pub step: Option<f64>,
    /// Bisection stops once brackets are shorter than this.
    pub tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { step: None, tol: 1e-12 }
    }
}

const MAX_SAMPLES: usize = 20_000_000;

fn uniform(a: f64, b: f64, step: f64) -> Vec<f64> {
    let n = (((b - a) / step).ceil() as usize).clamp(1, MAX_SAMPLES);
    (0..=n).map(|i| if i == n { b } else { a + (b - a) * i as f64 / n as f64 }).collect()
}

/// Bisect between a point inside and a point outside a set; returns the
/// final (inside, outside) bracket.
fn bisect(pred: &dyn Fn(f64) -> bool, mut t_in: f64, mut t_out: f64, tol: f64) -> (f64, f64) {
    for _ in 0..200 {
        if (t_out - t_in).abs() <= tol {
            break;
        }
        let m = 0.5 * (t_in + t_out);
        if pred(m) {
            t_in = m;
        } else {
            t_out = m;
        }
    }
    (t_in, t_out)
}

/// Runs of consecutive samples satisfying `pred`, with refined endpoints.
/// `outer` selects the bracket side outside the set.
fn components(
    ts: &[f64],
    inside: &[bool],
    pred: &dyn Fn(f64) -> bool,
    tol: f64,
    outer: bool,
) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let n = ts.len();
    let mut i = 0;
    while i < n {
        if !inside[i] {
            i += 1;
            continue;
        }
        let s = i;
        while i + 1 < n && inside[i + 1] {
            i += 1;
        }
        let e = i;
        let lo = if s == 0 {
            ts[0]
        } else {
            let (a, b) = bisect(pred, ts[s], ts[s - 1], tol);
            if outer {
                b
            } else {
                a
            }
        };
        let hi = if e + 1 == n {
            ts[n - 1]
        } else {
            let (a, b) = bisect(pred, ts[e], ts[e + 1], tol);
            if outer {
                b
            } else {
                a
            }
        };
        out.push((lo, hi));
        i += 1;
    }
    out
}

fn band_index(v: f64, kmin: i32) -> i32 {
    let a = v.abs();
    if a < 2f64.powi(kmin) {
        kmin - 1
    } else {
        a.log2().floor() as i32
    }
}

/// Dyadic level bands J_{λ,ι}: maximal components of {λ ≤ |g| < 2λ} for
/// every dyadic λ between `lambda_min` and sup|g|, largest level first.
pub fn level_decompose(
    g: &dyn Fn(f64) -> f64,
    base: (f64, f64),
    r: u32,
    c_r: f64,
    lambda_min: f64,
    opts: ScanOptions,
) -> Result<Vec<IntervalDecomposition>, SublevelError> {
    let (a, b) = base;
    if !(b > a) || r == 0 || !(lambda_min > 0.0) {
        return Err(SublevelError::InvalidInput("need a < b, r ≥ 1, λ_min > 0".into()));
    }
    let kmin = lambda_min.log2().ceil() as i32;
    let step = opts.step.unwrap_or((b - a) / 4096.0);
    let mut ts = uniform(a, b, step);
    let mut gs: Vec<f64> = ts.iter().map(|&t| g(t)).collect();
    // refine until adjacent samples sit in the same or neighbouring bands
    let mut k = 0;
    while k + 1 < ts.len() {
        let (b0, b1) = (band_index(gs[k], kmin), band_index(gs[k + 1], kmin));
        if (b0 - b1).abs() > 1 {
            let w = ts[k + 1] - ts[k];
            if w < 1e-13 {
                return Err(SublevelError::ResolutionInsufficient(ts[k]));
            }
            if ts.len() >= MAX_SAMPLES {
                return Err(SublevelError::ResolutionInsufficient(ts[k]));
            }
            let m = ts[k] + 0.5 * w;
            ts.insert(k + 1, m);
            gs.insert(k + 1, g(m));
            continue;
        }
        k += 1;
    }
    let max = gs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max < lambda_min {
        return Ok(Vec::new());
    }
    let kmax = max.log2().floor() as i32;
    let mut out = Vec::new();
    for kk in (kmin..=kmax).rev() {
        let lambda = 2f64.powi(kk);
        let inside: Vec<bool> = gs.iter().map(|&v| band_index(v, kmin) == kk).collect();
        let pred = |t: f64| {
            let v = g(t).abs();
            v >= lambda && v < 2.0 * lambda
        };
        let intervals = components(&ts, &inside, &pred, opts.tol, false)
            .into_iter()
            .map(|(lo, hi)| Interval { lo, hi, tag: IntervalTag::Band })
            .collect();
        out.push(IntervalDecomposition { base, level: lambda, intervals, r, c_r });
    }
    Ok(out)
}

fn sub_samples(g: &dyn Fn(f64) -> f64, base: (f64, f64), lambda: f64, opts: ScanOptions) -> (Vec<f64>, Vec<f64>) {
    let (a, b) = base;
    let step = opts.step.unwrap_or((lambda / 100.0).min((b - a) / 2000.0));
    let ts = uniform(a, b, step);
    let gs = ts.iter().map(|&t| g(t)).collect();
    (ts, gs)
}

/// V_λ: components U of {|g| < λ}, each joined with the level band that
/// starts at an endpoint where |g| = λ; overlapping results are merged.
pub fn sublevel_decompose(
    g: &dyn Fn(f64) -> f64,
    base: (f64, f64),
    r: u32,
    c_r: f64,
    lambda: f64,
    opts: ScanOptions,
) -> Result<IntervalDecomposition, SublevelError> {
    let (a, b) = base;
    if !(b > a) || r == 0 || !(lambda > 0.0) {
        return Err(SublevelError::InvalidInput("need a < b, r ≥ 1, λ > 0".into()));
    }
    let (ts, gs) = sub_samples(g, base, lambda, opts);
    let max = gs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if lambda > max {
        return Err(SublevelError::LevelExceedsMax { lambda, max });
    }
    let below = |t: f64| g(t).abs() < lambda;
    let in_sub: Vec<bool> = gs.iter().map(|v| v.abs() < lambda).collect();
    let us = components(&ts, &in_sub, &below, opts.tol, true);
    let in_band = |t: f64| {
        let v = g(t).abs();
        v >= lambda && v < 2.0 * lambda
    };
    let n = ts.len();
    let mut pieces: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in us {
        let mut lo2 = lo;
        let mut hi2 = hi;
        if hi < b {
            // band to the right of hi
            let mut i = ts.partition_point(|&t| t <= hi);
            let start = i;
            while i < n && in_band(ts[i]) {
                i += 1;
            }
            if i > start {
                hi2 = if i == n { b } else { bisect(&in_band, ts[i - 1], ts[i], opts.tol).0 };
            }
        } else if lo > a {
            let mut i = ts.partition_point(|&t| t < lo);
            let end = i;
            while i > 0 && in_band(ts[i - 1]) {
                i -= 1;
            }
            if i < end {
                lo2 = if i == 0 { a } else { bisect(&in_band, ts[i], ts[i - 1], opts.tol).0 };
            }
        }
        pieces.push((lo2.max(a), hi2.min(b)));
    }
    let intervals = merge(pieces)
        .into_iter()
        .map(|(lo, hi)| Interval { lo, hi, tag: IntervalTag::Sublevel })
        .collect();
    Ok(IntervalDecomposition { base, level: lambda, intervals, r, c_r })
}

fn merge(mut v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    v.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in v {
        match out.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}

/// V_λ thickened by δ = Cλ inside I and split into components; requires
/// |g'| ≤ 1, which is checked on the scan grid.
pub fn thickened_decompose(
    g: &dyn Fn(f64) -> f64,
    base: (f64, f64),
    r: u32,
    c_r: f64,
    lambda: f64,
    c: f64,
    opts: ScanOptions,
) -> Result<IntervalDecomposition, SublevelError> {
    let (a, b) = base;
    let delta = c * lambda;
    if delta > b - a {
        return Err(SublevelError::ThickeningExceedsInterval(delta));
    }
    let (ts, gs) = sub_samples(g, base, lambda, opts);
    let slope = ts
        .windows(2)
        .zip(gs.windows(2))
        .map(|(t, v)| ((v[1] - v[0]) / (t[1] - t[0])).abs())
        .fold(0.0, f64::max);
    if slope > 1.0 + 1e-9 {
        return Err(SublevelError::SlopeBoundViolated(slope));
    }
    let v = sublevel_decompose(g, base, r, c_r, lambda, opts)?;
    let grown = v
        .intervals
        .iter()
        .map(|i| ((i.lo - delta).max(a), (i.hi + delta).min(b)))
        .collect();
    let intervals = merge(grown)
        .into_iter()
        .map(|(lo, hi)| Interval { lo, hi, tag: IntervalTag::Thickened })
        .collect();
    Ok(IntervalDecomposition { base, level: lambda, intervals, r, c_r })
}

/// M(ε) = ⌈1/ε⌉.
pub fn interp_m(eps: f64) -> usize {
    (1.0 / eps - 1e-12).ceil().max(1.0) as usize
}

/// C̃_0..C̃_k from c_1..c_k: C̃_m = c_m for m ≥ M, C̃_{m-1} = 2^{m(m-1)} + C̃_m.
pub fn deriv_interp_constants(eps: f64, c: &[f64]) -> Result<Vec<f64>, SublevelError> {
    if !(eps > 0.0) {
        return Err(SublevelError::InvalidInput("ε must be positive".into()));
    }
    let k = c.len();
    let m_eps = interp_m(eps);
    if k < m_eps {
        return Err(SublevelError::KTooSmall { k, need: m_eps });
    }
    let mut out = vec![0.0; k + 1];
    out[m_eps..=k].copy_from_slice(&c[m_eps - 1..k]);
    for m in (1..=m_eps).rev() {
        out[m - 1] = 2f64.powi((m * (m - 1)) as i32) + out[m];
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivCheckReport {
    pub eps: f64,
    pub b: f64,
    pub constants: Vec<f64>,
    /// Grid estimate of ‖g^{(m)}‖_∞.
    pub measured: Vec<f64>,
    /// c_0 C̃_m b^{-m}.
    pub bounds: Vec<f64>,
    pub pass: bool,
}

/// Grid check of ‖g^{(m)}‖ ≤ c_0 C̃_m(ε) b^{-m}, m = 0..k, after verifying
/// the hypotheses ‖g^{(m)}‖ ≤ c_m, c_0 < 1, b ≤ c_0^ε and k ≥ 1/ε.
/// `dg(m, t)` returns g^{(m)}(t); `c` holds c_0..c_k.
pub fn deriv_interp_check(
    dg: &dyn Fn(usize, f64) -> f64,
    base: (f64, f64),
    k: usize,
    eps: f64,
    c: &[f64],
) -> Result<DerivCheckReport, SublevelError> {
    if c.len() != k + 1 {
        return Err(SublevelError::InvalidInput("need c_0..c_k".into()));
    }
    let b = base.1 - base.0;
    if !(c[0] < 1.0) {
        return Err(SublevelError::HypothesisViolated(format!("c_0 = {} ≥ 1", c[0])));
    }
    if b > c[0].powf(eps) {
        return Err(SublevelError::HypothesisViolated(format!("b = {b} > c_0^ε")));
    }
    let constants = deriv_interp_constants(eps, &c[1..])?;
    let ts = uniform(base.0, base.1, b / 4000.0);
    let mut measured = Vec::with_capacity(k + 1);
    for m in 0..=k {
        let v = ts.iter().map(|&t| dg(m, t).abs()).fold(0.0, f64::max);
        if v > c[m] * (1.0 + 1e-12) {
            return Err(SublevelError::HypothesisViolated(format!(
                "‖g^({m})‖ ≈ {v:e} > c_{m} = {:e}",
                c[m]
            )));
        }
        measured.push(v);
    }
    let bounds: Vec<f64> = (0..=k).map(|m| c[0] * constants[m] * b.powi(-(m as i32))).collect();
    let pass = measured.iter().zip(&bounds).all(|(v, bd)| *v <= *bd);
    Ok(DerivCheckReport { eps, b, constants, measured, bounds, pass })
}
