//! Strip families 𝓛₁ (A-strips), 𝓛₂ (B-strips), 𝓛₃ (large caps), the
//! intersection closure 𝓛̄ and the cover of non-separated cap families.

use std::collections::{HashMap, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::caps::{make_caps, Cap, CapError, CapRegion, CONTAIN_TOL};
use crate::geom::{dot, Point, Polygon, Rect};
use crate::hypgeo::{classify_pair, frame, level_curve_x, strongly_separated, GeoError, Orientation, PairTag};
use crate::phase::PhaseFunction;
use crate::sublevel::{sublevel_decompose, ScanOptions, SublevelError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RectError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("caps {0} and {1} of the family are strongly separated")]
    SeparatedPair(usize, usize),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Sublevel(#[from] SublevelError),
    #[error(transparent)]
    Caps(#[from] CapError),
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FamilyParams {
    pub k: u32,
    pub mu: f64,
    pub eps_prime: f64,
    /// Spacing of the A_k grid in units of μ^{1/2}K^{-3/4}.
    pub c: f64,
    /// Strip half-width in the same units.
    pub c_prime: f64,
    /// Side of the large caps in units of μ^{1/2}K^{-1/4}.
    pub c_big: f64,
}

impl FamilyParams {
    pub fn new(k: u32, mu: f64, eps_prime: f64) -> Self {
        FamilyParams { k, mu, eps_prime, c: 40.0, c_prime: 64.0, c_big: 40.0 }
    }

    /// μ^{1/2}K^{-3/4}.
    pub fn unit(&self) -> f64 {
        self.mu.sqrt() * (self.k as f64).powf(-0.75)
    }

    /// K^{-ε'}.
    pub fn max_len(&self) -> f64 {
        (self.k as f64).powf(-self.eps_prime)
    }

    /// C₁ = C + 2C' + 2, the A-proximity constant of the construction.
    pub fn c1(&self) -> f64 {
        self.c + 2.0 * self.c_prime + 2.0
    }

    fn check(&self) -> Result<(), RectError> {
        if self.k < 16 || !self.k.is_power_of_two() {
            return Err(RectError::InvalidParams(format!("K = {} must be a power of two ≥ 16", self.k)));
        }
        if !(self.eps_prime > 0.0 && self.eps_prime <= 0.1) {
            return Err(RectError::InvalidParams(format!("ε' = {} outside (0, 0.1]", self.eps_prime)));
        }
        if !(self.c > 34.0) {
            return Err(RectError::InvalidParams(format!("C = {} must exceed 34", self.c)));
        }
        if !(self.c_prime > 0.0 && self.c_big > 0.0) {
            return Err(RectError::InvalidParams("C' and the large-cap constant must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum StripKind {
    AStrip,
    BStrip,
    BigCap,
}

/// Closed rectangle center + s·dir + t·dir⊥, |s| ≤ half_length, |t| ≤ half_width.
#[derive(Debug, Clone, Serialize)]
pub struct Strip {
    pub kind: StripKind,
    pub k: usize,
    pub j: i64,
    pub i: usize,
    pub center: Point,
    pub dir: Point,
    pub half_width: f64,
    pub half_length: f64,
    /// A_k for A-strips, B_k for B-strips, 0 for large caps.
    pub level: f64,
}

impl Strip {
    pub fn normal(&self) -> Point {
        [self.dir[1], -self.dir[0]]
    }

    fn coords(&self, z: Point) -> (f64, f64) {
        let d = [z[0] - self.center[0], z[1] - self.center[1]];
        (dot(d, self.dir), dot(d, self.normal()))
    }

    pub fn contains(&self, z: Point, tol: f64) -> bool {
        let (s, t) = self.coords(z);
        s.abs() <= self.half_length + tol && t.abs() <= self.half_width + tol
    }

    pub fn contains_open(&self, z: Point) -> bool {
        let (s, t) = self.coords(z);
        s.abs() < self.half_length && t.abs() < self.half_width
    }

    pub fn distance(&self, z: Point) -> f64 {
        let (s, t) = self.coords(z);
        ((s.abs() - self.half_length).max(0.0)).hypot((t.abs() - self.half_width).max(0.0))
    }

    pub fn polygon(&self) -> Polygon {
        let n = self.normal();
        Polygon::parallelogram(
            self.center,
            [self.dir[0] * self.half_length, self.dir[1] * self.half_length],
            [n[0] * self.half_width, n[1] * self.half_width],
        )
    }

    pub fn length(&self) -> f64 {
        2.0 * self.half_length
    }

    fn swapped(&self) -> Strip {
        Strip {
            center: [self.center[1], self.center[0]],
            dir: [self.dir[1], self.dir[0]],
            ..self.clone()
        }
    }
}

impl CapRegion for Strip {
    fn contains_cap(&self, cap: &Cap) -> bool {
        cap.bounds.corners().iter().all(|&p| self.contains(p, CONTAIN_TOL))
    }
}

/// Bit set over the cap grid, index j·2K + i.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64)])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    fn and(&self, o: &Bits) -> Bits {
        Bits(self.0.iter().zip(&o.0).map(|(a, b)| a & b).collect())
    }

    fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    fn to_pairs(&self, side: u32) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for (w, &word) in self.0.iter().enumerate() {
            let mut x = word;
            while x != 0 {
                let b = x.trailing_zeros() as usize;
                let idx = (w * 64 + b) as u32;
                out.push((idx / side, idx % side));
                x &= x - 1;
            }
        }
        out
    }
}

/// 𝓛 = 𝓛₁ ∪ 𝓛₂ ∪ 𝓛₃ with the caps each member contains.
#[derive(Debug, Clone)]
pub struct Family {
    pub params: FamilyParams,
    pub caps: Vec<Cap>,
    pub strips: Vec<Strip>,
    /// Sorted (j, i) of the caps inside each member.
    pub cap_sets: Vec<Vec<(u32, u32)>>,
    pub a_levels: Vec<f64>,
    pub b_levels: Vec<f64>,
    bits: Vec<Bits>,
}

impl Family {
    pub fn of_kind(&self, kind: StripKind) -> impl Iterator<Item = (usize, &Strip)> {
        self.strips.iter().enumerate().filter(move |(_, s)| s.kind == kind)
    }

    pub fn count(&self, kind: StripKind) -> usize {
        self.of_kind(kind).count()
    }

    fn cap_index(&self, c: &Cap) -> usize {
        (c.j * 2 * self.params.k + c.i) as usize
    }

    /// Members containing the cap.
    pub fn members_containing(&self, c: &Cap) -> Vec<usize> {
        let idx = self.cap_index(c);
        (0..self.strips.len()).filter(|&m| self.bits[m].get(idx)).collect()
    }
}

/// A ∩ … of members of 𝓛, identified by the caps it contains.
#[derive(Debug, Clone, Serialize)]
pub struct CoverSet {
    pub members: Vec<usize>,
    pub caps: Vec<(u32, u32)>,
    #[serde(skip)]
    bits: Bits,
}

impl CoverSet {
    pub fn len(&self) -> usize {
        self.caps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.caps.is_empty()
    }
}

impl CapRegion for CoverSet {
    fn contains_cap(&self, cap: &Cap) -> bool {
        self.caps.binary_search(&(cap.j, cap.i)).is_ok()
    }
}

fn a_value(phi: &PhaseFunction, z: Point) -> f64 {
    frame(phi, z).map(|f| f.a).unwrap_or(f64::NAN)
}

/// Range of t with s·ω + t·n ∈ Σ.
fn line_in_sigma(s: f64, w: Point, n: Point) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for ax in 0..2 {
        let base = s * w[ax];
        if n[ax].abs() < 1e-300 {
            if base.abs() > 1.0 {
                return None;
            }
            continue;
        }
        let a = (-1.0 - base) / n[ax];
        let b = (1.0 - base) / n[ax];
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    }
    (lo <= hi).then_some((lo, hi))
}

/// A-strips of `phi` in its own coordinates, and the A_k grid.
fn a_strips(phi: &PhaseFunction, p: &FamilyParams, kind: StripKind) -> (Vec<Strip>, Vec<f64>) {
    let u = p.unit();
    let n_grid = ((2.0 / (0.5 * u)).ceil() as usize).clamp(64, 2048);
    let (mut amin, mut amax) = (f64::INFINITY, f64::NEG_INFINITY);
    for a in 0..=n_grid {
        for b in 0..=n_grid {
            let z = [-1.0 + 2.0 * a as f64 / n_grid as f64, -1.0 + 2.0 * b as f64 / n_grid as f64];
            let v = a_value(phi, z);
            amin = amin.min(v);
            amax = amax.max(v);
        }
    }
    let spacing = p.c * u;
    let nk = ((amax - amin) / spacing).floor() as usize + 1;
    let levels: Vec<f64> = (0..nk).map(|k| amin + k as f64 * spacing).collect();
    let width = p.c_prime * u;
    let max_piece = 0.5 * p.max_len();
    let mut strips = Vec::new();
    for (k, &ak) in levels.iter().enumerate() {
        let norm = ak.hypot(1.0);
        let w = [-ak / norm, 1.0 / norm];
        let n = [w[1], -w[0]];
        let corners = Rect::SIGMA.corners();
        let proj = |v: Point| corners.iter().map(|&c| dot(c, v)).fold((f64::INFINITY, f64::NEG_INFINITY), |m, x| (m.0.min(x), m.1.max(x)));
        let (tmin, tmax) = proj(n);
        let (smin, smax) = proj(w);
        let jlo = (tmin / width - 1.0).floor() as i64;
        let jhi = (tmax / width + 1.0).ceil() as i64;
        for j in jlo..=jhi {
            let (b0, b1) = ((j - 1) as f64 * width, (j + 1) as f64 * width);
            if !(b0 < tmax && b1 > tmin) {
                continue;
            }
            let ns = ((smax - smin) / (u / 8.0)).ceil() as usize;
            let step = (smax - smin) / ns as f64;
            let s_at = |m: usize| smin + m as f64 * step;
            let active: Vec<bool> = (0..=ns)
                .map(|m| {
                    let s = s_at(m);
                    let Some((lo, hi)) = line_in_sigma(s, w, n) else { return false };
                    let (lo, hi) = (lo.max(b0), hi.min(b1));
                    if lo > hi {
                        return false;
                    }
                    let nt = (((hi - lo) / (u / 8.0)).ceil() as usize).max(1);
                    (0..=nt).any(|q| {
                        let t = lo + (hi - lo) * q as f64 / nt as f64;
                        let z = [s * w[0] + t * n[0], s * w[1] + t * n[1]];
                        (a_value(phi, z) - ak).abs() < spacing
                    })
                })
                .collect();
            // runs of S⁰, widened by a sample step, then padded by u (S¹)
            let mut comps: Vec<(f64, f64)> = Vec::new();
            let mut m = 0;
            while m <= ns {
                if !active[m] {
                    m += 1;
                    continue;
                }
                let a = m;
                while m < ns && active[m + 1] {
                    m += 1;
                }
                let lo = if a == 0 { s_at(0) } else { s_at(a) - step };
                let hi = if m == ns { s_at(ns) } else { s_at(m) + step };
                let (lo, hi) = (lo - u, hi + u);
                match comps.last_mut() {
                    Some(last) if lo <= last.1 => last.1 = hi,
                    _ => comps.push((lo, hi)),
                }
                m += 1;
            }
            let mut i = 0;
            for (lo, hi) in comps {
                let len = hi - lo;
                let pieces = ((len / max_piece).ceil() as usize).max(1);
                let h = len / pieces as f64;
                for q in 0..pieces {
                    let sc = lo + (q as f64 + 0.5) * h;
                    let tc = j as f64 * width;
                    let strip = Strip {
                        kind,
                        k,
                        j,
                        i,
                        center: [sc * w[0] + tc * n[0], sc * w[1] + tc * n[1]],
                        dir: w,
                        half_width: width,
                        half_length: 0.5 * h + u,
                        level: ak,
                    };
                    if strip.polygon().clip_rect(&Rect::SIGMA).area() > 0.0 {
                        strips.push(strip);
                        i += 1;
                    }
                }
            }
        }
    }
    (strips, levels)
}

fn big_caps(p: &FamilyParams) -> Vec<Strip> {
    let side = p.c_big * p.mu.sqrt() * (p.k as f64).powf(-0.25);
    let sp = 0.5 * side;
    let m = (1.0 / sp).floor() as i64;
    let mut out = Vec::new();
    let mut i = 0;
    for b in -m..=m {
        for a in -m..=m {
            out.push(Strip {
                kind: StripKind::BigCap,
                k: 0,
                j: 0,
                i,
                center: [a as f64 * sp, b as f64 * sp],
                dir: [0.0, 1.0],
                half_width: 0.5 * side,
                half_length: 0.5 * side,
                level: 0.0,
            });
            i += 1;
        }
    }
    out
}

fn cap_bits(strip: &Strip, caps: &[Cap], k: u32) -> Bits {
    let side = 2 * k;
    let mut bits = Bits::new((side * side) as usize);
    let bb = strip.polygon().bbox().intersect(&Rect::SIGMA);
    if bb.is_empty() {
        return bits;
    }
    let kf = k as f64;
    let idx = |v: f64| (((v + 1.0) * kf).floor() as i64).clamp(0, side as i64 - 1) as u32;
    let (i0, i1) = (idx(bb.x0 - 1.0 / kf).saturating_sub(1), idx(bb.x1 + 1.0 / kf));
    let (j0, j1) = (idx(bb.y0 - 1.0 / kf).saturating_sub(1), idx(bb.y1 + 1.0 / kf));
    for j in j0..=j1 {
        for i in i0..=i1 {
            let n = (j * side + i) as usize;
            if strip.contains_cap(&caps[n]) {
                bits.set(n);
            }
        }
    }
    bits
}

/// Builds 𝓛₁, 𝓛₂ and 𝓛₃ and the caps contained in each member.
pub fn build_family(phi: &PhaseFunction, params: FamilyParams) -> Result<Family, RectError> {
    params.check()?;
    let caps = make_caps(params.k, params.mu)?;
    let (mut strips, a_levels) = a_strips(phi, &params, StripKind::AStrip);
    let (b, b_levels) = a_strips(&phi.swapped(), &params, StripKind::BStrip);
    strips.extend(b.iter().map(Strip::swapped));
    strips.extend(big_caps(&params));
    let side = 2 * params.k;
    let bits: Vec<Bits> = strips.iter().map(|s| cap_bits(s, &caps, params.k)).collect();
    let cap_sets = bits.iter().map(|b| b.to_pairs(side)).collect();
    Ok(Family { params, caps, strips, cap_sets, a_levels, b_levels, bits })
}

/// 𝓛̄: all nonempty intersections of members, deduplicated by cap set; each
/// keeps the members of the first intersection that produced it.
pub fn closure(family: &Family) -> Vec<CoverSet> {
    let side = 2 * family.params.k;
    let mut seen: HashMap<Bits, usize> = HashMap::new();
    let mut out: Vec<CoverSet> = Vec::new();
    let mut queue = VecDeque::new();
    for (m, b) in family.bits.iter().enumerate() {
        if b.is_empty() || seen.contains_key(b) {
            continue;
        }
        seen.insert(b.clone(), out.len());
        out.push(CoverSet { members: vec![m], caps: Vec::new(), bits: b.clone() });
        queue.push_back(out.len() - 1);
    }
    while let Some(d) = queue.pop_front() {
        for (m, b) in family.bits.iter().enumerate() {
            if out[d].members.contains(&m) {
                continue;
            }
            let x = out[d].bits.and(b);
            if x.is_empty() || seen.contains_key(&x) {
                continue;
            }
            let mut members = out[d].members.clone();
            members.push(m);
            members.sort_unstable();
            seen.insert(x.clone(), out.len());
            out.push(CoverSet { members, caps: Vec::new(), bits: x });
            queue.push_back(out.len() - 1);
        }
    }
    for c in &mut out {
        c.caps = c.bits.to_pairs(side);
    }
    out
}

fn sigma_grid(step: f64) -> Vec<Point> {
    let n = (2.0 / step).round() as usize;
    let mut pts = Vec::with_capacity((n + 1) * (n + 1));
    for b in 0..=n {
        for a in 0..=n {
            pts.push([-1.0 + 2.0 * a as f64 / n as f64, -1.0 + 2.0 * b as f64 / n as f64]);
        }
    }
    pts
}

/// Max over grid points of Σ of the number of members of the given kinds
/// whose interior contains the point.
pub fn overlap_stats(family: &Family, kinds: &[StripKind], grid_step: f64) -> usize {
    let members: Vec<&Strip> = family.strips.iter().filter(|s| kinds.contains(&s.kind)).collect();
    sigma_grid(grid_step)
        .into_iter()
        .map(|z| members.iter().filter(|s| s.contains_open(z)).count())
        .max()
        .unwrap_or(0)
}

/// Max over grid points of Σ of the number of Δ ∈ 𝓛̄ containing a cap
/// that contains the point.
pub fn closure_overlap(family: &Family, sets: &[CoverSet], grid_step: f64) -> usize {
    let k = family.params.k;
    let side = 2 * k;
    let kf = k as f64;
    let reach = (family.caps[0].side * kf).ceil() as i64;
    sigma_grid(grid_step)
        .into_iter()
        .map(|z| {
            let ci = ((z[0] + 1.0) * kf - 0.5).round() as i64;
            let cj = ((z[1] + 1.0) * kf - 0.5).round() as i64;
            let mut here = Vec::new();
            for dj in -reach..=reach {
                for di in -reach..=reach {
                    let (i, j) = (ci + di, cj + dj);
                    if i < 0 || j < 0 || i >= side as i64 || j >= side as i64 {
                        continue;
                    }
                    let n = (j as u32 * side + i as u32) as usize;
                    if family.caps[n].contains_half_open(z) {
                        here.push(n);
                    }
                }
            }
            sets.iter().filter(|d| here.iter().any(|&n| d.bits.get(n))).count()
        })
        .max()
        .unwrap_or(0)
}

/// Grid check of |A(z) − A_k| (|B(z) − B_k| for B-strips) on every A/B-strip.
#[derive(Debug, Clone, Serialize)]
pub struct ProximityReport {
    /// max |A(z) − A_k| / (μ^{1/2}K^{-3/4}).
    pub max_ratio: f64,
    pub c1: f64,
    pub min_length: f64,
    pub max_length: f64,
    pub length_ok: bool,
    pub pass: bool,
}

pub fn strip_checks(phi: &PhaseFunction, family: &Family, samples: usize) -> ProximityReport {
    let p = &family.params;
    let u = p.unit();
    let swapped = phi.swapped();
    let mut max_ratio = 0.0f64;
    let (mut lmin, mut lmax) = (f64::INFINITY, 0.0f64);
    for s in family.strips.iter().filter(|s| s.kind != StripKind::BigCap) {
        lmin = lmin.min(s.length());
        lmax = lmax.max(s.length());
        let nrm = s.normal();
        for a in 0..=samples {
            for b in 0..=samples {
                let sa = (2.0 * a as f64 / samples as f64 - 1.0) * s.half_length;
                let tb = (2.0 * b as f64 / samples as f64 - 1.0) * s.half_width;
                let z = [s.center[0] + sa * s.dir[0] + tb * nrm[0], s.center[1] + sa * s.dir[1] + tb * nrm[1]];
                if !Rect::SIGMA.contains(z) {
                    continue;
                }
                let v = match s.kind {
                    StripKind::AStrip => a_value(phi, z),
                    _ => a_value(&swapped, [z[1], z[0]]),
                };
                max_ratio = max_ratio.max((v - s.level).abs() / u);
            }
        }
    }
    let length_ok = lmin >= u * (1.0 - 1e-12) && lmax <= p.max_len() * (1.0 + 1e-12);
    let c1 = p.c1();
    ProximityReport { max_ratio, c1, min_length: lmin, max_length: lmax, length_ok, pass: length_ok && max_ratio <= c1 }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverReport {
    /// Indices into `family.strips`.
    pub members: Vec<usize>,
    pub covered: bool,
    pub uncovered: Vec<(u32, u32)>,
    /// Sublevel intervals whose tubes contributed strips, over both orientations.
    pub intervals_used: usize,
    /// Sum of the interval-count bounds of the decompositions that were used.
    pub interval_bound: f64,
    /// max(1, intervals_used)·6K^{ε'}.
    pub size_bound: f64,
    pub fallbacks: usize,
    /// Pairs handled in Case A, B and C.
    pub case_counts: [usize; 3],
}

struct CurveData {
    /// Sample points of γ in original coordinates, with their t.
    intervals: Vec<(f64, f64)>,
    bound: f64,
}

fn orient(z: Point, o: Orientation) -> Point {
    match o {
        Orientation::YDominant => z,
        Orientation::XDominant => [z[1], z[0]],
    }
}

/// Sublevel intervals of g(t) = A(γ(t)) − A(z₁) along the level curve
/// t²_{z₁}(z₁, ·) = 0 in the oriented phase.
fn curve_intervals(psi: &PhaseFunction, z1: Point, lambda: f64) -> Result<CurveData, RectError> {
    let a1 = a_value(psi, z1);
    let gamma = |t: f64| level_curve_x(psi, z1, 0.0, t).map(|x| [x, t]);
    let g = |t: f64| gamma(t).map(|z| a_value(psi, z) - a1).unwrap_or(f64::NAN);
    let n = 2000;
    let vals: Vec<f64> = (0..=n).map(|q| g(-1.0 + 2.0 * q as f64 / n as f64)).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(RectError::Geo(GeoError::NoConvergence { v: 0.0, y: z1[1] }));
    }
    let sup = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let slope = vals.windows(2).map(|w| (w[1] - w[0]).abs() * n as f64 / 2.0).fold(0.0, f64::max);
    if lambda > sup {
        return Ok(CurveData { intervals: vec![(-1.0, 1.0)], bound: 30.0 * (1.0 + 2.0 * slope / lambda) });
    }
    let d = sublevel_decompose(&g, (-1.0, 1.0), 1, slope.max(1e-300), lambda, ScanOptions::default())?;
    Ok(CurveData { intervals: d.intervals.iter().map(|i| (i.lo, i.hi)).collect(), bound: d.sublevel_bound() })
}

/// 𝓛₀ ⊂ 𝓛 covering every cap of `f`, following the case analysis: pairs in
/// Case A/B go to a large cap, pairs in Case C to the strips along the tube
/// around the sublevel interval of A∘γ that contains them.
pub fn geometric_cover(phi: &PhaseFunction, family: &Family, f: &[Cap]) -> Result<CoverReport, RectError> {
    let p = &family.params;
    if f.is_empty() {
        return Err(RectError::InvalidParams("empty cap family".into()));
    }
    for a in 0..f.len() {
        for b in a + 1..f.len() {
            if strongly_separated(phi, &f[a], &f[b], p.mu, p.k)? {
                return Err(RectError::SeparatedPair(a, b));
            }
        }
    }
    let u = p.unit();
    let lambda = 2.0 * u;
    let t1 = &f[0];
    let mut chosen: Vec<usize> = Vec::new();
    let mut fallbacks = 0;
    let mut case_counts = [0usize; 3];
    let mut curves: HashMap<u8, CurveData> = HashMap::new();
    let mut used: HashMap<(u8, usize), Vec<usize>> = HashMap::new();
    let contains = |m: usize, c: &Cap| family.bits[m].get(family.cap_index(c));
    let add = |chosen: &mut Vec<usize>, m: usize| {
        if !chosen.contains(&m) {
            chosen.push(m);
        }
    };
    for t2 in f.iter().skip(1) {
        if t2.i == t1.i && t2.j == t1.j {
            continue;
        }
        let cls = classify_pair(phi, t1, t2, p.mu, p.k)?;
        match cls.tag {
            PairTag::CaseA | PairTag::CaseB => {
                case_counts[if cls.tag == PairTag::CaseA { 0 } else { 1 }] += 1;
                let big = family
                    .of_kind(StripKind::BigCap)
                    .map(|(m, _)| m)
                    .find(|&m| contains(m, t1) && contains(m, t2));
                match big {
                    Some(m) => add(&mut chosen, m),
                    None => fallbacks += 1,
                }
            }
            PairTag::CaseC => {
                case_counts[2] += 1;
                let o = cls.orientation;
                let key = o as u8;
                let (psi, kind, levels) = match o {
                    Orientation::YDominant => (phi.clone(), StripKind::AStrip, &family.a_levels),
                    Orientation::XDominant => (phi.swapped(), StripKind::BStrip, &family.b_levels),
                };
                let z1 = orient(t1.center, o);
                if let std::collections::hash_map::Entry::Vacant(e) = curves.entry(key) {
                    e.insert(curve_intervals(&psi, z1, lambda)?);
                }
                let cd = &curves[&key];
                let y2 = orient(t2.center, o)[1];
                let Some(iv) = cd.intervals.iter().position(|&(lo, hi)| y2 >= lo && y2 <= hi) else {
                    fallbacks += 1;
                    continue;
                };
                if !used.contains_key(&(key, iv)) {
                    let (lo, hi) = cd.intervals[iv];
                    let a1 = a_value(&psi, z1);
                    let k = levels
                        .iter()
                        .enumerate()
                        .min_by(|x, y| (x.1 - a1).abs().total_cmp(&(y.1 - a1).abs()))
                        .map(|(k, _)| k)
                        .unwrap_or(0);
                    let ns = (((hi - lo) / (0.5 * u)).ceil() as usize).max(1);
                    let tube: Vec<Point> = (0..=ns)
                        .filter_map(|q| {
                            let t = lo + (hi - lo) * q as f64 / ns as f64;
                            level_curve_x(&psi, z1, 0.0, t).ok().map(|x| orient([x, t], o))
                        })
                        .collect();
                    let mid = tube[tube.len() / 2];
                    let cands: Vec<(usize, &Strip)> =
                        family.of_kind(kind).filter(|(_, s)| s.k == k).collect();
                    let j = cands
                        .iter()
                        .min_by(|a, b| {
                            let da = dot([mid[0] - a.1.center[0], mid[1] - a.1.center[1]], a.1.normal()).abs();
                            let db = dot([mid[0] - b.1.center[0], mid[1] - b.1.center[1]], b.1.normal()).abs();
                            da.total_cmp(&db)
                        })
                        .map(|(_, s)| s.j);
                    let picked: Vec<usize> = cands
                        .iter()
                        .filter(|(_, s)| Some(s.j) == j && tube.iter().any(|&z| s.distance(z) <= u))
                        .map(|(m, _)| *m)
                        .collect();
                    used.insert((key, iv), picked);
                }
                for &m in &used[&(key, iv)] {
                    add(&mut chosen, m);
                }
            }
            PairTag::Separated => unreachable!(),
        }
    }
    // every cap, τ₁ included, must now sit in a chosen member
    for c in f {
        if !chosen.iter().any(|&m| contains(m, c)) {
            let any = family.members_containing(c);
            if let Some(&m) = any.iter().find(|&&m| family.strips[m].kind != StripKind::BigCap).or(any.first()) {
                if f.len() > 1 {
                    fallbacks += 1;
                }
                add(&mut chosen, m);
            }
        }
    }
    chosen.sort_unstable();
    let uncovered: Vec<(u32, u32)> =
        f.iter().filter(|c| !chosen.iter().any(|&m| contains(m, c))).map(|c| (c.j, c.i)).collect();
    let intervals_used = used.values().filter(|v| !v.is_empty()).count();
    let interval_bound = curves.values().map(|c| c.bound).sum();
    let size_bound = (intervals_used.max(1) as f64) * 6.0 * (p.k as f64).powf(p.eps_prime);
    Ok(CoverReport {
        covered: uncovered.is_empty(),
        members: chosen,
        uncovered,
        intervals_used,
        interval_bound,
        size_bound,
        fallbacks,
        case_counts,
    })
}
