//! Cap grids at scale (K, μ) and amplitudes split into cap pieces.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::geom::{Point, Polygon, Rect};

/// Tolerance for "cap ⊂ set" tests.
pub const CONTAIN_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CapError {
    #[error("K = {0} must be a power of two ≥ 16")]
    InvalidK(u32),
    #[error("μ = {0} must satisfy 1 ≤ μ ≤ K")]
    InvalidMu(f64),
}

/// Square of side μ^{1/2}/K centered on the 1/K grid, clipped to Σ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cap {
    pub i: u32,
    pub j: u32,
    pub k: u32,
    pub mu: f64,
    pub center: Point,
    pub side: f64,
    pub bounds: Rect,
}

impl Cap {
    /// Half-open membership [x0, x1) × [y0, y1), closed on the top/right edge of Σ.
    pub fn contains_half_open(&self, z: Point) -> bool {
        let b = &self.bounds;
        let inx = z[0] >= b.x0 && (z[0] < b.x1 || (b.x1 >= 1.0 && z[0] <= b.x1));
        let iny = z[1] >= b.y0 && (z[1] < b.y1 || (b.y1 >= 1.0 && z[1] <= b.y1));
        inx && iny
    }
}

/// The (2K)² caps whose centers tile Σ at spacing 1/K; row-major in (j, i).
pub fn make_caps(k: u32, mu: f64) -> Result<Vec<Cap>, CapError> {
    if k < 16 || !k.is_power_of_two() {
        return Err(CapError::InvalidK(k));
    }
    if !(mu >= 1.0 && mu <= k as f64) {
        return Err(CapError::InvalidMu(mu));
    }
    let n = 2 * k;
    let kf = k as f64;
    let side = mu.sqrt() / kf;
    let mut caps = Vec::with_capacity((n * n) as usize);
    for j in 0..n {
        for i in 0..n {
            let center = [-1.0 + (i as f64 + 0.5) / kf, -1.0 + (j as f64 + 0.5) / kf];
            let bounds = Rect::centered(center, 0.5 * side).intersect(&Rect::SIGMA);
            caps.push(Cap { i, j, k, mu, center, side, bounds });
        }
    }
    Ok(caps)
}

/// Maximal number of caps containing a point, over a grid of Σ.
pub fn cap_multiplicity(caps: &[Cap], grid_step: f64) -> usize {
    let n = (2.0 / grid_step).round() as usize;
    let mut best = 0;
    for a in 0..=n {
        let x = -1.0 + 2.0 * a as f64 / n as f64;
        for b in 0..=n {
            let y = -1.0 + 2.0 * b as f64 / n as f64;
            let c = caps.iter().filter(|c| c.contains_half_open([x, y])).count();
            best = best.max(c);
        }
    }
    best
}

/// Sets that can decide whether a whole cap lies inside them.
pub trait CapRegion {
    fn contains_cap(&self, cap: &Cap) -> bool;
}

impl CapRegion for Rect {
    fn contains_cap(&self, cap: &Cap) -> bool {
        let b = &cap.bounds;
        b.x0 >= self.x0 - CONTAIN_TOL
            && b.x1 <= self.x1 + CONTAIN_TOL
            && b.y0 >= self.y0 - CONTAIN_TOL
            && b.y1 <= self.y1 + CONTAIN_TOL
    }
}

/// A region given by an explicit list of member caps, indexed into a grid.
#[derive(Debug, Clone)]
pub struct CapSet {
    pub members: Vec<(u32, u32)>,
}

impl CapRegion for CapSet {
    fn contains_cap(&self, cap: &Cap) -> bool {
        self.members.binary_search(&(cap.j, cap.i)).is_ok()
    }
}

impl CapSet {
    pub fn from_caps(caps: &[&Cap]) -> Self {
        let mut members: Vec<(u32, u32)> = caps.iter().map(|c| (c.j, c.i)).collect();
        members.sort_unstable();
        members.dedup();
        CapSet { members }
    }
}

/// Density on a piece: constant or a function of the point.
#[derive(Clone)]
pub enum Density {
    Const(Complex64),
    Func(Arc<dyn Fn(Point) -> Complex64 + Send + Sync>),
}

impl Density {
    #[inline]
    pub fn eval(&self, z: Point) -> Complex64 {
        match self {
            Density::Const(c) => *c,
            Density::Func(f) => f(z),
        }
    }
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Density::Const(c) => write!(f, "Const({c})"),
            Density::Func(_) => write!(f, "Func(..)"),
        }
    }
}

/// A density supported on a convex polygon.
#[derive(Debug, Clone)]
pub struct Piece {
    pub region: Polygon,
    pub density: Density,
    /// Bounds on |∂ₓ arg| and |∂ᵧ arg| of the density, added to the local
    /// frequency when choosing quadrature panels.
    pub band: [f64; 2],
}

/// f = Σ pieces; pieces are smooth inside their polygons.
#[derive(Debug, Clone, Default)]
pub struct Amplitude {
    pub pieces: Vec<Piece>,
}

impl Amplitude {
    pub fn zero() -> Self {
        Amplitude { pieces: Vec::new() }
    }

    /// Constant c on Σ.
    pub fn constant(c: f64) -> Self {
        Self::on_rect(Rect::SIGMA, Density::Const(Complex64::new(c, 0.0)))
    }

    /// f(z) on Σ.
    pub fn from_fn(f: impl Fn(Point) -> Complex64 + Send + Sync + 'static) -> Self {
        Self::on_rect(Rect::SIGMA, Density::Func(Arc::new(f)))
    }

    pub fn on_rect(r: Rect, density: Density) -> Self {
        Self::on_polygon(Polygon::from_rect(&r), density)
    }

    pub fn on_polygon(p: Polygon, density: Density) -> Self {
        if p.is_empty() {
            return Self::zero();
        }
        Amplitude { pieces: vec![Piece { region: p, density, band: [0.0; 2] }] }
    }

    /// Declares an oscillation bound for every piece.
    pub fn with_band(mut self, band: [f64; 2]) -> Self {
        for p in &mut self.pieces {
            p.band = [p.band[0].max(band[0]), p.band[1].max(band[1])];
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn eval(&self, z: Point) -> Complex64 {
        self.pieces
            .iter()
            .filter(|p| p.region.contains(z))
            .map(|p| p.density.eval(z))
            .sum()
    }

    pub fn add(mut self, other: Amplitude) -> Self {
        self.pieces.extend(other.pieces);
        self
    }

    /// f·χ_r.
    pub fn restrict_rect(&self, r: &Rect) -> Amplitude {
        let pieces = self
            .pieces
            .iter()
            .filter_map(|p| {
                let q = p.region.clip_rect(r);
                (!q.is_empty()).then(|| Piece { region: q, density: p.density.clone(), band: p.band })
            })
            .collect();
        Amplitude { pieces }
    }

    /// f·χ_P for a convex polygon P.
    pub fn restrict_polygon(&self, poly: &Polygon) -> Amplitude {
        let pieces = self
            .pieces
            .iter()
            .filter_map(|p| {
                let q = p.region.clip_convex(poly);
                (!q.is_empty()).then(|| Piece { region: q, density: p.density.clone(), band: p.band })
            })
            .collect();
        Amplitude { pieces }
    }

    /// f·e^{-i(a x + b y)}.
    pub fn modulated(&self, a: f64, b: f64) -> Amplitude {
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let d = p.density.clone();
                let f = move |z: Point| d.eval(z) * Complex64::from_polar(1.0, -(a * z[0] + b * z[1]));
                Piece {
                    region: p.region.clone(),
                    density: Density::Func(Arc::new(f)),
                    band: [p.band[0] + a.abs(), p.band[1] + b.abs()],
                }
            })
            .collect();
        Amplitude { pieces }
    }

    /// c·f.
    pub fn scaled(&self, c: Complex64) -> Amplitude {
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let density = match &p.density {
                    Density::Const(v) => Density::Const(v * c),
                    Density::Func(g) => {
                        let g = g.clone();
                        Density::Func(Arc::new(move |z| g(z) * c))
                    }
                };
                Piece { region: p.region.clone(), density, band: p.band }
            })
            .collect();
        Amplitude { pieces }
    }

    /// f_τ = f·χ_τ.
    pub fn cap_piece(&self, cap: &Cap) -> Amplitude {
        self.restrict_rect(&cap.bounds)
    }
}

/// f_Δ = Σ_{τ ⊂ Δ} f_τ over the given caps.
pub fn restrict<R: CapRegion + ?Sized>(f: &Amplitude, caps: &[Cap], region: &R) -> Amplitude {
    let inside: Vec<&Cap> = caps.iter().filter(|c| region.contains_cap(c)).collect();
    restrict_to_caps(f, &inside)
}

/// Σ_τ f_τ over an explicit list of caps; disjoint tilings are merged into
/// maximal rectangles first.
pub fn restrict_to_caps(f: &Amplitude, caps: &[&Cap]) -> Amplitude {
    if caps.is_empty() || f.is_zero() {
        return Amplitude::zero();
    }
    let tiling = caps.iter().all(|c| c.side <= 1.0 / c.k as f64 + 1e-15);
    let rects = if tiling { merge_tiling(caps) } else { caps.iter().map(|c| c.bounds).collect() };
    let mut out = Amplitude::zero();
    for r in rects {
        out = out.add(f.restrict_rect(&r));
    }
    out
}

/// Merge caps of a disjoint tiling into row runs, then stack equal runs.
pub fn merge_tiling(caps: &[&Cap]) -> Vec<Rect> {
    let mut rows: BTreeMap<u32, Vec<&Cap>> = BTreeMap::new();
    for c in caps {
        rows.entry(c.j).or_default().push(c);
    }
    // runs keyed by (i_start, i_end) -> open rectangle (y0, y1, last row)
    let mut open: BTreeMap<(u32, u32), (Rect, u32)> = BTreeMap::new();
    let mut done = Vec::new();
    for (j, mut row) in rows {
        row.sort_by_key(|c| c.i);
        row.dedup_by_key(|c| c.i);
        let mut runs: Vec<(u32, u32, Rect)> = Vec::new();
        for c in row {
            match runs.last_mut() {
                Some((_, e, r)) if *e + 1 == c.i => {
                    *e = c.i;
                    r.x1 = c.bounds.x1;
                }
                _ => runs.push((c.i, c.i, c.bounds)),
            }
        }
        let mut next: BTreeMap<(u32, u32), (Rect, u32)> = BTreeMap::new();
        for (s, e, r) in runs {
            match open.remove(&(s, e)) {
                Some((mut acc, last)) if last + 1 == j => {
                    acc.y1 = r.y1;
                    next.insert((s, e), (acc, j));
                }
                Some((acc, _)) => {
                    done.push(acc);
                    next.insert((s, e), (r, j));
                }
                None => {
                    next.insert((s, e), (r, j));
                }
            }
        }
        done.extend(open.into_values().map(|(r, _)| r));
        open = next;
    }
    done.extend(open.into_values().map(|(r, _)| r));
    done
}
