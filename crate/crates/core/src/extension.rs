//! The extension operator ℰf(ξ) = ∫_Σ f(x,y) e^{-i(ξ₁x + ξ₂y + ξ₃φ(x,y))} dx dy,
//! its samples on frequency grids, L^p norms, broad points and the A/B/C
//! split of B_R.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::caps::{restrict_to_caps, Amplitude, Cap, Piece};
use crate::geom::{Point, Polygon};
use crate::hypgeo::{strongly_separated, GeoError};
use crate::phase::PhaseFunction;
use crate::quad::{composite, panels, GaussLegendre};
use crate::rects::{CoverSet, Family, StripKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtError {
    #[error("quadrature estimate {estimate:e} above tolerance {tol:e} after refinement")]
    TolNotMet { estimate: f64, tol: f64 },
    #[error("caps are not strongly separated")]
    NotSeparated,
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Fixed-order panel quadrature with one-step refinement.
#[derive(Debug, Clone)]
pub struct QuadOptions {
    pub order: usize,
    pub tol: f64,
    pub max_levels: usize,
}

impl QuadOptions {
    pub fn new(tol: f64) -> Self {
        QuadOptions { order: 8, tol, max_levels: 6 }
    }
}

/// sup |∂φ| along each axis over a polygon, sampled at its vertices, edge
/// midpoints and centroid, with a safety margin.
fn slope_bounds(phi: &PhaseFunction, poly: &Polygon) -> (f64, f64) {
    let n = poly.vertices.len();
    let mut pts: Vec<Point> = poly.vertices.clone();
    let mut c = [0.0, 0.0];
    for i in 0..n {
        let a = poly.vertices[i];
        let b = poly.vertices[(i + 1) % n];
        pts.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
        c[0] += a[0] / n as f64;
        c[1] += a[1] / n as f64;
    }
    pts.push(c);
    let (mut gx, mut gy) = (0.0f64, 0.0f64);
    for p in pts {
        let g = phi.grad(p);
        gx = gx.max(g[0].abs());
        gy = gy.max(g[1].abs());
    }
    (1.1 * gx + 0.01, 1.1 * gy + 0.01)
}

/// Panel width min(1, 2π/(4Ω)) for a local frequency bound Ω.
pub fn panel_width(omega: f64) -> f64 {
    if omega <= 0.0 {
        1.0
    } else {
        (2.0 * PI / (4.0 * omega)).min(1.0)
    }
}

/// Quadrature rows over a convex polygon: y nodes, and x nodes per row.
struct Rows {
    ys: Vec<f64>,
    wy: Vec<f64>,
    /// Shared x nodes when the polygon is an axis-parallel rectangle.
    shared: Option<(Vec<f64>, Vec<f64>)>,
    per_row: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Rows {
    fn build(poly: &Polygon, hx: f64, hy: f64, rule: &GaussLegendre) -> Rows {
        let bb = poly.bbox();
        let (ys, wy) = composite(rule, &panels(bb.y0, bb.y1, hy, &poly.y_breaks()));
        if let Some(r) = poly.as_rect() {
            let x = composite(rule, &panels(r.x0, r.x1, hx, &[]));
            return Rows { ys, wy, shared: Some(x), per_row: Vec::new() };
        }
        let per_row = ys
            .iter()
            .map(|&y| match poly.x_section(y) {
                Some((lo, hi)) if hi > lo => composite(rule, &panels(lo, hi, hx, &[])),
                _ => (Vec::new(), Vec::new()),
            })
            .collect();
        Rows { ys, wy, shared: None, per_row }
    }

    fn row(&self, b: usize) -> (&[f64], &[f64]) {
        match &self.shared {
            Some((x, w)) => (x, w),
            None => (&self.per_row[b].0, &self.per_row[b].1),
        }
    }
}

fn integrate_piece(phi: &PhaseFunction, p: &Piece, xi: [f64; 3], scale: f64, rule: &GaussLegendre) -> Complex64 {
    let (gx, gy) = slope_bounds(phi, &p.region);
    let hx = scale * panel_width(xi[0].abs() + gx * xi[2].abs() + p.band[0]);
    let hy = scale * panel_width(xi[1].abs() + gy * xi[2].abs() + p.band[1]);
    let rows = Rows::build(&p.region, hx, hy, rule);
    let mut acc = Complex64::new(0.0, 0.0);
    for (b, (&y, &wy)) in rows.ys.iter().zip(&rows.wy).enumerate() {
        let (xs, wx) = rows.row(b);
        let mut row = Complex64::new(0.0, 0.0);
        for (&x, &w) in xs.iter().zip(wx) {
            let z = [x, y];
            let arg = -(xi[0] * x + xi[1] * y + xi[2] * phi.value(z));
            row += p.density.eval(z) * Complex64::from_polar(w, arg);
        }
        acc += row * wy;
    }
    acc
}

fn integrate_at(phi: &PhaseFunction, f: &Amplitude, xi: [f64; 3], scale: f64, rule: &GaussLegendre) -> Complex64 {
    f.pieces.iter().map(|p| integrate_piece(phi, p, xi, scale, rule)).sum()
}

/// ℰ_φ f(ξ) and the refinement estimate |I_h − I_{h/2}|.
pub fn extend_with(
    phi: &PhaseFunction,
    f: &Amplitude,
    xi: [f64; 3],
    opts: &QuadOptions,
) -> Result<(Complex64, f64), ExtError> {
    if !xi.iter().all(|v| v.is_finite()) {
        return Err(ExtError::InvalidInput("ξ must be finite".into()));
    }
    let rule = GaussLegendre::new(opts.order);
    let mut scale = 1.0;
    let mut prev = integrate_at(phi, f, xi, scale, &rule);
    let mut est = f64::INFINITY;
    for _ in 0..opts.max_levels.max(1) {
        scale *= 0.5;
        let next = integrate_at(phi, f, xi, scale, &rule);
        est = (next - prev).norm();
        if est <= opts.tol {
            return Ok((next, est));
        }
        prev = next;
    }
    Err(ExtError::TolNotMet { estimate: est, tol: opts.tol })
}

pub fn extend(phi: &PhaseFunction, f: &Amplitude, xi: [f64; 3], quad_tol: f64) -> Result<Complex64, ExtError> {
    extend_with(phi, f, xi, &QuadOptions::new(quad_tol)).map(|(v, _)| v)
}

/// ∫ g(z, f(z)) over the support of f, by the same panel quadrature with
/// unit frequency.
pub fn integrate_density(f: &Amplitude, order: usize, h: f64, g: &dyn Fn(Point, Complex64) -> f64) -> f64 {
    let rule = GaussLegendre::new(order);
    let mut total = 0.0;
    for p in &f.pieces {
        let rows = Rows::build(&p.region, h, h, &rule);
        for (b, (&y, &wy)) in rows.ys.iter().zip(&rows.wy).enumerate() {
            let (xs, wx) = rows.row(b);
            for (&x, &w) in xs.iter().zip(wx) {
                let z = [x, y];
                total += w * wy * g(z, p.density.eval(z));
            }
        }
    }
    total
}

/// ‖f‖_{L¹}.
pub fn l1_norm(f: &Amplitude) -> f64 {
    integrate_density(f, 8, 0.125, &|_, v| v.norm())
}

/// ‖f‖_{L²}.
pub fn l2_norm(f: &Amplitude) -> f64 {
    integrate_density(f, 8, 0.125, &|_, v| v.norm_sqr()).sqrt()
}

/// Uniform axis start + k·step, k < n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub n: usize,
}

impl Axis {
    pub fn at(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn max_abs(&self) -> f64 {
        self.start.abs().max(self.at(self.n.saturating_sub(1)).abs())
    }
}

/// Rectilinear frequency grid; flat index (i3·n2 + i2)·n1 + i1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreqGrid {
    pub axes: [Axis; 3],
}

impl FreqGrid {
    /// Samples of B_R = [−R,R]³ at step h (h must divide 2R up to rounding).
    pub fn cube(r: f64, h: f64) -> Self {
        let n = ((2.0 * r / h).round() as usize) + 1;
        let step = 2.0 * r / (n - 1) as f64;
        let a = Axis { start: -r, step, n };
        FreqGrid { axes: [a, a, a] }
    }

    /// n points per axis on [−R,R].
    pub fn cube_n(r: f64, n: usize) -> Self {
        let n = n.max(2);
        let a = Axis { start: -r, step: 2.0 * r / (n - 1) as f64, n };
        FreqGrid { axes: [a, a, a] }
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plane_len(&self) -> usize {
        self.axes[0].n * self.axes[1].n
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        let n1 = self.axes[0].n;
        let n2 = self.axes[1].n;
        let i1 = idx % n1;
        let i2 = (idx / n1) % n2;
        let i3 = idx / (n1 * n2);
        [self.axes[0].at(i1), self.axes[1].at(i2), self.axes[2].at(i3)]
    }

    /// Trapezoid weight of a grid point.
    pub fn weight(&self, idx: usize) -> f64 {
        let n1 = self.axes[0].n;
        let n2 = self.axes[1].n;
        let ids = [idx % n1, (idx / n1) % n2, idx / (n1 * n2)];
        let mut w = 1.0;
        for (a, &i) in self.axes.iter().zip(&ids) {
            let end = i == 0 || i + 1 == a.n;
            w *= if end { 0.5 * a.step } else { a.step };
        }
        w
    }
}

/// Samples of ℰ_φ f on a frequency grid.
#[derive(Debug, Clone, Serialize)]
pub struct ExtensionField {
    pub grid: FreqGrid,
    pub values: Vec<Complex64>,
    pub quad_tol: f64,
    /// Max discrepancy against pointwise refined quadrature at a few nodes.
    pub error_estimate: f64,
}

impl ExtensionField {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Quadrature layout of one piece for a whole grid.
struct Prepared<'a> {
    piece: &'a Piece,
    rows: Rows,
    /// e^{-iξ₁x} for rectangle pieces, [i1·nx + a].
    ex: Option<Vec<Complex64>>,
}

fn prepare<'a>(phi: &PhaseFunction, f: &'a Amplitude, grid: &FreqGrid, order: usize, scale: f64) -> Vec<Prepared<'a>> {
    let rule = GaussLegendre::new(order);
    let [a1, a2, a3] = grid.axes;
    f.pieces
        .iter()
        .map(|p| {
            let (gx, gy) = slope_bounds(phi, &p.region);
            let hx = scale * panel_width(a1.max_abs() + gx * a3.max_abs() + p.band[0]);
            let hy = scale * panel_width(a2.max_abs() + gy * a3.max_abs() + p.band[1]);
            let rows = Rows::build(&p.region, hx, hy, &rule);
            let ex = rows.shared.as_ref().map(|(xs, _)| {
                let mut t = Vec::with_capacity(a1.n * xs.len());
                for i1 in 0..a1.n {
                    let k = a1.at(i1);
                    t.extend(xs.iter().map(|&x| Complex64::from_polar(1.0, -k * x)));
                }
                t
            });
            Prepared { piece: p, rows, ex }
        })
        .collect()
}

/// Adds the plane ξ₃ = axes[2].at(i3) of ℰ(piece) into `out` (length n1·n2).
fn add_plane(phi: &PhaseFunction, pp: &Prepared, grid: &FreqGrid, i3: usize, out: &mut [Complex64]) {
    let [a1, a2, a3] = grid.axes;
    let (n1, n2) = (a1.n, a2.n);
    let xi3 = a3.at(i3);
    let rows = &pp.rows;
    let mut g: Vec<Complex64> = Vec::new();
    let ey_row = |y: f64| {
        let e0 = Complex64::from_polar(1.0, -a2.start * y);
        let w = Complex64::from_polar(1.0, -a2.step * y);
        (e0, w)
    };
    match (&rows.shared, &pp.ex) {
        (Some((xs, wx)), Some(ex)) => {
            let nx = xs.len();
            let mut h = vec![Complex64::new(0.0, 0.0); n2 * nx];
            for (&y, &wy) in rows.ys.iter().zip(&rows.wy) {
                g.clear();
                g.extend(xs.iter().zip(wx).map(|(&x, &w)| {
                    let z = [x, y];
                    pp.piece.density.eval(z) * Complex64::from_polar(w * wy, -xi3 * phi.value(z))
                }));
                let (mut e, w) = ey_row(y);
                for i2 in 0..n2 {
                    let hrow = &mut h[i2 * nx..(i2 + 1) * nx];
                    for (hv, gv) in hrow.iter_mut().zip(&g) {
                        *hv += e * gv;
                    }
                    e *= w;
                }
            }
            for i2 in 0..n2 {
                let hrow = &h[i2 * nx..(i2 + 1) * nx];
                for i1 in 0..n1 {
                    let erow = &ex[i1 * nx..(i1 + 1) * nx];
                    let s: Complex64 = erow.iter().zip(hrow).map(|(a, b)| a * b).sum();
                    out[i2 * n1 + i1] += s;
                }
            }
        }
        _ => {
            let mut r = vec![Complex64::new(0.0, 0.0); n1];
            for (b, (&y, &wy)) in rows.ys.iter().zip(&rows.wy).enumerate() {
                let (xs, wx) = rows.row(b);
                r.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                for (&x, &w) in xs.iter().zip(wx) {
                    let z = [x, y];
                    let mut c = pp.piece.density.eval(z)
                        * Complex64::from_polar(w * wy, -xi3 * phi.value(z) - a1.start * x);
                    let step = Complex64::from_polar(1.0, -a1.step * x);
                    for v in r.iter_mut() {
                        *v += c;
                        c *= step;
                    }
                }
                let (mut e, w) = ey_row(y);
                for i2 in 0..n2 {
                    for (o, v) in out[i2 * n1..(i2 + 1) * n1].iter_mut().zip(&r) {
                        *o += e * v;
                    }
                    e *= w;
                }
            }
        }
    }
}

fn plane_of(phi: &PhaseFunction, prep: &[Prepared], grid: &FreqGrid, i3: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); grid.plane_len()];
    for pp in prep {
        add_plane(phi, pp, grid, i3, &mut out);
    }
    out
}

/// Indices of a few spread-out grid nodes used for error estimates.
fn probe_indices(grid: &FreqGrid) -> Vec<usize> {
    let n = grid.len();
    let mut v = vec![0, n / 3, n / 2, (2 * n) / 3, n - 1];
    v.dedup();
    v
}

/// ℰ_φ f on every node of `grid`; planes of constant ξ₃ are evaluated in
/// parallel with a separable sum over the quadrature rows.
pub fn extension_field(
    phi: &PhaseFunction,
    f: &Amplitude,
    grid: &FreqGrid,
    quad_tol: f64,
) -> Result<ExtensionField, ExtError> {
    let opts = QuadOptions::new(quad_tol);
    let prep = prepare(phi, f, grid, opts.order, 1.0);
    let planes: Vec<Vec<Complex64>> =
        (0..grid.axes[2].n).into_par_iter().map(|i3| plane_of(phi, &prep, grid, i3)).collect();
    let values: Vec<Complex64> = planes.into_iter().flatten().collect();
    let mut err = 0.0f64;
    for idx in probe_indices(grid) {
        let (v, e) = extend_with(phi, f, grid.point(idx), &opts)?;
        err = err.max((v - values[idx]).norm() + e);
    }
    Ok(ExtensionField { grid: grid.clone(), values, quad_tol, error_estimate: err })
}

/// Trapezoid-weighted grid L^p norm over B_R; p = ∞ gives the max.
pub fn lp_norm(field: &ExtensionField, p: f64) -> f64 {
    lp_of(&field.grid, field.values.iter().map(|v| v.norm()), p)
}

fn lp_of(grid: &FreqGrid, abs: impl Iterator<Item = f64>, p: f64) -> f64 {
    if p.is_infinite() {
        return abs.fold(0.0, f64::max);
    }
    let s: f64 = abs.enumerate().map(|(i, a)| a.powf(p) * grid.weight(i)).sum();
    s.powf(1.0 / p)
}

/// Which kind of member a Δ ∈ 𝓛̄ sits inside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DeltaKind {
    pub in_strip: bool,
    pub in_big_cap: bool,
}

/// |ℰf| on a grid together with the largest |ℰf_Δ| over Δ inside a strip of
/// 𝓛₁∪𝓛₂ and over Δ inside a large cap.
#[derive(Debug, Clone, Serialize)]
pub struct BroadField {
    pub grid: FreqGrid,
    pub abs: Vec<f64>,
    pub max_strip: Vec<f64>,
    pub max_cap: Vec<f64>,
    pub alpha: f64,
    /// Number of Δ evaluated (those meeting supp f).
    pub n_delta: usize,
    pub n_atoms: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Label {
    /// Broad.
    A,
    /// Dominated by some Δ inside a strip.
    B,
    /// Dominated only by Δ inside large caps.
    C,
}

impl BroadField {
    pub fn max_delta(&self, i: usize) -> f64 {
        self.max_strip[i].max(self.max_cap[i])
    }

    pub fn is_broad_at(&self, i: usize, alpha: f64) -> bool {
        self.max_delta(i) <= alpha * self.abs[i]
    }

    /// Br_α ℰf at every node.
    pub fn br(&self, alpha: f64) -> Vec<f64> {
        (0..self.abs.len()).map(|i| if self.is_broad_at(i, alpha) { self.abs[i] } else { 0.0 }).collect()
    }

    pub fn mask(&self, alpha: f64) -> Vec<bool> {
        (0..self.abs.len()).map(|i| self.is_broad_at(i, alpha)).collect()
    }

    pub fn br_norm(&self, alpha: f64, p: f64) -> f64 {
        lp_of(&self.grid, self.br(alpha).into_iter(), p)
    }
}

/// A/B/C labels at level α.
pub fn abc_partition(bf: &BroadField, alpha: f64) -> Vec<Label> {
    (0..bf.abs.len())
        .map(|i| {
            let thr = alpha * bf.abs[i];
            if bf.max_strip[i] > thr {
                Label::B
            } else if bf.max_cap[i] > thr {
                Label::C
            } else {
                Label::A
            }
        })
        .collect()
}

fn is_subset(a: &[(u32, u32)], b: &[(u32, u32)]) -> bool {
    a.iter().all(|x| b.binary_search(x).is_ok())
}

/// Whether each Δ lies inside some strip of 𝓛₁∪𝓛₂ or inside some large cap.
pub fn delta_kinds(family: &Family, closure: &[CoverSet]) -> Vec<DeltaKind> {
    closure
        .iter()
        .map(|d| {
            let mut k = DeltaKind { in_strip: false, in_big_cap: false };
            for (s, caps) in family.strips.iter().zip(&family.cap_sets) {
                let inside = is_subset(&d.caps, caps);
                match s.kind {
                    StripKind::BigCap => k.in_big_cap |= inside,
                    _ => k.in_strip |= inside,
                }
            }
            k
        })
        .collect()
}

/// Evaluates |ℰf| and max_Δ |ℰf_Δ| on `grid`. Caps with the same
/// membership pattern across the Δ meeting supp f are merged into atoms, so
/// each ℰf_Δ is a sum of atom fields.
pub fn broad_field(
    phi: &PhaseFunction,
    f: &Amplitude,
    caps: &[Cap],
    family: &Family,
    closure: &[CoverSet],
    alpha: f64,
    grid: &FreqGrid,
    quad_tol: f64,
) -> Result<BroadField, ExtError> {
    let support: Vec<&Cap> = caps.iter().filter(|c| !f.cap_piece(c).is_zero()).collect();
    let in_supp: std::collections::HashSet<(u32, u32)> = support.iter().map(|c| (c.j, c.i)).collect();
    let kinds = delta_kinds(family, closure);
    let deltas: Vec<usize> =
        (0..closure.len()).filter(|&d| closure[d].caps.iter().any(|c| in_supp.contains(c))).collect();
    // membership signature of every supported cap
    let mut sig: HashMap<(u32, u32), Vec<u32>> = support.iter().map(|c| ((c.j, c.i), Vec::new())).collect();
    for (pos, &d) in deltas.iter().enumerate() {
        for c in &closure[d].caps {
            if let Some(s) = sig.get_mut(c) {
                s.push(pos as u32);
            }
        }
    }
    let mut atom_of: HashMap<Vec<u32>, usize> = HashMap::new();
    let mut atom_caps: Vec<Vec<&Cap>> = Vec::new();
    let mut atom_sig: Vec<Vec<u32>> = Vec::new();
    for c in &support {
        let s = &sig[&(c.j, c.i)];
        let id = *atom_of.entry(s.clone()).or_insert_with(|| {
            atom_caps.push(Vec::new());
            atom_sig.push(s.clone());
            atom_caps.len() - 1
        });
        atom_caps[id].push(c);
    }
    let tiling = caps.first().map(|c| c.side <= 1.0 / c.k as f64 + 1e-15).unwrap_or(true);
    let mut amps: Vec<Amplitude> = atom_caps.iter().map(|cs| restrict_to_caps(f, cs)).collect();
    let n_atoms = amps.len();
    if !tiling {
        amps.push(f.clone());
    }
    let mut delta_atoms: Vec<Vec<usize>> = vec![Vec::new(); deltas.len()];
    for (a, s) in atom_sig.iter().enumerate() {
        for &d in s {
            delta_atoms[d as usize].push(a);
        }
    }
    let order = QuadOptions::new(quad_tol).order;
    let preps: Vec<Vec<Prepared>> = amps.iter().map(|a| prepare(phi, a, grid, order, 1.0)).collect();
    let np = grid.plane_len();
    let planes: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..grid.axes[2].n)
        .into_par_iter()
        .map(|i3| {
            let fields: Vec<Vec<Complex64>> = preps.iter().map(|p| plane_of(phi, p, grid, i3)).collect();
            let total: Vec<Complex64> = if tiling {
                let mut t = vec![Complex64::new(0.0, 0.0); np];
                for fa in &fields[..n_atoms] {
                    t.iter_mut().zip(fa).for_each(|(a, b)| *a += b);
                }
                t
            } else {
                fields[n_atoms].clone()
            };
            let mut ms = vec![0.0f64; np];
            let mut mc = vec![0.0f64; np];
            let mut buf = vec![Complex64::new(0.0, 0.0); np];
            for (pos, &d) in deltas.iter().enumerate() {
                buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                for &a in &delta_atoms[pos] {
                    buf.iter_mut().zip(&fields[a]).for_each(|(x, y)| *x += y);
                }
                let k = kinds[d];
                for i in 0..np {
                    let v = buf[i].norm();
                    if k.in_strip {
                        ms[i] = ms[i].max(v);
                    } else if k.in_big_cap {
                        mc[i] = mc[i].max(v);
                    }
                }
            }
            (total.iter().map(|v| v.norm()).collect(), ms, mc)
        })
        .collect();
    let mut abs = Vec::with_capacity(grid.len());
    let mut max_strip = Vec::with_capacity(grid.len());
    let mut max_cap = Vec::with_capacity(grid.len());
    for (a, s, c) in planes {
        abs.extend(a);
        max_strip.extend(s);
        max_cap.extend(c);
    }
    Ok(BroadField {
        grid: grid.clone(),
        abs,
        max_strip,
        max_cap,
        alpha,
        n_delta: deltas.len(),
        n_atoms,
    })
}

/// |ℰf_{τ1}(ξ)|^{1/2} |ℰf_{τ2}(ξ)|^{1/2} for strongly separated caps.
pub fn bil(
    phi: &PhaseFunction,
    f: &Amplitude,
    t1: &Cap,
    t2: &Cap,
    xi: [f64; 3],
    quad_tol: f64,
) -> Result<f64, ExtError> {
    if !strongly_separated(phi, t1, t2, t1.mu, t1.k)? {
        return Err(ExtError::NotSeparated);
    }
    let e1 = extend(phi, &f.cap_piece(t1), xi, quad_tol)?;
    let e2 = extend(phi, &f.cap_piece(t2), xi, quad_tol)?;
    Ok((e1.norm() * e2.norm()).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthRow {
    pub r: f64,
    pub grid_points: usize,
    pub br_norm: f64,
    pub full_norm: f64,
    pub broad_fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthTable {
    pub p: f64,
    pub alpha: f64,
    pub rows: Vec<GrowthRow>,
    /// Least-squares slope of log‖Br‖ against log R; `None` when some norm vanishes.
    pub slope: Option<f64>,
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || y.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let s = sxy / sxx;
    s.is_finite().then_some(s)
}

/// ‖Br_α ℰf‖_{L^p(B_R)} for each R on a grid of `n` points per axis.
#[allow(clippy::too_many_arguments)]
pub fn growth_sweep(
    phi: &PhaseFunction,
    f: &Amplitude,
    p: f64,
    r_list: &[f64],
    caps: &[Cap],
    family: &Family,
    closure: &[CoverSet],
    alpha: f64,
    n: usize,
    quad_tol: f64,
) -> Result<GrowthTable, ExtError> {
    let mut rows = Vec::new();
    for &r in r_list {
        let grid = FreqGrid::cube_n(r, n);
        let (br_norm, full_norm, frac) = if f.is_zero() {
            (0.0, 0.0, 0.0)
        } else {
            let bf = broad_field(phi, f, caps, family, closure, alpha, &grid, quad_tol)?;
            let broad = bf.mask(alpha).iter().filter(|&&b| b).count();
            (
                bf.br_norm(alpha, p),
                lp_of(&grid, bf.abs.iter().copied(), p),
                broad as f64 / grid.len() as f64,
            )
        };
        rows.push(GrowthRow { r, grid_points: grid.len(), br_norm, full_norm, broad_fraction: frac });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.r).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.br_norm).collect();
    Ok(GrowthTable { p, alpha, slope: loglog_slope(&xs, &ys), rows })
}
