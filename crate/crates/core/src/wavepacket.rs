//! Wave-packet decomposition at scale R.
//!
//! Σ is tiled by caps θ of side about R^{-1/2}. A smooth tensor partition
//! ψ_θ splits f into f_θ = ψ_θ f, each f_θ is expanded in a Fourier series
//! on a box of side 2πR^{-1/2} (so the modes v run over R^{1/2}ℤ²), and every
//! mode is cut off by a fixed bump ψ̃_θ that equals 1 on supp ψ_θ and vanishes
//! outside 3θ:
//!
//! f_T = ψ̃_θ(z) c_v e^{iv·(z−ω_θ)}.
//!
//! With ℰf(ξ) = ∫ f e^{−i(ξ₁x+ξ₂y+ξ₃φ)}, the packet ℰf_T concentrates on the
//! tube through (v, 0) with axis direction (−∇φ(ω_θ), 1).

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::caps::{Amplitude, Density, Piece};
use crate::extension::{extend, extension_field, integrate_density, ExtError, FreqGrid};
use crate::geom::{Point, Polygon, Rect};
use crate::phase::PhaseFunction;
use crate::quad::{composite, panels, GaussLegendre};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PacketError {
    #[error("R = {0} is below the minimum 64")]
    RTooSmall(f64),
    #[error("δ = {0} must lie in (0, 0.25]")]
    BadDelta(f64),
    #[error(transparent)]
    Ext(#[from] ExtError),
}

/// Tubes are kept when they meet B_R enlarged by this many radii R^{1/2+δ}.
pub const TUBE_MARGIN: f64 = 5.0;

/// Transition width of ψ_θ, in units of the cap side.
pub const PARTITION_WIDTH: f64 = 0.3;

/// h(t)/(h(t)+h(1−t)) with h(t) = e^{−1/t}: 0 for t ≤ 0, 1 for t ≥ 1.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

/// A cap θ of the R^{-1/2} tiling.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Theta {
    pub i: usize,
    pub j: usize,
    pub center: Point,
    pub side: f64,
    pub bounds: Rect,
}

impl Theta {
    /// The concentric square 3θ.
    pub fn triple(&self) -> Rect {
        Rect::centered(self.center, 1.5 * self.side)
    }
}

/// 1-D factor of ψ_θ for cell index i of m cells of side s starting at -1.
fn partition_1d(x: f64, i: usize, m: usize, s: f64) -> f64 {
    let w = PARTITION_WIDTH;
    let step = |e: f64| smooth_step((x - e) / (w * s) + 0.5);
    let left = if i == 0 { 1.0 } else { step(-1.0 + i as f64 * s) };
    let right = if i + 1 == m { 0.0 } else { step(-1.0 + (i + 1) as f64 * s) };
    left - right
}

/// 1-D factor of ψ̃_θ: 1 within (1+w)s/2 of c, 0 beyond 3s/2.
fn cutoff_1d(x: f64, c: f64, s: f64) -> f64 {
    let tau = 0.5 * (2.0 - PARTITION_WIDTH) * s;
    smooth_step((1.5 * s - (x - c).abs()) / tau)
}

#[derive(Debug, Clone, Serialize)]
pub struct Packet {
    /// Index into `WavePackets::thetas`.
    pub theta: usize,
    /// Lattice point v ∈ R^{1/2}ℤ²; the tube axis passes through (v, 0).
    pub v: Point,
    pub coef: Complex64,
    /// Unit vector along (−∇φ(ω_θ), 1).
    pub axis: [f64; 3],
    pub radius: f64,
    pub length: f64,
}

impl Packet {
    /// Horizontal offset of ξ from the axis at height ξ₃.
    pub fn axis_offset(&self, xi: [f64; 3]) -> f64 {
        let gx = -self.axis[0] / self.axis[2];
        let gy = -self.axis[1] / self.axis[2];
        let dx = xi[0] - (self.v[0] - xi[2] * gx);
        let dy = xi[1] - (self.v[1] - xi[2] * gy);
        dx.hypot(dy)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WavePackets {
    pub r: f64,
    pub delta: f64,
    pub thetas: Vec<Theta>,
    /// ∇φ(ω_θ) per θ.
    pub grads: Vec<Point>,
    pub packets: Vec<Packet>,
}

impl WavePackets {
    /// R^{1/2}, the tube lattice spacing.
    pub fn spacing(&self) -> f64 {
        self.r.sqrt()
    }

    pub fn radius(&self) -> f64 {
        self.r.powf(0.5 + self.delta)
    }

    /// f_T as an amplitude on 3θ.
    pub fn amplitude(&self, p: &Packet) -> Amplitude {
        let th = self.thetas[p.theta];
        let (c, s, v, coef) = (th.center, th.side, p.v, p.coef);
        let density = Density::Func(Arc::new(move |z: Point| {
            let a = cutoff_1d(z[0], c[0], s) * cutoff_1d(z[1], c[1], s);
            coef * Complex64::from_polar(a, v[0] * (z[0] - c[0]) + v[1] * (z[1] - c[1]))
        }));
        Amplitude { pieces: vec![Piece { region: Polygon::from_rect(&th.triple()), density, band: [v[0].abs(), v[1].abs()] }] }
    }

    /// Σ_T f_T.
    pub fn sum_amplitude(&self) -> Amplitude {
        let mut out = Amplitude::zero();
        for p in &self.packets {
            out = out.add(self.amplitude(p));
        }
        out
    }

    pub fn of_theta(&self, t: usize) -> impl Iterator<Item = &Packet> {
        self.packets.iter().filter(move |p| p.theta == t)
    }
}

/// Lattice range and the membership test for tubes meeting the R^{1/2+δ}
/// neighbourhood of B_R.
fn tube_meets(v: Point, g: Point, r: f64, rho: f64) -> bool {
    let (mut lo, mut hi) = (-r, r);
    for d in 0..2 {
        let lim = r + rho;
        if g[d] == 0.0 {
            if v[d].abs() > lim {
                return false;
            }
        } else {
            // |v − t g| ≤ lim
            let a = (v[d] - lim) / g[d];
            let b = (v[d] + lim) / g[d];
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
    }
    lo <= hi
}

fn lattice_bound(g: Point, r: f64, rho: f64) -> [i64; 2] {
    let sp = r.sqrt();
    [0, 1].map(|d| ((r + rho + r * g[d].abs()) / sp).ceil() as i64)
}

/// Fourier coefficients of f_θ on the box of side 2πR^{-1/2}, for modes
/// n ∈ [−n₁, n₁] × [−n₂, n₂] (v = R^{1/2}n).
fn theta_coefficients(f: &Amplitude, th: &Theta, m: usize, r: f64, nb: [i64; 2]) -> Vec<Complex64> {
    let sp = r.sqrt();
    let s = th.side;
    let reach = 0.5 * (1.0 + PARTITION_WIDTH) * s;
    let support = Rect::centered(th.center, reach).intersect(&Rect::SIGMA);
    let (w1, w2) = (2 * nb[0] + 1, 2 * nb[1] + 1);
    let mut c = vec![Complex64::new(0.0, 0.0); (w1 * w2) as usize];
    if support.is_empty() {
        return c;
    }
    let vmax = sp * nb[0].max(nb[1]) as f64 + f.pieces.iter().map(|p| p.band[0].max(p.band[1])).fold(0.0, f64::max);
    let h = (0.25 * PARTITION_WIDTH * s).min(2.0 * PI / (4.0 * vmax.max(1.0)));
    let rule = GaussLegendre::new(8);
    let half = 0.5 * PARTITION_WIDTH * s;
    let edges = |c: f64| [c - 0.5 * s - half, c - 0.5 * s + half, c + 0.5 * s - half, c + 0.5 * s + half];
    let (bx, by) = (edges(th.center[0]), edges(th.center[1]));
    let mut row = vec![Complex64::new(0.0, 0.0); w1 as usize];
    for piece in &f.pieces {
        let poly = piece.region.clip_rect(&support);
        if poly.is_empty() {
            continue;
        }
        let bb = poly.bbox();
        let mut ybreaks = poly.y_breaks();
        ybreaks.extend(by);
        let (ys, wy) = composite(&rule, &panels(bb.y0, bb.y1, h, &ybreaks));
        for (&y, &wyv) in ys.iter().zip(&wy) {
            let Some((lo, hi)) = poly.x_section(y) else { continue };
            if hi <= lo {
                continue;
            }
            let (xs, wx) = composite(&rule, &panels(lo, hi, h, &bx));
            row.iter_mut().for_each(|e| *e = Complex64::new(0.0, 0.0));
            let py = partition_1d(y, th.j, m, s);
            for (&x, &wxv) in xs.iter().zip(&wx) {
                let z = [x, y];
                let val = piece.density.eval(z) * (wxv * partition_1d(x, th.i, m, s) * py);
                if val == Complex64::new(0.0, 0.0) {
                    continue;
                }
                // e^{−i n sp (x−ω₁)} for n = −n₁..n₁ by recurrence
                let base = Complex64::from_polar(1.0, -sp * (x - th.center[0]));
                let mut e = base.powi(-(nb[0] as i32));
                for slot in row.iter_mut() {
                    *slot += val * e;
                    e *= base;
                }
            }
            let base = Complex64::from_polar(1.0, -sp * (y - th.center[1]));
            let mut e = base.powi(-(nb[1] as i32)) * wyv;
            for b in 0..w2 as usize {
                let out = &mut c[b * w1 as usize..(b + 1) * w1 as usize];
                for (o, rv) in out.iter_mut().zip(&row) {
                    *o += rv * e;
                }
                e *= base;
            }
        }
    }
    let l = 2.0 * PI / sp;
    let norm = 1.0 / (l * l);
    c.iter_mut().for_each(|e| *e *= norm);
    c
}

/// Wave packets of f at scale R. Packets with an exactly zero coefficient
/// are dropped, so f = 0 yields none. Since neighbouring ψ_θ overlap on
/// strips of width 0.3R^{-1/2} around cell edges, f yields packets of a
/// single θ when it is supported where ψ_θ = 1.
pub fn decompose(phi: &PhaseFunction, f: &Amplitude, r: f64, delta: f64) -> Result<WavePackets, PacketError> {
    if !(r >= 64.0) || !r.is_finite() {
        return Err(PacketError::RTooSmall(r));
    }
    if !(delta > 0.0 && delta <= 0.25) {
        return Err(PacketError::BadDelta(delta));
    }
    let sp = r.sqrt();
    let m = (2.0 * sp).ceil() as usize;
    let s = 2.0 / m as f64;
    let rho = TUBE_MARGIN * r.powf(0.5 + delta);
    let mut thetas = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            let center = [-1.0 + (i as f64 + 0.5) * s, -1.0 + (j as f64 + 0.5) * s];
            thetas.push(Theta { i, j, center, side: s, bounds: Rect::centered(center, 0.5 * s) });
        }
    }
    let grads: Vec<Point> = thetas.iter().map(|t| phi.grad(t.center)).collect();
    let per_theta: Vec<Vec<Packet>> = thetas
        .par_iter()
        .enumerate()
        .map(|(t, th)| {
            let g = grads[t];
            let nb = lattice_bound(g, r, rho);
            let c = theta_coefficients(f, th, m, r, nb);
            let nrm = (g[0] * g[0] + g[1] * g[1] + 1.0).sqrt();
            let axis = [-g[0] / nrm, -g[1] / nrm, 1.0 / nrm];
            let w1 = (2 * nb[0] + 1) as usize;
            let mut out = Vec::new();
            for (idx, &coef) in c.iter().enumerate() {
                if coef == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let v = [sp * ((idx % w1) as i64 - nb[0]) as f64, sp * ((idx / w1) as i64 - nb[1]) as f64];
                if tube_meets(v, g, r, rho) {
                    out.push(Packet { theta: t, v, coef, axis, radius: rho / TUBE_MARGIN, length: r });
                }
            }
            out
        })
        .collect();
    Ok(WavePackets { r, delta, thetas, grads, packets: per_theta.into_iter().flatten().collect() })
}

/// Tensor quadrature on 3θ resolving frequencies up to (Ωx, Ωy).
fn triple_nodes(th: &Theta, omega: [f64; 2]) -> [(Vec<f64>, Vec<f64>); 2] {
    let rule = GaussLegendre::new(16);
    let t = th.triple();
    let plateau = 0.5 * (1.0 + PARTITION_WIDTH) * th.side;
    let axis = |lo: f64, hi: f64, c: f64, om: f64| {
        composite(&rule, &panels(lo, hi, (2.0 * PI / om.max(1.0)).min(0.25 * th.side), &[c - plateau, c + plateau]))
    };
    [axis(t.x0, t.x1, th.center[0], omega[0]), axis(t.y0, t.y1, th.center[1], omega[1])]
}

/// Σ_{T∈𝕋(θ)} ℰf_T over a frequency grid, by one tensor quadrature per θ.
pub fn packet_sum_field(phi: &PhaseFunction, wp: &WavePackets, grid: &FreqGrid) -> Vec<Complex64> {
    let sp = wp.spacing();
    let per_theta: Vec<Vec<Complex64>> = (0..wp.thetas.len())
        .into_par_iter()
        .map(|t| {
            let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
            let pk: Vec<&Packet> = wp.of_theta(t).collect();
            if pk.is_empty() {
                return acc;
            }
            let th = wp.thetas[t];
            let ns: Vec<[i64; 2]> =
                pk.iter().map(|p| [(p.v[0] / sp).round() as i64, (p.v[1] / sp).round() as i64]).collect();
            let lo = [0, 1].map(|d| ns.iter().map(|n| n[d]).min().unwrap());
            let hi = [0, 1].map(|d| ns.iter().map(|n| n[d]).max().unwrap());
            let w1 = (hi[0] - lo[0] + 1) as usize;
            let w2 = (hi[1] - lo[1] + 1) as usize;
            let mut c = vec![Complex64::new(0.0, 0.0); w1 * w2];
            for (p, n) in pk.iter().zip(&ns) {
                c[(n[1] - lo[1]) as usize * w1 + (n[0] - lo[0]) as usize] += p.coef;
            }
            let tr = th.triple();
            let mut gmax = [0.0f64; 2];
            for z in tr.corners().into_iter().chain([th.center]) {
                let g = phi.grad(z);
                gmax = [gmax[0].max(g[0].abs()), gmax[1].max(g[1].abs())];
            }
            let ax = &grid.axes;
            let vmax = [0, 1].map(|d| sp * lo[d].abs().max(hi[d].abs()) as f64);
            let x3 = ax[2].max_abs();
            let omega = [0, 1].map(|d| ax[d].max_abs() + vmax[d] + x3 * (1.1 * gmax[d] + 0.01));
            let [(xs, wx), (ys, wy)] = triple_nodes(&th, omega);
            let (nx, ny) = (xs.len(), ys.len());
            // U[b2][a] = Σ_{n1} c e^{i n1 sp (x_a − ω₁)}
            let mut u = vec![Complex64::new(0.0, 0.0); w2 * nx];
            for (a, &x) in xs.iter().enumerate() {
                let base = Complex64::from_polar(1.0, sp * (x - th.center[0]));
                let start = base.powi(lo[0] as i32);
                for b2 in 0..w2 {
                    let mut e = start;
                    let mut sum = Complex64::new(0.0, 0.0);
                    for coef in &c[b2 * w1..(b2 + 1) * w1] {
                        sum += coef * e;
                        e *= base;
                    }
                    u[b2 * nx + a] = sum;
                }
            }
            let cx: Vec<f64> = xs.iter().zip(&wx).map(|(&x, &w)| w * cutoff_1d(x, th.center[0], th.side)).collect();
            let mut vals = vec![Complex64::new(0.0, 0.0); nx * ny];
            let mut phis = vec![0.0; nx * ny];
            for (b, &y) in ys.iter().enumerate() {
                let cy = wy[b] * cutoff_1d(y, th.center[1], th.side);
                let base = Complex64::from_polar(1.0, sp * (y - th.center[1]));
                let start = base.powi(lo[1] as i32);
                for a in 0..nx {
                    phis[b * nx + a] = phi.value([xs[a], y]);
                    if cx[a] == 0.0 || cy == 0.0 {
                        continue;
                    }
                    let mut e = start;
                    let mut sum = Complex64::new(0.0, 0.0);
                    for b2 in 0..w2 {
                        sum += u[b2 * nx + a] * e;
                        e *= base;
                    }
                    vals[b * nx + a] = sum * (cx[a] * cy);
                }
            }
            let ex: Vec<Vec<Complex64>> = (0..ax[0].n)
                .map(|i| xs.iter().map(|&x| Complex64::from_polar(1.0, -ax[0].at(i) * x)).collect())
                .collect();
            let ey: Vec<Vec<Complex64>> = (0..ax[1].n)
                .map(|i| ys.iter().map(|&y| Complex64::from_polar(1.0, -ax[1].at(i) * y)).collect())
                .collect();
            let mut q = vec![Complex64::new(0.0, 0.0); nx];
            for i3 in 0..ax[2].n {
                let x3v = ax[2].at(i3);
                let p: Vec<Complex64> = vals
                    .iter()
                    .zip(&phis)
                    .map(|(v, &ph)| if *v == Complex64::new(0.0, 0.0) { *v } else { v * Complex64::from_polar(1.0, -x3v * ph) })
                    .collect();
                for i2 in 0..ax[1].n {
                    q.iter_mut().for_each(|e| *e = Complex64::new(0.0, 0.0));
                    for b in 0..ny {
                        let e = ey[i2][b];
                        for a in 0..nx {
                            q[a] += p[b * nx + a] * e;
                        }
                    }
                    for i1 in 0..ax[0].n {
                        let s: Complex64 = q.iter().zip(&ex[i1]).map(|(a, b)| a * b).sum();
                        acc[(i3 * ax[1].n + i2) * ax[0].n + i1] = s;
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Complex64::new(0.0, 0.0); grid.len()];
    for part in per_theta {
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    total
}

#[derive(Debug, Clone, Serialize)]
pub struct Reconstruction {
    pub grid_n: usize,
    pub rel_l2_error: f64,
    pub max_abs_error: f64,
    pub f_l2: f64,
    /// max |ℰf − Σℰf_T| / ‖f‖₂.
    pub max_over_f_l2: f64,
    pub n_packets: usize,
}

/// ℰf against Σ_T ℰf_T on the n³ grid of B_R.
pub fn reconstruction(
    phi: &PhaseFunction,
    f: &Amplitude,
    wp: &WavePackets,
    grid_n: usize,
    quad_tol: f64,
) -> Result<Reconstruction, PacketError> {
    let grid = FreqGrid::cube_n(wp.r, grid_n);
    let reference = extension_field(phi, f, &grid, quad_tol)?;
    let sum = packet_sum_field(phi, wp, &grid);
    let (mut num, mut den, mut max_abs) = (0.0, 0.0, 0.0f64);
    for (a, b) in reference.values.iter().zip(&sum) {
        let d = (a - b).norm();
        num += d * d;
        den += a.norm_sqr();
        max_abs = max_abs.max(d);
    }
    let f_l2 = integrate_density(f, 8, 0.125, &|_, v| v.norm_sqr()).sqrt();
    Ok(Reconstruction {
        grid_n,
        rel_l2_error: if den == 0.0 { num.sqrt() } else { (num / den).sqrt() },
        max_abs_error: max_abs,
        f_l2,
        max_over_f_l2: if f_l2 == 0.0 { max_abs } else { max_abs / f_l2 },
        n_packets: wp.packets.len(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PacketReport {
    /// Packets whose support leaves 3θ.
    pub support_violations: usize,
    /// max over sampled packets of median|ℰf_T| off 2T / median on T.
    pub decay_ratio: f64,
    pub decay_threshold: f64,
    /// max over sampled θ and disjoint tube pairs of |∫f_{T1} f̄_{T2}| / ∫_{3θ}|f|².
    pub orthogonality_ratio: f64,
    pub orthogonality_threshold: f64,
    /// max over θ of Σ_{T∈𝕋(θ)} ∫|f_T|² / ∫_{3θ}|f|².
    pub energy_constant: f64,
    /// Grid points of B_R farther than R^{1/2} from every axis of some θ.
    pub cover_violations: usize,
    pub sampled_packets: usize,
    pub sampled_thetas: usize,
}

impl PacketReport {
    pub fn pass(&self, energy_bound: f64) -> bool {
        self.support_violations == 0
            && self.decay_ratio <= self.decay_threshold
            && self.orthogonality_ratio <= self.orthogonality_threshold
            && self.energy_constant <= energy_bound
            && self.cover_violations == 0
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// ∫ ψ̃₁(x)² e^{iλ(x−c)} dx for the 1-D cutoff.
fn cutoff_sq_transform(c: f64, s: f64, lambda: f64) -> Complex64 {
    let rule = GaussLegendre::new(16);
    let h = (2.0 * PI / lambda.abs().max(1.0)).min(0.25 * s);
    let (xs, ws) = composite(&rule, &panels(c - 1.5 * s, c + 1.5 * s, h, &[]));
    xs.iter()
        .zip(&ws)
        .map(|(&x, &w)| Complex64::from_polar(w * cutoff_1d(x, c, s).powi(2), lambda * (x - c)))
        .sum()
}

/// Relaxed checks of support, decay, orthogonality, energy and tube cover.
/// `sample_count` packets are used for decay and `sample_count` caps θ
/// (those carrying the most energy) for orthogonality.
pub fn packet_checks(
    wp: &WavePackets,
    phi: &PhaseFunction,
    f: &Amplitude,
    sample_count: usize,
    seed: u64,
) -> Result<PacketReport, PacketError> {
    let r = wp.r;
    let rho = wp.radius();
    let sp = wp.spacing();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let support_violations = wp
        .packets
        .iter()
        .filter(|p| {
            let t3 = wp.thetas[p.theta].triple();
            !wp.amplitude(p).pieces.iter().all(|pc| pc.region.vertices.iter().all(|&z| t3.contains(z)))
        })
        .count();

    // Energy per θ.
    let theta_mass: Vec<f64> = wp
        .thetas
        .par_iter()
        .map(|th| integrate_density(&f.restrict_rect(&th.triple()), 8, th.side / 4.0, &|_, v| v.norm_sqr()))
        .collect();
    let mut coef_sq = vec![0.0; wp.thetas.len()];
    for p in &wp.packets {
        coef_sq[p.theta] += p.coef.norm_sqr();
    }
    let mut energy_constant = 0.0f64;
    for (t, th) in wp.thetas.iter().enumerate() {
        if theta_mass[t] > 0.0 {
            let m = cutoff_sq_transform(th.center[0], th.side, 0.0).re * cutoff_sq_transform(th.center[1], th.side, 0.0).re;
            energy_constant = energy_constant.max(coef_sq[t] * m / theta_mass[t]);
        }
    }

    // Decay off the tube, on packets spread over the list.
    let unit = |p: &Packet| Packet { coef: Complex64::new(1.0, 0.0), ..p.clone() };
    let n_pk = wp.packets.len();
    let picks: Vec<usize> = if n_pk == 0 {
        Vec::new()
    } else {
        let k = sample_count.min(n_pk);
        (0..k).map(|i| (i * n_pk) / k + (n_pk / k) / 2).map(|i| i.min(n_pk - 1)).collect()
    };
    let mut decay_ratio = 0.0f64;
    let per_side = 12;
    for &ix in &picks {
        let p = unit(&wp.packets[ix]);
        let g = wp.grads[p.theta];
        let amp = wp.amplitude(&p);
        let mut on_pts = Vec::new();
        let mut tries = 0;
        while on_pts.len() < per_side && tries < 10_000 {
            tries += 1;
            let x3 = rng.gen_range(-r..=r);
            let ang = rng.gen_range(0.0..2.0 * PI);
            let rad = rho * rng.gen::<f64>().sqrt();
            let xi = [p.v[0] - x3 * g[0] + rad * ang.cos(), p.v[1] - x3 * g[1] + rad * ang.sin(), x3];
            if xi[0].abs() <= r && xi[1].abs() <= r {
                on_pts.push(xi);
            }
        }
        let mut off_pts = Vec::new();
        tries = 0;
        while off_pts.len() < per_side && tries < 10_000 {
            tries += 1;
            let xi = [rng.gen_range(-r..=r), rng.gen_range(-r..=r), rng.gen_range(-r..=r)];
            if p.axis_offset(xi) > 2.0 * rho {
                off_pts.push(xi);
            }
        }
        if on_pts.is_empty() || off_pts.is_empty() {
            continue;
        }
        let eval = |pts: &[[f64; 3]]| -> Result<Vec<f64>, ExtError> {
            pts.par_iter().map(|&xi| extend(phi, &amp, xi, 1e-10).map(|v| v.norm())).collect()
        };
        let on = median(eval(&on_pts)?);
        let off = median(eval(&off_pts)?);
        if on > 0.0 {
            decay_ratio = decay_ratio.max(off / on);
        }
    }

    // Orthogonality on the heaviest caps.
    let mut order: Vec<usize> = (0..wp.thetas.len()).filter(|&t| coef_sq[t] > 0.0).collect();
    order.sort_by(|&a, &b| coef_sq[b].total_cmp(&coef_sq[a]).then(a.cmp(&b)));
    order.truncate(sample_count);
    let mut orthogonality_ratio = 0.0f64;
    for &t in &order {
        let th = wp.thetas[t];
        let pk: Vec<&Packet> = wp.of_theta(t).collect();
        let ns: Vec<[i64; 2]> =
            pk.iter().map(|p| [(p.v[0] / sp).round() as i64, (p.v[1] / sp).round() as i64]).collect();
        let span = [0, 1].map(|d| {
            let lo = ns.iter().map(|n| n[d]).min().unwrap_or(0);
            let hi = ns.iter().map(|n| n[d]).max().unwrap_or(0);
            hi - lo
        });
        let mx: Vec<Complex64> =
            (-span[0]..=span[0]).map(|d| cutoff_sq_transform(th.center[0], th.side, sp * d as f64)).collect();
        let my: Vec<Complex64> =
            (-span[1]..=span[1]).map(|d| cutoff_sq_transform(th.center[1], th.side, sp * d as f64)).collect();
        let mut worst = 0.0f64;
        for a in 0..pk.len() {
            for b in a + 1..pk.len() {
                let dv = [pk[a].v[0] - pk[b].v[0], pk[a].v[1] - pk[b].v[1]];
                if dv[0].hypot(dv[1]) <= 2.0 * rho {
                    continue;
                }
                let d = [ns[a][0] - ns[b][0], ns[a][1] - ns[b][1]];
                let m = mx[(d[0] + span[0]) as usize] * my[(d[1] + span[1]) as usize];
                worst = worst.max(pk[a].coef.norm() * pk[b].coef.norm() * m.norm());
            }
        }
        if theta_mass[t] > 0.0 {
            orthogonality_ratio = orthogonality_ratio.max(worst / theta_mass[t]);
        }
    }

    // Every grid point of B_R lies within R^{1/2} of an axis of each θ.
    let mut cover_violations = 0;
    let grid = FreqGrid::cube_n(r, 9);
    for (t, g) in wp.grads.iter().enumerate() {
        let kept: std::collections::HashSet<[i64; 2]> = wp
            .of_theta(t)
            .map(|p| [(p.v[0] / sp).round() as i64, (p.v[1] / sp).round() as i64])
            .collect();
        if kept.is_empty() {
            continue;
        }
        for idx in 0..grid.len() {
            let xi = grid.point(idx);
            let base = [xi[0] + xi[2] * g[0], xi[1] + xi[2] * g[1]];
            let near = [(base[0] / sp).round() as i64, (base[1] / sp).round() as i64];
            let ok = (-1..=1).any(|a| {
                (-1..=1).any(|b| {
                    let n = [near[0] + a, near[1] + b];
                    kept.contains(&n)
                        && (base[0] - sp * n[0] as f64).hypot(base[1] - sp * n[1] as f64) <= sp
                })
            });
            if !ok {
                cover_violations += 1;
            }
        }
    }

    Ok(PacketReport {
        support_violations,
        decay_ratio,
        decay_threshold: 1e-4,
        orthogonality_ratio,
        orthogonality_threshold: 1e-6,
        energy_constant,
        cover_violations,
        sampled_packets: picks.len(),
        sampled_thetas: order.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::builtin_family;

    #[test]
    fn partition_sums_to_one() {
        let m = 16;
        let s = 2.0 / m as f64;
        for k in 0..=400 {
            let x = -1.0 + 2.0 * k as f64 / 400.0;
            let total: f64 = (0..m).map(|i| partition_1d(x, i, m, s)).sum();
            assert!((total - 1.0).abs() < 1e-14);
            for i in 0..m {
                let c = -1.0 + (i as f64 + 0.5) * s;
                if partition_1d(x, i, m, s) != 0.0 {
                    assert_eq!(cutoff_1d(x, c, s), 1.0);
                }
            }
        }
        assert_eq!(cutoff_1d(1.5 * s + 1e-12, 0.0, s), 0.0);
    }

    #[test]
    fn zero_and_local_inputs() {
        let phi = builtin_family("saddle", &[]).unwrap();
        let wp = decompose(&phi, &Amplitude::zero(), 64.0, 0.1).unwrap();
        assert!(wp.packets.is_empty());
        // the core of cap (5, 9), where ψ_θ = 1
        let s = 0.125;
        let c = [-1.0 + 5.5 * s, -1.0 + 9.5 * s];
        let core = Rect::centered(c, 0.5 * s * (1.0 - PARTITION_WIDTH) * 0.99);
        let f = Amplitude::on_rect(core, Density::Const(Complex64::new(1.0, 0.0)));
        let wp = decompose(&phi, &f, 64.0, 0.1).unwrap();
        assert!(!wp.packets.is_empty());
        let t = wp.packets[0].theta;
        assert_eq!((wp.thetas[t].i, wp.thetas[t].j), (5, 9));
        assert!(wp.packets.iter().all(|p| p.theta == t));
    }

    #[test]
    fn preconditions() {
        let phi = builtin_family("saddle", &[]).unwrap();
        assert_eq!(decompose(&phi, &Amplitude::zero(), 32.0, 0.1).unwrap_err(), PacketError::RTooSmall(32.0));
        assert!(matches!(decompose(&phi, &Amplitude::zero(), 64.0, 0.3), Err(PacketError::BadDelta(_))));
    }

    #[test]
    fn coefficients_match_trapezoid_oracle() {
        // f = 1 on an interior cap: c_v factors into two 1-D transforms of the
        // partition, which the trapezoid rule integrates spectrally.
        let phi = builtin_family("saddle", &[]).unwrap();
        let wp = decompose(&phi, &Amplitude::constant(1.0), 64.0, 0.1).unwrap();
        let t = 7 * 16 + 6;
        let th = wp.thetas[t];
        let l = 2.0 * PI / 8.0;
        let oracle_1d = |i: usize, c: f64, v: f64| -> Complex64 {
            let n = 20_000;
            let (a, b) = (c - 0.2, c + 0.2);
            let h = (b - a) / n as f64;
            (0..=n)
                .map(|k| {
                    let x = a + k as f64 * h;
                    Complex64::from_polar(h * partition_1d(x, i, 16, th.side), -v * (x - c))
                })
                .sum()
        };
        let mut checked = 0;
        for p in wp.of_theta(t).filter(|p| p.v[0].abs() <= 40.0 && p.v[1].abs() <= 40.0) {
            let want = oracle_1d(th.i, th.center[0], p.v[0]) * oracle_1d(th.j, th.center[1], p.v[1]) / (l * l);
            assert!((p.coef - want).norm() < 1e-10, "{:?}: {} vs {}", p.v, p.coef, want);
            checked += 1;
        }
        assert!(checked >= 50);
    }

    #[test]
    fn packet_field_matches_direct_extension() {
        let phi = builtin_family("saddle", &[]).unwrap();
        let s = 0.125;
        let c = [-1.0 + 3.5 * s, -1.0 + 12.5 * s];
        let f = Amplitude::on_rect(Rect::centered(c, 0.5 * s), Density::Const(Complex64::new(1.0, 0.0)));
        let mut wp = decompose(&phi, &f, 64.0, 0.1).unwrap();
        let n = wp.packets.len();
        wp.packets = (0..6).map(|k| wp.packets[k * n / 6].clone()).collect();
        let grid = FreqGrid::cube_n(64.0, 3);
        let field = packet_sum_field(&phi, &wp, &grid);
        let sum = wp.sum_amplitude();
        for idx in [0, 13, 26] {
            let direct = extend(&phi, &sum, grid.point(idx), 1e-9).unwrap();
            assert!((field[idx] - direct).norm() < 1e-7, "{} vs {}", field[idx], direct);
        }
    }
}
