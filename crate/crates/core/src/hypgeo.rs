//! Null-vector frame, transversality functions t¹/t², the Γ forms, strong
//! separation of caps, the A/B/C trichotomy and level curves of t².

use serde::Serialize;
use thiserror::Error;

use crate::caps::Cap;
use crate::geom::Point;
use crate::phase::{in_double_square, PhaseFunction};

/// Strong separation constant: min(|t¹|,|t²|) ≥ SEP·μ^{1/2}/K.
pub const SEP_CONST: f64 = 50.0;
/// Case thresholds: 100·μ^{1/2}/K.
pub const CASE_CONST: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("H = {h:e} ≤ 0 at ({}, {}): surface not hyperbolic", z[0], z[1])]
    NonPositiveH { h: f64, z: Point },
    #[error("point ({0}, {1}) lies outside 2Σ")]
    Domain(f64, f64),
    #[error("caps come from different (K, μ) grids")]
    MismatchedGrids,
    #[error("pair is strongly separated")]
    Separated,
    #[error("level curve root not found for v = {v}, y = {y}")]
    NoConvergence { v: f64, y: f64 },
}

/// Hessian frame at a point: H, A, B, q and T = [[1, -A], [-B, 1]].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FrameData {
    pub at: Point,
    pub h: f64,
    pub a: f64,
    pub b: f64,
    pub q: f64,
    /// Row-major.
    pub t: [[f64; 2]; 2],
}

impl FrameData {
    pub fn det_t(&self) -> f64 {
        1.0 - self.a * self.b
    }

    /// Null vectors (-A, 1) and (1, -B).
    pub fn null_vectors(&self) -> (Point, Point) {
        ([-self.a, 1.0], [1.0, -self.b])
    }
}

pub fn frame(phi: &PhaseFunction, z: Point) -> Result<FrameData, GeoError> {
    if !in_double_square(z) {
        return Err(GeoError::Domain(z[0], z[1]));
    }
    let [xx, xy, yy] = phi.hess(z);
    frame_from_hess(z, xx, xy, yy)
}

fn frame_from_hess(z: Point, xx: f64, xy: f64, yy: f64) -> Result<FrameData, GeoError> {
    let h = xy * xy - xx * yy;
    if !(h > 0.0) {
        return Err(GeoError::NonPositiveH { h, z });
    }
    let s = h.sqrt();
    let den = xy + s;
    let a = yy / den;
    let b = xx / den;
    let q = 2.0 * h / den;
    Ok(FrameData { at: z, h, a, b, q, t: [[1.0, -a], [-b, 1.0]] })
}

/// A(z) = φ_yy / (φ_xy + √H).
pub fn a_coef(phi: &PhaseFunction, z: Point) -> Result<f64, GeoError> {
    Ok(frame(phi, z)?.a)
}

/// (t¹_z(z1,z2), t²_z(z1,z2)).
pub fn t_funcs(phi: &PhaseFunction, z: Point, z1: Point, z2: Point) -> Result<(f64, f64), GeoError> {
    let f = frame(phi, z)?;
    check(z1)?;
    check(z2)?;
    Ok(t_with(&f, phi.grad(z1), phi.grad(z2)))
}

fn t_with(f: &FrameData, g1: Point, g2: Point) -> (f64, f64) {
    let dx = g2[0] - g1[0];
    let dy = g2[1] - g1[1];
    (dx - f.b * dy, dy - f.a * dx)
}

fn check(z: Point) -> Result<(), GeoError> {
    if in_double_square(z) {
        Ok(())
    } else {
        Err(GeoError::Domain(z[0], z[1]))
    }
}

/// ⟨(D²φ(z))⁻¹u, v⟩.
fn inv_hess_form(phi: &PhaseFunction, z: Point, u: Point, v: Point) -> f64 {
    let [xx, xy, yy] = phi.hess(z);
    let det = xx * yy - xy * xy;
    (yy * u[0] * v[0] - xy * (u[0] * v[1] + u[1] * v[0]) + xx * u[1] * v[1]) / det
}

/// Γ_z(z1,z2) by the direct quadratic form.
pub fn gamma2(phi: &PhaseFunction, z: Point, z1: Point, z2: Point) -> Result<f64, GeoError> {
    frame(phi, z)?;
    check(z1)?;
    check(z2)?;
    let (g1, g2) = (phi.grad(z1), phi.grad(z2));
    let u = [g2[0] - g1[0], g2[1] - g1[1]];
    Ok(inv_hess_form(phi, z, u, u))
}

/// Γ_z(z1,z2) as (2/q)·t¹·t².
pub fn gamma2_factored(phi: &PhaseFunction, z: Point, z1: Point, z2: Point) -> Result<f64, GeoError> {
    let f = frame(phi, z)?;
    check(z1)?;
    check(z2)?;
    let (t1, t2) = t_with(&f, phi.grad(z1), phi.grad(z2));
    Ok(2.0 / f.q * t1 * t2)
}

/// Γ_z(z1,z2,z1',z2') by the direct bilinear form.
pub fn gamma4(
    phi: &PhaseFunction,
    z: Point,
    z1: Point,
    z2: Point,
    z1p: Point,
    z2p: Point,
) -> Result<f64, GeoError> {
    frame(phi, z)?;
    for p in [z1, z2, z1p, z2p] {
        check(p)?;
    }
    let (g1, g2) = (phi.grad(z1), phi.grad(z2));
    let (h1, h2) = (phi.grad(z1p), phi.grad(z2p));
    let u = [g2[0] - g1[0], g2[1] - g1[1]];
    let v = [h2[0] - h1[0], h2[1] - h1[1]];
    Ok(inv_hess_form(phi, z, u, v))
}

/// Γ_z(z1,z2,z1',z2') as (1/q)[t¹(z1,z2)t²(z1',z2') + t¹(z1',z2')t²(z1,z2)].
pub fn gamma4_factored(
    phi: &PhaseFunction,
    z: Point,
    z1: Point,
    z2: Point,
    z1p: Point,
    z2p: Point,
) -> Result<f64, GeoError> {
    let f = frame(phi, z)?;
    for p in [z1, z2, z1p, z2p] {
        check(p)?;
    }
    let (a1, a2) = t_with(&f, phi.grad(z1), phi.grad(z2));
    let (b1, b2) = t_with(&f, phi.grad(z1p), phi.grad(z2p));
    Ok((a1 * b2 + b1 * a2) / f.q)
}

fn same_grid(t1: &Cap, t2: &Cap) -> Result<(), GeoError> {
    if t1.k != t2.k || t1.mu != t2.mu {
        Err(GeoError::MismatchedGrids)
    } else {
        Ok(())
    }
}

/// max_j min(|t¹_{z^c_j}|, |t²_{z^c_j}|) over the two centers.
pub fn separation_margin(phi: &PhaseFunction, t1: &Cap, t2: &Cap) -> Result<f64, GeoError> {
    let (c1, c2) = (t1.center, t2.center);
    let mut best = 0.0f64;
    for z in [c1, c2] {
        let (a, b) = t_funcs(phi, z, c1, c2)?;
        best = best.max(a.abs().min(b.abs()));
    }
    Ok(best)
}

pub fn strongly_separated(
    phi: &PhaseFunction,
    t1: &Cap,
    t2: &Cap,
    mu: f64,
    k: u32,
) -> Result<bool, GeoError> {
    same_grid(t1, t2)?;
    if t1.k != k || t1.mu != mu {
        return Err(GeoError::MismatchedGrids);
    }
    Ok(separation_margin(phi, t1, t2)? >= SEP_CONST * mu.sqrt() / k as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PairTag {
    Separated,
    CaseA,
    CaseB,
    CaseC,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Orientation {
    YDominant,
    XDominant,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PairClass {
    pub tag: PairTag,
    /// [t¹_{z1}, t²_{z1}, t¹_{z2}, t²_{z2}] evaluated at (z^c_1, z^c_2), in the
    /// oriented frame (coordinates swapped when x-dominant).
    pub t_values: [f64; 4],
    pub orientation: Orientation,
    pub delta_a: f64,
}

/// Orientation of a pair of centers and the phase seen in that orientation.
pub fn oriented(phi: &PhaseFunction, c1: Point, c2: Point) -> (Orientation, PhaseFunction, Point, Point) {
    if (c2[1] - c1[1]).abs() >= (c2[0] - c1[0]).abs() {
        (Orientation::YDominant, phi.clone(), c1, c2)
    } else {
        (Orientation::XDominant, phi.swapped(), [c1[1], c1[0]], [c2[1], c2[0]])
    }
}

pub fn classify_pair(
    phi: &PhaseFunction,
    t1: &Cap,
    t2: &Cap,
    mu: f64,
    k: u32,
) -> Result<PairClass, GeoError> {
    classify_pair_with(phi, t1, t2, mu, k, None)
}

/// Same as [`classify_pair`], with an optional replacement for A in the
/// oriented coordinates (used to reach the Case B branch synthetically).
pub fn classify_pair_with(
    phi: &PhaseFunction,
    t1: &Cap,
    t2: &Cap,
    mu: f64,
    k: u32,
    a_override: Option<&dyn Fn(Point) -> f64>,
) -> Result<PairClass, GeoError> {
    if strongly_separated(phi, t1, t2, mu, k)? {
        return Err(GeoError::Separated);
    }
    let (orientation, psi, c1, c2) = oriented(phi, t1.center, t2.center);
    let f1 = frame(&psi, c1)?;
    let f2 = frame(&psi, c2)?;
    let (g1, g2) = (psi.grad(c1), psi.grad(c2));
    let (a1, b1) = t_with(&f1, g1, g2);
    let (a2, b2) = t_with(&f2, g1, g2);
    let t_values = [a1, b1, a2, b2];
    let (av1, av2) = match a_override {
        Some(f) => (f(c1), f(c2)),
        None => (f1.a, f2.a),
    };
    let delta_a = av1 - av2;
    let unit = mu.sqrt() / k as f64;
    let tag = if (c2[1] - c1[1]).abs() <= CASE_CONST * unit {
        PairTag::CaseA
    } else if delta_a.abs() > mu.sqrt() * (k as f64).powf(-0.75) {
        PairTag::CaseB
    } else {
        PairTag::CaseC
    };
    Ok(PairClass { tag, t_values, orientation, delta_a })
}

/// x = h(v, y) with t²_{z1}(z1, (x, y)) = v, by Newton with a bisection guard.
pub fn level_curve_x(phi: &PhaseFunction, z1: Point, v: f64, y: f64) -> Result<f64, GeoError> {
    let f1 = frame(phi, z1)?;
    let g1 = phi.grad(z1);
    let t = |x: f64| {
        let g = phi.grad([x, y]);
        (g[1] - g1[1]) - f1.a * (g[0] - g1[0]) - v
    };
    let dt = |x: f64| {
        let [xx, xy, _] = phi.hess([x, y]);
        xy - f1.a * xx
    };
    let (mut lo, mut hi) = (-2.0, 2.0);
    let (flo, fhi) = (t(lo), t(hi));
    if flo > 0.0 || fhi < 0.0 {
        return Err(GeoError::NoConvergence { v, y });
    }
    let mut x = (z1[0] + v).clamp(lo, hi);
    for _ in 0..200 {
        let r = t(x);
        if r.abs() <= 1e-13 {
            return Ok(x);
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let step = r / dt(x);
        let mut nx = x - step;
        if !(nx > lo && nx < hi) {
            nx = 0.5 * (lo + hi);
        }
        if (nx - x).abs() < 1e-17 {
            return Ok(nx);
        }
        x = nx;
    }
    if t(x).abs() <= 1e-12 {
        Ok(x)
    } else {
        Err(GeoError::NoConvergence { v, y })
    }
}

/// X_z = (h_y, 1) at z = (h(v,y), y).
pub fn tangent_dir(phi: &PhaseFunction, z1: Point, v: f64, y: f64) -> Result<Point, GeoError> {
    let x = level_curve_x(phi, z1, v, y)?;
    let a1 = frame(phi, z1)?.a;
    let [xx, xy, yy] = phi.hess([x, y]);
    let tx = xy - a1 * xx;
    let ty = yy - a1 * xy;
    Ok([-ty / tx, 1.0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caps::make_caps;
    use crate::phase::builtin_family;

    fn saddle() -> PhaseFunction {
        builtin_family("saddle", &[]).unwrap()
    }

    #[test]
    fn saddle_frame_is_identity() {
        let f = frame(&saddle(), [0.3, -0.8]).unwrap();
        assert_eq!((f.h, f.a, f.b, f.q), (1.0, 0.0, 0.0, 1.0));
        assert_eq!(f.t, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(f.det_t(), f.q / f.h.sqrt());
    }

    #[test]
    fn mixed_quartic_a_closed_form() {
        let c = 1e-6;
        let p = builtin_family("mixed-quartic", &[c]).unwrap();
        let f = frame(&p, [1.0, 1.0]).unwrap();
        // oracle: φ_xx = φ_yy = 2c, φ_xy = 1 + 4c
        let (xx, xy) = (2.0 * c, 1.0 + 4.0 * c);
        let h = xy * xy - xx * xx;
        let a = xx / (xy + h.sqrt());
        assert!((f.a - a).abs() < 1e-18);
        assert!((f.a - 2e-6 / (xy + h.sqrt())).abs() < 1e-18);
    }

    #[test]
    fn t_funcs_examples() {
        let s = saddle();
        let (t1, t2) = t_funcs(&s, [0.1, 0.1], [0.2, -0.3], [0.7, 0.4]).unwrap();
        assert_eq!((t1, t2), (0.4 - -0.3, 0.7 - 0.2));
        let p = builtin_family("cubic-x", &[1e-6]).unwrap();
        let (t1, t2) = t_funcs(&p, [0.0, 0.0], [0.0, 0.0], [0.5, 0.5]).unwrap();
        assert!((t1 - (0.5 + 7.5e-7)).abs() < 1e-16);
        assert_eq!(t2, 0.5);
        let (a, b) = t_funcs(&p, [0.2, 0.2], [0.3, 0.1], [0.3, 0.1]).unwrap();
        assert_eq!((a, b), (0.0, 0.0));
    }

    #[test]
    fn gamma_saddle() {
        let s = saddle();
        let (z1, z2) = ([0.1, -0.2], [0.6, 0.5]);
        let g = gamma2(&s, [0.0, 0.0], z1, z2).unwrap();
        assert!((g - 2.0 * 0.5 * 0.7).abs() < 1e-15);
        assert_eq!(gamma2(&s, [0.0, 0.0], z1, z1).unwrap(), 0.0);
    }

    #[test]
    fn separation_examples() {
        let s = saddle();
        let caps = make_caps(256, 1.0).unwrap();
        let near = |p: Point| {
            caps.iter()
                .min_by(|a, b| {
                    let da = (a.center[0] - p[0]).abs().max((a.center[1] - p[1]).abs());
                    let db = (b.center[0] - p[0]).abs().max((b.center[1] - p[1]).abs());
                    da.total_cmp(&db)
                })
                .unwrap()
                .clone()
        };
        let a = near([0.0, 0.0]);
        let b = near([0.5, 0.5]);
        let c = near([0.5, 0.1]);
        assert!(strongly_separated(&s, &a, &b, 1.0, 256).unwrap());
        assert!(!strongly_separated(&s, &a, &c, 1.0, 256).unwrap());
        // at K = 32 the threshold 50/K exceeds a margin of 1.5
        let k32 = make_caps(32, 1.0).unwrap();
        let (p, q) = (&k32[0], &k32[48 * 64 + 48]);
        assert!(separation_margin(&s, p, q).unwrap() > 1.45);
        assert!(!strongly_separated(&s, p, q, 1.0, 32).unwrap());
        assert_eq!(strongly_separated(&s, &a, &k32[0], 1.0, 256), Err(GeoError::MismatchedGrids));
    }

    #[test]
    fn classify_examples() {
        let s = saddle();
        let caps = make_caps(256, 1.0).unwrap();
        let find = |x: f64, y: f64| {
            caps.iter()
                .find(|c| (c.center[0] - x).abs() <= 0.5 / 256.0 + 1e-12 && (c.center[1] - y).abs() <= 0.5 / 256.0 + 1e-12)
                .unwrap()
                .clone()
        };
        let a = find(0.0, 0.0);
        let b = find(0.0 + 1.0 / 256.0, 0.0);
        assert_eq!(classify_pair(&s, &a, &b, 1.0, 256).unwrap().tag, PairTag::CaseA);
        let c1 = find(0.0, -0.8);
        let c2 = find(0.01, 0.8);
        let pc = classify_pair(&s, &c1, &c2, 1.0, 256).unwrap();
        assert_eq!(pc.tag, PairTag::CaseC);
        assert_eq!(pc.orientation, Orientation::YDominant);
        assert!(pc.t_values[1].abs() <= CASE_CONST / 256.0);
        let synthetic = |z: Point| 0.1 * z[1];
        let pb = classify_pair_with(&s, &c1, &c2, 1.0, 256, Some(&synthetic)).unwrap();
        assert_eq!(pb.tag, PairTag::CaseB);
        let far = find(0.5, 0.5);
        assert_eq!(classify_pair(&s, &a, &far, 1.0, 256).unwrap_err(), GeoError::Separated);
    }

    #[test]
    fn level_curves_saddle() {
        let s = saddle();
        for y in [-0.9, 0.0, 0.4] {
            assert!((level_curve_x(&s, [0.0, 0.0], 0.2, y).unwrap() - 0.2).abs() < 1e-15);
            assert!((level_curve_x(&s, [0.3, 0.1], 0.0, y).unwrap() - 0.3).abs() < 1e-15);
            assert_eq!(tangent_dir(&s, [0.0, 0.0], 0.1, y).unwrap(), [0.0, 1.0]);
        }
    }

    #[test]
    fn level_curve_residual_cubic() {
        let p = builtin_family("cubic-x", &[1e-6]).unwrap();
        let x = level_curve_x(&p, [0.0, 0.0], 0.1, 0.5).unwrap();
        let (_, t2) = t_funcs(&p, [0.0, 0.0], [0.0, 0.0], [x, 0.5]).unwrap();
        assert!((t2 - 0.1).abs() <= 1e-12);
    }
}
