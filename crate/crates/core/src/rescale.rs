//! Affine normalisation of φ at a strip center and the anisotropic rescaling
//! that maps a K^{-3/4} × b box onto Σ.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::caps::{Amplitude, Density, Piece};
use crate::extension::{extend, integrate_density, ExtError};
use crate::geom::{Point, Polygon, Rect};
use crate::hypgeo::{frame, GeoError};
use crate::phase::PhaseFunction;
use crate::rects::{Strip, StripKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RescaleError {
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Ext(#[from] ExtError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Frame data at a strip center z₀ and the box half-sizes (K^{-3/4}, b).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RescaleData {
    pub z0: Point,
    pub a1: f64,
    pub b1: f64,
    pub q0: f64,
    /// Row-major T = [[1, -A₁], [-B₁, 1]].
    pub t: [[f64; 2]; 2],
    /// Half-length of the box along (-A₁, 1).
    pub b: f64,
    pub k: u32,
    pub grad0: Point,
}

impl RescaleData {
    pub fn new(phi: &PhaseFunction, z0: Point, b: f64, k: u32) -> Result<Self, RescaleError> {
        if !(b > 0.0) || k == 0 {
            return Err(RescaleError::InvalidInput("need b > 0 and K ≥ 1".into()));
        }
        let f = frame(phi, z0)?;
        Ok(RescaleData { z0, a1: f.a, b1: f.b, q0: f.q, t: f.t, b, k, grad0: phi.grad(z0) })
    }

    /// Rescaling at the center of an A-strip with b its half-length.
    pub fn from_strip(phi: &PhaseFunction, strip: &Strip, k: u32) -> Result<Self, RescaleError> {
        if strip.kind != StripKind::AStrip {
            return Err(RescaleError::InvalidInput("rescaling is set up for A-strips".into()));
        }
        Self::new(phi, strip.center, strip.half_length, k)
    }

    /// K^{-3/4}.
    pub fn width(&self) -> f64 {
        (self.k as f64).powf(-0.75)
    }

    pub fn det_t(&self) -> f64 {
        self.t[0][0] * self.t[1][1] - self.t[0][1] * self.t[1][0]
    }

    /// Columns of T·diag(K^{-3/4}, b).
    pub fn columns(&self) -> (Point, Point) {
        let w = self.width();
        ([self.t[0][0] * w, self.t[1][0] * w], [self.t[0][1] * self.b, self.t[1][1] * self.b])
    }

    /// |det T|·b·K^{-3/4}, the Jacobian of z' ↦ z₀ + T·diag(K^{-3/4}, b)z'.
    pub fn jacobian(&self) -> f64 {
        self.det_t().abs() * self.b * self.width()
    }

    pub fn to_original(&self, zp: Point) -> Point {
        let (c1, c2) = self.columns();
        [self.z0[0] + c1[0] * zp[0] + c2[0] * zp[1], self.z0[1] + c1[1] * zp[0] + c2[1] * zp[1]]
    }

    pub fn to_rescaled(&self, z: Point) -> Point {
        let (c1, c2) = self.columns();
        let det = c1[0] * c2[1] - c2[0] * c1[1];
        let d = [z[0] - self.z0[0], z[1] - self.z0[1]];
        [(c2[1] * d[0] - c2[0] * d[1]) / det, (-c1[1] * d[0] + c1[0] * d[1]) / det]
    }

    /// L = z₀ + T([-K^{-3/4}, K^{-3/4}] × [-b, b]), the image of Σ.
    pub fn parallelogram(&self) -> Polygon {
        let (c1, c2) = self.columns();
        Polygon::parallelogram(self.z0, c1, c2)
    }

    /// max |ᵗT D²φ(z₀) T − q₀[[0,1],[1,0]]|.
    pub fn normal_form_residual(&self, phi: &PhaseFunction) -> f64 {
        let [xx, xy, yy] = phi.hess(self.z0);
        let h = [[xx, xy], [xy, yy]];
        let t = self.t;
        let mut worst = 0.0f64;
        for r in 0..2 {
            for c in 0..2 {
                let mut v = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        v += t[a][r] * h[a][b] * t[b][c];
                    }
                }
                let want = if r == c { 0.0 } else { self.q0 };
                worst = worst.max((v - want).abs());
            }
        }
        worst
    }
}

/// φ̃(z̃) = q₀^{-1}[φ(z₀ + Tz̃) − φ(z₀) − ∇φ(z₀)·Tz̃].
pub fn tilde_phi(phi: &PhaseFunction, z0: Point) -> Result<PhaseFunction, RescaleError> {
    let f = frame(phi, z0)?;
    Ok(phi.pullback(z0, [f.t[0][0], f.t[1][0]], [f.t[0][1], f.t[1][1]], 1.0 / f.q, &format!("{}~", phi.label())))
}

/// φ^s(x', y') = (K^{3/4}/b)·φ̃(K^{-3/4}x', b y').
pub fn phi_s(phi: &PhaseFunction, rd: &RescaleData) -> PhaseFunction {
    let (c1, c2) = rd.columns();
    let scale = 1.0 / (rd.q0 * rd.b * rd.width());
    phi.pullback(rd.z0, c1, c2, scale, &format!("{}^s", phi.label()))
}

/// S'ξ: frequency seen by φ^s. The third component carries q₀ so that the
/// identity |ℰ_φ f_L(ξ)| = |det T|·bK^{-3/4}·|ℰ_{φ^s} f^L(S'ξ)| is exact.
pub fn xi_map(rd: &RescaleData, xi: [f64; 3]) -> [f64; 3] {
    let w = rd.width();
    let e1 = xi[0] + xi[2] * rd.grad0[0];
    let e2 = xi[1] + xi[2] * rd.grad0[1];
    [w * (e1 - rd.b1 * e2), rd.b * (e2 - rd.a1 * e1), rd.q0 * rd.b * w * xi[2]]
}

/// f_L = f·χ_L.
pub fn restrict_to_l(f: &Amplitude, rd: &RescaleData) -> Amplitude {
    f.restrict_polygon(&rd.parallelogram())
}

/// f^L(z') = f_L(z₀ + T·diag(K^{-3/4}, b)z'), piece by piece.
pub fn rescale_amplitude(f: &Amplitude, rd: &RescaleData) -> Amplitude {
    let fl = restrict_to_l(f, rd);
    let rd = *rd;
    let pieces = fl
        .pieces
        .into_iter()
        .filter_map(|p| {
            let mut vs: Vec<Point> = p.region.vertices.iter().map(|&z| rd.to_rescaled(z)).collect();
            if rd.det_t() < 0.0 {
                vs.reverse();
            }
            let region = Polygon { vertices: vs }.clip_rect(&Rect::SIGMA);
            if region.is_empty() {
                return None;
            }
            let density = match p.density {
                Density::Const(c) => Density::Const(c),
                Density::Func(g) => Density::Func(Arc::new(move |zp| g(rd.to_original(zp)))),
            };
            let (c1, c2) = rd.columns();
            let band = [
                c1[0].abs() * p.band[0] + c1[1].abs() * p.band[1],
                c2[0].abs() * p.band[0] + c2[1].abs() * p.band[1],
            ];
            Some(Piece { region, density, band })
        })
        .collect();
    Amplitude { pieces }
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentitySample {
    pub xi: [f64; 3],
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub samples: Vec<IdentitySample>,
    pub max_rel_err: f64,
}

/// max over ξ of the relative gap between |ℰ_φ f_L(ξ)| and
/// |det T|·bK^{-3/4}·|ℰ_{φ^s} f^L(S'ξ)|, each side by its own quadrature.
pub fn scaling_identity_check(
    phi: &PhaseFunction,
    f: &Amplitude,
    rd: &RescaleData,
    xis: &[[f64; 3]],
    quad_tol: f64,
) -> Result<IdentityReport, RescaleError> {
    let fl = restrict_to_l(f, rd);
    let fs = rescale_amplitude(f, rd);
    let ps = phi_s(phi, rd);
    let mut samples = Vec::with_capacity(xis.len());
    for &xi in xis {
        let lhs = extend(phi, &fl, xi, quad_tol)?.norm();
        let rhs = rd.jacobian() * extend(&ps, &fs, xi_map(rd, xi), quad_tol)?.norm();
        let scale = lhs.max(rhs);
        let rel_err = if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale };
        samples.push(IdentitySample { xi, lhs, rhs, rel_err });
    }
    let max_rel_err = samples.iter().map(|s| s.rel_err).fold(0.0, f64::max);
    Ok(IdentityReport { samples, max_rel_err })
}

#[derive(Debug, Clone, Serialize)]
pub struct NormReport {
    pub l2_f_l: f64,
    pub l2_rescaled: f64,
    /// (|det T|·bK^{-3/4})^{-1/2}·‖f_L‖₂.
    pub l2_expected: f64,
    /// (bK^{-3/4})^{-1/2}·‖f_L‖₂.
    pub l2_bound: f64,
    pub sup_f: f64,
    pub sup_rescaled: f64,
    pub rel_err: f64,
}

/// ‖f^L‖₂ against ‖f_L‖₂ (both by quadrature) and sup bounds on a grid.
pub fn norm_relations(f: &Amplitude, rd: &RescaleData) -> NormReport {
    let fl = restrict_to_l(f, rd);
    let fs = rescale_amplitude(f, rd);
    let sq = |_: Point, v: num_complex::Complex64| v.norm_sqr();
    let l2_f_l = integrate_density(&fl, 10, 0.25 * rd.width(), &sq).sqrt();
    let l2_rescaled = integrate_density(&fs, 10, 0.25, &sq).sqrt();
    let l2_expected = l2_f_l / rd.jacobian().sqrt();
    let l2_bound = l2_f_l / (rd.b * rd.width()).sqrt();
    let grid = |amp: &Amplitude, r: Rect| {
        let n = 64;
        let mut m = 0.0f64;
        for a in 0..=n {
            for b in 0..=n {
                let z = [r.x0 + (r.x1 - r.x0) * a as f64 / n as f64, r.y0 + (r.y1 - r.y0) * b as f64 / n as f64];
                m = m.max(amp.eval(z).norm());
            }
        }
        m
    };
    let sup_f = grid(f, Rect::SIGMA);
    let sup_rescaled = grid(&fs, Rect::SIGMA);
    let rel_err = if l2_expected == 0.0 { 0.0 } else { (l2_rescaled - l2_expected).abs() / l2_expected };
    NormReport { l2_f_l, l2_rescaled, l2_expected, l2_bound, sup_f, sup_rescaled, rel_err }
}

/// max over grid samples of A-strips of |⟨ω̃,∇⟩²φ(z)| / (μK^{-3/4}).
pub fn null_direction_constant(phi: &PhaseFunction, strips: &[Strip], mu: f64, k: u32, samples: usize) -> f64 {
    let unit = mu * (k as f64).powf(-0.75);
    let mut worst = 0.0f64;
    for s in strips.iter().filter(|s| s.kind == StripKind::AStrip) {
        let n = s.normal();
        let w = s.dir;
        for a in 0..=samples {
            for b in 0..=samples {
                let sa = (2.0 * a as f64 / samples as f64 - 1.0) * s.half_length;
                let tb = (2.0 * b as f64 / samples as f64 - 1.0) * s.half_width;
                let z = [s.center[0] + sa * w[0] + tb * n[0], s.center[1] + sa * w[1] + tb * n[1]];
                if !Rect::SIGMA.contains(z) {
                    continue;
                }
                let [xx, xy, yy] = phi.hess(z);
                let v = w[0] * w[0] * xx + 2.0 * w[0] * w[1] * xy + w[1] * w[1] * yy;
                worst = worst.max(v.abs() / unit);
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::{builtin_family, validate_hyp};
    use num_complex::Complex64;

    #[test]
    fn saddle_tilde_is_saddle() {
        let phi = builtin_family("saddle", &[]).unwrap();
        for z0 in [[0.0, 0.0], [0.3, -0.2]] {
            let t = tilde_phi(&phi, z0).unwrap();
            for z in [[0.1, 0.7], [-0.5, 0.25], [1.2, -1.9]] {
                assert!((t.value(z) - z[0] * z[1]).abs() < 1e-15);
            }
        }
        let rd = RescaleData::new(&phi, [0.0, 0.0], 0.3, 256).unwrap();
        let s = phi_s(&phi, &rd);
        assert!((s.value([0.4, -0.9]) - 0.4 * -0.9).abs() < 1e-14);
        let w = rd.width();
        assert_eq!(xi_map(&rd, [1.0, 2.0, 3.0]), [w, 0.3 * 2.0, 0.3 * w * 3.0]);
        assert_eq!(xi_map(&rd, [0.0; 3]), [0.0; 3]);
    }

    #[test]
    fn normal_forms() {
        let phi = builtin_family("mixed-quartic", &[1e-6]).unwrap();
        let z0 = [0.5, 0.5];
        let t = tilde_phi(&phi, z0).unwrap();
        let o = [0.0, 0.0];
        let res = [t.d(0, 0, o), t.d(1, 0, o), t.d(0, 1, o), t.d(2, 0, o), t.d(0, 2, o), t.d(1, 1, o) - 1.0];
        assert!(res.iter().all(|r| r.abs() < 1e-12), "{res:?}");
        let rd = RescaleData::new(&phi, z0, 0.2, 128).unwrap();
        assert!(rd.normal_form_residual(&phi) < 1e-12);
        let s = phi_s(&phi, &rd);
        assert!((s.d(1, 1, o) - 1.0).abs() < 1e-12 && s.d(2, 0, o).abs() < 1e-12 && s.d(0, 2, o).abs() < 1e-12);
        assert!(validate_hyp(&s, 1.0 / 16.0).pass);
    }

    #[test]
    fn xi_map_matches_matrix() {
        let phi = builtin_family("trig", &[2e-6, 1.0]).unwrap();
        let rd = RescaleData::new(&phi, [0.4, -0.3], 0.25, 256).unwrap();
        // S' = diag(w, b, q₀bw) · [[1, -B, φ_x - Bφ_y], [-A, 1, φ_y - Aφ_x], [0, 0, 1]]
        let w = rd.width();
        let g = rd.grad0;
        let m = [
            [w, -w * rd.b1, w * (g[0] - rd.b1 * g[1])],
            [-rd.b * rd.a1, rd.b, rd.b * (g[1] - rd.a1 * g[0])],
            [0.0, 0.0, rd.q0 * rd.b * w],
        ];
        let xi = [1.0, 1.0, 1.0];
        let got = xi_map(&rd, xi);
        for r in 0..3 {
            let want: f64 = (0..3).map(|c| m[r][c] * xi[c]).sum();
            assert!((got[r] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_holds_for_cubic() {
        let phi = builtin_family("cubic-x", &[1e-6]).unwrap();
        let rd = RescaleData::new(&phi, [0.2, 0.1], 0.4, 256).unwrap();
        let f = Amplitude::from_fn(|z| Complex64::new(1.0 + 0.3 * z[0], 0.5 * z[1]));
        let xis = [[0.0; 3], [10.0, -20.0, 30.0], [-40.0, 5.0, -60.0]];
        let rep = scaling_identity_check(&phi, &f, &rd, &xis, 1e-10).unwrap();
        assert!(rep.max_rel_err < 1e-8, "{rep:?}");
        let area = rd.parallelogram().area();
        assert!((rep.samples[0].lhs - area * 1.0).abs() < 0.2 * area);
        let nr = norm_relations(&f, &rd);
        assert!(nr.rel_err < 1e-10, "{nr:?}");
        assert!(nr.l2_rescaled <= nr.l2_bound * (1.0 + 1e-10));
        assert!(nr.sup_rescaled <= nr.sup_f + 1e-12);
    }

    #[test]
    fn outside_support_is_zero() {
        let phi = builtin_family("saddle", &[]).unwrap();
        let rd = RescaleData::new(&phi, [0.0, 0.0], 0.2, 256).unwrap();
        let f = Amplitude::on_rect(Rect::new(0.5, 0.9, 0.5, 0.9), Density::Const(Complex64::new(1.0, 0.0)));
        let rep = scaling_identity_check(&phi, &f, &rd, &[[3.0, 1.0, 2.0]], 1e-10).unwrap();
        assert_eq!(rep.samples[0].lhs, 0.0);
        assert_eq!(rep.max_rel_err, 0.0);
    }

    #[test]
    fn cubic_pure_y_derivatives_vanish() {
        let phi = builtin_family("cubic-x", &[1e-6]).unwrap();
        let k = 256u32;
        let b = (k as f64).powf(-0.1);
        let rd = RescaleData::new(&phi, [0.0, 0.0], b, k).unwrap();
        let s = phi_s(&phi, &rd);
        for m in 2..=8 {
            for z in [[0.3, 0.2], [-1.0, 1.0], [0.9, -0.4]] {
                assert!(s.d(0, m, z).abs() < 1e-14);
            }
        }
    }
}
