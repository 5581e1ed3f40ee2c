//! Phase functions in the class Hyp^M: small C^M perturbations of `xy` on
//! Σ = [-1,1]², extended to 2Σ, with closed-form derivatives.

use serde::Serialize;
use thiserror::Error;

use crate::geom::Point;

/// Bound on every derivative of order 3..=M over 2Σ.
pub const HYP_BOUND: f64 = 1e-5;
/// Bound on |φ_xx|, |φ_yy|, |φ_xy - 1| over Σ.
pub const HESS_BOUND: f64 = 2e-5;
/// Tolerance used for the normal form at the origin.
pub const NORMAL_TOL: f64 = 1e-12;
/// Default smoothness order for the builtin phases.
pub const DEFAULT_ORDER: usize = 8;
/// Default validation grid step.
pub const DEFAULT_GRID_STEP: f64 = 1.0 / 128.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseError {
    #[error("derivative order {0} exceeds M = {1}")]
    OrderExceeded(usize, usize),
    #[error("point ({0}, {1}) lies outside 2Σ")]
    Domain(f64, f64),
    #[error("unknown phase family `{0}`")]
    UnknownFamily(String),
    #[error("parameters for `{0}` outside the safe range: {1}")]
    UnsafeParams(String, String),
}

#[derive(Debug, Clone)]
enum Kind {
    Saddle,
    CubicX { c: f64 },
    MixedQuartic { c: f64 },
    Trig { c: f64, a: f64 },
    Pullback(Box<Pullback>),
}

/// ψ(w) = s·[φ(z0 + Mw) - φ(z0) - ∇φ(z0)·Mw]; M given by its columns.
#[derive(Debug, Clone)]
struct Pullback {
    base: PhaseFunction,
    z0: Point,
    col1: Point,
    col2: Point,
    scale: f64,
    value0: f64,
    grad0: Point,
}

/// A phase φ together with all partial derivatives up to order M on 2Σ.
#[derive(Debug, Clone)]
pub struct PhaseFunction {
    order: usize,
    label: String,
    kind: Kind,
}

fn binom(n: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// k-th derivative of t^2.
fn d_sq(k: usize, t: f64) -> f64 {
    match k {
        0 => t * t,
        1 => 2.0 * t,
        2 => 2.0,
        _ => 0.0,
    }
}

/// k-th derivative of 1 - cos(a t).
fn d_one_minus_cos(k: usize, a: f64, t: f64) -> f64 {
    if k == 0 {
        return 1.0 - (a * t).cos();
    }
    let shift = k as f64 * std::f64::consts::FRAC_PI_2;
    -a.powi(k as i32) * (a * t + shift).cos()
}

/// Index of (a, b) in a derivative table ordered by total degree.
#[inline]
pub fn table_index(a: usize, b: usize) -> usize {
    let n = a + b;
    n * (n + 1) / 2 + b
}

impl PhaseFunction {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Same phase, declared with a different smoothness order.
    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order.max(2);
        self
    }

    /// ∂_x^a ∂_y^b φ(z), checked against the order and the domain 2Σ.
    pub fn eval_deriv(&self, a: usize, b: usize, z: Point) -> Result<f64, PhaseError> {
        if a + b > self.order {
            return Err(PhaseError::OrderExceeded(a + b, self.order));
        }
        if !in_double_square(z) {
            return Err(PhaseError::Domain(z[0], z[1]));
        }
        Ok(self.d(a, b, z))
    }

    /// Unchecked derivative; callers keep z in 2Σ (or just outside it for
    /// derived phases).
    pub fn d(&self, a: usize, b: usize, z: Point) -> f64 {
        let [x, y] = z;
        match &self.kind {
            Kind::Saddle => saddle_d(a, b, x, y),
            Kind::CubicX { c } => {
                let extra = if b == 0 {
                    match a {
                        0 => x * x * x,
                        1 => 3.0 * x * x,
                        2 => 6.0 * x,
                        3 => 6.0,
                        _ => 0.0,
                    }
                } else {
                    0.0
                };
                saddle_d(a, b, x, y) + c * extra
            }
            Kind::MixedQuartic { c } => saddle_d(a, b, x, y) + c * d_sq(a, x) * d_sq(b, y),
            Kind::Trig { c, a: w } => {
                saddle_d(a, b, x, y) + c * d_one_minus_cos(a, *w, x) * d_one_minus_cos(b, *w, y)
            }
            Kind::Pullback(p) => {
                let n = a + b;
                let table = p.base.deriv_table_upto(n, p.map(z));
                p.combine(a, b, &table, z)
            }
        }
    }

    pub fn value(&self, z: Point) -> f64 {
        self.d(0, 0, z)
    }

    pub fn grad(&self, z: Point) -> Point {
        match &self.kind {
            Kind::Pullback(p) => {
                let t = p.base.deriv_table_upto(1, p.map(z));
                [p.combine(1, 0, &t, z), p.combine(0, 1, &t, z)]
            }
            _ => [self.d(1, 0, z), self.d(0, 1, z)],
        }
    }

    /// (φ_xx, φ_xy, φ_yy).
    pub fn hess(&self, z: Point) -> [f64; 3] {
        match &self.kind {
            Kind::Pullback(p) => {
                let t = p.base.deriv_table_upto(2, p.map(z));
                [p.combine(2, 0, &t, z), p.combine(1, 1, &t, z), p.combine(0, 2, &t, z)]
            }
            _ => [self.d(2, 0, z), self.d(1, 1, z), self.d(0, 2, z)],
        }
    }

    /// All derivatives with a + b ≤ n, indexed by [`table_index`].
    pub fn deriv_table_upto(&self, n: usize, z: Point) -> Vec<f64> {
        let mut out = vec![0.0; (n + 1) * (n + 2) / 2];
        match &self.kind {
            Kind::Pullback(p) => {
                let base = p.base.deriv_table_upto(n, p.map(z));
                for deg in 0..=n {
                    for b in 0..=deg {
                        out[table_index(deg - b, b)] = p.combine(deg - b, b, &base, z);
                    }
                }
            }
            _ => {
                for deg in 0..=n {
                    for b in 0..=deg {
                        out[table_index(deg - b, b)] = self.d(deg - b, b, z);
                    }
                }
            }
        }
        out
    }

    /// ψ(w) = s·[φ(z0 + Mw) - φ(z0) - ∇φ(z0)·Mw] with M = [col1 col2].
    pub fn pullback(&self, z0: Point, col1: Point, col2: Point, scale: f64, label: &str) -> Self {
        PhaseFunction {
            order: self.order,
            label: label.to_string(),
            kind: Kind::Pullback(Box::new(Pullback {
                base: self.clone(),
                z0,
                col1,
                col2,
                scale,
                value0: self.value(z0),
                grad0: self.grad(z0),
            })),
        }
    }

    /// φ(y, x); interchanges the roles of A and B, t¹ and t².
    pub fn swapped(&self) -> Self {
        self.pullback([0.0, 0.0], [0.0, 1.0], [1.0, 0.0], 1.0, &format!("{}-swapped", self.label))
    }
}

fn saddle_d(a: usize, b: usize, x: f64, y: f64) -> f64 {
    match (a, b) {
        (0, 0) => x * y,
        (1, 0) => y,
        (0, 1) => x,
        (1, 1) => 1.0,
        _ => 0.0,
    }
}

impl Pullback {
    fn map(&self, w: Point) -> Point {
        [
            self.z0[0] + self.col1[0] * w[0] + self.col2[0] * w[1],
            self.z0[1] + self.col1[1] * w[0] + self.col2[1] * w[1],
        ]
    }

    fn combine(&self, a: usize, b: usize, base: &[f64], w: Point) -> f64 {
        let (u, v) = (self.col1, self.col2);
        let mut s = 0.0;
        for i in 0..=a {
            let ca = binom(a, i) * u[0].powi(i as i32) * u[1].powi((a - i) as i32);
            if ca == 0.0 {
                continue;
            }
            for j in 0..=b {
                let cb = binom(b, j) * v[0].powi(j as i32) * v[1].powi((b - j) as i32);
                if cb == 0.0 {
                    continue;
                }
                let dx = i + j;
                let dy = a + b - dx;
                s += ca * cb * base[table_index(dx, dy)];
            }
        }
        match a + b {
            0 => {
                let mw = [
                    self.col1[0] * w[0] + self.col2[0] * w[1],
                    self.col1[1] * w[0] + self.col2[1] * w[1],
                ];
                self.scale * (s - self.value0 - (self.grad0[0] * mw[0] + self.grad0[1] * mw[1]))
            }
            1 => {
                let col = if a == 1 { u } else { v };
                self.scale * (s - (self.grad0[0] * col[0] + self.grad0[1] * col[1]))
            }
            _ => self.scale * s,
        }
    }

}

pub(crate) fn in_double_square(z: Point) -> bool {
    z[0].abs() <= 2.0 + 1e-12 && z[1].abs() <= 2.0 + 1e-12
}

/// Result of the grid-based membership test for Hyp^M.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub label: String,
    pub order: usize,
    pub grid_step: f64,
    /// |φ(0)|, |φ_x(0)|, |φ_y(0)|, |φ_xx(0)|, |φ_yy(0)|, |φ_xy(0) - 1|.
    pub normal_form_residuals: [f64; 6],
    /// Max over 2Σ of |∂^a∂^b φ| for each total order 3..=M.
    pub max_by_order: Vec<(usize, f64)>,
    /// Max over Σ of |φ_xx|, |φ_yy|, |φ_xy - 1|.
    pub hessian_deviation: [f64; 3],
    pub pass: bool,
    pub failures: Vec<String>,
}

/// Grid check of the normal form and derivative bounds.
pub fn validate_hyp(phi: &PhaseFunction, grid_step: f64) -> ValidationReport {
    let m = phi.order;
    let o = [0.0, 0.0];
    let t0 = phi.deriv_table_upto(2, o);
    let normal = [
        t0[table_index(0, 0)].abs(),
        t0[table_index(1, 0)].abs(),
        t0[table_index(0, 1)].abs(),
        t0[table_index(2, 0)].abs(),
        t0[table_index(0, 2)].abs(),
        (t0[table_index(1, 1)] - 1.0).abs(),
    ];
    let step = if grid_step > 0.0 && grid_step <= 0.1 { grid_step } else { DEFAULT_GRID_STEP };
    let n = (4.0 / step).round() as usize;
    let mut max_order = vec![0.0f64; m + 1];
    let mut hess = [0.0f64; 3];
    for i in 0..=n {
        let x = -2.0 + 4.0 * i as f64 / n as f64;
        for j in 0..=n {
            let y = -2.0 + 4.0 * j as f64 / n as f64;
            let t = phi.deriv_table_upto(m, [x, y]);
            for deg in 3..=m {
                for b in 0..=deg {
                    let v = t[table_index(deg - b, b)].abs();
                    if v > max_order[deg] {
                        max_order[deg] = v;
                    }
                }
            }
            if x.abs() <= 1.0 && y.abs() <= 1.0 {
                hess[0] = hess[0].max(t[table_index(2, 0)].abs());
                hess[1] = hess[1].max(t[table_index(0, 2)].abs());
                hess[2] = hess[2].max((t[table_index(1, 1)] - 1.0).abs());
            }
        }
    }
    let mut failures = Vec::new();
    let names = ["phi(0)", "phi_x(0)", "phi_y(0)", "phi_xx(0)", "phi_yy(0)", "phi_xy(0)-1"];
    for (nm, r) in names.iter().zip(normal.iter()) {
        if *r > NORMAL_TOL {
            failures.push(format!("normal form: |{nm}| = {r:e}"));
        }
    }
    let max_by_order: Vec<(usize, f64)> = (3..=m).map(|d| (d, max_order[d])).collect();
    for &(d, v) in &max_by_order {
        if v > HYP_BOUND {
            failures.push(format!("order {d}: max {v:e} > {HYP_BOUND:e}"));
        }
    }
    let hn = ["phi_xx", "phi_yy", "phi_xy-1"];
    for (nm, v) in hn.iter().zip(hess.iter()) {
        if *v > HESS_BOUND {
            failures.push(format!("{nm}: max {v:e} > {HESS_BOUND:e}"));
        }
    }
    ValidationReport {
        label: phi.label.clone(),
        order: m,
        grid_step: 4.0 / n as f64,
        normal_form_residuals: normal,
        max_by_order,
        hessian_deviation: hess,
        pass: failures.is_empty(),
        failures,
    }
}

/// Names accepted by [`builtin_family`].
pub const BUILTIN_NAMES: [&str; 4] = ["saddle", "cubic-x", "mixed-quartic", "trig"];

/// Builtin phases with closed-form derivatives.
///
/// * `saddle`: xy
/// * `cubic-x [c]`: xy + c x³, |c| ≤ 1e-5/6
/// * `mixed-quartic [c]`: xy + c x²y², |c| ≤ 1.25e-6
/// * `trig [c, a]`: xy + c(1 - cos ax)(1 - cos ay), 0 < a ≤ 4, 4|c|max(1,a)^M ≤ 1e-5
pub fn builtin_family(name: &str, params: &[f64]) -> Result<PhaseFunction, PhaseError> {
    builtin_family_with_order(name, params, DEFAULT_ORDER)
}

pub fn builtin_family_with_order(
    name: &str,
    params: &[f64],
    order: usize,
) -> Result<PhaseFunction, PhaseError> {
    let bad = |why: &str| Err(PhaseError::UnsafeParams(name.to_string(), why.to_string()));
    let order = order.max(2);
    let kind = match name {
        "saddle" => {
            if !params.is_empty() {
                return bad("saddle takes no parameters");
            }
            Kind::Saddle
        }
        "cubic-x" => {
            let c = match params {
                [] => 1e-6,
                [c] => *c,
                _ => return bad("expected [c]"),
            };
            if !c.is_finite() || 6.0 * c.abs() > HYP_BOUND {
                return bad("need |c| <= 1e-5/6");
            }
            Kind::CubicX { c }
        }
        "mixed-quartic" => {
            let c = match params {
                [] => 1e-6,
                [c] => *c,
                _ => return bad("expected [c]"),
            };
            if !c.is_finite() || 8.0 * c.abs() > HYP_BOUND {
                return bad("need |c| <= 1.25e-6");
            }
            Kind::MixedQuartic { c }
        }
        "trig" => {
            let (c, a) = match params {
                [] => (2e-6, 1.0),
                [c] => (*c, 1.0),
                [c, a] => (*c, *a),
                _ => return bad("expected [c, a]"),
            };
            if !(a > 0.0 && a <= 4.0) || !c.is_finite() {
                return bad("need 0 < a <= 4");
            }
            if 4.0 * c.abs() * a.max(1.0).powi(order as i32) > HYP_BOUND {
                return bad("need 4|c| max(1,a)^M <= 1e-5");
            }
            Kind::Trig { c, a }
        }
        other => return Err(PhaseError::UnknownFamily(other.to_string())),
    };
    let label = if params.is_empty() {
        name.to_string()
    } else {
        let ps: Vec<String> = params.iter().map(|p| format!("{p:e}")).collect();
        format!("{name}[{}]", ps.join(","))
    };
    Ok(PhaseFunction { order, label, kind })
}
