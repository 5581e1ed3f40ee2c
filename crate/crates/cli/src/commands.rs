//! One function per subcommand. Each writes its artifacts and returns the
//! JSON result together with the pass flag.

use anyhow::{bail, Context, Result};
use hyprest::extension::{broad_field, growth_sweep, loglog_slope, Label};
use hyprest::hypgeo::{gamma2, gamma2_factored, strongly_separated, t_funcs};
use hyprest::rects::{closure, geometric_cover, Family};
use hyprest::rescale::{norm_relations, phi_s, scaling_identity_check};
use hyprest::sublevel::{sublevel_decompose, thickened_decompose, IntervalDecomposition, ScanOptions};
use hyprest::wavepacket::{decompose, packet_checks, reconstruction};
use hyprest::{build_family, frame, validate_hyp, Cap, FreqGrid, RescaleData, StripKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::Config;
use crate::output::{num, to_value, Output};

pub struct Outcome {
    pub pass: bool,
    pub result: Value,
}

/// Tolerance of the algebraic identity residuals in `geometry-report`.
const IDENTITY_TOL: f64 = 1e-12;

/// Tolerance of the L² norm relation in `rescale-check`.
const NORM_TOL: f64 = 1e-10;

pub fn validate_phase(cfg: &Config, out: &Output) -> Result<Outcome> {
    let phi = cfg.phase()?;
    let rep = validate_hyp(&phi, cfg.f64("validate_step")?);
    let rows: Vec<Vec<String>> = rep.max_by_order.iter().map(|(o, m)| vec![o.to_string(), num(*m)]).collect();
    let csv = out.csv("orders.csv", &["order", "max_abs_derivative"], rows)?;
    Ok(Outcome { pass: rep.pass, result: json!({ "report": to_value(&rep)?, "orders_csv": csv }) })
}

pub fn geometry_report(cfg: &Config, out: &Output, seed: u64) -> Result<Outcome> {
    let phi = cfg.phase()?;
    let n = cfg.usize("geometry_n")?.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n * n);
    let mut worst = [0.0f64; 4];
    for b in 0..n {
        for a in 0..n {
            let z = [-1.0 + 2.0 * a as f64 / (n - 1) as f64, -1.0 + 2.0 * b as f64 / (n - 1) as f64];
            let f = frame(&phi, z)?;
            let det_res = (f.det_t() - f.q / f.h.sqrt()).abs();
            let [xx, xy, yy] = phi.hess(z);
            let h = [[xx, xy], [xy, yy]];
            let mut nf_res = 0.0f64;
            for r in 0..2 {
                for c in 0..2 {
                    let v: f64 = (0..2).flat_map(|p| (0..2).map(move |q| (p, q))).map(|(p, q)| f.t[p][r] * h[p][q] * f.t[q][c]).sum();
                    let want = if r == c { 0.0 } else { f.q };
                    nf_res = nf_res.max((v - want).abs());
                }
            }
            let z1 = [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)];
            let z2 = [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)];
            let (t1, t2) = t_funcs(&phi, z, z1, z2)?;
            let (s1, s2) = t_funcs(&phi, z, z2, z1)?;
            let anti = (t1 + s1).abs().max((t2 + s2).abs());
            let g = gamma2(&phi, z, z1, z2)?;
            let fac = (g - gamma2_factored(&phi, z, z1, z2)?).abs() / g.abs().max(1.0);
            for (w, v) in worst.iter_mut().zip([det_res, nf_res, anti, fac]) {
                *w = w.max(v);
            }
            rows.push(
                [z[0], z[1], f.h, f.a, f.b, f.q, f.det_t(), det_res, nf_res, anti, fac].iter().map(|v| num(*v)).collect::<Vec<_>>(),
            );
        }
    }
    let csv = out.csv(
        "frames.csv",
        &["x", "y", "h", "a", "b", "q", "det_t", "det_residual", "normal_form_residual", "antisymmetry_residual", "factorization_residual"],
        rows,
    )?;
    let pass = worst.iter().all(|w| *w <= IDENTITY_TOL);
    Ok(Outcome {
        pass,
        result: json!({
            "points": n * n,
            "max_det_residual": worst[0],
            "max_normal_form_residual": worst[1],
            "max_antisymmetry_residual": worst[2],
            "max_factorization_residual": worst[3],
            "tolerance": IDENTITY_TOL,
            "frames_csv": csv,
        }),
    })
}

/// Test function g, its r-th derivative bound on [−1, 1] and a label.
fn sublevel_function(cfg: &Config) -> Result<(Box<dyn Fn(f64) -> f64>, f64, String)> {
    let params = cfg.list("function_params")?;
    let r = cfg.usize("smoothness")?.max(1);
    match cfg.str("function") {
        "poly" => {
            if params.is_empty() {
                bail!("`function_params` must list polynomial coefficients c0, c1, ...");
            }
            // coefficients of the r-th derivative
            let mut d = params.clone();
            for _ in 0..r {
                d = d.iter().enumerate().skip(1).map(|(i, c)| i as f64 * c).collect();
            }
            let eval = |c: &[f64], t: f64| c.iter().rev().fold(0.0, |acc, v| acc * t + v);
            let c_r = (0..=4000).map(|i| eval(&d, -1.0 + i as f64 / 2000.0).abs()).fold(0.0, f64::max);
            let p = params.clone();
            Ok((Box::new(move |t| eval(&p, t)), c_r, format!("poly{params:?}")))
        }
        "sin" => {
            let (a, amp) = match params[..] {
                [a] => (a, 1.0),
                [a, amp] => (a, amp),
                _ => bail!("`sin` takes a or a,amplitude"),
            };
            Ok((Box::new(move |t| amp * (a * t).sin()), amp * a.abs().powi(r as i32), format!("{amp}·sin({a}t)")))
        }
        other => bail!("unknown function `{other}` (poly, sin)"),
    }
}

fn grid_check(g: &dyn Fn(f64) -> f64, d: &IntervalDecomposition, lam: f64, upper: f64) -> (bool, bool) {
    let n = (2.0 / (lam / 100.0)).ceil() as usize;
    let (mut lower_ok, mut upper_ok) = (true, true);
    for i in 0..=n {
        let t = -1.0 + 2.0 * i as f64 / n as f64;
        let v = g(t).abs();
        let inside = d.contains(t);
        lower_ok &= !(v < lam && !inside);
        upper_ok &= !(inside && v >= upper);
    }
    (lower_ok, upper_ok)
}

pub fn sublevel(cfg: &Config, out: &Output) -> Result<Outcome> {
    let (g, c_r, label) = sublevel_function(cfg)?;
    let r = cfg.usize("smoothness")?.max(1) as u32;
    let lam = cfg.f64("lambda")?;
    let thick = cfg.f64("thicken")?;
    let opts = ScanOptions::default();
    let d = if thick > 0.0 {
        thickened_decompose(&*g, (-1.0, 1.0), r, c_r, lam, thick, opts)?
    } else {
        sublevel_decompose(&*g, (-1.0, 1.0), r, c_r, lam, opts)?
    };
    let (lower_ok, upper_ok) = grid_check(&*g, &d, lam, (8.0 + thick) * lam);
    let card_ok = d.intervals.len() as f64 <= d.sublevel_bound();
    let length_ok = thick == 0.0 || d.intervals.iter().all(|i| i.len() >= (thick * lam).min(2.0) - 1e-12);
    let rows: Vec<Vec<String>> = d.intervals.iter().map(|i| vec![num(i.lo), num(i.hi), format!("{:?}", i.tag)]).collect();
    let csv = out.csv("intervals.csv", &["lo", "hi", "tag"], rows)?;
    let pass = lower_ok && upper_ok && card_ok && length_ok && d.is_disjoint();
    Ok(Outcome {
        pass,
        result: json!({
            "function": label,
            "c_r": c_r,
            "decomposition": to_value(&d)?,
            "cardinality": d.intervals.len(),
            "cardinality_bound": d.sublevel_bound(),
            "contains_sublevel_set": lower_ok,
            "inside_upper_level": upper_ok,
            "cardinality_ok": card_ok,
            "length_ok": length_ok,
            "intervals_csv": csv,
        }),
    })
}

fn cover_family(cfg: &Config, fam: &Family, phi: &hyprest::PhaseFunction, seed: u64) -> Result<Vec<Cap>> {
    let p = &fam.params;
    let n = 2 * p.k as usize;
    let idx = cfg.usize("cover_index")?;
    let caps = &fam.caps;
    Ok(match cfg.str("cover_family") {
        "single" => vec![caps.get(idx).context("`cover_index` outside the cap grid")?.clone()],
        "column" => caps.iter().filter(|c| c.i as usize == idx.min(n - 1)).cloned().collect(),
        "row" => caps.iter().filter(|c| c.j as usize == idx.min(n - 1)).cloned().collect(),
        "greedy" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let seed_cap = idx.min(caps.len() - 1);
            let mut cand: Vec<usize> = (0..caps.len())
                .filter(|&i| i != seed_cap)
                .filter(|&i| !strongly_separated(phi, &caps[seed_cap], &caps[i], p.mu, p.k).unwrap_or(true))
                .collect();
            for i in (1..cand.len()).rev() {
                cand.swap(i, rng.gen_range(0..=i));
            }
            let limit = cfg.usize("cover_size")?.max(1);
            let mut chosen = vec![caps[seed_cap].clone()];
            for i in cand {
                if chosen.len() >= limit {
                    break;
                }
                if chosen.iter().all(|c| !strongly_separated(phi, c, &caps[i], p.mu, p.k).unwrap_or(true)) {
                    chosen.push(caps[i].clone());
                }
            }
            chosen
        }
        other => bail!("unknown cover_family `{other}` (single, column, row, greedy)"),
    })
}

pub fn cover(cfg: &Config, out: &Output, seed: u64) -> Result<Outcome> {
    let phi = cfg.phase()?;
    let fam = build_family(&phi, cfg.family_params()?)?;
    let f = cover_family(cfg, &fam, &phi, seed)?;
    let rep = geometric_cover(&phi, &fam, &f)?;
    let family_path = out.path("family.json");
    let strips = json!({
        "schema_version": crate::output::SCHEMA_VERSION,
        "params": to_value(&fam.params)?,
        "strips": to_value(&fam.strips)?,
    });
    std::fs::write(&family_path, serde_json::to_string(&crate::output::fixed_precision(strips))? + "\n")?;
    let members: Vec<Value> = rep.members.iter().map(|&m| to_value(&fam.strips[m])).collect::<Result<_>>()?;
    let pass = rep.covered && rep.members.len() as f64 <= rep.size_bound;
    Ok(Outcome {
        pass,
        result: json!({
            "family_size": fam.strips.len(),
            "counts": {
                "a_strips": fam.count(StripKind::AStrip),
                "b_strips": fam.count(StripKind::BStrip),
                "big_caps": fam.count(StripKind::BigCap),
            },
            "f_size": f.len(),
            "report": to_value(&rep)?,
            "l0": members,
            "family_json": family_path,
        }),
    })
}

pub fn rescale_check(cfg: &Config, out: &Output, seed: u64) -> Result<Outcome> {
    let phi = cfg.phase()?;
    let params = cfg.family_params()?;
    let fam = build_family(&phi, params)?;
    let a: Vec<_> = fam.strips.iter().filter(|s| s.kind == StripKind::AStrip).collect();
    let count = cfg.usize("strips")?.clamp(1, a.len().max(1));
    if a.is_empty() {
        bail!("the family has no A-strips");
    }
    let f = cfg.density(Some(&fam.caps))?;
    let quad_tol = cfg.f64("quad_tol")?;
    let rad = cfg.f64("xi_radius")?;
    let n_xi = cfg.usize("xi_samples")?;
    let tol = cfg.f64("rescale_tol")?;
    let step = cfg.f64("validate_step")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut per_strip = Vec::new();
    let (mut max_rel, mut max_norm, mut all_valid) = (0.0f64, 0.0f64, true);
    for q in 0..count {
        let idx = (q * a.len()) / count + a.len() / (2 * count);
        let strip = a[idx.min(a.len() - 1)];
        let rd = RescaleData::from_strip(&phi, strip, params.k)?;
        let valid = validate_hyp(&phi_s(&phi, &rd), step);
        let xis: Vec<[f64; 3]> = (0..n_xi).map(|_| std::array::from_fn(|_| rng.gen_range(-rad..=rad))).collect();
        let rep = scaling_identity_check(&phi, &f, &rd, &xis, quad_tol)?;
        let nr = norm_relations(&f, &rd);
        for s in &rep.samples {
            rows.push(vec![q.to_string(), num(s.xi[0]), num(s.xi[1]), num(s.xi[2]), num(s.lhs), num(s.rhs), num(s.rel_err)]);
        }
        max_rel = max_rel.max(rep.max_rel_err);
        max_norm = max_norm.max(nr.rel_err);
        all_valid &= valid.pass;
        per_strip.push(json!({
            "strip": to_value(strip)?,
            "max_rel_err": rep.max_rel_err,
            "normal_form_residual": rd.normal_form_residual(&phi),
            "phi_s_valid": valid.pass,
            "phi_s_failures": valid.failures,
            "norms": to_value(&nr)?,
        }));
    }
    let csv = out.csv("samples.csv", &["strip", "xi1", "xi2", "xi3", "lhs", "rhs", "rel_err"], rows)?;
    let pass = max_rel <= tol && max_norm <= NORM_TOL && all_valid;
    Ok(Outcome {
        pass,
        result: json!({
            "max_rel_err": max_rel,
            "tolerance": tol,
            "max_norm_rel_err": max_norm,
            "norm_tolerance": NORM_TOL,
            "phi_s_all_valid": all_valid,
            "strips": per_strip,
            "samples_csv": csv,
        }),
    })
}

fn weighted_lp(grid: &FreqGrid, vals: &[f64], p: f64) -> f64 {
    vals.iter().enumerate().map(|(i, v)| v.powf(p) * grid.weight(i)).sum::<f64>().powf(1.0 / p)
}

pub fn extension_run(cfg: &Config, out: &Output) -> Result<Outcome> {
    let phi = cfg.phase()?;
    let fam = build_family(&phi, cfg.family_params()?)?;
    let cl = closure(&fam);
    let f = cfg.density(Some(&fam.caps))?;
    let alpha = cfg.alpha()?;
    let p = cfg.f64("p")?;
    let quad_tol = cfg.f64("quad_tol")?;
    let r_list = cfg.list("r_list")?;
    if r_list.is_empty() {
        bail!("`r_list` is empty");
    }
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let (mut full, mut broad) = (Vec::new(), Vec::new());
    let mut last = None;
    for &r in &r_list {
        let grid = cfg.grid(r)?;
        let bf = broad_field(&phi, &f, &fam.caps, &fam, &cl, alpha, &grid, quad_tol)?;
        let br = bf.br(alpha);
        let full_norm = weighted_lp(&grid, &bf.abs, p);
        let br_norm = weighted_lp(&grid, &br, p);
        let frac = bf.mask(alpha).iter().filter(|&&b| b).count() as f64 / grid.len() as f64;
        rows.push(vec![num(r), grid.len().to_string(), num(full_norm), num(br_norm), num(frac)]);
        summary.push(json!({ "r": r, "grid_points": grid.len(), "norm": full_norm, "br_norm": br_norm, "broad_fraction": frac }));
        full.push(full_norm);
        broad.push(br_norm);
        last = Some((grid, bf, br));
    }
    let norms = out.csv("norms.csv", &["r", "grid_points", "lp_norm", "br_lp_norm", "broad_fraction"], rows)?;
    let (grid, bf, br) = last.expect("r_list is nonempty");
    let labels = hyprest::extension::abc_partition(&bf, alpha);
    let mask = bf.mask(alpha);
    let field_rows = (0..grid.len()).map(|i| {
        let xi = grid.point(i);
        let label = match labels[i] {
            Label::A => "A",
            Label::B => "B",
            Label::C => "C",
        };
        vec![num(xi[0]), num(xi[1]), num(xi[2]), num(bf.abs[i]), num(br[i]), mask[i].to_string(), label.to_string()]
    });
    let field = out.csv("field.csv", &["xi1", "xi2", "xi3", "abs", "br", "broad", "label"], field_rows)?;
    let pass = full.iter().chain(&broad).all(|v| v.is_finite());
    Ok(Outcome {
        pass,
        result: json!({
            "p": p,
            "alpha": alpha,
            "rows": summary,
            "slope": loglog_slope(&r_list, &full),
            "br_slope": loglog_slope(&r_list, &broad),
            "norms_csv": norms,
            "field_csv": field,
        }),
    })
}

pub fn wavepacket_check(cfg: &Config, out: &Output, seed: u64) -> Result<Outcome> {
    let phi = cfg.phase()?;
    let f = cfg.density(None)?;
    let r = cfg.f64("r")?;
    let wp = decompose(&phi, &f, r, cfg.f64("delta")?)?;
    let rec = reconstruction(&phi, &f, &wp, cfg.usize("recon_grid")?, cfg.f64("quad_tol")?)?;
    let chk = packet_checks(&wp, &phi, &f, cfg.usize("packet_samples")?, seed)?;
    let mut per_theta = vec![(0usize, 0.0f64); wp.thetas.len()];
    for p in &wp.packets {
        per_theta[p.theta].0 += 1;
        per_theta[p.theta].1 += p.coef.norm_sqr();
    }
    let rows = wp.thetas.iter().zip(&per_theta).map(|(t, (n, e))| {
        vec![t.i.to_string(), t.j.to_string(), num(t.center[0]), num(t.center[1]), n.to_string(), num(*e)]
    });
    let csv = out.csv("thetas.csv", &["i", "j", "cx", "cy", "packets", "sum_abs_coef_sq"], rows)?;
    let recon_tol = cfg.f64("recon_tol")?;
    let energy_bound = cfg.f64("energy_bound")?;
    let pass = rec.rel_l2_error <= recon_tol && chk.pass(energy_bound);
    Ok(Outcome {
        pass,
        result: json!({
            "r": r,
            "delta": wp.delta,
            "thetas": wp.thetas.len(),
            "packets": wp.packets.len(),
            "reconstruction": to_value(&rec)?,
            "reconstruction_tolerance": recon_tol,
            "checks": to_value(&chk)?,
            "energy_bound": energy_bound,
            "thetas_csv": csv,
        }),
    })
}

pub fn broad_experiment(cfg: &Config, out: &Output) -> Result<Outcome> {
    let phi = cfg.phase()?;
    let fam = build_family(&phi, cfg.family_params()?)?;
    let cl = closure(&fam);
    let f = cfg.density(Some(&fam.caps))?;
    let alpha = cfg.alpha()?;
    let table = growth_sweep(
        &phi,
        &f,
        cfg.f64("p")?,
        &cfg.list("r_list")?,
        &fam.caps,
        &fam,
        &cl,
        alpha,
        cfg.usize("grid_n")?,
        cfg.f64("quad_tol")?,
    )?;
    let rows = table.rows.iter().map(|r| {
        vec![phi.label().to_string(), num(r.r), r.grid_points.to_string(), num(r.br_norm), num(r.full_norm), num(r.broad_fraction)]
    });
    let csv = out.csv("growth.csv", &["phase", "r", "grid_points", "br_norm", "full_norm", "broad_fraction"], rows)?;
    let pass = table.slope.is_some_and(f64::is_finite);
    Ok(Outcome { pass, result: json!({ "table": to_value(&table)?, "growth_csv": csv }) })
}
