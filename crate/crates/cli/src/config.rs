//! Key-value experiment configuration.
//!
//! One `key = value` per line; `#` starts a comment. Lists are
//! comma-separated. Unknown keys are rejected so typos do not silently fall
//! back to defaults.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use hyprest::extension::FreqGrid;
use hyprest::rects::FamilyParams;
use hyprest::phase::builtin_family_with_order;
use hyprest::{Amplitude, Complex64, PhaseFunction};
use serde::Serialize;

/// Every accepted key with its default.
pub const KEYS: &[(&str, &str)] = &[
    ("phase", "saddle"),
    ("phase_params", ""),
    ("order", "8"),
    ("validate_step", "0.0078125"),
    ("geometry_n", "17"),
    ("k", "128"),
    ("mu", "1"),
    ("eps", "0.05"),
    ("eps_prime", "0.1"),
    ("alpha", "K^-eps"),
    ("c", "40"),
    ("c_prime", "64"),
    ("c_big", "4"),
    ("r", "64"),
    ("r_list", "16,32,64"),
    ("p", "3.25"),
    ("grid_n", "9"),
    ("quad_tol", "1e-8"),
    ("density", "one"),
    ("cap", "100,150"),
    ("function", "poly"),
    ("function_params", "-0.3,0,1"),
    ("lambda", "0.1"),
    ("smoothness", "2"),
    ("thicken", "0"),
    ("cover_family", "column"),
    ("cover_index", "0"),
    ("cover_size", "40"),
    ("strips", "5"),
    ("xi_samples", "20"),
    ("xi_radius", "64"),
    ("rescale_tol", "1e-6"),
    ("delta", "0.1"),
    ("packet_samples", "12"),
    ("recon_grid", "9"),
    ("recon_tol", "1e-3"),
    ("energy_bound", "4"),
    ("out", "out"),
];

#[derive(Debug, Clone, Serialize)]
#[serde(transparent)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Default for Config {
    fn default() -> Self {
        Config { values: KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect() }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("line {}: expected key = value", n + 1))?;
            let k = k.trim();
            if !cfg.values.contains_key(k) {
                bail!("line {}: unknown key `{k}`", n + 1);
            }
            cfg.values.insert(k.to_string(), v.trim().to_string());
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Config::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn str(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("no default for {key}"))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let v = self.str(key);
        v.parse().with_context(|| format!("`{key}`: `{v}` is not a number"))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let v = self.str(key);
        v.parse().with_context(|| format!("`{key}`: `{v}` is not a non-negative integer"))
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>> {
        self.str(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().with_context(|| format!("`{key}`: `{s}` is not a number")))
            .collect()
    }

    pub fn phase(&self) -> Result<PhaseFunction> {
        let params = self.list("phase_params")?;
        let order = self.usize("order")?;
        builtin_family_with_order(self.str("phase"), &params, order)
            .with_context(|| format!("phase `{}` with params {params:?}", self.str("phase")))
    }

    pub fn k(&self) -> Result<u32> {
        let k = self.usize("k")?;
        u32::try_from(k).context("`k` too large")
    }

    pub fn family_params(&self) -> Result<FamilyParams> {
        let mut p = FamilyParams::new(self.k()?, self.f64("mu")?, self.f64("eps_prime")?);
        p.c = self.f64("c")?;
        p.c_prime = self.f64("c_prime")?;
        p.c_big = self.f64("c_big")?;
        Ok(p)
    }

    /// α, either a number or `K^-eps`.
    pub fn alpha(&self) -> Result<f64> {
        match self.str("alpha") {
            "K^-eps" => Ok((self.k()? as f64).powf(-self.f64("eps")?)),
            _ => self.f64("alpha"),
        }
    }

    pub fn grid(&self, r: f64) -> Result<FreqGrid> {
        Ok(FreqGrid::cube_n(r, self.usize("grid_n")?))
    }

    /// `one`, `smooth` (1 + 0.3x + 0.5iy) or `cap` (indicator of the cap `cap = i,j`).
    pub fn density(&self, caps: Option<&[hyprest::Cap]>) -> Result<Amplitude> {
        match self.str("density") {
            "one" => Ok(Amplitude::constant(1.0)),
            "smooth" => Ok(Amplitude::from_fn(|z| Complex64::new(1.0 + 0.3 * z[0], 0.5 * z[1]))),
            "cap" => {
                let ij = self.list("cap")?;
                if ij.len() != 2 {
                    bail!("`cap` needs i,j");
                }
                let owned;
                let caps = match caps {
                    Some(c) => c,
                    None => {
                        owned = hyprest::make_caps(self.k()?, self.f64("mu")?)?;
                        &owned[..]
                    }
                };
                let cap = caps
                    .iter()
                    .find(|c| c.i as f64 == ij[0] && c.j as f64 == ij[1])
                    .ok_or_else(|| anyhow!("no cap ({}, {}) at K = {}", ij[0], ij[1], self.str("k")))?;
                Ok(Amplitude::on_rect(cap.bounds, hyprest::Density::Const(Complex64::new(1.0, 0.0))))
            }
            other => bail!("unknown density `{other}` (one, smooth, cap)"),
        }
    }

    pub fn out_dir(&self) -> &str {
        self.str("out")
    }
}
