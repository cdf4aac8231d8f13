use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::anderson::{AndersonConfig, AndersonMode};
use crate::constitutive::{PorosityLaw, VanGenuchten};
use crate::error::{Error, Result};
use crate::fem::RectMesh;
use crate::poromech::{lame_parameters, PhysicsParams, Scenario};
use crate::schemes::SchemeConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Test1,
    Test2,
    /// Test-I defaults, meant to be overridden in `[physics]`.
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub inflow_width: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            nx: 25,
            ny: 25,
            lx: 1.0,
            ly: 1.0,
            inflow_width: 0.2,
        }
    }
}

impl GridConfig {
    pub fn mesh(&self) -> Result<RectMesh> {
        RectMesh::new(self.nx, self.ny, self.lx, self.ly, self.inflow_width)
    }
}

/// Fully validated sweep description.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub grid: GridConfig,
    /// Physics with the Biot coefficient of the first sweep entry.
    pub base: Scenario,
    pub schemes: Vec<SchemeConfig>,
    pub depths: Vec<usize>,
    pub alphas: Vec<f64>,
    pub anderson_mode: AndersonMode,
    pub output_dir: PathBuf,
    /// Write the final fields of every combination as CSV and VTK.
    pub export_fields: bool,
}

impl ScenarioConfig {
    /// Defaults of the named scenario with the default sweep grid.
    pub fn defaults(kind: ScenarioKind) -> Self {
        let base = match kind {
            ScenarioKind::Test2 => Scenario::test_two(1.0),
            _ => Scenario::test_one(1.0),
        };
        ScenarioConfig {
            scenario: kind,
            grid: GridConfig::default(),
            base,
            schemes: vec![
                SchemeConfig::newton(),
                SchemeConfig::fs_newton(),
                SchemeConfig::fs_mp(),
                SchemeConfig::fsl(),
                SchemeConfig::fsl_half(),
            ],
            depths: vec![0, 1, 3, 5, 10],
            alphas: vec![0.1, 0.5, 1.0],
            anderson_mode: AndersonMode::Windowed,
            output_dir: PathBuf::from("out"),
            export_fields: false,
        }
    }

    pub fn scenario_for(&self, alpha: f64) -> Scenario {
        let mut s = self.base;
        s.params.law.alpha = alpha;
        s
    }

    pub fn anderson(&self, depth: usize) -> AndersonConfig {
        AndersonConfig {
            mode: self.anderson_mode,
            ..AndersonConfig::windowed(depth)
        }
    }

    pub fn n_steps(&self) -> usize {
        self.base.params.n_steps()
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema: Option<u32>,
    scenario: Option<ScenarioKind>,
    output_dir: Option<PathBuf>,
    export_fields: Option<bool>,
    grid: Option<RawGrid>,
    physics: Option<RawPhysics>,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    nx: Option<usize>,
    ny: Option<usize>,
    lx: Option<f64>,
    ly: Option<f64>,
    inflow_width: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPhysics {
    young: Option<f64>,
    poisson: Option<f64>,
    p0: Option<f64>,
    phi0: Option<f64>,
    a_vg: Option<f64>,
    n_vg: Option<f64>,
    kappa: Option<f64>,
    mu_w: Option<f64>,
    inv_n: Option<f64>,
    derivative_cap: Option<f64>,
    rho_w: Option<f64>,
    rho_b: Option<f64>,
    gravity: Option<[f64; 2]>,
    q_star: Option<f64>,
    final_time: Option<f64>,
    tau: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    schemes: Option<Vec<String>>,
    depths: Option<Vec<usize>>,
    alphas: Option<Vec<f64>>,
    anderson: Option<RawMode>,
    max_iters: Option<usize>,
    eps_abs: Option<f64>,
    eps_rel: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RawMode {
    Windowed,
    Restarted,
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(key, format!("must be positive, got {v}")))
    }
}

fn finite(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(key, "must be finite"))
    }
}

/// Parses a config from TOML text. Omitted keys take the scenario defaults.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<root>", e.to_string()))?;
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." {
            "<root>".to_string()
        } else {
            path
        };
        Error::config(key, e.into_inner().message().to_string())
    })?;
    build(raw)
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

fn build(raw: RawConfig) -> Result<ScenarioConfig> {
    if let Some(v) = raw.schema {
        if v != SCHEMA_VERSION {
            return Err(Error::config(
                "schema",
                format!("unsupported version {v}, expected {SCHEMA_VERSION}"),
            ));
        }
    }
    let mut cfg = ScenarioConfig::defaults(raw.scenario.unwrap_or(ScenarioKind::Test1));
    if let Some(dir) = raw.output_dir {
        if dir.as_os_str().is_empty() {
            return Err(Error::config("output_dir", "must not be empty"));
        }
        cfg.output_dir = dir;
    }
    cfg.export_fields = raw.export_fields.unwrap_or(false);

    let g = raw.grid.unwrap_or_default();
    let grid = &mut cfg.grid;
    for (key, src, dst) in [
        ("grid.nx", g.nx, &mut grid.nx),
        ("grid.ny", g.ny, &mut grid.ny),
    ] {
        if let Some(v) = src {
            if v == 0 {
                return Err(Error::config(key, "must be at least 1"));
            }
            *dst = v;
        }
    }
    for (key, src, dst) in [
        ("grid.lx", g.lx, &mut grid.lx),
        ("grid.ly", g.ly, &mut grid.ly),
        ("grid.inflow_width", g.inflow_width, &mut grid.inflow_width),
    ] {
        if let Some(v) = src {
            *dst = positive(key, v)?;
        }
    }
    grid.mesh()
        .map_err(|e| Error::config("grid.inflow_width", e.to_string()))?;

    apply_physics(&mut cfg.base, raw.physics.unwrap_or_default())?;

    let s = raw.sweep.unwrap_or_default();
    if let Some(alphas) = s.alphas {
        for (k, &a) in alphas.iter().enumerate() {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::config(
                    format!("sweep.alphas[{k}]"),
                    format!("Biot coefficient must lie in [0, 1], got {a}"),
                ));
            }
        }
        cfg.alphas = alphas;
    }
    if let Some(depths) = s.depths {
        cfg.depths = depths;
    }
    if let Some(mode) = s.anderson {
        cfg.anderson_mode = match mode {
            RawMode::Windowed => AndersonMode::Windowed,
            RawMode::Restarted => AndersonMode::Restarted,
        };
    }
    if let Some(names) = s.schemes {
        cfg.schemes = names
            .iter()
            .enumerate()
            .map(|(k, n)| {
                SchemeConfig::from_label(n).ok_or_else(|| {
                    Error::config(
                        format!("sweep.schemes[{k}]"),
                        format!("unknown scheme `{n}`"),
                    )
                })
            })
            .collect::<Result<_>>()?;
    }
    for sc in &mut cfg.schemes {
        if let Some(m) = s.max_iters {
            if m == 0 {
                return Err(Error::config("sweep.max_iters", "must be at least 1"));
            }
            sc.max_iters = m;
        }
        if let Some(e) = s.eps_abs {
            sc.eps_abs = positive("sweep.eps_abs", e)?;
        }
        if let Some(e) = s.eps_rel {
            sc.eps_rel = positive("sweep.eps_rel", e)?;
        }
        sc.validate()
            .map_err(|e| Error::config("sweep.schemes", e.to_string()))?;
    }
    if let Some(&a) = cfg.alphas.first() {
        cfg.base.params.law.alpha = a;
    }
    Ok(cfg)
}

fn apply_physics(base: &mut Scenario, raw: RawPhysics) -> Result<()> {
    let p = &mut base.params;
    if raw.young.is_some() || raw.poisson.is_some() {
        let young = positive("physics.young", raw.young.unwrap_or(30.0))?;
        let poisson = raw.poisson.unwrap_or(0.2);
        let (mu, lambda) = lame_parameters(young, poisson)
            .map_err(|e| Error::config("physics.poisson", e.to_string()))?;
        p.mu = mu;
        p.lambda = lambda;
    }
    if let Some(v) = raw.p0 {
        base.p0 = finite("physics.p0", v)?;
    }
    let vg = &mut p.vg;
    for (key, src, dst) in [
        ("physics.a_vg", raw.a_vg, &mut vg.a_vg),
        ("physics.kappa", raw.kappa, &mut vg.kappa),
        ("physics.mu_w", raw.mu_w, &mut vg.mu_w),
        (
            "physics.derivative_cap",
            raw.derivative_cap,
            &mut vg.derivative_cap,
        ),
    ] {
        if let Some(v) = src {
            *dst = positive(key, v)?;
        }
    }
    if let Some(n) = raw.n_vg {
        if !(n > 1.0 && n.is_finite()) {
            return Err(Error::config(
                "physics.n_vg",
                format!("must exceed 1, got {n}"),
            ));
        }
        vg.n_vg = n;
    }
    VanGenuchten::validate(vg).map_err(|e| Error::config("physics", e.to_string()))?;
    if let Some(v) = raw.phi0 {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::config(
                "physics.phi0",
                format!("must lie in (0, 1), got {v}"),
            ));
        }
        p.law.phi0 = v;
    }
    if let Some(v) = raw.inv_n {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::config(
                "physics.inv_n",
                format!("must be non-negative, got {v}"),
            ));
        }
        p.law.inv_n = v;
    }
    PorosityLaw::new(p.law.phi0, p.law.alpha, p.law.inv_n)
        .map_err(|e| Error::config("physics", e.to_string()))?;
    for (key, src, dst) in [
        ("physics.rho_w", raw.rho_w, &mut p.rho_w),
        ("physics.rho_b", raw.rho_b, &mut p.rho_b),
    ] {
        if let Some(v) = src {
            *dst = positive(key, v)?;
        }
    }
    if let Some(g) = raw.gravity {
        finite("physics.gravity", g[0])?;
        finite("physics.gravity", g[1])?;
        p.gravity = g;
    }
    if let Some(v) = raw.q_star {
        p.q_star = finite("physics.q_star", v)?;
    }
    if let Some(v) = raw.tau {
        p.tau = positive("physics.tau", v)?;
    }
    if let Some(v) = raw.final_time {
        p.final_time = positive("physics.final_time", v)?;
    }
    if p.final_time < p.tau {
        return Err(Error::config(
            "physics.final_time",
            format!(
                "final time {} is shorter than the step {}",
                p.final_time, p.tau
            ),
        ));
    }
    PhysicsParams::validate(p).map_err(|e| Error::config("physics", e.to_string()))
}
