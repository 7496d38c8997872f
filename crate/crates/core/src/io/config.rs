//! INI-style run configuration.
//!
//! ```text
//! # comment
//! [mesh]
//! nx = 16
//! [dg]
//! scheme = sipg
//! ```
//!
//! Unknown sections and keys are rejected, every error carries its line
//! number, and expressions are parsed while reading.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;

use crate::assembly::{default_sigma0, PenaltyConfig, Scheme};
use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::mesh::Rect;
use crate::model::{
    mms_forcing, Coefficient, DeclaredBounds, ExactSolution, Preset, ProblemSpec,
};
use crate::solver::{Integrator, StepSize, TimeConfig};
use crate::space::MAX_POLY_DEGREE;

#[derive(Clone, Debug, PartialEq)]
pub struct MeshSection {
    pub nx: usize,
    pub ny: usize,
    pub domain: Rect,
}

impl Default for MeshSection {
    fn default() -> Self {
        MeshSection {
            nx: 8,
            ny: 8,
            domain: Rect::unit(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DgSection {
    pub k: usize,
    /// Defaults to SIPG, or NIPG for presets that want no penalty.
    pub scheme: Option<Scheme>,
    /// Defaults to `10 k^2`, or 0 for presets that want no penalty.
    pub sigma0: Option<f64>,
    pub beta0: f64,
}

impl Default for DgSection {
    fn default() -> Self {
        DgSection {
            k: 1,
            scheme: None,
            sigma0: None,
            beta0: 1.0,
        }
    }
}

/// Custom problem data. Absent coefficients are zero, absent `u0` is zero.
/// With `exact` given and `E` absent the manufactured forcing is generated.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelSection {
    pub kx: Option<Expr>,
    pub ky: Option<Expr>,
    pub c: Option<Expr>,
    pub e: Option<Expr>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub emission: Option<Expr>,
    pub chemistry: Option<Expr>,
    pub u0: Option<Expr>,
    pub exact: Option<Expr>,
    pub diffusion_bounds: Option<(f64, f64)>,
    pub wind_bounds: Option<(f64, f64)>,
    pub lipschitz: Option<f64>,
    pub state_interval: Option<(f64, f64)>,
}

impl ModelSection {
    fn is_empty(&self) -> bool {
        *self == ModelSection::default()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeSection {
    pub integrator: Integrator,
    pub dt: StepSize,
    /// Defaults to the preset's final time, or 1.
    pub final_time: Option<f64>,
    pub safety: f64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub linear_tol: f64,
    pub startup_steps: usize,
}

impl Default for TimeSection {
    fn default() -> Self {
        let t = TimeConfig::new(Integrator::SspRk3, StepSize::Auto, 0.0);
        TimeSection {
            integrator: t.integrator,
            dt: t.dt,
            final_time: None,
            safety: t.safety,
            picard_tol: t.picard_tol,
            picard_max_iter: t.picard_max_iter,
            linear_tol: t.linear_tol,
            startup_steps: t.startup_steps,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSection {
    pub preset: Option<Preset>,
    pub levels: Vec<usize>,
    pub seed: u64,
    /// Random fields per probe.
    pub samples: usize,
    /// First-level step of implicit convergence studies.
    pub study_dt0: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            preset: None,
            levels: vec![8, 16, 32, 64],
            seed: 0,
            samples: 100,
            study_dt0: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSection {
    pub directory: PathBuf,
    /// Write a field every this many steps; 0 disables field output.
    pub vtk_stride: usize,
    /// Sample observers every this many steps.
    pub observer_stride: usize,
    pub csv: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: PathBuf::from("out"),
            vtk_stride: 1,
            observer_stride: 1,
            csv: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub mesh: MeshSection,
    pub dg: DgSection,
    pub model: ModelSection,
    pub time: TimeSection,
    pub run: RunSection,
    pub output: OutputSection,
}

fn cfg_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn number(line: usize, key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| cfg_err(line, format!("{key}: expected a number, got '{v}'")))?;
    if !x.is_finite() {
        return Err(cfg_err(line, format!("{key}: value must be finite")));
    }
    Ok(x)
}

fn positive(line: usize, key: &str, v: &str) -> Result<f64> {
    let x = number(line, key, v)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(cfg_err(line, format!("{key}: must be positive, got {x}")))
    }
}

fn count(line: usize, key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| cfg_err(line, format!("{key}: expected a non-negative integer, got '{v}'")))
}

fn pair(line: usize, key: &str, v: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok((number(line, key, a)?, number(line, key, b)?)),
        _ => Err(cfg_err(line, format!("{key}: expected 'a, b', got '{v}'"))),
    }
}

fn expression(line: usize, key: &str, v: &str) -> Result<Expr> {
    parse(v).map_err(|e| cfg_err(line, format!("{key}: {e}")))
}

fn boolean(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => Err(cfg_err(line, format!("{key}: expected true or false, got '{v}'"))),
    }
}

/// Parse configuration text; absent keys take their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut section: Option<String> = None;
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    let mut model_line = None;
    let mut preset_line = None;
    let mut domain = [0.0, 1.0, 0.0, 1.0];
    let mut domain_line = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| cfg_err(line, format!("malformed section header '{content}'")))?
                .trim();
            if !["mesh", "dg", "model", "time", "run", "output"].contains(&name) {
                return Err(cfg_err(line, format!("unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| cfg_err(line, format!("expected 'key = value', got '{content}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section
            .as_deref()
            .ok_or_else(|| cfg_err(line, format!("key '{key}' outside any section")))?;
        if key.is_empty() || value.is_empty() {
            return Err(cfg_err(line, format!("expected 'key = value', got '{content}'")));
        }
        if let Some(first) = seen.insert((sec.to_string(), key.to_string()), line) {
            return Err(cfg_err(line, format!("duplicate key '{key}' (first on line {first})")));
        }
        let unknown = || cfg_err(line, format!("unknown key '{key}' in [{sec}]"));
        match sec {
            "mesh" => match key {
                "nx" => cfg.mesh.nx = count(line, key, value)?,
                "ny" => cfg.mesh.ny = count(line, key, value)?,
                "x0" | "x1" | "y0" | "y1" => {
                    let i = ["x0", "x1", "y0", "y1"].iter().position(|k| *k == key).expect("listed key");
                    domain[i] = number(line, key, value)?;
                    domain_line.get_or_insert(line);
                }
                _ => return Err(unknown()),
            },
            "dg" => match key {
                "k" => {
                    let k = count(line, key, value)?;
                    if k > MAX_POLY_DEGREE {
                        return Err(cfg_err(line, format!("k = {k} not supported (maximum {MAX_POLY_DEGREE})")));
                    }
                    cfg.dg.k = k;
                }
                "scheme" => {
                    cfg.dg.scheme = Some(Scheme::from_name(value).ok_or_else(|| {
                        cfg_err(line, format!("scheme must be sipg, nipg or iipg, got '{value}'"))
                    })?)
                }
                "sigma0" => {
                    let s = number(line, key, value)?;
                    if s < 0.0 {
                        return Err(cfg_err(line, "sigma0 must be >= 0"));
                    }
                    cfg.dg.sigma0 = Some(s);
                }
                "beta0" => {
                    let b = number(line, key, value)?;
                    if b < 1.0 {
                        return Err(cfg_err(line, "beta0 must be >= 1"));
                    }
                    cfg.dg.beta0 = b;
                }
                _ => return Err(unknown()),
            },
            "model" => {
                let m = &mut cfg.model;
                if key == "preset" {
                    set_preset(&mut cfg.run, line, value)?;
                    preset_line = cfg.run.preset.map(|_| line);
                    continue;
                }
                match key {
                    "kx" => m.kx = Some(expression(line, key, value)?),
                    "ky" => m.ky = Some(expression(line, key, value)?),
                    "c" => m.c = Some(expression(line, key, value)?),
                    "e" => m.e = Some(expression(line, key, value)?),
                    "k1" => m.k1 = Some(number(line, key, value)?),
                    "k2" => m.k2 = Some(number(line, key, value)?),
                    "E" => m.emission = Some(expression(line, key, value)?),
                    "Q" => m.chemistry = Some(expression(line, key, value)?),
                    "u0" => m.u0 = Some(expression(line, key, value)?),
                    "exact" => m.exact = Some(expression(line, key, value)?),
                    "diffusion_bounds" => m.diffusion_bounds = Some(pair(line, key, value)?),
                    "wind_bounds" => m.wind_bounds = Some(pair(line, key, value)?),
                    "lipschitz" => m.lipschitz = Some(number(line, key, value)?),
                    "state_interval" => m.state_interval = Some(pair(line, key, value)?),
                    _ => return Err(unknown()),
                }
                model_line.get_or_insert(line);
            }
            "time" => match key {
                "integrator" => {
                    cfg.time.integrator = Integrator::from_name(value).ok_or_else(|| {
                        cfg_err(
                            line,
                            format!("integrator must be forward-euler, ssprk3, backward-euler or crank-nicolson, got '{value}'"),
                        )
                    })?
                }
                "dt" => {
                    cfg.time.dt = if value == "auto" {
                        StepSize::Auto
                    } else {
                        StepSize::Fixed(positive(line, key, value)?)
                    }
                }
                "T" => {
                    let t = number(line, key, value)?;
                    if t < 0.0 {
                        return Err(cfg_err(line, "T must be >= 0"));
                    }
                    cfg.time.final_time = Some(t);
                }
                "safety" => cfg.time.safety = positive(line, key, value)?,
                "picard_tol" => cfg.time.picard_tol = positive(line, key, value)?,
                "picard_max_iter" => {
                    cfg.time.picard_max_iter = count(line, key, value)?;
                    if cfg.time.picard_max_iter == 0 {
                        return Err(cfg_err(line, "picard_max_iter must be positive"));
                    }
                }
                "linear_tol" => cfg.time.linear_tol = positive(line, key, value)?,
                "startup_steps" => cfg.time.startup_steps = count(line, key, value)?,
                _ => return Err(unknown()),
            },
            "run" => match key {
                "preset" => {
                    set_preset(&mut cfg.run, line, value)?;
                    preset_line = cfg.run.preset.map(|_| line);
                }
                "levels" => {
                    let levels = value
                        .split(',')
                        .map(|s| count(line, key, s.trim()))
                        .collect::<Result<Vec<_>>>()?;
                    if levels.len() < 3 || levels[0] == 0 || levels.windows(2).any(|w| w[1] != 2 * w[0]) {
                        return Err(cfg_err(line, "levels must be at least three doubling sizes, e.g. 8, 16, 32"));
                    }
                    cfg.run.levels = levels;
                }
                "seed" => {
                    cfg.run.seed = value
                        .parse()
                        .map_err(|_| cfg_err(line, format!("seed: expected an unsigned integer, got '{value}'")))?
                }
                "samples" => {
                    cfg.run.samples = count(line, key, value)?;
                    if cfg.run.samples == 0 {
                        return Err(cfg_err(line, "samples must be positive"));
                    }
                }
                "study_dt0" => cfg.run.study_dt0 = positive(line, key, value)?,
                _ => return Err(unknown()),
            },
            "output" => match key {
                "directory" => cfg.output.directory = PathBuf::from(value),
                "vtk_stride" => cfg.output.vtk_stride = count(line, key, value)?,
                "observer_stride" => {
                    cfg.output.observer_stride = count(line, key, value)?;
                    if cfg.output.observer_stride == 0 {
                        return Err(cfg_err(line, "observer_stride must be positive"));
                    }
                }
                "csv" => cfg.output.csv = boolean(line, key, value)?,
                _ => return Err(unknown()),
            },
            _ => unreachable!("section names are checked"),
        }
    }
    if let Some(line) = domain_line {
        cfg.mesh.domain = Rect::new(domain[0], domain[1], domain[2], domain[3]).map_err(|e| cfg_err(line, e.to_string()))?;
    }
    if cfg.mesh.nx == 0 || cfg.mesh.ny == 0 {
        let line = seen
            .get(&("mesh".into(), "nx".into()))
            .or_else(|| seen.get(&("mesh".into(), "ny".into())))
            .copied()
            .unwrap_or(0);
        return Err(cfg_err(line, "nx and ny must be positive"));
    }
    if let (Some(_), Some(line)) = (preset_line, model_line) {
        return Err(cfg_err(line, "model keys cannot be combined with a preset"));
    }
    Ok(cfg)
}

fn set_preset(run: &mut RunSection, line: usize, value: &str) -> Result<()> {
    if run.preset.is_some() {
        return Err(cfg_err(line, "preset given twice"));
    }
    run.preset = match value {
        "custom" => None,
        name => Some(Preset::from_name(name).ok_or_else(|| {
            cfg_err(
                line,
                format!("unknown preset '{name}' (smooth-mms, polynomial-mms, decay-test, conservation-test, custom)"),
            )
        })?),
    };
    Ok(())
}

fn write_opt<T: fmt::Display>(out: &mut String, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        let _ = writeln!(out, "{key} = {v}");
    }
}

fn write_pair(out: &mut String, key: &str, v: &Option<(f64, f64)>) {
    if let Some((a, b)) = v {
        let _ = writeln!(out, "{key} = {a:?}, {b:?}");
    }
}

/// Debug formatting gives round-trip exact floats.
struct F(f64);

impl fmt::Display for F {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl RunConfig {
    /// Configuration text that parses back to `self`.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let d = self.mesh.domain;
        let _ = writeln!(s, "[mesh]\nnx = {}\nny = {}", self.mesh.nx, self.mesh.ny);
        let _ = writeln!(s, "x0 = {:?}\nx1 = {:?}\ny0 = {:?}\ny1 = {:?}", d.x0, d.x1, d.y0, d.y1);
        let _ = writeln!(s, "\n[dg]\nk = {}", self.dg.k);
        write_opt(&mut s, "scheme", &self.dg.scheme.map(Scheme::name));
        write_opt(&mut s, "sigma0", &self.dg.sigma0.map(F));
        let _ = writeln!(s, "beta0 = {:?}", self.dg.beta0);
        s.push_str("\n[model]\n");
        let m = &self.model;
        for (key, v) in [
            ("kx", &m.kx),
            ("ky", &m.ky),
            ("c", &m.c),
            ("e", &m.e),
            ("E", &m.emission),
            ("Q", &m.chemistry),
            ("u0", &m.u0),
            ("exact", &m.exact),
        ] {
            write_opt(&mut s, key, v);
        }
        write_opt(&mut s, "k1", &m.k1.map(F));
        write_opt(&mut s, "k2", &m.k2.map(F));
        write_pair(&mut s, "diffusion_bounds", &m.diffusion_bounds);
        write_pair(&mut s, "wind_bounds", &m.wind_bounds);
        write_opt(&mut s, "lipschitz", &m.lipschitz.map(F));
        write_pair(&mut s, "state_interval", &m.state_interval);
        let t = &self.time;
        let _ = writeln!(s, "\n[time]\nintegrator = {}", t.integrator.name());
        match t.dt {
            StepSize::Auto => s.push_str("dt = auto\n"),
            StepSize::Fixed(dt) => {
                let _ = writeln!(s, "dt = {dt:?}");
            }
        }
        write_opt(&mut s, "T", &t.final_time.map(F));
        let _ = writeln!(
            s,
            "safety = {:?}\npicard_tol = {:?}\npicard_max_iter = {}\nlinear_tol = {:?}\nstartup_steps = {}",
            t.safety, t.picard_tol, t.picard_max_iter, t.linear_tol, t.startup_steps
        );
        let r = &self.run;
        let _ = writeln!(s, "\n[run]\npreset = {}", r.preset.map_or("custom", Preset::name));
        let levels: Vec<String> = r.levels.iter().map(usize::to_string).collect();
        let _ = writeln!(
            s,
            "levels = {}\nseed = {}\nsamples = {}\nstudy_dt0 = {:?}",
            levels.join(", "),
            r.seed,
            r.samples,
            r.study_dt0
        );
        let o = &self.output;
        let _ = writeln!(
            s,
            "\n[output]\ndirectory = {}\nvtk_stride = {}\nobserver_stride = {}\ncsv = {}",
            o.directory.display(),
            o.vtk_stride,
            o.observer_stride,
            o.csv
        );
        s
    }

    fn zero_penalty_default(&self) -> bool {
        self.run.preset.is_some_and(Preset::wants_zero_penalty)
    }

    pub fn scheme(&self) -> Scheme {
        self.dg.scheme.unwrap_or(if self.zero_penalty_default() { Scheme::Nipg } else { Scheme::Sipg })
    }

    /// Penalty as configured, without the positivity check (probes need
    /// to assemble insufficient penalties).
    pub fn penalty(&self) -> PenaltyConfig {
        let sigma0 = self.dg.sigma0.unwrap_or(if self.zero_penalty_default() { 0.0 } else { default_sigma0(self.dg.k) });
        PenaltyConfig::unchecked(self.scheme(), sigma0, self.dg.beta0)
    }

    /// Problem definition from the preset or the model section.
    pub fn problem(&self) -> Result<ProblemSpec> {
        let mut spec = match self.run.preset {
            Some(p) => {
                let mut spec = p.build();
                if spec.domain != self.mesh.domain {
                    return Err(Error::UnsupportedConfig(format!("preset {} is defined on the unit square", p.name())));
                }
                spec.domain = self.mesh.domain;
                spec
            }
            None => self.custom_problem()?,
        };
        if let Some(t) = self.time.final_time {
            spec.final_time = t;
        }
        spec.check_structure()?;
        Ok(spec)
    }

    fn custom_problem(&self) -> Result<ProblemSpec> {
        let m = &self.model;
        if m.is_empty() {
            return Err(Error::UnsupportedConfig("no preset and no model keys: nothing to solve".into()));
        }
        let coef = |e: &Option<Expr>| e.clone().map_or_else(|| Coefficient::constant(0.0), Coefficient::new);
        let zero = Expr::Num(0.0);
        let domain = self.mesh.domain;
        let mut spec = ProblemSpec {
            kx: coef(&m.kx),
            ky: coef(&m.ky),
            c: coef(&m.c),
            e: coef(&m.e),
            k1: m.k1.unwrap_or(0.0),
            k2: m.k2.unwrap_or(0.0),
            emission: m.emission.clone().unwrap_or_else(|| zero.clone()),
            chemistry: m.chemistry.clone().unwrap_or_else(|| zero.clone()),
            u0: m.u0.clone().unwrap_or_else(|| zero.clone()),
            final_time: 1.0,
            domain,
            bounds: DeclaredBounds {
                diffusion: m.diffusion_bounds,
                wind: m.wind_bounds,
                lipschitz: m.lipschitz,
                state_interval: m.state_interval.unwrap_or((-1.0, 1.0)),
            },
            exact: None,
        };
        if let Some(u) = &m.exact {
            let exact = ExactSolution::new(u.clone(), domain)?;
            if m.emission.is_none() {
                spec.emission = mms_forcing(&spec, &exact)?;
            }
            if m.u0.is_none() {
                spec.u0 = crate::expr::simplify(&u.substitute(crate::expr::Var::T, &zero));
            }
            spec.exact = Some(exact);
        }
        Ok(spec)
    }

    /// Time stepping settings for a run to `final_time`.
    pub fn time_config(&self, final_time: f64) -> TimeConfig {
        let t = &self.time;
        TimeConfig {
            integrator: t.integrator,
            dt: t.dt,
            final_time,
            safety: t.safety,
            picard_tol: t.picard_tol,
            picard_max_iter: t.picard_max_iter,
            linear_tol: t.linear_tol,
            enforce_picard_bound: true,
            startup_steps: t.startup_steps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = parse_config("[mesh]\nnx = 8\nny = 8\n[model]\npreset = smooth-mms\n").unwrap();
        assert_eq!(cfg.run.preset, Some(Preset::SmoothMms));
        assert_eq!(cfg.dg.k, 1);
        assert_eq!(cfg.scheme(), Scheme::Sipg);
        assert_eq!(cfg.penalty().sigma0, 10.0);
        assert_eq!(cfg.time.dt, StepSize::Auto);
        assert_eq!(cfg.problem().unwrap().final_time, 0.1);
    }

    #[test]
    fn scheme_labels_map_to_epsilon() {
        for (name, eps) in [("sipg", -1), ("iipg", 0), ("nipg", 1)] {
            let cfg = parse_config(&format!("[dg]\nscheme = {name}\n")).unwrap();
            assert_eq!(cfg.penalty().epsilon, eps);
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("[mesh]\nnx = 4\n\n[dg]\nk = 7\n", 5),
            ("[mesh]\nfoo = 1\n", 2),
            ("[nope]\n", 1),
            ("# c\nnx = 3\n", 2),
            ("[model]\nkx = sin(\n", 2),
            ("[mesh]\nnx 4\n", 2),
            ("[mesh]\nnx = 4\nnx = 5\n", 3),
            ("[run]\nlevels = 8, 16\n", 2),
            ("[run]\npreset = smooth-mms\n[model]\nkx = 1\n", 4),
            ("[dg]\nsigma0 = -1\n", 2),
        ];
        for (text, want) in cases {
            match parse_config(text) {
                Err(Error::Config { line, .. }) => assert_eq!(line, want, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn round_trip() {
        let text = "\
[mesh]
nx = 6
ny = 3
x1 = 2
[dg]
k = 2
scheme = iipg
sigma0 = 12.5
[model]
kx = 0.01 + 0.001*x
c = 1
E = exp(-t)*x*(1-x)
Q = 0.2*sin(u)
u0 = x*(2-x)*y*(1-y)
k1 = 0.3
lipschitz = 0.2
state_interval = -2, 2
[time]
integrator = crank-nicolson
dt = 0.001
T = 0.5
[run]
levels = 4, 8, 16
seed = 42
[output]
directory = results/run1
vtk_stride = 5
csv = false
";
        let cfg = parse_config(text).unwrap();
        let again = parse_config(&cfg.serialize()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(again.serialize(), cfg.serialize());
        let spec = cfg.problem().unwrap();
        assert_eq!(spec.domain.x1, 2.0);
        assert_eq!(spec.final_time, 0.5);
    }

    #[test]
    fn default_round_trip() {
        let cfg = RunConfig::default();
        assert_eq!(parse_config(&cfg.serialize()).unwrap(), cfg);
    }

    #[test]
    fn exact_solution_generates_forcing() {
        let cfg = parse_config("[model]\nkx = 0.1\nky = 0.1\nexact = x*(1-x)*y*(1-y)*t\n").unwrap();
        let spec = cfg.problem().unwrap();
        assert!(spec.exact.is_some());
        assert!(spec.emission.depends_on(crate::expr::Var::T));
        assert!(parse_config("[model]\nexact = 1 + x\n").unwrap().problem().is_err());
    }

    #[test]
    fn conservation_preset_switches_penalty_off() {
        let cfg = parse_config("[run]\npreset = conservation-test\n").unwrap();
        assert_eq!(cfg.scheme(), Scheme::Nipg);
        assert_eq!(cfg.penalty().sigma0, 0.0);
    }
}
