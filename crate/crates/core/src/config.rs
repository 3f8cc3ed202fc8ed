//! Experiment configuration.
//!
//! Grammar: one `key = value` per line, `#` starts a comment, `[section]`
//! headers group keys. Key names are unique across sections, so a key may
//! also be given outside its section; inside a header only that section's
//! keys are accepted. Lists are comma separated, optionally bracketed.
//! Every problem is collected; parsing never stops at the first one.

use crate::shapes::Shape;
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, TAU};
use std::fmt;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ConfigError {
    #[error("{origin}, column {column}: {message}")]
    Parse { origin: String, column: usize, message: String },
    #[error("`{key}` {message}")]
    Validation { key: String, message: String },
}

/// Every problem found in one configuration.
#[derive(Clone, Debug, PartialEq, Error)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    Oracle,
    Verify,
    Minkowski,
    Stability,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::Simulate,
        Experiment::Oracle,
        Experiment::Verify,
        Experiment::Minkowski,
        Experiment::Stability,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Oracle => "oracle",
            Experiment::Verify => "verify",
            Experiment::Minkowski => "minkowski",
            Experiment::Stability => "stability",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeometryKind {
    Circle,
    Ellipse,
    SphereBand,
    Cylinder,
    TorusBand,
    FlatBand,
    Graph,
}

impl GeometryKind {
    const ALL: [(GeometryKind, &'static str); 7] = [
        (GeometryKind::Circle, "circle"),
        (GeometryKind::Ellipse, "ellipse"),
        (GeometryKind::SphereBand, "sphere_band"),
        (GeometryKind::Cylinder, "cylinder"),
        (GeometryKind::TorusBand, "torus_band"),
        (GeometryKind::FlatBand, "flat_band"),
        (GeometryKind::Graph, "graph"),
    ];

    pub fn name(&self) -> &'static str {
        Self::ALL.iter().find(|(k, _)| k == self).unwrap().1
    }
}

/// Perturbation shapes for the velocity-limit and graph experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProfileKind {
    /// Radial unit field (closed curves and radial families).
    Radial,
    SineHeight,
    SineMixed,
    Bump,
}

impl ProfileKind {
    const ALL: [(ProfileKind, &'static str); 4] = [
        (ProfileKind::Radial, "radial"),
        (ProfileKind::SineHeight, "sine_height"),
        (ProfileKind::SineMixed, "sine_mixed"),
        (ProfileKind::Bump, "bump"),
    ];

    pub fn name(&self) -> &'static str {
        Self::ALL.iter().find(|(k, _)| k == self).unwrap().1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    /// When set, must match the subcommand that reads the file.
    pub experiment: Option<Experiment>,
    pub t_end: f64,
    pub snapshot_every: usize,
    pub output_dir: PathBuf,
    /// Significant decimal digits in CSV output.
    pub precision: usize,

    pub geometry: GeometryKind,
    pub n: usize,
    pub r0: f64,
    pub r1: f64,
    pub a: f64,
    pub b: f64,
    pub alpha_max: f64,
    pub length: f64,
    pub major: f64,
    pub minor: f64,
    pub dim: usize,

    pub cfl_safety: f64,
    pub det_floor: f64,
    pub h_max: f64,
    pub fixed_dt: Option<f64>,
    pub deturck: bool,

    /// Radial coefficient; the geometry's own value when unset.
    pub c: Option<f64>,
    pub ode_tol: f64,

    pub levels: Vec<usize>,
    pub verify_t: f64,

    pub eps_list: Vec<f64>,
    pub horizon: f64,
    pub profile: ProfileKind,
    pub mode: usize,
    pub width: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            experiment: None,
            t_end: 2.0,
            snapshot_every: 10,
            output_dir: PathBuf::from("out"),
            precision: 17,
            geometry: GeometryKind::Circle,
            n: 128,
            r0: 1.0,
            r1: 0.0,
            a: 1.2,
            b: 0.8,
            alpha_max: FRAC_PI_4,
            length: TAU,
            major: 2.0,
            minor: 0.7,
            dim: 2,
            cfl_safety: 0.25,
            det_floor: 1e-10,
            h_max: 1e6,
            fixed_dt: None,
            deturck: false,
            c: None,
            ode_tol: 1e-10,
            levels: vec![64, 128, 256],
            verify_t: 0.4,
            eps_list: vec![0.02, 0.01, 0.005],
            horizon: 1.0,
            profile: ProfileKind::SineMixed,
            mode: 1,
            width: 0.8,
        }
    }
}

impl SimConfig {
    /// The analytic shape for every geometry except `graph`.
    pub fn shape(&self) -> Option<Shape> {
        Some(match self.geometry {
            GeometryKind::Circle => Shape::Circle { r: self.r0 },
            GeometryKind::Ellipse => Shape::Ellipse { a: self.a, b: self.b },
            GeometryKind::SphereBand => Shape::SphereBand {
                r: self.r0,
                alpha_max: self.alpha_max,
            },
            GeometryKind::Cylinder => Shape::Cylinder {
                r: self.r0,
                length: self.length,
            },
            GeometryKind::TorusBand => Shape::Torus {
                major: self.major,
                minor: self.minor,
            },
            GeometryKind::FlatBand => Shape::Flat {
                dim: self.dim,
                length: self.length,
            },
            GeometryKind::Graph => return None,
        })
    }

    /// `c` if given, else the geometry's radial coefficient, else 1.
    pub fn radial_coefficient(&self) -> f64 {
        self.c
            .or_else(|| self.shape().and_then(|s| s.radial_coefficient()))
            .unwrap_or(1.0)
    }

    pub fn flow_config(&self) -> crate::flow::FlowConfig {
        crate::flow::FlowConfig {
            cfl_safety: self.cfl_safety,
            det_floor: self.det_floor,
            h_max: self.h_max,
            fixed_dt: self.fixed_dt,
        }
    }
}

struct KeySpec {
    name: &'static str,
    section: &'static str,
}

const SECTIONS: [&str; 6] = ["run", "geometry", "flow", "oracle", "verify", "perturbation"];

const KEYS: &[KeySpec] = &[
    KeySpec { name: "experiment", section: "run" },
    KeySpec { name: "t_end", section: "run" },
    KeySpec { name: "snapshot_every", section: "run" },
    KeySpec { name: "output_dir", section: "run" },
    KeySpec { name: "precision", section: "run" },
    KeySpec { name: "geometry", section: "geometry" },
    KeySpec { name: "n", section: "geometry" },
    KeySpec { name: "r0", section: "geometry" },
    KeySpec { name: "r1", section: "geometry" },
    KeySpec { name: "a", section: "geometry" },
    KeySpec { name: "b", section: "geometry" },
    KeySpec { name: "alpha_max", section: "geometry" },
    KeySpec { name: "length", section: "geometry" },
    KeySpec { name: "major", section: "geometry" },
    KeySpec { name: "minor", section: "geometry" },
    KeySpec { name: "dim", section: "geometry" },
    KeySpec { name: "cfl_safety", section: "flow" },
    KeySpec { name: "det_floor", section: "flow" },
    KeySpec { name: "h_max", section: "flow" },
    KeySpec { name: "fixed_dt", section: "flow" },
    KeySpec { name: "deturck", section: "flow" },
    KeySpec { name: "c", section: "oracle" },
    KeySpec { name: "ode_tol", section: "oracle" },
    KeySpec { name: "levels", section: "verify" },
    KeySpec { name: "verify_t", section: "verify" },
    KeySpec { name: "eps_list", section: "perturbation" },
    KeySpec { name: "horizon", section: "perturbation" },
    KeySpec { name: "profile", section: "perturbation" },
    KeySpec { name: "mode", section: "perturbation" },
    KeySpec { name: "width", section: "perturbation" },
];

fn key_spec(name: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.name == name)
}

/// A raw assignment and where it came from.
#[derive(Clone, Debug)]
struct Entry {
    value: String,
    origin: String,
}

/// Raw `key = value` pairs in a file, before typing and validation.
#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

fn parse_error(origin: String, column: usize, message: String) -> ConfigError {
    ConfigError::Parse { origin, column, message }
}

impl RawConfig {
    pub fn parse(text: &str, errors: &mut Vec<ConfigError>) -> Self {
        let mut raw = RawConfig::default();
        let mut section: Option<&str> = None;
        for (k, full) in text.lines().enumerate() {
            let origin = format!("line {}", k + 1);
            let line = full.split('#').next().unwrap_or("");
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let indent = line.len() - line.trim_start().len() + 1;
            if let Some(rest) = trimmed.strip_prefix('[') {
                match rest.strip_suffix(']').map(str::trim) {
                    Some(name) => match SECTIONS.iter().find(|s| **s == name) {
                        Some(s) => section = Some(s),
                        None => errors.push(parse_error(
                            origin,
                            indent,
                            format!("unknown section `[{name}]`; expected one of {}", SECTIONS.join(", ")),
                        )),
                    },
                    None => errors.push(parse_error(origin, indent, "unterminated section header".into())),
                }
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                errors.push(parse_error(origin, indent, "expected `key = value`".into()));
                continue;
            };
            let key = key.trim();
            let value = value.trim();
            match key_spec(key) {
                None => errors.push(parse_error(origin, indent, format!("unknown key `{key}`"))),
                Some(spec) if section.is_some_and(|s| s != spec.section) => errors.push(parse_error(
                    origin,
                    indent,
                    format!(
                        "key `{key}` belongs to section [{}], not [{}]",
                        spec.section,
                        section.unwrap()
                    ),
                )),
                Some(_) if raw.entries.contains_key(key) => errors.push(parse_error(
                    origin,
                    indent,
                    format!("duplicate key `{key}` (first set at {})", raw.entries[key].origin),
                )),
                Some(_) if value.is_empty() => {
                    errors.push(parse_error(origin, indent, format!("missing value for `{key}`")))
                }
                Some(_) => {
                    raw.entries.insert(
                        key.to_string(),
                        Entry {
                            value: value.to_string(),
                            origin,
                        },
                    );
                }
            }
        }
        raw
    }

    /// Applies one `key=value` override; later overrides win.
    pub fn apply_override(&mut self, assignment: &str, errors: &mut Vec<ConfigError>) {
        let origin = format!("--set {assignment}");
        let Some((key, value)) = assignment.split_once('=') else {
            errors.push(parse_error(origin, 1, "expected `key=value`".into()));
            return;
        };
        let key = key.trim();
        if key_spec(key).is_none() {
            errors.push(parse_error(origin, 1, format!("unknown key `{key}`")));
            return;
        }
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.trim().to_string(),
                origin,
            },
        );
    }
}

struct Builder<'a> {
    raw: &'a RawConfig,
    errors: Vec<ConfigError>,
}

impl Builder<'_> {
    fn invalid(&mut self, key: &str, message: String) {
        self.errors.push(ConfigError::Validation {
            key: key.to_string(),
            message,
        });
    }

    fn text(&self, key: &str) -> Option<&str> {
        self.raw.entries.get(key).map(|e| e.value.as_str())
    }

    fn unquoted(&self, key: &str) -> Option<String> {
        self.text(key).map(|v| v.trim_matches('"').to_string())
    }

    fn float(&mut self, key: &str, default: f64, ok: impl Fn(f64) -> bool, range: &str) -> f64 {
        let Some(text) = self.text(key) else { return default };
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() && ok(v) => v,
            Ok(v) => {
                self.invalid(key, format!("= {v} is out of range; must be in {range}"));
                default
            }
            Err(_) => {
                self.invalid(key, format!("= `{text}` is not a number"));
                default
            }
        }
    }

    fn int(&mut self, key: &str, default: usize, lo: usize, hi: usize) -> usize {
        let Some(text) = self.text(key) else { return default };
        match text.parse::<usize>() {
            Ok(v) if (lo..=hi).contains(&v) => v,
            Ok(v) => {
                self.invalid(key, format!("= {v} is out of range; must be in [{lo}, {hi}]"));
                default
            }
            Err(_) => {
                self.invalid(key, format!("= `{text}` is not a non-negative integer"));
                default
            }
        }
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str) -> Option<Vec<T>> {
        let text = self.text(key)?.to_string();
        let inner = text.trim_start_matches('[').trim_end_matches(']');
        let mut out = Vec::new();
        for item in inner.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.parse::<T>() {
                Ok(v) => out.push(v),
                Err(_) => {
                    self.invalid(key, format!("has an unreadable entry `{item}`"));
                    return None;
                }
            }
        }
        if out.is_empty() {
            self.invalid(key, "must list at least one value".into());
            return None;
        }
        Some(out)
    }

    fn choice<T: Copy>(&mut self, key: &str, default: T, table: &[(T, &'static str)]) -> T {
        let Some(text) = self.unquoted(key) else { return default };
        match table.iter().find(|(_, name)| *name == text) {
            Some((v, _)) => *v,
            None => {
                let names: Vec<&str> = table.iter().map(|(_, n)| *n).collect();
                self.invalid(key, format!("= `{text}` is not one of {}", names.join(", ")));
                default
            }
        }
    }
}

/// Types and validates raw entries on top of the defaults.
pub fn build_config(raw: &RawConfig) -> Result<SimConfig, ConfigErrors> {
    let d = SimConfig::default();
    let mut b = Builder {
        raw,
        errors: Vec::new(),
    };
    let experiments: Vec<(Option<Experiment>, &str)> =
        Experiment::ALL.iter().map(|e| (Some(*e), e.name())).collect();
    let experiment = b.choice("experiment", None, &experiments);
    let geometry = b.choice("geometry", d.geometry, &GeometryKind::ALL);
    let profile = b.choice("profile", d.profile, &ProfileKind::ALL);
    let deturck = match b.unquoted("deturck").as_deref() {
        None => d.deturck,
        Some("true") => true,
        Some("false") => false,
        Some(other) => {
            b.invalid("deturck", format!("= `{other}` must be true or false"));
            d.deturck
        }
    };
    let fixed_dt = b
        .text("fixed_dt")
        .is_some()
        .then(|| b.float("fixed_dt", 0.0, |v| v > 0.0 && v <= 1.0, "(0, 1]"));
    let c = b
        .text("c")
        .is_some()
        .then(|| b.float("c", 1.0, |v| v > 0.0 && v <= 100.0, "(0, 100]"));
    let minor = b.float("minor", d.minor, |v| v > 0.0 && v <= 1e3, "(0, 1000]");
    let cfg = SimConfig {
        experiment,
        t_end: b.float("t_end", d.t_end, |v| v > 0.0 && v <= 1e3, "(0, 1000]"),
        snapshot_every: b.int("snapshot_every", d.snapshot_every, 1, 1_000_000_000),
        output_dir: b.unquoted("output_dir").map(PathBuf::from).unwrap_or(d.output_dir.clone()),
        precision: b.int("precision", d.precision, 1, 17),
        geometry,
        n: b.int("n", d.n, 8, 4096),
        r0: b.float("r0", d.r0, |v| v > 0.0 && v <= 1e3, "(0, 1000]"),
        r1: b.float("r1", d.r1, |v| v.abs() <= 10.0, "[-10, 10]"),
        a: b.float("a", d.a, |v| v > 0.0 && v <= 1e3, "(0, 1000]"),
        b: b.float("b", d.b, |v| v > 0.0 && v <= 1e3, "(0, 1000]"),
        alpha_max: b.float(
            "alpha_max",
            d.alpha_max,
            |v| v > 0.0 && v < 0.9 * FRAC_PI_2,
            "(0, 0.45π)",
        ),
        length: b.float("length", d.length, |v| v > 0.0 && v <= 1e3, "(0, 1000]"),
        major: b.float("major", d.major, |v| v > minor && v <= 1e3, "(minor, 1000]"),
        minor,
        dim: b.int("dim", d.dim, 1, 2),
        cfl_safety: b.float("cfl_safety", d.cfl_safety, |v| v > 0.0 && v <= 0.9, "(0, 0.9]"),
        det_floor: b.float("det_floor", d.det_floor, |v| v > 0.0 && v <= 1e-2, "(0, 0.01]"),
        h_max: b.float("h_max", d.h_max, |v| v > 1.0 && v <= 1e12, "(1, 1e12]"),
        fixed_dt,
        deturck,
        c,
        ode_tol: b.float("ode_tol", d.ode_tol, |v| v > 1e-14 && v < 1e-3, "(1e-14, 1e-3)"),
        levels: b.list::<usize>("levels").unwrap_or(d.levels.clone()),
        verify_t: b.float("verify_t", d.verify_t, |v| v > 0.0 && v <= 100.0, "(0, 100]"),
        eps_list: b.list::<f64>("eps_list").unwrap_or(d.eps_list.clone()),
        horizon: b.float("horizon", d.horizon, |v| v > 0.0 && v <= 100.0, "(0, 100]"),
        profile,
        mode: b.int("mode", d.mode, 1, 64),
        width: b.float("width", d.width, |v| v > 0.0 && v <= 10.0, "(0, 10]"),
    };
    if cfg.levels.len() < 3 || cfg.levels.windows(2).any(|w| w[1] <= w[0]) {
        b.invalid("levels", "must list at least three strictly increasing grid sizes".into());
    }
    if cfg.levels.iter().any(|n| !(8..=1024).contains(n)) {
        b.invalid("levels", "entries must be in [8, 1024]".into());
    }
    if cfg.eps_list.iter().any(|e| !(e.is_finite() && (0.0..1.0).contains(e))) {
        b.invalid("eps_list", "entries must be in [0, 1)".into());
    }
    if cfg.geometry == GeometryKind::SphereBand && cfg.n < 16 {
        b.invalid("n", format!("= {} is too small for sphere_band; must be at least 16", cfg.n));
    }
    if b.errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigErrors(b.errors))
    }
}

/// Parses and validates a configuration file with `key=value` overrides
/// applied on top; returns every problem found.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<SimConfig, ConfigErrors> {
    let mut errors = Vec::new();
    let mut raw = RawConfig::parse(text, &mut errors);
    for o in overrides {
        raw.apply_override(o, &mut errors);
    }
    match build_config(&raw) {
        Ok(cfg) if errors.is_empty() => Ok(cfg),
        Ok(_) => Err(ConfigErrors(errors)),
        Err(ConfigErrors(more)) => {
            errors.extend(more);
            Err(ConfigErrors(errors))
        }
    }
}

pub fn parse_config(text: &str) -> Result<SimConfig, ConfigErrors> {
    parse_config_with(text, &[])
}
