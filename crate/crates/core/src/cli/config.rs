//! Line-oriented run configuration.
//!
//! ```text
//! # comment
//! [system]
//! alphas = 1, 2
//! betas = 1, 0.5
//! detunings = 0.5, 1.5
//!
//! [pulses]
//! omega0 = 1
//! width = 20, 80
//! ```
//!
//! Sections: `system`, `pulses`, `integrator`, `scan`, `spectrum`, `output`.
//! Lists are comma separated. Unknown sections and keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::dynamics::IntegratorConfig;
use crate::model::{MultiLambdaSystem, PulsePair, PulseShape};

use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanAxis {
    PulseWidth,
    CommonDetuning,
}

impl ScanAxis {
    pub fn name(self) -> &'static str {
        match self {
            ScanAxis::PulseWidth => "pulse_width",
            ScanAxis::CommonDetuning => "common_detuning",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub axis: ScanAxis,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub log_scale: bool,
}

impl ScanSpec {
    pub fn values(&self) -> Vec<f64> {
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|k| {
                let x = k as f64 / last;
                if k + 1 == self.points {
                    self.stop
                } else if self.log_scale {
                    self.start * (self.stop / self.start).powf(x)
                } else {
                    self.start + (self.stop - self.start) * x
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DelaySpec {
    /// `τ = ratio · T`
    Ratio(f64),
    Absolute(f64),
}

/// Optional overrides on top of [`IntegratorConfig::for_pulses`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntegratorOverrides {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub max_step: Option<f64>,
    pub store_every: Option<usize>,
    pub t_start: Option<f64>,
    pub t_end: Option<f64>,
}

impl IntegratorOverrides {
    pub fn apply(&self, pulses: &PulsePair) -> IntegratorConfig {
        let mut cfg = IntegratorConfig::for_pulses(pulses);
        if let Some(v) = self.rel_tol {
            cfg.rel_tol = v;
        }
        if let Some(v) = self.abs_tol {
            cfg.abs_tol = v;
        }
        if let Some(v) = self.max_step {
            cfg.max_step = v;
        }
        if let Some(v) = self.store_every {
            cfg.store_every = v;
        }
        if let Some(v) = self.t_start {
            cfg.t_start = v;
        }
        if let Some(v) = self.t_end {
            cfg.t_end = v;
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSpec {
    pub points: usize,
    pub t_start: Option<f64>,
    pub t_end: Option<f64>,
}

impl Default for SpectrumSpec {
    fn default() -> Self {
        Self { points: 401, t_start: None, t_end: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputSpec {
    pub csv: Option<PathBuf>,
    pub report: Option<PathBuf>,
    /// Fill the `seconds` column. Off by default so that CSVs are
    /// reproducible byte for byte.
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: MultiLambdaSystem,
    pub omega0: f64,
    pub widths: Vec<f64>,
    pub delay: DelaySpec,
    pub shape: PulseShape,
    pub integrator: IntegratorOverrides,
    pub scan: Option<ScanSpec>,
    pub spectrum: SpectrumSpec,
    pub output: OutputSpec,
}

impl RunConfig {
    pub fn pulses(&self, width: f64) -> Result<PulsePair, CliError> {
        let delay = match self.delay {
            DelaySpec::Ratio(r) => r * width,
            DelaySpec::Absolute(d) => d,
        };
        PulsePair::new(self.omega0, width, delay, self.shape).map_err(|e| CliError::Validation(e.to_string()))
    }
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("system", &["n", "alphas", "betas", "detunings"]),
    ("pulses", &["omega0", "width", "delay", "delay_ratio", "shape"]),
    ("integrator", &["rel_tol", "abs_tol", "max_step", "store_every", "t_start", "t_end"]),
    ("scan", &["axis", "start", "stop", "points", "log_scale"]),
    ("spectrum", &["points", "t_start", "t_end"]),
    ("output", &["csv", "report", "timing"]),
];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

type Sections = BTreeMap<&'static str, BTreeMap<&'static str, Entry>>;

fn parse_sections(text: &str) -> Result<Sections, CliError> {
    let mut out: Sections = BTreeMap::new();
    let mut current: Option<(&'static str, &'static [&'static str])> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| CliError::parse(line, "unterminated section header"))?
                .trim();
            let &(sec, keys) = SECTIONS
                .iter()
                .find(|(s, _)| *s == name)
                .ok_or_else(|| CliError::parse(line, format!("unknown section [{name}]")))?;
            if out.contains_key(sec) {
                return Err(CliError::parse(line, format!("duplicate section [{sec}]")));
            }
            out.insert(sec, BTreeMap::new());
            current = Some((sec, keys));
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| CliError::parse(line, "expected `key = value`"))?;
        let key = key.trim();
        let (sec, keys) = current.ok_or_else(|| CliError::parse(line, "key outside of any section"))?;
        let &key = keys
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| CliError::parse(line, format!("unknown key `{key}` in [{sec}]")))?;
        let table = out.get_mut(sec).expect("section inserted at header");
        if table.contains_key(key) {
            return Err(CliError::parse(line, format!("duplicate key `{key}`")));
        }
        table.insert(key, Entry { value: value.trim().to_string(), line });
    }
    Ok(out)
}

struct Section<'a> {
    name: &'static str,
    entries: Option<&'a BTreeMap<&'static str, Entry>>,
}

impl Section<'_> {
    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.and_then(|e| e.get(key))
    }

    fn float(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.get(key).map(parse_float).transpose()
    }

    fn require_float(&self, key: &str) -> Result<f64, CliError> {
        self.float(key)?
            .ok_or_else(|| CliError::Validation(format!("[{}] requires `{key}`", self.name)))
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.get(key)
            .map(|e| e.value.split(',').map(|s| parse_float(&Entry { value: s.trim().into(), line: e.line })).collect())
            .transpose()
    }

    fn require_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        self.list(key)?
            .ok_or_else(|| CliError::Validation(format!("[{}] requires `{key}`", self.name)))
    }

    fn usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        self.get(key)
            .map(|e| {
                e.value
                    .parse::<usize>()
                    .map_err(|_| CliError::parse(e.line, format!("expected a non-negative integer, got `{}`", e.value)))
            })
            .transpose()
    }

    fn bool(&self, key: &str) -> Result<Option<bool>, CliError> {
        self.get(key)
            .map(|e| match e.value.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                v => Err(CliError::parse(e.line, format!("expected true or false, got `{v}`"))),
            })
            .transpose()
    }

    fn string(&self, key: &str) -> Option<&str> {
        self.get(key).map(|e| e.value.as_str())
    }
}

fn parse_float(e: &Entry) -> Result<f64, CliError> {
    match e.value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(CliError::parse(e.line, format!("expected a finite number, got `{}`", e.value))),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let sections = parse_sections(text)?;
    let sec = |name: &'static str| Section { name, entries: sections.get(name) };

    let system = sec("system");
    if system.entries.is_none() {
        return Err(CliError::Validation("missing [system] section".into()));
    }
    let alphas = system.require_list("alphas")?;
    let betas = system.require_list("betas")?;
    let detunings = system.require_list("detunings")?;
    if let Some(n) = system.usize("n")? {
        for (name, v) in [("alphas", &alphas), ("betas", &betas), ("detunings", &detunings)] {
            if v.len() != n {
                return Err(CliError::Validation(format!("{name} has {} entries but n = {n}", v.len())));
            }
        }
    }
    let system = MultiLambdaSystem::new(alphas, betas, detunings)
        .map_err(|e| CliError::Validation(e.to_string()))?;

    let pulses = sec("pulses");
    let omega0 = pulses.float("omega0")?.unwrap_or(1.0);
    let delay = match (pulses.float("delay")?, pulses.float("delay_ratio")?) {
        (Some(_), Some(_)) => {
            return Err(CliError::Validation("give either `delay` or `delay_ratio`, not both".into()))
        }
        (Some(d), None) => DelaySpec::Absolute(d),
        (None, r) => DelaySpec::Ratio(r.unwrap_or(0.5)),
    };
    let shape = match pulses.string("shape").unwrap_or("gaussian") {
        "gaussian" => PulseShape::Gaussian,
        other => return Err(CliError::Validation(format!("unknown pulse shape `{other}`"))),
    };

    let integ = sec("integrator");
    let integrator = IntegratorOverrides {
        rel_tol: integ.float("rel_tol")?,
        abs_tol: integ.float("abs_tol")?,
        max_step: integ.float("max_step")?,
        store_every: integ.usize("store_every")?,
        t_start: integ.float("t_start")?,
        t_end: integ.float("t_end")?,
    };

    let scan_sec = sec("scan");
    let scan = match scan_sec.entries {
        None => None,
        Some(_) => {
            let axis = match scan_sec.string("axis") {
                Some("pulse_width") => ScanAxis::PulseWidth,
                Some("common_detuning") => ScanAxis::CommonDetuning,
                Some(other) => return Err(CliError::Validation(format!("unknown scan axis `{other}`"))),
                None => return Err(CliError::Validation("[scan] requires `axis`".into())),
            };
            let spec = ScanSpec {
                axis,
                start: scan_sec.require_float("start")?,
                stop: scan_sec.require_float("stop")?,
                points: scan_sec
                    .usize("points")?
                    .ok_or_else(|| CliError::Validation("[scan] requires `points`".into()))?,
                log_scale: scan_sec.bool("log_scale")?.unwrap_or(false),
            };
            if spec.points < 2 {
                return Err(CliError::Validation("scan.points must be at least 2".into()));
            }
            if spec.log_scale && !(spec.start > 0.0 && spec.stop > 0.0) {
                return Err(CliError::Validation("log_scale needs positive start and stop".into()));
            }
            Some(spec)
        }
    };

    let widths = match pulses.list("width")? {
        Some(w) => w,
        None if matches!(scan, Some(ScanSpec { axis: ScanAxis::PulseWidth, .. })) => Vec::new(),
        None => return Err(CliError::Validation("[pulses] requires `width`".into())),
    };

    let spec_sec = sec("spectrum");
    let spectrum = SpectrumSpec {
        points: spec_sec.usize("points")?.unwrap_or(401),
        t_start: spec_sec.float("t_start")?,
        t_end: spec_sec.float("t_end")?,
    };
    if spectrum.points < 2 {
        return Err(CliError::Validation("spectrum.points must be at least 2".into()));
    }

    let out_sec = sec("output");
    let output = OutputSpec {
        csv: out_sec.string("csv").map(PathBuf::from),
        report: out_sec.string("report").map(PathBuf::from),
        timing: out_sec.bool("timing")?.unwrap_or(false),
    };

    let cfg = RunConfig { system, omega0, widths, delay, shape, integrator, scan, spectrum, output };
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    let mut widths = cfg.widths.clone();
    if let Some(ScanSpec { axis: ScanAxis::PulseWidth, .. }) = &cfg.scan {
        widths.extend(cfg.scan.as_ref().map(|s| s.values()).unwrap_or_default());
    }
    for &w in &widths {
        let pulses = cfg.pulses(w)?;
        cfg.integrator
            .apply(&pulses)
            .validate()
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    Ok(())
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text)
}
