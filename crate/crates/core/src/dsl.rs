//! The `.larc` scenario format.
//!
//! ```text
//! # two-position body in front of a pinhole camera
//! [scenario]
//! kind = pinhole
//! a1 = 0.5477225575051661
//! a2 = 0.8366600265340756
//! b1 = 0.6 @ 90deg
//! b2 = 0.8
//! n = 100
//! m1 = 50
//! m2 = 50
//! P_t = 0.01
//! horizon = 200
//! ```
//!
//! One `key = value` per line, `#` starts a comment, exactly one
//! `[scenario]` header before the first key. Unknown keys are errors.
//! Amplitudes are a non-negative magnitude with an optional phase
//! (`@ 90deg` or `@ 1.5rad`). Momenta are integer pairs `x,y`. Integers
//! may be written in scientific notation (`N = 1e4`).
//!
//! Amplitude pairs must satisfy `|a1|^2+|a2|^2 = 1` within `1e-12`. Sums
//! within `1e-6` of one (values truncated to a few digits) are rescaled
//! silently; `normalize = true` rescales any positive sum.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::fock::Momentum;
use crate::scenario::{Amplitudes, MomentumScenario, PinholeScenario, Scenario, ScenarioError, Schedule, Timing};

/// Sums this close to one are rescaled without `normalize = true`.
pub const AUTO_NORMALIZE_TOLERANCE: f64 = 1e-6;

/// Upper bound on molecules per patch.
pub const MAX_SITES: usize = 10_000_000;

const KEYS: &[&str] = &[
    "kind",
    "a1",
    "a2",
    "b1",
    "b2",
    "n",
    "m1",
    "m2",
    "molecules",
    "p1",
    "p2",
    "p_i",
    "decompose",
    "P_t",
    "t_i",
    "transit_delay",
    "horizon",
    "schedule",
    "stagger_window",
    "seed",
    "N",
    "stop_after_localization",
    "normalize",
];

const PINHOLE_ONLY: &[&str] = &["m1", "m2"];
const MOMENTUM_ONLY: &[&str] = &["molecules", "p1", "p2", "p_i", "decompose"];

/// Where a problem was found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    /// 1-based line and column in the file.
    Line { line: usize, column: usize },
    /// A `key=value` override supplied outside the file.
    Override(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub location: Location,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.location {
            Location::Line { line, column } => write!(f, "line {line}, column {column}: {}", self.message),
            Location::Override(key) => write!(f, "override `{key}`: {}", self.message),
        }
    }
}

impl ParseError {
    fn at(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            location: Location::Line { line, column },
            message: message.into(),
        }
    }

    /// Line number, or `None` for override errors.
    pub fn line(&self) -> Option<usize> {
        match self.location {
            Location::Line { line, .. } => Some(line),
            Location::Override(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngleUnit {
    Deg,
    Rad,
}

/// A complex amplitude as written: magnitude and optional phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Amplitude {
    pub magnitude: f64,
    pub phase: Option<(f64, AngleUnit)>,
}

impl Amplitude {
    pub fn real(magnitude: f64) -> Self {
        Self { magnitude, phase: None }
    }

    pub fn to_complex(self) -> Complex64 {
        match self.phase {
            None => Complex64::new(self.magnitude, 0.0),
            Some((value, AngleUnit::Deg)) => Complex64::from_polar(self.magnitude, value.to_radians()),
            Some((value, AngleUnit::Rad)) => Complex64::from_polar(self.magnitude, value),
        }
    }
}

impl fmt::Display for Amplitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.magnitude)?;
        match self.phase {
            None => Ok(()),
            Some((v, AngleUnit::Deg)) => write!(f, " @ {v:?}deg"),
            Some((v, AngleUnit::Rad)) => write!(f, " @ {v:?}rad"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    Pinhole {
        m1: usize,
        m2: usize,
    },
    Momentum {
        molecules: usize,
        p1: Momentum,
        p2: Momentum,
        p_i: Momentum,
        decompose: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleConfig {
    Simultaneous,
    Stagger { window: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub layout: Layout,
    pub a1: Amplitude,
    pub a2: Amplitude,
    pub b1: Amplitude,
    pub b2: Amplitude,
    pub n: u32,
    pub p_t: f64,
    pub t_i: f64,
    pub transit_delay: f64,
    pub horizon: f64,
    pub schedule: ScheduleConfig,
    pub seed: u64,
    pub trajectories: u64,
    pub stop_after_localization: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let h = Amplitude::real(std::f64::consts::FRAC_1_SQRT_2);
        Self {
            layout: Layout::Pinhole { m1: 100, m2: 100 },
            a1: h,
            a2: h,
            b1: h,
            b2: h,
            n: 100,
            p_t: 0.01,
            t_i: 0.0,
            transit_delay: 0.0,
            horizon: 100.0,
            schedule: ScheduleConfig::Simultaneous,
            seed: 0,
            trajectories: 1000,
            stop_after_localization: false,
        }
    }
}

impl ScenarioConfig {
    pub fn kind(&self) -> &'static str {
        match self.layout {
            Layout::Pinhole { .. } => "pinhole",
            Layout::Momentum { .. } => "momentum",
        }
    }

    /// The simulation scenario this config describes.
    pub fn scenario(&self) -> Result<Scenario, ScenarioError> {
        let amplitudes = Amplitudes {
            a1: self.a1.to_complex(),
            a2: self.a2.to_complex(),
            b1: self.b1.to_complex(),
            b2: self.b2.to_complex(),
        };
        let timing = Timing {
            t_i: self.t_i,
            transit_delay: self.transit_delay,
            schedule: match self.schedule {
                ScheduleConfig::Simultaneous => Schedule::Simultaneous,
                ScheduleConfig::Stagger { window } => Schedule::Stagger { window },
            },
            p_t: self.p_t,
            horizon: self.horizon,
            stop_after_localization: self.stop_after_localization,
        };
        let scenario = match self.layout {
            Layout::Pinhole { m1, m2 } => Scenario::Pinhole(PinholeScenario {
                amplitudes,
                n: self.n,
                m1,
                m2,
                timing,
            }),
            Layout::Momentum {
                molecules,
                p1,
                p2,
                p_i,
                decompose,
            } => Scenario::Momentum(MomentumScenario {
                amplitudes,
                n: self.n,
                p1,
                p2,
                molecules: vec![p_i; molecules],
                decompose,
                timing,
            }),
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Canonical text form: fixed key order, LF line endings, shortest
/// round-trip decimal numbers.
pub fn serialize(config: &ScenarioConfig) -> String {
    let mut out = String::from("[scenario]\n");
    let mut line = |key: &str, value: String| {
        out.push_str(key);
        out.push_str(" = ");
        out.push_str(&value);
        out.push('\n');
    };
    line("kind", config.kind().to_string());
    line("a1", config.a1.to_string());
    line("a2", config.a2.to_string());
    line("b1", config.b1.to_string());
    line("b2", config.b2.to_string());
    line("n", config.n.to_string());
    match config.layout {
        Layout::Pinhole { m1, m2 } => {
            line("m1", m1.to_string());
            line("m2", m2.to_string());
        }
        Layout::Momentum {
            molecules,
            p1,
            p2,
            p_i,
            decompose,
        } => {
            line("molecules", molecules.to_string());
            line("p1", p1.to_string());
            line("p2", p2.to_string());
            line("p_i", p_i.to_string());
            line("decompose", decompose.to_string());
        }
    }
    line("P_t", format!("{:?}", config.p_t));
    line("t_i", format!("{:?}", config.t_i));
    line("transit_delay", format!("{:?}", config.transit_delay));
    line("horizon", format!("{:?}", config.horizon));
    match config.schedule {
        ScheduleConfig::Simultaneous => line("schedule", "simultaneous".into()),
        ScheduleConfig::Stagger { window } => {
            line("schedule", "stagger".into());
            line("stagger_window", format!("{window:?}"));
        }
    }
    line("seed", config.seed.to_string());
    line("N", config.trajectories.to_string());
    line("stop_after_localization", config.stop_after_localization.to_string());
    out
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    location: Location,
}

impl Entry {
    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            location: self.location.clone(),
            message: message.into(),
        }
    }
}

/// Splits an override of the form `key=value`.
pub fn parse_override(text: &str) -> Result<(String, String), String> {
    let (key, value) = text.split_once('=').ok_or_else(|| format!("override `{text}` is not of the form key=value"))?;
    let (key, value) = (key.trim(), value.trim());
    if !KEYS.contains(&key) {
        return Err(format!("unknown key `{key}` in override"));
    }
    if value.is_empty() {
        return Err(format!("override `{key}` has an empty value"));
    }
    Ok((key.to_string(), value.to_string()))
}

pub fn parse(text: &str) -> Result<ScenarioConfig, ParseError> {
    parse_with_overrides(text, &[])
}

/// Parses raw bytes; invalid UTF-8 is reported at its line.
pub fn parse_bytes(bytes: &[u8]) -> Result<ScenarioConfig, ParseError> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse(text),
        Err(e) => {
            let prefix = &bytes[..e.valid_up_to()];
            let line = prefix.iter().filter(|&&b| b == b'\n').count() + 1;
            let column = prefix.iter().rev().take_while(|&&b| b != b'\n').count() + 1;
            Err(ParseError::at(line, column, "invalid UTF-8"))
        }
    }
}

fn is_identifier(key: &str) -> bool {
    let mut chars = key.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_') && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parses `text`, then replaces or adds the given `(key, value)` pairs
/// before validation.
pub fn parse_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<ScenarioConfig, ParseError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut header: Option<usize> = None;
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    let mut last_line = 1;
    for (index, raw) in text.split('\n').enumerate() {
        let line_no = index + 1;
        last_line = line_no;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let content = raw.split_once('#').map_or(raw, |(before, _)| before);
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.chars().take_while(|c| c.is_whitespace()).count() + 1;
        if trimmed.starts_with('[') {
            if trimmed != "[scenario]" {
                return Err(ParseError::at(line_no, indent, format!("unknown section `{trimmed}`; expected `[scenario]`")));
            }
            if let Some(first) = header {
                return Err(ParseError::at(line_no, indent, format!("duplicate `[scenario]` header (first on line {first})")));
            }
            header = Some(line_no);
            continue;
        }
        let Some((key_part, value_part)) = content.split_once('=') else {
            return Err(ParseError::at(line_no, indent, "expected `key = value`"));
        };
        let key = key_part.trim();
        if !is_identifier(key) {
            return Err(ParseError::at(line_no, indent, format!("invalid key `{key}`")));
        }
        if header.is_none() {
            return Err(ParseError::at(line_no, indent, "key before the `[scenario]` header"));
        }
        if !KEYS.contains(&key) {
            return Err(ParseError::at(line_no, indent, format!("unknown key `{key}`")));
        }
        let value_offset = key_part.chars().count() + 1;
        let value = value_part.trim();
        let column = value_offset + value_part.chars().take_while(|c| c.is_whitespace()).count() + 1;
        if value.is_empty() {
            return Err(ParseError::at(line_no, column, format!("missing value for `{key}`")));
        }
        if let Some(Entry {
            location: Location::Line { line, .. },
            ..
        }) = entries.get(key)
        {
            return Err(ParseError::at(line_no, indent, format!("duplicate key `{key}` (first set on line {line})")));
        }
        entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                location: Location::Line { line: line_no, column },
            },
        );
    }
    let header = header.ok_or_else(|| ParseError::at(last_line, 1, "missing `[scenario]` header"))?;
    for (key, value) in overrides {
        if !KEYS.contains(&key.as_str()) {
            return Err(ParseError {
                location: Location::Override(key.clone()),
                message: format!("unknown key `{key}`"),
            });
        }
        entries.insert(
            key.clone(),
            Entry {
                value: value.clone(),
                location: Location::Override(key.clone()),
            },
        );
    }
    Fields { entries, header }.build()
}

struct Fields {
    entries: BTreeMap<String, Entry>,
    header: usize,
}

impl Fields {
    fn missing(&self, key: &str) -> ParseError {
        ParseError::at(self.header, 1, format!("missing required key `{key}`"))
    }

    fn required(&self, key: &str) -> Result<&Entry, ParseError> {
        self.entries.get(key).ok_or_else(|| self.missing(key))
    }

    fn get<T>(&self, key: &str, default: T, parse: fn(&Entry) -> Result<T, ParseError>) -> Result<T, ParseError> {
        self.entries.get(key).map_or(Ok(default), parse)
    }

    fn build(self) -> Result<ScenarioConfig, ParseError> {
        let kind = self.required("kind")?;
        let pinhole = match kind.value.as_str() {
            "pinhole" => true,
            "momentum" => false,
            other => return Err(kind.err(format!("unknown kind `{other}`; expected pinhole or momentum"))),
        };
        let foreign = if pinhole { MOMENTUM_ONLY } else { PINHOLE_ONLY };
        for key in foreign {
            if let Some(e) = self.entries.get(*key) {
                return Err(e.err(format!("key `{key}` does not apply to kind {}", kind.value)));
            }
        }

        let normalize = self.get("normalize", false, parse_bool)?;
        let (a1, a2) = self.amplitude_pair("a1", "a2", "|a1|^2+|a2|^2 != 1", normalize)?;
        let (b1, b2) = self.amplitude_pair("b1", "b2", "|b1|^2+|b2|^2 != 1", normalize)?;

        let n_entry = self.required("n")?;
        let n: u32 = parse_count(n_entry)?;
        if n < 1 {
            return Err(n_entry.err("invariant violated: n >= 1"));
        }
        let layout = if pinhole {
            let mut counts = [0usize; 2];
            for (slot, key) in counts.iter_mut().zip(["m1", "m2"]) {
                let e = self.required(key)?;
                *slot = parse_count(e)?;
                if !(1..=MAX_SITES).contains(slot) {
                    return Err(e.err(format!("invariant violated: 1 <= {key} <= {MAX_SITES}")));
                }
            }
            Layout::Pinhole { m1: counts[0], m2: counts[1] }
        } else {
            let e = self.required("molecules")?;
            let molecules: usize = parse_count(e)?;
            if !(1..=MAX_SITES).contains(&molecules) {
                return Err(e.err(format!("invariant violated: 1 <= molecules <= {MAX_SITES}")));
            }
            let p1 = parse_momentum(self.required("p1")?)?;
            let p2_entry = self.required("p2")?;
            let p2 = parse_momentum(p2_entry)?;
            if p1 == p2 {
                return Err(p2_entry.err("invariant violated: kicks p1 and p2 must differ"));
            }
            Layout::Momentum {
                molecules,
                p1,
                p2,
                p_i: self.get("p_i", Momentum::ZERO, parse_momentum)?,
                decompose: self.get("decompose", false, parse_bool)?,
            }
        };

        let p_t_entry = self.required("P_t")?;
        let p_t = parse_real(p_t_entry)?;
        if p_t < 0.0 {
            return Err(p_t_entry.err("invariant violated: P_t >= 0"));
        }
        let t_i = self.get("t_i", 0.0, parse_real)?;
        let transit_delay = match self.entries.get("transit_delay") {
            Some(e) => {
                let d = parse_real(e)?;
                if d < 0.0 {
                    return Err(e.err("invariant violated: transit_delay >= 0"));
                }
                d
            }
            None => 0.0,
        };
        let horizon_entry = self.required("horizon")?;
        let horizon = parse_real(horizon_entry)?;
        if horizon < t_i {
            return Err(horizon_entry.err("invariant violated: horizon >= t_i"));
        }

        let schedule = match self.entries.get("schedule").map(|e| (e, e.value.as_str())) {
            None | Some((_, "simultaneous")) => {
                if let Some(e) = self.entries.get("stagger_window") {
                    return Err(e.err("`stagger_window` requires `schedule = stagger`"));
                }
                ScheduleConfig::Simultaneous
            }
            Some((_, "stagger")) => {
                let e = self.required("stagger_window")?;
                let window = parse_real(e)?;
                if window < 0.0 {
                    return Err(e.err("invariant violated: stagger_window >= 0"));
                }
                ScheduleConfig::Stagger { window }
            }
            Some((e, other)) => return Err(e.err(format!("unknown schedule `{other}`; expected simultaneous or stagger"))),
        };

        let config = ScenarioConfig {
            layout,
            a1,
            a2,
            b1,
            b2,
            n,
            p_t,
            t_i,
            transit_delay,
            horizon,
            schedule,
            seed: self.get("seed", 0, parse_count)?,
            trajectories: self.get("N", 1000, parse_count)?,
            stop_after_localization: self.get("stop_after_localization", false, parse_bool)?,
        };
        if config.trajectories < 1 {
            return Err(self.entries["N"].err("invariant violated: N >= 1"));
        }
        config
            .scenario()
            .map_err(|e| ParseError::at(self.header, 1, format!("invariant violated: {e}")))?;
        Ok(config)
    }

    fn amplitude_pair(&self, k1: &str, k2: &str, constraint: &str, normalize: bool) -> Result<(Amplitude, Amplitude), ParseError> {
        let (e1, e2) = (self.required(k1)?, self.required(k2)?);
        let (mut x, mut y) = (parse_amplitude(e1)?, parse_amplitude(e2)?);
        let sum = x.magnitude * x.magnitude + y.magnitude * y.magnitude;
        let off = (sum - 1.0).abs();
        if off > 1e-12 {
            if !(sum > 0.0) || !(normalize || off <= AUTO_NORMALIZE_TOLERANCE) {
                return Err(e2.err(format!("invariant violated: {constraint} (sum is {sum}); set `normalize = true` to rescale")));
            }
            let scale = sum.sqrt();
            x.magnitude /= scale;
            y.magnitude /= scale;
        }
        Ok((x, y))
    }
}

fn parse_real(e: &Entry) -> Result<f64, ParseError> {
    parse_real_str(&e.value).ok_or_else(|| e.err(format!("expected a finite number, found `{}`", e.value)))
}

fn parse_real_str(s: &str) -> Option<f64> {
    // Rust also accepts inf/nan spellings; only digits, signs, '.', 'e' are allowed here
    if !s.chars().all(|c| c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E')) {
        return None;
    }
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

fn parse_count<T: TryFrom<u64>>(e: &Entry) -> Result<T, ParseError> {
    let bad = || e.err(format!("expected a non-negative integer, found `{}`", e.value));
    let value: u64 = match e.value.parse::<u64>() {
        Ok(v) => v,
        Err(_) => {
            let x = parse_real_str(&e.value).ok_or_else(bad)?;
            if x < 0.0 || x.fract() != 0.0 || x > 9_007_199_254_740_992.0 {
                return Err(bad());
            }
            x as u64
        }
    };
    T::try_from(value).map_err(|_| e.err(format!("`{}` is out of range", e.value)))
}

fn parse_bool(e: &Entry) -> Result<bool, ParseError> {
    match e.value.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(e.err(format!("expected true or false, found `{other}`"))),
    }
}

fn parse_momentum(e: &Entry) -> Result<Momentum, ParseError> {
    let bad = || e.err(format!("expected an integer pair `x,y`, found `{}`", e.value));
    let (x, y) = e.value.split_once(',').ok_or_else(bad)?;
    let x = x.trim().parse::<i64>().map_err(|_| bad())?;
    let y = y.trim().parse::<i64>().map_err(|_| bad())?;
    Ok(Momentum::new(x, y))
}

fn parse_amplitude(e: &Entry) -> Result<Amplitude, ParseError> {
    let (mag, phase) = match e.value.split_once('@') {
        Some((m, p)) => (m.trim(), Some(p.trim())),
        None => (e.value.as_str(), None),
    };
    let magnitude = parse_real_str(mag).ok_or_else(|| e.err(format!("expected an amplitude magnitude, found `{mag}`")))?;
    if magnitude < 0.0 {
        return Err(e.err("amplitude magnitude must be >= 0; give a sign as a phase (`@ 180deg`)"));
    }
    let phase = match phase {
        None => None,
        Some(p) => {
            let (number, unit) = if let Some(v) = p.strip_suffix("deg") {
                (v, AngleUnit::Deg)
            } else if let Some(v) = p.strip_suffix("rad") {
                (v, AngleUnit::Rad)
            } else {
                return Err(e.err(format!("phase `{p}` needs a unit: deg or rad")));
            };
            let value = parse_real_str(number.trim()).ok_or_else(|| e.err(format!("expected a phase angle, found `{p}`")))?;
            Some((value, unit))
        }
    };
    Ok(Amplitude { magnitude, phase })
}
