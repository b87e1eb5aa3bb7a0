//! Plain-text run configuration: `[section]` headers over `key = value`
//! lines, `#`/`;` comment lines, nothing else.
//!
//! Recognized sections are `[model]`, `[simulation]`, `[stability]`,
//! `[identification]` and `[noise]`. Unknown sections and keys are hard
//! errors (with line numbers), so typos cannot silently fall back to
//! defaults. `[identification]` and `[noise]` are fully defaulted; the
//! other sections, when present, must be complete.

use thiserror::Error;

use crate::dde::LeadProfile;
use crate::harness::IdentConfig;
use crate::model::{CFParams, Mode};
use crate::sem::{linspace, SEMConfig};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown section `[{name}]`")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: unknown key `{key}` in section [{section}]")]
    UnknownKey { line: usize, section: &'static str, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {msg}")]
    BadValue { line: usize, key: String, msg: String },
    #[error("section [{section}] is missing required key `{key}`")]
    MissingKey { section: &'static str, key: &'static str },
    #[error("this command needs a [{0}] section in the config")]
    MissingSection(&'static str),
}

/// Which integration scheme `simulate` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// Sampled explicit Euler with a whole-step delay (identification data).
    Euler,
    /// Method-of-steps RK4 on the delay equations (continuous-time studies).
    Dde,
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub horizon: Scalar,
    pub dt: Scalar,
    /// Initial ego speed (m/s).
    pub v0: Scalar,
    /// Initial spacing (m).
    pub dx0: Scalar,
    pub lead: LeadProfile<Scalar>,
    pub mode: Mode,
    pub integrator: Integrator,
}

/// A `min`/`max`/`steps` triple describing one sweep axis.
#[derive(Debug, Clone, Copy)]
pub struct AxisSpec {
    pub min: Scalar,
    pub max: Scalar,
    pub steps: usize,
}

impl AxisSpec {
    pub fn values(&self) -> Vec<Scalar> {
        linspace(self.min, self.max, self.steps)
    }
}

#[derive(Debug, Clone)]
pub struct StabilityConfig {
    pub alpha: AxisSpec,
    pub beta: AxisSpec,
    pub tau: AxisSpec,
    pub slope_s: Scalar,
    pub sem: SEMConfig,
}

#[derive(Debug, Clone)]
pub struct IdentSettings {
    pub bank: IdentConfig<Scalar>,
    /// Per-component relative error below which a step counts as converged.
    pub tol: Scalar,
}

impl Default for IdentSettings {
    fn default() -> Self {
        IdentSettings { bank: IdentConfig::default(), tol: 0.01 }
    }
}

#[derive(Debug, Clone)]
pub struct NoiseConfig {
    /// SNR levels in dB; `inf` means the clean signal.
    pub snr_db: Vec<Scalar>,
    /// Number of seeds per level in studies.
    pub seeds: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { snr_db: vec![Scalar::INFINITY], seeds: 10 }
    }
}

/// Fully parsed configuration. Sections a command does not need may be
/// absent; the `require_*` accessors produce the command-level error.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: Option<CFParams<Scalar>>,
    pub simulation: Option<SimulationConfig>,
    pub stability: Option<StabilityConfig>,
    pub identification: IdentSettings,
    pub noise: NoiseConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let sections = split_sections(text)?;
        let mut cfg = RunConfig {
            model: None,
            simulation: None,
            stability: None,
            identification: IdentSettings::default(),
            noise: NoiseConfig::default(),
        };
        for section in &sections {
            match section.name.as_str() {
                "model" => cfg.model = Some(parse_model(section)?),
                "simulation" => cfg.simulation = Some(parse_simulation(section)?),
                "stability" => cfg.stability = Some(parse_stability(section)?),
                "identification" => cfg.identification = parse_identification(section)?,
                "noise" => cfg.noise = parse_noise(section)?,
                other => {
                    return Err(ConfigError::UnknownSection {
                        line: section.line,
                        name: other.to_string(),
                    })
                }
            }
        }
        Ok(cfg)
    }

    pub fn require_model(&self) -> Result<&CFParams<Scalar>, ConfigError> {
        self.model.as_ref().ok_or(ConfigError::MissingSection("model"))
    }

    pub fn require_simulation(&self) -> Result<&SimulationConfig, ConfigError> {
        self.simulation.as_ref().ok_or(ConfigError::MissingSection("simulation"))
    }

    pub fn require_stability(&self) -> Result<&StabilityConfig, ConfigError> {
        self.stability.as_ref().ok_or(ConfigError::MissingSection("stability"))
    }
}

// ---------------------------------------------------------------------------
// Raw line scan

#[derive(Debug)]
struct RawPair {
    key: String,
    value: String,
    line: usize,
}

#[derive(Debug)]
struct RawSection {
    name: String,
    line: usize,
    pairs: Vec<RawPair>,
}

fn split_sections(text: &str) -> Result<Vec<RawSection>, ConfigError> {
    let mut sections: Vec<RawSection> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let name = inner
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Syntax {
                    line: line_no,
                    msg: "unterminated section header".to_string(),
                })?
                .trim();
            if name.is_empty() {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    msg: "empty section name".to_string(),
                });
            }
            if sections.iter().any(|s| s.name == name) {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    msg: format!("duplicate section `[{name}]`"),
                });
            }
            sections.push(RawSection { name: name.to_string(), line: line_no, pairs: Vec::new() });
        } else if let Some((k, v)) = line.split_once('=') {
            let key = k.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax { line: line_no, msg: "empty key".to_string() });
            }
            let Some(current) = sections.last_mut() else {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    msg: format!("key `{key}` appears before any [section] header"),
                });
            };
            if current.pairs.iter().any(|p| p.key == key) {
                return Err(ConfigError::DuplicateKey { line: line_no, key: key.to_string() });
            }
            current.pairs.push(RawPair {
                key: key.to_string(),
                value: v.trim().to_string(),
                line: line_no,
            });
        } else {
            return Err(ConfigError::Syntax {
                line: line_no,
                msg: format!("expected `[section]` or `key = value`, got `{line}`"),
            });
        }
    }
    Ok(sections)
}

// ---------------------------------------------------------------------------
// Typed extraction

/// Pulls typed values out of one section. Unknown keys are rejected at
/// construction, before any missing-key diagnosis, so a typoed key is
/// reported as itself instead of as an unrelated absence.
struct SectionReader<'a> {
    name: &'static str,
    pairs: &'a [RawPair],
}

impl<'a> SectionReader<'a> {
    fn new(
        name: &'static str,
        section: &'a RawSection,
        allowed: &'static [&'static str],
    ) -> Result<Self, ConfigError> {
        for p in &section.pairs {
            if !allowed.contains(&p.key.as_str()) {
                return Err(ConfigError::UnknownKey {
                    line: p.line,
                    section: name,
                    key: p.key.clone(),
                });
            }
        }
        Ok(SectionReader { name, pairs: &section.pairs })
    }

    fn take(&mut self, key: &str) -> Option<&'a RawPair> {
        self.pairs.iter().find(|p| p.key == key)
    }

    fn float(&mut self, key: &'static str) -> Result<Option<Scalar>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(p) => p
                .value
                .parse::<Scalar>()
                .map(Some)
                .map_err(|_| bad_value(p, format!("`{}` is not a number", p.value))),
        }
    }

    fn require_float(&mut self, key: &'static str) -> Result<Scalar, ConfigError> {
        self.float(key)?.ok_or(ConfigError::MissingKey { section: self.name, key })
    }

    fn usize(&mut self, key: &'static str) -> Result<Option<usize>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(p) => p
                .value
                .parse::<usize>()
                .map(Some)
                .map_err(|_| bad_value(p, format!("`{}` is not a non-negative integer", p.value))),
        }
    }

    fn require_usize(&mut self, key: &'static str) -> Result<usize, ConfigError> {
        self.usize(key)?.ok_or(ConfigError::MissingKey { section: self.name, key })
    }
}

fn bad_value(pair: &RawPair, msg: String) -> ConfigError {
    ConfigError::BadValue { line: pair.line, key: pair.key.clone(), msg }
}

fn parse_model(section: &RawSection) -> Result<CFParams<Scalar>, ConfigError> {
    const KEYS: &[&str] = &[
        "mass_kg", "stiffness", "damping", "slope_s", "delay_tau", "v_low", "v_high", "x0_min",
        "x0_max",
    ];
    let mut r = SectionReader::new("model", section, KEYS)?;
    let params = CFParams::new(
        r.require_float("mass_kg")?,
        r.require_float("stiffness")?,
        r.require_float("damping")?,
        r.require_float("slope_s")?,
        r.require_float("delay_tau")?,
        r.require_float("v_low")?,
        r.require_float("v_high")?,
        r.require_float("x0_min")?,
        r.require_float("x0_max")?,
    );
    params.map_err(|e| ConfigError::Syntax { line: section.line, msg: e.to_string() })
}

/// Lead speed profiles, one per line:
///   `constant <u>`
///   `exp_approach <limit> <gap> <rate>`
///   `multi_sine <base> <amp>:<omega>:<phase> ...`
///   `piecewise <t>:<u> <t>:<u> ...`
fn parse_lead(pair: &RawPair) -> Result<LeadProfile<Scalar>, ConfigError> {
    let mut tokens = pair.value.split_whitespace();
    let kind = tokens
        .next()
        .ok_or_else(|| bad_value(pair, "empty lead profile".to_string()))?;
    let args: Vec<&str> = tokens.collect();
    let num = |s: &str| {
        s.parse::<Scalar>().map_err(|_| bad_value(pair, format!("`{s}` is not a number")))
    };
    let triple = |s: &str| -> Result<[Scalar; 3], ConfigError> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad_value(pair, format!("`{s}` is not a `a:b:c` triple")));
        }
        Ok([num(parts[0])?, num(parts[1])?, num(parts[2])?])
    };
    match kind {
        "constant" => {
            if args.len() != 1 {
                return Err(bad_value(pair, "`constant` takes exactly one speed".to_string()));
            }
            Ok(LeadProfile::Constant(num(args[0])?))
        }
        "exp_approach" => {
            if args.len() != 3 {
                return Err(bad_value(
                    pair,
                    "`exp_approach` takes `<limit> <gap> <rate>`".to_string(),
                ));
            }
            Ok(LeadProfile::ExponentialApproach {
                limit: num(args[0])?,
                gap: num(args[1])?,
                rate: num(args[2])?,
            })
        }
        "multi_sine" => {
            if args.len() < 2 {
                return Err(bad_value(
                    pair,
                    "`multi_sine` takes `<base>` plus at least one `amp:omega:phase`".to_string(),
                ));
            }
            let base = num(args[0])?;
            let mut components = Vec::with_capacity(args.len() - 1);
            for &a in &args[1..] {
                let [amp, omega, phase] = triple(a)?;
                components.push((amp, omega, phase));
            }
            Ok(LeadProfile::MultiSine { base, components })
        }
        "piecewise" => {
            if args.len() < 2 {
                return Err(bad_value(
                    pair,
                    "`piecewise` takes at least two `t:u` samples".to_string(),
                ));
            }
            let mut samples = Vec::with_capacity(args.len());
            for &a in &args {
                let parts: Vec<&str> = a.split(':').collect();
                if parts.len() != 2 {
                    return Err(bad_value(pair, format!("`{a}` is not a `t:u` pair")));
                }
                samples.push((num(parts[0])?, num(parts[1])?));
            }
            if samples.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(bad_value(pair, "piecewise times must strictly increase".to_string()));
            }
            Ok(LeadProfile::PiecewiseLinear(samples))
        }
        other => Err(bad_value(
            pair,
            format!("unknown profile `{other}` (constant, exp_approach, multi_sine, piecewise)"),
        )),
    }
}

fn parse_simulation(section: &RawSection) -> Result<SimulationConfig, ConfigError> {
    const KEYS: &[&str] = &["horizon", "dt", "v0", "dx0", "lead", "mode", "integrator"];
    let mut r = SectionReader::new("simulation", section, KEYS)?;
    let horizon = r.require_float("horizon")?;
    let dt = r.require_float("dt")?;
    let v0 = r.require_float("v0")?;
    let dx0 = r.require_float("dx0")?;
    let lead = match r.take("lead") {
        Some(p) => parse_lead(p)?,
        None => return Err(ConfigError::MissingKey { section: "simulation", key: "lead" }),
    };
    let mode = match r.take("mode") {
        None => Mode::Linear,
        Some(p) => match p.value.as_str() {
            "linear" => Mode::Linear,
            "nonlinear" => Mode::Nonlinear,
            other => {
                return Err(bad_value(p, format!("unknown mode `{other}` (linear, nonlinear)")))
            }
        },
    };
    let integrator = match r.take("integrator") {
        None => Integrator::Euler,
        Some(p) => match p.value.as_str() {
            "euler" => Integrator::Euler,
            "dde" => Integrator::Dde,
            other => {
                return Err(bad_value(p, format!("unknown integrator `{other}` (euler, dde)")))
            }
        },
    };
    if !(horizon > 0.0) || !(dt > 0.0) {
        return Err(ConfigError::Syntax {
            line: section.line,
            msg: format!("horizon and dt must be positive, got {horizon} and {dt}"),
        });
    }
    Ok(SimulationConfig { horizon, dt, v0, dx0, lead, mode, integrator })
}

fn parse_axis(
    r: &mut SectionReader,
    min_key: &'static str,
    max_key: &'static str,
    steps_key: &'static str,
) -> Result<AxisSpec, ConfigError> {
    let axis = AxisSpec {
        min: r.require_float(min_key)?,
        max: r.require_float(max_key)?,
        steps: r.require_usize(steps_key)?,
    };
    if axis.steps == 0 || (axis.steps > 1 && !(axis.min < axis.max)) {
        return Err(ConfigError::Syntax {
            line: 0,
            msg: format!("{min_key}/{max_key}/{steps_key} do not form an ascending axis"),
        });
    }
    Ok(axis)
}

fn parse_stability(section: &RawSection) -> Result<StabilityConfig, ConfigError> {
    const KEYS: &[&str] = &[
        "alpha_min", "alpha_max", "alpha_steps", "beta_min", "beta_max", "beta_steps", "tau_min",
        "tau_max", "tau_steps", "slope_s", "poly_order", "quad_order",
    ];
    let mut r = SectionReader::new("stability", section, KEYS)?;
    let alpha = parse_axis(&mut r, "alpha_min", "alpha_max", "alpha_steps");
    let beta = parse_axis(&mut r, "beta_min", "beta_max", "beta_steps");
    let tau = parse_axis(&mut r, "tau_min", "tau_max", "tau_steps");
    let slope_s = r.require_float("slope_s")?;
    let poly_order = r.usize("poly_order")?.unwrap_or(20);
    let quad_order = r.usize("quad_order")?;
    let fix_line = |e: ConfigError| match e {
        ConfigError::Syntax { line: 0, msg } => ConfigError::Syntax { line: section.line, msg },
        other => other,
    };
    let sem = SEMConfig::new(poly_order)
        .and_then(|c| match quad_order {
            Some(q) => c.with_quad_order(q),
            None => Ok(c),
        })
        .map_err(|e| ConfigError::Syntax { line: section.line, msg: e.to_string() })?;
    Ok(StabilityConfig {
        alpha: alpha.map_err(fix_line)?,
        beta: beta.map_err(fix_line)?,
        tau: tau.map_err(fix_line)?,
        slope_s,
        sem,
    })
}

fn parse_identification(section: &RawSection) -> Result<IdentSettings, ConfigError> {
    const KEYS: &[&str] = &[
        "d_min", "d_max", "lambda", "delta", "eta_learn", "warmup", "scale_dx", "scale_v",
        "scale_dv", "tol",
    ];
    let mut r = SectionReader::new("identification", section, KEYS)?;
    let defaults = IdentSettings::default();
    let bank = IdentConfig {
        d_min: r.usize("d_min")?.unwrap_or(defaults.bank.d_min),
        d_max: r.usize("d_max")?.unwrap_or(defaults.bank.d_max),
        lambda: r.float("lambda")?.unwrap_or(defaults.bank.lambda),
        delta: r.float("delta")?.unwrap_or(defaults.bank.delta),
        eta_learn: r.float("eta_learn")?.unwrap_or(defaults.bank.eta_learn),
        warmup: r.usize("warmup")?.unwrap_or(defaults.bank.warmup),
        scaling: [
            r.float("scale_dx")?.unwrap_or(defaults.bank.scaling[0]),
            r.float("scale_v")?.unwrap_or(defaults.bank.scaling[1]),
            r.float("scale_dv")?.unwrap_or(defaults.bank.scaling[2]),
        ],
    };
    let tol = r.float("tol")?.unwrap_or(defaults.tol);
    if !(tol > 0.0) {
        return Err(ConfigError::Syntax {
            line: section.line,
            msg: format!("tol must be positive, got {tol}"),
        });
    }
    Ok(IdentSettings { bank, tol })
}

fn parse_noise(section: &RawSection) -> Result<NoiseConfig, ConfigError> {
    const KEYS: &[&str] = &["snr_db", "seeds"];
    let mut r = SectionReader::new("noise", section, KEYS)?;
    let defaults = NoiseConfig::default();
    let snr_db = match r.take("snr_db") {
        None => defaults.snr_db,
        Some(p) => {
            let mut levels = Vec::new();
            for tok in p.value.split(',') {
                let tok = tok.trim();
                if tok.is_empty() {
                    continue;
                }
                let v = tok
                    .parse::<Scalar>()
                    .map_err(|_| bad_value(p, format!("`{tok}` is not a dB level")))?;
                if v.is_nan() {
                    return Err(bad_value(p, "dB level cannot be NaN".to_string()));
                }
                levels.push(v);
            }
            if levels.is_empty() {
                return Err(bad_value(p, "need at least one dB level".to_string()));
            }
            levels
        }
    };
    let seeds = r.usize("seeds")?.unwrap_or(defaults.seeds);
    if seeds == 0 {
        return Err(ConfigError::Syntax {
            line: section.line,
            msg: "seeds must be at least 1".to_string(),
        });
    }
    Ok(NoiseConfig { snr_db, seeds })
}
