//! Plain-text scenario / experiment files.
//!
//! ```text
//! # comment
//! [section]
//! key = value
//! ```
//!
//! Lists are comma-separated; time/value pairs are written `t:v`. An
//! `[experiment]` section may name a `base` file whose keys are loaded first
//! and then overridden by the including file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::control::{ControllerConfig, DecouplingInductance, PiGains};
use crate::error::{Error, Result};
use crate::estimator::{Compensation, PllGains, ProposedConfig};
use crate::motor::{MotorParams, MotorState, DEFAULT_FRICTION};
use crate::signal::{InjectionConfig, LtiChainConfig};
use crate::sim::{EstimatorSet, FeedbackSource, LoadProfile, Mode, ScenarioConfig, SpeedProfile};

#[derive(Clone, Debug)]
struct Entry {
    value: String,
    path: String,
    line: usize,
    used: bool,
}

/// Parsed `section.key → value` table with provenance for error messages.
#[derive(Clone, Debug, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, Entry>,
    sections: Vec<String>,
}

impl KeyValues {
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut kv = KeyValues::default();
        let mut section: Option<String> = None;
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let err = |msg: String| Error::ConfigParse {
                path: path.to_string(),
                line,
                msg,
            };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(format!("unterminated section header `{content}`")))?
                    .trim();
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(err(format!("bad section name `{name}`")));
                }
                if !kv.sections.iter().any(|s| s == name) {
                    kv.sections.push(name.to_string());
                }
                section = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(err(format!("expected `key = value`, found `{content}`")));
            };
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(err(format!("bad key `{key}`")));
            }
            let Some(sec) = &section else {
                return Err(err(format!("key `{key}` appears before any [section]")));
            };
            let full = format!("{sec}.{key}");
            if kv.entries.get(&full).is_some_and(|e| e.path == path) {
                return Err(err(format!("duplicate key `{full}`")));
            }
            kv.entries.insert(
                full,
                Entry {
                    value: value.trim().to_string(),
                    path: path.to_string(),
                    line,
                    used: false,
                },
            );
        }
        Ok(kv)
    }

    /// Reads `path`, resolving an `experiment.base` include first.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let name = path.display().to_string();
        let own = KeyValues::parse(&text, &name)?;
        let Some(base) = own.entries.get("experiment.base") else {
            return Ok(own);
        };
        let base_path = path.parent().unwrap_or(Path::new(".")).join(&base.value);
        if base_path == path {
            return Err(Error::ConfigParse {
                path: name,
                line: base.line,
                msg: "file includes itself".into(),
            });
        }
        let mut merged = KeyValues::load(&base_path)?;
        for s in own.sections {
            if !merged.sections.contains(&s) {
                merged.sections.push(s);
            }
        }
        for (k, mut e) in own.entries {
            if k == "experiment.base" {
                e.used = true;
            }
            merged.entries.insert(k, e);
        }
        Ok(merged)
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.iter().any(|s| s == section)
    }

    fn take(&mut self, key: &str) -> Option<(String, String, usize)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.value.clone(), e.path.clone(), e.line)
        })
    }

    fn parse_err(path: String, line: usize, key: &str, msg: impl std::fmt::Display) -> Error {
        Error::ConfigParse {
            path,
            line,
            msg: format!("`{key}`: {msg}"),
        }
    }

    pub fn str(&mut self, key: &str) -> Option<String> {
        self.take(key).map(|(v, _, _)| v)
    }

    pub fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, p, l)) => parse_f64(&v)
                .map(Some)
                .ok_or_else(|| Self::parse_err(p, l, key, format!("expected a number, found `{v}`"))),
        }
    }

    pub fn u64(&mut self, key: &str) -> Result<Option<u64>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, p, l)) => v
                .parse::<u64>()
                .map(Some)
                .map_err(|_| Self::parse_err(p, l, key, format!("expected a non-negative integer, found `{v}`"))),
        }
    }

    pub fn bool(&mut self, key: &str) -> Result<Option<bool>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, p, l)) => match v.as_str() {
                "true" | "yes" | "on" | "1" => Ok(Some(true)),
                "false" | "no" | "off" | "0" => Ok(Some(false)),
                _ => Err(Self::parse_err(p, l, key, format!("expected true/false, found `{v}`"))),
            },
        }
    }

    pub fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, p, l)) => v
                .split(',')
                .map(|s| parse_f64(s.trim()))
                .collect::<Option<Vec<_>>>()
                .map(Some)
                .ok_or_else(|| Self::parse_err(p, l, key, format!("expected a list of numbers, found `{v}`"))),
        }
    }

    pub fn pairs(&mut self, key: &str) -> Result<Option<Vec<(f64, f64)>>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, p, l)) => v
                .split(',')
                .map(|item| {
                    let (a, b) = item.split_once(':')?;
                    Some((parse_f64(a.trim())?, parse_f64(b.trim())?))
                })
                .collect::<Option<Vec<_>>>()
                .map(Some)
                .ok_or_else(|| Self::parse_err(p, l, key, format!("expected `t:v` pairs, found `{v}`"))),
        }
    }

    /// Fixed-size list, e.g. a band `lo, hi`.
    pub fn band(&mut self, key: &str) -> Result<Option<(f64, f64)>> {
        let line = self.entries.get(key).map(|e| (e.path.clone(), e.line));
        match self.list(key)? {
            None => Ok(None),
            Some(v) if v.len() == 2 && v[0] <= v[1] => Ok(Some((v[0], v[1]))),
            Some(_) => {
                let (p, l) = line.unwrap_or_default();
                Err(Self::parse_err(p, l, key, "expected `lo, hi` with lo ≤ hi"))
            }
        }
    }

    /// Errors on the first key that no reader consumed.
    pub fn reject_unknown(&self) -> Result<()> {
        let mut unknown: Vec<&Entry> = Vec::new();
        let mut names = Vec::new();
        for (k, e) in &self.entries {
            if !e.used {
                unknown.push(e);
                names.push(k.clone());
            }
        }
        match unknown.first() {
            None => Ok(()),
            Some(e) => Err(Error::ConfigParse {
                path: e.path.clone(),
                line: e.line,
                msg: format!("unknown key `{}`", names[0]),
            }),
        }
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    let v: f64 = match s {
        "pi" => std::f64::consts::PI,
        "-pi" => -std::f64::consts::PI,
        _ => s.parse().ok()?,
    };
    v.is_finite().then_some(v)
}

fn invalid(field: &str, msg: impl Into<String>) -> Error {
    Error::ConfigInvalid {
        field: field.to_string(),
        msg: msg.into(),
    }
}

fn motor_from(kv: &mut KeyValues) -> Result<MotorParams> {
    if !kv.has_section("motor") {
        return Err(invalid("motor", "missing [motor] section"));
    }
    let preset = match kv.str("motor.preset").as_deref() {
        Some("simulation") => Some(MotorParams::simulation()),
        Some("experimental") => Some(MotorParams::experimental()),
        Some(other) => return Err(invalid("motor.preset", format!("unknown preset `{other}`"))),
        None => None,
    };
    let pole_pairs = kv.u64("motor.pole_pairs")?;
    let fields = [
        ("motor.r_s", kv.f64("motor.r_s")?),
        ("motor.l_d", kv.f64("motor.l_d")?),
        ("motor.l_q", kv.f64("motor.l_q")?),
        ("motor.flux", kv.f64("motor.flux")?),
        ("motor.inertia", kv.f64("motor.inertia")?),
    ];
    let friction = kv.f64("motor.friction")?;
    let mut p = match preset {
        Some(p) => p,
        None => {
            if pole_pairs.is_none() {
                return Err(invalid("motor.pole_pairs", "missing (give a preset or every parameter)"));
            }
            if let Some((name, _)) = fields.iter().find(|(_, v)| v.is_none()) {
                return Err(invalid(name, "missing (give a preset or every parameter)"));
            }
            // every field is overwritten below
            MotorParams {
                pole_pairs: 1,
                r_s: 0.0,
                l_d: 0.0,
                l_q: 0.0,
                flux: 0.0,
                inertia: 0.0,
                friction: DEFAULT_FRICTION,
            }
        }
    };
    if let Some(n) = pole_pairs {
        p.pole_pairs = u32::try_from(n).map_err(|_| invalid("motor.pole_pairs", "too large"))?;
    }
    for (name, v) in fields {
        if let Some(v) = v {
            match name {
                "motor.r_s" => p.r_s = v,
                "motor.l_d" => p.l_d = v,
                "motor.l_q" => p.l_q = v,
                "motor.flux" => p.flux = v,
                _ => p.inertia = v,
            }
        }
    }
    if let Some(f) = friction {
        p.friction = f;
    }
    p.validate().map_err(|e| invalid("motor", e.to_string()))?;
    Ok(p)
}

fn injection_from(kv: &mut KeyValues) -> Result<(InjectionConfig, bool)> {
    let v_h = kv.f64("injection.v_h")?.unwrap_or(1.0);
    let freq = kv.f64("injection.freq_hz")?;
    let eps = kv.f64("injection.epsilon")?;
    let mut inj = match (freq, eps) {
        (Some(_), Some(_)) => return Err(invalid("injection", "give either freq_hz or epsilon, not both")),
        (Some(f), None) if f > 0.0 => InjectionConfig::from_hz(v_h, f),
        (None, Some(e)) if e > 0.0 => InjectionConfig::from_period(v_h, e),
        (None, None) => InjectionConfig::from_period(v_h, 1e-3),
        _ => return Err(invalid("injection", "frequency must be positive")),
    };
    if let Some(phi) = kv.f64("injection.phi")? {
        inj.phi = phi;
    }
    if let Some(phi_p) = kv.f64("injection.phi_p")? {
        inj.phi_p = phi_p;
    }
    let enabled = kv.bool("injection.enabled")?.unwrap_or(true);
    if enabled {
        inj.validate().map_err(|e| invalid("injection", e.to_string()))?;
    }
    Ok((inj, enabled))
}

fn estimator_set(name: &str) -> Result<EstimatorSet> {
    let mut set = EstimatorSet::NONE;
    for item in name.split(',').map(str::trim) {
        match item {
            "proposed" => set.proposed = true,
            "conventional" => set.conventional = true,
            "both" => {
                set.proposed = true;
                set.conventional = true;
            }
            "equivalent" => set.equivalent = true,
            "all" => {
                set = EstimatorSet {
                    proposed: true,
                    conventional: true,
                    equivalent: true,
                }
            }
            "none" => {}
            other => return Err(invalid("estimator.set", format!("unknown estimator `{other}`"))),
        }
    }
    Ok(set)
}

fn feedback(name: &str) -> Result<FeedbackSource> {
    Ok(match name {
        "proposed" => FeedbackSource::Proposed,
        "conventional" => FeedbackSource::Conventional,
        "equivalent" => FeedbackSource::Equivalent,
        "sensor" => FeedbackSource::Sensor,
        other => return Err(invalid("estimator.feedback", format!("unknown source `{other}`"))),
    })
}

fn estimators_from(
    kv: &mut KeyValues,
    cfg: &mut ScenarioConfig,
) -> Result<()> {
    if let Some(s) = kv.str("estimator.set") {
        cfg.estimators = estimator_set(&s)?;
    }
    if let Some(s) = kv.str("estimator.feedback") {
        cfg.feedback = feedback(&s)?;
    }
    let mut p = ProposedConfig::default();
    if let Some(g) = kv.f64("estimator.gamma")? {
        p.gamma_alpha = g;
        p.gamma_beta = g;
    }
    if let Some(g) = kv.f64("estimator.gamma_alpha")? {
        p.gamma_alpha = g;
    }
    if let Some(g) = kv.f64("estimator.gamma_beta")? {
        p.gamma_beta = g;
    }
    let mut c = Compensation::default();
    if let Some(v) = kv.f64("estimator.ell1")? {
        c.ell1 = v;
    }
    if let Some(v) = kv.f64("estimator.ell2")? {
        c.ell2 = v;
    }
    if let Some(v) = kv.f64("estimator.ell3")? {
        c.ell3 = v;
    }
    c.validate().map_err(|e| invalid("estimator.ell", e.to_string()))?;
    p.compensation = c;
    if let Some(v) = kv.f64("estimator.confidence_band")? {
        if !(v > 0.0 && v < 1.0) {
            return Err(invalid("estimator.confidence_band", "must lie in (0, 1)"));
        }
        p.confidence_band = v;
    }
    if let Some(v) = kv.f64("estimator.initial_theta")? {
        p.initial_theta = v;
    }
    if !(p.gamma_alpha > 0.0 && p.gamma_beta > 0.0) {
        return Err(invalid("estimator.gamma", "must be positive"));
    }
    cfg.proposed = p;
    if let Some(w) = kv.f64("estimator.omega_star")? {
        cfg.omega_star = w;
    }
    let lh = kv.f64("estimator.lambda_h")?;
    let ll = kv.f64("estimator.lambda_ell")?;
    if lh.is_some() || ll.is_some() {
        let tuned = LtiChainConfig::tuned(cfg.injection.omega_h, cfg.omega_star);
        cfg.lti = Some(LtiChainConfig {
            lambda_h: lh.unwrap_or(tuned.lambda_h),
            lambda_ell: ll.unwrap_or(tuned.lambda_ell),
            omega_star: cfg.omega_star,
        });
    }
    let mut pll = PllGains::default();
    if let Some(v) = kv.f64("estimator.pll_kp")? {
        pll.kp = v;
    }
    if let Some(v) = kv.f64("estimator.pll_ki")? {
        pll.ki = v;
    }
    cfg.pll = pll;
    Ok(())
}

fn controller_from(kv: &mut KeyValues) -> Result<ControllerConfig> {
    let mut c = ControllerConfig::default();
    let gains = |kv: &mut KeyValues, kp: &str, ki: &str, d: PiGains| -> Result<PiGains> {
        Ok(PiGains {
            kp: kv.f64(kp)?.unwrap_or(d.kp),
            ki: kv.f64(ki)?.unwrap_or(d.ki),
        })
    };
    c.speed = gains(kv, "controller.speed_kp", "controller.speed_ki", c.speed)?;
    c.current = gains(kv, "controller.current_kp", "controller.current_ki", c.current)?;
    if let Some(v) = kv.f64("controller.omega_ref")? {
        c.omega_ref = v;
    }
    if let Some(v) = kv.f64("controller.i_d_ref")? {
        c.i_d_ref = v;
    }
    if let Some(v) = kv.f64("controller.i_q_ref")? {
        c.i_q_ref = v;
    }
    if let Some(v) = kv.bool("controller.speed_loop")? {
        c.speed_loop = v;
    }
    if let Some(v) = kv.f64("controller.current_filter_cutoff")? {
        c.current_filter_cutoff = Some(v);
    }
    if let Some(v) = kv.f64("controller.current_limit")? {
        c.current_limit = v;
    }
    if let Some(v) = kv.f64("controller.voltage_limit")? {
        c.voltage_limit = v;
    }
    if let Some(s) = kv.str("controller.decoupling") {
        c.decoupling = match s.as_str() {
            "average" => DecouplingInductance::Average,
            "d" => DecouplingInductance::DAxis,
            "q" => DecouplingInductance::QAxis,
            other => DecouplingInductance::Custom(
                parse_f64(other)
                    .ok_or_else(|| invalid("controller.decoupling", format!("expected average|d|q|<henry>, found `{other}`")))?,
            ),
        };
    }
    c.validate().map_err(|e| invalid("controller", e.to_string()))?;
    Ok(c)
}

fn load_from(kv: &mut KeyValues) -> Result<LoadProfile> {
    let kind = kv.str("load.kind").unwrap_or_else(|| "constant".into());
    Ok(match kind.as_str() {
        "constant" => LoadProfile::Constant(kv.f64("load.torque")?.unwrap_or(0.0)),
        "piecewise" => LoadProfile::Piecewise(
            kv.pairs("load.steps")?
                .ok_or_else(|| invalid("load.steps", "required for a piecewise load"))?,
        ),
        "sinusoidal" => LoadProfile::Sinusoidal {
            offset: kv.f64("load.offset")?.unwrap_or(0.0),
            amplitude: kv.f64("load.amplitude")?.unwrap_or(0.0),
            freq_hz: kv.f64("load.freq_hz")?.unwrap_or(0.0),
        },
        other => return Err(invalid("load.kind", format!("unknown load `{other}`"))),
    })
}

fn rpm_or_rad(kv: &mut KeyValues, rad: &str, rpm: &str) -> Result<Option<f64>> {
    match (kv.f64(rad)?, kv.f64(rpm)?) {
        (Some(_), Some(_)) => Err(invalid(rad, format!("give either {rad} or {rpm}"))),
        (Some(w), None) => Ok(Some(w)),
        (None, Some(n)) => Ok(Some(n * std::f64::consts::TAU / 60.0)),
        (None, None) => Ok(None),
    }
}

fn speed_from(kv: &mut KeyValues) -> Result<SpeedProfile> {
    let kind = kv.str("speed.kind").unwrap_or_else(|| "constant".into());
    let profile = match kind.as_str() {
        "constant" => SpeedProfile::constant(
            rpm_or_rad(kv, "speed.omega", "speed.rpm")?
                .ok_or_else(|| invalid("speed.omega", "required for a constant profile"))?,
        ),
        "reversal" => {
            let w = rpm_or_rad(kv, "speed.omega", "speed.rpm")?
                .ok_or_else(|| invalid("speed.omega", "required for a reversal"))?;
            let t0 = kv.f64("speed.t_start")?.ok_or_else(|| invalid("speed.t_start", "required"))?;
            let ramp = kv.f64("speed.ramp")?.unwrap_or(1.0);
            SpeedProfile::reversal(w, t0, ramp)?
        }
        "points" => SpeedProfile::new(
            kv.pairs("speed.points")?
                .ok_or_else(|| invalid("speed.points", "required"))?,
        )?,
        other => return Err(invalid("speed.kind", format!("unknown profile `{other}`"))),
    };
    Ok(profile)
}

/// Builds a scenario from parsed keys (does not check for unknown keys).
pub fn scenario_from(kv: &mut KeyValues) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig {
        motor: motor_from(kv)?,
        ..Default::default()
    };
    let (inj, enabled) = injection_from(kv)?;
    cfg.injection = inj;
    cfg.injection_enabled = enabled;
    estimators_from(kv, &mut cfg)?;
    cfg.controller = controller_from(kv)?;
    cfg.load = load_from(kv)?;

    let mode = kv.str("scenario.mode").unwrap_or_else(|| "closed-loop".into());
    cfg.mode = match mode.as_str() {
        "closed-loop" => {
            if kv.has_section("speed") {
                return Err(invalid("speed", "a speed profile needs mode = driven"));
            }
            Mode::ClosedLoop
        }
        "driven" => Mode::DrivenSpeed(speed_from(kv)?),
        other => return Err(invalid("scenario.mode", format!("unknown mode `{other}`"))),
    };
    let ts = kv.f64("scenario.ts")?;
    let per = kv.u64("scenario.steps_per_period")?;
    cfg.ts = match (ts, per) {
        (Some(_), Some(_)) => return Err(invalid("scenario.ts", "give either ts or steps_per_period")),
        (Some(ts), None) => ts,
        (None, Some(n)) if n > 0 => cfg.injection.epsilon / n as f64,
        (None, Some(_)) => return Err(invalid("scenario.steps_per_period", "must be positive")),
        (None, None) => cfg.injection.epsilon / 50.0,
    };
    if let Some(d) = kv.f64("scenario.duration")? {
        cfg.duration = d;
    }
    if let Some(v) = kv.f64("scenario.noise_std")? {
        cfg.noise_std = v;
    }
    if let Some(v) = kv.u64("scenario.seed")? {
        cfg.seed = v;
    }
    if let Some(v) = kv.u64("scenario.decimation")? {
        cfg.decimation = v as usize;
    }
    if let Some(v) = kv.f64("scenario.divergence_current")? {
        cfg.divergence_current = v;
    }
    let mut init = MotorState::default();
    if let Some(v) = kv.f64("initial.i_alpha")? {
        init.i_alpha = v;
    }
    if let Some(v) = kv.f64("initial.i_beta")? {
        init.i_beta = v;
    }
    if let Some(v) = kv.f64("initial.theta")? {
        init.theta = v;
    }
    if let Some(v) = kv.f64("initial.omega")? {
        init.omega = v;
    }
    cfg.initial = init;
    check_scenario(&cfg)?;
    Ok(cfg)
}

/// Scenario invariants, reported against config field names.
pub fn check_scenario(cfg: &ScenarioConfig) -> Result<()> {
    if cfg.injection_enabled {
        let n = cfg.injection.epsilon / cfg.ts;
        if (n - n.round()).abs() > 1e-9 * n.max(1.0) || n.round() < 1.0 {
            return Err(invalid(
                "scenario.ts",
                format!(
                    "ts = {:e} s does not divide epsilon = {:e} s",
                    cfg.ts, cfg.injection.epsilon
                ),
            ));
        }
        if cfg.duration <= 2.0 * cfg.injection.epsilon {
            return Err(invalid("scenario.duration", "must exceed the estimator warm-up (2·epsilon)"));
        }
    }
    cfg.validate().map_err(|e| invalid("scenario", e.to_string()))
}

/// Reads a scenario file, rejecting unknown keys.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let mut kv = KeyValues::load(path)?;
    let cfg = scenario_from(&mut kv)?;
    kv.reject_unknown()?;
    Ok(cfg)
}

pub fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}
