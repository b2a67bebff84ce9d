//! Experiment runner behind the CLI: scenario files, sweeps, RMSD
//! comparisons, residual-order checks, Bode exports and calibration.

pub mod config;
pub mod trace_csv;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::calibrate::fit_compensation;
use crate::estimator::{Compensation, Validity};
use crate::math::Vec2;
use crate::signal::{
    bode_table, gd_frequency_response, hpf_frequency_response, log_grid, lpf_frequency_response,
    write_bode_csv, InjectionConfig,
};
use crate::sim::{
    averaging_residual, run, EstimatorKind, EstimatorSet, Mode, ScenarioConfig, Simulation, Trace,
};

pub use config::{load_scenario, KeyValues};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Run,
    SweepFrequency,
    CompareRmsd,
    ResidualOrder,
    Bode,
    Calibrate,
    Equivalence,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Run => "run",
            ExperimentKind::SweepFrequency => "sweep-frequency",
            ExperimentKind::CompareRmsd => "compare-rmsd",
            ExperimentKind::ResidualOrder => "residual-order",
            ExperimentKind::Bode => "bode",
            ExperimentKind::Calibrate => "calibrate",
            ExperimentKind::Equivalence => "equivalence",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            ExperimentKind::Run,
            ExperimentKind::SweepFrequency,
            ExperimentKind::CompareRmsd,
            ExperimentKind::ResidualOrder,
            ExperimentKind::Bode,
            ExperimentKind::Calibrate,
            ExperimentKind::Equivalence,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }
}

/// How the gradient gain follows the probe period in a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GammaScaling {
    Fixed,
    /// `γ = γ_ref · ε_ref / ε`.
    InverseEpsilon,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bands {
    pub proposed_rmsd: Option<(f64, f64)>,
    pub conventional_rmsd: Option<(f64, f64)>,
    pub require_ordering: bool,
    pub max_runtime: Option<f64>,
    pub slope_proposed: Option<(f64, f64)>,
    pub slope_conventional: Option<(f64, f64)>,
    pub residual_ratio: Option<(f64, f64)>,
    pub equivalence_tol: Option<f64>,
    /// Calibrated RMSD must stay below this multiple of the undistorted one.
    pub calibration_factor: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub source: PathBuf,
    pub scenario: ScenarioConfig,
    pub out_dir: PathBuf,
    pub window: (f64, f64),
    pub sweep_hz: Vec<f64>,
    pub gamma_scaling: GammaScaling,
    /// Estimators measured in sweeps.
    pub measure: EstimatorSet,
    /// `(lo, hi, points)` of the Bode grid, rad/s.
    pub bode_grid: (f64, f64, usize),
    /// Phase error applied to the estimator's probe copy during calibration.
    pub calibration_phase: f64,
    pub bands: Bands,
}

impl ExperimentSpec {
    /// A spec for `kind` with defaults around an existing scenario.
    pub fn new(kind: ExperimentKind, scenario: ScenarioConfig) -> Self {
        let duration = scenario.duration;
        Self {
            kind,
            source: PathBuf::new(),
            out_dir: PathBuf::from("out"),
            window: ((duration / 2.0).min(5.0), duration.min(10.0)),
            sweep_hz: Vec::new(),
            gamma_scaling: GammaScaling::InverseEpsilon,
            measure: scenario.estimators,
            bode_grid: (1.0, 10.0 * scenario.injection.omega_h, 400),
            calibration_phase: 0.0,
            bands: Bands::default(),
            scenario,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |f: &str, m: &str| Error::ConfigInvalid {
            field: f.into(),
            msg: m.into(),
        };
        let (t1, t2) = self.window;
        if !(t2 > t1 && t1 >= 0.0) {
            return Err(bad("experiment.window", "need 0 ≤ t1 < t2"));
        }
        if t2 > self.scenario.duration + 1e-9 {
            return Err(bad("experiment.window", "window ends after the scenario duration"));
        }
        if self.sweep_hz.iter().any(|f| !(*f > 0.0)) {
            return Err(bad("experiment.sweep_hz", "sweep values must be positive"));
        }
        let needs_sweep = matches!(
            self.kind,
            ExperimentKind::SweepFrequency | ExperimentKind::ResidualOrder
        );
        if needs_sweep && self.sweep_hz.len() < 2 {
            return Err(bad("experiment.sweep_hz", "a sweep needs at least two frequencies"));
        }
        if self.kind == ExperimentKind::Calibrate && !matches!(self.scenario.mode, Mode::DrivenSpeed(_)) {
            return Err(bad("scenario.mode", "calibration needs a driven constant-speed run"));
        }
        let (lo, hi, n) = self.bode_grid;
        if !(lo > 0.0 && hi > lo && n >= 2) {
            return Err(bad("experiment.bode_grid", "need 0 < lo < hi and at least 2 points"));
        }
        Ok(())
    }
}

/// Reads an experiment file (scenario sections plus `[experiment]`).
pub fn load_experiment(path: &Path, kind: Option<ExperimentKind>) -> Result<ExperimentSpec> {
    let mut kv = KeyValues::load(path)?;
    let scenario = config::scenario_from(&mut kv)?;
    let inv = |f: &str, m: String| Error::ConfigInvalid {
        field: f.into(),
        msg: m,
    };
    let file_kind = match kv.str("experiment.kind") {
        Some(s) => Some(ExperimentKind::parse(&s).ok_or_else(|| inv("experiment.kind", format!("unknown kind `{s}`")))?),
        None => None,
    };
    let kind = match (kind, file_kind) {
        (Some(a), Some(b)) if a != b => {
            return Err(inv(
                "experiment.kind",
                format!("file declares `{}` but `{}` was requested", b.name(), a.name()),
            ))
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => ExperimentKind::Run,
    };
    let mut spec = ExperimentSpec::new(kind, scenario);
    spec.source = path.to_path_buf();
    if let Some(out) = kv.str("experiment.out") {
        spec.out_dir = config::resolve(path, &out);
    }
    if let Some(w) = kv.band("experiment.window")? {
        spec.window = w;
    }
    if let Some(s) = kv.list("experiment.sweep_hz")? {
        spec.sweep_hz = s;
    }
    if let Some(s) = kv.str("experiment.gamma_scaling") {
        spec.gamma_scaling = match s.as_str() {
            "fixed" => GammaScaling::Fixed,
            "inverse-epsilon" => GammaScaling::InverseEpsilon,
            other => return Err(inv("experiment.gamma_scaling", format!("unknown scaling `{other}`"))),
        };
    }
    if let Some(s) = kv.str("experiment.measure") {
        let mut m = EstimatorSet::NONE;
        for item in s.split(',').map(str::trim) {
            match item {
                "proposed" => m.proposed = true,
                "conventional" => m.conventional = true,
                other => return Err(inv("experiment.measure", format!("unknown estimator `{other}`"))),
            }
        }
        spec.measure = m;
    }
    if let Some(g) = kv.list("experiment.bode_grid")? {
        if g.len() != 3 || g[2] < 2.0 || g[2].fract() != 0.0 {
            return Err(inv("experiment.bode_grid", "expected `lo, hi, points`".into()));
        }
        spec.bode_grid = (g[0], g[1], g[2] as usize);
    }
    if let Some(v) = kv.f64("experiment.calibration_phase")? {
        spec.calibration_phase = v;
    }
    let b = &mut spec.bands;
    b.proposed_rmsd = kv.band("experiment.proposed_rmsd")?;
    b.conventional_rmsd = kv.band("experiment.conventional_rmsd")?;
    b.require_ordering = kv.bool("experiment.require_ordering")?.unwrap_or(false);
    b.max_runtime = kv.f64("experiment.max_runtime")?;
    b.slope_proposed = kv.band("experiment.slope_proposed")?;
    b.slope_conventional = kv.band("experiment.slope_conventional")?;
    b.residual_ratio = kv.band("experiment.residual_ratio")?;
    b.equivalence_tol = kv.f64("experiment.equivalence_tol")?;
    b.calibration_factor = kv.f64("experiment.calibration_factor")?;
    kv.reject_unknown()?;
    spec.validate()?;
    Ok(spec)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub lo: f64,
    pub hi: f64,
    pub pass: bool,
}

impl Check {
    pub fn band(name: impl Into<String>, measured: f64, (lo, hi): (f64, f64)) -> Self {
        Self {
            name: name.into(),
            measured,
            lo,
            hi,
            pass: measured >= lo && measured <= hi,
        }
    }

    pub fn at_most(name: impl Into<String>, measured: f64, hi: f64) -> Self {
        Self::band(name, measured, (f64::NEG_INFINITY, hi))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Report {
    pub kind: String,
    pub values: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub table: Vec<Vec<String>>,
    pub artifacts: Vec<PathBuf>,
}

impl Report {
    fn new(kind: ExperimentKind) -> Self {
        Self {
            kind: kind.name().into(),
            ..Default::default()
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn value(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }

    fn set(&mut self, key: impl Into<String>, v: f64) {
        self.values.insert(key.into(), v);
    }

    /// Human-readable rendering: table, values, checks.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "== {}", self.kind);
        if let Some(widths) = self.table.first().map(|r| r.len()) {
            let mut w = vec![0usize; widths];
            for row in &self.table {
                for (k, cell) in row.iter().enumerate() {
                    w[k] = w[k].max(cell.len());
                }
            }
            for row in &self.table {
                let line: Vec<String> = row.iter().enumerate().map(|(k, c)| format!("{c:>width$}", width = w[k])).collect();
                let _ = writeln!(s, "  {}", line.join("  "));
            }
        }
        for (k, v) in &self.values {
            let _ = writeln!(s, "  {k} = {v:.6e}");
        }
        for n in &self.notes {
            let _ = writeln!(s, "  note: {n}");
        }
        for c in &self.checks {
            let _ = writeln!(
                s,
                "  [{}] {}: measured {:.6e}, expected [{:.4e}, {:.4e}]",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.lo,
                c.hi
            );
        }
        s
    }

    /// Writes `summary.json` into `dir`.
    pub fn write_summary(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join("summary.json");
        let text = serde_json::to_string_pretty(&SummaryFile {
            passed: self.passed(),
            report: self,
        })
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        fs::write(&path, text)?;
        Ok(path)
    }
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    passed: bool,
    #[serde(flatten)]
    report: &'a Report,
}

/// Thread pool with `workers` threads (0 = rayon default).
pub fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))
}

fn write_trace_file(dir: &Path, name: &str, trace: &Trace) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    trace_csv::write_trace(fs::File::create(&path)?, trace)?;
    Ok(path)
}

fn kind_label(k: EstimatorKind) -> &'static str {
    match k {
        EstimatorKind::Proposed => "proposed",
        EstimatorKind::Conventional => "conventional",
        EstimatorKind::Equivalent => "equivalent",
    }
}

fn active_kinds(set: EstimatorSet) -> Vec<EstimatorKind> {
    let mut v = Vec::new();
    if set.proposed {
        v.push(EstimatorKind::Proposed);
    }
    if set.conventional {
        v.push(EstimatorKind::Conventional);
    }
    if set.equivalent {
        v.push(EstimatorKind::Equivalent);
    }
    v
}

/// Fraction of window samples where `kind` reported a valid estimate.
pub fn valid_fraction(trace: &Trace, kind: EstimatorKind, (t1, t2): (f64, f64)) -> f64 {
    let (mut n, mut ok) = (0usize, 0usize);
    for r in trace.records.iter().filter(|r| r.t >= t1 && r.t <= t2) {
        n += 1;
        if r.estimator(kind).is_some_and(|e| e.validity == Validity::Valid) {
            ok += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        ok as f64 / n as f64
    }
}

/// Single run: writes the trace and reports window RMSDs.
pub fn cmd_run(spec: &ExperimentSpec) -> Result<Report> {
    let mut report = Report::new(ExperimentKind::Run);
    let start = Instant::now();
    let trace = run(&spec.scenario)?;
    report.set("runtime_s", start.elapsed().as_secs_f64());
    for k in active_kinds(spec.scenario.estimators) {
        if let Ok(r) = trace.rmsd(k, spec.window.0, spec.window.1) {
            report.set(format!("rmsd_{}", kind_label(k)), r);
        }
    }
    report.artifacts.push(write_trace_file(&spec.out_dir, "trace.csv", &trace)?);
    Ok(report)
}

/// Runs both estimators on one trace and compares their window RMSDs.
pub fn cmd_compare_rmsd(spec: &ExperimentSpec) -> Result<Report> {
    let mut report = Report::new(ExperimentKind::CompareRmsd);
    let mut cfg = spec.scenario.clone();
    cfg.estimators.proposed = true;
    cfg.estimators.conventional = true;
    let start = Instant::now();
    let trace = run(&cfg)?;
    let runtime = start.elapsed().as_secs_f64();
    report.set("runtime_s", runtime);
    if let Some(max) = spec.bands.max_runtime {
        report.checks.push(Check::at_most("runtime_s", runtime, max));
    }
    report.table.push(vec!["estimator".into(), "rmsd_rad".into(), "valid_fraction".into()]);
    let mut measured = BTreeMap::new();
    for (k, band) in [
        (EstimatorKind::Proposed, spec.bands.proposed_rmsd),
        (EstimatorKind::Conventional, spec.bands.conventional_rmsd),
    ] {
        let label = kind_label(k);
        let frac = valid_fraction(&trace, k, spec.window);
        report.set(format!("valid_fraction_{label}"), frac);
        if !cfg.injection_enabled || frac < 0.5 {
            report.notes.push(format!(
                "{label}: low confidence ({:.0}% valid samples in window), no RMSD claimed",
                100.0 * frac
            ));
            report.table.push(vec![label.into(), "-".into(), format!("{frac:.3}")]);
            continue;
        }
        let r = trace.rmsd(k, spec.window.0, spec.window.1)?;
        report.set(format!("rmsd_{label}"), r);
        report.table.push(vec![label.into(), format!("{r:.5}"), format!("{frac:.3}")]);
        measured.insert(label, r);
        if let Some(b) = band {
            report.checks.push(Check::band(format!("rmsd_{label}"), r, b));
        }
    }
    if spec.bands.require_ordering {
        match (measured.get("proposed"), measured.get("conventional")) {
            (Some(p), Some(c)) => report.checks.push(Check::band(
                "rmsd_proposed_minus_conventional",
                p - c,
                (f64::NEG_INFINITY, -f64::MIN_POSITIVE),
            )),
            _ => report.checks.push(Check {
                name: "rmsd_ordering".into(),
                measured: f64::NAN,
                lo: f64::NAN,
                hi: f64::NAN,
                pass: false,
            }),
        }
    }
    report.artifacts.push(write_trace_file(&spec.out_dir, "trace.csv", &trace)?);
    Ok(report)
}

/// Scenario re-tuned for probe frequency `freq_hz`: same steps per period,
/// conventional corners re-derived, `γ` scaled per `scaling`.
pub fn scenario_at_frequency(base: &ScenarioConfig, freq_hz: f64, scaling: GammaScaling) -> ScenarioConfig {
    let mut cfg = base.clone();
    let per_period = (base.injection.epsilon / base.ts).round();
    let mut inj = InjectionConfig::from_hz(base.injection.v_h, freq_hz);
    inj.phi = base.injection.phi;
    inj.phi_p = base.injection.phi_p;
    cfg.injection = inj;
    cfg.ts = inj.epsilon / per_period;
    cfg.lti = None;
    let ratio = base.injection.epsilon / inj.epsilon;
    cfg.decimation = ((base.decimation as f64) * ratio).round().max(1.0) as usize;
    if scaling == GammaScaling::InverseEpsilon {
        cfg.proposed.gamma_alpha = base.proposed.gamma_alpha * ratio;
        cfg.proposed.gamma_beta = base.proposed.gamma_beta * ratio;
    }
    cfg
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("slope", "need at least two matching points"));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::invalid("slope", "log-log fit needs positive values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("slope", "abscissae coincide"));
    }
    Ok(sxy / sxx)
}

fn run_points<T: Send>(
    pool: &rayon::ThreadPool,
    cfgs: &[ScenarioConfig],
    f: impl Fn(&ScenarioConfig) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    pool.install(|| cfgs.par_iter().map(&f).collect())
}

/// Steady error against probe period, with log-log slope fits.
pub fn cmd_sweep_frequency(spec: &ExperimentSpec, pool: &rayon::ThreadPool) -> Result<Report> {
    let mut report = Report::new(ExperimentKind::SweepFrequency);
    let kinds = active_kinds(spec.measure);
    let cfgs: Vec<ScenarioConfig> = spec
        .sweep_hz
        .iter()
        .map(|&f| {
            let mut c = scenario_at_frequency(&spec.scenario, f, spec.gamma_scaling);
            c.estimators.proposed |= spec.measure.proposed;
            c.estimators.conventional |= spec.measure.conventional;
            c
        })
        .collect();
    let (t1, t2) = spec.window;
    let errors = run_points(pool, &cfgs, |c| {
        let trace = run(c)?;
        kinds.iter().map(|&k| trace.rmsd(k, t1, t2)).collect::<Result<Vec<f64>>>()
    })?;
    let eps: Vec<f64> = cfgs.iter().map(|c| c.injection.epsilon).collect();
    let mut header = vec!["freq_hz".to_string(), "epsilon".into(), "gamma_alpha".into()];
    header.extend(kinds.iter().map(|k| format!("rmsd_{}", kind_label(*k))));
    report.table.push(header.clone());
    fs::create_dir_all(&spec.out_dir)?;
    let path = spec.out_dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(&header)?;
    for (c, errs) in cfgs.iter().zip(&errors) {
        let mut row = vec![
            format!("{:e}", c.injection.freq_hz()),
            format!("{:e}", c.injection.epsilon),
            format!("{:e}", c.proposed.gamma_alpha),
        ];
        row.extend(errs.iter().map(|e| format!("{e:e}")));
        w.write_record(&row)?;
        report.table.push(row);
    }
    w.flush()?;
    report.artifacts.push(path);
    for (j, &k) in kinds.iter().enumerate() {
        let series: Vec<f64> = errors.iter().map(|e| e[j]).collect();
        let slope = log_log_slope(&eps, &series)?;
        let label = kind_label(k);
        report.set(format!("slope_{label}"), slope);
        let band = match k {
            EstimatorKind::Proposed => spec.bands.slope_proposed,
            _ => spec.bands.slope_conventional,
        };
        if let Some(b) = band {
            report.checks.push(Check::band(format!("slope_{label}"), slope, b));
        }
    }
    Ok(report)
}

/// Averaging residual `‖i − ī − εy_vS‖_∞` against probe period.
pub fn cmd_residual_order(spec: &ExperimentSpec, pool: &rayon::ThreadPool) -> Result<Report> {
    let mut report = Report::new(ExperimentKind::ResidualOrder);
    let mut hz = spec.sweep_hz.clone();
    hz.sort_by(f64::total_cmp);
    let cfgs: Vec<ScenarioConfig> = hz
        .iter()
        .map(|&f| scenario_at_frequency(&spec.scenario, f, spec.gamma_scaling))
        .collect();
    let (t1, t2) = spec.window;
    let res = run_points(pool, &cfgs, |c| averaging_residual(c, t1, t2))?;
    let header = vec!["freq_hz".to_string(), "epsilon".into(), "residual_a".into(), "ripple_a".into()];
    report.table.push(header.clone());
    fs::create_dir_all(&spec.out_dir)?;
    let path = spec.out_dir.join("residual.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(&header)?;
    for (f, r) in hz.iter().zip(&res) {
        let row = vec![
            format!("{f:e}"),
            format!("{:e}", r.epsilon),
            format!("{:e}", r.max_residual),
            format!("{:e}", r.max_ripple),
        ];
        w.write_record(&row)?;
        report.table.push(row);
    }
    w.flush()?;
    report.artifacts.push(path);
    let eps: Vec<f64> = res.iter().map(|r| r.epsilon).collect();
    let vals: Vec<f64> = res.iter().map(|r| r.max_residual).collect();
    report.set("slope", log_log_slope(&eps, &vals)?);
    for pair in res.windows(2) {
        // larger ε first; normalized to a halving of ε
        let (a, b) = (&pair[0], &pair[1]);
        let raw = a.max_residual / b.max_residual;
        let halving = raw.powf(2f64.ln() / (a.epsilon / b.epsilon).ln());
        let name = format!("ratio_{:e}_{:e}", a.epsilon, b.epsilon);
        report.set(name.clone(), halving);
        if let Some(band) = spec.bands.residual_ratio {
            report.checks.push(Check::band(name, halving, band));
        }
    }
    Ok(report)
}

/// Bode tables of the delayed difference, the HPF and the LPF.
pub fn cmd_bode(spec: &ExperimentSpec) -> Result<Report> {
    let mut report = Report::new(ExperimentKind::Bode);
    let inj = &spec.scenario.injection;
    let chain = spec.scenario.lti_chain();
    let d = inj.epsilon;
    let (lo, hi, n) = spec.bode_grid;
    let grid = log_grid(lo, hi, n)?;
    fs::create_dir_all(&spec.out_dir)?;
    let tables = [
        ("bode_gd.csv", bode_table(&grid, 0.0, |w| gd_frequency_response(d, w))),
        ("bode_hpf.csv", bode_table(&grid, std::f64::consts::PI, |w| hpf_frequency_response(chain.lambda_h, w))),
        ("bode_lpf.csv", bode_table(&grid, 0.0, |w| lpf_frequency_response(chain.lambda_ell, w))),
    ];
    for (name, table) in &tables {
        let path = spec.out_dir.join(name);
        write_bode_csv(fs::File::create(&path)?, table)?;
        report.artifacts.push(path);
    }
    // reference values on a grid ending exactly at ω_h
    let to_wh = log_grid(lo.min(inj.omega_h / 10.0), inj.omega_h, n.max(200))?;
    let gd = bode_table(&to_wh, 0.0, |w| gd_frequency_response(d, w));
    let end = gd.last().copied().ok_or_else(|| Error::invalid("grid", "empty"))?;
    let gd_mag = 10f64.powf(end.mag_db / 20.0);
    report.set("gd_mag_at_omega_h", gd_mag);
    report.set("gd_phase_at_omega_h_rad", end.phase_deg.to_radians());
    let h = hpf_frequency_response(chain.lambda_h, chain.lambda_h);
    report.set("hpf_mag_at_lambda_h", h.norm());
    report.set("hpf_phase_at_lambda_h_rad", h.arg());
    report.checks.push(Check::band("gd_mag_at_omega_h", gd_mag, (1.0 - 1e-9, 1.0 + 1e-9)));
    let tau = std::f64::consts::TAU;
    report.checks.push(Check::band(
        "gd_phase_at_omega_h_rad",
        end.phase_deg.to_radians(),
        (-tau - 1e-9, -tau + 1e-9),
    ));
    report.checks.push(Check::band("hpf_mag_at_lambda_h", h.norm(), (1.0 - 1e-9, 1.0 + 1e-9)));
    let q = std::f64::consts::FRAC_PI_2;
    report.checks.push(Check::band("hpf_phase_at_lambda_h_rad", h.arg(), (q - 1e-9, q + 1e-9)));
    Ok(report)
}

/// Fits the port compensation from a distorted constant-speed run and
/// rechecks the angle error with the fitted gains.
pub fn cmd_calibrate(spec: &ExperimentSpec, pool: &rayon::ThreadPool) -> Result<Report> {
    let mut report = Report::new(ExperimentKind::Calibrate);
    let (t1, t2) = spec.window;
    let mut clean = spec.scenario.clone();
    clean.estimators.proposed = true;
    clean.proposed.compensation = Compensation::default();
    let mut distorted = clean.clone();
    distorted.injection.phi_p = crate::math::wrap_2pi(clean.injection.phi_p + spec.calibration_phase);

    let traces = run_points(pool, &[clean.clone(), distorted.clone()], run)?;
    let (clean_trace, dist_trace) = (&traces[0], &traces[1]);
    let window: Vec<_> = dist_trace
        .records
        .iter()
        .filter(|r| r.t >= t1 && r.t <= t2)
        .filter_map(|r| r.proposed.map(|p| (r.theta, p.y_v)))
        .collect();
    let theta: Vec<f64> = window.iter().map(|w| w.0).collect();
    let y: Vec<_> = window.iter().map(|w| w.1).collect();
    let comp = fit_compensation(&spec.scenario.motor, &theta, &y)?;
    report.set("ell1", comp.ell1);
    report.set("ell2", comp.ell2);
    report.set("ell3", comp.ell3);

    let mut fixed = distorted;
    fixed.proposed.compensation = comp;
    let fixed_trace = run(&fixed)?;
    let r_clean = clean_trace.rmsd(EstimatorKind::Proposed, t1, t2)?;
    let r_dist = dist_trace.rmsd(EstimatorKind::Proposed, t1, t2)?;
    let r_fixed = fixed_trace.rmsd(EstimatorKind::Proposed, t1, t2)?;
    report.set("rmsd_undistorted", r_clean);
    report.set("rmsd_distorted", r_dist);
    report.set("rmsd_compensated", r_fixed);
    report.table.push(vec!["ell1".into(), "ell2".into(), "ell3".into()]);
    report.table.push(vec![
        format!("{:.6}", comp.ell1),
        format!("{:.6}", comp.ell2),
        format!("{:.6}", comp.ell3),
    ]);
    if let Some(factor) = spec.bands.calibration_factor {
        report
            .checks
            .push(Check::at_most("rmsd_compensated", r_fixed, factor * r_clean));
    }
    fs::create_dir_all(&spec.out_dir)?;
    let path = spec.out_dir.join("calibration.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["ell1", "ell2", "ell3", "rmsd_undistorted", "rmsd_distorted", "rmsd_compensated"])?;
    w.write_record(
        [comp.ell1, comp.ell2, comp.ell3, r_clean, r_dist, r_fixed].map(|v| format!("{v:e}")),
    )?;
    w.flush()?;
    report.artifacts.push(path);
    Ok(report)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EquivalenceResult {
    /// `max ‖ŷ_prop − ŷ_eq‖ / ‖ŷ_prop‖` over the run.
    pub max_relative: f64,
    pub max_angle_gap: f64,
    pub samples: usize,
}

/// Streams one simulation with both gradient-type estimators on the same
/// samples and compares their virtual outputs.
pub fn equivalence_run(base: &ScenarioConfig) -> Result<EquivalenceResult> {
    let mut cfg = base.clone();
    cfg.estimators.proposed = true;
    cfg.estimators.equivalent = true;
    cfg.proposed.compensation = Compensation::default();
    let mut sim = Simulation::new(cfg.clone())?;
    let mut out = EquivalenceResult::default();
    for _ in 0..=cfg.steps() {
        let r = sim.step()?;
        let (Some(p), Some(e)) = (r.proposed, r.equivalent) else {
            continue;
        };
        if p.validity == Validity::WarmingUp || e.validity == Validity::WarmingUp {
            continue;
        }
        let a = Vec2::new(p.y_v.y1, p.y_v.y2);
        let b = Vec2::new(e.y_v.y1, e.y_v.y2);
        if a.norm() > 0.0 {
            out.max_relative = out.max_relative.max((a - b).norm() / a.norm());
        }
        out.max_angle_gap = out.max_angle_gap.max((p.theta_hat - e.theta_hat).abs());
        out.samples += 1;
    }
    Ok(out)
}

pub fn cmd_equivalence(spec: &ExperimentSpec) -> Result<Report> {
    let mut report = Report::new(ExperimentKind::Equivalence);
    let res = equivalence_run(&spec.scenario)?;
    report.set("max_relative", res.max_relative);
    report.set("max_angle_gap_rad", res.max_angle_gap);
    report.set("samples", res.samples as f64);
    if let Some(tol) = spec.bands.equivalence_tol {
        report.checks.push(Check::at_most("max_relative", res.max_relative, tol));
    }
    Ok(report)
}

/// Dispatches on `spec.kind` and writes the summary file.
pub fn run_experiment(spec: &ExperimentSpec, workers: usize) -> Result<Report> {
    spec.validate()?;
    let pool = worker_pool(workers)?;
    let mut report = match spec.kind {
        ExperimentKind::Run => cmd_run(spec)?,
        ExperimentKind::CompareRmsd => cmd_compare_rmsd(spec)?,
        ExperimentKind::SweepFrequency => cmd_sweep_frequency(spec, &pool)?,
        ExperimentKind::ResidualOrder => cmd_residual_order(spec, &pool)?,
        ExperimentKind::Bode => cmd_bode(spec)?,
        ExperimentKind::Calibrate => cmd_calibrate(spec, &pool)?,
        ExperimentKind::Equivalence => cmd_equivalence(spec)?,
    };
    let summary = report.write_summary(&spec.out_dir)?;
    report.artifacts.push(summary);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [1e-3, 5e-4, 2.5e-4];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        assert!((log_log_slope(&x, &y).unwrap() - 1.5).abs() < 1e-12);
        assert!(log_log_slope(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn frequency_retune_keeps_alignment() {
        let base = ScenarioConfig::default();
        let c = scenario_at_frequency(&base, 2000.0, GammaScaling::InverseEpsilon);
        assert!((c.injection.epsilon / c.ts - 50.0).abs() < 1e-9);
        assert!((c.proposed.gamma_alpha - 2e4).abs() < 1e-6);
        assert_eq!(c.decimation, 20);
        let f = scenario_at_frequency(&base, 500.0, GammaScaling::Fixed);
        assert_eq!(f.proposed.gamma_alpha, 1e4);
    }

    #[test]
    fn kinds_round_trip() {
        for k in ["run", "sweep-frequency", "compare-rmsd", "residual-order", "bode", "calibrate", "equivalence"] {
            assert_eq!(ExperimentKind::parse(k).unwrap().name(), k);
        }
        assert!(ExperimentKind::parse("plot").is_none());
    }

    #[test]
    fn check_bands() {
        assert!(Check::band("x", 1.0, (0.5, 1.5)).pass);
        assert!(!Check::band("x", f64::NAN, (0.5, 1.5)).pass);
        assert!(Check::at_most("x", -3.0, 0.0).pass);
    }
}
