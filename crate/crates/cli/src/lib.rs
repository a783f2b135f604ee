//! Scenario runner behind the `conveyor` binary.
//!
//! [`run`] reads a TOML scenario, dispatches on its mode and writes
//! `report.json` and/or `scan.csv` (plus `repetitions.csv` for estimates)
//! into the output directory. Every artifact carries the config hash, seed
//! and tool version.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use conveyor_core::belt::{
    differential_q_d, ranging_q_d, rate_mismatch_q_d, simulate_differential_q_d, simulate_q_d, steady_state_q_d,
    BeltScenario, ClockPair,
};
use conveyor_core::biphoton::{BiphotonState, DipGridSpec, DipModel};
use conveyor_core::dispersion::DispersionProfile;
use conveyor_core::estimator::{run_experiment, ExperimentOptions, Mode, NullCurve, ScanSchedule};
use conveyor_core::optics::{DelayDrive, FringeModel, GridSpec, Propagation, PulseSpectrum};
use conveyor_core::relativity::RelativisticDrive;

use config::{need, polynomial, RunMode, ScenarioConfig, Shape};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

fn config_err(section: &str) -> impl Fn(&dyn std::fmt::Display) -> CliError + '_ {
    move |e| CliError::Config(format!("invalid `{section}`: {e}"))
}

fn numerical<E: std::fmt::Display>(module: &'static str) -> impl Fn(E) -> CliError {
    move |e| CliError::Numerical(format!("{module}: {e}"))
}

/// Command-line overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub mode_override: Option<RunMode>,
    pub seed: Option<u64>,
}

/// What a run wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub mode: RunMode,
    pub files: Vec<PathBuf>,
}

struct Provenance {
    sha256: String,
    seed: Option<u64>,
}

impl Provenance {
    fn json(&self) -> Value {
        json!({
            "config_sha256": self.sha256,
            "seed": self.seed,
            "tool": "conveyor",
            "version": VERSION,
        })
    }

    fn csv_header(&self) -> String {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        format!(
            "# config_sha256: {}\n# seed: {}\n# tool: conveyor {}\n",
            self.sha256, seed, VERSION
        )
    }
}

/// Runs the scenario at `config_path`, writing artifacts into `out_dir`.
pub fn run(config_path: &Path, out_dir: &Path, options: &RunOptions) -> Result<RunSummary, CliError> {
    let text = fs::read_to_string(config_path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", config_path.display())))?;
    let cfg = ScenarioConfig::parse(&text)?;
    let mode = match options.mode_override {
        Some(m) => m,
        None => need(&cfg.mode, "mode")?,
    };
    let sha256 = Sha256::digest(text.as_bytes())
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        });
    let seed = options
        .seed
        .or_else(|| cfg.estimate.as_ref().and_then(|e| e.seed))
        .or((mode == RunMode::Estimate).then_some(0));
    let provenance = Provenance { sha256, seed };
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("cannot create output directory {}: {e}", out_dir.display())))?;

    let files = match mode {
        RunMode::Belt | RunMode::Range | RunMode::Differential => {
            let report = belt_report(&cfg, mode)?;
            vec![write_report(out_dir, report, &provenance)?]
        }
        RunMode::Fringe => {
            let rows = fringe_rows(&cfg)?;
            vec![write_csv(
                out_dir,
                "scan.csv",
                "offset_s,j_cross,j_par",
                &rows,
                &provenance,
            )?]
        }
        RunMode::Dip => {
            let rows = dip_rows(&cfg)?;
            vec![write_csv(out_dir, "scan.csv", "offset_s,p_coinc", &rows, &provenance)?]
        }
        RunMode::Estimate => {
            let (report, rows) = estimate(&cfg, seed)?;
            vec![
                write_report(out_dir, report, &provenance)?,
                write_csv(
                    out_dir,
                    "repetitions.csv",
                    "rep,estimate_s,error_s,counts_total",
                    &rows,
                    &provenance,
                )?,
            ]
        }
    };
    Ok(RunSummary { mode, files })
}

fn finite(values: &[(&str, f64)]) -> Result<(), CliError> {
    for (name, v) in values {
        if !v.is_finite() {
            return Err(CliError::Numerical(format!("non-finite {name} = {v}")));
        }
    }
    Ok(())
}

fn write_report(dir: &Path, mut report: Value, provenance: &Provenance) -> Result<PathBuf, CliError> {
    report["provenance"] = provenance.json();
    let path = dir.join("report.json");
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn write_csv(
    dir: &Path,
    name: &str,
    header: &str,
    rows: &[Vec<String>],
    provenance: &Provenance,
) -> Result<PathBuf, CliError> {
    let mut text = provenance.csv_header();
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn clocks(cfg: &ScenarioConfig) -> Result<ClockPair<f64>, CliError> {
    let c = need(&cfg.clocks, "clocks")?;
    let pair = ClockPair::new(need(&c.t0_a, "clocks.t0_a")?, need(&c.t0_b, "clocks.t0_b")?)
        .with_rate(c.rate_b.unwrap_or(1.0))
        .map_err(|e| config_err("clocks.rate_b")(&e))?
        .with_drift(c.drift_b.unwrap_or(0.0));
    Ok(pair)
}

fn belt_scenario(cfg: &ScenarioConfig) -> Result<BeltScenario<f64>, CliError> {
    let b = need(&cfg.belt, "belt")?;
    let transit = need(&b.transit, "belt.T")?;
    let mut scenario = BeltScenario::new(need(&b.s, "belt.s")?, transit)
        .and_then(|s| s.with_return_transit(b.return_transit.unwrap_or(transit)))
        .map_err(|e| config_err("belt")(&e))?;
    if let Some(speed) = b.belt_speed {
        scenario = scenario.with_belt_speed(speed);
    }
    Ok(scenario)
}

fn belt_report(cfg: &ScenarioConfig, mode: RunMode) -> Result<Value, CliError> {
    let scenario = belt_scenario(cfg)?;
    let clocks = clocks(cfg)?;
    let t_eval = cfg
        .belt
        .as_ref()
        .and_then(|b| b.t_eval)
        .unwrap_or_else(|| scenario.transient_end(&clocks) + scenario.transit);
    let belt_err = numerical("belt");
    let report = match mode {
        RunMode::Belt => {
            let simulated = simulate_q_d(&scenario, &clocks, &t_eval).map_err(&belt_err)?;
            let steady = steady_state_q_d(&scenario, &clocks).ok();
            let value = steady.unwrap_or(simulated);
            finite(&[("q_d", value), ("simulated_q_d", simulated)])?;
            let mut r = json!({
                "mode": "belt",
                "value": value,
                "q_d": value,
                "simulated_q_d": simulated,
                "t_eval": t_eval,
                "inferred_offset_s": value / scenario.s,
                "true_offset_s": clocks.offset(),
            });
            if !clocks.is_perfect() {
                let mismatch = rate_mismatch_q_d(&scenario, &clocks, &t_eval).map_err(&belt_err)?;
                r["rate_mismatch_q_d"] = json!(mismatch);
            }
            r
        }
        RunMode::Range => {
            let reading = ranging_q_d(&scenario, &clocks).map_err(&belt_err)?;
            finite(&[("q_d", reading.q_d), ("transit", reading.transit)])?;
            json!({
                "mode": "range",
                "value": reading.q_d,
                "q_d": reading.q_d,
                "transit_s": reading.transit,
                "distance_m": reading.distance,
            })
        }
        RunMode::Differential => {
            let reading = differential_q_d(&scenario, &clocks).map_err(&belt_err)?;
            let simulated = simulate_differential_q_d(&scenario, &clocks, &t_eval).map_err(&belt_err)?;
            finite(&[("q_d1", reading.q_d1), ("q_d2", reading.q_d2), ("sum", reading.sum)])?;
            json!({
                "mode": "differential",
                "value": reading.sum,
                "q_d1": reading.q_d1,
                "q_d2": reading.q_d2,
                "sum": reading.sum,
                "simulated_sum": simulated.sum,
                "t_eval": t_eval,
                "inferred_offset_s": reading.offset(&scenario.s),
                "true_offset_s": clocks.offset(),
            })
        }
        _ => unreachable!("belt_report only handles belt modes"),
    };
    Ok(report)
}

enum Drive {
    Linear(DelayDrive<f64>),
    Relativistic(RelativisticDrive<f64>),
}

fn drive(cfg: &ScenarioConfig) -> Result<Drive, CliError> {
    let d = need(&cfg.drive, "drive")?;
    let v = need(&d.v, "drive.v")?;
    let c = need(&d.c, "drive.c")?;
    let l = d.distance.unwrap_or(0.0);
    if d.relativistic {
        RelativisticDrive::new(v, c, l)
            .map(Drive::Relativistic)
            .map_err(|e| config_err("drive")(&e))
    } else {
        DelayDrive::new(v, c, l)
            .map(Drive::Linear)
            .map_err(|e| config_err("drive")(&e))
    }
}

fn spectrum(cfg: &ScenarioConfig) -> Result<PulseSpectrum<f64>, CliError> {
    let s = need(&cfg.spectrum, "spectrum")?;
    let omega0 = need(&s.omega0, "spectrum.omega0")?;
    let delta_omega = need(&s.delta_omega, "spectrum.delta_omega")?;
    let total = need(&s.total_photons, "spectrum.total_photons")?;
    let built = match s.shape {
        Shape::Gaussian => PulseSpectrum::gaussian(omega0, delta_omega, total),
        Shape::Tabulated => {
            let omega = need(&s.omega, "spectrum.omega")?;
            let n = omega.len();
            let power = need(&s.power, "spectrum.power")?;
            let phase = s.phase.clone().unwrap_or_else(|| vec![0.0; n]);
            PulseSpectrum::tabulated(omega0, delta_omega, total, omega, power, phase)
        }
    };
    built.map_err(|e| config_err("spectrum")(&e))
}

fn dispersion(cfg: &ScenarioConfig, default_center: f64) -> DispersionProfile<f64> {
    match &cfg.dispersion {
        None => DispersionProfile::none(default_center),
        Some(d) => DispersionProfile {
            center: d.center.unwrap_or(default_center),
            diag_to: polynomial(&d.diag_to),
            diag_from: polynomial(&d.diag_from),
            anti_to: polynomial(&d.anti_to),
            anti_from: polynomial(&d.anti_from),
        },
    }
}

fn grid(cfg: &ScenarioConfig) -> (GridSpec, DipGridSpec) {
    let mut optics = GridSpec::default();
    let mut dip = DipGridSpec::default();
    if let Some(g) = &cfg.grid {
        if let Some(p) = g.points {
            optics.points = p;
            dip.points = p;
        }
        if let Some(h) = g.half_span {
            optics.half_span = h;
            dip.half_span = h;
        }
    }
    (optics, dip)
}

fn offsets(cfg: &ScenarioConfig) -> Result<Vec<f64>, CliError> {
    let s = need(&cfg.scan, "scan")?;
    let lo = need(&s.offset_min, "scan.offset_min")?;
    let hi = need(&s.offset_max, "scan.offset_max")?;
    let n = need(&s.points, "scan.points")?;
    if n < 2 || !(hi > lo) {
        return Err(CliError::Config(
            "invalid `scan`: need points >= 2 and offset_max > offset_min".into(),
        ));
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|k| lo + step * k as f64).collect())
}

fn biphoton_state(cfg: &ScenarioConfig) -> Result<BiphotonState<f64>, CliError> {
    let b = need(&cfg.biphoton, "biphoton")?;
    let omega0 = match b.omega0 {
        Some(w) => w,
        None => need(&cfg.spectrum.as_ref().and_then(|s| s.omega0), "biphoton.omega0")?,
    };
    let window = need(&b.coincidence_window, "biphoton.T_c")?;
    let built = match (&b.detuning, &b.density) {
        (Some(x), Some(d)) => BiphotonState::tabulated(omega0, x.clone(), d.clone(), window),
        _ => BiphotonState::gaussian(omega0, need(&b.sigma_q, "biphoton.sigma_q")?, window),
    };
    built.map_err(|e| config_err("biphoton")(&e))
}

fn fringe_rows(cfg: &ScenarioConfig) -> Result<Vec<Vec<String>>, CliError> {
    let spectrum = spectrum(cfg)?;
    let drive = drive(cfg)?;
    let profile = dispersion(cfg, spectrum.omega0);
    let offsets = offsets(cfg)?;
    let (spec, _) = grid(cfg);
    let samples = match &drive {
        Drive::Linear(d) => fringe_samples(&spectrum, d, &profile, spec, &offsets)?,
        Drive::Relativistic(d) => fringe_samples(&spectrum, d, &profile, spec, &offsets)?,
    };
    samples
        .into_iter()
        .map(|(dt, a, b)| {
            finite(&[("j_cross", a), ("j_par", b)])?;
            Ok(vec![num(dt), num(a), num(b)])
        })
        .collect()
}

fn fringe_samples<P: Propagation<f64> + Clone>(
    spectrum: &PulseSpectrum<f64>,
    drive: &P,
    profile: &DispersionProfile<f64>,
    spec: GridSpec,
    offsets: &[f64],
) -> Result<Vec<(f64, f64, f64)>, CliError> {
    let model = FringeModel::new(spectrum, drive, profile, spec).map_err(numerical("optics"))?;
    Ok(model
        .scan(offsets)
        .map_err(numerical("optics"))?
        .into_iter()
        .map(|s| (s.delta_t, s.j_cross, s.j_par))
        .collect())
}

fn dip_rows(cfg: &ScenarioConfig) -> Result<Vec<Vec<String>>, CliError> {
    let state = biphoton_state(cfg)?;
    let drive = drive(cfg)?;
    let profile = dispersion(cfg, state.omega0);
    let offsets = offsets(cfg)?;
    let (_, spec) = grid(cfg);
    let samples = match &drive {
        Drive::Linear(d) => dip_samples(&state, d, &profile, spec, &offsets)?,
        Drive::Relativistic(d) => dip_samples(&state, d, &profile, spec, &offsets)?,
    };
    samples
        .into_iter()
        .map(|(dt, p)| {
            finite(&[("p_coinc", p)])?;
            Ok(vec![num(dt), num(p)])
        })
        .collect()
}

fn dip_samples<P: Propagation<f64> + Clone>(
    state: &BiphotonState<f64>,
    drive: &P,
    profile: &DispersionProfile<f64>,
    spec: DipGridSpec,
    offsets: &[f64],
) -> Result<Vec<(f64, f64)>, CliError> {
    let model = DipModel::new(state, drive, profile, spec).map_err(numerical("biphoton"))?;
    Ok(model
        .scan(offsets)
        .map_err(numerical("biphoton"))?
        .into_iter()
        .map(|s| (s.delta_t, s.p_coinc))
        .collect())
}

fn estimate(cfg: &ScenarioConfig, seed: Option<u64>) -> Result<(Value, Vec<Vec<String>>), CliError> {
    let e = need(&cfg.estimate, "estimate")?;
    let kind: Mode = need(&e.kind, "estimate.kind")?
        .parse()
        .map_err(|m: String| CliError::Config(format!("invalid `estimate.kind`: {m}")))?;
    let schedule = ScanSchedule::uniform(
        need(&e.shift_min, "estimate.shift_min")?,
        need(&e.shift_max, "estimate.shift_max")?,
        need(&e.shift_points, "estimate.shift_points")?,
        e.pulses_per_shift.unwrap_or(1),
        seed.unwrap_or(0),
    )
    .map_err(|err| config_err("estimate")(&err))?;
    let options = ExperimentOptions {
        repetitions: e.repetitions.unwrap_or(20),
        use_complementary: e.use_complementary,
    };
    let truth = clocks(cfg)?.offset();
    let drive = drive(cfg)?;
    let (optics_grid, dip_grid) = grid(cfg);
    let report = match kind {
        Mode::Classical => {
            let spectrum = spectrum(cfg)?;
            let profile = dispersion(cfg, spectrum.omega0);
            match &drive {
                Drive::Linear(d) => {
                    let model = FringeModel::new(&spectrum, d, &profile, optics_grid).map_err(numerical("optics"))?;
                    experiment(&model, truth, &schedule, options)?
                }
                Drive::Relativistic(d) => {
                    let model = FringeModel::new(&spectrum, d, &profile, optics_grid).map_err(numerical("optics"))?;
                    experiment(&model, truth, &schedule, options)?
                }
            }
        }
        Mode::Quantum => {
            let state = biphoton_state(cfg)?;
            let profile = dispersion(cfg, state.omega0);
            match &drive {
                Drive::Linear(d) => {
                    let model = DipModel::new(&state, d, &profile, dip_grid).map_err(numerical("biphoton"))?;
                    experiment(&model, truth, &schedule, options)?
                }
                Drive::Relativistic(d) => {
                    let model = DipModel::new(&state, d, &profile, dip_grid).map_err(numerical("biphoton"))?;
                    experiment(&model, truth, &schedule, options)?
                }
            }
        }
    };
    finite(&[
        ("estimated_offset", report.estimated_offset),
        ("rms_error", report.rms_error),
        ("snr", report.snr),
    ])?;
    let rows = report
        .repetitions
        .iter()
        .map(|r| {
            vec![
                r.rep.to_string(),
                num(r.estimate),
                num(r.error),
                r.counts_total.to_string(),
            ]
        })
        .collect();
    let json = json!({
        "mode": report.mode.to_string(),
        "estimated_offset": report.estimated_offset,
        "true_offset": report.true_offset,
        "rms_error": report.rms_error,
        "bias": report.bias,
        "snr": report.snr,
        "snr_definition": report.snr_definition,
        "predicted_accuracy": report.predicted_accuracy,
        "accuracy_ratio": report.accuracy_ratio,
        "use_complementary": report.use_complementary,
        "repetitions": report.repetitions.len(),
    });
    Ok((json, rows))
}

fn experiment<C: NullCurve<f64>>(
    curve: &C,
    truth: f64,
    schedule: &ScanSchedule<f64>,
    options: ExperimentOptions,
) -> Result<conveyor_core::estimator::EstimateReport<f64>, CliError> {
    run_experiment(curve, truth, schedule, options).map_err(numerical("estimator"))
}
