//! Run configuration: TOML files with a strict schema.
//!
//! Every key is either consumed by the schema or reported as an error, with
//! a suggestion when it looks like a misspelling of a known key. Sections
//! that the selected mode does not use are rejected the same way.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use evwg_core::classical::{IntegratorConfig, PhaseState, Scheme};
use evwg_core::ensemble::{CohortMode, DetectorLayout, EnsembleSpec, Extent};
use evwg_core::quantum::{PotentialMode, QuantumConfig, Recording};
use evwg_core::resonance::{MeanEnergy, SearchBox, DEFAULT_QUAD_POINTS};
use evwg_core::units::{scale_to_dimensionless, DimensionlessParams, PhysicalParams};
use toml::{Table, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    ConvertUnits,
    Freqmap,
    Portrait,
    Fixedpoints,
    Ensemble,
    Detect,
    Quantum,
    Revival,
}

impl Mode {
    pub const ALL: [Mode; 8] = [
        Mode::ConvertUnits,
        Mode::Freqmap,
        Mode::Portrait,
        Mode::Fixedpoints,
        Mode::Ensemble,
        Mode::Detect,
        Mode::Quantum,
        Mode::Revival,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::ConvertUnits => "convert-units",
            Mode::Freqmap => "freqmap",
            Mode::Portrait => "portrait",
            Mode::Fixedpoints => "fixedpoints",
            Mode::Ensemble => "ensemble",
            Mode::Detect => "detect",
            Mode::Quantum => "quantum",
            Mode::Revival => "revival",
        }
    }

    /// Name of the mode's own section, if it has one.
    fn section(self) -> Option<&'static str> {
        match self {
            Mode::ConvertUnits => None,
            m => Some(m.name()),
        }
    }

    fn uses_integrator(self) -> bool {
        matches!(self, Mode::Portrait | Mode::Fixedpoints | Mode::Ensemble | Mode::Detect)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Mode::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Mode::ALL.iter().map(|m| m.name()).collect();
            let hint = suggest(s, &names)
                .map(|k| format!("; did you mean `{k}`?"))
                .unwrap_or_default();
            CliError::config(format!("unknown mode `{s}`{hint}"))
        })
    }
}

/// Which parameter block the run was described with.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamSource {
    Dimensionless,
    Physical(PhysicalParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreqmapConfig {
    pub h_min: f64,
    pub h_max: f64,
    pub n_points: usize,
    pub quad_points: usize,
    pub j_max: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortraitConfig {
    pub seeds: Vec<PhaseState>,
    pub strobes: u32,
    pub lyapunov: bool,
    pub lyapunov_step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedpointsConfig {
    pub search: SearchBox,
    pub periods: Vec<u32>,
    pub j_max: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub spec: EnsembleSpec,
    /// Strictly increasing strobe numbers at which snapshots are written.
    pub strobes: Vec<u32>,
    pub layout: DetectorLayout,
    pub write_atoms: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectConfig {
    pub spec: EnsembleSpec,
    pub s_start: u32,
    pub s_end: u32,
    pub n_per_strobe: usize,
    pub cohort: CohortMode,
    pub layout: DetectorLayout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumRunConfig {
    pub n: usize,
    pub half_width: f64,
    pub qc: QuantumConfig,
    pub sigma: f64,
    pub x0: f64,
    pub y0: f64,
    pub p0x: f64,
    pub p0y: f64,
    pub strobes: u32,
    pub recording: Recording,
    pub asymmetry: bool,
    pub slice_y: f64,
    pub n_r: usize,
    pub n_theta: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RevivalConfig {
    pub sigma: f64,
    pub center: PhaseState,
    pub modes: Vec<MeanEnergy>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    ConvertUnits,
    Freqmap(FreqmapConfig),
    Portrait(PortraitConfig),
    Fixedpoints(FixedpointsConfig),
    Ensemble(EnsembleConfig),
    Detect(DetectConfig),
    Quantum(QuantumRunConfig),
    Revival(RevivalConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub source: ParamSource,
    /// Resolved scaled parameters (converted when given physically).
    pub dp: DimensionlessParams,
    pub seed: u64,
    /// Worker threads; `None` uses all cores.
    pub threads: Option<usize>,
    pub integrator: IntegratorConfig,
    pub out_dir: Option<PathBuf>,
    pub prefix: String,
    pub task: Task,
}

impl RunConfig {
    /// Replaces the seed everywhere it was propagated at load time.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        match &mut self.task {
            Task::Ensemble(c) => c.spec.seed = seed,
            Task::Detect(c) => c.spec.seed = seed,
            _ => {}
        }
    }
}

/// Reads and validates a configuration file. `mode` is the mode requested
/// on the command line; a `mode` key in the file must agree with it.
pub fn load_config(path: &Path, mode: Option<Mode>) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, mode)
}

pub fn parse_config(text: &str, mode: Option<Mode>) -> Result<RunConfig, CliError> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| CliError::Config {
        line: e.span().map(|s| line_of_offset(text, s.start)),
        message: e.message().trim().to_string(),
    })?;
    let src = Source { text };
    let mut top = Section::new("", &root, &src);

    let file_mode = top.opt_str("mode")?.map(|s| s.parse::<Mode>()).transpose()?;
    let mode = match (mode, file_mode) {
        (Some(a), Some(b)) if a != b => {
            return Err(top.err("mode", format!("file declares mode `{b}` but `{a}` was requested")))
        }
        (Some(m), _) | (None, Some(m)) => m,
        (None, None) => return Err(CliError::config("no mode given (command line or `mode` key)")),
    };
    let seed = top.opt_u64("seed")?.unwrap_or(0);
    let threads = top.opt_usize("threads")?;
    if threads == Some(0) {
        return Err(top.err("threads", "must be >= 1"));
    }

    let mut sections: Vec<&'static str> = vec!["dimensionless", "physical", "output"];
    let (source, dp) = read_params(&mut top, mode)?;
    let (out_dir, prefix) = match top.opt_sub("output")? {
        Some(mut s) => {
            let dir = s.opt_str("dir")?.map(PathBuf::from);
            let prefix = s.opt_str("prefix")?.unwrap_or_default();
            if prefix.contains(['/', '\\']) {
                return Err(s.err("prefix", "must not contain path separators"));
            }
            s.finish()?;
            (dir, prefix)
        }
        None => (None, String::new()),
    };

    let integrator = if mode.uses_integrator() {
        sections.push("integrator");
        read_integrator(&mut top)?
    } else {
        IntegratorConfig::default()
    };

    let task = match mode.section() {
        None => Task::ConvertUnits,
        Some(name) => {
            sections.push(name);
            let mut s = top
                .opt_sub(name)?
                .ok_or_else(|| CliError::config(format!("mode `{mode}` requires a [{name}] section")))?;
            let task = match mode {
                Mode::Freqmap => Task::Freqmap(read_freqmap(&mut s, &dp)?),
                Mode::Portrait => Task::Portrait(read_portrait(&mut s)?),
                Mode::Fixedpoints => Task::Fixedpoints(read_fixedpoints(&mut s)?),
                Mode::Ensemble => Task::Ensemble(read_ensemble(&mut s, &dp, seed)?),
                Mode::Detect => Task::Detect(read_detect(&mut s, &dp, seed)?),
                Mode::Quantum => Task::Quantum(read_quantum(&mut s, &dp)?),
                Mode::Revival => Task::Revival(read_revival(&mut s)?),
                Mode::ConvertUnits => unreachable!("has no section"),
            };
            s.finish()?;
            task
        }
    };

    // sections belonging to other modes are reported with their own message
    for (key, value) in root.iter() {
        if value.is_table() && !sections.contains(&key.as_str()) {
            let known = Mode::ALL.iter().filter_map(|m| m.section()).any(|n| n == key) || key == "integrator";
            if known {
                return Err(top.err(key, format!("section [{key}] is not used by mode `{mode}`")));
            }
        }
        if sections.contains(&key.as_str()) {
            top.used.insert(key.clone());
        }
    }
    top.finish()?;

    Ok(RunConfig {
        mode,
        source,
        dp,
        seed,
        threads,
        integrator,
        out_dir,
        prefix,
        task,
    })
}

fn read_params(top: &mut Section, mode: Mode) -> Result<(ParamSource, DimensionlessParams), CliError> {
    let dim = top.opt_sub("dimensionless")?;
    let phys = top.opt_sub("physical")?;
    match (dim, phys) {
        (Some(_), Some(_)) => Err(top.err(
            "physical",
            "both [dimensionless] and [physical] are present; give exactly one",
        )),
        (None, None) => Err(CliError::config("one of [dimensionless] or [physical] is required")),
        (Some(_), None) if mode == Mode::ConvertUnits => Err(top.err(
            "dimensionless",
            "mode `convert-units` converts a [physical] block; [dimensionless] is not accepted",
        )),
        (Some(mut s), None) => {
            let dp = DimensionlessParams {
                xi: s.f64("xi")?,
                r1: s.f64("r1")?,
                omega: s.f64("omega")?,
                eps: s.f64("eps")?,
                kbar: s.f64("kbar")?,
            };
            s.finish()?;
            dp.validate()
                .map_err(|e| CliError::config(format!("[dimensionless]: {e}")))?;
            Ok((ParamSource::Dimensionless, dp))
        }
        (None, Some(mut s)) => {
            let base = match s.opt_str("preset")?.as_deref() {
                None => None,
                Some("helium") => Some(PhysicalParams::helium()),
                Some(other) => return Err(s.err("preset", format!("unknown preset `{other}`; known: helium"))),
            };
            let mut get = |key: &'static str, default: Option<f64>| -> Result<f64, CliError> {
                match (s.opt_f64(key)?, default) {
                    (Some(v), _) | (None, Some(v)) => Ok(v),
                    (None, None) => Err(s.missing(key)),
                }
            };
            let b = base.as_ref();
            let p = PhysicalParams {
                gamma: get("gamma", b.map(|p| p.gamma))?,
                lambda: get("lambda", b.map(|p| p.lambda))?,
                mass: get("mass", b.map(|p| p.mass))?,
                i_sat: get("i_sat", b.map(|p| p.i_sat))?,
                i0: get("i0", b.map(|p| p.i0))?,
                detuning: get("detuning", b.map(|p| p.detuning))?,
                n_index: get("n_index", b.map(|p| p.n_index))?,
                theta: get("theta", b.map(|p| p.theta))?,
                r1_phys: get("r1_phys", b.map(|p| p.r1_phys))?,
                omega_ref: get("omega_ref", b.map(|p| p.omega_ref))?,
                temperature: (0.0, 0.0),
            };
            let omega = s.f64("omega")?;
            let eps = s.f64("eps")?;
            let temperature = match (s.opt_pair("temperature")?, b) {
                (Some(t), _) => t,
                (None, Some(b)) => b.temperature,
                (None, None) => return Err(s.missing("temperature")),
            };
            s.finish()?;
            let p = PhysicalParams { temperature, ..p };
            let dp =
                scale_to_dimensionless(&p, omega, eps).map_err(|e| CliError::config(format!("[physical]: {e}")))?;
            Ok((ParamSource::Physical(p), dp))
        }
    }
}

fn read_integrator(top: &mut Section) -> Result<IntegratorConfig, CliError> {
    let default = IntegratorConfig::default();
    let Some(mut s) = top.opt_sub("integrator")? else {
        return Ok(default);
    };
    let steps = s.opt_u32("steps_per_period")?.unwrap_or(default.steps_per_period);
    let scheme = match s.opt_str("scheme")?.as_deref() {
        None => default.scheme,
        Some("forest_ruth4") => Scheme::ForestRuth4,
        Some("leapfrog2") => Scheme::Leapfrog2,
        Some(other) => {
            return Err(s.err(
                "scheme",
                format!("unknown scheme `{other}`; expected `forest_ruth4` or `leapfrog2`"),
            ))
        }
    };
    s.finish()?;
    let cfg = IntegratorConfig::new(steps, scheme);
    cfg.validate().map_err(|e| s_err_plain("integrator", e))?;
    Ok(cfg)
}

fn s_err_plain(section: &str, e: evwg_core::Error) -> CliError {
    CliError::config(format!("[{section}]: {e}"))
}

fn read_freqmap(s: &mut Section, dp: &DimensionlessParams) -> Result<FreqmapConfig, CliError> {
    let c = FreqmapConfig {
        h_min: s.f64("h_min")?,
        h_max: s.f64("h_max")?,
        n_points: s.usize("n_points")?,
        quad_points: s.opt_usize("quad_points")?.unwrap_or(DEFAULT_QUAD_POINTS),
        j_max: s.opt_u32("j_max")?.unwrap_or(8),
    };
    let floor = dp.floor_energy();
    if !(c.h_min > floor) {
        return Err(s.err("h_min", format!("must exceed the potential floor {floor}")));
    }
    if !(c.h_max > c.h_min) {
        return Err(s.err("h_max", "must exceed h_min"));
    }
    if c.n_points == 0 || c.quad_points == 0 {
        return Err(s.err("n_points", "n_points and quad_points must be >= 1"));
    }
    Ok(c)
}

fn read_portrait(s: &mut Section) -> Result<PortraitConfig, CliError> {
    let x_min = s.f64("x_min")?;
    let x_max = s.f64("x_max")?;
    let n_seeds = s.usize("n_seeds")?;
    let px0 = s.opt_f64("px0")?.unwrap_or(0.0);
    let y0 = s.opt_f64("y0")?.unwrap_or(0.0);
    let py0 = s.opt_f64("py0")?.unwrap_or(0.0);
    let strobes = s.u32("strobes")?;
    let in_plane = y0 == 0.0 && py0 == 0.0;
    let lyapunov = s.opt_bool("lyapunov")?.unwrap_or(in_plane);
    if lyapunov && !in_plane {
        return Err(s.err("lyapunov", "the in-plane exponent needs y0 = py0 = 0"));
    }
    let lyapunov_step = s.opt_f64("lyapunov_step")?.unwrap_or(1e-7);
    if n_seeds == 0 {
        return Err(s.err("n_seeds", "must be >= 1"));
    }
    if strobes == 0 {
        return Err(s.err("strobes", "must be >= 1"));
    }
    if !(lyapunov_step > 0.0) {
        return Err(s.err("lyapunov_step", "must be > 0"));
    }
    let seeds = (0..n_seeds)
        .map(|i| {
            let x = if n_seeds == 1 {
                x_min
            } else {
                x_min + (x_max - x_min) * i as f64 / (n_seeds - 1) as f64
            };
            PhaseState::new(x, y0, px0, py0)
        })
        .collect();
    Ok(PortraitConfig {
        seeds,
        strobes,
        lyapunov,
        lyapunov_step,
    })
}

fn read_fixedpoints(s: &mut Section) -> Result<FixedpointsConfig, CliError> {
    let search = SearchBox {
        x: (s.f64("x_min")?, s.f64("x_max")?),
        px: (s.f64("px_min")?, s.f64("px_max")?),
        nx: s.usize("nx")?,
        npx: s.usize("npx")?,
    };
    let periods = s.opt_u32_list("periods")?.unwrap_or_else(|| vec![1, 2]);
    let j_max = s.opt_u32("j_max")?.unwrap_or(8);
    if search.nx == 0 || search.npx == 0 {
        return Err(s.err("nx", "nx and npx must be >= 1"));
    }
    if periods.is_empty() || periods.contains(&0) {
        return Err(s.err("periods", "must be a non-empty list of positive integers"));
    }
    Ok(FixedpointsConfig { search, periods, j_max })
}

/// Reads the detector binning keys shared by `[ensemble]` and `[detect]`.
fn read_layout(s: &mut Section, dp: &DimensionlessParams) -> Result<DetectorLayout, CliError> {
    let default = DetectorLayout::for_fiber(dp.r1);
    let nx = s.opt_usize("nx")?.unwrap_or(default.nx);
    let ny = s.opt_usize("ny")?.unwrap_or(default.ny);
    let half = s.opt_f64("half_extent")?.unwrap_or(default.extent.xmax);
    let radial_bins = s.opt_usize("radial_bins")?.unwrap_or(default.radial_bins);
    let r_max = s.opt_f64("r_max")?.unwrap_or(default.r_max);
    if nx == 0 || ny == 0 || radial_bins == 0 {
        return Err(s.err("nx", "nx, ny and radial_bins must be >= 1"));
    }
    if !(half > 0.0) {
        return Err(s.err("half_extent", "must be > 0"));
    }
    if !(r_max > 0.0) {
        return Err(s.err("r_max", "must be > 0"));
    }
    Ok(DetectorLayout {
        nx,
        ny,
        extent: Extent {
            xmin: -half,
            xmax: half,
            ymin: -half,
            ymax: half,
        },
        radial_bins,
        r_max,
    })
}

fn read_spec(s: &mut Section, n_atoms: usize, seed: u64) -> Result<EnsembleSpec, CliError> {
    let spec = EnsembleSpec {
        n_atoms,
        disk_radius: s.f64("disk_radius")?,
        sigma_p: s.f64("sigma_p")?,
        p0: s.opt_pair("p0")?.unwrap_or((0.0, 0.0)),
        seed,
    };
    spec.validate()
        .map_err(|e| CliError::config(format!("[{}]: {e}", s.name)))?;
    Ok(spec)
}

fn read_ensemble(s: &mut Section, dp: &DimensionlessParams, seed: u64) -> Result<EnsembleConfig, CliError> {
    let n_atoms = s.usize("n_atoms")?;
    let spec = read_spec(s, n_atoms, seed)?;
    let strobes = s.u32_list("strobes")?;
    if strobes.is_empty() || strobes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(s.err("strobes", "must be a non-empty, strictly increasing list"));
    }
    let write_atoms = s.opt_bool("write_atoms")?.unwrap_or(true);
    let layout = read_layout(s, dp)?;
    Ok(EnsembleConfig {
        spec,
        strobes,
        layout,
        write_atoms,
    })
}

fn read_detect(s: &mut Section, dp: &DimensionlessParams, seed: u64) -> Result<DetectConfig, CliError> {
    let n_per_strobe = s.usize("n_per_strobe")?;
    let spec = read_spec(s, n_per_strobe.max(1), seed)?;
    let s_start = s.u32("s_start")?;
    let s_end = s.u32("s_end")?;
    let cohort = match s.opt_str("cohort")?.as_deref() {
        None | Some("fresh") => CohortMode::Fresh,
        Some("shared") => CohortMode::Shared,
        Some(other) => {
            return Err(s.err(
                "cohort",
                format!("unknown cohort `{other}`; expected `fresh` or `shared`"),
            ))
        }
    };
    if n_per_strobe == 0 {
        return Err(s.err("n_per_strobe", "must be >= 1"));
    }
    if s_start > s_end {
        return Err(s.err("s_start", format!("{s_start} exceeds s_end = {s_end}")));
    }
    let layout = read_layout(s, dp)?;
    Ok(DetectConfig {
        spec,
        s_start,
        s_end,
        n_per_strobe,
        cohort,
        layout,
    })
}

fn read_quantum(s: &mut Section, dp: &DimensionlessParams) -> Result<QuantumRunConfig, CliError> {
    let n = s.opt_usize("n")?.unwrap_or(256);
    let half_width = s.opt_f64("half_width")?.unwrap_or(dp.r1 + 4.0);
    let steps = s.opt_u32("steps_per_period")?.unwrap_or(1024);
    let mask_at_r1 = s.opt_bool("mask_at_r1")?.unwrap_or(false);
    let potential = match s.opt_str("potential")?.as_deref() {
        None | Some("wall") => PotentialMode::Wall,
        Some("free") => PotentialMode::Free,
        Some(other) => {
            return Err(s.err(
                "potential",
                format!("unknown potential `{other}`; expected `wall` or `free`"),
            ))
        }
    };
    let sigma = s.f64("sigma")?;
    let (x0, y0) = (s.f64("x0")?, s.f64("y0")?);
    let (p0x, p0y) = (s.opt_f64("p0x")?.unwrap_or(0.0), s.opt_f64("p0y")?.unwrap_or(0.0));
    let strobes = s.u32("strobes")?;
    let recording = match s.opt_value("record")? {
        None => Recording::EveryStrobe,
        Some(Value::String(v)) if v == "strobe" => Recording::EveryStrobe,
        Some(Value::String(v)) if v == "step" => Recording::EveryStep,
        Some(Value::Integer(k)) if k >= 1 && k <= u32::MAX as i64 => Recording::EveryKSteps(k as u32),
        Some(_) => return Err(s.err("record", "expected \"strobe\", \"step\" or a positive step count")),
    };
    let asymmetry = s.opt_bool("asymmetry")?.unwrap_or(false);
    let slice_y = s.opt_f64("slice_y")?.unwrap_or(y0);
    let n_r = s.opt_usize("n_r")?.unwrap_or(128);
    let n_theta = s.opt_usize("n_theta")?.unwrap_or(64);
    if n < 8 || !n.is_power_of_two() {
        return Err(s.err("n", "must be a power of two >= 8"));
    }
    if steps == 0 {
        return Err(s.err("steps_per_period", "must be >= 1"));
    }
    if strobes == 0 {
        return Err(s.err("strobes", "must be >= 1"));
    }
    if n_r == 0 {
        return Err(s.err("n_r", "must be >= 1"));
    }
    if n_theta < 64 || !n_theta.is_power_of_two() {
        return Err(s.err("n_theta", "must be a power of two >= 64"));
    }
    if !(half_width > 0.0) {
        return Err(s.err("half_width", "must be > 0"));
    }
    let qc = QuantumConfig {
        mask_at_r1,
        potential,
        ..QuantumConfig::per_period(dp, steps)
    };
    Ok(QuantumRunConfig {
        n,
        half_width,
        qc,
        sigma,
        x0,
        y0,
        p0x,
        p0y,
        strobes,
        recording,
        asymmetry,
        slice_y,
        n_r,
        n_theta,
    })
}

fn read_revival(s: &mut Section) -> Result<RevivalConfig, CliError> {
    let sigma = s.f64("sigma")?;
    let center = PhaseState::new(
        s.f64("x0")?,
        s.f64("y0")?,
        s.opt_f64("p0x")?.unwrap_or(0.0),
        s.opt_f64("p0y")?.unwrap_or(0.0),
    );
    let modes = match s.opt_str("mean_energy")?.as_deref() {
        None | Some("both") => vec![MeanEnergy::ZeroPoint, MeanEnergy::PacketAverage],
        Some("zero_point") => vec![MeanEnergy::ZeroPoint],
        Some("packet_average") => vec![MeanEnergy::PacketAverage],
        Some(other) => {
            return Err(s.err(
                "mean_energy",
                format!("unknown `{other}`; expected `zero_point`, `packet_average` or `both`"),
            ))
        }
    };
    if !(sigma > 0.0) {
        return Err(s.err("sigma", "must be > 0"));
    }
    Ok(RevivalConfig { sigma, center, modes })
}

// ---------------------------------------------------------------------------
// strict table walker

struct Source<'a> {
    text: &'a str,
}

impl Source<'_> {
    /// Line of `key` inside `[section]` (top level when `section` is empty).
    fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        let mut current = String::new();
        for (i, raw) in self.text.lines().enumerate() {
            let line = raw.trim();
            if let Some(rest) = line.strip_prefix('[') {
                current = rest.split(']').next().unwrap_or("").trim().to_string();
                if section.is_empty() && current == key {
                    return Some(i + 1);
                }
                continue;
            }
            let k = line.split('=').next().unwrap_or("").trim().trim_matches('"');
            if current == section && line.contains('=') && k == key {
                return Some(i + 1);
            }
        }
        None
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Closest known key: a prefix relation wins, then edit distance.
pub fn suggest<'k>(key: &str, known: &[&'k str]) -> Option<&'k str> {
    if let Some(k) = known.iter().find(|k| key.starts_with(**k) || k.starts_with(key)) {
        return Some(k);
    }
    known
        .iter()
        .map(|k| (strsim::damerau_levenshtein(key, k), *k))
        .filter(|&(d, k)| d <= (k.len().max(key.len()) / 3).max(1))
        .min()
        .map(|(_, k)| k)
}

struct Section<'a> {
    name: String,
    table: &'a Table,
    src: &'a Source<'a>,
    used: BTreeSet<String>,
    known: Vec<&'static str>,
}

impl<'a> Section<'a> {
    fn new(name: &str, table: &'a Table, src: &'a Source<'a>) -> Self {
        Section {
            name: name.to_string(),
            table,
            src,
            used: BTreeSet::new(),
            known: Vec::new(),
        }
    }

    fn label(&self) -> String {
        if self.name.is_empty() {
            "top level".into()
        } else {
            format!("[{}]", self.name)
        }
    }

    fn err(&self, key: &str, msg: impl fmt::Display) -> CliError {
        CliError::Config {
            line: self.src.line_of(&self.name, key),
            message: format!("{} `{key}`: {msg}", self.label()),
        }
    }

    fn missing(&self, key: &str) -> CliError {
        // a misspelling of the missing key is the more useful report
        let typo = self
            .table
            .keys()
            .filter(|k| !self.used.contains(*k) && !self.known.contains(&k.as_str()))
            .find(|k| suggest(k, &[key]).is_some());
        if let Some(k) = typo {
            return self.err(k, format!("unknown key; did you mean `{key}`?"));
        }
        CliError::Config {
            line: self.src.line_of("", &self.name).filter(|_| !self.name.is_empty()),
            message: format!("{} is missing required key `{key}`", self.label()),
        }
    }

    fn opt_value(&mut self, key: &'static str) -> Result<Option<Value>, CliError> {
        self.known.push(key);
        match self.table.get(key) {
            None => Ok(None),
            Some(v) => {
                self.used.insert(key.to_string());
                Ok(Some(v.clone()))
            }
        }
    }

    fn opt_sub(&mut self, key: &'static str) -> Result<Option<Section<'a>>, CliError> {
        self.known.push(key);
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Table(t)) => {
                self.used.insert(key.to_string());
                Ok(Some(Section::new(key, t, self.src)))
            }
            Some(_) => Err(self.err(key, "expected a [section]")),
        }
    }

    fn opt_f64(&mut self, key: &'static str) -> Result<Option<f64>, CliError> {
        match self.opt_value(key)? {
            None => Ok(None),
            Some(Value::Float(v)) if v.is_finite() => Ok(Some(v)),
            Some(Value::Integer(v)) => Ok(Some(v as f64)),
            Some(other) => Err(self.err(key, format!("expected a finite number, found {}", other.type_str()))),
        }
    }

    fn f64(&mut self, key: &'static str) -> Result<f64, CliError> {
        self.opt_f64(key)?.ok_or_else(|| self.missing(key))
    }

    fn opt_u64(&mut self, key: &'static str) -> Result<Option<u64>, CliError> {
        match self.opt_value(key)? {
            None => Ok(None),
            Some(Value::Integer(v)) if v >= 0 => Ok(Some(v as u64)),
            Some(_) => Err(self.err(key, "expected a non-negative integer")),
        }
    }

    fn opt_u32(&mut self, key: &'static str) -> Result<Option<u32>, CliError> {
        match self.opt_u64(key)? {
            None => Ok(None),
            Some(v) => u32::try_from(v).map(Some).map_err(|_| self.err(key, "too large")),
        }
    }

    fn u32(&mut self, key: &'static str) -> Result<u32, CliError> {
        self.opt_u32(key)?.ok_or_else(|| self.missing(key))
    }

    fn opt_usize(&mut self, key: &'static str) -> Result<Option<usize>, CliError> {
        match self.opt_u64(key)? {
            None => Ok(None),
            Some(v) => usize::try_from(v).map(Some).map_err(|_| self.err(key, "too large")),
        }
    }

    fn usize(&mut self, key: &'static str) -> Result<usize, CliError> {
        self.opt_usize(key)?.ok_or_else(|| self.missing(key))
    }

    fn opt_bool(&mut self, key: &'static str) -> Result<Option<bool>, CliError> {
        match self.opt_value(key)? {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(b)),
            Some(_) => Err(self.err(key, "expected true or false")),
        }
    }

    fn opt_str(&mut self, key: &'static str) -> Result<Option<String>, CliError> {
        match self.opt_value(key)? {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(self.err(key, "expected a string")),
        }
    }

    fn opt_pair(&mut self, key: &'static str) -> Result<Option<(f64, f64)>, CliError> {
        let Some(v) = self.opt_value(key)? else {
            return Ok(None);
        };
        let nums: Option<Vec<f64>> = v.as_array().map(|a| {
            a.iter()
                .filter_map(|x| x.as_float().or_else(|| x.as_integer().map(|i| i as f64)))
                .filter(|x| x.is_finite())
                .collect()
        });
        match nums {
            Some(n) if n.len() == 2 && v.as_array().map(Vec::len) == Some(2) => Ok(Some((n[0], n[1]))),
            _ => Err(self.err(key, "expected a pair of numbers [a, b]")),
        }
    }

    fn opt_u32_list(&mut self, key: &'static str) -> Result<Option<Vec<u32>>, CliError> {
        let Some(v) = self.opt_value(key)? else {
            return Ok(None);
        };
        let bad = || self.err(key, "expected a list of non-negative integers");
        let arr = v.as_array().ok_or_else(bad)?;
        arr.iter()
            .map(|x| x.as_integer().and_then(|i| u32::try_from(i).ok()).ok_or_else(bad))
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    fn u32_list(&mut self, key: &'static str) -> Result<Vec<u32>, CliError> {
        self.opt_u32_list(key)?.ok_or_else(|| self.missing(key))
    }

    /// Rejects every key that was not consumed.
    fn finish(&self) -> Result<(), CliError> {
        for key in self.table.keys() {
            if self.used.contains(key) {
                continue;
            }
            let hint = suggest(key, &self.known)
                .map(|k| format!("; did you mean `{k}`?"))
                .unwrap_or_default();
            return Err(self.err(key, format!("unknown key{hint}")));
        }
        Ok(())
    }
}
