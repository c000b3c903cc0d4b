//! Mode execution: each mode delegates to the physics library and writes
//! its artifacts through an [`OutputSet`].

use std::ffi::OsString;
use std::path::PathBuf;

use evwg_core::classical::{det4, finite_time_lyapunov, hamiltonian, portrait, strobe_jacobian, StrobeMap};
use evwg_core::ensemble::{detect_integrated, evolve_ensemble, sample_initial, Detection, Histogram2D, RadialProfile};
use evwg_core::quantum::{angular_decompose, init_min_uncertainty, propagate_strobes, slice_probability, RunOptions};
use evwg_core::resonance::{
    energy_grid, find_fixed_points, frequency_curve, nearest_resonance, resonance_radii, revival_time, Branch,
    MeanEnergy,
};
use evwg_core::units::{
    evanescent_coefficients, momentum_to_velocity, momentum_variance_from_temperature, wall_strength,
    DimensionlessParams,
};
use rayon::prelude::*;

use crate::config::{
    DetectConfig, EnsembleConfig, FixedpointsConfig, FreqmapConfig, ParamSource, PortraitConfig, QuantumRunConfig,
    RevivalConfig, RunConfig, Task,
};
use crate::error::{CliError, OpContext};
use crate::grid::{GridData, GridField};
use crate::output::{Cell, OutputSet, Table};

/// Output directory: command line, then `EVWG_OUT_DIR`, then the config's
/// `[output] dir`, then the working directory.
pub fn resolve_out_dir(cli: Option<PathBuf>, env: Option<OsString>, cfg: &RunConfig) -> PathBuf {
    cli.or_else(|| env.filter(|e| !e.is_empty()).map(PathBuf::from))
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Runs the configured mode, writing every artifact into `out_dir`.
pub fn run(cfg: &RunConfig, out_dir: PathBuf) -> Result<OutputSet, CliError> {
    let mut out = OutputSet::new(out_dir, cfg.prefix.clone())?;
    match &cfg.task {
        Task::ConvertUnits => convert_units(cfg, &mut out)?,
        Task::Freqmap(c) => freqmap(&cfg.dp, c, &mut out)?,
        Task::Portrait(c) => portrait_mode(cfg, c, &mut out)?,
        Task::Fixedpoints(c) => fixedpoints(cfg, c, &mut out)?,
        Task::Ensemble(c) => ensemble(cfg, c, &mut out)?,
        Task::Detect(c) => detect(cfg, c, &mut out)?,
        Task::Quantum(c) => quantum(&cfg.dp, c, &mut out)?,
        Task::Revival(c) => revival(&cfg.dp, c, &mut out)?,
    }
    Ok(out)
}

fn convert_units(cfg: &RunConfig, out: &mut OutputSet) -> Result<(), CliError> {
    let ParamSource::Physical(p) = &cfg.source else {
        return Err(CliError::config("convert-units requires a [physical] block"));
    };
    let (alpha, kappa) = evanescent_coefficients(p).op("evanescent_coefficients")?;
    let k_wall = wall_strength(p).op("wall_strength")?;
    let var_x = momentum_variance_from_temperature(p.temperature.0, p).op("momentum_variance_from_temperature")?;
    let var_y = momentum_variance_from_temperature(p.temperature.1, p).op("momentum_variance_from_temperature")?;
    let v_unit = momentum_to_velocity(1.0, p).op("momentum_to_velocity")?;
    let dp = &cfg.dp;
    let rows: [(&str, f64, &str); 14] = [
        ("xi", dp.xi, "1"),
        ("r1", dp.r1, "1"),
        ("omega", dp.omega, "1"),
        ("eps", dp.eps, "1"),
        ("kbar", dp.kbar, "1"),
        ("alpha", alpha, "1"),
        ("kappa", kappa, "1/m"),
        ("wall_strength", k_wall, "J"),
        ("length_unit", 1.0 / (2.0 * kappa), "m"),
        ("time_unit", 1.0 / p.omega_ref, "s"),
        ("velocity_unit", v_unit, "m/s"),
        ("sigma_p_x", var_x, "1"),
        ("sigma_p_y", var_y, "1"),
        ("rms_velocity_x", v_unit * var_x.sqrt(), "m/s"),
    ];
    let mut t = Table::new(&["quantity", "value", "unit"]);
    for (name, v, unit) in rows {
        t.row(&[Cell::S(name), Cell::F(v), Cell::S(unit)]);
    }
    out.table("units.csv", t)
}

fn freqmap(dp: &DimensionlessParams, c: &FreqmapConfig, out: &mut OutputSet) -> Result<(), CliError> {
    let grid = energy_grid(dp, c.h_min, c.h_max, c.n_points).op("energy_grid")?;
    let curve = frequency_curve(dp, &grid, c.quad_points).op("frequency_curve")?;
    let mut t = Table::new(&["h0", "x_m", "omega0"]);
    for r in &curve.rows {
        t.row(&[Cell::F(r.h0), Cell::F(r.x_m), Cell::F(r.omega0)]);
    }
    out.table("freqmap.csv", t)?;
    let radii = resonance_radii(dp, c.j_max).op("resonance_radii")?;
    out.table("resonances.csv", resonance_table(&radii))
}

fn branch_name(b: Branch) -> &'static str {
    match b {
        Branch::Inner => "inner",
        Branch::Outer => "outer",
    }
}

fn resonance_table(radii: &[evwg_core::resonance::ResonanceRadius]) -> Table {
    let mut t = Table::new(&["j", "branch", "energy", "radius"]);
    for r in radii {
        t.row(&[
            Cell::U(r.j as u64),
            Cell::S(branch_name(r.branch)),
            Cell::F(r.energy),
            Cell::F(r.radius),
        ]);
    }
    t
}

fn portrait_mode(cfg: &RunConfig, c: &PortraitConfig, out: &mut OutputSet) -> Result<(), CliError> {
    let dp = &cfg.dp;
    let records = portrait(&c.seeds, c.strobes, dp, &cfg.integrator).op("portrait")?;
    let mut t = Table::new(&["seed", "strobe", "x", "px"]);
    for r in &records {
        t.row(&[
            Cell::U(r.seed as u64),
            Cell::U(r.strobe as u64),
            Cell::F(r.x),
            Cell::F(r.px),
        ]);
    }
    out.table("portrait.csv", t)?;

    // per-seed diagnostics: energy change at strobes, one-period Jacobian
    // determinant and (optionally) the finite-time Lyapunov exponent
    let map = StrobeMap::new(dp, &cfg.integrator).op("strobe_map")?;
    let diag: Vec<(f64, f64, f64)> = c
        .seeds
        .par_iter()
        .map(|seed| {
            let e0 = hamiltonian(seed, dp);
            let mut s = *seed;
            let mut drift = 0.0f64;
            for _ in 0..c.strobes {
                map.advance(&mut s, 1);
                drift = drift.max(((hamiltonian(&s, dp) - e0) / e0).abs());
            }
            let det = det4(&strobe_jacobian(&map, seed, 1, 1e-6));
            let lyap = if c.lyapunov {
                finite_time_lyapunov(&map, seed, c.strobes, c.lyapunov_step)
            } else {
                f64::NAN
            };
            (drift, det, lyap)
        })
        .collect();
    let mut t = Table::new(&[
        "seed",
        "x0",
        "y0",
        "px0",
        "py0",
        "max_rel_energy_change",
        "jacobian_det",
        "lyapunov",
    ]);
    for (i, (seed, (drift, det, lyap))) in c.seeds.iter().zip(diag).enumerate() {
        t.row(&[
            Cell::U(i as u64),
            Cell::F(seed.x),
            Cell::F(seed.y),
            Cell::F(seed.px),
            Cell::F(seed.py),
            Cell::F(drift),
            Cell::F(det),
            Cell::F(lyap),
        ]);
    }
    out.table("seeds.csv", t)
}

fn fixedpoints(cfg: &RunConfig, c: &FixedpointsConfig, out: &mut OutputSet) -> Result<(), CliError> {
    let dp = &cfg.dp;
    let radii = resonance_radii(dp, c.j_max).op("resonance_radii")?;
    let mut points = Vec::new();
    for &period in &c.periods {
        points.extend(find_fixed_points(dp, &cfg.integrator, &c.search, period).op("find_fixed_points")?);
    }
    let mut t = Table::new(&["x", "px", "residual", "stability", "period"]);
    let mut m = Table::new(&[
        "x",
        "px",
        "period",
        "stability",
        "orbit_radius",
        "j",
        "branch",
        "resonance_radius",
        "rel_deviation",
    ]);
    for fp in &points {
        t.row(&[
            Cell::F(fp.x),
            Cell::F(fp.px),
            Cell::F(fp.residual),
            Cell::S(fp.stability.as_str()),
            Cell::U(fp.period as u64),
        ]);
        if fp.is_axis_equilibrium() {
            continue;
        }
        let radius = fp.orbit_radius(dp).op("orbit_radius")?;
        let (j, branch, rr, dev) = match nearest_resonance(radius, &radii) {
            Some((r, dev)) => (
                Cell::U(r.j as u64),
                Cell::S(branch_name(r.branch)),
                Cell::F(r.radius),
                Cell::F(dev),
            ),
            None => (Cell::S(""), Cell::S(""), Cell::F(f64::NAN), Cell::F(f64::NAN)),
        };
        m.row(&[
            Cell::F(fp.x),
            Cell::F(fp.px),
            Cell::U(fp.period as u64),
            Cell::S(fp.stability.as_str()),
            Cell::F(radius),
            j,
            branch,
            rr,
            dev,
        ]);
    }
    out.table("fixedpoints.csv", t)?;
    out.table("fixedpoint_resonances.csv", m)?;
    out.table("resonances.csv", resonance_table(&radii))
}

fn histogram_field(h: &Histogram2D, time: f64) -> GridField {
    GridField {
        nx: h.nx as u32,
        ny: h.ny as u32,
        extent: h.extent.as_array(),
        time,
        data: GridData::Real(h.counts.iter().map(|&c| c as f64).collect()),
    }
}

fn radial_table(r: &RadialProfile) -> Table {
    let mut t = Table::new(&["r_center", "count"]);
    for (i, &c) in r.counts.iter().enumerate() {
        t.row(&[Cell::F(r.center(i)), Cell::U(c)]);
    }
    t
}

fn counts_table(d: &Detection) -> Table {
    let mut t = Table::new(&["quantity", "value"]);
    t.row(&[Cell::S("atoms"), Cell::U(d.histogram.total())]);
    t.row(&[Cell::S("histogram_overflow"), Cell::U(d.histogram.overflow)]);
    t.row(&[Cell::S("radial_overflow"), Cell::U(d.radial.overflow)]);
    t
}

fn ensemble(cfg: &RunConfig, c: &EnsembleConfig, out: &mut OutputSet) -> Result<(), CliError> {
    let dp = &cfg.dp;
    let mut atoms = sample_initial(&c.spec).op("sample_initial")?;
    let mut at = 0;
    for &s in &c.strobes {
        atoms = evolve_ensemble(&atoms, s - at, dp, &cfg.integrator).op("evolve_ensemble")?;
        at = s;
        let l = &c.layout;
        let det = Detection {
            histogram: evwg_core::ensemble::histogram_xy(&atoms, l.nx, l.ny, l.extent).op("histogram_xy")?,
            radial: RadialProfile::from_atoms(&atoms, l.radial_bins, l.r_max).op("radial_profile")?,
        };
        if c.write_atoms {
            let mut t = Table::new(&["atom", "x", "y", "px", "py"]);
            for (i, a) in atoms.iter().enumerate() {
                t.row(&[
                    Cell::U(i as u64),
                    Cell::F(a.x),
                    Cell::F(a.y),
                    Cell::F(a.px),
                    Cell::F(a.py),
                ]);
            }
            out.table(&format!("atoms_s{s:04}.csv"), t)?;
        }
        out.grid(
            &format!("histogram_s{s:04}.ewg"),
            &histogram_field(&det.histogram, s as f64 * dp.period()),
        )?;
        out.table(&format!("radial_s{s:04}.csv"), radial_table(&det.radial))?;
        out.table(&format!("counts_s{s:04}.csv"), counts_table(&det))?;
    }
    Ok(())
}

fn detect(cfg: &RunConfig, c: &DetectConfig, out: &mut OutputSet) -> Result<(), CliError> {
    let det = detect_integrated(
        &c.spec,
        &cfg.dp,
        &cfg.integrator,
        c.s_start,
        c.s_end,
        c.n_per_strobe,
        c.cohort,
        &c.layout,
    )
    .op("detect_integrated")?;
    out.grid(
        "detect_histogram.ewg",
        &histogram_field(&det.histogram, c.s_end as f64 * cfg.dp.period()),
    )?;
    out.table("detect_radial.csv", radial_table(&det.radial))?;
    out.table("detect_counts.csv", counts_table(&det))
}

fn quantum(dp: &DimensionlessParams, c: &QuantumRunConfig, out: &mut OutputSet) -> Result<(), CliError> {
    let w0 = init_min_uncertainty(c.n, c.half_width, dp.kbar, c.x0, c.y0, c.p0x, c.p0y, c.sigma)
        .op("init_min_uncertainty")?;
    c.qc.validate(dp).op("split_step")?;
    let (series, w) = propagate_strobes(
        &w0,
        c.strobes,
        dp,
        &c.qc,
        RunOptions {
            recording: c.recording,
            with_asymmetry: c.asymmetry,
        },
    )
    .op("propagate_strobes")?;
    let mut t = Table::new(&[
        "t",
        "strobe",
        "mean_px",
        "var_x",
        "var_px",
        "norm",
        "energy",
        "asymmetry",
    ]);
    for r in &series.rows {
        t.row(&[
            Cell::F(r.t),
            Cell::F(r.strobe),
            Cell::F(r.mean_px),
            Cell::F(r.var_x),
            Cell::F(r.var_px),
            Cell::F(r.norm),
            Cell::F(r.energy),
            Cell::F(r.asymmetry),
        ]);
    }
    out.table("observables.csv", t)?;

    let l = w.half_width;
    let field = |data| GridField {
        nx: w.n as u32,
        ny: w.n as u32,
        extent: [-l, l, -l, l],
        time: w.t,
        data,
    };
    out.grid("final_density.ewg", &field(GridData::Real(w.density())))?;
    out.grid("final_psi.ewg", &field(GridData::Complex(w.amps.clone())))?;

    let mut s = Table::new(&["x", "probability"]);
    for (x, p) in slice_probability(&w, c.slice_y).op("slice_probability")? {
        s.row(&[Cell::F(x), Cell::F(p)]);
    }
    out.table("slice.csv", s)?;

    let mut a = Table::new(&["m", "population"]);
    for (m, p) in angular_decompose(&w, c.n_r, c.n_theta).op("angular_decompose")? {
        a.row(&[Cell::I(m as i64), Cell::F(p)]);
    }
    out.table("angular.csv", a)
}

fn revival(dp: &DimensionlessParams, c: &RevivalConfig, out: &mut OutputSet) -> Result<(), CliError> {
    let mut t = Table::new(&[
        "mean_energy_mode",
        "mean_energy",
        "omega0",
        "domega_de",
        "classical_period",
        "t_rev",
    ]);
    for &mode in &c.modes {
        let est = revival_time(dp, c.sigma, &c.center, mode).op("revival_time")?;
        let name = match mode {
            MeanEnergy::ZeroPoint => "zero_point",
            MeanEnergy::PacketAverage => "packet_average",
        };
        t.row(&[
            Cell::S(name),
            Cell::F(est.mean_energy),
            Cell::F(est.omega0),
            Cell::F(est.domega_de),
            Cell::F(est.classical_period),
            Cell::F(est.t_rev),
        ]);
    }
    out.table("revival.csv", t)
}
