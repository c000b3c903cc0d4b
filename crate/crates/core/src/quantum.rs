//! Two-dimensional Schrödinger propagation on a periodic grid by symmetric
//! (Strang) split-operator stepping, plus the observables used to analyse
//! the evolved packets.
//!
//! Scaled units: `i k̄ ∂ψ/∂t = [−k̄²∇²/2 + V(r, t)] ψ`, so a step of length
//! `dt` is `exp(−i k̄ k² dt/4) · exp(−i V dt/k̄) · exp(−i k̄ k² dt/4)`.
//! Grid: `n × n` points on `[−L, L)²`, row-major with x fastest.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::classical::modulation;
use crate::error::{Error, Result};
use crate::units::DimensionlessParams;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    pub n: usize,
    pub half_width: f64,
    pub amps: Vec<Complex64>,
    pub kbar: f64,
    pub t: f64,
}

impl Wavefunction {
    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Coordinate of grid index `i` along either axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.dx()
    }

    pub fn at(&self, ix: usize, iy: usize) -> Complex64 {
        self.amps[iy * self.n + ix]
    }

    /// `Σ |ψ|² dx dy`.
    pub fn norm(&self) -> f64 {
        let dx = self.dx();
        pairwise(0, self.amps.len(), &|i| self.amps[i].norm_sqr()) * dx * dx
    }

    pub fn density(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    fn check_shape(&self) -> Result<()> {
        if !self.n.is_power_of_two() || self.n < 4 {
            return Err(Error::invalid("n", format!("{} is not a power of two >= 4", self.n)));
        }
        if self.amps.len() != self.n * self.n {
            return Err(Error::invalid("amps", "length must be n²"));
        }
        if !(self.half_width > 0.0) || !(self.kbar > 0.0) {
            return Err(Error::invalid("grid", "half_width and kbar must be > 0"));
        }
        Ok(())
    }
}

/// Fixed-order pairwise summation of `f(lo..hi)`.
fn pairwise(lo: usize, hi: usize, f: &impl Fn(usize) -> f64) -> f64 {
    if hi - lo <= 64 {
        (lo..hi).map(f).sum()
    } else {
        let mid = lo + (hi - lo) / 2;
        pairwise(lo, mid, f) + pairwise(mid, hi, f)
    }
}

/// Signed FFT wavenumber for index `j` on a grid of `n` points spanning `2L`.
fn wavenumber(j: usize, n: usize, half_width: f64) -> f64 {
    let m = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
    PI * m / half_width
}

/// Minimum-uncertainty Gaussian with per-axis position variance `sigma`,
/// renormalized on the grid.
#[allow(clippy::too_many_arguments)]
pub fn init_min_uncertainty(
    n: usize,
    half_width: f64,
    kbar: f64,
    x0: f64,
    y0: f64,
    p0x: f64,
    p0y: f64,
    sigma: f64,
) -> Result<Wavefunction> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid("sigma", "must be > 0"));
    }
    let reach = 6.0 * sigma.sqrt();
    if x0.abs() + reach >= half_width || y0.abs() + reach >= half_width {
        return Err(Error::invalid(
            "x0/y0",
            format!("packet (6 sd = {reach:.3}) does not fit inside [-{half_width}, {half_width})"),
        ));
    }
    let mut w = Wavefunction {
        n,
        half_width,
        amps: vec![C0; n * n],
        kbar,
        t: 0.0,
    };
    w.check_shape()?;
    for iy in 0..n {
        let y = w.coord(iy);
        for ix in 0..n {
            let x = w.coord(ix);
            let g = -((x - x0).powi(2) + (y - y0).powi(2)) / (4.0 * sigma);
            let phase = (p0x * x + p0y * y) / kbar;
            w.amps[iy * n + ix] = Complex64::from_polar(g.exp(), phase);
        }
    }
    let scale = 1.0 / w.norm().sqrt();
    w.amps.iter_mut().for_each(|a| *a *= scale);
    let edge = (0..n)
        .flat_map(|i| [w.at(i, 0), w.at(0, i)])
        .map(|a| a.norm())
        .fold(0.0, f64::max);
    if edge > 1e-12 {
        return Err(Error::Domain(format!(
            "packet reaches the domain edge (|ψ| = {edge:.3e})"
        )));
    }
    Ok(w)
}

/// Which potential the propagator applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialMode {
    /// The modulated exponential wall.
    Wall,
    /// V ≡ 0 (free particle; test hook).
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantumConfig {
    pub dt: f64,
    /// Zero the wavefunction for r ≥ r1 after every step.
    pub mask_at_r1: bool,
    pub potential: PotentialMode,
}

impl QuantumConfig {
    /// `steps` steps per modulation period, no mask, full potential.
    pub fn per_period(dp: &DimensionlessParams, steps: u32) -> Self {
        QuantumConfig {
            dt: dp.period() / steps as f64,
            mask_at_r1: false,
            potential: PotentialMode::Wall,
        }
    }

    pub fn validate(&self, dp: &DimensionlessParams) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt", "must be > 0"));
        }
        let ratio = dp.period() / self.dt;
        if ratio < 1.0 || (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(Error::invalid("dt", format!("period / dt = {ratio} is not an integer")));
        }
        Ok(())
    }

    pub fn steps_per_strobe(&self, dp: &DimensionlessParams) -> u32 {
        (dp.period() / self.dt).round() as u32
    }
}

/// Expectation values of a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    pub norm: f64,
    pub mean_x: f64,
    pub mean_y: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub mean_px: f64,
    pub mean_py: f64,
    pub var_px: f64,
    pub var_py: f64,
    pub kinetic: f64,
    pub potential: f64,
}

impl Observables {
    pub fn energy(&self) -> f64 {
        self.kinetic + self.potential
    }
}

/// 2D FFT as row transforms plus a transpose. The spectrum is stored
/// transposed (`[kx][ky]`), which is harmless for the isotropic kinetic
/// factor and is accounted for in the momentum moments.
struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Fft2 {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Fft2 {
            n,
            fwd,
            inv,
            scratch: vec![C0; len],
            tmp: vec![C0; n * n],
        }
    }

    /// Position `[y][x]` → spectrum `[kx][ky]` (unnormalized).
    fn forward(&mut self, data: &mut [Complex64]) {
        self.fwd.process_with_scratch(data, &mut self.scratch);
        transpose::transpose(data, &mut self.tmp, self.n, self.n);
        self.fwd.process_with_scratch(&mut self.tmp, &mut self.scratch);
        data.copy_from_slice(&self.tmp);
    }

    /// Spectrum `[kx][ky]` → position `[y][x]` (unnormalized; factor n²).
    fn inverse(&mut self, data: &mut [Complex64]) {
        self.inv.process_with_scratch(data, &mut self.scratch);
        transpose::transpose(data, &mut self.tmp, self.n, self.n);
        self.inv.process_with_scratch(&mut self.tmp, &mut self.scratch);
        data.copy_from_slice(&self.tmp);
    }
}

/// Split-operator propagator for one grid and parameter set.
pub struct Propagator {
    n: usize,
    half_width: f64,
    kbar: f64,
    dp: DimensionlessParams,
    qc: QuantumConfig,
    fft: Fft2,
    /// Half and full kinetic factors with the 1/n² of the inverse FFT folded in.
    kin_half: Vec<Complex64>,
    kin_full: Vec<Complex64>,
    /// Unmodulated potential on the grid.
    v0: Vec<f64>,
    /// Potential factor when it does not depend on time.
    static_phase: Option<Vec<Complex64>>,
    inside_r1: Vec<bool>,
    steps_taken: u64,
}

impl Propagator {
    pub fn new(n: usize, half_width: f64, kbar: f64, dp: &DimensionlessParams, qc: &QuantumConfig) -> Result<Self> {
        dp.validate()?;
        qc.validate(dp)?;
        Wavefunction {
            n,
            half_width,
            amps: vec![C0; n * n],
            kbar,
            t: 0.0,
        }
        .check_shape()?;
        let dx = 2.0 * half_width / n as f64;
        let norm = 1.0 / (n * n) as f64;
        let mut kin_half = vec![C0; n * n];
        let mut kin_full = vec![C0; n * n];
        for a in 0..n {
            let ka = wavenumber(a, n, half_width);
            for b in 0..n {
                let kb = wavenumber(b, n, half_width);
                let k2 = ka * ka + kb * kb;
                kin_half[a * n + b] = Complex64::from_polar(norm, -kbar * k2 * qc.dt / 4.0);
                kin_full[a * n + b] = Complex64::from_polar(norm, -kbar * k2 * qc.dt / 2.0);
            }
        }
        let mut v0 = vec![0.0; n * n];
        let mut inside_r1 = vec![true; n * n];
        for iy in 0..n {
            let y = -half_width + iy as f64 * dx;
            for ix in 0..n {
                let x = -half_width + ix as f64 * dx;
                let r = x.hypot(y);
                if qc.potential == PotentialMode::Wall {
                    v0[iy * n + ix] = dp.xi * (r - dp.r1).exp();
                }
                inside_r1[iy * n + ix] = r < dp.r1;
            }
        }
        let static_phase = (qc.potential == PotentialMode::Free || dp.eps == 0.0).then(|| {
            v0.iter()
                .map(|v| Complex64::from_polar(1.0, -v * qc.dt / kbar))
                .collect()
        });
        Ok(Propagator {
            n,
            half_width,
            kbar,
            dp: *dp,
            qc: *qc,
            fft: Fft2::new(n),
            kin_half,
            kin_full,
            v0,
            static_phase,
            inside_r1,
            steps_taken: 0,
        })
    }

    /// Builds a propagator matching `w`'s grid.
    pub fn for_state(w: &Wavefunction, dp: &DimensionlessParams, qc: &QuantumConfig) -> Result<Self> {
        Self::new(w.n, w.half_width, w.kbar, dp, qc)
    }

    pub fn params(&self) -> &DimensionlessParams {
        &self.dp
    }

    pub fn config(&self) -> &QuantumConfig {
        &self.qc
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps_taken
    }

    fn check(&self, w: &Wavefunction) -> Result<()> {
        w.check_shape()?;
        if w.n != self.n || w.half_width != self.half_width || w.kbar != self.kbar {
            return Err(Error::invalid("wavefunction", "grid does not match the propagator"));
        }
        Ok(())
    }

    fn apply_potential(&self, amps: &mut [Complex64], t_mid: f64) {
        match &self.static_phase {
            Some(ph) => amps.par_iter_mut().zip(ph).for_each(|(a, p)| *a *= p),
            None => {
                let c = -modulation(t_mid, &self.dp) * self.qc.dt / self.kbar;
                amps.par_iter_mut()
                    .zip(&self.v0)
                    .for_each(|(a, v)| *a *= Complex64::cis(v * c));
            }
        }
    }

    fn apply_mask(&self, amps: &mut [Complex64]) {
        for (a, &inside) in amps.iter_mut().zip(&self.inside_r1) {
            if !inside {
                *a = C0;
            }
        }
    }

    fn kinetic(&mut self, amps: &mut [Complex64], half: bool) {
        self.fft.forward(amps);
        let k = if half { &self.kin_half } else { &self.kin_full };
        amps.par_iter_mut().zip(k).for_each(|(a, f)| *a *= f);
        self.fft.inverse(amps);
    }

    /// Advances `w` by `steps` split steps. Without the mask, the trailing
    /// and leading kinetic half steps of consecutive steps are fused.
    pub fn advance(&mut self, w: &mut Wavefunction, steps: u32) -> Result<()> {
        self.check(w)?;
        if steps == 0 {
            return Ok(());
        }
        let t0 = w.t;
        let dt = self.qc.dt;
        let mut amps = std::mem::take(&mut w.amps);
        if self.qc.mask_at_r1 {
            for i in 0..steps {
                self.kinetic(&mut amps, true);
                self.apply_potential(&mut amps, t0 + (i as f64 + 0.5) * dt);
                self.kinetic(&mut amps, true);
                self.apply_mask(&mut amps);
            }
        } else {
            self.kinetic(&mut amps, true);
            for i in 0..steps {
                self.apply_potential(&mut amps, t0 + (i as f64 + 0.5) * dt);
                self.kinetic(&mut amps, i + 1 == steps);
            }
        }
        w.amps = amps;
        w.t = t0 + steps as f64 * dt;
        self.steps_taken += steps as u64;
        Ok(())
    }

    /// Position moments on the grid, momentum moments from the spectrum,
    /// potential energy at the state's current time.
    pub fn observe(&mut self, w: &Wavefunction) -> Result<Observables> {
        self.check(w)?;
        let n = self.n;
        let dx = w.dx();
        let rho = w.density();
        let norm = pairwise(0, n * n, &|i| rho[i]) * dx * dx;
        let xs: Vec<f64> = (0..n).map(|i| w.coord(i)).collect();
        let moment =
            |f: &dyn Fn(usize, usize) -> f64| pairwise(0, n * n, &|i| rho[i] * f(i % n, i / n)) * dx * dx / norm;
        let mean_x = moment(&|ix, _| xs[ix]);
        let mean_y = moment(&|_, iy| xs[iy]);
        let var_x = moment(&|ix, _| (xs[ix] - mean_x).powi(2));
        let var_y = moment(&|_, iy| (xs[iy] - mean_y).powi(2));
        let m = modulation(w.t, &self.dp);
        let potential = moment(&|ix, iy| self.v0[iy * n + ix] * m);

        let mut spec = w.amps.clone();
        self.fft.forward(&mut spec);
        let pk: Vec<f64> = spec.iter().map(|c| c.norm_sqr()).collect();
        let total = pairwise(0, n * n, &|i| pk[i]);
        let ks: Vec<f64> = (0..n).map(|j| self.kbar * wavenumber(j, n, self.half_width)).collect();
        // transposed layout: first index is kx
        let pmoment = |f: &dyn Fn(f64, f64) -> f64| pairwise(0, n * n, &|i| pk[i] * f(ks[i / n], ks[i % n])) / total;
        let mean_px = pmoment(&|px, _| px);
        let mean_py = pmoment(&|_, py| py);
        let var_px = pmoment(&|px, _| (px - mean_px).powi(2));
        let var_py = pmoment(&|_, py| (py - mean_py).powi(2));
        let kinetic = pmoment(&|px, py| 0.5 * (px * px + py * py));
        Ok(Observables {
            norm,
            mean_x,
            mean_y,
            var_x,
            var_y,
            mean_px,
            mean_py,
            var_px,
            var_py,
            kinetic,
            potential,
        })
    }
}

/// One split step (builds a fresh propagator; use [`Propagator`] for runs).
pub fn split_step(w: &Wavefunction, dp: &DimensionlessParams, qc: &QuantumConfig) -> Result<Wavefunction> {
    let mut p = Propagator::for_state(w, dp, qc)?;
    let mut out = w.clone();
    p.advance(&mut out, 1)?;
    Ok(out)
}

/// When observables are recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recording {
    EveryStep,
    EveryStrobe,
    /// Every k-th step.
    EveryKSteps(u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableRow {
    pub t: f64,
    /// `t / T` (integer at strobes).
    pub strobe: f64,
    pub mean_px: f64,
    pub var_x: f64,
    pub var_px: f64,
    pub norm: f64,
    pub energy: f64,
    /// NaN unless requested.
    pub asymmetry: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservableSeries {
    pub rows: Vec<ObservableRow>,
}

impl ObservableSeries {
    /// Rows at integer strobe numbers `s ≥ from`.
    pub fn at_strobes(&self, from: u32) -> impl Iterator<Item = &ObservableRow> {
        self.rows
            .iter()
            .filter(move |r| (r.strobe - r.strobe.round()).abs() < 1e-9 && r.strobe.round() >= from as f64)
    }
}

/// Options for [`propagate_strobes`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub recording: Recording,
    pub with_asymmetry: bool,
}

/// Evolves `w` through `n_strobes` modulation periods, recording observables
/// (the initial state included). Returns the series and the final state.
pub fn propagate_strobes(
    w: &Wavefunction,
    n_strobes: u32,
    dp: &DimensionlessParams,
    qc: &QuantumConfig,
    opts: RunOptions,
) -> Result<(ObservableSeries, Wavefunction)> {
    let mut prop = Propagator::for_state(w, dp, qc)?;
    let per = qc.steps_per_strobe(dp);
    let chunk = match opts.recording {
        Recording::EveryStep => 1,
        Recording::EveryStrobe => per,
        Recording::EveryKSteps(k) if k >= 1 => k,
        Recording::EveryKSteps(_) => return Err(Error::invalid("record_every", "must be >= 1")),
    };
    let total = per as u64 * n_strobes as u64;
    let t_start = w.t;
    let mut state = w.clone();
    let mut series = ObservableSeries::default();
    let mut record = |prop: &mut Propagator, s: &Wavefunction| -> Result<()> {
        let o = prop.observe(s)?;
        series.rows.push(ObservableRow {
            t: s.t,
            strobe: (s.t - t_start) / dp.period() + (t_start / dp.period()),
            mean_px: o.mean_px,
            var_x: o.var_x,
            var_px: o.var_px,
            norm: o.norm,
            energy: o.energy(),
            asymmetry: if opts.with_asymmetry {
                asymmetry_metric(s)?
            } else {
                f64::NAN
            },
        });
        Ok(())
    };
    record(&mut prop, &state)?;
    let mut done = 0u64;
    while done < total {
        let k = (chunk as u64).min(total - done) as u32;
        // keep strobe boundaries exact in time
        state.t = t_start + done as f64 * qc.dt;
        prop.advance(&mut state, k)?;
        done += k as u64;
        state.t = t_start + done as f64 * qc.dt;
        record(&mut prop, &state)?;
    }
    Ok((series, state))
}

/// Band-limited trigonometric interpolant of a grid function: the exact
/// continuous function whose samples are the grid values.
pub struct SpectralInterpolant {
    half_width: f64,
    n: usize,
    /// Retained x and y wavenumbers (physical) with their spectral indices.
    kx: Vec<(usize, f64)>,
    ky: Vec<(usize, f64)>,
    /// `[kx][ky]`, scaled by 1/n².
    coeffs: Vec<Complex64>,
}

impl SpectralInterpolant {
    /// Modes whose power is below `1e-24` of the peak are dropped; they
    /// change point values by less than ~1e-12 of the maximum amplitude.
    pub fn new(w: &Wavefunction) -> Result<Self> {
        w.check_shape()?;
        let n = w.n;
        let mut spec = w.amps.clone();
        Fft2::new(n).forward(&mut spec);
        let scale = 1.0 / (n * n) as f64;
        spec.iter_mut().for_each(|c| *c *= scale);
        let peak = spec.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
        let cut = peak * 1e-24;
        let keep_a: Vec<usize> = (0..n)
            .filter(|&a| (0..n).any(|b| spec[a * n + b].norm_sqr() > cut))
            .collect();
        let keep_b: Vec<usize> = (0..n)
            .filter(|&b| (0..n).any(|a| spec[a * n + b].norm_sqr() > cut))
            .collect();
        Ok(SpectralInterpolant {
            half_width: w.half_width,
            n,
            kx: keep_a.iter().map(|&a| (a, wavenumber(a, n, w.half_width))).collect(),
            ky: keep_b.iter().map(|&b| (b, wavenumber(b, n, w.half_width))).collect(),
            coeffs: spec,
        })
    }

    pub fn eval(&self, x: f64, y: f64) -> Complex64 {
        let (sx, sy) = (x + self.half_width, y + self.half_width);
        let ey: Vec<Complex64> = self.ky.iter().map(|&(_, k)| Complex64::cis(k * sy)).collect();
        let mut acc = C0;
        for &(a, k) in &self.kx {
            let row = &self.coeffs[a * self.n..(a + 1) * self.n];
            let inner: Complex64 = self.ky.iter().zip(&ey).map(|(&(b, _), e)| row[b] * e).sum();
            acc += Complex64::cis(k * sx) * inner;
        }
        acc
    }
}

/// Polar raster: `n_r` radii at `(i + ½) L / n_r`, `n_theta` angles `2πj/n_theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarRaster {
    pub n_r: usize,
    pub n_theta: usize,
    pub r_max: f64,
}

impl PolarRaster {
    pub fn radius(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dr()
    }

    pub fn angle(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_theta as f64
    }

    pub fn dr(&self) -> f64 {
        self.r_max / self.n_r as f64
    }

    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    /// Row-major `[radius][angle]` samples of `w` rotated by `rotation`
    /// (i.e. values `ψ(R(−rotation)·r)`), via the spectral interpolant.
    pub fn sample_spectral(&self, w: &Wavefunction, rotation: f64) -> Result<Vec<Complex64>> {
        let interp = SpectralInterpolant::new(w)?;
        Ok((0..self.n_r * self.n_theta)
            .into_par_iter()
            .map(|k| {
                let (r, th) = (self.radius(k / self.n_theta), self.angle(k % self.n_theta) - rotation);
                interp.eval(r * th.cos(), r * th.sin())
            })
            .collect())
    }

    /// Same raster by bilinear interpolation of the periodic grid.
    pub fn sample_bilinear(&self, w: &Wavefunction) -> Vec<Complex64> {
        (0..self.n_r * self.n_theta)
            .map(|k| {
                let (r, th) = (self.radius(k / self.n_theta), self.angle(k % self.n_theta));
                bilinear(w, r * th.cos(), r * th.sin())
            })
            .collect()
    }
}

fn bilinear(w: &Wavefunction, x: f64, y: f64) -> Complex64 {
    let n = w.n;
    let dx = w.dx();
    let fx = (x + w.half_width) / dx;
    let fy = (y + w.half_width) / dx;
    let (ix, iy) = (fx.floor(), fy.floor());
    let (tx, ty) = (fx - ix, fy - iy);
    let wrap = |i: f64| (i as i64).rem_euclid(n as i64) as usize;
    let (x0, x1, y0, y1) = (wrap(ix), wrap(ix + 1.0), wrap(iy), wrap(iy + 1.0));
    w.at(x0, y0) * ((1.0 - tx) * (1.0 - ty))
        + w.at(x1, y0) * (tx * (1.0 - ty))
        + w.at(x0, y1) * ((1.0 - tx) * ty)
        + w.at(x1, y1) * (tx * ty)
}

/// Angular-momentum populations `P_m` from bilinear samples on a polar
/// raster with radii uniform on (0, L); returned sorted by `m` for
/// `m ∈ (−n_theta/2, n_theta/2]`.
pub fn angular_decompose(w: &Wavefunction, n_r: usize, n_theta: usize) -> Result<Vec<(i32, f64)>> {
    w.check_shape()?;
    if !n_theta.is_power_of_two() || n_theta < 64 {
        return Err(Error::invalid("n_theta", "must be a power of two >= 64"));
    }
    if n_r == 0 {
        return Err(Error::invalid("n_r", "must be >= 1"));
    }
    let raster = PolarRaster {
        n_r,
        n_theta,
        r_max: w.half_width,
    };
    let mut samples = raster.sample_bilinear(w);
    let fft = FftPlanner::new().plan_fft_forward(n_theta);
    fft.process(&mut samples);
    let mut pops = vec![0.0; n_theta];
    for i in 0..n_r {
        let r = raster.radius(i);
        for j in 0..n_theta {
            let a = samples[i * n_theta + j] / n_theta as f64;
            pops[j] += a.norm_sqr() * r * raster.dr() * 2.0 * PI;
        }
    }
    let mut out: Vec<(i32, f64)> = pops
        .into_iter()
        .enumerate()
        .map(|(j, p)| {
            let m = if j <= n_theta / 2 {
                j as i32
            } else {
                j as i32 - n_theta as i32
            };
            (m, p)
        })
        .collect();
    out.sort_by_key(|&(m, _)| m);
    Ok(out)
}

/// Raster used by [`asymmetry_metric`].
pub const ASYMMETRY_RASTER: (usize, usize) = (128, 64);

/// `Σ |ρ − ρ̄(r)| / Σ ρ` on the polar raster (area-weighted), where `ρ̄` is
/// the angular average at each radius. Values lie in [0, 2].
pub fn asymmetry_metric(w: &Wavefunction) -> Result<f64> {
    let raster = PolarRaster {
        n_r: ASYMMETRY_RASTER.0,
        n_theta: ASYMMETRY_RASTER.1,
        r_max: w.half_width,
    };
    let rho: Vec<f64> = raster.sample_spectral(w, 0.0)?.iter().map(|c| c.norm_sqr()).collect();
    let nt = raster.n_theta;
    let (mut dev, mut total) = (0.0, 0.0);
    for i in 0..raster.n_r {
        let ring = &rho[i * nt..(i + 1) * nt];
        let mean = pairwise(0, nt, &|j| ring[j]) / nt as f64;
        let r = raster.radius(i);
        dev += r * pairwise(0, nt, &|j| (ring[j] - mean).abs());
        total += r * pairwise(0, nt, &|j| ring[j]);
    }
    Ok(if total > 0.0 { dev / total } else { 0.0 })
}

/// `|ψ(x, y)|²` along the grid line nearest to `y` (ties snap down).
pub fn slice_probability(w: &Wavefunction, y: f64) -> Result<Vec<(f64, f64)>> {
    w.check_shape()?;
    let f = (y + w.half_width) / w.dx();
    let iy = ((f - 0.5).ceil() as i64).rem_euclid(w.n as i64) as usize;
    Ok((0..w.n).map(|ix| (w.coord(ix), w.at(ix, iy).norm_sqr())).collect())
}

/// L2 distance between `a` rotated by `angle` and `b`, on the polar raster
/// (spectral interpolation).
pub fn rotation_mismatch(a: &Wavefunction, b: &Wavefunction, angle: f64, raster: &PolarRaster) -> Result<f64> {
    let ra = raster.sample_spectral(a, angle)?;
    let rb = raster.sample_spectral(b, 0.0)?;
    let nt = raster.n_theta;
    let s = pairwise(0, ra.len(), &|k| (ra[k] - rb[k]).norm_sqr() * raster.radius(k / nt));
    Ok((s * raster.dr() * raster.dtheta()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn packet(p0: (f64, f64), center: (f64, f64)) -> Wavefunction {
        init_min_uncertainty(256, 12.0, 1.0, center.0, center.1, p0.0, p0.1, 0.1).unwrap()
    }

    #[test]
    fn initial_moments() {
        let w = packet((0.0, 0.0), (0.0, 0.0));
        assert!((w.norm() - 1.0).abs() < 1e-12);
        let dp = DimensionlessParams::reference();
        let mut p = Propagator::for_state(&w, &dp, &QuantumConfig::per_period(&dp, 1024)).unwrap();
        let o = p.observe(&w).unwrap();
        assert!((o.var_x / 0.1 - 1.0).abs() < 1e-3);
        assert!((o.var_y / 0.1 - 1.0).abs() < 1e-3);
        assert!((o.var_x * o.var_px / 0.25 - 1.0).abs() < 5e-3);
        let w = packet((1.0, 0.0), (0.0, 0.0));
        let o = p.observe(&w).unwrap();
        assert!((o.mean_px - 1.0).abs() < 1e-6, "{}", o.mean_px);
        assert!(o.mean_py.abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_packets() {
        assert!(init_min_uncertainty(256, 12.0, 1.0, 10.5, 0.0, 0.0, 0.0, 0.1).is_err());
        assert!(init_min_uncertainty(256, 12.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(init_min_uncertainty(100, 12.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn config_requires_whole_steps_per_period() {
        let dp = DimensionlessParams::reference();
        assert!(QuantumConfig::per_period(&dp, 1024).validate(&dp).is_ok());
        let bad = QuantumConfig {
            dt: dp.period() / 1000.5,
            ..QuantumConfig::per_period(&dp, 1)
        };
        assert!(bad.validate(&dp).is_err());
    }

    #[test]
    fn spectral_interpolant_reproduces_grid_values() {
        let w = packet((0.4, -0.3), (0.5, -0.2));
        let s = SpectralInterpolant::new(&w).unwrap();
        for (ix, iy) in [(128, 128), (130, 125), (120, 131)] {
            let d = (s.eval(w.coord(ix), w.coord(iy)) - w.at(ix, iy)).norm();
            assert!(d < 1e-12, "{d}");
        }
    }

    #[test]
    fn symmetric_packet_has_no_asymmetry_and_pure_m0() {
        let w = packet((0.0, 0.0), (0.0, 0.0));
        assert!(asymmetry_metric(&w).unwrap() < 1e-8);
        // at n = 256 bilinear interpolation loses ~0.4% of the peak, so the
        // m = 0 share is checked relative to the raster total
        let pops = angular_decompose(&w, 128, 64).unwrap();
        let p0 = pops.iter().find(|p| p.0 == 0).unwrap().1;
        let sum: f64 = pops.iter().map(|p| p.1).sum();
        assert!(p0 / sum > 0.999, "P0 {p0} of {sum}");
        assert!((sum - 1.0).abs() < 1e-2);
        // a twice finer grid brings the absolute population above 0.999
        let fine = init_min_uncertainty(512, 12.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.1).unwrap();
        let pops = angular_decompose(&fine, 256, 64).unwrap();
        let p0 = pops.iter().find(|p| p.0 == 0).unwrap().1;
        let rest: f64 = pops.iter().filter(|p| p.0 != 0).map(|p| p.1).sum();
        assert!(p0 > 0.999 && rest < 1e-3, "P0 {p0}, rest {rest}");
    }

    #[test]
    fn displaced_packet_populates_plus_minus_m_equally() {
        let w = packet((0.0, 0.0), (0.5, 0.0));
        let pops = angular_decompose(&w, 128, 64).unwrap();
        for m in 1..32 {
            let a = pops.iter().find(|p| p.0 == m).unwrap().1;
            let b = pops.iter().find(|p| p.0 == -m).unwrap().1;
            assert!((a - b).abs() < 1e-6, "m={m}: {a} vs {b}");
        }
        assert!(asymmetry_metric(&w).unwrap() > 0.05);
    }

    #[test]
    fn slice_matches_analytic_gaussian() {
        let w = packet((0.0, 0.0), (0.0, 0.0));
        let sl = slice_probability(&w, 0.0).unwrap();
        // grid index n/2 sits at x = 0; x_{n/2+k} mirrors x_{n/2−k}
        for k in 1..100 {
            assert!((sl[128 + k].1 - sl[128 - k].1).abs() < 1e-12);
        }
        for &(x, p) in &sl {
            let exact = (-(x * x) / (2.0 * 0.1)).exp() / (2.0 * PI * 0.1);
            assert!((p - exact).abs() < 1e-6);
        }
        let dx = w.dx();
        let total: f64 = (0..w.n)
            .map(|i| {
                slice_probability(&w, w.coord(i))
                    .unwrap()
                    .iter()
                    .map(|s| s.1)
                    .sum::<f64>()
            })
            .sum::<f64>()
            * dx
            * dx;
        assert!((total - 1.0).abs() < 1e-9);
        // nearest-line snap
        assert_eq!(slice_probability(&w, 0.3 * dx).unwrap(), sl);
    }

    #[test]
    fn fused_steps_equal_separate_steps() {
        let dp = DimensionlessParams::reference();
        let qc = QuantumConfig::per_period(&dp, 256);
        let w = packet((0.3, 0.2), (0.5, 0.0));
        let mut p = Propagator::for_state(&w, &dp, &qc).unwrap();
        let mut a = w.clone();
        p.advance(&mut a, 6).unwrap();
        let mut b = w.clone();
        for _ in 0..6 {
            b = split_step(&b, &dp, &qc).unwrap();
        }
        assert!((a.t - b.t).abs() < 1e-15);
        let d = a
            .amps
            .iter()
            .zip(&b.amps)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(d < 1e-12, "{d}");
    }

    #[test]
    fn mask_never_increases_norm() {
        let dp = DimensionlessParams::reference();
        let qc = QuantumConfig {
            mask_at_r1: true,
            ..QuantumConfig::per_period(&dp, 256)
        };
        let w = packet((0.0, 6.0), (0.0, 5.0));
        let (series, _) = propagate_strobes(
            &w,
            2,
            &dp,
            &qc,
            RunOptions {
                recording: Recording::EveryKSteps(32),
                with_asymmetry: false,
            },
        )
        .unwrap();
        assert!(series.rows.windows(2).all(|r| r[1].norm <= r[0].norm + 1e-12));
    }
}
