//! Symplectic integration of the modulated two-dimensional Hamiltonian and
//! the stroboscopic map sampled at multiples of the modulation period.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::units::DimensionlessParams;

/// Point in the four-dimensional phase space, plus the time it refers to.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseState {
    pub x: f64,
    pub y: f64,
    pub px: f64,
    pub py: f64,
    pub t: f64,
}

impl PhaseState {
    pub fn new(x: f64, y: f64, px: f64, py: f64) -> Self {
        PhaseState { x, y, px, py, t: 0.0 }
    }

    /// State in the invariant plane y = py = 0.
    pub fn in_plane(x: f64, px: f64) -> Self {
        PhaseState::new(x, 0.0, px, 0.0)
    }

    pub fn radius(&self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.px.is_finite() && self.py.is_finite() && self.t.is_finite()
    }

    /// Same point with momenta reversed.
    pub fn reversed(&self) -> Self {
        PhaseState {
            px: -self.px,
            py: -self.py,
            ..*self
        }
    }

    /// Rotation by `phi` about the fiber axis (positions and momenta).
    pub fn rotated(&self, phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        PhaseState {
            x: c * self.x - s * self.y,
            y: s * self.x + c * self.y,
            px: c * self.px - s * self.py,
            py: s * self.px + c * self.py,
            t: self.t,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x, self.y, self.px, self.py]
    }

    pub fn from_array(z: [f64; 4], t: f64) -> Self {
        PhaseState {
            x: z[0],
            y: z[1],
            px: z[2],
            py: z[3],
            t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Drift-kick-drift, second order.
    Leapfrog2,
    /// Forest–Ruth three-stage composition, fourth order.
    ForestRuth4,
}

impl Scheme {
    /// Drift and kick weights of the position-momentum splitting. Drifts and
    /// kicks alternate, starting and ending with a drift.
    fn weights(self) -> (&'static [f64], &'static [f64]) {
        match self {
            Scheme::Leapfrog2 => (&[0.5, 0.5], &[1.0]),
            Scheme::ForestRuth4 => (&FR_DRIFTS, &FR_KICKS),
        }
    }

    pub fn order(self) -> u32 {
        match self {
            Scheme::Leapfrog2 => 2,
            Scheme::ForestRuth4 => 4,
        }
    }
}

// θ = 1/(2 − 2^(1/3))
const FR_THETA: f64 = 1.351_207_191_959_657_6;
const FR_DRIFTS: [f64; 4] = [
    FR_THETA / 2.0,
    (1.0 - FR_THETA) / 2.0,
    (1.0 - FR_THETA) / 2.0,
    FR_THETA / 2.0,
];
const FR_KICKS: [f64; 3] = [FR_THETA, 1.0 - 2.0 * FR_THETA, FR_THETA];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntegratorConfig {
    pub steps_per_period: u32,
    pub scheme: Scheme,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            steps_per_period: 256,
            scheme: Scheme::ForestRuth4,
        }
    }
}

impl IntegratorConfig {
    pub fn new(steps_per_period: u32, scheme: Scheme) -> Self {
        IntegratorConfig {
            steps_per_period,
            scheme,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps_per_period < 16 || !self.steps_per_period.is_power_of_two() {
            return Err(Error::invalid(
                "steps_per_period",
                format!("must be a power of two >= 16, got {}", self.steps_per_period),
            ));
        }
        Ok(())
    }

    pub fn dt(&self, dp: &DimensionlessParams) -> f64 {
        dp.period() / self.steps_per_period as f64
    }
}

/// Modulation factor `1 + ε cos ωt`.
#[inline]
pub fn modulation(t: f64, dp: &DimensionlessParams) -> f64 {
    1.0 + dp.eps * (dp.omega * t).cos()
}

/// Potential energy `ξ exp(r − r1)(1 + ε cos ωt)`.
pub fn potential(x: f64, y: f64, t: f64, dp: &DimensionlessParams) -> f64 {
    let r = (x * x + y * y).sqrt();
    dp.xi * (r - dp.r1).exp() * modulation(t, dp)
}

/// Force `−∇V`. The direction is undefined on the axis; the force there is zero.
pub fn force(x: f64, y: f64, t: f64, dp: &DimensionlessParams) -> (f64, f64) {
    let g = radial_gain(x, y, dp) * modulation(t, dp);
    (-g * x, -g * y)
}

/// `ξ e^(r − r1) / r`, or zero on the axis.
#[inline(always)]
fn radial_gain(x: f64, y: f64, dp: &DimensionlessParams) -> f64 {
    let r = (x * x + y * y).sqrt();
    if r > 0.0 {
        dp.xi * (r - dp.r1).exp() / r
    } else {
        0.0
    }
}

/// Instantaneous energy `H(t)` at the state's own time.
pub fn hamiltonian(s: &PhaseState, dp: &DimensionlessParams) -> f64 {
    0.5 * (s.px * s.px + s.py * s.py) + potential(s.x, s.y, s.t, dp)
}

/// Energy of the unmodulated Hamiltonian (ε = 0).
pub fn unmodulated_energy(s: &PhaseState, dp: &DimensionlessParams) -> f64 {
    0.5 * (s.px * s.px + s.py * s.py) + dp.xi * (s.radius() - dp.r1).exp()
}

#[inline(always)]
fn drift(s: &mut PhaseState, h: f64) {
    s.x += h * s.px;
    s.y += h * s.py;
}

#[inline(always)]
fn kick(s: &mut PhaseState, h: f64, dp: &DimensionlessParams) {
    let g = h * radial_gain(s.x, s.y, dp);
    s.px -= g * s.x;
    s.py -= g * s.y;
}

/// Advances one time step `dt = T/steps_per_period` from `s.t`.
pub fn step(s: &PhaseState, dp: &DimensionlessParams, cfg: &IntegratorConfig) -> PhaseState {
    let dt = cfg.dt(dp);
    let (drifts, kicks) = cfg.scheme.weights();
    let t0 = s.t;
    let mut out = *s;
    let mut tau = 0.0;
    for (i, &c) in drifts.iter().enumerate() {
        drift(&mut out, c * dt);
        tau += c;
        if let Some(&d) = kicks.get(i) {
            kick(&mut out, d * dt * modulation(t0 + tau * dt, dp), dp);
        }
    }
    out.t = t0 + dt;
    out
}

/// Precomputed one-period propagator. Kick strengths include the modulation
/// factor at each sub-stage time, so the table is valid for any start time
/// that is a whole number of periods.
#[derive(Debug, Clone)]
pub struct StrobeMap {
    dp: DimensionlessParams,
    cfg: IntegratorConfig,
    drift_steps: Vec<f64>,
    kick_table: Vec<f64>,
}

impl StrobeMap {
    pub fn new(dp: &DimensionlessParams, cfg: &IntegratorConfig) -> Result<Self> {
        dp.validate()?;
        cfg.validate()?;
        let dt = cfg.dt(dp);
        let (drifts, kicks) = cfg.scheme.weights();
        let drift_steps = drifts.iter().map(|c| c * dt).collect();
        let mut kick_table = Vec::with_capacity(cfg.steps_per_period as usize * kicks.len());
        for k in 0..cfg.steps_per_period {
            let mut tau = 0.0;
            for (i, &d) in kicks.iter().enumerate() {
                tau += drifts[i];
                let t = (k as f64 + tau) * dt;
                kick_table.push(d * dt * modulation(t, dp));
            }
        }
        Ok(StrobeMap {
            dp: *dp,
            cfg: *cfg,
            drift_steps,
            kick_table,
        })
    }

    pub fn params(&self) -> &DimensionlessParams {
        &self.dp
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    pub fn period(&self) -> f64 {
        self.dp.period()
    }

    /// Applies `n` periods in place.
    pub fn advance(&self, s: &mut PhaseState, n: u32) {
        let period = self.period();
        let start = (s.t / period).round();
        let nk = self.drift_steps.len() - 1;
        for _ in 0..n {
            for kicks in self.kick_table.chunks_exact(nk) {
                for (i, &h) in kicks.iter().enumerate() {
                    drift(s, self.drift_steps[i]);
                    kick(s, h, &self.dp);
                }
                drift(s, self.drift_steps[nk]);
            }
        }
        s.t = (start + n as f64) * period;
    }

    pub fn apply(&self, s: &PhaseState) -> PhaseState {
        let mut out = *s;
        self.advance(&mut out, 1);
        out
    }

    pub fn iterate(&self, s: &PhaseState, n: u32) -> PhaseState {
        let mut out = *s;
        self.advance(&mut out, n);
        out
    }
}

/// One modulation period of the flow. `s.t` must be a whole number of periods.
pub fn strobe_map(s: &PhaseState, dp: &DimensionlessParams, cfg: &IntegratorConfig) -> Result<PhaseState> {
    let map = StrobeMap::new(dp, cfg)?;
    let count = s.t / dp.period();
    if (count - count.round()).abs() > 1e-9 * count.abs().max(1.0) {
        return Err(Error::invalid(
            "t",
            format!("strobe map needs t on a period boundary, got t = {}", s.t),
        ));
    }
    Ok(map.apply(s))
}

/// Jacobian of `n` strobe periods by centered finite differences with step `h`.
pub fn strobe_jacobian(map: &StrobeMap, s: &PhaseState, n: u32, h: f64) -> [[f64; 4]; 4] {
    let z0 = s.as_array();
    let mut jac = [[0.0; 4]; 4];
    for j in 0..4 {
        let mut zp = z0;
        let mut zm = z0;
        zp[j] += h;
        zm[j] -= h;
        let fp = map.iterate(&PhaseState::from_array(zp, s.t), n).as_array();
        let fm = map.iterate(&PhaseState::from_array(zm, s.t), n).as_array();
        for i in 0..4 {
            jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

/// One stroboscopic record of a portrait.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortraitRecord {
    pub seed: usize,
    pub strobe: u32,
    pub x: f64,
    pub px: f64,
}

/// Stroboscopic `(x, px)` records of every seed at strobes `1..=n_strobes`,
/// ordered by seed then strobe.
pub fn portrait(
    seeds: &[PhaseState],
    n_strobes: u32,
    dp: &DimensionlessParams,
    cfg: &IntegratorConfig,
) -> Result<Vec<PortraitRecord>> {
    if n_strobes == 0 {
        return Err(Error::invalid("n_strobes", "must be >= 1"));
    }
    let map = StrobeMap::new(dp, cfg)?;
    let per_seed: Vec<Vec<PortraitRecord>> = seeds
        .par_iter()
        .enumerate()
        .map(|(seed, s0)| {
            let mut s = *s0;
            (1..=n_strobes)
                .map(|strobe| {
                    map.advance(&mut s, 1);
                    PortraitRecord {
                        seed,
                        strobe,
                        x: s.x,
                        px: s.px,
                    }
                })
                .collect()
        })
        .collect();
    Ok(per_seed.into_iter().flatten().collect())
}

/// Evolves every state by `n_strobes` periods. Each state is independent,
/// so the result does not depend on scheduling.
pub fn evolve_all(states: &mut [PhaseState], n_strobes: u32, map: &StrobeMap) {
    states.par_iter_mut().for_each(|s| map.advance(s, n_strobes));
}

/// Finite-time Lyapunov exponent (per period) of an orbit in the invariant
/// plane, from products of finite-difference tangent maps of the strobe map.
pub fn finite_time_lyapunov(map: &StrobeMap, seed: &PhaseState, n_strobes: u32, h: f64) -> f64 {
    let mut s = PhaseState::in_plane(seed.x, seed.px);
    s.t = seed.t;
    let mut v = [1.0f64, 1.0];
    let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
    v = [v[0] / norm, v[1] / norm];
    let mut log_sum = 0.0;
    for _ in 0..n_strobes {
        let jac = plane_jacobian(map, &s, 1, h);
        let w = [jac[0][0] * v[0] + jac[0][1] * v[1], jac[1][0] * v[0] + jac[1][1] * v[1]];
        let len = (w[0] * w[0] + w[1] * w[1]).sqrt();
        log_sum += len.ln();
        v = [w[0] / len, w[1] / len];
        map.advance(&mut s, 1);
    }
    log_sum / n_strobes as f64
}

/// 2×2 Jacobian of the in-plane map `(x, px) ↦ Φⁿ(x, px)`.
pub fn plane_jacobian(map: &StrobeMap, s: &PhaseState, n: u32, h: f64) -> [[f64; 2]; 2] {
    let eval = |x: f64, px: f64| {
        let mut z = PhaseState::in_plane(x, px);
        z.t = s.t;
        let out = map.iterate(&z, n);
        [out.x, out.px]
    };
    let xp = eval(s.x + h, s.px);
    let xm = eval(s.x - h, s.px);
    let pp = eval(s.x, s.px + h);
    let pm = eval(s.x, s.px - h);
    [
        [(xp[0] - xm[0]) / (2.0 * h), (pp[0] - pm[0]) / (2.0 * h)],
        [(xp[1] - xm[1]) / (2.0 * h), (pp[1] - pm[1]) / (2.0 * h)],
    ]
}

/// 4×4 determinant by cofactor expansion along the first row.
pub fn det4(m: &[[f64; 4]; 4]) -> f64 {
    let minor = |skip: usize| {
        let cols: Vec<usize> = (0..4).filter(|&c| c != skip).collect();
        let a = |r: usize, c: usize| m[r][cols[c]];
        a(1, 0) * (a(2, 1) * a(3, 2) - a(2, 2) * a(3, 1)) - a(1, 1) * (a(2, 0) * a(3, 2) - a(2, 2) * a(3, 0))
            + a(1, 2) * (a(2, 0) * a(3, 1) - a(2, 1) * a(3, 0))
    };
    (0..4)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * m[0][j] * minor(j)
        })
        .sum()
}
