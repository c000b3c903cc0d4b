//! Unperturbed oscillation frequency versus energy, resonance radii,
//! fixed points of the stroboscopic map, and the quantum revival time.
//!
//! In the invariant plane the unmodulated motion is one-dimensional in the
//! potential `s e^{|x|}` with `s = ξ e^{-r1}`. A half period is
//!
//! ```text
//! T0/2 = ∫_{-xM}^{xM} dx / √(2 (H0 − s e^{|x|})),   xM = r1 + ln(H0/ξ)
//! ```
//!
//! and the inverse-square-root singularity at the turning points is removed
//! with `x = xM sin u`, leaving a smooth integrand for Gauss–Legendre.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use rayon::prelude::*;

use crate::classical::{plane_jacobian, unmodulated_energy, IntegratorConfig, PhaseState, StrobeMap};
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::units::DimensionlessParams;

pub const DEFAULT_QUAD_POINTS: usize = 256;
const QUAD_TOLERANCE: f64 = 1e-8;
const MAX_QUAD_POINTS: usize = 1 << 16;

/// Turning point of the in-plane orbit with energy `h0`.
pub fn turning_point(h0: f64, dp: &DimensionlessParams) -> Result<f64> {
    let floor = dp.floor_energy();
    if !(h0 > floor) {
        return Err(Error::Domain(format!(
            "energy {h0} does not exceed the potential minimum {floor}"
        )));
    }
    Ok(dp.r1 + (h0 / dp.xi).ln())
}

// Half-domain integral ∫_0^{xM} dx / √(2(h0 − V)) with `n` nodes.
fn half_period_integral(h0: f64, xm: f64, n: usize) -> f64 {
    let gl = GaussLegendre::cached(n);
    gl.integrate(0.0, FRAC_PI_2, |u| {
        let one_minus_sin = 2.0 * (FRAC_PI_4 - 0.5 * u).sin().powi(2);
        let gap = -h0 * (-xm * one_minus_sin).exp_m1();
        if gap <= 0.0 {
            // u = π/2 exactly; the integrand's limit is finite but never sampled
            return 0.0;
        }
        xm * u.cos() / (2.0 * gap).sqrt()
    })
}

/// Unperturbed angular frequency ω0(H0) of in-plane oscillation.
///
/// Starts at `quad_points` nodes and doubles until successive values agree
/// to 1e-8 relative.
pub fn omega0_of_energy(h0: f64, dp: &DimensionlessParams, quad_points: usize) -> Result<f64> {
    let xm = turning_point(h0, dp)?;
    let mut n = quad_points.max(8);
    let mut prev = PI / (2.0 * half_period_integral(h0, xm, n));
    while n < MAX_QUAD_POINTS {
        n *= 2;
        let next = PI / (2.0 * half_period_integral(h0, xm, n));
        if ((next - prev) / next).abs() < QUAD_TOLERANCE {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Accuracy(format!(
        "period quadrature at H0 = {h0} did not converge with {MAX_QUAD_POINTS} nodes"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyRow {
    pub h0: f64,
    pub x_m: f64,
    pub omega0: f64,
}

/// Tabulated `H0 → (xM, ω0)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrequencyCurve {
    pub rows: Vec<FrequencyRow>,
}

/// Tabulates turning point and frequency over `h_grid`, which must be
/// strictly increasing.
pub fn frequency_curve(dp: &DimensionlessParams, h_grid: &[f64], quad_points: usize) -> Result<FrequencyCurve> {
    if let Some(i) = h_grid.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::Row {
            index: i + 1,
            source: Box::new(Error::invalid("h_grid", "energies must be strictly increasing")),
        });
    }
    let rows: Vec<Result<FrequencyRow>> = h_grid
        .par_iter()
        .map(|&h0| {
            Ok(FrequencyRow {
                h0,
                x_m: turning_point(h0, dp)?,
                omega0: omega0_of_energy(h0, dp, quad_points)?,
            })
        })
        .collect();
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| Error::Row {
                index,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FrequencyCurve { rows })
}

/// Energy grid with `n` points between `h_min` and `h_max`, geometric in
/// the excess energy above the potential floor.
pub fn energy_grid(dp: &DimensionlessParams, h_min: f64, h_max: f64, n: usize) -> Result<Vec<f64>> {
    let floor = dp.floor_energy();
    if !(h_min > floor && h_max > h_min) || n == 0 {
        return Err(Error::invalid(
            "energy grid",
            format!("need floor {floor} < h_min < h_max and n >= 1"),
        ));
    }
    if n == 1 {
        return Ok(vec![h_min]);
    }
    let (a, b) = ((h_min - floor).ln(), (h_max - floor).ln());
    Ok((0..n)
        .map(|i| floor + (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect())
}

/// Frequency as a function of turning point, which is unimodal.
fn omega0_of_turning_point(xm: f64, dp: &DimensionlessParams) -> Result<f64> {
    let h0 = dp.floor_energy() * xm.exp();
    omega0_of_energy(h0, dp, DEFAULT_QUAD_POINTS)
}

/// Turning point where ω0 is smallest, by golden-section search.
pub fn slowest_oscillation(dp: &DimensionlessParams) -> Result<(f64, f64)> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (1e-6, 40.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = omega0_of_turning_point(c, dp)?;
    let mut fd = omega0_of_turning_point(d, dp)?;
    while b - a > 1e-10 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = omega0_of_turning_point(c, dp)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = omega0_of_turning_point(d, dp)?;
        }
    }
    let xm = 0.5 * (a + b);
    Ok((xm, omega0_of_turning_point(xm, dp)?))
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let mut flo = f(lo)?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi.abs().max(1e-300) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Below the frequency minimum (small orbits near the axis).
    Inner,
    /// Above the frequency minimum (orbits reaching the wall).
    Outer,
}

/// Radius where the unperturbed motion is resonant with the drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceRadius {
    pub j: u32,
    pub branch: Branch,
    pub energy: f64,
    pub radius: f64,
}

/// Solves `ω0(H) = ω/j` for `j = 1..=j_max`. Because ω0(H) has a single
/// minimum, each order has zero or two solutions.
pub fn resonance_radii(dp: &DimensionlessParams, j_max: u32) -> Result<Vec<ResonanceRadius>> {
    let (x_slow, w_slow) = slowest_oscillation(dp)?;
    let floor = dp.floor_energy();
    let mut out = Vec::new();
    for j in 1..=j_max {
        let target = dp.omega / j as f64;
        if target <= w_slow {
            continue;
        }
        let resid = |xm: f64| omega0_of_turning_point(xm, dp).map(|w| w - target);
        let inner = bisect(1e-12, x_slow, resid)?;
        let mut hi = x_slow + 1.0;
        while resid(hi)? < 0.0 {
            hi += 1.0;
            if hi > x_slow + 200.0 {
                return Err(Error::Accuracy(format!("no outer resonance for j = {j}")));
            }
        }
        let outer = bisect(x_slow, hi, resid)?;
        for (branch, xm) in [(Branch::Inner, inner), (Branch::Outer, outer)] {
            out.push(ResonanceRadius {
                j,
                branch,
                energy: floor * xm.exp(),
                radius: xm,
            });
        }
    }
    Ok(out)
}

/// Rectangular seed lattice over the `(x, px)` plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBox {
    pub x: (f64, f64),
    pub px: (f64, f64),
    pub nx: usize,
    pub npx: usize,
}

impl SearchBox {
    pub fn seeds(&self) -> Vec<(f64, f64)> {
        let lin = |(a, b): (f64, f64), n: usize, i: usize| {
            if n <= 1 {
                0.5 * (a + b)
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            }
        };
        let mut out = Vec::with_capacity(self.nx * self.npx);
        for i in 0..self.nx {
            for k in 0..self.npx {
                out.push((lin(self.x, self.nx, i), lin(self.px, self.npx, k)));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Elliptic,
    Hyperbolic,
}

impl Stability {
    pub fn as_str(self) -> &'static str {
        match self {
            Stability::Elliptic => "elliptic",
            Stability::Hyperbolic => "hyperbolic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub x: f64,
    pub px: f64,
    pub residual: f64,
    pub stability: Stability,
    pub period: u32,
    /// Trace of the period map's Jacobian (NaN for the axis equilibrium).
    pub trace: f64,
    pub det: f64,
}

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-10;
const DEDUP_DIST: f64 = 1e-6;
const FD_STEP: f64 = 1e-6;

fn newton(map: &StrobeMap, x0: f64, p0: f64, period: u32, escape: f64) -> Option<(f64, f64, f64)> {
    let image = |x: f64, p: f64| {
        let s = map.iterate(&PhaseState::in_plane(x, p), period);
        (s.x, s.px)
    };
    let (mut x, mut p) = (x0, p0);
    for _ in 0..=NEWTON_MAX_ITER {
        let (fx, fp) = image(x, p);
        let (rx, rp) = (fx - x, fp - p);
        let res = (rx * rx + rp * rp).sqrt();
        if !res.is_finite() {
            return None;
        }
        if res < NEWTON_TOL {
            return Some((x, p, res));
        }
        let j = plane_jacobian(map, &PhaseState::in_plane(x, p), period, FD_STEP);
        let (a, b, c, d) = (j[0][0] - 1.0, j[0][1], j[1][0], j[1][1] - 1.0);
        let det = a * d - b * c;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let mut dx = -(d * rx - b * rp) / det;
        let mut dpx = -(-c * rx + a * rp) / det;
        let len = (dx * dx + dpx * dpx).sqrt();
        if len > 1.0 {
            dx /= len;
            dpx /= len;
        }
        x += dx;
        p += dpx;
        if !(x.abs() < escape && p.abs() < escape) {
            return None;
        }
    }
    None
}

/// Fixed points of the `period`-fold stroboscopic map restricted to the
/// invariant plane, from Newton iteration seeded on `search`.
///
/// Points are returned in the order of the first seed converging to them.
/// The axis equilibrium is classified as elliptic without linearization:
/// the potential has a strict conical minimum there for every ε < 1.
pub fn find_fixed_points(
    dp: &DimensionlessParams,
    cfg: &IntegratorConfig,
    search: &SearchBox,
    period: u32,
) -> Result<Vec<FixedPoint>> {
    if period == 0 {
        return Err(Error::invalid("period", "must be >= 1"));
    }
    let map = StrobeMap::new(dp, cfg)?;
    let escape = 4.0 * (dp.r1 + 10.0);
    let converged: Vec<Option<(f64, f64, f64)>> = search
        .seeds()
        .par_iter()
        .map(|&(x, p)| newton(&map, x, p, period, escape))
        .collect();

    let mut points: Vec<FixedPoint> = Vec::new();
    for (x, p, residual) in converged.into_iter().flatten() {
        if points
            .iter()
            .any(|q| ((q.x - x).powi(2) + (q.px - p).powi(2)).sqrt() < DEDUP_DIST)
        {
            continue;
        }
        let on_axis = x.abs() < 1e-12 && p.abs() < 1e-12;
        let (stability, trace, det) = if on_axis {
            (Stability::Elliptic, f64::NAN, f64::NAN)
        } else {
            let j = plane_jacobian(&map, &PhaseState::in_plane(x, p), period, FD_STEP);
            let tr = j[0][0] + j[1][1];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            let st = if tr.abs() < 2.0 {
                Stability::Elliptic
            } else {
                Stability::Hyperbolic
            };
            (st, tr, det)
        };
        points.push(FixedPoint {
            x,
            px: p,
            residual,
            stability,
            period,
            trace,
            det,
        });
    }
    Ok(points)
}

impl FixedPoint {
    /// Turning point of the unmodulated orbit through the point. Equals
    /// `|x|` when `px = 0`; points on the symmetry line `x = 0` are mapped
    /// to the amplitude of the orbit they sit on.
    pub fn orbit_radius(&self, dp: &DimensionlessParams) -> Result<f64> {
        turning_point(unmodulated_energy(&PhaseState::in_plane(self.x, self.px), dp), dp)
    }

    /// The axis equilibrium, which every strobe power fixes.
    pub fn is_axis_equilibrium(&self) -> bool {
        self.x.abs() < 1e-12 && self.px.abs() < 1e-12
    }
}

/// Resonance radius closest to `radius` in relative terms, with the
/// relative deviation `|radius − r_j| / r_j`.
pub fn nearest_resonance(radius: f64, radii: &[ResonanceRadius]) -> Option<(ResonanceRadius, f64)> {
    radii
        .iter()
        .map(|r| (*r, (radius - r.radius).abs() / r.radius))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// How the mean energy entering the revival estimate is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanEnergy {
    /// Classical energy of the packet center plus `k̄ ω0 / 2`.
    ZeroPoint,
    /// Exact expectation of the unmodulated Hamiltonian in the Gaussian packet.
    PacketAverage,
}

/// One-dimensional oscillator characterized by its frequency-energy relation.
pub trait Oscillator: Sync {
    fn omega0(&self, energy: f64) -> Result<f64>;
}

/// The in-plane exponential well of the fiber.
#[derive(Debug, Clone, Copy)]
pub struct ExponentialWell {
    pub dp: DimensionlessParams,
    pub quad_points: usize,
}

impl Oscillator for ExponentialWell {
    fn omega0(&self, energy: f64) -> Result<f64> {
        omega0_of_energy(energy, &self.dp, self.quad_points)
    }
}

/// Isochronous oscillator, for checking the degenerate branch.
#[derive(Debug, Clone, Copy)]
pub struct HarmonicWell {
    pub omega: f64,
}

impl Oscillator for HarmonicWell {
    fn omega0(&self, energy: f64) -> Result<f64> {
        if energy <= 0.0 {
            return Err(Error::Domain(format!("energy {energy} <= 0")));
        }
        Ok(self.omega)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevivalEstimate {
    pub mean_energy: f64,
    pub omega0: f64,
    pub domega_de: f64,
    pub classical_period: f64,
    pub t_rev: f64,
}

/// `T_rev = T0 (k̄/2 |∂ω0/∂E|)^{-1}` at `mean_energy`.
pub fn revival_time_at(osc: &dyn Oscillator, mean_energy: f64, kbar: f64) -> Result<RevivalEstimate> {
    let omega0 = osc.omega0(mean_energy)?;
    let h = 1e-4 * mean_energy.abs();
    let domega_de = (osc.omega0(mean_energy + h)? - osc.omega0(mean_energy - h)?) / (2.0 * h);
    if domega_de.abs() < 1e-12 {
        return Err(Error::Degenerate(format!(
            "dω0/dE = {domega_de:e} at E = {mean_energy}; no collapse or revival"
        )));
    }
    let classical_period = 2.0 * PI / omega0;
    Ok(RevivalEstimate {
        mean_energy,
        omega0,
        domega_de,
        classical_period,
        t_rev: classical_period / (0.5 * kbar * domega_de.abs()),
    })
}

/// Revival time of a minimum-uncertainty packet with position variance
/// `sigma` centred on `center`.
pub fn revival_time(
    dp: &DimensionlessParams,
    sigma: f64,
    center: &PhaseState,
    mode: MeanEnergy,
) -> Result<RevivalEstimate> {
    dp.validate()?;
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma", "must be > 0"));
    }
    let well = ExponentialWell {
        dp: *dp,
        quad_points: DEFAULT_QUAD_POINTS,
    };
    let mean_energy = match mode {
        MeanEnergy::ZeroPoint => {
            let h = unmodulated_energy(center, dp);
            h + 0.5 * dp.kbar * well.omega0(h)?
        }
        MeanEnergy::PacketAverage => packet_mean_energy(dp, sigma, center),
    };
    revival_time_at(&well, mean_energy, dp.kbar)
}

/// `⟨p²⟩/2 + ⟨V⟩` for the Gaussian packet with ε = 0.
pub fn packet_mean_energy(dp: &DimensionlessParams, sigma: f64, center: &PhaseState) -> f64 {
    let kinetic = 0.5 * (center.px * center.px + center.py * center.py) + dp.kbar * dp.kbar / (4.0 * sigma);
    // ⟨V⟩ over the position density N(center, σ) on each axis
    let gl = GaussLegendre::cached(128);
    let w = 8.0 * sigma.sqrt();
    let norm = 1.0 / (2.0 * PI * sigma);
    let mut acc = 0.0;
    for (u, wu) in gl.nodes.iter().zip(&gl.weights) {
        let dx = w * u;
        for (v, wv) in gl.nodes.iter().zip(&gl.weights) {
            let dy = w * v;
            let r = ((center.x + dx).powi(2) + (center.y + dy).powi(2)).sqrt();
            let rho = norm * (-(dx * dx + dy * dy) / (2.0 * sigma)).exp();
            acc += wu * wv * rho * dp.xi * (r - dp.r1).exp();
        }
    }
    kinetic + acc * w * w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::Scheme;

    fn dp0() -> DimensionlessParams {
        DimensionlessParams::reference().with_eps(0.0)
    }

    #[test]
    fn turning_point_closed_form() {
        let d = dp0();
        assert!((turning_point(d.xi, &d).unwrap() - d.r1).abs() < 1e-14);
        let tiny = turning_point(d.floor_energy() * (1.0 + 1e-12), &d).unwrap();
        assert!(tiny > 0.0 && tiny < 2e-12);
        // r1 + ln(0.2425/50)
        let x = turning_point(0.2425, &d).unwrap();
        assert!((x - 2.876_823).abs() < 1e-5, "x_m = {x}");
        assert!(turning_point(d.floor_energy(), &d).is_err());
    }

    #[test]
    fn near_bottom_asymptote() {
        let d = dp0();
        let s = d.floor_energy();
        let e = 1e-6;
        let w = omega0_of_energy(s + e, &d, DEFAULT_QUAD_POINTS).unwrap();
        let v_shape = PI * s / (2.0 * (2.0 * e).sqrt());
        assert!(((w - v_shape) / v_shape).abs() < 0.01, "{w} vs {v_shape}");
    }

    #[test]
    fn gauge_invariance() {
        let d = dp0();
        let c: f64 = 1.7;
        let g = DimensionlessParams {
            xi: d.xi * c.exp(),
            r1: d.r1 + c,
            ..d
        };
        for h in [0.02, 0.3, 5.0, 40.0] {
            let a = omega0_of_energy(h, &d, DEFAULT_QUAD_POINTS).unwrap();
            let b = omega0_of_energy(h, &g, DEFAULT_QUAD_POINTS).unwrap();
            assert!(((a - b) / a).abs() < 1e-12);
        }
    }

    #[test]
    fn quadrature_converged_under_doubling() {
        let d = dp0();
        for h in [0.014, 0.1, 2.0, 49.0] {
            let a = omega0_of_energy(h, &d, 256).unwrap();
            let b = omega0_of_energy(h, &d, 1024).unwrap();
            assert!(((a - b) / a).abs() < 1e-8);
        }
    }

    #[test]
    fn curve_rows_and_errors() {
        let d = dp0();
        let one = frequency_curve(&d, &[0.5], DEFAULT_QUAD_POINTS).unwrap();
        assert_eq!(one.rows.len(), 1);
        assert_eq!(one.rows[0].x_m, turning_point(0.5, &d).unwrap());
        assert_eq!(
            one.rows[0].omega0,
            omega0_of_energy(0.5, &d, DEFAULT_QUAD_POINTS).unwrap()
        );

        let grid = energy_grid(&d, 0.02, 45.0, 40).unwrap();
        let curve = frequency_curve(&d, &grid, DEFAULT_QUAD_POINTS).unwrap();
        assert!(curve.rows.windows(2).all(|w| w[1].x_m > w[0].x_m && w[1].h0 > w[0].h0));

        let bad = [0.5, 0.001, 1.0];
        match frequency_curve(&d, &[0.001, 0.5], DEFAULT_QUAD_POINTS) {
            Err(Error::Row { index: 0, .. }) => {}
            other => panic!("expected row 0 failure, got {other:?}"),
        }
        assert!(frequency_curve(&d, &bad, DEFAULT_QUAD_POINTS).is_err());
    }

    #[test]
    fn resonance_radii_solve_the_condition() {
        let d = DimensionlessParams::reference();
        let radii = resonance_radii(&d, 8).unwrap();
        assert_eq!(radii.len(), 16);
        for r in &radii {
            let w = omega0_of_turning_point(r.radius, &d).unwrap();
            assert!((w - d.omega / r.j as f64).abs() < 1e-8, "{r:?}");
        }
    }

    #[test]
    fn unmodulated_axis_is_the_only_period_one_point_near_center() {
        let d = dp0();
        let cfg = IntegratorConfig::new(64, Scheme::ForestRuth4);
        let search = SearchBox {
            x: (-0.5, 0.5),
            px: (-0.1, 0.1),
            nx: 3,
            npx: 3,
        };
        let pts = find_fixed_points(&d, &cfg, &search, 1).unwrap();
        assert!(!pts.is_empty());
        let origin = pts.iter().find(|p| p.x.abs() < 1e-12 && p.px.abs() < 1e-12).unwrap();
        assert_eq!(origin.stability, Stability::Elliptic);
        assert!(pts.iter().all(|p| p.residual < 1e-10));
    }

    #[test]
    fn orbit_radius_of_symmetry_line_points() {
        let d = dp0();
        let fp = |x: f64, px: f64| FixedPoint {
            x,
            px,
            residual: 0.0,
            stability: Stability::Elliptic,
            period: 1,
            trace: 0.0,
            det: 1.0,
        };
        assert!((fp(-3.0, 0.0).orbit_radius(&d).unwrap() - 3.0).abs() < 1e-12);
        // kinetic energy at the axis equals the potential rise to the turning point
        let h = d.xi * (3.0 - d.r1).exp();
        let p = (2.0 * (h - d.floor_energy())).sqrt();
        assert!((fp(0.0, p).orbit_radius(&d).unwrap() - 3.0).abs() < 1e-10);
        let radii = resonance_radii(&d, 8).unwrap();
        let (near, dev) = nearest_resonance(8.6, &radii).unwrap();
        assert_eq!((near.j, near.branch), (1, Branch::Outer));
        assert!((dev - (8.6 - near.radius).abs() / near.radius).abs() < 1e-15);
        assert!(fp(0.0, 0.0).is_axis_equilibrium());
    }

    #[test]
    fn harmonic_well_has_no_revival() {
        let osc = HarmonicWell { omega: 1.3 };
        assert!(matches!(revival_time_at(&osc, 2.0, 1.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn revival_scales_inversely_with_kbar() {
        let well = ExponentialWell {
            dp: dp0(),
            quad_points: DEFAULT_QUAD_POINTS,
        };
        let a = revival_time_at(&well, 0.4, 1.0).unwrap();
        let b = revival_time_at(&well, 0.4, 2.0).unwrap();
        assert!((a.t_rev / b.t_rev - 2.0).abs() < 1e-12);
    }

    #[test]
    fn packet_energy_of_free_part() {
        let mut d = dp0();
        d.xi = 1e-300;
        let c = PhaseState::new(0.5, 0.5, 1.0, 0.0);
        let e = packet_mean_energy(&d, 0.1, &c);
        assert!((e - (0.5 + 2.5)).abs() < 1e-12);
    }
}
