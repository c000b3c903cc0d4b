//! Laboratory parameters, the evanescent-wave dipole potential, and the
//! conversion into the scaled units used by the dynamics.
//!
//! Lengths are scaled by `2κ`, times by the reference frequency `ω_ref`, and
//! momenta by `M ω_ref / 2κ`. In these units the transverse Hamiltonian is
//!
//! ```text
//! H(t) = (px² + py²)/2 + ξ exp(√(x² + y²) − r1) (1 + ε cos ωt)
//! ```
//!
//! and the commutator `[q, p] = i k̄` carries the scaled Planck constant.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K).
pub const K_B: f64 = 1.380_649e-23;
/// Proton mass (kg).
pub const PROTON_MASS: f64 = 1.672_621_923_69e-27;

/// Laboratory description of the guide.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams {
    /// Natural linewidth Γ (rad/s).
    pub gamma: f64,
    /// Laser wavelength λ (m).
    pub lambda: f64,
    /// Atomic mass (kg).
    pub mass: f64,
    /// Saturation intensity (W/m²).
    pub i_sat: f64,
    /// Intensity at the fiber entrance (W/m²).
    pub i0: f64,
    /// Detuning Δ (rad/s); positive is blue.
    pub detuning: f64,
    /// Refractive index of the fiber wall.
    pub n_index: f64,
    /// Internal reflection angle (rad).
    pub theta: f64,
    /// Inner fiber radius (m).
    pub r1_phys: f64,
    /// Reference angular frequency ω_ref (rad/s).
    pub omega_ref: f64,
    /// Transverse temperatures (T_x, T_y) in K.
    pub temperature: (f64, f64),
}

impl PhysicalParams {
    /// Metastable helium at 1.083 µm in a 2 µm glass fiber, θ = 45°.
    ///
    /// The entrance intensity is set so that ξ = 50 at a 1 GHz blue
    /// detuning, and the temperature so that the momentum variance is 0.1.
    pub fn helium() -> Self {
        PhysicalParams {
            gamma: 2.0 * PI * 1.6e6,
            lambda: 1.083e-6,
            mass: 4.0 * PROTON_MASS,
            i_sat: 1.6,
            i0: 2925.891,
            detuning: 2.0 * PI * 1.0e9,
            n_index: 1.5,
            theta: PI / 4.0,
            r1_phys: 2.0e-6,
            omega_ref: 2.65e5,
            temperature: (2.022e-7, 2.022e-7),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma", self.gamma),
            ("lambda", self.lambda),
            ("mass", self.mass),
            ("i_sat", self.i_sat),
            ("detuning", self.detuning),
            ("r1_phys", self.r1_phys),
            ("omega_ref", self.omega_ref),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.i0.is_finite() && self.i0 >= 0.0) {
            return Err(Error::invalid("i0", format!("must be >= 0, got {}", self.i0)));
        }
        if !(self.n_index.is_finite() && self.n_index > 1.0) {
            return Err(Error::invalid("n_index", format!("must be > 1, got {}", self.n_index)));
        }
        if !self.theta.is_finite() {
            return Err(Error::invalid("theta", "must be finite"));
        }
        for t in [self.temperature.0, self.temperature.1] {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::invalid("temperature", format!("must be >= 0, got {t}")));
            }
        }
        Ok(())
    }

    /// Critical angle `asin(1/n)` for total internal reflection.
    pub fn critical_angle(&self) -> f64 {
        (1.0 / self.n_index).asin()
    }
}

/// Scaled parameters driving every simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionlessParams {
    /// Potential strength ξ.
    pub xi: f64,
    /// Inner fiber radius in units of 1/2κ.
    pub r1: f64,
    /// Modulation frequency in units of ω_ref.
    pub omega: f64,
    /// Modulation depth, 0 ≤ ε < 1.
    pub eps: f64,
    /// Scaled Planck constant k̄.
    pub kbar: f64,
}

impl DimensionlessParams {
    /// ξ = 50, ω = 2, ε = 0.7, k̄ = 1 with the helium radius r1 = 8.2056.
    pub fn reference() -> Self {
        DimensionlessParams {
            xi: 50.0,
            r1: 8.2056,
            omega: 2.0,
            eps: 0.7,
            kbar: 1.0,
        }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi.is_finite() && self.xi > 0.0) {
            return Err(Error::invalid("xi", format!("must be > 0, got {}", self.xi)));
        }
        if !(self.r1.is_finite() && self.r1 > 0.0) {
            return Err(Error::invalid("r1", format!("must be > 0, got {}", self.r1)));
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::invalid("omega", format!("must be > 0, got {}", self.omega)));
        }
        if !(self.eps.is_finite() && (0.0..1.0).contains(&self.eps)) {
            return Err(Error::invalid("eps", format!("must lie in [0, 1), got {}", self.eps)));
        }
        if !(self.kbar.is_finite() && self.kbar > 0.0) {
            return Err(Error::invalid("kbar", format!("must be > 0, got {}", self.kbar)));
        }
        Ok(())
    }

    /// Modulation period T = 2π/ω.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    /// Depth of the conical minimum at the fiber axis, ξ e^(−r1).
    pub fn floor_energy(&self) -> f64 {
        self.xi * (-self.r1).exp()
    }
}

/// Enhancement factor α and decay constant κ (1/m) of the evanescent field.
pub fn evanescent_coefficients(p: &PhysicalParams) -> Result<(f64, f64)> {
    p.validate()?;
    let n2 = p.n_index * p.n_index;
    let s = p.theta.sin();
    let arg = n2 * s * s - 1.0;
    if arg <= 0.0 {
        return Err(Error::Domain(format!(
            "theta = {} rad is at or below the critical angle {} rad; no evanescent decay",
            p.theta,
            p.critical_angle()
        )));
    }
    let alpha = 2.0 * (n2 / (n2 - 1.0)).sqrt() * p.theta.cos();
    let kappa = (2.0 * PI / p.lambda) * arg.sqrt();
    Ok((alpha, kappa))
}

/// Which form of the two-level light shift to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialForm {
    /// `ħΔ/2 · ln(1 + p)`
    Exact,
    /// `ħΩ²/(4Δ)`, the low-saturation limit.
    LowSaturation,
}

/// Saturation parameter `(Ω²/2) / (Δ² + Γ²/4)`.
pub fn saturation_parameter(rabi_sq: f64, p: &PhysicalParams) -> f64 {
    0.5 * rabi_sq / (p.detuning * p.detuning + 0.25 * p.gamma * p.gamma)
}

/// Dipole potential energy (J) for squared Rabi frequency `rabi_sq` (rad²/s²).
pub fn dipole_potential(rabi_sq: f64, p: &PhysicalParams, form: PotentialForm) -> Result<f64> {
    if p.detuning == 0.0 {
        return Err(Error::invalid("detuning", "must be nonzero"));
    }
    Ok(match form {
        PotentialForm::Exact => 0.5 * HBAR * p.detuning * saturation_parameter(rabi_sq, p).ln_1p(),
        PotentialForm::LowSaturation => HBAR * rabi_sq / (4.0 * p.detuning),
    })
}

/// Wall potential prefactor `K = ħΓ²/(8Δ) · I(0)/I_s · α²` (J).
pub fn wall_strength(p: &PhysicalParams) -> Result<f64> {
    let (alpha, _) = evanescent_coefficients(p)?;
    Ok(HBAR * p.gamma * p.gamma / (8.0 * p.detuning) * (p.i0 / p.i_sat) * alpha * alpha)
}

/// Converts laboratory parameters into scaled ones; `omega_mod` and `eps`
/// describe the intensity modulation of the run.
pub fn scale_to_dimensionless(p: &PhysicalParams, omega_mod: f64, eps: f64) -> Result<DimensionlessParams> {
    let (_, kappa) = evanescent_coefficients(p)?;
    let k2 = (2.0 * kappa) * (2.0 * kappa);
    let big_k = wall_strength(p)?;
    let dp = DimensionlessParams {
        xi: big_k * k2 / (p.mass * p.omega_ref * p.omega_ref),
        r1: 2.0 * kappa * p.r1_phys,
        omega: omega_mod,
        eps,
        kbar: HBAR * k2 / (p.mass * p.omega_ref),
    };
    dp.validate()?;
    Ok(dp)
}

/// Inverse of the radius scaling: physical inner radius (m).
pub fn r1_physical(r1: f64, kappa: f64) -> f64 {
    r1 / (2.0 * kappa)
}

/// Inverse of the k̄ definition: the reference frequency (rad/s) that yields `kbar`.
pub fn omega_ref_from_kbar(kbar: f64, kappa: f64, mass: f64) -> f64 {
    HBAR * (2.0 * kappa) * (2.0 * kappa) / (mass * kbar)
}

/// Velocity (m/s) of a scaled momentum.
pub fn momentum_to_velocity(p_scaled: f64, p: &PhysicalParams) -> Result<f64> {
    let (_, kappa) = evanescent_coefficients(p)?;
    Ok(p_scaled * p.omega_ref / (2.0 * kappa))
}

/// Scaled momentum variance `k_B T / [M ω_ref² / (2κ)²]` for temperature `t` (K).
pub fn momentum_variance_from_temperature(t: f64, p: &PhysicalParams) -> Result<f64> {
    let (_, kappa) = evanescent_coefficients(p)?;
    let k2 = (2.0 * kappa) * (2.0 * kappa);
    Ok(K_B * t / (p.mass * p.omega_ref * p.omega_ref / k2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn critical_angle_is_a_domain_error() {
        let mut p = PhysicalParams::helium();
        p.theta = p.critical_angle();
        assert!(matches!(evanescent_coefficients(&p), Err(Error::Domain(_))));
        p.theta -= 0.01;
        assert!(matches!(evanescent_coefficients(&p), Err(Error::Domain(_))));
    }

    #[test]
    fn grazing_incidence_has_no_enhancement() {
        let mut p = PhysicalParams::helium();
        p.theta = PI / 2.0;
        let (alpha, kappa) = evanescent_coefficients(&p).unwrap();
        assert!(alpha.abs() < 1e-15);
        assert!(kappa > 0.0);
    }

    #[test]
    fn glass_at_45_degrees() {
        let (alpha, kappa) = evanescent_coefficients(&PhysicalParams::helium()).unwrap();
        assert!(rel(kappa, 2.0514e6) < 2e-4, "kappa = {kappa}");
        assert!(rel(alpha, 1.8974) < 1e-4, "alpha = {alpha}");
    }

    #[test]
    fn dipole_potential_limits() {
        let p = PhysicalParams::helium();
        for form in [PotentialForm::Exact, PotentialForm::LowSaturation] {
            assert_eq!(dipole_potential(0.0, &p, form).unwrap(), 0.0);
        }
        // p_sat = 1e-6
        let rabi_sq = 2e-6 * (p.detuning.powi(2) + 0.25 * p.gamma.powi(2));
        let exact = dipole_potential(rabi_sq, &p, PotentialForm::Exact).unwrap();
        let approx = dipole_potential(rabi_sq, &p, PotentialForm::LowSaturation).unwrap();
        assert!(rel(exact, approx) < 1e-3);

        let mut q = p.clone();
        q.detuning *= 2.0;
        let halved = dipole_potential(rabi_sq, &q, PotentialForm::LowSaturation).unwrap();
        assert!(rel(halved, 0.5 * approx) < 1e-14);

        let mut z = p;
        z.detuning = 0.0;
        assert!(dipole_potential(1.0, &z, PotentialForm::Exact).is_err());
    }

    #[test]
    fn exact_and_quadratic_agree_to_first_order() {
        let mut p = PhysicalParams::helium();
        p.gamma = 0.0;
        for psat in [1e-8, 1e-4, 1e-2, 0.3] {
            let rabi_sq = 2.0 * psat * p.detuning * p.detuning;
            let exact = dipole_potential(rabi_sq, &p, PotentialForm::Exact).unwrap();
            let approx = dipole_potential(rabi_sq, &p, PotentialForm::LowSaturation).unwrap();
            assert!((exact - approx).abs() / approx <= psat);
        }
    }

    #[test]
    fn helium_scaling() {
        let p = PhysicalParams::helium();
        let dp = scale_to_dimensionless(&p, 2.0, 0.7).unwrap();
        assert!((dp.kbar - 1.001).abs() < 1e-3, "kbar = {}", dp.kbar);
        assert!((dp.r1 - 8.206).abs() < 2e-3, "r1 = {}", dp.r1);
        assert!((dp.xi - 50.0).abs() < 1e-3, "xi = {}", dp.xi);

        let mut q = p.clone();
        q.omega_ref *= 2.0;
        let dq = scale_to_dimensionless(&q, 2.0, 0.7).unwrap();
        assert!(rel(dq.xi, dp.xi / 4.0) < 1e-13);
        assert!(rel(dq.kbar, dp.kbar / 2.0) < 1e-13);
    }

    #[test]
    fn inverse_relations_round_trip() {
        let p = PhysicalParams::helium();
        let (_, kappa) = evanescent_coefficients(&p).unwrap();
        let dp = scale_to_dimensionless(&p, 2.0, 0.0).unwrap();
        assert!(rel(r1_physical(dp.r1, kappa), p.r1_phys) < 1e-12);
        assert!(rel(omega_ref_from_kbar(dp.kbar, kappa, p.mass), p.omega_ref) < 1e-12);
    }

    #[test]
    fn velocity_calibration() {
        let p = PhysicalParams::helium();
        assert_eq!(momentum_to_velocity(0.0, &p).unwrap(), 0.0);
        let v_rms = momentum_to_velocity(0.1f64.sqrt(), &p).unwrap();
        assert!((v_rms - 0.0204).abs() < 2e-4, "v_rms = {v_rms}");
        let recoil = momentum_to_velocity(1.393, &p).unwrap();
        assert!((recoil - 0.09).abs() < 1e-3, "recoil = {recoil}");
        let var = momentum_variance_from_temperature(p.temperature.0, &p).unwrap();
        assert!((var - 0.1).abs() < 1e-3, "variance = {var}");
    }

    #[test]
    fn kappa_and_alpha_monotone_in_angle() {
        let mut p = PhysicalParams::helium();
        let crit = p.critical_angle();
        let mut prev: Option<(f64, f64)> = None;
        for i in 1..200 {
            p.theta = crit + (PI / 2.0 - crit) * i as f64 / 200.0;
            let (a, k) = evanescent_coefficients(&p).unwrap();
            if let Some((pa, pk)) = prev {
                assert!(k > pk);
                assert!(a < pa);
            }
            prev = Some((a, k));
        }
    }

    #[test]
    fn rejects_bad_dimensionless() {
        let mut dp = DimensionlessParams::reference();
        dp.eps = 1.0;
        assert!(dp.validate().is_err());
        dp.eps = 0.0;
        dp.kbar = 0.0;
        assert!(dp.validate().is_err());
    }
}
