//! Phase-space ensembles: sampling the initial distribution, transporting it
//! along characteristics of the Liouville equation, and building the
//! position histograms a strobe-gated detector would record.
//!
//! Random numbers come from ChaCha8 streams keyed by `(seed, purpose)` with
//! the atom index as stream id, so every atom's draws are independent of how
//! the work is scheduled.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::classical::{IntegratorConfig, PhaseState, StrobeMap};
use crate::error::{Error, Result};
use crate::units::DimensionlessParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub n_atoms: usize,
    /// Radius of the uniformly filled starting disk.
    pub disk_radius: f64,
    /// Momentum variance per axis.
    pub sigma_p: f64,
    /// Mean momentum `(px, py)`.
    pub p0: (f64, f64),
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(Error::invalid("n_atoms", "must be >= 1"));
        }
        if !(self.disk_radius.is_finite() && self.disk_radius > 0.0) {
            return Err(Error::invalid("disk_radius", "must be > 0"));
        }
        if !(self.sigma_p.is_finite() && self.sigma_p >= 0.0) {
            return Err(Error::invalid("sigma_p", "must be >= 0"));
        }
        Ok(())
    }

    /// Initial phase-space density at `z`: uniform on the disk, Gaussian in
    /// each momentum component with variance `sigma_p`.
    pub fn initial_density(&self, z: &PhaseState) -> f64 {
        if z.radius() >= self.disk_radius {
            return 0.0;
        }
        let gauss =
            |p: f64, mean: f64| (-(p - mean).powi(2) / (2.0 * self.sigma_p)).exp() / (2.0 * PI * self.sigma_p).sqrt();
        gauss(z.px, self.p0.0) * gauss(z.py, self.p0.1) / (PI * self.disk_radius * self.disk_radius)
    }
}

#[derive(Debug, Clone, Copy)]
enum Purpose {
    Initial,
    Cohort(u64),
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn atom_rng(seed: u64, purpose: Purpose, atom: usize) -> ChaCha8Rng {
    let key = match purpose {
        Purpose::Initial => splitmix64(seed ^ 0x1),
        Purpose::Cohort(s) => splitmix64(splitmix64(seed ^ 0x2) ^ s),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(atom as u64);
    rng
}

fn draw_atom(spec: &EnsembleSpec, rng: &mut ChaCha8Rng) -> PhaseState {
    let r = spec.disk_radius;
    let (x, y) = loop {
        let x = r * (2.0 * rng.gen::<f64>() - 1.0);
        let y = r * (2.0 * rng.gen::<f64>() - 1.0);
        if x * x + y * y < r * r {
            break (x, y);
        }
    };
    let sd = spec.sigma_p.sqrt();
    let nx: f64 = rng.sample(StandardNormal);
    let ny: f64 = rng.sample(StandardNormal);
    PhaseState::new(x, y, spec.p0.0 + sd * nx, spec.p0.1 + sd * ny)
}

fn sample_with(spec: &EnsembleSpec, purpose: Purpose, n: usize) -> Vec<PhaseState> {
    (0..n)
        .into_par_iter()
        .map(|i| draw_atom(spec, &mut atom_rng(spec.seed, purpose, i)))
        .collect()
}

/// Draws `spec.n_atoms` atoms from the initial distribution at t = 0.
pub fn sample_initial(spec: &EnsembleSpec) -> Result<Vec<PhaseState>> {
    spec.validate()?;
    Ok(sample_with(spec, Purpose::Initial, spec.n_atoms))
}

/// Moves every atom forward by `n_strobes` modulation periods.
pub fn evolve_ensemble(
    atoms: &[PhaseState],
    n_strobes: u32,
    dp: &DimensionlessParams,
    cfg: &IntegratorConfig,
) -> Result<Vec<PhaseState>> {
    let map = StrobeMap::new(dp, cfg)?;
    let mut out = atoms.to_vec();
    crate::classical::evolve_all(&mut out, n_strobes, &map);
    Ok(out)
}

/// Phase-space density at `z` after `n_strobes` periods, found by carrying
/// `z` back to t = 0 and evaluating the initial density there.
///
/// The backward flow is the forward flow conjugated by momentum reversal;
/// the modulation `cos ωt` is even, and `z` sits on a period boundary.
pub fn evaluate_density(
    z: &PhaseState,
    n_strobes: u32,
    spec: &EnsembleSpec,
    dp: &DimensionlessParams,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    spec.validate()?;
    if spec.sigma_p == 0.0 {
        return Err(Error::invalid(
            "sigma_p",
            "density is singular for a zero momentum spread",
        ));
    }
    let map = StrobeMap::new(dp, cfg)?;
    Ok(spec.initial_density(&backtrack(z, n_strobes, &map)))
}

/// Pre-image of `z` under `n_strobes` periods.
pub fn backtrack(z: &PhaseState, n_strobes: u32, map: &StrobeMap) -> PhaseState {
    let mut w = z.reversed();
    w.t = 0.0;
    map.advance(&mut w, n_strobes);
    let mut out = w.reversed();
    out.t = 0.0;
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extent {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Extent {
    /// Square `[−r1−1, r1+1]²`.
    pub fn around_fiber(r1: f64) -> Self {
        let h = r1 + 1.0;
        Extent {
            xmin: -h,
            xmax: h,
            ymin: -h,
            ymax: h,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.xmin, self.xmax, self.ymin, self.ymax]
    }
}

/// Position histogram; atoms outside the extent go to `overflow`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram2D {
    pub nx: usize,
    pub ny: usize,
    pub extent: Extent,
    /// Row-major, x fastest.
    pub counts: Vec<u64>,
    pub overflow: u64,
}

impl Histogram2D {
    pub fn new(nx: usize, ny: usize, extent: Extent) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::invalid("bins", "nx and ny must be >= 1"));
        }
        if !(extent.xmax > extent.xmin && extent.ymax > extent.ymin) {
            return Err(Error::invalid("extent", "must have positive width and height"));
        }
        Ok(Histogram2D {
            nx,
            ny,
            extent,
            counts: vec![0; nx * ny],
            overflow: 0,
        })
    }

    pub fn add(&mut self, x: f64, y: f64) {
        let e = &self.extent;
        let fx = (x - e.xmin) / (e.xmax - e.xmin) * self.nx as f64;
        let fy = (y - e.ymin) / (e.ymax - e.ymin) * self.ny as f64;
        if fx >= 0.0 && fy >= 0.0 && fx < self.nx as f64 && fy < self.ny as f64 {
            self.counts[fy as usize * self.nx + fx as usize] += 1;
        } else {
            self.overflow += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.overflow
    }

    pub fn bin_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        let e = &self.extent;
        let dx = (e.xmax - e.xmin) / self.nx as f64;
        let dy = (e.ymax - e.ymin) / self.ny as f64;
        (e.xmin + (ix as f64 + 0.5) * dx, e.ymin + (iy as f64 + 0.5) * dy)
    }

    pub fn count(&self, ix: usize, iy: usize) -> u64 {
        self.counts[iy * self.nx + ix]
    }

    pub fn merge(&mut self, other: &Histogram2D) {
        assert_eq!((self.nx, self.ny), (other.nx, other.ny));
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.overflow += other.overflow;
    }
}

/// Bins atom positions.
pub fn histogram_xy(atoms: &[PhaseState], nx: usize, ny: usize, extent: Extent) -> Result<Histogram2D> {
    let mut h = Histogram2D::new(nx, ny, extent)?;
    for a in atoms {
        h.add(a.x, a.y);
    }
    Ok(h)
}

/// Counts of atoms per radial shell `[i Δr, (i+1) Δr)` (an angular sum).
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub r_max: f64,
    pub counts: Vec<u64>,
    pub overflow: u64,
}

impl RadialProfile {
    pub fn new(n_bins: usize, r_max: f64) -> Result<Self> {
        if n_bins == 0 || !(r_max > 0.0) {
            return Err(Error::invalid("radial bins", "need n_bins >= 1 and r_max > 0"));
        }
        Ok(RadialProfile {
            r_max,
            counts: vec![0; n_bins],
            overflow: 0,
        })
    }

    pub fn from_atoms(atoms: &[PhaseState], n_bins: usize, r_max: f64) -> Result<Self> {
        let mut p = RadialProfile::new(n_bins, r_max)?;
        for a in atoms {
            p.add(a.radius());
        }
        Ok(p)
    }

    pub fn add(&mut self, r: f64) {
        let i = (r / self.r_max * self.counts.len() as f64) as usize;
        match self.counts.get_mut(i) {
            Some(c) => *c += 1,
            None => self.overflow += 1,
        }
    }

    pub fn bin_width(&self) -> f64 {
        self.r_max / self.counts.len() as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.bin_width()
    }

    pub fn bin_of(&self, r: f64) -> usize {
        (r / self.bin_width()) as usize
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.overflow
    }

    /// Bins `i ≥ 1` whose count exceeds the left neighbour and is not below
    /// the right one.
    pub fn local_maxima(&self) -> Vec<usize> {
        let c = &self.counts;
        (1..c.len())
            .filter(|&i| c[i] > c[i - 1] && (i + 1 == c.len() || c[i] >= c[i + 1]))
            .collect()
    }

    /// Total-variation distance between the normalized profiles (in-range
    /// counts only).
    pub fn total_variation(&self, other: &RadialProfile) -> f64 {
        assert_eq!(self.counts.len(), other.counts.len());
        let na = self.counts.iter().sum::<u64>() as f64;
        let nb = other.counts.iter().sum::<u64>() as f64;
        0.5 * self
            .counts
            .iter()
            .zip(&other.counts)
            .map(|(&a, &b)| (a as f64 / na - b as f64 / nb).abs())
            .sum::<f64>()
    }

    pub fn merge(&mut self, other: &RadialProfile) {
        assert_eq!(self.counts.len(), other.counts.len());
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.overflow += other.overflow;
    }
}

/// Where each strobe's detected atoms come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CohortMode {
    /// A freshly drawn cohort per gate opening.
    Fresh,
    /// One ensemble observed repeatedly (correlated snapshots).
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorLayout {
    pub nx: usize,
    pub ny: usize,
    pub extent: Extent,
    pub radial_bins: usize,
    pub r_max: f64,
}

impl DetectorLayout {
    /// 128 × 128 cells on `[−r1−1, r1+1]²`, 64 radial shells out to `r1 + 1`.
    pub fn for_fiber(r1: f64) -> Self {
        DetectorLayout {
            nx: 128,
            ny: 128,
            extent: Extent::around_fiber(r1),
            radial_bins: 64,
            r_max: r1 + 1.0,
        }
    }

    fn record(&self, atoms: &[PhaseState]) -> Result<Detection> {
        Ok(Detection {
            histogram: histogram_xy(atoms, self.nx, self.ny, self.extent)?,
            radial: RadialProfile::from_atoms(atoms, self.radial_bins, self.r_max)?,
        })
    }
}

/// Accumulated detector image and its radial profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub histogram: Histogram2D,
    pub radial: RadialProfile,
}

impl Detection {
    fn merge(&mut self, other: &Detection) {
        self.histogram.merge(&other.histogram);
        self.radial.merge(&other.radial);
    }
}

/// Snapshot of `spec.n_atoms` atoms after `n_strobes` periods.
pub fn snapshot(
    spec: &EnsembleSpec,
    n_strobes: u32,
    dp: &DimensionlessParams,
    cfg: &IntegratorConfig,
    layout: &DetectorLayout,
) -> Result<(Vec<PhaseState>, Detection)> {
    let atoms = evolve_ensemble(&sample_initial(spec)?, n_strobes, dp, cfg)?;
    let det = layout.record(&atoms)?;
    Ok((atoms, det))
}

/// Strobe-gated detection: at every strobe `s` in `s_start..=s_end`,
/// `n_per_strobe` atoms are recorded and all records are summed.
#[allow(clippy::too_many_arguments)]
pub fn detect_integrated(
    spec: &EnsembleSpec,
    dp: &DimensionlessParams,
    cfg: &IntegratorConfig,
    s_start: u32,
    s_end: u32,
    n_per_strobe: usize,
    mode: CohortMode,
    layout: &DetectorLayout,
) -> Result<Detection> {
    spec.validate()?;
    if s_start > s_end {
        return Err(Error::invalid("s_start", format!("{s_start} > s_end = {s_end}")));
    }
    if n_per_strobe == 0 {
        return Err(Error::invalid("n_per_strobe", "must be >= 1"));
    }
    let map = StrobeMap::new(dp, cfg)?;
    let mut total = layout.record(&[])?;
    match mode {
        CohortMode::Fresh => {
            let jobs: Vec<(u32, usize)> = (s_start..=s_end)
                .flat_map(|s| (0..n_per_strobe).map(move |i| (s, i)))
                .collect();
            let arrived: Vec<PhaseState> = jobs
                .par_iter()
                .map(|&(s, i)| {
                    let mut a = draw_atom(spec, &mut atom_rng(spec.seed, Purpose::Cohort(s as u64), i));
                    map.advance(&mut a, s);
                    a
                })
                .collect();
            total.merge(&layout.record(&arrived)?);
        }
        CohortMode::Shared => {
            let mut atoms = sample_with(spec, Purpose::Initial, n_per_strobe);
            crate::classical::evolve_all(&mut atoms, s_start, &map);
            total.merge(&layout.record(&atoms)?);
            for _ in s_start..s_end {
                crate::classical::evolve_all(&mut atoms, 1, &map);
                total.merge(&layout.record(&atoms)?);
            }
        }
    }
    Ok(total)
}

/// `|Σ e^{imθ}|² / N` over atom angles; its expectation is 1 for
/// rotationally symmetric samples.
pub fn angular_power(atoms: &[PhaseState], m: i32) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for a in atoms {
        let th = a.y.atan2(a.x) * m as f64;
        re += th.cos();
        im += th.sin();
    }
    (re * re + im * im) / atoms.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize) -> EnsembleSpec {
        EnsembleSpec {
            n_atoms: n,
            disk_radius: 8.2056,
            sigma_p: 0.1,
            p0: (0.0, 0.0),
            seed: 7,
        }
    }

    #[test]
    fn zero_spread_gives_exact_mean_momentum() {
        let s = EnsembleSpec {
            sigma_p: 0.0,
            p0: (0.3, -0.2),
            ..spec(100)
        };
        let atoms = sample_initial(&s).unwrap();
        assert!(atoms.iter().all(|a| a.px == 0.3 && a.py == -0.2));
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_initial(&spec(1000)).unwrap();
        let b = sample_initial(&spec(1000)).unwrap();
        assert_eq!(a, b);
        let c = sample_initial(&EnsembleSpec { seed: 8, ..spec(1000) }).unwrap();
        assert_ne!(a, c);
        // a prefix of a larger sample is the smaller sample
        let d = sample_initial(&spec(1500)).unwrap();
        assert_eq!(&d[..1000], &a[..]);
    }

    #[test]
    fn histogram_basics() {
        let ext = Extent {
            xmin: 0.0,
            xmax: 4.0,
            ymin: 0.0,
            ymax: 2.0,
        };
        let h = histogram_xy(&[PhaseState::new(2.5, 1.5, 0.0, 0.0)], 4, 2, ext).unwrap();
        assert_eq!(h.count(2, 1), 1);
        assert_eq!(h.counts.iter().sum::<u64>(), 1);
        let atoms = vec![
            PhaseState::new(0.5, 0.5, 0.0, 0.0),
            PhaseState::new(-1.0, 0.5, 0.0, 0.0),
            PhaseState::new(4.0, 0.5, 0.0, 0.0),
            PhaseState::new(3.9, 1.9, 0.0, 0.0),
        ];
        let h = histogram_xy(&atoms, 4, 2, ext).unwrap();
        assert_eq!(h.overflow, 2);
        assert_eq!(h.total(), 4);
        assert!(Histogram2D::new(0, 3, ext).is_err());
    }

    #[test]
    fn radial_profile_maxima_and_distance() {
        let mut p = RadialProfile::new(6, 6.0).unwrap();
        for (i, n) in [5u64, 3, 7, 7, 2, 9].iter().enumerate() {
            for _ in 0..*n {
                p.add(i as f64 + 0.5);
            }
        }
        assert_eq!(p.local_maxima(), vec![2, 5]);
        assert_eq!(p.total_variation(&p.clone()), 0.0);
        let mut q = RadialProfile::new(6, 6.0).unwrap();
        q.add(0.1);
        assert!((p.total_variation(&q) - (1.0 - 5.0 / 33.0)).abs() < 1e-12);
    }

    #[test]
    fn density_at_time_zero_is_initial() {
        let s = spec(1);
        let dp = DimensionlessParams::reference();
        let cfg = IntegratorConfig::default();
        let z = PhaseState::new(1.0, -2.0, 0.3, 0.1);
        assert_eq!(evaluate_density(&z, 0, &s, &dp, &cfg).unwrap(), s.initial_density(&z));
        assert_eq!(s.initial_density(&PhaseState::new(9.0, 0.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn density_is_constant_along_trajectories() {
        let s = spec(1);
        let dp = DimensionlessParams::reference();
        let cfg = IntegratorConfig::default();
        let map = StrobeMap::new(&dp, &cfg).unwrap();
        let z0 = PhaseState::new(2.0, 1.0, 0.2, -0.1);
        let q0 = s.initial_density(&z0);
        for n in [1, 5, 10] {
            let z = map.iterate(&z0, n);
            let back = backtrack(&z, n, &map);
            for (a, b) in back.as_array().iter().zip(z0.as_array()) {
                assert!((a - b).abs() < 1e-9, "n = {n}");
            }
            let q = evaluate_density(&z, n, &s, &dp, &cfg).unwrap();
            assert!(((q - q0) / q0).abs() < 1e-6);
        }
    }

    #[test]
    fn shared_and_fresh_cohorts_count_the_same() {
        let s = spec(10);
        let dp = DimensionlessParams::reference();
        let cfg = IntegratorConfig::new(32, crate::classical::Scheme::ForestRuth4);
        let layout = DetectorLayout::for_fiber(dp.r1);
        for mode in [CohortMode::Fresh, CohortMode::Shared] {
            let d = detect_integrated(&s, &dp, &cfg, 3, 7, 20, mode, &layout).unwrap();
            assert_eq!(d.histogram.total(), 100);
            assert_eq!(d.radial.total(), 100);
        }
        assert!(detect_integrated(&s, &dp, &cfg, 8, 7, 20, CohortMode::Fresh, &layout).is_err());
    }
}
