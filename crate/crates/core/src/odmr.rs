//! Zero-field ODMR: level statistics in random perturbation environments,
//! Monte Carlo spectrum synthesis from point-charge environments, and the
//! brute-force two-parameter fit of charge density and contrast.
//!
//! All Monte Carlo work is split into items that draw from their own RNG
//! substream and are reduced in a fixed order, so output does not depend on
//! the number of worker threads.

use rand::Rng;
use rayon::prelude::*;

use crate::charges::{
    field_at_origin, sample_positions, snap_to_lattice, ChargeConfiguration, HexLattice, PositionLaw, SnapParams,
    DEFAULT_EXCLUSION_NM, DEFAULT_RADIUS_NM,
};
use crate::coupling::{
    electric_perturbation, fit_line, strain_perturbation, CouplingConstants, ElectricFieldVec,
    StrainTensor2D,
};
use crate::error::{Error, Result};
use crate::rng::{configuration_streams, substream};
use crate::spin::{build_hamiltonian, resonance_frequencies, ZfsParameters};

/// Configurations accumulated sequentially inside one reduction chunk.
const REDUCTION_CHUNK: usize = 64;

/// Default Lorentzian half width at half maximum (60 MHz full width).
pub const DEFAULT_LINEWIDTH_MHZ: f64 = 30.0;
pub const DEFAULT_N_CONFIGS: usize = 10_000;
pub const FAST_N_CONFIGS: usize = 1_000;

/// Secular hyperfine manifold of three first-neighbour 14N (I = 1) nuclei.
///
/// Returns `(A*m, weight)` for total projection `m = -3..=3`; the weights are
/// the multiplicities `(1, 3, 6, 7, 6, 3, 1) / 27`.
pub fn hyperfine_detunings(a_mhz: f64) -> Vec<(f64, f64)> {
    let mut counts = [0u32; 7];
    for m1 in -1i32..=1 {
        for m2 in -1i32..=1 {
            for m3 in -1i32..=1 {
                counts[(m1 + m2 + m3 + 3) as usize] += 1;
            }
        }
    }
    counts
        .iter()
        .enumerate()
        .map(|(i, &n)| (a_mhz * (i as f64 - 3.0), f64::from(n) / 27.0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationKind {
    Strain,
    Electric,
}

impl std::str::FromStr for PerturbationKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strain" => Ok(PerturbationKind::Strain),
            "electric" => Ok(PerturbationKind::Electric),
            other => Err(Error::InvalidParameter(format!(
                "unknown perturbation kind '{other}' (expected strain or electric)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterRow {
    /// strain (dimensionless) or field (V/cm)
    pub magnitude: f64,
    pub f_minus: f64,
    pub f_plus: f64,
}

impl ScatterRow {
    pub fn centroid(&self) -> f64 {
        (self.f_plus + self.f_minus) / 2.0
    }

    pub fn half_splitting(&self) -> f64 {
        (self.f_plus - self.f_minus) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnitudeSummary {
    pub magnitude: f64,
    pub mean_abs_shift: f64,
    pub mean_half_splitting: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterDataset {
    pub kind: PerturbationKind,
    pub rows: Vec<ScatterRow>,
}

impl ScatterDataset {
    /// Per magnitude, the mean `|centroid - d0|` and mean half splitting.
    /// Rows of one magnitude are assumed contiguous.
    pub fn summarize(&self, d0: f64) -> Vec<MagnitudeSummary> {
        self.rows
            .chunk_by(|a, b| a.magnitude == b.magnitude)
            .map(|group| {
                let n = group.len() as f64;
                MagnitudeSummary {
                    magnitude: group[0].magnitude,
                    mean_abs_shift: group.iter().map(|r| (r.centroid() - d0).abs()).sum::<f64>() / n,
                    mean_half_splitting: group.iter().map(|r| r.half_splitting()).sum::<f64>() / n,
                }
            })
            .collect()
    }

    /// Least-squares slope through the origin of mean shift against mean
    /// half splitting across magnitudes: the effective `g_D / g_E`.
    pub fn shift_to_splitting_ratio(&self, d0: f64) -> f64 {
        let s = self.summarize(d0);
        let num: f64 = s.iter().map(|m| m.mean_abs_shift * m.mean_half_splitting).sum();
        let den: f64 = s.iter().map(|m| m.mean_half_splitting.powi(2)).sum();
        num / den
    }
}

/// Unit in-plane direction from two components uniform on [-1, 1].
fn random_direction<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    loop {
        let x: f64 = rng.random_range(-1.0..=1.0);
        let y: f64 = rng.random_range(-1.0..=1.0);
        let n = x.hypot(y);
        if n > 0.0 {
            return (x / n, y / n);
        }
    }
}

/// Resonances of `n_samples` random perturbations of each magnitude.
///
/// Strain samples `(exx, eyy)`, field samples `(Ex, Ey)`; in both cases the
/// two components are drawn uniform on [-1, 1] and the vector is rescaled
/// to the requested magnitude. Magnitude `i` uses RNG substream `i`.
pub fn scatter_levels(
    kind: PerturbationKind,
    magnitudes: &[f64],
    n_samples: usize,
    k: &CouplingConstants,
    seed: u64,
) -> Result<ScatterDataset> {
    if let Some(m) = magnitudes.iter().find(|m| !(**m >= 0.0 && m.is_finite())) {
        return Err(Error::InvalidParameter(format!("magnitude {m} must be >= 0")));
    }
    let base = k.unperturbed();
    let blocks: Vec<Vec<ScatterRow>> = magnitudes
        .par_iter()
        .enumerate()
        .map(|(i, &mag)| {
            let mut rng = substream(seed, i as u64);
            (0..n_samples)
                .map(|_| {
                    let (u, v) = random_direction(&mut rng);
                    let delta = match kind {
                        PerturbationKind::Strain => {
                            strain_perturbation(&StrainTensor2D::new(mag * u, mag * v, 0.0), k)?
                        }
                        PerturbationKind::Electric => {
                            electric_perturbation(&ElectricFieldVec::new(mag * u, mag * v, 0.0), k)
                        }
                    };
                    let h = build_hamiltonian(&base.perturbed(&delta), 0.0);
                    let (f_minus, f_plus) = resonance_frequencies(&h)?;
                    Ok(ScatterRow {
                        magnitude: mag,
                        f_minus,
                        f_plus,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(ScatterDataset {
        kind,
        rows: blocks.into_iter().flatten().collect(),
    })
}

/// Uniform, strictly ascending frequency grid in MHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl FrequencyGrid {
    /// Grid from `start` to `stop` inclusive (rounded to whole steps).
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && start.is_finite() && stop.is_finite() && stop > start) {
            return Err(Error::InvalidParameter(format!(
                "bad frequency grid start={start} stop={stop} step={step}"
            )));
        }
        let len = ((stop - start) / step).round() as usize + 1;
        Ok(FrequencyGrid { start, step, len })
    }

    /// Odd-length grid symmetric about `center`.
    pub fn centered(center: f64, half_width: f64, step: f64) -> Result<Self> {
        let half = (half_width / step).ceil();
        Self::new(center - half * step, center + half * step, step)
    }

    pub fn freq(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn stop(&self) -> f64 {
        self.freq(self.len - 1)
    }

    pub fn freqs(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.freq(i)).collect()
    }
}

/// Normalized PL against microwave frequency; 1 is the off-resonance baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct OdmrSpectrum {
    pub freqs: Vec<f64>,
    pub signal: Vec<f64>,
}

impl OdmrSpectrum {
    /// Checks that `freqs` is strictly ascending and uniform to 1e-6 of a step.
    pub fn new(freqs: Vec<f64>, signal: Vec<f64>) -> Result<Self> {
        if freqs.len() != signal.len() {
            return Err(Error::InvalidParameter(format!(
                "{} frequencies but {} signal values",
                freqs.len(),
                signal.len()
            )));
        }
        if freqs.len() < 2 || signal.iter().chain(&freqs).any(|v| !v.is_finite()) {
            return Err(Error::NonUniformGrid);
        }
        let step = (freqs[freqs.len() - 1] - freqs[0]) / (freqs.len() - 1) as f64;
        let uniform = freqs
            .windows(2)
            .all(|w| w[1] > w[0] && ((w[1] - w[0]) - step).abs() <= 1e-6 * step);
        if !(step > 0.0 && uniform) {
            return Err(Error::NonUniformGrid);
        }
        Ok(OdmrSpectrum { freqs, signal })
    }

    pub fn step(&self) -> f64 {
        (self.freqs[self.freqs.len() - 1] - self.freqs[0]) / (self.freqs.len() - 1) as f64
    }

    /// `integral (1 - signal) df` by the rectangle rule.
    pub fn integrated_dip(&self) -> f64 {
        self.signal.iter().map(|s| 1.0 - s).sum::<f64>() * self.step()
    }

    /// Linear interpolation at `f`, clamped to the end values.
    pub fn interpolate(&self, f: f64) -> f64 {
        interpolate_uniform(self.freqs[0], self.step(), &self.signal, f)
    }
}

fn interpolate_uniform(start: f64, step: f64, values: &[f64], f: f64) -> f64 {
    let x = (f - start) / step;
    if x <= 0.0 {
        return values[0];
    }
    let last = values.len() - 1;
    if x >= last as f64 {
        return values[last];
    }
    let i = x.floor() as usize;
    let t = x - i as f64;
    values[i] * (1.0 - t) + values[i + 1] * t
}

/// Where the charges live and how they act on the defect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Environment {
    pub lattice: HexLattice,
    pub radius_nm: f64,
    pub exclusion_nm: f64,
    pub eps_r: f64,
    pub law: PositionLaw,
}

impl Default for Environment {
    fn default() -> Self {
        Environment {
            lattice: HexLattice::default(),
            radius_nm: DEFAULT_RADIUS_NM,
            exclusion_nm: DEFAULT_EXCLUSION_NM,
            eps_r: 1.0,
            law: PositionLaw::UniformBall,
        }
    }
}

/// Charge environment number `index` of a run seeded with `seed`.
pub fn sample_configuration(
    rho_c: f64,
    env: &Environment,
    seed: u64,
    index: u64,
) -> Result<ChargeConfiguration> {
    let snap = SnapParams {
        radius_nm: env.radius_nm,
        exclusion_nm: env.exclusion_nm,
        law: env.law,
    };
    let (mut pos_rng, mut redraw_rng) = configuration_streams(seed, index);
    let raw = sample_positions(rho_c, env.radius_nm, env.law, &mut pos_rng)?;
    snap_to_lattice(&raw, &env.lattice, &snap, &mut redraw_rng)
}

/// Field at the defect for `n_configs` random environments, V/cm.
pub fn sample_fields(
    rho_c: f64,
    n_configs: usize,
    env: &Environment,
    seed: u64,
) -> Result<Vec<ElectricFieldVec>> {
    (0..n_configs as u64)
        .into_par_iter()
        .map(|i| field_at_origin(&sample_configuration(rho_c, env, seed, i)?, env.eps_r))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisParams {
    /// nm^-3
    pub rho_c: f64,
    pub contrast: f64,
    /// Lorentzian half width at half maximum, MHz.
    pub linewidth_mhz: f64,
    pub n_configs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub spectrum: OdmrSpectrum,
    /// Mean `f_plus - f_minus` of the bare electron spin (no hyperfine), MHz.
    pub mean_splitting_mhz: f64,
}

/// Resonance lines `(frequency, weight)` of one environment, weights summing
/// to 1, plus the bare electronic splitting.
fn environment_lines(
    field: &ElectricFieldVec,
    k: &CouplingConstants,
    hyperfine: &[(f64, f64)],
) -> Result<(Vec<(f64, f64)>, f64)> {
    let zfs: ZfsParameters = k.unperturbed().perturbed(&electric_perturbation(field, k));
    let mut lines = Vec::with_capacity(2 * hyperfine.len());
    for &(shift, weight) in hyperfine {
        let (fm, fp) = resonance_frequencies(&build_hamiltonian(&zfs, shift))?;
        lines.push((fm, weight / 2.0));
        lines.push((fp, weight / 2.0));
    }
    let (fm, fp) = resonance_frequencies(&build_hamiltonian(&zfs, 0.0))?;
    Ok((lines, fp - fm))
}

fn check_line_params(contrast: f64, linewidth: f64) -> Result<()> {
    if !(0.0..1.0).contains(&contrast) {
        return Err(Error::InvalidParameter(format!(
            "contrast {contrast} must lie in [0, 1)"
        )));
    }
    if !(linewidth > 0.0 && linewidth.is_finite()) {
        return Err(Error::InvalidParameter(format!("linewidth {linewidth} must be > 0")));
    }
    Ok(())
}

/// Span `d0 +- (3A + 5 linewidth)` that a synthesis grid must cover.
pub fn required_span(k: &CouplingConstants, linewidth: f64) -> (f64, f64) {
    let half = 3.0 * k.a_hf_mhz.abs() + 5.0 * linewidth;
    (k.d0_mhz - half, k.d0_mhz + half)
}

fn check_grid(grid: &FrequencyGrid, k: &CouplingConstants, linewidth: f64) -> Result<()> {
    let (need_lo, need_hi) = required_span(k, linewidth);
    let tol = 1e-9 * grid.step;
    if grid.start > need_lo + tol || grid.stop() < need_hi - tol {
        return Err(Error::GridTooNarrow {
            lo: grid.start,
            hi: grid.stop(),
            need_lo,
            need_hi,
        });
    }
    Ok(())
}

/// Mean over environments of `sum_lines weight * L(f)`, where `L` is a
/// unit-height Lorentzian. Chunks of [`REDUCTION_CHUNK`] environments are
/// summed in parallel and the chunk sums combined in order.
fn dip_profile(
    fields: &[ElectricFieldVec],
    k: &CouplingConstants,
    linewidth: f64,
    grid: &FrequencyGrid,
) -> Result<(Vec<f64>, f64)> {
    let hyperfine = hyperfine_detunings(k.a_hf_mhz);
    let g2 = linewidth * linewidth;
    let partials: Vec<(Vec<f64>, f64)> = fields
        .par_chunks(REDUCTION_CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; grid.len];
            let mut split = 0.0;
            for field in chunk {
                let (lines, s) = environment_lines(field, k, &hyperfine)?;
                split += s;
                for (i, a) in acc.iter_mut().enumerate() {
                    let f = grid.freq(i);
                    *a += lines
                        .iter()
                        .map(|&(f0, w)| w * g2 / ((f - f0) * (f - f0) + g2))
                        .sum::<f64>();
                }
            }
            Ok((acc, split))
        })
        .collect::<Result<_>>()?;

    let mut profile = vec![0.0; grid.len];
    let mut split = 0.0;
    for (acc, s) in partials {
        profile.iter_mut().zip(acc).for_each(|(p, a)| *p += a);
        split += s;
    }
    let n = fields.len().max(1) as f64;
    profile.iter_mut().for_each(|p| *p /= n);
    Ok((profile, split / n))
}

/// Spectrum of explicitly given environment fields, e.g. frozen charges.
pub fn spectrum_from_fields(
    fields: &[ElectricFieldVec],
    contrast: f64,
    linewidth_mhz: f64,
    grid: &FrequencyGrid,
    k: &CouplingConstants,
) -> Result<Synthesis> {
    check_line_params(contrast, linewidth_mhz)?;
    check_grid(grid, k, linewidth_mhz)?;
    if fields.is_empty() {
        return Err(Error::InvalidParameter("no environments given".into()));
    }
    let (profile, mean_splitting_mhz) = dip_profile(fields, k, linewidth_mhz, grid)?;
    let signal = profile.iter().map(|p| 1.0 - contrast * p).collect();
    Ok(Synthesis {
        spectrum: OdmrSpectrum {
            freqs: grid.freqs(),
            signal,
        },
        mean_splitting_mhz,
    })
}

/// Monte Carlo zero-field spectrum for charge density `rho_c`.
///
/// Each environment contributes the two resonances of every hyperfine
/// manifold as Lorentzian dips of depth `contrast * weight / 2`; the result
/// is averaged over `n_configs` environments.
pub fn synthesize_spectrum(
    params: &SynthesisParams,
    grid: &FrequencyGrid,
    k: &CouplingConstants,
    env: &Environment,
) -> Result<Synthesis> {
    check_line_params(params.contrast, params.linewidth_mhz)?;
    check_grid(grid, k, params.linewidth_mhz)?;
    if params.n_configs == 0 {
        return Err(Error::InvalidParameter("n_configs must be >= 1".into()));
    }
    let fields = sample_fields(params.rho_c, params.n_configs, env, params.seed)?;
    spectrum_from_fields(&fields, params.contrast, params.linewidth_mhz, grid, k)
}

/// Search ranges and refinement schedule for [`fit_spectrum`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub rho_range: (f64, f64),
    pub contrast_range: (f64, f64),
    /// Points per axis in each cycle; odd so the previous optimum is kept.
    pub grid_points: usize,
    pub cycles: usize,
    pub shrink: f64,
    pub linewidth_mhz: f64,
    pub n_configs: usize,
    pub env: Environment,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            rho_range: (0.0, 0.2),
            contrast_range: (0.0, 0.1),
            grid_points: 21,
            cycles: 3,
            shrink: 5.0,
            linewidth_mhz: DEFAULT_LINEWIDTH_MHZ,
            n_configs: DEFAULT_N_CONFIGS,
            env: Environment::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub rho_c: f64,
    pub contrast: f64,
    /// Sum of squared residuals at the optimum.
    pub residual: f64,
    /// Grid spacing of the final cycle, reported as the uncertainty.
    pub step_rho: f64,
    pub step_contrast: f64,
    /// Best objective after each cycle.
    pub cycle_residuals: Vec<f64>,
    /// Axes whose optimum sits on a non-physical edge of the final grid.
    pub boundary_hits: Vec<&'static str>,
}

impl FitResult {
    pub fn ensure_interior(&self) -> Result<()> {
        if self.boundary_hits.is_empty() {
            Ok(())
        } else {
            Err(Error::BoundaryHit(self.boundary_hits.join(", ")))
        }
    }
}

/// One axis of the search grid.
struct Axis {
    values: Vec<f64>,
    step: f64,
    /// Whether the first / last value could have been extended further.
    open_low: bool,
    open_high: bool,
}

impl Axis {
    fn initial(lo: f64, hi: f64, n: usize, bounds: (f64, f64)) -> Self {
        let step = (hi - lo) / (n - 1) as f64;
        let values = (0..n).map(|i| lo + i as f64 * step).collect();
        Axis {
            values,
            step,
            open_low: lo > bounds.0,
            open_high: hi < bounds.1,
        }
    }

    /// `center + j*step` for `|j| <= (n-1)/2`, truncated to `bounds`.
    fn around(center: f64, step: f64, n: usize, bounds: (f64, f64)) -> Self {
        let h = (n / 2) as i64;
        let values: Vec<f64> = (-h..=h)
            .map(|j| center + j as f64 * step)
            .filter(|v| *v >= bounds.0 && *v < bounds.1)
            .collect();
        let open_low = values.first().is_some_and(|v| v - step >= bounds.0);
        let open_high = values.last().is_some_and(|v| v + step < bounds.1);
        Axis {
            values,
            step,
            open_low,
            open_high,
        }
    }

    fn on_open_edge(&self, idx: usize) -> bool {
        (idx == 0 && self.open_low) || (idx + 1 == self.values.len() && self.open_high)
    }
}

const RHO_BOUNDS: (f64, f64) = (0.0, f64::INFINITY);
const CONTRAST_BOUNDS: (f64, f64) = (0.0, 1.0);

/// Unit-contrast dip profile for `rho_c`, interpolated onto `freqs`.
fn profile_on(
    rho_c: f64,
    freqs: &[f64],
    synth_grid: &FrequencyGrid,
    cfg: &FitConfig,
    k: &CouplingConstants,
    seed: u64,
) -> Result<Vec<f64>> {
    let fields = sample_fields(rho_c, cfg.n_configs, &cfg.env, seed)?;
    let (profile, _) = dip_profile(&fields, k, cfg.linewidth_mhz, synth_grid)?;
    Ok(freqs
        .iter()
        .map(|&f| interpolate_uniform(synth_grid.start, synth_grid.step, &profile, f))
        .collect())
}

/// Synthesis grid with the measured spacing, aligned to the measured start,
/// extended where needed to cover [`required_span`].
fn synthesis_grid(measured: &OdmrSpectrum, k: &CouplingConstants, linewidth: f64) -> FrequencyGrid {
    let step = measured.step();
    let first = measured.freqs[0];
    let last = measured.freqs[measured.freqs.len() - 1];
    let (need_lo, need_hi) = required_span(k, linewidth);
    let below = ((first - need_lo) / step).ceil().max(0.0);
    let above = ((need_hi - last) / step).ceil().max(0.0);
    let start = first - below * step;
    FrequencyGrid {
        start,
        step,
        len: measured.freqs.len() + below as usize + above as usize,
    }
}

/// Least-squares fit of `(rho_c, contrast)` on a refined brute-force grid.
///
/// Every candidate density is simulated with the same master seed, so the
/// objective is a deterministic function of the parameters. After each cycle
/// the grid re-centres on the optimum and its spacing shrinks by
/// `cfg.shrink`. An optimum on a non-physical edge of the final grid is
/// reported in [`FitResult::boundary_hits`].
pub fn fit_spectrum(
    measured: &OdmrSpectrum,
    cfg: &FitConfig,
    k: &CouplingConstants,
    seed: u64,
) -> Result<FitResult> {
    if cfg.grid_points < 3 || cfg.grid_points.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "grid_points {} must be odd and >= 3",
            cfg.grid_points
        )));
    }
    if cfg.cycles == 0 || cfg.shrink.is_nan() || cfg.shrink <= 1.0 || cfg.n_configs == 0 {
        return Err(Error::InvalidParameter(
            "cycles >= 1, shrink > 1 and n_configs >= 1 required".into(),
        ));
    }
    let (rlo, rhi) = cfg.rho_range;
    let (clo, chi) = cfg.contrast_range;
    if !(rlo >= 0.0 && rhi > rlo && clo >= 0.0 && chi > clo && chi < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "bad search ranges rho {:?}, contrast {:?}",
            cfg.rho_range, cfg.contrast_range
        )));
    }
    check_line_params(0.0, cfg.linewidth_mhz)?;
    let synth_grid = synthesis_grid(measured, k, cfg.linewidth_mhz);

    let mut rho_axis = Axis::initial(rlo, rhi, cfg.grid_points, RHO_BOUNDS);
    let mut con_axis = Axis::initial(clo, chi, cfg.grid_points, CONTRAST_BOUNDS);
    let mut cycle_residuals = Vec::with_capacity(cfg.cycles);
    let mut best = (f64::INFINITY, 0usize, 0usize);

    for cycle in 0..cfg.cycles {
        if cycle > 0 {
            let (rho, con) = (rho_axis.values[best.1], con_axis.values[best.2]);
            rho_axis = Axis::around(rho, rho_axis.step / cfg.shrink, cfg.grid_points, RHO_BOUNDS);
            con_axis = Axis::around(con, con_axis.step / cfg.shrink, cfg.grid_points, CONTRAST_BOUNDS);
        }
        let profiles: Vec<Vec<f64>> = rho_axis
            .values
            .par_iter()
            .map(|&rho| profile_on(rho, &measured.freqs, &synth_grid, cfg, k, seed))
            .collect::<Result<_>>()?;

        best = (f64::INFINITY, 0, 0);
        for (ri, p) in profiles.iter().enumerate() {
            for (ci, &c) in con_axis.values.iter().enumerate() {
                let ssr: f64 = measured
                    .signal
                    .iter()
                    .zip(p)
                    .map(|(y, pi)| (y - (1.0 - c * pi)).powi(2))
                    .sum();
                if ssr < best.0 {
                    best = (ssr, ri, ci);
                }
            }
        }
        log::debug!(
            "fit cycle {}: rho={} contrast={} ssr={:e}",
            cycle + 1,
            rho_axis.values[best.1],
            con_axis.values[best.2],
            best.0
        );
        cycle_residuals.push(best.0);
    }

    let mut boundary_hits = Vec::new();
    if rho_axis.on_open_edge(best.1) {
        boundary_hits.push("rho_c");
    }
    if con_axis.on_open_edge(best.2) {
        boundary_hits.push("contrast");
    }
    Ok(FitResult {
        rho_c: rho_axis.values[best.1],
        contrast: con_axis.values[best.2],
        residual: best.0,
        step_rho: rho_axis.step,
        step_contrast: con_axis.step,
        cycle_residuals,
        boundary_hits,
    })
}

/// Slope of PL counts against excitation power `(mW, counts)`; proportional
/// to the emitter density in the linear regime.
pub fn relative_density_from_pl(series: &[(f64, f64)]) -> Result<f64> {
    Ok(fit_line(series)?.slope)
}

/// Slopes of several PL series divided by the slope of the first.
pub fn relative_densities(series: &[Vec<(f64, f64)>]) -> Result<Vec<f64>> {
    let slopes = series
        .iter()
        .map(|s| relative_density_from_pl(s))
        .collect::<Result<Vec<_>>>()?;
    let reference = *slopes
        .first()
        .ok_or_else(|| Error::InvalidParameter("no PL series given".into()))?;
    if reference == 0.0 {
        return Err(Error::InvalidParameter("reference PL slope is zero".into()));
    }
    Ok(slopes.iter().map(|s| s / reference).collect())
}
