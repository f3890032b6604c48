//! Strain, stress and electric-field couplings of the zero-field splitting.
//!
//! Internal units: MHz for energies, dimensionless strain, GPa for stress
//! and elastic constants, V/cm for electric fields. `d_perp` is kept in its
//! customary Hz*cm/V and converted at the point of use.

use crate::error::{Error, Result};
use crate::spin::ZfsParameters;

/// MHz per GHz; config files quote strain couplings in GHz/strain.
pub const MHZ_PER_GHZ: f64 = 1e3;
/// MHz per Hz.
pub const MHZ_PER_HZ: f64 = 1e-6;
/// Default bound on any strain component for the linear model.
pub const STRAIN_VALIDITY_LIMIT: f64 = 0.1;

/// Coupling constants of the spin Hamiltonian. Strain couplings are stored
/// in MHz/strain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingConstants {
    pub d0_mhz: f64,
    pub g1: f64,
    pub g2: f64,
    pub g2p: f64,
    pub g3: f64,
    pub g3p: f64,
    /// Hz*cm/V
    pub d_perp: f64,
    pub a_hf_mhz: f64,
    pub c11_gpa: f64,
    pub c12_gpa: f64,
}

impl CouplingConstants {
    /// Measured D0 = 3470 MHz with the computed couplings.
    pub fn experimental() -> Self {
        CouplingConstants {
            d0_mhz: 3470.0,
            g1: -19_200.0,
            g2: 2_600.0,
            g2p: 0.0,
            g3: 0.0,
            g3p: 5_800.0,
            d_perp: 20.72,
            a_hf_mhz: 47.0,
            c11_gpa: 811.0,
            c12_gpa: 168.0,
        }
    }

    /// Same couplings, D0 = 3263 MHz from the monolayer flake model.
    pub fn flake_theory() -> Self {
        CouplingConstants {
            d0_mhz: 3263.0,
            ..Self::experimental()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "experimental" => Some(Self::experimental()),
            "flake-theory" => Some(Self::flake_theory()),
            _ => None,
        }
    }

    pub fn unperturbed(&self) -> ZfsParameters {
        ZfsParameters::new(self.d0_mhz, 0.0, 0.0)
    }

    /// `|g1 / g2|`, the shift-to-splitting strength of normal strain.
    pub fn strain_shift_split_ratio(&self) -> f64 {
        (self.g1 / self.g2).abs()
    }
}

impl Default for CouplingConstants {
    fn default() -> Self {
        Self::experimental()
    }
}

/// In-plane symmetric strain; `exy` stands for both off-diagonal entries.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StrainTensor2D {
    pub exx: f64,
    pub eyy: f64,
    pub exy: f64,
}

impl StrainTensor2D {
    pub fn new(exx: f64, eyy: f64, exy: f64) -> Self {
        StrainTensor2D { exx, eyy, exy }
    }

    pub fn check(&self, limit: f64) -> Result<()> {
        for v in [self.exx, self.eyy, self.exy] {
            if !v.is_finite() {
                return Err(Error::NonFinite("strain component"));
            }
            if v.abs() >= limit {
                return Err(Error::StrainGuard { value: v, limit });
            }
        }
        Ok(())
    }
}

/// In-plane normal stress, GPa.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StressTensor2D {
    pub sxx: f64,
    pub syy: f64,
}

impl StressTensor2D {
    pub fn new(sxx: f64, syy: f64) -> Self {
        StressTensor2D { sxx, syy }
    }
}

/// Electric field in V/cm. `ez` is carried along but never couples.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ElectricFieldVec {
    pub ex: f64,
    pub ey: f64,
    pub ez: f64,
}

impl ElectricFieldVec {
    pub fn new(ex: f64, ey: f64, ez: f64) -> Self {
        ElectricFieldVec { ex, ey, ez }
    }

    pub fn in_plane_magnitude(&self) -> f64 {
        self.ex.hypot(self.ey)
    }
}

/// Strain perturbation with the default validity guard.
pub fn strain_perturbation(eps: &StrainTensor2D, k: &CouplingConstants) -> Result<ZfsParameters> {
    strain_perturbation_with_limit(eps, k, STRAIN_VALIDITY_LIMIT)
}

/// `dD = g1 (exx + eyy)`, `E1 = g2 (exx - eyy) + g3 (2 exy)`,
/// `E2 = g2' (exx - eyy) + g3' (2 exy)`.
pub fn strain_perturbation_with_limit(
    eps: &StrainTensor2D,
    k: &CouplingConstants,
    limit: f64,
) -> Result<ZfsParameters> {
    eps.check(limit)?;
    let normal = eps.exx - eps.eyy;
    let shear = 2.0 * eps.exy;
    Ok(ZfsParameters {
        d: k.g1 * (eps.exx + eps.eyy),
        e1: k.g2 * normal + k.g3 * shear,
        e2: k.g2p * normal + k.g3p * shear,
    })
}

/// Stress couplings `(h1, h2)` in MHz/GPa.
pub fn stress_couplings(k: &CouplingConstants) -> Result<(f64, f64)> {
    let sum = k.c11_gpa + k.c12_gpa;
    let diff = k.c11_gpa - k.c12_gpa;
    if sum == 0.0 || diff == 0.0 || !sum.is_finite() || !diff.is_finite() {
        return Err(Error::SingularStiffness {
            c11: k.c11_gpa,
            c12: k.c12_gpa,
        });
    }
    Ok((k.g1 / sum, k.g2 / diff))
}

/// Linear propagation of strain-coupling uncertainties `(sigma_g1, sigma_g2)`
/// (MHz/strain) into `(sigma_h1, sigma_h2)` (MHz/GPa).
pub fn stress_coupling_uncertainties(
    k: &CouplingConstants,
    sigma_g1: f64,
    sigma_g2: f64,
) -> Result<(f64, f64)> {
    let (h1, h2) = stress_couplings(&CouplingConstants {
        g1: sigma_g1,
        g2: sigma_g2,
        ..*k
    })?;
    Ok((h1.abs(), h2.abs()))
}

/// `sigma = C eps` with `C = [[C11, C12], [C12, C11]]`.
pub fn stress_from_strain(eps: &StrainTensor2D, k: &CouplingConstants) -> StressTensor2D {
    StressTensor2D {
        sxx: k.c11_gpa * eps.exx + k.c12_gpa * eps.eyy,
        syy: k.c12_gpa * eps.exx + k.c11_gpa * eps.eyy,
    }
}

/// Inverse of [`stress_from_strain`]; the shear component is zero.
pub fn strain_from_stress(sig: &StressTensor2D, k: &CouplingConstants) -> Result<StrainTensor2D> {
    let det = k.c11_gpa * k.c11_gpa - k.c12_gpa * k.c12_gpa;
    if det == 0.0 || !det.is_finite() {
        return Err(Error::SingularStiffness {
            c11: k.c11_gpa,
            c12: k.c12_gpa,
        });
    }
    Ok(StrainTensor2D {
        exx: (k.c11_gpa * sig.sxx - k.c12_gpa * sig.syy) / det,
        eyy: (k.c11_gpa * sig.syy - k.c12_gpa * sig.sxx) / det,
        exy: 0.0,
    })
}

/// `dD = h1 (sxx + syy)`, `E1 = h2 (sxx - syy)`, `E2 = 0`.
pub fn stress_perturbation(sig: &StressTensor2D, k: &CouplingConstants) -> Result<ZfsParameters> {
    if !(sig.sxx.is_finite() && sig.syy.is_finite()) {
        return Err(Error::NonFinite("stress component"));
    }
    let (h1, h2) = stress_couplings(k)?;
    Ok(ZfsParameters {
        d: h1 * (sig.sxx + sig.syy),
        e1: h2 * (sig.sxx - sig.syy),
        e2: 0.0,
    })
}

/// `E1 = d_perp * Ey`, `E2 = d_perp * Ex`; the axial term is symmetry-forbidden.
pub fn electric_perturbation(f: &ElectricFieldVec, k: &CouplingConstants) -> ZfsParameters {
    let scale = k.d_perp * MHZ_PER_HZ;
    ZfsParameters {
        d: 0.0,
        e1: scale * f.ey,
        e2: scale * f.ex,
    }
}

/// Result of an ordinary least-squares line fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

/// Ordinary least squares `y = a + b x` over `(x, y)` samples.
pub fn fit_line(samples: &[(f64, f64)]) -> Result<LineFit> {
    if samples.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: samples.len(),
        });
    }
    if samples.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::NonFinite("regression sample"));
    }
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let spread = samples.iter().map(|s| (s.0 - mx).abs()).fold(0.0, f64::max);
    if sxx == 0.0 || spread <= f64::EPSILON * mx.abs() {
        return Err(Error::DegenerateAbscissae);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = samples
        .iter()
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let slope_stderr = (ssr / (n - 2.0) / sxx).sqrt();
    Ok(LineFit {
        slope,
        intercept,
        slope_stderr,
    })
}

/// Slope and its standard error of an observable against a perturbation.
pub fn extract_coupling_slope(samples: &[(f64, f64)]) -> Result<(f64, f64)> {
    let fit = fit_line(samples)?;
    Ok((fit.slope, fit.slope_stderr))
}

/// Small-strain tensor of the affine map between two triangles (nm).
///
/// Solves `F [e1 e2] = [d1 d2]` for the edge vectors from vertex 0 and returns
/// `(F + F^T)/2 - I`.
pub fn local_strain_from_triangle(
    reference: &[[f64; 2]; 3],
    deformed: &[[f64; 2]; 3],
) -> Result<StrainTensor2D> {
    if reference.iter().chain(deformed).flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("triangle vertex"));
    }
    let edge = |t: &[[f64; 2]; 3], i: usize| [t[i][0] - t[0][0], t[i][1] - t[0][1]];
    let (r1, r2) = (edge(reference, 1), edge(reference, 2));
    let (d1, d2) = (edge(deformed, 1), edge(deformed, 2));

    // columns of R are r1, r2
    let det = r1[0] * r2[1] - r2[0] * r1[1];
    let area = det.abs() / 2.0;
    if area <= 1e-6 {
        return Err(Error::DegenerateTriangle(area));
    }
    let inv = [[r2[1] / det, -r2[0] / det], [-r1[1] / det, r1[0] / det]];
    // F = D R^-1
    let mut f = [[0.0; 2]; 2];
    for (i, row) in f.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = d1[i] * inv[0][j] + d2[i] * inv[1][j];
        }
    }
    Ok(StrainTensor2D {
        exx: f[0][0] - 1.0,
        eyy: f[1][1] - 1.0,
        exy: (f[0][1] + f[1][0]) / 2.0,
    })
}
