//! Point-charge environment around the defect.
//!
//! Parasitic charges are drawn uniformly inside a sphere centred on the
//! defect, moved onto the nearest free hBN lattice site, and summed into a
//! Coulomb field at the origin.

use std::collections::HashSet;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::coupling::ElectricFieldVec;
use crate::error::{Error, Result};

/// `e / (4 pi eps0)` in V*nm.
pub const COULOMB_V_NM: f64 = 1.4399645;
/// V/cm per V/nm.
pub const V_PER_CM_PER_V_PER_NM: f64 = 1e7;
pub const DEFAULT_EXCLUSION_NM: f64 = 0.5;
pub const DEFAULT_RADIUS_NM: f64 = 10.0;
pub const MAX_RESAMPLE_ATTEMPTS: usize = 100;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Bulk hBN with AA' stacking. Layers sit directly on top of each other
/// with B and N exchanged, so every layer has the same honeycomb of sites.
/// The defect (a boron site) is at the origin of layer 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HexLattice {
    pub a_nm: f64,
    pub interlayer_nm: f64,
}

impl Default for HexLattice {
    fn default() -> Self {
        HexLattice {
            a_nm: 0.2504,
            interlayer_nm: 0.333,
        }
    }
}

/// `i*a1 + j*a2 + sub*(a1 + a2)/3 + layer*c`, with `a1 = a(1, 0)` and
/// `a2 = a(1/2, sqrt(3)/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SiteIndex {
    pub i: i64,
    pub j: i64,
    pub sub: u8,
    pub layer: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Species {
    Boron,
    Nitrogen,
}

impl HexLattice {
    pub fn new(a_nm: f64, interlayer_nm: f64) -> Result<Self> {
        if !(a_nm > 0.0 && a_nm.is_finite() && interlayer_nm > 0.0 && interlayer_nm.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lattice constants must be positive (a = {a_nm}, interlayer = {interlayer_nm})"
            )));
        }
        Ok(HexLattice { a_nm, interlayer_nm })
    }

    /// Nearest-neighbour B-N distance `a / sqrt(3)`.
    pub fn bond_length(&self) -> f64 {
        self.a_nm / SQRT3
    }

    /// Worst-case distance from any point to its nearest site.
    pub fn max_snap_distance(&self) -> f64 {
        self.bond_length().hypot(self.interlayer_nm / 2.0)
    }

    pub fn position(&self, s: SiteIndex) -> [f64; 3] {
        let a = self.a_nm;
        let shift = f64::from(s.sub) / 3.0;
        let u = s.i as f64 + shift;
        let v = s.j as f64 + shift;
        [a * (u + v / 2.0), a * v * SQRT3 / 2.0, s.layer as f64 * self.interlayer_nm]
    }

    pub fn species(&self, s: SiteIndex) -> Species {
        match (s.sub, s.layer.rem_euclid(2)) {
            (0, 0) | (1, 1) => Species::Boron,
            _ => Species::Nitrogen,
        }
    }

    /// Nearest lattice site to `p`; ties resolve to the smallest index.
    pub fn nearest_site(&self, p: [f64; 3]) -> SiteIndex {
        let layer = (p[2] / self.interlayer_nm).round() as i64;
        let v = p[1] / (self.a_nm * SQRT3 / 2.0);
        let u = p[0] / self.a_nm - v / 2.0;
        let mut best: Option<(f64, SiteIndex)> = None;
        for sub in 0..2u8 {
            let shift = f64::from(sub) / 3.0;
            let i0 = (u - shift).floor() as i64;
            let j0 = (v - shift).floor() as i64;
            for i in i0 - 1..=i0 + 2 {
                for j in j0 - 1..=j0 + 2 {
                    let s = SiteIndex { i, j, sub, layer };
                    let q = self.position(s);
                    let d2 = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
                    let better = match best {
                        None => true,
                        Some((bd, bs)) => d2 < bd || (d2 == bd && s < bs),
                    };
                    if better {
                        best = Some((d2, s));
                    }
                }
            }
        }
        best.expect("candidate set is non-empty").1
    }

    /// All sites within `radius` of `center`, enumerated layer by layer.
    pub fn sites_within(&self, center: [f64; 3], radius: f64) -> impl Iterator<Item = SiteIndex> + '_ {
        let lat = *self;
        let lo = ((center[2] - radius) / lat.interlayer_nm).floor() as i64;
        let hi = ((center[2] + radius) / lat.interlayer_nm).ceil() as i64;
        let reach = (2.0 * radius / lat.a_nm).ceil() as i64 + 2;
        let cu = {
            let v = center[1] / (lat.a_nm * SQRT3 / 2.0);
            ((center[0] / lat.a_nm - v / 2.0).round() as i64, v.round() as i64)
        };
        (lo..=hi).flat_map(move |layer| {
            (cu.1 - reach..=cu.1 + reach).flat_map(move |j| {
                (cu.0 - reach..=cu.0 + reach).flat_map(move |i| {
                    (0..2u8).filter_map(move |sub| {
                        let s = SiteIndex { i, j, sub, layer };
                        (dist(lat.position(s), center) <= radius).then_some(s)
                    })
                })
            })
        })
    }
}

fn norm(p: [f64; 3]) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

fn dist(p: [f64; 3], q: [f64; 3]) -> f64 {
    norm([p[0] - q[0], p[1] - q[1], p[2] - q[2]])
}

/// How raw charge positions are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PositionLaw {
    /// Normalized Gaussian direction times `r * cbrt(u)`: uniform in the ball.
    #[default]
    UniformBall,
    /// Un-normalized standard-normal vector times `r * cbrt(u)`, with points
    /// outside the sphere redrawn. Not uniform; kept for comparison.
    GaussianScaled,
}

/// Number of charges for density `rho_c` (nm^-3) in a sphere of `radius` nm.
pub fn charge_count(rho_c: f64, radius: f64) -> usize {
    (rho_c * 4.0 / 3.0 * PI * radius.powi(3)).round() as usize
}

fn normal_vector<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    [
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    ]
}

/// `radius * cbrt(u)` with `u` uniform on (0, 1].
pub fn radial_distance(radius: f64, u: f64) -> f64 {
    radius * u.cbrt()
}

pub fn sample_point<R: Rng + ?Sized>(rng: &mut R, radius: f64, law: PositionLaw) -> [f64; 3] {
    loop {
        let g = normal_vector(rng);
        let u = 1.0 - rng.random::<f64>();
        let d = radial_distance(radius, u);
        match law {
            PositionLaw::UniformBall => {
                let n = norm(g);
                if n > 0.0 {
                    return g.map(|x| x / n * d);
                }
            }
            PositionLaw::GaussianScaled => {
                let p = g.map(|x| x * d);
                if norm(p) <= radius {
                    return p;
                }
            }
        }
    }
}

/// Raw charge positions (nm) for density `rho_c` inside `radius`.
pub fn sample_positions<R: Rng + ?Sized>(
    rho_c: f64,
    radius: f64,
    law: PositionLaw,
    rng: &mut R,
) -> Result<Vec<[f64; 3]>> {
    if !(rho_c >= 0.0 && rho_c.is_finite()) {
        return Err(Error::InvalidParameter(format!("charge density {rho_c} must be >= 0")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!("radius {radius} must be > 0")));
    }
    let n = charge_count(rho_c, radius);
    Ok((0..n).map(|_| sample_point(rng, radius, law)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointCharge {
    /// nm, relative to the defect
    pub position: [f64; 3],
    /// units of e
    pub q: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChargeConfiguration {
    pub charges: Vec<PointCharge>,
    pub radius_nm: f64,
    pub rho_c: f64,
    pub exclusion_nm: f64,
}

impl ChargeConfiguration {
    /// Hand-built configuration, e.g. a single frozen charge.
    pub fn from_charges(charges: Vec<PointCharge>, exclusion_nm: f64) -> Self {
        let radius_nm = charges.iter().map(|c| norm(c.position)).fold(0.0, f64::max);
        let volume = 4.0 / 3.0 * PI * radius_nm.powi(3);
        ChargeConfiguration {
            rho_c: if volume > 0.0 { charges.len() as f64 / volume } else { 0.0 },
            charges,
            radius_nm,
            exclusion_nm,
        }
    }
}

/// Geometry of one snapping run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapParams {
    pub radius_nm: f64,
    pub exclusion_nm: f64,
    pub law: PositionLaw,
}

/// Moves each point onto its nearest lattice site. Sites outside the sphere,
/// inside the exclusion radius or already taken are rejected and the point
/// is redrawn from `rng`, at most [`MAX_RESAMPLE_ATTEMPTS`] times per point.
/// All charges are +1 e.
pub fn snap_to_lattice<R: Rng + ?Sized>(
    points: &[[f64; 3]],
    lattice: &HexLattice,
    params: &SnapParams,
    rng: &mut R,
) -> Result<ChargeConfiguration> {
    let mut taken = HashSet::with_capacity(points.len());
    let mut charges = Vec::with_capacity(points.len());
    for (index, &raw) in points.iter().enumerate() {
        let mut p = raw;
        let mut attempts = 0;
        loop {
            let site = lattice.nearest_site(p);
            let pos = lattice.position(site);
            let r = norm(pos);
            if r <= params.radius_nm && r >= params.exclusion_nm && taken.insert(site) {
                charges.push(PointCharge { position: pos, q: 1 });
                break;
            }
            attempts += 1;
            if attempts >= MAX_RESAMPLE_ATTEMPTS {
                return Err(Error::SnapExhausted { index, attempts });
            }
            p = sample_point(rng, params.radius_nm, params.law);
        }
    }
    let volume = 4.0 / 3.0 * PI * params.radius_nm.powi(3);
    Ok(ChargeConfiguration {
        rho_c: charges.len() as f64 / volume,
        charges,
        radius_nm: params.radius_nm,
        exclusion_nm: params.exclusion_nm,
    })
}

/// Coulomb field of all charges at the origin, V/cm.
pub fn field_at_origin(cfg: &ChargeConfiguration, eps_r: f64) -> Result<ElectricFieldVec> {
    if !(eps_r > 0.0 && eps_r.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps_r {eps_r} must be > 0")));
    }
    let mut e = [0.0f64; 3];
    for ch in &cfg.charges {
        let r = norm(ch.position);
        if r < cfg.exclusion_nm || r == 0.0 {
            return Err(Error::ChargeInExclusion {
                distance: r,
                exclusion: cfg.exclusion_nm,
            });
        }
        // field points away from a positive charge, i.e. along -r at the origin
        let s = -COULOMB_V_NM * f64::from(ch.q) / (r * r * r);
        for (ek, xk) in e.iter_mut().zip(ch.position) {
            *ek += s * xk;
        }
    }
    let scale = V_PER_CM_PER_V_PER_NM / eps_r;
    Ok(ElectricFieldVec::new(e[0] * scale, e[1] * scale, e[2] * scale))
}
