//! S = 1 operator algebra and the zero-field spin Hamiltonian.
//!
//! Every matrix lives in the S_z eigenbasis ordered `{|+1>, |0>, |-1>}`.
//! In that basis the two orthorhombic operators only couple `|+1>` and `|-1>`:
//!
//! ```text
//! Sx^2 - Sy^2     = [[0, 0, 1], [0, 0, 0], [1, 0, 0]]
//! SxSy + SySx     = [[0, 0, -i], [0, 0, 0], [i, 0, 0]]
//! ```

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const PLUS: usize = 0;
pub const ZERO: usize = 1;
pub const MINUS: usize = 2;

const ASYMMETRY_TOL: f64 = 1e-9;
const OFFDIAG_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 64;
const DEGENERACY_TOL: f64 = 1e-9;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// 3x3 complex operator in the S_z eigenbasis. Units are MHz for
/// Hamiltonians and dimensionless for bare spin operators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinMatrix(pub [[Complex64; 3]; 3]);

impl SpinMatrix {
    pub fn zeros() -> Self {
        SpinMatrix([[Complex64::new(0.0, 0.0); 3]; 3])
    }

    pub fn identity() -> Self {
        Self::diagonal([1.0, 1.0, 1.0])
    }

    pub fn diagonal(d: [f64; 3]) -> Self {
        let mut m = Self::zeros();
        for (i, v) in d.into_iter().enumerate() {
            m.0[i][i] = c(v, 0.0);
        }
        m
    }

    pub fn from_real(rows: [[f64; 3]; 3]) -> Self {
        let mut m = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = c(rows[i][j], 0.0);
            }
        }
        m
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|z| *z *= s);
        m
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = self.0[j][i].conj();
            }
        }
        m
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest `|H_ij - conj(H_ji)|` relative to the Frobenius norm.
    pub fn hermitian_defect(&self) -> f64 {
        let norm = self.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in i..3 {
                worst = worst.max((self.0[i][j] - self.0[j][i].conj()).norm());
            }
        }
        worst / norm
    }

    pub fn apply(&self, v: &[Complex64; 3]) -> [Complex64; 3] {
        let mut out = [c(0.0, 0.0); 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..3).map(|j| self.0[i][j] * v[j]).sum();
        }
        out
    }

    fn offdiag_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    s += self.0[i][j].norm_sqr();
                }
            }
        }
        s.sqrt()
    }
}

impl Index<(usize, usize)> for SpinMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for SpinMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.0[i][j]
    }
}

impl Add for SpinMatrix {
    type Output = SpinMatrix;
    fn add(mut self, rhs: SpinMatrix) -> SpinMatrix {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] += rhs.0[i][j];
            }
        }
        self
    }
}

impl Sub for SpinMatrix {
    type Output = SpinMatrix;
    fn sub(self, rhs: SpinMatrix) -> SpinMatrix {
        self + rhs.scale(-1.0)
    }
}

impl Mul for SpinMatrix {
    type Output = SpinMatrix;
    fn mul(self, rhs: SpinMatrix) -> SpinMatrix {
        let mut m = SpinMatrix::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = (0..3).map(|k| self.0[i][k] * rhs.0[k][j]).sum();
            }
        }
        m
    }
}

/// Returns `(Sx, Sy, Sz)` for S = 1.
pub fn spin_operators() -> (SpinMatrix, SpinMatrix, SpinMatrix) {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut sx = SpinMatrix::zeros();
    let mut sy = SpinMatrix::zeros();
    for (i, j) in [(PLUS, ZERO), (ZERO, MINUS)] {
        sx.0[i][j] = c(r, 0.0);
        sx.0[j][i] = c(r, 0.0);
        // Sy = (S+ - S-) / 2i
        sy.0[i][j] = c(0.0, -r);
        sy.0[j][i] = c(0.0, r);
    }
    let sz = SpinMatrix::diagonal([1.0, 0.0, -1.0]);
    (sx, sy, sz)
}

/// `Sz^2 - S(S+1)/3` with exact entries.
pub fn axial_operator() -> SpinMatrix {
    SpinMatrix::diagonal([1.0 / 3.0, -2.0 / 3.0, 1.0 / 3.0])
}

/// `Sx^2 - Sy^2` with exact entries.
pub fn orthorhombic_cos_operator() -> SpinMatrix {
    let mut m = SpinMatrix::zeros();
    m.0[PLUS][MINUS] = c(1.0, 0.0);
    m.0[MINUS][PLUS] = c(1.0, 0.0);
    m
}

/// `SxSy + SySx` with exact entries.
pub fn orthorhombic_sin_operator() -> SpinMatrix {
    let mut m = SpinMatrix::zeros();
    m.0[PLUS][MINUS] = c(0.0, -1.0);
    m.0[MINUS][PLUS] = c(0.0, 1.0);
    m
}

/// Axial and orthorhombic zero-field-splitting parameters, all in MHz.
///
/// `e1` multiplies `Sx^2 - Sy^2` and `e2` multiplies `SxSy + SySx`. The same
/// type carries perturbation deltas, in which case `d` is a shift of D.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ZfsParameters {
    pub d: f64,
    pub e1: f64,
    pub e2: f64,
}

impl ZfsParameters {
    pub fn new(d: f64, e1: f64, e2: f64) -> Self {
        ZfsParameters { d, e1, e2 }
    }

    /// `sqrt(e1^2 + e2^2)`; half the splitting of the +-1 pair.
    pub fn e_eff(&self) -> f64 {
        self.e1.hypot(self.e2)
    }

    /// Applies a perturbation delta on top of these parameters.
    pub fn perturbed(&self, delta: &ZfsParameters) -> ZfsParameters {
        ZfsParameters {
            d: self.d + delta.d,
            e1: self.e1 + delta.e1,
            e2: self.e2 + delta.e2,
        }
    }
}

impl Add for ZfsParameters {
    type Output = ZfsParameters;
    fn add(self, rhs: ZfsParameters) -> ZfsParameters {
        self.perturbed(&rhs)
    }
}

/// `H = D(Sz^2 - 2/3) + detuning*Sz + E1(Sx^2 - Sy^2) + E2(SxSy + SySx)`.
///
/// `detuning_mhz` carries the secular hyperfine shift `A*m_I`.
pub fn build_hamiltonian(zfs: &ZfsParameters, detuning_mhz: f64) -> SpinMatrix {
    let mut h = SpinMatrix::zeros();
    h.0[PLUS][PLUS] = c(zfs.d / 3.0 + detuning_mhz, 0.0);
    h.0[ZERO][ZERO] = c(-2.0 * zfs.d / 3.0, 0.0);
    h.0[MINUS][MINUS] = c(zfs.d / 3.0 - detuning_mhz, 0.0);
    h.0[PLUS][MINUS] = c(zfs.e1, -zfs.e2);
    h.0[MINUS][PLUS] = c(zfs.e1, zfs.e2);
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigensystem {
    /// Ascending, MHz.
    pub values: [f64; 3],
    /// `vectors[k]` belongs to `values[k]`.
    pub vectors: [[Complex64; 3]; 3],
}

/// Cyclic Jacobi diagonalization of a 3x3 Hermitian matrix.
///
/// Sweeps until the off-diagonal Frobenius norm drops below `1e-12 * ||H||`.
/// Eigenvalues come out ascending. Within a degenerate cluster vectors are
/// ordered by the basis state they overlap most with, and every vector is
/// phased so its first non-negligible component is real and positive.
pub fn eigensolve(h: &SpinMatrix) -> Result<Eigensystem> {
    let defect = h.hermitian_defect();
    if defect > ASYMMETRY_TOL {
        return Err(Error::NotHermitian(defect));
    }
    let scale = h.norm();
    let mut a = *h;
    let mut v = SpinMatrix::identity();

    let mut sweeps = 0;
    while a.offdiag_norm() > OFFDIAG_TOL * scale {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence(MAX_SWEEPS));
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            rotate(&mut a, &mut v, p, q);
        }
        sweeps += 1;
    }

    let mut pairs: Vec<(f64, [Complex64; 3])> = (0..3)
        .map(|k| (a.0[k][k].re, [v.0[0][k], v.0[1][k], v.0[2][k]]))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));

    // Tie-break degenerate clusters by dominant basis index.
    let tol = DEGENERACY_TOL * scale.max(f64::MIN_POSITIVE);
    let mut start = 0;
    while start < 3 {
        let mut end = start + 1;
        while end < 3 && pairs[end].0 - pairs[end - 1].0 <= tol {
            end += 1;
        }
        pairs[start..end].sort_by_key(|(_, vec)| dominant_index(vec));
        start = end;
    }

    let mut values = [0.0; 3];
    let mut vectors = [[c(0.0, 0.0); 3]; 3];
    for (k, (val, vec)) in pairs.into_iter().enumerate() {
        values[k] = val;
        vectors[k] = fix_phase(vec);
    }
    Ok(Eigensystem { values, vectors })
}

fn dominant_index(v: &[Complex64; 3]) -> usize {
    (0..3)
        .max_by(|&i, &j| v[i].norm_sqr().total_cmp(&v[j].norm_sqr()).then(j.cmp(&i)))
        .unwrap_or(0)
}

fn fix_phase(mut v: [Complex64; 3]) -> [Complex64; 3] {
    if let Some(first) = v.iter().find(|z| z.norm() > 1e-12) {
        let phase = first.conj() / first.norm();
        v.iter_mut().for_each(|z| *z *= phase);
    }
    v
}

/// One Jacobi rotation annihilating `a[p][q]`. Updates `a <- J^H a J`, `v <- v J`.
fn rotate(a: &mut SpinMatrix, v: &mut SpinMatrix, p: usize, q: usize) {
    let apq = a.0[p][q];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let app = a.0[p][p].re;
    let aqq = a.0[q][q].re;
    // Strip the phase of a_pq, then do the real symmetric rotation.
    let phase = apq / mag;
    let tau = (aqq - app) / (2.0 * mag);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let cs = 1.0 / (1.0 + t * t).sqrt();
    let sn = t * cs;

    let mut j = SpinMatrix::identity();
    j.0[p][p] = c(cs, 0.0);
    j.0[p][q] = c(sn, 0.0);
    j.0[q][p] = -phase.conj() * sn;
    j.0[q][q] = phase.conj() * cs;

    let mut next = j.adjoint() * *a * j;
    next.0[p][q] = c(0.0, 0.0);
    next.0[q][p] = c(0.0, 0.0);
    for k in 0..3 {
        next.0[k][k] = c(next.0[k][k].re, 0.0);
    }
    *a = next;
    *v = *v * j;
}

/// The two transition frequencies out of the m_S = 0 level, ascending, MHz.
///
/// The m_S = 0 level is the eigenvector with the largest weight on `|0>`;
/// if that weight is below 0.5 the assignment is ambiguous and this fails.
pub fn resonance_frequencies(h: &SpinMatrix) -> Result<(f64, f64)> {
    let eig = eigensolve(h)?;
    resonances_from(&eig)
}

pub fn resonances_from(eig: &Eigensystem) -> Result<(f64, f64)> {
    let (k0, overlap) = (0..3)
        .map(|k| (k, eig.vectors[k][ZERO].norm_sqr()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("three eigenvectors");
    if overlap < 0.5 {
        return Err(Error::LevelAssignment(overlap));
    }
    let zero = eig.values[k0];
    let mut f: Vec<f64> = (0..3)
        .filter(|&k| k != k0)
        .map(|k| (eig.values[k] - zero).abs())
        .collect();
    f.sort_by(f64::total_cmp);
    Ok((f[0], f[1]))
}

/// Real symmetric zero-field tensor in MHz, `H = S.D.S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DTensor(pub [[f64; 3]; 3]);

impl DTensor {
    pub fn new(rows: [[f64; 3]; 3]) -> Result<Self> {
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                if !rows[i][j].is_finite() {
                    return Err(Error::NonFinite("D tensor entry"));
                }
                worst = worst.max((rows[i][j] - rows[j][i]).abs());
            }
        }
        let norm = frobenius(&rows);
        if worst > 1e-9 * norm.max(1.0) {
            return Err(Error::AsymmetricTensor(worst));
        }
        Ok(DTensor(rows))
    }

    /// Traceless tensor reproducing `zfs` through [`d_tensor_to_zfs`].
    pub fn from_zfs(zfs: &ZfsParameters) -> Self {
        let third = zfs.d / 3.0;
        DTensor([
            [-third + zfs.e1, zfs.e2, 0.0],
            [zfs.e2, -third - zfs.e1, 0.0],
            [0.0, 0.0, 2.0 * third],
        ])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// `sum_ij D_ij S_i S_j`, assembled by operator products.
    pub fn to_hamiltonian(&self) -> SpinMatrix {
        let (sx, sy, sz) = spin_operators();
        let s = [sx, sy, sz];
        let mut h = SpinMatrix::zeros();
        for i in 0..3 {
            for j in 0..3 {
                h = h + (s[i] * s[j]).scale(self.0[i][j]);
            }
        }
        h
    }
}

fn frobenius(m: &[[f64; 3]; 3]) -> f64 {
    m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

/// `D = 3 D_zz / 2`, `E1 = (D_xx - D_yy) / 2`, `E2 = (D_xy + D_yx) / 2`.
pub fn d_tensor_to_zfs(t: &DTensor) -> ZfsParameters {
    let tr = t.trace();
    if tr.abs() > 1e-6 * frobenius(&t.0) {
        log::warn!("D tensor is not traceless (trace = {tr:.3e} MHz)");
    }
    let m = &t.0;
    ZfsParameters {
        d: 1.5 * m[2][2],
        e1: (m[0][0] - m[1][1]) / 2.0,
        e2: (m[0][1] + m[1][0]) / 2.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn mat_close(a: &SpinMatrix, b: &SpinMatrix, tol: f64) -> bool {
        (*a - *b).norm() <= tol
    }

    #[test]
    fn sz_eigenbasis() {
        let (_, _, sz) = spin_operators();
        let plus = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        assert_eq!(sz.apply(&plus), plus);
    }

    #[test]
    fn casimir_and_commutator() {
        let (sx, sy, sz) = spin_operators();
        let s2 = sx * sx + sy * sy + sz * sz;
        assert!(mat_close(&s2, &SpinMatrix::identity().scale(2.0), 1e-15));
        let comm = sx * sy - sy * sx;
        let isz = {
            let mut m = sz;
            m.0.iter_mut().flatten().for_each(|z| *z *= c(0.0, 1.0));
            m
        };
        assert!(mat_close(&comm, &isz, 1e-15));
    }

    #[test]
    fn orthorhombic_operators_match_products() {
        let (sx, sy, sz) = spin_operators();
        assert!(mat_close(&(sx * sx - sy * sy), &orthorhombic_cos_operator(), 1e-15));
        assert!(mat_close(&(sx * sy + sy * sx), &orthorhombic_sin_operator(), 1e-15));
        let axial = sz * sz - SpinMatrix::identity().scale(2.0 / 3.0);
        assert!(mat_close(&axial, &axial_operator(), 1e-15));
        assert_eq!(orthorhombic_cos_operator()[(PLUS, MINUS)], c(1.0, 0.0));
        assert_eq!(orthorhombic_sin_operator()[(PLUS, MINUS)], c(0.0, -1.0));
    }

    #[test]
    fn axial_levels() {
        let h = build_hamiltonian(&ZfsParameters::new(3470.0, 0.0, 0.0), 0.0);
        let eig = eigensolve(&h).unwrap();
        assert!(close(eig.values[0], -2.0 * 3470.0 / 3.0, 1e-9));
        assert!(close(eig.values[1], 3470.0 / 3.0, 1e-9));
        assert!(close(eig.values[2], 3470.0 / 3.0, 1e-9));
        // degenerate pair keeps basis order |+1>, |-1>
        assert!(close(eig.vectors[1][PLUS].re, 1.0, 1e-12));
        assert!(close(eig.vectors[2][MINUS].re, 1.0, 1e-12));
    }

    #[test]
    fn orthorhombic_levels() {
        let h = build_hamiltonian(&ZfsParameters::new(3470.0, 50.0, 0.0), 0.0);
        let eig = eigensolve(&h).unwrap();
        let expect = [-2313.333333333333, 1106.6666666666667, 1206.6666666666667];
        for (got, want) in eig.values.iter().zip(expect) {
            assert!(close(*got, want, 1e-9), "{got} vs {want}");
        }
        let (fm, fp) = resonance_frequencies(&h).unwrap();
        assert!(close(fm, 3420.0, 1e-9) && close(fp, 3520.0, 1e-9));
    }

    #[test]
    fn quadrature_splitting() {
        let h = build_hamiltonian(&ZfsParameters::new(3470.0, 3.0, 4.0), 0.0);
        let (fm, fp) = resonance_frequencies(&h).unwrap();
        assert!(close(fp - fm, 10.0, 1e-9));
        assert!(close(fm, 3465.0, 1e-9) && close(fp, 3475.0, 1e-9));
    }

    #[test]
    fn degenerate_resonances() {
        let h = build_hamiltonian(&ZfsParameters::new(3470.0, 0.0, 0.0), 0.0);
        assert_eq!(resonance_frequencies(&h).unwrap(), (3470.0, 3470.0));
    }

    #[test]
    fn diagonal_input_sorted() {
        let eig = eigensolve(&SpinMatrix::diagonal([3.0, 1.0, 2.0])).unwrap();
        assert_eq!(eig.values, [1.0, 2.0, 3.0]);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut h = SpinMatrix::diagonal([1.0, 2.0, 3.0]);
        h[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(eigensolve(&h), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn level_assignment_fails_for_strong_mixing() {
        // |0> spread evenly over all eigenvectors.
        let h = SpinMatrix::from_real([[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]);
        assert!(matches!(
            resonance_frequencies(&h),
            Err(Error::LevelAssignment(_))
        ));
    }

    #[test]
    fn eigenvectors_orthonormal_and_residual() {
        let mut h = build_hamiltonian(&ZfsParameters::new(3470.0, 30.0, -70.0), 47.0);
        h[(0, 1)] = c(12.0, -5.0);
        h[(1, 0)] = c(12.0, 5.0);
        let eig = eigensolve(&h).unwrap();
        let norm = h.norm();
        for k in 0..3 {
            let hv = h.apply(&eig.vectors[k]);
            for i in 0..3 {
                assert!((hv[i] - eig.vectors[k][i] * eig.values[k]).norm() < 1e-9 * norm);
            }
            for l in 0..3 {
                let dot: Complex64 = (0..3).map(|i| eig.vectors[k][i].conj() * eig.vectors[l][i]).sum();
                let want = if k == l { 1.0 } else { 0.0 };
                assert!((dot - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn d_tensor_examples() {
        let axial = DTensor::new([
            [-1088.67, 0.0, 0.0],
            [0.0, -1088.67, 0.0],
            [0.0, 0.0, 2177.33],
        ])
        .unwrap();
        let z = d_tensor_to_zfs(&axial);
        assert!(close(z.d, 3266.0, 0.01));
        assert_eq!((z.e1, z.e2), (0.0, 0.0));

        let z = d_tensor_to_zfs(&DTensor::new([[7.0, 0.0, 0.0], [0.0, -7.0, 0.0], [0.0; 3]]).unwrap());
        assert_eq!((z.d, z.e1), (0.0, 7.0));

        let z = d_tensor_to_zfs(&DTensor::new([[0.0, 5.0, 0.0], [5.0, 0.0, 0.0], [0.0; 3]]).unwrap());
        assert_eq!(z.e2, 5.0);
    }

    #[test]
    fn d_tensor_rejects_asymmetry() {
        assert!(DTensor::new([[0.0, 1.0, 0.0], [0.0; 3], [0.0; 3]]).is_err());
    }

    #[test]
    fn tensor_route_matches_direct_assembly() {
        let zfs = ZfsParameters::new(3470.0, 12.5, -33.0);
        let t = DTensor::from_zfs(&zfs);
        assert!(t.trace().abs() < 1e-9);
        let back = d_tensor_to_zfs(&t);
        assert!(close(back.d, zfs.d, 1e-9) && close(back.e1, zfs.e1, 1e-12));
        assert!(mat_close(&t.to_hamiltonian(), &build_hamiltonian(&zfs, 0.0), 1e-9));
    }
}
