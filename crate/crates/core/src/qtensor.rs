//! Pointwise Q-tensor algebra.
//!
//! A [`QTensor`] is a traceless symmetric 3x3 matrix stored by its
//! coefficients in the orthonormal basis
//!
//! ```text
//! B1 = (e1e1 - e2e2)/sqrt2        B2 = (e1e1 + e2e2 - 2 e3e3)/sqrt6
//! B3 = (e1e2 + e2e1)/sqrt2        B4 = (e1e3 + e3e1)/sqrt2
//! B5 = (e2e3 + e3e2)/sqrt2
//! ```
//!
//! The coefficient order q1..q5 is the on-disk order of every file format
//! in this crate. Because the basis is orthonormal the Frobenius norm of the
//! matrix equals the Euclidean norm of the coefficients, and the gradient of a
//! scalar function with respect to the coefficients is the traceless projection
//! of its matrix gradient.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT2: f64 = std::f64::consts::SQRT_2;

fn sqrt6() -> f64 {
    6f64.sqrt()
}

/// `sqrt(2/3)`, the norm of a unit-order uniaxial tensor.
pub fn uniaxial_norm() -> f64 {
    (2.0f64 / 3.0).sqrt()
}

/// Additive constant of the nematic potential; makes `min f = 0`.
pub const NEMATIC_CONSTANT: f64 = 2.0 / 9.0;

/// Default norm floor for the field potential.
pub const DEFAULT_REG_DELTA: f64 = 1e-8;

/// Traceless symmetric tensor in the B1..B5 basis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QTensor(pub [f64; 5]);

impl QTensor {
    pub const ZERO: QTensor = QTensor([0.0; 5]);

    pub fn new(q: [f64; 5]) -> Self {
        QTensor(q)
    }

    /// `e3 (x) e3 - I/3`, the far-field state.
    pub fn infinity() -> Self {
        QTensor([0.0, -uniaxial_norm(), 0.0, 0.0, 0.0])
    }

    pub fn coeffs(&self) -> &[f64; 5] {
        &self.0
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dot(&self, other: &QTensor) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// The (3,3) matrix entry.
    pub fn q33(&self) -> f64 {
        -2.0 * self.0[1] / sqrt6()
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        let [q1, q2, q3, q4, q5] = self.0;
        let a = q1 / SQRT2;
        let b = q2 / sqrt6();
        Matrix3::new(
            a + b,
            q3 / SQRT2,
            q4 / SQRT2,
            q3 / SQRT2,
            -a + b,
            q5 / SQRT2,
            q4 / SQRT2,
            q5 / SQRT2,
            -2.0 * b,
        )
    }

    /// Orthogonal projection of an arbitrary 3x3 matrix onto the traceless
    /// symmetric subspace, expressed in coefficients.
    pub fn project(m: &Matrix3<f64>) -> Self {
        QTensor([
            (m[(0, 0)] - m[(1, 1)]) / SQRT2,
            (m[(0, 0)] + m[(1, 1)] - 2.0 * m[(2, 2)]) / sqrt6(),
            (m[(0, 1)] + m[(1, 0)]) / SQRT2,
            (m[(0, 2)] + m[(2, 0)]) / SQRT2,
            (m[(1, 2)] + m[(2, 1)]) / SQRT2,
        ])
    }

    /// Alias of [`QTensor::project`] for matrices already in the subspace.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        Self::project(m)
    }

    /// Conjugation by the reflection `T = diag(1, 1, -1)`.
    pub fn reflect_z(&self) -> Self {
        let [q1, q2, q3, q4, q5] = self.0;
        QTensor([q1, q2, q3, -q4, -q5])
    }

    /// Unit eigenvector of the largest eigenvalue, oriented with `n3 >= 0`.
    pub fn leading_director(&self) -> Director {
        let eig = self.to_matrix().symmetric_eigen();
        let k = eig.eigenvalues.imax();
        let mut v: Vector3<f64> = eig.eigenvectors.column(k).into_owned();
        if v[2] < 0.0 {
            v = -v;
        }
        v /= v.norm();
        Director([v[0], v[1], v[2]])
    }
}

impl Add for QTensor {
    type Output = QTensor;
    fn add(mut self, rhs: QTensor) -> QTensor {
        self += rhs;
        self
    }
}

impl AddAssign for QTensor {
    fn add_assign(&mut self, rhs: QTensor) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

impl Sub for QTensor {
    type Output = QTensor;
    fn sub(mut self, rhs: QTensor) -> QTensor {
        self -= rhs;
        self
    }
}

impl SubAssign for QTensor {
    fn sub_assign(&mut self, rhs: QTensor) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a -= b;
        }
    }
}

impl Mul<f64> for QTensor {
    type Output = QTensor;
    fn mul(self, s: f64) -> QTensor {
        QTensor(self.0.map(|x| x * s))
    }
}

impl Mul<QTensor> for f64 {
    type Output = QTensor;
    fn mul(self, q: QTensor) -> QTensor {
        q * self
    }
}

impl Neg for QTensor {
    type Output = QTensor;
    fn neg(self) -> QTensor {
        self * -1.0
    }
}

/// Unit vector on the sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Director(pub [f64; 3]);

impl Director {
    /// Rejects vectors whose norm differs from one by more than `1e-12`.
    pub fn new(n: [f64; 3]) -> Result<Self> {
        let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "director must be a unit vector, got norm {norm}"
            )));
        }
        Ok(Director(n))
    }

    pub fn e3() -> Self {
        Director([0.0, 0.0, 1.0])
    }

    /// `(sin theta cos phi, sin theta sin phi, cos theta)`.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Director([st * cp, st * sp, ct])
    }

    /// In the x-z meridian, at angle `psi` measured from e3 toward e1.
    pub fn meridian(psi: f64) -> Self {
        let (s, c) = psi.sin_cos();
        Director([s, 0.0, c])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }
    pub fn y(&self) -> f64 {
        self.0[1]
    }
    pub fn z(&self) -> f64 {
        self.0[2]
    }

    pub fn dist_sq(&self, other: &Director) -> f64 {
        (0..3).map(|k| (self.0[k] - other.0[k]).powi(2)).sum()
    }

    /// `s (n (x) n - I/3)`.
    pub fn to_qtensor(&self, s: f64) -> QTensor {
        let [x, y, z] = self.0;
        QTensor([
            s * (x * x - y * y) / SQRT2,
            s * (x * x + y * y - 2.0 * z * z) / sqrt6(),
            s * SQRT2 * x * y,
            s * SQRT2 * x * z,
            s * SQRT2 * y * z,
        ])
    }
}

/// `s (n (x) n - I/3)` for a unit director.
pub fn from_director(n: &Director, s: f64) -> Result<QTensor> {
    Director::new(n.0)?;
    Ok(n.to_qtensor(s))
}

/// Model lengths in units of the particle radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Nematic coherence length.
    pub xi: f64,
    /// Field coherence length.
    pub eta: f64,
    pub cste: f64,
    pub reg_delta: f64,
}

impl ModelParams {
    pub fn new(xi: f64, eta: f64) -> Result<Self> {
        Self::with_reg(xi, eta, DEFAULT_REG_DELTA)
    }

    pub fn with_reg(xi: f64, eta: f64, reg_delta: f64) -> Result<Self> {
        if !(xi > 0.0 && xi.is_finite()) || !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "xi and eta must be positive and finite (xi={xi}, eta={eta})"
            )));
        }
        if !(reg_delta > 0.0 && reg_delta <= 1e-3) {
            return Err(Error::InvalidInput(format!(
                "reg_delta must lie in (0, 1e-3], got {reg_delta}"
            )));
        }
        Ok(ModelParams {
            xi,
            eta,
            cste: NEMATIC_CONSTANT,
            reg_delta,
        })
    }

    /// `eta / xi`.
    pub fn lambda(&self) -> f64 {
        self.eta / self.xi
    }

    /// `xi / eta`.
    pub fn epsilon(&self) -> f64 {
        self.xi / self.eta
    }
}

/// `f(Q) = -|Q|^2/2 - tr(Q^3) + 3|Q|^4/4 + 2/9` and its gradient.
pub fn nematic_potential(q: &QTensor) -> (f64, QTensor) {
    let m = q.to_matrix();
    let n2 = q.norm_sq();
    let m2 = m * m;
    let tr3 = (m2 * m).trace();
    let value = -0.5 * n2 - tr3 + 0.75 * n2 * n2 + NEMATIC_CONSTANT;
    let grad = m * (-1.0 + 3.0 * n2) - m2 * 3.0;
    (value, QTensor::project(&grad))
}

/// Value of the nematic potential only.
pub fn nematic_value(q: &QTensor) -> f64 {
    let m = q.to_matrix();
    let n2 = q.norm_sq();
    -0.5 * n2 - (m * m * m).trace() + 0.75 * n2 * n2 + NEMATIC_CONSTANT
}

/// `g(Q) = sqrt(2/3) - Q33/|Q|` with `|Q|` floored at `reg_delta`.
///
/// Below the floor the potential is the affine function
/// `sqrt(2/3) - Q33/reg_delta`; at exactly `Q = 0` the gradient is zero.
pub fn field_potential(q: &QTensor, reg_delta: f64) -> (f64, QTensor) {
    let n = q.norm();
    let q33 = q.q33();
    let dq33 = -2.0 / sqrt6();
    if n == 0.0 {
        return (uniaxial_norm(), QTensor::ZERO);
    }
    if n >= reg_delta {
        let value = uniaxial_norm() - q33 / n;
        let mut grad = *q * (q33 / (n * n * n));
        grad.0[1] -= dq33 / n;
        (value, grad)
    } else {
        let value = uniaxial_norm() - q33 / reg_delta;
        let mut grad = QTensor::ZERO;
        grad.0[1] = -dq33 / reg_delta;
        (value, grad)
    }
}

/// Radial anchoring `e_r (x) e_r - I/3`.
pub fn boundary_tensor(theta: f64, phi: f64) -> QTensor {
    Director::from_angles(theta, phi).to_qtensor(1.0)
}

/// Rotation by `phi` about e3.
pub fn rotation_z(phi: f64) -> Matrix3<f64> {
    let (s, c) = phi.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// `R Q R^t` with `R` the rotation by `phi` about e3, so that
/// `rotate_z(boundary_tensor(theta, 0), phi) == boundary_tensor(theta, phi)`.
pub fn rotate_z(q: &QTensor, phi: f64) -> QTensor {
    // (q1, q3) turn at twice the rate of (q4, q5); q2 is invariant.
    let [q1, q2, q3, q4, q5] = q.0;
    let (s2, c2) = (2.0 * phi).sin_cos();
    let (s1, c1) = phi.sin_cos();
    QTensor([
        c2 * q1 - s2 * q3,
        q2,
        s2 * q1 + c2 * q3,
        c1 * q4 - s1 * q5,
        s1 * q4 + c1 * q5,
    ])
}

/// Azimuthal form `|d/dphi (R Q R^t)|^2`, independent of `phi`.
pub fn xi_form(q: &QTensor) -> f64 {
    let [q1, _, q3, q4, q5] = q.0;
    4.0 * (q1 * q1 + q3 * q3) + q4 * q4 + q5 * q5
}

/// Gradient of [`xi_form`] with respect to the coefficients.
pub fn xi_form_grad(q: &QTensor) -> QTensor {
    let [q1, _, q3, q4, q5] = q.0;
    QTensor([8.0 * q1, 0.0, 8.0 * q3, 2.0 * q4, 2.0 * q5])
}

/// Sharp constant in `xi_form(Q) <= C |Q - Q_inf|^2`; attained along B1/B3.
pub const XI_FORM_CONSTANT: f64 = 4.0;

/// `1 - 6 tr(Q^3)^2 / |Q|^6`, or `None` inside a core where `|Q| < reg_delta`.
pub fn biaxiality(q: &QTensor, reg_delta: f64) -> Option<f64> {
    let n2 = q.norm_sq();
    if n2.sqrt() < reg_delta {
        return None;
    }
    let m = q.to_matrix();
    let tr3 = (m * m * m).trace();
    Some(1.0 - 6.0 * tr3 * tr3 / (n2 * n2 * n2))
}

/// Minimum of `(f + h g)/|Q - Q_inf|^2` over the supplied samples; samples
/// closer than `1e-10` to `Q_inf` are skipped. Returns `None` if every sample
/// was skipped.
pub fn coercivity_ratio_on(samples: &[QTensor], h: f64, reg_delta: f64) -> Option<f64> {
    let qinf = QTensor::infinity();
    samples
        .iter()
        .filter_map(|q| {
            let d2 = (*q - qinf).norm_sq();
            if d2.sqrt() < 1e-10 {
                return None;
            }
            let v = nematic_value(q) + h * field_potential(q, reg_delta).0;
            Some(v / d2)
        })
        .reduce(f64::min)
}

/// Sampled lower estimate of the coercivity constant `C(h)`: minimum of the
/// ratio over `sample_count` points drawn uniformly from the ball of the given
/// radius around `Q_inf`.
pub fn coercivity_ratio(h: f64, sample_count: usize, radius: f64, seed: u64) -> Result<f64> {
    if !(h > 0.0) || sample_count < 10_000 || !(radius > 0.0) {
        return Err(Error::InvalidInput(format!(
            "coercivity_ratio needs h > 0, sample_count >= 1e4, radius > 0 (got {h}, {sample_count}, {radius})"
        )));
    }
    let samples = sample_ball(QTensor::infinity(), radius, sample_count, seed);
    coercivity_ratio_on(&samples, h, DEFAULT_REG_DELTA)
        .ok_or_else(|| Error::InvalidInput("every sample was degenerate".into()))
}

/// Uniform samples from the 5-ball of `radius` centred at `center`.
pub fn sample_ball(center: QTensor, radius: f64, count: usize, seed: u64) -> Vec<QTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let dir = random_unit(&mut rng);
            let rho = radius * rng.gen::<f64>().powf(0.2);
            center + dir * rho
        })
        .collect()
}

/// Uniformly distributed unit tensor.
pub fn random_unit<R: Rng>(rng: &mut R) -> QTensor {
    loop {
        let mut q = [0.0; 5];
        for x in q.iter_mut() {
            *x = gaussian(rng);
        }
        let t = QTensor(q);
        let n = t.norm();
        if n > 1e-12 {
            return t * (1.0 / n);
        }
    }
}

pub(crate) fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; avoids pulling in rand_distr for one normal draw.
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
