//! One-dimensional boundary-layer problem.
//!
//! For a surface value `Q0` the layer cost is
//!
//! ```text
//! D_lambda(Q0) = min  int_0^inf [ |Q'|^2/2 + lambda^2 f(Q) + g(Q) ] dt,   Q(0) = Q0, Q(inf) = Q_inf
//! ```
//!
//! with `t = (r - 1)/eta`. Finite `lambda` is solved numerically on a
//! truncated uniform grid; `lambda = inf` restricts to uniaxial maps and has
//! the closed-form heteroclinic implemented by [`GeodesicPath`].

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix5, Vector5};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lbfgs::{self, LbfgsOptions};
use crate::qtensor::{
    field_potential, nematic_potential, sample_ball, Director, QTensor, DEFAULT_REG_DELTA,
};
use crate::quad::gauss_legendre;
use crate::util::fmt17;

/// `24^(1/4)`, the decay rate of the heteroclinic and the equatorial layer cost.
pub fn kappa() -> f64 {
    24f64.powf(0.25)
}

/// Uniform nodes on `[0, length]` in the stretched variable `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileGrid {
    pub length: f64,
    pub nodes: usize,
}

impl ProfileGrid {
    pub fn new(length: f64, nodes: usize) -> Result<Self> {
        if nodes < 64 {
            return Err(Error::InvalidInput(format!("profile grid needs N >= 64, got {nodes}")));
        }
        if !(length >= 10.0 / kappa() - 1e-12) {
            return Err(Error::InvalidInput(format!(
                "profile grid length {length} is shorter than 10/kappa"
            )));
        }
        Ok(ProfileGrid { length, nodes })
    }

    pub fn spacing(&self) -> f64 {
        self.length / (self.nodes - 1) as f64
    }

    pub fn t(&self, k: usize) -> f64 {
        if k + 1 == self.nodes {
            self.length
        } else {
            k as f64 * self.spacing()
        }
    }

    /// Same length, mesh spacing halved.
    pub fn refined(&self) -> Self {
        ProfileGrid {
            length: self.length,
            nodes: 2 * self.nodes - 1,
        }
    }
}

impl Default for ProfileGrid {
    /// `L = 20/kappa`, `N = 2000`.
    fn default() -> Self {
        ProfileGrid {
            length: 20.0 / kappa(),
            nodes: 2000,
        }
    }
}

/// Starting profiles for [`minimize_profile`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileInit {
    /// Straight line from `Q0` to `Q_inf`.
    Linear,
    /// Uniaxial heteroclinic from the leading director of `Q0`, plus an
    /// exponentially decaying correction matching `Q0` at `t = 0`.
    Geodesic,
    /// `Q0` up to `t = 1/kappa`, then `Q_inf`.
    ConstantJump,
    /// A caller-supplied profile.
    Warm,
}

impl ProfileInit {
    pub const DEFAULTS: [ProfileInit; 3] =
        [ProfileInit::Linear, ProfileInit::Geodesic, ProfileInit::ConstantJump];

    pub fn build(self, q0: &QTensor, grid: &ProfileGrid) -> Vec<QTensor> {
        let qinf = QTensor::infinity();
        let n = grid.nodes;
        let mut v: Vec<QTensor> = match self {
            ProfileInit::Linear | ProfileInit::Warm => (0..n)
                .map(|k| {
                    let s = grid.t(k) / grid.length;
                    *q0 * (1.0 - s) + qinf * s
                })
                .collect(),
            ProfileInit::Geodesic => {
                let n0 = q0.leading_director();
                let theta0 = n0.z().clamp(-1.0, 1.0).acos();
                let phi0 = n0.y().atan2(n0.x());
                let path = GeodesicPath::new(theta0, Pole::North);
                let residual = *q0 - n0.to_qtensor(1.0);
                (0..n)
                    .map(|k| {
                        let t = grid.t(k);
                        let m = path.at(t);
                        let q = crate::qtensor::rotate_z(&m.to_qtensor(1.0), phi0);
                        q + residual * (-kappa() * t).exp()
                    })
                    .collect()
            }
            ProfileInit::ConstantJump => (0..n)
                .map(|k| if grid.t(k) < 1.0 / kappa() { *q0 } else { qinf })
                .collect(),
        };
        v[0] = *q0;
        v[n - 1] = qinf;
        v
    }
}

/// Discrete layer functional (trapezoid rule, forward differences) and its
/// gradient with respect to every node.
pub fn profile_energy(values: &[QTensor], h: f64, lambda: f64, reg_delta: f64) -> (f64, Vec<QTensor>) {
    let n = values.len();
    let mut grad = vec![QTensor::ZERO; n];
    let e = profile_energy_into(values, h, lambda, reg_delta, &mut grad);
    (e, grad)
}

fn profile_energy_into(values: &[QTensor], h: f64, lambda: f64, reg_delta: f64, grad: &mut [QTensor]) -> f64 {
    let n = values.len();
    let l2 = lambda * lambda;
    let mut e = 0.0;
    for g in grad.iter_mut() {
        *g = QTensor::ZERO;
    }
    for k in 0..n - 1 {
        let d = values[k + 1] - values[k];
        e += 0.5 * d.norm_sq() / h;
        let gd = d * (1.0 / h);
        grad[k + 1] += gd;
        grad[k] -= gd;
    }
    for k in 0..n {
        let w = if k == 0 || k == n - 1 { 0.5 * h } else { h };
        let (fv, fg) = nematic_potential(&values[k]);
        let (gv, gg) = field_potential(&values[k], reg_delta);
        e += w * (l2 * fv + gv);
        grad[k] += (fg * l2 + gg) * w;
    }
    e
}

/// A minimized layer profile.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileResult {
    pub grid: ProfileGrid,
    pub lambda: f64,
    pub values: Vec<QTensor>,
    pub energy: f64,
    /// Infinity norm of the discrete gradient at the returned state.
    pub grad_norm: f64,
    pub d_lambda: f64,
    pub iterations: usize,
    pub init: ProfileInit,
}

impl ProfileResult {
    /// Linear interpolation in `t`; `Q_inf` beyond the truncation length.
    pub fn sample(&self, t: f64) -> QTensor {
        if t <= 0.0 {
            return self.values[0];
        }
        if t >= self.grid.length {
            return QTensor::infinity();
        }
        let x = t / self.grid.spacing();
        let k = (x.floor() as usize).min(self.grid.nodes - 2);
        let s = x - k as f64;
        self.values[k] * (1.0 - s) + self.values[k + 1] * s
    }
}

fn profile_options() -> LbfgsOptions {
    LbfgsOptions {
        memory: 20,
        max_iter: 200_000,
        grad_tol: 1e-8,
        ..Default::default()
    }
}

/// Gradient of the node potential `lambda^2 f + g`.
fn local_gradient(q: &QTensor, l2: f64, reg_delta: f64) -> Vector5<f64> {
    let g = nematic_potential(q).1 * l2 + field_potential(q, reg_delta).1;
    Vector5::from_column_slice(&g.0)
}

/// Hessian of the node potential by central differences of its gradient.
fn local_hessian(q: &QTensor, l2: f64, reg_delta: f64) -> Matrix5<f64> {
    let step = 1e-5 * q.norm().max(1.0);
    let mut h = Matrix5::zeros();
    for i in 0..5 {
        let (mut a, mut b) = (*q, *q);
        a.0[i] += step;
        b.0[i] -= step;
        let col = (local_gradient(&a, l2, reg_delta) - local_gradient(&b, l2, reg_delta)) / (2.0 * step);
        h.set_column(i, &col);
    }
    (h + h.transpose()) * 0.5
}

/// Solves the block-tridiagonal system with diagonal blocks `diag` and
/// off-diagonal blocks `-c I`. Returns `None` unless the matrix is positive
/// definite.
fn block_tridiagonal_solve(diag: &[Matrix5<f64>], c: f64, rhs: &[Vector5<f64>]) -> Option<Vec<Vector5<f64>>> {
    let m = diag.len();
    let mut chol = Vec::with_capacity(m);
    let mut y = Vec::with_capacity(m);
    for k in 0..m {
        let (s, yk) = if k == 0 {
            (diag[0], rhs[0])
        } else {
            let prev: &nalgebra::Cholesky<f64, nalgebra::U5> = &chol[k - 1];
            (diag[k] - prev.inverse() * (c * c), rhs[k] + prev.solve(&y[k - 1]) * c)
        };
        chol.push(nalgebra::Cholesky::new(s)?);
        y.push(yk);
    }
    let mut x = vec![Vector5::zeros(); m];
    x[m - 1] = chol[m - 1].solve(&y[m - 1]);
    for k in (0..m - 1).rev() {
        x[k] = chol[k].solve(&(y[k] + x[k + 1] * c));
    }
    Some(x)
}

/// Damped Newton iteration on the interior nodes of `values`, with a
/// Levenberg shift whenever the Hessian is indefinite or a step fails.
fn newton_profile(values: &mut [QTensor], h: f64, lambda: f64, tol: f64, max_iter: usize) -> (bool, usize, f64, f64) {
    let n = values.len();
    let l2 = lambda * lambda;
    let c = 1.0 / h;
    let scale = 2.0 * c;
    let mut grad = vec![QTensor::ZERO; n];
    let mut trial_grad = vec![QTensor::ZERO; n];
    let mut e = profile_energy_into(values, h, lambda, DEFAULT_REG_DELTA, &mut grad);
    // rounding level of the energy: every node adds O(1) terms scaled by lambda^2 h
    let noise = 1e-15 * ((1.0 + l2) * h * n as f64 + e.abs());
    let mut mu = 0.0;
    let mut trial = values.to_vec();
    for it in 0..max_iter {
        let ginf = grad[1..n - 1].iter().fold(0.0f64, |m, g| m.max(g.max_abs()));
        if ginf < tol * e.abs().max(1.0) {
            return (true, it, e, ginf);
        }
        if !e.is_finite() {
            return (false, it, e, ginf);
        }
        let hloc: Vec<Matrix5<f64>> = values[1..n - 1]
            .iter()
            .map(|q| local_hessian(q, l2, DEFAULT_REG_DELTA) * h + Matrix5::identity() * scale)
            .collect();
        let rhs: Vec<Vector5<f64>> = grad[1..n - 1].iter().map(|g| -Vector5::from_column_slice(&g.0)).collect();
        let mut stepped = false;
        for _ in 0..60 {
            let shifted: Vec<Matrix5<f64>> = hloc.iter().map(|d| d + Matrix5::identity() * mu).collect();
            let Some(dir) = block_tridiagonal_solve(&shifted, c, &rhs) else {
                mu = (mu * 4.0).max(1e-8 * scale);
                continue;
            };
            let slope: f64 = dir.iter().zip(&rhs).map(|(d, r)| -d.dot(r)).sum();
            let mut alpha = 1.0;
            for _ in 0..30 {
                for (k, d) in dir.iter().enumerate() {
                    for i in 0..5 {
                        trial[k + 1].0[i] = values[k + 1].0[i] + alpha * d[i];
                    }
                }
                let e_new = profile_energy_into(&trial, h, lambda, DEFAULT_REG_DELTA, &mut trial_grad);
                let accept = if (e_new - e).abs() <= noise {
                    // energy change below rounding: judge by the gradient instead
                    trial_grad[1..n - 1].iter().fold(0.0f64, |m, g| m.max(g.max_abs())) < ginf
                } else {
                    e_new <= e + 1e-4 * alpha * slope
                };
                if e_new.is_finite() && accept {
                    values.copy_from_slice(&trial);
                    std::mem::swap(&mut grad, &mut trial_grad);
                    e = e_new;
                    stepped = true;
                    break;
                }
                alpha *= 0.5;
            }
            if stepped {
                mu = if alpha == 1.0 { mu / 4.0 } else { mu };
                if mu < 1e-10 * scale {
                    mu = 0.0;
                }
                break;
            }
            mu = (mu * 4.0).max(1e-6 * scale);
        }
        if !stepped {
            let ginf = grad[1..n - 1].iter().fold(0.0f64, |m, g| m.max(g.max_abs()));
            return (false, it, e, ginf);
        }
    }
    let ginf = grad[1..n - 1].iter().fold(0.0f64, |m, g| m.max(g.max_abs()));
    (ginf < tol * e.abs().max(1.0), max_iter, e, ginf)
}

/// Minimizes the discrete layer functional from a given starting profile:
/// damped Newton with the block-tridiagonal Hessian, continued by L-BFGS if
/// Newton stalls. The end values of `init` are overwritten with `Q0` and `Q_inf`.
pub fn minimize_profile_from(
    q0: &QTensor,
    lambda: f64,
    grid: &ProfileGrid,
    init: &[QTensor],
    kind: ProfileInit,
) -> Result<ProfileResult> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "lambda must be positive and finite, got {lambda}; use d_infinity for lambda = inf"
        )));
    }
    if init.len() != grid.nodes {
        return Err(Error::InvalidInput("initial profile length does not match grid".into()));
    }
    let n = grid.nodes;
    let h = grid.spacing();
    let mut full = init.to_vec();
    full[0] = *q0;
    full[n - 1] = QTensor::infinity();
    let opts = profile_options();
    let mut newton = full.clone();
    let (ok, iterations, energy, grad_norm) = newton_profile(&mut newton, h, lambda, opts.grad_tol, 200);
    if ok {
        return Ok(ProfileResult {
            grid: *grid,
            lambda,
            values: newton,
            energy,
            grad_norm,
            d_lambda: energy,
            iterations,
            init: kind,
        });
    }
    let x0: Vec<f64> = newton[1..n - 1].iter().flat_map(|q| q.0).collect();
    let mut grad = vec![QTensor::ZERO; n];
    let objective = |x: &[f64], g: &mut [f64]| {
        for (k, c) in x.chunks_exact(5).enumerate() {
            full[k + 1].0.copy_from_slice(c);
        }
        let e = profile_energy_into(&full, h, lambda, DEFAULT_REG_DELTA, &mut grad);
        for (k, c) in g.chunks_exact_mut(5).enumerate() {
            c.copy_from_slice(&grad[k + 1].0);
        }
        e
    };
    let m = lbfgs::minimize(&x0, objective, None, &opts);
    if !m.converged {
        return Err(Error::NotConverged {
            what: "layer profile",
            iterations: m.iterations,
            residual: m.grad_inf,
            energy: m.energy,
            best: m.x,
        });
    }
    let mut values = Vec::with_capacity(n);
    values.push(*q0);
    values.extend(m.x.chunks_exact(5).map(|c| QTensor([c[0], c[1], c[2], c[3], c[4]])));
    values.push(QTensor::infinity());
    Ok(ProfileResult {
        grid: *grid,
        lambda,
        values,
        energy: m.energy,
        grad_norm: m.grad_inf,
        d_lambda: m.energy,
        iterations: m.iterations,
        init: kind,
    })
}

/// `D_lambda(Q0)` on the given grid: the lowest converged energy over the three
/// default initializations.
pub fn minimize_profile(q0: &QTensor, lambda: f64, grid: &ProfileGrid) -> Result<ProfileResult> {
    minimize_profile_with(q0, lambda, grid, &ProfileInit::DEFAULTS, None)
}

/// Like [`minimize_profile`] over a chosen set of initializations plus an
/// optional warm start.
pub fn minimize_profile_with(
    q0: &QTensor,
    lambda: f64,
    grid: &ProfileGrid,
    inits: &[ProfileInit],
    warm: Option<&[QTensor]>,
) -> Result<ProfileResult> {
    let mut best: Option<ProfileResult> = None;
    let mut last_err = None;
    let mut candidates: Vec<(ProfileInit, Vec<QTensor>)> = inits
        .iter()
        .filter(|k| **k != ProfileInit::Warm)
        .map(|k| (*k, k.build(q0, grid)))
        .collect();
    if let Some(w) = warm {
        candidates.push((ProfileInit::Warm, w.to_vec()));
    }
    for (kind, init) in candidates {
        match minimize_profile_from(q0, lambda, grid, &init, kind) {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.energy < b.energy) {
                    best = Some(r);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match (best, last_err) {
        (Some(b), _) => Ok(b),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::InvalidInput("no initialization requested".into())),
    }
}

/// Terminal pole of a uniaxial heteroclinic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pole {
    North,
    South,
}

/// Closed-form minimizer of `int |n'|^2 + g(n)` in the x-z meridian starting
/// from `(sin theta, 0, cos theta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicPath {
    pub theta: f64,
    pub target: Pole,
}

/// `(n1, n3)` of the +e3 heteroclinic, written so that both `theta = 0` and
/// `theta = pi` evaluate without division by zero.
fn north_components(theta: f64, t: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    let x = (-kappa() * t).exp();
    let num = (1.0 + c) - x * (1.0 - c);
    let den = (1.0 + c) + x * (1.0 - c);
    let n3 = num / den;
    let n1 = 2.0 * s.abs() * x.sqrt() / den;
    (n1, n3)
}

impl GeodesicPath {
    pub fn new(theta: f64, target: Pole) -> Self {
        GeodesicPath { theta, target }
    }

    /// The cheaper of the two targets for this starting angle.
    pub fn optimal(theta: f64) -> Self {
        let target = if theta.cos() >= 0.0 { Pole::North } else { Pole::South };
        GeodesicPath { theta, target }
    }

    pub fn at(&self, t: f64) -> Director {
        match self.target {
            Pole::North => {
                let (n1, n3) = north_components(self.theta, t);
                Director([n1, 0.0, n3])
            }
            Pole::South => {
                let (n1, n3) = north_components(std::f64::consts::PI - self.theta, t);
                Director([n1, 0.0, -n3])
            }
        }
    }

    /// Analytic `dn/dt`.
    pub fn velocity(&self, t: f64) -> [f64; 3] {
        let k = 0.5 * kappa();
        let n = self.at(t);
        match self.target {
            Pole::North => [-k * n.z() * n.x(), 0.0, k * n.x() * n.x()],
            Pole::South => [k * n.z() * n.x(), 0.0, -k * n.x() * n.x()],
        }
    }

    /// Polar angle of the director, in `[0, pi]`.
    pub fn angle(&self, t: f64) -> f64 {
        let n = self.at(t);
        n.x().atan2(n.z())
    }

    /// Exact layer cost of the path.
    pub fn energy(&self) -> f64 {
        match self.target {
            Pole::North => kappa() * (1.0 - self.theta.cos()),
            Pole::South => kappa() * (1.0 + self.theta.cos()),
        }
    }
}

/// Director of the +e3 heteroclinic at time `t` from polar angle `theta`.
///
/// `theta = 0` gives the constant e3. `theta = pi` is the south pole, a
/// stationary point of the flow, and is rejected.
pub fn geodesic_heteroclinic(theta: f64, t: f64) -> Result<Director> {
    if !(0.0..=std::f64::consts::PI).contains(&theta) || !(t >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "need theta in [0, pi] and t >= 0, got theta={theta}, t={t}"
        )));
    }
    if (std::f64::consts::PI - theta).abs() < 1e-15 {
        return Err(Error::DegenerateAntipode);
    }
    Ok(GeodesicPath::new(theta, Pole::North).at(t))
}

/// `kappa (1 - |cos theta|)`.
pub fn d_infinity(theta: f64) -> f64 {
    kappa() * (1.0 - theta.cos().abs())
}

/// `g` on uniaxial tensors, as a function of the director.
pub fn field_potential_director(n: &Director) -> f64 {
    1.5f64.sqrt() * (1.0 - n.z() * n.z())
}

/// Discrete `int |n'|^2 + g(n)` with chord differences and trapezoid weights.
pub fn discrete_f_infinity(path: &[Director], h: f64) -> f64 {
    let n = path.len();
    let mut e = 0.0;
    for k in 0..n.saturating_sub(1) {
        e += path[k + 1].dist_sq(&path[k]) / h;
    }
    for (k, d) in path.iter().enumerate() {
        let w = if k == 0 || k + 1 == n { 0.5 * h } else { h };
        e += w * field_potential_director(d);
    }
    e
}

/// Projects each director onto the x-z meridian keeping `n3`, i.e.
/// `N = (sqrt(1 - n3^2), 0, n3)`. Never increases [`discrete_f_infinity`].
pub fn meridian_reduce(path: &[Director]) -> Vec<Director> {
    path.iter()
        .map(|n| {
            let z = n.z().clamp(-1.0, 1.0);
            Director([(1.0 - z * z).max(0.0).sqrt(), 0.0, z])
        })
        .collect()
}

/// `(lambda, D_lambda(Q0))` for sorted positive `lambdas`. Each solve also
/// tries the previous minimizer as a warm start.
pub fn d_lambda_curve(q0: &QTensor, lambdas: &[f64], grid: &ProfileGrid) -> Result<Vec<(f64, f64)>> {
    if lambdas.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidInput("lambdas must be sorted".into()));
    }
    let mut out = Vec::with_capacity(lambdas.len());
    let mut prev: Option<Vec<QTensor>> = None;
    for &lambda in lambdas {
        let r = minimize_profile_with(q0, lambda, grid, &ProfileInit::DEFAULTS, prev.as_deref())?;
        out.push((lambda, r.d_lambda));
        prev = Some(r.values);
    }
    Ok(out)
}

/// Outcome of a two-point Lipschitz probe of `Q0 -> D_lambda(Q0)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LipschitzProbe {
    pub d_a: f64,
    pub d_b: f64,
    pub ratio: f64,
    /// Sampled `sup_{|Q| <= M} (lambda^2 f + g)`.
    pub potential_sup: f64,
    /// `sqrt(potential_sup)`, twice the constant of the shift argument.
    pub bound: f64,
}

/// `|D(a) - D(b)| / |a - b|` together with the sampled bound.
pub fn d_lipschitz_probe(a: &QTensor, b: &QTensor, lambda: f64, grid: &ProfileGrid) -> Result<LipschitzProbe> {
    let gap = (*a - *b).norm();
    if gap < 1e-8 {
        return Err(Error::InvalidInput(format!("|Q0a - Q0b| = {gap:e} is too small for a stable ratio")));
    }
    let ra = minimize_profile(a, lambda, grid)?;
    let mut warm = ra.values.clone();
    warm[0] = *b;
    let rb = minimize_profile_with(b, lambda, grid, &ProfileInit::DEFAULTS, Some(&warm))?;
    // re-solve a from b's minimizer so both sit on the same branch
    let mut warm_a = rb.values.clone();
    warm_a[0] = *a;
    let ra2 = minimize_profile_from(a, lambda, grid, &warm_a, ProfileInit::Warm)?;
    let d_a = ra.d_lambda.min(ra2.d_lambda);
    let d_b = rb.d_lambda;
    let radius = a.norm().max(b.norm());
    let potential_sup = sampled_potential_sup(lambda, radius);
    Ok(LipschitzProbe {
        d_a,
        d_b,
        ratio: (d_a - d_b).abs() / gap,
        potential_sup,
        bound: potential_sup.sqrt(),
    })
}

/// `max (lambda^2 f + g)` over random tensors with `|Q| <= radius`, including
/// samples on the sphere `|Q| = radius`.
pub fn sampled_potential_sup(lambda: f64, radius: f64) -> f64 {
    let l2 = lambda * lambda;
    let ball = sample_ball(QTensor::ZERO, radius, 20_000, 0x5eed);
    let sphere = ball.iter().filter(|q| q.norm() > 0.0).map(|q| *q * (radius / q.norm()));
    ball.iter()
        .copied()
        .chain(sphere)
        .map(|q| l2 * nematic_potential(&q).0 + field_potential(&q, DEFAULT_REG_DELTA).0)
        .fold(0.0f64, f64::max)
}

/// `int_{S^2} D_lambda(Q_b(omega)) dH^2` by Gauss-Legendre in `cos theta` on
/// the upper hemisphere, doubled by mirror symmetry. Returns the value and the
/// per-node samples `(theta, D)`.
pub fn sphere_integral_d_lambda(lambda: f64, nodes: usize, grid: &ProfileGrid) -> Result<(f64, Vec<(f64, f64)>)> {
    let hemi = hemisphere_integral_d_lambda(lambda, nodes, grid)?;
    Ok((2.0 * hemi.0, hemi.1))
}

/// `2 pi int_0^{pi/2} D_lambda(Q_b(theta, 0)) sin theta dtheta`.
pub fn hemisphere_integral_d_lambda(lambda: f64, nodes: usize, grid: &ProfileGrid) -> Result<(f64, Vec<(f64, f64)>)> {
    use rayon::prelude::*;
    let rule = gauss_legendre(nodes, 0.0, 1.0);
    let samples: Vec<Result<(f64, f64, f64)>> = rule
        .par_iter()
        .map(|&(x, w)| {
            let theta = x.acos();
            let q0 = crate::qtensor::boundary_tensor(theta, 0.0);
            minimize_profile(&q0, lambda, grid).map(|r| (theta, r.d_lambda, w))
        })
        .collect();
    let mut total = 0.0;
    let mut table = Vec::with_capacity(nodes);
    for s in samples {
        let (theta, d, w) = s?;
        total += w * d;
        table.push((theta, d));
    }
    Ok((2.0 * std::f64::consts::PI * total, table))
}

/// JSON sidecar of a profile dump.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ProfileSidecar {
    pub theta: Option<f64>,
    pub lambda: f64,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "N")]
    pub nodes: usize,
    pub energy: f64,
}

/// Writes `<stem>.csv` (`t,q1,q2,q3,q4,q5`) and `<stem>.json`.
pub fn write_profile(dir: &Path, stem: &str, result: &ProfileResult, theta: Option<f64>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut csv = String::from("t,q1,q2,q3,q4,q5\n");
    for (k, q) in result.values.iter().enumerate() {
        csv.push_str(&fmt17(result.grid.t(k)));
        for c in q.0 {
            csv.push(',');
            csv.push_str(&fmt17(c));
        }
        csv.push('\n');
    }
    fs::File::create(dir.join(format!("{stem}.csv")))?.write_all(csv.as_bytes())?;
    let side = ProfileSidecar {
        theta,
        lambda: result.lambda,
        length: result.grid.length,
        nodes: result.grid.nodes,
        energy: result.energy,
    };
    let mut f = fs::File::create(dir.join(format!("{stem}.json")))?;
    serde_json::to_writer_pretty(&mut f, &side)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Reads back the CSV written by [`write_profile`].
pub fn read_profile_csv(path: &Path) -> Result<Vec<(f64, QTensor)>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<f64> = line
            .split(',')
            .map(|c| c.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidInput(format!("line {}: {e}", lineno + 1)))?;
        if cols.len() != 6 {
            return Err(Error::InvalidInput(format!("line {}: expected 6 columns", lineno + 1)));
        }
        out.push((cols[0], QTensor([cols[1], cols[2], cols[3], cols[4], cols[5]])));
    }
    Ok(out)
}
