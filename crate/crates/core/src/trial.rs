//! Explicit competitor fields: the finite-`lambda` piecewise construction
//! mollified in `theta`, and the `lambda = inf` Saturn-ring construction built
//! from heteroclinics, an interpolated sector and a Ginzburg-Landau core.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::axisym::{energy, ray_lower_bound, AxiField, AxiGrid, AxiGridSpec};
use crate::error::{Error, Result};
use crate::lbfgs::{self, LbfgsOptions};
use crate::profile::{kappa, minimize_profile, GeodesicPath, Pole, ProfileGrid, ProfileResult};
use crate::qtensor::{boundary_tensor, Director, ModelParams, QTensor};
use crate::util::fmt17;

// ---------------------------------------------------------------------------
// complex order parameter

/// The matrix
///
/// ```text
/// [ u1/sqrt6 + 1/3    0     u2/sqrt6       ]
/// [ 0               -2/3    0              ]
/// [ u2/sqrt6          0     1/3 - u1/sqrt6 ]
/// ```
///
/// Satisfies `|grad Q|^2 = |grad u|^2 / 3`. Its `e2 e2` entry is `-2/3`, so it
/// is never a minimizer of `f`; see [`embed_complex_uniaxial`].
pub fn embed_complex(u: Complex64) -> QTensor {
    let a = 1.0 / 6f64.sqrt();
    let m = nalgebra::Matrix3::new(
        a * u.re + 1.0 / 3.0,
        0.0,
        a * u.im,
        0.0,
        -2.0 / 3.0,
        0.0,
        a * u.im,
        0.0,
        1.0 / 3.0 - a * u.re,
    );
    QTensor::from_matrix(&m)
}

/// Embedding that agrees with uniaxial data `n n - I/3`, `n = (sin psi, 0, cos psi)`,
/// when `u = -exp(-2 i psi)`:
///
/// ```text
/// [ 1/6 + u1/2    0     u2/2       ]
/// [ 0           -1/3    0          ]
/// [ u2/2          0     1/6 - u1/2 ]
/// ```
///
/// Here `f = (3/16)(1 - |u|^2)^2` and `|grad Q|^2 / 2 = |grad u|^2 / 4`, so the
/// core energy is `3/2` times the Ginzburg-Landau energy
/// `int |grad u|^2/6 + (1 - |u|^2)^2 / (2 (2 eps)^2)`.
pub fn embed_complex_uniaxial(u: Complex64) -> QTensor {
    let m = nalgebra::Matrix3::new(
        1.0 / 6.0 + 0.5 * u.re,
        0.0,
        0.5 * u.im,
        0.0,
        -1.0 / 3.0,
        0.0,
        0.5 * u.im,
        0.0,
        1.0 / 6.0 - 0.5 * u.re,
    );
    QTensor::from_matrix(&m)
}

/// `u` representing the meridian director of angle `psi` under [`embed_complex_uniaxial`].
pub fn phase_to_u(psi: f64) -> Complex64 {
    -Complex64::from_polar(1.0, -2.0 * psi)
}

// ---------------------------------------------------------------------------
// Ginzburg-Landau patch

/// Complex field on the square `[-a, a]^2` with `n x n` nodes; node `(is, it)`
/// sits at `s = -a + is h`, `tau = -a + it h` and is stored at `it * n + is`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SquarePatch {
    pub n: usize,
    pub half_width: f64,
    pub eps: f64,
    pub u: Vec<Complex64>,
}

impl SquarePatch {
    /// Patch with `u = boundary(s, tau)` on the edges. The interior starts from
    /// the boundary value along rays from the centre, damped by
    /// `tanh(rho / eps)` when the boundary data winds.
    pub fn with_boundary(
        n: usize,
        half_width: f64,
        eps: f64,
        boundary: impl Fn(f64, f64) -> Complex64,
    ) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidInput(format!("patch needs at least 3 nodes per side, got {n}")));
        }
        if !(eps > 0.0 && eps <= 1.0) || !(half_width > 0.0) {
            return Err(Error::InvalidInput(format!("need 0 < eps <= 1 and a > 0, got eps={eps}, a={half_width}")));
        }
        let mut p = SquarePatch {
            n,
            half_width,
            eps,
            u: vec![Complex64::new(0.0, 0.0); n * n],
        };
        for it in 0..n {
            for is in 0..n {
                if p.on_boundary(is, it) {
                    p.u[it * n + is] = boundary(p.coord(is), p.coord(it));
                }
            }
        }
        let winds = p.boundary_degree() != 0;
        for it in 1..n - 1 {
            for is in 1..n - 1 {
                let (s, t) = (p.coord(is), p.coord(it));
                let m = s.abs().max(t.abs());
                let (bs, bt) = if m > 0.0 {
                    (s / m * half_width, t / m * half_width)
                } else {
                    (half_width, 0.0)
                };
                let mut v = boundary(bs, bt);
                if winds {
                    v *= ((s * s + t * t).sqrt() / eps).tanh();
                }
                p.u[it * n + is] = v;
            }
        }
        Ok(p)
    }

    /// `u = conj(z)/|z|` on `[-1/2, 1/2]^2`.
    pub fn canonical(n: usize, eps: f64) -> Result<Self> {
        Self::with_boundary(n, 0.5, eps, |s, t| Complex64::new(s, -t) / (s * s + t * t).sqrt())
    }

    /// Node count giving about `cells_per_eps` cells per `eps` (at least 16 cells).
    pub fn nodes_for(half_width: f64, eps: f64, cells_per_eps: f64) -> usize {
        let cells = ((2.0 * half_width * cells_per_eps / eps).ceil() as usize).max(16);
        cells + cells % 2 + 1
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }

    pub fn coord(&self, k: usize) -> f64 {
        if k + 1 == self.n {
            self.half_width
        } else {
            -self.half_width + k as f64 * self.h()
        }
    }

    pub fn on_boundary(&self, is: usize, it: usize) -> bool {
        is == 0 || it == 0 || is + 1 == self.n || it + 1 == self.n
    }

    pub fn at(&self, is: usize, it: usize) -> Complex64 {
        self.u[it * self.n + is]
    }

    /// Boundary nodes counterclockwise from the bottom-left corner.
    fn boundary_loop(&self) -> Vec<(usize, usize)> {
        let n = self.n;
        let mut v = Vec::with_capacity(4 * (n - 1));
        for is in 0..n - 1 {
            v.push((is, 0));
        }
        for it in 0..n - 1 {
            v.push((n - 1, it));
        }
        for is in (1..n).rev() {
            v.push((is, n - 1));
        }
        for it in (1..n).rev() {
            v.push((0, it));
        }
        v
    }

    /// Winding number of `u` along the boundary, counterclockwise in `(s, tau)`.
    pub fn boundary_degree(&self) -> i32 {
        let lp = self.boundary_loop();
        let mut total = 0.0;
        for k in 0..lp.len() {
            let a = self.at(lp[k].0, lp[k].1);
            let b = self.at(lp[(k + 1) % lp.len()].0, lp[(k + 1) % lp.len()].1);
            total += (b / a).arg();
        }
        (total / (2.0 * PI)).round() as i32
    }

    /// Cells around which `u` winds, with their winding numbers.
    pub fn vortex_cells(&self) -> Vec<(usize, usize, i32)> {
        let mut out = Vec::new();
        for it in 0..self.n - 1 {
            for is in 0..self.n - 1 {
                let c = [self.at(is, it), self.at(is + 1, it), self.at(is + 1, it + 1), self.at(is, it + 1)];
                let w: f64 = (0..4).map(|k| (c[(k + 1) % 4] / c[k]).arg()).sum();
                let d = (w / (2.0 * PI)).round() as i32;
                if d != 0 {
                    out.push((is, it, d));
                }
            }
        }
        out
    }

    /// Bilinear interpolation; points outside the square are clamped onto it.
    pub fn sample(&self, s: f64, tau: f64) -> Complex64 {
        let h = self.h();
        let xs = ((s + self.half_width) / h).clamp(0.0, (self.n - 1) as f64);
        let xt = ((tau + self.half_width) / h).clamp(0.0, (self.n - 1) as f64);
        let is = (xs.floor() as usize).min(self.n - 2);
        let it = (xt.floor() as usize).min(self.n - 2);
        let (a, b) = (xs - is as f64, xt - it as f64);
        self.at(is, it) * ((1.0 - a) * (1.0 - b))
            + self.at(is + 1, it) * (a * (1.0 - b))
            + self.at(is, it + 1) * ((1.0 - a) * b)
            + self.at(is + 1, it + 1) * (a * b)
    }

    /// Writes `s,tau,u1,u2`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut out = String::from("s,tau,u1,u2\n");
        for it in 0..self.n {
            for is in 0..self.n {
                let u = self.at(is, it);
                out.push_str(&format!("{},{},{},{}\n", fmt17(self.coord(is)), fmt17(self.coord(it)), fmt17(u.re), fmt17(u.im)));
            }
        }
        fs::File::create(path)?.write_all(out.as_bytes())?;
        Ok(())
    }
}

/// Discrete `int |grad u|^2/6 + (1 - |u|^2)^2/(2 eps^2)`: edge differences and
/// trapezoid weights for the potential. The gradient covers every node.
pub fn gl_energy(patch: &SquarePatch) -> (f64, Vec<Complex64>) {
    let mut grad = vec![Complex64::new(0.0, 0.0); patch.u.len()];
    let e = gl_energy_into(&patch.u, patch.n, patch.h(), patch.eps, &mut grad);
    (e, grad)
}

fn gl_energy_into(u: &[Complex64], n: usize, h: f64, eps: f64, grad: &mut [Complex64]) -> f64 {
    let c = 1.0 / 6.0;
    let pot = h * h / (2.0 * eps * eps);
    grad.iter_mut().for_each(|g| *g = Complex64::new(0.0, 0.0));
    let mut e = 0.0;
    for it in 0..n {
        for is in 0..n {
            let k = it * n + is;
            if is + 1 < n {
                let d = u[k + 1] - u[k];
                e += c * d.norm_sqr();
                grad[k + 1] += d * (2.0 * c);
                grad[k] -= d * (2.0 * c);
            }
            if it + 1 < n {
                let d = u[k + n] - u[k];
                e += c * d.norm_sqr();
                grad[k + n] += d * (2.0 * c);
                grad[k] -= d * (2.0 * c);
            }
            let wx = if is == 0 || is + 1 == n { 0.5 } else { 1.0 };
            let wy = if it == 0 || it + 1 == n { 0.5 } else { 1.0 };
            let w = wx * wy * pot;
            let m = 1.0 - u[k].norm_sqr();
            e += w * m * m;
            grad[k] += u[k] * (-4.0 * w * m);
        }
    }
    e
}

/// Minimized Ginzburg-Landau core.
#[derive(Clone, Debug)]
pub struct GlSolution {
    pub patch: SquarePatch,
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Minimizes the discrete Ginzburg-Landau energy with the patch's boundary
/// values held fixed, starting from its interior values.
pub fn gl_core_minimize(patch: &SquarePatch) -> Result<GlSolution> {
    let n = patch.n;
    let h = patch.h();
    let interior: Vec<usize> = (0..n * n)
        .filter(|&k| !patch.on_boundary(k % n, k / n))
        .collect();
    let x0: Vec<f64> = interior.iter().flat_map(|&k| [patch.u[k].re, patch.u[k].im]).collect();
    let diag = 1.0 / (4.0 / 3.0 + 2.0 * h * h / (patch.eps * patch.eps));
    let precond = vec![diag; x0.len()];
    let mut u = patch.u.clone();
    let mut grad = vec![Complex64::new(0.0, 0.0); n * n];
    let objective = |x: &[f64], g: &mut [f64]| {
        for (slot, &k) in interior.iter().enumerate() {
            u[k] = Complex64::new(x[2 * slot], x[2 * slot + 1]);
        }
        let e = gl_energy_into(&u, n, h, patch.eps, &mut grad);
        for (slot, &k) in interior.iter().enumerate() {
            g[2 * slot] = grad[k].re;
            g[2 * slot + 1] = grad[k].im;
        }
        e
    };
    let opts = LbfgsOptions {
        memory: 20,
        max_iter: 100_000,
        grad_tol: 1e-8,
        ..Default::default()
    };
    let m = lbfgs::minimize(&x0, objective, Some(&precond), &opts);
    if !m.converged {
        return Err(Error::NotConverged {
            what: "Ginzburg-Landau core",
            iterations: m.iterations,
            residual: m.grad_inf,
            energy: m.energy,
            best: m.x,
        });
    }
    let mut out = patch.clone();
    for (slot, &k) in interior.iter().enumerate() {
        out.u[k] = Complex64::new(m.x[2 * slot], m.x[2 * slot + 1]);
    }
    Ok(GlSolution {
        patch: out,
        energy: m.energy,
        residual: m.grad_inf,
        iterations: m.iterations,
    })
}

// ---------------------------------------------------------------------------
// Saturn-ring construction

/// Part of the upper cross-section a point belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// `theta <= pi/2 - eta`: heteroclinic rays.
    Heteroclinic,
    /// `r >= 1 + 2 eta`, `theta > pi/2 - eta`: interpolated sector.
    Sector,
    /// Square annulus `1/2 <= max(|s|, |tau|) <= 1`.
    Annulus,
    /// `max(|s|, |tau|) < 1/2`: Ginzburg-Landau core.
    Core,
}

/// Region of `(r, theta)` after folding `theta` into the upper half.
pub fn classify(r: f64, theta: f64, eta: f64) -> Region {
    let th = if theta > PI / 2.0 { PI - theta } else { theta };
    let t = (r - 1.0) / eta;
    let tau = (PI / 2.0 - th) / eta;
    if tau >= 1.0 {
        Region::Heteroclinic
    } else if t >= 2.0 {
        Region::Sector
    } else if (t - 1.0).abs().max(tau.abs()) >= 0.5 {
        Region::Annulus
    } else {
        Region::Core
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SaturnOptions {
    /// Core patch resolution in cells per core length.
    pub gl_cells_per_eps: f64,
    /// Minimal number of grid cells across `2 eta` in `r` and in `theta`.
    pub min_cells: usize,
}

impl Default for SaturnOptions {
    fn default() -> Self {
        SaturnOptions {
            gl_cells_per_eps: 6.0,
            min_cells: 16,
        }
    }
}

/// The Saturn-ring competitor as a function of `(r, theta)`.
#[derive(Clone, Debug)]
pub struct SaturnMap {
    pub params: ModelParams,
    /// Core solution on `[-1/2, 1/2]^2` for the parameter `2 xi/eta`.
    pub core: GlSolution,
}

impl SaturnMap {
    pub fn new(params: &ModelParams, opts: &SaturnOptions) -> Result<Self> {
        let eps = params.xi / params.eta;
        if !(eps <= 0.5) {
            return Err(Error::InvalidInput(format!("saturn trial needs xi/eta <= 0.5, got {eps}")));
        }
        let eps_core = 2.0 * eps;
        let n = SquarePatch::nodes_for(0.5, eps_core, opts.gl_cells_per_eps);
        let patch = SquarePatch::with_boundary(n, 0.5, eps_core, |s, t| {
            phase_to_u(boundary_phase(2.0 * s, 2.0 * t, None))
        })?;
        let core = gl_core_minimize(&patch)?;
        Ok(SaturnMap { params: *params, core })
    }

    pub fn eps(&self) -> f64 {
        self.params.xi / self.params.eta
    }

    /// Field value at `(r, theta)`; the lower half is the mirror image of the upper.
    pub fn value(&self, r: f64, theta: f64) -> QTensor {
        if theta > PI / 2.0 {
            return self.value_upper(r, PI - theta).reflect_z();
        }
        self.value_upper(r, theta)
    }

    fn value_upper(&self, r: f64, theta: f64) -> QTensor {
        let eta = self.params.eta;
        let t = (r - 1.0) / eta;
        let tau = (PI / 2.0 - theta) / eta;
        match classify(r, theta, eta) {
            Region::Heteroclinic => GeodesicPath::new(theta, Pole::North).at(t).to_qtensor(1.0),
            Region::Sector => {
                let psi = sector_angle(t, Some(eta)) * tau;
                Director::meridian(psi).to_qtensor(1.0)
            }
            Region::Annulus => {
                let s = t - 1.0;
                let m = s.abs().max(tau.abs());
                let (bs, bt) = (s / m, tau / m);
                let psi = (2.0 * m - 1.0) * boundary_phase(bs, bt, Some(eta))
                    + (2.0 - 2.0 * m) * boundary_phase(bs, bt, None);
                Director::meridian(psi).to_qtensor(1.0)
            }
            Region::Core => embed_complex_uniaxial(self.core.patch.sample(t - 1.0, tau)),
        }
    }
}

/// Polar angle of the heteroclinic from `pi/2 - eta` (or its `eta -> 0`
/// limit from `pi/2` when `eta` is `None`).
pub fn sector_angle(t: f64, eta: Option<f64>) -> f64 {
    let theta0 = PI / 2.0 - eta.unwrap_or(0.0);
    GeodesicPath::new(theta0, Pole::North).angle(t)
}

/// Lifted director phase on the boundary of the square `[-1, 1]^2`
/// (`max(|s|, |tau|) = 1`), counterclockwise from the cut at `(1, 0+)`.
///
/// The right edge carries `tau Phi(2)` above the cut and `pi + tau Phi(2)` below,
/// which is the mirror image of the sector values; the jump of `pi` at the cut
/// is invisible in the tensor. `eta = None` gives the `eta -> 0` data.
pub fn boundary_phase(s: f64, tau: f64, eta: Option<f64>) -> f64 {
    let e = eta.unwrap_or(0.0);
    if s >= tau.abs() {
        let phi2 = sector_angle(2.0, eta);
        if tau >= 0.0 {
            tau * phi2
        } else {
            PI + tau * phi2
        }
    } else if tau >= s.abs() {
        sector_angle(s + 1.0, eta)
    } else if -s >= tau.abs() {
        PI / 2.0 - e * tau
    } else {
        PI - sector_angle(s + 1.0, eta)
    }
}

/// A built Saturn trial.
#[derive(Clone, Debug)]
pub struct SaturnTrial {
    pub field: AxiField,
    pub map: SaturnMap,
}

/// Checks that the grid puts at least `min_cells` cells across `2 eta` in both directions.
pub fn check_resolution(grid: &AxiGrid, eta: f64, min_cells: usize) -> Result<()> {
    let radial = grid.r.iter().filter(|&&r| r <= 1.0 + 2.0 * eta + 1e-12).count().saturating_sub(1);
    let polar = (2.0 * eta / grid.dtheta + 1e-9).floor() as usize;
    if radial < min_cells || polar < min_cells {
        return Err(Error::RejectedGrid(format!(
            "region 3 has {radial} radial and {polar} polar cells across 2 eta; need {min_cells}"
        )));
    }
    Ok(())
}

/// Saturn trial on the default grid for `params`.
pub fn build_saturn_trial(params: &ModelParams) -> Result<SaturnTrial> {
    let grid = Arc::new(AxiGrid::for_params(params)?);
    build_saturn_trial_on(grid, params, &SaturnOptions::default())
}

/// Saturn trial sampled at the nodes of `grid`. The upper half is evaluated
/// and the lower half filled by exact reflection.
pub fn build_saturn_trial_on(grid: Arc<AxiGrid>, params: &ModelParams, opts: &SaturnOptions) -> Result<SaturnTrial> {
    check_resolution(&grid, params.eta, opts.min_cells)?;
    let map = SaturnMap::new(params, opts)?;
    let nt = grid.ntheta();
    let half = nt / 2;
    let rows: Vec<Vec<QTensor>> = (0..grid.nr())
        .into_par_iter()
        .map(|i| {
            let mut row = vec![QTensor::ZERO; nt];
            for j in 0..half {
                row[j] = map.value_upper(grid.r[i], grid.theta[j]);
            }
            for j in half..nt {
                row[j] = row[nt - 1 - j].reflect_z();
            }
            row
        })
        .collect();
    let mut field = AxiField {
        grid,
        values: rows.into_iter().flatten().collect(),
    };
    field.enforce_boundary();
    Ok(SaturnTrial { field, map })
}

/// Grid for the Saturn trial with roughly square cells of size `xi/3` in the
/// layer: `n_theta` is raised until `dtheta <= xi/3`.
pub fn saturn_fine_grid_spec(params: &ModelParams) -> AxiGridSpec {
    let mut spec = AxiGridSpec::for_params(params);
    let needed = (3.0 * PI / params.xi).ceil() as usize;
    spec.n_theta = spec.n_theta.max(needed.div_ceil(64) * 64);
    spec
}

// ---------------------------------------------------------------------------
// finite-lambda construction

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialMode {
    FiniteLambda,
    Saturn,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TrialSpec {
    pub mode: TrialMode,
    /// Partition width in `theta` (finite-lambda mode).
    pub h: f64,
    /// Half-width of the mollifier in `theta` (finite-lambda mode).
    pub eps_mollify: f64,
    pub params: ModelParams,
}

impl TrialSpec {
    pub fn validate(&self) -> Result<()> {
        if self.mode == TrialMode::FiniteLambda {
            if !(self.h > 0.0 && self.h <= PI / 4.0 + 1e-12) {
                return Err(Error::RejectedSpec(format!("h must lie in (0, pi/4], got {}", self.h)));
            }
            if !(self.eps_mollify > 0.0 && self.eps_mollify < self.h / 2.0) {
                return Err(Error::RejectedSpec(format!(
                    "mollifier width {} does not fit in the partition (need 0 < eps < h/2 = {})",
                    self.eps_mollify,
                    self.h / 2.0
                )));
            }
        }
        Ok(())
    }
}

/// Raised-cosine kernel on `[-1, 1]`.
pub fn mollifier(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        0.5 * (1.0 + (PI * x).cos())
    }
}

/// Integral of [`mollifier`] from `-1` to `x`.
pub fn mollifier_cdf(x: f64) -> f64 {
    if x <= -1.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        0.5 * (x + 1.0) + (PI * x).sin() / (2.0 * PI)
    }
}

/// Accounting of a finite-lambda trial. Energies are scaled by `eta`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FiniteLambdaReport {
    pub partition: Vec<f64>,
    /// Profile energies `D_lambda(Q_b(theta_k))` at the left ends of active intervals.
    pub node_values: Vec<f64>,
    /// Solid angle of the two caps.
    pub cap_measure: f64,
    /// `2 pi sum_k dtheta_k D_k sin(theta_k)` over active intervals.
    pub riemann_sum: f64,
    /// Bound on `|riemann_sum - 2 pi int D_lambda sin|`: total variation of
    /// the sampled integrand times the mesh width, plus the caps at `D <= D_inf`.
    pub riemann_budget: f64,
    /// `eta` times the polar elastic energy, which the mollifier creates.
    pub mollifier_budget: f64,
    /// `eta E - ray_lower_bound` for the relaxed field: every angular and
    /// metric term that the `xi -> 0` limit discards (includes the mollifier part).
    pub angular_budget: f64,
    /// `|ray_lower_bound - riemann_sum|`.
    pub profile_budget: f64,
    /// `riemann_budget + angular_budget + profile_budget`.
    pub sigma_budget: f64,
    /// `eta E` of the construction with its own `r = 1` values.
    pub relaxed_eta_energy: f64,
    /// `eta E` after restoring `Q_b` on `r = 1`.
    pub eta_energy: f64,
}

/// A built finite-lambda trial.
#[derive(Clone, Debug)]
pub struct FiniteLambdaTrial {
    /// Construction with the exact boundary rows.
    pub field: AxiField,
    /// Construction with its own `r = 1` row (the relaxed competitor).
    pub relaxed: AxiField,
    pub report: FiniteLambdaReport,
}

/// Builds the finite-lambda trial with the uniform partition of width about
/// `spec.h`; layer profiles are computed on `profile_grid`.
pub fn build_finite_lambda_trial(
    spec: &TrialSpec,
    grid: Arc<AxiGrid>,
    profile_grid: &ProfileGrid,
) -> Result<FiniteLambdaTrial> {
    if spec.mode != TrialMode::FiniteLambda {
        return Err(Error::RejectedSpec("mode must be finite-lambda".into()));
    }
    spec.validate()?;
    let intervals = (PI / spec.h).ceil() as usize;
    let partition: Vec<f64> = (0..=intervals).map(|k| k as f64 * PI / intervals as f64).collect();
    let lambda = spec.params.lambda();
    let profiles: Vec<Option<ProfileResult>> = (0..intervals)
        .into_par_iter()
        .map(|k| {
            if k == 0 || k + 1 == intervals {
                Ok(None)
            } else {
                minimize_profile(&boundary_tensor(partition[k], 0.0), lambda, profile_grid).map(Some)
            }
        })
        .collect::<Result<_>>()?;
    assemble_finite_lambda(&spec.params, grid, &partition, &profiles, spec.eps_mollify)
}

/// Assembles the mollified piecewise field from an explicit partition
/// `0 = theta_0 < ... < theta_I = pi` and one profile per interval (`None`
/// marks a cap, filled with `Q_inf`).
pub fn assemble_finite_lambda(
    params: &ModelParams,
    grid: Arc<AxiGrid>,
    partition: &[f64],
    profiles: &[Option<ProfileResult>],
    eps_mollify: f64,
) -> Result<FiniteLambdaTrial> {
    let intervals = partition.len().saturating_sub(1);
    if intervals < 2 || partition[0] != 0.0 || (partition[intervals] - PI).abs() > 1e-12 {
        return Err(Error::RejectedSpec("partition must run from 0 to pi with at least two intervals".into()));
    }
    if profiles.len() != intervals {
        return Err(Error::RejectedSpec("need one profile slot per interval".into()));
    }
    if profiles[0].is_some() || profiles[intervals - 1].is_some() {
        return Err(Error::RejectedSpec("the first and last intervals are caps".into()));
    }
    let min_width = partition.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if !(eps_mollify > 0.0 && eps_mollify < min_width / 2.0) {
        return Err(Error::RejectedSpec(format!(
            "mollifier width {eps_mollify} does not fit in the partition (smallest interval {min_width})"
        )));
    }
    let eta = params.eta;
    let qinf = QTensor::infinity();
    let nt = grid.ntheta();
    let weights: Vec<Vec<(usize, f64)>> = grid
        .theta
        .iter()
        .map(|&th| {
            (0..intervals)
                .filter_map(|k| {
                    let w = mollifier_cdf((th - partition[k]) / eps_mollify)
                        - mollifier_cdf((th - partition[k + 1]) / eps_mollify);
                    (w > 0.0).then_some((k, w))
                })
                .collect()
        })
        .collect();
    let value = |r: f64, j: usize| -> QTensor {
        let t = (r - 1.0) / eta;
        let mut q = QTensor::ZERO;
        let mut total = 0.0;
        for &(k, w) in &weights[j] {
            total += w;
            q += match &profiles[k] {
                Some(p) => p.sample(t),
                None => qinf,
            } * w;
        }
        // mass outside [0, pi] is Q_inf
        q + qinf * (1.0 - total)
    };
    let mut relaxed = AxiField {
        values: (0..grid.len()).map(|k| value(grid.r[k / nt], k % nt)).collect(),
        grid: grid.clone(),
    };
    let last = grid.nr() - 1;
    for j in 0..nt {
        relaxed.values[last * nt + j] = qinf;
    }
    let mut field = relaxed.clone();
    field.enforce_boundary();

    let node_values: Vec<f64> = profiles.iter().flatten().map(|p| p.d_lambda).collect();
    let mut riemann_sum = 0.0;
    let mut samples = vec![0.0];
    for k in 0..intervals {
        let v = profiles[k].as_ref().map_or(0.0, |p| p.d_lambda * partition[k].sin());
        riemann_sum += 2.0 * PI * (partition[k + 1] - partition[k]) * v;
        samples.push(v);
    }
    samples.push(0.0);
    let tv: f64 = samples.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let hmax = partition.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let cap_lo = partition[1];
    let cap_hi = PI - partition[intervals - 1];
    // 2 pi int_0^c kappa (1 - cos) sin = pi kappa (1 - cos c)^2
    let cap_integral = PI * kappa() * ((1.0 - cap_lo.cos()).powi(2) + (1.0 - cap_hi.cos()).powi(2));
    let riemann_budget = 2.0 * PI * hmax * tv + cap_integral;

    let eb = energy(&relaxed, params);
    let lb = ray_lower_bound(&relaxed, params);
    let relaxed_eta_energy = eta * eb.total;
    let angular_budget = relaxed_eta_energy - lb;
    let profile_budget = (lb - riemann_sum).abs();
    let report = FiniteLambdaReport {
        partition: partition.to_vec(),
        node_values,
        cap_measure: 2.0 * PI * ((1.0 - cap_lo.cos()) + (1.0 - cap_hi.cos())),
        riemann_sum,
        riemann_budget,
        mollifier_budget: eta * eb.parts.polar,
        angular_budget,
        profile_budget,
        sigma_budget: riemann_budget + angular_budget + profile_budget,
        relaxed_eta_energy,
        eta_energy: eta * energy(&field, params).total,
    };
    Ok(FiniteLambdaTrial { field, relaxed, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axisym::{locate_ring, symmetry_ratio};
    use crate::qtensor::{biaxiality, nematic_value};

    #[test]
    fn printed_embedding_examples() {
        let q = embed_complex(Complex64::new(0.0, 0.0)).to_matrix();
        let expect = nalgebra::Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0 / 3.0, -2.0 / 3.0, 1.0 / 3.0));
        assert!((q - expect).abs().max() < 1e-15);
        // linear in u: entries u/sqrt6
        let x = 0.37;
        let m = embed_complex(Complex64::new(6f64.sqrt() * x, 6f64.sqrt() * 2.0 * x)).to_matrix();
        assert!((m[(0, 0)] - (x + 1.0 / 3.0)).abs() < 1e-14);
        assert!((m[(2, 2)] - (1.0 / 3.0 - x)).abs() < 1e-14);
        assert!((m[(0, 2)] - 2.0 * x).abs() < 1e-14 && (m[(2, 0)] - 2.0 * x).abs() < 1e-14);
        assert!(m.trace().abs() < 1e-15);
        assert!((m - m.transpose()).abs().max() < 1e-15);
        // |dQ|^2 = |du|^2/3 by linearity
        let (a, b) = (Complex64::new(0.3, -0.1), Complex64::new(-0.2, 0.5));
        let dq = (embed_complex(a) - embed_complex(b)).norm_sq();
        assert!((dq - (a - b).norm_sqr() / 3.0).abs() < 1e-14);
    }

    #[test]
    fn printed_embedding_potential_is_radial() {
        // f(embed(u)) = 13/36 + (1 - |u|^2)^2/12: radial, minimal at |u| = 1
        for rho in [0.0, 0.5, 1.0, 1.5] {
            let vals: Vec<f64> = (0..16)
                .map(|k| nematic_value(&embed_complex(Complex64::from_polar(rho, 2.0 * PI * k as f64 / 16.0))))
                .collect();
            for v in &vals {
                assert!((v - vals[0]).abs() < 1e-13);
                let expect = 13.0 / 36.0 + (1.0 - rho * rho).powi(2) / 12.0;
                assert!((v - expect).abs() < 1e-13, "{v} vs {expect}");
            }
        }
    }

    #[test]
    fn uniaxial_embedding_matches_directors() {
        for k in 0..32 {
            let psi = k as f64 * PI / 16.0 - 0.3;
            let q = embed_complex_uniaxial(phase_to_u(psi));
            let d = Director::meridian(psi).to_qtensor(1.0);
            assert!((q - d).max_abs() < 1e-14);
            assert!(nematic_value(&q).abs() < 1e-14);
        }
        for rho in [0.0, 0.3, 0.9, 1.4] {
            let v = nematic_value(&embed_complex_uniaxial(Complex64::from_polar(rho, 0.7)));
            assert!((v - 3.0 / 16.0 * (1.0 - rho * rho).powi(2)).abs() < 1e-14);
        }
        let (a, b) = (Complex64::new(0.3, -0.1), Complex64::new(-0.2, 0.5));
        let dq = (embed_complex_uniaxial(a) - embed_complex_uniaxial(b)).norm_sq();
        assert!((dq - (a - b).norm_sqr() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn mollifier_cdf_integrates_kernel() {
        let n = 20_000;
        let mut acc = 0.0;
        for k in 0..n {
            let x = -1.0 + 2.0 * (k as f64 + 0.5) / n as f64;
            acc += mollifier(x) * 2.0 / n as f64;
            let xe = -1.0 + 2.0 * (k + 1) as f64 / n as f64;
            assert!((acc - mollifier_cdf(xe)).abs() < 1e-7);
        }
        assert_eq!(mollifier_cdf(-2.0), 0.0);
        assert_eq!(mollifier_cdf(2.0), 1.0);
    }

    #[test]
    fn gl_gradient_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut p = SquarePatch::canonical(9, 0.2).unwrap();
        for u in p.u.iter_mut() {
            *u += Complex64::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
        }
        let (_, g) = gl_energy(&p);
        for k in 0..p.u.len() {
            for part in 0..2 {
                let eps = 1e-6;
                let bump = if part == 0 { Complex64::new(eps, 0.0) } else { Complex64::new(0.0, eps) };
                let mut a = p.clone();
                let mut b = p.clone();
                a.u[k] += bump;
                b.u[k] -= bump;
                let fd = (gl_energy(&a).0 - gl_energy(&b).0) / (2.0 * eps);
                let an = if part == 0 { g[k].re } else { g[k].im };
                assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0));
            }
        }
    }

    #[test]
    fn canonical_core_has_one_vortex() {
        let eps = 0.1;
        let p = SquarePatch::canonical(SquarePatch::nodes_for(0.5, eps, 6.0), eps).unwrap();
        assert_eq!(p.boundary_degree(), -1);
        let sol = gl_core_minimize(&p).unwrap();
        let lo = PI / 3.0 * eps.ln().abs();
        assert!(sol.energy > lo && sol.energy < lo + 10.0, "{}", sol.energy);
        let v = sol.patch.vortex_cells();
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].2, -1);
        assert!(sol.residual < 1e-8 * sol.energy.max(1.0));
    }

    #[test]
    fn constant_boundary_gives_trivial_core() {
        let p = SquarePatch::with_boundary(33, 0.5, 0.1, |_, _| Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(p.boundary_degree(), 0);
        let sol = gl_core_minimize(&p).unwrap();
        assert!(sol.energy < 1e-12);
        assert!(sol.patch.u.iter().all(|u| (u - 1.0).norm() < 1e-8));
        assert!(sol.patch.vortex_cells().is_empty());
    }

    #[test]
    fn boundary_phase_is_tensor_continuous_with_half_degree() {
        for eta in [Some(0.1), Some(0.3), None] {
            // walk the square counterclockwise from the cut
            let n = 4000;
            let mut pts = Vec::new();
            for k in 0..n {
                let a = 2.0 * PI * (k as f64 + 0.5) / n as f64;
                let (c, s) = (a.cos(), a.sin());
                let m = c.abs().max(s.abs());
                pts.push((c / m, s / m));
            }
            let phases: Vec<f64> = pts.iter().map(|&(s, t)| boundary_phase(s, t, eta)).collect();
            let mut total = 0.0;
            for k in 0..n {
                let a = Director::meridian(phases[k]).to_qtensor(1.0);
                let b = Director::meridian(phases[(k + 1) % n]).to_qtensor(1.0);
                assert!((a - b).norm() < 0.05, "jump at {:?}", pts[k]);
                if k + 1 < n {
                    total += phases[k + 1] - phases[k];
                }
            }
            // lifted phase gains pi over one turn: director degree -1/2 in the
            // (x, z) orientation, u = -exp(-2 i psi) has degree -1
            assert!((total - PI).abs() < 0.05, "{total}");
            let p = SquarePatch::with_boundary(41, 0.5, 0.2, |s, t| phase_to_u(boundary_phase(2.0 * s, 2.0 * t, eta)))
                .unwrap();
            assert_eq!(p.boundary_degree(), -1);
        }
    }

    fn desk_trial(xi: f64, eta: f64, n_theta: usize) -> SaturnTrial {
        let p = ModelParams::new(xi, eta).unwrap();
        let mut spec = AxiGridSpec::for_params(&p);
        spec.n_theta = n_theta;
        let grid = Arc::new(AxiGrid::new(&spec).unwrap());
        build_saturn_trial_on(grid, &p, &SaturnOptions::default()).unwrap()
    }

    #[test]
    fn saturn_trial_structure() {
        let tr = desk_trial(0.04, 0.2, 192);
        let f = &tr.field;
        let g = &*f.grid;
        let p = tr.map.params;
        assert!(f.boundary_ok());
        // exact reflection in the interior; the r = 1 row to rounding
        for i in 0..g.nr() {
            for j in 0..g.ntheta() {
                let (a, b) = (f.at(i, j), f.at(i, g.mirror(j)).reflect_z());
                if i == 0 {
                    assert!((a - b).max_abs() < 1e-15);
                } else {
                    assert_eq!(a, b);
                }
            }
        }
        assert!((symmetry_ratio(f, &p) - 1.0).abs() < 1e-12);
        // heteroclinic column
        let j = g.theta.iter().position(|&t| t > PI / 3.0).unwrap();
        for i in 1..g.nr() - 1 {
            let expect = crate::profile::geodesic_heteroclinic(g.theta[j], (g.r[i] - 1.0) / p.eta).unwrap().to_qtensor(1.0);
            assert_eq!(f.at(i, j), expect);
        }
        // uniaxial outside the core
        for i in 1..g.nr() - 1 {
            for j in 0..g.ntheta() {
                if classify(g.r[i], g.theta[j], p.eta) != Region::Core {
                    let b = biaxiality(&f.at(i, j), 1e-8).unwrap();
                    assert!(b.abs() < 1e-8);
                }
            }
        }
        let ring = locate_ring(f).unwrap();
        assert!(ring.r - 1.0 > 0.0 && ring.r - 1.0 <= 2.0 * p.eta);
        assert!((ring.theta - PI / 2.0).abs() <= 2.0 * g.dtheta);
    }

    #[test]
    fn sector_is_q_inf_on_the_equator() {
        let p = ModelParams::new(0.04, 0.2).unwrap();
        let map = SaturnMap::new(&p, &SaturnOptions::default()).unwrap();
        for t in [2.0, 3.0, 10.0] {
            let q = map.value(1.0 + p.eta * t, PI / 2.0);
            assert!((q - QTensor::infinity()).max_abs() < 1e-15);
            let below = map.value(1.0 + p.eta * t, PI / 2.0 + 1e-9);
            assert!((below - QTensor::infinity()).max_abs() < 1e-8);
        }
    }

    #[test]
    fn saturn_map_is_continuous_across_interfaces() {
        let p = ModelParams::new(0.02, 0.2).unwrap();
        let map = SaturnMap::new(&p, &SaturnOptions::default()).unwrap();
        let eta = p.eta;
        let d = 1e-9;
        let hp = map.core.patch.h();
        let mut worst_outer: f64 = 0.0;
        let mut worst_core: f64 = 0.0;
        for k in 0..=200 {
            let x = k as f64 / 200.0;
            // region 1 / region 3 and region 1 / region 2 at theta = pi/2 - eta
            let r = 1.0 + 4.0 * eta * x;
            let th = PI / 2.0 - eta;
            worst_outer = worst_outer.max((map.value(r, th - d) - map.value(r, th + d)).max_abs());
            // sector / annulus at r = 1 + 2 eta
            let th = PI / 2.0 - eta * x;
            worst_outer = worst_outer.max((map.value(1.0 + 2.0 * eta - d, th) - map.value(1.0 + 2.0 * eta + d, th)).max_abs());
            // mirror plane
            let r = 1.0 + 3.0 * eta * x;
            worst_outer = worst_outer.max((map.value(r, PI / 2.0 - d) - map.value(r, PI / 2.0 + d)).max_abs());
            // annulus / core on max(|s|, |tau|) = 1/2
            let y = x - 0.5;
            for (s, tau) in [(0.5, y), (-0.5, y), (y, 0.5)] {
                let (r_in, th_in) = (1.0 + eta * (s * (1.0 - 2e-9) + 1.0), PI / 2.0 - eta * tau * (1.0 - 2e-9));
                let (r_out, th_out) = (1.0 + eta * (s * (1.0 + 2e-9) + 1.0), PI / 2.0 - eta * tau * (1.0 + 2e-9));
                if th_in <= PI / 2.0 && th_out <= PI / 2.0 {
                    worst_core = worst_core.max((map.value(r_in, th_in) - map.value(r_out, th_out)).max_abs());
                }
            }
        }
        assert!(worst_outer < 1e-6, "{worst_outer}");
        // bilinear interpolation of the boundary data between patch nodes
        assert!(worst_core < hp * hp * 10.0 + 1e-6, "{worst_core} vs h^2 = {}", hp * hp);
    }

    #[test]
    fn rejects_unresolved_grids() {
        let p = ModelParams::new(0.04, 0.2).unwrap();
        let mut spec = AxiGridSpec::for_params(&p);
        spec.n_theta = 32;
        let grid = Arc::new(AxiGrid::new(&spec).unwrap());
        assert!(matches!(
            build_saturn_trial_on(grid, &p, &SaturnOptions::default()),
            Err(Error::RejectedGrid(_))
        ));
        assert!(SaturnMap::new(&ModelParams::new(0.2, 0.3).unwrap(), &SaturnOptions::default()).is_err());
    }

    #[test]
    fn finite_lambda_caps_only() {
        let p = ModelParams::new(0.02, 0.2).unwrap();
        let grid = Arc::new(AxiGrid::from_nodes(vec![1.0, 1.01, 1.05, 1.2, 1.5], 16));
        let tr = assemble_finite_lambda(&p, grid.clone(), &[0.0, PI / 2.0, PI], &[None, None], 0.1).unwrap();
        for i in 1..grid.nr() {
            for j in 0..grid.ntheta() {
                assert_eq!(tr.field.at(i, j), QTensor::infinity());
            }
        }
        assert_eq!(tr.relaxed_energy_is_zero(), true);
        // only the first radial edge layer carries energy
        let b = energy(&tr.field, &p);
        let jump = b.node_energy[..grid.ntheta()].iter().sum::<f64>();
        assert!((jump - b.total).abs() < 1e-12 * b.total);
        assert!((tr.report.cap_measure - 4.0 * PI).abs() < 1e-12);
    }

    impl FiniteLambdaTrial {
        fn relaxed_energy_is_zero(&self) -> bool {
            self.report.relaxed_eta_energy.abs() < 1e-12
        }
    }

    #[test]
    fn finite_lambda_spec_validation() {
        let p = ModelParams::new(0.02, 0.2).unwrap();
        let spec = |h, e| TrialSpec {
            mode: TrialMode::FiniteLambda,
            h,
            eps_mollify: e,
            params: p,
        };
        assert!(spec(PI / 8.0, 0.1).validate().is_ok());
        assert!(matches!(spec(PI / 8.0, 0.3).validate(), Err(Error::RejectedSpec(_))));
        assert!(spec(PI / 2.0, 0.1).validate().is_err());
    }

    #[test]
    fn finite_lambda_field_properties() {
        let p = ModelParams::new(0.02, 0.2).unwrap();
        let mut gspec = AxiGridSpec::for_params(&p);
        gspec.n_theta = 256;
        gspec.h0 = 0.01;
        let grid = Arc::new(AxiGrid::new(&gspec).unwrap());
        let pg = ProfileGrid::new(20.0 / kappa(), 400).unwrap();
        let spec = TrialSpec {
            mode: TrialMode::FiniteLambda,
            h: PI / 8.0,
            eps_mollify: PI / 40.0,
            params: p,
        };
        let tr = build_finite_lambda_trial(&spec, grid.clone(), &pg).unwrap();
        let qinf = QTensor::infinity();
        for i in 1..grid.nr() {
            for j in 0..grid.ntheta() {
                let th = grid.theta[j];
                let q = tr.field.at(i, j);
                if th < PI / 8.0 - spec.eps_mollify || th > PI - PI / 8.0 + spec.eps_mollify {
                    assert_eq!(q, qinf);
                }
                if grid.r[i] > 1.0 + p.eta * pg.length {
                    assert!((q - qinf).max_abs() < 1e-15);
                }
            }
        }
        let r = &tr.report;
        assert_eq!(r.node_values.len(), 6);
        assert!(r.sigma_budget >= 0.0 && r.mollifier_budget >= 0.0);
        assert!((r.relaxed_eta_energy - (r.riemann_sum + r.angular_budget)).abs() <= r.profile_budget + 1e-9);
    }
}
