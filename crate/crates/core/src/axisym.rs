//! Equivariant fields `Q(r, theta, phi) = R_phi Qbar(r, theta) R_phi^t` on the
//! truncated exterior `1 <= r <= R_out`, discretized on a meridian
//! cross-section.
//!
//! The discrete energy is
//!
//! ```text
//! E = sum_radial_edges  w_r/2 |dQ|^2  +  sum_polar_edges  w_th/2 |dQ|^2
//!   + sum_nodes V [ Xi(Q)/(2 r^2 sin^2 th) + f(Q)/xi^2 + g(Q)/eta^2 ]
//! ```
//!
//! with `w_r = 2 pi (int r^2 dr) sin(th_j) dth / dr^2`,
//! `w_th = 2 pi sin(th_{j+1/2}) A_i / dth` and `V = 2 pi r_i^2 A_i sin(th_j) dth`,
//! where `A_i` is the dual radial width of node `i`. Theta nodes sit at cell
//! centres `(j + 1/2) pi / N`, so the `sin^-2` factor is never evaluated at a pole.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lbfgs::{self, LbfgsOptions};
use crate::profile::{GeodesicPath, Pole};
use crate::qtensor::{
    biaxiality, boundary_tensor, field_potential, nematic_potential, xi_form, xi_form_grad, ModelParams,
    QTensor,
};
use crate::util::fmt17;

/// Radial mesh recipe: `h0`-spaced cells up to `r = 1 + uniform_width`, then
/// geometrically growing cells (ratio at most `max_ratio`) ending exactly at
/// `r_out`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiGridSpec {
    pub n_theta: usize,
    pub h0: f64,
    pub uniform_width: f64,
    pub max_ratio: f64,
    pub r_out: f64,
}

impl AxiGridSpec {
    /// `h0 = xi/3`, uniform over `2 eta`, ratio 1.05, `R_out = 1 + 30 eta` and
    /// enough theta nodes for 24 cells across the equatorial strip of width `2 eta`.
    pub fn for_params(params: &ModelParams) -> Self {
        AxiGridSpec {
            n_theta: default_n_theta(params.eta),
            h0: params.xi / 3.0,
            uniform_width: 2.0 * params.eta,
            max_ratio: 1.05,
            r_out: 1.0 + 30.0 * params.eta,
        }
    }
}

/// Smallest multiple of 64 with at least 24 theta cells across `2 eta`.
pub fn default_n_theta(eta: f64) -> usize {
    let needed = (12.0 * PI / eta).ceil() as usize;
    needed.div_ceil(64).max(1) * 64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiGrid {
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
    pub dtheta: f64,
    /// Dual radial widths.
    pub area: Vec<f64>,
    /// `sin(theta_j)`, mirror-symmetric to the last bit.
    pub sin_theta: Vec<f64>,
    /// `sin((j + 1) dtheta)`, the polar edge midpoints.
    pub sin_edge: Vec<f64>,
    /// `2 pi (r_{i+1}^3 - r_i^3) / (3 dr^2)`.
    pub radial_base: Vec<f64>,
}

impl AxiGrid {
    pub fn new(spec: &AxiGridSpec) -> Result<Self> {
        let AxiGridSpec {
            n_theta,
            h0,
            uniform_width,
            max_ratio,
            r_out,
        } = *spec;
        if n_theta < 4 || n_theta % 2 != 0 {
            return Err(Error::RejectedGrid(format!("n_theta must be even and >= 4, got {n_theta}")));
        }
        if !(h0 > 0.0 && uniform_width >= h0 && max_ratio >= 1.0 && r_out > 1.0 + uniform_width) {
            return Err(Error::RejectedGrid(format!("inconsistent radial spec {spec:?}")));
        }
        let m = (uniform_width / h0).ceil() as usize;
        let h = uniform_width / m as f64;
        let mut r: Vec<f64> = (0..=m).map(|k| 1.0 + k as f64 * h).collect();
        let rest = r_out - r[m];
        if rest > 1e-14 {
            // fewest geometric cells reaching r_out at ratio <= max_ratio,
            // then the ratio is tuned so the last node lands exactly on it
            let span = |q: f64, n: usize| -> f64 {
                if (q - 1.0).abs() < 1e-14 {
                    h * n as f64
                } else {
                    h * q * (q.powi(n as i32) - 1.0) / (q - 1.0)
                }
            };
            let mut n = 1;
            while span(max_ratio, n) < rest {
                n += 1;
            }
            let (mut lo, mut hi) = (1.0f64, max_ratio);
            if span(1.0, n) >= rest {
                hi = 1.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if span(mid, n) < rest {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let q = hi;
            let mut step = h;
            for _ in 0..n {
                step *= q;
                let last = *r.last().unwrap();
                r.push(last + step);
            }
            *r.last_mut().unwrap() = r_out;
        }
        Ok(Self::from_nodes(r, n_theta))
    }

    /// Grid on explicit radial nodes (strictly increasing, starting at 1).
    pub fn from_nodes(r: Vec<f64>, n_theta: usize) -> Self {
        let nr = r.len();
        let dtheta = PI / n_theta as f64;
        let theta: Vec<f64> = (0..n_theta).map(|j| (j as f64 + 0.5) * dtheta).collect();
        let mut sin_theta: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
        for j in 0..n_theta / 2 {
            sin_theta[n_theta - 1 - j] = sin_theta[j];
        }
        let mut sin_edge: Vec<f64> = (0..n_theta.saturating_sub(1))
            .map(|j| ((j + 1) as f64 * dtheta).sin())
            .collect();
        let ne = sin_edge.len();
        for j in 0..ne / 2 {
            sin_edge[ne - 1 - j] = sin_edge[j];
        }
        let mut area = vec![0.0; nr];
        for i in 0..nr - 1 {
            let d = r[i + 1] - r[i];
            area[i] += 0.5 * d;
            area[i + 1] += 0.5 * d;
        }
        let radial_base = (0..nr - 1)
            .map(|i| {
                let d = r[i + 1] - r[i];
                2.0 * PI * (r[i + 1].powi(3) - r[i].powi(3)) / (3.0 * d * d)
            })
            .collect();
        AxiGrid {
            r,
            theta,
            dtheta,
            area,
            sin_theta,
            sin_edge,
            radial_base,
        }
    }

    pub fn for_params(params: &ModelParams) -> Result<Self> {
        Self::new(&AxiGridSpec::for_params(params))
    }

    pub fn nr(&self) -> usize {
        self.r.len()
    }

    pub fn ntheta(&self) -> usize {
        self.theta.len()
    }

    pub fn len(&self) -> usize {
        self.nr() * self.ntheta()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.ntheta() + j
    }

    pub fn r_out(&self) -> f64 {
        *self.r.last().unwrap()
    }

    pub fn min_dr(&self) -> f64 {
        self.r.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    pub fn max_ratio(&self) -> f64 {
        let d: Vec<f64> = self.r.windows(2).map(|w| w[1] - w[0]).collect();
        d.windows(2).map(|w| w[1] / w[0]).fold(1.0, f64::max)
    }

    /// `2 pi r_i^2 A_i sin(theta_j) dtheta`.
    pub fn volume(&self, i: usize, j: usize) -> f64 {
        2.0 * PI * self.r[i] * self.r[i] * self.area[i] * self.sin_theta[j] * self.dtheta
    }

    /// Index of the theta node mirrored through the equator.
    pub fn mirror(&self, j: usize) -> usize {
        self.ntheta() - 1 - j
    }
}

/// Nodal field on an [`AxiGrid`]; row `i` holds the `theta` sweep at `r_i`.
#[derive(Clone, Debug)]
pub struct AxiField {
    pub grid: Arc<AxiGrid>,
    pub values: Vec<QTensor>,
}

impl AxiField {
    /// `f(r, theta)` at every node, then boundary rows reset.
    pub fn from_fn(grid: Arc<AxiGrid>, mut f: impl FnMut(f64, f64) -> QTensor) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.nr() {
            for j in 0..grid.ntheta() {
                values.push(f(grid.r[i], grid.theta[j]));
            }
        }
        let mut field = AxiField { grid, values };
        field.enforce_boundary();
        field
    }

    /// `Q_inf` in the interior.
    pub fn uniform(grid: Arc<AxiGrid>) -> Self {
        Self::from_fn(grid, |_, _| QTensor::infinity())
    }

    pub fn at(&self, i: usize, j: usize) -> QTensor {
        self.values[self.grid.idx(i, j)]
    }

    /// `Q_b(theta, 0)` on `r = 1` and `Q_inf` on `r = R_out`.
    pub fn enforce_boundary(&mut self) {
        let nt = self.grid.ntheta();
        let last = self.grid.nr() - 1;
        for j in 0..nt {
            self.values[j] = boundary_tensor(self.grid.theta[j], 0.0);
            self.values[last * nt + j] = QTensor::infinity();
        }
    }

    pub fn boundary_ok(&self) -> bool {
        let nt = self.grid.ntheta();
        let last = self.grid.nr() - 1;
        (0..nt).all(|j| {
            self.values[j] == boundary_tensor(self.grid.theta[j], 0.0)
                && self.values[last * nt + j] == QTensor::infinity()
        })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|q| q.is_finite())
    }

    /// Mirror image `Qbar(r, theta) -> T Qbar(r, pi - theta) T`.
    pub fn reflected(&self) -> Self {
        let g = &self.grid;
        let mut values = self.values.clone();
        for i in 0..g.nr() {
            for j in 0..g.ntheta() {
                values[g.idx(i, j)] = self.values[g.idx(i, g.mirror(j))].reflect_z();
            }
        }
        AxiField {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Keeps the upper half (`theta < pi/2`) and fills the lower half by reflection.
    pub fn symmetrized_from_upper(&self) -> Self {
        let g = &self.grid;
        let mut out = self.clone();
        for i in 0..g.nr() {
            for j in g.ntheta() / 2..g.ntheta() {
                out.values[g.idx(i, j)] = self.values[g.idx(i, g.mirror(j))].reflect_z();
            }
        }
        out.enforce_boundary();
        out
    }
}

/// Layer initialization: linear blend from `Q_b` to `Q_inf` over `r - 1 <= eta`.
pub fn init_layer(grid: Arc<AxiGrid>, params: &ModelParams) -> AxiField {
    let eta = params.eta;
    AxiField::from_fn(grid, |r, th| {
        let s = ((r - 1.0) / eta).min(1.0);
        boundary_tensor(th, 0.0) * (1.0 - s) + QTensor::infinity() * s
    })
}

/// Dipole ansatz: every ray follows the heteroclinic to `+e3`, including the
/// southern rays that have to turn by more than `pi/2`.
pub fn init_dipole(grid: Arc<AxiGrid>, params: &ModelParams) -> AxiField {
    let eta = params.eta;
    AxiField::from_fn(grid, |r, th| {
        GeodesicPath::new(th, Pole::North).at((r - 1.0) / eta).to_qtensor(1.0)
    })
}

/// Uniaxial heteroclinic on every ray toward the nearer pole; a mirror-symmetric
/// field with a jump across the equator.
pub fn init_hemispheres(grid: Arc<AxiGrid>, params: &ModelParams) -> AxiField {
    let eta = params.eta;
    AxiField::from_fn(grid, |r, th| {
        GeodesicPath::optimal(th).at((r - 1.0) / eta).to_qtensor(1.0)
    })
}

/// Parts of the discrete energy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyParts {
    pub radial: f64,
    pub polar: f64,
    pub azimuthal: f64,
    pub nematic: f64,
    pub field: f64,
}

impl EnergyParts {
    pub fn elastic(&self) -> f64 {
        self.radial + self.polar + self.azimuthal
    }

    pub fn total(&self) -> f64 {
        self.elastic() + self.nematic + self.field
    }
}

impl std::ops::Add for EnergyParts {
    type Output = EnergyParts;
    fn add(self, o: EnergyParts) -> EnergyParts {
        EnergyParts {
            radial: self.radial + o.radial,
            polar: self.polar + o.polar,
            azimuthal: self.azimuthal + o.azimuthal,
            nematic: self.nematic + o.nematic,
            field: self.field + o.field,
        }
    }
}

/// Energy of a field, split by term and by node.
///
/// Radial edges are attributed to their inner node and polar edges half to
/// each end, so `node_energy` sums to `total` and bands never straddle an edge
/// unevenly.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub total: f64,
    pub elastic: f64,
    pub parts: EnergyParts,
    pub nematic: f64,
    pub field: f64,
    /// `theta < pi/2`.
    pub upper: f64,
    /// `theta > pi/2`.
    pub lower: f64,
    #[serde(skip)]
    pub node_energy: Vec<f64>,
    #[serde(skip)]
    pub ntheta: usize,
}

impl EnergyBreakdown {
    /// Energy of the nodes with `theta_lo <= theta_j < theta_hi`
    /// (`theta_hi = pi` closes the band).
    pub fn band(&self, grid: &AxiGrid, theta_lo: f64, theta_hi: f64) -> f64 {
        let js: Vec<usize> = (0..grid.ntheta())
            .filter(|&j| {
                let t = grid.theta[j];
                t >= theta_lo && (t < theta_hi || theta_hi >= PI)
            })
            .collect();
        if js.is_empty() || !(theta_lo < theta_hi) {
            return 0.0;
        }
        let nt = self.ntheta;
        let mut sum = 0.0;
        for row in self.node_energy.chunks_exact(nt) {
            for &j in &js {
                sum += row[j];
            }
        }
        sum
    }

    /// Per-theta-node energy summed over rows.
    pub fn per_theta(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.ntheta];
        for row in self.node_energy.chunks_exact(self.ntheta) {
            for (o, e) in out.iter_mut().zip(row) {
                *o += e;
            }
        }
        out
    }

    /// `E(upper) / E(lower)`; infinite when the lower half carries no energy.
    pub fn symmetry_ratio(&self) -> f64 {
        if self.lower == 0.0 {
            f64::INFINITY
        } else {
            self.upper / self.lower
        }
    }
}

/// Row kernel. Adds this row's share of the energy to `energy_row` (when
/// given) and the full gradient with respect to this row's nodes to
/// `grad_row` (when given). Returns the row's share of each part.
fn row_eval(
    i: usize,
    values: &[QTensor],
    grid: &AxiGrid,
    params: &ModelParams,
    mut grad_row: Option<&mut [QTensor]>,
    mut energy_row: Option<&mut [f64]>,
) -> EnergyParts {
    let nt = grid.ntheta();
    let nr = grid.nr();
    let row = &values[i * nt..(i + 1) * nt];
    let dth = grid.dtheta;
    let inv_xi2 = 1.0 / (params.xi * params.xi);
    let inv_eta2 = 1.0 / (params.eta * params.eta);
    let mut parts = EnergyParts::default();
    if let Some(g) = grad_row.as_deref_mut() {
        g.iter_mut().for_each(|q| *q = QTensor::ZERO);
    }
    if let Some(e) = energy_row.as_deref_mut() {
        e.iter_mut().for_each(|x| *x = 0.0);
    }

    // outward radial edge (i, i+1): energy owned by this row
    if i + 1 < nr {
        let next = &values[(i + 1) * nt..(i + 2) * nt];
        let base = grid.radial_base[i] * dth;
        for j in 0..nt {
            let w = base * grid.sin_theta[j];
            let d = next[j] - row[j];
            let e = 0.5 * w * d.norm_sq();
            parts.radial += e;
            if let Some(er) = energy_row.as_deref_mut() {
                er[j] += e;
            }
            if let Some(g) = grad_row.as_deref_mut() {
                g[j] -= d * w;
            }
        }
    }
    // inward radial edge (i-1, i): gradient only
    if i > 0 {
        if let Some(g) = grad_row.as_deref_mut() {
            let prev = &values[(i - 1) * nt..i * nt];
            let base = grid.radial_base[i - 1] * dth;
            for j in 0..nt {
                let w = base * grid.sin_theta[j];
                g[j] += (row[j] - prev[j]) * w;
            }
        }
    }
    // polar edges within the row
    let pbase = 2.0 * PI * grid.area[i] / dth;
    for j in 0..nt - 1 {
        let w = pbase * grid.sin_edge[j];
        let d = row[j + 1] - row[j];
        let e = 0.5 * w * d.norm_sq();
        parts.polar += e;
        if let Some(er) = energy_row.as_deref_mut() {
            er[j] += 0.5 * e;
            er[j + 1] += 0.5 * e;
        }
        if let Some(g) = grad_row.as_deref_mut() {
            let gd = d * w;
            g[j + 1] += gd;
            g[j] -= gd;
        }
    }
    // node terms
    let r2 = grid.r[i] * grid.r[i];
    for j in 0..nt {
        let s = grid.sin_theta[j];
        let vol = 2.0 * PI * r2 * grid.area[i] * s * dth;
        let az = PI * grid.area[i] * dth / s;
        let q = &row[j];
        let (fv, fg) = nematic_potential(q);
        let (gv, gg) = field_potential(q, params.reg_delta);
        let ea = az * xi_form(q);
        let en = vol * inv_xi2 * fv;
        let ef = vol * inv_eta2 * gv;
        parts.azimuthal += ea;
        parts.nematic += en;
        parts.field += ef;
        if let Some(er) = energy_row.as_deref_mut() {
            er[j] += ea + en + ef;
        }
        if let Some(g) = grad_row.as_deref_mut() {
            g[j] += xi_form_grad(q) * az + fg * (vol * inv_xi2) + gg * (vol * inv_eta2);
        }
    }
    parts
}

fn check_grid(field: &AxiField) {
    assert_eq!(field.values.len(), field.grid.len(), "field does not match its grid");
}

/// Energy of the field with per-node attribution. Rows are evaluated in
/// parallel and summed in a fixed order, so results do not depend on the pool.
pub fn energy(field: &AxiField, params: &ModelParams) -> EnergyBreakdown {
    check_grid(field);
    let grid = &*field.grid;
    let nt = grid.ntheta();
    let mut node_energy = vec![0.0; grid.len()];
    let parts = node_energy
        .par_chunks_mut(nt)
        .enumerate()
        .map(|(i, er)| row_eval(i, &field.values, grid, params, None, Some(er)))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(EnergyParts::default(), |a, b| a + b);
    let half = nt / 2;
    let (mut upper, mut lower) = (0.0, 0.0);
    for row in node_energy.chunks_exact(nt) {
        upper += row[..half].iter().sum::<f64>();
        lower += row[half..].iter().sum::<f64>();
    }
    EnergyBreakdown {
        total: parts.total(),
        elastic: parts.elastic(),
        nematic: parts.nematic,
        field: parts.field,
        parts,
        upper,
        lower,
        node_energy,
        ntheta: nt,
    }
}

/// Total energy and its gradient; boundary rows get a zero gradient.
pub fn energy_gradient(field: &AxiField, params: &ModelParams) -> (f64, Vec<QTensor>) {
    let mut grad = vec![QTensor::ZERO; field.grid.len()];
    let e = energy_gradient_into(&field.values, &field.grid, params, &mut grad);
    (e, grad)
}

fn energy_gradient_into(values: &[QTensor], grid: &AxiGrid, params: &ModelParams, grad: &mut [QTensor]) -> f64 {
    let nt = grid.ntheta();
    let nr = grid.nr();
    let parts = grad
        .par_chunks_mut(nt)
        .enumerate()
        .map(|(i, g)| {
            let p = row_eval(i, values, grid, params, Some(g), None);
            if i == 0 || i + 1 == nr {
                g.iter_mut().for_each(|q| *q = QTensor::ZERO);
            }
            p
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(EnergyParts::default(), |a, b| a + b);
    parts.total()
}

/// First node holding a non-finite value or, failing that, a non-finite energy share.
pub fn find_non_finite(field: &AxiField, params: &ModelParams) -> Option<(usize, usize)> {
    let nt = field.grid.ntheta();
    let locate = |k: usize| (k / nt, k % nt);
    if let Some(k) = field.values.iter().position(|q| !q.is_finite()) {
        return Some(locate(k));
    }
    energy(field, params).node_energy.iter().position(|e| !e.is_finite()).map(locate)
}

/// Energy restricted to the cone over `[theta_lo, theta_hi]`.
pub fn cone_energy(field: &AxiField, params: &ModelParams, theta_lo: f64, theta_hi: f64) -> Result<f64> {
    if !(0.0 <= theta_lo && theta_lo <= theta_hi && theta_hi <= PI) {
        return Err(Error::InvalidInput(format!("need 0 <= lo <= hi <= pi, got [{theta_lo}, {theta_hi}]")));
    }
    if theta_lo == theta_hi {
        return Ok(0.0);
    }
    Ok(energy(field, params).band(&field.grid, theta_lo, theta_hi))
}

/// `E(upper) / E(lower)`.
pub fn symmetry_ratio(field: &AxiField, params: &ModelParams) -> f64 {
    energy(field, params).symmetry_ratio()
}

/// Sphere integral of the discrete one-dimensional layer energy of each ray,
/// in the stretched variable `t = (r - 1)/eta`. Bounded above by
/// `eta * energy` because it drops the angular terms and uses `r^2 >= 1`.
pub fn ray_lower_bound(field: &AxiField, params: &ModelParams) -> f64 {
    let grid = &*field.grid;
    let eta = params.eta;
    let l2 = params.lambda() * params.lambda();
    (0..grid.ntheta())
        .into_par_iter()
        .map(|j| {
            let mut e = 0.0;
            for i in 0..grid.nr() {
                let q = field.at(i, j);
                if i + 1 < grid.nr() {
                    let dr = grid.r[i + 1] - grid.r[i];
                    e += 0.5 * (field.at(i + 1, j) - q).norm_sq() * eta / dr;
                }
                let pot = l2 * nematic_potential(&q).0 + field_potential(&q, params.reg_delta).0;
                e += grid.area[i] / eta * pot;
            }
            2.0 * PI * grid.sin_theta[j] * grid.dtheta * e
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

/// Node of maximal biaxiality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingLocation {
    pub i: usize,
    pub j: usize,
    pub r: f64,
    pub theta: f64,
    pub beta_max: f64,
}

/// Biaxiality threshold below which no ring is reported.
pub const RING_BETA_THRESHOLD: f64 = 0.1;

/// Interior node of maximal biaxiality, or `None` when it stays below
/// [`RING_BETA_THRESHOLD`]. Nodes with vanishing order count as `beta = 1`.
pub fn locate_ring(field: &AxiField) -> Option<RingLocation> {
    let g = &*field.grid;
    let mut best: Option<RingLocation> = None;
    for i in 1..g.nr() - 1 {
        for j in 0..g.ntheta() {
            let q = field.at(i, j);
            let beta = biaxiality(&q, 1e-6).unwrap_or(1.0);
            let better = match &best {
                None => true,
                Some(b) => beta > b.beta_max || (beta == b.beta_max && q.norm() < field.at(b.i, b.j).norm()),
            };
            if better {
                best = Some(RingLocation {
                    i,
                    j,
                    r: g.r[i],
                    theta: g.theta[j],
                    beta_max: beta,
                });
            }
        }
    }
    best.filter(|b| b.beta_max > RING_BETA_THRESHOLD)
}

/// Solver settings for [`minimize`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Converged when `||grad||_inf < tol * max(1, E)`.
    pub tol: f64,
    pub max_iter: usize,
    pub memory: usize,
    /// Restrict to director fields in the x-z plane (`q3 = q5 = 0`).
    pub planar: bool,
    pub record_history: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-6,
            max_iter: 50_000,
            memory: 12,
            planar: false,
            record_history: false,
        }
    }
}

/// Per-run convergence information.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub label: String,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub grad_inf: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub history: Vec<f64>,
}

/// Converged state of [`minimize`].
#[derive(Clone, Debug)]
pub struct Minimized {
    pub field: AxiField,
    pub breakdown: EnergyBreakdown,
    pub record: ConvergenceRecord,
}

const PLANAR: [usize; 3] = [0, 1, 3];
const FULL: [usize; 5] = [0, 1, 2, 3, 4];

/// Jacobi-style scale of each unknown: edge weights plus the curvature of the
/// azimuthal term and a unit multiple of the potentials.
fn diagonal(grid: &AxiGrid, params: &ModelParams, comps: &[usize]) -> Vec<f64> {
    let nt = grid.ntheta();
    let nr = grid.nr();
    let inv_xi2 = 1.0 / (params.xi * params.xi);
    let inv_eta2 = 1.0 / (params.eta * params.eta);
    let mut out = Vec::with_capacity((nr - 2) * nt * comps.len());
    for i in 1..nr - 1 {
        let pbase = 2.0 * PI * grid.area[i] / grid.dtheta;
        for j in 0..nt {
            let s = grid.sin_theta[j];
            let mut d = (grid.radial_base[i - 1] + grid.radial_base[i]) * grid.dtheta * s;
            if j > 0 {
                d += pbase * grid.sin_edge[j - 1];
            }
            if j + 1 < nt {
                d += pbase * grid.sin_edge[j];
            }
            let vol = grid.volume(i, j);
            d += vol * (inv_xi2 + inv_eta2);
            let az = PI * grid.area[i] * grid.dtheta / s;
            for &c in comps {
                let k = match c {
                    0 | 2 => 8.0,
                    3 | 4 => 2.0,
                    _ => 0.0,
                };
                out.push(1.0 / (d + k * az));
            }
        }
    }
    out
}

/// Minimizes the discrete energy from `field0` with boundary rows held fixed.
pub fn minimize(field0: &AxiField, params: &ModelParams, opts: &SolverOptions, label: &str) -> Result<Minimized> {
    check_grid(field0);
    if !field0.boundary_ok() {
        return Err(Error::InvalidInput("initial field violates the boundary rows".into()));
    }
    let grid = field0.grid.clone();
    let nt = grid.ntheta();
    let nr = grid.nr();
    let comps: &[usize] = if opts.planar { &PLANAR } else { &FULL };
    let mut work = field0.clone();
    if opts.planar {
        for q in work.values.iter_mut() {
            q.0[2] = 0.0;
            q.0[4] = 0.0;
        }
        work.enforce_boundary();
    }
    let initial = energy(&work, params);
    if !initial.total.is_finite() {
        let (i, j) = find_non_finite(&work, params).unwrap_or((0, 0));
        return Err(Error::NonFinite { i, j });
    }
    let pack = |vals: &[QTensor]| -> Vec<f64> {
        vals[nt..(nr - 1) * nt]
            .iter()
            .flat_map(|q| comps.iter().map(move |&c| q.0[c]))
            .collect()
    };
    let x0 = pack(&work.values);
    let precond = diagonal(&grid, params, comps);
    let mut vals = work.values.clone();
    let mut grad = vec![QTensor::ZERO; grid.len()];
    let nc = comps.len();
    let objective = |x: &[f64], g: &mut [f64]| -> f64 {
        for (k, c) in x.chunks_exact(nc).enumerate() {
            let q = &mut vals[nt + k];
            for (slot, &comp) in comps.iter().enumerate() {
                q.0[comp] = c[slot];
            }
        }
        let e = energy_gradient_into(&vals, &grid, params, &mut grad);
        for (k, c) in g.chunks_exact_mut(nc).enumerate() {
            let q = &grad[nt + k];
            for (slot, &comp) in comps.iter().enumerate() {
                c[slot] = q.0[comp];
            }
        }
        e
    };
    let lopts = LbfgsOptions {
        memory: opts.memory,
        max_iter: opts.max_iter,
        grad_tol: opts.tol,
        record_history: opts.record_history,
        ..Default::default()
    };
    let m = lbfgs::minimize(&x0, objective, Some(&precond), &lopts);
    for (k, c) in m.x.chunks_exact(nc).enumerate() {
        let q = &mut work.values[nt + k];
        for (slot, &comp) in comps.iter().enumerate() {
            q.0[comp] = c[slot];
        }
    }
    if !m.energy.is_finite() || !work.is_finite() {
        let (i, j) = find_non_finite(&work, params).unwrap_or((0, 0));
        return Err(Error::NonFinite { i, j });
    }
    if !m.converged {
        return Err(Error::NotConverged {
            what: "axisymmetric minimization",
            iterations: m.iterations,
            residual: m.grad_inf,
            energy: m.energy,
            best: m.x,
        });
    }
    let breakdown = energy(&work, params);
    Ok(Minimized {
        record: ConvergenceRecord {
            label: label.to_string(),
            initial_energy: initial.total,
            final_energy: breakdown.total,
            grad_inf: m.grad_inf,
            iterations: m.iterations,
            evaluations: m.evaluations,
            converged: true,
            history: m.history,
        },
        field: work,
        breakdown,
    })
}

/// Rebuilds a field from the packed interior unknowns carried by
/// [`Error::NotConverged`], using `template` for the boundary rows.
pub fn field_from_packed(template: &AxiField, x: &[f64], planar: bool) -> Result<AxiField> {
    let comps: &[usize] = if planar { &PLANAR } else { &FULL };
    let g = &template.grid;
    let nt = g.ntheta();
    let expected = (g.nr() - 2) * nt * comps.len();
    if x.len() != expected {
        return Err(Error::InvalidInput(format!("packed length {} does not match grid ({expected})", x.len())));
    }
    let mut out = template.clone();
    for (k, c) in x.chunks_exact(comps.len()).enumerate() {
        let q = &mut out.values[nt + k];
        if planar {
            q.0[2] = 0.0;
            q.0[4] = 0.0;
        }
        for (slot, &comp) in comps.iter().enumerate() {
            q.0[comp] = c[slot];
        }
    }
    Ok(out)
}

/// Runs [`minimize`] from every initialization (in parallel) and returns the
/// lowest converged state together with all per-run records.
pub fn minimize_multi(
    inits: Vec<(String, AxiField)>,
    params: &ModelParams,
    opts: &SolverOptions,
) -> Result<(Minimized, Vec<Result<ConvergenceRecord>>)> {
    if inits.is_empty() {
        return Err(Error::InvalidInput("no initialization given".into()));
    }
    let runs: Vec<Result<Minimized>> = inits
        .into_par_iter()
        .map(|(label, f)| minimize(&f, params, opts, &label))
        .collect();
    let records = runs
        .iter()
        .map(|r| match r {
            Ok(m) => Ok(m.record.clone()),
            Err(e) => Err(Error::InvalidInput(e.to_string())),
        })
        .collect();
    let mut best: Option<Minimized> = None;
    let mut first_err: Option<Error> = None;
    for r in runs {
        match r {
            Ok(m) => {
                if best.as_ref().is_none_or(|b| m.breakdown.total < b.breakdown.total) {
                    best = Some(m);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match best {
        Some(b) => Ok((b, records)),
        None => Err(first_err.unwrap()),
    }
}

/// JSON sidecar of a snapshot.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub xi: f64,
    pub eta: f64,
    pub lambda: f64,
    pub nr: usize,
    pub ntheta: usize,
    pub r_out: f64,
    pub energies: EnergyBreakdown,
    pub convergence: Option<ConvergenceRecord>,
}

/// Writes `<stem>.csv` (`r,theta,q1,...,q5`) and `<stem>.json`.
pub fn write_snapshot(
    dir: &Path,
    stem: &str,
    field: &AxiField,
    params: &ModelParams,
    record: Option<&ConvergenceRecord>,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let g = &*field.grid;
    let mut csv = String::with_capacity(g.len() * 140);
    csv.push_str("r,theta,q1,q2,q3,q4,q5\n");
    for i in 0..g.nr() {
        for j in 0..g.ntheta() {
            csv.push_str(&fmt17(g.r[i]));
            csv.push(',');
            csv.push_str(&fmt17(g.theta[j]));
            for c in field.at(i, j).0 {
                csv.push(',');
                csv.push_str(&fmt17(c));
            }
            csv.push('\n');
        }
    }
    fs::File::create(dir.join(format!("{stem}.csv")))?.write_all(csv.as_bytes())?;
    let meta = SnapshotMeta {
        xi: params.xi,
        eta: params.eta,
        lambda: params.lambda(),
        nr: g.nr(),
        ntheta: g.ntheta(),
        r_out: g.r_out(),
        energies: energy(field, params),
        convergence: record.cloned(),
    };
    let mut f = fs::File::create(dir.join(format!("{stem}.json")))?;
    serde_json::to_writer_pretty(&mut f, &meta)?;
    f.write_all(b"\n")?;
    Ok(())
}
