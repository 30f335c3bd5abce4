//! JSON run configuration and the validated sweep specification built from it.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::axisym::{AxiGridSpec, SolverOptions};
use crate::error::{Error, Result};
use crate::profile::{kappa, ProfileGrid};
use crate::qtensor::{ModelParams, DEFAULT_REG_DELTA};

/// Resolution preset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 16 cells across the equatorial strip; the Saturn trial just resolves.
    Fast,
    /// 24 cells across the strip and `h0 = xi/3`.
    #[default]
    Desk,
    /// 32 cells across the strip and `h0 = xi/4`.
    Fine,
}

impl Preset {
    /// Theta cells across `2 eta`.
    pub fn strip_cells(self) -> usize {
        match self {
            Preset::Fast => 16,
            Preset::Desk => 24,
            Preset::Fine => 32,
        }
    }

    /// Radial mesh width in the layer.
    pub fn h0(self, params: &ModelParams) -> f64 {
        match self {
            Preset::Fast => (params.xi / 2.0).min(params.eta / 8.0),
            Preset::Desk => params.xi / 3.0,
            Preset::Fine => params.xi / 4.0,
        }
    }

    /// Gauss-Legendre nodes on the hemisphere for the `D_lambda` reference.
    pub fn quadrature_nodes(self) -> usize {
        match self {
            Preset::Fast => 8,
            Preset::Desk => 16,
            Preset::Fine => 32,
        }
    }

    pub fn profile_nodes(self) -> usize {
        match self {
            Preset::Fast => 800,
            Preset::Desk | Preset::Fine => 2000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub reg_delta: f64,
    /// Length of the layer interval in units of `1/kappa`.
    pub profile_length_kappa: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            reg_delta: DEFAULT_REG_DELTA,
            profile_length_kappa: 20.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub preset: Preset,
    /// Overrides the preset's theta count.
    pub n_theta: Option<usize>,
    /// `R_out = 1 + r_out_etas * eta`.
    pub r_out_etas: f64,
    pub max_ratio: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            preset: Preset::Desk,
            n_theta: None,
            r_out_etas: 30.0,
            max_ratio: 1.05,
        }
    }
}

impl GridSection {
    pub fn spec_for(&self, params: &ModelParams) -> AxiGridSpec {
        let cells = self.preset.strip_cells() as f64;
        let needed = (cells * PI / (2.0 * params.eta)).ceil() as usize;
        let n_theta = self.n_theta.unwrap_or(needed.div_ceil(64).max(1) * 64);
        AxiGridSpec {
            n_theta,
            h0: self.preset.h0(params),
            uniform_width: 2.0 * params.eta,
            max_ratio: self.max_ratio,
            r_out: 1.0 + self.r_out_etas * params.eta,
        }
    }
}

/// Initial fields for the minimizer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    /// The Saturn-ring trial map.
    Trial,
    /// Optimal geodesic layer on every ray.
    Layer,
    /// Every ray heads to `+e3`.
    Dipole,
    /// Each hemisphere heads to its own pole without a ring.
    Hemispheres,
}

impl InitKind {
    pub fn label(self) -> &'static str {
        match self {
            InitKind::Trial => "trial",
            InitKind::Layer => "layer",
            InitKind::Dipole => "dipole",
            InitKind::Hemispheres => "hemispheres",
        }
    }
}

/// `eta` as a function of `xi` along a list of `xi` values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Schedule {
    /// `eta = ratio * xi`.
    Linear { ratio: f64, xi: Vec<f64> },
    /// `eta = c / |ln xi|^p`.
    Log { c: f64, p: f64, xi: Vec<f64> },
}

impl Schedule {
    pub fn points(&self) -> Vec<(f64, f64)> {
        match self {
            Schedule::Linear { ratio, xi } => xi.iter().map(|&x| (x, ratio * x)).collect(),
            Schedule::Log { c, p, xi } => xi.iter().map(|&x| (x, c / x.ln().abs().powf(*p))).collect(),
        }
    }
}

/// Claimed asymptotic regime of a list of points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `eta |ln xi|` strictly decreasing.
    HighField,
    /// `eta / xi` strictly increasing.
    LambdaInfinity,
}

impl Regime {
    pub fn check(self, points: &[(f64, f64)]) -> Result<()> {
        let key = |&(xi, eta): &(f64, f64)| match self {
            Regime::HighField => eta * xi.ln().abs(),
            Regime::LambdaInfinity => -eta / xi,
        };
        for (k, w) in points.windows(2).enumerate() {
            if !(key(&w[1]) < key(&w[0])) {
                return Err(Error::RejectedSpec(format!(
                    "points {k} and {} violate the {self:?} regime tag",
                    k + 1
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Point {
    pub xi: f64,
    pub eta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub points: Vec<Point>,
    pub schedule: Option<Schedule>,
    pub inits: Vec<InitKind>,
    pub seed: u64,
    /// Amplitude of seeded uniform noise added to the interior of each init.
    pub noise: f64,
    pub regime: Option<Regime>,
    /// Angles for the `profile` subcommand.
    pub profile_thetas: Vec<f64>,
    /// Field strengths for the `profile` subcommand.
    pub profile_lambdas: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            points: Vec::new(),
            schedule: None,
            inits: vec![InitKind::Trial, InitKind::Layer],
            seed: 0,
            noise: 0.0,
            regime: None,
            profile_thetas: vec![PI / 6.0, PI / 3.0, PI / 2.0],
            profile_lambdas: vec![1.0, 3.0, 10.0, 30.0, 100.0, 1000.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub formats: Vec<String>,
    /// Write the lowest-energy field of every point.
    pub snapshots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("runs"),
            formats: vec!["csv".into(), "json".into(), "svg".into()],
            snapshots: false,
        }
    }
}

/// Run configuration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: ModelSection,
    pub grid: GridSection,
    pub solver: SolverOptions,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn profile_grid(&self) -> Result<ProfileGrid> {
        ProfileGrid::new(self.model.profile_length_kappa / kappa(), self.grid.preset.profile_nodes())
    }

    /// Explicit points followed by the schedule's points.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = self.sweep.points.iter().map(|p| (p.xi, p.eta)).collect();
        if let Some(s) = &self.sweep.schedule {
            pts.extend(s.points());
        }
        pts
    }
}

/// Validated sweep request.
#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub points: Vec<(f64, f64)>,
    pub grid: GridSection,
    pub inits: Vec<InitKind>,
    pub solver: SolverOptions,
    pub reg_delta: f64,
    pub profile_grid: ProfileGrid,
    pub seed: u64,
    pub noise: f64,
    pub out_dir: PathBuf,
    pub snapshots: bool,
    /// Embedded verbatim in the run directory.
    pub config: Config,
}

impl SweepSpec {
    pub fn from_config(config: &Config) -> Result<Self> {
        let points = config.points();
        for &(xi, eta) in &points {
            ModelParams::with_reg(xi, eta, config.model.reg_delta)
                .map_err(|e| Error::RejectedSpec(e.to_string()))?;
        }
        if let Some(regime) = config.sweep.regime {
            regime.check(&points)?;
        }
        if !points.is_empty() && config.sweep.inits.is_empty() {
            return Err(Error::RejectedSpec("at least one initialization is required".into()));
        }
        if !(config.sweep.noise >= 0.0 && config.sweep.noise.is_finite()) {
            return Err(Error::RejectedSpec(format!("noise must be >= 0, got {}", config.sweep.noise)));
        }
        let mut inits = Vec::new();
        for &k in &config.sweep.inits {
            if !inits.contains(&k) {
                inits.push(k);
            }
        }
        Ok(SweepSpec {
            points,
            grid: config.grid.clone(),
            inits,
            solver: config.solver.clone(),
            reg_delta: config.model.reg_delta,
            profile_grid: config.profile_grid()?,
            seed: config.sweep.seed,
            noise: config.sweep.noise,
            out_dir: config.output.dir.clone(),
            snapshots: config.output.snapshots,
            config: config.clone(),
        })
    }
}
