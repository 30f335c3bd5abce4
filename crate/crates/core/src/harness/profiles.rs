//! Batch evaluation of layer profiles and `D_lambda(theta)` curves.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::config::Config;
use crate::harness::fit::two_pi_kappa;
use crate::harness::report::{svg_plot, Series};
use crate::harness::sweep::next_run_dir;
use crate::profile::{d_infinity, hemisphere_integral_d_lambda, minimize_profile, write_profile};
use crate::qtensor::boundary_tensor;
use crate::util::fmt17;

/// `D_lambda` on the hemisphere quadrature nodes for one `lambda`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Curve {
    pub lambda: f64,
    /// `int_{S^2} D_lambda dH^2`.
    pub sphere_integral: f64,
    /// `(theta, D_lambda)`, theta increasing.
    pub samples: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub curves: Vec<Curve>,
    /// `2 pi kappa`, the `lambda = inf` value of the sphere integral.
    pub limit: f64,
    /// `(theta, lambda, error)` of the individual profile solves that failed.
    pub failures: Vec<(f64, f64, String)>,
}

#[derive(Clone, Debug)]
pub struct ProfileOutcome {
    pub run_dir: PathBuf,
    pub summary: ProfileSummary,
}

impl ProfileOutcome {
    pub fn all_ok(&self) -> bool {
        self.summary.failures.is_empty()
    }
}

/// Solves the layer problem for every `(theta, lambda)` of the config's
/// `sweep.profile_thetas` and `sweep.profile_lambdas`, and tabulates
/// `D_lambda` over the hemisphere quadrature nodes. Writes the profiles,
/// `d_lambda.csv`, `d_lambda.svg` and `summary.json` into a fresh run directory.
pub fn run_profiles(config: &Config) -> Result<ProfileOutcome> {
    let grid = config.profile_grid()?;
    let run_dir = next_run_dir(&config.output.dir)?;
    fs::write(run_dir.join("config.json"), config.to_json() + "\n")?;
    let lambdas = &config.sweep.profile_lambdas;
    let thetas = &config.sweep.profile_thetas;

    let jobs: Vec<(usize, usize)> = (0..lambdas.len())
        .flat_map(|l| (0..thetas.len()).map(move |t| (l, t)))
        .collect();
    let solved: Vec<_> = jobs
        .par_iter()
        .map(|&(l, t)| (l, t, minimize_profile(&boundary_tensor(thetas[t], 0.0), lambdas[l], &grid)))
        .collect();
    let mut failures = Vec::new();
    for (l, t, res) in solved {
        match res {
            Ok(r) => write_profile(&run_dir, &format!("profile-l{l:02}-t{t:02}"), &r, Some(thetas[t]))?,
            Err(e) => failures.push((thetas[t], lambdas[l], e.to_string())),
        }
    }

    let nodes = config.grid.preset.quadrature_nodes();
    let mut curves = Vec::new();
    for &lambda in lambdas {
        match hemisphere_integral_d_lambda(lambda, nodes, &grid) {
            Ok((hemi, mut samples)) => {
                samples.sort_by(|a, b| a.0.total_cmp(&b.0));
                curves.push(Curve {
                    lambda,
                    sphere_integral: 2.0 * hemi,
                    samples,
                });
            }
            Err(e) => failures.push((f64::NAN, lambda, e.to_string())),
        }
    }

    let mut csv = String::from("lambda,theta,D_lambda,D_inf\n");
    for c in &curves {
        for &(theta, d) in &c.samples {
            let _ = writeln!(csv, "{},{},{},{}", fmt17(c.lambda), fmt17(theta), fmt17(d), fmt17(d_infinity(theta)));
        }
    }
    fs::write(run_dir.join("d_lambda.csv"), csv)?;

    let mut series: Vec<Series> = curves
        .iter()
        .map(|c| Series {
            name: format!("lambda = {}", c.lambda),
            points: c.samples.clone(),
        })
        .collect();
    if let Some(c) = curves.first() {
        series.push(Series {
            name: "lambda = inf".into(),
            points: c.samples.iter().map(|&(t, _)| (t, d_infinity(t))).collect(),
        });
    }
    let svg = svg_plot("layer energy D_lambda(theta)", "theta", "D_lambda", &series, false);
    fs::write(run_dir.join("d_lambda.svg"), svg)?;

    let summary = ProfileSummary {
        curves,
        limit: two_pi_kappa(),
        failures,
    };
    fs::write(run_dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(ProfileOutcome { run_dir, summary })
}
