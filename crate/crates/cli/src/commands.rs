use std::path::{Path, PathBuf};

use graphdep::bounds::{verify_variance_bounds, VarianceBoundReport};
use graphdep::graph::{greedy_dominating_set, DependencyGraph};
use graphdep::linalg::symmetric_eigen;
use graphdep::models::ModelSpec;
use graphdep::spectra::{covariance_esd, format_f64, kolmogorov_distance, sample_covariance, Cdf, SpectralDistribution};
use graphdep::stats::{spearman, stream_rng};
use graphdep::stieltjes::{
    density_csv, density_from_stieltjes, mp_atom, mp_density, mp_support, DensityPoint, DiscreteMeasure,
    FixedPointLaw, MarchenkoPastur,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::config::{ExperimentConfig, Law};
use crate::error::{CliError, CliResult};
use crate::io::{read_atoms_csv, read_text, write_text};

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialise");
    text.push('\n');
    text
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphStats {
    pub p: usize,
    pub edges: usize,
    pub max_degree: usize,
    pub dominating_set_size: usize,
    pub d: usize,
    pub max_ball2_size: usize,
    /// 1-based.
    pub dominating_set: Vec<usize>,
}

pub fn graph_stats(path: &Path) -> CliResult<GraphStats> {
    let g = DependencyGraph::parse_edge_list(&read_text(path)?).map_err(|e| match e {
        graphdep::Error::Parse { line, message } => CliError::File {
            path: path.to_path_buf(),
            line,
            message,
        },
        other => other.into(),
    })?;
    let cert = greedy_dominating_set(&g);
    Ok(GraphStats {
        p: g.p(),
        edges: g.edge_count(),
        max_degree: g.max_degree(),
        dominating_set_size: cert.vertices().len(),
        d: cert.d(),
        max_ball2_size: cert.max_ball2_size(),
        dominating_set: cert.vertices().iter().map(|v| v + 1).collect(),
    })
}

/// The law an ESD is compared with, tabulated for output.
pub enum LimitLaw {
    Mp(MarchenkoPastur),
    FixedPoint(Box<FixedPointLaw>),
}

impl Cdf for LimitLaw {
    fn cdf(&self, x: f64) -> f64 {
        match self {
            LimitLaw::Mp(law) => law.cdf(x),
            LimitLaw::FixedPoint(law) => law.cdf(x),
        }
    }

    fn cdf_left(&self, x: f64) -> f64 {
        match self {
            LimitLaw::Mp(law) => law.cdf_left(x),
            LimitLaw::FixedPoint(law) => law.cdf_left(x),
        }
    }
}

impl LimitLaw {
    pub fn build(cfg: &ExperimentConfig, model: &ModelSpec, rho: f64) -> CliResult<Self> {
        match cfg.law {
            Law::Mp => {
                mp_support(rho)?;
                Ok(LimitLaw::Mp(MarchenkoPastur { rho }))
            }
            Law::FixedPoint => {
                let mu = match &cfg.mu {
                    Some(path) => read_atoms_csv(path)?,
                    None => population_measure(model)?,
                };
                Ok(LimitLaw::FixedPoint(Box::new(FixedPointLaw::new(
                    &mu,
                    rho,
                    cfg.grid_points,
                    cfg.eta,
                )?)))
            }
        }
    }

    pub fn atom_at_zero(&self) -> f64 {
        match self {
            LimitLaw::Mp(law) => mp_atom(law.rho),
            LimitLaw::FixedPoint(law) => law.atom,
        }
    }

    pub fn density(&self, grid_points: usize) -> Vec<DensityPoint> {
        match self {
            LimitLaw::Mp(law) => {
                let (_, b) = mp_support(law.rho).expect("rho validated");
                (0..grid_points)
                    .map(|k| {
                        let x = 1.05 * b * k as f64 / (grid_points - 1) as f64;
                        DensityPoint {
                            x,
                            density: mp_density(x, law.rho),
                            converged: true,
                            residual: 0.0,
                        }
                    })
                    .collect()
            }
            LimitLaw::FixedPoint(law) => law.points.clone(),
        }
    }
}

/// Spectrum of `Sigma_p` as a discrete measure.
pub fn population_measure(model: &ModelSpec) -> CliResult<DiscreteMeasure> {
    let esd = covariance_esd(&model.population_covariance().matrix)?;
    Ok(DiscreteMeasure::from_values(esd.eigenvalues())?)
}

/// ESD of the sample covariance of `n` draws.
pub fn simulate_esd(model: &ModelSpec, n: usize) -> CliResult<SpectralDistribution> {
    let s = sample_covariance(&model.sample(n))?;
    Ok(covariance_esd(&s.matrix)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareSummary {
    pub p: usize,
    pub n: usize,
    pub rho: f64,
    pub ks_distance: f64,
    pub seed: u64,
    pub law: Law,
    pub esd_atom_at_zero: f64,
    pub law_atom_at_zero: f64,
}

pub fn compare(cfg: &ExperimentConfig) -> CliResult<CompareSummary> {
    let model = cfg.model()?;
    let (p, n) = (model.p(), cfg.n);
    let rho = p as f64 / n as f64;
    let law = LimitLaw::build(cfg, &model, rho)?;
    let esd = simulate_esd(&model, n)?;
    let summary = CompareSummary {
        p,
        n,
        rho,
        ks_distance: kolmogorov_distance(&esd, &law),
        seed: model.seed(),
        law: cfg.law,
        esd_atom_at_zero: esd.mass_at(0.0),
        law_atom_at_zero: law.atom_at_zero(),
    };
    if let Some(dir) = &cfg.output_dir {
        write_text(&dir.join("eigenvalues.csv"), &format!("eigenvalue\n{}", esd.to_csv()))?;
        write_text(&dir.join("density.csv"), &density_csv(&law.density(cfg.grid_points)))?;
        write_text(&dir.join("summary.json"), &to_json(&summary))?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub p: usize,
    pub n: usize,
    pub rho: f64,
    pub ks_mean: f64,
    pub ks: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub law: Law,
    pub seeds: Vec<u64>,
    pub rows: Vec<SweepRow>,
    /// Spearman correlation of mean KS distance against `p`.
    pub spearman: f64,
    pub strictly_decreasing: bool,
}

/// KS distance over several sizes sharing one ratio, averaged over seeds
/// `seed, seed + 1, ...`.
pub fn sweep(cfg: &ExperimentConfig, sizes: &[(usize, usize)], seeds: usize) -> CliResult<SweepReport> {
    if sizes.is_empty() {
        return Err(CliError::input("need at least one size"));
    }
    if seeds == 0 {
        return Err(CliError::input("need at least one seed"));
    }
    let ratio = |&(p, n): &(usize, usize)| p as f64 / n as f64;
    let target = cfg.rho.unwrap_or_else(|| ratio(&sizes[0]));
    if let Some(bad) = sizes.iter().find(|s| (ratio(s) - target).abs() > 0.01 * target) {
        return Err(CliError::input(format!(
            "size {}x{} has p/n = {} but the sweep ratio is {target}",
            bad.0,
            bad.1,
            ratio(bad)
        )));
    }
    let base = cfg.model()?;
    let seed_list: Vec<u64> = (0..seeds as u64).map(|k| base.seed().wrapping_add(k)).collect();
    let mut rows = Vec::with_capacity(sizes.len());
    for &(p, n) in sizes {
        let model = base.resized(p)?;
        let rho = p as f64 / n as f64;
        let law = LimitLaw::build(cfg, &model, rho)?;
        let ks = seed_list
            .iter()
            .map(|&seed| Ok(kolmogorov_distance(&simulate_esd(&model.clone().with_seed(seed), n)?, &law)))
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(SweepRow {
            p,
            n,
            rho,
            ks_mean: ks.iter().sum::<f64>() / ks.len() as f64,
            ks,
        });
    }
    let ps: Vec<f64> = rows.iter().map(|r| r.p as f64).collect();
    let means: Vec<f64> = rows.iter().map(|r| r.ks_mean).collect();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by_key(|&i| rows[i].p);
    let report = SweepReport {
        law: cfg.law,
        seeds: seed_list,
        spearman: if rows.len() > 1 { spearman(&ps, &means) } else { 0.0 },
        strictly_decreasing: order.windows(2).all(|w| means[w[1]] < means[w[0]]),
        rows,
    };
    if let Some(dir) = &cfg.output_dir {
        write_text(&dir.join("sweep.csv"), &sweep_csv(&report))?;
        write_text(&dir.join("sweep.json"), &to_json(&report))?;
    }
    Ok(report)
}

fn sweep_csv(report: &SweepReport) -> String {
    let mut out = String::from("p,n,rho,ks_mean");
    for seed in &report.seeds {
        out.push_str(&format!(",ks_seed_{seed}"));
    }
    out.push('\n');
    for row in &report.rows {
        out.push_str(&format!("{},{},{},{}", row.p, row.n, format_f64(row.rho), format_f64(row.ks_mean)));
        for ks in &row.ks {
            out.push(',');
            out.push_str(&format_f64(*ks));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatrixChoice {
    Identity,
    /// `Q diag(-1..1) Q^T` with a seeded random orthogonal `Q`; `||A|| = 1`.
    RotatedDiag,
    File(PathBuf),
}

pub fn rotated_diagonal(p: usize, seed: u64) -> CliResult<DMatrix<f64>> {
    let mut rng = stream_rng(seed, u64::MAX);
    let g = DMatrix::from_fn(p, p, |_, _| rng.random::<f64>() - 0.5);
    let q = symmetric_eigen(&((&g + g.transpose()) * 0.5))?.vectors;
    let diag = DVector::from_fn(p, |i, _| if p == 1 { 1.0 } else { -1.0 + 2.0 * i as f64 / (p - 1) as f64 });
    let a = &q * DMatrix::from_diagonal(&diag) * q.transpose();
    Ok((&a + a.transpose()) * 0.5)
}

pub fn verify_bounds(cfg: &ExperimentConfig, choice: &MatrixChoice) -> CliResult<VarianceBoundReport> {
    let model = cfg.model()?;
    let p = model.p();
    let a = match choice {
        MatrixChoice::Identity => DMatrix::identity(p, p),
        MatrixChoice::RotatedDiag => rotated_diagonal(p, model.seed())?,
        MatrixChoice::File(path) => crate::io::read_matrix_csv(path)?,
    };
    let cert = model.canonical_dominating_set();
    let report = verify_variance_bounds(&model, &a, &cert, cfg.reps)?;
    if let Some(dir) = &cfg.output_dir {
        write_text(&dir.join("bounds.json"), &to_json(&report))?;
    }
    Ok(report)
}

/// Density of the fixed-point law of the atoms in `mu_path`. Points whose
/// solve failed are flagged, not dropped.
pub fn stieltjes(mu_path: &Path, rho: f64, grid: &[f64], eta: Option<f64>) -> CliResult<Vec<DensityPoint>> {
    let mu = read_atoms_csv(mu_path)?;
    let eta = eta.unwrap_or_else(|| graphdep::stieltjes::default_eta(&mu));
    Ok(density_from_stieltjes(&mu, rho, grid, eta)?)
}
