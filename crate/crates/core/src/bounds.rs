//! Variance bounds for quadratic forms `x^T A x` of graph-dependent vectors
//! and the matrix constructions behind them.
//!
//! For a d-dominating set `V` the ring mask keeps `a_ij` exactly when some
//! `v in V` has `i, j in B_2(v)`. The masked form expands by
//! inclusion–exclusion over subsets `nu` of `V` whose balls intersect, and
//! the remainder `A - Å` vanishes on pairs at graph distance at most 2.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{verify_dominating, Bfs, DependencyGraph, DominatingSetCertificate};
use crate::linalg::{check_symmetric, max_abs, spectral_norm};
use crate::models::{ModelSpec, PopulationCovariance};
use crate::stats::{variance_estimate, Estimate};

/// Largest `d` for which inclusion–exclusion is enumerated.
pub const MAX_ENUMERATION_D: usize = 12;

const SYMMETRY_TOL: f64 = 1e-12;
const NORM_SLACK: f64 = 1e-8;

/// `C_d = (d^7 + 2) 2^(2d)`.
pub fn c_constant(d: usize) -> Result<f64> {
    if d < 1 {
        return Err(Error::invalid("d must be at least 1"));
    }
    let d = d as f64;
    Ok((d.powi(7) + 2.0) * 4f64.powf(d))
}

/// Spectral norm inflated by a relative `1e-8`, so that plug-in bounds are
/// never undercut by rounding in the eigensolver.
pub fn operator_norm(a: &DMatrix<f64>) -> Result<f64> {
    Ok(spectral_norm(a)? * (1.0 + NORM_SLACK))
}

fn check_dimensions(a: &DMatrix<f64>, p: usize) -> Result<()> {
    check_symmetric(a, SYMMETRY_TOL)?;
    if a.nrows() != p {
        return Err(Error::invalid(format!(
            "matrix is {0}x{0} but the graph has {p} vertices",
            a.nrows()
        )));
    }
    Ok(())
}

/// The certificate must be the one `g` itself yields for the same set.
fn check_certificate(g: &DependencyGraph, cert: &DominatingSetCertificate) -> Result<()> {
    if cert.vertices().iter().any(|&v| v >= g.p()) {
        return Err(Error::invalid("dominating set does not fit the graph"));
    }
    if verify_dominating(g, cert.vertices())? != *cert {
        return Err(Error::invalid("certificate was built for a different graph"));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct MaskedMatrix {
    pub original: DMatrix<f64>,
    pub masked: DMatrix<f64>,
    pub complement: DMatrix<f64>,
    pub certificate: DominatingSetCertificate,
}

/// `(i, j)` lies in `B_2(v)^2` for some member `v`.
fn ring_pattern(p: usize, cert: &DominatingSetCertificate) -> Vec<bool> {
    let mut keep = vec![false; p * p];
    for ball in cert.balls2() {
        for &i in ball {
            for &j in ball {
                keep[i * p + j] = true;
            }
        }
    }
    keep
}

/// Splits `A` into the ring-masked part and its complement, checking the
/// zero pattern and both norm inequalities on the way out.
pub fn ring_mask(a: &DMatrix<f64>, g: &DependencyGraph, cert: &DominatingSetCertificate) -> Result<MaskedMatrix> {
    let p = g.p();
    check_dimensions(a, p)?;
    check_certificate(g, cert)?;
    let keep = ring_pattern(p, cert);
    let masked = DMatrix::from_fn(p, p, |i, j| if keep[i * p + j] { a[(i, j)] } else { 0.0 });
    let complement = DMatrix::from_fn(p, p, |i, j| if keep[i * p + j] { 0.0 } else { a[(i, j)] });

    let mut bfs = Bfs::new(p);
    for i in 0..p {
        for &(j, _) in bfs.run(g, i, 2) {
            if complement[(i, j)] != 0.0 {
                return Err(Error::Internal(format!(
                    "complement is nonzero at ({}, {}) with distance <= 2",
                    i + 1,
                    j + 1
                )));
            }
        }
    }

    let norm = spectral_norm(a)?;
    let scale = (1.0 + NORM_SLACK) * norm + 1e-12 * max_abs(a);
    let levels = 2f64.powi(cert.d() as i32);
    let masked_norm = spectral_norm(&masked)?;
    if masked_norm > (levels - 1.0) * scale {
        return Err(Error::Internal(format!(
            "masked norm {masked_norm} exceeds (2^d - 1) ||A|| = {}",
            (levels - 1.0) * norm
        )));
    }
    let complement_norm = spectral_norm(&complement)?;
    if complement_norm > levels * scale {
        return Err(Error::Internal(format!(
            "complement norm {complement_norm} exceeds 2^d ||A|| = {}",
            levels * norm
        )));
    }
    Ok(MaskedMatrix {
        original: a.clone(),
        masked,
        complement,
        certificate: cert.clone(),
    })
}

/// One subset `nu` of the dominating set with nonempty `B_nu`.
#[derive(Debug, Clone, PartialEq)]
pub struct InclusionExclusionTerm {
    /// Member vertices, sorted.
    pub subset: Vec<usize>,
    /// `B_nu`, the intersection of their 2-balls, sorted.
    pub intersection: Vec<usize>,
    /// `x_nu^T A_nu x_nu`, unsigned.
    pub value: f64,
}

impl InclusionExclusionTerm {
    /// `(-1)^(s - 1)`.
    pub fn sign(&self) -> f64 {
        if self.subset.len() % 2 == 1 {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InclusionExclusion {
    pub total: f64,
    pub terms: Vec<InclusionExclusionTerm>,
}

impl InclusionExclusion {
    /// `counts[i][s - 1]`: number of size-`s` subsets whose `B_nu`
    /// contains vertex `i`.
    pub fn covering_counts(&self, p: usize) -> Vec<Vec<usize>> {
        let depth = self.terms.iter().map(|t| t.subset.len()).max().unwrap_or(0);
        let mut counts = vec![vec![0; depth]; p];
        for t in &self.terms {
            for &i in &t.intersection {
                counts[i][t.subset.len() - 1] += 1;
            }
        }
        counts
    }
}

fn intersect_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn block_form(a: &DMatrix<f64>, x: &[f64], block: &[usize]) -> f64 {
    block
        .iter()
        .map(|&i| x[i] * block.iter().map(|&j| a[(i, j)] * x[j]).sum::<f64>())
        .sum()
}

struct Enumeration<'a> {
    a: &'a DMatrix<f64>,
    x: &'a [f64],
    cert: &'a DominatingSetCertificate,
    /// For member `k`, later members within distance 4.
    near: Vec<Vec<usize>>,
    terms: Vec<InclusionExclusionTerm>,
}

impl Enumeration<'_> {
    fn extend(&mut self, members: &mut Vec<usize>, intersection: &[usize], candidates: &[usize]) {
        for (idx, &c) in candidates.iter().enumerate() {
            let next = intersect_sorted(intersection, self.cert.ball2(c));
            if next.is_empty() {
                continue;
            }
            members.push(c);
            let value = block_form(self.a, self.x, &next);
            self.terms.push(InclusionExclusionTerm {
                subset: members.iter().map(|&k| self.cert.vertices()[k]).collect(),
                intersection: next.clone(),
                value,
            });
            let further = intersect_sorted(&candidates[idx + 1..], &self.near[c]);
            self.extend(members, &next, &further);
            members.pop();
        }
    }
}

/// Evaluates `x^T Å x` as the alternating sum over subsets of the
/// dominating set with nonempty ball intersection.
pub fn inclusion_exclusion_value(
    a: &DMatrix<f64>,
    g: &DependencyGraph,
    cert: &DominatingSetCertificate,
    x: &[f64],
) -> Result<InclusionExclusion> {
    let p = g.p();
    check_dimensions(a, p)?;
    if x.len() != p {
        return Err(Error::invalid(format!("vector has length {}, expected {p}", x.len())));
    }
    check_certificate(g, cert)?;
    if cert.d() > MAX_ENUMERATION_D {
        return Err(Error::invalid(format!(
            "d = {} exceeds the enumeration limit {MAX_ENUMERATION_D}",
            cert.d()
        )));
    }
    let members = cert.vertices();
    let mut index = vec![usize::MAX; p];
    for (k, &v) in members.iter().enumerate() {
        index[v] = k;
    }
    let mut bfs = Bfs::new(p);
    let near: Vec<Vec<usize>> = members
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let mut out: Vec<usize> = bfs
                .run(g, v, 4)
                .iter()
                .map(|&(u, _)| index[u])
                .filter(|&j| j != usize::MAX && j > k)
                .collect();
            out.sort_unstable();
            out
        })
        .collect();

    let mut run = Enumeration {
        a,
        x,
        cert,
        near,
        terms: Vec::new(),
    };
    let all: Vec<usize> = (0..members.len()).collect();
    let everything: Vec<usize> = (0..p).collect();
    run.extend(&mut Vec::new(), &everything, &all);
    let terms = run.terms;
    if let Some(t) = terms.iter().find(|t| t.subset.len() > cert.d()) {
        return Err(Error::Internal(format!(
            "{} balls intersect although d = {}",
            t.subset.len(),
            cert.d()
        )));
    }
    let total = terms.iter().map(|t| t.sign() * t.value).sum();
    Ok(InclusionExclusion { total, terms })
}

/// `C_d ||A||^2 (Delta + 1) sum_k E X_k^4`.
pub fn variance_bound_general(op_norm: f64, max_degree: usize, d: usize, fourth_moments: &[f64]) -> Result<f64> {
    Ok(c_constant(d)? * op_norm * op_norm * (max_degree + 1) as f64 * fourth_moments.iter().sum::<f64>())
}

/// `2 ||A||^2 tr(Sigma^2)`, valid when `A` vanishes on pairs at distance
/// at most 2.
pub fn variance_bound_local(op_norm: f64, sigma: &PopulationCovariance) -> f64 {
    2.0 * op_norm * op_norm * sigma.trace_of_square()
}

/// Whether `A` is zero on every pair (diagonal included) at graph distance
/// at most 2. With `tolerance = None` the entries must be exactly zero;
/// otherwise `|a_ij| <= tolerance` is accepted.
pub fn qualifies_local(a: &DMatrix<f64>, g: &DependencyGraph, tolerance: Option<f64>) -> bool {
    let zero = |v: f64| match tolerance {
        None => v == 0.0,
        Some(t) => v.abs() <= t,
    };
    let mut bfs = Bfs::new(g.p());
    (0..g.p()).all(|i| bfs.run(g, i, 2).iter().all(|&(j, _)| zero(a[(i, j)])))
}

/// `2 tr((A Sigma)^2)`, the exact variance of `x^T A x` for Gaussian `x`.
pub fn gaussian_oracle(a: &DMatrix<f64>, sigma: &DMatrix<f64>) -> f64 {
    let m = a * sigma;
    2.0 * m.component_mul(&m.transpose()).sum()
}

/// Row-wise nonzeros of the upper triangle, off-diagonal weights doubled.
fn upper_nonzeros(a: &DMatrix<f64>) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for j in 0..a.ncols() {
        for i in 0..=j {
            let v = a[(i, j)];
            if v != 0.0 {
                out.push((i, j, if i == j { v } else { 2.0 * v }));
            }
        }
    }
    out
}

/// Sample variance of `x^T A x` over `reps` draws with a jackknife
/// standard error.
pub fn monte_carlo_variance(model: &ModelSpec, a: &DMatrix<f64>, reps: usize) -> Result<Estimate> {
    check_dimensions(a, model.p())?;
    if reps < 100 {
        return Err(Error::invalid(format!("need at least 100 replicates, got {reps}")));
    }
    let p = model.p();
    let sparse = upper_nonzeros(a);
    let forms = if 2 * sparse.len() < p * p / 4 {
        model.map_draws(reps, |x| sparse.iter().map(|&(i, j, w)| w * x[i] * x[j]).sum::<f64>())
    } else {
        let dense: Vec<f64> = a.iter().copied().collect();
        model.map_draws(reps, |x| {
            dense
                .chunks_exact(p)
                .zip(x)
                .map(|(col, &xj)| xj * col.iter().zip(x).map(|(aij, xi)| aij * xi).sum::<f64>())
                .sum::<f64>()
        })
    };
    Ok(variance_estimate(&forms))
}

/// Monte Carlo check of both variance bounds for one model and matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceBoundReport {
    pub p: usize,
    pub reps: usize,
    pub d: usize,
    pub max_degree: usize,
    pub op_norm: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub bound_general: f64,
    pub bound_local: Option<f64>,
    pub gaussian_oracle: Option<f64>,
    pub satisfied_general: bool,
    pub satisfied_local: Option<bool>,
    /// Whether the estimate lies within 5 standard errors of the oracle.
    pub matches_gaussian_oracle: Option<bool>,
}

/// Standard errors used by every statistical bound check.
pub const CHECK_SIGMAS: f64 = 5.0;

pub fn verify_variance_bounds(
    model: &ModelSpec,
    a: &DMatrix<f64>,
    cert: &DominatingSetCertificate,
    reps: usize,
) -> Result<VarianceBoundReport> {
    let g = model.dependency_graph();
    check_dimensions(a, g.p())?;
    check_certificate(&g, cert)?;
    let op_norm = operator_norm(a)?;
    let mc = monte_carlo_variance(model, a, reps)?;
    let upper = mc.estimate + CHECK_SIGMAS * mc.std_error;
    let bound_general = variance_bound_general(op_norm, g.max_degree(), cert.d(), &model.fourth_moments()?)?;
    let sigma = model.population_covariance();
    let bound_local = qualifies_local(a, &g, None).then(|| variance_bound_local(op_norm, &sigma));
    let gaussian = model
        .innovation()
        .is_gaussian()
        .then(|| gaussian_oracle(a, &sigma.matrix));
    Ok(VarianceBoundReport {
        p: g.p(),
        reps,
        d: cert.d(),
        max_degree: g.max_degree(),
        op_norm,
        estimate: mc.estimate,
        std_error: mc.std_error,
        bound_general,
        bound_local,
        gaussian_oracle: gaussian,
        satisfied_general: upper <= bound_general,
        satisfied_local: bound_local.map(|b| upper <= b),
        matches_gaussian_oracle: gaussian.map(|o| mc.covers(o, CHECK_SIGMAS)),
    })
}
