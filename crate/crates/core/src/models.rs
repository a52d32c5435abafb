//! Samplers for random vectors following the graph dependent model.
//!
//! Every built-in model is a sparse linear map of i.i.d. unit-variance
//! innovations, `X_i = sqrt(c) * sum_k w_ik * xi_k`, which gives exact
//! covariance and fourth moments and makes the dependency graph explicit:
//! entries sharing no innovation are independent.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{greedy_dominating_set, verify_dominating, DependencyGraph, DominatingSetCertificate};
use crate::stats::{mean_estimate, stream_rng, Estimate};

/// Innovation law, always standardised to mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Innovation {
    Gaussian,
    Rademacher,
    /// Student-t rescaled by `sqrt((df - 2) / df)`; needs `df > 2`.
    StudentT { df: f64 },
}

impl Innovation {
    fn validate(&self) -> Result<()> {
        match *self {
            Innovation::StudentT { df } if !(df > 2.0) => Err(Error::invalid(format!(
                "student-t innovations need df > 2 for unit variance, got {df}"
            ))),
            _ => Ok(()),
        }
    }

    /// `E xi^4`.
    pub fn fourth_moment(&self) -> Result<f64> {
        match *self {
            Innovation::Gaussian => Ok(3.0),
            Innovation::Rademacher => Ok(1.0),
            Innovation::StudentT { df } if df > 4.0 => Ok(3.0 * (df - 2.0) / (df - 4.0)),
            Innovation::StudentT { df } => Err(Error::UnsupportedMoment { df }),
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, Innovation::Gaussian)
    }

    fn sampler(&self) -> InnovationSampler {
        match *self {
            Innovation::Gaussian => InnovationSampler::Gaussian,
            Innovation::Rademacher => InnovationSampler::Rademacher,
            Innovation::StudentT { df } => InnovationSampler::StudentT {
                dist: StudentT::new(df).expect("df validated"),
                scale: ((df - 2.0) / df).sqrt(),
            },
        }
    }
}

enum InnovationSampler {
    Gaussian,
    Rademacher,
    StudentT { dist: StudentT<f64>, scale: f64 },
}

impl InnovationSampler {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            InnovationSampler::Gaussian => StandardNormal.sample(rng),
            InnovationSampler::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            InnovationSampler::StudentT { dist, scale } => dist.sample(rng) * scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WithinBlock {
    Iid,
    /// `X_i = sqrt(theta) Z_block + sqrt(1 - theta) eps_i`, `theta in [0, 1)`.
    CommonFactor { theta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    /// `X_i = sum_k c_k xi_{i+k} / |c|`, `k = 0..=m`.
    MDependent { m: usize, coeffs: Vec<f64> },
    BlockIndependent {
        blocks: Vec<usize>,
        within: WithinBlock,
    },
    /// `X_v = sum_{u in B_1(v)} xi_u / sqrt(|B_1(v)|)` over the generator.
    GraphMa { generator: DependencyGraph },
}

/// Sparse loadings: row `i` lists `(innovation, weight)` pairs.
#[derive(Debug, Clone, PartialEq)]
struct Loadings {
    innovations: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

/// A graph-dependent sampler with its declared dependency graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    kind: ModelKind,
    p: usize,
    innovation: Innovation,
    seed: u64,
    /// Common variance `c` of the entries.
    variance: f64,
    loadings: Loadings,
}

impl ModelSpec {
    pub fn m_dependent(
        p: usize,
        m: usize,
        coeffs: Vec<f64>,
        innovation: Innovation,
        seed: u64,
    ) -> Result<Self> {
        if p == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if m >= p {
            return Err(Error::invalid(format!("m = {m} must be below p = {p}")));
        }
        if coeffs.len() != m + 1 {
            return Err(Error::invalid(format!(
                "expected {} coefficients, got {}",
                m + 1,
                coeffs.len()
            )));
        }
        let norm = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::invalid("coefficient vector must be nonzero and finite"));
        }
        innovation.validate()?;
        let rows = (0..p)
            .map(|i| {
                coeffs
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| **c != 0.0)
                    .map(|(k, c)| (i + k, c / norm))
                    .collect()
            })
            .collect();
        Ok(Self {
            kind: ModelKind::MDependent { m, coeffs },
            p,
            innovation,
            seed,
            variance: 1.0,
            loadings: Loadings {
                innovations: p + m,
                rows,
            },
        })
    }

    pub fn block_independent(
        blocks: Vec<usize>,
        within: WithinBlock,
        innovation: Innovation,
        seed: u64,
    ) -> Result<Self> {
        if blocks.is_empty() || blocks.contains(&0) {
            return Err(Error::invalid("blocks must be nonempty"));
        }
        if let WithinBlock::CommonFactor { theta } = within {
            if !(0.0..1.0).contains(&theta) {
                return Err(Error::invalid(format!("theta = {theta} outside [0, 1)")));
            }
        }
        innovation.validate()?;
        let p: usize = blocks.iter().sum();
        let mut rows = Vec::with_capacity(p);
        let mut next = 0;
        for &size in &blocks {
            match within {
                WithinBlock::Iid => {
                    for _ in 0..size {
                        rows.push(vec![(next, 1.0)]);
                        next += 1;
                    }
                }
                WithinBlock::CommonFactor { theta } => {
                    let factor = next;
                    next += 1;
                    for _ in 0..size {
                        let mut row = Vec::with_capacity(2);
                        if theta > 0.0 {
                            row.push((factor, theta.sqrt()));
                        }
                        row.push((next, (1.0 - theta).sqrt()));
                        rows.push(row);
                        next += 1;
                    }
                }
            }
        }
        Ok(Self {
            kind: ModelKind::BlockIndependent { blocks, within },
            p,
            innovation,
            seed,
            variance: 1.0,
            loadings: Loadings {
                innovations: next,
                rows,
            },
        })
    }

    pub fn graph_ma(generator: DependencyGraph, innovation: Innovation, seed: u64) -> Result<Self> {
        innovation.validate()?;
        let p = generator.p();
        let rows = (0..p)
            .map(|v| {
                let weight = 1.0 / ((generator.degree(v) + 1) as f64).sqrt();
                let mut row: Vec<(usize, f64)> = std::iter::once(v)
                    .chain(generator.neighbors(v).iter().copied())
                    .map(|u| (u, weight))
                    .collect();
                row.sort_by_key(|&(u, _)| u);
                row
            })
            .collect();
        Ok(Self {
            kind: ModelKind::GraphMa { generator },
            p,
            innovation,
            seed,
            variance: 1.0,
            loadings: Loadings {
                innovations: p,
                rows,
            },
        })
    }

    /// Rescales the vector by `sqrt(c)` so that `tr(Sigma) / p = c`.
    pub fn with_variance(mut self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::invalid(format!("variance scale must be positive, got {c}")));
        }
        self.variance = c;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn innovation(&self) -> Innovation {
        self.innovation
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// The same model at dimension `p`. The m-dependent model keeps `m` and
    /// its coefficients; a block model needs equal block sizes dividing `p`.
    pub fn resized(&self, p: usize) -> Result<Self> {
        let model = match &self.kind {
            ModelKind::MDependent { m, coeffs } => {
                Self::m_dependent(p, *m, coeffs.clone(), self.innovation, self.seed)?
            }
            ModelKind::BlockIndependent { blocks, within } => {
                let size = blocks[0];
                if blocks.iter().any(|&b| b != size) || !p.is_multiple_of(size) || p == 0 {
                    return Err(Error::invalid(format!(
                        "cannot resize blocks {blocks:?} to p = {p}"
                    )));
                }
                Self::block_independent(vec![size; p / size], *within, self.innovation, self.seed)?
            }
            ModelKind::GraphMa { .. } => {
                if p != self.p {
                    return Err(Error::invalid("graph moving-average model has a fixed dimension"));
                }
                self.clone()
            }
        };
        model.with_variance(self.variance)
    }

    /// Declared dependency graph: index sets that are non-adjacent in it are
    /// independent by construction.
    pub fn dependency_graph(&self) -> DependencyGraph {
        match &self.kind {
            ModelKind::MDependent { m, .. } => DependencyGraph::m_dependent(self.p, *m),
            ModelKind::BlockIndependent { blocks, .. } => {
                DependencyGraph::blocks(blocks).expect("blocks validated")
            }
            ModelKind::GraphMa { generator } => generator.square(),
        }
    }

    /// The textbook dominating set for the model's graph: every `(m+1)`-th
    /// index for m-dependent models, the first index of every block for
    /// block models, and a greedy set otherwise.
    pub fn canonical_dominating_set(&self) -> DominatingSetCertificate {
        let g = self.dependency_graph();
        let set: Vec<usize> = match &self.kind {
            ModelKind::MDependent { m, .. } => {
                (1..=self.p / (m + 1)).map(|k| k * (m + 1) - 1).collect()
            }
            ModelKind::BlockIndependent { blocks, .. } => blocks
                .iter()
                .scan(0, |start, &b| {
                    let first = *start;
                    *start += b;
                    Some(first)
                })
                .collect(),
            ModelKind::GraphMa { .. } => return greedy_dominating_set(&g),
        };
        verify_dominating(&g, &set).expect("canonical set dominates")
    }

    /// Writes draw number `stream` into `out` (length `p`).
    pub fn sample_into(&self, stream: u64, out: &mut [f64], scratch: &mut Vec<f64>) {
        let sampler = self.innovation.sampler();
        self.sample_with(&sampler, stream, out, scratch);
    }

    fn sample_with(
        &self,
        sampler: &InnovationSampler,
        stream: u64,
        out: &mut [f64],
        scratch: &mut Vec<f64>,
    ) {
        let mut rng = stream_rng(self.seed, stream);
        scratch.clear();
        scratch.extend((0..self.loadings.innovations).map(|_| sampler.draw(&mut rng)));
        let scale = self.variance.sqrt();
        for (x, row) in out.iter_mut().zip(&self.loadings.rows) {
            *x = scale * row.iter().map(|&(k, w)| w * scratch[k]).sum::<f64>();
        }
    }

    /// `n` independent draws as the columns of a `p x n` matrix. Column `k`
    /// comes from sub-stream `k`, so the result does not depend on how the
    /// columns are scheduled.
    pub fn sample(&self, n: usize) -> DMatrix<f64> {
        self.sample_range(0, n)
    }

    /// Draws `first .. first + n` as columns.
    pub fn sample_range(&self, first: u64, n: usize) -> DMatrix<f64> {
        let mut data = vec![0.0; self.p * n];
        let sampler = self.innovation.sampler();
        if self.p > 0 {
            data.par_chunks_mut(self.p)
                .enumerate()
                .for_each_init(Vec::new, |scratch, (k, col)| {
                    self.sample_with(&sampler, first + k as u64, col, scratch)
                });
        }
        DMatrix::from_vec(self.p, n, data)
    }

    /// Applies `f` to draws `0..reps` in parallel, returning results in
    /// draw order.
    pub fn map_draws<T, F>(&self, reps: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&[f64]) -> T + Sync,
    {
        let sampler = self.innovation.sampler();
        (0..reps)
            .into_par_iter()
            .map_init(
                || (Vec::new(), vec![0.0; self.p]),
                |(scratch, x), k| {
                    self.sample_with(&sampler, k as u64, x, scratch);
                    f(x)
                },
            )
            .collect()
    }

    /// Closed-form population covariance.
    pub fn population_covariance(&self) -> PopulationCovariance {
        let p = self.p;
        let mut sigma = DMatrix::zeros(p, p);
        match &self.kind {
            ModelKind::MDependent { m, coeffs } => {
                let norm2: f64 = coeffs.iter().map(|c| c * c).sum();
                for lag in 0..=*m {
                    let value: f64 = (0..=m - lag).map(|k| coeffs[k] * coeffs[k + lag]).sum::<f64>() / norm2;
                    for i in 0..p.saturating_sub(lag) {
                        sigma[(i, i + lag)] = value;
                        sigma[(i + lag, i)] = value;
                    }
                }
            }
            ModelKind::BlockIndependent { blocks, within } => {
                let rho = match within {
                    WithinBlock::Iid => 0.0,
                    WithinBlock::CommonFactor { theta } => *theta,
                };
                let mut start = 0;
                for &b in blocks {
                    for i in start..start + b {
                        for j in start..start + b {
                            sigma[(i, j)] = if i == j { 1.0 } else { rho };
                        }
                    }
                    start += b;
                }
            }
            ModelKind::GraphMa { generator } => {
                let balls: Vec<Vec<usize>> = (0..p)
                    .map(|v| generator.ball(v, 1).expect("vertex in range"))
                    .collect();
                for u in 0..p {
                    for v in u..p {
                        let shared = sorted_intersection_len(&balls[u], &balls[v]);
                        if shared > 0 {
                            let value =
                                shared as f64 / ((balls[u].len() * balls[v].len()) as f64).sqrt();
                            sigma[(u, v)] = value;
                            sigma[(v, u)] = value;
                        }
                    }
                }
            }
        }
        PopulationCovariance::new(sigma * self.variance)
    }

    /// Covariance computed directly from the loadings, `W W^T`.
    pub fn covariance_from_loadings(&self) -> DMatrix<f64> {
        let w = DMatrix::from_fn(self.p, self.loadings.innovations, |i, k| {
            self.loadings.rows[i]
                .iter()
                .find(|&&(j, _)| j == k)
                .map_or(0.0, |&(_, w)| w)
        });
        &w * w.transpose() * self.variance
    }

    /// Exact `E X_k^4` per entry:
    /// `c^2 (3 (sum w^2)^2 + (E xi^4 - 3) sum w^4)`.
    pub fn fourth_moments(&self) -> Result<Vec<f64>> {
        let kappa = self.innovation.fourth_moment()?;
        let c2 = self.variance * self.variance;
        Ok(self
            .loadings
            .rows
            .iter()
            .map(|row| {
                let s2: f64 = row.iter().map(|(_, w)| w * w).sum();
                let s4: f64 = row.iter().map(|(_, w)| w.powi(4)).sum();
                c2 * (3.0 * s2 * s2 + (kappa - 3.0) * s4)
            })
            .collect())
    }

    /// Monte Carlo `E X_k^4` over `reps` draws.
    pub fn fourth_moments_monte_carlo(&self, reps: usize) -> Vec<Estimate> {
        let draws = self.map_draws(reps, |x| x.iter().map(|v| v.powi(4)).collect::<Vec<_>>());
        (0..self.p)
            .map(|k| mean_estimate(&draws.iter().map(|d| d[k]).collect::<Vec<_>>()))
            .collect()
    }

    /// Monte Carlo estimate of `sum_k E[Z_k 1(Z_k > eps)]` with
    /// `Z_k = p^-1 sum_{i in block k} X_i^2`.
    pub fn lindeberg_statistic(
        &self,
        blocks: &[Vec<usize>],
        epsilon: f64,
        reps: usize,
    ) -> Result<Estimate> {
        if !(epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        let mut seen = vec![false; self.p];
        for &i in blocks.iter().flatten() {
            if i >= self.p || seen[i] {
                return Err(Error::invalid("blocks must partition 0..p"));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("blocks must partition 0..p"));
        }
        let p = self.p as f64;
        let values = self.map_draws(reps, |x| {
            blocks
                .iter()
                .map(|block| block.iter().map(|&i| x[i] * x[i]).sum::<f64>() / p)
                .filter(|&z| z > epsilon)
                .sum::<f64>()
        });
        Ok(mean_estimate(&values))
    }
}

/// Consecutive blocks of `size` covering `0..p`; the last may be shorter.
pub fn consecutive_blocks(p: usize, size: usize) -> Vec<Vec<usize>> {
    (0..p)
        .step_by(size.max(1))
        .map(|start| (start..(start + size).min(p)).collect())
        .collect()
}

fn sorted_intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// `Sigma_p` with the two normalised traces the limit theorems use.
#[derive(Debug, Clone)]
pub struct PopulationCovariance {
    pub matrix: DMatrix<f64>,
    /// `tr(Sigma) / p`.
    pub trace_over_p: f64,
    /// `tr(Sigma^2) / p^2`.
    pub hs_norm_sq_over_p2: f64,
}

impl PopulationCovariance {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        let p = matrix.nrows() as f64;
        let trace_over_p = matrix.trace() / p;
        let hs_norm_sq_over_p2 = matrix.norm_squared() / (p * p);
        Self {
            matrix,
            trace_over_p,
            hs_norm_sq_over_p2,
        }
    }

    /// `tr(Sigma^2)`, the squared Frobenius norm for symmetric `Sigma`.
    pub fn trace_of_square(&self) -> f64 {
        self.matrix.norm_squared()
    }
}

/// JSON model description. Vertex ids in `edges` are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[usize; 2]>>,
    pub innovation: InnovationTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKindTag {
    MDependent,
    BlockIndependent,
    GraphMa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnovationTag {
    Gaussian,
    Rademacher,
    StudentT,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn build(&self) -> Result<ModelSpec> {
        let innovation = match (self.innovation, self.df) {
            (InnovationTag::Gaussian, None) => Innovation::Gaussian,
            (InnovationTag::Rademacher, None) => Innovation::Rademacher,
            (InnovationTag::StudentT, Some(df)) => Innovation::StudentT { df },
            (InnovationTag::StudentT, None) => {
                return Err(Error::invalid("student-t innovation needs `df`"))
            }
            (_, Some(_)) => return Err(Error::invalid("`df` only applies to student-t")),
        };
        let reject = |field: &str, present: bool| {
            if present {
                Err(Error::invalid(format!("`{field}` does not apply to {:?}", self.kind)))
            } else {
                Ok(())
            }
        };
        match self.kind {
            ModelKindTag::MDependent => {
                reject("blocks", self.blocks.is_some())?;
                reject("theta", self.theta.is_some())?;
                reject("edges", self.edges.is_some())?;
                let p = self.p.ok_or_else(|| Error::invalid("missing `p`"))?;
                let m = self.m.ok_or_else(|| Error::invalid("missing `m`"))?;
                let coeffs = self.coeffs.clone().unwrap_or_else(|| vec![1.0; m + 1]);
                ModelSpec::m_dependent(p, m, coeffs, innovation, self.seed)
            }
            ModelKindTag::BlockIndependent => {
                reject("m", self.m.is_some())?;
                reject("coeffs", self.coeffs.is_some())?;
                reject("edges", self.edges.is_some())?;
                let blocks = self.blocks.clone().ok_or_else(|| Error::invalid("missing `blocks`"))?;
                if let Some(p) = self.p {
                    if p != blocks.iter().sum::<usize>() {
                        return Err(Error::invalid("block sizes must sum to `p`"));
                    }
                }
                let within = match self.theta {
                    None => WithinBlock::Iid,
                    Some(theta) => WithinBlock::CommonFactor { theta },
                };
                ModelSpec::block_independent(blocks, within, innovation, self.seed)
            }
            ModelKindTag::GraphMa => {
                reject("m", self.m.is_some())?;
                reject("coeffs", self.coeffs.is_some())?;
                reject("blocks", self.blocks.is_some())?;
                reject("theta", self.theta.is_some())?;
                let p = self.p.ok_or_else(|| Error::invalid("missing `p`"))?;
                let edges = self.edges.clone().unwrap_or_default();
                let mut zero_based = Vec::with_capacity(edges.len());
                for [u, v] in edges {
                    if u == 0 || v == 0 {
                        return Err(Error::invalid("edge vertex ids are 1-based"));
                    }
                    zero_based.push((u - 1, v - 1));
                }
                let generator = DependencyGraph::from_edges(p, zero_based)?;
                ModelSpec::graph_ma(generator, innovation, self.seed)
            }
        }
    }
}

impl ModelSpec {
    /// JSON description that rebuilds this model (the variance scale is
    /// not part of the format).
    pub fn to_config(&self) -> ModelConfig {
        let (innovation, df) = match self.innovation {
            Innovation::Gaussian => (InnovationTag::Gaussian, None),
            Innovation::Rademacher => (InnovationTag::Rademacher, None),
            Innovation::StudentT { df } => (InnovationTag::StudentT, Some(df)),
        };
        let mut cfg = ModelConfig {
            kind: ModelKindTag::MDependent,
            p: Some(self.p),
            m: None,
            coeffs: None,
            blocks: None,
            theta: None,
            edges: None,
            innovation,
            df,
            seed: self.seed,
        };
        match &self.kind {
            ModelKind::MDependent { m, coeffs } => {
                cfg.m = Some(*m);
                cfg.coeffs = Some(coeffs.clone());
            }
            ModelKind::BlockIndependent { blocks, within } => {
                cfg.kind = ModelKindTag::BlockIndependent;
                cfg.blocks = Some(blocks.clone());
                if let WithinBlock::CommonFactor { theta } = within {
                    cfg.theta = Some(*theta);
                }
            }
            ModelKind::GraphMa { generator } => {
                cfg.kind = ModelKindTag::GraphMa;
                cfg.edges = Some(generator.edges().map(|(u, v)| [u + 1, v + 1]).collect());
            }
        }
        cfg
    }
}
