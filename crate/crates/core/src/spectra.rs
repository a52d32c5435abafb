//! Sample covariance matrices, empirical spectral distributions and the
//! Kolmogorov distance between a spectral distribution and a CDF.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{max_abs, symmetric_eigenvalues};

/// Relative size below which covariance eigenvalues count as rounding
/// noise around zero.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-10;

/// `(1/n) sum_k x_k x_k^T`, without centring.
#[derive(Debug, Clone)]
pub struct SampleCovariance {
    pub matrix: DMatrix<f64>,
    pub p: usize,
    pub n: usize,
}

impl SampleCovariance {
    /// `p / n`.
    pub fn ratio(&self) -> f64 {
        self.p as f64 / self.n as f64
    }
}

/// Sample covariance of the columns of a `p x n` matrix.
pub fn sample_covariance(samples: &DMatrix<f64>) -> Result<SampleCovariance> {
    let (p, n) = samples.shape();
    if n == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let mut matrix = samples * samples.transpose();
    matrix /= n as f64;
    // Exact symmetry regardless of the product kernel.
    for i in 0..p {
        for j in 0..i {
            let v = 0.5 * (matrix[(i, j)] + matrix[(j, i)]);
            matrix[(i, j)] = v;
            matrix[(j, i)] = v;
        }
    }
    Ok(SampleCovariance { matrix, p, n })
}

/// The uniform measure on the eigenvalues of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDistribution {
    eigenvalues: Vec<f64>,
}

impl SpectralDistribution {
    /// From any list of values; sorts them.
    pub fn from_values(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        Self { eigenvalues: values }
    }

    /// Ascending eigenvalues, each carrying mass `1/p`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Right-continuous CDF `#{lambda_i <= x} / p`.
    pub fn cdf(&self, x: f64) -> f64 {
        let count = self.eigenvalues.partition_point(|&v| v <= x);
        count as f64 / self.len() as f64
    }

    /// Left limit `#{lambda_i < x} / p`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        let count = self.eigenvalues.partition_point(|&v| v < x);
        count as f64 / self.len() as f64
    }

    /// Mass of the atom at `x`.
    pub fn mass_at(&self, x: f64) -> f64 {
        self.cdf(x) - self.cdf_left(x)
    }

    /// One value per line, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 24);
        for v in &self.eigenvalues {
            let _ = writeln!(out, "{}", format_f64(*v));
        }
        out
    }
}

/// Scientific notation with 17 significant digits, enough to round-trip any
/// `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// ESD of an arbitrary symmetric matrix.
pub fn esd(matrix: &DMatrix<f64>) -> Result<SpectralDistribution> {
    Ok(SpectralDistribution::from_values(symmetric_eigenvalues(matrix)?))
}

/// ESD of a covariance-type matrix. Eigenvalues within `1e-10 max|a|` of
/// zero are set to exactly zero, so rank deficiency shows up as an exact
/// atom; anything more negative is an error.
pub fn covariance_esd(matrix: &DMatrix<f64>) -> Result<SpectralDistribution> {
    let mut values = symmetric_eigenvalues(matrix)?;
    let tol = ZERO_EIGENVALUE_TOL * max_abs(matrix).max(values.last().copied().unwrap_or(0.0));
    for v in &mut values {
        if *v < -tol {
            return Err(Error::invalid(format!(
                "covariance matrix has eigenvalue {v:e} below {:e}",
                -tol
            )));
        }
        if v.abs() <= tol {
            *v = 0.0;
        }
    }
    Ok(SpectralDistribution::from_values(values))
}

/// A distribution function with explicit left limits, so atoms are handled
/// exactly.
pub trait Cdf {
    fn cdf(&self, x: f64) -> f64;

    /// `lim_{y -> x-} F(y)`; equal to `cdf` for continuous laws.
    fn cdf_left(&self, x: f64) -> f64 {
        self.cdf(x)
    }
}

impl Cdf for SpectralDistribution {
    fn cdf(&self, x: f64) -> f64 {
        SpectralDistribution::cdf(self, x)
    }

    fn cdf_left(&self, x: f64) -> f64 {
        SpectralDistribution::cdf_left(self, x)
    }
}

/// Wraps a closure as a continuous CDF.
pub struct ContinuousCdf<F>(pub F);

impl<F: Fn(f64) -> f64> Cdf for ContinuousCdf<F> {
    fn cdf(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

/// `sup_x |F_emp(x) - F(x)|`, evaluated exactly at the jump points of the
/// empirical CDF (from both sides).
pub fn kolmogorov_distance<C: Cdf + ?Sized>(esd: &SpectralDistribution, cdf: &C) -> f64 {
    let values = esd.eigenvalues();
    let p = values.len() as f64;
    let mut sup = 0.0f64;
    let mut i = 0;
    while i < values.len() {
        let x = values[i];
        let mut j = i;
        while j < values.len() && values[j] == x {
            j += 1;
        }
        let below = i as f64 / p;
        let upto = j as f64 / p;
        sup = sup
            .max((cdf.cdf_left(x) - below).abs())
            .max((cdf.cdf(x) - upto).abs());
        i = j;
    }
    sup
}

/// Kolmogorov distance between two spectral distributions.
pub fn kolmogorov_distance_between(a: &SpectralDistribution, b: &SpectralDistribution) -> f64 {
    // The sup over x of a difference of step functions is attained at a
    // jump of either side, approached from the left or the right.
    let mut sup = 0.0f64;
    for &x in a.eigenvalues().iter().chain(b.eigenvalues()) {
        sup = sup
            .max((a.cdf(x) - b.cdf(x)).abs())
            .max((a.cdf_left(x) - b.cdf_left(x)).abs());
    }
    sup
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn sample_covariance_examples() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, -2.0, 0.5]);
        let s = sample_covariance(&x).unwrap();
        assert_eq!(s.matrix, &x * x.transpose());
        assert_eq!(s.ratio(), 3.0);

        let basis = DMatrix::<f64>::identity(4, 4);
        assert_eq!(sample_covariance(&basis).unwrap().matrix, basis / 4.0);

        let mut rng = stream_rng(1, 0);
        let x = DMatrix::from_fn(5, 9, |_, _| rng.random::<f64>() - 0.5);
        let s = sample_covariance(&x).unwrap();
        let mean_sq = x.column_iter().map(|c| c.norm_squared()).sum::<f64>() / 9.0;
        assert!((s.matrix.trace() - mean_sq).abs() <= 1e-12 * mean_sq);

        assert!(sample_covariance(&DMatrix::zeros(3, 0)).is_err());
    }

    #[test]
    fn esd_examples() {
        let id = esd(&DMatrix::identity(5, 5)).unwrap();
        assert_eq!(id.mass_at(1.0), 1.0);

        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 1.0, 0.0, 1.0]));
        let e = esd(&diag).unwrap();
        assert_eq!(e.cdf(0.0), 0.5);
        assert_eq!(e.cdf(1.0), 1.0);
        assert_eq!(e.cdf_left(0.0), 0.0);

        let mut rng = stream_rng(2, 0);
        let x = DMatrix::from_fn(10, 4, |_, _| rng.random::<f64>() - 0.5);
        let s = sample_covariance(&x).unwrap();
        let e = covariance_esd(&s.matrix).unwrap();
        assert!(e.mass_at(0.0) >= 6.0 / 10.0);
        assert!(e.eigenvalues().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn covariance_esd_rejects_negative_spectrum() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-0.5, 1.0]));
        assert!(covariance_esd(&m).is_err());
    }

    #[test]
    fn kolmogorov_examples() {
        let e = SpectralDistribution::from_values(vec![1.0, 2.0, 3.0, 4.0]);
        assert!(kolmogorov_distance(&e, &e) <= 0.25);
        assert_eq!(kolmogorov_distance(&e, &e), 0.0);

        // Uniform on [0, 4]: jumps of 1/4 at 1..4 sit exactly on the line.
        let uniform = ContinuousCdf(|x: f64| (x / 4.0).clamp(0.0, 1.0));
        assert!((kolmogorov_distance(&e, &uniform) - 0.25).abs() < 1e-15);

        let zeros = SpectralDistribution::from_values(vec![0.0; 8]);
        let mp = ContinuousCdf(|x: f64| crate::stieltjes::mp_cdf(x, 0.5));
        assert!((kolmogorov_distance(&zeros, &mp) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trips() {
        let e = SpectralDistribution::from_values(vec![0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300]);
        let back: Vec<f64> = e.to_csv().lines().map(|l| l.parse().unwrap()).collect();
        assert_eq!(back, e.eigenvalues());
        assert!(e.to_csv().lines().all(|l| l.split('e').next().unwrap().replace(['-', '.'], "").len() == 17));
    }

    fn arb_esd() -> impl Strategy<Value = SpectralDistribution> {
        prop::collection::vec(0u8..6, 1..8)
            .prop_map(|v| SpectralDistribution::from_values(v.into_iter().map(f64::from).collect()))
    }

    proptest! {
        #[test]
        fn distance_between_esds_is_a_metric(a in arb_esd(), b in arb_esd(), c in arb_esd()) {
            let ab = kolmogorov_distance_between(&a, &b);
            prop_assert!((ab - kolmogorov_distance_between(&b, &a)).abs() < 1e-15);
            prop_assert!((ab - kolmogorov_distance(&a, &b)).abs() < 1e-15);
            let ac = kolmogorov_distance_between(&a, &c);
            let cb = kolmogorov_distance_between(&c, &b);
            prop_assert!(ab <= ac + cb + 1e-15);
        }

        #[test]
        fn kolmogorov_matches_dense_grid(values in prop::collection::vec(0.0..4.0f64, 1..30)) {
            let e = SpectralDistribution::from_values(values);
            let f = ContinuousCdf(|x: f64| crate::stieltjes::mp_cdf(x, 1.0));
            let exact = kolmogorov_distance(&e, &f);
            let mut grid_sup = 0.0f64;
            for k in 0..=4000 {
                let x = k as f64 * 1e-3;
                grid_sup = grid_sup.max((e.cdf(x) - f.cdf(x)).abs());
            }
            prop_assert!(grid_sup <= exact + 1e-12);
            prop_assert!(exact - grid_sup < 5e-3);
        }

        #[test]
        fn trace_and_frobenius_identities(seed in any::<u64>(), n in 1usize..60) {
            let mut rng = stream_rng(seed, 0);
            let m = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let a = (&m + m.transpose()) * 0.5;
            let vals = esd(&a).unwrap();
            let sum: f64 = vals.eigenvalues().iter().sum();
            let sq: f64 = vals.eigenvalues().iter().map(|v| v * v).sum();
            let fro = a.norm_squared();
            prop_assert!((sum - a.trace()).abs() <= 1e-8 * fro.sqrt().max(1.0));
            prop_assert!((sq - fro).abs() <= 1e-8 * fro);
        }
    }
}
