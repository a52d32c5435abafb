//! Dense symmetric eigensolver: Householder reduction to tridiagonal form
//! followed by the implicit-shift QL algorithm (the EISPACK `tred2`/`tql2`
//! pair, as carried by JAMA).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const MAX_QL_SWEEPS: usize = 60;

/// Largest absolute entry; the scale used by all relative tolerances here.
pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Rejects non-square input or asymmetry beyond `rel_tol * max|a_ij|`.
pub fn check_symmetric(a: &DMatrix<f64>, rel_tol: f64) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::invalid(format!(
            "matrix is {}x{}, expected square",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = max_abs(a);
    let n = a.nrows();
    for i in 0..n {
        for j in 0..i {
            if (a[(i, j)] - a[(j, i)]).abs() > rel_tol * scale {
                return Err(Error::invalid(format!(
                    "matrix is not symmetric at ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    Ok(())
}

/// Eigenvalues ascending, with the matching unit eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// All eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(a, 1e-10)?;
    let mut work = Tridiagonal::reduce(a, false);
    work.ql(None)?;
    let mut values = work.diag;
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Eigenvalues and eigenvectors of a symmetric matrix.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> Result<SymmetricEigen> {
    check_symmetric(a, 1e-10)?;
    let n = a.nrows();
    let mut work = Tridiagonal::reduce(a, true);
    let mut v = work.vectors.take().expect("vectors requested");
    work.ql(Some(&mut v))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| work.diag[i].total_cmp(&work.diag[j]));
    let values = order.iter().map(|&k| work.diag[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| v[i * n + order[j]]);
    Ok(SymmetricEigen { values, vectors })
}

/// Spectral norm `max |lambda|` of a symmetric matrix.
pub fn spectral_norm(a: &DMatrix<f64>) -> Result<f64> {
    let values = symmetric_eigenvalues(a)?;
    Ok(values.iter().fold(0.0f64, |m, x| m.max(x.abs())))
}

struct Tridiagonal {
    n: usize,
    diag: Vec<f64>,
    off: Vec<f64>,
    /// Row-major accumulated orthogonal transform, when requested.
    vectors: Option<Vec<f64>>,
}

impl Tridiagonal {
    fn reduce(a: &DMatrix<f64>, accumulate: bool) -> Self {
        let n = a.nrows();
        // Row-major working copy: v[i * n + j] = a[(i, j)].
        let mut v: Vec<f64> = (0..n * n).map(|k| a[(k / n, k % n)]).collect();
        let mut d = vec![0.0; n];
        let mut e = vec![0.0; n];
        if n == 0 {
            return Self {
                n,
                diag: d,
                off: e,
                vectors: accumulate.then_some(v),
            };
        }
        let at = |i: usize, j: usize| i * n + j;

        d.copy_from_slice(&v[at(n - 1, 0)..at(n - 1, 0) + n]);

        for i in (1..n).rev() {
            let scale: f64 = d[..i].iter().map(|x| x.abs()).sum();
            let mut h = 0.0;
            if scale == 0.0 {
                e[i] = d[i - 1];
                for j in 0..i {
                    d[j] = v[at(i - 1, j)];
                    v[at(i, j)] = 0.0;
                    v[at(j, i)] = 0.0;
                }
            } else {
                for x in &mut d[..i] {
                    *x /= scale;
                    h += *x * *x;
                }
                let mut f = d[i - 1];
                let mut g = h.sqrt();
                if f > 0.0 {
                    g = -g;
                }
                e[i] = scale * g;
                h -= f * g;
                d[i - 1] = f - g;
                e[..i].fill(0.0);

                for j in 0..i {
                    f = d[j];
                    v[at(j, i)] = f;
                    g = e[j] + v[at(j, j)] * f;
                    for k in j + 1..i {
                        g += v[at(k, j)] * d[k];
                        e[k] += v[at(k, j)] * f;
                    }
                    e[j] = g;
                }
                f = 0.0;
                for j in 0..i {
                    e[j] /= h;
                    f += e[j] * d[j];
                }
                let hh = f / (h + h);
                for j in 0..i {
                    e[j] -= hh * d[j];
                }
                for j in 0..i {
                    f = d[j];
                    g = e[j];
                    for k in j..i {
                        v[at(k, j)] -= f * e[k] + g * d[k];
                    }
                    d[j] = v[at(i - 1, j)];
                    v[at(i, j)] = 0.0;
                }
            }
            d[i] = h;
        }

        if !accumulate {
            // The reduced diagonal sits on the diagonal of the working copy.
            for (i, x) in d.iter_mut().enumerate() {
                *x = v[at(i, i)];
            }
            e[0] = 0.0;
            return Self {
                n,
                diag: d,
                off: e,
                vectors: None,
            };
        }

        for i in 0..n - 1 {
            v[at(n - 1, i)] = v[at(i, i)];
            v[at(i, i)] = 1.0;
            let h = d[i + 1];
            if h != 0.0 {
                for k in 0..=i {
                    d[k] = v[at(k, i + 1)] / h;
                }
                for j in 0..=i {
                    let mut g = 0.0;
                    for k in 0..=i {
                        g += v[at(k, i + 1)] * v[at(k, j)];
                    }
                    for k in 0..=i {
                        v[at(k, j)] -= g * d[k];
                    }
                }
            }
            for k in 0..=i {
                v[at(k, i + 1)] = 0.0;
            }
        }
        for j in 0..n {
            d[j] = v[at(n - 1, j)];
            v[at(n - 1, j)] = 0.0;
        }
        v[at(n - 1, n - 1)] = 1.0;
        e[0] = 0.0;
        Self {
            n,
            diag: d,
            off: e,
            vectors: Some(v),
        }
    }

    /// Implicit QL iterations on the tridiagonal form; rotations are applied
    /// to `vectors` (row-major) when given.
    fn ql(&mut self, mut vectors: Option<&mut Vec<f64>>) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Ok(());
        }
        let d = &mut self.diag;
        let e = &mut self.off;
        for i in 1..n {
            e[i - 1] = e[i];
        }
        e[n - 1] = 0.0;

        let mut f = 0.0;
        let mut tst1 = 0.0f64;
        let eps = f64::EPSILON;
        for l in 0..n {
            tst1 = tst1.max(d[l].abs() + e[l].abs());
            let mut m = l;
            while m < n - 1 && e[m].abs() > eps * tst1 {
                m += 1;
            }
            if m > l {
                let mut sweeps = 0;
                loop {
                    sweeps += 1;
                    if sweeps > MAX_QL_SWEEPS {
                        return Err(Error::NoConvergence);
                    }
                    let mut g = d[l];
                    let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                    let mut r = p.hypot(1.0);
                    if p < 0.0 {
                        r = -r;
                    }
                    d[l] = e[l] / (p + r);
                    d[l + 1] = e[l] * (p + r);
                    let dl1 = d[l + 1];
                    let mut h = g - d[l];
                    for x in &mut d[l + 2..n] {
                        *x -= h;
                    }
                    f += h;

                    p = d[m];
                    let mut c = 1.0;
                    let mut c2 = c;
                    let mut c3 = c;
                    let el1 = e[l + 1];
                    let mut s = 0.0;
                    let mut s2 = 0.0;
                    for i in (l..m).rev() {
                        c3 = c2;
                        c2 = c;
                        s2 = s;
                        g = c * e[i];
                        h = c * p;
                        r = p.hypot(e[i]);
                        e[i + 1] = s * r;
                        s = e[i] / r;
                        c = p / r;
                        p = c * d[i] - s * g;
                        d[i + 1] = h + s * (c * g + s * d[i]);
                        if let Some(v) = vectors.as_deref_mut() {
                            for k in 0..n {
                                let row = k * n;
                                let h = v[row + i + 1];
                                v[row + i + 1] = s * v[row + i] + c * h;
                                v[row + i] = c * v[row + i] - s * h;
                            }
                        }
                    }
                    p = -s * s2 * c3 * el1 * e[l] / dl1;
                    e[l] = s * p;
                    d[l] = c * p;
                    if e[l].abs() <= eps * tst1 {
                        break;
                    }
                }
            }
            d[l] += f;
            e[l] = 0.0;
        }
        Ok(())
    }
}

/// Power iteration on `A^2`, returning `sqrt` of the Rayleigh quotient.
/// Slow on clustered spectra; kept as an independent check of
/// [`spectral_norm`].
pub fn power_iteration_norm(a: &DMatrix<f64>, tol: f64, max_iter: usize) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    let a2 = a * a;
    // Deterministic start with all directions represented.
    let mut x = nalgebra::DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.618_033_988_7).fract());
    x /= x.norm();
    let mut theta = 0.0;
    for _ in 0..max_iter {
        let y = &a2 * &x;
        let next = x.dot(&y);
        let norm = y.norm();
        if norm == 0.0 {
            return 0.0;
        }
        x = y / norm;
        if (next - theta).abs() <= tol * next.abs() {
            theta = next;
            break;
        }
        theta = next;
    }
    theta.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        (&m + m.transpose()) * 0.5
    }

    #[test]
    fn small_examples() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 2.0]));
        assert_eq!(symmetric_eigenvalues(&d).unwrap(), vec![1.0, 2.0, 3.0]);

        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let vals = symmetric_eigenvalues(&swap).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-15 && (vals[1] - 1.0).abs() < 1e-15);

        assert!(symmetric_eigenvalues(&DMatrix::<f64>::zeros(0, 0)).unwrap().is_empty());
        assert_eq!(symmetric_eigenvalues(&DMatrix::from_element(1, 1, 4.0)).unwrap(), vec![4.0]);
    }

    #[test]
    fn rejects_non_symmetric() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(symmetric_eigenvalues(&a), Err(Error::InvalidArgument(_))));
        let rect = DMatrix::<f64>::zeros(2, 3);
        assert!(symmetric_eigenvalues(&rect).is_err());
    }

    #[test]
    fn trace_identity_on_random_20() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let a = random_symmetric(20, &mut rng);
        let sum: f64 = symmetric_eigenvalues(&a).unwrap().iter().sum();
        assert!((sum - a.trace()).abs() < 1e-8);
    }

    #[test]
    fn residual_contract_and_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 5, 33, 120] {
            let a = random_symmetric(n, &mut rng);
            let eig = symmetric_eigen(&a).unwrap();
            let norm = spectral_norm(&a).unwrap();
            for (k, &lambda) in eig.values.iter().enumerate() {
                let v = eig.vectors.column(k);
                assert!((v.norm() - 1.0).abs() < 1e-12);
                let r = (&a * v - v * lambda).norm();
                assert!(r <= 1e-8 * norm * n as f64, "n={n} k={k} r={r}");
            }
            let gram = eig.vectors.transpose() * &eig.vectors;
            assert!((gram - DMatrix::identity(n, n)).amax() < 1e-12);
            let only = symmetric_eigenvalues(&a).unwrap();
            for (x, y) in only.iter().zip(&eig.values) {
                assert!((x - y).abs() < 1e-12 * norm.max(1.0));
            }
        }
    }

    #[test]
    fn agrees_with_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_symmetric(60, &mut rng);
        let mut reference: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        reference.sort_by(f64::total_cmp);
        for (x, y) in symmetric_eigenvalues(&a).unwrap().iter().zip(&reference) {
            assert!((x - y).abs() < 1e-11);
        }
    }

    #[test]
    fn repeated_and_degenerate_spectra() {
        let a = DMatrix::<f64>::identity(7, 7) * 2.5;
        assert!(symmetric_eigenvalues(&a).unwrap().iter().all(|&x| (x - 2.5).abs() < 1e-14));
        let x = nalgebra::DVector::from_fn(6, |i, _| i as f64 + 1.0);
        let rank_one = &x * x.transpose();
        let vals = symmetric_eigenvalues(&rank_one).unwrap();
        assert!((vals[5] - x.norm_squared()).abs() < 1e-10);
        assert!(vals[..5].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn power_iteration_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_symmetric(40, &mut rng);
        let exact = spectral_norm(&a).unwrap();
        let approx = power_iteration_norm(&a, 1e-14, 100_000);
        assert!((exact - approx).abs() < 1e-6 * exact);
    }
}
