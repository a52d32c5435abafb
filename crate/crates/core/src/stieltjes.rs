//! Limiting spectral laws.
//!
//! The Marchenko–Pastur law is available in closed form. For a general
//! population spectrum `mu`, the Stieltjes transform `s(z)` of the limit
//! solves
//!
//! ```text
//! s = F(s),   F(s) = sum_j w_j / (lambda_j (1 - rho - rho z s) - z),
//! ```
//!
//! which [`solve_stieltjes`] finds by damped fixed-point iteration,
//! accelerated by safeguarded Newton steps. Densities are recovered by
//! Stieltjes inversion, `f(x) ~ Im s(x + i eta) / pi`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quad::integrate;
use crate::spectra::{format_f64, Cdf};

/// Endpoints `((1 - sqrt rho)^2, (1 + sqrt rho)^2)` of the MP support.
pub fn mp_support(rho: f64) -> Result<(f64, f64)> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::invalid(format!("rho must be positive, got {rho}")));
    }
    let r = rho.sqrt();
    Ok(((1.0 - r) * (1.0 - r), (1.0 + r) * (1.0 + r)))
}

/// Mass `max(1 - 1/rho, 0)` of the MP atom at zero.
pub fn mp_atom(rho: f64) -> f64 {
    (1.0 - 1.0 / rho).max(0.0)
}

/// Continuous part of the MP law; zero outside `(a, b)` and for `x <= 0`.
pub fn mp_density(x: f64, rho: f64) -> f64 {
    let Ok((a, b)) = mp_support(rho) else {
        return 0.0;
    };
    if x <= a || x >= b || x <= 0.0 {
        return 0.0;
    }
    ((b - x) * (x - a)).sqrt() / (2.0 * PI * x * rho)
}

/// MP density integrated over `theta in [0, theta_max]` after the
/// substitution `x = a + (b - a) sin^2 theta`, which removes the
/// square-root endpoint singularities.
fn mp_mass_up_to_angle(theta_max: f64, rho: f64) -> f64 {
    let (a, b) = mp_support(rho).expect("rho validated by caller");
    let w = b - a;
    let integrand = |theta: f64| {
        let (s, c) = theta.sin_cos();
        if a == 0.0 {
            // sin^2 / x = 1 / w exactly.
            w * c * c / (PI * rho)
        } else {
            let x = a + w * s * s;
            w * w * s * s * c * c / (PI * rho * x)
        }
    };
    integrate(integrand, 0.0, theta_max, 1e-13).value
}

/// MP distribution function: atom at zero plus the integrated density.
pub fn mp_cdf(x: f64, rho: f64) -> f64 {
    let Ok((a, b)) = mp_support(rho) else {
        return f64::NAN;
    };
    if x < 0.0 {
        return 0.0;
    }
    if x >= b {
        return 1.0;
    }
    let atom = mp_atom(rho);
    if x <= a {
        return atom;
    }
    let theta = ((x - a) / (b - a)).sqrt().asin();
    (atom + mp_mass_up_to_angle(theta, rho)).min(1.0)
}

/// Total mass of the continuous MP part.
pub fn mp_continuous_mass(rho: f64) -> f64 {
    mp_mass_up_to_angle(FRAC_PI_2, rho)
}

/// The MP law as a [`Cdf`], with its atom at zero.
#[derive(Debug, Clone, Copy)]
pub struct MarchenkoPastur {
    pub rho: f64,
}

impl Cdf for MarchenkoPastur {
    fn cdf(&self, x: f64) -> f64 {
        mp_cdf(x, self.rho)
    }

    fn cdf_left(&self, x: f64) -> f64 {
        if x == 0.0 {
            0.0
        } else {
            mp_cdf(x, self.rho)
        }
    }
}

/// Probability measure with finitely many atoms on `[0, inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteMeasure {
    /// Atoms `(lambda, weight)`; weights must be positive and sum to 1
    /// within `1e-12`, locations nonnegative.
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("measure needs at least one atom"));
        }
        for &(lambda, w) in &atoms {
            if !(lambda >= 0.0) || !lambda.is_finite() {
                return Err(Error::invalid(format!("atom location {lambda} must be >= 0")));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::invalid(format!("atom weight {w} must be positive")));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("weights sum to {total}, expected 1")));
        }
        atoms.sort_by(|x, y| x.0.total_cmp(&y.0));
        Ok(Self { atoms })
    }

    /// Like [`DiscreteMeasure::new`], rescaling positive weights to sum to 1.
    pub fn normalized(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if !(total > 0.0) {
            return Err(Error::invalid("weights must have a positive sum"));
        }
        Self::new(atoms.into_iter().map(|(l, w)| (l, w / total)).collect())
    }

    pub fn dirac(lambda: f64) -> Result<Self> {
        Self::new(vec![(lambda, 1.0)])
    }

    /// Uniform weights on `values` (an ESD); equal values are merged.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let w = 1.0 / sorted.len() as f64;
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        let mut count = 0usize;
        for (i, &v) in sorted.iter().enumerate() {
            count += 1;
            if i + 1 == sorted.len() || sorted[i + 1] != v {
                atoms.push((v, count as f64 * w));
                count = 0;
            }
        }
        Self::normalized(atoms)
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn max_location(&self) -> f64 {
        self.atoms.last().map_or(0.0, |a| a.0)
    }

    pub fn mass_at_zero(&self) -> f64 {
        self.atoms.iter().filter(|a| a.0 == 0.0).map(|a| a.1).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Convergence threshold on `|s - F(s)| / max(1, |s|)`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Damping `alpha` in `s <- (1 - alpha) s + alpha F(s)`.
    pub damping: f64,
    /// Try a Newton step each iteration and keep it when it
    /// lowers the residual without leaving the upper half-plane.
    pub newton: bool,
    /// Starting iterate; `-1/z` when absent.
    pub initial: Option<Complex64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 100_000,
            damping: 0.5,
            newton: true,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StieltjesSolution {
    pub z: Complex64,
    pub s: Complex64,
    /// Scaled residual `|s - F(s)| / max(1, |s|)`, or the same quantity
    /// for the companion equation when that one is smaller. Near an atom
    /// of the limit the direct form cancels badly and only the companion
    /// residual reaches the tolerance.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

const MAX_DAMPING_HALVINGS: usize = 6;

/// The fixed-point map and its derivative at `s`.
pub fn fixed_point_map(mu: &DiscreteMeasure, rho: f64, z: Complex64, s: Complex64) -> (Complex64, Complex64) {
    let shrink = Complex64::new(1.0 - rho, 0.0) - rho * z * s;
    let mut value = Complex64::new(0.0, 0.0);
    let mut slope = Complex64::new(0.0, 0.0);
    for &(lambda, w) in &mu.atoms {
        let denom = lambda * shrink - z;
        let inv = denom.inv();
        value += w * inv;
        slope += w * lambda * rho * z * inv * inv;
    }
    (value, slope)
}

/// Companion form `t = -1 / (z - rho sum_j w_j lambda_j / (1 + lambda_j t))`
/// with `t = rho s - (1 - rho) / z`; returns the map and its derivative.
fn companion_map(mu: &DiscreteMeasure, rho: f64, z: Complex64, t: Complex64) -> (Complex64, Complex64) {
    let one = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut dsum = Complex64::new(0.0, 0.0);
    for &(lambda, w) in &mu.atoms {
        let inv = (one + lambda * t).inv();
        sum += w * lambda * inv;
        dsum += w * lambda * lambda * inv * inv;
    }
    let inv_d = (z - rho * sum).inv();
    (-inv_d, rho * dsum * inv_d * inv_d)
}

fn to_companion(s: Complex64, rho: f64, z: Complex64) -> Complex64 {
    rho * s - (1.0 - rho) / z
}

fn from_companion(t: Complex64, rho: f64, z: Complex64) -> Complex64 {
    (t + (1.0 - rho) / z) / rho
}

/// The limit's transform and its companion both map the upper half-plane
/// into itself; the fixed point is unique there.
fn admissible(s: Complex64, rho: f64, z: Complex64) -> bool {
    s.is_finite() && s.im > 0.0 && to_companion(s, rho, z).im > 0.0
}

fn scaled_residual(s: Complex64, f: Complex64) -> f64 {
    (s - f).norm() / s.norm().max(1.0)
}

/// Solves `s = F(s)` at `z` with `Im z > 0`.
///
/// The damped iteration runs on the companion variable `t`, whose map keeps
/// the upper half-plane invariant; each step also tries a Newton update.
/// Convergence is judged on the residual of the original equation (after
/// one final application of `F`) or of the companion equation.
pub fn solve_stieltjes(
    mu: &DiscreteMeasure,
    rho: f64,
    z: Complex64,
    options: &SolverOptions,
) -> Result<StieltjesSolution> {
    if !(z.im > 0.0) {
        return Err(Error::invalid(format!("z = {z} must lie in the upper half-plane")));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::invalid(format!("rho must be positive, got {rho}")));
    }
    if !(options.damping > 0.0 && options.damping <= 1.0) {
        return Err(Error::invalid("damping must lie in (0, 1]"));
    }
    let start = options
        .initial
        .filter(|&s| admissible(s, rho, z))
        .map_or_else(|| -z.inv(), |s| to_companion(s, rho, z));
    let one = Complex64::new(1.0, 0.0);

    let mut alpha = options.damping;
    let mut total = 0usize;
    let mut last = (from_companion(start, rho, z), f64::INFINITY);
    for _ in 0..=MAX_DAMPING_HALVINGS {
        let mut t = start;
        let mut restart = false;
        for _ in 0..options.max_iterations {
            total += 1;
            let (s, _) = fixed_point_map(mu, rho, z, from_companion(t, rho, z));
            let (f, _) = fixed_point_map(mu, rho, z, s);
            let (g, slope) = companion_map(mu, rho, z, t);
            let gap = (t - g).norm();
            let direct = scaled_residual(s, f);
            let companion = gap / t.norm().max(1.0);
            let (s, residual, valid) = if direct <= companion {
                (s, direct, admissible(s, rho, z))
            } else {
                let s = from_companion(g, rho, z);
                (s, companion, g.im > 0.0 && s.im > 0.0)
            };
            last = (s, residual);
            if residual <= options.tolerance && valid {
                return Ok(StieltjesSolution {
                    z,
                    s,
                    residual,
                    iterations: total,
                    converged: true,
                });
            }
            let mut next = None;
            if options.newton {
                let candidate = t - (t - g) / (one - slope);
                if candidate.is_finite() && candidate.im > 0.0 {
                    let (gc, _) = companion_map(mu, rho, z, candidate);
                    if (candidate - gc).norm() < gap {
                        next = Some(candidate);
                    }
                }
            }
            let next = next.unwrap_or((1.0 - alpha) * t + alpha * g);
            if !(next.is_finite() && next.im > 0.0) {
                restart = true;
                break;
            }
            t = next;
        }
        if !restart {
            break;
        }
        alpha *= 0.5;
    }
    Err(Error::Diverged {
        last: last.0,
        residual: last.1,
        iterations: total,
    })
}

/// Solves at `x + i eta` by walking `eta` down from an easy height,
/// warm-starting every step from the previous solution.
pub fn solve_with_continuation(
    mu: &DiscreteMeasure,
    rho: f64,
    x: f64,
    eta: f64,
    options: &SolverOptions,
) -> Result<StieltjesSolution> {
    let top = (mu.max_location() + 1.0).max(x.abs()).max(eta);
    let mut heights = Vec::new();
    let mut h = top;
    while h > eta {
        heights.push(h);
        h *= 0.25;
    }
    heights.push(eta);

    let mut guess = options.initial;
    let mut iterations = 0;
    let mut solution = None;
    for h in heights {
        let opts = SolverOptions {
            initial: guess,
            ..*options
        };
        let sol = solve_stieltjes(mu, rho, Complex64::new(x, h), &opts)?;
        iterations += sol.iterations;
        guess = Some(sol.s);
        solution = Some(sol);
    }
    let mut sol = solution.expect("at least one height");
    sol.iterations = iterations;
    Ok(sol)
}

/// Default inversion height `1e-3 (lambda_max + 1)`.
pub fn default_eta(mu: &DiscreteMeasure) -> f64 {
    1e-3 * (mu.max_location() + 1.0)
}

/// Default height for [`FixedPointLaw`], `1e-7 (lambda_max + 1)`. The
/// CDF is far more sensitive to smoothing than a plotted density when
/// `mu` has mass near zero.
pub fn default_law_eta(mu: &DiscreteMeasure) -> f64 {
    1e-7 * (mu.max_location() + 1.0)
}

/// Steps per octave of the geometric grid near zero.
const OCTAVE_STEPS: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityPoint {
    pub x: f64,
    pub density: f64,
    pub converged: bool,
    pub residual: f64,
}

/// `Im s(x + i eta) / pi` on a sorted grid. A point whose solve fails is
/// flagged with `converged = false` and a NaN density rather than aborting
/// the whole grid.
pub fn density_from_stieltjes(
    mu: &DiscreteMeasure,
    rho: f64,
    grid: &[f64],
    eta: f64,
) -> Result<Vec<DensityPoint>> {
    if !(eta > 0.0) {
        return Err(Error::invalid(format!("eta must be positive, got {eta}")));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::invalid(format!("rho must be positive, got {rho}")));
    }
    if grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::invalid("grid must be sorted"));
    }
    let options = SolverOptions::default();
    Ok(grid
        .par_iter()
        .map(|&x| match solve_with_continuation(mu, rho, x, eta, &options) {
            Ok(sol) => DensityPoint {
                x,
                density: sol.s.im / PI,
                converged: true,
                residual: sol.residual,
            },
            Err(Error::Diverged { residual, .. }) => DensityPoint {
                x,
                density: f64::NAN,
                converged: false,
                residual,
            },
            Err(_) => DensityPoint {
                x,
                density: f64::NAN,
                converged: false,
                residual: f64::NAN,
            },
        })
        .collect())
}

/// Mass of the limit law at zero, `lim eta Im s(i eta)`, evaluated at a
/// small `eta`.
pub fn atom_at_zero(mu: &DiscreteMeasure, rho: f64) -> Result<f64> {
    let eta = 1e-9 * (mu.max_location() + 1.0);
    let sol = solve_with_continuation(mu, rho, 0.0, eta, &SolverOptions::default())?;
    Ok((eta * sol.s.im).clamp(0.0, 1.0))
}

/// Density CSV with header `x,density,converged,residual`.
pub fn density_csv(points: &[DensityPoint]) -> String {
    let mut out = String::from("x,density,converged,residual\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            format_f64(p.x),
            format_f64(p.density),
            u8::from(p.converged),
            format_f64(p.residual)
        );
    }
    out
}

/// The limit law for a general population spectrum, tabulated on a grid:
/// the atom at zero is kept exact and the continuous part is integrated
/// from the inverted density.
#[derive(Debug, Clone)]
pub struct FixedPointLaw {
    pub rho: f64,
    pub eta: f64,
    pub atom: f64,
    pub points: Vec<DensityPoint>,
    /// CDF of the continuous part at each grid point.
    cumulative: Vec<f64>,
}

impl FixedPointLaw {
    /// Tabulates on `grid_points` equally spaced points of `[0, upper]`,
    /// with `upper` safely past the right edge of the support. The first
    /// cell is refined geometrically down to `eta`, where the density of
    /// a population spectrum with mass near zero blows up.
    pub fn new(mu: &DiscreteMeasure, rho: f64, grid_points: usize, eta: Option<f64>) -> Result<Self> {
        if grid_points < 2 {
            return Err(Error::invalid("need at least two grid points"));
        }
        let eta = eta.unwrap_or_else(|| default_law_eta(mu));
        if !(eta > 0.0) {
            return Err(Error::invalid(format!("eta must be positive, got {eta}")));
        }
        let upper = mu.max_location() * (1.0 + rho.sqrt()).powi(2) * 1.1 + 10.0 * eta;
        let h = upper / (grid_points - 1) as f64;
        let ratio = 2f64.powf(1.0 / OCTAVE_STEPS as f64);
        let mut near_zero: Vec<f64> = std::iter::successors(Some(h / ratio), |&x| Some(x / ratio))
            .take_while(|&x| x > eta)
            .collect();
        near_zero.reverse();
        let grid: Vec<f64> = std::iter::once(0.0)
            .chain(near_zero)
            .chain((1..grid_points).map(|k| upper * k as f64 / (grid_points - 1) as f64))
            .collect();
        let atom = atom_at_zero(mu, rho)?;
        let mut points = density_from_stieltjes(mu, rho, &grid, eta)?;
        if let Some(bad) = points.iter().find(|p| !p.converged) {
            return Err(Error::Diverged {
                last: Complex64::new(bad.x, eta),
                residual: bad.residual,
                iterations: 0,
            });
        }
        // Remove the Lorentzian smear of the atom at zero.
        for p in &mut points {
            let smear = atom * eta / (PI * (p.x * p.x + eta * eta));
            p.density = (p.density - smear).max(0.0);
        }
        let mut cumulative = vec![0.0; points.len()];
        for k in 1..points.len() {
            let dx = points[k].x - points[k - 1].x;
            cumulative[k] = cumulative[k - 1] + 0.5 * dx * (points[k].density + points[k - 1].density);
        }
        let total = cumulative.last().copied().unwrap_or(0.0);
        if total > 0.0 {
            let scale = (1.0 - atom) / total;
            for c in &mut cumulative {
                *c *= scale;
            }
        }
        Ok(Self {
            rho,
            eta,
            atom,
            points,
            cumulative,
        })
    }
}

impl Cdf for FixedPointLaw {
    fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let xs = &self.points;
        let last = xs.len() - 1;
        if x >= xs[last].x {
            return 1.0;
        }
        let k = xs.partition_point(|p| p.x <= x).max(1);
        let (x0, x1) = (xs[k - 1].x, xs[k].x);
        let t = (x - x0) / (x1 - x0);
        (self.atom + self.cumulative[k - 1] + t * (self.cumulative[k] - self.cumulative[k - 1])).min(1.0)
    }

    fn cdf_left(&self, x: f64) -> f64 {
        if x == 0.0 {
            0.0
        } else {
            self.cdf(x)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Oracle: `int mp_density(l) / (l - z) dl + atom / (0 - z)` by
    /// adaptive quadrature, independent of the fixed-point solver.
    fn mp_stieltjes_quadrature(rho: f64, z: Complex64) -> Complex64 {
        let (a, b) = mp_support(rho).unwrap();
        let f = |l: f64| mp_density(l, rho) / (Complex64::new(l, 0.0) - z);
        let re = integrate(|l| f(l).re, a, b, 1e-13).value;
        let im = integrate(|l| f(l).im, a, b, 1e-13).value;
        Complex64::new(re, im) - mp_atom(rho) / z
    }

    /// Antiderivative of `sqrt((b - x)(x - a)) / x` on `(a, b)`, `a > 0`;
    /// its value at `a` is `-pi/2 ((a + b)/2 - sqrt(ab))`.
    fn mp_antiderivative(x: f64, a: f64, b: f64) -> f64 {
        let r = ((b - x) * (x - a)).sqrt();
        let w = b - a;
        let arg1 = ((2.0 * x - a - b) / w).clamp(-1.0, 1.0);
        let arg2 = (((a + b) * x - 2.0 * a * b) / (x * w)).clamp(-1.0, 1.0);
        r + 0.5 * (a + b) * arg1.asin() - (a * b).sqrt() * arg2.asin()
    }

    #[test]
    fn support_and_atom_examples() {
        assert_eq!(mp_support(1.0).unwrap(), (0.0, 4.0));
        assert_eq!(mp_support(0.25).unwrap(), (0.25, 2.25));
        let (a, b) = mp_support(0.5).unwrap();
        assert!((a - 0.085_786_437_626_905).abs() < 1e-12);
        assert!((b - 2.914_213_562_373_095).abs() < 1e-12);
        assert!(mp_support(0.0).is_err());
        assert!(mp_support(-1.0).is_err());

        assert_eq!(mp_atom(0.5), 0.0);
        assert_eq!(mp_atom(2.0), 0.5);
        assert_eq!(mp_atom(1.0), 0.0);
    }

    #[test]
    fn density_examples() {
        assert_eq!(mp_density(5.0, 1.0), 0.0);
        assert_eq!(mp_density(-1.0, 0.5), 0.0);
        assert_eq!(mp_density(0.05, 0.5), 0.0);
        assert!((mp_density(2.0, 1.0) - 1.0 / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn normalisation() {
        for rho in [0.1, 0.5, 1.0, 2.0, 5.0] {
            let total = mp_atom(rho) + mp_continuous_mass(rho);
            assert!((total - 1.0).abs() < 1e-8, "rho={rho} total={total}");
        }
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(mp_cdf(-0.1, 0.5), 0.0);
        assert_eq!(mp_cdf(4.0, 1.0), 1.0);
        assert_eq!(mp_cdf(10.0, 2.0), 1.0);
        assert_eq!(mp_cdf(0.0, 2.0), 0.5);

        // rho = 1 (a = 0): the antiderivative reduces to
        // (r + 2 asin((x - 2)/2) + pi) / (2 pi).
        let x: f64 = 2.0;
        let exact = (((4.0 - x) * x).sqrt() + 2.0 * ((x - 2.0) / 2.0).asin() + PI) / (2.0 * PI);
        assert!((mp_cdf(2.0, 1.0) - exact).abs() < 1e-10);

        for rho in [0.25, 0.5, 2.0, 5.0] {
            let (a, b) = mp_support(rho).unwrap();
            for t in [0.1, 0.37, 0.5, 0.81, 0.99] {
                let x = a + t * (b - a);
                let exact = mp_atom(rho)
                    + (mp_antiderivative(x, a, b) + FRAC_PI_2 * (0.5 * (a + b) - (a * b).sqrt())) / (2.0 * PI * rho);
                assert!((mp_cdf(x, rho) - exact).abs() < 1e-10, "rho={rho} x={x}");
            }
        }
    }

    #[test]
    fn cdf_is_monotone_and_saturates() {
        for rho in [0.3, 1.0, 3.0] {
            let (_, b) = mp_support(rho).unwrap();
            let mut prev = 0.0;
            for k in 0..=2000 {
                let x = -0.1 + k as f64 * (b + 0.2) / 2000.0;
                let v = mp_cdf(x, rho);
                assert!(v >= prev - 1e-15, "rho={rho} x={x}");
                prev = v;
            }
            assert!((mp_cdf(b - 1e-14, rho) - 1.0).abs() < 1e-6);
            assert!((mp_cdf(b + 1e-9, rho) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn dirac_at_zero_gives_minus_inverse_z() {
        let mu = DiscreteMeasure::dirac(0.0).unwrap();
        for z in [Complex64::new(0.3, 0.2), Complex64::new(-2.0, 1e-3), Complex64::new(0.0, 5.0)] {
            let sol = solve_stieltjes(&mu, 0.7, z, &SolverOptions::default()).unwrap();
            assert_eq!(sol.s, -z.inv());
            assert!(sol.converged);
        }
    }

    #[test]
    fn matches_mp_quadrature_for_unit_population() {
        let mu = DiscreteMeasure::dirac(1.0).unwrap();
        let oracle = mp_stieltjes_quadrature(1.0, Complex64::i());
        let sol = solve_stieltjes(&mu, 1.0, Complex64::i(), &SolverOptions::default()).unwrap();
        assert!((sol.s - oracle).norm() < 1e-8);

        for rho in [0.25, 0.5, 1.0, 2.0, 4.0] {
            for k in 0..12 {
                let z = Complex64::new(-1.0 + 7.0 * k as f64 / 11.0, 0.05 + 0.3 * (k % 3) as f64);
                let sol = solve_stieltjes(&mu, rho, z, &SolverOptions::default()).unwrap();
                let oracle = mp_stieltjes_quadrature(rho, z);
                assert!((sol.s - oracle).norm() < 1e-8, "rho={rho} z={z} {} vs {}", sol.s, oracle);
            }
        }
    }

    #[test]
    fn pure_damped_iteration_reaches_same_point() {
        let mu = DiscreteMeasure::new(vec![(0.5, 0.3), (1.0, 0.5), (3.0, 0.2)]).unwrap();
        let z = Complex64::new(1.2, 0.5);
        let plain = SolverOptions {
            newton: false,
            ..SolverOptions::default()
        };
        let a = solve_stieltjes(&mu, 0.4, z, &plain).unwrap();
        let b = solve_stieltjes(&mu, 0.4, z, &SolverOptions::default()).unwrap();
        assert!((a.s - b.s).norm() < 1e-10);
        assert!(b.iterations < a.iterations);
    }

    #[test]
    fn damping_does_not_change_the_answer() {
        let mu = DiscreteMeasure::new(vec![(0.2, 0.5), (2.0, 0.5)]).unwrap();
        for z in [Complex64::new(0.5, 0.3), Complex64::new(3.0, 0.1)] {
            let sols: Vec<Complex64> = [0.25, 0.5, 0.9]
                .iter()
                .map(|&damping| {
                    let opts = SolverOptions {
                        damping,
                        newton: false,
                        ..SolverOptions::default()
                    };
                    solve_stieltjes(&mu, 0.6, z, &opts).unwrap().s
                })
                .collect();
            for s in &sols[1..] {
                assert!((s - sols[0]).norm() <= 10.0 * 1e-12 * sols[0].norm().max(1.0) * 10.0);
            }
        }
    }

    #[test]
    fn converged_solutions_are_fixed_points_in_upper_half_plane() {
        let mu = DiscreteMeasure::new(vec![(0.0, 0.1), (0.7, 0.4), (1.9, 0.3), (6.0, 0.2)]).unwrap();
        for rho in [0.2, 1.0, 3.0] {
            for k in 0..20 {
                let z = Complex64::new(-2.0 + 0.6 * k as f64, 10f64.powf(-(k % 4) as f64));
                let sol = solve_stieltjes(&mu, rho, z, &SolverOptions::default()).unwrap();
                let (f, _) = fixed_point_map(&mu, rho, z, sol.s);
                assert!((sol.s - f).norm() / sol.s.norm().max(1.0) <= 1e-12);
                assert!(sol.s.im > 0.0);
            }
        }
    }

    #[test]
    fn invalid_inputs() {
        let mu = DiscreteMeasure::dirac(1.0).unwrap();
        assert!(solve_stieltjes(&mu, 1.0, Complex64::new(1.0, 0.0), &SolverOptions::default()).is_err());
        assert!(solve_stieltjes(&mu, 1.0, Complex64::new(1.0, -1.0), &SolverOptions::default()).is_err());
        assert!(solve_stieltjes(&mu, 0.0, Complex64::i(), &SolverOptions::default()).is_err());
        assert!(DiscreteMeasure::new(vec![(1.0, 0.4)]).is_err());
        assert!(DiscreteMeasure::new(vec![(-1.0, 1.0)]).is_err());
        assert!(DiscreteMeasure::new(vec![(1.0, 0.0), (2.0, 1.0)]).is_err());
        assert!(density_from_stieltjes(&mu, 1.0, &[1.0, 0.5], 1e-3).is_err());
        assert!(density_from_stieltjes(&mu, 1.0, &[1.0], 0.0).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let mu = DiscreteMeasure::dirac(1.0).unwrap();
        let opts = SolverOptions {
            max_iterations: 2,
            newton: false,
            ..SolverOptions::default()
        };
        match solve_stieltjes(&mu, 0.5, Complex64::new(1.0, 1e-3), &opts) {
            Err(Error::Diverged { iterations, residual, .. }) => {
                assert!(iterations >= 2);
                assert!(residual > 0.0);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn density_recovery_matches_mp() {
        let mu = DiscreteMeasure::dirac(1.0).unwrap();
        let rho = 0.5;
        let (a, b) = mp_support(rho).unwrap();
        let grid: Vec<f64> = (0..400).map(|k| a + 0.05 + (b - a - 0.1) * k as f64 / 399.0).collect();
        let points = density_from_stieltjes(&mu, rho, &grid, 1e-4).unwrap();
        for p in &points {
            assert!(p.converged);
            assert!((p.density - mp_density(p.x, rho)).abs() < 0.01, "x={}", p.x);
        }
        let far = density_from_stieltjes(&mu, rho, &[b + 10.0], 1e-4).unwrap();
        assert!(far[0].density.abs() < 1e-4);
    }

    #[test]
    fn two_atom_density_integrates_to_one() {
        let mu = DiscreteMeasure::new(vec![(1.0, 0.5), (4.0, 0.5)]).unwrap();
        let rho: f64 = 0.5;
        let eta = 1e-3;
        let upper = 4.0 * (1.0 + rho.sqrt()).powi(2) * 1.2;
        let grid: Vec<f64> = (0..8000).map(|k| upper * k as f64 / 7999.0).collect();
        let points = density_from_stieltjes(&mu, rho, &grid, eta).unwrap();
        let mass: f64 = points
            .windows(2)
            .map(|w| 0.5 * (w[1].x - w[0].x) * (w[0].density + w[1].density))
            .sum();
        let atom = atom_at_zero(&mu, rho).unwrap();
        assert!((mass + atom - 1.0).abs() < 0.01, "mass={mass} atom={atom}");
    }

    #[test]
    fn atoms_at_zero() {
        let unit = DiscreteMeasure::dirac(1.0).unwrap();
        assert!((atom_at_zero(&unit, 2.0).unwrap() - 0.5).abs() < 1e-3);
        assert!(atom_at_zero(&unit, 0.5).unwrap() < 1e-3);
        let mixed = DiscreteMeasure::new(vec![(0.0, 0.7), (1.0, 0.3)]).unwrap();
        assert!((atom_at_zero(&mixed, 0.5).unwrap() - 0.7).abs() < 1e-3);
        assert!((atom_at_zero(&mixed, 5.0).unwrap() - 0.8).abs() < 1e-3);
    }

    #[test]
    fn fixed_point_law_reproduces_mp_cdf() {
        // rho = 1 has an inverse square-root singularity at zero.
        for rho in [0.5, 1.0, 2.0] {
            let law = FixedPointLaw::new(&DiscreteMeasure::dirac(1.0).unwrap(), rho, 3000, None).unwrap();
            let mp = MarchenkoPastur { rho };
            let (_, b) = mp_support(rho).unwrap();
            let xs = (0..=100).map(|k| b * k as f64 / 100.0).chain((1..=20).map(|k| 1e-6 * 2f64.powi(k)));
            for x in xs {
                assert!((law.cdf(x) - mp.cdf(x)).abs() < 1e-3, "rho={rho} x={x}: {} vs {}", law.cdf(x), mp.cdf(x));
            }
            assert_eq!(law.cdf_left(0.0), 0.0);
        }
    }

    #[test]
    fn measure_from_values_merges_duplicates() {
        let mu = DiscreteMeasure::from_values(&[1.0, 0.0, 1.0, 3.0]).unwrap();
        assert_eq!(mu.atoms(), &[(0.0, 0.25), (1.0, 0.5), (3.0, 0.25)]);
        assert_eq!(mu.mass_at_zero(), 0.25);
    }

    #[test]
    fn density_csv_format() {
        let csv = density_csv(&[DensityPoint {
            x: 0.5,
            density: 0.25,
            converged: true,
            residual: 0.0,
        }]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("x,density,converged,residual"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[2], "1");
        assert_eq!(row[0].parse::<f64>().unwrap(), 0.5);
    }
}
