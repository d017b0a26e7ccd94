//! Finite-catalog approximation: a uniform catalog of k designs on [0, 1]
//! is an η-net with η = 1/(2(k−1)), so its best risk is within L_D·η of the
//! continuum optimum for an L_D-Lipschitz risk surface.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Intervals in the dense scan used as the global-minimum oracle.
pub const DENSE_SCAN: usize = 100_000;

/// Risk surface over a one-dimensional design space [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Surface {
    /// `Σ a_k sin(2π f_k x + φ_k)`.
    Sinusoid { terms: Vec<(f64, f64, f64)> },
    /// `slope · |x − center|`.
    AbsDistance { center: f64, slope: f64 },
}

impl Surface {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Surface::Sinusoid { terms } => terms
                .iter()
                .map(|&(a, f, phi)| a * (TAU * f * x + phi).sin())
                .sum(),
            Surface::AbsDistance { center, slope } => slope * (x - center).abs(),
        }
    }

    /// A Lipschitz constant valid on the whole line.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Surface::Sinusoid { terms } => terms.iter().map(|&(a, f, _)| a.abs() * TAU * f.abs()).sum(),
            Surface::AbsDistance { slope, .. } => slope.abs(),
        }
    }

    /// Sum of up to four sinusoids with integer frequencies.
    pub fn random_smooth(rng: &mut impl Rng) -> Self {
        let n = rng.random_range(1..=4);
        let terms = (0..n)
            .map(|_| {
                (
                    rng.random_range(-1.0..1.0),
                    rng.random_range(1..=5) as f64,
                    rng.random_range(0.0..TAU),
                )
            })
            .collect();
        Surface::Sinusoid { terms }
    }
}

/// `k` equally spaced points covering [0, 1].
pub fn uniform_catalog(k: usize) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::InvalidInput("catalog size must be at least 2".into()));
    }
    Ok((0..k).map(|i| i as f64 / (k - 1) as f64).collect())
}

pub fn covering_radius(k: usize) -> f64 {
    1.0 / (2.0 * (k - 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogResult {
    pub surface: usize,
    pub size: usize,
    pub eta: f64,
    pub gap: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogReport {
    pub tolerance: f64,
    pub results: Vec<CatalogResult>,
    pub pass: bool,
}

fn dense_min(surface: &Surface) -> f64 {
    (0..=DENSE_SCAN)
        .map(|i| surface.eval(i as f64 / DENSE_SCAN as f64))
        .fold(f64::INFINITY, f64::min)
}

/// Gap between the best catalog point and the dense-scan minimum, against
/// `L_D·η`, for each surface and catalog size.
pub fn catalog_approximation_check(
    surfaces: &[Surface],
    sizes: &[usize],
    tolerance: f64,
) -> Result<CatalogReport> {
    let mut results = Vec::new();
    for (j, surface) in surfaces.iter().enumerate() {
        let global = dense_min(surface);
        let l_d = surface.lipschitz();
        for &k in sizes {
            let catalog_min = uniform_catalog(k)?
                .into_iter()
                .map(|x| surface.eval(x))
                .fold(f64::INFINITY, f64::min);
            // the scan may miss the catalog's own minimizer
            let gap = catalog_min - global.min(catalog_min);
            let eta = covering_radius(k);
            let bound = l_d * eta;
            results.push(CatalogResult {
                surface: j,
                size: k,
                eta,
                gap,
                bound,
                pass: gap <= bound + tolerance,
            });
        }
    }
    let pass = results.iter().all(|r| r.pass);
    Ok(CatalogReport {
        tolerance,
        results,
        pass,
    })
}

pub fn random_surfaces(count: usize, seed: u64) -> Vec<Surface> {
    let mut rng = rng_from_seed(seed);
    (0..count).map(|_| Surface::random_smooth(&mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_containing_minimizer_has_zero_gap() {
        let s = Surface::AbsDistance { center: 0.5, slope: 1.0 };
        let r = catalog_approximation_check(&[s], &[3], 1e-9).unwrap();
        assert_eq!(r.results[0].gap, 0.0);
    }

    #[test]
    fn abs_example() {
        let s = Surface::AbsDistance { center: 0.37, slope: 1.0 };
        let r = catalog_approximation_check(&[s], &[3], 1e-9).unwrap();
        let res = &r.results[0];
        assert!((res.gap - 0.13).abs() < 1e-9);
        assert!((res.bound - 0.25).abs() < 1e-12);
        assert!(res.pass);
    }

    #[test]
    fn random_surfaces_pass() {
        let r = catalog_approximation_check(&random_surfaces(20, 4), &[5, 10, 20, 40], 1e-9).unwrap();
        assert_eq!(r.results.len(), 80);
        assert!(r.pass);
    }

    #[test]
    fn sinusoid_lipschitz_bounds_finite_differences() {
        for s in random_surfaces(10, 9) {
            let l = s.lipschitz();
            let h = 1e-4;
            for i in 0..1000 {
                let x = i as f64 / 1000.0;
                assert!((s.eval(x + h) - s.eval(x)).abs() <= l * h + 1e-12);
            }
        }
    }

    #[test]
    fn catalog_geometry() {
        assert_eq!(uniform_catalog(3).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(covering_radius(3), 0.25);
        assert!(uniform_catalog(1).is_err());
    }
}
