//! Sampling from the density `nu(b) ∝ e^{-beta * ||b||}` on `R^d`.
//!
//! The vector is drawn in polar form: a uniformly random direction times a
//! radius with density proportional to `r^{d-1} e^{-beta r}`, i.e. a
//! `Gamma(d, 1/beta)` radius. Because the shape `d` is always an integer, the
//! radius is generated as the sum of `d` independent exponentials of mean
//! `1/beta` — the exact construction used by the Gamma tail bound — instead of
//! going through a general-shape rejection sampler.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;

/// Parameters of the vector noise law `nu(b) ∝ e^{-beta * ||b||}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    dimension: usize,
    beta: f64,
}

impl NoiseParams {
    pub fn new(dimension: usize, beta: f64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidParam("noise dimension must be >= 1".into()));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParam(format!(
                "noise inverse scale beta must be positive, got {beta}"
            )));
        }
        Ok(Self { dimension, beta })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Uniformly random unit vector in `R^d`, via a normalized standard Gaussian
/// draw (exactly rotation invariant).
///
/// Panics if `d == 0`.
pub fn sample_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    assert!(d >= 1, "direction dimension must be >= 1");
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = linalg::norm(&v);
        // A Gaussian vector is numerically degenerate with probability ~0;
        // resampling preserves the distribution.
        if n > 1e-100 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

/// A `Gamma(d, theta)` radius as the sum of `d` exponentials of mean `theta`.
///
/// Panics if `d == 0` or `theta <= 0`.
pub fn sample_radius<R: Rng + ?Sized>(d: usize, theta: f64, rng: &mut R) -> f64 {
    assert!(d >= 1, "gamma shape must be >= 1");
    assert!(
        theta.is_finite() && theta > 0.0,
        "gamma scale must be positive, got {theta}"
    );
    (0..d)
        .map(|_| {
            // u in [0, 1), so 1 - u in (0, 1] and the log is finite.
            let u: f64 = rng.gen();
            -theta * (1.0 - u).ln()
        })
        .sum()
}

/// One draw of the noise vector `b` with density `∝ e^{-beta * ||b||}`.
pub fn sample_noise<R: Rng + ?Sized>(params: &NoiseParams, rng: &mut R) -> Vec<f64> {
    let radius = sample_radius(params.dimension, 1.0 / params.beta, rng);
    let mut dir = sample_direction(params.dimension, rng);
    for x in &mut dir {
        *x *= radius;
    }
    dir
}
