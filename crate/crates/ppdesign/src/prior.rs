use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg::psd_factor;

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

/// Multivariate normal prior over model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorSpec {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl PriorSpec {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let m = mean.len();
        if covariance.nrows() != m || covariance.ncols() != m {
            return Err(Error::InvalidPrior(format!(
                "covariance is {}x{}, expected {m}x{m}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        for i in 0..m {
            for j in i + 1..m {
                if (covariance[(i, j)] - covariance[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidPrior(format!(
                        "covariance not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(PriorSpec { mean, covariance })
    }

    /// Point prior at `mean` (zero covariance); a single draw suffices.
    pub fn degenerate(mean: DVector<f64>) -> Self {
        let m = mean.len();
        PriorSpec { mean, covariance: DMatrix::zeros(m, m) }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// A frozen sample of prior draws together with its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorDraws {
    pub draws: Vec<DVector<f64>>,
    pub seed: u64,
}

impl PriorDraws {
    pub fn num_draws(&self) -> usize {
        self.draws.len()
    }

    pub fn dim(&self) -> usize {
        self.draws.first().map_or(0, |d| d.len())
    }
}

const PRIMES: [usize; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131,
];

fn radical_inverse(mut n: usize, base: usize) -> f64 {
    let mut inv = 0.0;
    let mut denom = 1.0;
    let b = base as f64;
    while n > 0 {
        denom *= b;
        inv += (n % base) as f64 / denom;
        n /= base;
    }
    inv
}

/// Quasi-Monte Carlo prior sample: a Cranley–Patterson rotated Halton point
/// set mapped through the normal inverse CDF and a rank-revealing covariance
/// factor. Deterministic given (mean, covariance, seed, R); degenerate
/// coordinates reproduce the mean exactly.
pub fn sample_prior(prior: &PriorSpec, num_draws: usize, seed: u64) -> Result<PriorDraws> {
    if num_draws == 0 {
        return Err(Error::InvalidPrior("at least one draw is required".into()));
    }
    let m = prior.dim();
    let factor = psd_factor(&prior.covariance, PSD_TOL).ok_or_else(|| {
        Error::InvalidPrior("covariance is not positive semidefinite within tolerance".into())
    })?;
    let rank = factor.ncols();
    if rank > PRIMES.len() {
        return Err(Error::InvalidPrior(format!(
            "covariance rank {} exceeds the supported QMC dimension {}",
            rank,
            PRIMES.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shifts: Vec<f64> = (0..rank).map(|_| rng.gen::<f64>()).collect();
    let normal = Normal::standard();
    let mut draws = Vec::with_capacity(num_draws);
    let mut z = DVector::zeros(rank);
    for r in 0..num_draws {
        for d in 0..rank {
            let mut u = radical_inverse(r + 1, PRIMES[d]) + shifts[d];
            if u >= 1.0 {
                u -= 1.0;
            }
            let u = u.clamp(1e-12, 1.0 - 1e-12);
            z[d] = normal.inverse_cdf(u);
        }
        let mut draw = prior.mean.clone();
        if rank > 0 {
            draw += &factor * &z;
        }
        debug_assert_eq!(draw.len(), m);
        draws.push(draw);
    }
    Ok(PriorDraws { draws, seed })
}
