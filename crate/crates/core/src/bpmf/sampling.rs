//! Gaussian and Wishart draws for the Gibbs sampler.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

/// `x ~ N(mean, precision^-1)` given the lower Cholesky factor `l` of the
/// precision: `x = mean + L^-T z`.
pub fn mvn_from_precision_chol<R: Rng>(
    mean: &DVector<f64>,
    l: &DMatrix<f64>,
    rng: &mut R,
) -> DVector<f64> {
    let k = mean.len();
    let z = DVector::from_iterator(k, (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let w = l
        .transpose()
        .solve_upper_triangular(&z)
        .expect("Cholesky factor has a positive diagonal");
    mean + w
}

/// Wishart draw with scale `w` and `nu` degrees of freedom (Bartlett
/// decomposition). Requires `nu > k - 1` and `w` positive definite.
pub fn wishart<R: Rng>(w: &DMatrix<f64>, nu: f64, rng: &mut R) -> Option<DMatrix<f64>> {
    let k = w.nrows();
    let l = w.clone().cholesky()?.unpack();
    let mut a = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        let chi = ChiSquared::new(nu - i as f64).ok()?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let la = l * a;
    let out = &la * la.transpose();
    // symmetrize away rounding
    Some((&out + out.transpose()) * 0.5)
}
