use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{leroux_precision, AdjacencyMatrix, CarParams};
use crate::error::{Error, Result};

/// Latent process and observations of one simulated series, indexed [t][i].
#[derive(Clone, Debug, PartialEq)]
pub struct CarSimulation {
    pub phi: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
}

fn standard_normal_vec<R: rand::Rng>(rng: &mut R, m: usize) -> DVector<f64> {
    DVector::from_fn(m, |_, _| StandardNormal.sample(rng))
}

/// Draws `u ~ N(0, Q^-1)` from a Cholesky factor of Q.
pub(crate) fn draw_precision_normal<R: rand::Rng>(chol: &Cholesky<f64, nalgebra::Dyn>, rng: &mut R) -> DVector<f64> {
    let z = standard_normal_vec(rng, chol.l().nrows());
    chol.l()
        .transpose()
        .solve_upper_triangular(&z)
        .expect("Cholesky factor has a positive diagonal")
}

pub(crate) fn cholesky(q: DMatrix<f64>, what: &str) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    Cholesky::new(q).ok_or_else(|| Error::Numerical(format!("Cholesky factorization of {what} failed")))
}

/// Forward simulation of `periods` visits. Zero variances are allowed and
/// give the degenerate deterministic limit.
pub fn simulate_car_st(
    params: &CarParams,
    w: &AdjacencyMatrix,
    periods: usize,
    seed: u64,
) -> Result<CarSimulation> {
    if periods == 0 {
        return Err(Error::invalid("simulation needs at least one period"));
    }
    let ok = params.beta.is_finite()
        && params.tau2 >= 0.0
        && params.eta2 >= 0.0
        && params.tau2.is_finite()
        && params.eta2.is_finite()
        && (0.0..1.0).contains(&params.rho)
        && (0.0..=1.0).contains(&params.psi);
    if !ok {
        return Err(Error::invalid(format!("cannot simulate with {params:?}")));
    }
    let m = w.len();
    let chol = cholesky(leroux_precision(w, params.rho)?, "the Leroux precision")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = params.tau2.sqrt();
    let eta = params.eta2.sqrt();
    let mut phi_t = draw_precision_normal(&chol, &mut rng) * tau;
    let mut phi = Vec::with_capacity(periods);
    let mut x = Vec::with_capacity(periods);
    for t in 0..periods {
        if t > 0 {
            phi_t = phi_t * params.psi + draw_precision_normal(&chol, &mut rng) * tau;
        }
        let obs: Vec<f64> = (0..m)
            .map(|i| {
                let e: f64 = StandardNormal.sample(&mut rng);
                params.beta + phi_t[i] + eta * e
            })
            .collect();
        phi.push(phi_t.iter().copied().collect());
        x.push(obs);
    }
    Ok(CarSimulation { phi, x })
}
