#![allow(dead_code)]

pub mod oracle;

use monoresp::rng;
use monoresp::{Family, ParametricFamily, Sample};
use rand::Rng;

pub fn families() -> Vec<Family> {
    vec![
        Family::gaussian(1.0).unwrap(),
        Family::bernoulli(),
        Family::poisson(),
        Family::curved_normal(1.0, 1.0, 1.0).unwrap(),
    ]
}

/// A link value inside the family's domain, drawn from a range where data
/// are informative.
pub fn random_theta(family: &Family, rng: &mut impl Rng) -> f64 {
    match family {
        Family::Gaussian { .. } => rng.random_range(-2.0..2.0),
        Family::Bernoulli => rng.random_range(0.1..0.9),
        Family::Poisson => rng.random_range(0.3..4.0),
        Family::CurvedNormal { .. } => rng.random_range(0.5..2.0),
    }
}

/// `n` observations at distinct covariates with an increasing link.
pub fn random_sample(family: &Family, n: usize, seed: u64) -> Sample {
    let mut r = rng::stream(seed, 77);
    let mut thetas: Vec<f64> = (0..n).map(|_| random_theta(family, &mut r)).collect();
    thetas.sort_by(f64::total_cmp);
    let pairs: Vec<(f64, f64)> = thetas
        .iter()
        .enumerate()
        .map(|(i, &t)| ((i as f64 + r.random::<f64>() * 0.5) / n as f64, family.sample(t, &mut r)))
        .collect();
    Sample::from_pairs(pairs).unwrap()
}
