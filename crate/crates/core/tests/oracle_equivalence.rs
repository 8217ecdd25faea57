mod common;

use common::oracle::{brute_gcm, brute_mle, brute_pava, OracleConfig};
use common::{families, random_sample};
use monoresp::rng;
use monoresp::{fit_constrained, fit_unconstrained, pava, slogcm, CsumDiagram, Family, FitOptions, Sample};
use rand::Rng;

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn oracle_recovers_monotone_gaussian_data() {
    let g = Family::gaussian(1.0).unwrap();
    let s = Sample::new(vec![0.1, 0.2], vec![-0.4, 1.3]).unwrap();
    let u = brute_mle(&g, &s, None, &OracleConfig::default()).unwrap();
    assert!(max_abs_diff(&u, &[-0.4, 1.3]) <= 1e-4);
}

#[test]
fn oracle_refuses_large_inputs() {
    let g = Family::gaussian(1.0).unwrap();
    let s = Sample::new((0..7).map(f64::from).collect(), vec![0.0; 7]).unwrap();
    assert!(brute_mle(&g, &s, None, &OracleConfig::default()).is_err());
}

#[test]
fn unconstrained_fits_match_oracle() {
    let cfg = OracleConfig::default();
    for family in families() {
        for seed in 0..20 {
            let n = 1 + (seed as usize % 6);
            let s = random_sample(&family, n, seed);
            let fit = fit_unconstrained(&family, &s, &FitOptions::default()).unwrap();
            let oracle = brute_mle(&family, &s, None, &cfg).unwrap();
            let d = max_abs_diff(&fit.group_values(&s), &oracle);
            assert!(d <= 2e-3, "{family} seed {seed}: {d}");
        }
    }
}

#[test]
fn constrained_fits_match_oracle() {
    let cfg = OracleConfig::default();
    for family in families() {
        for seed in 0..20 {
            let n = 2 + (seed as usize % 5);
            let s = random_sample(&family, n, 100 + seed);
            let mut r = rng::stream(seed, 5);
            let cut = r.random_range(1..s.n_groups());
            let z0 = 0.5 * (s.group_z(cut - 1) + s.group_z(cut));
            let theta0 = common::random_theta(&family, &mut r);
            let fit = fit_constrained(&family, &s, z0, theta0, &FitOptions::default()).unwrap();
            let oracle = brute_mle(&family, &s, Some((z0, theta0)), &cfg).unwrap();
            let d = max_abs_diff(&fit.fit.group_values(&s), &oracle);
            assert!(d <= 2e-3, "{family} seed {seed}: {d}");
        }
    }
}

#[test]
fn clamp_recipe_is_exact() {
    for family in families() {
        for seed in 0..20 {
            let s = random_sample(&family, 30, 200 + seed);
            let z0 = 0.5;
            let theta0 = common::random_theta(&family, &mut rng::stream(seed, 9));
            let opts = FitOptions::default();
            let c = fit_constrained(&family, &s, z0, theta0, &opts).unwrap();
            let m = s.count_at_or_below(z0);
            let left = fit_unconstrained(&family, &s.subsample(0..m).unwrap(), &opts).unwrap();
            let right = fit_unconstrained(&family, &s.subsample(m..s.len()).unwrap(), &opts).unwrap();
            let recipe: Vec<f64> = left
                .values
                .iter()
                .map(|v| v.min(theta0))
                .chain(right.values.iter().map(|v| v.max(theta0)))
                .collect();
            assert_eq!(c.fit.values, recipe, "{family} seed {seed}");
        }
    }
}

#[test]
fn pava_matches_partition_oracle() {
    let mut r = rng::stream(11, 0);
    for _ in 0..200 {
        let n = r.random_range(1..=9);
        let g: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| r.random_range(0.1..3.0)).collect();
        let d = max_abs_diff(&pava(&g, &w).unwrap(), &brute_pava(&g, &w).unwrap());
        assert!(d <= 1e-6, "{d}");
    }
}

#[test]
fn slogcm_matches_affine_minorant_oracle() {
    let mut r = rng::stream(12, 0);
    for _ in 0..500 {
        let n = r.random_range(1..=12);
        let mut pts = vec![(0.0, 0.0)];
        for _ in 0..n {
            let (x, y) = *pts.last().unwrap();
            pts.push((x + r.random_range(0.1..2.0), y + r.random_range(-2.0..2.0)));
        }
        let fast = slogcm(&CsumDiagram::new(&pts).unwrap()).slopes;
        let d = max_abs_diff(&fast, &brute_gcm(&pts).unwrap());
        assert!(d <= 1e-10, "{d}");
    }
    // convex input is its own minorant
    let pts = [(0.0, 0.0), (1.0, 1.0), (2.0, 4.0), (3.0, 9.0)];
    assert_eq!(brute_gcm(&pts).unwrap(), vec![1.0, 3.0, 5.0]);
    assert_eq!(brute_gcm(&[(0.0, 0.0), (2.0, 1.0)]).unwrap(), vec![0.5]);
}
