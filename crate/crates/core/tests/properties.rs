mod common;

use common::oracle::brute_gcm;
use common::{families, random_sample, random_theta};
use monoresp::estimate::Init;
use monoresp::icm::{self, icm_step};
use monoresp::lrt::{invert_profile, LrProfile};
use monoresp::{
    check_fenchel, check_fenchel_constrained, fit_constrained, fit_unconstrained, loglik_total, lr_statistic, pava, rng, slogcm,
    slogcm0, CsumDiagram, Family, FitOptions, Method, ParametricFamily, Sample,
};
use proptest::prelude::*;

fn family_strategy() -> impl Strategy<Value = Family> {
    (0usize..4).prop_map(|i| families()[i])
}

fn diagram_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.05f64..3.0, -3.0f64..3.0), 1..40).prop_map(|incs| {
        let mut pts = vec![(0.0, 0.0)];
        for (dx, dy) in incs {
            let (x, y) = *pts.last().unwrap();
            pts.push((x + dx, y + dy));
        }
        pts
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn fits_satisfy_fenchel_conditions(family in family_strategy(), n in 2usize..120, seed in any::<u64>()) {
        let s = random_sample(&family, n, seed);
        let opts = FitOptions::default();
        let fit = fit_unconstrained(&family, &s, &opts).unwrap();
        prop_assert!(check_fenchel(&family, &s, &fit, 1e-5).passed);
        prop_assert!(fit.values.windows(2).all(|w| w[0] <= w[1]));

        let mut r = rng::stream(seed, 1);
        let cut = 1 + (seed as usize) % (s.n_groups() - 1);
        let z0 = 0.5 * (s.group_z(cut - 1) + s.group_z(cut));
        let theta0 = random_theta(&family, &mut r);
        let c = fit_constrained(&family, &s, z0, theta0, &opts).unwrap();
        prop_assert!(check_fenchel_constrained(&family, &s, &c, 1e-5).passed);
        prop_assert!(c.fit.values.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(c.fit.psi_hat.eval(z0), theta0);
        // the constrained fit can never beat the unconstrained one
        prop_assert!(c.fit.objective >= fit.objective - 1e-9 * (1.0 + fit.objective.abs()));
    }
}

proptest! {
    #[test]
    fn slogcm_slopes_are_nondecreasing_and_match_oracle(pts in diagram_strategy()) {
        let d = CsumDiagram::new(&pts).unwrap();
        let s = slogcm(&d);
        prop_assert!(s.slopes.windows(2).all(|w| w[0] <= w[1]));
        if pts.len() <= 13 {
            for (a, b) in s.slopes.iter().zip(brute_gcm(&pts).unwrap()) {
                prop_assert!((a - b).abs() <= 1e-10);
            }
        }
        // the minorant touches the diagram at its ends
        let total: f64 = s.slopes.iter().zip(pts.windows(2)).map(|(s, w)| s * (w[1].0 - w[0].0)).sum();
        prop_assert!((total - pts.last().unwrap().1).abs() <= 1e-9);
    }

    #[test]
    fn slogcm0_respects_the_clamp(pts in diagram_strategy(), frac in 0.0f64..1.0, clamp in -2.0f64..2.0) {
        let d = CsumDiagram::new(&pts).unwrap();
        let split = ((d.len() as f64) * frac) as usize;
        let s = slogcm0(&d, split, clamp).unwrap();
        prop_assert!(s.slopes.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(s.slopes[..split].iter().all(|&v| v <= clamp));
        prop_assert!(s.slopes[split..].iter().all(|&v| v >= clamp));
    }

    #[test]
    fn pava_is_a_monotone_mean_preserving_projection(
        gw in prop::collection::vec((-5.0f64..5.0, 0.01f64..4.0), 1..60)
    ) {
        let (g, w): (Vec<f64>, Vec<f64>) = gw.into_iter().unzip();
        let u = pava(&g, &w).unwrap();
        prop_assert!(u.windows(2).all(|p| p[0] <= p[1] + 1e-12));
        let mass = |v: &[f64]| v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        prop_assert!((mass(&u) - mass(&g)).abs() <= 1e-10 * (1.0 + mass(&g).abs()));
        let again = pava(&u, &w).unwrap();
        for (a, b) in again.iter().zip(&u) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        // agrees with the weighted diagram up to the roundoff of differencing
        // cumulative sums, which grows with total weight over the smallest weight
        let total: f64 = w.iter().sum();
        let w_min = w.iter().cloned().fold(f64::INFINITY, f64::min);
        let s = slogcm(&CsumDiagram::weighted(&g, &w).unwrap()).slopes;
        for (a, b) in s.iter().zip(&u) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()) * total / w_min);
        }
    }

    #[test]
    fn pava_equals_slogcm_for_unit_weights(g in prop::collection::vec(-5.0f64..5.0, 1..60)) {
        let w = vec![1.0; g.len()];
        let u = pava(&g, &w).unwrap();
        let s = slogcm(&CsumDiagram::weighted(&g, &w).unwrap()).slopes;
        for (a, b) in s.iter().zip(&u) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn lr_statistic_is_nonnegative_and_vanishes_at_the_fit(family in family_strategy(), n in 4usize..80, seed in any::<u64>()) {
        let s = random_sample(&family, n, seed);
        let z0 = 0.5;
        if s.z()[0] >= z0 || *s.z().last().unwrap() <= z0 {
            return Ok(());
        }
        let p = LrProfile::new(&family, &s, z0, &FitOptions::default()).unwrap();
        let theta0 = random_theta(&family, &mut rng::stream(seed, 3));
        prop_assert!(p.statistic(theta0) >= -1e-8);
        let center = p.center();
        prop_assert_eq!(p.statistic(center), 0.0);
        let r = lr_statistic(&family, &s, z0, theta0).unwrap();
        prop_assert!((r.two_log_lambda - p.statistic(theta0)).abs() <= 1e-9 * (1.0 + r.two_log_lambda));
        let ci = invert_profile(&p, 0.95, 2.0).unwrap();
        prop_assert!(ci.contains(center));
    }

    #[test]
    fn exp_family_fit_is_pava_on_the_sufficient_statistic(i in 0usize..3, n in 1usize..80, seed in any::<u64>()) {
        let family = families()[i];
        let nf = family.exp_family().unwrap();
        let s = random_sample(&family, n, seed);
        let fit = fit_unconstrained(&family, &s, &FitOptions::default()).unwrap();
        let t: Vec<f64> = s.x().iter().map(|&x| nf.t(x)).collect();
        let expected = pava(&t, &vec![1.0; n]).unwrap();
        for (&v, e) in fit.values.iter().zip(expected) {
            prop_assert!((nf.psi_to_mean(v) - e).abs() <= 1e-10 * (1.0 + e.abs()));
        }
    }

    #[test]
    fn constrained_fit_is_the_clamped_half_sample_fits(family in family_strategy(), n in 2usize..80, seed in any::<u64>()) {
        let s = random_sample(&family, n, seed);
        let m = 1 + (seed as usize) % (n - 1);
        let z0 = 0.5 * (s.z()[m - 1] + s.z()[m]);
        let theta0 = random_theta(&family, &mut rng::stream(seed, 5));
        let opts = FitOptions::default();
        let c = fit_constrained(&family, &s, z0, theta0, &opts).unwrap();
        let left = fit_unconstrained(&family, &s.subsample(0..m).unwrap(), &opts).unwrap();
        let right = fit_unconstrained(&family, &s.subsample(m..n).unwrap(), &opts).unwrap();
        let clamped: Vec<f64> = left
            .values
            .iter()
            .map(|v| v.min(theta0))
            .chain(right.values.iter().map(|v| v.max(theta0)))
            .collect();
        prop_assert_eq!(c.split_index, m);
        prop_assert_eq!(&c.fit.values, &clamped);
        let ll = loglik_total(&family, &s, &fit_unconstrained(&family, &s, &opts).unwrap().psi_hat).unwrap();
        prop_assert!(loglik_total(&family, &s, &c.fit.psi_hat).unwrap() <= ll + 1e-9 * (1.0 + ll.abs()));
    }

    #[test]
    fn icm_solution_is_a_fixed_point_with_decreasing_objective(n in 5usize..200, seed in any::<u64>()) {
        let fam = Family::curved_normal(1.0, 1.0, 1.0).unwrap();
        let s = random_sample(&fam, n, seed);
        let opts = FitOptions { trace: true, ..Default::default() };
        let sol = icm::solve(&fam, &s, &Init::Auto, &opts, None).unwrap();
        for w in sol.trace.windows(2) {
            prop_assert!(w[1].objective <= w[0].objective + 1e-10 * (1.0 + w[0].objective.abs()));
        }
        let next = icm_step(&fam, &s, &sol.u).unwrap();
        // a step from the solution moves it by at most a Newton correction
        // of the residual score, which is below tol, scaled by 1/curvature ~ θ²
        for (a, b) in next.iter().zip(&sol.u) {
            prop_assert!((a - b).abs() <= 10.0 * opts.tol * (1.0 + b * b), "{} vs {}", a, b);
        }
    }

    #[test]
    fn forced_icm_matches_explicit_solution(seed in any::<u64>(), n in 3usize..60) {
        let g = Family::gaussian(1.5).unwrap();
        let s = random_sample(&g, n, seed);
        let direct = fit_unconstrained(&g, &s, &FitOptions::default()).unwrap();
        let icm = fit_unconstrained(&g, &s, &FitOptions { method: Method::Icm, ..Default::default() }).unwrap();
        for (a, b) in direct.values.iter().zip(&icm.values) {
            prop_assert!((a - b).abs() <= 1e-8);
        }
    }

    #[test]
    fn step_function_tracks_fitted_values(family in family_strategy(), n in 1usize..50, seed in any::<u64>()) {
        let s = random_sample(&family, n, seed);
        let fit = fit_unconstrained(&family, &s, &FitOptions::default()).unwrap();
        for (&z, &v) in s.z().iter().zip(&fit.values) {
            prop_assert_eq!(fit.psi_hat.eval(z), v);
        }
        let covered: usize = fit.blocks.iter().map(|b| b.len()).sum();
        prop_assert_eq!(covered, s.len());
    }

    #[test]
    fn sample_order_does_not_matter(seed in any::<u64>(), n in 2usize..40) {
        let fam = Family::poisson();
        let s = random_sample(&fam, n, seed);
        let mut pairs: Vec<(f64, f64)> = s.z().iter().copied().zip(s.x().iter().copied()).collect();
        pairs.reverse();
        let shuffled = Sample::from_pairs(pairs).unwrap();
        let a = fit_unconstrained(&fam, &s, &FitOptions::default()).unwrap();
        let b = fit_unconstrained(&fam, &shuffled, &FitOptions::default()).unwrap();
        prop_assert_eq!(a.values, b.values);
    }
}
