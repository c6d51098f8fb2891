use corruptlab::analysis::{
    decay_model, fit_best_boundary, fit_boundary, fit_decay, marginal_utility, quantity_tradeoff, r_squared, se_bands,
    zero_contour, AdvantageGrid, BoundaryFamily, Classification, Required,
};
use corruptlab::render;
use corruptlab::rng;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

fn grid11() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

fn exact_points(a: f64, lambda: f64) -> Vec<(f64, f64)> {
    grid11().into_iter().map(|p| (p, decay_model(a, lambda, p))).collect()
}

#[test]
fn published_parameter_pairs_round_trip() {
    for (a, lambda) in [(0.475, 3.517), (395.8, 7.493)] {
        let fit = fit_decay(&exact_points(a, lambda)).unwrap();
        assert!(((fit.a - a) / a).abs() < 1e-6, "{fit:?}");
        assert!(((fit.lambda - lambda) / lambda).abs() < 1e-6, "{fit:?}");
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }
}

#[test]
fn noisy_samples_recover_parameters() {
    for (a, lambda) in [(0.475, 3.517), (395.8, 7.493)] {
        for seed in 0..20 {
            let noise = Normal::new(0.0, 0.01 * a).unwrap();
            let mut r = rng::stream(seed, "decay-noise");
            let pts: Vec<(f64, f64)> =
                exact_points(a, lambda).into_iter().map(|(p, s)| (p, s + noise.sample(&mut r))).collect();
            let fit = fit_decay(&pts).unwrap();
            assert!(((fit.a - a) / a).abs() < 0.05, "seed {seed}: {fit:?}");
            assert!(((fit.lambda - lambda) / lambda).abs() < 0.05, "seed {seed}: {fit:?}");
            assert!(fit.r_squared >= 0.99, "seed {seed}: {fit:?}");
        }
    }
}

#[test]
fn marginal_utility_at_published_parameters() {
    let fit = fit_decay(&exact_points(0.475, 3.517)).unwrap();
    assert!((marginal_utility(&fit, 0.0) - 0.0496).abs() < 5e-5);
    assert!((marginal_utility(&fit, 1.0) - 0.475 * 3.517).abs() < 1e-6);
}

#[test]
fn three_point_r_squared_by_hand() {
    // Observations 1, 2, 4 (mean 7/3); predictions 1, 3, 3.
    // SS_res = 0 + 1 + 1 = 2; SS_tot = 16/9 + 1/9 + 25/9 = 42/9.
    let pts = [(0.0, 1.0), (0.5, 2.0), (1.0, 4.0)];
    let r2 = r_squared(&pts, |p| if p == 0.0 { 1.0 } else { 3.0 }).unwrap();
    assert!((r2 - (1.0 - 2.0 / (42.0 / 9.0))).abs() < 1e-12);
}

#[test]
fn identical_scores_give_zero_advantage() {
    let scores = [0.9, 0.7, 0.4];
    let without: Vec<(f64, f64)> = [0.0, 0.5, 0.9].iter().zip(scores).map(|(&p, s)| (p, s)).collect();
    let with: Vec<(f64, f64, f64)> =
        without.iter().flat_map(|&(p, s)| [0.0, 0.5, 1.0].into_iter().map(move |q| (p, q, s))).collect();
    let g = AdvantageGrid::from_scores(&with, &without).unwrap();
    assert!(g.mean.iter().flatten().all(|&a| a == 0.0));
    assert!(!g.has_sign_change());
    assert!(zero_contour(&g).is_err());
}

#[test]
fn exponential_boundary_is_preferred_for_exponential_points() {
    let (c, k) = (0.9, 3.0);
    let pts: Vec<[f64; 2]> =
        (0..=20).map(|i| i as f64 / 20.0).map(|p| [p, c * (k * p).exp_m1() / k.exp_m1()]).collect();
    let exp = fit_boundary(&pts, BoundaryFamily::Exponential).unwrap();
    let log = fit_boundary(&pts, BoundaryFamily::Logistic).unwrap();
    assert!(exp.rmse < log.rmse, "exponential {} vs logistic {}", exp.rmse, log.rmse);
    assert_eq!(fit_best_boundary(&pts).unwrap().family, BoundaryFamily::Exponential);
    // Convex curve below the diagonal.
    assert_eq!(exp.classification, Classification::NoiseSensitive);
}

fn diagonal_grid(se: f64) -> AdvantageGrid {
    let ps: Vec<f64> = (0..=10).map(|i| 0.05 + 0.09 * i as f64).collect();
    AdvantageGrid::from_fn(&ps, &ps, |p, q| q - p, se)
}

#[test]
fn se_bands_follow_the_gradient_formula() {
    let grid = diagonal_grid(0.1);
    let contour = zero_contour(&grid).unwrap();
    let fit = fit_best_boundary(&contour).unwrap();
    let z0 = se_bands(&fit, &contour, &grid, 0.0);
    for (l, u) in z0.lower.iter().zip(&z0.upper) {
        assert_eq!(l, u);
        assert!((l[1] - fit.eval(l[0])).abs() < 1e-15);
    }
    let one = se_bands(&fit, &contour, &grid, 1.0);
    let wide = se_bands(&fit, &contour, &grid, 1.96);
    assert!(!one.lower.is_empty());
    for k in 0..one.lower.len() {
        assert!(wide.lower[k][1] < one.lower[k][1] && wide.upper[k][1] > one.upper[k][1]);
        // |dA/dq| = 1 and SE = 0.1, so the band is 2 * 0.1 wide at z = 1.
        let width = one.upper[k][1] - one.lower[k][1];
        assert!((width - 0.2).abs() < 0.02, "width {width}");
    }
}

#[test]
fn diagonal_boundary_stays_within_a_cell() {
    let grid = diagonal_grid(0.05);
    let contour = zero_contour(&grid).unwrap();
    let fit = fit_best_boundary(&contour).unwrap();
    assert_eq!(fit.classification, Classification::OnDiagonal);
    for &p in &grid.p_grid {
        assert!((fit.eval(p) - p).abs() < 0.09);
    }
    let svg = render::heatmap_plot("diagonal", &grid, Some(&contour), Some(&fit), &[]);
    assert!(svg.contains("boundary") && !svg.contains("no sign change"));
}

#[test]
fn decay_render_annotates_fit() {
    let fit = fit_decay(&exact_points(0.475, 3.517)).unwrap();
    let series = [render::Series {
        label: "samples",
        points: exact_points(0.475, 3.517).into_iter().map(|(p, s)| (p, s, 0.0)).collect(),
    }];
    let svg = render::decay_plot("round trip", &series, Some(&fit));
    assert!(svg.contains("a = 0.4750, λ = 3.5170, R² = 1.0000"), "{svg}");
}

#[test]
fn quantity_matches_analytic_inversion() {
    let (s_inf, tau) = (0.8, 400.0);
    let rows: Vec<(f64, f64, f64)> =
        [100.0, 200.0, 400.0, 800.0].iter().map(|&s| (0.3, s, s_inf * (1.0 - (-s / tau as f64).exp()))).collect();
    let required = |target: f64| -tau * (1.0 - target / s_inf).ln();
    for target in [0.6, 0.78] {
        let size = match quantity_tradeoff(&rows, target)[0].required {
            Required::Observed(s) | Required::Extrapolated(s) => s,
            Required::Unreachable => panic!("target {target} reported unreachable"),
        };
        let exact = required(target);
        assert!(((size - exact) / exact).abs() < 0.1, "target {target}: {size} vs {exact}");
    }
}

proptest! {
    #[test]
    fn fit_is_scale_equivariant(a in 0.1..100.0f64, lambda in 0.5..10.0f64, c in 0.01..100.0f64, seed in any::<u64>()) {
        let noise = Normal::new(0.0, 0.02 * a).unwrap();
        let mut r = rng::stream(seed, "scale");
        let pts: Vec<(f64, f64)> = exact_points(a, lambda).into_iter().map(|(p, s)| (p, s + noise.sample(&mut r))).collect();
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(p, s)| (p, c * s)).collect();
        if let (Ok(f), Ok(g)) = (fit_decay(&pts), fit_decay(&scaled)) {
            prop_assert!((g.a / (c * f.a) - 1.0).abs() < 1e-5, "{:?} {:?}", f, g);
            prop_assert!((g.lambda / f.lambda - 1.0).abs() < 1e-5);
            prop_assert!((g.r_squared - f.r_squared).abs() < 1e-8);
        }
    }

    #[test]
    fn marginal_utility_matches_finite_difference(a in 0.1..500.0f64, lambda in 0.5..10.0f64, p in 0.05..0.95f64) {
        let fit = fit_decay(&exact_points(a, lambda)).unwrap();
        let h = 1e-5;
        // Score falls as p rises; the marginal utility of clean data is -dS/dp.
        let fd = -(fit.predict(p + h) - fit.predict(p - h)) / (2.0 * h);
        let mu = marginal_utility(&fit, p);
        prop_assert!((mu - fd).abs() <= 1e-6 * mu.abs().max(1.0), "{} vs {}", mu, fd);
    }

    #[test]
    fn contour_points_lie_on_the_zero_set(coef in prop::array::uniform6(-1.0..1.0f64), n in 3usize..9) {
        let axis: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let f = |p: f64, q: f64| coef[0] + coef[1] * p + coef[2] * q + coef[3] * p * q + coef[4] * p * p + coef[5] * q * q;
        let grid = AdvantageGrid::from_fn(&axis, &axis, f, 0.1);
        if let Ok(contour) = zero_contour(&grid) {
            for pt in contour {
                prop_assert!(grid.interpolate(pt[0], pt[1]).abs() < 1e-12, "{:?}", pt);
            }
        } else {
            prop_assert!(!grid.has_sign_change());
        }
    }

    #[test]
    fn advantage_ignores_row_order(seed in any::<u64>()) {
        let mut r = rng::stream(seed, "rows");
        let noise = Normal::new(0.0, 0.1).unwrap();
        let mut without: Vec<(f64, f64)> = Vec::new();
        let mut with: Vec<(f64, f64, f64)> = Vec::new();
        for &p in &[0.1, 0.5, 0.9] {
            for _ in 0..3 {
                without.push((p, 1.0 - p + noise.sample(&mut r)));
                for &q in &[0.0, 0.5, 1.0] {
                    with.push((p, q, 1.0 - q + noise.sample(&mut r)));
                }
            }
        }
        let a = AdvantageGrid::from_scores(&with, &without).unwrap();
        with.shuffle(&mut r);
        without.shuffle(&mut r);
        let b = AdvantageGrid::from_scores(&with, &without).unwrap();
        prop_assert_eq!(&a.p_grid, &b.p_grid);
        prop_assert_eq!(&a.q_grid, &b.q_grid);
        for (x, y) in a.mean.iter().flatten().zip(b.mean.iter().flatten()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in a.se.iter().flatten().zip(b.se.iter().flatten()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}
