use approx::assert_relative_eq;
use htl_core::convolve::{
    convolve, convolve_power, convolve_with, density_convolve_square, kesten_check, linear_direct,
    overshoot_local, stopped_sum, Method, StoppingLaw,
};
use htl_core::{AnalyticDistribution, DeltaWindow, DensityGrid, GridMeasure, GridSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid(d: f64, x_max: f64) -> GridSpec {
    GridSpec::nonnegative(d, x_max).unwrap()
}

fn random_measure(rng: &mut ChaCha8Rng, spec: GridSpec) -> GridMeasure {
    let mut v: Vec<f64> = (0..spec.n_cells()).map(|_| rng.random::<f64>()).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    GridMeasure::new(spec, v, 0.0).unwrap()
}

#[test]
fn point_masses_add() {
    let spec = grid(0.5, 20.0);
    let a = GridMeasure::point_mass(spec, 1.5, 1.0).unwrap();
    let b = GridMeasure::point_mass(spec, 3.0, 1.0).unwrap();
    let c = convolve(&a, &b).unwrap();
    assert_eq!(c, GridMeasure::point_mass(*c.spec(), 4.5, 1.0).unwrap());
}

#[test]
fn origin_atom_is_the_identity() {
    let spec = grid(0.25, 30.0);
    let a = AnalyticDistribution::pareto(2.0).unwrap().discretize(&spec);
    let id = GridMeasure::point_mass(spec, 0.0, 1.0).unwrap();
    let c = convolve(&a, &id).unwrap();
    assert_eq!(c.mass(), a.mass());
    assert_relative_eq!(c.overflow(), a.overflow(), max_relative = 1e-15);
}

#[test]
fn fft_path_matches_direct_on_64_cells() {
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    let spec = GridSpec::new(1.0, -1, 64).unwrap();
    for _ in 0..20 {
        let a = random_measure(&mut rng, spec);
        let b = random_measure(&mut rng, spec);
        let d = convolve_with(&a, &b, Method::Direct).unwrap();
        let f = convolve_with(&a, &b, Method::Fft).unwrap();
        assert!(d.max_abs_diff(&f).unwrap() < 1e-12);
    }
}

#[test]
fn first_power_is_the_input() {
    let spec = grid(0.5, 40.0);
    let a = AnalyticDistribution::lognormal(1.0, 1.0)
        .unwrap()
        .discretize(&spec);
    assert_eq!(convolve_power(&a, 1).unwrap(), a);
}

#[test]
fn powers_of_a_point_mass() {
    let spec = grid(1.0, 50.0);
    let a = GridMeasure::point_mass(spec, 3.0, 1.0).unwrap();
    for n in 1..=7u32 {
        let p = convolve_power(&a, n).unwrap();
        assert_eq!(p.mass()[3 * n as usize], 1.0);
        assert_eq!(p.total(), 1.0);
    }
}

#[test]
fn fourth_power_equals_sequential_convolution() {
    let spec = grid(0.5, 60.0);
    let a = AnalyticDistribution::pareto(1.5).unwrap().discretize(&spec);
    let mut seq = a.clone();
    for _ in 0..3 {
        seq = convolve(&seq, &a).unwrap();
    }
    let p = convolve_power(&a, 4).unwrap();
    assert!(p.max_abs_diff(&seq).unwrap() < 1e-12);
    assert_relative_eq!(p.overflow(), seq.overflow(), max_relative = 1e-12);
}

#[test]
fn exponential_square_is_gamma_two() {
    let e = AnalyticDistribution::exponential(1.0).unwrap();
    let f = DensityGrid::from_distribution(&e, 1e-3, 0.0, 10.0).unwrap();
    let sq = density_convolve_square(&f).unwrap();
    for x in [0.5, 1.0, 2.0, 5.0, 9.0] {
        let exact = x * f64::exp(-x);
        let got = sq.value_at(x).unwrap();
        assert!((got - exact).abs() < 1e-6, "x = {x}: {got} vs {exact}");
    }
}

#[test]
fn head_only_density_has_no_body_term() {
    let spec = grid(0.5, 3.0);
    let head = GridMeasure::new(spec, vec![0.0, 0.25, 0.75, 0.0, 0.0, 0.0, 0.0], 0.0).unwrap();
    let f = DensityGrid::new(0.5, 3.0, vec![0.0; 12], head).unwrap();
    assert!(density_convolve_square(&f)
        .unwrap()
        .values()
        .iter()
        .all(|&v| v == 0.0));
}

#[test]
fn pareto_density_square_trends_to_twice() {
    let d = AnalyticDistribution::pareto(2.0).unwrap();
    let f = DensityGrid::from_distribution(&d, 0.05, 1.0, 800.0).unwrap();
    let sq = density_convolve_square(&f).unwrap();
    let errs: Vec<f64> = [25.0, 50.0, 100.0, 200.0, 400.0, 800.0]
        .iter()
        .map(|&x| (sq.value_at(x).unwrap() / (2.0 * d.density(x).unwrap()) - 1.0).abs())
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(errs[5] < 0.02, "{errs:?}");
}

#[test]
fn degenerate_geometric_gives_origin() {
    let spec = grid(0.5, 20.0);
    let a = AnalyticDistribution::pareto(2.0).unwrap().discretize(&spec);
    let s = stopped_sum(&a, &StoppingLaw::geometric(0.0).unwrap()).unwrap();
    assert_eq!(s.measure, GridMeasure::point_mass(spec, 0.0, 1.0).unwrap());
}

#[test]
fn single_step_law_returns_the_input() {
    let spec = grid(0.5, 20.0);
    let a = AnalyticDistribution::pareto(2.0).unwrap().discretize(&spec);
    let s = stopped_sum(&a, &StoppingLaw::custom(vec![0.0, 1.0]).unwrap()).unwrap();
    assert!(s.measure.max_abs_diff(&a).unwrap() == 0.0);
    assert_eq!(s.measure.overflow(), a.overflow());
}

#[test]
fn poisson_stopped_sum_mass_audit() {
    let spec = grid(0.25, 200.0);
    let a = AnalyticDistribution::pareto(2.0).unwrap().discretize(&spec);
    let law = StoppingLaw::poisson(1.0).unwrap();
    let s = stopped_sum(&a, &law).unwrap();
    let kept: f64 = law.probs().iter().sum();
    assert!((s.measure.total() - kept).abs() < 1e-12);
    assert!((s.measure.total() - (1.0 - s.truncation_bound)).abs() < 1e-12);
}

#[test]
fn geometric_stopped_sum_is_the_partial_series() {
    let spec = grid(0.5, 100.0);
    let a = AnalyticDistribution::weibull(0.5)
        .unwrap()
        .discretize(&spec);
    let law = StoppingLaw::geometric(0.4).unwrap();
    let s = stopped_sum(&a, &law).unwrap();
    let mut oracle = GridMeasure::point_mass(spec, 0.0, 0.6).unwrap();
    let mut power = a.clone();
    for n in 1..=law.n_max() {
        oracle
            .add_scaled(&power, 0.6 * 0.4f64.powi(n as i32))
            .unwrap();
        power = convolve_with(&power, &a, Method::Direct).unwrap();
    }
    assert!(s.measure.max_abs_diff(&oracle).unwrap() < 1e-12);
}

#[test]
fn kesten_single_power_fits_its_own_sup() {
    let f = AnalyticDistribution::pareto(2.0).unwrap();
    let g = f.discretize(&grid(0.5, 100.0));
    let r = kesten_check(&f, &g, DeltaWindow::unit(), 0.5, 1, 0.5).unwrap();
    assert!(r.violations.is_empty());
    assert_eq!(r.fitted_v, r.sup_ratios[0]);
}

#[test]
fn kesten_pareto_square_band_has_no_violations() {
    // x0 past the point where the square ratio is within 5% of 2
    let f = AnalyticDistribution::pareto(2.0).unwrap();
    let g = f.discretize(&grid(0.05, 400.0));
    let r = kesten_check(&f, &g, DeltaWindow::unit(), 0.5, 20, 131.0).unwrap();
    assert!(
        r.holds(),
        "{:?}",
        &r.violations[..r.violations.len().min(5)]
    );
}

#[test]
fn kesten_small_threshold_is_violated() {
    // middle powers peak near x ~ n, so calibrating on n <= 5 from x0 = 17 undershoots
    let f = AnalyticDistribution::pareto(2.0).unwrap();
    let g = f.discretize(&grid(0.05, 400.0));
    let r = kesten_check(&f, &g, DeltaWindow::unit(), 0.5, 20, 17.0).unwrap();
    assert!(!r.holds());
    assert!(r.violations.iter().all(|v| v.0 > 5));
}

#[test]
fn kesten_bounded_support_never_violates() {
    let f = AnalyticDistribution::pareto(2.0).unwrap();
    let spec = grid(0.5, 200.0);
    let mass: Vec<f64> = (0..spec.n_cells())
        .map(|i| if (1..=4).contains(&i) { 0.25 } else { 0.0 })
        .collect();
    let g = GridMeasure::new(spec, mass, 0.0).unwrap();
    // n^{5/2} / (1 + eps)^n peaks near n = 2.5 / ln(1 + eps); eps = 1 keeps it inside n <= 5
    let r = kesten_check(&f, &g, DeltaWindow::unit(), 1.0, 20, 1.0).unwrap();
    assert!(r.holds(), "{:?}", r.sup_ratios);
    let s = &r.sup_ratios;
    assert!(s[19] < 1e-3 * s[3], "{s:?}");
    assert!(s[5..].windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn overshoot_single_step_is_the_window() {
    let spec = grid(0.5, 100.0);
    let g = AnalyticDistribution::pareto(2.0).unwrap().discretize(&spec);
    let v = overshoot_local(&g, 10.0, 5.0, DeltaWindow::unit(), &StoppingLaw::point(1)).unwrap();
    assert_relative_eq!(v, g.window(15.0, DeltaWindow::unit()), max_relative = 1e-14);
}

#[test]
fn overshoot_past_the_grid_is_zero() {
    let spec = grid(0.5, 50.0);
    let g = AnalyticDistribution::pareto(2.0).unwrap().discretize(&spec);
    let law = StoppingLaw::geometric(0.5).unwrap();
    assert_eq!(
        overshoot_local(&g, 30.0, 40.0, DeltaWindow::unit(), &law).unwrap(),
        0.0
    );
}

/// Killed-walk enumeration: `sum_n P(tau >= n) P(S_1..S_{n-1} <= x, S_n in x + y + T)`.
fn overshoot_by_killing(g: &[f64], x: usize, y: usize, t: usize, law: &StoppingLaw) -> f64 {
    let mut alive = vec![0.0; x + 1];
    alive[0] = 1.0;
    let mut total = 0.0;
    for n in 1..=law.n_max() {
        let step = linear_direct(&alive, g);
        let hit: f64 = step.iter().skip(x + y + 1).take(t).sum();
        total += law.survival(n) * hit;
        alive = step[..=x].to_vec();
    }
    total
}

#[test]
fn overshoot_matches_killed_walk_and_trends_to_mean_window() {
    let spec = grid(1.0, 400.0);
    let g = AnalyticDistribution::pareto(2.0).unwrap().discretize(&spec);
    let law = StoppingLaw::geometric(0.5).unwrap();
    let mean = law.mean();
    let mut errs = Vec::new();
    for x in [10usize, 25, 50, 100, 190] {
        let v = overshoot_local(&g, x as f64, x as f64, DeltaWindow::unit(), &law).unwrap();
        let oracle = overshoot_by_killing(g.mass(), x, x, 1, &law);
        assert_relative_eq!(v, oracle, max_relative = 1e-9);
        let pred = mean * g.window(2.0 * x as f64, DeltaWindow::unit());
        errs.push((v / pred - 1.0).abs());
    }
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(errs[4] < 0.05, "{errs:?}");
}
