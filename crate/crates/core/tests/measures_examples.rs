use approx::assert_relative_eq;
use htl_core::measures::{
    discretize, example1_gamma, integrated_tail, local_prob, make_distribution,
};
use htl_core::quad::{adaptive_simpson, integrate_to_infinity};
use htl_core::{AnalyticDistribution, CatalogKind, DeltaWindow, GridSpec, HtlError};

fn pareto(alpha: f64) -> AnalyticDistribution {
    AnalyticDistribution::pareto(alpha).unwrap()
}

#[test]
fn pareto_one_tail_at_two_is_half() {
    let d = make_distribution(CatalogKind::Pareto, &[1.0]).unwrap();
    assert_eq!(d.tail(2.0), 0.5);
    assert_eq!(d.tail(1.0), 1.0);
}

#[test]
fn example1_mass_at_four_matches_brute_force_normalizer() {
    // g / k^2 on even atoms plus g / 2^k on odd atoms, summed directly
    let even: f64 = (1..2_000_000u64)
        .map(|k| 1.0 / (k as f64 * k as f64))
        .sum::<f64>()
        + 1.0 / 2_000_000.0;
    let odd: f64 = (0..200).map(|k| 0.5f64.powi(k)).sum();
    let gamma = 1.0 / (even + odd);
    assert_relative_eq!(gamma, example1_gamma(), max_relative = 1e-12);
    let d = AnalyticDistribution::example1();
    let spec = GridSpec::nonnegative(1.0, 10.0).unwrap();
    assert_relative_eq!(
        d.discretize(&spec).mass()[4],
        gamma / 4.0,
        max_relative = 1e-12
    );
}

#[test]
fn out_of_range_parameters_name_the_constraint() {
    let e = make_distribution(CatalogKind::Weibull, &[1.5]).unwrap_err();
    assert!(matches!(e, HtlError::InvalidParameter { name: "beta", .. }));
    assert!(e.to_string().contains("beta in (0, 1)"));
    assert!(make_distribution(CatalogKind::Lognormal, &[1.0, 0.0]).is_err());
}

#[test]
fn pareto_window_is_difference_of_tails() {
    let d = pareto(1.0);
    let w = local_prob(&d, 2.0, DeltaWindow::finite(2.0).unwrap());
    assert_relative_eq!(w, 0.25, max_relative = 1e-15);
    let q = adaptive_simpson(&|y| d.density(y).unwrap(), 2.0, 4.0, 1e-14);
    assert_relative_eq!(w, q, max_relative = 1e-10);
}

#[test]
fn infinite_window_below_support_is_full_mass() {
    for d in [
        pareto(2.0),
        AnalyticDistribution::weibull(0.5).unwrap(),
        AnalyticDistribution::example1(),
    ] {
        assert_eq!(local_prob(&d, -3.0, DeltaWindow::infinite()), 1.0);
    }
}

#[test]
fn weibull_window_matches_local_asymptotics() {
    let beta = 0.5;
    let d = AnalyticDistribution::weibull(beta).unwrap();
    let w = local_prob(&d, 100.0, DeltaWindow::unit());
    assert_relative_eq!(
        w,
        (-10.0f64).exp() - (-(101.0f64).sqrt()).exp(),
        max_relative = 1e-12
    );
    // first-order error of the density approximation is about T / (4 sqrt x)
    let x: f64 = 1e4;
    let asym = beta * x.powf(beta - 1.0) * (-x.powf(beta)).exp();
    let r = local_prob(&d, x, DeltaWindow::unit()) / asym;
    assert!((r - 1.0).abs() < 0.004, "{r}");
}

#[test]
fn integrated_tail_of_pareto_two() {
    let d = pareto(2.0);
    assert_relative_eq!(
        integrated_tail(&d, 4.0).unwrap(),
        0.25,
        max_relative = 1e-14
    );
    let q = integrate_to_infinity(&|y| d.tail(y), 4.0, 1e-13);
    assert_relative_eq!(q, 0.25, max_relative = 1e-9);
    // the integral from 0 is 2, clamped to 1
    assert_eq!(integrated_tail(&d, 0.0).unwrap(), 1.0);
}

#[test]
fn integrated_tail_diverges_for_pareto_one() {
    assert_eq!(
        integrated_tail(&pareto(1.0), 5.0).unwrap_err(),
        HtlError::InfiniteMean
    );
}

#[test]
fn point_mass_lands_in_one_cell() {
    let d = AnalyticDistribution::point_mass(2.5).unwrap();
    let spec = GridSpec::nonnegative(0.5, 10.0).unwrap();
    let m = discretize(&d, &spec);
    let nonzero: Vec<usize> = (0..m.mass().len())
        .filter(|&i| m.mass()[i] != 0.0)
        .collect();
    assert_eq!(nonzero, vec![5]);
    assert_eq!(m.mass()[5], 1.0);
    assert_eq!(m.point(5), 2.5);
}

#[test]
fn pareto_one_overflow_past_hundred() {
    let spec = GridSpec::nonnegative(1.0, 100.0).unwrap();
    let m = discretize(&pareto(1.0), &spec);
    assert_relative_eq!(m.overflow(), 0.01, max_relative = 1e-12);
    assert!((m.total() - 1.0).abs() < 1e-12);
}

#[test]
fn example1_cells_reproduce_atoms() {
    let g = example1_gamma();
    let spec = GridSpec::nonnegative(1.0, 60.0).unwrap();
    let m = discretize(&AnalyticDistribution::example1(), &spec);
    for n in 1..=60usize {
        let k = (n / 2) as i32;
        let atom = if n % 2 == 0 {
            g / f64::from(k * k)
        } else {
            g * 0.5f64.powi(k)
        };
        assert_relative_eq!(m.mass()[n], atom, max_relative = 1e-12);
    }
    assert_eq!(m.mass()[0], 0.0);
}
