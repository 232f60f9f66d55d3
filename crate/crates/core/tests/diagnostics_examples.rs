use htl_core::diagnostics::{
    check_delta_subexp, check_density_subexp_of, check_long_tailed, check_sstar,
    check_suff_concave, check_suff_ratio, check_tail_equivalence, DiagnosticConfig, Verdict,
};
use htl_core::schedule::{geometric, snap};
use htl_core::{AnalyticDistribution, DeltaWindow, HtlError, SeriesVerdict};

fn cfg() -> DiagnosticConfig {
    DiagnosticConfig::default()
}

fn pareto(alpha: f64) -> AnalyticDistribution {
    AnalyticDistribution::pareto(alpha).unwrap()
}

fn unit() -> DeltaWindow {
    DeltaWindow::unit()
}

#[test]
fn pareto_one_is_long_tailed() {
    let xs = geometric(10.0, 2.0, 8).unwrap();
    assert_eq!(
        check_long_tailed(&pareto(1.0), unit(), &xs, &cfg())
            .unwrap()
            .verdict,
        Verdict::Pass
    );
}

#[test]
fn point_mass_window_vanishes() {
    let d = AnalyticDistribution::point_mass(3.0).unwrap();
    let v = check_long_tailed(
        &d,
        DeltaWindow::finite(2.0).unwrap(),
        &[5.0, 10.0, 20.0],
        &cfg(),
    )
    .unwrap();
    assert_eq!(v.verdict, Verdict::Fail);
    assert!(!v.witnesses.is_empty());
}

#[test]
fn example1_unit_window_is_not_long_tailed() {
    // the unit shift swaps a g/k^2 atom for a g/2^k one
    let xs: Vec<f64> = (20..=40).map(f64::from).collect();
    let v = check_long_tailed(&AnalyticDistribution::example1(), unit(), &xs, &cfg()).unwrap();
    assert_eq!(v.verdict, Verdict::Fail);
}

#[test]
fn example1_even_window_is_long_tailed() {
    let xs = geometric(16.0, 2.0, 8).unwrap();
    let v = check_long_tailed(
        &AnalyticDistribution::example1(),
        DeltaWindow::finite(2.0).unwrap(),
        &xs,
        &cfg(),
    )
    .unwrap();
    assert_eq!(v.verdict, Verdict::Pass);
}

#[test]
fn example1_unit_window_square_ratio_oscillates() {
    let xs: Vec<f64> = (490..=510).map(f64::from).collect();
    let v = check_delta_subexp(&AnalyticDistribution::example1(), unit(), &xs, &cfg()).unwrap();
    assert_eq!(v.verdict, Verdict::Fail);
    assert_eq!(v.evidence.verdict(), SeriesVerdict::Oscillating);
}

#[test]
fn example3_unit_window_is_delta_subexponential() {
    let xs = geometric(64.0, 2.0, 8).unwrap();
    let v = check_delta_subexp(&AnalyticDistribution::example3(), unit(), &xs, &cfg()).unwrap();
    assert_eq!(v.verdict, Verdict::Pass, "{:?}", v.evidence.points());
}

#[test]
fn pareto_and_weibull_densities_are_subexponential() {
    let xs = geometric(25.0, 2.0, 6).unwrap();
    let p = check_density_subexp_of(&pareto(2.0), 1.0, &xs, &cfg()).unwrap();
    assert_eq!(p.verdict, Verdict::Pass, "{:?}", p.evidence.points());
    let w = AnalyticDistribution::weibull(0.5).unwrap();
    let xs = geometric(100.0, 2.0, 6).unwrap();
    let v = check_density_subexp_of(&w, 1.0, &xs, &cfg()).unwrap();
    assert_eq!(v.verdict, Verdict::Pass, "{:?}", v.evidence.points());
}

#[test]
fn point_mass_has_no_density() {
    let d = AnalyticDistribution::point_mass(1.0).unwrap();
    let e = check_density_subexp_of(&d, 0.0, &[10.0, 20.0], &cfg()).unwrap_err();
    assert!(matches!(e, HtlError::Precondition(_)));
}

#[test]
fn pareto_two_is_in_sstar() {
    let xs = geometric(50.0, 2.0, 8).unwrap();
    let v = check_sstar(&pareto(2.0), &xs, &cfg()).unwrap();
    assert_eq!(v.verdict, Verdict::Pass, "{:?}", v.evidence.points());
}

#[test]
fn exponential_sstar_ratio_is_half_x() {
    // closed form: int_0^x e^{-(x-y)} e^{-y} dy = x e^{-x}
    let xs = [2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
    let v = check_sstar(
        &AnalyticDistribution::exponential(1.0).unwrap(),
        &xs,
        &cfg(),
    )
    .unwrap();
    assert_eq!(v.verdict, Verdict::Fail);
    for &(x, r) in v.evidence.points() {
        assert!((r / (x / 2.0) - 1.0).abs() < 1e-4, "x = {x}: {r}");
    }
}

#[test]
fn sstar_rejects_infinite_mean() {
    let e = check_sstar(&pareto(1.0), &[10.0, 20.0], &cfg()).unwrap_err();
    assert_eq!(e, HtlError::InfiniteMean);
}

#[test]
fn ratio_condition_holds_for_regularly_varying_windows() {
    let xs = geometric(10.0, 2.0, 8).unwrap();
    for alpha in [1.0, 2.5] {
        let v = check_suff_ratio(&pareto(alpha), unit(), &xs, &cfg()).unwrap();
        assert_eq!(v.verdict, Verdict::Pass, "alpha {alpha}");
        // the worst shift is t = x: F(2x + T) / F(x + T) -> 2^{-(alpha + 1)}
        let (_, c_last) = v.evidence.last().unwrap();
        assert!(
            (c_last / 0.5f64.powf(alpha + 1.0) - 1.0).abs() < 0.05,
            "{c_last}"
        );
    }
}

#[test]
fn ratio_condition_fails_for_weibull() {
    let xs = geometric(10.0, 2.0, 8).unwrap();
    let v = check_suff_ratio(
        &AnalyticDistribution::weibull(0.5).unwrap(),
        unit(),
        &xs,
        &cfg(),
    )
    .unwrap();
    assert_eq!(v.verdict, Verdict::Fail);
}

#[test]
fn concavity_condition_for_weibull_surrogate_and_lognormal() {
    // x F(x^{1/4} + T) ~ u^3 e^{-sqrt u} / 2 with u = x^{1/4} only falls past x ~ 1e7
    let xs = geometric(1e8, 10.0, 7).unwrap();
    let s = AnalyticDistribution::weibull_surrogate(0.5).unwrap();
    assert_eq!(
        check_suff_concave(&s, unit(), &xs, 0.25, &cfg())
            .unwrap()
            .verdict,
        Verdict::Pass
    );
    let l = AnalyticDistribution::lognormal(1.0, 1.0).unwrap();
    let xs = geometric(1e3, 4.0, 8).unwrap();
    let v = check_suff_concave(&l, unit(), &xs, 0.5, &cfg()).unwrap();
    assert_eq!(
        v.verdict,
        Verdict::Pass,
        "{} {:?}",
        v.condition_used,
        v.evidence.points()
    );
}

#[test]
fn concavity_condition_on_exponential_stops_at_precondition() {
    let xs = geometric(10.0, 2.0, 6).unwrap();
    let v = check_suff_concave(
        &AnalyticDistribution::exponential(1.0).unwrap(),
        unit(),
        &xs,
        0.5,
        &cfg(),
    )
    .unwrap();
    assert_eq!(v.verdict, Verdict::Inconclusive);
    assert!(v.condition_used.contains("precondition"));
}

#[test]
fn tail_equivalence_of_a_law_with_itself() {
    let d = AnalyticDistribution::lognormal(1.0, 1.5).unwrap();
    let s = check_tail_equivalence(&d, &d, unit(), &[5.0, 10.0, 20.0, 40.0], &cfg()).unwrap();
    assert!(s.points().iter().all(|p| p.1 == 1.0));
    assert_eq!(s.target(), 1.0);
}

#[test]
fn weibull_window_against_surrogate_grows_like_root_x() {
    // Weibull window ~ 0.5 x^{-1/2} e^{-sqrt x}, surrogate window ~ 0.5 x^{-1} e^{-sqrt x}
    let w = AnalyticDistribution::weibull(0.5).unwrap();
    let s = AnalyticDistribution::weibull_surrogate(0.5).unwrap();
    let xs = geometric(100.0, 4.0, 7).unwrap();
    let series = check_tail_equivalence(&w, &s, unit(), &xs, &cfg()).unwrap();
    assert!(series.points().windows(2).all(|w| w[1].1 > w[0].1));
    let scaled: Vec<f64> = series.points().iter().map(|&(x, r)| r / x.sqrt()).collect();
    let n = scaled.len();
    assert!((scaled[n - 1] - 1.0).abs() < 0.01, "{scaled:?}");
    // the window over the surrogate tail is the finite limit beta T
    let x = *xs.last().unwrap();
    let r = w.local_prob(x, unit()) / s.tail(x);
    assert!((r / 0.5 - 1.0).abs() < 0.01, "{r}");
}

#[test]
fn example3_against_smooth_inverse_square_oscillates() {
    let smooth = AnalyticDistribution::example2();
    let xs = snap(
        &htl_core::schedule::log_spaced(64.0, 8192.0, 120).unwrap(),
        1.0,
    );
    let mut xs = xs;
    xs.dedup();
    let s = check_tail_equivalence(
        &AnalyticDistribution::example3(),
        &smooth,
        unit(),
        &xs,
        &cfg(),
    )
    .unwrap();
    assert_eq!(s.verdict(), SeriesVerdict::Oscillating);
    let (lo, hi) = s
        .points()
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), p| {
            (lo.min(p.1), hi.max(p.1))
        });
    // the profile swings between 1/x^2 and 2/x^2
    assert!(hi / lo > 1.8 && hi / lo < 2.05, "{lo} {hi}");
}

#[test]
fn passing_at_t_passes_at_multiples() {
    let xs = snap(&geometric(15.625, 2.0, 8).unwrap(), 0.05);
    for n in 1..=3u32 {
        let v = check_delta_subexp(&pareto(2.0), unit().scaled(n), &xs, &cfg()).unwrap();
        assert_eq!(v.verdict, Verdict::Pass, "T = {n}");
    }
}

#[test]
fn certified_laws_do_not_fail_the_square_check() {
    let xs = snap(&geometric(15.625, 2.0, 8).unwrap(), 0.05);
    let d = pareto(1.5);
    assert!(check_suff_ratio(&d, unit(), &xs, &cfg()).unwrap().passed());
    assert!(!check_delta_subexp(&d, unit(), &xs, &cfg())
        .unwrap()
        .failed());
}
