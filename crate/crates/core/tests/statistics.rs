use evrender::eventsim::{termination_rule, Mode};
use evrender::logstat::{accumulate, one_tailed_test, student_t_cdf, t_statistic, Decision, LogLumStats};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn stats(n: u64, mean: f64, var: f64) -> LogLumStats {
    LogLumStats { n, mean, m2: var * (n - 1) as f64 }
}

fn sample_list() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-8.0f64..3.0, 2..300)
}

proptest! {
    #[test]
    fn merge_matches_concatenation(a in sample_list(), b in sample_list(), c in sample_list()) {
        let (sa, sb, sc) = (LogLumStats::from_values(&a), LogLumStats::from_values(&b), LogLumStats::from_values(&c));
        let all: Vec<f64> = a.iter().chain(&b).chain(&c).copied().collect();
        let direct = LogLumStats::from_values(&all);
        let left = sa.merge(&sb).merge(&sc);
        let right = sa.merge(&sb.merge(&sc));
        let streamed = accumulate(accumulate(sa, &b), &c);
        for m in [left, right, streamed] {
            prop_assert_eq!(m.n, direct.n);
            prop_assert!(rel(m.mean, direct.mean) < 1e-10 || (m.mean - direct.mean).abs() < 1e-12);
            prop_assert!(rel(m.variance(), direct.variance()) < 1e-10);
        }
    }

    #[test]
    fn cdf_is_monotone_and_symmetric(t in -40.0f64..40.0, dt in 0.0f64..5.0, dof in 1.0f64..2000.0) {
        let lo = student_t_cdf(t, dof).unwrap();
        let hi = student_t_cdf(t + dt, dof).unwrap();
        prop_assert!(hi >= lo);
        prop_assert!((0.0..=1.0).contains(&lo));
        prop_assert!((student_t_cdf(-t, dof).unwrap() - (1.0 - lo)).abs() < 1e-10);
    }

    #[test]
    fn cdf_agrees_with_statrs(t in -10.0f64..10.0, dof in 1.0f64..5000.0) {
        let reference = StudentsT::new(0.0, 1.0, dof).unwrap().cdf(t);
        prop_assert!((student_t_cdf(t, dof).unwrap() - reference).abs() < 1e-9);
    }

    #[test]
    fn t_is_translation_invariant(a in sample_list(), b in sample_list(), shift in -20.0f64..20.0, theta in 0.0f64..2.0) {
        let shifted = |v: &[f64]| v.iter().map(|x| x + shift).collect::<Vec<_>>();
        let t0 = t_statistic(&LogLumStats::from_values(&a), &LogLumStats::from_values(&b), theta).unwrap();
        let t1 = t_statistic(
            &LogLumStats::from_values(&shifted(&a)),
            &LogLumStats::from_values(&shifted(&b)),
            theta,
        ).unwrap();
        prop_assert!((t0 - t1).abs() < 1e-9 * t0.abs().max(1.0), "{} vs {}", t0, t1);
    }

    #[test]
    fn termination_is_monotone_in_theta(a in sample_list(), b in sample_list(), theta in 0.0f64..1.0, extra in 0.0f64..1.0) {
        let (sa, sb) = (LogLumStats::from_values(&a), LogLumStats::from_values(&b));
        let at = one_tailed_test(&sa, &sb, theta, 0.05).unwrap();
        let wider = one_tailed_test(&sa, &sb, theta + extra, 0.05).unwrap();
        if at.decision == Decision::Terminate {
            prop_assert_eq!(wider.decision, Decision::Terminate);
        }
    }
}

#[test]
fn worked_examples() {
    let t = t_statistic(&stats(256, 0.0, 0.01), &stats(256, 0.6, 0.01), 0.5).unwrap();
    assert!((t - 11.313_708_498_984_76).abs() < 1e-9);
    let t = t_statistic(&stats(256, 0.0, 0.02), &stats(256, 0.1, 0.02), 0.5).unwrap();
    assert!((t + 32.0).abs() < 1e-12);
    let t = t_statistic(&stats(10, 1.0, 0.3), &stats(20, 1.5, 0.7), 0.5).unwrap();
    assert_eq!(t, 0.0);
}

#[test]
fn zero_variance_limits() {
    let t = |gap: f64| t_statistic(&stats(5, 0.0, 0.0), &stats(5, gap, 0.0), 0.5).unwrap();
    assert_eq!(t(0.7), f64::INFINITY);
    assert_eq!(t(0.2), f64::NEG_INFINITY);
    assert_eq!(t(0.5), 0.0);
    assert!(t_statistic(&stats(1, 0.0, 0.0), &stats(5, 0.0, 0.0), 0.5).is_err());
}

#[test]
fn cdf_reference_points() {
    assert_eq!(student_t_cdf(0.0, 7.0).unwrap(), 0.5);
    assert!((student_t_cdf(-1.6510, 255.0).unwrap() - 0.05).abs() < 5e-4);
    assert!((student_t_cdf(-1.6449, 1e6).unwrap() - 0.05).abs() < 5e-4);
    assert!(student_t_cdf(1.0, 0.0).is_err());
    assert!(student_t_cdf(1.0, -3.0).is_err());
}

#[test]
fn decision_rules_per_mode() {
    let a = stats(256, 0.0, 0.01);
    let far = stats(256, 0.6, 0.01);
    let near = stats(256, 0.1, 0.02);
    assert_eq!(termination_rule(Mode::OneTailed, &stats(256, 0.0, 0.02), &near, 0.5, 0.05).unwrap(), Decision::Terminate);
    assert_eq!(termination_rule(Mode::OneTailed, &a, &far, 0.5, 0.05).unwrap(), Decision::Continue);
    assert_eq!(termination_rule(Mode::TwoTailed, &a, &far, 0.5, 0.05).unwrap(), Decision::Terminate);
    assert_eq!(termination_rule(Mode::MeanOnly, &a, &stats(256, 0.3, 5.0), 0.5, 0.05).unwrap(), Decision::Terminate);
    assert_eq!(termination_rule(Mode::MeanOnly, &a, &far, 0.5, 0.05).unwrap(), Decision::Continue);
    assert_eq!(termination_rule(Mode::Baseline, &a, &near, 0.5, 0.05).unwrap(), Decision::Continue);
}
