use cglo::baselines::{gp_ei_optimize, random_search, GpEiConfig, RandomSearchConfig};
use cglo::cglo::{run, CgloConfig, Session};
use cglo::dataset::Moments;
use cglo::objectives::{make_1d_paper, make_2d_sun};
use cglo::Error;

#[test]
fn stepping_a_session_matches_a_full_run() {
    let obj = make_1d_paper(6);
    let cfg = CgloConfig::paper_1d(6, 700);
    let whole = run(&obj, &cfg).unwrap();
    let mut s = Session::new(obj.clone(), cfg).unwrap();
    let mut steps = 0;
    while s.step().unwrap().is_some() {
        steps += 1;
    }
    assert!(s.step().unwrap().is_none());
    let stepped = s.finish();
    assert_eq!(steps, whole.trace.iterations());
    assert_eq!(stepped.trace.without_wall_time(), whole.trace.without_wall_time());
    assert_eq!(stepped.best_x, whole.best_x);
}

#[test]
fn full_run_spends_the_budget_and_keeps_its_ledger() {
    let obj = make_1d_paper(2);
    let r = run(&obj, &CgloConfig::paper_1d(2, 900)).unwrap();
    let rows = &r.trace.rows;
    assert_eq!(rows[0].consumed, 12 * 20);
    assert!(rows.windows(2).all(|w| w[0].consumed <= w[1].consumed && w[0].iter + 1 == w[1].iter));
    assert_eq!(rows.last().unwrap().consumed, 900);
    assert_eq!(r.state.data.total_reps(), 900);
    let (_, x, m) = r.state.best();
    assert_eq!((x, m), (r.best_x.as_slice(), r.best_mean));
    assert!(r.state.data.points().iter().all(|p| m <= p.sample_mean()));
}

#[test]
fn replications_do_not_depend_on_batching() {
    let obj = make_2d_sun(9);
    let x = [31.0, 77.5];
    let whole = obj.evaluate(&x, 40).unwrap();
    let mut parts = obj.evaluate_from(&x, 0, 7).unwrap();
    parts.merge(&obj.evaluate_from(&x, 7, 33).unwrap());
    assert_eq!(parts.count(), 40);
    assert!((parts.mean() - whole.mean()).abs() < 1e-12);
    assert!((parts.sample_var().unwrap() - whole.sample_var().unwrap()).abs() < 1e-10);
    let other_seed = make_2d_sun(10).evaluate(&x, 40).unwrap();
    assert_ne!(other_seed, whole);
    assert_eq!(Moments::default().count(), 0);
}

#[test]
fn bad_configurations_are_rejected_before_any_evaluation() {
    let obj = make_2d_sun(0);
    let small = CgloConfig { n0: 8, k: 5, ..CgloConfig::sun_2d(0, 5000) };
    let err = run(&obj, &small).unwrap_err();
    assert!(matches!(err.error, Error::Config(_)), "{}", err.error);
    assert!(err.error.to_string().contains("2K = 10"));
    assert!(err.trace.rows.is_empty());

    let poor = CgloConfig::sun_2d(0, 500);
    assert!(matches!(run(&obj, &poor).unwrap_err().error, Error::Config(_)));

    let rs = RandomSearchConfig { points: 30, ..RandomSearchConfig::for_budget(500, 25, 0) };
    assert!(matches!(random_search(&obj, &rs).unwrap_err(), Error::Config(_)));
}

#[test]
fn out_of_domain_evaluations_fail() {
    let obj = make_1d_paper(0);
    assert!(obj.evaluate(&[1.5], 3).is_err());
    assert!(obj.evaluate(&[0.2, 0.3], 3).is_err());
}

#[test]
fn baselines_spend_exactly_their_budgets() {
    let obj = make_1d_paper(3);
    let rs = random_search(&obj, &RandomSearchConfig::for_budget(1000, 25, 3)).unwrap();
    assert_eq!(rs.data.total_reps(), 1000);
    assert_eq!(rs.trace.last().unwrap().consumed, 1000);

    let cfg = GpEiConfig { max_iterations: None, ..GpEiConfig::from_cglo(&CgloConfig::paper_1d(3, 600)) };
    let gp = gp_ei_optimize(&obj, &cfg).unwrap();
    assert_eq!(gp.data.total_reps(), 600);
    assert_eq!(gp.trace.last().unwrap().consumed, 600);
}
