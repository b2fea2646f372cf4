use covol_core::{
    covariance_check, estimate_tail_naive, estimate_tail_tilted, realized_vector, simulate_path, CoefficientSpec,
    Direction, Event, SamplePath, Scale, Statistic, TailQuery,
};

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn query(threshold: f64, paths: usize) -> TailQuery {
    TailQuery {
        event: Event::Threshold {
            statistic: Statistic::Q1,
            direction: Direction::Geq,
            threshold,
        },
        n: 50,
        paths,
        seed: 11,
        scale: Scale::Ldp,
    }
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let spec = CoefficientSpec::constant(1.0, 1.0, 0.5).unwrap();
    let q = query(1.3, 5000);
    let a = in_pool(1, || estimate_tail_tilted(&q, &spec).unwrap());
    let b = in_pool(4, || estimate_tail_tilted(&q, &spec).unwrap());
    assert_eq!(a, b);
    let c = in_pool(1, || covariance_check(&spec, 40, 3000, 5).unwrap());
    let d = in_pool(3, || covariance_check(&spec, 40, 3000, 5).unwrap());
    assert_eq!(c, d);
}

#[test]
fn tilted_and_naive_agree_on_a_common_event() {
    let spec = CoefficientSpec::constant(1.0, 1.0, 0.5).unwrap();
    let q = query(1.15, 40_000);
    let naive = estimate_tail_naive(&q, &spec).unwrap();
    let tilted = estimate_tail_tilted(&q, &spec).unwrap();
    assert!(naive.p_hat > 0.05);
    let se = naive.std_err.hypot(tilted.std_err);
    assert!((naive.p_hat - tilted.p_hat).abs() < 3.0 * se, "{naive:?} vs {tilted:?}");
}

#[test]
fn csv_round_trip_preserves_estimates() {
    let spec = CoefficientSpec::constant(0.9, 1.4, -0.2).unwrap();
    let path = simulate_path(&spec, 64, 3).unwrap();
    let mut buf = Vec::new();
    path.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text.lines().count(), 66);
    let back = SamplePath::read_csv(buf.as_slice(), 3).unwrap();
    assert_eq!(back.x1(), path.x1());
    assert_eq!(back.x2(), path.x2());
    assert_eq!(realized_vector(&back, 1.0), realized_vector(&path, 1.0));
}
