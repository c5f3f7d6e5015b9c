use finkey::channel::{mc_sample, mc_sample_sharded, validate, GlobalParams, McParams, Tally};

const NPP: McParams = McParams::Npp {
    mu: 0.05,
    nu: 0.01,
    p: 0.5,
    p0: 0.5,
};

#[test]
fn sharding_is_reproducible_and_adds_up() {
    let g = GlobalParams::table1(1, 20.0);
    let a = mc_sample_sharded(&g, NPP, 300_001, 11, 3);
    let b = mc_sample_sharded(&g, NPP, 300_001, 11, 3);
    assert_eq!(a, b);
    let Tally::Npp(t) = a else {
        panic!("wrong tally")
    };
    assert!(t.n_err <= t.n_s);
    assert!(t.n_00 + t.n_0nu + t.n_nu0 <= 300_001);
}

#[test]
fn single_shard_matches_plain_sampler() {
    let g = GlobalParams::table1(1, 80.0);
    let p = McParams::Scs { mu: 0.02, p: 0.2 };
    assert_eq!(
        mc_sample(&g, p, 100_000, 5),
        mc_sample_sharded(&g, p, 100_000, 5, 1)
    );
}

#[test]
fn npp_counts_follow_the_model() {
    let g = GlobalParams::table1(1, 50.0);
    let rep = validate(&g, NPP, 500_000, &[1, 2, 3, 4, 5], 2).unwrap();
    assert_eq!(rep.classes.len(), 5);
    assert!(rep.passed(), "{rep:#?}");
}

#[test]
fn wrong_model_is_detected() {
    // Sample at 50 km but score against the 10 km expectation.
    let near = GlobalParams::table1(1, 10.0);
    let far = near.with_distance(50.0);
    let p = McParams::Scs { mu: 0.05, p: 0.3 };
    let honest = validate(&far, p, 200_000, &[1, 2], 1).unwrap();
    let Tally::Scs(t) = mc_sample(&far, p, 200_000, 1) else {
        panic!()
    };
    let expected_near = validate(&near, p, 200_000, &[1], 1).unwrap().classes[2].expected;
    assert!(honest.within_four_sigma());
    assert!((t.n_z as f64 - expected_near).abs() > 10.0 * expected_near.sqrt());
}
