use proptest::prelude::*;
use viabilitykit::Scenario;

fn term() -> impl Strategy<Value = String> {
    (-5i32..5, 1usize..3, 0u32..3).prop_map(|(c, v, p)| format!("{} * x{}^{}", c, v, p))
}

fn field() -> impl Strategy<Value = String> {
    prop::collection::vec(term(), 1..4).prop_map(|ts| ts.join(" + "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_scenarios_round_trip(
        c in field(),
        k in field(),
        vx in field(),
        lo in -3.0..-0.5f64,
        hi in 0.5..3.0f64,
        seed in any::<u64>(),
        h in 1e-4..1e-1f64,
    ) {
        let text = format!(
            r#"{{"name": "p", "dim": 2,
                "F": {{"pieces": [{{"guard": "x1 <= 0", "vertices": [["{vx}", "1"]]}}, {{"vertices": [["1", "{vx}"]]}}]}},
                "C": {{"any": ["{c}", "x1"]}}, "K": {{"all": ["{k}", "x2"]}},
                "box": {{"lo": [{lo}, {lo}], "hi": [{hi}, {hi}]}},
                "tolerances": {{"h": {h}}}, "seed": {seed}}}"#
        );
        let s = Scenario::from_json(&text).unwrap();
        prop_assert_eq!(&Scenario::from_json(&s.to_json()).unwrap(), &s);
        let canon = s.canonical().unwrap();
        let again = Scenario::from_json(&canon.to_json()).unwrap();
        prop_assert_eq!(&again.canonical().unwrap(), &canon);
        prop_assert_eq!(again.seed, seed);
        prop_assert_eq!(again.tolerances.h, h);
    }
}
