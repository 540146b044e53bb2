use hybridseg_core::kruskal_wallis;
use serde::Deserialize;

#[derive(Deserialize)]
struct Fixture {
    groups: Vec<Vec<f64>>,
    h: f64,
    p: f64,
}

#[test]
fn matches_reference_statistics() {
    let raw = include_str!("data/kruskal_wallis_reference.json");
    let fixtures: Vec<Fixture> = serde_json::from_str(raw).unwrap();
    assert!(fixtures.len() >= 10);
    for (i, f) in fixtures.iter().enumerate() {
        let kw = kruskal_wallis(&f.groups).unwrap();
        assert!(
            (kw.h - f.h).abs() < 1e-9,
            "fixture {i}: h {} vs {}",
            kw.h,
            f.h
        );
        assert!(
            (kw.p - f.p).abs() < 1e-9,
            "fixture {i}: p {} vs {}",
            kw.p,
            f.p
        );
        assert_eq!(kw.df, f.groups.len() - 1);
    }
}
