mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use schemaug::tree::{build, DecisionSpec, RankTree, RankingConfig};

use common::{check_random_pool, fare_metrics, random_pool, units, FARE_POOL};

fn fare_tree() -> RankTree {
    let texts: Vec<String> = FARE_POOL.iter().map(|r| r.0.to_string()).collect();
    build("Fare per ticket for journey", &texts, &fare_metrics()).unwrap()
}

#[test]
fn fare_pool_selection_order() {
    let tree = fare_tree();
    let d = DecisionSpec::parse(&["none", "max", "min"]).unwrap();
    let ranked = tree.rank(&RankingConfig::default(), &d).unwrap();
    let texts: Vec<&str> = ranked.iter().map(|s| s.text.as_str()).collect();
    assert_eq!(
        texts,
        [
            "Journey fare per ticket",
            "Price of a single trip ticket",
            "Fare per ticket for journey",
            "Cost of one ticket for the trip",
            "How much the trip costs",
        ]
    );
    assert!(ranked[0].syntactic);
    assert_eq!(units(&ranked[0].path), [0, 98, 77]);
    assert_eq!(units(&ranked[1].path), [66, 77, 77]);
}

#[test]
fn fare_pool_syntactic_pick() {
    let tree = fare_tree();
    let d = DecisionSpec::parse(&["none", "max", "min"]).unwrap();
    let s = tree.select_syntactic(&d, 0).unwrap().unwrap();
    assert_eq!(s.text, "Journey fare per ticket");
    // without a zero-distance bucket there is nothing to pick
    let mut pruned = tree.clone();
    pruned.prune_level0(|v| v.is_zero()).unwrap();
    assert_eq!(pruned.select_syntactic(&d, 0).unwrap(), None);
}

#[test]
fn fare_pool_text_dump() {
    let expected = "\
root
  J=0.00
    E=0.98
      S=100 [\"Fare per ticket for journey\"]
      S=77 [\"Journey fare per ticket\"]
  J=0.66
    E=0.77
      S=77 [\"Price of a single trip ticket\"]
      S=85 [\"Cost of one ticket for the trip\"]
    E=0.52
      S=60 [\"How much the trip costs\"]
";
    assert_eq!(fare_tree().render_text(), expected);
}

#[test]
fn matches_brute_force_on_random_pools() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        check_random_pool(&random_pool(&mut rng));
    }
}

#[test]
fn descending_sweep_is_non_increasing() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..300 {
        let mut pool = random_pool(&mut rng);
        pool.config.syntactic_first = false;
        pool.config.level0_order = schemaug::tree::Level0Order::Descending;
        let tree = build("input", &pool.texts, &pool.metrics()).unwrap();
        let d = DecisionSpec::parse(&pool.rule_names()).unwrap();
        let ranked = tree.rank(&pool.config, &d).unwrap();
        let distinct_level0 = {
            let mut v: Vec<i64> = pool.paths.iter().map(|p| p[0]).collect();
            v.sort();
            v.dedup();
            v.len()
        };
        // the first sweep visits every level-0 bucket once, high to low
        let first: Vec<i64> = ranked.iter().take(distinct_level0).map(|s| s.path[0].units()).collect();
        assert!(first.windows(2).all(|w| w[0] > w[1]), "{first:?}");
    }
}

#[test]
fn ranking_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let pool = random_pool(&mut rng);
        let tree = build("input", &pool.texts, &pool.metrics()).unwrap();
        let d = DecisionSpec::parse(&pool.rule_names()).unwrap();
        assert_eq!(tree.rank(&pool.config, &d).unwrap(), tree.rank(&pool.config, &d).unwrap());
    }
}

#[test]
fn strict_mode_reports_shortfall() {
    let tree = fare_tree();
    let d = DecisionSpec::parse(&["none", "max", "min"]).unwrap();
    let cfg = RankingConfig { k: 7, ..Default::default() };
    match tree.rank(&cfg, &d) {
        Err(schemaug::Error::Exhausted { ranked, requested }) => assert_eq!((ranked, requested), (5, 7)),
        other => panic!("{other:?}"),
    }
}
