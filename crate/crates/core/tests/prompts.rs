use std::path::Path;

use schemaug::corpus::{parse_dialogues, parse_schemas, Dialogue, SchemaDocument, Strictness};
use schemaug::prompts::{build_d3st, build_t5dst, compose_augmented_dataset, parse_target, write_examples, D3stGrouping, PromptExample, PromptOptions};
use serde_json::json;

fn schemas() -> Vec<SchemaDocument> {
    let text = json!([
        {"service_name": "Hotels_1", "description": "Find hotels", "slots": [
            {"name": "city", "description": "City of the hotel", "is_categorical": false, "possible_values": []},
            {"name": "stars", "description": "Star rating", "is_categorical": true, "possible_values": ["1", "2", "3", "4", "5"]},
            {"name": "smoking", "description": "Whether smoking is allowed", "is_categorical": true, "possible_values": ["True", "False"]}
        ], "intents": []},
        {"service_name": "Taxi_1", "description": "Book a taxi", "slots": [
            {"name": "destination", "description": "Where the taxi goes", "is_categorical": false, "possible_values": []},
            {"name": "seats", "description": "Number of seats", "is_categorical": true, "possible_values": ["1", "2", "3", "4"]}
        ], "intents": []}
    ]);
    parse_schemas(&text.to_string(), Path::new("schema.json"), Strictness::Strict).unwrap()
}

/// Two dialogues, four user turns, one of them with two frames.
fn dialogues() -> Vec<Dialogue> {
    let frame = |svc: &str, values: serde_json::Value| {
        json!({"service": svc, "state": {"active_intent": "X", "requested_slots": [], "slot_values": values}})
    };
    let text = json!([
        {"dialogue_id": "a", "services": ["Hotels_1", "Taxi_1"], "turns": [
            {"speaker": "USER", "utterance": "A hotel in Rome.", "frames": [frame("Hotels_1", json!({"city": ["Rome"]}))]},
            {"speaker": "SYSTEM", "utterance": "How many stars?", "frames": []},
            {"speaker": "USER", "utterance": "Four, and a taxi there for 2.", "frames": [
                frame("Hotels_1", json!({"city": ["Rome"], "stars": ["4"]})),
                frame("Taxi_1", json!({"destination": ["Rome"], "seats": ["2"]}))
            ]}
        ]},
        {"dialogue_id": "b", "services": ["Taxi_1"], "turns": [
            {"speaker": "USER", "utterance": "I need a cab.", "frames": [frame("Taxi_1", json!({}))]},
            {"speaker": "SYSTEM", "utterance": "Where to?", "frames": []},
            {"speaker": "USER", "utterance": "The airport, any size.", "frames": [frame("Taxi_1", json!({"destination": ["the airport"], "seats": ["dontcare"]}))]}
        ]}
    ]);
    parse_dialogues(&text.to_string(), Path::new("dialogues.json"), Strictness::Strict).unwrap()
}

#[test]
fn counts_follow_the_grouping() {
    let (d, s) = (dialogues(), schemas());
    let per_frame = build_d3st(&d, &s, &PromptOptions::variant("orig")).unwrap();
    assert_eq!(per_frame.len(), 5);
    let per_turn = build_d3st(
        &d,
        &s,
        &PromptOptions {
            grouping: D3stGrouping::PerTurn,
            ..PromptOptions::variant("orig")
        },
    )
    .unwrap();
    assert_eq!(per_turn.len(), 4);
    let joint = per_turn.iter().find(|e| e.service == "Hotels_1+Taxi_1").unwrap();
    assert_eq!(joint.target, "0=rome 1=d 3=rome 4=b");

    // one per (user turn, frame, slot): 3 + (3 + 2) + 2 + 2
    let t5 = build_t5dst(&d, &s, &PromptOptions::variant("orig")).unwrap();
    assert_eq!(t5.len(), 12);
    assert_eq!(t5.iter().filter(|e| e.target == "none").count(), 5);
}

#[test]
fn everything_is_lowercase_and_targets_parse() {
    let (d, s) = (dialogues(), schemas());
    for e in build_d3st(&d, &s, &PromptOptions::variant("orig")).unwrap() {
        assert_eq!(e.input, e.input.to_lowercase());
        assert_eq!(e.target, e.target.to_lowercase());
        let parsed = parse_target(&e.target).unwrap();
        let rebuilt = parsed.iter().map(|(i, v)| format!("{i}={v}")).collect::<Vec<_>>().join(" ");
        assert_eq!(rebuilt, e.target);
    }
    let last = build_d3st(&d, &s, &PromptOptions::variant("orig")).unwrap().pop().unwrap();
    assert_eq!(last.target, "0=the airport 1=dontcare");
    assert!(last.input.starts_with("0=where the taxi goes 1=number of seats a) 1 b) 2 c) 3 d) 4 [usr] i need a cab."));
}

#[test]
fn augmented_sizes() {
    let (d, s) = (dialogues(), schemas());
    let base = build_d3st(&d, &s, &PromptOptions::variant("orig")).unwrap();
    let variants: Vec<Vec<PromptExample>> = (1..=5)
        .map(|v| build_d3st(&d, &s, &PromptOptions::variant(format!("v{v}"))).unwrap())
        .collect();
    for m in 1..=6 {
        let out = compose_augmented_dataset(base.clone(), &variants, m, Some(1)).unwrap();
        assert_eq!(out.len(), base.len() * m);
        for v in 1..m {
            assert_eq!(out.iter().filter(|e| e.variant == format!("v{v}")).count(), base.len());
        }
    }
    assert_eq!(compose_augmented_dataset(base.clone(), &variants, 1, None).unwrap(), base);
    assert!(compose_augmented_dataset(base, &variants, 7, None).is_err());
}

#[test]
fn jsonl_and_tsv_output() {
    let (d, s) = (dialogues(), schemas());
    let ex = build_t5dst(&d, &s, &PromptOptions::variant("v2")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let jsonl = dir.path().join("out.jsonl");
    write_examples(&jsonl, &ex, false).unwrap();
    let back: Vec<PromptExample> = std::fs::read_to_string(&jsonl)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(back, ex);
    let first: serde_json::Value = serde_json::from_str(std::fs::read_to_string(&jsonl).unwrap().lines().next().unwrap()).unwrap();
    for key in ["input", "target", "dialogue_id", "turn", "service", "variant"] {
        assert!(first.get(key).is_some(), "{key}");
    }
    let tsv = dir.path().join("out.tsv");
    write_examples(&tsv, &ex, true).unwrap();
    let text = std::fs::read_to_string(&tsv).unwrap();
    assert_eq!(text.lines().count(), ex.len());
    assert!(text.lines().all(|l| l.split('\t').count() == 2));
}
