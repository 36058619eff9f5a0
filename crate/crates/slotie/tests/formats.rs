//! File format round trips.

use proptest::prelude::*;
use slotie::config::RunConfig;
use slotie::io::{format_grids_jsonl, format_tuples_tsv, parse_grids_jsonl, parse_tuples_tsv};
use slotie_core::data::{synth_generate, ConvertedRecord, GenerativeRecord, SynthConfig, TripletPool};
use slotie_core::Extraction;

fn field() -> impl Strategy<Value = String> {
    "[A-Za-z0-9 ,.'()\\-]{0,12}".prop_map(|s| s.trim().to_string())
}

fn records() -> impl Strategy<Value = Vec<GenerativeRecord>> {
    let tuple = (field(), field(), field(), prop::option::of(0.0f64..=1.0))
        .prop_map(|(a, r, b, c)| Extraction::new(a, r, b).with_confidence(c.unwrap_or(1.0)));
    prop::collection::btree_map("[A-Za-z ,.]{1,20}", prop::collection::vec(tuple, 1..4), 0..5)
        .prop_map(|m| m.into_iter().map(|(sentence, tuples)| GenerativeRecord { sentence, tuples }).collect())
}

proptest! {
    #[test]
    fn tuples_tsv_round_trips(recs in records()) {
        let text = format_tuples_tsv(&recs).unwrap();
        let back = parse_tuples_tsv(&text).unwrap();
        prop_assert_eq!(&back, &recs);
        prop_assert_eq!(format_tuples_tsv(&back).unwrap(), text);
    }
}

#[test]
fn tabs_in_fields_are_rejected() {
    let recs = vec![GenerativeRecord { sentence: "s".into(), tuples: vec![Extraction::new("a\tb", "r", "o")] }];
    assert!(format_tuples_tsv(&recs).is_err());
}

#[test]
fn grids_round_trip() {
    let pool = TripletPool::new(vec![
        Extraction::new("Marie Curie", "was born in", "Warsaw"),
        Extraction::new("Paris", "is the capital of", "France"),
        Extraction::new("The Thames", "runs through", "London"),
        Extraction::new("Alan Turing", "worked at", "Bletchley Park"),
        Extraction::new("Niels Bohr", "founded", "the institute"),
        Extraction::new("Ada Lovelace", "wrote notes on", "the Analytical Engine"),
        Extraction::new("Kyoto", "was the capital of", "Japan"),
        Extraction::new("Gregor Mendel", "studied", "pea plants"),
        Extraction::new("Charles Darwin", "sailed on", "the Beagle"),
    ])
    .unwrap();
    let out = synth_generate(&pool, 30, 1, &SynthConfig::default()).unwrap();
    let recs: Vec<ConvertedRecord> =
        out.sentences.into_iter().map(|s| ConvertedRecord { seq: s.seq, grid: s.grid }).collect();
    let text = format_grids_jsonl(&recs);
    let back = parse_grids_jsonl(&text).unwrap();
    assert_eq!(back.len(), recs.len());
    for (a, b) in back.iter().zip(&recs) {
        assert_eq!(a.seq.tokens(), b.seq.tokens());
        assert_eq!(a.grid, b.grid);
    }
    assert_eq!(format_grids_jsonl(&back), text);
}

#[test]
fn config_survives_toml_round_trip() {
    let cfg = RunConfig::from_toml(include_str!("fixtures/run.toml")).unwrap();
    assert_eq!(cfg.model.encoder.hidden, 16);
    assert_eq!(cfg.train.max_epochs, 3);
    let text = toml::to_string(&cfg).unwrap();
    assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
}
