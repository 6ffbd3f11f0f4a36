mod common;

use std::fs;

use common::*;
use hill_core::engine::Engine;
use hill_core::error::HillError;
use hill_core::gate::{Decision, GatePolicy};
use hill_core::instrument::{default_instrument, Dimension};
use hill_core::model::init_model;
use hill_core::state::State;
use hill_core::store::{read_log, read_snapshot, write_snapshot, DataDir};

fn init() -> hill_core::error::Result<(hill_core::instrument::Instrument, hill_core::model::ModelState)> {
    Ok((default_instrument(), init_model(1.0, 0.98)?))
}

fn populate(e: &mut Engine, cycle: &str, proto: &str) {
    open_cycle(e, cycle, proto);
    let docs: Vec<String> = (0..8)
        .map(|i| {
            let r = if i == 0 { [7; 12] } else { honest(i) };
            doc_with(&format!("{cycle}-r{i}"), cycle, proto, r, 4 + (i % 3) as i64, i as i64, &["note"])
        })
        .collect();
    e.ingest_responses(cycle, &docs).unwrap();
    e.enqueue_flagged(cycle, &GatePolicy::default()).unwrap();
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).unwrap()
}

#[test]
fn log_survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let data = DataDir::new(dir.path());
    let state = {
        let mut e = data.open(clock(), init).unwrap();
        populate(&mut e, "c1", "p1");
        e.review_decision("c1-r0", Decision::Reject, "eng").unwrap();
        e.run_cycle_pipeline("c1", 5).unwrap();
        e.state().clone()
    };
    let reopened = data.open(clock(), init).unwrap();
    assert_eq!(json(reopened.state()), json(&state));
    assert_eq!(read_log(&data.log_path()).unwrap().len() as u64, state.last_seq);
}

#[test]
fn snapshot_round_trip_and_tail_replay() {
    let dir = tempfile::tempdir().unwrap();
    let data = DataDir::new(dir.path());
    let mut e = data.open(clock(), init).unwrap();
    populate(&mut e, "c1", "p1");
    e.review_decision("c1-r0", Decision::Accept, "eng").unwrap();
    e.draft_story("c1", Dimension::Novelty, "As a user, I want surprise", vec![], vec![]).unwrap();
    e.estimate_story(1, 3).unwrap();
    e.run_cycle_pipeline("c1", 5).unwrap();
    data.snapshot(&e).unwrap();

    let snap = read_snapshot(&data.snapshot_path()).unwrap();
    assert_eq!(json(&snap.state), json(e.state()));
    assert_eq!(snap.events, e.log());
    assert_eq!(snap.state.model, e.state().model);
    assert_eq!(snap.state.review, e.state().review);
    assert_eq!(snap.state.plans, e.state().plans);

    // more work after the snapshot
    populate(&mut e, "c2", "p2");
    e.review_decision("c2-r0", Decision::Reject, "eng").unwrap();
    e.run_cycle_pipeline("c2", 5).unwrap();
    let live = json(e.state());
    drop(e);

    let restored = data.open(clock(), init).unwrap();
    assert_eq!(json(restored.state()), live);
    let from_scratch = State::replay(&read_log(&data.log_path()).unwrap()).unwrap();
    assert_eq!(json(&from_scratch), live);
}

#[test]
fn truncated_snapshot_is_rejected_whole() {
    let dir = tempfile::tempdir().unwrap();
    let data = DataDir::new(dir.path());
    let mut e = data.open(clock(), init).unwrap();
    populate(&mut e, "c1", "p1");
    data.snapshot(&e).unwrap();
    let path = data.snapshot_path();
    let text = fs::read_to_string(&path).unwrap();

    let lines: Vec<&str> = text.lines().collect();
    // header, state, records 1..=5, then cut mid-record
    let mut cut = lines[..7].join("\n");
    cut.push('\n');
    cut.push_str(&lines[7][..lines[7].len() / 2]);
    fs::write(&path, &cut).unwrap();
    match read_snapshot(&path) {
        Err(HillError::CorruptSnapshot { last_valid_seq, .. }) => assert_eq!(last_valid_seq, 5),
        other => panic!("expected corrupt snapshot, got {other:?}"),
    }
    assert!(matches!(data.open(clock(), init), Err(HillError::CorruptSnapshot { .. })));

    // every record intact but no closing marker
    fs::write(&path, lines[..lines.len() - 1].join("\n")).unwrap();
    assert!(matches!(read_snapshot(&path), Err(HillError::CorruptSnapshot { .. })));

    fs::write(&path, "").unwrap();
    assert!(matches!(
        read_snapshot(&path),
        Err(HillError::CorruptSnapshot { last_valid_seq: 0, .. })
    ));
}

#[test]
fn corrupt_log_reports_last_good_record() {
    let dir = tempfile::tempdir().unwrap();
    let data = DataDir::new(dir.path());
    let mut e = data.open(clock(), init).unwrap();
    populate(&mut e, "c1", "p1");
    let n = e.log().len() as u64;
    drop(e);
    let path = data.log_path();
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("{\"seq\":");
    fs::write(&path, &text).unwrap();
    match read_log(&path) {
        Err(HillError::CorruptLog { last_valid_seq, .. }) => assert_eq!(last_valid_seq, n),
        other => panic!("expected corrupt log, got {other:?}"),
    }

    let lines: Vec<&str> = text.lines().collect();
    let gapped = [lines[0], lines[2]].join("\n");
    fs::write(&path, gapped).unwrap();
    assert!(matches!(
        read_log(&path),
        Err(HillError::CorruptLog { last_valid_seq: 1, .. })
    ));
}

#[test]
fn snapshot_must_agree_with_state() {
    let e = testing_engine();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    assert!(write_snapshot(&path, e.state(), &e.log()[..1]).is_err());
    write_snapshot(&path, e.state(), e.log()).unwrap();
    assert_eq!(read_snapshot(&path).unwrap().state, *e.state());
}
