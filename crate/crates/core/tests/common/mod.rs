#![allow(dead_code)]

use chrono::{Duration, NaiveDate, TimeZone, Utc};
use hill_core::engine::{Engine, StepClock};
use hill_core::ingest::Prototype;
use hill_core::instrument::{default_instrument, Dimension};
use hill_core::model::init_model;
use serde_json::json;

pub fn clock() -> Box<StepClock> {
    Box::new(StepClock::new(
        Utc.with_ymd_and_hms(2026, 3, 1, 8, 0, 0).unwrap(),
        Duration::seconds(1),
    ))
}

pub fn fresh_engine() -> Engine {
    Engine::create(default_instrument(), init_model(1.0, 1.0).unwrap(), clock(), None).unwrap()
}

pub fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2026, 3, 2).unwrap()
}

/// Engine with cycle `c1` in testing and prototype `p1` registered.
pub fn testing_engine() -> Engine {
    let mut e = fresh_engine();
    open_cycle(&mut e, "c1", "p1");
    e
}

pub fn open_cycle(e: &mut Engine, cycle: &str, prototype: &str) {
    e.create_cycle(cycle, start(), 14).unwrap();
    e.register_prototype(Prototype {
        prototype_id: prototype.into(),
        cycle_id: cycle.into(),
        title: format!("{prototype} mock-up"),
        display_assets: vec![],
    })
    .unwrap();
    e.advance_cycle(cycle).unwrap();
    e.advance_cycle(cycle).unwrap();
}

/// Ratings in instrument order (novelty, energy, simplicity, tool items).
pub fn doc_with(id: &str, cycle: &str, prototype: &str, ratings: [i64; 12], overall: i64, minute: i64, comments: &[&str]) -> String {
    let inst = default_instrument();
    let map: serde_json::Map<String, serde_json::Value> = inst
        .items()
        .zip(ratings)
        .map(|(item, r)| (item.to_string(), json!(r)))
        .collect();
    let at = Utc.with_ymd_and_hms(2026, 3, 3, 10, 0, 0).unwrap() + Duration::minutes(minute);
    json!({
        "response_id": id,
        "respondent_id": format!("u-{id}"),
        "prototype_id": prototype,
        "cycle_id": cycle,
        "submitted_at": at,
        "ratings": map,
        "overall": overall,
        "comments": comments,
    })
    .to_string()
}

pub fn doc(id: &str, ratings: [i64; 12], overall: i64) -> String {
    doc_with(id, "c1", "p1", ratings, overall, 0, &[])
}

/// A varied, unremarkable response: composites near (4, 5, 3, 5) with a
/// small per-index shift.
pub fn honest(i: usize) -> [i64; 12] {
    let s = (i % 3) as i64 - 1;
    [4 + s, 4, 5, 5, 5 + s, 4, 3, 3 + s, 2, 5, 6, 4 + s]
}

pub fn dims() -> [Dimension; 4] {
    Dimension::ALL
}

pub mod oracle;
