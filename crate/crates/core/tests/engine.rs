mod common;

use common::*;
use hill_core::engine::LogSink;
use hill_core::error::HillError;
use hill_core::events::EventRecord;
use hill_core::gate::{Decision, FlagKind, GatePolicy};
use hill_core::ingest::{CycleStatus, ResponseStatus};
use hill_core::instrument::Dimension;
use hill_core::scoring::composite_scores;

fn ingest(e: &mut hill_core::engine::Engine, docs: &[String]) -> hill_core::ingest::IngestReport {
    e.ingest_responses("c1", docs).unwrap()
}

fn ten_with_straightliners(k: usize) -> Vec<String> {
    (0..10)
        .map(|i| {
            let r = if i < k { [7; 12] } else { honest(i) };
            doc_with(&format!("r{i}"), "c1", "p1", r, 5, i as i64, &[])
        })
        .collect()
}

#[test]
fn well_formed_batch_is_stored_pending() {
    let mut e = testing_engine();
    let report = ingest(&mut e, &ten_with_straightliners(0));
    assert_eq!((report.stored, report.errors.len()), (10, 0));
    assert!(e
        .state()
        .responses
        .values()
        .all(|r| r.status == ResponseStatus::Pending));
}

#[test]
fn bad_records_are_reported_by_index() {
    let mut e = testing_engine();
    let missing = doc("a", honest(0), 4).replace("\"clever\"", "\"cleverness\"");
    let out_of_range = doc("b", [9, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4], 4);
    let good = doc("c", honest(1), 4);
    let report = ingest(&mut e, &[missing, out_of_range, good]);
    assert_eq!(report.stored, 1);
    assert_eq!(report.errors.len(), 2);
    assert_eq!(report.errors[0].index, 0);
    assert!(report.errors[0].error.contains("cleverness") || report.errors[0].error.contains("clever"));
    assert!(matches!(report.errors[1].cause, HillError::OutOfRange { .. }));
    assert_eq!(report.errors[1].response_id.as_deref(), Some("b"));
}

#[test]
fn missing_item_names_it() {
    let mut e = testing_engine();
    let text = doc("a", honest(0), 4);
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["ratings"].as_object_mut().unwrap().remove("clever");
    let report = ingest(&mut e, &[v.to_string()]);
    assert_eq!(report.stored, 0);
    assert_eq!(report.errors[0].cause, HillError::MissingItem("clever".into()));
}

#[test]
fn ingest_requires_testing_cycle_and_matching_records() {
    let mut e = fresh_engine();
    e.create_cycle("c1", start(), 14).unwrap();
    let err = e.ingest_responses("c1", &[doc("a", honest(0), 4)]).unwrap_err();
    assert!(matches!(err, HillError::CycleStatus { .. }));
    assert_eq!(
        e.ingest_responses("nope", &[]).unwrap_err(),
        HillError::UnknownCycle("nope".into())
    );

    let mut e = testing_engine();
    open_cycle(&mut e, "c2", "p2");
    let wrong_cycle = doc_with("x", "c2", "p2", honest(0), 4, 0, &[]);
    let foreign_proto = doc_with("y", "c1", "p2", honest(0), 4, 0, &[]);
    let unknown_proto = doc_with("z", "c1", "p9", honest(0), 4, 0, &[]);
    let report = ingest(&mut e, &[wrong_cycle, foreign_proto, unknown_proto]);
    assert_eq!(report.stored, 0);
    assert!(matches!(report.errors[0].cause, HillError::CycleMismatch { .. }));
    assert!(matches!(report.errors[1].cause, HillError::PrototypeCycleMismatch { .. }));
    assert!(matches!(report.errors[2].cause, HillError::UnknownPrototype(_)));
}

#[test]
fn reingest_is_a_noop_and_respondents_answer_once() {
    let mut e = testing_engine();
    let a = doc("a", honest(0), 4);
    ingest(&mut e, std::slice::from_ref(&a));
    let seq = e.state().last_seq;
    let again = ingest(&mut e, &[a]);
    assert_eq!((again.stored, again.errors.len()), (0, 0));
    assert_eq!(e.state().last_seq, seq);

    let same_person = doc("b", honest(1), 4).replace("u-b", "u-a");
    let report = ingest(&mut e, &[same_person]);
    assert!(matches!(report.errors[0].cause, HillError::DuplicateRespondent { .. }));
}

#[test]
fn clean_batch_is_auto_accepted() {
    let mut e = testing_engine();
    ingest(&mut e, &ten_with_straightliners(0));
    assert_eq!(e.enqueue_flagged("c1", &GatePolicy::default()).unwrap(), 0);
    assert_eq!(e.state().accepted.len(), 10);
    assert!(e.review_queue().is_empty());
}

#[test]
fn planted_straightliners_are_queued() {
    let mut e = testing_engine();
    ingest(&mut e, &ten_with_straightliners(2));
    assert_eq!(e.enqueue_flagged("c1", &GatePolicy::default()).unwrap(), 2);
    assert_eq!(e.state().accepted.len(), 8);
    let queue = e.review_queue();
    let ids: Vec<_> = queue.iter().map(|i| i.response_id.as_str()).collect();
    assert_eq!(ids, ["r0", "r1"]);
    for item in &queue {
        let kinds: Vec<_> = item.flags.iter().map(|f| f.kind).collect();
        assert!(kinds.contains(&FlagKind::Straightline));
        assert!(kinds.contains(&FlagKind::Acquiescence));
    }
    assert_eq!(e.enqueue_flagged("c1", &GatePolicy::default()).unwrap(), 0);
}

#[test]
fn queue_everything_when_auto_accept_is_off() {
    let mut e = testing_engine();
    ingest(&mut e, &ten_with_straightliners(0));
    let policy = GatePolicy {
        auto_accept_clean: false,
        ..GatePolicy::default()
    };
    assert_eq!(e.enqueue_flagged("c1", &policy).unwrap(), 10);
    assert!(e.review_queue().iter().all(|i| i.flags.is_empty()));
}

#[test]
fn decisions_move_responses_in_and_out_of_the_data() {
    let mut e = testing_engine();
    ingest(&mut e, &ten_with_straightliners(2));
    e.enqueue_flagged("c1", &GatePolicy::default()).unwrap();
    let before = e.aggregate_feedback("c1", "p1").unwrap();
    assert_eq!(before.n, 8);

    let item = e.review_decision("r0", Decision::Accept, "eng-1").unwrap();
    assert_eq!(item.decision, Some(Decision::Accept));
    assert_eq!(item.engineer_id.as_deref(), Some("eng-1"));
    assert!(item.decided_at.is_some());
    assert_eq!(e.state().responses["r0"].status, ResponseStatus::Accepted);
    assert_eq!(e.aggregate_feedback("c1", "p1").unwrap().n, 9);

    e.review_decision("r1", Decision::Reject, "eng-1").unwrap();
    assert_eq!(e.state().responses["r1"].status, ResponseStatus::Rejected);
    assert_eq!(e.aggregate_feedback("c1", "p1").unwrap().n, 9);
    assert_eq!(e.training_rows(Some("c1")).len(), 9);
    assert!(e.training_rows(None).iter().all(|r| r.response_id != "r1"));
    assert!(e.review_queue().is_empty());

    assert_eq!(
        e.review_decision("r1", Decision::Accept, "eng-2").unwrap_err(),
        HillError::AlreadyDecided("r1".into())
    );
    assert_eq!(
        e.review_decision("r5", Decision::Accept, "eng-2").unwrap_err(),
        HillError::NotUnderReview("r5".into())
    );
    assert_eq!(
        e.review_decision("zz", Decision::Accept, "eng-2").unwrap_err(),
        HillError::UnknownResponse("zz".into())
    );
}

#[test]
fn training_row_maps_composites_and_overall() {
    let mut e = testing_engine();
    // composites (6, 5, 4, 7)
    let r = [6, 6, 6, 5, 5, 5, 4, 4, 4, 7, 7, 7];
    ingest(&mut e, &[doc("a", r, 6)]);
    assert!(e.training_rows(Some("c1")).is_empty());
    e.enqueue_flagged("c1", &GatePolicy::default()).unwrap();
    let rows = e.training_rows(Some("c1"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].features, [6.0, 5.0, 4.0, 7.0]);
    assert_eq!(rows[0].target, 6.0);
}

#[test]
fn comments_come_from_accepted_responses_in_time_order() {
    let mut e = testing_engine();
    assert!(e.collect_comments("c1").unwrap().is_empty());
    let docs = vec![
        doc_with("late", "c1", "p1", honest(0), 4, 30, &["menu is hidden"]),
        doc_with("early", "c1", "p1", honest(1), 4, 5, &["colors clash", "too many clicks"]),
        doc_with("spam", "c1", "p1", [7; 12], 7, 1, &["great!!!"]),
        doc_with("quiet", "c1", "p1", honest(2), 4, 2, &[]),
    ];
    ingest(&mut e, &docs);
    e.enqueue_flagged("c1", &GatePolicy::default()).unwrap();
    e.review_decision("spam", Decision::Reject, "eng").unwrap();
    let got: Vec<(String, String)> = e
        .collect_comments("c1")
        .unwrap()
        .into_iter()
        .map(|c| (c.response_id, c.comment))
        .collect();
    let want = [
        ("early", "colors clash"),
        ("early", "too many clicks"),
        ("late", "menu is hidden"),
    ];
    assert_eq!(got.len(), want.len());
    for ((id, text), (wid, wtext)) in got.iter().zip(want) {
        assert_eq!((id.as_str(), text.as_str()), (wid, wtext));
    }
}

#[test]
fn feedback_uses_exactly_the_accepted_rows() {
    let mut e = testing_engine();
    let mut docs: Vec<String> = (0..5).map(|i| doc_with(&format!("ok{i}"), "c1", "p1", honest(i), 4, i as i64, &[])).collect();
    for i in 0..3 {
        docs.push(doc_with(&format!("bad{i}"), "c1", "p1", [7; 12], 7, 10 + i, &[]));
    }
    ingest(&mut e, &docs);
    e.enqueue_flagged("c1", &GatePolicy::default()).unwrap();
    for i in 0..3 {
        e.review_decision(&format!("bad{i}"), Decision::Reject, "eng").unwrap();
    }
    let fb = e.aggregate_feedback("c1", "p1").unwrap();
    assert_eq!(fb.n, 5);
    let inst = e.instrument().clone();
    for d in Dimension::ALL {
        let mut v: Vec<f64> = (0..5)
            .map(|i| composite_scores(&e.state().responses[&format!("ok{i}")], &inst).scores[d])
            .collect();
        v.sort_by(f64::total_cmp);
        assert_eq!(fb.stats[d].median, v[2]);
        assert_eq!(fb.means[d], v.iter().sum::<f64>() / 5.0);
    }
}

#[test]
fn training_is_blocked_by_open_review_items() {
    let mut e = testing_engine();
    ingest(&mut e, &ten_with_straightliners(1));
    e.enqueue_flagged("c1", &GatePolicy::default()).unwrap();
    let err = e.train("c1", None).unwrap_err();
    assert_eq!(err, HillError::UndecidedReviewItems(vec!["r0".into()]));
    assert_eq!(e.model().version, 0);
    e.review_decision("r0", Decision::Reject, "eng").unwrap();
    let out = e.train("c1", None).unwrap();
    assert_eq!(out.rows_trained, 9);
    assert_eq!(e.model().version, 9);
    let again = e.train("c1", None).unwrap();
    assert_eq!(again.rows_trained, 0);
    assert_eq!(e.model().version, 9);
}

#[test]
fn story_lifecycle() {
    let mut e = testing_engine();
    ingest(&mut e, &ten_with_straightliners(0));
    e.enqueue_flagged("c1", &GatePolicy::default()).unwrap();

    assert_eq!(
        e.draft_story("c1", Dimension::Simplicity, "  ", vec![], vec![]).unwrap_err(),
        HillError::EmptyNarrative
    );
    let nav = e
        .draft_story(
            "c1",
            Dimension::Simplicity,
            "As a frontend web user, I want to navigate to my personal page with the least possible number of navigational steps",
            vec!["Check if all UI elements originate from the same color scheme".into()],
            vec!["r3".into()],
        )
        .unwrap();
    assert_eq!(nav.story_id, 1);
    assert_eq!(
        e.story(1).unwrap().acceptance_criteria,
        ["Check if all UI elements originate from the same color scheme"]
    );
    assert!(matches!(
        e.draft_story("c1", Dimension::Tool, "As a user, I want x", vec![], vec!["ghost".into()]),
        Err(HillError::UnknownResponse(_))
    ));

    assert_eq!(e.estimate_story(1, 0).unwrap_err(), HillError::NonPositiveEstimate(0));
    assert_eq!(e.estimate_story(1, 3).unwrap().estimate, Some(3));
    assert_eq!(
        e.task_breakdown(1, vec!["wireframe nav".into()]).unwrap_err(),
        HillError::StoryNotSelected(1)
    );

    let scope = e.select_scope("c1", 5).unwrap();
    assert_eq!(scope.selected_stories, [1]);
    assert!(e.story(1).unwrap().selected);
    assert_eq!(e.estimate_story(1, 5).unwrap_err(), HillError::StorySelected(1));

    let s = e
        .task_breakdown(1, vec!["wireframe nav".into(), "reduce route depth".into()])
        .unwrap();
    assert_eq!(s.tasks.len(), 2);
    let s = e.task_breakdown(1, vec!["single task".into()]).unwrap();
    assert_eq!(s.tasks, ["single task"]);
    assert_eq!(e.task_breakdown(1, vec![]).unwrap_err(), HillError::EmptyTasks);

    let plan = e.plan("c1").unwrap();
    assert_eq!(plan.stories.len(), 1);
    assert_eq!(plan.stories[0].tasks, ["single task"]);
}

#[test]
fn unestimated_stories_block_selection_unless_skipped() {
    let mut e = testing_engine();
    ingest(&mut e, &ten_with_straightliners(0));
    e.enqueue_flagged("c1", &GatePolicy::default()).unwrap();
    e.draft_story("c1", Dimension::Energy, "As a user, I want energy", vec![], vec![]).unwrap();
    assert_eq!(e.select_scope("c1", 5).unwrap_err(), HillError::UnestimatedStories(vec![1]));
    assert_eq!(e.select_scope("c1", 0).unwrap_err(), HillError::NonPositiveCapacity(0));
    e.skip_dimension("c1", Dimension::Energy, true).unwrap();
    let scope = e.select_scope("c1", 5).unwrap();
    assert!(scope.selected_stories.is_empty());
    assert_eq!(e.plan("c1").unwrap().skipped_dimensions, [Dimension::Energy]);
}

#[test]
fn undecided_item_blocks_the_pipeline_and_names_it() {
    let mut e = testing_engine();
    ingest(&mut e, &ten_with_straightliners(1));
    let seq = e.state().last_seq;
    let err = e.run_cycle_pipeline("c1", 8).unwrap_err();
    assert_eq!(err, HillError::UndecidedReviewItems(vec!["r0".into()]));
    // screening committed, nothing after it
    assert!(e.state().last_seq > seq);
    assert_eq!(e.model().version, 0);
    assert_eq!(e.state().cycles["c1"].status, CycleStatus::Testing);
    assert!(e.state().plans.is_empty());
}

#[test]
fn pipeline_closes_the_cycle_once() {
    let mut e = testing_engine();
    ingest(&mut e, &ten_with_straightliners(0));
    let cycle_before = e.state().cycles["c1"].clone();
    let before = e.log().len();
    let out = e.run_cycle_pipeline("c1", 8).unwrap();
    assert!(e.log().len() - before >= 4);
    assert_eq!(out.feedback.len(), 1);
    assert_eq!(out.board.entries.len(), 4);
    assert_eq!(out.metrics.n_eval, 10);
    assert_eq!(out.metrics.model_version, 10);
    let closed = &e.state().cycles["c1"];
    assert_eq!(closed.status, CycleStatus::Closed);
    assert_eq!((closed.start, closed.end), (cycle_before.start, cycle_before.end));
    assert_eq!(e.state().model_history.len(), 1);

    let err = e.run_cycle_pipeline("c1", 8).unwrap_err();
    assert!(matches!(err, HillError::CycleStatus { .. }));
    assert_eq!(e.model().version, 10);
    assert_eq!(e.run_cycle_pipeline("nope", 8).unwrap_err(), HillError::UnknownCycle("nope".into()));
}

#[test]
fn pipeline_without_accepted_data_commits_nothing() {
    let mut e = testing_engine();
    let seq = e.state().last_seq;
    assert!(matches!(e.run_cycle_pipeline("c1", 8), Err(HillError::NoAcceptedData { .. })));
    assert_eq!(e.state().last_seq, seq);
    assert_eq!(e.state().cycles["c1"].status, CycleStatus::Testing);
}

#[test]
fn manual_transitions_stop_at_testing() {
    let mut e = fresh_engine();
    e.create_cycle("c1", start(), 14).unwrap();
    assert_eq!(e.advance_cycle("c1").unwrap(), CycleStatus::Running);
    assert_eq!(e.advance_cycle("c1").unwrap(), CycleStatus::Testing);
    assert!(matches!(e.advance_cycle("c1"), Err(HillError::CycleStatus { .. })));
    assert!(matches!(e.create_cycle("c1", start(), 14), Err(HillError::DuplicateCycle(_))));
    assert!(matches!(e.create_cycle("c2", start(), 0), Err(HillError::InvalidTimebox(_))));
}

struct FailingSink;

impl LogSink for FailingSink {
    fn append(&mut self, _: &[EventRecord]) -> hill_core::error::Result<()> {
        Err(HillError::Io("disk full".into()))
    }
}

#[test]
fn failed_append_leaves_state_untouched() {
    let mut e = testing_engine();
    e.set_sink(Some(Box::new(FailingSink)));
    let before = e.state().clone();
    let err = e.ingest_responses("c1", &ten_with_straightliners(0)).unwrap_err();
    assert_eq!(err, HillError::Io("disk full".into()));
    assert_eq!(e.state(), &before);
    assert_eq!(e.log().len() as u64, before.last_seq);
}

#[test]
fn replaying_the_log_rebuilds_the_state() {
    let mut e = testing_engine();
    ingest(&mut e, &ten_with_straightliners(2));
    e.enqueue_flagged("c1", &GatePolicy::default()).unwrap();
    e.review_decision("r0", Decision::Reject, "eng").unwrap();
    e.review_decision("r1", Decision::Accept, "eng").unwrap();
    e.draft_story("c1", Dimension::Tool, "As a user, I want tools", vec![], vec![]).unwrap();
    e.estimate_story(1, 2).unwrap();
    e.run_cycle_pipeline("c1", 8).unwrap();

    let rebuilt = hill_core::state::State::replay(e.log()).unwrap();
    assert_eq!(
        serde_json::to_string(&rebuilt).unwrap(),
        serde_json::to_string(e.state()).unwrap()
    );
}
