mod common;

use std::collections::BTreeMap;

use common::*;
use ilog_core::plan::QCategory;
use ilog_core::sim::behavior::REFERENCE_PLACES;
use ilog_core::sim::*;
use ilog_core::time::TimeDelta;

fn lognormal_model(seed: u64) -> BehaviorModel {
    BehaviorModel::uniform(
        CellParams {
            p_answer: 0.7,
            reaction: Distribution::LogNormal { mu: 5.5, sigma: 1.2 },
            completion: Distribution::LogNormal { mu: 3.0, sigma: 0.5 },
            p_correct: 0.6,
        },
        seed,
    )
}

fn one_question_world() -> World {
    let mut p = plan(28);
    p.calendars[0].context_collections[0].question_collections.truncate(1);
    world_with(p, 28, 20, 17)
}

#[test]
fn every_lifecycle_is_ordered_and_timings_subtract() {
    let w = one_question_world();
    let config = SimConfig { delivery_failure_rate: 0.03, sensors: false, ..SimConfig::default() };
    let log = w.simulate(&lognormal_model(5), &config);

    // brute force: gather raw stamps per (participant, occurrence) straight from the log
    let mut raw: BTreeMap<_, BTreeMap<EventKind, Vec<_>>> = BTreeMap::new();
    for r in &log {
        let LogRecord::Qa(e) = r else { continue };
        raw.entry((e.participant.clone(), e.occurrence)).or_default().entry(e.kind).or_default().push(e.at);
    }
    assert_eq!(raw.len(), 20 * 28 * 48);

    let cycles = lifecycles(&log).unwrap();
    assert_eq!(cycles.len(), raw.len());
    let (mut answered, mut missed) = (0, 0);
    for (key, stamps) in &raw {
        assert!(stamps.values().all(|v| v.len() == 1), "{key:?}");
        let get = |k| stamps.get(&k).map(|v| v[0]);
        let gen = get(EventKind::QuestionGenerated).unwrap();
        let chain: Vec<_> = [EventKind::QuestionDelivered, EventKind::AnswerStarted, EventKind::AnswerStored]
            .into_iter()
            .filter_map(get)
            .collect();
        let mut last = gen;
        for t in &chain {
            assert!(*t >= last, "{key:?}");
            last = *t;
        }
        assert!(get(EventKind::Missed).is_some() != get(EventKind::AnswerStored).is_some(), "{key:?}");

        let c = &cycles[key];
        c.check_complete().unwrap();
        match get(EventKind::QuestionDelivered) {
            None => {
                missed += 1;
                assert!(c.timing().is_err());
            }
            Some(delivered) => {
                let t = c.timing().unwrap();
                let started = get(EventKind::AnswerStarted);
                let stored = get(EventKind::AnswerStored);
                assert_eq!(t.reaction_time, started.map(|s| s - delivered));
                assert_eq!(t.completion_time, stored.and_then(|s| Some(s - started?)));
                assert_eq!(t.delay, stored.map(|s| s - gen));
                if stored.is_some() {
                    answered += 1;
                } else {
                    missed += 1;
                }
            }
        }
    }
    assert!(answered > 10_000 && missed > 1_000, "{answered} {missed}");
}

#[test]
fn reference_places_are_reproduced() {
    let mut p = plan(28);
    let ctx = &mut p.calendars[0].context_collections[0];
    ctx.sensor_collections.clear();
    ctx.question_collections[0].question.answer_options = REFERENCE_PLACES.iter().map(|(n, _)| n.to_string()).collect();
    for q in &mut ctx.question_collections {
        q.rrule.interval = 15;
        q.rrule.count = 28 * 96;
    }
    let w = world_with(p, 28, 20, 3);
    let base = CellParams { p_answer: 1.0, reaction: Distribution::Fixed(30.0), completion: Distribution::Fixed(10.0), p_correct: 0.5 };
    let log = w.simulate(&BehaviorModel::reference(base, 9), &SimConfig { sensors: false, ..SimConfig::default() });

    let mut per: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for c in lifecycles(&log).unwrap().values() {
        let (Some(d), Some(a)) = (c.delivered, c.answer.as_deref()) else { continue };
        let ctx = w.ground[&c.participant].context_at(d).unwrap();
        let cell = per.entry(ctx.we.clone().unwrap()).or_default();
        cell.0 += 1;
        cell.1 += (truth_label(ctx, c.category) == Some(a)) as u64;
    }
    for (place, want) in REFERENCE_PLACES {
        let (n, hits) = per[place];
        let rate = hits as f64 / n as f64;
        assert!(n >= 2000, "{place}: n={n}");
        assert!((rate - want).abs() <= 0.05, "{place}: {rate} vs {want}");
    }
}

#[test]
fn wrong_answers_never_match_truth() {
    let w = world(3, 2, 1);
    let log = w.simulate(&fixed(1.0, 0.0, 2), &SimConfig { sensors: false, ..SimConfig::default() });
    for c in lifecycles(&log).unwrap().values() {
        let ctx = w.ground[&c.participant].context_at(c.delivered.unwrap()).unwrap();
        assert_ne!(truth_label(ctx, c.category), c.answer.as_deref());
        if c.category == QCategory::WO {
            assert!(PEOPLE.contains(&c.answer.as_deref().unwrap()));
        }
    }
}

#[test]
fn delivery_latency_is_respected() {
    let w = world(2, 1, 1);
    let config = SimConfig { delivery_latency: TimeDelta::from_secs(42), sensors: false, ..SimConfig::default() };
    let log = w.simulate(&fixed(1.0, 1.0, 2), &config);
    for c in lifecycles(&log).unwrap().values() {
        assert_eq!(c.delivered.unwrap() - c.generated.unwrap(), TimeDelta::from_secs(42));
    }
}
