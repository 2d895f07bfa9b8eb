mod common;

use std::collections::BTreeMap;

use common::*;
use ilog_core::context::{LifeSequence, ParticipantId, SituationalContext};
use ilog_core::quality::*;
use ilog_core::schedule::Actor;
use ilog_core::sim::{inject_fault, lifecycles_lossy, Fault, LogRecord, SimConfig};
use ilog_core::time::{Date, TimeDelta, Timestamp};
use proptest::prelude::*;

fn kinds(flags: &[QualityFlag]) -> Vec<FlagKind> {
    flags.iter().map(|f| f.kind).collect()
}

#[test]
fn clean_perfect_log_has_no_flags() {
    let w = world(3, 3, 1);
    let log = w.simulate(&fixed(1.0, 1.0, 2), &SimConfig::default());
    let flags = run_quality_checks(&log, Some(&w.timeline), &CheckConfig::default());
    assert!(flags.is_empty(), "{flags:#?}");
}

#[test]
fn injected_burst_gives_one_flag_for_that_participant() {
    let w = world(2, 3, 1);
    let log = w.simulate(&fixed(1.0, 1.0, 2), &SimConfig::default());
    let victim = ParticipantId::new("p001");
    let from = day0() + TimeDelta::from_hours(30);
    let log = inject_fault(log, &Fault::AnswerBurst { participant: victim.clone(), from, to: from + TimeDelta::from_hours(3) });
    let flags = run_quality_checks(&log, Some(&w.timeline), &CheckConfig::default());
    assert_eq!(kinds(&flags), vec![FlagKind::AnswerBurst]);
    assert_eq!(flags[0].participant.as_ref(), Some(&victim));
    // 6 half-hour slots x 3 questions
    assert_eq!(flags[0].evidence.len(), 18);
}

#[test]
fn nine_answers_in_a_minute_are_not_a_burst() {
    let w = world(1, 1, 1);
    let log = w.simulate(&fixed(1.0, 1.0, 2), &SimConfig::default());
    let from = day0() + TimeDelta::from_hours(5);
    // 3 slots x 3 questions = 9 answers
    let log = inject_fault(log, &Fault::AnswerBurst { participant: "p000".into(), from, to: from + TimeDelta::from_minutes(90) });
    assert!(run_quality_checks(&log, None, &CheckConfig::default()).is_empty());
}

fn hourly_life(person: &str, odd: Option<(u32, &str, &str)>) -> LifeSequence {
    let contexts = (0..24)
        .map(|h| {
            let start = day0() + TimeDelta::from_hours(h);
            let (act, place) = match odd {
                Some((hour, a, p)) if hour as i64 == h => (a, p),
                _ => ("Studying", "Home Apartment/room"),
            };
            SituationalContext::new(format!("c{h}"), start, start + TimeDelta::from_hours(1))
                .unwrap()
                .at(place)
                .doing(act)
        })
        .collect();
    LifeSequence::from_contexts(person.into(), "test", contexts).unwrap()
}

#[test]
fn driving_in_the_library_is_implausible() {
    let mut w = world(1, 1, 1);
    let life = hourly_life("p000", Some((10, "Driving", "University Classroom/library")));
    w.ground = BTreeMap::from([(ParticipantId::new("p000"), life)]);
    let log = w.simulate(&fixed(1.0, 1.0, 2), &SimConfig::default());
    let flags = run_quality_checks(&log, Some(&w.timeline), &CheckConfig::default());
    assert!(!flags.is_empty());
    // two half-hour slots inside the odd hour
    assert_eq!(kinds(&flags), vec![FlagKind::ImplausibleAnswer; 2]);
    for f in &flags {
        assert_eq!(f.evidence.len(), 2);
        let hour = f.at.time_of_day() / 3_600_000;
        assert_eq!(hour, 10);
    }
}

#[test]
fn wrong_spatial_answers_mismatch_location_readings() {
    let w = world(1, 2, 1);
    let log = w.simulate(&fixed(1.0, 0.0, 2), &SimConfig::default());
    let cfg = CheckConfig { implausible: vec![], ..CheckConfig::default() };
    let flags = run_quality_checks(&log, Some(&w.timeline), &cfg);
    let mismatches = flags.iter().filter(|f| f.kind == FlagKind::LocationMismatch).count();
    // brute force: a wrong answer escapes only when a reading near a context
    // boundary happens to show the place it named
    let mut expected = 0;
    for c in lifecycles_lossy(&log).values().filter(|c| c.category == ilog_core::plan::QCategory::WE) {
        let (lo, hi) = (c.delivered.unwrap() - TimeDelta::from_minutes(2), c.stored.unwrap() + TimeDelta::from_minutes(2));
        let near: Vec<_> = log
            .iter()
            .filter_map(LogRecord::as_sensor)
            .filter(|s| s.participant == c.participant && s.at >= lo && s.at <= hi)
            .filter_map(|s| match &s.value { ilog_core::sim::SensorValue::Place(p) => Some(p.clone()), _ => None })
            .collect();
        expected += (!near.is_empty() && !near.iter().any(|p| Some(p.as_str()) == c.answer.as_deref())) as usize;
    }
    assert_eq!(mismatches, expected);
    assert!(mismatches >= 2 * 48 * 9 / 10);

    let mut compat = LocationCompatibility::default();
    for a in PLACES {
        compat.allowed.insert(a.to_string(), PLACES.iter().map(|s| s.to_string()).collect());
    }
    let lenient = CheckConfig { compatibility: compat, implausible: vec![], ..CheckConfig::default() };
    assert!(run_quality_checks(&log, Some(&w.timeline), &lenient).is_empty());
}

#[test]
fn blackout_day_is_missing_and_flagged_in_heatmap() {
    let w = world(3, 2, 1);
    let log = w.simulate(&fixed(1.0, 1.0, 2), &SimConfig::default());
    let dark = day0().date().succ();
    let log = inject_fault(log, &Fault::BlackoutDay(dark));
    let flags = run_quality_checks(&log, Some(&w.timeline), &CheckConfig::default());
    let missing: Vec<_> = flags.iter().filter(|f| f.kind == FlagKind::MissingDay).collect();
    assert_eq!(missing.len(), 1);
    assert_eq!(missing[0].at, dark.start());
    assert!(missing[0].participant.is_none());

    let map = compliance_heatmap(&log, day0().date(), day0().date().succ().succ());
    assert_eq!(map.flagged_days, vec![dark]);
    let col = map.days.iter().position(|d| *d == dark).unwrap();
    assert!(map.cells.iter().all(|row| row[col].is_none()));
    assert!(map.cells.iter().all(|row| row[0].unwrap().rate == 1.0 && row[2].unwrap().rate == 1.0));
}

#[test]
fn sensor_gap_needs_more_than_g_missing_readings() {
    let w = world(1, 1, 1);
    let log = w.simulate(&fixed(1.0, 1.0, 2), &SimConfig::default());
    let from = day0() + TimeDelta::from_hours(6);
    let cut = |mins| {
        inject_fault(log.clone(), &Fault::SensorDropout { sensor: "GPS".into(), from, to: from + TimeDelta::from_minutes(mins) })
    };
    assert!(run_quality_checks(&cut(30), Some(&w.timeline), &CheckConfig::default()).is_empty());
    let gappy = cut(31);
    let flags = run_quality_checks(&gappy, Some(&w.timeline), &CheckConfig::default());
    assert_eq!(kinds(&flags), vec![FlagKind::SensorGap]);
    assert_eq!(flags[0].at, from);
    assert_eq!(flags[0].evidence.len(), 2);
    // on-change sensors never gap
    let screenless = inject_fault(log.clone(), &Fault::SensorDropout { sensor: "Screen Status".into(), from: day0(), to: day0() + TimeDelta::from_days(1) });
    assert!(run_quality_checks(&screenless, Some(&w.timeline), &CheckConfig::default()).is_empty());
}

#[test]
fn perfect_simulation_heatmap_is_all_ones() {
    let w = world(2, 3, 4);
    let log = w.simulate(&fixed(1.0, 1.0, 2), &SimConfig::default());
    let map = compliance_heatmap(&log, day0().date(), day0().date().succ());
    assert_eq!(map.participants.len(), 3);
    for row in &map.cells {
        for c in row {
            let c = c.unwrap();
            assert_eq!((c.delivered, c.answered, c.rate), (144, 144, 1.0));
        }
    }
}

#[test]
fn half_rate_heatmap_cells_stay_in_band() {
    let mut plan = plan(14);
    plan.calendars[0].context_collections[0].question_collections.truncate(1);
    let w = world_with(plan, 14, 12, 3);
    let log = w.simulate(&fixed(0.5, 1.0, 9), &SimConfig { sensors: false, ..SimConfig::default() });
    let map = compliance_heatmap(&log, day0().date(), Date::from_days(day0().date().days_since_epoch() + 13));
    let cells: Vec<_> = map.cells.iter().flatten().map(|c| c.unwrap()).collect();
    assert_eq!(cells.len(), 12 * 14);
    assert!(cells.iter().all(|c| c.delivered == 48));
    let inside = cells.iter().filter(|c| (0.3..=0.7).contains(&c.rate)).count();
    assert!(inside as f64 >= 0.95 * cells.len() as f64, "{inside}/{}", cells.len());
}

fn summary_world() -> (World, Vec<LogRecord>) {
    let w = world(28, 4, 1);
    let log = w.simulate(&fixed(0.9, 1.0, 2), &SimConfig { sensors: true, ..SimConfig::default() });
    (w, log)
}

#[test]
fn summary_progress_and_role_scoping() {
    let (w, log) = summary_world();
    let now = day0() + TimeDelta::from_days(14);
    let params = QualityParameters::default();
    let opts = SummaryOptions::default();
    let r = dashboard_summary(&log, &w.timeline, &params, &Actor::Researcher, None, now, &opts).unwrap();
    assert_eq!((r.progress.days_total, r.progress.days_covered, r.progress.days_left), (28, 14, 14));
    assert_eq!(r.panels(), vec!['A', 'B', 'C', 'D', 'E', 'F']);
    assert_eq!(r.live.as_ref().unwrap().participants, 4);
    assert_eq!(r.live.as_ref().unwrap().live_last_24h, 4);
    assert!(r.as_of == now && r.answers.scope.is_none());

    let me = ParticipantId::new("p002");
    let p = dashboard_summary(&log, &w.timeline, &params, &Actor::Participant(me.clone()), None, now, &opts).unwrap();
    assert_eq!(p.panels(), vec!['A', 'C', 'D', 'E', 'F']);
    assert_eq!(p.answers.scope.as_ref(), Some(&me));
    assert!(p.answers.cohort.is_none());
    let json = serde_json::to_string(&p).unwrap();
    for other in ["p000", "p001", "p003"] {
        assert!(!json.contains(other));
    }
    assert_eq!(p.delivery.generated * 4, r.delivery.generated);
    let gps = &p.sensors.iter().find(|s| s.sensor == "GPS").unwrap();
    assert_eq!(gps.expected, Some(14 * 1440 + 1));
    assert!(p.sensors.iter().any(|s| s.sensor == "Screen Status" && s.expected.is_none()));

    let err = dashboard_summary(&log, &w.timeline, &params, &Actor::Participant(me.clone()), Some(&"p001".into()), now, &opts);
    assert!(matches!(err, Err(AuthorizationError::OtherParticipant { .. })));

    let cohort = dashboard_summary(&log, &w.timeline, &params, &Actor::Participant(me), None, now, &SummaryOptions { cohort_visible: true }).unwrap();
    let c = cohort.answers.cohort.clone().unwrap();
    assert_eq!(c.delivered, r.answers.stats.delivered);
    assert!(!serde_json::to_string(&cohort.answers).unwrap().contains("p000"));
}

#[test]
fn summary_delivery_rate_under_failures() {
    let w = world(7, 6, 1);
    let log = w.simulate(&fixed(0.8, 1.0, 2), &SimConfig { delivery_failure_rate: 0.05, sensors: false, ..SimConfig::default() });
    let end = day0() + TimeDelta::from_days(8);
    let s = dashboard_summary(&log, &w.timeline, &QualityParameters::default(), &Actor::Researcher, None, end, &SummaryOptions::default()).unwrap();
    let rate = s.delivery.rate.unwrap();
    assert!((rate - 0.95).abs() <= 0.02, "{rate}");
    assert_eq!(s.delivery.generated, 6 * 7 * 144);
}

#[test]
fn ranking_tracks_the_log() {
    let w = world(2, 2, 1);
    let good = w.simulate(&fixed(1.0, 1.0, 2), &SimConfig { sensors: false, ..SimConfig::default() });
    let silent = w.simulate(&fixed(0.0, 1.0, 2), &SimConfig { sensors: false, ..SimConfig::default() });
    let end = day0() + TimeDelta::from_days(3);
    let params = QualityParameters::default();
    assert!(rank_all(&good, &params, end).iter().all(|r| r.verdict == Verdict::Good));
    // 288 unanswered per participant against a limit of 100
    assert!(rank_all(&silent, &params, end).iter().all(|r| r.verdict == Verdict::Poor && r.unanswered_count == 288));
}

fn verdict_of(unanswered: u64, reaction: i64, completion: i64, upper: f64) -> Verdict {
    let m = ParticipantMetrics {
        participant: "p".into(),
        delivered: 1000,
        answered: 1000 - unanswered,
        unanswered,
        avg_reaction: Some(TimeDelta::from_secs(reaction)),
        avg_completion: Some(TimeDelta::from_secs(completion)),
    };
    let params = QualityParameters {
        max_unanswered: 50,
        max_avg_completion_time: TimeDelta::from_secs(120),
        max_avg_response_time: TimeDelta::from_secs(1800),
        medium_band: MediumBand { lower: 0.0, upper },
    };
    rank_participant(&m, &params, Timestamp::from_millis(0)).verdict
}

fn evidence_ok(log: &[LogRecord], flags: &[QualityFlag]) -> bool {
    flags.iter().all(|f| !f.evidence.is_empty() && f.evidence.iter().all(|&i| i < log.len()))
}

proptest! {
    #[test]
    fn ranking_is_monotone(u in 0u64..200, r in 0i64..5000, c in 0i64..400,
                           du in 0u64..50, dr in 0i64..1000, dc in 0i64..100, which in 0usize..3,
                           upper in 0.05f64..1.0) {
        let before = verdict_of(u, r, c, upper);
        let after = match which {
            0 => verdict_of(u + du, r, c, upper),
            1 => verdict_of(u, r + dr, c, upper),
            _ => verdict_of(u, r, c + dc, upper),
        };
        prop_assert!(after >= before);
        prop_assert_eq!(before, verdict_of(u, r, c, upper));
    }

    #[test]
    fn piecewise_rule_matches_hand_evaluation(u in 0u64..200, r in 0i64..5000, c in 0i64..400) {
        let within = u <= 50 && r <= 1800 && c <= 120;
        let poor = u as f64 > 50.0 * 1.5 || r as f64 > 1800.0 * 1.5 || c as f64 > 120.0 * 1.5;
        let expected = if within { Verdict::Good } else if poor { Verdict::Poor } else { Verdict::Medium };
        prop_assert_eq!(verdict_of(u, r, c, 0.5), expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn heatmap_matches_brute_force_recount(seed in 0u64..1000, p in 0.0f64..1.0) {
        let w = world(3, 2, seed);
        let log = w.simulate(&fixed(p, 1.0, seed), &SimConfig { sensors: false, delivery_failure_rate: 0.1, ..SimConfig::default() });
        let from = day0().date();
        let to = from.succ().succ();
        let map = compliance_heatmap(&log, from, to);
        for (pi, pid) in map.participants.iter().enumerate() {
            for (di, day) in map.days.iter().enumerate() {
                let mut delivered = 0u64;
                let mut answered = 0u64;
                for e in log.iter().filter_map(LogRecord::as_qa) {
                    if &e.participant != pid || e.kind != ilog_core::sim::EventKind::QuestionDelivered || e.at.date() != *day {
                        continue;
                    }
                    delivered += 1;
                    answered += log.iter().filter_map(LogRecord::as_qa).any(|x| {
                        x.participant == e.participant && x.occurrence == e.occurrence && x.kind == ilog_core::sim::EventKind::AnswerStored
                    }) as u64;
                }
                let cell = map.cells[pi][di];
                if delivered == 0 {
                    prop_assert!(cell.is_none());
                } else {
                    let cell = cell.unwrap();
                    prop_assert_eq!((cell.delivered, cell.answered), (delivered, answered));
                    prop_assert!(cell.answered <= cell.delivered && (0.0..=1.0).contains(&cell.rate));
                }
            }
        }
    }

    #[test]
    fn flag_evidence_resolves(seed in 0u64..1000, fault in 0usize..4, hour in 1i64..40) {
        let w = world(2, 2, seed);
        let log = w.simulate(&ilog_core::sim::BehaviorModel::reference(Default::default(), seed), &SimConfig::default());
        let at = day0() + TimeDelta::from_hours(hour);
        let log = match fault {
            0 => inject_fault(log, &Fault::BlackoutDay(at.date())),
            1 => inject_fault(log, &Fault::SensorDropout { sensor: "GPS".into(), from: at, to: at + TimeDelta::from_hours(2) }),
            2 => inject_fault(log, &Fault::AnswerBurst { participant: "p000".into(), from: at, to: at + TimeDelta::from_hours(4) }),
            _ => log,
        };
        let flags = run_quality_checks(&log, Some(&w.timeline), &CheckConfig::default());
        prop_assert!(evidence_ok(&log, &flags));
        prop_assert!(lifecycles_lossy(&log).len() > 0);
    }
}
