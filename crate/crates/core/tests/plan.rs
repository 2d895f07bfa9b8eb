mod common;

use ilog_core::context::ParticipantProfile;
use ilog_core::plan::*;
use ilog_core::schedule::{compile, expand, CollectionKind};
use ilog_core::time::{TimeDelta, Timestamp};
use proptest::collection::{btree_set, vec};
use proptest::prelude::*;

const GOLDEN: &[(&str, &str)] = &[
    ("daily_wellbeing", include_str!("data/daily_wellbeing.ilogcal")),
    ("diary_two_phase", include_str!("data/diary_two_phase.ilogcal")),
    ("sensors_48d", include_str!("data/sensors_48d.ilogcal")),
    ("tasks_two_calendars", include_str!("data/tasks_two_calendars.ilogcal")),
];

fn golden(name: &str) -> ExperimentPlan {
    parse_plan(GOLDEN.iter().find(|(n, _)| *n == name).unwrap().1).unwrap()
}

#[test]
fn golden_corpus_parses_and_daily_plan_is_clean() {
    for (name, text) in GOLDEN {
        let checked = check_document(text);
        assert!(!checked.has_errors(), "{name}: {:?}", checked.diagnostics);
    }
    assert_eq!(validate_plan(&golden("daily_wellbeing")), vec![]);
    let diary = validate_plan(&golden("diary_two_phase"));
    assert!(diary.iter().all(|d| d.code == DiagnosticCode::QuestionFrequencyExtension));
    assert_eq!(diary.len(), 2);
}

#[test]
fn golden_details_survive() {
    let tasks = golden("tasks_two_calendars");
    assert_eq!(tasks.calendars.len(), 2);
    assert_eq!(tasks.user, "campus-study");
    let qs: Vec<_> = tasks.questions().map(|(_, _, q)| q).collect();
    assert_eq!(qs[0].protocol(), DiaryOrTask::Task);
    assert_eq!(qs[1].protocol(), DiaryOrTask::TimeDiary);
    assert!(!qs[1].status);
    assert!(qs[0].question.question_content.contains(", then"));
    assert_eq!(qs[2].question.qtype, QType::FreeText);
    assert_eq!(tasks.calendars[0].extensions[0].name, "X-WR-CALNAME");
    let sensors = golden("sensors_48d");
    assert_eq!(sensors.sensors().next().unwrap().2.sensor.description, "Latitude, longitude and accuracy");
}

#[test]
fn minute_rule_over_48_days() {
    let plan = golden("sensors_48d");
    let (_, _, gps) = plan.sensors().next().unwrap();
    assert_eq!(gps.rrule, RecurrenceRule::new(Frequency::Minute, 1, 69120));
    let instants = expand(&gps.rrule, gps.dtstart, gps.dtend).unwrap();
    assert_eq!(instants.len(), 69120);
    assert_eq!(*instants.last().unwrap(), gps.dtend - TimeDelta::from_minutes(1));
}

#[test]
fn two_phase_diary_counts() {
    let plan = golden("diary_two_phase");
    let t = compile(&plan, &[ParticipantProfile::new("p1", "F", "BSc", "Physics", "UTC")]).unwrap();
    let per: Vec<usize> = plan
        .questions()
        .map(|(_, _, q)| expand(&q.rrule, q.dtstart, q.dtend).unwrap().len())
        .collect();
    assert_eq!(per, vec![672, 336]);
    let questions = t.occurrences(&"p1".into()).filter(|o| o.source.kind == CollectionKind::Question).count();
    assert_eq!(questions, 1008);
}

type Mutation = (&'static str, fn(&str) -> Option<String>);

fn replace_first(text: &str, from: &str, to: &str) -> Option<String> {
    text.contains(from).then(|| text.replacen(from, to, 1))
}

fn map_first_line(text: &str, prefix: &str, f: impl Fn(&str) -> String) -> Option<String> {
    let mut done = false;
    let out: Vec<String> = text
        .lines()
        .map(|l| {
            if !done && l.starts_with(prefix) {
                done = true;
                f(l)
            } else {
                l.to_string()
            }
        })
        .collect();
    done.then(|| out.join("\n") + "\n")
}

const MUTATIONS: &[Mutation] = &[
    ("drop first END", |t| map_first_line(t, "END:X-ILOG-", |_| String::new())),
    ("zero count", |t| map_first_line(t, "RRULE:", |l| format!("{};COUNT=0", l.split(";COUNT").next().unwrap()))),
    ("zero interval", |t| map_first_line(t, "RRULE:", |_| "RRULE:FREQ=DAILY;INTERVAL=0;COUNT=3".into())),
    ("unknown frequency", |t| map_first_line(t, "RRULE:", |_| "RRULE:FREQ=FORTNIGHTLY;COUNT=3".into())),
    ("end before start", |t| map_first_line(t, "DTEND:", |_| "DTEND:19991231T000000Z".into())),
    ("date without time", |t| map_first_line(t, "DTSTART:", |_| "DTSTART:2020-11-02".into())),
    ("missing start", |t| map_first_line(t, "DTSTART:", |_| String::new())),
    ("bad category", |t| map_first_line(t, "X-QCATEGORY:", |_| "X-QCATEGORY:WHY".into())),
    ("bad sensor type", |t| map_first_line(t, "X-SENSOR-TYPE:", |_| "X-SENSOR-TYPE:THERMAL".into())),
    ("bad question type", |t| map_first_line(t, "X-QTYPE:", |_| "X-QTYPE:ESSAY".into())),
    ("dichotomous with options", |t| {
        map_first_line(t, "X-QOPTIONS:", |_| "X-QOPTIONS:a,b,c".into()).and_then(|s| replace_first(&s, "X-QTYPE:SINGLE-CHOICE", "X-QTYPE:DICHOTOMOUS").or_else(|| replace_first(&s, "X-QTYPE:MULTIPLE-CHOICE", "X-QTYPE:DICHOTOMOUS")).or_else(|| replace_first(&s, "X-QTYPE:DICHOTOMOUS", "X-QTYPE:DICHOTOMOUS")))
    }),
    ("empty option", |t| map_first_line(t, "X-QOPTIONS:", |l| format!("{l},"))),
    ("repeated uid", |t| map_first_line(t, "BEGIN:X-ILOG-CONTEXT", |l| format!("{l}\nUID:1\nUID:2"))),
    ("duplicate context", |t| {
        let start = t.find("BEGIN:X-ILOG-CONTEXT")?;
        let end = t.find("END:X-ILOG-CONTEXT")? + "END:X-ILOG-CONTEXT\n".len();
        let block = &t[start..end];
        Some(format!("{}{}{}", &t[..end], block, &t[end..]))
    }),
    ("foreign component", |t| map_first_line(t, "BEGIN:X-ILOG-CONTEXT", |l| format!("BEGIN:VEVENT\nEND:VEVENT\n{l}"))),
    ("garbage line", |t| map_first_line(t, "VERSION:", |l| format!("{l}\nTHIS IS NOT A CONTENT LINE"))),
    ("truncated", |t| {
        let lines: Vec<&str> = t.lines().collect();
        Some(lines[..lines.len() * 3 / 5].join("\n"))
    }),
    ("non-numeric id", |t| map_first_line(t, "X-QID:", |_| "X-QID:first".into()).or_else(|| map_first_line(t, "UID:", |_| "UID:first".into()))),
    ("bad escape", |t| map_first_line(t, "X-ILOG-USER:", |_| "X-ILOG-USER:a\\qb".into())),
    ("emptied", |_| Some(String::new())),
    ("count beyond u64", |t| map_first_line(t, "RRULE:", |_| "RRULE:FREQ=DAILY;COUNT=99999999999999999999999".into())),
    ("status word", |t| map_first_line(t, "STATUS:", |_| "STATUS:MAYBE".into())),
];

#[test]
fn every_golden_mutation_is_diagnosed() {
    let mut applied = 0;
    for (name, text) in GOLDEN {
        for (what, mutate) in MUTATIONS {
            let Some(bad) = mutate(text) else { continue };
            applied += 1;
            let checked = check_document(&bad);
            assert!(checked.has_errors(), "{name} / {what}: no error in {:?}", checked.diagnostics);
            assert!(parse_plan(&bad).is_err(), "{name} / {what}");
        }
    }
    assert!(applied >= 70, "{applied}");
}

fn text() -> impl Strategy<Value = String> {
    "[A-Za-z0-9][A-Za-z0-9 ,;:\\\\\n?!/()'-]{0,24}"
}

fn rule() -> impl Strategy<Value = RecurrenceRule> {
    (0usize..8, 1u32..500, 1u64..100_000).prop_map(|(f, i, c)| RecurrenceRule::new(Frequency::ALL[f], i, c))
}

fn window() -> impl Strategy<Value = (Timestamp, Timestamp)> {
    (946_684_800i64..2_208_988_800, 1i64..120 * 86_400).prop_map(|(s, len)| {
        (Timestamp::from_millis(s * 1000), Timestamp::from_millis((s + len) * 1000))
    })
}

fn extensions() -> impl Strategy<Value = Vec<Extension>> {
    vec(("X-EXT-[A-Z]{1,6}", "[A-Za-z0-9 :;,=/-]{0,30}"), 0..2)
        .prop_map(|v| v.into_iter().map(|(name, value)| Extension { name, params: vec![], value }).collect())
}

fn question(cid: u64) -> impl Strategy<Value = QuestionCollection> {
    (window(), rule(), any::<bool>(), 0u64..1000, 0usize..5, 0usize..4, text(), vec(text(), 1..5), proptest::option::of(text()), extensions())
        .prop_map(move |((dtstart, dtend), rrule, status, qid, cat, qt, content, mut options, answer, extensions)| {
            let qtype = [QType::SingleChoice, QType::MultipleChoice, QType::Dichotomous, QType::FreeText][qt];
            match qtype {
                QType::Dichotomous => options = vec!["Yes".into(), "No".into()],
                QType::FreeText => options.clear(),
                _ => {}
            }
            QuestionCollection {
                cid,
                dtstart,
                dtend,
                status,
                rrule,
                question: Question {
                    qid,
                    qcategory: QCategory::ALL[cat],
                    question_content: content,
                    answer_options: options,
                    qtype,
                    answer_content: answer,
                },
                extensions,
            }
        })
}

fn sensor(sid: u64) -> impl Strategy<Value = SensorCollection> {
    (window(), rule(), text(), "[A-Za-z0-9 ,]{0,20}", 0usize..8, extensions()).prop_map(
        move |((dtstart, dtend), rrule, name, description, st, extensions)| SensorCollection {
            sid,
            dtstart,
            dtend,
            rrule,
            sensor: Sensor { name, description, sensor_type: SensorType::ALL[st] },
            extensions,
        },
    )
}

fn context(id: u64) -> impl Strategy<Value = ContextCollection> {
    (btree_set(0u64..50, 0..4), btree_set(0u64..50, 0..3), extensions()).prop_flat_map(move |(qids, sids, extensions)| {
        let qs: Vec<_> = qids.into_iter().map(question).collect();
        let ss: Vec<_> = sids.into_iter().map(sensor).collect();
        (qs, ss).prop_map(move |(question_collections, sensor_collections)| ContextCollection {
            id,
            question_collections,
            sensor_collections,
            extensions: extensions.clone(),
        })
    })
}

fn calendar(calendar_id: u64) -> impl Strategy<Value = Calendar> {
    (btree_set(0u64..20, 0..3), extensions()).prop_flat_map(move |(ids, extensions)| {
        let ctxs: Vec<_> = ids.into_iter().map(context).collect();
        ctxs.prop_map(move |context_collections| Calendar { calendar_id, context_collections, extensions: extensions.clone() })
    })
}

fn plan() -> impl Strategy<Value = ExperimentPlan> {
    (btree_set(0u64..1000, 1..4), "[a-z0-9 ,;\\\\-]{0,16}").prop_flat_map(|(ids, user)| {
        let cals: Vec<_> = ids.into_iter().map(calendar).collect();
        cals.prop_map(move |calendars| ExperimentPlan { user: user.clone(), calendars })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn serialize_then_parse_is_identity(p in plan()) {
        let mut p = p;
        p.calendars.reverse();
        let text = serialize_plan(&p);
        let back = parse_plan(&text);
        p.canonicalize();
        prop_assert_eq!(back.as_ref(), Ok(&p), "{}", text);
        prop_assert_eq!(serialize_plan(&back.unwrap()), text);
        prop_assert!(validate_plan(&p).iter().all(|d| !d.is_error()));
    }
}

// Calendar arithmetic for the oracle, by plain counting.
fn leap(y: i64) -> bool {
    (y % 4 == 0 && y % 100 != 0) || y % 400 == 0
}

fn month_len(y: i64, m: u32) -> u32 {
    [31, if leap(y) { 29 } else { 28 }, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31][m as usize - 1]
}

fn days_of(y: i64, m: u32, d: u32) -> i64 {
    let mut n = 0;
    for yy in 1970..y {
        n += if leap(yy) { 366 } else { 365 };
    }
    for mm in 1..m {
        n += month_len(y, mm) as i64;
    }
    n + d as i64 - 1
}

fn ymd_of(mut n: i64) -> (i64, u32, u32) {
    let mut y = 1970;
    loop {
        let len = if leap(y) { 366 } else { 365 };
        if n < len {
            break;
        }
        n -= len;
        y += 1;
    }
    let mut m = 1;
    while n >= month_len(y, m) as i64 {
        n -= month_len(y, m) as i64;
        m += 1;
    }
    (y, m, n as u32 + 1)
}

fn oracle(freq: Frequency, interval: u32, count: u64, start: i64, end: i64) -> Vec<i64> {
    let day_ms = 86_400_000;
    let (y0, m0, d0) = ymd_of(start.div_euclid(day_ms));
    let tod = start.rem_euclid(day_ms);
    let mut out = Vec::new();
    let mut t = start;
    let mut k = 0u64;
    while t < end && (out.len() as u64) < count {
        out.push(t);
        k += 1;
        t = match freq {
            Frequency::Monthly | Frequency::Yearly => {
                let per = if freq == Frequency::Monthly { 1 } else { 12 };
                let months = (m0 as i64 - 1) + (k * interval as u64 * per) as i64;
                let (y, m) = (y0 + months / 12, (months % 12) as u32 + 1);
                days_of(y, m, d0.min(month_len(y, m))) * day_ms + tod
            }
            f => {
                let unit = match f {
                    Frequency::Millisecond => 1,
                    Frequency::Second => 1000,
                    Frequency::Minute => 60_000,
                    Frequency::Hour => 3_600_000,
                    Frequency::Daily => day_ms,
                    _ => 7 * day_ms,
                };
                let mut next = t;
                for _ in 0..interval {
                    next += unit;
                }
                next
            }
        };
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn expansion_matches_stepping(
        f in 0usize..8,
        interval in 1u32..40,
        count in 1u64..5000,
        start in 946_684_800_000i64..2_208_988_800_000,
        len in 1i64..60 * 86_400_000,
    ) {
        let freq = Frequency::ALL[f];
        let (start, len) = match freq {
            Frequency::Millisecond => (start, len.min(20_000)),
            Frequency::Monthly | Frequency::Yearly => (start - start.rem_euclid(1000), len * 40),
            _ => (start, len),
        };
        let rule = RecurrenceRule::new(freq, interval, count);
        let got = expand(&rule, Timestamp::from_millis(start), Timestamp::from_millis(start + len)).unwrap();
        let want = oracle(freq, interval, count, start, start + len);
        prop_assert_eq!(got.iter().map(|t| t.as_millis()).collect::<Vec<_>>(), want);
    }
}

#[test]
fn month_end_clamping() {
    let jan31 = Timestamp::ymd_hms(2024, 1, 31, 9, 0, 0);
    let got = expand(&RecurrenceRule::new(Frequency::Monthly, 1, 4), jan31, Timestamp::ymd_hms(2025, 1, 1, 0, 0, 0)).unwrap();
    let days: Vec<_> = got.iter().map(|t| t.date().ymd()).collect();
    assert_eq!(days, vec![(2024, 1, 31), (2024, 2, 29), (2024, 3, 31), (2024, 4, 30)]);
    let leap_day = Timestamp::ymd_hms(2024, 2, 29, 0, 0, 0);
    let got = expand(&RecurrenceRule::new(Frequency::Yearly, 1, 5), leap_day, Timestamp::ymd_hms(2030, 1, 1, 0, 0, 0)).unwrap();
    assert_eq!(got[1].date().ymd(), (2025, 2, 28));
    assert_eq!(got[4].date().ymd(), (2028, 2, 29));
}
