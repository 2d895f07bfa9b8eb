//! One-hot encoding of feature vectors with sorted vocabularies and an
//! explicit Unknown column per field.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{row_key, FeatureVector};
use crate::context::ParticipantId;
use crate::time::{DayPeriod, Timestamp};

pub const UNKNOWN: &str = "Unknown";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderOptions {
    /// Use the mood answer as a feature.
    pub include_wi: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelKind {
    /// Answered within 30 minutes of delivery.
    #[default]
    Timeliness,
    /// Answer matched the ground truth; unanswered rows are dropped.
    Correctness,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    /// Sorted known values; the Unknown column follows them.
    pub vocab: Vec<String>,
}

impl Field {
    fn code(&self, value: &str) -> u16 {
        match self.vocab.binary_search_by(|v| v.as_str().cmp(value)) {
            Ok(i) => i as u16,
            Err(_) => self.vocab.len() as u16,
        }
    }

    pub fn cardinality(&self) -> usize {
        self.vocab.len() + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Encoder {
    pub options: EncoderOptions,
    pub fields: Vec<Field>,
}

fn values(f: &FeatureVector, options: &EncoderOptions) -> Vec<String> {
    let mut v = alloc::vec![f.weekday.to_string(), f.day_period.as_str().to_string(), f.we.clone(), f.wa.clone(), f.wo.clone()];
    if options.include_wi {
        v.push(f.wi.clone());
    }
    v.extend([f.gender.clone(), f.degree.clone(), f.department.clone()]);
    v
}

fn field_names(options: &EncoderOptions) -> Vec<&'static str> {
    let mut v = alloc::vec!["weekday", "day_period", "we", "wa", "wo"];
    if options.include_wi {
        v.push("wi");
    }
    v.extend(["gender", "degree", "department"]);
    v
}

impl Encoder {
    /// Vocabularies from the observed values. Weekday and day period always
    /// carry their full ranges.
    pub fn fit(rows: &[FeatureVector], options: EncoderOptions) -> Self {
        let names = field_names(&options);
        let mut seen: Vec<BTreeSet<String>> = alloc::vec![BTreeSet::new(); names.len()];
        for r in rows {
            for (set, v) in seen.iter_mut().zip(values(r, &options)) {
                if v != UNKNOWN {
                    set.insert(v);
                }
            }
        }
        seen[0] = (1..=7).map(|d: u8| d.to_string()).collect();
        seen[1] = DayPeriod::ALL.iter().map(|p| p.as_str().to_string()).collect();
        let fields = names
            .into_iter()
            .zip(seen)
            .map(|(name, vocab)| Field { name: name.into(), vocab: vocab.into_iter().collect() })
            .collect();
        Self { options, fields }
    }

    pub fn encode(&self, f: &FeatureVector) -> Vec<u16> {
        self.fields.iter().zip(values(f, &self.options)).map(|(field, v)| field.code(&v)).collect()
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.fields
            .iter()
            .map(|f| {
                let o = acc;
                acc += f.cardinality();
                o
            })
            .collect()
    }

    pub fn width(&self) -> usize {
        self.fields.iter().map(Field::cardinality).sum()
    }

    /// `field=value` for every one-hot column.
    pub fn column_names(&self) -> Vec<String> {
        self.fields
            .iter()
            .flat_map(|f| f.vocab.iter().map(String::as_str).chain([UNKNOWN]).map(move |v| alloc::format!("{}={v}", f.name)))
            .collect()
    }

    pub fn dataset(&self, rows: &[FeatureVector], label: LabelKind) -> Dataset {
        let mut d = Dataset {
            codes: Vec::new(),
            labels: Vec::new(),
            keys: Vec::new(),
            participants: Vec::new(),
            delivered_at: Vec::new(),
            cardinalities: self.fields.iter().map(Field::cardinality).collect(),
        };
        for r in rows {
            let y = match label {
                LabelKind::Timeliness => r.label,
                LabelKind::Correctness => match r.correct {
                    Some(c) => c,
                    None => continue,
                },
            };
            d.codes.push(self.encode(r));
            d.labels.push(y);
            d.keys.push(row_key(r));
            d.participants.push(r.participant.clone());
            d.delivered_at.push(r.delivered_at);
        }
        d
    }
}

/// Encoded rows. `codes[i][f]` indexes field `f`'s vocabulary, with the last
/// value standing for Unknown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub codes: Vec<Vec<u16>>,
    pub labels: Vec<bool>,
    pub keys: Vec<String>,
    pub participants: Vec<ParticipantId>,
    pub delivered_at: Vec<Timestamp>,
    pub cardinalities: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.cardinalities.iter().sum()
    }

    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.cardinalities
            .iter()
            .map(|c| {
                let o = acc;
                acc += c;
                o
            })
            .collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            codes: idx.iter().map(|&i| self.codes[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            keys: idx.iter().map(|&i| self.keys[i].clone()).collect(),
            participants: idx.iter().map(|&i| self.participants[i].clone()).collect(),
            delivered_at: idx.iter().map(|&i| self.delivered_at[i]).collect(),
            cardinalities: self.cardinalities.clone(),
        }
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y).count()
    }
}

/// Active one-hot columns of an encoded row.
pub(crate) fn active<'a>(codes: &'a [u16], offsets: &'a [usize]) -> impl Iterator<Item = usize> + 'a {
    codes.iter().zip(offsets).map(|(&c, &o)| o + c as usize)
}
