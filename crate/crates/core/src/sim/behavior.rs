//! Context-dependent answering behaviour.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution as _, LogNormal};
use serde::{Deserialize, Serialize};

use crate::time::{DayPeriod, TimeDelta};

/// A duration distribution in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    /// `exp(N(mu, sigma))` seconds; `sigma > 0`.
    LogNormal { mu: f64, sigma: f64 },
    /// Always this many seconds.
    Fixed(f64),
}

impl Distribution {
    pub fn check(&self) -> Result<(), &'static str> {
        match *self {
            Distribution::LogNormal { mu, sigma } if mu.is_finite() && sigma.is_finite() && sigma > 0.0 => Ok(()),
            Distribution::LogNormal { .. } => Err("log-normal needs finite mu and sigma > 0"),
            Distribution::Fixed(s) if s.is_finite() && s >= 0.0 => Ok(()),
            Distribution::Fixed(_) => Err("fixed duration must be finite and non-negative"),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TimeDelta {
        let secs = match *self {
            Distribution::LogNormal { mu, sigma } => LogNormal::new(mu, sigma).expect("checked parameters").sample(rng),
            Distribution::Fixed(s) => s,
        };
        TimeDelta::from_millis(libm::round(secs * 1000.0).min(i64::MAX as f64) as i64)
    }

    /// Median in seconds.
    pub fn median(&self) -> f64 {
        match *self {
            Distribution::LogNormal { mu, .. } => libm::exp(mu),
            Distribution::Fixed(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub p_answer: f64,
    pub reaction: Distribution,
    pub completion: Distribution,
    pub p_correct: f64,
}

impl CellParams {
    pub fn check(&self) -> Result<(), &'static str> {
        for p in [self.p_answer, self.p_correct] {
            if !(0.0..=1.0).contains(&p) {
                return Err("probabilities must lie in [0, 1]");
            }
        }
        self.reaction.check()?;
        self.completion.check()
    }
}

impl Default for CellParams {
    /// Median reaction about four minutes, median completion about twenty seconds.
    fn default() -> Self {
        Self {
            p_answer: 0.8,
            reaction: Distribution::LogNormal { mu: 5.5, sigma: 1.0 },
            completion: Distribution::LogNormal { mu: 3.0, sigma: 0.5 },
            p_correct: 0.9,
        }
    }
}

/// Which situations a cell applies to; `None` fields match anything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellSelector {
    #[serde(default)]
    pub spatial: Option<String>,
    #[serde(default)]
    pub social: Option<String>,
    /// 1 = Monday … 7 = Sunday.
    #[serde(default)]
    pub weekday: Option<u8>,
    #[serde(default)]
    pub day_period: Option<DayPeriod>,
}

/// The situation a question is delivered in.
#[derive(Debug, Clone, Copy)]
pub struct Situation<'a> {
    pub spatial: Option<&'a str>,
    pub social: Option<&'a str>,
    pub weekday: u8,
    pub day_period: DayPeriod,
}

impl CellSelector {
    pub fn spatial(place: impl Into<String>) -> Self {
        Self { spatial: Some(place.into()), ..Self::default() }
    }

    pub fn social(who: impl Into<String>) -> Self {
        Self { social: Some(who.into()), ..Self::default() }
    }

    pub fn weekday(day: u8) -> Self {
        Self { weekday: Some(day), ..Self::default() }
    }

    pub fn day_period(period: DayPeriod) -> Self {
        Self { day_period: Some(period), ..Self::default() }
    }

    /// Number of constrained fields if all of them match.
    fn specificity(&self, s: &Situation<'_>) -> Option<u8> {
        fn label(want: &Option<String>, got: Option<&str>) -> Option<u8> {
            match want {
                None => Some(0),
                Some(w) if got.is_some_and(|g| g.eq_ignore_ascii_case(w)) => Some(1),
                Some(_) => None,
            }
        }
        fn exact<T: PartialEq>(want: &Option<T>, got: T) -> Option<u8> {
            match want {
                None => Some(0),
                Some(w) if *w == got => Some(1),
                Some(_) => None,
            }
        }
        Some(
            label(&self.spatial, s.spatial)?
                + label(&self.social, s.social)?
                + exact(&self.weekday, s.weekday)?
                + exact(&self.day_period, s.day_period)?,
        )
    }
}

/// Per-situation answering parameters plus the seed that drives every draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorModel {
    pub default: CellParams,
    #[serde(default)]
    pub cells: Vec<(CellSelector, CellParams)>,
    pub seed: u64,
}

/// High-quality answer share per place, used as `p_correct` by [`BehaviorModel::reference`].
pub const REFERENCE_PLACES: [(&str, f64); 9] = [
    ("Home Apartment/room", 0.4530),
    ("Home Relatives", 0.4147),
    ("House Friends/others", 0.2976),
    ("University Classroom/library", 0.5202),
    ("University Canteen", 0.4000),
    ("Restaurant/pub", 0.2887),
    ("In the street", 0.3958),
    ("Another indoor place", 0.2693),
    ("Another outdoor place", 0.2868),
];

/// High-quality answer share per weekday, Monday first.
pub const REFERENCE_WEEKDAYS: [f64; 7] = [0.4694, 0.4383, 0.4319, 0.4052, 0.3931, 0.4446, 0.4202];

/// High-quality answer share per social context.
pub const REFERENCE_SOCIAL: [(&str, f64); 7] = [
    ("Alone", 0.4566),
    ("Partner", 0.3550),
    ("Roommates", 0.4306),
    ("Classmates", 0.3782),
    ("Relatives", 0.4521),
    ("Friends", 0.2890),
    ("Colleagues/other", 0.2942),
];

impl BehaviorModel {
    pub fn uniform(params: CellParams, seed: u64) -> Self {
        Self { default: params, cells: Vec::new(), seed }
    }

    /// One spatial cell per reference place with `p_correct` set to that
    /// place's high-quality share; everything else from `base`.
    pub fn reference(base: CellParams, seed: u64) -> Self {
        let cells = REFERENCE_PLACES
            .iter()
            .map(|&(place, p)| (CellSelector::spatial(place), CellParams { p_correct: p, ..base.clone() }))
            .collect();
        Self { default: base, cells, seed }
    }

    pub fn with_cell(mut self, selector: CellSelector, params: CellParams) -> Self {
        self.cells.push((selector, params));
        self
    }

    pub fn check(&self) -> Result<(), &'static str> {
        self.default.check()?;
        for (sel, p) in &self.cells {
            if sel.weekday.is_some_and(|d| !(1..=7).contains(&d)) {
                return Err("weekday selector must be 1..=7");
            }
            p.check()?;
        }
        Ok(())
    }

    /// The most specific matching cell; earlier cells win ties.
    pub fn select(&self, s: &Situation<'_>) -> &CellParams {
        let mut best: Option<(u8, &CellParams)> = None;
        for (sel, params) in &self.cells {
            if let Some(score) = sel.specificity(s) {
                if best.is_none_or(|(b, _)| score > b) {
                    best = Some((score, params));
                }
            }
        }
        best.map(|(_, p)| p).unwrap_or(&self.default)
    }
}
