//! UTC instants, calendar dates and signed durations at millisecond resolution.
//!
//! Everything in the crate is stored in UTC. Local time only shows up when a
//! [`UtcOffsetSource`] is applied at feature-extraction or display time.

use alloc::string::String;
use core::fmt;
use core::ops::{Add, AddAssign, Neg, Sub};
use core::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

pub const MS_PER_SECOND: i64 = 1_000;
pub const MS_PER_MINUTE: i64 = 60 * MS_PER_SECOND;
pub const MS_PER_HOUR: i64 = 60 * MS_PER_MINUTE;
pub const MS_PER_DAY: i64 = 24 * MS_PER_HOUR;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TimeError {
    #[error("invalid timestamp {0:?}")]
    InvalidTimestamp(String),
    #[error("invalid date {0:?}")]
    InvalidDate(String),
    #[error("timestamp out of range")]
    OutOfRange,
    #[error("unknown time zone {0:?}")]
    UnknownZone(String),
}

/// Days since 1970-01-01 for a proleptic Gregorian date.
pub fn days_from_civil(year: i64, month: u32, day: u32) -> i64 {
    let y = if month <= 2 { year - 1 } else { year };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let m = month as i64;
    let doy = (153 * (if m > 2 { m - 3 } else { m + 9 }) + 2) / 5 + day as i64 - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

/// Inverse of [`days_from_civil`].
pub fn civil_from_days(days: i64) -> (i64, u32, u32) {
    let z = days + 719_468;
    let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    (if m <= 2 { y + 1 } else { y }, m, d)
}

pub fn is_leap_year(year: i64) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

pub fn days_in_month(year: i64, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap_year(year) => 29,
        2 => 28,
        _ => 0,
    }
}

/// A calendar day (UTC unless stated otherwise).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Date {
    days: i64,
}

impl Date {
    pub fn from_ymd(year: i64, month: u32, day: u32) -> Option<Self> {
        if !(1..=12).contains(&month) || day == 0 || day > days_in_month(year, month) {
            return None;
        }
        Some(Self { days: days_from_civil(year, month, day) })
    }

    pub fn from_days(days: i64) -> Self {
        Self { days }
    }

    pub fn days_since_epoch(self) -> i64 {
        self.days
    }

    pub fn ymd(self) -> (i64, u32, u32) {
        civil_from_days(self.days)
    }

    /// ISO weekday, 1 = Monday … 7 = Sunday.
    pub fn weekday(self) -> u8 {
        // 1970-01-01 was a Thursday.
        ((self.days + 3).rem_euclid(7) + 1) as u8
    }

    pub fn succ(self) -> Self {
        Self { days: self.days + 1 }
    }

    pub fn start(self) -> Timestamp {
        Timestamp(self.days * MS_PER_DAY)
    }

    pub fn end(self) -> Timestamp {
        self.succ().start()
    }
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (y, m, d) = self.ymd();
        write!(f, "{y:04}-{m:02}-{d:02}")
    }
}

impl FromStr for Date {
    type Err = TimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || TimeError::InvalidDate(s.into());
        let b = s.as_bytes();
        if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
            return Err(err());
        }
        let y = digits(&s[0..4]).ok_or_else(err)?;
        let m = digits(&s[5..7]).ok_or_else(err)?;
        let d = digits(&s[8..10]).ok_or_else(err)?;
        Date::from_ymd(y, m as u32, d as u32).ok_or_else(err)
    }
}

impl Serialize for Date {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Date {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = <alloc::borrow::Cow<'de, str>>::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

fn digits(s: &str) -> Option<i64> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// Signed span of time in milliseconds.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TimeDelta(i64);

impl TimeDelta {
    pub const ZERO: TimeDelta = TimeDelta(0);

    pub const fn from_millis(ms: i64) -> Self {
        Self(ms)
    }
    pub const fn from_secs(s: i64) -> Self {
        Self(s * MS_PER_SECOND)
    }
    pub const fn from_minutes(m: i64) -> Self {
        Self(m * MS_PER_MINUTE)
    }
    pub const fn from_hours(h: i64) -> Self {
        Self(h * MS_PER_HOUR)
    }
    pub const fn from_days(d: i64) -> Self {
        Self(d * MS_PER_DAY)
    }
    pub const fn as_millis(self) -> i64 {
        self.0
    }
    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }
    pub fn abs(self) -> Self {
        Self(self.0.abs())
    }
    pub fn is_negative(self) -> bool {
        self.0 < 0
    }
}

impl Neg for TimeDelta {
    type Output = TimeDelta;
    fn neg(self) -> Self {
        TimeDelta(-self.0)
    }
}

impl Add for TimeDelta {
    type Output = TimeDelta;
    fn add(self, rhs: Self) -> Self {
        TimeDelta(self.0 + rhs.0)
    }
}

impl Sub for TimeDelta {
    type Output = TimeDelta;
    fn sub(self, rhs: Self) -> Self {
        TimeDelta(self.0 - rhs.0)
    }
}

impl fmt::Display for TimeDelta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % MS_PER_SECOND == 0 {
            write!(f, "{}s", self.0 / MS_PER_SECOND)
        } else {
            write!(f, "{}ms", self.0)
        }
    }
}

/// Broken-down UTC date-time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Civil {
    pub year: i64,
    pub month: u32,
    pub day: u32,
    pub hour: u32,
    pub minute: u32,
    pub second: u32,
    pub millis: u32,
}

/// A UTC instant, milliseconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(i64);

impl Timestamp {
    pub const fn from_millis(ms: i64) -> Self {
        Self(ms)
    }

    pub const fn as_millis(self) -> i64 {
        self.0
    }

    pub fn from_civil(c: Civil) -> Option<Self> {
        let date = Date::from_ymd(c.year, c.month, c.day)?;
        if c.hour > 23 || c.minute > 59 || c.second > 59 || c.millis > 999 {
            return None;
        }
        Some(Self(
            date.days * MS_PER_DAY
                + c.hour as i64 * MS_PER_HOUR
                + c.minute as i64 * MS_PER_MINUTE
                + c.second as i64 * MS_PER_SECOND
                + c.millis as i64,
        ))
    }

    /// Convenience constructor for whole-second instants; panics on invalid fields.
    pub fn ymd_hms(year: i64, month: u32, day: u32, hour: u32, minute: u32, second: u32) -> Self {
        Self::from_civil(Civil { year, month, day, hour, minute, second, millis: 0 })
            .expect("valid civil date-time")
    }

    pub fn civil(self) -> Civil {
        let days = self.0.div_euclid(MS_PER_DAY);
        let rem = self.0.rem_euclid(MS_PER_DAY);
        let (year, month, day) = civil_from_days(days);
        Civil {
            year,
            month,
            day,
            hour: (rem / MS_PER_HOUR) as u32,
            minute: (rem % MS_PER_HOUR / MS_PER_MINUTE) as u32,
            second: (rem % MS_PER_MINUTE / MS_PER_SECOND) as u32,
            millis: (rem % MS_PER_SECOND) as u32,
        }
    }

    pub fn date(self) -> Date {
        Date::from_days(self.0.div_euclid(MS_PER_DAY))
    }

    /// Milliseconds elapsed since UTC midnight.
    pub fn time_of_day(self) -> i64 {
        self.0.rem_euclid(MS_PER_DAY)
    }

    pub fn checked_add(self, d: TimeDelta) -> Option<Self> {
        self.0.checked_add(d.0).map(Self)
    }

    /// Adds calendar months, clamping the day of month to the target month's length.
    pub fn add_months_clamped(self, months: i64) -> Option<Self> {
        let c = self.civil();
        let total = c.year.checked_mul(12)?.checked_add(c.month as i64 - 1)?.checked_add(months)?;
        let year = total.div_euclid(12);
        let month = (total.rem_euclid(12) + 1) as u32;
        let day = c.day.min(days_in_month(year, month));
        Self::from_civil(Civil { year, month, day, ..c })
    }

    /// `YYYYMMDDTHHMMSSZ`
    pub fn to_ical(self) -> String {
        let c = self.civil();
        alloc::format!(
            "{:04}{:02}{:02}T{:02}{:02}{:02}Z",
            c.year, c.month, c.day, c.hour, c.minute, c.second
        )
    }

    pub fn parse_ical(s: &str) -> Result<Self, TimeError> {
        let err = || TimeError::InvalidTimestamp(s.into());
        let b = s.as_bytes();
        if b.len() != 16 || b[8] != b'T' || b[15] != b'Z' {
            return Err(err());
        }
        let n = |r: core::ops::Range<usize>| digits(&s[r]).ok_or_else(err);
        let civil = Civil {
            year: n(0..4)?,
            month: n(4..6)? as u32,
            day: n(6..8)? as u32,
            hour: n(9..11)? as u32,
            minute: n(11..13)? as u32,
            second: n(13..15)? as u32,
            millis: 0,
        };
        Self::from_civil(civil).ok_or_else(err)
    }

    /// ISO-8601 UTC: `YYYY-MM-DDTHH:MM:SSZ` with optional `.sss` fraction.
    pub fn parse_iso(s: &str) -> Result<Self, TimeError> {
        let err = || TimeError::InvalidTimestamp(s.into());
        let b = s.as_bytes();
        if b.len() < 20 || b[4] != b'-' || b[7] != b'-' || b[10] != b'T' || b[13] != b':' {
            return Err(err());
        }
        if b[16] != b':' || *b.last().unwrap() != b'Z' {
            return Err(err());
        }
        let n = |r: core::ops::Range<usize>| digits(&s[r]).ok_or_else(err);
        let millis = match &s[19..s.len() - 1] {
            "" => 0,
            frac if frac.len() == 4 && frac.starts_with('.') => n(20..23)? as u32,
            _ => return Err(err()),
        };
        let civil = Civil {
            year: n(0..4)?,
            month: n(5..7)? as u32,
            day: n(8..10)? as u32,
            hour: n(11..13)? as u32,
            minute: n(14..16)? as u32,
            second: n(17..19)? as u32,
            millis,
        };
        Self::from_civil(civil).ok_or_else(err)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.civil();
        write!(
            f,
            "{:04}-{:02}-{:02}T{:02}:{:02}:{:02}",
            c.year, c.month, c.day, c.hour, c.minute, c.second
        )?;
        if c.millis != 0 {
            write!(f, ".{:03}", c.millis)?;
        }
        f.write_str("Z")
    }
}

impl FromStr for Timestamp {
    type Err = TimeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.contains('-') {
            Self::parse_iso(s)
        } else {
            Self::parse_ical(s)
        }
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = <alloc::borrow::Cow<'de, str>>::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

impl Add<TimeDelta> for Timestamp {
    type Output = Timestamp;
    fn add(self, rhs: TimeDelta) -> Self {
        Timestamp(self.0 + rhs.0)
    }
}

impl AddAssign<TimeDelta> for Timestamp {
    fn add_assign(&mut self, rhs: TimeDelta) {
        self.0 += rhs.0;
    }
}

impl Sub<TimeDelta> for Timestamp {
    type Output = Timestamp;
    fn sub(self, rhs: TimeDelta) -> Self {
        Timestamp(self.0 - rhs.0)
    }
}

impl Sub for Timestamp {
    type Output = TimeDelta;
    fn sub(self, rhs: Self) -> TimeDelta {
        TimeDelta(self.0 - rhs.0)
    }
}

/// Maps a UTC instant to the offset of some local clock at that instant.
pub trait UtcOffsetSource {
    fn offset_at(&self, at: Timestamp) -> TimeDelta;

    fn to_local(&self, at: Timestamp) -> Timestamp {
        at + self.offset_at(at)
    }
}

/// Fixed offset from UTC; `FixedOffset::UTC` is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedOffset(pub TimeDelta);

impl FixedOffset {
    pub const UTC: FixedOffset = FixedOffset(TimeDelta::ZERO);
}

impl UtcOffsetSource for FixedOffset {
    fn offset_at(&self, _at: Timestamp) -> TimeDelta {
        self.0
    }
}

/// Resolves IANA zone names to UTC offsets.
pub trait ZoneDb {
    fn offset(&self, zone: &str, at: Timestamp) -> Result<TimeDelta, TimeError>;

    fn to_local(&self, zone: &str, at: Timestamp) -> Result<Timestamp, TimeError> {
        Ok(at + self.offset(zone, at)?)
    }
}

/// Knows only UTC and its aliases. The std companion crate provides the full database.
#[derive(Debug, Clone, Copy, Default)]
pub struct UtcOnly;

impl ZoneDb for UtcOnly {
    fn offset(&self, zone: &str, _at: Timestamp) -> Result<TimeDelta, TimeError> {
        match zone {
            "UTC" | "Etc/UTC" | "Z" | "GMT" | "Etc/GMT" => Ok(TimeDelta::ZERO),
            other => Err(TimeError::UnknownZone(other.into())),
        }
    }
}

/// Four six-hour bands of the local day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DayPeriod {
    /// 06:00 to 11:59
    Morning,
    /// 12:00 to 17:59
    Afternoon,
    /// 18:00 to 23:59
    Evening,
    /// 00:00 to 05:59
    Night,
}

impl DayPeriod {
    pub const ALL: [DayPeriod; 4] = [DayPeriod::Morning, DayPeriod::Afternoon, DayPeriod::Evening, DayPeriod::Night];

    pub fn from_hour(hour: u32) -> Self {
        match hour {
            6..=11 => DayPeriod::Morning,
            12..=17 => DayPeriod::Afternoon,
            18..=23 => DayPeriod::Evening,
            _ => DayPeriod::Night,
        }
    }

    /// Period of a local wall-clock instant.
    pub fn of(local: Timestamp) -> Self {
        Self::from_hour((local.time_of_day() / MS_PER_HOUR) as u32)
    }

    /// First local hour of the band.
    pub fn start_hour(self) -> u32 {
        match self {
            DayPeriod::Morning => 6,
            DayPeriod::Afternoon => 12,
            DayPeriod::Evening => 18,
            DayPeriod::Night => 0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DayPeriod::Morning => "Morning",
            DayPeriod::Afternoon => "Afternoon",
            DayPeriod::Evening => "Evening",
            DayPeriod::Night => "Night",
        }
    }
}

impl fmt::Display for DayPeriod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DayPeriod {
    type Err = TimeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DayPeriod::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| TimeError::InvalidTimestamp(s.into()))
    }
}
