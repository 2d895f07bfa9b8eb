use chrono::{Offset, TimeZone};
use chrono_tz::Tz;
use ilog_core::time::{TimeDelta, TimeError, Timestamp, ZoneDb};

/// The IANA database bundled by chrono-tz.
#[derive(Debug, Clone, Copy, Default)]
pub struct TzDatabase;

impl ZoneDb for TzDatabase {
    fn offset(&self, zone: &str, at: Timestamp) -> Result<TimeDelta, TimeError> {
        let tz: Tz = zone.parse().map_err(|_| TimeError::UnknownZone(zone.into()))?;
        let utc = chrono::DateTime::from_timestamp_millis(at.as_millis()).ok_or(TimeError::OutOfRange)?;
        let secs = tz.offset_from_utc_datetime(&utc.naive_utc()).fix().local_minus_utc();
        Ok(TimeDelta::from_secs(secs as i64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rome_switches_to_summer_time() {
        let db = TzDatabase;
        let winter = Timestamp::ymd_hms(2021, 3, 28, 0, 59, 59);
        let summer = Timestamp::ymd_hms(2021, 3, 28, 1, 0, 0);
        assert_eq!(db.offset("Europe/Rome", winter).unwrap(), TimeDelta::from_hours(1));
        assert_eq!(db.offset("Europe/Rome", summer).unwrap(), TimeDelta::from_hours(2));
        assert_eq!(db.offset("UTC", summer).unwrap(), TimeDelta::ZERO);
        assert!(matches!(db.offset("Mars/Olympus", summer), Err(TimeError::UnknownZone(_))));
    }
}
