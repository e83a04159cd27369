use chrono::{DateTime, Datelike, Offset, TimeZone, Timelike, Utc};
use chrono_tz::{OffsetComponents, Tz};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version of the IANA database compiled into this build.
pub const TZDB_VERSION: &str = chrono_tz::IANA_TZDB_VERSION;

/// Civil local time of one instant in a named zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalTime {
    pub year: i32,
    pub month: u8,
    pub day: u8,
    pub hour: u8,
    pub minute: u8,
    pub second: u8,
    pub utc_offset_minutes: i32,
    pub is_dst: bool,
}

impl LocalTime {
    /// Hours since local midnight, including minutes and seconds.
    pub fn decimal_hour(&self) -> f64 {
        f64::from(self.hour) + f64::from(self.minute) / 60.0 + f64::from(self.second) / 3600.0
    }

    /// The UTC instant this local time denotes (local wall clock minus offset).
    pub fn to_utc_seconds(&self) -> i64 {
        let days = days_from_civil(self.year, u32::from(self.month), u32::from(self.day));
        let wall = days * 86_400
            + i64::from(self.hour) * 3600
            + i64::from(self.minute) * 60
            + i64::from(self.second);
        wall - i64::from(self.utc_offset_minutes) * 60
    }
}

// Days since 1970-01-01 for a proleptic Gregorian date.
fn days_from_civil(y: i32, m: u32, d: u32) -> i64 {
    let y = i64::from(y) - i64::from(m <= 2);
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let m = i64::from(m);
    let doy = (153 * (if m > 2 { m - 3 } else { m + 9 }) + 2) / 5 + i64::from(d) - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

pub fn parse_tz(tzid: &str) -> Result<Tz> {
    tzid.parse::<Tz>()
        .map_err(|_| Error::UnknownTimeZone(tzid.to_owned()))
}

/// Converts epoch seconds to local civil time in `tzid`, with the historical
/// offset and DST flag in force at that instant.
pub fn to_local_time(created_utc: i64, tzid: &str) -> Result<LocalTime> {
    let tz = parse_tz(tzid)?;
    let utc: DateTime<Utc> = DateTime::from_timestamp(created_utc, 0)
        .ok_or_else(|| Error::InvalidArgument(format!("timestamp {created_utc} out of range")))?;
    let local = utc.with_timezone(&tz);
    let offset = local.offset();
    let lt = LocalTime {
        year: local.year(),
        month: local.month() as u8,
        day: local.day() as u8,
        hour: local.hour() as u8,
        minute: local.minute() as u8,
        second: local.second() as u8,
        utc_offset_minutes: offset.fix().local_minus_utc() / 60,
        is_dst: !offset.dst_offset().is_zero(),
    };
    if lt.to_utc_seconds() != created_utc {
        return Err(Error::Degenerate(format!(
            "local time for {created_utc} in {tzid} does not round-trip"
        )));
    }
    Ok(lt)
}

/// UTC offset in minutes in force at `utc_seconds`.
pub(crate) fn offset_minutes_at(tz: &Tz, utc_seconds: i64) -> i32 {
    let utc = DateTime::from_timestamp(utc_seconds, 0).unwrap_or_default();
    tz.offset_from_utc_datetime(&utc.naive_utc()).fix().local_minus_utc() / 60
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn new_york_summer() {
        // 2024-07-01T12:00:00Z
        let lt = to_local_time(1_719_835_200, "America/New_York").unwrap();
        assert_eq!((lt.hour, lt.minute), (8, 0));
        assert_eq!(lt.utc_offset_minutes, -240);
        assert!(lt.is_dst);
    }

    #[test]
    fn spring_forward_gap() {
        // 2024-03-10T06:59Z and 07:59Z
        let before = to_local_time(1_710_053_940, "America/New_York").unwrap();
        let after = to_local_time(1_710_057_540, "America/New_York").unwrap();
        assert_eq!((before.hour, before.minute, before.is_dst), (1, 59, false));
        assert_eq!(before.utc_offset_minutes, -300);
        assert_eq!((after.hour, after.minute, after.is_dst), (3, 59, true));
        assert_eq!(after.utc_offset_minutes, -240);
    }

    #[test]
    fn utc_identity() {
        let lt = to_local_time(1_721_086_200, "Etc/UTC").unwrap();
        assert_eq!((lt.year, lt.month, lt.day, lt.hour, lt.minute), (2024, 7, 15, 23, 30));
        assert_eq!(lt.utc_offset_minutes, 0);
        assert!(!lt.is_dst);
    }

    #[test]
    fn unknown_zone() {
        assert!(matches!(
            to_local_time(1, "Mars/Olympus_Mons"),
            Err(Error::UnknownTimeZone(_))
        ));
    }

    #[test]
    fn half_hour_zone() {
        // Asia/Kolkata is UTC+05:30 with no DST.
        let lt = to_local_time(1_719_835_200, "Asia/Kolkata").unwrap();
        assert_eq!((lt.hour, lt.minute), (17, 30));
        assert_eq!(lt.utc_offset_minutes, 330);
        assert!(!lt.is_dst);
    }

    #[test]
    fn tzdb_version_is_recorded() {
        assert!(TZDB_VERSION.starts_with("20"));
    }

    proptest! {
        #[test]
        fn round_trip(t in 1i64..4_000_000_000, z in prop::sample::select(vec![
            "America/New_York", "Europe/London", "Asia/Kolkata", "America/St_Johns",
            "Australia/Lord_Howe", "Pacific/Chatham", "Etc/UTC", "America/Los_Angeles"])) {
            let lt = to_local_time(t, z).unwrap();
            prop_assert_eq!(lt.to_utc_seconds(), t);
            prop_assert!(lt.hour < 24 && (1..=12).contains(&lt.month));
        }
    }
}
