//! Sunrise and sunset from the NOAA low-accuracy solar position equations
//! (Meeus-derived, roughly one-minute accuracy away from the poles).

use serde::{Deserialize, Serialize};

use super::localtime::{offset_minutes_at, parse_tz};
use crate::error::{Error, Result};

/// Zenith of the sun's centre at apparent sunrise/sunset: 90° plus 50′ for
/// refraction and the solar semi-diameter.
pub const SUNRISE_ZENITH_DEG: f64 = 90.833;

/// Day of month used as the monthly representative.
const REFERENCE_DAY: u32 = 15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SunEvent {
    /// Clock time in decimal hours.
    At(f64),
    /// The sun stays above the horizon all day.
    PolarDay,
    /// The sun stays below the horizon all day.
    PolarNight,
}

impl SunEvent {
    pub fn hours(self) -> Option<f64> {
        match self {
            SunEvent::At(h) => Some(h),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolarTimes {
    pub year: i32,
    pub month: u32,
    pub day: u32,
    /// Local civil time (DST-aware).
    pub sunrise: SunEvent,
    pub sunset: SunEvent,
    /// Sunset minus sunrise measured on the UTC time line.
    pub daylight_hours: Option<f64>,
}

fn julian_day(year: i32, month: u32, day: u32) -> f64 {
    let (y, m) = if month <= 2 {
        (f64::from(year) - 1.0, f64::from(month) + 12.0)
    } else {
        (f64::from(year), f64::from(month))
    };
    let a = (y / 100.0).floor();
    let b = 2.0 - a + (a / 4.0).floor();
    (365.25 * (y + 4716.0)).floor() + (30.6001 * (m + 1.0)).floor() + f64::from(day) + b - 1524.5
}

fn julian_century(jd: f64) -> f64 {
    (jd - 2_451_545.0) / 36_525.0
}

/// Declination (degrees) and equation of time (minutes) at Julian century `t`.
fn declination_and_eot(t: f64) -> (f64, f64) {
    let l0 = (280.46646 + t * (36000.76983 + t * 0.0003032)).rem_euclid(360.0);
    let m = 357.52911 + t * (35999.05029 - 0.0001537 * t);
    let e = 0.016708634 - t * (0.000042037 + 0.0000001267 * t);
    let mr = m.to_radians();
    let center = mr.sin() * (1.914602 - t * (0.004817 + 0.000014 * t))
        + (2.0 * mr).sin() * (0.019993 - 0.000101 * t)
        + (3.0 * mr).sin() * 0.000289;
    let true_long = l0 + center;
    let omega = 125.04 - 1934.136 * t;
    let app_long = true_long - 0.00569 - 0.00478 * omega.to_radians().sin();
    let seconds = 21.448 - t * (46.8150 + t * (0.00059 - t * 0.001813));
    let mean_obliq = 23.0 + (26.0 + seconds / 60.0) / 60.0;
    let obliq = mean_obliq + 0.00256 * omega.to_radians().cos();

    let decl = (obliq.to_radians().sin() * app_long.to_radians().sin())
        .asin()
        .to_degrees();

    let y = (obliq.to_radians() / 2.0).tan().powi(2);
    let l0r = l0.to_radians();
    let eot = y * (2.0 * l0r).sin() - 2.0 * e * mr.sin()
        + 4.0 * e * y * mr.sin() * (2.0 * l0r).cos()
        - 0.5 * y * y * (4.0 * l0r).sin()
        - 1.25 * e * e * (2.0 * mr).sin();
    (decl, 4.0 * eot.to_degrees())
}

enum HourAngle {
    Degrees(f64),
    AlwaysUp,
    AlwaysDown,
}

fn sunrise_hour_angle(lat: f64, decl: f64) -> HourAngle {
    let (lat, decl) = (lat.to_radians(), decl.to_radians());
    let arg = SUNRISE_ZENITH_DEG.to_radians().cos() / (lat.cos() * decl.cos())
        - lat.tan() * decl.tan();
    if arg > 1.0 {
        HourAngle::AlwaysDown
    } else if arg < -1.0 || !arg.is_finite() && lat * decl > 0.0 {
        HourAngle::AlwaysUp
    } else if !arg.is_finite() {
        HourAngle::AlwaysDown
    } else {
        HourAngle::Degrees(arg.acos().to_degrees())
    }
}

/// Sunrise and sunset in minutes after 00:00 UTC of the given date
/// (values may fall outside 0..1440 for far-from-Greenwich longitudes).
/// Longitude is positive east.
pub fn sun_events_utc(lat: f64, lon: f64, year: i32, month: u32, day: u32) -> (SunEvent, SunEvent) {
    let jd0 = julian_day(year, month, day);
    let noon_guess = 720.0 - 4.0 * lon;
    let (decl, _) = declination_and_eot(julian_century(jd0 + noon_guess / 1440.0));
    match sunrise_hour_angle(lat, decl) {
        HourAngle::AlwaysUp => return (SunEvent::PolarDay, SunEvent::PolarDay),
        HourAngle::AlwaysDown => return (SunEvent::PolarNight, SunEvent::PolarNight),
        HourAngle::Degrees(_) => {}
    }
    let event = |sign: f64| {
        let mut minutes = noon_guess;
        for _ in 0..3 {
            let (decl, eot) = declination_and_eot(julian_century(jd0 + minutes / 1440.0));
            match sunrise_hour_angle(lat, decl) {
                HourAngle::Degrees(ha) => minutes = 720.0 - 4.0 * (lon + sign * ha) - eot,
                _ => break,
            }
        }
        SunEvent::At(minutes)
    };
    (event(1.0), event(-1.0))
}

/// Sunrise and sunset on the 15th of `month`, in local civil time of `tzid`.
pub fn solar_times(lat: f64, lon: f64, tzid: &str, year: i32, month: u32) -> Result<SolarTimes> {
    if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
        return Err(Error::InvalidArgument(format!(
            "coordinates ({lat}, {lon}) out of range"
        )));
    }
    if !(1..=12).contains(&month) {
        return Err(Error::InvalidArgument(format!("month {month} out of range")));
    }
    let tz = parse_tz(tzid)?;
    let day = REFERENCE_DAY;
    let (rise, set) = sun_events_utc(lat, lon, year, month, day);
    let midnight_utc = (julian_day(year, month, day) - 2_440_587.5) * 86_400.0;
    let to_local = |ev: SunEvent| match ev {
        SunEvent::At(utc_min) => {
            let instant = (midnight_utc + utc_min * 60.0).round() as i64;
            let offset = f64::from(offset_minutes_at(&tz, instant));
            SunEvent::At(((utc_min + offset) / 60.0).rem_euclid(24.0))
        }
        other => other,
    };
    let daylight_hours = match (rise, set) {
        (SunEvent::At(r), SunEvent::At(s)) => Some((s - r) / 60.0),
        _ => None,
    };
    Ok(SolarTimes {
        year,
        month,
        day,
        sunrise: to_local(rise),
        sunset: to_local(set),
        daylight_hours,
    })
}
