//! Location attribution, DST-aware local time and monthly sunrise/sunset.

mod localtime;
mod profile;
mod solar;
mod tables;

pub use localtime::{parse_tz, to_local_time, LocalTime, TZDB_VERSION};
pub use profile::{monthly_solar_profile, weighted_mean_sd, MonthlySolar, SiteMonthCount, SolarProfile};
pub use solar::{solar_times, sun_events_utc, SolarTimes, SunEvent, SUNRISE_ZENITH_DEG};
pub use tables::{resolve_location, AttributionLevel, CityEntry, GeoTables, LocationAssignment};
