use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::localtime::parse_tz;
use crate::error::{Error, Result};
use crate::ingest::SubmissionRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityEntry {
    pub city: String,
    pub country: String,
    pub lat: f64,
    pub lon: f64,
    pub tzid: String,
}

/// Lookup tables for URL- and community-based location attribution.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeoTables {
    /// Keys include the leading dot, e.g. `".uk"`.
    pub tld_to_country: BTreeMap<String, String>,
    pub domain_to_country: BTreeMap<String, String>,
    /// Keys are lowercase community names.
    pub subreddit_to_city: BTreeMap<String, CityEntry>,
    pub country_to_default_tz: BTreeMap<String, String>,
}

impl GeoTables {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let tables: GeoTables = serde_json::from_str(&text)?;
        tables.validate()?;
        Ok(tables)
    }

    pub fn validate(&self) -> Result<()> {
        for (key, c) in &self.subreddit_to_city {
            parse_tz(&c.tzid)?;
            if !(-90.0..=90.0).contains(&c.lat) || !(-180.0..=180.0).contains(&c.lon) {
                return Err(Error::InvalidArgument(format!(
                    "city entry `{key}` has coordinates out of range"
                )));
            }
        }
        for tz in self.country_to_default_tz.values() {
            parse_tz(tz)?;
        }
        Ok(())
    }

    fn country_tz(&self, country: &str) -> Option<String> {
        self.country_to_default_tz.get(country).cloned()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributionLevel {
    RecordFields,
    Domain,
    Tld,
    Subreddit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationAssignment {
    pub country: String,
    pub city: String,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub tzid: Option<String>,
    pub source: AttributionLevel,
    /// The zone came from the country default rather than a city; such
    /// records are ambiguous in multi-zone countries.
    pub tz_from_country_default: bool,
}

fn country_level(tables: &GeoTables, country: &str, source: AttributionLevel) -> LocationAssignment {
    let tzid = tables.country_tz(country);
    LocationAssignment {
        country: country.to_owned(),
        city: String::new(),
        lat: None,
        lon: None,
        tz_from_country_default: tzid.is_some(),
        tzid,
        source,
    }
}

/// Attributes a record to a location. Precedence: explicit record fields,
/// exact domain, longest matching TLD suffix, then community name.
pub fn resolve_location(record: &SubmissionRecord, tables: &GeoTables) -> Option<LocationAssignment> {
    if !record.country.is_empty() || !record.tzid.is_empty() {
        let (tzid, from_default) = if !record.tzid.is_empty() {
            (Some(record.tzid.clone()), false)
        } else {
            let tz = tables.country_tz(&record.country);
            let d = tz.is_some();
            (tz, d)
        };
        return Some(LocationAssignment {
            country: record.country.clone(),
            city: record.city.clone(),
            lat: record.lat,
            lon: record.lon,
            tzid,
            source: AttributionLevel::RecordFields,
            tz_from_country_default: from_default,
        });
    }

    let domain = record.url_domain.trim().to_ascii_lowercase();
    let domain = domain.strip_prefix("www.").unwrap_or(&domain);
    if !domain.is_empty() {
        if let Some(c) = tables.domain_to_country.get(domain) {
            return Some(country_level(tables, c, AttributionLevel::Domain));
        }
        let tld_hit = tables
            .tld_to_country
            .iter()
            .filter(|(tld, _)| domain.ends_with(tld.as_str()))
            .max_by_key(|(tld, _)| tld.len());
        if let Some((_, c)) = tld_hit {
            return Some(country_level(tables, c, AttributionLevel::Tld));
        }
    }

    let sub = record.subreddit.trim().to_lowercase();
    tables.subreddit_to_city.get(&sub).map(|c| LocationAssignment {
        country: c.country.clone(),
        city: c.city.clone(),
        lat: Some(c.lat),
        lon: Some(c.lon),
        tzid: Some(c.tzid.clone()),
        source: AttributionLevel::Subreddit,
        tz_from_country_default: false,
    })
}
