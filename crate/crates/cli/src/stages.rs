//! The analysis stages shared by `run` and the per-stage commands.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use chronoseme_core::entropy::{
    aggregate, global_entropy_by_bin, local_entropy_by_bin, CellStat, GridLayout, HeatmapGrid, OutlierPolicy,
};
use chronoseme_core::geo::{
    monthly_solar_profile, resolve_location, to_local_time, AttributionLevel, GeoTables, LocalTime, SiteMonthCount,
    SolarProfile,
};
use chronoseme_core::ingest::{
    filter_records, load_embeddings_for_ids, parse_records, BinIndex, BinResolution, EmbeddingMatrix, FilterPolicy,
    NormCheck, RecordSet,
};
use chronoseme_core::rhythm::{bh_fdr, fit_grid_row, CorrelationResult, CosinorFit};
use chronoseme_core::scaling::{
    cluster_growth, density_cluster, marginal_gain, pca_project, powerlaw_fit, prefix_gain_curve, segment_fit,
    volume_entropy_correlation, CellOrdering, EntropyMagnitude, MarginalGainCurve, PowerLawFit, SegmentFit,
    SplitBasis,
};
use serde::{Deserialize, Serialize};

use crate::config::{FdrFamily, GroupKey};
use crate::tables::{GridTable, StatGrids};

pub type Counts = BTreeMap<String, u64>;

pub const H_LOCAL: &str = "h_local";
pub const H_GLOBAL: &str = "h_global";
pub const COUNT: &str = "count";
pub const SENTIMENT: &str = "sentiment";

/// Group used when grouping is off, and for records without a country.
pub const ALL_GROUP: &str = "all";
pub const UNKNOWN_GROUP: &str = "unknown";

/// A filtered record with its resolved location and local time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocatedRow {
    pub id: String,
    pub group: String,
    pub created_utc: i64,
    pub local: LocalTime,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lon: Option<f64>,
    pub tzid: String,
    pub source: AttributionLevel,
    pub tz_from_country_default: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentiment: Option<f64>,
}

/// Contents of a `binned.idx` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedFile {
    pub tzdb_version: String,
    pub group_by: GroupKey,
    pub counts: BTreeMap<String, Counts>,
    pub rows: Vec<LocatedRow>,
}

impl BinnedFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

pub fn ingest(path: &Path, policy: &FilterPolicy) -> Result<(RecordSet, Counts, Vec<String>)> {
    let all = parse_records(path)?;
    let (kept, report) = filter_records(&all, policy)?;
    let mut counts = Counts::new();
    counts.insert("parsed".into(), all.len() as u64);
    counts.insert("skipped_lines".into(), all.skipped_lines as u64);
    counts.insert("removed_empty".into(), report.empty as u64);
    counts.insert("removed_nsfw".into(), report.nsfw as u64);
    counts.insert("removed_ad".into(), report.ad as u64);
    counts.insert("removed_bot".into(), report.bot as u64);
    counts.insert("removed_lang".into(), report.lang as u64);
    counts.insert("retained".into(), report.retained as u64);
    let mut warnings = Vec::new();
    if all.skipped_lines > 0 {
        warnings.push(format!("{} malformed record lines skipped", all.skipped_lines));
    }
    Ok((kept, counts, warnings))
}

pub fn load_tables(path: Option<&Path>) -> Result<GeoTables> {
    match path {
        Some(p) => Ok(GeoTables::load(p)?),
        None => Ok(GeoTables::default()),
    }
}

/// Attributes each record to a location and converts it to local time.
/// Records without a zone are dropped and counted.
pub fn locate(records: &RecordSet, tables: &GeoTables, group_by: GroupKey) -> (Vec<LocatedRow>, Counts, Vec<String>) {
    let mut rows = Vec::with_capacity(records.len());
    let mut unlocated = 0u64;
    let mut bad_tz: BTreeMap<String, u64> = BTreeMap::new();
    let mut by_source: BTreeMap<&'static str, u64> = BTreeMap::new();
    let mut from_default = 0u64;
    for r in records.iter() {
        let Some(loc) = resolve_location(r, tables) else {
            unlocated += 1;
            continue;
        };
        let Some(tzid) = loc.tzid.clone() else {
            unlocated += 1;
            continue;
        };
        let local = match to_local_time(r.created_utc, &tzid) {
            Ok(t) => t,
            Err(_) => {
                *bad_tz.entry(tzid).or_default() += 1;
                continue;
            }
        };
        *by_source
            .entry(match loc.source {
                AttributionLevel::RecordFields => "located_by_record",
                AttributionLevel::Domain => "located_by_domain",
                AttributionLevel::Tld => "located_by_tld",
                AttributionLevel::Subreddit => "located_by_subreddit",
            })
            .or_default() += 1;
        from_default += u64::from(loc.tz_from_country_default);
        let group = match group_by {
            GroupKey::None => ALL_GROUP.to_owned(),
            GroupKey::Country if loc.country.is_empty() => UNKNOWN_GROUP.to_owned(),
            GroupKey::Country => loc.country.clone(),
        };
        rows.push(LocatedRow {
            id: r.id.clone(),
            group,
            created_utc: r.created_utc,
            local,
            lat: loc.lat,
            lon: loc.lon,
            tzid,
            source: loc.source,
            tz_from_country_default: loc.tz_from_country_default,
            sentiment: r.sentiment_compound,
        });
    }
    let mut counts = Counts::new();
    counts.insert("located".into(), rows.len() as u64);
    counts.insert("unlocated".into(), unlocated);
    counts.insert("unknown_zone".into(), bad_tz.values().sum());
    counts.insert("tz_from_country_default".into(), from_default);
    for (k, v) in by_source {
        counts.insert(k.into(), v);
    }
    let mut warnings = Vec::new();
    if unlocated > 0 {
        warnings.push(format!("{unlocated} records have no resolvable location or zone and were dropped"));
    }
    for (tz, n) in &bad_tz {
        warnings.push(format!("{n} records name unknown zone `{tz}` and were dropped"));
    }
    if from_default > 0 {
        warnings.push(format!(
            "{from_default} records use their country's default zone; local hours may be off in multi-zone countries"
        ));
    }
    (rows, counts, warnings)
}

pub fn load_matrix(path: &Path, rows: &[LocatedRow], unit_norm: bool) -> Result<(EmbeddingMatrix, Counts, Vec<String>)> {
    let ids: Vec<String> = rows.iter().map(|r| r.id.clone()).collect();
    let norm = if unit_norm { NormCheck::UnitRows } else { NormCheck::Skip };
    let load = load_embeddings_for_ids(path, &ids, norm)?;
    let mut counts = Counts::new();
    counts.insert("rows".into(), load.matrix.n() as u64);
    counts.insert("dim".into(), load.matrix.d() as u64);
    counts.insert("orphan_ids".into(), load.orphan_ids.len() as u64);
    let mut warnings = Vec::new();
    if !load.orphan_ids.is_empty() {
        warnings.push(format!("{} embedding rows have no matching record and were dropped", load.orphan_ids.len()));
    }
    Ok((load.matrix, counts, warnings))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyParams {
    pub k: usize,
    pub epsilon: f64,
    pub n_min: usize,
    pub outlier: OutlierPolicy,
}

fn month_hour_bins(rows: &[LocatedRow], members: &[usize]) -> Result<BinIndex> {
    Ok(BinIndex::from_assignments(
        BinResolution::MonthHour,
        members.iter().map(|&i| (i, rows[i].local.month, rows[i].local.hour)),
    )?)
}

fn count_grids(bins: &BinIndex) -> Result<StatGrids> {
    let mut g = StatGrids::empty(COUNT);
    for (key, r) in bins.iter() {
        g.grid.set(key.month, key.hour, CellStat::single(r.len() as f64, r.len()))?;
    }
    for (key, r) in bins.pooled_by_hour().iter() {
        g.hourly.set(None, key.hour, CellStat::single(r.len() as f64, r.len()))?;
    }
    Ok(g)
}

fn global_grids(matrix: &EmbeddingMatrix, bins: &BinIndex, p: &EntropyParams) -> Result<(StatGrids, usize)> {
    let cells = global_entropy_by_bin(matrix, bins, p.epsilon, p.n_min)?;
    let pooled = global_entropy_by_bin(matrix, &bins.pooled_by_hour(), p.epsilon, p.n_min)?;
    let skipped = cells.skipped_bins.len() + pooled.skipped_bins.len();
    Ok((
        StatGrids {
            grid: cells.to_grid(H_GLOBAL, GridLayout::MonthHour)?,
            hourly: pooled.to_grid(H_GLOBAL, GridLayout::Pooled)?,
        },
        skipped,
    ))
}

fn groups_of(rows: &[LocatedRow]) -> BTreeMap<&str, Vec<usize>> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        groups.entry(r.group.as_str()).or_default().push(i);
    }
    groups
}

/// Per group: local entropy within pooled hour bins aggregated to month ×
/// hour cells, global entropy per month × hour cell and per pooled hour,
/// post counts, and sentiment when records carry it.
pub fn compute_entropy(
    rows: &[LocatedRow],
    matrix: &EmbeddingMatrix,
    p: &EntropyParams,
) -> Result<(GridTable, Counts, Vec<String>)> {
    if rows.is_empty() {
        bail!("no records remain after filtering and location attribution; nothing to compute entropy on");
    }
    if matrix.n() != rows.len() {
        bail!("{} embedding rows for {} records", matrix.n(), rows.len());
    }
    let mut table = GridTable::new();
    let mut warnings = Vec::new();
    let (mut dups, mut skipped_local, mut skipped_global) = (0usize, 0usize, 0usize);
    let groups = groups_of(rows);
    for (group, members) in &groups {
        let bins = month_hour_bins(rows, members)?;
        let local = local_entropy_by_bin(matrix, &bins.pooled_by_hour(), p.k)?;
        dups += local.duplicate_rows.len();
        skipped_local += local.skipped_bins.len();
        for (key, n) in &local.skipped_bins {
            warnings.push(format!(
                "{group}: hour {} has {n} records, too few for k = {}; local entropy skipped",
                key.hour, p.k
            ));
        }
        let agg = aggregate(H_LOCAL, &local.values, &bins, p.outlier)?;
        let (global, skipped) = global_grids(matrix, &bins, p)?;
        skipped_global += skipped;
        let mut stats = BTreeMap::new();
        stats.insert(H_LOCAL.to_owned(), StatGrids { grid: agg.grid, hourly: agg.hourly });
        stats.insert(H_GLOBAL.to_owned(), global);
        stats.insert(COUNT.to_owned(), count_grids(&bins)?);
        if members.iter().any(|&i| rows[i].sentiment.is_some()) {
            let values: Vec<Option<f64>> = rows.iter().map(|r| r.sentiment).collect();
            let s = aggregate(SENTIMENT, &values, &bins, p.outlier)?;
            stats.insert(SENTIMENT.to_owned(), StatGrids { grid: s.grid, hourly: s.hourly });
        }
        table.insert((*group).to_owned(), stats);
    }
    if dups > 0 {
        warnings.push(format!("{dups} records coincide with a neighbor and were left out of local entropy"));
    }
    if skipped_global > 0 {
        warnings.push(format!(
            "{skipped_global} bins have fewer than n_min = {} records; global entropy skipped there",
            p.n_min
        ));
    }
    let any_value = table.values().any(|s| {
        [H_LOCAL, H_GLOBAL]
            .iter()
            .any(|k| s.get(*k).is_some_and(|g| g.hourly.non_empty() > 0))
    });
    if !any_value {
        bail!(
            "no bin holds enough records for entropy (need more than k = {} or at least n_min = {})",
            p.k,
            p.n_min
        );
    }
    let mut counts = Counts::new();
    counts.insert("groups".into(), groups.len() as u64);
    counts.insert("duplicate_rows".into(), dups as u64);
    counts.insert("skipped_local_bins".into(), skipped_local as u64);
    counts.insert("skipped_global_bins".into(), skipped_global as u64);
    Ok((table, counts, warnings))
}

/// Cosinor fits of every group's hourly profile for each statistic, with
/// BH-adjusted p-values over the declared family.
pub fn fit_profiles(
    table: &GridTable,
    stats: &[&str],
    family: FdrFamily,
) -> Result<(BTreeMap<String, Vec<(String, CosinorFit)>>, Vec<String>)> {
    let mut out: BTreeMap<String, Vec<(String, CosinorFit)>> = BTreeMap::new();
    let mut warnings = Vec::new();
    for stat in stats {
        let fits = out.entry((*stat).to_owned()).or_default();
        for (group, by_stat) in table {
            let Some(g) = by_stat.get(*stat) else { continue };
            match fit_grid_row(&g.hourly, 0) {
                Ok(f) => fits.push((group.clone(), f)),
                Err(e) => warnings.push(format!("{group}: no cosinor fit for {stat}: {e}")),
            }
        }
    }
    let families: Vec<Vec<(String, usize)>> = match family {
        FdrFamily::PerMeasure => out
            .iter()
            .map(|(s, f)| (0..f.len()).map(|i| (s.clone(), i)).collect())
            .collect(),
        FdrFamily::Joint => vec![out
            .iter()
            .flat_map(|(s, f)| (0..f.len()).map(move |i| (s.clone(), i)))
            .collect()],
    };
    for fam in families.into_iter().filter(|f| !f.is_empty()) {
        let p: Vec<f64> = fam.iter().map(|(s, i)| out[s][*i].1.p_lr).collect();
        let adj = bh_fdr(&p)?;
        for ((s, i), a) in fam.iter().zip(adj) {
            out.get_mut(s).unwrap()[*i].1.p_fdr = Some(a);
        }
    }
    Ok((out, warnings))
}

/// Submission-weighted monthly sunrise/sunset per group, from records with
/// coordinates.
pub fn solar_profiles(rows: &[LocatedRow]) -> (BTreeMap<String, SolarProfile>, Vec<String>) {
    let mut sites: BTreeMap<&str, BTreeMap<(String, i32, u32, String, String), SiteMonthCount>> = BTreeMap::new();
    for r in rows {
        let (Some(lat), Some(lon)) = (r.lat, r.lon) else { continue };
        let key = (r.tzid.clone(), r.local.year, u32::from(r.local.month), lat.to_string(), lon.to_string());
        sites
            .entry(r.group.as_str())
            .or_default()
            .entry(key)
            .or_insert_with(|| SiteMonthCount {
                lat,
                lon,
                tzid: r.tzid.clone(),
                year: r.local.year,
                month: u32::from(r.local.month),
                count: 0,
            })
            .count += 1;
    }
    let mut out = BTreeMap::new();
    let mut warnings = Vec::new();
    for (group, s) in sites {
        let list: Vec<SiteMonthCount> = s.into_values().collect();
        match monthly_solar_profile(&list) {
            Ok(p) => {
                out.insert(group.to_owned(), p);
            }
            Err(e) => warnings.push(format!("{group}: no solar profile: {e}")),
        }
    }
    (out, warnings)
}

/// Result of one analysis that may fail without stopping the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome<T> {
    Ok(T),
    Error(String),
}

impl<T> Outcome<T> {
    pub fn from_result<E: std::fmt::Display>(r: std::result::Result<T, E>) -> Self {
        match r {
            Ok(v) => Outcome::Ok(v),
            Err(e) => Outcome::Error(e.to_string()),
        }
    }

    pub fn ok(&self) -> Option<&T> {
        match self {
            Outcome::Ok(v) => Some(v),
            Outcome::Error(_) => None,
        }
    }

    pub fn error(&self) -> Option<&str> {
        match self {
            Outcome::Ok(_) => None,
            Outcome::Error(e) => Some(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingParams {
    pub ordering: CellOrdering,
    pub split: f64,
    pub split_basis: SplitBasis,
    pub magnitude: EntropyMagnitude,
    pub epsilon: f64,
    pub arrival_step: usize,
    pub eps: f64,
    pub min_pts: usize,
    pub xmin: usize,
    pub min_bin_count: usize,
}

pub const CLUSTER_SUBSTITUTION: &str =
    "density clustering is DBSCAN with fixed eps and min_pts in place of hierarchical density clustering";

/// Largest number of rows whose PCA coordinates are kept in the report.
pub const PCA_MAX_POINTS: usize = 5000;

/// Clusters listed with their hourly growth.
pub const GROWTH_TOP: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub curve: MarginalGainCurve,
    pub segments: Outcome<SegmentFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterGrowth {
    pub cluster: usize,
    pub size: usize,
    /// Members posted at or before each local hour.
    pub cumulative: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub algorithm: String,
    pub eps: f64,
    pub min_pts: usize,
    pub note: String,
    pub clusters: usize,
    pub noise: usize,
    pub sizes_desc: Vec<usize>,
    pub top3_share: f64,
    pub growth: Vec<ClusterGrowth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaReport {
    pub explained_ratio: Vec<f64>,
    /// Every `stride`-th row is listed.
    pub stride: usize,
    pub coords: Vec<Vec<f64>>,
    pub labels: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: usize,
    pub volume_entropy: Outcome<CorrelationResult>,
    pub gain_cells: Outcome<GainReport>,
    pub gain_arrival: Outcome<GainReport>,
    pub clustering: Outcome<ClusterReport>,
    pub powerlaw: Outcome<PowerLawFit>,
    pub pca: Outcome<PcaReport>,
}

/// Corpus-wide post counts and global entropy per month × hour cell.
pub fn corpus_grids(rows: &[LocatedRow], matrix: &EmbeddingMatrix, epsilon: f64, n_min: usize) -> Result<(StatGrids, StatGrids)> {
    let all: Vec<usize> = (0..rows.len()).collect();
    let bins = month_hour_bins(rows, &all)?;
    let p = EntropyParams {
        k: 1,
        epsilon,
        n_min,
        outlier: OutlierPolicy::None,
    };
    Ok((count_grids(&bins)?, global_grids(matrix, &bins, &p)?.0))
}

fn gain_report(curve: chronoseme_core::Result<MarginalGainCurve>, p: &ScalingParams) -> Outcome<GainReport> {
    Outcome::from_result(curve.map(|curve| GainReport {
        segments: Outcome::from_result(segment_fit(&curve, p.split, p.split_basis)),
        curve,
    }))
}

pub fn run_scaling(
    rows: &[LocatedRow],
    matrix: &EmbeddingMatrix,
    counts: &HeatmapGrid,
    entropy: &HeatmapGrid,
    p: &ScalingParams,
) -> ScalingReport {
    let all: Vec<&[f64]> = matrix.rows().collect();
    let mut arrival: Vec<usize> = (0..rows.len()).collect();
    arrival.sort_by_key(|&i| rows[i].created_utc);
    let ordered: Vec<&[f64]> = arrival.iter().map(|&i| all[i]).collect();

    let labels = density_cluster(&all, p.eps, p.min_pts);
    let hours: Vec<u8> = rows.iter().map(|r| r.local.hour).collect();
    let trace = labels.as_ref().map_err(|e| e.to_string()).and_then(|l| cluster_growth(l, &hours).map_err(|e| e.to_string()));
    let clustering = match &trace {
        Ok(t) => {
            let order = t.by_size();
            Outcome::Ok(ClusterReport {
                algorithm: "dbscan".into(),
                eps: p.eps,
                min_pts: p.min_pts,
                note: CLUSTER_SUBSTITUTION.into(),
                clusters: t.sizes.len(),
                noise: t.noise,
                sizes_desc: order.iter().map(|&c| t.sizes[c]).collect(),
                top3_share: t.top_share(3),
                growth: order
                    .iter()
                    .take(GROWTH_TOP)
                    .map(|&c| ClusterGrowth {
                        cluster: c,
                        size: t.sizes[c],
                        cumulative: t.growth[c].to_vec(),
                    })
                    .collect(),
            })
        }
        Err(e) => Outcome::Error(e.clone()),
    };
    let powerlaw = match &trace {
        Ok(t) => Outcome::from_result(powerlaw_fit(&t.sizes, p.xmin, p.min_bin_count)),
        Err(_) => Outcome::Error("clustering failed".into()),
    };
    let pca = Outcome::from_result(pca_project(&all, 2).map(|proj| {
        let stride = rows.len().div_ceil(PCA_MAX_POINTS).max(1);
        let lab = labels.as_ref().ok();
        PcaReport {
            explained_ratio: proj.explained_ratio,
            stride,
            coords: proj.coords.into_iter().step_by(stride).collect(),
            labels: (0..rows.len())
                .step_by(stride)
                .map(|i| lab.map_or(chronoseme_core::scaling::NOISE, |l| l[i]))
                .collect(),
        }
    }));
    ScalingReport {
        rows: rows.len(),
        volume_entropy: Outcome::from_result(volume_entropy_correlation(counts, entropy)),
        gain_cells: gain_report(marginal_gain(counts, entropy, p.ordering, p.magnitude), p),
        gain_arrival: gain_report(prefix_gain_curve(&ordered, p.arrival_step, p.epsilon, p.magnitude), p),
        clustering,
        powerlaw,
        pca,
    }
}

/// Warnings for every analysis in the report that did not complete.
pub fn scaling_warnings(r: &ScalingReport) -> Vec<String> {
    let seg = |o: &Outcome<GainReport>| o.ok().and_then(|g| g.segments.error().map(str::to_owned));
    let items = [
        ("volume/entropy correlation", r.volume_entropy.error().map(str::to_owned)),
        ("cell gain curve", r.gain_cells.error().map(str::to_owned)),
        ("cell gain segments", seg(&r.gain_cells)),
        ("arrival gain curve", r.gain_arrival.error().map(str::to_owned)),
        ("arrival gain segments", seg(&r.gain_arrival)),
        ("clustering", r.clustering.error().map(str::to_owned)),
        ("power law", r.powerlaw.error().map(str::to_owned)),
        ("pca", r.pca.error().map(str::to_owned)),
    ];
    items
        .into_iter()
        .filter_map(|(name, e)| e.map(|e| format!("scaling {name}: {e}")))
        .collect()
}
