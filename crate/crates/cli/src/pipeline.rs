use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use chronoseme_core::geo::TZDB_VERSION;
use chronoseme_core::rhythm::{
    compare_external, extract_peak_trough, grid_correlation, read_reference_csv, seasonal_correlation,
    CorrelationResult, PeakTroughTable,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::report::{curves_from_rows, render_figures, Artifacts, Curves};
use crate::stages::{
    compute_entropy, corpus_grids, fit_profiles, ingest, load_matrix, load_tables, locate, run_scaling,
    scaling_warnings, solar_profiles, Counts, EntropyParams, ScalingParams, CLUSTER_SUBSTITUTION, COUNT, H_GLOBAL,
    H_LOCAL, SENTIMENT,
};
use crate::tables::{
    correlations_csv, cosinor_csv, file_stem, grid_table_csv, heatmap_csv, seasonal_csv, solar_csv, CosinorRow,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST: &str = "manifest.json";

/// Files and directories a run owns inside its output directory.
const OWNED: [&str; 11] = [
    "entropy.csv",
    "counts.csv",
    "cosinor.csv",
    "cosinor_global.csv",
    "solar.csv",
    "seasonal.csv",
    "correlations.csv",
    "scaling.json",
    "heatmaps",
    "figures",
    MANIFEST,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed { stage: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub tzdb_version: String,
    pub config: RunConfig,
    pub status: RunStatus,
    /// Stage → counter → value.
    pub counts: BTreeMap<String, Counts>,
    pub warnings: Vec<String>,
    pub substitutions: Vec<String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    fn new(config: &RunConfig) -> Self {
        Self {
            tool_version: TOOL_VERSION.into(),
            tzdb_version: TZDB_VERSION.into(),
            config: config.clone(),
            status: RunStatus::Ok,
            counts: BTreeMap::new(),
            warnings: Vec::new(),
            substitutions: vec![CLUSTER_SUBSTITUTION.into()],
            outputs: Vec::new(),
        }
    }

    pub fn failed(&self) -> Option<(&str, &str)> {
        match &self.status {
            RunStatus::Ok => None,
            RunStatus::Failed { stage, message } => Some((stage, message)),
        }
    }

    fn stage(&mut self, name: &str, counts: Counts, warnings: Vec<String>) {
        self.counts.insert(name.into(), counts);
        self.warnings.extend(warnings);
    }
}

struct Failure {
    stage: &'static str,
    error: anyhow::Error,
}

fn at(stage: &'static str) -> impl FnOnce(anyhow::Error) -> Failure {
    move |error| Failure { stage, error }
}

fn group_correlations(
    cfg: &RunConfig,
    table: &crate::tables::GridTable,
    solar: &BTreeMap<String, chronoseme_core::geo::SolarProfile>,
    reference: Option<&[(f64, f64)]>,
    m: &mut RunManifest,
) -> Result<(BTreeMap<String, PeakTroughTable>, Vec<(String, String, CorrelationResult)>)> {
    let mut peaks = BTreeMap::new();
    let mut rows = Vec::new();
    let mut add = |group: &str, name: &str, r: chronoseme_core::Result<CorrelationResult>, m: &mut RunManifest| {
        match r {
            Ok(c) => rows.push((group.to_owned(), name.to_owned(), c)),
            Err(e) => m.warnings.push(format!("{group}: {name} not computed: {e}")),
        }
    };
    for (group, stats) in table {
        let local = &stats[H_LOCAL];
        let pt = extract_peak_trough(&local.grid, cfg.peak_window, cfg.trough_window);
        if let Some(p) = solar.get(group) {
            match seasonal_correlation(&pt, p) {
                Ok(s) => {
                    add(group, "sunrise_vs_peak", Ok(s.sunrise_peak), m);
                    add(group, "sunset_vs_trough", Ok(s.sunset_trough), m);
                }
                Err(e) => m.warnings.push(format!("{group}: seasonal correlation not computed: {e}")),
            }
        }
        peaks.insert(group.clone(), pt);
        if let Some(s) = stats.get(SENTIMENT) {
            add(group, "sentiment_vs_h_local", grid_correlation(&s.grid, &local.grid), m);
        }
        if let Some(r) = reference {
            let profile: Vec<Option<f64>> = local.hourly.iter().map(|(_, _, c)| c.mean).collect();
            add(group, "reference_vs_h_local", compare_external(&profile, r), m);
        }
        add(
            group,
            "count_vs_h_global",
            grid_correlation(&stats[COUNT].grid, &stats[H_GLOBAL].grid),
            m,
        );
    }
    Ok((peaks, rows))
}

fn execute(cfg: &RunConfig, m: &mut RunManifest) -> std::result::Result<Artifacts, Failure> {
    cfg.validate().map_err(at("config"))?;

    let (records, counts, w) = ingest(&cfg.records, &cfg.policy).map_err(at("ingest"))?;
    m.stage("ingest", counts, w);

    let tables = load_tables(cfg.tables.as_deref()).map_err(at("geotime"))?;
    let (rows, counts, w) = locate(&records, &tables, cfg.group_by);
    m.stage("geotime", counts, w);

    let (matrix, counts, w) = load_matrix(&cfg.embeddings, &rows, cfg.unit_norm_check).map_err(at("embeddings"))?;
    m.stage("embeddings", counts, w);

    let ep = EntropyParams {
        k: cfg.k,
        epsilon: cfg.epsilon,
        n_min: cfg.n_min,
        outlier: cfg.outlier,
    };
    let (table, counts, w) = compute_entropy(&rows, &matrix, &ep).map_err(at("entropy"))?;
    m.stage("entropy", counts, w);

    let mut art = Artifacts::new();
    let mut put = |name: String, bytes: Result<Vec<u8>>| -> std::result::Result<(), Failure> {
        art.insert(name, bytes.map_err(at("write"))?);
        Ok(())
    };
    put("entropy.csv".into(), grid_table_csv(&table, &[H_LOCAL, H_GLOBAL, SENTIMENT]))?;
    put("counts.csv".into(), grid_table_csv(&table, &[COUNT]))?;
    for (group, stats) in &table {
        for (stat, g) in stats {
            put(format!("heatmaps/{}_{stat}.csv", file_stem(group)), heatmap_csv(&g.grid))?;
        }
    }

    let (fits, w) = fit_profiles(&table, &[H_LOCAL, H_GLOBAL], cfg.fdr_family).map_err(at("rhythm"))?;
    let mut curves = Curves::new();
    let mut counts = Counts::new();
    for (stat, file) in [(H_LOCAL, "cosinor.csv"), (H_GLOBAL, "cosinor_global.csv")] {
        let rows: Vec<CosinorRow> = fits[stat].iter().map(|(g, f)| CosinorRow::from_fit(g, f)).collect();
        counts.insert(format!("fits_{stat}"), rows.len() as u64);
        curves_from_rows(stat, &rows, &mut curves);
        put(file.into(), cosinor_csv(&rows))?;
    }
    m.stage("rhythm", counts, w);

    let (solar, w) = solar_profiles(&rows);
    let reference = cfg
        .reference_csv
        .as_deref()
        .map(|p| read_reference_csv(p).with_context(|| format!("reading {}", p.display())))
        .transpose()
        .map_err(at("correlation"))?;
    let (peaks, corr) = group_correlations(cfg, &table, &solar, reference.as_deref(), m).map_err(at("correlation"))?;
    let mut counts = Counts::new();
    counts.insert("solar_groups".into(), solar.len() as u64);
    counts.insert("correlations".into(), corr.len() as u64);
    m.stage("correlation", counts, w);
    put("solar.csv".into(), solar_csv(&solar))?;
    put("seasonal.csv".into(), seasonal_csv(&peaks, &solar))?;
    put("correlations.csv".into(), correlations_csv(&corr))?;

    let (count_grid, global_grid) =
        corpus_grids(&rows, &matrix, cfg.epsilon, cfg.n_min).map_err(at("scaling"))?;
    let sp = ScalingParams {
        ordering: cfg.ordering,
        split: cfg.split,
        split_basis: cfg.split_basis,
        magnitude: cfg.entropy_magnitude,
        epsilon: cfg.epsilon,
        arrival_step: cfg.arrival_step,
        eps: cfg.cluster_eps,
        min_pts: cfg.cluster_min_pts,
        xmin: cfg.powerlaw_xmin,
        min_bin_count: cfg.powerlaw_min_bin_count,
    };
    let scaling = run_scaling(&rows, &matrix, &count_grid.grid, &global_grid.grid, &sp);
    let mut counts = Counts::new();
    counts.insert("rows".into(), scaling.rows as u64);
    if let Some(c) = scaling.clustering.ok() {
        counts.insert("clusters".into(), c.clusters as u64);
        counts.insert("noise".into(), c.noise as u64);
    }
    m.stage("scaling", counts, scaling_warnings(&scaling));
    put(
        "scaling.json".into(),
        serde_json::to_vec_pretty(&scaling).map_err(Into::into).map(|mut v| {
            v.push(b'\n');
            v
        }),
    )?;

    let (figs, w) = render_figures(&table, &curves, &solar, Some(&scaling));
    let mut counts = Counts::new();
    counts.insert("figures".into(), figs.len() as u64);
    m.stage("figures", counts, w);
    art.extend(figs);
    Ok(art)
}

/// Removes everything a previous run may have left in `dir`.
fn clear_outputs(dir: &Path) -> Result<()> {
    for name in OWNED {
        let p = dir.join(name);
        if p.is_dir() {
            fs::remove_dir_all(&p).with_context(|| format!("removing {}", p.display()))?;
        } else if p.exists() {
            fs::remove_file(&p).with_context(|| format!("removing {}", p.display()))?;
        }
    }
    Ok(())
}

fn write_artifacts(dir: &Path, art: &Artifacts) -> Result<()> {
    for (name, bytes) in art {
        let p = dir.join(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

pub fn write_manifest(dir: &Path, m: &RunManifest) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(m)?;
    bytes.push(b'\n');
    let p = dir.join(MANIFEST);
    fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))
}

/// Runs every stage and writes the artifact directory. Outputs are written
/// only when all stages succeed; on failure the directory holds just the
/// manifest, which names the failing stage. The returned error covers only
/// problems writing the directory itself.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunManifest> {
    let dir = cfg.out_dir()?.to_path_buf();
    let mut m = RunManifest::new(cfg);
    let result = execute(cfg, &mut m);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    clear_outputs(&dir)?;
    match result {
        Ok(art) => {
            m.outputs = art.keys().cloned().collect();
            if let Err(e) = write_artifacts(&dir, &art) {
                clear_outputs(&dir)?;
                m.outputs.clear();
                m.status = RunStatus::Failed {
                    stage: "write".into(),
                    message: format!("{e:#}"),
                };
            }
        }
        Err(f) => {
            m.status = RunStatus::Failed {
                stage: f.stage.into(),
                message: format!("{:#}", f.error),
            };
        }
    }
    write_manifest(&dir, &m)?;
    Ok(m)
}
