use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chronoseme_core::entropy::{OutlierPolicy, DEFAULT_EPSILON, DEFAULT_K, DEFAULT_N_MIN};
use chronoseme_core::geo::{resolve_location, to_local_time, TZDB_VERSION};
use chronoseme_core::ingest::{filter_records, parse_records, FilterPolicy};
use chronoseme_core::scaling::{CellOrdering, EntropyMagnitude, SplitBasis, DEFAULT_MIN_BIN_COUNT, DEFAULT_XMIN};
use chronoseme_core::synth::{gen_gaussian_rhythm, gen_pref_attach, PrefAttachSpec, RhythmGenSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

use crate::config::{FdrFamily, GroupKey, RunConfig};
use crate::pipeline::{run_pipeline, MANIFEST};
use crate::report::{curves_from_rows, render_figures, Curves};
use crate::stages::{
    compute_entropy, corpus_grids, fit_profiles, ingest, load_matrix, load_tables, locate, run_scaling,
    scaling_warnings, BinnedFile, EntropyParams, ScalingParams, ScalingReport, COUNT, H_GLOBAL, H_LOCAL, SENTIMENT,
};
use crate::tables::{
    cosinor_csv, grid_table_csv, read_cosinor_csv, read_grid_table, read_solar_csv, CosinorRow, GridTable,
};

/// Parses a bare word through the serde name of `T`.
fn word<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned())).map_err(|e| e.to_string())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_file(path, &bytes)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        log::warn!("{w}");
    }
}

#[derive(Debug, Parser)]
#[command(name = "chronoseme", version, about = "Circadian structure in timestamped embedding corpora")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, filter, localize and bin records; writes a binned index.
    Ingest(IngestArgs),
    /// Attach location and local time to every record.
    Geotime(GeotimeArgs),
    /// Local and global entropy per group, month and hour.
    Entropy(EntropyArgs),
    /// Cosinor fits of hourly profiles from an entropy table.
    Rhythm(RhythmArgs),
    /// Marginal gain, density clustering, size scaling and projection.
    Scaling(ScalingArgs),
    /// Write a synthetic corpus with known ground truth.
    Synth(SynthArgs),
    /// Run every stage from a config or a previous manifest.
    Run(RunArgs),
    /// Redraw figures from the tables in an output directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub records: PathBuf,
    /// Checked for one unit-norm row per retained record.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Filter policy JSON; defaults apply to missing fields.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Location tables JSON.
    #[arg(long)]
    pub tables: Option<PathBuf>,
    #[arg(long, default_value = "country", value_parser = word::<GroupKey>)]
    pub group: GroupKey,
    #[arg(long)]
    pub no_norm_check: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GeotimeArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub tables: Option<PathBuf>,
    /// Filter first with this policy.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EntropyArgs {
    #[arg(long)]
    pub binned: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_N_MIN)]
    pub n_min: usize,
    #[arg(long, default_value = "iqr", value_parser = word::<OutlierPolicy>)]
    pub outlier: OutlierPolicy,
    #[arg(long)]
    pub no_norm_check: bool,
    /// Entropy table; post counts go to `counts.csv` beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stat {
    HLocal,
    HGlobal,
    Sentiment,
}

impl Stat {
    fn name(self) -> &'static str {
        match self {
            Stat::HLocal => H_LOCAL,
            Stat::HGlobal => H_GLOBAL,
            Stat::Sentiment => SENTIMENT,
        }
    }
}

#[derive(Debug, Args)]
pub struct RhythmArgs {
    #[arg(long)]
    pub entropy: PathBuf,
    /// Grouping column of the entropy table.
    #[arg(long, default_value = "country")]
    pub group: String,
    #[arg(long, value_enum, default_value = "h-local")]
    pub stat: Stat,
    /// Adjust p-values over all groups fitted in this invocation.
    #[arg(long)]
    pub fdr: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    /// Binned index from `ingest`, for hours and arrival order.
    #[arg(long)]
    pub binned: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Entropy and counts tables; without them corpus-wide cells are computed.
    #[arg(long, requires = "counts")]
    pub entropy: Option<PathBuf>,
    #[arg(long, requires = "entropy")]
    pub counts: Option<PathBuf>,
    /// Group of the tables to use when they hold several.
    #[arg(long)]
    pub group: Option<String>,
    #[arg(long, default_value_t = 0.4)]
    pub eps: f64,
    #[arg(long, default_value_t = 15)]
    pub min_pts: usize,
    #[arg(long, default_value = "chronological", value_parser = word::<CellOrdering>)]
    pub ordering: CellOrdering,
    #[arg(long, default_value_t = 0.15)]
    pub split: f64,
    #[arg(long, default_value = "volume", value_parser = word::<SplitBasis>)]
    pub split_basis: SplitBasis,
    #[arg(long, default_value = "absolute", value_parser = word::<EntropyMagnitude>)]
    pub magnitude: EntropyMagnitude,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_N_MIN)]
    pub n_min: usize,
    #[arg(long, default_value_t = 200)]
    pub arrival_step: usize,
    #[arg(long, default_value_t = DEFAULT_XMIN)]
    pub xmin: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_BIN_COUNT)]
    pub min_bin_count: usize,
    #[arg(long)]
    pub no_norm_check: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    Rhythm,
    Prefattach,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(value_enum)]
    pub kind: SynthKind,
    /// Generator spec JSON; defaults apply to missing fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Overrides the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_records: PathBuf,
    #[arg(long)]
    pub out_emb: PathBuf,
    /// Planted topic per row, one per line (preferential attachment only).
    #[arg(long)]
    pub out_labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Run config JSON, or a `manifest.json` from an earlier run.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the config's `out_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory written by `run`.
    #[arg(long)]
    pub dir: PathBuf,
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Geotime(a) => cmd_geotime(a),
        Command::Entropy(a) => cmd_entropy(a),
        Command::Rhythm(a) => cmd_rhythm(a),
        Command::Scaling(a) => cmd_scaling(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Run(a) => cmd_run(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn load_policy(path: Option<&Path>) -> Result<FilterPolicy> {
    let p = match path {
        Some(p) => read_json::<FilterPolicy>(p)?,
        None => FilterPolicy::default(),
    };
    p.validate()?;
    Ok(p)
}

fn cmd_ingest(a: IngestArgs) -> Result<()> {
    let policy = load_policy(a.policy.as_deref())?;
    let (records, ingest_counts, mut warnings) = ingest(&a.records, &policy)?;
    let tables = load_tables(a.tables.as_deref())?;
    let (rows, geo_counts, w) = locate(&records, &tables, a.group);
    warnings.extend(w);
    let mut counts = BTreeMap::new();
    counts.insert("ingest".to_owned(), ingest_counts);
    counts.insert("geotime".to_owned(), geo_counts);
    if let Some(e) = &a.embeddings {
        let (_, c, w) = load_matrix(e, &rows, !a.no_norm_check)?;
        counts.insert("embeddings".to_owned(), c);
        warnings.extend(w);
    }
    warn_all(&warnings);
    let file = BinnedFile {
        tzdb_version: TZDB_VERSION.into(),
        group_by: a.group,
        counts,
        rows,
    };
    write_json(&a.out, &file)?;
    println!("{} records binned into {}", file.rows.len(), a.out.display());
    Ok(())
}

fn cmd_geotime(a: GeotimeArgs) -> Result<()> {
    let all = parse_records(&a.records)?;
    let records = match &a.policy {
        Some(p) => filter_records(&all, &load_policy(Some(p))?)?.0,
        None => all,
    };
    let tables = load_tables(a.tables.as_deref())?;
    let mut out = Vec::new();
    let mut located = 0usize;
    for r in records.iter() {
        let mut v = serde_json::to_value(r)?;
        let loc = resolve_location(r, &tables);
        let local = loc
            .as_ref()
            .and_then(|l| l.tzid.as_deref())
            .and_then(|tz| to_local_time(r.created_utc, tz).ok());
        located += usize::from(local.is_some());
        let obj = v.as_object_mut().context("record is not a JSON object")?;
        obj.insert("location".into(), serde_json::to_value(&loc)?);
        obj.insert("local_time".into(), serde_json::to_value(local)?);
        serde_json::to_writer(&mut out, &v)?;
        out.push(b'\n');
    }
    write_file(&a.out, &out)?;
    println!("{located} of {} records localized into {}", records.len(), a.out.display());
    Ok(())
}

fn cmd_entropy(a: EntropyArgs) -> Result<()> {
    let binned = BinnedFile::load(&a.binned)?;
    let (matrix, _, mut warnings) = load_matrix(&a.embeddings, &binned.rows, !a.no_norm_check)?;
    let p = EntropyParams {
        k: a.k,
        epsilon: a.epsilon,
        n_min: a.n_min,
        outlier: a.outlier,
    };
    let (table, _, w) = compute_entropy(&binned.rows, &matrix, &p)?;
    warnings.extend(w);
    warn_all(&warnings);
    write_file(&a.out, &grid_table_csv(&table, &[H_LOCAL, H_GLOBAL, SENTIMENT])?)?;
    let counts = a.out.with_file_name("counts.csv");
    write_file(&counts, &grid_table_csv(&table, &[COUNT])?)?;
    println!("{} groups written to {} and {}", table.len(), a.out.display(), counts.display());
    Ok(())
}

fn cmd_rhythm(a: RhythmArgs) -> Result<()> {
    if a.group != "country" {
        bail!("entropy tables are grouped by `country`; got --group {}", a.group);
    }
    let mut table = GridTable::new();
    read_grid_table(&a.entropy, &mut table)?;
    let stat = a.stat.name();
    let (fits, warnings) = fit_profiles(&table, &[stat], FdrFamily::PerMeasure)?;
    warn_all(&warnings);
    let rows: Vec<CosinorRow> = fits[stat]
        .iter()
        .map(|(g, f)| {
            let mut r = CosinorRow::from_fit(g, f);
            if !a.fdr {
                r.p_fdr = None;
            }
            r
        })
        .collect();
    write_file(&a.out, &cosinor_csv(&rows)?)?;
    print_cosinor(stat, &rows);
    Ok(())
}

fn print_cosinor(stat: &str, rows: &[CosinorRow]) {
    let stdout = std::io::stdout();
    let mut o = stdout.lock();
    let _ = writeln!(o, "{stat}: {:<10} {:>10} {:>10} {:>7} {:>11} {:>11}", "group", "amplitude", "acrophase", "r2", "p_lr", "p_fdr");
    for r in rows {
        let _ = writeln!(
            o,
            "{stat}: {:<10} {:>10.4} {:>10.2} {:>7.3} {:>11.3e} {:>11}",
            r.group,
            r.amplitude,
            r.acrophase_h,
            r.r2,
            r.p_lr,
            r.p_fdr.map_or_else(|| "-".to_owned(), |p| format!("{p:.3e}"))
        );
    }
}

fn cmd_scaling(a: ScalingArgs) -> Result<()> {
    let binned = BinnedFile::load(&a.binned)?;
    let (matrix, _, mut warnings) = load_matrix(&a.embeddings, &binned.rows, !a.no_norm_check)?;
    if binned.rows.is_empty() {
        bail!("binned index holds no records");
    }
    let (counts, entropy) = match (&a.entropy, &a.counts) {
        (Some(e), Some(c)) => {
            let mut table = GridTable::new();
            read_grid_table(e, &mut table)?;
            read_grid_table(c, &mut table)?;
            let group = match &a.group {
                Some(g) => g.clone(),
                None if table.len() == 1 => table.keys().next().cloned().unwrap_or_default(),
                None => bail!(
                    "tables hold groups {}; choose one with --group",
                    table.keys().cloned().collect::<Vec<_>>().join(", ")
                ),
            };
            let stats = table.get(&group).with_context(|| format!("no group `{group}` in the tables"))?;
            let c = stats.get(COUNT).context("counts table has no `count` rows")?;
            let h = stats.get(H_GLOBAL).context("entropy table has no `h_global` rows")?;
            (c.grid.clone(), h.grid.clone())
        }
        _ => {
            let (c, h) = corpus_grids(&binned.rows, &matrix, a.epsilon, a.n_min)?;
            (c.grid, h.grid)
        }
    };
    let p = ScalingParams {
        ordering: a.ordering,
        split: a.split,
        split_basis: a.split_basis,
        magnitude: a.magnitude,
        epsilon: a.epsilon,
        arrival_step: a.arrival_step,
        eps: a.eps,
        min_pts: a.min_pts,
        xmin: a.xmin,
        min_bin_count: a.min_bin_count,
    };
    let report = run_scaling(&binned.rows, &matrix, &counts, &entropy, &p);
    warnings.extend(scaling_warnings(&report));
    warn_all(&warnings);
    write_json(&a.out, &report)?;
    print_scaling(&report);
    Ok(())
}

fn print_scaling(r: &ScalingReport) {
    println!("rows: {}", r.rows);
    if let Some(c) = r.clustering.ok() {
        println!("clusters: {} (noise {}), top-3 share {:.3}", c.clusters, c.noise, c.top3_share);
    }
    if let Some(p) = r.powerlaw.ok() {
        println!("size exponent: {:.3} (r2 {:.3}, {} bins)", p.exponent, p.r2, p.n_points);
    }
    for (name, g) in [("cells", &r.gain_cells), ("arrival", &r.gain_arrival)] {
        if let Some(s) = g.ok().and_then(|g| g.segments.ok()) {
            println!(
                "gain ({name}): early slope {:.3}, late slope {:.3}, reduction {:.3}",
                s.early_slope, s.late_slope, s.reduction
            );
        }
    }
}

fn read_spec<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => read_json(p),
        None => Ok(T::default()),
    }
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let corpus = match a.kind {
        SynthKind::Rhythm => {
            let mut spec: RhythmGenSpec = read_spec(a.spec.as_deref())?;
            if let Some(s) = a.seed {
                spec.seed = s;
            }
            gen_gaussian_rhythm(&spec)?
        }
        SynthKind::Prefattach => {
            let mut spec: PrefAttachSpec = read_spec(a.spec.as_deref())?;
            if let Some(s) = a.seed {
                spec.seed = s;
            }
            gen_pref_attach(&spec)?
        }
    };
    for p in [&a.out_records, &a.out_emb] {
        if let Some(parent) = p.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
    }
    corpus.write(&a.out_records, &a.out_emb)?;
    if let Some(path) = &a.out_labels {
        let labels = corpus.labels.as_ref().context("this generator plants no labels")?;
        let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
        write_file(path, text.as_bytes())?;
    }
    println!("{} records written to {}", corpus.records.len(), a.out_records.display());
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(out) = a.out {
        cfg.out_dir = Some(out);
    }
    if cfg.out_dir.is_none() {
        bail!("no output directory: pass --out or set out_dir in the config");
    }
    let m = run_pipeline(&cfg)?;
    warn_all(&m.warnings);
    if let Some((stage, message)) = m.failed() {
        bail!("run failed at stage `{stage}`: {message}");
    }
    println!("{} files written to {}", m.outputs.len() + 1, cfg.out_dir()?.display());
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let dir = &a.dir;
    let mut warnings = Vec::new();
    let mut table = GridTable::new();
    for name in ["entropy.csv", "counts.csv"] {
        let p = dir.join(name);
        if p.is_file() {
            read_grid_table(&p, &mut table)?;
        } else {
            warnings.push(format!("{name} missing"));
        }
    }
    let mut curves = Curves::new();
    for (stat, name) in [(H_LOCAL, "cosinor.csv"), (H_GLOBAL, "cosinor_global.csv")] {
        let p = dir.join(name);
        if p.is_file() {
            let rows = read_cosinor_csv(&p)?;
            print_cosinor(stat, &rows);
            curves_from_rows(stat, &rows, &mut curves);
        } else {
            warnings.push(format!("{name} missing"));
        }
    }
    let solar_path = dir.join("solar.csv");
    let solar = if solar_path.is_file() { read_solar_csv(&solar_path)? } else { BTreeMap::new() };
    let scaling_path = dir.join("scaling.json");
    let scaling: Option<ScalingReport> = if scaling_path.is_file() {
        match read_json(&scaling_path) {
            Ok(s) => Some(s),
            Err(e) => {
                warnings.push(format!("scaling.json unreadable: {e:#}"));
                None
            }
        }
    } else {
        None
    };
    if let Some(s) = &scaling {
        print_scaling(s);
    }
    let (figs, w) = render_figures(&table, &curves, &solar, scaling.as_ref());
    warnings.extend(w);
    warn_all(&warnings);
    for (name, bytes) in &figs {
        write_file(&dir.join(name), bytes)?;
    }
    if !dir.join(MANIFEST).is_file() {
        log::warn!("{} has no {MANIFEST}", dir.display());
    }
    println!("{} figures written under {}", figs.len(), dir.join("figures").display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn serde_words() {
        assert_eq!(word::<OutlierPolicy>("iqr").unwrap(), OutlierPolicy::Iqr1p5);
        assert_eq!(word::<CellOrdering>("by_count_asc").unwrap(), CellOrdering::ByCountAsc);
        assert!(word::<SplitBasis>("rows").is_err());
    }

    #[test]
    fn spec_style_invocations_parse() {
        for args in [
            "chronoseme ingest --records R.jsonl --embeddings E.csem --policy policy.json --out binned.idx",
            "chronoseme geotime --records R.jsonl --tables geotables.json --out localized.jsonl",
            "chronoseme entropy --binned b.idx --embeddings E.csem --k 10 --epsilon 1e-6 --outlier iqr --out entropy.csv",
            "chronoseme rhythm --entropy entropy.csv --group country --fdr --out cosinor.csv",
            "chronoseme scaling --binned b.idx --entropy entropy.csv --counts counts.csv --embeddings E.csem --eps 0.4 --min-pts 15 --out scaling.json",
            "chronoseme synth rhythm --spec spec.json --seed 42 --out-records R.jsonl --out-emb E.csem",
            "chronoseme synth prefattach --seed 42 --out-records R.jsonl --out-emb E.csem",
            "chronoseme run --config run.json --out out",
            "chronoseme report --dir out",
        ] {
            Cli::try_parse_from(args.split_whitespace()).unwrap_or_else(|e| panic!("{args}: {e}"));
        }
    }
}
