//! Seeded synthetic corpora with known ground truth.
//!
//! Generators emit the same record and embedding formats as real data.
//! Embedding values are rounded to `f32` at generation time so a corpus
//! written to disk and read back is identical to the in-memory one.

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{write_csem, write_records, EmbeddingMatrix, RecordSet, SubmissionRecord};
use crate::rng::SeededRng;
use crate::OMEGA_24H;

pub const SYNTH_COUNTRY: &str = "ZZ";
pub const SYNTH_TZID: &str = "Etc/UTC";

/// `(d/2)·ln(2πe σ²)`, the differential entropy of `N(0, σ²I_d)`.
pub fn analytic_gaussian_entropy(sigma: f64, d: usize) -> Result<f64> {
    if !(sigma > 0.0) || d == 0 {
        return Err(Error::InvalidArgument(format!("need sigma > 0 and d >= 1, got {sigma}, {d}")));
    }
    Ok(0.5 * d as f64 * (std::f64::consts::TAU * std::f64::consts::E * sigma * sigma).ln())
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub records: RecordSet,
    pub embeddings: EmbeddingMatrix,
    /// Planted topic of every row, where the generator has one.
    pub labels: Option<Vec<i64>>,
}

impl SynthCorpus {
    pub fn write(&self, records_path: impl AsRef<Path>, embeddings_path: impl AsRef<Path>) -> Result<()> {
        write_records(records_path, self.records.iter())?;
        write_csem(
            embeddings_path,
            self.embeddings.ids(),
            self.embeddings.d(),
            &self.embeddings.to_f32(),
        )
    }
}

fn epoch(year: i32, month: u32, day: u32) -> Result<i64> {
    NaiveDate::from_ymd_opt(year, month, day)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|t| t.and_utc().timestamp())
        .ok_or_else(|| Error::InvalidArgument(format!("invalid date {year}-{month}-{day}")))
}

fn synth_record(id: String, created_utc: i64, topic: &str) -> SubmissionRecord {
    let mut r = SubmissionRecord::new(id, created_utc);
    r.country = SYNTH_COUNTRY.into();
    r.tzid = SYNTH_TZID.into();
    r.lat = Some(40.0);
    r.lon = Some(0.0);
    r.lang_tag = "en".into();
    r.title_text = format!("synthetic {topic}");
    r.author_name = "generator".into();
    r.subreddit = "synthetic".into();
    r
}

fn f32_round(x: f64) -> f64 {
    x as f32 as f64
}

/// Hour-modulated isotropic Gaussian clouds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RhythmGenSpec {
    pub d: usize,
    pub n_per_hour: usize,
    pub base_sigma: f64,
    /// Depth `a` of `σ(t) = σ₀(1 + a·cos ω(t − φ*))`.
    pub modulation: f64,
    pub acrophase_h: f64,
    pub months: Vec<u8>,
    pub year: i32,
    pub seed: u64,
}

impl Default for RhythmGenSpec {
    fn default() -> Self {
        Self {
            d: 8,
            n_per_hour: 200,
            base_sigma: 1.0,
            modulation: 0.3,
            acrophase_h: 4.0,
            months: vec![1],
            year: 2024,
            seed: 42,
        }
    }
}

impl RhythmGenSpec {
    pub fn sigma_at(&self, hour: f64) -> f64 {
        self.base_sigma * (1.0 + self.modulation * (OMEGA_24H * (hour - self.acrophase_h)).cos())
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n_per_hour < 2 || !(self.base_sigma > 0.0) {
            return Err(Error::InvalidArgument("rhythm spec needs d >= 1, n_per_hour >= 2, sigma > 0".into()));
        }
        if !(0.0..1.0).contains(&self.modulation) {
            return Err(Error::InvalidArgument(format!("modulation {} outside [0, 1)", self.modulation)));
        }
        if self.months.is_empty() || self.months.iter().any(|m| !(1..=12).contains(m)) {
            return Err(Error::InvalidArgument("months must be a nonempty list within 1..=12".into()));
        }
        Ok(())
    }
}

/// For every month and hour, `n_per_hour` rows drawn from `N(0, σ(t)²I_d)`
/// with timestamps inside that UTC hour. Rows are not normalized.
///
/// Draw order per row: one uniform for the day, one for the second within
/// the hour, then `d` normals.
pub fn gen_gaussian_rhythm(spec: &RhythmGenSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = SeededRng::new(spec.seed);
    let mut records = Vec::new();
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for &month in &spec.months {
        let base = epoch(spec.year, u32::from(month), 1)?;
        for hour in 0..24u8 {
            let sigma = spec.sigma_at(f64::from(hour));
            for i in 0..spec.n_per_hour {
                let day = rng.below(28) as i64;
                let second = rng.below(3600) as i64;
                let t = base + day * 86_400 + i64::from(hour) * 3600 + second;
                let id = format!("rh-{month:02}-{hour:02}-{i:05}");
                records.push(synth_record(id.clone(), t, "rhythm"));
                ids.push(id);
                data.extend((0..spec.d).map(|_| f32_round(sigma * rng.normal())));
            }
        }
    }
    Ok(SynthCorpus {
        records: RecordSet::from_records(records)?,
        embeddings: EmbeddingMatrix::new(ids, spec.d, data)?,
        labels: None,
    })
}

/// Sequential topic growth with preferential attachment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrefAttachSpec {
    pub n_posts: usize,
    /// Probability that a post joins an existing topic.
    pub attach_prob: f64,
    pub d: usize,
    /// Topic centres are drawn from `N(0, center_scale²·I)`.
    pub center_scale: f64,
    /// Centres closer than this to an existing centre are redrawn.
    pub min_center_separation: f64,
    pub within_sigma: f64,
    pub year: i32,
    pub month: u8,
    pub day: u8,
    pub seed: u64,
}

impl Default for PrefAttachSpec {
    fn default() -> Self {
        Self {
            n_posts: 20_000,
            attach_prob: 0.98,
            d: 8,
            center_scale: 10.0,
            min_center_separation: 6.0,
            within_sigma: 0.3,
            year: 2024,
            month: 1,
            day: 15,
            seed: 42,
        }
    }
}

// Bound on centre redraws; after that the last draw is kept.
const MAX_CENTER_DRAWS: usize = 1000;

impl PrefAttachSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.attach_prob > 0.0 && self.attach_prob < 1.0) {
            return Err(Error::InvalidArgument(format!("attach_prob {} outside (0, 1)", self.attach_prob)));
        }
        if self.n_posts == 0 || self.d == 0 || !(self.within_sigma >= 0.0) || !(self.center_scale > 0.0) {
            return Err(Error::InvalidArgument("pref-attach spec has a non-positive size or scale".into()));
        }
        Ok(())
    }

    /// Yule–Simon tail exponent `−(1 + 1/α)` of the topic-size distribution.
    pub fn yule_simon_exponent(&self) -> f64 {
        -(1.0 + 1.0 / self.attach_prob)
    }
}

/// Posts arrive one at a time. With probability α a post joins the topic of
/// a uniformly chosen earlier post (so topics are picked in proportion to
/// size); otherwise it opens a new topic. Arrival times are spread evenly
/// over one UTC day.
///
/// Draw order per post: one uniform for the attach decision (skipped for
/// the first post), then either one uniform for the earlier post or the
/// centre normals, then `d` noise normals.
pub fn gen_pref_attach(spec: &PrefAttachSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = SeededRng::new(spec.seed);
    let d = spec.d;
    let base = epoch(spec.year, u32::from(spec.month), u32::from(spec.day))?;
    let sep2 = spec.min_center_separation.powi(2);
    let mut centers: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<i64> = Vec::with_capacity(spec.n_posts);
    let mut records = Vec::with_capacity(spec.n_posts);
    let mut ids = Vec::with_capacity(spec.n_posts);
    let mut data = Vec::with_capacity(spec.n_posts * d);
    for i in 0..spec.n_posts {
        let join = i > 0 && rng.uniform() < spec.attach_prob;
        let topic = if join {
            labels[rng.below(i)]
        } else {
            let mut c: Vec<f64> = Vec::new();
            for _ in 0..MAX_CENTER_DRAWS {
                c = (0..d).map(|_| spec.center_scale * rng.normal()).collect();
                let clear = centers
                    .iter()
                    .all(|o| o.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() >= sep2);
                if clear {
                    break;
                }
            }
            centers.push(c);
            centers.len() as i64 - 1
        };
        let center = &centers[topic as usize];
        data.extend(center.iter().map(|&m| f32_round(m + spec.within_sigma * rng.normal())));
        labels.push(topic);
        let t = base + (i as i64 * 86_400) / spec.n_posts as i64;
        let id = format!("pa-{i:06}");
        records.push(synth_record(id.clone(), t, &format!("topic {topic}")));
        ids.push(id);
    }
    Ok(SynthCorpus {
        records: RecordSet::from_records(records)?,
        embeddings: EmbeddingMatrix::new(ids, d, data)?,
        labels: Some(labels),
    })
}

/// Sizes of the planted topics.
pub fn topic_sizes(labels: &[i64]) -> Vec<usize> {
    let k = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
    let mut sizes = vec![0; k];
    for &l in labels.iter().filter(|&&l| l >= 0) {
        sizes[l as usize] += 1;
    }
    sizes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::{global_entropy, sample_covariance};
    use approx::assert_abs_diff_eq;

    #[test]
    fn analytic_values() {
        assert_abs_diff_eq!(analytic_gaussian_entropy(1.0, 1).unwrap(), 1.4189385332046727, epsilon = 1e-12);
        assert_abs_diff_eq!(analytic_gaussian_entropy(1.0, 4).unwrap(), 5.675754132818691, epsilon = 1e-12);
        assert_abs_diff_eq!(
            analytic_gaussian_entropy(2.0, 1).unwrap(),
            1.4189385332046727 + 2f64.ln(),
            epsilon = 1e-12
        );
        assert!(analytic_gaussian_entropy(0.0, 1).is_err());
    }

    fn small_rhythm() -> RhythmGenSpec {
        RhythmGenSpec {
            n_per_hour: 500,
            ..RhythmGenSpec::default()
        }
    }

    #[test]
    fn rhythm_hours_and_variance() {
        let spec = small_rhythm();
        let c = gen_gaussian_rhythm(&spec).unwrap();
        assert_eq!(c.records.len(), 24 * 500);
        for hour in [0usize, 4, 16] {
            let rows: Vec<usize> = (hour * 500..(hour + 1) * 500).collect();
            for &r in &rows {
                let t = c.records.records()[r].created_utc;
                assert_eq!((t.rem_euclid(86_400) / 3600) as usize, hour);
            }
            let sel = c.embeddings.select(&rows);
            let cov = sample_covariance(&sel).unwrap();
            let s2 = spec.sigma_at(hour as f64).powi(2);
            assert!((cov.trace() / 8.0 / s2 - 1.0).abs() < 0.05);
            let h = global_entropy(&sel, 1e-6, 25).unwrap().h;
            assert!((h - analytic_gaussian_entropy(spec.sigma_at(hour as f64), 8).unwrap()).abs() < 0.1);
        }
    }

    #[test]
    fn rhythm_is_deterministic() {
        let a = gen_gaussian_rhythm(&RhythmGenSpec::default()).unwrap();
        let b = gen_gaussian_rhythm(&RhythmGenSpec::default()).unwrap();
        assert_eq!(a.embeddings, b.embeddings);
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn pref_attach_small_alpha_gives_singletons() {
        let spec = PrefAttachSpec {
            n_posts: 2000,
            attach_prob: 1e-6,
            ..PrefAttachSpec::default()
        };
        let c = gen_pref_attach(&spec).unwrap();
        let sizes = topic_sizes(c.labels.as_ref().unwrap());
        assert!(sizes.len() >= 1995);
    }

    #[test]
    fn pref_attach_conserves_posts() {
        let spec = PrefAttachSpec {
            n_posts: 3000,
            ..PrefAttachSpec::default()
        };
        let c = gen_pref_attach(&spec).unwrap();
        assert_eq!(topic_sizes(c.labels.as_ref().unwrap()).iter().sum::<usize>(), 3000);
        let t: Vec<i64> = c.records.iter().map(|r| r.created_utc).collect();
        assert!(t.windows(2).all(|w| w[0] <= w[1]));
        assert!(t.last().unwrap() - t[0] < 86_400);
    }

    #[test]
    fn byte_identical_files() {
        let dir = tempfile::tempdir().unwrap();
        let spec = PrefAttachSpec {
            n_posts: 500,
            ..PrefAttachSpec::default()
        };
        for tag in ["a", "b"] {
            gen_pref_attach(&spec)
                .unwrap()
                .write(dir.path().join(format!("{tag}.jsonl")), dir.path().join(format!("{tag}.csem")))
                .unwrap();
        }
        for ext in ["jsonl", "csem"] {
            let a = std::fs::read(dir.path().join(format!("a.{ext}"))).unwrap();
            let b = std::fs::read(dir.path().join(format!("b.{ext}"))).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let bad = PrefAttachSpec {
            attach_prob: 1.0,
            ..PrefAttachSpec::default()
        };
        assert!(gen_pref_attach(&bad).is_err());
        let bad = RhythmGenSpec {
            modulation: 1.0,
            ..RhythmGenSpec::default()
        };
        assert!(gen_gaussian_rhythm(&bad).is_err());
    }
}
