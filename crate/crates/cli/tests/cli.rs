use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chronoseme_core::synth::{gen_gaussian_rhythm, RhythmGenSpec};

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chronoseme"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

/// A small two-month rhythm corpus and a config pointing at it.
fn corpus(extra: serde_json::Value) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let spec = RhythmGenSpec {
        n_per_hour: 60,
        months: vec![1, 7],
        seed: 3,
        ..RhythmGenSpec::default()
    };
    gen_gaussian_rhythm(&spec)
        .unwrap()
        .write(dir.path().join("r.jsonl"), dir.path().join("e.csem"))
        .unwrap();
    let mut cfg = serde_json::json!({"records": "r.jsonl", "embeddings": "e.csem", "unit_norm_check": false});
    cfg.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
    std::fs::write(dir.path().join("run.json"), cfg.to_string()).unwrap();
    dir
}

fn run_ok(dir: &Path, out: &str) {
    let o = run(&["run", "--config", "run.json", "--out", out], dir);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn first_line(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap().lines().next().unwrap().to_owned()
}

#[test]
fn run_writes_tables_with_fixed_headers() {
    let dir = corpus(serde_json::json!({}));
    run_ok(dir.path(), "out");
    let out = dir.path().join("out");
    let want = [
        ("entropy.csv", "country,month,hour,stat,mean,sem,n"),
        ("counts.csv", "country,month,hour,stat,mean,sem,n"),
        ("cosinor.csv", "group,amplitude,acrophase_h,r2,p_lr,p_fdr,mesor"),
        ("cosinor_global.csv", "group,amplitude,acrophase_h,r2,p_lr,p_fdr,mesor"),
        ("solar.csv", "group,month,sunrise_mean,sunrise_sd,sunset_mean,sunset_sd,sites"),
        ("seasonal.csv", "group,month,peak_hour,trough_hour,sunrise,sunset"),
        ("correlations.csv", "group,analysis,r,p,n,slope,intercept"),
    ];
    for (name, header) in want {
        assert_eq!(first_line(&out.join(name)), header, "{name}");
    }
    let heatmaps: Vec<_> = std::fs::read_dir(out.join("heatmaps")).unwrap().collect();
    assert!(!heatmaps.is_empty());
    for h in heatmaps {
        assert_eq!(first_line(&h.unwrap().path()), "month,hour,mean,sem,n");
    }
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["status"]["state"], "ok");
    assert!(m["config"].get("out_dir").is_none());
    let s: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("scaling.json")).unwrap()).unwrap();
    for key in ["volume_entropy", "gain_cells", "gain_arrival", "clustering", "powerlaw", "pca"] {
        assert!(s.get(key).is_some(), "scaling.json lacks {key}");
    }
}

#[test]
fn figures_have_expected_marks() {
    let dir = corpus(serde_json::json!({}));
    run_ok(dir.path(), "out");
    let figs = dir.path().join("out/figures");
    let names: Vec<String> = std::fs::read_dir(&figs)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    let profile = names.iter().find(|n| n.ends_with("_h_local_profile.svg")).expect("profile figure");
    let svg = std::fs::read_to_string(figs.join(profile)).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("class=\"point\"").count(), 24);
    assert_eq!(svg.matches("class=\"errbar\"").count(), 24);
    assert_eq!(svg.matches("class=\"cosinor-fit\"").count(), 1);

    let heat = names.iter().find(|n| n.ends_with("_h_local_heatmap.svg")).expect("heatmap figure");
    let svg = std::fs::read_to_string(figs.join(heat)).unwrap();
    // All twelve months are laid out; only the two sampled months have solar marks.
    assert_eq!(svg.matches("class=\"cell\"").count(), 12 * 24);
    assert_eq!(svg.matches("class=\"sunrise\"").count(), 2);
    assert_eq!(svg.matches("class=\"sunset\"").count(), 2);
    assert!(names.iter().any(|n| n == "scaling_gain_arrival.svg"));
}

#[test]
fn empty_corpus_fails_at_entropy_with_manifest_only() {
    let dir = corpus(serde_json::json!({"policy": {"require_lang": "xx"}}));
    let o = run(&["run", "--config", "run.json", "--out", "out"], dir.path());
    assert!(!o.status.success());
    let out = dir.path().join("out");
    let present = files(&out);
    assert_eq!(present.keys().collect::<Vec<_>>(), [Path::new("manifest.json")]);
    let m: serde_json::Value = serde_json::from_slice(&present[Path::new("manifest.json")]).unwrap();
    assert_eq!(m["status"]["state"], "failed");
    assert_eq!(m["status"]["stage"], "entropy");
    assert!(m["status"]["message"].as_str().unwrap().contains("no records remain"));
}

#[test]
fn failed_run_clears_previous_outputs() {
    let dir = corpus(serde_json::json!({}));
    run_ok(dir.path(), "out");
    std::fs::remove_file(dir.path().join("e.csem")).unwrap();
    let o = run(&["run", "--config", "run.json", "--out", "out"], dir.path());
    assert!(!o.status.success());
    let present = files(&dir.path().join("out"));
    assert_eq!(present.len(), 1);
    let m: serde_json::Value = serde_json::from_slice(&present[Path::new("manifest.json")]).unwrap();
    assert_eq!(m["status"]["stage"], "config");
}

#[test]
fn manifest_rerun_is_byte_identical() {
    let dir = corpus(serde_json::json!({}));
    run_ok(dir.path(), "first");
    let elsewhere = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("first/manifest.json");
    let again = dir.path().join("again");
    let o = run(
        &["run", "--config", manifest.to_str().unwrap(), "--out", again.to_str().unwrap()],
        elsewhere.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(files(&dir.path().join("first")), files(&again));
}

#[test]
fn report_redraws_the_same_figures() {
    let dir = corpus(serde_json::json!({}));
    run_ok(dir.path(), "out");
    let figs = dir.path().join("out/figures");
    let before = files(&figs);
    std::fs::remove_dir_all(&figs).unwrap();
    let o = run(&["report", "--dir", "out"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(files(&figs), before);
}

#[test]
fn stage_commands_match_the_full_run() {
    let dir = corpus(serde_json::json!({}));
    run_ok(dir.path(), "out");
    let d = dir.path();
    let steps: [&[&str]; 3] = [
        &["ingest", "--records", "r.jsonl", "--embeddings", "e.csem", "--no-norm-check", "--out", "binned.idx"],
        &["entropy", "--binned", "binned.idx", "--embeddings", "e.csem", "--no-norm-check", "--out", "entropy.csv"],
        &["rhythm", "--entropy", "entropy.csv", "--fdr", "--out", "cosinor.csv"],
    ];
    for args in steps {
        let o = run(args, d);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["entropy.csv", "cosinor.csv"] {
        assert_eq!(std::fs::read(d.join(name)).unwrap(), std::fs::read(d.join("out").join(name)).unwrap(), "{name}");
    }
}

#[test]
fn bad_config_field_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.json"), r#"{"recrods": "r.jsonl"}"#).unwrap();
    let o = run(&["run", "--config", "run.json", "--out", "out"], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("recrods"));
}
