use std::path::Path;
use std::process::{Command, Output};

fn mcnam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcnam"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mcnam(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_is_deterministic_and_versioned() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    ok(&["gen", "--rule", "suffix", "--seed", "4", "--out", s(&a)]);
    ok(&["gen", "--rule", "suffix", "--seed", "4", "--out", s(&b)]);
    let ta = std::fs::read_to_string(&a).unwrap();
    assert_eq!(ta, std::fs::read_to_string(&b).unwrap());
    let v: serde_json::Value = serde_json::from_str(&ta).unwrap();
    assert_eq!(v["version"], 1);
    assert_eq!(v["kind"], "morphology");
}

#[test]
fn train_then_pca() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.json");
    let config = dir.path().join("cfg.json");
    let model = dir.path().join("m.json");
    let metrics = dir.path().join("metrics.csv");
    let traj = dir.path().join("traj.csv");
    ok(&["gen", "--rule", "template3_favored", "--seed", "2", "--out", s(&corpus)]);
    std::fs::write(&config, r#"{"epochs": 2, "seed": 5}"#).unwrap();
    ok(&[
        "train", "--corpus", s(&corpus), "--config", s(&config),
        "--out-model", s(&model), "--out-metrics", s(&metrics),
    ]);
    let csv = std::fs::read_to_string(&metrics).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "suite,rule,seed,epoch,split,root_acc,tense_acc,aspect_acc,mean_err");
    assert_eq!(lines.len(), 1 + 2 * 2);
    assert!(lines[1].starts_with("train,template3_favored,5,1,train,"));

    let c: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&corpus).unwrap()).unwrap();
    let root: String = c["roots"][0]["symbols"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    ok(&[
        "pca", "--model", s(&model), "--corpus", s(&corpus), "--module", "root",
        "--words", &root, "--k", "2", "--out", s(&traj),
    ]);
    let t = std::fs::read_to_string(&traj).unwrap();
    assert!(t.starts_with("word,step,phone,pc1,pc2\n"));
    // three forms of a triliteral root, six phones plus the leading boundary each
    assert_eq!(t.lines().count(), 1 + 3 * 7);

    let bad = mcnam(&[
        "pca", "--model", s(&model), "--corpus", s(&corpus), "--words", "zzz", "--out", s(&traj),
    ]);
    assert!(!bad.status.success());
}

#[test]
fn experiment_writes_artifacts_and_repeats_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    std::fs::write(&config, r#"{"epochs": 2}"#).unwrap();
    let run = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec![
            "experiment", "--suite", "template3", "--replicates", "2", "--seed", "3",
            "--config", s(&config), "--out-dir", s(&out),
        ];
        args.extend_from_slice(extra);
        ok(&args);
        std::fs::read(out.join("results.csv")).unwrap()
    };
    let a = run("a", &[]);
    let b = run("b", &["--sequential"]);
    let c = run("c", &["--jobs", "2"]);
    assert_eq!(a, b);
    assert_eq!(a, c);
    for f in ["summary.csv", "manifest.json", "corpora/template3_favored-r01.json", "models/template3_favored-r00.json"] {
        assert!(dir.path().join("a").join(f).exists(), "missing {f}");
    }
}

#[test]
fn syllables_respect_limit() {
    let all = ok(&["syllables"]);
    let few = ok(&["syllables", "--limit", "7"]);
    assert_eq!(few.lines().count(), 7);
    assert!(all.starts_with(&few));
    assert!(all.lines().count() > 7);
}

#[test]
fn custom_feature_table_is_used_and_validated() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"version\": 1}").unwrap();
    assert!(!mcnam(&["--features", s(&bad), "syllables"]).status.success());
    assert!(!mcnam(&["--features", s(&dir.path().join("missing.json")), "syllables"]).status.success());
}

#[test]
fn gradcheck_reports_small_deviation() {
    let out = ok(&["gradcheck"]);
    let dev: f64 = out.trim().rsplit(' ').next().unwrap().parse().unwrap();
    assert!(dev < 1e-4);
}

#[test]
fn bad_rule_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = mcnam(&["gen", "--rule", "nonsense", "--out", s(&dir.path().join("x.json"))]);
    assert!(!out.status.success());
}

#[test]
fn features_flag_loads_an_equivalent_table() {
    let dir = tempfile::tempdir().unwrap();
    let shipped = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/features.json");
    let copy = dir.path().join("features.json");
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(shipped).unwrap()).unwrap();
    std::fs::write(&copy, serde_json::to_string(&v).unwrap()).unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    ok(&["gen", "--rule", "prefix", "--out", s(&a)]);
    ok(&["--features", s(&copy), "gen", "--rule", "prefix", "--out", s(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    // dropping a phone the inventory needs must fail
    let rows = v["rows"].as_object_mut().unwrap();
    rows.remove("p");
    std::fs::write(&copy, serde_json::to_string(&v).unwrap()).unwrap();
    assert!(!mcnam(&["--features", s(&copy), "gen", "--rule", "prefix", "--out", s(&b)]).status.success());
}
