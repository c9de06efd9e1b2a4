use std::path::Path;
use std::process::{Command, Output};

const STUB: &str = r#"
[environment]
name = "stub"

[algorithm]
name = "pasta"
total_iterations = 4

[ppo]
horizon = 64
minibatch = 16
epochs = 2

[output]
eval_every = 2
eval_episodes = 2
"#;

fn pasta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pasta")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path) -> String {
    let p = dir.join("stub.toml");
    std::fs::write(&p, STUB).unwrap();
    p.to_string_lossy().into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_config_names_the_path() {
    let o = pasta(&["train", "--config", "/no/such/dir/run.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/dir/run.toml"), "{}", stderr(&o));
}

#[test]
fn same_seed_gives_identical_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let o = pasta(&["train", "--config", &cfg, "--seed", "7", "--out", s(d), "--quiet"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let x = std::fs::read(a.join("metrics.csv")).unwrap();
    assert_eq!(x, std::fs::read(b.join("metrics.csv")).unwrap());
    assert!(String::from_utf8(x).unwrap().starts_with("# manifest: manifest.json\n"));

    // Re-running from the manifest reproduces the file as well.
    let c = tmp.path().join("c");
    let o = pasta(&[
        "train",
        "--manifest",
        s(&a.join("manifest.json")),
        "--out",
        s(&c),
        "--quiet",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(a.join("metrics.csv")).unwrap(),
        std::fs::read(c.join("metrics.csv")).unwrap()
    );
}

#[test]
fn off_simplex_preference_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let o = pasta(&[
        "train",
        "--config",
        &cfg,
        "--override",
        "algorithm.preference=[0.5, 0.6]",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("simplex"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_are_listed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let o = pasta(&[
        "train",
        "--config",
        &cfg,
        "--override",
        "ppo.gama=0.9",
        "--override",
        "output.dri=x",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("ppo.gama") && e.contains("output.dri"), "{e}");
}

#[test]
fn evaluate_and_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let run = tmp.path().join("run");
    assert!(pasta(&["train", "--config", &cfg, "--out", s(&run), "--quiet"])
        .status
        .success());
    let log = tmp.path().join("eval.jsonl");
    let o = pasta(&["evaluate", "--run", s(&run), "--episodes", "2", "--trajectory", s(&log)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["mean_returns"].as_array().unwrap().len(), 2);
    let o = pasta(&["replay", s(&log)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains(" 0 mismatches"));

    // Tampering with one recorded reward is caught.
    let text = std::fs::read_to_string(&log).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut rec: serde_json::Value = serde_json::from_str(&lines[1]).unwrap();
    rec["reward"][0] = serde_json::json!(rec["reward"][0].as_f64().unwrap() + 1e-9);
    lines[1] = rec.to_string();
    std::fs::write(&log, lines.join("\n") + "\n").unwrap();
    assert!(!pasta(&["replay", s(&log)]).status.success());
}

#[test]
fn compare_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    let o = pasta(&["compare", s(&empty), "--out", s(&tmp.path().join("cmp"))]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains(s(&empty)), "{}", stderr(&o));

    // Runs on different environments are refused with the differing keys.
    let cfg = write_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(pasta(&["train", "--config", &cfg, "--out", s(&a), "--quiet"])
        .status
        .success());
    let o = pasta(&[
        "train",
        "--config",
        &cfg,
        "--out",
        s(&b),
        "--quiet",
        "--override",
        "environment.stub.episode_length=8",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = pasta(&["compare", s(&a), s(&b), "--out", s(&tmp.path().join("cmp"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("environment.stub.episode_length"), "{}", stderr(&o));
}

#[test]
fn single_method_wins_everywhere() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let root = tmp.path().join("runs");
    let o = pasta(&[
        "sweep",
        "--config",
        &cfg,
        "--axis",
        "preference=0.3,0.7;0.6,0.4",
        "--axis",
        "seed=1..2",
        "--out",
        s(&root),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = tmp.path().join("cmp");
    let o = pasta(&["compare", s(&root), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(out.join("summary.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][3], "1.0000000000");
    let per = std::fs::read_to_string(out.join("per_preference.csv")).unwrap();
    assert_eq!(per.lines().count(), 3);
}

fn manifests(root: &Path) -> Vec<serde_json::Value> {
    let mut out = Vec::new();
    let mut dirs: Vec<_> = std::fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).collect();
    dirs.sort();
    for d in dirs {
        let text = std::fs::read_to_string(d.join("manifest.json")).unwrap();
        out.push(serde_json::from_str(&text).unwrap());
    }
    out
}

#[test]
fn sweep_grids() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());

    let root = tmp.path().join("mu");
    let o = pasta(&[
        "sweep",
        "--config",
        &cfg,
        "--axis",
        "mu_fixed=0.01,0.1,0.5,1.0,5.0,10.0",
        "--out",
        s(&root),
        "--dry-run",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifests(&root);
    assert_eq!(m.len(), 6);
    assert!(m.iter().all(|x| x["config"]["algorithm"]["name"] == "fixed_stch"));
    let labels: Vec<&str> = m.iter().map(|x| x["algorithm"].as_str().unwrap()).collect();
    assert!(
        labels.contains(&"stch_0.01") && labels.contains(&"stch_10"),
        "{labels:?}"
    );

    let root = tmp.path().join("pref");
    let o = pasta(&[
        "sweep",
        "--config",
        &cfg,
        "--override",
        "environment.stub.objectives=3",
        "--axis",
        "preference=benchmark",
        "--out",
        s(&root),
        "--dry-run",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifests(&root);
    assert_eq!(m.len(), 8);
    for x in &m {
        let sum: f64 = x["preference"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .sum();
        assert!((sum - 1.0).abs() <= 1e-9);
    }

    let root = tmp.path().join("seed");
    let o = pasta(&[
        "sweep",
        "--config",
        &cfg,
        "--axis",
        "seed=1..5",
        "--out",
        s(&root),
        "--dry-run",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifests(&root);
    assert_eq!(m.len(), 5);
    let seeds: Vec<u64> = m.iter().map(|x| x["seed"].as_u64().unwrap()).collect();
    assert_eq!(seeds, vec![1, 2, 3, 4, 5]);
    // Apart from the seed and the output directory the configs are identical.
    let strip = |x: &serde_json::Value| {
        let mut c = x["config"].clone();
        c["algorithm"]["seed"] = serde_json::Value::Null;
        c["output"]["dir"] = serde_json::Value::Null;
        c
    };
    assert!(m.iter().all(|x| strip(x) == strip(&m[0])));

    let o = pasta(&[
        "sweep",
        "--config",
        &cfg,
        "--axis",
        "gamma=0.9",
        "--out",
        s(&tmp.path().join("bad")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gamma"));
}

#[test]
fn toybench_writes_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("toy.csv");
    let o = pasta(&["toybench", "--runs", "4", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 4 * 3);
}
