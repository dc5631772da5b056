use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gaifman::kb::TripleFormat;
use gaifman::synth::planted_rule;

fn gaifman(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaifman"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

struct Workdir(PathBuf);

impl Workdir {
    fn new(name: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("gaifman-cli-{}-{name}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        Workdir(dir)
    }

    fn path(&self, name: &str) -> String {
        self.0.join(name).to_string_lossy().into_owned()
    }
}

impl Drop for Workdir {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.0);
    }
}

/// Writes a small planted-rule KB and its held-out facts.
fn write_kb(dir: &Workdir) -> (String, String) {
    let split = planted_rule(40, 0.06, 0.2, 5);
    let kb = dir.path("train.txt");
    let test = dir.path("test.txt");
    split
        .train
        .write_facts(fs::File::create(&kb).unwrap(), TripleFormat::Triples)
        .unwrap();
    let lines: String = split
        .test
        .iter()
        .map(|f| split.train.format_fact(f, TripleFormat::Triples) + "\n")
        .collect();
    fs::write(&test, lines).unwrap();
    (kb, test)
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(p).unwrap(),
            )
        })
        .collect()
}

#[test]
fn help_and_version_exit_zero() {
    let o = gaifman(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("build-dataset"));
    let o = gaifman(&["--version"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(gaifman(&[]).status.code(), Some(1));
    assert_eq!(gaifman(&["stats"]).status.code(), Some(1));
    assert_eq!(gaifman(&["frobnicate"]).status.code(), Some(1));
    let dir = Workdir::new("usage");
    let (kb, _) = write_kb(&dir);
    let o = gaifman(&["build-dataset", "--kb", &kb, "--out", &dir.path("d.bin")]);
    assert_eq!(
        o.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn data_errors_exit_two() {
    let dir = Workdir::new("data");
    let o = gaifman(&["stats", "--kb", &dir.path("missing.txt")]);
    assert_eq!(o.status.code(), Some(2));
    let (kb, _) = write_kb(&dir);
    let o = gaifman(&["sample", "--kb", &kb, "--tuple", "e0 nobody"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nobody"));
    let o = gaifman(&["sample", "--kb", &kb, "--tuple", "e0 e1 e2", "--k", "2"]);
    assert_eq!(o.status.code(), Some(2));
    fs::write(dir.path("bad.txt"), "a\tr\n").unwrap();
    assert_eq!(
        gaifman(&["stats", "--kb", &dir.path("bad.txt")])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn stats_reports_counts() {
    let dir = Workdir::new("stats");
    fs::write(dir.path("kb.txt"), "a\tr\tb\nb\tr\tc\nc\ts\ta\n").unwrap();
    let o = gaifman(&["stats", "--kb", &dir.path("kb.txt")]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("objects\t3"));
    assert!(text.contains("relations\t2"));
    assert!(text.contains("facts\t3"));
    assert!(text.contains("degree,count\n2,3"));
}

#[test]
fn sample_is_deterministic_json() {
    let dir = Workdir::new("sample");
    let (kb, _) = write_kb(&dir);
    let args = [
        "sample", "--kb", &kb, "--tuple", "e1 e2", "--k", "4", "--w", "3", "--seed", "9",
    ];
    let a = gaifman(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&gaifman(&args)));
    let lines: Vec<serde_json::Value> = stdout(&a)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    for l in &lines {
        let members = l["members"].as_array().unwrap();
        assert!(members.len() <= 4);
        assert!(members.contains(&"e1".into()) && members.contains(&"e2".into()));
    }
}

#[test]
fn dataset_round_trip_through_inspect() {
    let dir = Workdir::new("dataset");
    let (kb, _) = write_kb(&dir);
    let out = dir.path("r3.bin");
    let o = gaifman(&[
        "build-dataset",
        "--kb",
        &kb,
        "--query",
        "exists y . r1(s1, y) & r2(y, s2)",
        "--out",
        &out,
        "--w",
        "2",
        "--neg",
        "3",
        "--csv",
        &dir.path("r3.csv"),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let o = gaifman(&["inspect", &out]);
    assert_eq!(o.status.code(), Some(0));
    let header = stdout(&o);
    assert!(header.starts_with("gaifman-dataset v1"));
    assert!(header.contains("w=2"));
    let csv = fs::read_to_string(dir.path("r3.csv")).unwrap();
    let o = gaifman(&["inspect", &out, "--csv"]);
    assert_eq!(stdout(&o), csv);
}

#[test]
fn train_predict_eval_pipeline() {
    let dir = Workdir::new("pipeline");
    let (kb, test) = write_kb(&dir);
    let train = |out: &str| {
        let o = gaifman(&[
            "train",
            "--kb",
            &kb,
            "--out",
            out,
            "--relations",
            "r3",
            "--epochs",
            "3",
            "--w",
            "2",
            "--neg",
            "4",
            "--k",
            "10",
            "--seed",
            "4",
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
    };
    let a = dir.path("a");
    let b = dir.path("b");
    train(&a);
    train(&b);
    assert_eq!(read_dir_bytes(Path::new(&a)), read_dir_bytes(Path::new(&b)));

    let first_test = fs::read_to_string(&test)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .replace('\t', " ");
    let o = gaifman(&[
        "predict",
        "--bundle",
        &a,
        "--kb",
        &kb,
        "--triple",
        &first_test,
        "--n",
        "3",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let p: f64 = stdout(&o).trim().parse().unwrap();
    assert!((0.0..=1.0).contains(&p));
    let o2 = gaifman(&[
        "predict",
        "--bundle",
        &a,
        "--kb",
        &kb,
        "--triple",
        &first_test,
        "--n",
        "3",
    ]);
    assert_eq!(stdout(&o), stdout(&o2));

    let o = gaifman(&["predict", "--bundle", &a, "--kb", &kb, "--triple", "e0 r1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = gaifman(&[
        "predict",
        "--bundle",
        &a,
        "--kb",
        &test,
        "--triple",
        &first_test,
    ]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "KB hash mismatch must be rejected"
    );

    let csv = dir.path("report.csv");
    let o = gaifman(&[
        "eval",
        "--bundle",
        &a,
        "--kb",
        &kb,
        "--test",
        &test,
        "--candidates",
        "sample(20)",
        "--limit",
        "10",
        "--csv",
        &csv,
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let report = fs::read_to_string(&csv).unwrap();
    assert!(report.starts_with("direction,count,mean_rank"));
    assert!(report.lines().nth(3).unwrap().starts_with("both,20,"));

    let o = gaifman(&[
        "bench", "--bundle", &a, "--kb", &kb, "--test", &test, "--ks", "4,8", "--limit", "5",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let rows: Vec<String> = stdout(&o).lines().map(str::to_owned).collect();
    assert_eq!(rows[0], "k,answers_per_sec");
    assert_eq!(rows.len(), 3);

    let o = gaifman(&["inspect", &a]);
    assert!(stdout(&o).starts_with("gaifman-bundle v1"));
}
