use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use genfield::losses::ImageTensor;
use tempfile::TempDir;

fn genfield(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genfield"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Data rows of a single-section CSV report.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const TOY: &str = r#"
name = "toy"
base_resolution = 4

[[layers]]
kernel = 3
upsample = 2
channels_in = 8
channels_out = 8

[[layers]]
kernel = 3
upsample = 1
channels_in = 8
channels_out = 8
"#;

const STRIDE1: &str = r#"
name = "stride1"
base_resolution = 32

[[layers]]
kernel = 3
upsample = 1
channels_in = 4
channels_out = 4

[[layers]]
kernel = 5
upsample = 1
channels_in = 4
channels_out = 4

[[layers]]
kernel = 3
upsample = 1
channels_in = 4
channels_out = 4
"#;

#[test]
fn fields_preset_table() {
    let o = genfield(&["fields", "--preset", "stylegan2-256"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.starts_with("# genfield "));
    assert!(out.contains("# command: fields\n"));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 13);
    let gf: Vec<u64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert_eq!(gf, [507, 379, 251, 187, 123, 91, 59, 43, 27, 19, 11, 7, 3]);
    assert_eq!(rows[0][5], "[1]");
    assert!(out.contains("507 differs from the published value 506"));
}

#[test]
fn fields_of_smaller_preset_and_file() {
    let o = genfield(&["fields", "--preset", "stylegan2-64"]);
    assert!(o.status.success());
    assert_eq!(csv_rows(&stdout(&o)).len(), 9);

    let dir = TempDir::new().unwrap();
    let toy = write(&dir, "toy.toml", TOY);
    let o = genfield(&["fields", "--arch", s(&toy), "--format", "csv"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("layer_id,style_label,input_resolution,generative_field,channels_in\n"));
    assert!(!out.contains("footnote"));
    let rows = csv_rows(&out);
    assert_eq!(rows[0][3], "7");
    assert_eq!(rows[1][3], "3");
}

#[test]
fn reports_are_deterministic() {
    for args in [
        vec!["fields", "--preset", "stylegan2-256", "--format", "json"],
        vec!["verify", "--preset", "stylegan2-64", "--numeric", "--seed", "9"],
        vec![
            "plan",
            "--preset",
            "stylegan2-256",
            "--config",
            "3",
            "--format",
            "table",
        ],
    ] {
        let a = genfield(&args);
        let b = genfield(&args);
        assert_eq!(a.stdout, b.stdout);
        assert!(a.status.success());
    }
}

#[test]
fn json_report_has_meta() {
    let o = genfield(&["plan", "--preset", "stylegan2-256", "--config", "5", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["meta"]["command"], "plan");
    assert_eq!(v["meta"]["params"]["config"], "5");
    assert_eq!(v["sections"]["plan"][0]["first_layer"], "conv6");
    assert_eq!(v["sections"]["plan"][0]["last_layer"], "conv11");
}

#[test]
fn verify_exit_codes() {
    let o = genfield(&["verify", "--preset", "stylegan2-256", "--sim-base", "16"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 13);
    assert!(rows.iter().all(|r| r[5] == "exact" || r[5] == "under"));

    let dir = TempDir::new().unwrap();
    let stride1 = write(&dir, "s1.toml", STRIDE1);
    let o = genfield(&["verify", "--arch", s(&stride1), "--numeric"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(csv_rows(&stdout(&o)).iter().all(|r| r[5] == "exact"));

    // a k=1 upsampling layer under nearest semantics overshoots the field
    let over = write(
        &dir,
        "over.toml",
        "name = \"over\"\nbase_resolution = 8\n[[layers]]\nkernel = 1\nupsample = 2\nchannels_in = 1\nchannels_out = 1\n",
    );
    let o = genfield(&["verify", "--arch", s(&over), "--semantics", "nearest"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("OVER-BUG"));

    let bad = write(
        &dir,
        "bad.toml",
        "name = \"x\"\nbase_resolution = 4\n[[layers]]\nkernel = \"three\"\n",
    );
    let o = genfield(&["verify", "--arch", s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.toml"));
}

#[test]
fn verify_layer_filter_and_2d() {
    let o = genfield(&[
        "verify",
        "--preset",
        "stylegan2-32",
        "--layers",
        "conv3..conv6",
        "--dims",
        "2d",
        "--numeric",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    let ids: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(ids, ["conv3", "conv4", "conv5", "conv6"]);
    assert!(rows.iter().all(|r| r[2] == r[6]));
}

#[test]
fn plan_configs_and_errors() {
    let expect = [
        ("conv0", "conv7"),
        ("conv0", "conv4"),
        ("conv0", "conv2"),
        ("conv3", "conv6"),
        ("conv6", "conv11"),
    ];
    for (c, (first, last)) in expect.iter().enumerate() {
        let o = genfield(&[
            "plan",
            "--preset",
            "stylegan2-256",
            "--config",
            &(c + 1).to_string(),
            "--format",
            "json",
        ]);
        assert!(o.status.success());
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["sections"]["plan"][0]["first_layer"], *first);
        assert_eq!(v["sections"]["plan"][0]["last_layer"], *last);
    }
    let o = genfield(&[
        "plan",
        "--preset",
        "stylegan2-256",
        "--min-gf",
        "43",
        "--max-gf",
        "506",
        "--format",
        "json",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["sections"]["plan"][0]["mask_rle"], "4096x1,832x0");

    let o = genfield(&[
        "plan",
        "--preset",
        "stylegan2-256",
        "--min-gf",
        "600",
        "--max-gf",
        "700",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no layer"));

    let o = genfield(&[
        "plan",
        "--preset",
        "stylegan2-256",
        "--config",
        "1",
        "--layers",
        "conv0..conv1",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = genfield(&["plan", "--preset", "stylegan2-256"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn analyze_small_signals() {
    let dir = TempDir::new().unwrap();
    let d = write(&dir, "d.csv", "1,5,2,0,3\n0,0,0,0,0\n-1,-4,2,9,0\n");
    let m = dir.path().join("m.csv");
    let o = genfield(&[
        "analyze",
        s(&d),
        "--top-k",
        "3",
        "--membership",
        s(&m),
        "--format",
        "json",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["sections"]["summary"][0]["top_k"], 3);
    assert_eq!(v["sections"]["histogram"].as_array().unwrap().len(), 20);
    assert!(v["notes"].to_string().contains("all-zero control signal in test(s) 1"));
    let membership = fs::read_to_string(&m).unwrap();
    for row in membership.lines().skip(1) {
        assert_eq!(row.split(',').skip(1).filter(|c| *c == "1").count(), 3);
    }

    let ragged = write(&dir, "r.csv", "1,2,3\n4,5\n");
    assert_eq!(genfield(&["analyze", s(&ragged)]).status.code(), Some(1));
}

#[test]
fn stats_then_loglik() {
    let dir = TempDir::new().unwrap();
    let styles = write(&dir, "styles.csv", "0,0\n2,2\n");
    let stats = dir.path().join("stats.csv");
    let o = genfield(&["stats", s(&styles), "--output", s(&stats)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&stats).unwrap();
    assert_eq!(csv_rows(&text), [["0", "1.0", "1.0"], ["1", "1.0", "1.0"]]);

    let mu = write(&dir, "mu.csv", "1,1\n3,1\n");
    let o = genfield(&[
        "loglik",
        "--stats",
        s(&stats),
        s(&mu),
        "--grad",
        "--fd-check",
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["sections"]["loglik"][0]["loglik"], 0.0);
    assert_eq!(v["sections"]["loglik"][1]["loglik"], -2.0);
    assert_eq!(v["sections"]["gradient"][2]["grad"], -2.0);

    let one = write(&dir, "one.csv", "1,2\n");
    assert_eq!(genfield(&["stats", s(&one)]).status.code(), Some(1));
}

#[test]
fn loglik_objective_column() {
    let dir = TempDir::new().unwrap();
    let stats = write(&dir, "st.csv", "dim,mu,sigma\n0,0,2\n");
    let sample = write(&dir, "x.csv", "2\n");
    let o = genfield(&[
        "loglik",
        "--stats",
        s(&stats),
        s(&sample),
        "--weight",
        "0.5",
        "--base-loss",
        "1",
        "--format",
        "json",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["sections"]["loglik"][0]["loglik"], -0.5);
    assert_eq!(v["sections"]["loglik"][0]["objective"], 1.25);
}

fn face_csv(offset: f64) -> String {
    (0..68)
        .map(|i| {
            format!(
                "{},{},{}\n",
                40.0 + i as f64 + offset,
                80.0 + (i % 7) as f64,
                0.5 * i as f64
            )
        })
        .collect()
}

fn image(dir: &TempDir, name: &str, f: impl Fn(usize, usize) -> f64) -> PathBuf {
    let (h, w) = (180, 184);
    let f = &f;
    let data = (0..h).flat_map(|r| (0..w).flat_map(move |c| [f(r, c); 3])).collect();
    let p = dir.path().join(name);
    ImageTensor::new(h, w, 3, data).unwrap().write_pnm(&p).unwrap();
    p
}

#[test]
fn losses_from_files() {
    let dir = TempDir::new().unwrap();
    let emb = write(&dir, "e.csv", "0.1,0.2,0.3,0.4\n");
    let lm = write(&dir, "lm.csv", &face_csv(0.0));
    let pose = write(&dir, "p.csv", "0.1,-0.2,0.05\n");
    let img = image(&dir, "a.ppm", |r, c| ((r * 7 + c * 3) % 50) as f64 / 50.0);
    let same = [
        "losses",
        "--id-embedding",
        s(&emb),
        "--out-embedding",
        s(&emb),
        "--attr-landmarks",
        s(&lm),
        "--out-landmarks",
        s(&lm),
        "--attr-pose",
        s(&pose),
        "--out-pose",
        s(&pose),
        "--attr-image",
        s(&img),
        "--out-image",
        s(&img),
        "--same-inputs",
        "--resolution",
        "256",
        "--format",
        "json",
    ];
    let o = genfield(&same);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for row in v["sections"]["components"].as_array().unwrap() {
        assert_eq!(row["value"], 0.0, "{row}");
    }
    assert!((v["sections"]["eval"][0]["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let emb2 = write(&dir, "e2.csv", "0.1,0.2,0.3,0.9\n");
    let lm2 = write(&dir, "lm2.csv", &face_csv(3.0));
    let img2 = image(&dir, "b.ppm", |r, c| ((r * 5 + c) % 40) as f64 / 40.0);
    let o = genfield(&[
        "losses",
        "--id-embedding",
        s(&emb),
        "--out-embedding",
        s(&emb2),
        "--attr-landmarks",
        s(&lm),
        "--out-landmarks",
        s(&lm2),
        "--attr-image",
        s(&img),
        "--out-image",
        s(&img2),
        "--format",
        "json",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let comp = &v["sections"]["components"];
    assert!((comp[0]["value"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    // 51 inner landmarks shifted by 3 along x
    assert!((comp[1]["value"].as_f64().unwrap() - 3.0 * 51f64.sqrt()).abs() < 1e-9);
    assert_eq!(comp[2]["value"], 0.0, "gated without --same-inputs");
    assert!(v["notes"].to_string().contains("gated off"));
}

#[test]
fn losses_input_errors() {
    let dir = TempDir::new().unwrap();
    let lm = write(&dir, "lm.csv", &face_csv(0.0));
    let missing = dir.path().join("nowhere.csv");
    let o = genfield(&["losses", "--attr-landmarks", s(&lm), "--out-landmarks", s(&missing)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nowhere.csv"));

    let e1 = write(&dir, "e1.csv", "1,2,3\n");
    let e2 = write(&dir, "e2.csv", "1,2\n");
    let o = genfield(&["losses", "--id-embedding", s(&e1), "--out-embedding", s(&e2)]);
    assert_eq!(o.status.code(), Some(1));

    let o = genfield(&["losses", "--id-embedding", s(&e1)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn weighted_total_from_components() {
    let o = genfield(&["losses", "--components", "1,1,1", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["sections"]["components"][3]["value"], 1.03);
    let o = genfield(&[
        "losses",
        "--components",
        "2,0,0",
        "--lambdas",
        "0.5,1,1",
        "--format",
        "json",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["sections"]["components"][3]["value"], 1.0);
}

#[test]
fn output_flag_and_usage_errors() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("fields.txt");
    let o = genfield(&[
        "fields",
        "--preset",
        "stylegan2-8",
        "--output",
        s(&out),
        "--format",
        "table",
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert!(fs::read_to_string(&out).unwrap().contains("[fields]"));

    assert_eq!(genfield(&["fields", "--preset", "biggan-128"]).status.code(), Some(1));
    assert_eq!(genfield(&["nonsense"]).status.code(), Some(1));
    assert_eq!(genfield(&["--help"]).status.code(), Some(0));
}
