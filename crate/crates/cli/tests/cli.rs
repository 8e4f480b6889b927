use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn shapelink(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shapelink"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> Output {
    let o = shapelink(out, args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

const SMALL_BER: &str = r#"
seed = 11
[sweep]
ebn0_db = [4.0, 6.0]
stop = { min_errors = 1000000, max_bits = 2000, chunk_frames = 8 }

[[systems]]
name = "a"
link = { code = "reg36-n108", shaping = [2, 4], shaped = [0] }
receiver = { outer_iters = 3, bp_iters_per_outer = 5 }

[[systems]]
name = "b"
link = { code = "reg36-n108", shaping = [2, 4], shaped = [0] }
receiver = { outer_iters = 3, bp_iters_per_outer = 5 }
"#;

#[test]
fn codes_lists_and_writes_alist() {
    let t = TempDir::new().unwrap();
    let o = ok(t.path(), &["codes", "--write", "hamming74"]);
    let s = String::from_utf8(o.stdout).unwrap();
    for name in ["hamming74", "reg36-n96", "reg36-n1440", "peg-n1440-r23"] {
        assert!(s.contains(name), "{s}");
    }
    let h = shapelink_core::fec::ParityCheckMatrix::from_alist(&read(t.path().join("hamming74.alist"))).unwrap();
    assert_eq!((h.n(), h.checks()), (7, 3));
}

#[test]
fn incompatible_frame_is_a_config_error_naming_the_relation() {
    let t = TempDir::new().unwrap();
    let o = shapelink(
        t.path(),
        &["ber", "-o", "systems.0.link.code=reg36-n96", "-o", "systems.0.link.shaped=[0]"],
    );
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("|S| (n - L k_s + L n_s) = m L n_s"), "{err}");
}

#[test]
fn bad_inputs_map_to_exit_codes() {
    let t = TempDir::new().unwrap();
    let o = shapelink(t.path(), &["train", "-o", "train.bogus=1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("train.bogus: unknown field `bogus`"));

    let o = shapelink(t.path(), &["train", "-o", "train.batch=abc"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("train.batch"));

    let o = shapelink(t.path(), &["--config", "/nonexistent/run.toml", "train"]);
    assert_eq!(o.status.code(), Some(3));

    let o = shapelink(t.path(), &["--threads", "0", "codes"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn resumed_training_matches_uninterrupted_run() {
    let t = TempDir::new().unwrap();
    let (full, part, resumed) = (t.path().join("full"), t.path().join("part"), t.path().join("resumed"));
    let common = ["-o", "train.batch=100", "-o", "checkpoint_every=0", "--seed", "3"];
    let args = |iters: &'static str| [&["train", "-o", iters][..], &common[..]].concat();
    ok(&full, &args("train.iterations=12"));
    ok(&part, &args("train.iterations=5"));
    let ck = part.join("checkpoint.json").display().to_string();
    ok(&resumed, &[&args("train.iterations=12")[..], &["--resume", &ck][..]].concat());
    for f in ["constellation.json", "loss.csv", "checkpoint.json"] {
        assert_eq!(read(full.join(f)), read(resumed.join(f)), "{f}");
    }
}

#[test]
fn capacity_curve_is_monotone_and_bounded() {
    let t = TempDir::new().unwrap();
    ok(
        t.path(),
        &["capacity", "-o", "capacity.snr_db=[0,4,8,12,16,20]", "-o", "capacity.samples=4000", "-o", "capacity.gap_rate=0"],
    );
    let csv = read(t.path().join("capacity_apsk32.csv"));
    let caps: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(caps.len(), 6);
    assert!(caps.windows(2).all(|w| w[1] > w[0]), "{caps:?}");
    assert!(caps.iter().all(|&c| c > 0.0 && c < 5.0 + 1e-9));
    assert!(!t.path().join("gap.csv").exists());
}

#[test]
fn export_import_round_trip_is_exact() {
    let t = TempDir::new().unwrap();
    let (ex, im) = (t.path().join("ex"), t.path().join("im"));
    ok(&ex, &["export", "-o", "export.source=qam32", "-o", "export.shaped=[0]", "-o", "export.p0=0.8"]);
    let exported = ex.join("constellation.json");
    ok(&im, &["import", &exported.display().to_string()]);
    assert_eq!(read(&exported), read(im.join("constellation.json")));
    let report: serde_json::Value = serde_json::from_str(&read(im.join("report.json"))).unwrap();
    assert_eq!(report["m"], 5);
    assert_eq!(report["coincident_points"], false);
}

#[test]
fn import_rejects_wrong_point_count() {
    let t = TempDir::new().unwrap();
    let bad = write(t.path(), "bad.json", r#"{"m":2,"points":[[1,0],[0,1],[-1,0]],"label_order":"index"}"#);
    let o = shapelink(&t.path().join("o"), &["import", &bad]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn export_reads_training_checkpoints() {
    let t = TempDir::new().unwrap();
    let tr = t.path().join("tr");
    ok(&tr, &["train", "-o", "train.iterations=3", "-o", "train.batch=64"]);
    let ck = tr.join("checkpoint.json").display().to_string();
    let ex = t.path().join("ex");
    let report: serde_json::Value = serde_json::from_str(&read(tr.join("report.json"))).unwrap();
    let p0 = report["p0"].as_f64().unwrap();
    ok(&ex, &["export", "-o", &format!("export.source={ck}"), "-o", "export.shaped=[0]", "-o", &format!("export.p0={p0}")]);
    let a = shapelink_core::constellation::from_json(&read(ex.join("constellation.json"))).unwrap();
    let b = shapelink_core::constellation::from_json(&read(tr.join("constellation.json"))).unwrap();
    for (x, y) in a.points().iter().zip(b.points()) {
        assert!((x - y).norm() < 1e-12);
    }
}

#[test]
fn paired_systems_share_noise_and_unpaired_do_not() {
    let t = TempDir::new().unwrap();
    let cfg = write(t.path(), "ber.toml", SMALL_BER);
    let paired = t.path().join("paired");
    ok(&paired, &["--config", &cfg, "ber"]);
    assert_eq!(read(paired.join("ber_a.csv")), read(paired.join("ber_b.csv")));

    let unpaired = t.path().join("unpaired");
    ok(&unpaired, &["--config", &cfg, "-o", "sweep.paired=false", "ber"]);
    assert_ne!(read(unpaired.join("ber_a.csv")), read(unpaired.join("ber_b.csv")));
}

#[test]
fn thread_count_does_not_change_results() {
    let t = TempDir::new().unwrap();
    let cfg = write(t.path(), "ber.toml", SMALL_BER);
    let (one, three) = (t.path().join("one"), t.path().join("three"));
    ok(&one, &["--config", &cfg, "ber"]);
    ok(&three, &["--config", &cfg, "--threads", "3", "ber"]);
    assert_eq!(read(one.join("ber_a.csv")), read(three.join("ber_a.csv")));
}

fn csv_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    v.sort();
    v
}

#[test]
fn manifest_replay_reproduces_csvs() {
    let t = TempDir::new().unwrap();
    let cfg = write(t.path(), "ber.toml", SMALL_BER);
    let runs: [(&str, Vec<String>); 3] = [
        ("ber", vec!["--config".into(), cfg, "ber".into()]),
        ("train", ["train", "-o", "train.iterations=4", "-o", "train.batch=50"].map(String::from).into()),
        ("cap", ["capacity", "-o", "capacity.samples=2000", "-o", "capacity.gap_samples=2000"].map(String::from).into()),
    ];
    for (name, args) in runs {
        let (first, again) = (t.path().join(name), t.path().join(format!("{name}-replay")));
        ok(&first, &args.iter().map(String::as_str).collect::<Vec<_>>());
        let manifest = read(first.join("manifest.toml"));
        assert!(manifest.contains("artifacts"), "{manifest}");
        ok(&again, &["replay", &first.join("manifest.toml").display().to_string()]);
        let files = csv_files(&first);
        assert!(!files.is_empty());
        assert_eq!(files, csv_files(&again));
        for f in files {
            assert_eq!(read(first.join(&f)), read(again.join(&f)), "{name}/{f}");
        }
    }
}

#[test]
fn neural_demapper_trains_and_plugs_into_ber() {
    let t = TempDir::new().unwrap();
    let tr = t.path().join("tr");
    let fading = r#"{ kind = "fading", n_bf = 19, n_p = 3, k_factor = 10.0, csi = "estimated" }"#;
    ok(
        &tr,
        &[
            "train",
            "-o",
            "train.iterations=3",
            "-o",
            "train.batch=64",
            "-o",
            "train.demapper=neural",
            "-o",
            &format!("train.channel={fading}"),
        ],
    );
    let dm = tr.join("demapper.json");
    assert!(dm.exists());
    let cfg = format!(
        r#"
[sweep]
ebn0_db = [8.0]
stop = {{ min_errors = 1000000, max_bits = 500, chunk_frames = 4 }}
[[systems]]
name = "nd"
link = {{ code = "reg36-n108", shaping = [2, 4], shaped = [0], constellation = "{}" }}
receiver = {{ outer_iters = 2, bp_iters_per_outer = 5 }}
channel = {fading}
demapper = "{}"
"#,
        tr.join("constellation.json").display(),
        dm.display()
    );
    let cfg = write(t.path(), "nd.toml", &cfg);
    let b = t.path().join("ber");
    ok(&b, &["--config", &cfg, "ber"]);
    assert!(read(b.join("ber_nd.csv")).lines().count() == 2);
}

#[test]
fn idd_training_writes_per_iteration_losses() {
    let t = TempDir::new().unwrap();
    let cfg = write(
        t.path(),
        "idd.toml",
        r#"
[link]
code = "reg36-n108"
shaped = [0]
[train_idd]
outer_iters = 3
batch_frames = 4
iterations = 2
ebn0_db = [5.0, 6.0]
"#,
    );
    ok(t.path(), &["--config", &cfg, "train-idd"]);
    let csv = read(t.path().join("loss.csv"));
    assert!(csv.starts_with("step,loss,bce,entropy,p0,grad_norm,bce_iter1,bce_iter2,bce_iter3\n"), "{csv}");
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn shipped_configs_run() {
    let t = TempDir::new().unwrap();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let cases: [(&str, &str, &[&str]); 5] = [
        ("ber_awgn_n1440.toml", "ber", &["sweep.stop.max_bits=1000", "sweep.ebn0_db=[7.0]"]),
        ("ber_fading.toml", "ber", &["sweep.stop.max_bits=1000", "sweep.ebn0_db=[8.0]"]),
        ("train.toml", "train", &["train.iterations=2", "train.batch=50"]),
        ("train_idd.toml", "train-idd", &["train_idd.iterations=1", "train_idd.batch_frames=2"]),
        ("capacity.toml", "capacity", &["capacity.samples=500", "capacity.gap_samples=500"]),
    ];
    for (file, cmd, overrides) in cases {
        let cfg = dir.join(file).display().to_string();
        let mut args = vec!["--config", cfg.as_str(), cmd];
        for o in overrides {
            args.extend(["-o", o]);
        }
        ok(&t.path().join(file), &args);
    }
}
