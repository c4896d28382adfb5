use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const TINY: &str = r#"
keyframe_iters = 40
residual_iters = 15
entropy_refine_iters = 20
rays_per_batch = 128
samples = 16
basis_res = [[4, 4, 4], [6, 6, 6]]
basis_channels = 2
coeff_res = [4, 4, 4]
hidden = [8]
log_every = 10
"#;

fn resfield(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resfield"))
        .current_dir(dir)
        .env_remove("RESFIELD_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = resfield(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    resfield(dir, args).status.code().expect("exit code")
}

/// Three 16x16 frames from six cameras plus a seconds-long configuration.
fn workspace() -> TempDir {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("tiny.toml"), TINY).unwrap();
    ok(
        tmp.path(),
        &[
            "synth",
            "--out",
            "data",
            "--frames",
            "3",
            "--cameras",
            "6",
            "--test-every",
            "3",
            "--width",
            "16",
            "--height",
            "16",
            "--samples",
            "32",
        ],
    );
    tmp
}

fn gof_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".gof"))
        .collect();
    v.sort();
    v
}

#[test]
fn exit_codes() {
    let tmp = workspace();
    let d = tmp.path();
    assert_eq!(
        code(d, &["train", "--data", "data", "--out", "x", "--bogus"]),
        2
    );
    assert_eq!(
        code(d, &["train", "--data", "data", "--out", "x", "--q=-1"]),
        2
    );
    assert_eq!(
        code(
            d,
            &[
                "train",
                "--data",
                "data",
                "--out",
                "x",
                "--config",
                "tiny.toml",
                "--preset",
                "small"
            ]
        ),
        2
    );
    assert_eq!(code(d, &["--threads", "0", "synth", "--out", "s"]), 2);
    assert_eq!(code(d, &["train", "--data", "nowhere", "--out", "x"]), 1);
    assert_eq!(code(d, &["eval", "--data", "data", "missing.gof"]), 1);
    assert_eq!(
        code(d, &["decode", "--gof", "missing.gof", "--out", "g.json"]),
        1
    );
    fs::write(d.join("junk.gof"), b"GOFR not really").unwrap();
    assert_eq!(
        code(d, &["decode", "--gof", "junk.gof", "--out", "g.json"]),
        1
    );
    assert_eq!(code(d, &["--help"]), 0);
}

#[test]
fn train_decode_render_eval() {
    let tmp = workspace();
    let d = tmp.path();
    ok(
        d,
        &[
            "train",
            "--data",
            "data",
            "--out",
            "run",
            "--config",
            "tiny.toml",
            "--gof-len",
            "2",
        ],
    );
    let run = d.join("run");
    assert_eq!(gof_files(&run), ["gof_0000.gof", "gof_0002.gof"]);
    for f in ["train_log.csv", "frames.csv", "config.toml"] {
        assert!(run.join(f).is_file(), "{f} missing");
    }
    let cfg = fs::read_to_string(run.join("config.toml")).unwrap();
    assert!(cfg.contains("gof_len = 2"));

    // Decoded JSON and the raw stream render the same pixels.
    ok(
        d,
        &["decode", "--gof", "run/gof_0000.gof", "--out", "g.json"],
    );
    let render = |input: &str, camera: &str, out: &str| {
        ok(
            d,
            &[
                "render",
                "--input",
                input,
                "--data",
                "data",
                "--frame",
                "1",
                "--camera",
                camera,
                "--out",
                out,
                "--samples",
                "16",
            ],
        )
    };
    render("g.json", "0", "a.png");
    render("run/gof_0000.gof", "cam_000", "b.png");
    assert_eq!(
        fs::read(d.join("a.png")).unwrap(),
        fs::read(d.join("b.png")).unwrap()
    );
    assert_eq!(
        code(
            d,
            &[
                "render", "--input", "g.json", "--data", "data", "--frame", "2", "--camera", "0",
                "--out", "c.png"
            ]
        ),
        2
    );

    // Scoring the written streams reproduces the training-time report.
    ok(
        d,
        &[
            "eval",
            "--data",
            "data",
            "run/gof_0000.gof",
            "run/gof_0002.gof",
            "--config",
            "tiny.toml",
            "--out",
            "ev.csv",
        ],
    );
    let trained = fs::read_to_string(run.join("frames.csv")).unwrap();
    let evaluated = fs::read_to_string(d.join("ev.csv")).unwrap();
    assert_eq!(trained.lines().count(), 4);
    for (a, b) in trained.lines().zip(evaluated.lines()).skip(1) {
        let a: Vec<&str> = a.split(',').collect();
        let b: Vec<&str> = b.split(',').collect();
        assert_eq!(a[..3], b[..3]);
        for (x, y) in a[3..].iter().zip(&b[3..]) {
            let (x, y): (f64, f64) = (x.parse().unwrap(), y.parse().unwrap());
            assert!((x - y).abs() <= 1e-6, "{x} vs {y}");
        }
    }
}

#[test]
fn default_group_length_covers_short_sequence() {
    let tmp = workspace();
    let d = tmp.path();
    ok(
        d,
        &[
            "train",
            "--data",
            "data",
            "--out",
            "run",
            "--config",
            "tiny.toml",
        ],
    );
    assert_eq!(gof_files(&d.join("run")), ["gof_0000.gof"]);
}

#[test]
fn rdcurve_writes_curve_and_plot() {
    let tmp = workspace();
    let d = tmp.path();
    let out = ok(
        d,
        &[
            "rdcurve",
            "--data",
            "data",
            "--out",
            "rd",
            "--config",
            "tiny.toml",
            "--q",
            "1,10",
        ],
    );
    assert!(out.contains("q=1") && out.contains("q=10"));
    let rd = d.join("rd");
    assert!(rd.join("q1").is_dir() && rd.join("q10").is_dir());
    let csv = fs::read_to_string(rd.join("rd.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "label,bytes,psnr,ssim");
    assert_eq!(rows.len(), 3);
    for (row, dir) in rows[1..].iter().zip(["q1", "q10"]) {
        let bytes: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        let on_disk: u64 = gof_files(&rd.join(dir))
            .iter()
            .map(|f| fs::metadata(rd.join(dir).join(f)).unwrap().len())
            .sum();
        assert_eq!(bytes, on_disk as f64);
    }
    let svg = fs::read_to_string(rd.join("rd.svg")).unwrap();
    assert!(svg.contains("resfield") && svg.contains("<polyline"));

    ok(
        d,
        &[
            "rdcurve",
            "--data",
            "data",
            "--out",
            "rd2",
            "--config",
            "tiny.toml",
            "--q",
            "2",
            "--compare",
            "rd/rd.csv",
            "--label",
            "other",
        ],
    );
    let svg = fs::read_to_string(d.join("rd2/rd.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains("other"));
}
