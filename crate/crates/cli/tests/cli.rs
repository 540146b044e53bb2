use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hybridseg_core::raster::{encode_mask_png, encode_rgb_png};
use hybridseg_core::synthetic::{lesion_scene, SceneParams};
use hybridseg_core::{degrade_ground_truth, load_mask, BinaryMask, MaskChannels};
use tempfile::TempDir;

fn hybridseg(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hybridseg"));
    for a in args {
        cmd.arg(a);
    }
    cmd.output().unwrap()
}

fn scene_files(dir: &Path, size: usize, seed: u64) -> (std::path::PathBuf, std::path::PathBuf) {
    let scene = lesion_scene(&SceneParams::ellipse(size), seed);
    let guidance = degrade_ground_truth(&scene.ground_truth, 4, 1).unwrap();
    let (img, g) = (dir.join("img.png"), dir.join("guide.png"));
    fs::write(&img, encode_rgb_png(&scene.image).unwrap()).unwrap();
    fs::write(&g, encode_mask_png(&guidance).unwrap()).unwrap();
    (img, g)
}

fn write_mask(path: &Path, mask: &BinaryMask) {
    fs::write(path, encode_mask_png(mask).unwrap()).unwrap();
}

#[test]
fn segment_writes_mask_and_report() {
    let dir = TempDir::new().unwrap();
    let (img, g) = scene_files(dir.path(), 128, 2);
    let out = dir.path().join("out.png");
    let o = hybridseg(&[&"segment", &img, &g, &out]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );

    let mask = load_mask(&out, MaskChannels::Reject).unwrap();
    assert_eq!(mask.dims(), (128, 128));
    assert!(mask.count_ones() > 0);
    // stored as canonical single-channel 0/255
    assert_eq!(fs::read(&out).unwrap(), encode_mask_png(&mask).unwrap());

    let report = fs::read_to_string(dir.path().join("out.report.txt")).unwrap();
    let keys: Vec<&str> = report
        .lines()
        .map(|l| l.split_once('=').unwrap().0)
        .collect();
    for k in [
        "ns",
        "sigma",
        "compactness",
        "iterations",
        "best_r",
        "ms_slic",
        "ms_score",
        "ms_total",
    ] {
        assert!(keys.contains(&k), "missing {k} in\n{report}");
    }
    assert!(report.contains("guidance=external-mask"));
}

#[test]
fn segment_exit_codes() {
    let dir = TempDir::new().unwrap();
    let (img, _) = scene_files(dir.path(), 64, 1);
    let empty = dir.path().join("empty.png");
    write_mask(&empty, &BinaryMask::zeros(16, 16).unwrap());
    let out = dir.path().join("out.png");

    let o = hybridseg(&[&"segment", &img, &empty, &out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    assert!(!dir.path().join("out.report.txt").exists());

    let o = hybridseg(&[&"segment", &dir.path().join("nope.png"), &empty, &out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.png"));

    let o = hybridseg(&[
        &"segment",
        &img,
        &empty,
        &out,
        &"--selection",
        &"threshold",
        &"--tau",
        &"0",
    ]);
    assert_eq!(o.status.code(), Some(1));

    let o = hybridseg(&[&"segment", &img]);
    assert_eq!(
        o.status.code(),
        Some(1),
        "usage errors are validation failures"
    );
}

fn pgm_labels(path: &Path) -> (usize, usize, Vec<u16>) {
    let bytes = fs::read(path).unwrap();
    let header_end = bytes
        .iter()
        .enumerate()
        .filter(|(_, &b)| b == b'\n')
        .nth(2)
        .unwrap()
        .0;
    let header = std::str::from_utf8(&bytes[..header_end]).unwrap();
    let mut it = header.split_whitespace();
    assert_eq!(it.next(), Some("P5"));
    let w: usize = it.next().unwrap().parse().unwrap();
    let h: usize = it.next().unwrap().parse().unwrap();
    assert_eq!(it.next(), Some("65535"));
    let data = bytes[header_end + 1..]
        .chunks(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect::<Vec<_>>();
    assert_eq!(data.len(), w * h);
    (w, h, data)
}

#[test]
fn superpixels_region_count_tracks_request() {
    let dir = TempDir::new().unwrap();
    let (img, _) = scene_files(dir.path(), 512, 4);
    let overlay = dir.path().join("ov.png");
    let o = hybridseg(&[&"superpixels", &img, &overlay, &"--n-segments", &"100"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let (w, h, labels) = pgm_labels(&dir.path().join("ov.labels.pgm"));
    assert_eq!((w, h), (512, 512));
    let mut distinct = labels.clone();
    distinct.sort_unstable();
    distinct.dedup();
    assert!(
        (75..=130).contains(&distinct.len()),
        "{} regions",
        distinct.len()
    );
    assert!(overlay.exists());
}

#[test]
fn superpixels_validation_and_no_smoothing() {
    let dir = TempDir::new().unwrap();
    let (img, _) = scene_files(dir.path(), 64, 4);
    let out = dir.path().join("ov.png");
    let o = hybridseg(&[&"superpixels", &img, &out, &"--n-segments", &"0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
    let o = hybridseg(&[
        &"superpixels",
        &img,
        &out,
        &"--sigma",
        &"0",
        &"--n-segments",
        &"9",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(out.exists());
}

fn first_n(w: usize, h: usize, n: usize) -> BinaryMask {
    BinaryMask::from_fn(w, h, |x, y| y * w + x < n).unwrap()
}

fn summary(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn evaluate_identical_dirs() {
    let dir = TempDir::new().unwrap();
    let (pred, gt) = (dir.path().join("pred"), dir.path().join("gt"));
    fs::create_dir_all(&pred).unwrap();
    fs::create_dir_all(&gt).unwrap();
    for i in 0..3 {
        let m = first_n(20, 20, 40 + 10 * i);
        write_mask(&pred.join(format!("m{i}.png")), &m);
        write_mask(&gt.join(format!("m{i}.png")), &m);
    }
    let out = dir.path().join("metrics.jsonl");
    let o = hybridseg(&[&"evaluate", &pred, &gt, &out]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );

    let lines: Vec<serde_json::Value> = fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["id"], "m0");
    for l in &lines {
        assert_eq!(l["dice"], 1.0);
        assert!(l["ns"].is_null() && l["best_r"].is_null());
    }
    let s = summary(&dir.path().join("metrics.summary.json"));
    assert_eq!(s["bands"]["good"]["count"], 3);
    assert_eq!(s["bands"]["moderate"]["count"], 0);
    assert_eq!(s["bands"]["poor"]["count"], 0);
    assert!(s["kruskal_wallis"].is_null());
}

#[test]
fn evaluate_stratifies_into_three_bands() {
    let dir = TempDir::new().unwrap();
    let (pred, gt) = (dir.path().join("pred"), dir.path().join("gt"));
    fs::create_dir_all(&pred).unwrap();
    fs::create_dir_all(&gt).unwrap();
    // Dice of the first k pixels against the first 100 is 2k / (100 + k)
    let ks: Vec<usize> = (0..21)
        .map(|i| 70 + i)
        .chain([40, 50])
        .chain([5, 12])
        .collect();
    for (i, &k) in ks.iter().enumerate() {
        write_mask(&pred.join(format!("p{i:02}.png")), &first_n(20, 20, k));
        write_mask(&gt.join(format!("p{i:02}.png")), &first_n(20, 20, 100));
    }
    fs::write(
        pred.join("p00.report.txt"),
        "ns=35\nbest_r=0.8\nguidance=synthetic\n",
    )
    .unwrap();
    let out = dir.path().join("m.jsonl");
    let o = hybridseg(&[&"evaluate", &pred, &gt, &out]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );

    let first: serde_json::Value =
        serde_json::from_str(fs::read_to_string(&out).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(first["ns"], 35);
    assert_eq!(first["best_r"], 0.8);
    assert_eq!(first["guidance"], "synthetic");

    let s = summary(&dir.path().join("m.summary.json"));
    assert_eq!(s["count"], 25);
    assert_eq!(s["bands"]["good"]["count"], 21);
    assert_eq!(s["bands"]["moderate"]["count"], 2);
    assert_eq!(s["bands"]["poor"]["count"], 2);
    let kw = &s["kruskal_wallis"];
    assert_eq!(kw["df"], 2);
    assert!(kw["h"].as_f64().unwrap() > 0.0);
    assert!(kw["p"].as_f64().unwrap() < 0.05);
}

#[test]
fn evaluate_band_overrides() {
    let dir = TempDir::new().unwrap();
    let (pred, gt) = (dir.path().join("pred"), dir.path().join("gt"));
    fs::create_dir_all(&pred).unwrap();
    fs::create_dir_all(&gt).unwrap();
    write_mask(&pred.join("a.png"), &first_n(10, 10, 50));
    write_mask(&gt.join("a.png"), &first_n(10, 10, 100));
    let out = dir.path().join("m.jsonl");
    let o = hybridseg(&[&"evaluate", &pred, &gt, &out, &"--good", &"0.6"]);
    assert_eq!(o.status.code(), Some(0));
    let s = summary(&dir.path().join("m.summary.json"));
    assert_eq!(s["bands"]["good"]["count"], 1);
}

#[test]
fn evaluate_names_missing_counterpart() {
    let dir = TempDir::new().unwrap();
    let (pred, gt) = (dir.path().join("pred"), dir.path().join("gt"));
    fs::create_dir_all(&pred).unwrap();
    fs::create_dir_all(&gt).unwrap();
    write_mask(&pred.join("a.png"), &first_n(10, 10, 5));
    write_mask(&gt.join("a.png"), &first_n(10, 10, 5));
    write_mask(&pred.join("lonely.png"), &first_n(10, 10, 5));
    let out = dir.path().join("m.jsonl");
    let o = hybridseg(&[&"evaluate", &pred, &gt, &out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lonely.png"));
    assert!(!out.exists());
}

#[test]
fn bench_reports_stage_table() {
    let o = hybridseg(&[
        &"bench",
        &"--size",
        &"128",
        &"--n-segments",
        &"16",
        &"--repeat",
        &"3",
        &"--iters",
        &"2",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "stage\tmin_ms\tmedian_ms");
    let stages: Vec<&str> = rows[1..]
        .iter()
        .map(|r| r.split('\t').next().unwrap())
        .collect();
    assert_eq!(stages, ["convert", "smooth", "slic", "score", "total"]);
    for r in &rows[1..] {
        let v: Vec<f64> = r.split('\t').skip(1).map(|x| x.parse().unwrap()).collect();
        assert!(v[0] <= v[1]);
    }
    assert!(text.contains("repeat=3") && text.contains("iterations=2"));

    let o = hybridseg(&[&"bench", &"--size", &"32"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn synth_is_seed_deterministic() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for d in [&a, &b] {
        let o = hybridseg(&[
            &"synth",
            &"--size",
            &"96",
            &"--count",
            &"2",
            &"--seed",
            &"7",
            &d.path(),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    for sub in ["images", "gt", "guidance"] {
        for name in ["scene_00007.png", "scene_00008.png"] {
            let x = fs::read(a.path().join(sub).join(name)).unwrap();
            let y = fs::read(b.path().join(sub).join(name)).unwrap();
            assert_eq!(x, y, "{sub}/{name}");
        }
    }
    let g = load_mask(
        a.path().join("guidance/scene_00007.png"),
        MaskChannels::Reject,
    )
    .unwrap();
    assert_eq!(g.dims(), (24, 24));
}
