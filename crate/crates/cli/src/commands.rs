use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use hybridseg_core::metrics::{mean_ci95, MeanCi};
use hybridseg_core::raster::{encode_mask_png, encode_rgb_png};
use hybridseg_core::refine::StageTimings;
use hybridseg_core::slic::SlicConfig;
use hybridseg_core::synthetic::{lesion_scene, SceneParams};
use hybridseg_core::{
    degrade_ground_truth, evaluate, hybrid_segment, kruskal_wallis, load_image, load_mask,
    normalize, slic, srgb_to_lab, BandThresholds, Error, GuidanceSource, KruskalWallis,
    MetricsReport, QualityBand, RatioConfig, RefineConfig, SelectionMode, SlicOverrides,
};
use serde::Serialize;

use crate::args::{
    BenchArgs, EvaluateArgs, SegmentArgs, Selection, SlicFlags, SuperpixelArgs, SynthArgs,
};
use crate::output::{sibling, Staged};
use crate::CliError;

fn overrides(f: &SlicFlags) -> SlicOverrides {
    SlicOverrides {
        n_segments: f.n_segments,
        compactness: f.compactness,
        sigma: f.sigma,
    }
}

fn require_max_iter(n: usize) -> Result<(), CliError> {
    if n == 0 {
        return Err(Error::InvalidConfig("max_iter must be at least 1".into()).into());
    }
    Ok(())
}

pub fn segment(args: &SegmentArgs) -> Result<(), CliError> {
    let cfg = RefineConfig {
        selection: match args.selection {
            Selection::Single => SelectionMode::SingleBest,
            Selection::Threshold => SelectionMode::Threshold { tau: args.tau },
        },
        ratio: RatioConfig {
            calibration: args.calibration,
            ..RatioConfig::default()
        },
        overrides: overrides(&args.slic),
        max_iter: args.slic.max_iter,
        guidance_source: args.guidance_source.into(),
        ..RefineConfig::default()
    };
    cfg.validate()?;
    require_max_iter(cfg.max_iter)?;

    let image = load_image(&args.image)?;
    let guidance = load_mask(&args.guidance, args.mask_channels.into())?;
    let out = hybrid_segment(&image, &guidance, &cfg)?;

    let report = args
        .report
        .clone()
        .unwrap_or_else(|| sibling(&args.out_mask, "report.txt"));
    let mut staged = Staged::new();
    staged.add(&args.out_mask, &encode_mask_png(&out.mask)?)?;
    staged.add(&report, out.report.to_key_value().as_bytes())?;
    staged.commit()
}

pub fn superpixels(args: &SuperpixelArgs) -> Result<(), CliError> {
    let cfg = SlicConfig {
        compactness: args.compactness,
        sigma: args.sigma,
        max_iter: args.max_iter,
        ..SlicConfig::new(args.n_segments)
    };
    // checked before the image is read; the pixel bound is checked again below
    cfg.validate(usize::MAX)?;

    let image = load_image(&args.image)?;
    let lab = srgb_to_lab(&normalize(&image));
    let labeling = slic(&lab, &cfg)?;
    let overlay = labeling.overlay(&image, [255, 255, 0])?;

    let labels = args
        .labels
        .clone()
        .unwrap_or_else(|| sibling(&args.out_overlay, "labels.pgm"));
    let mut staged = Staged::new();
    staged.add(&args.out_overlay, &encode_rgb_png(&overlay)?)?;
    staged.add(&labels, &labeling.to_pgm16()?)?;
    staged.commit()?;
    eprintln!(
        "superpixels={} iterations={}",
        labeling.label_count(),
        labeling.iterations_run
    );
    Ok(())
}

#[derive(Serialize)]
struct ImageRecord<'a> {
    id: &'a str,
    #[serde(flatten)]
    metrics: &'a MetricsReport,
    ns: Option<usize>,
    best_r: Option<f64>,
    guidance: Option<String>,
    band: QualityBand,
}

#[derive(Serialize)]
struct BandSummary {
    count: usize,
    dice: Option<MeanCi>,
}

#[derive(Serialize)]
struct Summary {
    count: usize,
    thresholds: BTreeMap<&'static str, f64>,
    metrics: BTreeMap<&'static str, Option<MeanCi>>,
    bands: BTreeMap<QualityBand, BandSummary>,
    kruskal_wallis: Option<KruskalWallis>,
}

/// Sorted `(stem, path)` pairs of the PNG files in `dir`.
fn png_files(dir: &Path) -> Result<Vec<(String, PathBuf)>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| CliError::Io(dir.to_path_buf(), e))?
            .path();
        let is_png = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            let stem = path
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            out.push((stem, path));
        }
    }
    out.sort();
    Ok(out)
}

/// `ns`, `best_r` and `guidance` from a report sidecar, when one exists.
fn read_sidecar(pred: &Path) -> (Option<usize>, Option<f64>, Option<String>) {
    let Ok(text) = fs::read_to_string(sibling(pred, "report.txt")) else {
        return (None, None, None);
    };
    let mut out = (None, None, None);
    for line in text.lines() {
        match line.split_once('=') {
            Some(("ns", v)) => out.0 = v.trim().parse().ok(),
            Some(("best_r", v)) => out.1 = v.trim().parse().ok(),
            Some(("guidance", v)) => out.2 = Some(v.trim().to_owned()),
            _ => {}
        }
    }
    out
}

pub fn evaluate_dirs(args: &EvaluateArgs) -> Result<(), CliError> {
    let bands = BandThresholds {
        good: args.good,
        moderate: args.moderate,
    };
    if !(bands.moderate <= bands.good && bands.moderate.is_finite() && bands.good.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "band thresholds need moderate <= good, got {} and {}",
            bands.moderate, bands.good
        ))
        .into());
    }

    let preds = png_files(&args.pred_dir)?;
    let gts = png_files(&args.gt_dir)?;
    let gt_ids: Vec<&str> = gts.iter().map(|(s, _)| s.as_str()).collect();
    let pred_ids: Vec<&str> = preds.iter().map(|(s, _)| s.as_str()).collect();
    if let Some((_, p)) = preds.iter().find(|(s, _)| !gt_ids.contains(&s.as_str())) {
        return Err(CliError::Unmatched(p.clone()));
    }
    if let Some((_, p)) = gts.iter().find(|(s, _)| !pred_ids.contains(&s.as_str())) {
        return Err(CliError::Unmatched(p.clone()));
    }

    let mut lines = String::new();
    let mut columns: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
    let mut by_band: BTreeMap<QualityBand, Vec<f64>> = BTreeMap::new();
    for ((id, pred_path), (_, gt_path)) in preds.iter().zip(&gts) {
        let pred = load_mask(pred_path, args.mask_channels.into())?;
        let gt = load_mask(gt_path, args.mask_channels.into())?;
        let m = evaluate(&pred, &gt)?;
        let (ns, best_r, guidance) = read_sidecar(pred_path);
        let band = bands.classify(m.dice);
        let record = ImageRecord {
            id,
            metrics: &m,
            ns,
            best_r,
            guidance,
            band,
        };
        lines.push_str(&serde_json::to_string(&record).expect("record serializes"));
        lines.push('\n');

        let fields = [
            ("iou", Some(m.iou)),
            ("dice", Some(m.dice)),
            ("precision", m.precision),
            ("sensitivity", m.sensitivity),
            ("specificity", m.specificity),
            ("vs", m.volumetric_similarity),
            ("hausdorff_px", m.hausdorff_px),
        ];
        for (name, v) in fields {
            let col = columns.entry(name).or_default();
            col.extend(v);
        }
        by_band.entry(band).or_default().push(m.dice);
    }

    let groups: Vec<Vec<f64>> = by_band
        .values()
        .filter(|g| !g.is_empty())
        .cloned()
        .collect();
    let kw = if groups.len() >= 2 {
        Some(kruskal_wallis(&groups)?)
    } else {
        None
    };
    let summary = Summary {
        count: preds.len(),
        thresholds: BTreeMap::from([("good", bands.good), ("moderate", bands.moderate)]),
        metrics: columns.iter().map(|(k, v)| (*k, mean_ci95(v))).collect(),
        bands: [QualityBand::Good, QualityBand::Moderate, QualityBand::Poor]
            .into_iter()
            .map(|b| {
                let dice = by_band.get(&b).map(Vec::as_slice).unwrap_or_default();
                (
                    b,
                    BandSummary {
                        count: dice.len(),
                        dice: mean_ci95(dice),
                    },
                )
            })
            .collect(),
        kruskal_wallis: kw,
    };

    let summary_path = args
        .summary
        .clone()
        .unwrap_or_else(|| sibling(&args.out_jsonl, "summary.json"));
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    let mut staged = Staged::new();
    staged.add(&args.out_jsonl, lines.as_bytes())?;
    staged.add(&summary_path, json.as_bytes())?;
    staged.commit()
}

pub const MIN_BENCH_SIZE: usize = 64;

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Peak resident set size in MiB, from `/proc/self/status`.
fn peak_rss_mb() -> Option<f64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: f64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb / 1024.0)
}

pub fn bench(args: &BenchArgs) -> Result<(), CliError> {
    if args.size < MIN_BENCH_SIZE {
        return Err(Error::InvalidConfig(format!(
            "size must be at least {MIN_BENCH_SIZE}, got {}",
            args.size
        ))
        .into());
    }
    if args.repeat == 0 {
        return Err(Error::InvalidConfig("repeat must be at least 1".into()).into());
    }
    require_max_iter(args.iters)?;
    let cfg = RefineConfig {
        overrides: SlicOverrides {
            n_segments: args.n_segments,
            ..SlicOverrides::default()
        },
        max_iter: args.iters,
        // run every requested iteration
        residual_tol: Some(0.0),
        guidance_source: GuidanceSource::Synthetic,
        ..RefineConfig::default()
    };
    cfg.validate()?;

    let scene = lesion_scene(&SceneParams::ellipse(args.size), args.seed);
    let guidance = degrade_ground_truth(&scene.ground_truth, 4, 1)?;

    let mut samples: Vec<StageTimings> = Vec::with_capacity(args.repeat);
    let mut last = None;
    for _ in 0..args.repeat {
        let out = hybrid_segment(&scene.image, &guidance, &cfg)?;
        samples.push(out.report.timings);
        last = Some(out.report);
    }
    let report = last.expect("repeat >= 1");

    type Stage = fn(&StageTimings) -> Duration;
    let stages: [(&str, Stage); 5] = [
        ("convert", |t| t.convert),
        ("smooth", |t| t.smooth),
        ("slic", |t| t.slic),
        ("score", |t| t.score),
        ("total", |t| t.total),
    ];
    println!(
        "# size={} ns={} iterations={} repeat={} seed={} superpixels={}",
        args.size, report.ns, report.iterations, args.repeat, args.seed, report.superpixels
    );
    println!("stage\tmin_ms\tmedian_ms");
    for (name, get) in stages {
        let mut v: Vec<f64> = samples.iter().map(|t| get(t).as_secs_f64() * 1e3).collect();
        v.sort_by(f64::total_cmp);
        println!("{name}\t{:.3}\t{:.3}", v[0], median(&v));
    }
    match peak_rss_mb() {
        Some(mb) => println!("# peak_rss_mb={mb:.1}"),
        None => println!("# peak_rss_mb=NA"),
    }
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    if args.size < MIN_BENCH_SIZE {
        return Err(Error::InvalidConfig(format!(
            "size must be at least {MIN_BENCH_SIZE}, got {}",
            args.size
        ))
        .into());
    }
    if args.degrade == 0 {
        return Err(Error::ZeroFactor.into());
    }
    let params = if args.disk {
        SceneParams::disk(args.size)
    } else {
        SceneParams::ellipse(args.size)
    };
    let dirs = ["images", "gt", "guidance"].map(|d| args.out_dir.join(d));
    for d in &dirs {
        fs::create_dir_all(d).map_err(|e| CliError::Io(d.clone(), e))?;
    }
    let mut staged = Staged::new();
    for i in 0..args.count {
        let seed = args.seed + i as u64;
        let scene = lesion_scene(&params, seed);
        let guidance = degrade_ground_truth(&scene.ground_truth, args.degrade, args.erode)?;
        let name = format!("scene_{seed:05}.png");
        staged.add(&dirs[0].join(&name), &encode_rgb_png(&scene.image)?)?;
        staged.add(&dirs[1].join(&name), &encode_mask_png(&scene.ground_truth)?)?;
        staged.add(&dirs[2].join(&name), &encode_mask_png(&guidance)?)?;
    }
    staged.commit()
}
