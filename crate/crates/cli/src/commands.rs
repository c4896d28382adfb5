use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;

use resfield::codec::{decode_gof, GofBitstream, GofRepresentation, MAGIC};
use resfield::render::{render_image, RenderConfig};
use resfield::scene::{
    bd_metrics, generate_scene, orbit_cameras, Dataset, RdPoint, SceneSpec, Split,
};
use resfield::train::{
    evaluate_gof, read_csv, train_sequence_with, write_csv, FrameReport, TrainConfig,
};

use crate::svg::rd_plot;
use crate::{
    DecodeArgs, EvalArgs, Failure, Preset, RdArgs, RenderArgs, SynthArgs, TrainArgs, TrainOpts,
};

fn require(path: &Path, what: &str) -> anyhow::Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::Missing(format!("{what} not found: {}", path.display())).into())
    }
}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Failure::Invalid(msg.into()).into()
}

fn load_dataset(path: &Path) -> anyhow::Result<Dataset> {
    require(path, "dataset")?;
    Ok(Dataset::load(path)?)
}

fn create_dir(path: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

/// Configuration file or preset, then command-line overrides.
pub(crate) fn train_config(opts: &TrainOpts) -> anyhow::Result<TrainConfig> {
    let mut cfg = match &opts.config {
        Some(path) => {
            require(path, "config file")?;
            TrainConfig::load(path)?
        }
        None => match opts.preset {
            Preset::Default => TrainConfig::default(),
            Preset::Small => TrainConfig::small(),
        },
    };
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(len) = opts.gof_len {
        cfg.gof_len = len;
    }
    if opts.no_joint {
        cfg.joint = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn synth(a: SynthArgs) -> anyhow::Result<()> {
    let mut spec = match &a.scene {
        Some(path) => {
            require(path, "scene file")?;
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<SceneSpec>(&text)
                .map_err(|e| invalid(format!("scene file: {e}")))?
        }
        None => SceneSpec::toy(10),
    };
    if let Some(f) = a.frames {
        spec.frames = f;
    }
    spec.validate()?;
    let cams = orbit_cameras(
        a.cameras,
        a.distance,
        a.width,
        a.height,
        a.fov,
        a.test_every,
    )?;
    let data = generate_scene(&spec, &cams, a.samples)?;
    create_dir(&a.out)?;
    let manifest = data.save(&a.out)?;
    fs::write(
        a.out.join("scene.json"),
        serde_json::to_string_pretty(&spec)?,
    )?;
    println!(
        "wrote {} frames x {} cameras ({} train, {} test) to {}",
        data.frame_count(),
        data.cameras.len(),
        data.indices(Split::Train).len(),
        data.indices(Split::Test).len(),
        manifest.display()
    );
    Ok(())
}

fn print_report(r: &FrameReport) {
    let test = match (r.test_psnr, r.test_ssim) {
        (Some(p), Some(s)) => format!(", test {p:.4} dB / {s:.4}"),
        _ => String::new(),
    };
    println!(
        "frame {:>3} {:<8} {:>8} B  train {:.4} dB / {:.4}{test}",
        r.frame,
        if r.keyframe { "keyframe" } else { "residual" },
        r.bytes,
        r.train_psnr,
        r.train_ssim
    );
}

fn gof_name(first_frame: usize) -> String {
    format!("gof_{first_frame:04}.gof")
}

/// Trains the whole dataset into `out`: one stream per group, the training
/// log, per-frame reports and the effective configuration.
fn train_into(data: &Dataset, cfg: &TrainConfig, out: &Path) -> anyhow::Result<Vec<FrameReport>> {
    create_dir(out)?;
    fs::write(out.join("config.toml"), cfg.to_toml_string())?;
    let result = train_sequence_with(data, cfg, |g| {
        let path = out.join(gof_name(g.frames.start));
        fs::write(&path, &g.bitstream.bytes).map_err(|source| resfield::Error::Io {
            path: path.clone(),
            source,
        })?;
        eprintln!(
            "group {:?}: {} bytes (header {}) -> {}",
            g.frames,
            g.total_bytes(),
            g.bitstream.header_len,
            path.display()
        );
        g.reports.iter().for_each(print_report);
        Ok(())
    })?;
    write_csv(&result.log, &out.join("train_log.csv"))?;
    let reports: Vec<FrameReport> = result.reports().cloned().collect();
    write_csv(&reports, &out.join("frames.csv"))?;
    println!(
        "total {} bytes in {} group(s)",
        result.total_bytes(),
        result.gofs.len()
    );
    Ok(reports)
}

pub fn train(a: TrainArgs) -> anyhow::Result<()> {
    let mut cfg = train_config(&a.opts)?;
    if let Some(q) = a.q {
        cfg.q = q;
        cfg.validate()?;
    }
    let data = load_dataset(&a.data)?;
    train_into(&data, &cfg, &a.out)?;
    Ok(())
}

pub fn decode(a: DecodeArgs) -> anyhow::Result<()> {
    require(&a.gof, "stream")?;
    let bytes = fs::read(&a.gof).with_context(|| format!("reading {}", a.gof.display()))?;
    let gof = decode_gof(&bytes)?;
    let text = serde_json::to_string(&gof)?;
    fs::write(&a.out, text).with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "decoded frames {}..{} from {} bytes into {}",
        gof.first_frame,
        gof.first_frame + gof.frames.len(),
        bytes.len(),
        a.out.display()
    );
    Ok(())
}

/// A `.gof` stream or decoded JSON, told apart by the stream magic.
fn load_group(path: &Path) -> anyhow::Result<GofRepresentation> {
    require(path, "input")?;
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.starts_with(&MAGIC) {
        Ok(decode_gof(&bytes)?)
    } else {
        serde_json::from_slice(&bytes).with_context(|| {
            format!(
                "{} is neither a .gof stream nor decoded JSON",
                path.display()
            )
        })
    }
}

pub fn render(a: RenderArgs) -> anyhow::Result<()> {
    let gof = load_group(&a.input)?;
    let data = load_dataset(&a.data)?;
    let t = a
        .frame
        .checked_sub(gof.first_frame)
        .filter(|&t| t < gof.frames.len())
        .ok_or_else(|| {
            invalid(format!(
                "frame {} is not in this group (frames {}..{})",
                a.frame,
                gof.first_frame,
                gof.first_frame + gof.frames.len()
            ))
        })?;
    let cam = match a.camera.parse::<usize>() {
        Ok(i) => data.cameras.get(i).ok_or_else(|| {
            invalid(format!(
                "camera {i} out of range ({} cameras)",
                data.cameras.len()
            ))
        })?,
        Err(_) => data
            .cameras
            .iter()
            .find(|c| c.name == a.camera)
            .ok_or_else(|| invalid(format!("no camera named {:?}", a.camera)))?,
    };
    let cfg = RenderConfig {
        samples: a.samples,
        background: data.background,
        jitter: false,
    };
    let img = render_image(&gof.frame_field(t)?, &cam.camera()?, &cfg)?.to_rgb8();
    img.save(&a.out)?;
    println!(
        "rendered frame {} from {} to {}",
        a.frame,
        cam.name,
        a.out.display()
    );
    Ok(())
}

pub fn eval(a: EvalArgs) -> anyhow::Result<()> {
    let samples = match (a.samples, &a.config) {
        (Some(s), _) => s,
        (None, Some(path)) => {
            require(path, "config file")?;
            TrainConfig::load(path)?.samples
        }
        (None, None) => TrainConfig::default().samples,
    };
    if samples == 0 {
        return Err(invalid("--samples must be positive"));
    }
    let data = load_dataset(&a.data)?;
    for path in &a.gofs {
        require(path, "stream")?;
    }
    let mut reports = Vec::new();
    for path in &a.gofs {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let stream = GofBitstream::from_bytes(bytes)?;
        let r = evaluate_gof(&data, &stream, samples)?;
        r.iter().for_each(print_report);
        reports.extend(r);
    }
    let (p, s) = mean_quality(&data, &reports);
    println!("mean over all views: {p:.4} dB / {s:.4}");
    if let Some(out) = &a.out {
        write_csv(&reports, out)?;
    }
    Ok(())
}

/// PSNR and SSIM averaged over every view of every frame.
fn mean_quality(data: &Dataset, reports: &[FrameReport]) -> (f64, f64) {
    let n_train = data.indices(Split::Train).len() as f64;
    let n_test = data.indices(Split::Test).len() as f64;
    let (mut p, mut s, mut n) = (0.0, 0.0, 0.0);
    for r in reports {
        if n_train > 0.0 {
            p += n_train * r.train_psnr;
            s += n_train * r.train_ssim;
            n += n_train;
        }
        if let (Some(tp), Some(ts)) = (r.test_psnr, r.test_ssim) {
            p += n_test * tp;
            s += n_test * ts;
            n += n_test;
        }
    }
    (p / n, s / n)
}

fn rd_dir(out: &Path, q: f64) -> PathBuf {
    out.join(format!("q{q}"))
}

pub fn rdcurve(a: RdArgs) -> anyhow::Result<()> {
    let base = train_config(&a.opts)?;
    if a.q.is_empty() {
        return Err(invalid("--q needs at least one value"));
    }
    let mut configs = Vec::with_capacity(a.q.len());
    for &q in &a.q {
        let cfg = TrainConfig { q, ..base.clone() };
        cfg.validate()?;
        configs.push(cfg);
    }
    let compare: Option<Vec<RdPoint>> = match &a.compare {
        Some(path) => {
            require(path, "comparison curve")?;
            Some(read_csv(path)?)
        }
        None => None,
    };
    let data = load_dataset(&a.data)?;
    create_dir(&a.out)?;
    let mut points = Vec::with_capacity(configs.len());
    for cfg in &configs {
        eprintln!("q = {}", cfg.q);
        let dir = rd_dir(&a.out, cfg.q);
        let reports = train_into(&data, cfg, &dir)?;
        let bytes: usize = fs::read_dir(&dir)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().extension().is_some_and(|x| x == "gof"))
            .map(|e| e.metadata().map(|m| m.len() as usize))
            .sum::<Result<usize, _>>()?;
        let (psnr, ssim) = mean_quality(&data, &reports);
        points.push(RdPoint {
            label: format!("q={}", cfg.q),
            bytes: bytes as f64,
            psnr,
            ssim,
        });
    }
    write_csv(&points, &a.out.join("rd.csv"))?;
    for p in &points {
        println!(
            "{:<8} {:>10} B  {:.4} dB  {:.4}",
            p.label, p.bytes, p.psnr, p.ssim
        );
    }
    let mut curves = vec![(a.label.clone(), points.clone())];
    if let Some(other) = compare {
        match bd_metrics(&other, &points) {
            Ok((bd_psnr, bd_rate)) => {
                println!("vs comparison: BD-PSNR {bd_psnr:+.3} dB, BD-rate {bd_rate:+.2}%")
            }
            Err(e) => eprintln!("Bjøntegaard deltas unavailable: {e}"),
        }
        let name = a
            .compare
            .as_deref()
            .and_then(Path::file_stem)
            .map_or("comparison".to_string(), |s| {
                s.to_string_lossy().into_owned()
            });
        curves.push((name, other));
    }
    fs::write(a.out.join("rd.svg"), rd_plot(&curves))?;
    println!(
        "wrote {} and {}",
        a.out.join("rd.csv").display(),
        a.out.join("rd.svg").display()
    );
    Ok(())
}
