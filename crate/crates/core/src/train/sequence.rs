use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::log::LogRow;
use super::stage::{train_keyframe, train_residual_frame, ResidualState};
use crate::codec::{decode_gof, encode_gof, GofBitstream, GofRepresentation};
use crate::error::{ensure, Result};
use crate::field::RadianceField;
use crate::render::{render_image, RenderConfig};
use crate::scene::{psnr, ssim, Dataset, Split};

/// Consecutive frame ranges of at most `len` frames covering `0..frames`.
pub fn gof_partition(frames: usize, len: usize) -> Result<Vec<Range<usize>>> {
    ensure!(len >= 1, Config, "group length must be at least 1");
    ensure!(frames >= 1, Structure, "sequence has no frames");
    Ok((0..frames)
        .step_by(len)
        .map(|s| s..(s + len).min(frames))
        .collect())
}

/// Image quality of one decoded frame; test metrics are absent when the
/// dataset has no test cameras.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub frame: usize,
    pub keyframe: bool,
    /// Chunk bytes of this frame (the group header is counted separately).
    pub bytes: usize,
    pub train_psnr: f64,
    pub train_ssim: f64,
    pub test_psnr: Option<f64>,
    pub test_ssim: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct GofResult {
    pub frames: Range<usize>,
    pub bitstream: GofBitstream,
    pub reports: Vec<FrameReport>,
}

impl GofResult {
    pub fn total_bytes(&self) -> usize {
        self.bitstream.len()
    }
}

#[derive(Debug, Clone)]
pub struct SequenceResult {
    pub gofs: Vec<GofResult>,
    pub log: Vec<LogRow>,
}

impl SequenceResult {
    pub fn total_bytes(&self) -> usize {
        self.gofs.iter().map(GofResult::total_bytes).sum()
    }

    pub fn reports(&self) -> impl Iterator<Item = &FrameReport> {
        self.gofs.iter().flat_map(|g| g.reports.iter())
    }
}

/// Trains one group: keyframe stage on the first frame, then each residual
/// frame in order against the keyframe buffer.
pub fn train_gof(
    dataset: &Dataset,
    frames: Range<usize>,
    cfg: &TrainConfig,
) -> Result<(GofRepresentation, Vec<LogRow>)> {
    ensure!(
        frames.start < frames.end && frames.end <= dataset.frame_count(),
        Structure,
        "frame range {frames:?} outside dataset of {} frames",
        dataset.frame_count()
    );
    let key = train_keyframe(dataset, frames.start, cfg)?;
    let mut log = key.log;
    let mut reps = vec![key.frame];
    let mut residual = ResidualState::for_config(&key.buffer.models, cfg)?;
    for (i, f) in frames.clone().enumerate().skip(1) {
        let (rep, l) = train_residual_frame(dataset, f, i + 1, &key.buffer, &mut residual, cfg)?;
        reps.push(rep);
        log.extend(l);
    }
    let refs: Vec<_> = reps[1..].iter().collect();
    let residual_models = residual.finish(&refs, key.buffer.q, cfg)?;
    let gof = GofRepresentation {
        first_frame: frames.start,
        net: key.buffer.net,
        models: key.buffer.models,
        residual_models,
        frames: reps,
    };
    Ok((gof, log))
}

/// Mean PSNR and SSIM over the cameras in `split`, rendered from `field`.
pub fn evaluate_frame<F: RadianceField>(
    dataset: &Dataset,
    frame: usize,
    field: &F,
    split: Split,
    samples: usize,
) -> Result<Option<(f64, f64)>> {
    let cams = dataset.indices(split);
    if cams.is_empty() {
        return Ok(None);
    }
    let rcfg = RenderConfig {
        samples,
        background: dataset.background,
        jitter: false,
    };
    let (mut p, mut s) = (0.0, 0.0);
    for &c in &cams {
        let img = render_image(field, &dataset.cameras[c].camera()?, &rcfg)?.to_rgb8();
        let gt = &dataset.frames[frame][c];
        p += psnr(&img, gt)?;
        s += ssim(&img, gt)?;
    }
    let n = cams.len() as f64;
    Ok(Some((p / n, s / n)))
}

/// Decodes `bitstream` and scores every frame against `dataset`.
pub fn evaluate_gof(
    dataset: &Dataset,
    bitstream: &GofBitstream,
    samples: usize,
) -> Result<Vec<FrameReport>> {
    let gof = decode_gof(&bitstream.bytes)?;
    (0..gof.frames.len())
        .map(|t| {
            let frame = gof.first_frame + t;
            ensure!(
                frame < dataset.frame_count(),
                Structure,
                "stream frame {frame} outside dataset of {} frames",
                dataset.frame_count()
            );
            let field = gof.frame_field(t)?;
            let (train_psnr, train_ssim) =
                evaluate_frame(dataset, frame, &field, Split::Train, samples)?
                    .unwrap_or((f64::NAN, f64::NAN));
            let test = evaluate_frame(dataset, frame, &field, Split::Test, samples)?;
            Ok(FrameReport {
                frame,
                keyframe: t == 0,
                bytes: bitstream.chunk_len(t),
                train_psnr,
                train_ssim,
                test_psnr: test.map(|t| t.0),
                test_ssim: test.map(|t| t.1),
            })
        })
        .collect()
}

/// Trains, encodes and evaluates every group of `dataset`. `on_gof` sees
/// each finished group before the next one starts.
pub fn train_sequence_with(
    dataset: &Dataset,
    cfg: &TrainConfig,
    mut on_gof: impl FnMut(&GofResult) -> Result<()>,
) -> Result<SequenceResult> {
    cfg.validate()?;
    let q = cfg.quant()?;
    let mut gofs = Vec::new();
    let mut log = Vec::new();
    for range in gof_partition(dataset.frame_count(), cfg.gof_len)? {
        let (gof, l) = train_gof(dataset, range.clone(), cfg)?;
        log.extend(l);
        let bitstream = encode_gof(&gof, q)?;
        let reports = evaluate_gof(dataset, &bitstream, cfg.samples)?;
        let result = GofResult {
            frames: range,
            bitstream,
            reports,
        };
        on_gof(&result)?;
        gofs.push(result);
    }
    Ok(SequenceResult { gofs, log })
}

pub fn train_sequence(dataset: &Dataset, cfg: &TrainConfig) -> Result<SequenceResult> {
    train_sequence_with(dataset, cfg, |_| Ok(()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition() {
        let sizes: Vec<usize> = gof_partition(25, 10)
            .unwrap()
            .iter()
            .map(|r| r.len())
            .collect();
        assert_eq!(sizes, vec![10, 10, 5]);
        assert_eq!(gof_partition(10, 10).unwrap(), vec![0..10]);
        assert_eq!(gof_partition(3, 1).unwrap(), vec![0..1, 1..2, 2..3]);
        assert!(gof_partition(3, 0).is_err());
        assert!(gof_partition(0, 10).is_err());
    }
}
