//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use resfield::codec::GofRepresentation;
use resfield::codec::{
    decode_gof, encode_gof, quantize_grid, range_encode, FrequencyTable, GridStats,
};
use resfield::field::{
    Aabb, FeatureGrid, FrameKind, FrameRepresentation, GridField, MultiResBasis, RadianceField,
    ShadingNetwork,
};
use resfield::rate::{
    rate_loss_grad, EntropyModel, EntropyModelSet, ProbabilityModel, QuantConfig,
};
use resfield::render::{mse_and_grad, render_field_ray, render_ray, sample_ray, Ray, RenderConfig};
use resfield::scene::{generate_scene, orbit_cameras, Dataset, SceneSpec};
use resfield::train::{adam_step, l1_loss_grad, train_sequence, AdamState, TrainConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------------------
// 1. codec losslessness

fn random_models(rng: &mut ChaCha8Rng, levels: &[usize], coeff: usize) -> EntropyModelSet {
    let mut set = EntropyModelSet::new(levels, coeff).unwrap();
    for m in set.iter_mut() {
        let jitter: Vec<f64> = (0..m.param_count())
            .map(|_| rng.gen_range(-0.5..0.5))
            .collect();
        m.update_params(|p| p.iter_mut().zip(&jitter).for_each(|(a, b)| *a += b));
    }
    set
}

fn random_gof(rng: &mut ChaCha8Rng) -> GofRepresentation {
    let bounds = Aabb::cube(1.0);
    let levels = rng.gen_range(1..4);
    let mut res = [0usize; 3].map(|_| rng.gen_range(2..4));
    let mut shapes: Vec<([usize; 3], usize)> = Vec::new();
    for _ in 0..levels {
        shapes.push((res, rng.gen_range(1..4)));
        res = res.map(|r| r + rng.gen_range(1..3));
    }
    let width: usize = shapes.iter().map(|s| s.1).sum();
    let coeff_res = [
        rng.gen_range(2..6),
        rng.gen_range(2..6),
        rng.gen_range(2..6),
    ];
    let amp = rng.gen_range(0.05..2.0);
    let basis = |rng: &mut ChaCha8Rng, a: f64| {
        MultiResBasis::new(
            shapes
                .iter()
                .map(|&(r, c)| FeatureGrid::uniform(r, c, bounds, a, rng).unwrap())
                .collect(),
        )
        .unwrap()
    };
    let n = rng.gen_range(1..4);
    let frames = (0..n)
        .map(|t| {
            let kind = if t == 0 {
                FrameKind::Keyframe
            } else {
                FrameKind::Residual
            };
            let a = if t == 0 { amp } else { 0.1 * amp };
            let b = basis(rng, a);
            let c = FeatureGrid::uniform(coeff_res, width, bounds, amp, rng).unwrap();
            FrameRepresentation::new(kind, b, c, t + 1).unwrap()
        })
        .collect();
    let level_channels: Vec<usize> = shapes.iter().map(|s| s.1).collect();
    let models = random_models(rng, &level_channels, width);
    let residual_models =
        (n > 1 && rng.gen_bool(0.5)).then(|| random_models(rng, &level_channels, width));
    GofRepresentation {
        first_frame: rng.gen_range(0..100),
        net: ShadingNetwork::new(width, &[4], 1, 0.0, rng).unwrap(),
        models,
        residual_models,
        frames,
    }
}

fn codec_losslessness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut failures) = (0.0f64, 0);
    for _ in 0..1000 {
        let gof = random_gof(&mut rng);
        let q = QuantConfig::new(10f64.powf(rng.gen_range(-0.5..1.5))).unwrap();
        let stream = encode_gof(&gof, q).unwrap();
        let dec = decode_gof(&stream.bytes).unwrap();
        let mut ok = dec.frames.len() == gof.frames.len();
        for (a, b) in gof.frames.iter().zip(&dec.frames) {
            for (ga, gb) in a.grids().zip(b.grids()) {
                let (qa, qb) = (quantize_grid(ga, q).unwrap(), quantize_grid(gb, q).unwrap());
                ok &= qa.symbols == qb.symbols && qa.min_q == qb.min_q;
                for (x, y) in ga.data().iter().zip(gb.data()) {
                    let e = (x - y).abs() * 2.0 * q.q();
                    worst = worst.max(e);
                    ok &= e <= 1.0 + 1e-9;
                }
            }
        }
        failures += usize::from(!ok);
    }
    outcome(
        failures == 0,
        format!("1000 random groups, {failures} mismatches, max error {worst:.6} x 1/(2q)"),
    )
}

// ---------------------------------------------------------------------------
// 3. gradient correctness

fn gradient_check() -> Outcome {
    let bounds = Aabb::cube(1.0);
    let (lambda_rate, lambda_l1) = (0.05, 0.05);
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for config in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + config);
        let mut basis =
            MultiResBasis::uniform(&[([2, 2, 2], 2), ([4, 4, 4], 2)], bounds, 1.0, &mut rng)
                .unwrap();
        let mut coeff = FeatureGrid::uniform([4, 4, 4], 4, bounds, 1.0, &mut rng).unwrap();
        let mut net = ShadingNetwork::new(4, &[8], 2, 0.0, &mut rng).unwrap();
        let mut models = random_models(&mut rng, &[2, 2], 4);
        let q = QuantConfig::new(rng.gen_range(1.0..10.0)).unwrap();
        // Fixed quantization noise: the training map x -> x + u/q.
        let noise_b: Vec<Vec<f64>> = basis
            .levels()
            .iter()
            .map(|l| {
                (0..l.len())
                    .map(|_| (rng.gen::<f64>() - 0.5) / q.q())
                    .collect()
            })
            .collect();
        let noise_c: Vec<f64> = (0..coeff.len())
            .map(|_| (rng.gen::<f64>() - 0.5) / q.q())
            .collect();
        let rays: Vec<Ray> = (0..6)
            .map(|_| {
                let o: [f64; 3] = [rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4), -3.0];
                let t: [f64; 3] = [rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6), 0.0];
                let d = [t[0] - o[0], t[1] - o[1], 3.0];
                let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                Ray::new(o, d.map(|v| v / n), 0.0, f64::INFINITY).unwrap()
            })
            .collect();
        let targets: Vec<[f64; 3]> = (0..6).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let rcfg = RenderConfig {
            samples: 24,
            background: [rng.gen(), rng.gen(), rng.gen()],
            jitter: false,
        };

        // Loss and analytic gradients in the order: basis, coeff, net, models.
        let eval = |basis: &MultiResBasis,
                    coeff: &FeatureGrid,
                    net: &ShadingNetwork,
                    models: &EntropyModelSet,
                    grads: bool|
         -> (f64, Vec<f64>) {
            let mut nb = basis.clone();
            for (l, n) in nb.levels_mut().iter_mut().zip(&noise_b) {
                l.data_mut().iter_mut().zip(n).for_each(|(v, u)| *v += u);
            }
            let mut nc = coeff.clone();
            nc.data_mut()
                .iter_mut()
                .zip(&noise_c)
                .for_each(|(v, u)| *v += u);
            let field = GridField::new(&nb, &nc, net).unwrap();
            let (mse, fg) = mse_and_grad(&field, &rays, &targets, &rcfg, 0, 1).unwrap();
            let levels: Vec<&[f64]> = nb.levels().iter().map(|l| l.data()).collect();
            let (rate, rg) =
                rate_loss_grad(&levels, nc.data(), q, &models.basis, &models.coeff).unwrap();
            let raw: Vec<&[f64]> = basis.levels().iter().map(|l| l.data()).collect();
            let mut l1g: Vec<Vec<f64>> = raw.iter().map(|l| vec![0.0; l.len()]).collect();
            let l1 = l1_loss_grad(&raw, lambda_l1, &mut l1g);
            let loss = mse + lambda_rate * rate.total() + lambda_l1 * l1;
            if !grads {
                return (loss, Vec::new());
            }
            let mut g = Vec::new();
            for ((f, r), a) in fg.basis.iter().zip(&rg.basis).zip(&l1g) {
                g.extend(
                    f.iter()
                        .zip(r)
                        .zip(a)
                        .map(|((f, r), a)| f + lambda_rate * r + a),
                );
            }
            g.extend(
                fg.coeff
                    .iter()
                    .zip(&rg.coeff)
                    .map(|(a, b)| a + lambda_rate * b),
            );
            g.extend(&fg.net);
            for mg in rg
                .basis_models
                .iter()
                .chain(std::iter::once(&rg.coeff_model))
            {
                g.extend(mg.iter().map(|v| lambda_rate * v));
            }
            (loss, g)
        };

        let (_, analytic) = eval(&basis, &coeff, &net, &models, true);
        let h = 1e-6;
        let mut k = 0;
        let mut check = |fd: f64| {
            let an = analytic[k];
            k += 1;
            let err = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-5);
            worst = worst.max(err);
            checked += 1;
        };
        for l in 0..basis.level_count() {
            for i in 0..basis.levels()[l].len() {
                let o = basis.levels()[l].data()[i];
                basis.levels_mut()[l].data_mut()[i] = o + h;
                let a = eval(&basis, &coeff, &net, &models, false).0;
                basis.levels_mut()[l].data_mut()[i] = o - h;
                let b = eval(&basis, &coeff, &net, &models, false).0;
                basis.levels_mut()[l].data_mut()[i] = o;
                check((a - b) / (2.0 * h));
            }
        }
        for i in 0..coeff.len() {
            let o = coeff.data()[i];
            coeff.data_mut()[i] = o + h;
            let a = eval(&basis, &coeff, &net, &models, false).0;
            coeff.data_mut()[i] = o - h;
            let b = eval(&basis, &coeff, &net, &models, false).0;
            coeff.data_mut()[i] = o;
            check((a - b) / (2.0 * h));
        }
        for i in 0..net.param_count() {
            let o = net.params()[i];
            net.params_mut()[i] = o + h;
            let a = eval(&basis, &coeff, &net, &models, false).0;
            net.params_mut()[i] = o - h;
            let b = eval(&basis, &coeff, &net, &models, false).0;
            net.params_mut()[i] = o;
            check((a - b) / (2.0 * h));
        }
        let n_models = models.len();
        for m in 0..n_models {
            let count = models.iter().nth(m).unwrap().param_count();
            for i in 0..count {
                let set = |models: &mut EntropyModelSet, v: f64| {
                    models
                        .iter_mut()
                        .nth(m)
                        .unwrap()
                        .update_params(|p| p[i] = v);
                };
                let o = models.iter().nth(m).unwrap().params()[i];
                set(&mut models, o + h);
                let a = eval(&basis, &coeff, &net, &models, false).0;
                set(&mut models, o - h);
                let b = eval(&basis, &coeff, &net, &models, false).0;
                set(&mut models, o);
                check((a - b) / (2.0 * h));
            }
        }
    }
    outcome(
        worst <= 1e-4,
        format!("20 configurations, {checked} parameters, max relative error {worst:.2e}"),
    )
}

// ---------------------------------------------------------------------------
// 4. renderer analytic oracle

struct Homogeneous {
    bounds: Aabb,
    sigma: f64,
    color: [f64; 3],
}

impl RadianceField for Homogeneous {
    fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    fn eval_samples(
        &self,
        positions: &[[f64; 3]],
        _dir: [f64; 3],
        rgb: &mut Vec<[f64; 3]>,
        sigma: &mut Vec<f64>,
    ) -> resfield::Result<()> {
        rgb.clear();
        sigma.clear();
        rgb.resize(positions.len(), self.color);
        sigma.resize(positions.len(), self.sigma);
        Ok(())
    }
}

fn renderer_oracle() -> Outcome {
    let medium = Homogeneous {
        bounds: Aabb::cube(0.5),
        sigma: 2.0,
        color: [0.8, 0.4, 0.2],
    };
    let cfg = RenderConfig {
        samples: 256,
        background: [0.0; 3],
        jitter: false,
    };
    let ray = Ray::new([0.1, -0.2, -2.0], [0.0, 0.0, 1.0], 0.0, f64::INFINITY).unwrap();
    let rgb = render_field_ray(&medium, &ray, &cfg, 0, 0).unwrap();
    let a = 1.0 - (-medium.sigma * 1.0f64).exp();
    let err = (0..3)
        .map(|k| (rgb[k] - medium.color[k] * a).abs())
        .fold(0.0, f64::max);

    // Transmittance along random rays through the toy scene.
    let scene = SceneSpec::toy(1);
    let field = scene.field(0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut rays, mut monotone) = (0, true);
    let (mut rgb_buf, mut sigma_buf) = (Vec::new(), Vec::new());
    while rays < 500 {
        let o: [f64; 3] = [
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
        ];
        let t: [f64; 3] = [
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-0.5..0.5),
        ];
        let d = [t[0] - o[0], t[1] - o[1], t[2] - o[2]];
        let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let Some(clipped) = Ray::new(o, d.map(|v| v / n), 0.0, f64::INFINITY)
            .unwrap()
            .clip(&scene.bounds)
        else {
            continue;
        };
        let s = sample_ray(&clipped, 128, true, &mut rng).unwrap();
        field
            .eval_samples(&s.positions, clipped.dir, &mut rgb_buf, &mut sigma_buf)
            .unwrap();
        let r = render_ray(&s.deltas, &rgb_buf, &sigma_buf).unwrap();
        let tr = &r.transmittance;
        monotone &= tr[0] <= 1.0
            && tr.windows(2).all(|w| w[1] <= w[0])
            && r.residual_transmittance <= *tr.last().unwrap()
            && r.residual_transmittance >= 0.0;
        rays += 1;
    }
    outcome(
        err <= 1e-3 && monotone,
        format!("homogeneous ray error {err:.2e} at N = 256; transmittance monotone on {rays} rays: {monotone}"),
    )
}

// ---------------------------------------------------------------------------
// 8. entropy-model calibration

fn calibration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut m = EntropyModel::new(1).unwrap();
    let mut st = AdamState::new(m.param_count());
    let batch = 256;
    for it in 0..3000 {
        let mut g = vec![0.0; m.param_count()];
        for _ in 0..batch {
            let s = rng.gen_range(0..4) as f64;
            let u: f64 = rng.gen::<f64>() - 0.5;
            m.bits_with_grad(0, s + u, 1.0 / batch as f64, &mut g)
                .unwrap();
        }
        let lr = if it < 2000 { 0.05 } else { 0.01 };
        m.update_params(|p| adam_step(p, &g, &mut st, lr)).unwrap();
    }
    let ce: f64 = (0..4).map(|s| 0.25 * m.bits(0, s as f64).unwrap()).sum();
    outcome(
        (ce - 2.0).abs() <= 0.1,
        format!("cross-entropy {ce:.4} bits/symbol on a fair 4-symbol source"),
    )
}

// ---------------------------------------------------------------------------
// 9. range-coder efficiency

fn coder_efficiency() -> Outcome {
    let table = FrequencyTable::from_weights(&[0.5, 0.25, 0.25]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 10_000;
    let symbols: Vec<u32> = (0..n)
        .map(|_| match rng.gen::<f64>() {
            u if u < 0.5 => 0,
            u if u < 0.75 => 1,
            _ => 2,
        })
        .collect();
    let bytes = range_encode(&symbols, &[table]).unwrap().len();
    let bound = 1.5 * n as f64 / 8.0;
    outcome(
        bytes as f64 <= 1.01 * bound + 8.0,
        format!(
            "{bytes} bytes vs Shannon bound {bound:.0} bytes (limit {:.0})",
            1.01 * bound + 8.0
        ),
    )
}

// ---------------------------------------------------------------------------
// 10. configuration defaults

fn config_echo() -> Outcome {
    let c = TrainConfig::default();
    let pass = c.q_sweep == [1.0, 2.0, 5.0, 10.0]
        && c.gof_len == 10
        && c.lambda_rate == 1e-6
        && c.lambda_l1 == 1e-6
        && c.entropy_model_count() == 7;
    outcome(
        pass,
        format!(
            "q sweep {:?}, group length {}, rate weight {:e}, residual weight {:e}, {} entropy models",
            c.q_sweep,
            c.gof_len,
            c.lambda_rate,
            c.lambda_l1,
            c.entropy_model_count()
        ),
    )
}

// ---------------------------------------------------------------------------
// Trained experiments on the toy scene (criteria 2, 5, 6, 7).

fn toy_dataset(frames: usize) -> Dataset {
    let cams = orbit_cameras(10, 3.0, 32, 32, 40.0, 5).unwrap();
    generate_scene(&SceneSpec::toy(frames), &cams, 128).unwrap()
}

struct Run {
    bytes: usize,
    train_psnr: f64,
    test_psnr: f64,
    stats: Vec<GridStats>,
}

fn run(dataset: &Dataset, cfg: &TrainConfig) -> Run {
    let r = train_sequence(dataset, cfg).unwrap();
    let n = r.reports().count() as f64;
    Run {
        bytes: r.total_bytes(),
        train_psnr: r.reports().map(|x| x.train_psnr).sum::<f64>() / n,
        test_psnr: r.reports().map(|x| x.test_psnr.unwrap()).sum::<f64>() / n,
        stats: r
            .gofs
            .iter()
            .flat_map(|g| g.bitstream.stats.iter().flatten().copied())
            .collect(),
    }
}

fn keyframe_cfg(q: f64, seed: u64, joint: bool) -> TrainConfig {
    TrainConfig {
        q,
        seed,
        joint,
        gof_len: 1,
        ..TrainConfig::small()
    }
}

fn rd_monotonicity(sweep: &[(f64, Run)]) -> Outcome {
    let sizes_ok = sweep.windows(2).all(|w| w[1].1.bytes >= w[0].1.bytes);
    let drops: Vec<f64> = sweep
        .windows(2)
        .map(|w| w[0].1.train_psnr - w[1].1.train_psnr)
        .filter(|&d| d > 0.0)
        .collect();
    let psnr_ok = drops.is_empty() || (drops.len() == 1 && drops[0] <= 0.1);
    let detail = sweep
        .iter()
        .map(|(q, r)| format!("q={q}: {} B {:.2} dB", r.bytes, r.train_psnr))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(sizes_ok && psnr_ok, detail)
}

fn joint_ablation(pairs: &[(u64, &Run, Run)]) -> Outcome {
    let mut wins = 0;
    let mut detail = Vec::new();
    for (seed, joint, plain) in pairs {
        let win = joint.bytes < plain.bytes && joint.train_psnr >= plain.train_psnr - 0.5;
        wins += usize::from(win);
        detail.push(format!(
            "seed {seed}: {} vs {} B, train {:.2} vs {:.2} dB, test {:.2} vs {:.2} dB{}",
            joint.bytes,
            plain.bytes,
            joint.train_psnr,
            plain.train_psnr,
            joint.test_psnr,
            plain.test_psnr,
            if win { "" } else { " (loss)" }
        ));
    }
    outcome(
        2 * wins > pairs.len(),
        format!("{wins}/{} seeds; {}", pairs.len(), detail.join("; ")),
    )
}

fn residual_ablation(gof: &Run, independent: &Run) -> Outcome {
    let ratio = gof.bytes as f64 / independent.bytes as f64;
    let pass = ratio <= 0.70 && gof.test_psnr >= independent.test_psnr - 0.5;
    outcome(
        pass,
        format!(
            "10-frame group {} B vs 10 keyframes {} B ({:.1}%), test {:.2} vs {:.2} dB",
            gof.bytes,
            independent.bytes,
            100.0 * ratio,
            gof.test_psnr,
            independent.test_psnr
        ),
    )
}

fn rate_fidelity(runs: &[&Run]) -> Outcome {
    let (mut grids, mut worst, mut pass) = (0, 0.0f64, true);
    for s in runs.iter().flat_map(|r| &r.stats) {
        let realized = 8.0 * s.payload_bytes as f64;
        let limit = 0.02 * s.estimated_bits + 8.0 * 64.0;
        let gap = (realized - s.estimated_bits).abs();
        pass &= gap <= limit;
        worst = worst.max(gap / limit);
        grids += 1;
    }
    outcome(
        pass,
        format!(
            "{grids} trained grids, worst |payload - estimate| at {:.1}% of the allowance",
            100.0 * worst
        ),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut record = |n: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t0 = Instant::now();
        let o = f();
        let secs = t0.elapsed().as_secs_f64();
        println!(
            "criterion {n} [{}] {name}: {} ({secs:.1} s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((n, name, o, secs));
    };

    record(1, "codec losslessness", &mut codec_losslessness);
    record(3, "gradient correctness", &mut gradient_check);
    record(4, "renderer analytic oracle", &mut renderer_oracle);
    record(8, "entropy-model calibration", &mut calibration);
    record(9, "range-coder efficiency", &mut coder_efficiency);
    record(10, "configuration defaults", &mut config_echo);

    // Skips the trained experiments (2, 5, 6, 7).
    let quick = std::env::var_os("RESFIELD_ACCEPTANCE_QUICK").is_some();
    if quick {
        println!("RESFIELD_ACCEPTANCE_QUICK set: skipping criteria 2, 5, 6, 7");
        report(results);
        return;
    }

    let single = toy_dataset(1);
    let mut sweep = Vec::new();
    record(5, "RD monotonicity", &mut || {
        sweep = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|&q| (q, run(&single, &keyframe_cfg(q, 0, true))))
            .collect();
        rd_monotonicity(&sweep)
    });
    let joint_q10 = &sweep.last().unwrap().1;
    let mut extra_joint = Vec::new();
    record(6, "joint optimization ablation", &mut || {
        extra_joint = [1, 2]
            .iter()
            .map(|&s| run(&single, &keyframe_cfg(10.0, s, true)))
            .collect();
        let mut pairs = Vec::new();
        for (seed, joint) in [
            (0u64, joint_q10),
            (1, &extra_joint[0]),
            (2, &extra_joint[1]),
        ] {
            pairs.push((seed, joint, run(&single, &keyframe_cfg(10.0, seed, false))));
        }
        joint_ablation(&pairs)
    });
    let sequence = toy_dataset(10);
    let mut gof_run = None;
    record(7, "residual representation ablation", &mut || {
        let gof = run(&sequence, &TrainConfig::small());
        let independent = run(
            &sequence,
            &TrainConfig {
                gof_len: 1,
                ..TrainConfig::small()
            },
        );
        let o = residual_ablation(&gof, &independent);
        gof_run = Some(gof);
        o
    });
    let mut runs: Vec<&Run> = sweep.iter().map(|(_, r)| r).collect();
    runs.extend(&extra_joint);
    runs.extend(gof_run.as_ref());
    record(2, "rate-estimate fidelity", &mut || rate_fidelity(&runs));

    report(results);
}

fn report(mut results: Vec<(usize, &str, Outcome, f64)>) {
    results.sort_by_key(|r| r.0);
    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
