//! Acceptance suite: every release gate of the toolkit, one test per
//! criterion, each printing a PASS line (run with `--nocapture` to see
//! them). Expected values are hand-derived or come from independent
//! brute-force oracles implemented inside this file.

use std::path::{Path, PathBuf};
use std::time::Instant;

use hdrkit::attention::{attention_weights, init_attention_params, self_attention};
use hdrkit::codec::{pfm, ppm};
use hdrkit::eval::{evaluate_pair, EvalConfig};
use hdrkit::features::FeatureMap;
use hdrkit::grad::{grad_color_analytic, grad_fd, max_relative_error};
use hdrkit::image::{compute_histogram, ChannelMode, HdrImage, LdrImage, BINS};
use hdrkit::loss::{
    composite_loss, loss_color, loss_perceptual, loss_weber, FeatureExtractor,
    IdentityExtractor, ImageBatch, LossWeights, PyramidExtractor, WeberParams,
};
use hdrkit::preprocess::{equalize_histogram, tonemap_mu, TonemapParams};
use hdrkit::ssim::{ms_ssim, ssim_components, SsimParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pass(criterion: u32, name: &str) {
    println!("ACCEPTANCE {criterion:02} {name}: PASS");
}

fn random_unit_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> HdrImage<f64> {
    let pixels = (0..w * h * 3).map(|_| rng.gen_range(0.0..=1.0)).collect();
    HdrImage::new_unit(w, h, pixels).unwrap()
}

fn random_linear_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> HdrImage<f64> {
    let pixels = (0..w * h * 3).map(|_| rng.gen_range(0.0..50.0)).collect();
    HdrImage::new(w, h, pixels).unwrap()
}

fn constant_image(w: usize, h: usize, unit_value: f64) -> HdrImage<f64> {
    HdrImage::new_unit(w, h, vec![unit_value; w * h * 3]).unwrap()
}

/// Pair whose reconstruction differs from the reference by 0.01..0.06 per
/// entry: all losses and gradients are well defined.
fn reconstruction_pair(seed: u64, w: usize, h: usize) -> ImageBatch<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..w * h * 3).map(|_| rng.gen_range(0.1..0.9)).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|&v| {
            let magnitude = rng.gen_range(0.01..0.06);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            v + sign * magnitude
        })
        .collect();
    ImageBatch::single(
        HdrImage::new_unit(w, h, x).unwrap(),
        HdrImage::new_unit(w, h, y).unwrap(),
    )
    .unwrap()
}

#[test]
fn c01_identity_zeroing() {
    let started = Instant::now();
    let weights = LossWeights::default();
    assert_eq!(
        (weights.alpha, weights.beta, weights.delta, weights.gamma, weights.lambda),
        (0.18, 0.5, 0.82, 0.80, 0.82)
    );
    let cfg = EvalConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x1de0);
    for i in 0..20 {
        let unit = random_unit_image(&mut rng, 48, 48);
        let batch = ImageBatch::single(unit.clone(), unit).unwrap();
        let out = composite_loss(
            &batch,
            &weights,
            &IdentityExtractor,
            &WeberParams::default(),
            &SsimParams::default(),
        )
        .unwrap();
        assert!(out.total.abs() <= 1e-9, "image {i}: composite {}", out.total);

        let linear = random_linear_image(&mut rng, 48, 48);
        let record = evaluate_pair("self", &linear, &linear.clone(), &cfg).unwrap();
        assert_eq!(record.psnr_db, f64::INFINITY, "image {i}");
        assert_eq!(record.ssim, 1.0, "image {i}");
        assert_eq!(record.ms_ssim, 1.0, "image {i}");
        assert_eq!(record.color, 0.0, "image {i}");
        assert!(record.composite.abs() <= 1e-9, "image {i}");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}, budget 5 s");
    pass(1, "identity zeroing");
}

#[test]
fn c02_mu_law_oracle() {
    let params = TonemapParams::new(5000.0).unwrap();
    let endpoints =
        HdrImage::new_unit(2, 1, vec![0.0f64, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
    let mapped = tonemap_mu(&endpoints, &params).unwrap();
    assert!(mapped.pixel(0, 0)[0].abs() <= 1e-12);
    assert!((mapped.pixel(1, 0)[0] - 1.0).abs() <= 1e-12);

    let mid = HdrImage::new_unit(1, 1, vec![0.5f64; 3]).unwrap();
    let mapped = tonemap_mu(&mid, &params).unwrap();
    assert!((mapped.pixel(0, 0)[0] - 0.91866).abs() <= 1e-4);

    let mut rng = ChaCha8Rng::seed_from_u64(0x2a);
    let mut samples: Vec<f64> = (0..1000).map(|_| rng.gen_range(0.0..=1.0)).collect();
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    samples.dedup();
    let pixels: Vec<f64> = samples.iter().flat_map(|&v| [v, v, v]).collect();
    let image = HdrImage::new_unit(samples.len(), 1, pixels).unwrap();
    let mapped = tonemap_mu(&image, &params).unwrap();
    for i in 1..samples.len() {
        assert!(mapped.pixel(i, 0)[0] > mapped.pixel(i - 1, 0)[0], "not strictly monotone at {i}");
    }
    pass(2, "mu-law oracle");
}

#[test]
fn c03_weber_oracle() {
    let params = WeberParams::default();
    assert_eq!((params.fraction, params.bit_depth), (0.02, 8));
    let x = constant_image(1, 1, 128.0 / 255.0);
    let y = constant_image(1, 1, 129.0 / 255.0);
    let value = hdrkit::loss::psnr_weber(&x, &y, &params).unwrap();
    assert!((value - 39.97).abs() <= 0.01, "got {value}");

    assert_eq!(hdrkit::loss::psnr_weber(&x, &x, &params).unwrap(), f64::INFINITY);
    let identical = ImageBatch::single(x.clone(), x).unwrap();
    assert_eq!(loss_weber(&identical, &params).unwrap(), 0.0);
    pass(3, "weber oracle");
}

/// Independent single-pass oracle: raw sums -> moments -> the two
/// comparison terms, channel-averaged. The implementation under test uses
/// two-pass centered moments instead.
fn ssim_oracle(x: &HdrImage<f64>, y: &HdrImage<f64>, k1: f64, k2: f64) -> (f64, f64) {
    let scale = 255.0;
    let c1 = (k1 * scale) * (k1 * scale);
    let c2 = (k2 * scale) * (k2 * scale);
    let n = (x.width() * x.height()) as f64;
    let mut l_sum = 0.0;
    let mut cs_sum = 0.0;
    for ch in 0..3 {
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (px, py) in x.pixels().chunks_exact(3).zip(y.pixels().chunks_exact(3)) {
            let a = px[ch] * scale;
            let b = py[ch] * scale;
            sx += a;
            sy += b;
            sxx += a * a;
            syy += b * b;
            sxy += a * b;
        }
        let mx = sx / n;
        let my = sy / n;
        let vx = sxx / n - mx * mx;
        let vy = syy / n - my * my;
        let cov = sxy / n - mx * my;
        l_sum += (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
        cs_sum += (2.0 * cov + c2) / (vx + vy + c2);
    }
    (l_sum / 3.0, cs_sum / 3.0)
}

#[test]
fn c04_ssim_brute_force_equivalence() {
    let params = SsimParams::global();
    assert_eq!((params.k1, params.k2), (0.01, 0.03));
    let mut rng = ChaCha8Rng::seed_from_u64(0x55);
    for i in 0..100 {
        let x = random_unit_image(&mut rng, 8, 8);
        let y = random_unit_image(&mut rng, 8, 8);
        let (l, cs) = ssim_components(&x, &y, &params).unwrap();
        let (l_ref, cs_ref) = ssim_oracle(&x, &y, params.k1, params.k2);
        assert!((l - l_ref).abs() <= 1e-6, "pair {i}: l {l} vs {l_ref}");
        assert!((cs - cs_ref).abs() <= 1e-6, "pair {i}: cs {cs} vs {cs_ref}");
    }

    let x = constant_image(8, 8, 100.0 / 255.0);
    let y = constant_image(8, 8, 200.0 / 255.0);
    let (l, cs) = ssim_components(&x, &y, &params).unwrap();
    assert!((l - 0.80003).abs() <= 1e-4, "l = {l}");
    assert_eq!(cs, 1.0);
    pass(4, "ssim brute-force equivalence");
}

#[test]
fn c05_ms_ssim_recursion() {
    let x = constant_image(8, 8, 100.0 / 255.0);
    let y = constant_image(8, 8, 200.0 / 255.0);

    let single = SsimParams { scales: 1, ..SsimParams::global() };
    let (l, cs) = ssim_components(&x, &y, &single).unwrap();
    assert_eq!(ms_ssim(&x, &y, &single).unwrap(), l * cs);

    for scales in 1..=3 {
        let params = SsimParams { scales, ..SsimParams::global() };
        let value = ms_ssim(&x, &y, &params).unwrap();
        assert!((value - 0.80003).abs() <= 1e-4, "scales {scales}: {value}");
    }

    // Windowed single-scale obeys the same identity on window-sized planes.
    let wx = constant_image(16, 16, 100.0 / 255.0);
    let wy = constant_image(16, 16, 200.0 / 255.0);
    let windowed = SsimParams { scales: 1, ..SsimParams::default() };
    let (l, cs) = ssim_components(&wx, &wy, &windowed).unwrap();
    assert_eq!(ms_ssim(&wx, &wy, &windowed).unwrap(), l * cs);

    let mut rng = ChaCha8Rng::seed_from_u64(0x5c);
    let z = random_unit_image(&mut rng, 16, 16);
    let identity = ms_ssim(&z, &z.clone(), &SsimParams::global()).unwrap();
    assert!((identity - 1.0).abs() <= 1e-9);
    pass(5, "ms-ssim recursion");
}

#[test]
fn c06_color_loss_oracle() {
    let started = Instant::now();
    let x = constant_image(1, 1, 0.0);
    let y = HdrImage::new_unit(1, 1, vec![1.0, 0.0, 0.0]).unwrap();
    assert_eq!(loss_color(&ImageBatch::single(x, y).unwrap(), 8), 1.0);

    let x2 = constant_image(2, 1, 0.0);
    let y2 = HdrImage::new_unit(2, 1, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
    let two = loss_color(&ImageBatch::single(x2, y2).unwrap(), 8);
    assert!((two - 2f64.sqrt()).abs() <= 1e-9);

    for seed in 0..10u64 {
        let batch = reconstruction_pair(0xc0_10 + seed, 16, 16);
        let analytic = grad_color_analytic(&batch, 8).unwrap();
        let fd = grad_fd(|b| Ok(loss_color(b, 8)), &batch, 1e-3).unwrap();
        let err = max_relative_error(&analytic, &fd, 1e-9);
        assert!(err <= 1e-3, "seed {seed}: relative error {err}");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}, budget 30 s");
    pass(6, "color-loss oracle");
}

#[test]
fn c07_plain_psnr_oracle() {
    let x = constant_image(4, 4, 0.0);
    let y = constant_image(4, 4, 16.0 / 255.0);
    let value = hdrkit::loss::psnr(&x, &y, 8).unwrap();
    assert!((value - 24.05).abs() <= 0.01, "got {value}");
    pass(7, "plain-psnr oracle");
}

/// Realistic random-image families (uniform noise, low contrast, wide
/// bimodal, gradient) for the flattening comparison.
fn random_natural_image(seed: u64, width: usize, height: usize) -> LdrImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = width * height;
    let clamp = |v: f64| v.round().clamp(0.0, 255.0) as u8;
    let pixels: Vec<u8> = match seed % 4 {
        0 => (0..n * 3).map(|_| rng.gen_range(0..=255)).collect(),
        1 => {
            let center = rng.gen_range(60.0..190.0);
            let spread = rng.gen_range(5.0..30.0);
            (0..n * 3)
                .map(|_| clamp(center + spread * (rng.gen_range(0.0f64..1.0) - 0.5) * 4.0))
                .collect()
        }
        2 => (0..n * 3)
            .map(|_| {
                let center = if rng.gen_bool(0.5) { 60.0 } else { 190.0 };
                clamp(center + rng.gen_range(-36.0..36.0))
            })
            .collect(),
        _ => {
            let mut out = Vec::with_capacity(n * 3);
            for _ in 0..height {
                for x in 0..width {
                    let base = 30.0 + 190.0 * x as f64 / width.max(2) as f64;
                    for _ in 0..3 {
                        out.push(clamp(base + rng.gen_range(-12.0..12.0)));
                    }
                }
            }
            out
        }
    };
    LdrImage::new(width, height, pixels).unwrap()
}

fn sup_distance_to_uniform(counts: &[u64; BINS], total: u64) -> f64 {
    let mut acc = 0u64;
    let mut worst = 0.0f64;
    for (bin, &c) in counts.iter().enumerate() {
        acc += c;
        worst = worst.max((acc as f64 / total as f64 - (bin + 1) as f64 / BINS as f64).abs());
    }
    worst
}

#[test]
fn c08_equalization_properties() {
    let constant = LdrImage::new(3, 3, vec![99; 27]).unwrap();
    assert_eq!(equalize_histogram(&constant, ChannelMode::Luma), constant);
    assert_eq!(equalize_histogram(&constant, ChannelMode::PerChannel), constant);

    let extremes = LdrImage::new(2, 1, vec![0, 0, 0, 255, 255, 255]).unwrap();
    assert_eq!(equalize_histogram(&extremes, ChannelMode::Luma), extremes);
    assert_eq!(equalize_histogram(&extremes, ChannelMode::PerChannel), extremes);

    let pixels: Vec<u8> = [100u8, 100, 100, 200].iter().flat_map(|&r| [r, 50, 50]).collect();
    let two_level = LdrImage::new(4, 1, pixels).unwrap();
    let out = equalize_histogram(&two_level, ChannelMode::PerChannel);
    let reds: Vec<u8> = out.pixels().chunks_exact(3).map(|p| p[0]).collect();
    assert_eq!(reds, vec![0, 0, 0, 255]);

    for seed in 0..100u64 {
        let image = random_natural_image(seed, 48, 48);
        let total = (image.width() * image.height()) as u64;

        let out = equalize_histogram(&image, ChannelMode::PerChannel);
        let before = compute_histogram(&image, ChannelMode::PerChannel);
        let after = compute_histogram(&out, ChannelMode::PerChannel);
        for (b, a) in before.channels().iter().zip(after.channels()) {
            assert!(
                sup_distance_to_uniform(a, total) <= sup_distance_to_uniform(b, total) + 1e-12,
                "seed {seed}: per-channel sup-distance increased"
            );
        }

        let out = equalize_histogram(&image, ChannelMode::Luma);
        let before = compute_histogram(&image, ChannelMode::Luma);
        let after = compute_histogram(&out, ChannelMode::Luma);
        assert!(
            sup_distance_to_uniform(&after.channels()[0], total)
                <= sup_distance_to_uniform(&before.channels()[0], total) + 1e-12,
            "seed {seed}: luma sup-distance increased"
        );
    }
    pass(8, "equalization properties");
}

#[test]
fn c09_attention_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa77);
    for case in 0..50 {
        let channels = rng.gen_range(1..=8);
        let h = rng.gen_range(1..=8);
        let w = rng.gen_range(1..=8);
        let values = (0..channels * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = FeatureMap::<f64>::new(channels, h, w, values).unwrap();
        let params = init_attention_params::<f64>(case, channels, 8);

        let out = self_attention(&x, &params).unwrap();
        assert_eq!(out.shape(), x.shape(), "case {case}");
        assert_eq!(out.values(), x.values(), "case {case}: gamma 0 must be the identity");

        let with_gamma = self_attention(&x, &params.clone().with_gamma(0.5)).unwrap();
        assert_eq!(with_gamma.shape(), x.shape());

        let n = h * w;
        let beta = attention_weights(&x, &params).unwrap();
        for j in 0..n {
            let sum: f64 = beta[j * n..(j + 1) * n].iter().sum();
            assert!((sum - 1.0).abs() <= 1e-6, "case {case}, column {j}: {sum}");
        }
    }

    let a = init_attention_params::<f64>(41, 6, 2);
    let b = init_attention_params::<f64>(41, 6, 2);
    let bits = |p: &hdrkit::AttentionParamsF64| -> Vec<u64> {
        p.query_weights()
            .iter()
            .chain(p.key_weights())
            .chain(p.value_weights())
            .map(|v| v.to_bits())
            .collect()
    };
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(a.gamma().to_bits(), b.gamma().to_bits());
    pass(9, "attention invariants");
}

#[test]
fn c10_io_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x10);
    for i in 0..50 {
        let w = rng.gen_range(1..=24);
        let h = rng.gen_range(1..=24);
        let pixels: Vec<u8> = (0..w * h * 3).map(|_| rng.gen()).collect();
        let image = LdrImage::new(w, h, pixels).unwrap();
        assert_eq!(ppm::read_ppm(&ppm::write_ppm(&image)).unwrap(), image, "ppm {i}");
    }

    for i in 0..50 {
        let w = rng.gen_range(1..=16);
        let h = rng.gen_range(1..=16);
        let pixels: Vec<f32> = (0..w * h * 3).map(|_| rng.gen_range(0.0f32..1e4)).collect();
        let image = HdrImage::new(w, h, pixels).unwrap();

        let little = pfm::read_pfm(&pfm::write_pfm(&image)).unwrap();
        let bits = |im: &HdrImage<f32>| -> Vec<u32> {
            im.pixels().iter().map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(&little), bits(&image), "pfm le {i}");

        // Big-endian variant of the same image: positive scale, BE floats,
        // bottom-to-top rows.
        let mut big = format!("PF\n{w} {h}\n1.0\n").into_bytes();
        for row in (0..h).rev() {
            for value in &image.pixels()[row * w * 3..(row + 1) * w * 3] {
                big.extend_from_slice(&value.to_be_bytes());
            }
        }
        let decoded = pfm::read_pfm(&big).unwrap();
        assert_eq!(bits(&decoded), bits(&image), "pfm be {i}");
    }
    pass(10, "i/o round trips");
}

fn cli_bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_hdrkit"))
}

fn write_pfm_file(path: &Path, width: usize, height: usize, pixels: Vec<f32>) {
    let image = HdrImage::new(width, height, pixels).unwrap();
    std::fs::write(path, pfm::write_pfm(&image)).unwrap();
}

#[test]
fn c11_end_to_end_cli() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let gt_dir = dir.path().join("gt");
    let rec_dir = dir.path().join("rec");
    std::fs::create_dir_all(&gt_dir).unwrap();
    std::fs::create_dir_all(&rec_dir).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(0xe2e);
    for i in 0..5 {
        let pixels: Vec<f32> = (0..48 * 48 * 3).map(|_| rng.gen_range(0.1f32..20.0)).collect();
        let reconstructed: Vec<f32> =
            pixels.iter().map(|&v| (v * rng.gen_range(0.9f32..1.1)).max(0.0)).collect();
        write_pfm_file(&gt_dir.join(format!("pair{i}.pfm")), 48, 48, pixels);
        write_pfm_file(&rec_dir.join(format!("pair{i}.pfm")), 48, 48, reconstructed);
    }

    let out_csv = dir.path().join("report.csv");
    let run = || {
        std::process::Command::new(cli_bin())
            .args([
                "evaluate",
                gt_dir.to_str().unwrap(),
                rec_dir.to_str().unwrap(),
                out_csv.to_str().unwrap(),
            ])
            .output()
            .expect("binary runs")
    };
    let first = run();
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let report = std::fs::read_to_string(&out_csv).unwrap();

    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines.len(), 1 + 5 + 2);
    assert_eq!(lines[0], "pair,psnr_db,ssim,ms_ssim,weber_psnr_db,color,composite");

    // Recompute the aggregate rows from the record rows.
    let parse_row = |line: &str| -> Vec<f64> {
        line.split(',').skip(1).map(|v| v.parse::<f64>().unwrap()).collect()
    };
    let records: Vec<Vec<f64>> = lines[1..6].iter().map(|l| parse_row(l)).collect();
    let mean_row = parse_row(lines[6]);
    let std_row = parse_row(lines[7]);
    assert!(lines[6].starts_with("__mean__,"));
    assert!(lines[7].starts_with("__std__,"));
    for col in 0..6 {
        let values: Vec<f64> = records.iter().map(|r| r[col]).collect();
        let mean = values.iter().sum::<f64>() / 5.0;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
        assert!((mean_row[col] - mean).abs() <= 1e-9, "column {col} mean");
        assert!((std_row[col] - var.sqrt()).abs() <= 1e-9, "column {col} std");
    }

    let second = run();
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&out_csv).unwrap(), report, "rerun must be byte-identical");

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, budget 10 s");
    pass(11, "end-to-end cli");
}

#[test]
fn c12_perceptual_loss_seam() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xf0);
    let x = random_unit_image(&mut rng, 12, 9);
    let y = random_unit_image(&mut rng, 12, 9);
    let mse: f64 = x
        .pixels()
        .iter()
        .zip(y.pixels())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.pixels().len() as f64;
    let batch = ImageBatch::single(x, y).unwrap();
    let identity = loss_perceptual(&batch, &IdentityExtractor).unwrap();
    assert!((identity - mse).abs() <= 1e-12);

    let (c1, c2) = (0.2, 0.7);
    let a = constant_image(16, 16, c1);
    let b = constant_image(16, 16, c2);
    let extractor = PyramidExtractor::default();
    let fa = FeatureExtractor::<f64>::extract(&extractor, &a);
    let fb = FeatureExtractor::<f64>::extract(&extractor, &b);
    assert_eq!(fa.len(), 4);
    let expected = (c1 - c2) * (c1 - c2);
    for (level, (la, lb)) in fa.iter().zip(&fb).enumerate() {
        let level_mse: f64 = la
            .values()
            .iter()
            .zip(lb.values())
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            / la.values().len() as f64;
        assert!((level_mse - expected).abs() <= 1e-12, "level {level}");
    }
    let pyramid_loss =
        loss_perceptual(&ImageBatch::single(a, b).unwrap(), &extractor).unwrap();
    assert!((pyramid_loss - expected).abs() <= 1e-12);
    pass(12, "perceptual-loss seam");
}
