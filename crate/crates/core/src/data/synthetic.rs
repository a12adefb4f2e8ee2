//! Synthetic image fixtures.
//!
//! Real micrographs cannot ship with the repository, so tests and demos run
//! on procedurally generated stand-ins: bright worm-like curves on a dim
//! textured field. The five classes differ by controlled, learnable factors
//! — curvature amplitude, body thickness, spiral count, tail taper, and
//! background texture frequency — with intra-class jitter on top.
//!
//! Everything is a pure function of the seed: regenerating a dataset with
//! the same arguments writes byte-identical PNG files.

use std::f64::consts::PI;
use std::path::Path;

use image::RgbImage;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

use crate::data::manifest::{scan_dataset, DatasetManifest};
use crate::error::{Error, Result};
use crate::train::derive_seed;

/// Class directory names, lexicographically ordered so the class index in a
/// scanned manifest matches the generator's class index.
pub const SYNTHETIC_CLASS_NAMES: [&str; 5] =
    ["a-gentle", "b-wavy", "c-coiled", "d-tapered", "e-textured"];

/// Disjoint geometric-primitive task used to pretrain backbones.
pub const PRETEXT_CLASS_NAMES: [&str; 4] = ["p0-disc", "p1-ring", "p2-bars", "p3-specks"];

/// Per-image generation parameters after intra-class jitter.
#[derive(Clone, Debug)]
struct WormParams {
    /// Curvature amplitude as a fraction of body length.
    wave_amp: f64,
    /// Sine lobes along the body.
    wave_cycles: f64,
    /// Body half-width as a fraction of image size.
    thickness: f64,
    /// Full turns of a coiled body; zero draws an open curve.
    spiral_turns: f64,
    /// Fraction of thickness lost toward the tail.
    taper: f64,
    /// Background texture cycles across the image.
    bg_freq: f64,
}

fn class_params(class: usize, rng: &mut ChaCha8Rng) -> WormParams {
    let mut j = |lo: f64, hi: f64| rng.gen_range(lo..hi);
    // Template per class; one factor dominates each class identity.
    let (wave_amp, wave_cycles, thickness, spiral_turns, taper, bg_freq) = match class {
        0 => (0.055, 1.0, 0.030, 0.0, 0.35, 2.0),
        1 => (0.165, 3.0, 0.030, 0.0, 0.35, 2.0),
        2 => (0.020, 1.0, 0.027, 1.9, 0.35, 2.0),
        3 => (0.055, 1.0, 0.050, 0.0, 0.92, 2.0),
        _ => (0.055, 1.0, 0.030, 0.0, 0.35, 9.0),
    };
    WormParams {
        wave_amp: wave_amp * j(0.82, 1.18),
        wave_cycles: wave_cycles * j(0.88, 1.12),
        thickness: thickness * j(0.85, 1.15),
        spiral_turns: if spiral_turns > 0.0 { spiral_turns * j(0.85, 1.15) } else { 0.0 },
        taper: (taper * j(0.88, 1.12)).min(0.98),
        bg_freq: bg_freq * j(0.85, 1.15),
    }
}

/// Soft-edged raster canvas: an alpha mask plus a foreground value layer,
/// composed over a textured background at the end.
struct Canvas {
    size: usize,
    alpha: Vec<f32>,
    value: Vec<f32>,
}

impl Canvas {
    fn new(size: usize) -> Self {
        Canvas { size, alpha: vec![0.0; size * size], value: vec![0.0; size * size] }
    }

    /// Stamp a disc of radius `rad` (pixels) with a 1px soft edge.
    fn stamp_disc(&mut self, cy: f64, cx: f64, rad: f64, val: f64) {
        let s = self.size as i64;
        let lo_r = ((cy - rad - 1.0).floor() as i64).max(0);
        let hi_r = ((cy + rad + 1.0).ceil() as i64).min(s - 1);
        let lo_c = ((cx - rad - 1.0).floor() as i64).max(0);
        let hi_c = ((cx + rad + 1.0).ceil() as i64).min(s - 1);
        for r in lo_r..=hi_r {
            for c in lo_c..=hi_c {
                let d = ((r as f64 - cy).powi(2) + (c as f64 - cx).powi(2)).sqrt();
                let a = (rad + 0.5 - d).clamp(0.0, 1.0) as f32;
                let idx = r as usize * self.size + c as usize;
                if a > self.alpha[idx] {
                    self.alpha[idx] = a;
                    self.value[idx] = val as f32;
                }
            }
        }
    }

    /// Compose over a sinusoidal-texture background with uniform noise.
    fn finish(self, bg_freq: f64, rng: &mut ChaCha8Rng) -> RgbImage {
        let s = self.size;
        let phase_r = rng.gen_range(0.0..s as f64);
        let phase_c = rng.gen_range(0.0..s as f64);
        let mut img = RgbImage::new(s as u32, s as u32);
        for r in 0..s {
            for c in 0..s {
                let tex = (2.0 * PI * bg_freq * (c as f64 + phase_c) / s as f64).sin()
                    * (2.0 * PI * bg_freq * (r as f64 + phase_r) / s as f64).cos();
                let noise: f64 = rng.gen_range(-9.0..9.0);
                let bg = (40.0 + 16.0 * tex + noise).clamp(10.0, 80.0);
                let idx = r * s + c;
                let a = self.alpha[idx] as f64;
                let fg = self.value[idx] as f64;
                let v = bg * (1.0 - a) + fg * a;
                let px = |shift: f64| (v + shift * a).clamp(0.0, 255.0) as u8;
                img.put_pixel(c as u32, r as u32, image::Rgb([px(10.0), px(0.0), px(-12.0)]));
            }
        }
        img
    }
}

/// Render one worm image for `class` using draws from `rng`.
pub fn render_worm(class: usize, size: usize, rng: &mut ChaCha8Rng) -> RgbImage {
    assert!(class < 5, "worm classes are 0..5");
    assert!(size >= 32, "images below 32px lose the specimen");
    let p = class_params(class, rng);
    let s = size as f64;
    let theta = rng.gen_range(0.0..2.0 * PI);
    let phase = rng.gen_range(0.0..2.0 * PI);
    let off_r = rng.gen_range(-0.06..0.06) * s;
    let off_c = rng.gen_range(-0.06..0.06) * s;
    let (sin_t, cos_t) = theta.sin_cos();
    let center = (s / 2.0 + off_r, s / 2.0 + off_c);

    let mut canvas = Canvas::new(size);
    let n = 8 * size;
    let mut body_noise = 0.0f64;
    for i in 0..=n {
        let t = i as f64 / n as f64;
        // Body centerline before rotation.
        let (x, y) = if p.spiral_turns > 0.0 {
            let rad = 0.30 * s * (0.18 + 0.82 * t);
            let ang = phase + 2.0 * PI * p.spiral_turns * t;
            (rad * ang.cos(), rad * ang.sin())
        } else {
            let len = 0.62 * s;
            let x = (t - 0.5) * len;
            let y = p.wave_amp * len * (2.0 * PI * p.wave_cycles * t + phase).sin();
            (x, y)
        };
        let col = center.1 + x * cos_t - y * sin_t;
        let row = center.0 + x * sin_t + y * cos_t;
        // Slowly varying brightness along the body.
        if i % 16 == 0 {
            body_noise = rng.gen_range(-8.0..8.0);
        }
        let val = 196.0 + 34.0 * (PI * t).sin() + body_noise;
        let rad = (p.thickness * s * (1.0 - p.taper * t.powf(1.5))).max(0.6);
        canvas.stamp_disc(row, col, rad, val);
    }
    canvas.finish(p.bg_freq, rng)
}

/// Render one geometric-primitive image for the pretext task.
pub fn render_pretext(class: usize, size: usize, rng: &mut ChaCha8Rng) -> RgbImage {
    assert!(class < PRETEXT_CLASS_NAMES.len(), "pretext classes are 0..4");
    assert!(size >= 32, "images below 32px lose the primitives");
    let s = size as f64;
    let mut canvas = Canvas::new(size);
    let center = (
        s / 2.0 + rng.gen_range(-0.08..0.08) * s,
        s / 2.0 + rng.gen_range(-0.08..0.08) * s,
    );
    let val = rng.gen_range(185.0..225.0);
    match class {
        0 => {
            let rad = rng.gen_range(0.14..0.22) * s;
            canvas.stamp_disc(center.0, center.1, rad, val);
        }
        1 => {
            let rad = rng.gen_range(0.16..0.24) * s;
            let width = rng.gen_range(0.025..0.045) * s;
            let n = 10 * size;
            for i in 0..n {
                let ang = 2.0 * PI * i as f64 / n as f64;
                canvas.stamp_disc(
                    center.0 + rad * ang.sin(),
                    center.1 + rad * ang.cos(),
                    width,
                    val,
                );
            }
        }
        2 => {
            let bars = rng.gen_range(2..=4);
            let theta: f64 = rng.gen_range(0.0..PI);
            let (sin_t, cos_t) = theta.sin_cos();
            let gap = rng.gen_range(0.16..0.22) * s;
            let half_len = rng.gen_range(0.24..0.34) * s;
            let width = rng.gen_range(0.02..0.035) * s;
            for b in 0..bars {
                let offset = (b as f64 - (bars - 1) as f64 / 2.0) * gap;
                let n = 6 * size;
                for i in 0..=n {
                    let u = (i as f64 / n as f64 - 0.5) * 2.0 * half_len;
                    canvas.stamp_disc(
                        center.0 + u * sin_t + offset * cos_t,
                        center.1 + u * cos_t - offset * sin_t,
                        width,
                        val,
                    );
                }
            }
        }
        _ => {
            let specks = rng.gen_range(8..=15);
            for _ in 0..specks {
                let r = rng.gen_range(0.12..0.88) * s;
                let c = rng.gen_range(0.12..0.88) * s;
                let rad = rng.gen_range(0.018..0.04) * s;
                canvas.stamp_disc(r, c, rad, val);
            }
        }
    }
    canvas.finish(2.0, rng)
}

fn generate_dataset(
    root: &Path,
    class_names: &[&str],
    per_class: usize,
    image_size: usize,
    seed: u64,
    render: impl Fn(usize, usize, &mut ChaCha8Rng) -> RgbImage,
) -> Result<DatasetManifest> {
    if per_class < 5 {
        return Err(Error::Data(format!("per_class {per_class} is below the minimum of 5")));
    }
    if image_size < 32 {
        return Err(Error::Data(format!("image size {image_size} is below the minimum of 32")));
    }
    for (class, name) in class_names.iter().enumerate() {
        let dir = root.join(name);
        std::fs::create_dir_all(&dir)?;
        for i in 0..per_class {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(seed, 50 + class as u64, i as u64));
            let img = render(class, image_size, &mut rng);
            img.save(dir.join(format!("worm_{i:04}.png")))
                .map_err(|e| Error::Data(format!("failed to write image: {e}")))?;
        }
    }
    Ok(scan_dataset(root)?.manifest)
}

/// Write a synthetic five-factor dataset under `root/<class>/worm_*.png`
/// and return its manifest. `classes` selects a prefix of the five class
/// templates; regeneration with identical arguments is byte-identical.
pub fn generate_synthetic_dataset(
    root: impl AsRef<Path>,
    classes: usize,
    per_class: usize,
    image_size: usize,
    seed: u64,
) -> Result<DatasetManifest> {
    if !(2..=5).contains(&classes) {
        return Err(Error::Data(format!("synthetic class count {classes} outside 2..=5")));
    }
    generate_dataset(
        root.as_ref(),
        &SYNTHETIC_CLASS_NAMES[..classes],
        per_class,
        image_size,
        seed,
        render_worm,
    )
}

/// Write the geometric pretext dataset used for backbone pretraining. Its
/// label space is disjoint from the worm classes.
pub fn generate_pretext_dataset(
    root: impl AsRef<Path>,
    per_class: usize,
    image_size: usize,
    seed: u64,
) -> Result<DatasetManifest> {
    generate_dataset(
        root.as_ref(),
        &PRETEXT_CLASS_NAMES,
        per_class,
        image_size,
        // Offset the stream so a pretext set never replays worm draws.
        seed ^ 0xC0FFEE,
        render_pretext,
    )
}

/// Rotation-invariant summary statistics of one image, the feature vector
/// of the linear baseline that sanity-checks class separability.
pub fn pixel_statistics(img: &RgbImage) -> [f64; 8] {
    let gray: Vec<f64> = img
        .pixels()
        .map(|p| (299.0 * p.0[0] as f64 + 587.0 * p.0[1] as f64 + 114.0 * p.0[2] as f64) / 1000.0)
        .collect();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let n = gray.len() as f64;
    let mean = gray.iter().sum::<f64>() / n;
    let var = gray.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;

    let mut grad_h = 0.0;
    let mut grad_v = 0.0;
    for r in 0..h {
        for c in 0..w {
            if c + 1 < w {
                grad_h += (gray[r * w + c + 1] - gray[r * w + c]).abs();
            }
            if r + 1 < h {
                grad_v += (gray[(r + 1) * w + c] - gray[r * w + c]).abs();
            }
        }
    }
    grad_h /= (h * (w - 1)) as f64;
    grad_v /= ((h - 1) * w) as f64;

    let bright: Vec<(usize, usize)> = (0..h)
        .flat_map(|r| (0..w).map(move |c| (r, c)))
        .filter(|&(r, c)| gray[r * w + c] > 128.0)
        .collect();
    let (bright_frac, gyration, bright_mean, fill) = if bright.is_empty() {
        (0.0, 0.0, 0.0, 0.0)
    } else {
        let bn = bright.len() as f64;
        let cr = bright.iter().map(|&(r, _)| r as f64).sum::<f64>() / bn;
        let cc = bright.iter().map(|&(_, c)| c as f64).sum::<f64>() / bn;
        let gyr = (bright
            .iter()
            .map(|&(r, c)| (r as f64 - cr).powi(2) + (c as f64 - cc).powi(2))
            .sum::<f64>()
            / bn)
            .sqrt()
            / w.max(h) as f64;
        let bsum: f64 = bright.iter().map(|&(r, c)| gray[r * w + c]).sum();
        let (min_r, max_r) = bright.iter().fold((usize::MAX, 0), |(lo, hi), &(r, _)| {
            (lo.min(r), hi.max(r))
        });
        let (min_c, max_c) = bright.iter().fold((usize::MAX, 0), |(lo, hi), &(_, c)| {
            (lo.min(c), hi.max(c))
        });
        let bbox = ((max_r - min_r + 1) * (max_c - min_c + 1)) as f64;
        (bn / n, gyr, bsum / bn / 255.0, bn / bbox)
    };
    [mean / 255.0, var.sqrt() / 255.0, bright_frac, grad_h / 255.0, grad_v / 255.0, gyration, bright_mean, fill]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::roi::preprocess_roi;
    use std::path::PathBuf;

    fn temp_root(tag: &str) -> PathBuf {
        let p = std::env::temp_dir().join(format!("nemakit-synth-{}-{tag}", std::process::id()));
        std::fs::remove_dir_all(&p).ok();
        p
    }

    #[test]
    fn generation_is_byte_identical_under_seed() {
        let root_a = temp_root("det-a");
        let root_b = temp_root("det-b");
        let ma = generate_synthetic_dataset(&root_a, 5, 5, 48, 7).unwrap();
        let mb = generate_synthetic_dataset(&root_b, 5, 5, 48, 7).unwrap();
        assert_eq!(ma.checksum, mb.checksum);
        for (ra, rb) in ma.records.iter().zip(&mb.records) {
            let bytes_a = std::fs::read(ma.absolute_path(ra)).unwrap();
            let bytes_b = std::fs::read(mb.absolute_path(rb)).unwrap();
            assert_eq!(bytes_a, bytes_b, "{} differs", ra.path.display());
        }
        // A different seed changes pixels.
        let root_c = temp_root("det-c");
        let mc = generate_synthetic_dataset(&root_c, 5, 5, 48, 8).unwrap();
        let a0 = std::fs::read(ma.absolute_path(&ma.records[0])).unwrap();
        let c0 = std::fs::read(mc.absolute_path(&mc.records[0])).unwrap();
        assert_ne!(a0, c0);
        for r in [root_a, root_b, root_c] {
            std::fs::remove_dir_all(&r).ok();
        }
    }

    #[test]
    fn manifest_matches_request() {
        let root = temp_root("shape");
        let m = generate_synthetic_dataset(&root, 3, 6, 32, 1).unwrap();
        assert_eq!(m.classes, vec!["a-gentle", "b-wavy", "c-coiled"]);
        assert_eq!(m.class_counts(), vec![6, 6, 6]);
        assert_eq!(m.records[0].width, 32);
        std::fs::remove_dir_all(&root).ok();
    }

    #[test]
    fn invalid_requests_are_rejected() {
        let root = temp_root("invalid");
        assert!(generate_synthetic_dataset(&root, 5, 4, 64, 1).is_err());
        assert!(generate_synthetic_dataset(&root, 1, 5, 64, 1).is_err());
        assert!(generate_synthetic_dataset(&root, 6, 5, 64, 1).is_err());
        assert!(generate_synthetic_dataset(&root, 5, 5, 16, 1).is_err());
        std::fs::remove_dir_all(&root).ok();
    }

    #[test]
    fn every_rendered_worm_yields_a_roi() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for class in 0..5 {
            for _ in 0..4 {
                let img = render_worm(class, 64, &mut rng);
                let crop = preprocess_roi(&img).expect("specimen detected");
                assert!(crop.width() >= 8);
            }
        }
    }

    #[test]
    fn pretext_classes_are_distinct_and_render() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for class in 0..PRETEXT_CLASS_NAMES.len() {
            let img = render_pretext(class, 64, &mut rng);
            let stats = pixel_statistics(&img);
            assert!(stats[2] > 0.0, "class {class} drew no bright pixels");
        }
    }

    /// Ridge-regression linear classifier on pixel statistics: the class
    /// factors must be coarse enough that even this baseline separates
    /// them well above chance.
    #[test]
    fn pixel_statistics_baseline_separates_classes() {
        let per_class = 16usize;
        let mut feats = Vec::new();
        let mut labels = Vec::new();
        for class in 0..5 {
            for i in 0..per_class {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(99, 50 + class as u64, i as u64));
                let img = render_worm(class, 64, &mut rng);
                feats.push(pixel_statistics(&img));
                labels.push(class);
            }
        }
        // Even indices train, odd indices test.
        let train: Vec<usize> = (0..feats.len()).filter(|i| i % 2 == 0).collect();
        let test: Vec<usize> = (0..feats.len()).filter(|i| i % 2 == 1).collect();
        let w = fit_ridge(&feats, &labels, &train, 5, 1e-4);
        let correct = test
            .iter()
            .filter(|&&i| predict(&w, &feats[i]) == labels[i])
            .count();
        let acc = correct as f64 / test.len() as f64;
        assert!(acc > 0.6, "linear baseline accuracy {acc:.3} <= 0.6");
    }

    /// Least squares one-hot regression with ridge damping, solved by
    /// Gauss-Jordan elimination on the 9x9 normal equations.
    fn fit_ridge(
        feats: &[[f64; 8]],
        labels: &[usize],
        train: &[usize],
        k: usize,
        lambda: f64,
    ) -> Vec<[f64; 9]> {
        let d = 9usize;
        let row = |i: usize| -> [f64; 9] {
            let mut r = [1.0; 9];
            r[..8].copy_from_slice(&feats[i]);
            r
        };
        let mut xtx = vec![vec![0.0f64; d]; d];
        let mut xty = vec![vec![0.0f64; k]; d];
        for &i in train {
            let x = row(i);
            for a in 0..d {
                for b in 0..d {
                    xtx[a][b] += x[a] * x[b];
                }
                xty[a][labels[i]] += x[a];
            }
        }
        for (a, r) in xtx.iter_mut().enumerate() {
            r[a] += lambda;
        }
        // Gauss-Jordan with partial pivoting on [xtx | xty].
        for col in 0..d {
            let pivot = (col..d).max_by(|&a, &b| {
                xtx[a][col].abs().partial_cmp(&xtx[b][col].abs()).unwrap()
            }).unwrap();
            xtx.swap(col, pivot);
            xty.swap(col, pivot);
            let p = xtx[col][col];
            for b in 0..d {
                xtx[col][b] /= p;
            }
            for b in 0..k {
                xty[col][b] /= p;
            }
            for r in 0..d {
                if r != col {
                    let f = xtx[r][col];
                    for b in 0..d {
                        xtx[r][b] -= f * xtx[col][b];
                    }
                    for b in 0..k {
                        xty[r][b] -= f * xty[col][b];
                    }
                }
            }
        }
        // xty now holds the weights: d x k. Transpose into k rows of d.
        (0..k)
            .map(|c| {
                let mut w = [0.0; 9];
                for a in 0..d {
                    w[a] = xty[a][c];
                }
                w
            })
            .collect()
    }

    fn predict(w: &[[f64; 9]], feat: &[f64; 8]) -> usize {
        let mut x = [1.0; 9];
        x[..8].copy_from_slice(feat);
        let mut best = (0usize, f64::NEG_INFINITY);
        for (c, wc) in w.iter().enumerate() {
            let score: f64 = wc.iter().zip(&x).map(|(a, b)| a * b).sum();
            if score > best.1 {
                best = (c, score);
            }
        }
        best.0
    }
}
