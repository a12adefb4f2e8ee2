//! Resizing and normalization of color crops into network input tensors.

use image::RgbImage;

use crate::engine::Tensor;
use crate::error::{Error, Result};

/// Bilinear resize to `target`×`target`, normalized to `[0, 1]`, laid out
/// channels-first with channel order red, green, blue.
///
/// Sample positions use half-pixel centers: output pixel `i` reads source
/// coordinate `(i + 0.5) * src / dst - 0.5`, clamped to the image.
pub fn resize_normalize(img: &RgbImage, target: usize) -> Result<Tensor<f32>> {
    if target < 8 {
        return Err(Error::Data(format!("resize target {target} is below the minimum of 8")));
    }
    let (src_w, src_h) = (img.width() as usize, img.height() as usize);
    if src_w == 0 || src_h == 0 {
        return Err(Error::Data("cannot resize an empty image".into()));
    }

    let coords = |dst: usize, src: usize| -> Vec<(usize, usize, f32)> {
        (0..dst)
            .map(|i| {
                let pos = (i as f64 + 0.5) * src as f64 / dst as f64 - 0.5;
                let pos = pos.clamp(0.0, (src - 1) as f64);
                let lo = pos.floor() as usize;
                let hi = (lo + 1).min(src - 1);
                (lo, hi, (pos - lo as f64) as f32)
            })
            .collect()
    };
    let rows = coords(target, src_h);
    let cols = coords(target, src_w);

    let mut data = vec![0.0f32; 3 * target * target];
    let raw = img.as_raw();
    let stride = src_w * 3;
    for (oi, &(r0, r1, fr)) in rows.iter().enumerate() {
        for (oj, &(c0, c1, fc)) in cols.iter().enumerate() {
            for ch in 0..3 {
                let at = |r: usize, c: usize| raw[r * stride + c * 3 + ch] as f32;
                let top = at(r0, c0) * (1.0 - fc) + at(r0, c1) * fc;
                let bot = at(r1, c0) * (1.0 - fc) + at(r1, c1) * fc;
                let v = top * (1.0 - fr) + bot * fr;
                data[ch * target * target + oi * target + oj] = v / 255.0;
            }
        }
    }
    Tensor::new(vec![3, target, target], data)
}

/// 3×3 median filter applied per channel; border pixels take the median of
/// their in-bounds neighborhood.
pub fn median_filter_3x3(img: &RgbImage) -> RgbImage {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut out = RgbImage::new(img.width(), img.height());
    let mut window: Vec<u8> = Vec::with_capacity(9);
    for r in 0..h {
        for c in 0..w {
            let mut px = [0u8; 3];
            for (ch, slot) in px.iter_mut().enumerate() {
                window.clear();
                for dr in -1..=1 {
                    for dc in -1..=1 {
                        let (rr, cc) = (r + dr, c + dc);
                        if (0..h).contains(&rr) && (0..w).contains(&cc) {
                            window.push(img.get_pixel(cc as u32, rr as u32).0[ch]);
                        }
                    }
                }
                window.sort_unstable();
                *slot = window[window.len() / 2];
            }
            out.put_pixel(c as u32, r as u32, image::Rgb(px));
        }
    }
    out
}
