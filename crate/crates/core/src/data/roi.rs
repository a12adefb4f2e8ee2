//! Region-of-interest extraction.
//!
//! Micrographs place one specimen somewhere on a large, visually uniform
//! field. The crop pipeline is: grayscale → Otsu threshold → largest
//! 4-connected foreground component → bounding box with a 10% margin →
//! square window centered on the component centroid, clamped to the image →
//! crop of the original color image.

use image::RgbImage;

use crate::error::{Error, Result};

/// Fraction of total image area below which a detected component is treated
/// as noise rather than a specimen.
pub const MIN_COMPONENT_AREA_FRACTION: f64 = 0.0001;

/// Integer Rec. 601 luma: (299 R + 587 G + 114 B) / 1000.
pub fn grayscale(img: &RgbImage) -> Vec<u8> {
    img.pixels()
        .map(|p| {
            let [r, g, b] = p.0;
            ((299 * r as u32 + 587 * g as u32 + 114 * b as u32) / 1000) as u8
        })
        .collect()
}

/// Otsu's threshold over an 8-bit histogram: the level maximizing the
/// between-class variance. Pixels `<= t` form one side, `> t` the other.
pub fn otsu_threshold(gray: &[u8]) -> u8 {
    let mut hist = [0u64; 256];
    for &v in gray {
        hist[v as usize] += 1;
    }
    let total: u64 = gray.len() as u64;
    let sum_all: f64 = hist.iter().enumerate().map(|(v, &c)| v as f64 * c as f64).sum();

    let mut best_t = 0u8;
    let mut best_var = -1.0f64;
    let mut w0 = 0u64;
    let mut sum0 = 0.0f64;
    for t in 0..256usize {
        w0 += hist[t];
        if w0 == 0 {
            continue;
        }
        let w1 = total - w0;
        if w1 == 0 {
            break;
        }
        sum0 += t as f64 * hist[t] as f64;
        let mu0 = sum0 / w0 as f64;
        let mu1 = (sum_all - sum0) / w1 as f64;
        let var = w0 as f64 * w1 as f64 * (mu0 - mu1) * (mu0 - mu1);
        if var > best_var {
            best_var = var;
            best_t = t as u8;
        }
    }
    best_t
}

/// Largest 4-connected component of a binary mask.
#[derive(Clone, Debug)]
pub struct Component {
    pub area: usize,
    /// (row, col) centroid.
    pub centroid: (f64, f64),
    /// Inclusive bounds (min_row, min_col, max_row, max_col).
    pub bbox: (usize, usize, usize, usize),
}

pub fn largest_component(mask: &[bool], width: usize, height: usize) -> Option<Component> {
    assert_eq!(mask.len(), width * height, "mask size mismatch");
    let mut visited = vec![false; mask.len()];
    let mut best: Option<Component> = None;
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || visited[start] {
            continue;
        }
        visited[start] = true;
        stack.push(start);
        let mut area = 0usize;
        let mut sum_r = 0u64;
        let mut sum_c = 0u64;
        let (mut min_r, mut min_c, mut max_r, mut max_c) = (usize::MAX, usize::MAX, 0, 0);
        while let Some(idx) = stack.pop() {
            let (r, c) = (idx / width, idx % width);
            area += 1;
            sum_r += r as u64;
            sum_c += c as u64;
            min_r = min_r.min(r);
            min_c = min_c.min(c);
            max_r = max_r.max(r);
            max_c = max_c.max(c);
            let mut visit = |n: usize| {
                if mask[n] && !visited[n] {
                    visited[n] = true;
                    stack.push(n);
                }
            };
            if r > 0 {
                visit(idx - width);
            }
            if r + 1 < height {
                visit(idx + width);
            }
            if c > 0 {
                visit(idx - 1);
            }
            if c + 1 < width {
                visit(idx + 1);
            }
        }
        let comp = Component {
            area,
            centroid: (sum_r as f64 / area as f64, sum_c as f64 / area as f64),
            bbox: (min_r, min_c, max_r, max_c),
        };
        if best.as_ref().map_or(true, |b| comp.area > b.area) {
            best = Some(comp);
        }
    }
    best
}

/// Locate the specimen in a color image. The Otsu split labels the
/// minority side as foreground — a specimen occupies a small fraction of
/// the field regardless of whether it images darker or brighter than the
/// background.
pub fn detect_specimen(img: &RgbImage) -> Result<Component> {
    let (width, height) = (img.width() as usize, img.height() as usize);
    let gray = grayscale(img);
    let t = otsu_threshold(&gray);
    let above = gray.iter().filter(|&&v| v > t).count();
    let above_is_foreground = above * 2 <= gray.len();
    let mask: Vec<bool> = gray.iter().map(|&v| (v > t) == above_is_foreground).collect();

    let min_area = (MIN_COMPONENT_AREA_FRACTION * (width * height) as f64).max(1.0);
    match largest_component(&mask, width, height) {
        Some(comp) if comp.area as f64 >= min_area => Ok(comp),
        _ => Err(Error::Data("no object detected".into())),
    }
}

/// The square crop window for a detected component: bounding box, a 10%
/// margin per side, expanded to a square centered on the centroid, shifted
/// to keep the full box inside when possible, and clamped to image bounds.
pub fn crop_window(
    comp: &Component,
    width: usize,
    height: usize,
) -> (usize, usize, usize, usize) {
    let (min_r, min_c, max_r, max_c) = comp.bbox;
    let box_h = max_r - min_r + 1;
    let box_w = max_c - min_c + 1;
    let margin_r = ((box_h as f64) * 0.10).ceil() as usize;
    let margin_c = ((box_w as f64) * 0.10).ceil() as usize;
    let want_h = box_h + 2 * margin_r;
    let want_w = box_w + 2 * margin_c;
    let side = want_h.max(want_w).min(width).min(height);

    let place = |center: f64, lo: usize, hi: usize, limit: usize| -> usize {
        // Ideal start centers the window on the centroid; then shift just
        // enough to contain [lo, hi] and stay within [0, limit - side].
        let ideal = center - side as f64 / 2.0;
        let mut start = ideal.round().max(0.0) as usize;
        start = start.min(limit - side);
        if side >= hi - lo + 1 {
            if start > lo {
                start = lo;
            }
            if start + side <= hi {
                start = hi + 1 - side;
            }
            start = start.min(limit - side);
        }
        start
    };
    let r0 = place(comp.centroid.0, min_r, max_r, height);
    let c0 = place(comp.centroid.1, min_c, max_c, width);
    (r0, c0, side, side)
}

/// Crop the color image to the specimen's square region of interest.
pub fn preprocess_roi(img: &RgbImage) -> Result<RgbImage> {
    if img.width() == 0 || img.height() == 0 {
        return Err(Error::Data("empty image".into()));
    }
    let comp = detect_specimen(img)?;
    let (r0, c0, h, w) = crop_window(&comp, img.width() as usize, img.height() as usize);
    let mut out = RgbImage::new(w as u32, h as u32);
    for r in 0..h {
        for c in 0..w {
            out.put_pixel(c as u32, r as u32, *img.get_pixel((c0 + c) as u32, (r0 + r) as u32));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    /// Dark field with a bright filled rectangle.
    fn field_with_rect(
        w: u32,
        h: u32,
        top: u32,
        left: u32,
        rh: u32,
        rw: u32,
        bright: u8,
    ) -> RgbImage {
        let mut img = RgbImage::from_pixel(w, h, Rgb([20, 22, 25]));
        for r in top..top + rh {
            for c in left..left + rw {
                img.put_pixel(c, r, Rgb([bright, bright, bright]));
            }
        }
        img
    }

    #[test]
    fn otsu_separates_a_bimodal_histogram() {
        let mut gray = vec![30u8; 900];
        gray.extend(vec![200u8; 100]);
        let t = otsu_threshold(&gray);
        assert!((30..200).contains(&t), "threshold {t} outside the valley");
    }

    #[test]
    fn largest_component_picks_the_bigger_blob() {
        // Two blobs: 2x2 and 1x1, diagonal contact does not join them.
        let width = 5;
        let mut mask = vec![false; 25];
        for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1), (2, 2)] {
            mask[r * width + c] = true;
        }
        let comp = largest_component(&mask, width, 5).unwrap();
        assert_eq!(comp.area, 4);
        assert_eq!(comp.bbox, (0, 0, 1, 1));
        assert!((comp.centroid.0 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn centroid_of_detected_rect_matches_geometry() {
        let img = field_with_rect(120, 90, 20, 40, 10, 30, 220);
        let comp = detect_specimen(&img).unwrap();
        // Rows 20..=29 -> 24.5, cols 40..=69 -> 54.5.
        assert!((comp.centroid.0 - 24.5).abs() <= 2.0);
        assert!((comp.centroid.1 - 54.5).abs() <= 2.0);
        assert_eq!(comp.area, 300);
    }

    #[test]
    fn dark_specimen_on_bright_field_is_found() {
        let mut img = RgbImage::from_pixel(100, 80, Rgb([230, 228, 232]));
        for r in 10..20u32 {
            for c in 60..80u32 {
                img.put_pixel(c, r, Rgb([15, 15, 15]));
            }
        }
        let comp = detect_specimen(&img).unwrap();
        assert_eq!(comp.area, 200);
        assert_eq!(comp.bbox, (10, 60, 19, 79));
    }

    #[test]
    fn roi_is_square_contains_component_and_respects_bounds() {
        let img = field_with_rect(200, 150, 30, 50, 20, 40, 210);
        let comp = detect_specimen(&img).unwrap();
        let (r0, c0, h, w) = crop_window(&comp, 200, 150);
        assert_eq!(h, w);
        let (min_r, min_c, max_r, max_c) = comp.bbox;
        assert!(r0 <= min_r && r0 + h > max_r, "rows clipped");
        assert!(c0 <= min_c && c0 + w > max_c, "cols clipped");
        assert!(r0 + h <= 150 && c0 + w <= 200);

        let crop = preprocess_roi(&img).unwrap();
        assert_eq!(crop.width(), crop.height());
        // Every bright pixel of the original survives into the crop.
        let bright_in_crop =
            crop.pixels().filter(|p| p.0[0] > 100).count();
        assert_eq!(bright_in_crop, 20 * 40);
    }

    #[test]
    fn uniform_image_reports_no_object() {
        let img = RgbImage::from_pixel(64, 64, Rgb([128, 128, 128]));
        let err = preprocess_roi(&img).unwrap_err();
        assert!(err.to_string().contains("no object detected"), "{err}");
    }

    #[test]
    fn tiny_speck_is_rejected_as_noise() {
        // One bright pixel in a 128x128 field: 1/16384 < 0.01% is false —
        // 0.01% of 16384 is 1.6, so a single pixel falls below the floor.
        let img = field_with_rect(128, 128, 64, 64, 1, 1, 255);
        assert!(preprocess_roi(&img).is_err());
    }

    #[test]
    fn crop_of_a_crop_is_stable() {
        let img = field_with_rect(160, 160, 40, 60, 30, 24, 215);
        let once = preprocess_roi(&img).unwrap();
        let twice = preprocess_roi(&once).unwrap();
        // The second pass re-finds the same specimen; its area is unchanged.
        let count = |im: &RgbImage| im.pixels().filter(|p| p.0[0] > 100).count();
        assert_eq!(count(&once), count(&twice));
    }
}
