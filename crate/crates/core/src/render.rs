//! Zero-centering and PNG visualisation of relevance volumes.

use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::explain::RelevanceVolume;
use crate::volume::Volume3;

/// Sets `|v| ≤ eps_r · max|R|` to exactly zero; other values are kept.
pub fn zero_center(r: &RelevanceVolume, eps_r: f32) -> RelevanceVolume {
    let cut = eps_r * r.volume.max_abs();
    RelevanceVolume {
        volume: r.volume.map(|v| if v.abs() <= cut { 0.0 } else { v }),
        ..r.clone()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Colormap {
    /// Black at ≤ 0, white at `max|R|`.
    Grayscale,
    /// Blue at `−max|R|`, white at 0, red at `+max|R|`.
    Diverging,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RenderMode {
    Heatmap,
    /// The frame where relevance exceeds the threshold, black elsewhere.
    MaskComposite,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderOptions {
    pub colormap: Colormap,
    /// Weight of the heatmap over the frame.
    pub alpha: f32,
    pub mode: RenderMode,
    /// Relative clamp, as in [`zero_center`].
    pub eps_r: f32,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            colormap: Colormap::Diverging,
            alpha: 0.6,
            mode: RenderMode::Heatmap,
            eps_r: 1e-3,
        }
    }
}

impl RenderOptions {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::input(format!("alpha must be in [0, 1], got {}", self.alpha)));
        }
        if !(self.eps_r.is_finite() && self.eps_r >= 0.0) {
            return Err(Error::input(format!("eps_r must be finite and >= 0, got {}", self.eps_r)));
        }
        Ok(())
    }
}

/// Colour for `s = v / max|R|`, clamped to `[−1, 1]`.
pub fn colormap(cmap: Colormap, s: f32) -> [u8; 3] {
    let s = s.clamp(-1.0, 1.0);
    let q = |x: f32| (x * 255.0).round() as u8;
    match cmap {
        Colormap::Grayscale => {
            let g = q(s.max(0.0));
            [g, g, g]
        }
        Colormap::Diverging if s >= 0.0 => [255, q(1.0 - s), q(1.0 - s)],
        Colormap::Diverging => [q(1.0 + s), q(1.0 + s), 255],
    }
}

/// One image per frame of `r`.
pub fn render_overlay(frames: &[RgbImage], r: &Volume3, opts: &RenderOptions) -> Result<Vec<RgbImage>> {
    opts.validate()?;
    let d = r.dims();
    if frames.len() != d.t {
        return Err(Error::input(format!("{} frames for a volume of {} frames", frames.len(), d.t)));
    }
    let max = r.max_abs();
    let cut = opts.eps_r * max;
    frames
        .iter()
        .enumerate()
        .map(|(t, frame)| {
            if frame.dimensions() != (d.w as u32, d.h as u32) {
                return Err(Error::input(format!(
                    "frame {t} is {}×{}, volume is {}×{}",
                    frame.height(),
                    frame.width(),
                    d.h,
                    d.w
                )));
            }
            let plane = r.frame(t);
            Ok(RgbImage::from_fn(d.w as u32, d.h as u32, |x, y| {
                let v = plane[y as usize * d.w + x as usize];
                let px = frame.get_pixel(x, y).0;
                match opts.mode {
                    RenderMode::MaskComposite => {
                        if v > cut {
                            Rgb(px)
                        } else {
                            Rgb([0, 0, 0])
                        }
                    }
                    RenderMode::Heatmap => {
                        let v = if v.abs() <= cut { 0.0 } else { v };
                        let s = if max > 0.0 { v / max } else { 0.0 };
                        let c = colormap(opts.colormap, s);
                        let mix = |a: u8, b: u8| ((1.0 - opts.alpha) * a as f32 + opts.alpha * b as f32).round() as u8;
                        Rgb([mix(px[0], c[0]), mix(px[1], c[1]), mix(px[2], c[2])])
                    }
                }
            }))
        })
        .collect()
}

const GLYPH_W: u32 = 5;
const GLYPH_H: u32 = 7;
/// Height of the label strip above each panel.
pub const LABEL_STRIP: u32 = GLYPH_H + 4;

/// 5×7 glyphs, one byte per row, bit 4 leftmost.
fn glyph(c: char) -> [u8; 7] {
    match c.to_ascii_uppercase() {
        'A' => [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'B' => [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E],
        'C' => [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E],
        'D' => [0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E],
        'E' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F],
        'F' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10],
        'G' => [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F],
        'H' => [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'I' => [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
        'J' => [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C],
        'K' => [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
        'L' => [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F],
        'M' => [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11],
        'N' => [0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11],
        'O' => [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'P' => [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
        'Q' => [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D],
        'R' => [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        'T' => [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        'U' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'V' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04],
        'W' => [0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A],
        'X' => [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11],
        'Y' => [0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04],
        'Z' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F],
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        ' ' => [0; 7],
        '-' => [0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00],
        '_' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F],
        '.' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C],
        ',' => [0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08],
        ':' => [0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00],
        '=' => [0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00],
        '(' => [0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02],
        ')' => [0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08],
        '/' => [0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x00],
        '%' => [0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03],
        _ => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x00, 0x04],
    }
}

/// Draws `text` in white from `(x0, y0)`, clipped at `max_x`.
fn draw_text(img: &mut RgbImage, text: &str, x0: u32, y0: u32, max_x: u32) {
    for (i, c) in text.chars().enumerate() {
        let gx = x0 + i as u32 * (GLYPH_W + 1);
        if gx + GLYPH_W > max_x {
            break;
        }
        for (row, bits) in glyph(c).iter().enumerate() {
            for col in 0..GLYPH_W {
                if bits & (0x10 >> col) != 0 {
                    img.put_pixel(gx + col, y0 + row as u32, Rgb([255, 255, 255]));
                }
            }
        }
    }
}

/// Contact sheets: for every frame, the panels side by side in input
/// order, each under a black label strip.
pub fn render_grid(columns: &[(String, Vec<RgbImage>)]) -> Result<Vec<RgbImage>> {
    let first = columns.first().ok_or_else(|| Error::input("grid needs at least one column"))?;
    let frames = first.1.len();
    for (label, seq) in columns {
        if seq.len() != frames {
            return Err(Error::input(format!(
                "column `{label}` has {} frames, expected {frames}",
                seq.len()
            )));
        }
    }
    (0..frames)
        .map(|t| {
            let width: u32 = columns.iter().map(|(_, s)| s[t].width()).sum();
            let height = columns.iter().map(|(_, s)| s[t].height()).max().unwrap_or(0) + LABEL_STRIP;
            let mut sheet = RgbImage::new(width, height);
            let mut x0 = 0;
            for (label, seq) in columns {
                let panel = &seq[t];
                image::imageops::replace(&mut sheet, panel, x0 as i64, LABEL_STRIP as i64);
                draw_text(&mut sheet, label, x0 + 2, 2, x0 + panel.width());
                x0 += panel.width();
            }
            Ok(sheet)
        })
        .collect()
}

/// Writes `<stem>_NNNN.png` for each image and returns the paths.
pub fn write_png_sequence(dir: &Path, stem: &str, images: &[RgbImage]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    images
        .iter()
        .enumerate()
        .map(|(i, img)| {
            let path = dir.join(format!("{stem}_{i:04}.png"));
            img.save_with_format(&path, image::ImageFormat::Png)?;
            Ok(path)
        })
        .collect()
}

/// Loads every `.png` in `dir`, in lexicographic file-name order.
pub fn read_frame_dir(dir: &Path) -> Result<Vec<RgbImage>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")));
    paths.sort();
    if paths.is_empty() {
        return Err(Error::input(format!("no .png frames in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| Ok(image::open(p)?.to_rgb8()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::{Method, MethodTag};
    use crate::volume::Dims3;

    fn frames(n: usize, h: u32, w: u32) -> Vec<RgbImage> {
        (0..n)
            .map(|t| RgbImage::from_fn(w, h, |x, y| Rgb([(x * 10) as u8, (y * 10) as u8, t as u8])))
            .collect()
    }

    #[test]
    fn zero_center_clamps_small_values_only() {
        let v = Volume3::new(Dims3::new(1, 1, 3), vec![1.0, 0.0005, -0.5]).unwrap();
        let r = RelevanceVolume::new(v, MethodTag::base(Method::GuidedBp), 0);
        let z = zero_center(&r, 1e-3);
        assert_eq!(z.volume.data(), &[1.0, 0.0, -0.5]);
        assert_eq!(zero_center(&z, 1e-3), z);
        let zero = RelevanceVolume::new(Volume3::zeros(Dims3::new(2, 2, 2)), MethodTag::base(Method::Dtd), 0);
        assert_eq!(zero_center(&zero, 1e-3), zero);
    }

    #[test]
    fn one_image_per_frame_and_hot_voxel() {
        let d = Dims3::new(16, 6, 8);
        let r = Volume3::from_fn(d, |t, h, w| if (t, h, w) == (5, 2, 3) { 4.0 } else { 0.0 }).unwrap();
        let opts = RenderOptions { alpha: 1.0, ..Default::default() };
        let out = render_overlay(&frames(16, 6, 8), &r, &opts).unwrap();
        assert_eq!(out.len(), 16);
        assert_eq!(out[5].get_pixel(3, 2).0, [255, 0, 0]);
        assert_eq!(out[5].get_pixel(4, 2).0, [255, 255, 255]);
        let gray = RenderOptions { colormap: Colormap::Grayscale, ..opts };
        let out = render_overlay(&frames(16, 6, 8), &r, &gray).unwrap();
        assert_eq!(out[5].get_pixel(3, 2).0, [255, 255, 255]);
        assert_eq!(out[4].get_pixel(3, 2).0, [0, 0, 0]);
    }

    #[test]
    fn mask_composite_of_zero_is_dark() {
        let r = Volume3::zeros(Dims3::new(3, 4, 4));
        let opts = RenderOptions { mode: RenderMode::MaskComposite, ..Default::default() };
        let out = render_overlay(&frames(3, 4, 4), &r, &opts).unwrap();
        assert!(out.iter().all(|img| img.pixels().all(|p| p.0 == [0, 0, 0])));
    }

    #[test]
    fn overlay_rejects_mismatches() {
        let r = Volume3::zeros(Dims3::new(3, 4, 4));
        let opts = RenderOptions::default();
        assert!(render_overlay(&frames(2, 4, 4), &r, &opts).is_err());
        assert!(render_overlay(&frames(3, 4, 5), &r, &opts).is_err());
        assert!(render_overlay(&frames(3, 4, 4), &r, &RenderOptions { alpha: 1.5, ..opts }).is_err());
    }

    #[test]
    fn grayscale_is_monotone() {
        let mut prev = 0u8;
        for i in -100..=100 {
            let g = colormap(Colormap::Grayscale, i as f32 / 100.0)[0];
            assert!(g >= prev);
            prev = g;
        }
    }

    #[test]
    fn grid_layout() {
        let cols: Vec<(String, Vec<RgbImage>)> = (0..8).map(|i| (format!("m{i}"), frames(16, 20, 30))).collect();
        let sheets = render_grid(&cols).unwrap();
        assert_eq!(sheets.len(), 16);
        assert_eq!(sheets[0].dimensions(), (240, 20 + LABEL_STRIP));
        // Panels keep input order: column 3 starts at x = 90.
        let src = &cols[3].1[7];
        assert_eq!(sheets[7].get_pixel(90 + 4, LABEL_STRIP + 5), src.get_pixel(4, 5));

        let single = render_grid(&cols[..1]).unwrap();
        for y in 0..20 {
            for x in 0..30 {
                assert_eq!(single[2].get_pixel(x, y + LABEL_STRIP), cols[0].1[2].get_pixel(x, y));
            }
        }
        let mut bad = cols.clone();
        bad[1].1.pop();
        assert!(render_grid(&bad).is_err());
    }

    #[test]
    fn render_is_repeatable_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let d = Dims3::new(2, 5, 5);
        let r = Volume3::from_fn(d, |t, h, w| (t + h) as f32 - w as f32).unwrap();
        let a = render_overlay(&frames(2, 5, 5), &r, &RenderOptions::default()).unwrap();
        let b = render_overlay(&frames(2, 5, 5), &r, &RenderOptions::default()).unwrap();
        assert_eq!(a, b);
        let paths = write_png_sequence(dir.path(), "dtd", &a).unwrap();
        assert!(paths[1].ends_with("dtd_0001.png"));
        assert_eq!(read_frame_dir(dir.path()).unwrap(), a);
    }
}
