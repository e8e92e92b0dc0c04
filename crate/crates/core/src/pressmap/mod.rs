//! Plantar pressure maps: IDW interpolation of the 36 channels over the
//! insole outlines, Gaussian smoothing, crop, resize and a blue-to-red
//! colour scale fitted on training data.

mod layout;

pub use layout::{ChannelPos, Foot, FootLayout, SensorLayout};

use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::domain::ChannelVector;

#[derive(Debug, thiserror::Error)]
pub enum PressmapError {
    #[error("need at least 2 samples to fit a colour scale, got {0}")]
    InsufficientSamples(usize),
    #[error("all training values equal {0}; the colour scale would be empty")]
    DegenerateScale(f64),
    #[error("invalid colour scale [{0}, {1}]")]
    InvalidScale(f64, f64),
    #[error("invalid layout: {0}")]
    Layout(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

/// Affine map of `[v_min, v_max]` onto the colour gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorScale {
    pub v_min: f64,
    pub v_max: f64,
}

impl ColorScale {
    pub fn new(v_min: f64, v_max: f64) -> Result<Self, PressmapError> {
        if v_min.is_finite() && v_max.is_finite() && v_min < v_max {
            Ok(Self { v_min, v_max })
        } else {
            Err(PressmapError::InvalidScale(v_min, v_max))
        }
    }

    /// Position on the gradient in `[0, 1]`, clipped at the ends.
    pub fn position(&self, v: f64) -> f64 {
        ((v - self.v_min) / (self.v_max - self.v_min)).clamp(0.0, 1.0)
    }

    pub fn color(&self, v: f64) -> [u8; 3] {
        jet(self.position(v))
    }
}

/// Mean ± 2 population standard deviations of every channel value of
/// every sample.
pub fn fit_color_scale(samples: &[ChannelVector]) -> Result<ColorScale, PressmapError> {
    if samples.len() < 2 {
        return Err(PressmapError::InsufficientSamples(samples.len()));
    }
    // Welford
    let (mut n, mut mean, mut m2) = (0.0f64, 0.0f64, 0.0f64);
    for v in samples.iter().flatten() {
        n += 1.0;
        let d = v - mean;
        mean += d / n;
        m2 += d * (v - mean);
    }
    let sigma = (m2 / n).sqrt();
    if !(sigma > 0.0) {
        return Err(PressmapError::DegenerateScale(mean));
    }
    ColorScale::new(mean - 2.0 * sigma, mean + 2.0 * sigma)
}

/// Piecewise-linear "jet" gradient from deep blue (0) through cyan, green
/// and yellow to deep red (1).
pub fn jet(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.125 {
        (0.0, 0.0, 0.5 + 4.0 * t)
    } else if t < 0.375 {
        (0.0, 4.0 * (t - 0.125), 1.0)
    } else if t < 0.625 {
        (4.0 * (t - 0.375), 1.0, 1.0 - 4.0 * (t - 0.375))
    } else if t < 0.875 {
        (1.0, 1.0 - 4.0 * (t - 0.625), 0.0)
    } else {
        (1.0 - 4.0 * (t - 0.875), 0.0, 0.0)
    };
    let q = |c: f64| (c * 255.0).round() as u8;
    [q(r), q(g), q(b)]
}

/// Inverse of [`jet`] for colours on the gradient.
pub fn jet_position(rgb: [u8; 3]) -> Option<f64> {
    let [r, g, b] = rgb.map(|c| c as f64 / 255.0);
    let t = match rgb {
        [0, 0, _] if b >= 0.5 => (b - 0.5) / 4.0,
        [0, _, 255] => 0.125 + g / 4.0,
        [_, 255, _] => 0.375 + r / 4.0,
        [255, _, 0] => 0.625 + (1.0 - g) / 4.0,
        [_, 0, 0] if r >= 0.5 => 0.875 + (1.0 - r) / 4.0,
        _ => return None,
    };
    Some(t)
}

/// Colour of pixels outside the insoles.
pub const BACKGROUND: [u8; 3] = [255, 255, 255];

/// Scalar field on a grid; `NaN` marks cells outside every outline.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl Field {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Interpolates `features` onto a `grid_size` square per foot; feet are
/// placed side by side in layout order.
pub fn interpolate_map(features: &[f64], layout: &SensorLayout, grid_size: usize) -> Field {
    let width = grid_size * layout.feet.len();
    let mut values = vec![f64::NAN; width * grid_size];
    for (f, foot) in layout.feet.iter().enumerate() {
        for j in 0..grid_size {
            let y = (j as f64 + 0.5) / grid_size as f64;
            for i in 0..grid_size {
                let x = (i as f64 + 0.5) / grid_size as f64;
                if foot.contains(x, y) {
                    values[j * width + f * grid_size + i] = foot.idw(features, x, y);
                }
            }
        }
    }
    Field {
        width,
        height: grid_size,
        values,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    /// Interpolation grid cells per foot side.
    pub grid_size: usize,
    /// Gaussian smoothing in grid cells; 0 disables it.
    pub smoothing_sigma_px: f64,
    /// Crop margin as a fraction of the insole bounding box.
    pub crop_margin: f64,
    pub out_size: u32,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            grid_size: 112,
            smoothing_sigma_px: 3.0,
            crop_margin: 0.05,
            out_size: 224,
        }
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let k: Vec<f64> = (-radius..=radius)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian blur that only mixes cells inside the outlines
/// (normalised convolution), leaving background cells untouched.
fn smooth(field: &Field, sigma: f64) -> Field {
    if sigma <= 0.0 {
        return field.clone();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let (w, h) = (field.width as i64, field.height as i64);
    let valid: Vec<f64> = field
        .values
        .iter()
        .map(|v| if v.is_nan() { 0.0 } else { 1.0 })
        .collect();
    let data: Vec<f64> = field
        .values
        .iter()
        .map(|v| if v.is_nan() { 0.0 } else { *v })
        .collect();
    let pass = |src: &[f64], horizontal: bool| -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (t, kv) in k.iter().enumerate() {
                    let d = t as i64 - r;
                    let (sx, sy) = if horizontal { (x + d, y) } else { (x, y + d) };
                    if (0..w).contains(&sx) && (0..h).contains(&sy) {
                        acc += kv * src[(sy * w + sx) as usize];
                    }
                }
                out[(y * w + x) as usize] = acc;
            }
        }
        out
    };
    let num = pass(&pass(&data, true), false);
    let den = pass(&pass(&valid, true), false);
    let values = field
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if v.is_nan() || den[i] <= 0.0 {
                f64::NAN
            } else {
                num[i] / den[i]
            }
        })
        .collect();
    Field {
        width: field.width,
        height: field.height,
        values,
    }
}

/// Smooths, crops to the insole bounding box plus margin, resizes
/// bilinearly to `out_size` square and colours the result.
pub fn render(field: &Field, scale: &ColorScale, cfg: &RenderConfig) -> RgbImage {
    let f = smooth(field, cfg.smoothing_sigma_px);
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for y in 0..f.height {
        for x in 0..f.width {
            if !f.get(x, y).is_nan() {
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x + 1);
                y1 = y1.max(y + 1);
            }
        }
    }
    if x0 == usize::MAX {
        (x0, y0, x1, y1) = (0, 0, f.width, f.height);
    }
    let mx = cfg.crop_margin * (x1 - x0) as f64;
    let my = cfg.crop_margin * (y1 - y0) as f64;
    let cx0 = (x0 as f64 - mx).max(0.0);
    let cx1 = (x1 as f64 + mx).min(f.width as f64);
    let cy0 = (y0 as f64 - my).max(0.0);
    let cy1 = (y1 as f64 + my).min(f.height as f64);

    let out = cfg.out_size;
    let mut img = RgbImage::new(out, out);
    let clamp_x = |v: f64| v.clamp(0.0, (f.width - 1) as f64);
    let clamp_y = |v: f64| v.clamp(0.0, (f.height - 1) as f64);
    for v in 0..out {
        // source position in cell-centre coordinates
        let sy = clamp_y(cy0 + (v as f64 + 0.5) / out as f64 * (cy1 - cy0) - 0.5);
        for u in 0..out {
            let sx = clamp_x(cx0 + (u as f64 + 0.5) / out as f64 * (cx1 - cx0) - 0.5);
            let nearest = f.get(sx.round() as usize, sy.round() as usize);
            let color = if nearest.is_nan() {
                BACKGROUND
            } else {
                let (ix, iy) = (sx.floor() as usize, sy.floor() as usize);
                let (fx, fy) = (sx - ix as f64, sy - iy as f64);
                let ix1 = (ix + 1).min(f.width - 1);
                let iy1 = (iy + 1).min(f.height - 1);
                let mut num = 0.0;
                let mut den = 0.0;
                for (cx, cy, w) in [
                    (ix, iy, (1.0 - fx) * (1.0 - fy)),
                    (ix1, iy, fx * (1.0 - fy)),
                    (ix, iy1, (1.0 - fx) * fy),
                    (ix1, iy1, fx * fy),
                ] {
                    let val = f.get(cx, cy);
                    if !val.is_nan() && w > 0.0 {
                        num += w * val;
                        den += w;
                    }
                }
                scale.color(if den > 0.0 { num / den } else { nearest })
            };
            img.put_pixel(u, v, Rgb(color));
        }
    }
    img
}

/// Interpolates and renders one feature vector.
pub fn render_features(
    features: &[f64],
    layout: &SensorLayout,
    scale: &ColorScale,
    cfg: &RenderConfig,
) -> RgbImage {
    render(
        &interpolate_map(features, layout, cfg.grid_size),
        scale,
        cfg,
    )
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>, PressmapError> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)?;
    Ok(buf.into_inner())
}

pub fn write_png(path: &Path, img: &RgbImage) -> Result<(), PressmapError> {
    std::fs::write(path, encode_png(img)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::CHANNELS;

    #[test]
    fn symmetric_population_scale() {
        let mut a = [1.0; CHANNELS];
        a[..18].fill(-1.0);
        let s = fit_color_scale(&[a, a]).unwrap();
        assert!((s.v_min + 2.0).abs() < 1e-12 && (s.v_max - 2.0).abs() < 1e-12);
        assert!(matches!(
            fit_color_scale(&[[5.0; CHANNELS]; 3]),
            Err(PressmapError::DegenerateScale(_))
        ));
        assert!(matches!(
            fit_color_scale(&[[5.0; CHANNELS]]),
            Err(PressmapError::InsufficientSamples(1))
        ));
    }

    #[test]
    fn gradient_endpoints() {
        assert_eq!(jet(0.0), [0, 0, 128]);
        assert_eq!(jet(1.0), [128, 0, 0]);
        assert_eq!(jet(0.5), [128, 255, 128]);
        let s = ColorScale::new(-2.0, 2.0).unwrap();
        assert_eq!(s.color(1e9), [128, 0, 0]);
        assert_eq!(s.color(-1e9), [0, 0, 128]);
    }

    #[test]
    fn zero_field_renders_mid_scale_everywhere() {
        let f = Field {
            width: 40,
            height: 30,
            values: vec![0.0; 1200],
        };
        let img = render(
            &f,
            &ColorScale::new(-2.0, 2.0).unwrap(),
            &RenderConfig::default(),
        );
        assert_eq!(img.dimensions(), (224, 224));
        assert!(img.pixels().all(|p| p.0 == jet(0.5)));
    }

    #[test]
    fn interpolated_field_stays_within_feature_range() {
        let layout = SensorLayout::default();
        let feats: Vec<f64> = (0..CHANNELS)
            .map(|c| ((c * 37) % 11) as f64 - 3.0)
            .collect();
        let f = interpolate_map(&feats, &layout, 48);
        let inside: Vec<f64> = f.values.iter().copied().filter(|v| !v.is_nan()).collect();
        assert!(!inside.is_empty() && inside.len() < f.values.len());
        assert!(inside
            .iter()
            .all(|&v| (-3.0 - 1e-12..=7.0 + 1e-12).contains(&v)));
    }
}
