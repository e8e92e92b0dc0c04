use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PressmapError;
use crate::domain::{CHANNELS, CHANNELS_PER_FOOT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Foot {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelPos {
    pub index: usize,
    pub x: f64,
    pub y: f64,
}

/// Sensor centroids and outline of one insole in a unit square, `y = 0`
/// at the toes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootLayout {
    pub foot: Foot,
    pub channels: Vec<ChannelPos>,
    pub outline: Vec<[f64; 2]>,
}

/// Feet in rendering order, left to right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SensorLayout {
    pub feet: Vec<FootLayout>,
}

const LEFT_OUTLINE: [[f64; 2]; 18] = [
    [0.55, 0.02],
    [0.72, 0.05],
    [0.80, 0.15],
    [0.80, 0.30],
    [0.74, 0.45],
    [0.70, 0.60],
    [0.72, 0.75],
    [0.70, 0.90],
    [0.60, 0.98],
    [0.45, 0.99],
    [0.34, 0.92],
    [0.30, 0.78],
    [0.28, 0.60],
    [0.22, 0.45],
    [0.20, 0.30],
    [0.22, 0.15],
    [0.32, 0.06],
    [0.45, 0.02],
];

// toes, metatarsal heads, midfoot, arch, heel
const LEFT_CENTROIDS: [[f64; 2]; CHANNELS_PER_FOOT] = [
    [0.62, 0.10],
    [0.45, 0.09],
    [0.32, 0.14],
    [0.70, 0.25],
    [0.58, 0.24],
    [0.46, 0.25],
    [0.34, 0.27],
    [0.26, 0.32],
    [0.66, 0.40],
    [0.52, 0.42],
    [0.36, 0.44],
    [0.62, 0.56],
    [0.40, 0.58],
    [0.62, 0.74],
    [0.44, 0.76],
    [0.53, 0.82],
    [0.60, 0.88],
    [0.46, 0.90],
];

impl Default for SensorLayout {
    fn default() -> Self {
        let left = FootLayout {
            foot: Foot::Left,
            channels: LEFT_CENTROIDS
                .iter()
                .enumerate()
                .map(|(index, &[x, y])| ChannelPos { index, x, y })
                .collect(),
            outline: LEFT_OUTLINE.to_vec(),
        };
        let right = FootLayout {
            foot: Foot::Right,
            channels: left
                .channels
                .iter()
                .map(|c| ChannelPos {
                    index: c.index + CHANNELS_PER_FOOT,
                    x: 1.0 - c.x,
                    y: c.y,
                })
                .collect(),
            outline: left.outline.iter().map(|&[x, y]| [1.0 - x, y]).collect(),
        };
        Self {
            feet: vec![left, right],
        }
    }
}

/// Distance from `p` to segment `a`-`b`.
fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    (cx * cx + cy * cy).sqrt()
}

impl FootLayout {
    /// Even-odd point-in-polygon test.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let poly = &self.outline;
        let mut inside = false;
        let mut j = poly.len() - 1;
        for i in 0..poly.len() {
            let ([xi, yi], [xj, yj]) = (poly[i], poly[j]);
            if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside
    }

    fn strictly_inside(&self, x: f64, y: f64) -> bool {
        let n = self.outline.len();
        self.contains(x, y)
            && (0..n).all(|i| {
                segment_distance([x, y], self.outline[i], self.outline[(i + 1) % n]) > 1e-9
            })
    }

    /// Inverse-distance-weighted (power 2) value of this foot's channels at
    /// `(x, y)`. A point on a centroid takes that channel's value exactly.
    pub fn idw(&self, features: &[f64], x: f64, y: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for c in &self.channels {
            let d2 = (c.x - x).powi(2) + (c.y - y).powi(2);
            if d2 == 0.0 {
                return features[c.index];
            }
            let w = 1.0 / d2;
            num += w * features[c.index];
            den += w;
        }
        num / den
    }
}

impl SensorLayout {
    pub fn validate(&self) -> Result<(), PressmapError> {
        let err = |m: String| Err(PressmapError::Layout(m));
        if self.feet.is_empty() {
            return err("layout has no feet".into());
        }
        let mut seen = [false; CHANNELS];
        for foot in &self.feet {
            if foot.channels.len() != CHANNELS_PER_FOOT {
                return err(format!(
                    "{:?} foot has {} channels, expected {CHANNELS_PER_FOOT}",
                    foot.foot,
                    foot.channels.len()
                ));
            }
            if foot.outline.len() < 3 {
                return err(format!("{:?} outline needs at least 3 points", foot.foot));
            }
            for c in &foot.channels {
                if c.index >= CHANNELS || seen[c.index] {
                    return err(format!(
                        "channel index {} is out of range or repeated",
                        c.index
                    ));
                }
                seen[c.index] = true;
                if !foot.strictly_inside(c.x, c.y) {
                    return err(format!(
                        "channel {} at ({}, {}) is not strictly inside the {:?} outline",
                        c.index, c.x, c.y, foot.foot
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, PressmapError> {
        let layout: Self =
            serde_json::from_str(text).map_err(|e| PressmapError::Layout(e.to_string()))?;
        layout.validate()?;
        Ok(layout)
    }

    pub fn load(path: &Path) -> Result<Self, PressmapError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("layout serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout_is_valid() {
        let l = SensorLayout::default();
        l.validate().unwrap();
        assert_eq!(l.feet[1].channels[0].index, 18);
        let back = SensorLayout::from_json(&l.to_json()).unwrap();
        assert_eq!(back, l);
    }

    #[test]
    fn centroid_outside_outline_is_rejected() {
        let mut l = SensorLayout::default();
        l.feet[0].channels[4].x = 0.99;
        assert!(matches!(l.validate(), Err(PressmapError::Layout(_))));
        let mut l = SensorLayout::default();
        l.feet[1].channels[0].index = 3;
        assert!(l.validate().is_err());
    }

    #[test]
    fn idw_exact_at_centroids_and_constant_for_constant_input() {
        let l = SensorLayout::default();
        let feats: Vec<f64> = (0..CHANNELS).map(|c| c as f64 * 1.5 - 7.0).collect();
        for foot in &l.feet {
            for c in &foot.channels {
                assert_eq!(foot.idw(&feats, c.x, c.y), feats[c.index]);
            }
        }
        let flat = [2.5; CHANNELS];
        assert!((l.feet[0].idw(&flat, 0.5, 0.5) - 2.5).abs() < 1e-12);
    }
}
