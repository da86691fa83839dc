use serde::{Deserialize, Serialize};

use super::ProviderError;

/// Axis-aligned box in pixel coordinates, origin at the top-left.
///
/// Serialized as `[x1, y1, x2, y2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BoundingBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, ProviderError> {
        let finite = [x1, y1, x2, y2].iter().all(|v| v.is_finite());
        if !finite || x1 >= x2 || y1 >= y2 {
            return Err(ProviderError::DegenerateBox([x1, y1, x2, y2]));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }
    pub fn y1(&self) -> f64 {
        self.y1
    }
    pub fn x2(&self) -> f64 {
        self.x2
    }
    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    /// Overlap area with `other` (0 when disjoint or only touching).
    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Restricts the box to `[0, width] × [0, height]`.
    pub fn clamp_to(&self, width: u32, height: u32) -> Result<BoundingBox, ProviderError> {
        let (w, h) = (f64::from(width), f64::from(height));
        BoundingBox::new(
            self.x1.clamp(0.0, w),
            self.y1.clamp(0.0, h),
            self.x2.clamp(0.0, w),
            self.y2.clamp(0.0, h),
        )
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = ProviderError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        BoundingBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        b.to_array()
    }
}

/// Intersection over union; 0 for disjoint boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Crop rectangle for a detected box: grown by `pad_frac` of its width and
/// height on each side, then clamped to the image.
pub fn crop_rect(width: u32, height: u32, b: &BoundingBox, pad_frac: f64) -> Result<BoundingBox, ProviderError> {
    if !(pad_frac.is_finite() && pad_frac >= 0.0) {
        return Err(ProviderError::InvalidConfig(format!(
            "pad_frac {pad_frac} must be >= 0"
        )));
    }
    let px = b.width() * pad_frac;
    let py = b.height() * pad_frac;
    let padded = BoundingBox {
        x1: b.x1 - px,
        y1: b.y1 - py,
        x2: b.x2 + px,
        y2: b.y2 + py,
    };
    padded.clamp_to(width, height)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
        BoundingBox::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn crop_identity_pad_and_clamp() {
        let b = bb(10.0, 10.0, 20.0, 20.0);
        assert_eq!(crop_rect(100, 100, &b, 0.0).unwrap(), b);
        assert_eq!(crop_rect(100, 100, &b, 0.5).unwrap(), bb(5.0, 5.0, 25.0, 25.0));
        let edge = bb(90.0, 90.0, 120.0, 120.0);
        assert_eq!(crop_rect(100, 100, &edge, 0.0).unwrap(), bb(90.0, 90.0, 100.0, 100.0));
    }

    #[test]
    fn crop_outside_image_is_degenerate() {
        let b = bb(150.0, 150.0, 160.0, 160.0);
        assert!(matches!(
            crop_rect(100, 100, &b, 0.0),
            Err(ProviderError::DegenerateBox(_))
        ));
        assert!(crop_rect(100, 100, &bb(0.0, 0.0, 1.0, 1.0), -0.1).is_err());
    }

    #[test]
    fn clamp_negative_corner() {
        let b = bb(-10.0, -10.0, 50.0, 50.0);
        assert_eq!(b.clamp_to(100, 100).unwrap(), bb(0.0, 0.0, 50.0, 50.0));
    }

    #[test]
    fn iou_values() {
        let a = bb(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert!((iou(&a, &bb(1.0, 1.0, 3.0, 3.0)) - 1.0 / 7.0).abs() < 1e-15);
        assert_eq!(iou(&a, &bb(5.0, 5.0, 6.0, 6.0)), 0.0);
        assert_eq!(iou(&a, &bb(2.0, 0.0, 3.0, 2.0)), 0.0);
    }

    #[test]
    fn rejects_inverted_and_nan() {
        assert!(BoundingBox::new(2.0, 0.0, 1.0, 1.0).is_err());
        assert!(BoundingBox::new(0.0, 0.0, f64::NAN, 1.0).is_err());
        let parsed: Result<BoundingBox, _> = serde_json::from_str("[0, 0, 0, 5]");
        assert!(parsed.is_err());
        let ok: BoundingBox = serde_json::from_str("[1, 2, 3, 4]").unwrap();
        assert_eq!(serde_json::to_string(&ok).unwrap(), "[1.0,2.0,3.0,4.0]");
    }

    fn boxes() -> impl Strategy<Value = BoundingBox> {
        (-50.0..150.0f64, -50.0..150.0f64, 0.5..80.0f64, 0.5..80.0f64).prop_map(|(x, y, w, h)| bb(x, y, x + w, y + h))
    }

    proptest! {
        #[test]
        fn crop_results_stay_in_bounds(b in boxes(), pad in 0.0..2.0f64) {
            if let Ok(c) = crop_rect(100, 80, &b, pad) {
                prop_assert!(0.0 <= c.x1() && c.x1() < c.x2() && c.x2() <= 100.0);
                prop_assert!(0.0 <= c.y1() && c.y1() < c.y2() && c.y2() <= 80.0);
            }
        }

        #[test]
        fn crop_idempotent_without_padding(b in boxes()) {
            if let Ok(once) = crop_rect(100, 80, &b, 0.0) {
                prop_assert_eq!(crop_rect(100, 80, &once, 0.0).unwrap(), once);
            }
        }

        #[test]
        fn iou_symmetric_and_bounded(a in boxes(), b in boxes()) {
            let x = iou(&a, &b);
            prop_assert_eq!(x, iou(&b, &a));
            prop_assert!((0.0..=1.0).contains(&x));
        }
    }
}
