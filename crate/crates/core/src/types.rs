//! Shared domain types and their invariant checks.
//!
//! Everything here is immutable after construction. Constructors validate,
//! so a value of any of these types can be handed to another thread or
//! another module without re-checking.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default inverse temperature applied to policy log-ratios.
pub const DEFAULT_BETA: f64 = 0.1;
/// Default anchor margin.
pub const DEFAULT_DELTA: f64 = 0.0;
/// Smallest supported list size.
pub const MIN_LIST_SIZE: usize = 2;
/// Largest supported list size.
pub const MAX_LIST_SIZE: usize = 16;
/// Maximum number of boxes a plan may carry (one initial pick plus three retries).
pub const MAX_PLAN_BOXES: usize = 4;

/// An 8-bit RGB triple.
pub type Rgb = [u8; 3];

pub const BLACK: Rgb = [0, 0, 0];
pub const RED: Rgb = [255, 0, 0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TypeError {
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("invalid bounding box: {0}")]
    InvalidBox(String),
    #[error("invalid sample `{id}`: {field}: {reason}")]
    InvalidSample {
        id: String,
        field: &'static str,
        reason: String,
    },
    #[error("invalid mask plan: {0}")]
    InvalidPlan(String),
    #[error("invalid scores: {0}")]
    InvalidScores(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
}

/// Row-major RGB image, three bytes per pixel.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Image {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl fmt::Debug for Image {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Image")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("bytes", &self.pixels.len())
            .finish()
    }
}

impl Image {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, TypeError> {
        if width == 0 || height == 0 {
            return Err(TypeError::InvalidImage(format!(
                "dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(TypeError::InvalidImage(format!(
                "buffer holds {} bytes, {width}x{height} RGB needs {expected}",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    /// A uniformly colored image.
    ///
    /// # Panics
    ///
    /// Panics if either dimension is zero.
    pub fn filled(width: u32, height: u32, color: Rgb) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be non-zero");
        let pixels = color
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 3)
            .collect();
        Self { width, height, pixels }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.pixels
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    /// Pixel at `(x, y)`.
    ///
    /// # Panics
    ///
    /// Panics when the coordinate is outside the image.
    pub fn pixel(&self, x: u32, y: u32) -> Rgb {
        assert!(x < self.width && y < self.height, "pixel ({x},{y}) out of bounds");
        let o = self.offset(x, y);
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, color: Rgb) {
        assert!(x < self.width && y < self.height, "pixel ({x},{y}) out of bounds");
        let o = self.offset(x, y);
        self.pixels[o..o + 3].copy_from_slice(&color);
    }

    /// Paints the half-open rectangle with `color`. The box must fit.
    pub fn fill_rect(&mut self, rect: &BoundingBox, color: Rgb) {
        debug_assert!(rect.fits(self.width, self.height));
        for y in rect.y0..rect.y1 {
            for x in rect.x0..rect.x1 {
                self.set_pixel(x, y, color);
            }
        }
    }
}

/// Axis-aligned pixel box, half-open: `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u32; 4]", into = "[u32; 4]")]
pub struct BoundingBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BoundingBox {
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Result<Self, TypeError> {
        if x0 >= x1 || y0 >= y1 {
            return Err(TypeError::InvalidBox(format!(
                "[{x0},{y0},{x1},{y1}] is empty; need x0 < x1 and y0 < y1"
            )));
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    pub fn fits(&self, width: u32, height: u32) -> bool {
        self.x1 <= width && self.y1 <= height
    }

    /// Checks the box against a carrier image.
    pub fn validate_for(&self, image: &Image) -> Result<(), TypeError> {
        if self.fits(image.width(), image.height()) {
            Ok(())
        } else {
            Err(TypeError::InvalidBox(format!(
                "[{},{},{},{}] exceeds {}x{} image",
                self.x0,
                self.y0,
                self.x1,
                self.y1,
                image.width(),
                image.height()
            )))
        }
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn intersects(&self, other: &BoundingBox) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }

    pub fn to_array(self) -> [u32; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }
}

impl TryFrom<[u32; 4]> for BoundingBox {
    type Error = TypeError;

    fn try_from(v: [u32; 4]) -> Result<Self, Self::Error> {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BoundingBox> for [u32; 4] {
    fn from(b: BoundingBox) -> Self {
        b.to_array()
    }
}

/// One `(image, question, chosen, rejected)` preference record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceSample {
    pub id: String,
    pub image: PathBuf,
    pub question: String,
    pub chosen: String,
    pub rejected: String,
}

/// A preference sample whose invariants have been checked, paired with its decoded image.
///
/// Only [`validate_sample`] produces this type.
#[derive(Debug, Clone)]
pub struct ValidSample {
    sample: PreferenceSample,
    image: Image,
}

impl ValidSample {
    pub fn sample(&self) -> &PreferenceSample {
        &self.sample
    }

    pub fn image(&self) -> &Image {
        &self.image
    }

    pub fn id(&self) -> &str {
        &self.sample.id
    }
}

/// Checks a sample's text fields and its decoded image.
pub fn validate_sample(sample: PreferenceSample, image: Image) -> Result<ValidSample, TypeError> {
    let fail = |field: &'static str, reason: &str| TypeError::InvalidSample {
        id: sample.id.clone(),
        field,
        reason: reason.to_string(),
    };
    if sample.id.trim().is_empty() {
        return Err(fail("id", "empty"));
    }
    if sample.question.trim().is_empty() {
        return Err(fail("question", "empty"));
    }
    if sample.chosen.trim().is_empty() {
        return Err(fail("chosen", "empty"));
    }
    if sample.chosen == sample.rejected {
        return Err(fail("rejected", "identical to chosen"));
    }
    let expected = image.width as usize * image.height as usize * 3;
    if image.width == 0 || image.height == 0 || image.pixels.len() != expected {
        return Err(fail(
            "image",
            &format!(
                "{}x{} image with {} bytes",
                image.width,
                image.height,
                image.pixels.len()
            ),
        ));
    }
    Ok(ValidSample { sample, image })
}

/// Direction in which a box is progressively masked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepDirection {
    /// Grow from the box side closest to an image border.
    #[default]
    TowardNearestEdge,
    LeftToRight,
    TopToBottom,
}

impl fmt::Display for SweepDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepDirection::TowardNearestEdge => "toward-nearest-edge",
            SweepDirection::LeftToRight => "left-to-right",
            SweepDirection::TopToBottom => "top-to-bottom",
        })
    }
}

impl std::str::FromStr for SweepDirection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "toward-nearest-edge" | "nearest-edge" => Ok(Self::TowardNearestEdge),
            "left-to-right" => Ok(Self::LeftToRight),
            "top-to-bottom" => Ok(Self::TopToBottom),
            other => Err(format!(
                "unknown sweep `{other}` (expected toward-nearest-edge, left-to-right, top-to-bottom)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptStyle {
    #[default]
    RedCircle,
    None,
}

/// Parameters controlling how a ranked list is rendered from one image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskPlan {
    pub boxes: Vec<BoundingBox>,
    pub list_size: usize,
    pub sweep: SweepDirection,
    pub prompt: PromptStyle,
    pub fill: Rgb,
    pub stroke_width: u32,
}

impl MaskPlan {
    pub const DEFAULT_STROKE_WIDTH: u32 = 3;

    /// Plan with default sweep, prompt, fill and stroke.
    pub fn new(boxes: Vec<BoundingBox>, list_size: usize) -> Result<Self, TypeError> {
        let plan = Self {
            boxes,
            list_size,
            sweep: SweepDirection::default(),
            prompt: PromptStyle::default(),
            fill: BLACK,
            stroke_width: Self::DEFAULT_STROKE_WIDTH,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), TypeError> {
        if self.boxes.is_empty() || self.boxes.len() > MAX_PLAN_BOXES {
            return Err(TypeError::InvalidPlan(format!(
                "plan needs 1..={MAX_PLAN_BOXES} boxes, got {}",
                self.boxes.len()
            )));
        }
        if !(MIN_LIST_SIZE..=MAX_LIST_SIZE).contains(&self.list_size) {
            return Err(TypeError::InvalidPlan(format!(
                "list size {} outside {MIN_LIST_SIZE}..={MAX_LIST_SIZE}",
                self.list_size
            )));
        }
        if self.stroke_width == 0 {
            return Err(TypeError::InvalidPlan("stroke width must be >= 1".into()));
        }
        Ok(())
    }

    pub fn validate_for(&self, image: &Image) -> Result<(), TypeError> {
        self.validate()?;
        self.boxes.iter().try_for_each(|b| b.validate_for(image))
    }
}

/// The `L` progressively masked renderings of one sample, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub sample_id: String,
    pub images: Vec<Image>,
    pub fractions: Vec<f64>,
    pub plan: MaskPlan,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Hard negative, i.e. the fully masked last entry.
    pub fn hard_negative(&self) -> &Image {
        self.images.last().expect("ranked lists are never empty")
    }
}

/// Finite, non-empty vector of list scores `S_1 … S_z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(scores: Vec<f64>) -> Result<Self, TypeError> {
        if scores.is_empty() {
            return Err(TypeError::InvalidScores("score vector is empty".into()));
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(TypeError::InvalidScores(format!(
                "score {} is not finite ({})",
                i + 1,
                scores[i]
            )));
        }
        Ok(Self(scores))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Objective hyperparameters. The listwise product bound is the list size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub beta: f64,
    pub delta: f64,
    pub list_size: usize,
}

impl Hyperparams {
    pub fn new(beta: f64, delta: f64, list_size: usize) -> Result<Self, TypeError> {
        let h = Self { beta, delta, list_size };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<(), TypeError> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(TypeError::InvalidHyperparams(format!(
                "beta must be finite and > 0, got {}",
                self.beta
            )));
        }
        if !self.delta.is_finite() {
            return Err(TypeError::InvalidHyperparams(format!(
                "delta must be finite, got {}",
                self.delta
            )));
        }
        if !(MIN_LIST_SIZE..=MAX_LIST_SIZE).contains(&self.list_size) {
            return Err(TypeError::InvalidHyperparams(format!(
                "list size {} outside {MIN_LIST_SIZE}..={MAX_LIST_SIZE}",
                self.list_size
            )));
        }
        Ok(())
    }
}

/// Per-term objective values. `total` is always the sum of the three terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub dpo: f64,
    pub anchor: f64,
    pub listwise: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(dpo: f64, anchor: f64, listwise: f64) -> Self {
        Self {
            dpo,
            anchor,
            listwise,
            total: dpo + anchor + listwise,
        }
    }

    /// Term-wise mean over a non-empty collection.
    pub fn mean<'a>(items: impl IntoIterator<Item = &'a LossBreakdown>) -> Self {
        let mut n = 0usize;
        let (mut d, mut a, mut l) = (0.0, 0.0, 0.0);
        for b in items {
            d += b.dpo;
            a += b.anchor;
            l += b.listwise;
            n += 1;
        }
        if n == 0 {
            return Self::default();
        }
        let n = n as f64;
        Self::new(d / n, a / n, l / n)
    }

    pub fn is_finite(&self) -> bool {
        self.dpo.is_finite() && self.anchor.is_finite() && self.listwise.is_finite()
    }
}
