//! Box masking, mask interpolation across a list, and red-ellipse prompting.
//!
//! All geometry is integer and deterministic. A fractional mask resolves to
//! whole sweep lines (columns for horizontal sweeps, rows for vertical ones)
//! growing inward from one side of the box, so the region at a larger
//! fraction always contains the region at a smaller one.

use std::f64::consts::FRAC_1_SQRT_2;

use thiserror::Error;

use crate::types::{BoundingBox, Image, MaskPlan, PromptStyle, RankedList, Rgb, SweepDirection, TypeError, RED};

/// Gap between the box and the prompt ellipse, in pixels.
pub const PROMPT_PADDING: u32 = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaskError {
    #[error("list index {k} outside 1..={list_size}")]
    OutOfRange { k: usize, list_size: usize },
    #[error("list size {0} is below 2")]
    ListTooShort(usize),
    #[error("mask fraction {0} outside [0, 1]")]
    InvalidFraction(f64),
    #[error("box out of bounds: {0}")]
    BoxOutOfBounds(TypeError),
    #[error(transparent)]
    Plan(TypeError),
}

/// Fraction of the box masked in list entry `k` of `list_size`: `(k-1)/(L-1)`.
pub fn mask_fraction(k: usize, list_size: usize) -> Result<f64, MaskError> {
    if list_size < 2 {
        return Err(MaskError::ListTooShort(list_size));
    }
    if k == 0 || k > list_size {
        return Err(MaskError::OutOfRange { k, list_size });
    }
    Ok((k - 1) as f64 / (list_size - 1) as f64)
}

/// Box side the mask grows from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Top,
    Bottom,
}

impl Side {
    fn is_horizontal(self) -> bool {
        matches!(self, Side::Left | Side::Right)
    }
}

/// Resolves a sweep direction for a box inside a `width × height` image.
///
/// For [`SweepDirection::TowardNearestEdge`] the side facing the closest image
/// border wins; ties go left, right, top, bottom in that order.
pub fn resolve_side(bbox: &BoundingBox, direction: SweepDirection, width: u32, height: u32) -> Side {
    match direction {
        SweepDirection::LeftToRight => Side::Left,
        SweepDirection::TopToBottom => Side::Top,
        SweepDirection::TowardNearestEdge => {
            let gaps = [
                (bbox.x0, Side::Left),
                (width.saturating_sub(bbox.x1), Side::Right),
                (bbox.y0, Side::Top),
                (height.saturating_sub(bbox.y1), Side::Bottom),
            ];
            // min_by_key keeps the first minimum.
            gaps.iter().min_by_key(|(gap, _)| *gap).map(|&(_, s)| s).unwrap()
        }
    }
}

/// The exact pixel set masked for one box at one fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskRegion {
    pub bbox: BoundingBox,
    pub fraction: f64,
    pub side: Side,
    /// Number of whole sweep lines covered.
    pub lines: u32,
    /// Covered sub-rectangle, `None` when nothing is masked.
    pub rect: Option<BoundingBox>,
}

impl MaskRegion {
    /// Sweep lines available in the box along the sweep axis.
    pub fn total_lines(&self) -> u32 {
        if self.side.is_horizontal() {
            self.bbox.width()
        } else {
            self.bbox.height()
        }
    }

    /// Pixels in one sweep line.
    pub fn line_len(&self) -> u32 {
        if self.side.is_horizontal() {
            self.bbox.height()
        } else {
            self.bbox.width()
        }
    }

    pub fn pixel_count(&self) -> u64 {
        self.rect.map_or(0, |r| r.area())
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        self.rect.is_some_and(|r| r.contains(x, y))
    }
}

/// Computes the region masked for `fraction` of `bbox`, rounding half up to whole lines.
pub fn resolve_region(
    bbox: &BoundingBox,
    fraction: f64,
    direction: SweepDirection,
    width: u32,
    height: u32,
) -> Result<MaskRegion, MaskError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(MaskError::InvalidFraction(fraction));
    }
    let side = resolve_side(bbox, direction, width, height);
    let total = if side.is_horizontal() {
        bbox.width()
    } else {
        bbox.height()
    };
    let lines = ((fraction * f64::from(total) + 0.5).floor() as u32).min(total);
    let rect = (lines > 0).then(|| {
        let (x0, y0, x1, y1) = match side {
            Side::Left => (bbox.x0, bbox.y0, bbox.x0 + lines, bbox.y1),
            Side::Right => (bbox.x1 - lines, bbox.y0, bbox.x1, bbox.y1),
            Side::Top => (bbox.x0, bbox.y0, bbox.x1, bbox.y0 + lines),
            Side::Bottom => (bbox.x0, bbox.y1 - lines, bbox.x1, bbox.y1),
        };
        BoundingBox { x0, y0, x1, y1 }
    });
    Ok(MaskRegion {
        bbox: *bbox,
        fraction,
        side,
        lines,
        rect,
    })
}

/// Paints the resolved mask region of `bbox` with `fill`.
pub fn apply_mask(
    image: &Image,
    bbox: &BoundingBox,
    fraction: f64,
    direction: SweepDirection,
    fill: Rgb,
) -> Result<Image, MaskError> {
    bbox.validate_for(image).map_err(MaskError::BoxOutOfBounds)?;
    let region = resolve_region(bbox, fraction, direction, image.width(), image.height())?;
    let mut out = image.clone();
    if let Some(rect) = region.rect {
        out.fill_rect(&rect, fill);
    }
    Ok(out)
}

/// Integer ellipse circumscribing a box.
///
/// The semi-axes scale the box half-extents by `sqrt(2)`, which is the
/// smallest same-aspect ellipse through the box corners, then add
/// [`PROMPT_PADDING`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptEllipse {
    pub cx: i64,
    pub cy: i64,
    pub a: i64,
    pub b: i64,
}

impl PromptEllipse {
    pub fn around(bbox: &BoundingBox) -> Self {
        let half_axis = |extent: u32| (f64::from(extent) * FRAC_1_SQRT_2).ceil() as i64 + i64::from(PROMPT_PADDING);
        Self {
            cx: (i64::from(bbox.x0) + i64::from(bbox.x1) - 1) / 2,
            cy: (i64::from(bbox.y0) + i64::from(bbox.y1) - 1) / 2,
            a: half_axis(bbox.width()),
            b: half_axis(bbox.height()),
        }
    }

    /// Path pixels from midpoint rasterization, possibly outside the image.
    pub fn path(&self) -> Vec<(i64, i64)> {
        let mut quadrant = midpoint_quadrant(self.a, self.b);
        // The axis endpoints are always part of the path.
        quadrant.push((self.a, 0));
        quadrant.push((0, self.b));
        let mut pts: Vec<(i64, i64)> = quadrant
            .iter()
            .flat_map(|&(x, y)| [(x, y), (-x, y), (x, -y), (-x, -y)])
            .map(|(x, y)| (self.cx + x, self.cy + y))
            .collect();
        pts.sort_unstable();
        pts.dedup();
        pts
    }
}

/// First-quadrant points of an origin-centered ellipse, midpoint algorithm
/// with every decision variable scaled by 4 to stay in integers.
fn midpoint_quadrant(a: i64, b: i64) -> Vec<(i64, i64)> {
    let (a2, b2) = (a * a, b * b);
    let mut pts = Vec::new();
    let (mut x, mut y) = (0i64, b);
    let mut dx = 0i64;
    let mut dy = 2 * a2 * y;

    let mut d1 = 4 * b2 - 4 * a2 * b + a2;
    while dx < dy {
        pts.push((x, y));
        x += 1;
        dx += 2 * b2;
        if d1 < 0 {
            d1 += 4 * (dx + b2);
        } else {
            y -= 1;
            dy -= 2 * a2;
            d1 += 4 * (dx - dy + b2);
        }
    }

    let mut d2 = b2 * (2 * x + 1) * (2 * x + 1) + 4 * a2 * (y - 1) * (y - 1) - 4 * a2 * b2;
    while y >= 0 {
        pts.push((x, y));
        y -= 1;
        dy -= 2 * a2;
        if d2 > 0 {
            d2 += 4 * (a2 - dy);
        } else {
            x += 1;
            dx += 2 * b2;
            d2 += 4 * (dx - dy + a2);
        }
    }
    pts
}

/// Strokes a pure-red ellipse around `bbox` with a square brush of side `stroke_width`.
///
/// The stroke never enters `bbox` itself, and strokes falling outside the
/// image are clipped.
pub fn draw_prompt(image: &Image, bbox: &BoundingBox, stroke_width: u32) -> Result<Image, MaskError> {
    let mut out = image.clone();
    stroke_prompt(&mut out, bbox, stroke_width, std::slice::from_ref(bbox))?;
    Ok(out)
}

/// Paints the prompt around `bbox`, skipping pixels inside any of `keep_out`.
fn stroke_prompt(
    image: &mut Image,
    bbox: &BoundingBox,
    stroke_width: u32,
    keep_out: &[BoundingBox],
) -> Result<(), MaskError> {
    bbox.validate_for(image).map_err(MaskError::BoxOutOfBounds)?;
    if stroke_width == 0 {
        return Err(MaskError::Plan(TypeError::InvalidPlan(
            "stroke width must be >= 1".into(),
        )));
    }
    let lo = -(i64::from(stroke_width - 1) / 2);
    let hi = i64::from(stroke_width - 1) + lo;
    let (w, h) = (i64::from(image.width()), i64::from(image.height()));
    for (px, py) in PromptEllipse::around(bbox).path() {
        for oy in lo..=hi {
            for ox in lo..=hi {
                let (x, y) = (px + ox, py + oy);
                if !((0..w).contains(&x) && (0..h).contains(&y)) {
                    continue;
                }
                let (x, y) = (x as u32, y as u32);
                if keep_out.iter().all(|b| !b.contains(x, y)) {
                    image.set_pixel(x, y, RED);
                }
            }
        }
    }
    Ok(())
}

/// Resolved regions for every box of `plan` at list index `k` (1-based).
pub fn plan_regions(plan: &MaskPlan, k: usize, width: u32, height: u32) -> Result<Vec<MaskRegion>, MaskError> {
    let fraction = mask_fraction(k, plan.list_size)?;
    plan.boxes
        .iter()
        .map(|b| resolve_region(b, fraction, plan.sweep, width, height))
        .collect()
}

/// Unmasked share of the plan's boxes at list index `k`, averaged over boxes.
pub fn visibility(plan: &MaskPlan, k: usize, width: u32, height: u32) -> Result<f64, MaskError> {
    let regions = plan_regions(plan, k, width, height)?;
    let sum: f64 = regions
        .iter()
        .map(|r| 1.0 - r.pixel_count() as f64 / r.bbox.area() as f64)
        .sum();
    Ok(sum / regions.len() as f64)
}

/// Renders `x_k = prompt(mask(x, f_k))` for `k = 1..=L`.
///
/// Every box is masked independently at the same fraction. Prompts are drawn
/// after all masks and stay outside every box of the plan, so box interiors
/// only ever hold image or fill pixels.
pub fn build_ranked_list(image: &Image, plan: &MaskPlan, sample_id: &str) -> Result<RankedList, MaskError> {
    plan.validate().map_err(MaskError::Plan)?;
    for b in &plan.boxes {
        b.validate_for(image).map_err(MaskError::BoxOutOfBounds)?;
    }
    let mut images = Vec::with_capacity(plan.list_size);
    let mut fractions = Vec::with_capacity(plan.list_size);
    for k in 1..=plan.list_size {
        let mut img = image.clone();
        for region in plan_regions(plan, k, image.width(), image.height())? {
            if let Some(rect) = region.rect {
                img.fill_rect(&rect, plan.fill);
            }
        }
        if plan.prompt == PromptStyle::RedCircle {
            for b in &plan.boxes {
                stroke_prompt(&mut img, b, plan.stroke_width, &plan.boxes)?;
            }
        }
        fractions.push(mask_fraction(k, plan.list_size)?);
        images.push(img);
    }
    Ok(RankedList {
        sample_id: sample_id.to_string(),
        images,
        fractions,
        plan: plan.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::BLACK;

    const BG: Rgb = [120, 130, 140];

    fn count_color_in(img: &Image, bbox: &BoundingBox, color: Rgb) -> u64 {
        let mut n = 0;
        for y in bbox.y0..bbox.y1 {
            for x in bbox.x0..bbox.x1 {
                if img.pixel(x, y) == color {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn fraction_formula() {
        assert_eq!(mask_fraction(1, 5).unwrap(), 0.0);
        assert_eq!(mask_fraction(5, 5).unwrap(), 1.0);
        assert_eq!(mask_fraction(3, 5).unwrap(), 0.5);
        assert_eq!(mask_fraction(2, 4).unwrap(), 1.0 / 3.0);
        assert!(matches!(mask_fraction(0, 5), Err(MaskError::OutOfRange { .. })));
        assert!(matches!(mask_fraction(6, 5), Err(MaskError::OutOfRange { .. })));
        assert!(matches!(mask_fraction(1, 1), Err(MaskError::ListTooShort(1))));
    }

    #[test]
    fn zero_fraction_is_identity() {
        let img = Image::filled(30, 30, BG);
        let b = BoundingBox::new(5, 5, 20, 25).unwrap();
        let out = apply_mask(&img, &b, 0.0, SweepDirection::TowardNearestEdge, BLACK).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn full_fraction_fills_box() {
        let img = Image::filled(30, 30, BG);
        let b = BoundingBox::new(5, 5, 20, 25).unwrap();
        let out = apply_mask(&img, &b, 1.0, SweepDirection::LeftToRight, [1, 2, 3]).unwrap();
        assert_eq!(count_color_in(&out, &b, [1, 2, 3]), b.area());
    }

    #[test]
    fn half_of_forty_by_twenty_is_twenty_columns() {
        let img = Image::filled(60, 40, BG);
        let b = BoundingBox::new(10, 10, 50, 30).unwrap();
        let out = apply_mask(&img, &b, 0.5, SweepDirection::LeftToRight, BLACK).unwrap();
        // Independent scan: count filled pixels and filled columns.
        let mut filled = 0;
        let mut cols = std::collections::BTreeSet::new();
        for y in 0..40 {
            for x in 0..60 {
                if out.pixel(x, y) == BLACK {
                    filled += 1;
                    cols.insert(x);
                }
            }
        }
        assert_eq!(filled, 400);
        assert_eq!(cols.len(), 20);
        assert_eq!(*cols.first().unwrap(), 10);
        assert_eq!(*cols.last().unwrap(), 29);
    }

    #[test]
    fn out_of_bounds_box_rejected() {
        let img = Image::filled(10, 10, BG);
        let b = BoundingBox::new(5, 5, 11, 8).unwrap();
        assert!(matches!(
            apply_mask(&img, &b, 0.5, SweepDirection::LeftToRight, BLACK),
            Err(MaskError::BoxOutOfBounds(_))
        ));
        assert!(matches!(draw_prompt(&img, &b, 3), Err(MaskError::BoxOutOfBounds(_))));
    }

    #[test]
    fn invalid_fraction_rejected() {
        let img = Image::filled(10, 10, BG);
        let b = BoundingBox::new(1, 1, 5, 5).unwrap();
        assert!(apply_mask(&img, &b, 1.5, SweepDirection::LeftToRight, BLACK).is_err());
        assert!(apply_mask(&img, &b, f64::NAN, SweepDirection::LeftToRight, BLACK).is_err());
    }

    #[test]
    fn nearest_edge_picks_closest_side() {
        let (w, h) = (100, 100);
        let near_right = BoundingBox::new(70, 40, 95, 60).unwrap();
        assert_eq!(
            resolve_side(&near_right, SweepDirection::TowardNearestEdge, w, h),
            Side::Right
        );
        let near_bottom = BoundingBox::new(30, 80, 60, 99).unwrap();
        assert_eq!(
            resolve_side(&near_bottom, SweepDirection::TowardNearestEdge, w, h),
            Side::Bottom
        );
        let centered = BoundingBox::new(40, 40, 60, 60).unwrap();
        assert_eq!(
            resolve_side(&centered, SweepDirection::TowardNearestEdge, w, h),
            Side::Left
        );

        let r = resolve_region(&near_right, 0.2, SweepDirection::TowardNearestEdge, w, h).unwrap();
        assert_eq!(r.rect, Some(BoundingBox::new(90, 40, 95, 60).unwrap()));
    }

    #[test]
    fn rounding_is_half_up() {
        let b = BoundingBox::new(0, 0, 5, 2).unwrap();
        // 0.5 * 5 = 2.5 lines -> 3
        let r = resolve_region(&b, 0.5, SweepDirection::LeftToRight, 10, 10).unwrap();
        assert_eq!(r.lines, 3);
        assert_eq!(r.pixel_count(), 6);
    }

    #[test]
    fn prompt_leaves_box_interior_alone() {
        let img = Image::filled(80, 60, BG);
        let b = BoundingBox::new(25, 20, 55, 40).unwrap();
        let out = draw_prompt(&img, &b, 3).unwrap();
        assert_eq!(count_color_in(&out, &b, BG), b.area());
        assert!(out.as_bytes() != img.as_bytes());
    }

    #[test]
    fn prompt_hits_axis_points() {
        let img = Image::filled(120, 100, BG);
        let b = BoundingBox::new(40, 35, 80, 65).unwrap();
        let out = draw_prompt(&img, &b, 3).unwrap();
        // Analytic axis points of the ellipse x = cx + a cos t, y = cy + b sin t.
        let e = PromptEllipse::around(&b);
        let cx = (40.0 + 79.0) / 2.0_f64;
        let cy = (35.0 + 64.0) / 2.0_f64;
        let a = (40.0 * FRAC_1_SQRT_2).ceil() + 2.0;
        let bb = (30.0 * FRAC_1_SQRT_2).ceil() + 2.0;
        assert_eq!((e.a, e.b), (a as i64, bb as i64));
        for t in [
            0.0,
            std::f64::consts::FRAC_PI_2,
            std::f64::consts::PI,
            3.0 * std::f64::consts::FRAC_PI_2,
        ] {
            let x = (cx.floor() + a * f64::cos(t)).round() as u32;
            let y = (cy.floor() + bb * f64::sin(t)).round() as u32;
            assert_eq!(out.pixel(x, y), RED, "angle {t}");
        }
    }

    #[test]
    fn prompt_is_idempotent_and_clips() {
        let img = Image::filled(40, 30, BG);
        // Box against the top-left corner: the ellipse leaves the image.
        let b = BoundingBox::new(0, 0, 12, 10).unwrap();
        let once = draw_prompt(&img, &b, 3).unwrap();
        let twice = draw_prompt(&once, &b, 3).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn ranked_list_endpoints() {
        let img = Image::filled(50, 50, BG);
        let b = BoundingBox::new(10, 10, 30, 30).unwrap();
        let plan = MaskPlan::new(vec![b], 2).unwrap();
        let list = build_ranked_list(&img, &plan, "s").unwrap();
        assert_eq!(list.fractions, vec![0.0, 1.0]);
        assert_eq!(list.images[0], draw_prompt(&img, &b, 3).unwrap());
        let full = apply_mask(&img, &b, 1.0, plan.sweep, BLACK).unwrap();
        assert_eq!(list.images[1], draw_prompt(&full, &b, 3).unwrap());
    }

    #[test]
    fn ranked_list_fractions_for_five() {
        let img = Image::filled(50, 50, BG);
        let b = BoundingBox::new(10, 10, 30, 30).unwrap();
        let plan = MaskPlan::new(vec![b], 5).unwrap();
        let list = build_ranked_list(&img, &plan, "s").unwrap();
        assert_eq!(list.fractions, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(list.len(), 5);
    }

    #[test]
    fn visibility_endpoints() {
        let b = BoundingBox::new(10, 10, 30, 30).unwrap();
        let plan = MaskPlan::new(vec![b], 5).unwrap();
        assert_eq!(visibility(&plan, 1, 50, 50).unwrap(), 1.0);
        assert_eq!(visibility(&plan, 3, 50, 50).unwrap(), 0.5);
        assert_eq!(visibility(&plan, 5, 50, 50).unwrap(), 0.0);
    }
}
