//! Box representations and rotated IoU.
//!
//! Coordinates are image pixels with x to the right and y down. Headings are
//! degrees measured clockwise from image-up to the center→head vector, so a
//! heading of 0° points north and 90° points east.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Areas below this are treated as empty when clipping.
pub const AREA_EPS: f64 = 1e-12;

/// A detection or annotation in center/head-point form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChpBox {
    pub cx: f64,
    pub cy: f64,
    /// Width in pixels (short side).
    pub w: f64,
    /// Length in pixels (bow to stern).
    pub h: f64,
    pub hx: f64,
    pub hy: f64,
    pub class_id: usize,
    pub score: f64,
}

impl ChpBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, hx: f64, hy: f64, class_id: usize) -> Self {
        Self {
            cx,
            cy,
            w,
            h,
            hx,
            hy,
            class_id,
            score: 1.0,
        }
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = score;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.cx, self.cy, self.w, self.h, self.hx, self.hy, self.score]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidBox(format!("non-finite field in {self:?}")));
        }
        if self.w <= 0.0 || self.h <= 0.0 {
            return Err(Error::InvalidBox(format!(
                "width and length must be positive (w={}, h={})",
                self.w, self.h
            )));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::InvalidBox(format!("score {} outside [0,1]", self.score)));
        }
        if self.hx == self.cx && self.hy == self.cy {
            return Err(Error::ZeroLengthHeading {
                cx: self.cx,
                cy: self.cy,
            });
        }
        Ok(())
    }

    /// Heading in degrees, `[0, 360)`.
    pub fn heading(&self) -> Result<f64> {
        chp_to_rbox(self).map(|r| r.theta)
    }

    pub fn to_rbox(&self) -> Result<RBox> {
        chp_to_rbox(self)
    }
}

/// Rotated rectangle with a full-circle heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    /// Degrees in `[0, 360)`.
    pub theta: f64,
}

impl RBox {
    /// Builds a box, reducing `theta` into `[0, 360)`.
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> Result<Self> {
        if !(w > 0.0 && h > 0.0) || !cx.is_finite() || !cy.is_finite() || !theta.is_finite() {
            return Err(Error::InvalidBox(format!(
                "rbox needs finite center/angle and positive size (w={w}, h={h})"
            )));
        }
        Ok(Self {
            cx,
            cy,
            w,
            h,
            theta: normalize_degrees(theta),
        })
    }

    /// The 180°-periodic five-parameter form used when heading is irrelevant.
    pub fn reduced(&self) -> RBox {
        RBox {
            theta: self.theta.rem_euclid(180.0),
            ..*self
        }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Unit vector from center toward the bow.
    pub fn forward(&self) -> Point {
        let t = self.theta.to_radians();
        Point::new(t.sin(), -t.cos())
    }

    /// Unit vector toward starboard (the bow-right side).
    pub fn right(&self) -> Point {
        let t = self.theta.to_radians();
        Point::new(t.cos(), t.sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

/// Four rectangle corners: front-left, front-right, back-right, back-left.
///
/// With y pointing down this order is clockwise on screen and has positive
/// shoelace area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad(pub [Point; 4]);

impl Quad {
    pub fn area(&self) -> f64 {
        polygon_area(&self.0)
    }

    pub fn contains(&self, p: Point) -> bool {
        (0..4).all(|i| {
            let a = self.0[i];
            let b = self.0[(i + 1) % 4];
            b.sub(a).cross(p.sub(a)) >= 0.0
        })
    }

    /// Recovers the rotated box; the first edge is taken as the bow edge.
    pub fn to_rbox(&self) -> Result<RBox> {
        let [fl, fr, _br, bl] = self.0;
        let w = fl.dist(fr);
        let h = fl.dist(bl);
        let cx = self.0.iter().map(|p| p.x).sum::<f64>() / 4.0;
        let cy = self.0.iter().map(|p| p.y).sum::<f64>() / 4.0;
        let front = Point::new((fl.x + fr.x) / 2.0, (fl.y + fr.y) / 2.0);
        let theta = heading_degrees(front.x - cx, front.y - cy);
        RBox::new(cx, cy, w, h, theta)
    }

    pub fn bounds(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.0 {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }
}

/// Reduces any angle into `[0, 360)`.
pub fn normalize_degrees(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Clockwise-from-up heading of the vector `(dx, dy)` in image coordinates.
fn heading_degrees(dx: f64, dy: f64) -> f64 {
    normalize_degrees(dx.atan2(-dy).to_degrees())
}

pub fn chp_to_rbox(b: &ChpBox) -> Result<RBox> {
    let dx = b.hx - b.cx;
    let dy = b.hy - b.cy;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::ZeroLengthHeading { cx: b.cx, cy: b.cy });
    }
    RBox::new(b.cx, b.cy, b.w, b.h, heading_degrees(dx, dy))
}

/// Places the head at the midpoint of the bow edge.
pub fn rbox_to_chp(r: &RBox, class_id: usize, score: f64) -> ChpBox {
    let f = r.forward();
    ChpBox {
        cx: r.cx,
        cy: r.cy,
        w: r.w,
        h: r.h,
        hx: r.cx + r.h / 2.0 * f.x,
        hy: r.cy + r.h / 2.0 * f.y,
        class_id,
        score,
    }
}

pub fn rbox_to_quad(r: &RBox) -> Quad {
    let f = r.forward();
    let s = r.right();
    let (hw, hh) = (r.w / 2.0, r.h / 2.0);
    let corner =
        |along: f64, across: f64| Point::new(r.cx + along * f.x + across * s.x, r.cy + along * f.y + across * s.y);
    Quad([corner(hh, -hw), corner(hh, hw), corner(-hh, hw), corner(-hh, -hw)])
}

/// Signed shoelace area; positive for the vertex order produced by [`rbox_to_quad`].
pub fn polygon_area(poly: &[Point]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        acc += a.cross(b);
    }
    acc / 2.0
}

/// Sutherland–Hodgman: clips `subject` against the convex, positively oriented `clip`.
pub fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut output: Vec<Point> = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let edge = b.sub(a);
        let side = |p: Point| edge.cross(p.sub(a));
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let (sc, sp) = (side(cur), side(prev));
            if sc >= 0.0 {
                if sp < 0.0 {
                    output.push(intersect(prev, cur, sp, sc));
                }
                output.push(cur);
            } else if sp >= 0.0 {
                output.push(intersect(prev, cur, sp, sc));
            }
        }
    }
    output
}

fn intersect(p: Point, q: Point, sp: f64, sq: f64) -> Point {
    let t = sp / (sp - sq);
    Point::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y))
}

/// Exact rotated IoU by polygon clipping.
pub fn rotated_iou(a: &RBox, b: &RBox) -> f64 {
    let qa = rbox_to_quad(a);
    let qb = rbox_to_quad(b);
    let inter = polygon_area(&clip_convex(&qa.0, &qb.0));
    if inter < AREA_EPS {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Brute-force IoU by counting grid-cell centers over the joint bounding box.
///
/// Only meant as an oracle for [`rotated_iou`].
pub fn rotated_iou_raster(a: &RBox, b: &RBox, grid: usize) -> Result<f64> {
    if grid < 64 {
        return Err(Error::InvalidArgument(format!(
            "raster grid must be at least 64, got {grid}"
        )));
    }
    let qa = rbox_to_quad(a);
    let qb = rbox_to_quad(b);
    let (la, ha) = qa.bounds();
    let (lb, hb) = qb.bounds();
    let lo = Point::new(la.x.min(lb.x), la.y.min(lb.y));
    let hi = Point::new(ha.x.max(hb.x), ha.y.max(hb.y));
    let dx = (hi.x - lo.x) / grid as f64;
    let dy = (hi.y - lo.y) / grid as f64;
    let (mut inter, mut union) = (0u64, 0u64);
    for j in 0..grid {
        let y = lo.y + (j as f64 + 0.5) * dy;
        for i in 0..grid {
            let p = Point::new(lo.x + (i as f64 + 0.5) * dx, y);
            let (ia, ib) = (qa.contains(p), qb.contains(p));
            inter += u64::from(ia && ib);
            union += u64::from(ia || ib);
        }
    }
    Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}

/// Minimal circular difference on the full circle, in `[0, 180]`.
pub fn angle_diff(t1: f64, t2: f64) -> f64 {
    let d = (t1 - t2).rem_euclid(360.0);
    d.min(360.0 - d).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn chp(hx: f64, hy: f64) -> ChpBox {
        ChpBox::new(10.0, 10.0, 4.0, 10.0, hx, hy, 0)
    }

    #[test]
    fn heading_convention() {
        assert_abs_diff_eq!(chp_to_rbox(&chp(10.0, 5.0)).unwrap().theta, 0.0);
        assert_abs_diff_eq!(chp_to_rbox(&chp(15.0, 10.0)).unwrap().theta, 90.0);
        assert_abs_diff_eq!(chp_to_rbox(&chp(10.0, 15.0)).unwrap().theta, 180.0);
        assert_abs_diff_eq!(chp_to_rbox(&chp(5.0, 10.0)).unwrap().theta, 270.0);
    }

    #[test]
    fn zero_heading_rejected() {
        let err = chp_to_rbox(&chp(10.0, 10.0)).unwrap_err();
        assert!(err.to_string().contains("zero-length heading"));
    }

    #[test]
    fn head_on_bow_edge() {
        let r = RBox::new(10.0, 10.0, 4.0, 10.0, 0.0).unwrap();
        let b = rbox_to_chp(&r, 0, 1.0);
        assert_abs_diff_eq!(b.hx, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.hy, 5.0, epsilon = 1e-12);
        let r = RBox::new(10.0, 10.0, 4.0, 10.0, 90.0).unwrap();
        let b = rbox_to_chp(&r, 0, 1.0);
        assert_abs_diff_eq!(b.hx, 15.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.hy, 10.0, epsilon = 1e-12);
    }

    fn assert_quad(q: Quad, expected: [(f64, f64); 4]) {
        for (p, (x, y)) in q.0.iter().zip(expected) {
            assert_abs_diff_eq!(p.x, x, epsilon = 1e-12);
            assert_abs_diff_eq!(p.y, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn quad_corners() {
        let q = rbox_to_quad(&RBox::new(0.0, 0.0, 2.0, 4.0, 0.0).unwrap());
        assert_quad(q, [(-1.0, -2.0), (1.0, -2.0), (1.0, 2.0), (-1.0, 2.0)]);
        let q = rbox_to_quad(&RBox::new(0.0, 0.0, 2.0, 4.0, 90.0).unwrap());
        assert_quad(q, [(2.0, -1.0), (2.0, 1.0), (-2.0, 1.0), (-2.0, -1.0)]);
        let q = rbox_to_quad(&RBox::new(5.0, 5.0, 2.0, 2.0, 45.0).unwrap());
        for p in q.0 {
            assert_abs_diff_eq!(p.dist(Point::new(5.0, 5.0)), 2f64.sqrt(), epsilon = 1e-12);
        }
        assert!(q.area() > 0.0);
    }

    #[test]
    fn iou_examples() {
        let a = RBox::new(0.0, 0.0, 10.0, 100.0, 0.0).unwrap();
        assert_abs_diff_eq!(rotated_iou(&a, &a), 1.0, epsilon = 1e-12);

        let unit = |cx: f64| RBox::new(cx, 0.0, 2.0, 2.0, 0.0).unwrap();
        assert_eq!(rotated_iou(&unit(0.0), &unit(3.0)), 0.0);
        assert_abs_diff_eq!(rotated_iou(&unit(0.0), &unit(1.0)), 1.0 / 3.0, epsilon = 1e-12);
        // Touching edges only.
        assert_eq!(rotated_iou(&unit(0.0), &unit(2.0)), 0.0);
    }

    #[test]
    fn iou_ten_to_one_rotated_five_degrees() {
        // Independently computed with a general polygon library: 0.6426967753931561.
        let a = RBox::new(0.0, 0.0, 10.0, 100.0, 0.0).unwrap();
        let b = RBox::new(0.0, 0.0, 10.0, 100.0, 5.0).unwrap();
        assert_abs_diff_eq!(rotated_iou(&a, &b), 0.642_696_775_393_156_1, epsilon = 1e-9);
        let raster = rotated_iou_raster(&a, &b, 512).unwrap();
        assert!((raster - 0.63).abs() <= 0.02, "raster {raster}");
    }

    #[test]
    fn raster_rejects_coarse_grid() {
        let a = RBox::new(0.0, 0.0, 2.0, 2.0, 0.0).unwrap();
        assert!(rotated_iou_raster(&a, &a, 63).is_err());
        let iou = rotated_iou_raster(&a, &a, 512).unwrap();
        assert!((iou - 1.0).abs() <= 1.0 / 512.0);
    }

    #[test]
    fn angle_diff_examples() {
        assert_eq!(angle_diff(0.0, 0.0), 0.0);
        assert_abs_diff_eq!(angle_diff(350.0, 10.0), 20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(angle_diff(10.0, 350.0), 20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(angle_diff(0.0, 180.0), 180.0);
        assert_abs_diff_eq!(angle_diff(-90.0, 630.0), 0.0, epsilon = 1e-12);
    }

    fn arb_rbox() -> impl Strategy<Value = RBox> {
        (
            -100.0..100.0f64,
            -100.0..100.0f64,
            2.0..200.0f64,
            2.0..200.0f64,
            0.0..360.0f64,
        )
            .prop_map(|(cx, cy, w, h, t)| RBox::new(cx, cy, w, h, t).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn chp_round_trip(r in arb_rbox()) {
            let back = chp_to_rbox(&rbox_to_chp(&r, 0, 1.0)).unwrap();
            prop_assert!((back.cx - r.cx).abs() < 1e-9);
            prop_assert!((back.cy - r.cy).abs() < 1e-9);
            prop_assert!((back.w - r.w).abs() < 1e-9 && (back.h - r.h).abs() < 1e-9);
            prop_assert!(angle_diff(back.theta, r.theta) < 1e-9);
        }

        #[test]
        fn quad_reconstructs_box(r in arb_rbox()) {
            let back = rbox_to_quad(&r).to_rbox().unwrap();
            prop_assert!((back.w - r.w).abs() < 1e-9 && (back.h - r.h).abs() < 1e-9);
            prop_assert!((back.cx - r.cx).abs() < 1e-9 && (back.cy - r.cy).abs() < 1e-9);
            prop_assert!(angle_diff(back.theta, r.theta) < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn iou_symmetric_bounded(a in arb_rbox(), b in arb_rbox()) {
            let ab = rotated_iou(&a, &b);
            let ba = rotated_iou(&b, &a);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!((ab - ba).abs() < 1e-12);
            let flipped = RBox::new(b.cx, b.cy, b.w, b.h, b.theta + 180.0).unwrap();
            prop_assert!((rotated_iou(&a, &flipped) - ab).abs() < 1e-12);
        }

        #[test]
        fn iou_rigid_invariance(a in arb_rbox(), b in arb_rbox(), tx in -50.0..50.0f64,
                                ty in -50.0..50.0f64, rot in 0.0..360.0f64) {
            let (s, c) = rot.to_radians().sin_cos();
            let move_box = |r: &RBox| {
                let x = c * r.cx - s * r.cy + tx;
                let y = s * r.cx + c * r.cy + ty;
                RBox::new(x, y, r.w, r.h, r.theta + rot).unwrap()
            };
            let before = rotated_iou(&a, &b);
            let after = rotated_iou(&move_box(&a), &move_box(&b));
            prop_assert!((before - after).abs() < 1e-6);
        }
    }
}
