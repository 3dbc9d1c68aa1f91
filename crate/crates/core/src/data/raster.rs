//! Point-membership tests for the primitive shapes the scene generator
//! draws. Coordinates are pixels in a y-down frame.

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    /// Rotated ellipse; `rot` in degrees.
    Ellipse { cx: f32, cy: f32, rx: f32, ry: f32, rot: f32 },
    /// Segment `a`-`b` thickened by radius `r`.
    Capsule { ax: f32, ay: f32, bx: f32, by: f32, r: f32 },
    /// Rotated rectangle with half extents; `rot` in degrees.
    Rect { cx: f32, cy: f32, hw: f32, hh: f32, rot: f32 },
    /// Annulus.
    Ring { cx: f32, cy: f32, outer: f32, inner: f32 },
    /// Upper half of an annulus (points with `y <= cy`).
    Arch { cx: f32, cy: f32, outer: f32, inner: f32 },
    /// Triangle given by its corners.
    Triangle { a: (f32, f32), b: (f32, f32), c: (f32, f32) },
}

pub fn ellipse(cx: f32, cy: f32, rx: f32, ry: f32, rot: f32) -> Shape {
    Shape::Ellipse { cx, cy, rx, ry, rot }
}

pub fn capsule(ax: f32, ay: f32, bx: f32, by: f32, r: f32) -> Shape {
    Shape::Capsule { ax, ay, bx, by, r }
}

pub fn rect(cx: f32, cy: f32, hw: f32, hh: f32, rot: f32) -> Shape {
    Shape::Rect { cx, cy, hw, hh, rot }
}

pub fn ring(cx: f32, cy: f32, outer: f32, inner: f32) -> Shape {
    Shape::Ring { cx, cy, outer, inner }
}

pub fn arch(cx: f32, cy: f32, outer: f32, inner: f32) -> Shape {
    Shape::Arch { cx, cy, outer, inner }
}

fn rotate_into(x: f32, y: f32, cx: f32, cy: f32, rot_deg: f32) -> (f32, f32) {
    let (s, c) = (-rot_deg.to_radians()).sin_cos();
    let (dx, dy) = (x - cx, y - cy);
    (c * dx - s * dy, s * dx + c * dy)
}

fn cross(o: (f32, f32), a: (f32, f32), p: (f32, f32)) -> f32 {
    (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0)
}

impl Shape {
    pub fn contains(&self, x: f32, y: f32) -> bool {
        match *self {
            Shape::Ellipse { cx, cy, rx, ry, rot } => {
                let (u, v) = rotate_into(x, y, cx, cy, rot);
                (u / rx).powi(2) + (v / ry).powi(2) <= 1.0
            }
            Shape::Capsule { ax, ay, bx, by, r } => {
                let (dx, dy) = (bx - ax, by - ay);
                let len2 = dx * dx + dy * dy;
                let t = if len2 == 0.0 {
                    0.0
                } else {
                    (((x - ax) * dx + (y - ay) * dy) / len2).clamp(0.0, 1.0)
                };
                let (px, py) = (ax + t * dx, ay + t * dy);
                (x - px).powi(2) + (y - py).powi(2) <= r * r
            }
            Shape::Rect { cx, cy, hw, hh, rot } => {
                let (u, v) = rotate_into(x, y, cx, cy, rot);
                u.abs() <= hw && v.abs() <= hh
            }
            Shape::Ring { cx, cy, outer, inner } => {
                let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                d2 <= outer * outer && d2 >= inner * inner
            }
            Shape::Arch { cx, cy, outer, inner } => {
                let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                y <= cy && d2 <= outer * outer && d2 >= inner * inner
            }
            Shape::Triangle { a, b, c } => {
                let p = (x, y);
                let (d1, d2, d3) = (cross(a, b, p), cross(b, c, p), cross(c, a, p));
                let neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
                let pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
                !(neg && pos)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership() {
        assert!(ellipse(0.0, 0.0, 4.0, 2.0, 0.0).contains(3.9, 0.0));
        assert!(!ellipse(0.0, 0.0, 4.0, 2.0, 0.0).contains(0.0, 2.5));
        assert!(ellipse(0.0, 0.0, 4.0, 2.0, 90.0).contains(0.0, 3.5));
        assert!(capsule(0.0, 0.0, 10.0, 0.0, 1.0).contains(10.5, 0.5));
        assert!(!capsule(0.0, 0.0, 10.0, 0.0, 1.0).contains(5.0, 1.5));
        assert!(rect(0.0, 0.0, 3.0, 1.0, 0.0).contains(2.9, -0.9));
        assert!(!ring(0.0, 0.0, 5.0, 3.0).contains(0.0, 0.0));
        assert!(ring(0.0, 0.0, 5.0, 3.0).contains(4.0, 0.0));
        assert!(arch(0.0, 0.0, 5.0, 3.0).contains(0.0, -4.0));
        assert!(!arch(0.0, 0.0, 5.0, 3.0).contains(0.0, 4.0));
        let t = Shape::Triangle { a: (0.0, 0.0), b: (4.0, 0.0), c: (0.0, 4.0) };
        assert!(t.contains(1.0, 1.0));
        assert!(!t.contains(3.0, 3.0));
    }
}
