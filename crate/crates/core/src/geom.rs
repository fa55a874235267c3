//! Small 2D convex-polygon toolkit used by the support analysis and the
//! reconstruction overlap checks.

use nalgebra::Vector2;

pub type Point2 = Vector2<f64>;

fn cross(a: &Point2, b: &Point2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Signed shoelace area; positive for counter-clockwise winding.
pub fn signed_area(poly: &[Point2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let j = (i + 1) % poly.len();
        acc += cross(&poly[i], &poly[j]);
    }
    0.5 * acc
}

pub fn area(poly: &[Point2]) -> f64 {
    signed_area(poly).abs()
}

/// Axis-aligned rectangle as a counter-clockwise polygon.
pub fn rect(min: Point2, max: Point2) -> Vec<Point2> {
    vec![min, Point2::new(max.x, min.y), max, Point2::new(min.x, max.y)]
}

/// Sutherland–Hodgman clip of `subject` against the convex, counter-clockwise
/// polygon `clip`.
pub fn clip_convex(subject: &[Point2], clip: &[Point2]) -> Vec<Point2> {
    let mut output: Vec<Point2> = subject.to_vec();
    if clip.len() < 3 {
        return Vec::new();
    }
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let edge = b - a;
        let inside = |p: &Point2| cross(&edge, &(p - a)) >= 0.0;
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let cur_in = inside(&cur);
            let prev_in = inside(&prev);
            if cur_in {
                if !prev_in {
                    output.push(intersect(prev, cur, a, b));
                }
                output.push(cur);
            } else if prev_in {
                output.push(intersect(prev, cur, a, b));
            }
        }
    }
    output
}

fn intersect(p: Point2, q: Point2, a: Point2, b: Point2) -> Point2 {
    let r = q - p;
    let s = b - a;
    let denom = cross(&r, &s);
    if denom.abs() < 1e-300 {
        return p;
    }
    let t = cross(&(a - p), &s) / denom;
    p + r * t
}

/// Andrew's monotone chain. Returns a counter-clockwise hull without
/// collinear points.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| (*a - *b).norm_squared() < 1e-24);
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point2> = Vec::new();
    for p in &pts {
        while lower.len() >= 2
            && cross(&(lower[lower.len() - 1] - lower[lower.len() - 2]), &(p - lower[lower.len() - 2])) <= 0.0
        {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Point2> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2
            && cross(&(upper[upper.len() - 1] - upper[upper.len() - 2]), &(p - upper[upper.len() - 2])) <= 0.0
        {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// True when `p` lies inside the counter-clockwise convex polygon with at
/// least `margin` clearance from every edge. Degenerate polygons contain
/// nothing.
pub fn contains_with_margin(poly: &[Point2], p: &Point2, margin: f64) -> bool {
    if poly.len() < 3 || area(poly) < 1e-12 {
        return false;
    }
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let edge = b - a;
        let len = edge.norm();
        if len < 1e-15 {
            continue;
        }
        let dist = cross(&edge, &(p - a)) / len;
        if dist < margin {
            return false;
        }
    }
    true
}

/// Penetration depth of two convex polygons along their best separating
/// axis; negative when they are apart.
pub fn overlap_depth(a: &[Point2], b: &[Point2]) -> f64 {
    let mut best = f64::INFINITY;
    for poly in [a, b] {
        for i in 0..poly.len() {
            let e = poly[(i + 1) % poly.len()] - poly[i];
            let len = e.norm();
            if len < 1e-15 {
                continue;
            }
            let axis = Point2::new(-e.y, e.x) / len;
            let (amin, amax) = project(a, &axis);
            let (bmin, bmax) = project(b, &axis);
            let depth = (amax.min(bmax)) - (amin.max(bmin));
            best = best.min(depth);
        }
    }
    best
}

fn project(poly: &[Point2], axis: &Point2) -> (f64, f64) {
    poly.iter().map(|p| p.dot(axis)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    #[test]
    fn rectangle_intersection_area() {
        let a = rect(p(0.0, 0.0), p(2.0, 1.0));
        let b = rect(p(1.0, 0.5), p(3.0, 3.0));
        let c = clip_convex(&a, &b);
        assert_relative_eq!(area(&c), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn disjoint_rectangles_clip_to_nothing() {
        let a = rect(p(0.0, 0.0), p(1.0, 1.0));
        let b = rect(p(2.0, 2.0), p(3.0, 3.0));
        assert!(area(&clip_convex(&a, &b)) < 1e-15);
        assert!(overlap_depth(&a, &b) < 0.0);
    }

    #[test]
    fn hull_drops_interior_points() {
        let pts = vec![p(0.0, 0.0), p(1.0, 0.0), p(0.5, 0.5), p(1.0, 1.0), p(0.0, 1.0)];
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
        assert_relative_eq!(signed_area(&h), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn margin_containment() {
        let sq = rect(p(0.0, 0.0), p(1.0, 1.0));
        assert!(contains_with_margin(&sq, &p(0.5, 0.5), 0.1));
        assert!(!contains_with_margin(&sq, &p(0.05, 0.5), 0.1));
        assert!(!contains_with_margin(&[p(0.0, 0.0), p(1.0, 0.0)], &p(0.5, 0.0), 0.0));
    }
}
