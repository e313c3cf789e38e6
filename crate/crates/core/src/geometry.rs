//! Polyline utilities: self-intersection sweep and Hausdorff distance.

use crate::conformal::Point;
use crate::math::sqrt;

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn on_segment(p: Point, q: Point, r: Point) -> bool {
    r.0 >= p.0.min(q.0) && r.0 <= p.0.max(q.0) && r.1 >= p.1.min(q.1) && r.1 <= p.1.max(q.1)
}

/// Closed-segment intersection test, collinear overlaps included.
pub fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// First pair of non-adjacent segments that meet, if any. Segments are
/// `(nodes[i], nodes[i+1])`, plus the closing segment when `closed`.
pub fn first_self_intersection(nodes: &[Point], closed: bool) -> Option<(usize, usize)> {
    let n = nodes.len();
    let m = if closed { n } else { n.saturating_sub(1) };
    let seg = |i: usize| (nodes[i], nodes[(i + 1) % n]);
    // Bounding boxes let most pairs be skipped cheaply.
    for i in 0..m {
        let (a, b) = seg(i);
        let (ax0, ax1) = (a.0.min(b.0), a.0.max(b.0));
        let (ay0, ay1) = (a.1.min(b.1), a.1.max(b.1));
        for j in i + 2..m {
            if closed && i == 0 && j == m - 1 {
                continue;
            }
            let (c, d) = seg(j);
            if c.0.max(d.0) < ax0 || c.0.min(d.0) > ax1 || c.1.max(d.1) < ay0 || c.1.min(d.1) > ay1 {
                continue;
            }
            if segments_intersect(a, b, c, d) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Euclidean distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let l2 = dx * dx + dy * dy;
    let s = if l2 == 0.0 { 0.0 } else { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / l2).clamp(0.0, 1.0) };
    let (qx, qy) = (a.0 + s * dx - p.0, a.1 + s * dy - p.1);
    sqrt(qx * qx + qy * qy)
}

fn one_sided(from: &[Point], to: &[Point], closed_to: bool) -> f64 {
    let n = to.len();
    let m = if closed_to { n } else { n - 1 };
    from.iter()
        .map(|&p| {
            if n == 1 {
                return point_segment_distance(p, to[0], to[0]);
            }
            (0..m).map(|k| point_segment_distance(p, to[k], to[(k + 1) % n])).fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance between the polylines through the nodes
/// (vertex-to-polyline in both directions).
pub fn hausdorff(a: &[Point], closed_a: bool, b: &[Point], closed_b: bool) -> f64 {
    one_sided(a, b, closed_b).max(one_sided(b, a, closed_a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_and_disjoint_segments() {
        assert!(segments_intersect((0.0, 0.0), (1.0, 1.0), (0.0, 1.0), (1.0, 0.0)));
        assert!(!segments_intersect((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)));
        assert!(segments_intersect((0.0, 0.0), (2.0, 0.0), (1.0, 0.0), (3.0, 0.0)));
    }

    #[test]
    fn square_is_simple_and_bowtie_is_not() {
        let square = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        assert_eq!(first_self_intersection(&square, true), None);
        let bowtie = [(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)];
        assert!(first_self_intersection(&bowtie, true).is_some());
    }

    #[test]
    fn hausdorff_of_parallel_lines() {
        let a = [(0.0, 0.0), (1.0, 0.0)];
        let b = [(0.0, 0.5), (0.5, 0.5), (1.0, 0.5)];
        assert!((hausdorff(&a, false, &b, false) - 0.5).abs() < 1e-15);
    }
}
