//! Planar geometry on meter-based coordinates.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Self) -> T {
        (other.x - self.x).hypot(other.y - self.y)
    }

    pub fn sub(self, other: Self) -> Self {
        Self::new(self.x - other.x, self.y - other.y)
    }

    pub fn add(self, other: Self) -> Self {
        Self::new(self.x + other.x, self.y + other.y)
    }

    pub fn scale(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    /// Linear interpolation `self + t (other - self)`.
    pub fn lerp(self, other: Self, t: T) -> Self {
        Self::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }

    /// Bearing of the displacement, east = 0, counter-clockwise, in (-π, π].
    pub fn angle(self) -> T {
        self.y.atan2(self.x)
    }
}

/// Sum of segment lengths.
pub fn polyline_length<T: Scalar>(line: &[Point2<T>]) -> T {
    line.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Closest point on segment `a`–`b` to `p`, with the segment parameter in [0, 1].
pub fn closest_on_segment<T: Scalar>(p: Point2<T>, a: Point2<T>, b: Point2<T>) -> (Point2<T>, T) {
    let ab = b.sub(a);
    let len2 = ab.x * ab.x + ab.y * ab.y;
    if len2 <= T::zero() {
        return (a, T::zero());
    }
    let ap = p.sub(a);
    let t = ((ap.x * ab.x + ap.y * ab.y) / len2).max(T::zero()).min(T::one());
    (a.lerp(b, t), t)
}

/// Closest location on a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolylineProjection<T> {
    pub point: Point2<T>,
    pub distance: T,
    /// Index of the segment `line[segment]..line[segment + 1]` holding the point.
    pub segment: usize,
    /// Parameter within that segment.
    pub t: T,
}

/// Projects `p` onto the polyline. Ties keep the earliest segment.
pub fn project_on_polyline<T: Scalar>(p: Point2<T>, line: &[Point2<T>]) -> PolylineProjection<T> {
    assert!(!line.is_empty(), "polyline must have at least one vertex");
    if line.len() == 1 {
        return PolylineProjection {
            point: line[0],
            distance: p.distance(line[0]),
            segment: 0,
            t: T::zero(),
        };
    }
    let mut best: Option<PolylineProjection<T>> = None;
    for (i, w) in line.windows(2).enumerate() {
        let (q, t) = closest_on_segment(p, w[0], w[1]);
        let d = p.distance(q);
        if best.is_none_or(|b| d < b.distance) {
            best = Some(PolylineProjection {
                point: q,
                distance: d,
                segment: i,
                t,
            });
        }
    }
    best.unwrap()
}

/// Point located `distance` meters along the polyline from its first vertex.
/// Distances past the end clamp to the last vertex.
pub fn point_along<T: Scalar>(line: &[Point2<T>], cumulative: &[T], distance: T) -> Point2<T> {
    debug_assert_eq!(line.len(), cumulative.len());
    if distance <= T::zero() {
        return line[0];
    }
    // first index whose cumulative length reaches `distance`
    let idx = cumulative.partition_point(|&c| c < distance);
    if idx >= line.len() {
        return *line.last().unwrap();
    }
    if idx == 0 {
        return line[0];
    }
    let seg = cumulative[idx] - cumulative[idx - 1];
    if seg <= T::zero() {
        return line[idx];
    }
    let t = (distance - cumulative[idx - 1]) / seg;
    line[idx - 1].lerp(line[idx], t)
}

/// Running sums of segment lengths, starting at zero.
pub fn cumulative_lengths<T: Scalar>(line: &[Point2<T>]) -> Vec<T> {
    let mut out = Vec::with_capacity(line.len());
    let mut acc = T::zero();
    for (i, p) in line.iter().enumerate() {
        if i > 0 {
            acc = acc + line[i - 1].distance(*p);
        }
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point2<f64> {
        Point2::new(x, y)
    }

    #[test]
    fn projection_hits_perpendicular_foot() {
        let line = [p(0.0, 0.0), p(10.0, 0.0)];
        let pr = project_on_polyline(p(3.0, 4.0), &line);
        assert_eq!(pr.point, p(3.0, 0.0));
        assert_eq!(pr.distance, 4.0);
    }

    #[test]
    fn projection_clamps_to_endpoints() {
        let line = [p(0.0, 0.0), p(10.0, 0.0), p(10.0, 10.0)];
        let pr = project_on_polyline(p(-3.0, -4.0), &line);
        assert_eq!(pr.point, p(0.0, 0.0));
        assert_eq!(pr.distance, 5.0);
        let pr = project_on_polyline(p(12.0, 5.0), &line);
        assert_eq!(pr.segment, 1);
        assert_eq!(pr.point, p(10.0, 5.0));
    }

    #[test]
    fn point_along_interpolates() {
        let line = [p(0.0, 0.0), p(3.0, 4.0), p(3.0, 10.0)];
        let cum = cumulative_lengths(&line);
        assert_eq!(cum, vec![0.0, 5.0, 11.0]);
        assert_eq!(point_along(&line, &cum, 0.0), p(0.0, 0.0));
        assert_eq!(point_along(&line, &cum, 5.0), p(3.0, 4.0));
        assert_eq!(point_along(&line, &cum, 8.0), p(3.0, 7.0));
        assert_eq!(point_along(&line, &cum, 50.0), p(3.0, 10.0));
    }
}
