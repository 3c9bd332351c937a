//! Minimal planar polygon support for planning-unit shapes.
//!
//! Shapes are multipolygons of rings in projected planar coordinates. Only
//! what unit merging and GeoJSON round-tripping need is implemented: area,
//! perimeter, collinear shared-boundary length and centroid.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use super::types::UnitId;
use crate::error::LoadError;

pub type Point = (f64, f64);

/// A polygon: exterior ring followed by optional holes. Rings are stored
/// without the closing duplicate point.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub rings: Vec<Vec<Point>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Shape {
    pub polygons: Vec<Polygon>,
}

fn ring_signed_area(ring: &[Point]) -> f64 {
    let n = ring.len();
    let mut acc = 0.0;
    for i in 0..n {
        let (x1, y1) = ring[i];
        let (x2, y2) = ring[(i + 1) % n];
        acc += x1 * y2 - x2 * y1;
    }
    acc / 2.0
}

fn ring_segments(ring: &[Point]) -> impl Iterator<Item = (Point, Point)> + '_ {
    let n = ring.len();
    (0..n).map(move |i| (ring[i], ring[(i + 1) % n]))
}

fn seg_len(a: Point, b: Point) -> f64 {
    (b.0 - a.0).hypot(b.1 - a.1)
}

impl Polygon {
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            rings: vec![vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)]],
        }
    }

    pub fn area(&self) -> f64 {
        let mut it = self.rings.iter();
        let outer = it.next().map(|r| ring_signed_area(r).abs()).unwrap_or(0.0);
        outer - it.map(|r| ring_signed_area(r).abs()).sum::<f64>()
    }

    fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.rings.iter().flat_map(|r| ring_segments(r))
    }
}

impl Shape {
    pub fn from_polygon(p: Polygon) -> Self {
        Self { polygons: vec![p] }
    }

    pub fn area(&self) -> f64 {
        self.polygons.iter().map(Polygon::area).sum()
    }

    /// Total boundary length, counting every ring segment once.
    pub fn perimeter(&self) -> f64 {
        self.segments().map(|(a, b)| seg_len(a, b)).sum()
    }

    fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.polygons.iter().flat_map(Polygon::segments)
    }

    /// Length of boundary shared with `other`: the summed overlap of
    /// collinear segment pairs.
    pub fn shared_boundary(&self, other: &Shape) -> f64 {
        let mut total = 0.0;
        for (a0, a1) in self.segments() {
            for (b0, b1) in other.segments() {
                total += collinear_overlap(a0, a1, b0, b1);
            }
        }
        total
    }

    /// Isoperimetric quotient `4*pi*A / P^2`; 1 for a disc.
    pub fn compactness(&self) -> f64 {
        isoperimetric(self.area(), self.perimeter())
    }

    pub fn centroid(&self) -> Option<Point> {
        let mut a_sum = 0.0;
        let (mut cx, mut cy) = (0.0, 0.0);
        for poly in &self.polygons {
            for (k, ring) in poly.rings.iter().enumerate() {
                let sign = if k == 0 { 1.0 } else { -1.0 };
                let a = ring_signed_area(ring);
                let orient = if a < 0.0 { -1.0 } else { 1.0 };
                let n = ring.len();
                for i in 0..n {
                    let (x1, y1) = ring[i];
                    let (x2, y2) = ring[(i + 1) % n];
                    let cross = (x1 * y2 - x2 * y1) * orient * sign;
                    cx += (x1 + x2) * cross;
                    cy += (y1 + y2) * cross;
                }
                a_sum += a.abs() * sign;
            }
        }
        if a_sum.abs() < f64::EPSILON {
            return None;
        }
        Some((cx / (6.0 * a_sum), cy / (6.0 * a_sum)))
    }

    /// Set union of two shapes that meet only along their boundaries.
    /// The parts are kept as separate polygons; area is additive.
    pub fn union_adjacent(&self, other: &Shape) -> Shape {
        let mut polygons = self.polygons.clone();
        polygons.extend(other.polygons.iter().cloned());
        Shape { polygons }
    }
}

pub fn isoperimetric(area: f64, perimeter: f64) -> f64 {
    if perimeter <= 0.0 {
        return 0.0;
    }
    4.0 * std::f64::consts::PI * area / (perimeter * perimeter)
}

fn collinear_overlap(a0: Point, a1: Point, b0: Point, b1: Point) -> f64 {
    const TOL: f64 = 1e-9;
    let len = seg_len(a0, a1);
    if len < TOL {
        return 0.0;
    }
    let (dx, dy) = ((a1.0 - a0.0) / len, (a1.1 - a0.1) / len);
    // perpendicular distance of b's endpoints from a's supporting line
    let dist = |p: Point| ((p.0 - a0.0) * dy - (p.1 - a0.1) * dx).abs();
    let scale = 1.0 + len;
    if dist(b0) > TOL * scale || dist(b1) > TOL * scale {
        return 0.0;
    }
    let proj = |p: Point| (p.0 - a0.0) * dx + (p.1 - a0.1) * dy;
    let (t0, t1) = (proj(b0), proj(b1));
    let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
    (hi.min(len) - lo.max(0.0)).max(0.0)
}

fn parse_ring(v: &Value) -> Option<Vec<Point>> {
    let mut pts: Vec<Point> = v
        .as_array()?
        .iter()
        .map(|p| {
            let c = p.as_array()?;
            Some((c.first()?.as_f64()?, c.get(1)?.as_f64()?))
        })
        .collect::<Option<_>>()?;
    if pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    Some(pts)
}

fn parse_polygon(v: &Value) -> Option<Polygon> {
    let rings = v
        .as_array()?
        .iter()
        .map(parse_ring)
        .collect::<Option<Vec<_>>>()?;
    Some(Polygon { rings })
}

fn shape_from_geometry(g: &Value) -> Option<Shape> {
    let coords = g.get("coordinates")?;
    match g.get("type")?.as_str()? {
        "Polygon" => Some(Shape::from_polygon(parse_polygon(coords)?)),
        "MultiPolygon" => Some(Shape {
            polygons: coords
                .as_array()?
                .iter()
                .map(parse_polygon)
                .collect::<Option<_>>()?,
        }),
        _ => None,
    }
}

fn ring_json(ring: &[Point]) -> Value {
    let mut pts: Vec<Value> = ring.iter().map(|&(x, y)| json!([x, y])).collect();
    if let Some(first) = ring.first() {
        pts.push(json!([first.0, first.1]));
    }
    Value::Array(pts)
}

pub fn shape_to_geometry(shape: &Shape) -> Value {
    let polys: Vec<Value> = shape
        .polygons
        .iter()
        .map(|p| Value::Array(p.rings.iter().map(|r| ring_json(r)).collect()))
        .collect();
    if polys.len() == 1 {
        json!({"type": "Polygon", "coordinates": polys[0]})
    } else {
        json!({"type": "MultiPolygon", "coordinates": polys})
    }
}

/// Reads a GeoJSON FeatureCollection whose features carry a numeric
/// `unit_id` property.
pub fn read_geojson(path: &Path) -> Result<BTreeMap<UnitId, Shape>, LoadError> {
    let file = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| LoadError::Io {
        file: file.clone(),
        source: e,
    })?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| LoadError::Format {
        file: file.clone(),
        message: e.to_string(),
    })?;
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| LoadError::Format {
            file: file.clone(),
            message: "expected a FeatureCollection".into(),
        })?;
    let mut out = BTreeMap::new();
    for (i, f) in features.iter().enumerate() {
        let bad = |field: &str, message: &str| LoadError::Field {
            file: file.clone(),
            row: i + 1,
            field: field.to_string(),
            message: message.to_string(),
        };
        let id = f
            .get("properties")
            .and_then(|p| p.get("unit_id"))
            .and_then(Value::as_u64)
            .ok_or_else(|| bad("unit_id", "missing or non-integer"))?;
        let shape = f
            .get("geometry")
            .and_then(shape_from_geometry)
            .ok_or_else(|| bad("geometry", "expected Polygon or MultiPolygon"))?;
        let id = u32::try_from(id).map_err(|_| bad("unit_id", "out of range"))?;
        out.insert(UnitId(id), shape);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangle_measures() {
        let s = Shape::from_polygon(Polygon::rect(0.0, 0.0, 2.0, 1.0));
        assert!((s.area() - 2.0).abs() < 1e-12);
        assert!((s.perimeter() - 6.0).abs() < 1e-12);
        assert_eq!(s.centroid(), Some((1.0, 0.5)));
        let sq = Shape::from_polygon(Polygon::rect(0.0, 0.0, 1.0, 1.0));
        assert!((sq.compactness() - std::f64::consts::PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn shared_boundary_partial_overlap() {
        let a = Shape::from_polygon(Polygon::rect(0.0, 0.0, 1.0, 1.0));
        let b = Shape::from_polygon(Polygon::rect(1.0, 0.5, 3.0, 2.5));
        assert!((a.shared_boundary(&b) - 0.5).abs() < 1e-12);
        let c = Shape::from_polygon(Polygon::rect(5.0, 5.0, 6.0, 6.0));
        assert_eq!(a.shared_boundary(&c), 0.0);
    }

    #[test]
    fn geometry_json_roundtrip() {
        let s = Shape::from_polygon(Polygon::rect(0.0, 0.0, 1.0, 2.0));
        let g = shape_to_geometry(&s);
        assert_eq!(shape_from_geometry(&g), Some(s));
    }
}
