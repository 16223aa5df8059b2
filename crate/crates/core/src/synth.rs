//! Deterministic synthetic urban scenes.
//!
//! Every object samples its own footprint, so stacked objects (a roof above
//! the ground plane, canopy layers above each other) produce points that
//! share `(x, y)` locations with different altitudes. Building walls are
//! optional, which reproduces the "floating roof" look of photogrammetry
//! clouds where the wall under the eaves was never reconstructed.
//!
//! Altitudes are an object-defined constant plus uniform jitter of at most
//! [`Z_JITTER`] meters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classes::{self, is_class};
use crate::io::Point;
use crate::{Error, Result};

/// Maximum altitude jitter added to every generated point, in meters.
pub const Z_JITTER: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, width: f64, height: f64) -> Self {
        Rect {
            x0,
            y0,
            width,
            height,
        }
    }

    fn x1(&self) -> f64 {
        self.x0 + self.width
    }

    fn y1(&self) -> f64 {
        self.y0 + self.height
    }

    fn intersect(&self, other: &Rect) -> Option<Rect> {
        let x0 = self.x0.max(other.x0);
        let y0 = self.y0.max(other.y0);
        let x1 = self.x1().min(other.x1());
        let y1 = self.y1().min(other.y1());
        (x1 > x0 && y1 > y0).then(|| Rect::new(x0, y0, x1 - x0, y1 - y0))
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x < self.x1() && y >= self.y0 && y < self.y1()
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

/// How `(x, y)` positions are drawn inside a footprint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// `round(density * area)` positions drawn uniformly.
    #[default]
    Uniform,
    /// One position per cell of a square lattice with spacing
    /// `1 / sqrt(density)`, anchored at the scene origin. All objects share
    /// the lattice, so stacked objects stack exactly.
    Lattice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SceneObject {
    /// Flat plane at z = 0 over the whole extent.
    Ground { class_id: u8 },
    /// Flat patch at altitude `z` (roads, parking, water, footpaths).
    Patch { rect: Rect, z: f64, class_id: u8 },
    /// Roof at `roof_height`; walls are sampled on the footprint perimeter
    /// only when `wall_class` is set.
    Building {
        footprint: Rect,
        roof_height: f64,
        class_id: u8,
        wall_class: Option<u8>,
    },
    /// Vertical column of `layers` evenly spaced discs up to `height`.
    Column {
        center: (f64, f64),
        radius: f64,
        height: f64,
        layers: u32,
        class_id: u8,
    },
    /// Low box top surface.
    Car {
        footprint: Rect,
        height: f64,
        class_id: u8,
    },
}

impl SceneObject {
    fn class_ids(&self) -> Vec<u8> {
        match self {
            SceneObject::Ground { class_id }
            | SceneObject::Patch { class_id, .. }
            | SceneObject::Column { class_id, .. }
            | SceneObject::Car { class_id, .. } => vec![*class_id],
            SceneObject::Building {
                class_id,
                wall_class,
                ..
            } => std::iter::once(*class_id).chain(*wall_class).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    /// `(width_m, height_m)`; the scene covers `[0, width) x [0, height)`.
    pub extent: (f64, f64),
    /// Points per square meter (per layer for columns, per wall square
    /// meter for walls).
    pub density: f64,
    pub objects: Vec<SceneObject>,
    pub rng_seed: u64,
    #[serde(default)]
    pub sampling: Sampling,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let (w, h) = self.extent;
        if !(w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0) {
            return Err(Error::Scene(format!("degenerate extent {w} x {h}")));
        }
        if !(self.density.is_finite() && self.density > 0.0) {
            return Err(Error::Scene(format!("density must be positive, got {}", self.density)));
        }
        if self.objects.is_empty() {
            return Err(Error::Scene("empty object list".into()));
        }
        for (i, obj) in self.objects.iter().enumerate() {
            if let Some(c) = obj.class_ids().into_iter().find(|&c| !is_class(c)) {
                return Err(Error::Scene(format!("object {i}: class id {c} outside 0..=12")));
            }
            let ok = match obj {
                SceneObject::Ground { .. } => true,
                SceneObject::Patch { rect, .. }
                | SceneObject::Building {
                    footprint: rect, ..
                }
                | SceneObject::Car {
                    footprint: rect, ..
                } => rect.width > 0.0 && rect.height > 0.0,
                SceneObject::Column { radius, layers, .. } => *radius > 0.0 && *layers > 0,
            };
            if !ok {
                return Err(Error::Scene(format!("object {i}: degenerate geometry")));
            }
        }
        Ok(())
    }

    /// Flat ground plane only.
    pub fn flat_ground(width: f64, height: f64, density: f64, rng_seed: u64) -> Self {
        SceneSpec {
            extent: (width, height),
            density,
            objects: vec![SceneObject::Ground {
                class_id: classes::GROUND,
            }],
            rng_seed,
            sampling: Sampling::Uniform,
        }
    }

    /// Single-layer scene on the lattice: strips of ground, road, parking,
    /// footpath and water tiling the extent with no stacking. With a pixel
    /// size of at most two thirds of the lattice spacing, every pixel holds at
    /// most one point even when a coordinate rounds across a pixel edge.
    pub fn single_layer(width: f64, height: f64, density: f64, rng_seed: u64) -> Self {
        let strips = [
            classes::GROUND,
            classes::TRAFFIC_ROAD,
            classes::PARKING,
            classes::FOOTPATH,
            classes::WATER,
        ];
        let strip = width / strips.len() as f64;
        let objects = strips
            .iter()
            .enumerate()
            .map(|(i, &class_id)| SceneObject::Patch {
                rect: Rect::new(i as f64 * strip, 0.0, strip, height),
                z: i as f64 * 0.1,
                class_id,
            })
            .collect();
        SceneSpec {
            extent: (width, height),
            density,
            objects,
            rng_seed,
            sampling: Sampling::Lattice,
        }
    }

    /// Ground plane with one roofed building (no walls) over `roof`.
    pub fn roof_over_ground(
        width: f64,
        height: f64,
        roof: Rect,
        roof_height: f64,
        density: f64,
        rng_seed: u64,
    ) -> Self {
        SceneSpec {
            extent: (width, height),
            density,
            objects: vec![
                SceneObject::Ground {
                    class_id: classes::GROUND,
                },
                SceneObject::Building {
                    footprint: roof,
                    roof_height,
                    class_id: classes::BUILDING,
                    wall_class: None,
                },
            ],
            rng_seed,
            sampling: Sampling::Lattice,
        }
    }

    /// Randomized city block: ground, roads, buildings (some without walls),
    /// trees and cars, all placed from `rng_seed`.
    pub fn urban(width: f64, height: f64, density: f64, rng_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed ^ 0x5eed_c17e);
        let mut objects = vec![SceneObject::Ground {
            class_id: classes::GROUND,
        }];
        let road_w = (width * 0.08).max(1.0);
        objects.push(SceneObject::Patch {
            rect: Rect::new(0.0, height * 0.5 - road_w * 0.5, width, road_w),
            z: 0.05,
            class_id: classes::TRAFFIC_ROAD,
        });
        let area = width * height;
        let n_buildings = ((area / 400.0).ceil() as usize).clamp(1, 12);
        for _ in 0..n_buildings {
            let bw = rng.random_range(0.15..0.35) * width;
            let bh = rng.random_range(0.15..0.35) * height;
            let x0 = rng.random_range(0.0..(width - bw));
            let y0 = rng.random_range(0.0..(height - bh));
            objects.push(SceneObject::Building {
                footprint: Rect::new(x0, y0, bw, bh),
                roof_height: rng.random_range(4.0..30.0),
                class_id: classes::BUILDING,
                wall_class: rng.random_bool(0.5).then_some(classes::WALL),
            });
        }
        let n_trees = ((area / 150.0).ceil() as usize).clamp(1, 24);
        for _ in 0..n_trees {
            let radius = rng.random_range(0.8..3.0);
            objects.push(SceneObject::Column {
                center: (rng.random_range(0.0..width), rng.random_range(0.0..height)),
                radius,
                height: rng.random_range(3.0..12.0),
                layers: rng.random_range(2..5),
                class_id: classes::VEGETATION,
            });
        }
        let n_cars = ((area / 250.0).ceil() as usize).clamp(1, 16);
        for _ in 0..n_cars {
            let (cw, ch) = if rng.random_bool(0.5) { (4.5, 1.8) } else { (1.8, 4.5) };
            objects.push(SceneObject::Car {
                footprint: Rect::new(
                    rng.random_range(0.0..(width - cw).max(0.1)),
                    rng.random_range(0.0..(height - ch).max(0.1)),
                    cw,
                    ch,
                ),
                height: 1.5,
                class_id: classes::CAR,
            });
        }
        SceneSpec {
            extent: (width, height),
            density,
            objects,
            rng_seed,
            sampling: Sampling::Uniform,
        }
    }
}

fn base_color(class_id: u8) -> [u8; 3] {
    match class_id {
        0 => [120, 110, 90],
        1 => [40, 130, 50],
        2 => [180, 80, 70],
        3 => [200, 190, 170],
        4 => [150, 150, 160],
        5 => [90, 90, 100],
        6 => [110, 70, 40],
        7 => [60, 60, 60],
        8 => [220, 200, 40],
        9 => [30, 60, 200],
        10 => [170, 160, 150],
        11 => [230, 30, 160],
        _ => [20, 80, 160],
    }
}

struct Emitter<'a> {
    rng: ChaCha8Rng,
    out: &'a mut Vec<Point>,
}

impl Emitter<'_> {
    fn emit(&mut self, x: f64, y: f64, z: f64, class_id: u8) {
        let z = z + self.rng.random_range(0.0..=Z_JITTER);
        let base = base_color(class_id);
        let mut rgb = [0u8; 3];
        for (c, b) in rgb.iter_mut().zip(base) {
            let noise: i16 = self.rng.random_range(-12..=12);
            *c = (b as i16 + noise).clamp(0, 255) as u8;
        }
        let index = self.out.len() as u64;
        self.out.push(Point::new(x, y, z, rgb, class_id, index));
    }
}

/// Lattice coordinate of cell `i`.
#[inline]
fn lattice(i: i64, spacing: f64) -> f64 {
    (i as f64 + 0.5) * spacing
}

/// Lattice cell indices whose centers fall in `[lo, hi)`.
fn lattice_range(lo: f64, hi: f64, spacing: f64) -> std::ops::Range<i64> {
    let mut a = (lo / spacing - 0.5).ceil() as i64;
    while lattice(a, spacing) < lo {
        a += 1;
    }
    while a > i64::MIN && lattice(a - 1, spacing) >= lo {
        a -= 1;
    }
    let mut b = (hi / spacing - 0.5).ceil() as i64;
    while lattice(b, spacing) < hi {
        b += 1;
    }
    while lattice(b - 1, spacing) >= hi {
        b -= 1;
    }
    a..b.max(a)
}

fn fill_rect(e: &mut Emitter, spec: &SceneSpec, rect: &Rect, z: f64, class_id: u8) {
    let scene = Rect::new(0.0, 0.0, spec.extent.0, spec.extent.1);
    let Some(r) = rect.intersect(&scene) else {
        return;
    };
    match spec.sampling {
        Sampling::Uniform => {
            let n = (spec.density * r.area()).round() as u64;
            for _ in 0..n {
                let x = r.x0 + e.rng.random::<f64>() * r.width;
                let y = r.y0 + e.rng.random::<f64>() * r.height;
                e.emit(x, y, z, class_id);
            }
        }
        Sampling::Lattice => {
            let s = 1.0 / spec.density.sqrt();
            for j in lattice_range(r.y0, r.y1(), s) {
                for i in lattice_range(r.x0, r.x1(), s) {
                    e.emit(lattice(i, s), lattice(j, s), z, class_id);
                }
            }
        }
    }
}

fn fill_disc(e: &mut Emitter, spec: &SceneSpec, center: (f64, f64), radius: f64, z: f64, class_id: u8) {
    let scene = Rect::new(0.0, 0.0, spec.extent.0, spec.extent.1);
    let (cx, cy) = center;
    match spec.sampling {
        Sampling::Uniform => {
            let n = (spec.density * std::f64::consts::PI * radius * radius).round() as u64;
            let mut emitted = 0;
            while emitted < n {
                let x = cx + (e.rng.random::<f64>() * 2.0 - 1.0) * radius;
                let y = cy + (e.rng.random::<f64>() * 2.0 - 1.0) * radius;
                if (x - cx).powi(2) + (y - cy).powi(2) > radius * radius {
                    continue;
                }
                emitted += 1;
                if scene.contains(x, y) {
                    e.emit(x, y, z, class_id);
                }
            }
        }
        Sampling::Lattice => {
            let s = 1.0 / spec.density.sqrt();
            for j in lattice_range(cy - radius, cy + radius, s) {
                for i in lattice_range(cx - radius, cx + radius, s) {
                    let (x, y) = (lattice(i, s), lattice(j, s));
                    if (x - cx).powi(2) + (y - cy).powi(2) <= radius * radius && scene.contains(x, y) {
                        e.emit(x, y, z, class_id);
                    }
                }
            }
        }
    }
}

fn fill_walls(e: &mut Emitter, spec: &SceneSpec, fp: &Rect, top: f64, class_id: u8) {
    let scene = Rect::new(0.0, 0.0, spec.extent.0, spec.extent.1);
    let perimeter = 2.0 * (fp.width + fp.height);
    // walk the perimeter counter-clockwise from (x0, y0)
    let at = |t: f64| -> (f64, f64) {
        if t < fp.width {
            (fp.x0 + t, fp.y0)
        } else if t < fp.width + fp.height {
            (fp.x1(), fp.y0 + (t - fp.width))
        } else if t < 2.0 * fp.width + fp.height {
            (fp.x1() - (t - fp.width - fp.height), fp.y1())
        } else {
            (fp.x0, fp.y1() - (t - 2.0 * fp.width - fp.height))
        }
    };
    match spec.sampling {
        Sampling::Uniform => {
            let n = (spec.density * perimeter * top).round() as u64;
            for _ in 0..n {
                let (x, y) = at(e.rng.random::<f64>() * perimeter);
                let z = e.rng.random::<f64>() * top;
                if scene.contains(x, y) {
                    e.emit(x, y, z, class_id);
                }
            }
        }
        Sampling::Lattice => {
            let s = 1.0 / spec.density.sqrt();
            for k in lattice_range(0.0, top, s) {
                for t in lattice_range(0.0, perimeter, s) {
                    let (x, y) = at(lattice(t, s));
                    if scene.contains(x, y) {
                        e.emit(x, y, lattice(k, s), class_id);
                    }
                }
            }
        }
    }
}

/// Generates the cloud described by `spec`. Points are emitted object by
/// object in list order; `index` equals the position in the returned vector.
pub fn generate_synthetic_city(spec: &SceneSpec) -> Result<Vec<Point>> {
    spec.validate()?;
    let mut out = Vec::new();
    let mut e = Emitter {
        rng: ChaCha8Rng::seed_from_u64(spec.rng_seed),
        out: &mut out,
    };
    let scene = Rect::new(0.0, 0.0, spec.extent.0, spec.extent.1);
    for obj in &spec.objects {
        match obj {
            SceneObject::Ground { class_id } => fill_rect(&mut e, spec, &scene, 0.0, *class_id),
            SceneObject::Patch { rect, z, class_id } => fill_rect(&mut e, spec, rect, *z, *class_id),
            SceneObject::Building {
                footprint,
                roof_height,
                class_id,
                wall_class,
            } => {
                fill_rect(&mut e, spec, footprint, *roof_height, *class_id);
                if let Some(wall) = wall_class {
                    fill_walls(&mut e, spec, footprint, *roof_height, *wall);
                }
            }
            SceneObject::Column {
                center,
                radius,
                height,
                layers,
                class_id,
            } => {
                for k in 0..*layers {
                    let z = height * (k + 1) as f64 / *layers as f64;
                    fill_disc(&mut e, spec, *center, *radius, z, *class_id);
                }
            }
            SceneObject::Car {
                footprint,
                height,
                class_id,
            } => fill_rect(&mut e, spec, footprint, *height, *class_id),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn flat_ground_count_and_labels() {
        let pts = generate_synthetic_city(&SceneSpec::flat_ground(10.0, 10.0, 10.0, 1)).unwrap();
        assert_eq!(pts.len(), 1000);
        assert!(pts.iter().all(|p| p.label == 0));
        assert!(pts.iter().all(|p| p.z >= 0.0 && p.z <= Z_JITTER));
        assert!(pts.iter().enumerate().all(|(i, p)| p.index == i as u64));
    }

    #[test]
    fn deterministic_for_seed() {
        let spec = SceneSpec::urban(60.0, 40.0, 5.0, 42);
        let a = generate_synthetic_city(&spec).unwrap();
        let b = generate_synthetic_city(&spec).unwrap();
        assert_eq!(a.len(), b.len());
        assert!(a.iter().zip(&b).all(|(p, q)| p.x.to_bits() == q.x.to_bits()
            && p.y.to_bits() == q.y.to_bits()
            && p.z.to_bits() == q.z.to_bits()
            && p.rgb() == q.rgb()
            && p.label == q.label));
        let c = generate_synthetic_city(&SceneSpec::urban(60.0, 40.0, 5.0, 43)).unwrap();
        assert!(!(a.len() == c.len() && a.iter().zip(&c).all(|(p, q)| p == q)));
    }

    #[test]
    fn uniform_count_within_one_percent() {
        for &(w, h, d) in &[(100.0, 100.0, 3.0), (37.5, 12.25, 17.0), (25.0, 25.0, 160.0)] {
            let pts = generate_synthetic_city(&SceneSpec::flat_ground(w, h, d, 9)).unwrap();
            let expected = w * h * d;
            assert!((pts.len() as f64 - expected).abs() <= 0.01 * expected);
        }
    }

    #[test]
    fn lattice_count_within_one_percent() {
        let spec = SceneSpec {
            sampling: Sampling::Lattice,
            ..SceneSpec::flat_ground(50.0, 40.0, 10.0, 3)
        };
        let pts = generate_synthetic_city(&spec).unwrap();
        let expected = 50.0 * 40.0 * 10.0;
        assert!((pts.len() as f64 - expected).abs() <= 0.01 * expected, "{}", pts.len());
    }

    #[test]
    fn roof_points_stack_over_ground() {
        let spec = SceneSpec::roof_over_ground(20.0, 20.0, Rect::new(5.0, 5.0, 10.0, 10.0), 5.0, 10.0, 7);
        let pts = generate_synthetic_city(&spec).unwrap();
        let mut by_xy: HashMap<(u64, u64), Vec<&Point>> = HashMap::new();
        for p in &pts {
            by_xy.entry((p.x.to_bits(), p.y.to_bits())).or_default().push(p);
        }
        let roofs: Vec<_> = pts.iter().filter(|p| p.label == classes::BUILDING).collect();
        assert!(!roofs.is_empty());
        for r in roofs {
            let stack = &by_xy[&(r.x.to_bits(), r.y.to_bits())];
            assert_eq!(stack.len(), 2);
            assert!(stack.iter().any(|p| p.label == classes::GROUND && p.z < r.z));
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = SceneSpec::flat_ground(0.0, 10.0, 1.0, 0);
        assert!(generate_synthetic_city(&spec).is_err());
        spec.extent = (10.0, 10.0);
        spec.objects.clear();
        assert!(generate_synthetic_city(&spec).is_err());
        spec.objects.push(SceneObject::Ground { class_id: 13 });
        assert!(generate_synthetic_city(&spec).is_err());
        spec.objects[0] = SceneObject::Ground { class_id: 0 };
        spec.density = 0.0;
        assert!(generate_synthetic_city(&spec).is_err());
    }

    #[test]
    fn walls_only_when_requested() {
        let mut spec = SceneSpec::urban(40.0, 40.0, 4.0, 5);
        let has_walls = spec
            .objects
            .iter()
            .any(|o| matches!(o, SceneObject::Building { wall_class: Some(_), .. }));
        let pts = generate_synthetic_city(&spec).unwrap();
        assert_eq!(pts.iter().any(|p| p.label == classes::WALL), has_walls);
        for o in spec.objects.iter_mut() {
            if let SceneObject::Building { wall_class, .. } = o {
                *wall_class = None;
            }
        }
        let pts = generate_synthetic_city(&spec).unwrap();
        assert!(!pts.iter().any(|p| p.label == classes::WALL));
    }

    #[test]
    fn scene_json_round_trip() {
        let spec = SceneSpec::urban(30.0, 30.0, 2.0, 11);
        let text = serde_json::to_string(&spec).unwrap();
        let back: SceneSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
    }
}
