mod common;

use bevgrid::io::Point;
use bevgrid::projection::{project_points, Layout, ProjectOptions, ProjectionConfig, NO_WINNER};
use bevgrid::synth::{generate_synthetic_city, SceneSpec};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `(window, px, py) -> winner point index` from the library projection.
fn library_winners(points: &[Point], cfg: &ProjectionConfig) -> Vec<((usize, u32, u32), u64)> {
    let proj = project_points(points, cfg, &ProjectOptions::default()).unwrap();
    let mut out = Vec::new();
    for (id, w) in proj.windows.iter().enumerate() {
        assert_eq!(w.meta.window_id as usize, id);
        let r = &w.raster;
        for py in 0..r.height {
            for px in 0..r.width {
                let o = r.offset(px, py);
                assert_eq!(r.mask[o], r.winner_index[o] != NO_WINNER);
                if r.mask[o] {
                    out.push(((id, px, py), r.winner_index[o]));
                }
            }
        }
    }
    out.sort();
    out
}

fn assert_same(a: &[((usize, u32, u32), u64)], b: &[((usize, u32, u32), u64)], what: &str) {
    if let Some(i) = (0..a.len().min(b.len())).find(|&i| a[i] != b[i]) {
        panic!("{what}: first difference at #{i}: library {:?}, reference {:?}", a[i], b[i]);
    }
    assert_eq!(a.len(), b.len(), "{what}: pixel counts differ");
}

fn reference_winners(points: &[Point], cfg: &ProjectionConfig) -> Vec<((usize, u32, u32), u64)> {
    common::pixel_winners(points, cfg)
        .into_iter()
        .map(|(k, i)| (k, points[i].index))
        .collect()
}

#[test]
fn window_grid_matches_reference() {
    for seed in 0..6 {
        let (_, pts, cfg) = common::random_case(seed, 30_000);
        let reference = common::RefLayout::new(&pts, &cfg);
        let proj = project_points(&pts, &cfg, &ProjectOptions::default()).unwrap();
        assert_eq!(proj.windows.len(), reference.windows.len(), "seed {seed}");
        for (w, r) in proj.windows.iter().zip(&reference.windows) {
            assert_eq!((w.meta.x_s, w.meta.y_s), (r.x_s, r.y_s));
            assert_eq!((w.meta.clamp_x, w.meta.clamp_y), (r.clamp_x, r.clamp_y));
        }
    }
}

#[test]
fn winners_match_brute_force_on_large_scene() {
    let spec = SceneSpec::urban(60.0, 60.0, 14.0, 77);
    let pts = generate_synthetic_city(&spec).unwrap();
    assert!(pts.len() >= 100_000, "{} points", pts.len());
    let cfg = ProjectionConfig {
        g_scale: 0.1,
        g_size: 25.0,
        g_step: 20.0,
        cell_side: 40.0,
        ..Default::default()
    };
    assert_same(&library_winners(&pts, &cfg), &reference_winners(&pts, &cfg), "large scene");
}

#[test]
fn winners_match_brute_force_on_random_cases() {
    for seed in 100..108 {
        let (_, pts, cfg) = common::random_case(seed, 40_000);
        assert_same(&library_winners(&pts, &cfg), &reference_winners(&pts, &cfg), &format!("seed {seed}"));
    }
}

#[test]
fn point_order_does_not_matter() {
    let (_, pts, cfg) = common::random_case(5, 30_000);
    let mut shuffled = pts.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    let a = project_points(&pts, &cfg, &ProjectOptions::default()).unwrap();
    let b = project_points(&shuffled, &cfg, &ProjectOptions::default()).unwrap();
    for (x, y) in a.windows.iter().zip(&b.windows) {
        assert_eq!(x.raster, y.raster);
        assert_eq!(x.meta, y.meta);
    }
}

#[test]
fn every_point_has_exactly_one_owner_when_windows_tile() {
    let (_, pts, mut cfg) = common::random_case(8, 30_000);
    cfg.g_step = cfg.g_size;
    let layout = Layout::new(bevgrid::projection::Bounds::of(&pts).unwrap(), &cfg).unwrap();
    let mut buf = Vec::new();
    for p in &pts {
        layout.windows_containing(p.x, p.y, &mut buf);
        assert_eq!(buf.len(), 1, "point {} at ({}, {})", p.index, p.x, p.y);
    }
    let proj = project_points(&pts, &cfg, &ProjectOptions::default()).unwrap();
    let total: u64 = proj.windows.iter().map(|w| w.meta.point_count).sum();
    assert_eq!(total, pts.len() as u64);
}

#[test]
fn translation_keeps_rasters() {
    // power-of-two shifts keep every coordinate difference exact
    let (_, pts, cfg) = common::random_case(12, 20_000);
    let moved: Vec<Point> = pts
        .iter()
        .map(|p| Point { x: p.x + 1024.0, y: p.y - 512.0, ..*p })
        .collect();
    let a = project_points(&pts, &cfg, &ProjectOptions::default()).unwrap();
    let b = project_points(&moved, &cfg, &ProjectOptions::default()).unwrap();
    assert_eq!(a.windows.len(), b.windows.len());
    let same = a
        .windows
        .iter()
        .zip(&b.windows)
        .filter(|(x, y)| x.raster == y.raster)
        .count();
    // rounding of shifted coordinates can move a handful of edge points
    assert!(same * 10 >= a.windows.len() * 9, "{same} of {}", a.windows.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Each pixel's recorded altitude is the maximum z of the points that
    /// landed in it, and counts add up.
    #[test]
    fn winner_is_maximal(seed in any::<u64>()) {
        let (_, pts, cfg) = common::random_case(seed, 8_000);
        let proj = project_points(&pts, &cfg, &ProjectOptions::default()).unwrap();
        let reference = common::RefLayout::new(&pts, &cfg);
        let mut max_z = std::collections::BTreeMap::new();
        for p in &pts {
            for k in reference.containing(p.x, p.y) {
                let e = max_z.entry(k).or_insert(f64::NEG_INFINITY);
                if p.z > *e { *e = p.z; }
            }
        }
        for (id, w) in proj.windows.iter().enumerate() {
            for py in 0..w.raster.height {
                for px in 0..w.raster.width {
                    let o = w.raster.offset(px, py);
                    match max_z.get(&(id, px, py)) {
                        Some(&z) => prop_assert_eq!(w.raster.alt[o], z),
                        None => prop_assert!(!w.raster.mask[o]),
                    }
                }
            }
        }
    }
}
