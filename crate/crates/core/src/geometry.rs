//! Hexagonal cell layout on a torus and random user placement.
//!
//! Cells are flat-topped hexagons of circumradius `R`. A cluster of
//! `L = 1, 7, 19` cells (a hexagonal disk of 0, 1 or 2 rings) is wrapped with
//! the rhombic super-lattice spanned by `T1 = (n+1) a1 + n a2` and `T1`
//! rotated by 60°, where `a1`, `a2` are the center offsets of two adjacent
//! neighbors. Distances and angles always use the nearest wrapped image.
//!
//! In directional mode the base stations sit on the corners at 60°, 180° and
//! 300° of every cell. That corner class is closed under the tiling: every
//! such vertex is the 60°, 180° or 300° corner of each of the three cells
//! meeting there, so one physical site hosts three co-located arrays, each
//! dedicated to one of the cells.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{AntennaMode, NetworkConfig};
use crate::error::{Error, Result};

/// A point or displacement in the plane, in km.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn polar(r: f64, angle: f64) -> Self {
        Self::new(r * angle.cos(), r * angle.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn rotate(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

/// Corner angles hosting base stations, as multiples of 60°.
pub const BASE_STATION_CORNERS: [usize; 3] = [1, 3, 5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayDescriptor {
    pub id: usize,
    pub serving_cell: usize,
    pub position: Point,
    /// Unit vector; `None` for an omnidirectional array.
    pub boresight: Option<Point>,
    pub elements: f64,
    /// Forward-link budget, watts.
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellLayout {
    pub mode: AntennaMode,
    pub cell_radius_km: f64,
    pub cell_centers: Vec<Point>,
    /// Super-lattice vectors realizing the torus, the zero vector first.
    pub wrap_translations: Vec<Point>,
    /// Generators `(T1, T2)` of the super-lattice; `None` without wrap.
    pub wrap_basis: Option<(Point, Point)>,
    /// Arrays grouped by cell: array `a` serves cell `a / arrays_per_cell`.
    pub arrays: Vec<ArrayDescriptor>,
    pub arrays_per_cell: usize,
}

/// Rings of cells around the central cell for a supported cluster size.
fn cluster_rings(cells: usize) -> Result<usize> {
    match cells {
        1 => Ok(0),
        7 => Ok(1),
        19 => Ok(2),
        other => Err(Error::UnsupportedClusterSize(other)),
    }
}

/// Axial coordinates of a hexagonal disk, center first, then ring by ring.
fn hex_disk(rings: usize) -> Vec<(i64, i64)> {
    const DIRS: [(i64, i64); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];
    let mut out = vec![(0, 0)];
    for n in 1..=rings as i64 {
        // start at n steps along direction 4, walk each side
        let (mut q, mut r) = (DIRS[4].0 * n, DIRS[4].1 * n);
        for dir in DIRS {
            for _ in 0..n {
                out.push((q, r));
                q += dir.0;
                r += dir.1;
            }
        }
    }
    out
}

/// Center offsets of two adjacent neighbors (30° and 90° directions).
fn neighbor_basis(radius: f64) -> (Point, Point) {
    let s3 = 3f64.sqrt();
    (Point::new(1.5 * radius, 0.5 * s3 * radius), Point::new(0.0, s3 * radius))
}

pub fn build_layout(config: &NetworkConfig) -> Result<CellLayout> {
    config.validate()?;
    let rings = cluster_rings(config.cells)?;
    let radius = config.cell_radius_km;
    let (a1, a2) = neighbor_basis(radius);

    let cell_centers: Vec<Point> = hex_disk(rings).into_iter().map(|(q, r)| a1 * q as f64 + a2 * r as f64).collect();

    let mut wrap_basis = None;
    let wrap_translations = if rings == 0 {
        vec![Point::default()]
    } else {
        let n = rings as f64;
        let t1 = a1 * (n + 1.0) + a2 * n;
        let t2 = t1.rotate(PI / 3.0);
        wrap_basis = Some((t1, t2));
        let mut ts = vec![Point::default()];
        for m in -2i32..=2 {
            for k in -2i32..=2 {
                if m != 0 || k != 0 {
                    ts.push(t1 * m as f64 + t2 * k as f64);
                }
            }
        }
        ts
    };

    let apc = config.arrays_per_cell();
    let mut arrays = Vec::with_capacity(config.cells * apc);
    for (cell, &center) in cell_centers.iter().enumerate() {
        match config.mode {
            AntennaMode::Directional => {
                for corner in BASE_STATION_CORNERS {
                    let angle = corner as f64 * PI / 3.0;
                    let position = center + Point::polar(radius, angle);
                    arrays.push(ArrayDescriptor {
                        id: arrays.len(),
                        serving_cell: cell,
                        position,
                        boresight: Some(Point::polar(1.0, angle + PI)),
                        elements: config.elements_per_array(),
                        budget: config.array_budget(),
                    });
                }
            }
            AntennaMode::Omni => arrays.push(ArrayDescriptor {
                id: arrays.len(),
                serving_cell: cell,
                position: center,
                boresight: None,
                elements: config.elements_per_array(),
                budget: config.array_budget(),
            }),
        }
    }

    Ok(CellLayout {
        mode: config.mode,
        cell_radius_km: radius,
        cell_centers,
        wrap_translations,
        wrap_basis,
        arrays,
        arrays_per_cell: apc,
    })
}

impl CellLayout {
    pub fn num_cells(&self) -> usize {
        self.cell_centers.len()
    }

    /// Arrays serving `cell`.
    pub fn cell_arrays(&self, cell: usize) -> std::ops::Range<usize> {
        cell * self.arrays_per_cell..(cell + 1) * self.arrays_per_cell
    }

    /// Displacement from `from` to the nearest wrapped image of `to`.
    pub fn wrapped_offset(&self, from: Point, to: Point) -> Point {
        let mut direct = to - from;
        if let Some((t1, t2)) = self.wrap_basis {
            // reduce onto the nearest super-lattice point so that the image
            // search below covers arbitrary inputs
            let det = t1.x * t2.y - t1.y * t2.x;
            let c1 = ((direct.x * t2.y - direct.y * t2.x) / det).round();
            let c2 = ((t1.x * direct.y - t1.y * direct.x) / det).round();
            direct = direct - t1 * c1 - t2 * c2;
        }
        let mut best = direct;
        let mut best_d = direct.dot(direct);
        for &t in &self.wrap_translations[1..] {
            let v = direct + t;
            let d = v.dot(v);
            if d < best_d {
                best = v;
                best_d = d;
            }
        }
        best
    }

    pub fn wrapped_distance(&self, p: Point, q: Point) -> f64 {
        self.wrapped_offset(p, q).norm()
    }

    /// Whether `p` lies in the hexagon of `cell`, up to wrap.
    pub fn contains(&self, cell: usize, p: Point) -> bool {
        let d = self.wrapped_offset(self.cell_centers[cell], p);
        in_hexagon(d, self.cell_radius_km)
    }

    /// Cells whose centers are one hop away under the wrap metric.
    pub fn neighbors(&self, cell: usize) -> Vec<usize> {
        let hop = 3f64.sqrt() * self.cell_radius_km;
        let c = self.cell_centers[cell];
        (0..self.num_cells())
            .filter(|&o| o != cell)
            .filter(|&o| (self.wrapped_distance(c, self.cell_centers[o]) - hop).abs() < 1e-6 * hop)
            .collect()
    }
}

/// Flat-topped hexagon test for an offset from the center.
fn in_hexagon(d: Point, radius: f64) -> bool {
    let s3 = 3f64.sqrt();
    let (x, y) = (d.x.abs(), d.y.abs());
    y <= 0.5 * s3 * radius * (1.0 + 1e-12) && s3 * x + y <= s3 * radius * (1.0 + 1e-12)
}

pub fn wrapped_distance(p: Point, q: Point, layout: &CellLayout) -> f64 {
    layout.wrapped_distance(p, q)
}

/// Angle in `[0, pi]` between the array boresight and the direction to the
/// nearest wrapped image of `p`. Omnidirectional arrays report 0.
pub fn angle_to_boresight(array: &ArrayDescriptor, p: Point, layout: &CellLayout) -> Result<f64> {
    let v = layout.wrapped_offset(array.position, p);
    let n = v.norm();
    if n <= 1e-12 * layout.cell_radius_km {
        return Err(Error::DegeneratePosition);
    }
    Ok(match array.boresight {
        Some(b) => (v.x * b.y - v.y * b.x).abs().atan2(v.dot(b)),
        None => 0.0,
    })
}

/// User positions, indexed `cell * K + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserDrop {
    pub users_per_cell: usize,
    pub positions: Vec<Point>,
}

impl UserDrop {
    pub fn position(&self, cell: usize, k: usize) -> Point {
        self.positions[cell * self.users_per_cell + k]
    }

    pub fn cell_of(&self, user: usize) -> usize {
        user / self.users_per_cell
    }
}

const MAX_REJECTIONS: usize = 100_000;

/// Uniform users in each hexagon, outside the exclusion disk of every base
/// station.
pub fn drop_users<R: Rng + ?Sized>(config: &NetworkConfig, layout: &CellLayout, rng: &mut R) -> Result<UserDrop> {
    let radius = layout.cell_radius_km;
    let half_h = 0.5 * 3f64.sqrt() * radius;
    let excl = config.exclusion_radius_km;
    let k = config.users_per_cell;
    let mut positions = Vec::with_capacity(layout.num_cells() * k);
    for (cell, &center) in layout.cell_centers.iter().enumerate() {
        for _ in 0..k {
            let mut accepted = None;
            for _ in 0..MAX_REJECTIONS {
                let d = Point::new(rng.gen_range(-radius..radius), rng.gen_range(-half_h..half_h));
                if !in_hexagon(d, radius) {
                    continue;
                }
                let p = center + d;
                let clear = excl <= 0.0 || layout.arrays.iter().all(|a| layout.wrapped_distance(a.position, p) >= excl);
                if clear {
                    accepted = Some(p);
                    break;
                }
            }
            positions.push(accepted.ok_or(Error::ExclusionTooLarge { cell })?);
        }
    }
    Ok(UserDrop { users_per_cell: k, positions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(cells: usize, mode: AntennaMode) -> NetworkConfig {
        NetworkConfig { cells, mode, ..Default::default() }
    }

    #[test]
    fn nineteen_cells_fifty_seven_arrays() {
        let layout = build_layout(&cfg(19, AntennaMode::Directional)).unwrap();
        assert_eq!(layout.num_cells(), 19);
        assert_eq!(layout.arrays.len(), 57);
        for a in &layout.arrays {
            assert!((a.budget - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_cell_has_no_wrap() {
        let layout = build_layout(&cfg(1, AntennaMode::Directional)).unwrap();
        assert_eq!(layout.wrap_translations, vec![Point::default()]);
        assert_eq!(layout.arrays.len(), 3);
        // alternating corners: pairwise separated by 120°, i.e. sqrt(3) R apart
        for i in 0..3 {
            for j in i + 1..3 {
                let d = (layout.arrays[i].position - layout.arrays[j].position).norm();
                assert!((d - 3f64.sqrt()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unsupported_cluster() {
        assert!(matches!(build_layout(&cfg(12, AntennaMode::Directional)), Err(Error::UnsupportedClusterSize(12))));
    }

    #[test]
    fn omni_layout() {
        let c = NetworkConfig { antennas_per_array: 10.0, ..cfg(7, AntennaMode::Omni) };
        let layout = build_layout(&c).unwrap();
        assert_eq!(layout.arrays.len(), 7);
        for (a, &center) in layout.arrays.iter().zip(&layout.cell_centers) {
            assert_eq!(a.position, center);
            assert_eq!(a.elements, 30.0);
            assert!((a.budget - 1.0).abs() < 1e-12);
            assert!(a.boresight.is_none());
        }
    }

    #[test]
    fn seven_cell_wrap_distances() {
        let layout = build_layout(&cfg(7, AntennaMode::Directional)).unwrap();
        let hop = 3f64.sqrt();
        for i in 0..7 {
            assert_eq!(layout.neighbors(i).len(), 6);
            for j in 0..7 {
                let d = layout.wrapped_distance(layout.cell_centers[i], layout.cell_centers[j]);
                if i == j {
                    assert!(d < 1e-12);
                } else {
                    assert!(d <= 2.0 * hop + 1e-12);
                    assert!((d - hop).abs() < 1e-9, "cells {i},{j} at {d}");
                }
            }
        }
    }

    #[test]
    fn nineteen_cell_wrap_has_six_neighbors_each() {
        let layout = build_layout(&cfg(19, AntennaMode::Directional)).unwrap();
        for i in 0..19 {
            assert_eq!(layout.neighbors(i).len(), 6, "cell {i}");
        }
        // centers distinct under the wrap metric
        for i in 0..19 {
            for j in i + 1..19 {
                assert!(layout.wrapped_distance(layout.cell_centers[i], layout.cell_centers[j]) > 1.0);
            }
        }
    }

    #[test]
    fn boresight_points_to_center() {
        let layout = build_layout(&cfg(19, AntennaMode::Directional)).unwrap();
        for a in &layout.arrays {
            let c = layout.cell_centers[a.serving_cell];
            assert!(angle_to_boresight(a, c, &layout).unwrap() < 1e-12);
        }
    }

    #[test]
    fn wedge_edge_is_half_beamwidth() {
        let layout = build_layout(&cfg(1, AntennaMode::Directional)).unwrap();
        let a = &layout.arrays[0]; // corner at 60°
        let next = Point::polar(1.0, 0.0); // adjacent corner along the hexagon edge
        let phi = angle_to_boresight(a, next, &layout).unwrap();
        assert!((phi - PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn behind_the_array() {
        let layout = build_layout(&cfg(1, AntennaMode::Directional)).unwrap();
        let a = &layout.arrays[0];
        let p = a.position + Point::polar(0.3, PI / 3.0 + 0.2);
        let phi = angle_to_boresight(a, p, &layout).unwrap();
        // oracle: the direction makes 0.2 rad with the outward radial, so pi - 0.2 with the boresight
        assert!((phi - (PI - 0.2)).abs() < 1e-12);
        assert!(phi > PI / 3.0 && phi <= PI);
    }

    #[test]
    fn degenerate_angle() {
        let layout = build_layout(&cfg(1, AntennaMode::Directional)).unwrap();
        let a = &layout.arrays[0];
        assert!(matches!(angle_to_boresight(a, a.position, &layout), Err(Error::DegeneratePosition)));
    }

    #[test]
    fn drop_respects_exclusion_and_cells() {
        let c = cfg(19, AntennaMode::Directional);
        let layout = build_layout(&c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let drop = drop_users(&c, &layout, &mut rng).unwrap();
        assert_eq!(drop.positions.len(), 171);
        for (u, &p) in drop.positions.iter().enumerate() {
            let cell = drop.cell_of(u);
            assert!(layout.contains(cell, p));
            for a in &layout.arrays {
                assert!(layout.wrapped_distance(a.position, p) >= 0.06);
            }
            for a in layout.cell_arrays(cell) {
                let phi = angle_to_boresight(&layout.arrays[a], p, &layout).unwrap();
                assert!(phi <= PI / 3.0 + 1e-12);
            }
        }
    }

    #[test]
    fn drop_is_deterministic() {
        let c = cfg(7, AntennaMode::Directional);
        let layout = build_layout(&c).unwrap();
        let a = drop_users(&c, &layout, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = drop_users(&c, &layout, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_drop_centroid() {
        let c = NetworkConfig {
            cells: 1,
            users_per_cell: 100_000,
            pilot_length: 100_000.0,
            exclusion_radius_km: 0.0,
            ..Default::default()
        };
        let layout = build_layout(&c).unwrap();
        let drop = drop_users(&c, &layout, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let n = drop.positions.len() as f64;
        let (sx, sy) = drop.positions.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        let (mx, my) = (sx / n, sy / n);
        let (vx, vy) =
            drop.positions.iter().fold((0.0, 0.0), |(vx, vy), p| (vx + (p.x - mx).powi(2), vy + (p.y - my).powi(2)));
        let (sdx, sdy) = ((vx / n / n).sqrt(), (vy / n / n).sqrt());
        assert!(mx.abs() < 3.0 * sdx, "mean x {mx} vs se {sdx}");
        assert!(my.abs() < 3.0 * sdy, "mean y {my} vs se {sdy}");
    }
}
