//! Shape descriptors from the marching-cubes mesh and voxel coordinates.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{Error, Result};
use crate::grid::Mask;

use super::marching_cubes::{mesh_mask, TriMesh};

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Enclosed volume and surface area of a closed, outward-wound mesh.
pub fn mesh_volume_and_area(mesh: &TriMesh) -> (f64, f64) {
    let mut volume = 0.0;
    let mut area = 0.0;
    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.triangle(t);
        let n = cross(sub(b, a), sub(c, a));
        area += 0.5 * dot(n, n).sqrt();
        volume += dot(a, cross(b, c)) / 6.0;
    }
    (volume, area)
}

fn max_pairwise_distance(points: &[[f64; 3]]) -> f64 {
    let mut best = 0.0f64;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            let d = sub(*p, *q);
            best = best.max(dot(d, d));
        }
    }
    best.sqrt()
}

/// Largest vertex distance among vertices sharing a plane perpendicular to
/// `axis`.
fn max_planar_diameter(mesh: &TriMesh, axis: usize) -> f64 {
    let mut planes: HashMap<i64, Vec<[f64; 3]>> = HashMap::new();
    for (v, h) in mesh.vertices.iter().zip(&mesh.half_index) {
        planes.entry(h[axis]).or_default().push(*v);
    }
    planes
        .values()
        .map(|pts| max_pairwise_distance(pts))
        .fold(0.0, f64::max)
}

/// Principal-component eigenvalues of the in-mask voxel centers (population
/// covariance, physical units), largest first.
pub fn principal_moments(mask: &Mask) -> Result<[f64; 3]> {
    let g = mask.geometry();
    let pts: Vec<[f64; 3]> = mask
        .data()
        .iter()
        .enumerate()
        .filter(|(_, &on)| on)
        .map(|(i, _)| {
            let c = g.coords(i);
            [0, 1, 2].map(|a| c[a] as f64 * g.spacing[a])
        })
        .collect();
    if pts.is_empty() {
        return Err(Error::EmptyMask);
    }
    let n = pts.len() as f64;
    let mut mean = [0.0; 3];
    for p in &pts {
        for a in 0..3 {
            mean[a] += p[a] / n;
        }
    }
    let mut cov = Matrix3::<f64>::zeros();
    for p in &pts {
        let d = sub(*p, mean);
        for r in 0..3 {
            for c in 0..3 {
                cov[(r, c)] += d[r] * d[c] / n;
            }
        }
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(cov)
        .eigenvalues
        .iter()
        .map(|&e| e.max(0.0))
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok([ev[0], ev[1], ev[2]])
}

/// The 14 shape features in [`super::SHAPE`] order, using the mask's own
/// spacing.
pub fn shape_features(mask: &Mask) -> Result<[f64; 14]> {
    let count = mask.count();
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let voxel_volume = count as f64 * mask.geometry().voxel_volume();
    let mesh = mesh_mask(mask);
    let (volume, area) = mesh_volume_and_area(&mesh);
    let sphericity = (36.0 * PI * volume * volume).cbrt() / area;

    let [l1, l2, l3] = principal_moments(mask)?;
    let (elongation, flatness) = if l1 > 0.0 {
        ((l2 / l1).sqrt(), (l3 / l1).sqrt())
    } else {
        (1.0, 1.0)
    };

    Ok([
        volume,
        voxel_volume,
        area,
        area / volume,
        sphericity,
        4.0 * l1.sqrt(),
        4.0 * l2.sqrt(),
        4.0 * l3.sqrt(),
        elongation,
        flatness,
        max_pairwise_distance(&mesh.vertices),
        max_planar_diameter(&mesh, 2),
        max_planar_diameter(&mesh, 1),
        max_planar_diameter(&mesh, 0),
    ])
}
