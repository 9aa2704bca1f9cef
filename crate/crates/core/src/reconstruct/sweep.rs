//! Tube meshes swept by a frame, with OBJ and PLY writers.
//!
//! Self-intersections are not detected.

use std::collections::HashSet;
use std::io::{self, Write};

use serde::Serialize;

use crate::frames::io::fmt_f64;
use crate::frames::{row, CurveSamples, FrameField, Vec3};
use crate::par::Exec;

use super::ReconstructError;

#[derive(Clone, Debug, Default)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct MeshStats {
    pub vertices: usize,
    pub triangles: usize,
    pub edges: usize,
    pub euler_characteristic: i64,
    pub min_triangle_area: f64,
    pub degenerate_triangles: usize,
}

/// Cross-section circle of `radius` in the (row 2, row 3) plane at every
/// node, `n_around` vertices per ring; triangles wound with outward normals.
pub fn sweep_surface(curve: &CurveSamples, frame: &FrameField, radius: f64, n_around: usize, exec: Exec) -> Result<Mesh, ReconstructError> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(ReconstructError::InvalidParameter(format!("radius = {radius}")));
    }
    if n_around < 3 {
        return Err(ReconstructError::InvalidParameter(format!("n_around = {n_around}")));
    }
    let n = curve.len();
    if frame.len() != n {
        return Err(ReconstructError::GridMismatch { expected: n, found: frame.len() });
    }
    if n < 2 {
        return Err(ReconstructError::InvalidParameter("a tube needs at least two nodes".into()));
    }
    let angles: Vec<(f64, f64)> = (0..n_around)
        .map(|k| {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / n_around as f64;
            (phi.cos(), phi.sin())
        })
        .collect();
    let rings: Vec<Vec<(Vec3, Vec3)>> = exec.map_range(n, |i| {
        let (v, b) = (row(&frame.rows[i], 1), row(&frame.rows[i], 2));
        angles
            .iter()
            .map(|&(c, s)| {
                let d = c * v + s * b;
                (curve.points[i] + radius * d, d)
            })
            .collect()
    });
    let mut mesh = Mesh::default();
    for ring in rings {
        for (p, d) in ring {
            mesh.vertices.push(p);
            mesh.normals.push(d);
        }
    }
    let m = n_around as u32;
    for i in 0..n as u32 - 1 {
        for k in 0..m {
            let a = i * m + k;
            let b = (i + 1) * m + k;
            let c = (i + 1) * m + (k + 1) % m;
            let d = i * m + (k + 1) % m;
            mesh.triangles.push([a, c, b]);
            mesh.triangles.push([a, d, c]);
        }
    }
    Ok(mesh)
}

impl Mesh {
    fn area(&self, t: &[u32; 3]) -> f64 {
        let [a, b, c] = t.map(|i| self.vertices[i as usize]);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Counts, Euler characteristic V − E + F and degenerate triangles
    /// (area below 1e-14 of the mean).
    pub fn stats(&self) -> MeshStats {
        let mut edges = HashSet::new();
        for t in &self.triangles {
            for (x, y) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                edges.insert((x.min(y), x.max(y)));
            }
        }
        let areas: Vec<f64> = self.triangles.iter().map(|t| self.area(t)).collect();
        let mean = areas.iter().sum::<f64>() / areas.len().max(1) as f64;
        MeshStats {
            vertices: self.vertices.len(),
            triangles: self.triangles.len(),
            edges: edges.len(),
            euler_characteristic: self.vertices.len() as i64 - edges.len() as i64 + self.triangles.len() as i64,
            min_triangle_area: areas.iter().copied().fold(f64::INFINITY, f64::min),
            degenerate_triangles: areas.iter().filter(|a| **a <= 1e-14 * mean).count(),
        }
    }

    /// Fraction of triangles whose geometric normal agrees with the mean
    /// of their vertex normals.
    pub fn outward_fraction(&self) -> f64 {
        let ok = self
            .triangles
            .iter()
            .filter(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i as usize]);
                let nsum = t.iter().fold(Vec3::zeros(), |s, i| s + self.normals[*i as usize]);
                (b - a).cross(&(c - a)).dot(&nsum) > 0.0
            })
            .count();
        ok as f64 / self.triangles.len().max(1) as f64
    }

    pub fn write_obj(&self, mut w: impl Write) -> io::Result<()> {
        for p in &self.vertices {
            writeln!(w, "v {} {} {}", fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.z))?;
        }
        for d in &self.normals {
            writeln!(w, "vn {} {} {}", fmt_f64(d.x), fmt_f64(d.y), fmt_f64(d.z))?;
        }
        for t in &self.triangles {
            let [a, b, c] = t.map(|i| i + 1);
            writeln!(w, "f {a}//{a} {b}//{b} {c}//{c}")?;
        }
        Ok(())
    }

    fn ply_header(&self, w: &mut impl Write, format: &str) -> io::Result<()> {
        writeln!(w, "ply")?;
        writeln!(w, "format {format} 1.0")?;
        writeln!(w, "element vertex {}", self.vertices.len())?;
        for p in ["x", "y", "z", "nx", "ny", "nz"] {
            writeln!(w, "property double {p}")?;
        }
        writeln!(w, "element face {}", self.triangles.len())?;
        writeln!(w, "property list uchar uint vertex_indices")?;
        writeln!(w, "end_header")
    }

    pub fn write_ply_ascii(&self, mut w: impl Write) -> io::Result<()> {
        self.ply_header(&mut w, "ascii")?;
        for (p, d) in self.vertices.iter().zip(&self.normals) {
            let vals = [p.x, p.y, p.z, d.x, d.y, d.z].map(fmt_f64);
            writeln!(w, "{}", vals.join(" "))?;
        }
        for t in &self.triangles {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    pub fn write_ply_binary(&self, mut w: impl Write) -> io::Result<()> {
        self.ply_header(&mut w, "binary_little_endian")?;
        for (p, d) in self.vertices.iter().zip(&self.normals) {
            for x in [p.x, p.y, p.z, d.x, d.y, d.z] {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        for t in &self.triangles {
            w.write_all(&[3u8])?;
            for i in t {
                w.write_all(&i.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct TwistStats {
    /// Largest angle between consecutive cross-section x-axes (row 2).
    pub max: f64,
    pub mean: f64,
    pub total: f64,
}

/// Per-segment rotation of the cross-section x-axis.
pub fn twist_metric(frame: &FrameField) -> TwistStats {
    let angles: Vec<f64> = frame
        .rows
        .windows(2)
        .map(|w| {
            let (a, b) = (row(&w[0], 1), row(&w[1], 1));
            a.cross(&b).norm().atan2(a.dot(&b))
        })
        .collect();
    let total: f64 = angles.iter().sum();
    TwistStats {
        max: angles.iter().copied().fold(0.0, f64::max),
        mean: total / angles.len().max(1) as f64,
        total,
    }
}
