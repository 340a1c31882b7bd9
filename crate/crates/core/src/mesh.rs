//! Collocation mesh and the discontinuity-aligned quadrature mesh.
//!
//! The collocation nodes stay fixed; the curve values `alpha_i(t_k)` are
//! only injected into the per-row quadrature breakpoints, so every
//! integrand is smooth between consecutive breakpoints.

use crate::error::{Error, Result};
use crate::kernel::PiecewiseKernel;

/// Coincident breakpoints closer than this are merged.
pub const MERGE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    nodes: Vec<f64>,
    h: f64,
}

impl Mesh {
    /// `t_i = i T / N`, `i = 0..=N`.
    pub fn uniform(horizon: f64, intervals: usize) -> Result<Self> {
        if intervals == 0 {
            return Err(Error::config("mesh needs N >= 1"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::config(format!(
                "mesh horizon must be positive, got {horizon}"
            )));
        }
        let n = intervals as f64;
        let mut nodes: Vec<f64> = (0..=intervals).map(|i| horizon * i as f64 / n).collect();
        nodes[intervals] = horizon;
        Ok(Mesh {
            nodes,
            h: horizon / n,
        })
    }

    /// Arbitrary strictly increasing nodes starting at 0.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::config("mesh needs at least two nodes"));
        }
        if nodes[0] != 0.0 {
            return Err(Error::config(format!(
                "first mesh node must be 0, got {}",
                nodes[0]
            )));
        }
        if let Some(i) = nodes
            .windows(2)
            .position(|w| !(w[1] > w[0]) || !w[1].is_finite())
        {
            return Err(Error::config(format!(
                "mesh nodes not strictly increasing at index {}",
                i + 1
            )));
        }
        let h = nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        Ok(Mesh { nodes, h })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of intervals `N`.
    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Largest step.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// `t_j - t_{j-1}` for `j >= 1`.
    pub fn step(&self, j: usize) -> f64 {
        self.nodes[j] - self.nodes[j - 1]
    }

    /// 1-based interval `j` with `t_{j-1} < s <= t_j`; `s <= 0` maps to 1.
    pub fn interval_of(&self, s: f64) -> usize {
        let idx = self.nodes.partition_point(|&node| node < s);
        idx.clamp(1, self.intervals())
    }
}

/// Per-row quadrature breakpoints: row `k` covers `[0, t_k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxiliaryMesh {
    rows: Vec<Vec<f64>>,
}

impl AuxiliaryMesh {
    pub fn build(mesh: &Mesh, kernel: &PiecewiseKernel) -> Result<Self> {
        check_horizons(mesh, kernel)?;
        let rows = mesh
            .nodes()
            .iter()
            .map(|&t| breakpoints_at(mesh, kernel, t))
            .collect();
        Ok(AuxiliaryMesh { rows })
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

pub(crate) fn check_horizons(mesh: &Mesh, kernel: &PiecewiseKernel) -> Result<()> {
    let (a, b) = (mesh.horizon(), kernel.horizon());
    if (a - b).abs() > 1e-9 * a.abs().max(b.abs()).max(1.0) {
        return Err(Error::config(format!(
            "mesh horizon {a} does not match kernel horizon {b}"
        )));
    }
    Ok(())
}

/// Sorted union of the mesh nodes in `[0, t]`, the interior curve values
/// `alpha_i(t)` and `t` itself, merged at [`MERGE_TOLERANCE`]. Mesh nodes
/// win a merge so interval membership stays exact.
pub fn breakpoints_at(mesh: &Mesh, kernel: &PiecewiseKernel, t: f64) -> Vec<f64> {
    let mut points: Vec<(f64, bool)> = mesh
        .nodes()
        .iter()
        .take_while(|&&node| node <= t + MERGE_TOLERANCE)
        .map(|&node| (node, true))
        .collect();
    points.extend(
        kernel
            .boundaries()
            .iter()
            .map(|curve| curve.value(t))
            .filter(|&a| a >= 0.0 && a <= t)
            .map(|a| (a, false)),
    );
    points.push((t, false));
    points.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut merged: Vec<(f64, bool)> = Vec::with_capacity(points.len());
    for (value, is_node) in points {
        match merged.last_mut() {
            Some(last) if (value - last.0).abs() <= MERGE_TOLERANCE => {
                if is_node && !last.1 {
                    *last = (value, true);
                }
            }
            _ => merged.push((value, is_node)),
        }
    }
    let mut out: Vec<f64> = merged.into_iter().map(|(v, _)| v).collect();
    // the row must end exactly at t and never overshoot it
    if let Some(last) = out.last_mut() {
        if *last > t {
            *last = t;
        }
    }
    out
}

/// A midpoint-rule sample: `width * g(s)` approximates the integral of a
/// smooth `g` over one subcell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadPoint {
    /// 1-based mesh interval containing the subcell.
    pub interval: usize,
    /// 0-based kernel band of the subcell at the row's `t`.
    pub segment: usize,
    pub s: f64,
    pub width: f64,
}

/// Composite midpoint points over `[0, t]`: each breakpoint cell is split
/// into `refinement * max(1, ceil(cell / h))` equal subcells.
pub fn quadrature_points(
    mesh: &Mesh,
    kernel: &PiecewiseKernel,
    t: f64,
    refinement: usize,
) -> Vec<QuadPoint> {
    let breaks = breakpoints_at(mesh, kernel, t);
    let h = mesh.h();
    let refinement = refinement.max(1);
    let mut points = Vec::with_capacity(breaks.len() * refinement);
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let cell = b - a;
        if cell <= 0.0 {
            continue;
        }
        let mid = 0.5 * (a + b);
        let interval = mesh.interval_of(mid);
        let segment = kernel.segment_index(t, mid);
        let base = ((cell / h) - 1e-9).ceil().max(1.0) as usize;
        let count = base * refinement;
        let width = cell / count as f64;
        for q in 0..count {
            points.push(QuadPoint {
                interval,
                segment,
                s: a + (q as f64 + 0.5) * width,
                width,
            });
        }
    }
    points
}

/// Composite midpoint rule over explicit breakpoints.
pub fn midpoint_integral<F: Fn(f64) -> f64>(breakpoints: &[f64], subcells: usize, f: F) -> f64 {
    let subcells = subcells.max(1);
    breakpoints
        .windows(2)
        .map(|w| {
            let width = (w[1] - w[0]) / subcells as f64;
            (0..subcells)
                .map(|q| width * f(w[0] + (q as f64 + 0.5) * width))
                .sum::<f64>()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn assert_close_vec(got: &[f64], want: &[f64]) {
        assert_eq!(got.len(), want.len(), "{got:?} vs {want:?}");
        for (g, w) in got.iter().zip(want) {
            assert_relative_eq!(*g, *w, epsilon = 1e-14);
        }
    }

    #[test]
    fn uniform_examples() {
        let m = Mesh::uniform(1.0, 4).unwrap();
        assert_eq!(m.nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(m.h(), 0.25);

        let week = Mesh::uniform(168.0, 168).unwrap();
        assert_eq!(week.h(), 1.0);
        assert_eq!(week.nodes()[37], 37.0);
        assert_eq!(week.horizon(), 168.0);

        let one = Mesh::uniform(1.0, 1).unwrap();
        assert_eq!(one.nodes(), &[0.0, 1.0]);
    }

    #[test]
    fn uniform_errors() {
        assert_eq!(Mesh::uniform(1.0, 0).unwrap_err().kind(), "configuration");
        assert!(Mesh::uniform(0.0, 4).is_err());
        assert!(Mesh::uniform(-1.0, 4).is_err());
    }

    #[test]
    fn nonuniform_mesh() {
        let m = Mesh::from_nodes(vec![0.0, 0.1, 0.5, 1.0]).unwrap();
        assert_relative_eq!(m.h(), 0.5);
        assert!(Mesh::from_nodes(vec![0.0, 0.5, 0.5]).is_err());
        assert!(Mesh::from_nodes(vec![0.1, 0.5]).is_err());
        assert_eq!(m.interval_of(0.0), 1);
        assert_eq!(m.interval_of(0.1), 1);
        assert_eq!(m.interval_of(0.10001), 2);
        assert_eq!(m.interval_of(1.0), 3);
    }

    #[test]
    fn aux_rows_voltker() {
        let k = PiecewiseKernel::three_band_efficiency(1.0).unwrap();
        let aux4 = AuxiliaryMesh::build(&Mesh::uniform(1.0, 4).unwrap(), &k).unwrap();
        assert_close_vec(aux4.row(4), &[0.0, 0.25, 0.5, 0.75, 1.0]);

        let aux3 = AuxiliaryMesh::build(&Mesh::uniform(1.0, 3).unwrap(), &k).unwrap();
        assert_close_vec(aux3.row(3), &[0.0, 0.25, 1.0 / 3.0, 2.0 / 3.0, 0.75, 1.0]);
        assert_close_vec(aux3.row(0), &[0.0]);
    }

    #[test]
    fn aux_rows_single_segment() {
        let k = PiecewiseKernel::constant(1.0, 2.0).unwrap();
        let mesh = Mesh::uniform(2.0, 5).unwrap();
        let aux = AuxiliaryMesh::build(&mesh, &k).unwrap();
        for kk in 0..=5 {
            assert_eq!(aux.row(kk), &mesh.nodes()[..=kk]);
        }
    }

    #[test]
    fn aux_horizon_mismatch() {
        let k = PiecewiseKernel::constant(1.0, 2.0).unwrap();
        assert!(AuxiliaryMesh::build(&Mesh::uniform(1.0, 5).unwrap(), &k).is_err());
    }

    #[test]
    fn rows_contain_curve_values_and_nest() {
        let k = PiecewiseKernel::proportional_bands(&[1.0, 0.5, 2.0], &[0.3, 0.61], 1.0).unwrap();
        let mesh = Mesh::uniform(1.0, 7).unwrap();
        let aux = AuxiliaryMesh::build(&mesh, &k).unwrap();
        for kk in 1..=7 {
            let row = aux.row(kk);
            let tk = mesh.nodes()[kk];
            assert!(row.windows(2).all(|w| w[1] > w[0]));
            for c in [0.3, 0.61] {
                assert!(row.iter().any(|&b| (b - c * tk).abs() <= MERGE_TOLERANCE));
            }
            for &node in &mesh.nodes()[..kk] {
                assert!(row.contains(&node));
            }
        }
    }

    #[test]
    fn midpoint_exact_on_piecewise_linear() {
        // integrand linear between breakpoints, with a jump at 0.3
        let breaks = [0.0, 0.3, 0.55, 1.0];
        let f = |s: f64| {
            if s <= 0.3 {
                2.0 * s + 1.0
            } else {
                -3.0 * s + 0.5
            }
        };
        let exact = (0.09 + 0.3) + (-1.5 * (1.0 - 0.09) + 0.5 * 0.7);
        assert_relative_eq!(midpoint_integral(&breaks, 1, f), exact, epsilon = 1e-14);
    }

    #[test]
    fn quadrature_points_cover_row() {
        let k = PiecewiseKernel::three_band_efficiency(1.0).unwrap();
        let mesh = Mesh::uniform(1.0, 3).unwrap();
        for refinement in [1, 4] {
            let pts = quadrature_points(&mesh, &k, 1.0, refinement);
            assert_eq!(pts.len(), 5 * refinement);
            let total: f64 = pts.iter().map(|p| p.width).sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-14);
            for p in &pts {
                let j = p.interval;
                assert!(p.s > mesh.nodes()[j - 1] && p.s < mesh.nodes()[j]);
                assert_eq!(p.segment, k.segment_index(1.0, p.s));
            }
        }
        // off-node t ends the row at t
        let pts = quadrature_points(&mesh, &k, 0.5, 1);
        let total: f64 = pts.iter().map(|p| p.width).sum();
        assert_relative_eq!(total, 0.5, epsilon = 1e-14);
    }
}
