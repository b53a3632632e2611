//! Conforming triangulations of the unit square and uniform interval meshes.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

const GEOM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    Bottom,
    Right,
    Top,
    Left,
}

/// Triangular mesh of `[0,1]^2`.
///
/// Edge `i` of a cell is the one opposite local vertex `i`, running from
/// local vertex `i+1` to `i+2`. Global edges are oriented from the lower to
/// the higher vertex index; `cell_edges` stores the matching sign.
#[derive(Clone, Debug)]
pub struct TriMesh {
    vertices: Vec<[f64; 2]>,
    cells: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    cell_edges: Vec<[(usize, f64); 3]>,
    edge_cells: Vec<[Option<usize>; 2]>,
    cell_subdomain: Vec<usize>,
    boundary_tag: Vec<Option<BoundaryTag>>,
}

impl TriMesh {
    pub fn new(vertices: Vec<[f64; 2]>, cells: Vec<[usize; 3]>, cell_subdomain: Vec<usize>) -> Result<Self> {
        if cells.len() != cell_subdomain.len() {
            return invalid("one subdomain tag per cell required");
        }
        let nv = vertices.len();
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        let mut edge_cells: Vec<[Option<usize>; 2]> = Vec::new();

        for (c, cell) in cells.iter().enumerate() {
            if cell.iter().any(|&v| v >= nv) {
                return invalid(format!("cell {c} references a missing vertex"));
            }
            let [a, b, d] = cell.map(|v| vertices[v]);
            let area2 = (b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1]);
            if area2 <= 0.0 {
                return invalid(format!("cell {c} is degenerate or clockwise"));
            }
            let mut local = [(0usize, 0.0f64); 3];
            for (i, slot) in local.iter_mut().enumerate() {
                let p = cell[(i + 1) % 3];
                let q = cell[(i + 2) % 3];
                let key = (p.min(q), p.max(q));
                let e = *lookup.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_cells.push([None, None]);
                    edges.len() - 1
                });
                match edge_cells[e] {
                    [None, _] => edge_cells[e][0] = Some(c),
                    [Some(_), None] => edge_cells[e][1] = Some(c),
                    _ => return invalid(format!("edge {key:?} shared by more than two cells")),
                }
                *slot = (e, if p < q { 1.0 } else { -1.0 });
            }
            cell_edges.push(local);
        }

        let mut boundary_tag = vec![None; edges.len()];
        for (e, ec) in edge_cells.iter().enumerate() {
            if ec[1].is_some() {
                continue;
            }
            let [p, q] = edges[e];
            let m = [
                0.5 * (vertices[p][0] + vertices[q][0]),
                0.5 * (vertices[p][1] + vertices[q][1]),
            ];
            let tag = if m[1].abs() < GEOM_TOL {
                BoundaryTag::Bottom
            } else if (m[0] - 1.0).abs() < GEOM_TOL {
                BoundaryTag::Right
            } else if (m[1] - 1.0).abs() < GEOM_TOL {
                BoundaryTag::Top
            } else if m[0].abs() < GEOM_TOL {
                BoundaryTag::Left
            } else {
                // Boundary of a mesh that is not the whole square (single elements in tests).
                continue;
            };
            boundary_tag[e] = Some(tag);
        }

        Ok(Self { vertices, cells, edges, cell_edges, edge_cells, cell_subdomain, boundary_tag })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn cell_edges(&self, c: usize) -> &[(usize, f64); 3] {
        &self.cell_edges[c]
    }

    /// Cells adjacent to edge `e`; the second entry is `None` on the boundary.
    pub fn edge_cells(&self, e: usize) -> [Option<usize>; 2] {
        self.edge_cells[e]
    }

    pub fn subdomain(&self, c: usize) -> usize {
        self.cell_subdomain[c]
    }

    pub fn cell_subdomains(&self) -> &[usize] {
        &self.cell_subdomain
    }

    pub fn is_boundary(&self, e: usize) -> bool {
        self.edge_cells[e][1].is_none()
    }

    /// Side of the unit square containing boundary edge `e`; `None` for interior edges.
    pub fn boundary_tag(&self, e: usize) -> Option<BoundaryTag> {
        self.boundary_tag[e]
    }

    pub fn cell_coords(&self, c: usize) -> [[f64; 2]; 3] {
        self.cells[c].map(|v| self.vertices[v])
    }

    pub fn area(&self, c: usize) -> f64 {
        let [a, b, d] = self.cell_coords(c);
        0.5 * ((b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn centroid(&self, c: usize) -> [f64; 2] {
        let [a, b, d] = self.cell_coords(c);
        [(a[0] + b[0] + d[0]) / 3.0, (a[1] + b[1] + d[1]) / 3.0]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [p, q] = self.edges[e];
        let (a, b) = (self.vertices[p], self.vertices[q]);
        (b[0] - a[0]).hypot(b[1] - a[1])
    }

    pub fn edge_midpoint(&self, e: usize) -> [f64; 2] {
        let [p, q] = self.edges[e];
        let (a, b) = (self.vertices[p], self.vertices[q]);
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    /// Unit normal of edge `e` in its global orientation: the tangent rotated clockwise.
    pub fn edge_normal(&self, e: usize) -> [f64; 2] {
        let [p, q] = self.edges[e];
        let (a, b) = (self.vertices[p], self.vertices[q]);
        let (tx, ty) = (b[0] - a[0], b[1] - a[1]);
        let len = tx.hypot(ty);
        [ty / len, -tx / len]
    }

    /// Barycentric coordinates of `x` with respect to cell `c`.
    pub fn barycentric(&self, c: usize, x: [f64; 2]) -> [f64; 3] {
        let [a, b, d] = self.cell_coords(c);
        let det = (b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((x[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (x[1] - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    /// First cell containing `x` (linear scan; meant for tests and probing).
    pub fn locate(&self, x: [f64; 2]) -> Option<usize> {
        (0..self.n_cells()).find(|&c| self.barycentric(c, x).iter().all(|&l| l >= -1e-12))
    }

    pub fn min_area(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.area(c)).fold(f64::INFINITY, f64::min)
    }

    pub fn max_diameter(&self) -> f64 {
        (0..self.n_edges()).map(|e| self.edge_length(e)).fold(0.0, f64::max)
    }

    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("vertices.csv"))?);
        writeln!(f, "id,x,y")?;
        for (i, v) in self.vertices.iter().enumerate() {
            writeln!(f, "{i},{:?},{:?}", v[0], v[1])?;
        }
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("cells.csv"))?);
        writeln!(f, "id,v0,v1,v2,tag")?;
        for (i, c) in self.cells.iter().enumerate() {
            writeln!(f, "{i},{},{},{},{}", c[0], c[1], c[2], self.cell_subdomain[i])?;
        }
        Ok(())
    }
}

/// Structured mesh with `n` squares per side, each split along its
/// lower-left to upper-right diagonal. Tags come from `subdomain_rule`
/// evaluated at cell centroids.
pub fn unit_square_mesh(n: usize, subdomain_rule: impl Fn([f64; 2]) -> usize) -> Result<TriMesh> {
    if n < 2 || n % 2 != 0 {
        return invalid(format!("mesh size must be even and at least 2, got {n}"));
    }
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let h = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 * h, j as f64 * h]);
        }
    }
    // Exact endpoints regardless of rounding in i*h.
    for v in &mut vertices {
        for x in v.iter_mut() {
            if (*x - 1.0).abs() < 1e-14 {
                *x = 1.0;
            }
        }
    }
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v11, v01) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            cells.push([v00, v10, v11]);
            cells.push([v00, v11, v01]);
        }
    }
    let tags = cells
        .iter()
        .map(|c: &[usize; 3]| {
            let p = c.map(|v| vertices[v]);
            subdomain_rule([(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0])
        })
        .collect();
    TriMesh::new(vertices, cells, tags)
}

/// Red refinement: every triangle is split into four congruent children.
/// Returns the fine mesh and the fine-cell to coarse-cell map.
pub fn refine_uniform(mesh: &TriMesh) -> Result<(TriMesh, Vec<usize>)> {
    let nv = mesh.n_vertices();
    let mut vertices = mesh.vertices.clone();
    for e in 0..mesh.n_edges() {
        vertices.push(mesh.edge_midpoint(e));
    }
    let mut cells = Vec::with_capacity(4 * mesh.n_cells());
    let mut tags = Vec::with_capacity(4 * mesh.n_cells());
    let mut parent = Vec::with_capacity(4 * mesh.n_cells());
    for c in 0..mesh.n_cells() {
        let [a, b, d] = mesh.cells[c];
        let ce = mesh.cell_edges[c];
        // Local edge i is opposite vertex i.
        let m_bd = nv + ce[0].0;
        let m_da = nv + ce[1].0;
        let m_ab = nv + ce[2].0;
        for child in [[a, m_ab, m_da], [m_ab, b, m_bd], [m_da, m_bd, d], [m_ab, m_bd, m_da]] {
            cells.push(child);
            tags.push(mesh.cell_subdomain[c]);
            parent.push(c);
        }
    }
    Ok((TriMesh::new(vertices, cells, tags)?, parent))
}

/// Applies `refine_uniform` `depth` times and composes the parent maps so the
/// returned map points into the original mesh.
pub fn refine_times(mesh: &TriMesh, depth: usize) -> Result<(TriMesh, Vec<usize>)> {
    let mut cur = mesh.clone();
    let mut map: Vec<usize> = (0..mesh.n_cells()).collect();
    for _ in 0..depth {
        let (fine, parent) = refine_uniform(&cur)?;
        map = parent.iter().map(|&p| map[p]).collect();
        cur = fine;
    }
    Ok((cur, map))
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntervalMesh {
    nodes: Vec<f64>,
}

impl IntervalMesh {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn n_intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n_intervals() as f64
    }
}

pub fn interval_mesh(n: usize) -> Result<IntervalMesh> {
    if n < 2 {
        return invalid(format!("interval mesh needs at least 2 subintervals, got {n}"));
    }
    let mut nodes: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    nodes[n] = 1.0;
    Ok(IntervalMesh { nodes })
}
