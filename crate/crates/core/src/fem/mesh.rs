use crate::error::{Error, Result};

/// Boundary classification of a mesh edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeTag {
    Interior,
    Left,
    Right,
    Bottom,
    Top,
    /// Top edge lying inside the injection strip `x <= inflow_width`.
    Inflow,
}

impl EdgeTag {
    pub fn is_boundary(self) -> bool {
        self != EdgeTag::Interior
    }
}

/// Orientation of the unit normal that defines an edge's flux dof.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeNormal {
    /// Vertical edge, normal +x.
    X,
    /// Horizontal edge, normal +y.
    Y,
}

/// Uniform rectangular mesh of `[0, lx] x [0, ly]`.
///
/// Cells are numbered `j * nx + i`, nodes `j * (nx + 1) + i`. Vertical edges
/// come first (`j * (nx + 1) + i`, the edge at `x = i * hx`), followed by
/// horizontal edges (`nv + j * nx + i`, the edge at `y = j * hy`).
#[derive(Debug, Clone, PartialEq)]
pub struct RectMesh {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub inflow_width: f64,
    tags: Vec<EdgeTag>,
}

impl RectMesh {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, inflow_width: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Mesh(format!(
                "cell counts must be positive, got {nx} x {ny}"
            )));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::Mesh(format!(
                "extents must be positive, got {lx} x {ly}"
            )));
        }
        if !(0.0..=lx).contains(&inflow_width) {
            return Err(Error::Mesh(format!(
                "inflow width {inflow_width} outside [0, {lx}]"
            )));
        }
        let hx = lx / nx as f64;
        let cells = inflow_width / hx;
        let n_inflow = cells.round();
        if (cells - n_inflow).abs() > 1e-9 * cells.max(1.0) {
            return Err(Error::Mesh(format!(
                "inflow width {inflow_width} is not a multiple of the cell width {hx}"
            )));
        }
        let n_inflow = n_inflow as usize;

        let nv = (nx + 1) * ny;
        let mut tags = vec![EdgeTag::Interior; nv + nx * (ny + 1)];
        for j in 0..ny {
            tags[j * (nx + 1)] = EdgeTag::Left;
            tags[j * (nx + 1) + nx] = EdgeTag::Right;
        }
        for i in 0..nx {
            tags[nv + i] = EdgeTag::Bottom;
            tags[nv + ny * nx + i] = if i < n_inflow {
                EdgeTag::Inflow
            } else {
                EdgeTag::Top
            };
        }
        Ok(RectMesh {
            nx,
            ny,
            lx,
            ly,
            inflow_width,
            tags,
        })
    }

    #[inline]
    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    #[inline]
    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn n_edges(&self) -> usize {
        self.tags.len()
    }

    /// Number of vertical (normal +x) edges; horizontal edges follow them.
    pub fn n_vertical_edges(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    /// Grid position `(i, j)` of a cell.
    #[inline]
    pub fn cell_ij(&self, c: usize) -> (usize, usize) {
        (c % self.nx, c / self.nx)
    }

    pub fn cell_center(&self, c: usize) -> [f64; 2] {
        let (i, j) = self.cell_ij(c);
        [(i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy()]
    }

    pub fn node_coords(&self, n: usize) -> [f64; 2] {
        let i = n % (self.nx + 1);
        let j = n / (self.nx + 1);
        [i as f64 * self.hx(), j as f64 * self.hy()]
    }

    /// Corner nodes counter-clockwise from the lower-left one.
    pub fn cell_nodes(&self, c: usize) -> [usize; 4] {
        let (i, j) = self.cell_ij(c);
        [
            self.node(i, j),
            self.node(i + 1, j),
            self.node(i + 1, j + 1),
            self.node(i, j + 1),
        ]
    }

    /// Edges of a cell as `[left, right, bottom, top]`.
    pub fn cell_edges(&self, c: usize) -> [usize; 4] {
        let (i, j) = self.cell_ij(c);
        let nv = self.n_vertical_edges();
        [
            j * (self.nx + 1) + i,
            j * (self.nx + 1) + i + 1,
            nv + j * self.nx + i,
            nv + (j + 1) * self.nx + i,
        ]
    }

    pub fn edge_normal(&self, e: usize) -> EdgeNormal {
        if e < self.n_vertical_edges() {
            EdgeNormal::X
        } else {
            EdgeNormal::Y
        }
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        match self.edge_normal(e) {
            EdgeNormal::X => self.hy(),
            EdgeNormal::Y => self.hx(),
        }
    }

    pub fn edge_midpoint(&self, e: usize) -> [f64; 2] {
        let nv = self.n_vertical_edges();
        if e < nv {
            let (i, j) = (e % (self.nx + 1), e / (self.nx + 1));
            [i as f64 * self.hx(), (j as f64 + 0.5) * self.hy()]
        } else {
            let k = e - nv;
            let (i, j) = (k % self.nx, k / self.nx);
            [(i as f64 + 0.5) * self.hx(), j as f64 * self.hy()]
        }
    }

    /// Cells on the negative and positive side of an edge's normal.
    pub fn edge_cells(&self, e: usize) -> (Option<usize>, Option<usize>) {
        let nv = self.n_vertical_edges();
        if e < nv {
            let (i, j) = (e % (self.nx + 1), e / (self.nx + 1));
            let minus = (i > 0).then(|| self.cell(i - 1, j));
            let plus = (i < self.nx).then(|| self.cell(i, j));
            (minus, plus)
        } else {
            let k = e - nv;
            let (i, j) = (k % self.nx, k / self.nx);
            let minus = (j > 0).then(|| self.cell(i, j - 1));
            let plus = (j < self.ny).then(|| self.cell(i, j));
            (minus, plus)
        }
    }

    pub fn edge_tag(&self, e: usize) -> EdgeTag {
        self.tags[e]
    }

    pub fn edge_tags(&self) -> &[EdgeTag] {
        &self.tags
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.tags.len()).filter(|&e| self.tags[e].is_boundary())
    }

    pub fn inflow_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.tags.len()).filter(|&e| self.tags[e] == EdgeTag::Inflow)
    }

    pub fn interior_edge_count(&self) -> usize {
        self.tags
            .iter()
            .filter(|t| **t == EdgeTag::Interior)
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn single_cell() {
        let m = RectMesh::new(1, 1, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(m.n_cells(), 1);
        assert_eq!(m.n_nodes(), 4);
        assert_eq!(m.boundary_edges().count(), 4);
        assert_eq!(m.interior_edge_count(), 0);
        assert_eq!(m.inflow_edges().count(), 1);
    }

    #[test]
    fn fifty_grid_has_ten_inflow_edges() {
        let m = RectMesh::new(50, 50, 1.0, 1.0, 0.2).unwrap();
        assert_eq!(m.n_cells(), 2500);
        assert_eq!(m.inflow_edges().count(), 10);
        for e in m.inflow_edges() {
            let [x, y] = m.edge_midpoint(e);
            assert!(x < 0.2 && (y - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn interior_edges_by_enumeration() {
        let m = RectMesh::new(2, 2, 1.0, 1.0, 0.5).unwrap();
        // count how many cells list each edge
        let mut owners: HashMap<usize, usize> = HashMap::new();
        for c in 0..m.n_cells() {
            for e in m.cell_edges(c) {
                *owners.entry(e).or_default() += 1;
            }
        }
        let shared = owners.values().filter(|&&k| k == 2).count();
        assert_eq!(shared, 4);
        assert_eq!(m.interior_edge_count(), 4);
        assert!(owners.values().all(|&k| k == 1 || k == 2));
        for (e, k) in owners {
            assert_eq!(k == 2, m.edge_tag(e) == EdgeTag::Interior);
        }
    }

    #[test]
    fn edge_cells_agree_with_cell_edges() {
        let m = RectMesh::new(3, 2, 1.5, 1.0, 0.5).unwrap();
        for c in 0..m.n_cells() {
            let [l, r, b, t] = m.cell_edges(c);
            assert_eq!(m.edge_cells(l).1, Some(c));
            assert_eq!(m.edge_cells(r).0, Some(c));
            assert_eq!(m.edge_cells(b).1, Some(c));
            assert_eq!(m.edge_cells(t).0, Some(c));
        }
    }

    #[test]
    fn misaligned_inflow_is_rejected() {
        assert!(RectMesh::new(4, 4, 1.0, 1.0, 0.3).is_err());
        assert!(RectMesh::new(4, 4, 1.0, 1.0, 1.5).is_err());
        assert!(RectMesh::new(0, 4, 1.0, 1.0, 0.0).is_err());
    }
}
