//! Field output as plain CSV and legacy VTK.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::mesh::RectMesh;
use crate::error::{Error, Result};

/// Nodal and cellwise fields of one state, ready for export.
#[derive(Debug, Clone, Copy)]
pub struct FieldView<'a> {
    pub mesh: &'a RectMesh,
    pub p: &'a [f64],
    pub q: &'a [f64],
    pub u: &'a [f64],
    pub s: &'a [f64],
}

impl FieldView<'_> {
    /// Cell-averaged flux vector reconstructed from the RT0 dofs.
    pub fn cell_flux(&self, c: usize) -> [f64; 2] {
        let [l, r, b, t] = self.mesh.cell_edges(c);
        [0.5 * (self.q[l] + self.q[r]), 0.5 * (self.q[b] + self.q[t])]
    }

    fn check(&self) -> Result<()> {
        let m = self.mesh;
        if self.p.len() != m.n_cells()
            || self.s.len() != m.n_cells()
            || self.q.len() != m.n_edges()
            || self.u.len() != 2 * m.n_nodes()
        {
            return Err(Error::InvalidInput(
                "field lengths do not match the mesh".into(),
            ));
        }
        Ok(())
    }

    pub fn cell_csv(&self) -> Result<String> {
        self.check()?;
        let mut out = String::from("cell,x,y,p,s,q_x,q_y,q_mag\n");
        for c in 0..self.mesh.n_cells() {
            let [x, y] = self.mesh.cell_center(c);
            let [qx, qy] = self.cell_flux(c);
            let _ = writeln!(
                out,
                "{c},{x},{y},{},{},{qx},{qy},{}",
                self.p[c],
                self.s[c],
                qx.hypot(qy)
            );
        }
        Ok(out)
    }

    pub fn point_csv(&self) -> Result<String> {
        self.check()?;
        let mut out = String::from("node,x,y,u_x,u_y\n");
        for n in 0..self.mesh.n_nodes() {
            let [x, y] = self.mesh.node_coords(n);
            let _ = writeln!(out, "{n},{x},{y},{},{}", self.u[2 * n], self.u[2 * n + 1]);
        }
        Ok(out)
    }

    /// Legacy-VTK structured-points dataset.
    pub fn vtk(&self, title: &str) -> Result<String> {
        self.check()?;
        let m = self.mesh;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET STRUCTURED_POINTS"
        );
        let _ = writeln!(out, "DIMENSIONS {} {} 1", m.nx + 1, m.ny + 1);
        let _ = writeln!(out, "ORIGIN 0 0 0\nSPACING {} {} 1", m.hx(), m.hy());
        let _ = writeln!(out, "CELL_DATA {}", m.n_cells());
        for (name, vals) in [("pressure", self.p), ("saturation", self.s)] {
            let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for v in vals {
                let _ = writeln!(out, "{v}");
            }
        }
        let _ = writeln!(out, "VECTORS flux double");
        for c in 0..m.n_cells() {
            let [qx, qy] = self.cell_flux(c);
            let _ = writeln!(out, "{qx} {qy} 0");
        }
        let _ = writeln!(
            out,
            "POINT_DATA {}\nVECTORS displacement double",
            m.n_nodes()
        );
        for n in 0..m.n_nodes() {
            let _ = writeln!(out, "{} {} 0", self.u[2 * n], self.u[2 * n + 1]);
        }
        Ok(out)
    }

    /// Writes `<stem>_cells.csv`, `<stem>_points.csv` and `<stem>.vtk` into `dir`.
    pub fn write_all(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [
            (format!("{stem}_cells.csv"), self.cell_csv()?),
            (format!("{stem}_points.csv"), self.point_csv()?),
            (format!("{stem}.vtk"), self.vtk(stem)?),
        ] {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_three_files() {
        let mesh = RectMesh::new(2, 1, 1.0, 1.0, 0.5).unwrap();
        let p = vec![1.0, 2.0];
        let s = vec![0.5, 0.6];
        let q = vec![1.0; mesh.n_edges()];
        let u = vec![0.0; 2 * mesh.n_nodes()];
        let view = FieldView {
            mesh: &mesh,
            p: &p,
            q: &q,
            u: &u,
            s: &s,
        };
        let dir = tempfile::tempdir().unwrap();
        view.write_all(dir.path(), "state").unwrap();
        let cells = fs::read_to_string(dir.path().join("state_cells.csv")).unwrap();
        assert_eq!(cells.lines().count(), 3);
        let vtk = fs::read_to_string(dir.path().join("state.vtk")).unwrap();
        assert!(vtk.contains("DIMENSIONS 3 2 1"));
        assert!(vtk.contains("POINT_DATA 6"));
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let mesh = RectMesh::new(2, 1, 1.0, 1.0, 0.5).unwrap();
        let view = FieldView {
            mesh: &mesh,
            p: &[1.0],
            q: &[],
            u: &[],
            s: &[],
        };
        assert!(view.cell_csv().is_err());
    }
}
