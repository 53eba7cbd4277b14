//! Legacy ASCII VTK snapshots and per-step CSV diagnostics.
//!
//! Numbers are written in shortest round-trip scientific notation, so
//! identical data always produces identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::assembly::SystemState;
use crate::cutgeom::{CutSurface, NarrowBand};
use crate::error::Result;
use crate::timeloop::StepRecord;
use crate::Vec3;

/// Writes the surface triangles with per-vertex scalars. Points are
/// duplicated per triangle (no vertex welding), so the point count is three
/// times the triangle count.
pub fn write_vtk_raw(
    triangles: &[[Vec3; 3]],
    c: &[[f64; 3]],
    mu: &[[f64; 3]],
    path: &Path,
) -> Result<()> {
    assert_eq!(triangles.len(), c.len());
    assert_eq!(triangles.len(), mu.len());
    let mut w = BufWriter::new(File::create(path)?);
    let np = 3 * triangles.len();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "surface snapshot")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET POLYDATA")?;
    writeln!(w, "POINTS {np} double")?;
    for tri in triangles {
        for v in tri {
            writeln!(w, "{:e} {:e} {:e}", v.x, v.y, v.z)?;
        }
    }
    writeln!(w, "POLYGONS {} {}", triangles.len(), 4 * triangles.len())?;
    for (i, _) in triangles.iter().enumerate() {
        writeln!(w, "3 {} {} {}", 3 * i, 3 * i + 1, 3 * i + 2)?;
    }
    writeln!(w, "POINT_DATA {np}")?;
    writeln!(w, "SCALARS c double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for vals in c {
        for v in vals {
            writeln!(w, "{v:e}")?;
        }
    }
    writeln!(w, "SCALARS mu double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for vals in mu {
        for v in vals {
            writeln!(w, "{v:e}")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes a state snapshot, interpolating the nodal fields to the triangle
/// vertices within each parent cell.
pub fn write_vtk(
    surface: &CutSurface,
    state: &SystemState,
    band: &NarrowBand,
    path: &Path,
) -> Result<()> {
    let mut tris = Vec::with_capacity(surface.triangles.len());
    let mut c = Vec::with_capacity(surface.triangles.len());
    let mut mu = Vec::with_capacity(surface.triangles.len());
    for tri in &surface.triangles {
        let nodes = band.lattice.cell_nodes(tri.parent);
        let idx: Vec<usize> = nodes
            .iter()
            .map(|n| band.node_position(n).expect("inactive node"))
            .collect();
        let mut cv = [0.0; 3];
        let mut muv = [0.0; 3];
        for k in 0..3 {
            let bary = band.lattice.barycentric(tri.parent, tri.v[k]);
            for i in 0..4 {
                cv[k] += bary[i] * state.c[idx[i]];
                muv[k] += bary[i] * state.mu[idx[i]];
            }
        }
        tris.push(tri.v);
        c.push(cv);
        mu.push(muv);
    }
    write_vtk_raw(&tris, &c, &mu, path)
}

/// Streaming CSV writer with the fixed diagnostics schema.
pub struct CsvWriter {
    w: BufWriter<File>,
}

pub const CSV_HEADER: &str =
    "time,dt,energy,mass,band_cells,active_nodes,gmres_iters,residual,inclusion_margin";

impl CsvWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{CSV_HEADER}")?;
        Ok(Self { w })
    }

    pub fn write_record(&mut self, r: &StepRecord) -> Result<()> {
        writeln!(
            self.w,
            "{:e},{:e},{:e},{:e},{},{},{},{:e},{:e}",
            r.time,
            r.dt,
            r.energy,
            r.mass,
            r.band_cells,
            r.active_nodes,
            r.gmres_iters,
            r.residual,
            r.inclusion_margin
        )?;
        self.w.flush()?;
        Ok(())
    }
}

/// Writes a whole record list at once.
pub fn write_csv(records: &[StepRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut w = CsvWriter::create(path)?;
    for r in records {
        w.write_record(r)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vtk_golden_bytes_for_one_triangle() {
        let dir = std::env::temp_dir().join("chsurf_vtk_golden");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("tri.vtk");
        let tri = [[
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ]];
        write_vtk_raw(&tri, &[[0.0, 0.5, 1.0]], &[[0.0, 0.0, 0.0]], &path).unwrap();
        let got = std::fs::read_to_string(&path).unwrap();
        let expect = "\
# vtk DataFile Version 3.0
surface snapshot
ASCII
DATASET POLYDATA
POINTS 3 double
0e0 0e0 0e0
1e0 0e0 0e0
0e0 1e0 0e0
POLYGONS 1 4
3 0 1 2
POINT_DATA 3
SCALARS c double 1
LOOKUP_TABLE default
0e0
5e-1
1e0
SCALARS mu double 1
LOOKUP_TABLE default
0e0
0e0
0e0
";
        assert_eq!(got, expect);
    }

    #[test]
    fn vtk_writes_are_byte_identical() {
        let dir = std::env::temp_dir().join("chsurf_vtk_repeat");
        std::fs::create_dir_all(&dir).unwrap();
        let tri = [[
            Vec3::new(0.25, -1.5, 3.25e-7),
            Vec3::new(1.0 / 3.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.1),
        ]];
        let a = dir.join("a.vtk");
        let b = dir.join("b.vtk");
        write_vtk_raw(&tri, &[[0.1, 0.2, 0.3]], &[[-0.5, 0.0, 2e-18]], &a).unwrap();
        write_vtk_raw(&tri, &[[0.1, 0.2, 0.3]], &[[-0.5, 0.0, 2e-18]], &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn vtk_roundtrip_parses_consistently() {
        // A minimal structural re-read: point count is 3 x triangle count and
        // all coordinates parse back exactly.
        let dir = std::env::temp_dir().join("chsurf_vtk_parse");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("two.vtk");
        let tris = [
            [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            [Vec3::new(0.7, 0.1, 0.3), Vec3::new(0.2, 0.9, 0.4), Vec3::new(0.5, 0.5, 0.8)],
        ];
        write_vtk_raw(&tris, &[[0.0; 3]; 2], &[[1.0; 3]; 2], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = (&mut lines).take(5).collect();
        assert_eq!(header[0], "# vtk DataFile Version 3.0");
        assert_eq!(header[3], "DATASET POLYDATA");
        assert_eq!(header[4], "POINTS 6 double");
        let mut flat = Vec::new();
        for line in lines.take(6) {
            for tok in line.split(' ') {
                flat.push(tok.parse::<f64>().unwrap());
            }
        }
        let expect: Vec<f64> = tris.iter().flatten().flat_map(|v| [v.x, v.y, v.z]).collect();
        assert_eq!(flat, expect);
    }

    #[test]
    fn csv_schema_and_values() {
        let dir = std::env::temp_dir().join("chsurf_csv");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("records.csv");
        let rec = StepRecord {
            time: 0.25,
            dt: 0.01,
            energy: 1.9635,
            mass: 6.2832,
            band_cells: 1234,
            active_nodes: 567,
            gmres_iters: 42,
            residual: 1e-10,
            inclusion_margin: 0.05,
        };
        write_csv(&[rec], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let row = lines.next().unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 9);
        assert_eq!(fields[0].parse::<f64>().unwrap(), 0.25);
        assert_eq!(fields[4].parse::<usize>().unwrap(), 1234);
        assert_eq!(fields[7].parse::<f64>().unwrap(), 1e-10);
    }
}
