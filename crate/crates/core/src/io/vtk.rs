//! Legacy ASCII VTK unstructured grids of bilinear quads.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

const VTK_QUAD: u32 = 9;

/// Quad grid with named cell and point fields.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VtkGrid {
    pub title: String,
    pub points: Vec<[f64; 2]>,
    pub cells: Vec<[usize; 4]>,
    pub cell_scalars: Vec<(String, Vec<f64>)>,
    pub point_scalars: Vec<(String, Vec<f64>)>,
    pub point_vectors: Vec<(String, Vec<[f64; 2]>)>,
}

impl VtkGrid {
    pub fn from_mesh(mesh: &Mesh, title: &str) -> Self {
        VtkGrid {
            title: title.to_string(),
            points: mesh.coords().to_vec(),
            cells: mesh.elements().to_vec(),
            ..Default::default()
        }
    }

    pub fn with_cell_scalar(mut self, name: &str, values: Vec<f64>) -> Self {
        self.cell_scalars.push((name.to_string(), values));
        self
    }

    pub fn with_point_scalar(mut self, name: &str, values: Vec<f64>) -> Self {
        self.point_scalars.push((name.to_string(), values));
        self
    }

    /// Adds a vector field from interleaved `[x0, y0, x1, y1, …]` values.
    pub fn with_point_vector(mut self, name: &str, interleaved: &[f64]) -> Self {
        let v = interleaved.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        self.point_vectors.push((name.to_string(), v));
        self
    }

    fn check(&self) -> Result<()> {
        let (np, nc) = (self.points.len(), self.cells.len());
        if self.cells.iter().flatten().any(|&n| n >= np) {
            return Err(Error::Internal("VTK cell references a missing point".into()));
        }
        let bad = |what: &str, name: &str, got: usize, want: usize| {
            Error::Internal(format!("{what} field '{name}' has {got} values, expected {want}"))
        };
        for (name, v) in &self.cell_scalars {
            if v.len() != nc {
                return Err(bad("cell", name, v.len(), nc));
            }
        }
        for (name, v) in &self.point_scalars {
            if v.len() != np {
                return Err(bad("point", name, v.len(), np));
            }
        }
        for (name, v) in &self.point_vectors {
            if v.len() != np {
                return Err(bad("point", name, v.len(), np));
            }
        }
        Ok(())
    }

    pub fn to_vtk_string(&self) -> Result<String> {
        self.check()?;
        let mut s = String::new();
        let title = if self.title.is_empty() { "pacm" } else { self.title.lines().next().unwrap_or("pacm") };
        let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
        let _ = writeln!(s, "POINTS {} double", self.points.len());
        for p in &self.points {
            let _ = writeln!(s, "{:e} {:e} 0", p[0], p[1]);
        }
        let _ = writeln!(s, "CELLS {} {}", self.cells.len(), 5 * self.cells.len());
        for c in &self.cells {
            let _ = writeln!(s, "4 {} {} {} {}", c[0], c[1], c[2], c[3]);
        }
        let _ = writeln!(s, "CELL_TYPES {}", self.cells.len());
        for _ in &self.cells {
            let _ = writeln!(s, "{VTK_QUAD}");
        }
        if !self.cell_scalars.is_empty() {
            let _ = writeln!(s, "CELL_DATA {}", self.cells.len());
            for (name, v) in &self.cell_scalars {
                write_scalars(&mut s, name, v);
            }
        }
        if !self.point_scalars.is_empty() || !self.point_vectors.is_empty() {
            let _ = writeln!(s, "POINT_DATA {}", self.points.len());
            for (name, v) in &self.point_scalars {
                write_scalars(&mut s, name, v);
            }
            for (name, v) in &self.point_vectors {
                let _ = writeln!(s, "VECTORS {} double", sanitize(name));
                for p in v {
                    let _ = writeln!(s, "{:e} {:e} 0", p[0], p[1]);
                }
            }
        }
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = self.to_vtk_string()?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<VtkGrid> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        VtkGrid::parse(&text)
    }

    /// Parses the subset of legacy VTK written by [`to_vtk_string`](Self::to_vtk_string).
    pub fn parse(text: &str) -> Result<VtkGrid> {
        let bad = |m: &str| Error::config(format!("VTK: {m}"));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file"))?;
        if !header.starts_with("# vtk DataFile") {
            return Err(bad("missing header"));
        }
        let title = lines.next().unwrap_or("").to_string();
        if lines.next().map(str::trim) != Some("ASCII") {
            return Err(bad("only ASCII files are supported"));
        }
        let mut tokens = lines.flat_map(str::split_whitespace).peekable();
        let mut next = |what: &str| tokens.next().ok_or_else(|| bad(&format!("unexpected end of file reading {what}")));
        let mut grid = VtkGrid {
            title,
            ..Default::default()
        };
        let num = |t: &str| t.parse::<f64>().map_err(|_| bad(&format!("bad number '{t}'")));
        let int = |t: &str| t.parse::<usize>().map_err(|_| bad(&format!("bad integer '{t}'")));

        if next("DATASET")? != "DATASET" || next("grid type")? != "UNSTRUCTURED_GRID" {
            return Err(bad("expected DATASET UNSTRUCTURED_GRID"));
        }
        let mut section = String::new();
        let mut count = 0;
        while let Ok(k) = next("section") {
            let key = k.to_string();
            match key.as_str() {
                "POINTS" => {
                    let n = int(next("point count")?)?;
                    next("point type")?;
                    for _ in 0..n {
                        let x = num(next("x")?)?;
                        let y = num(next("y")?)?;
                        num(next("z")?)?;
                        grid.points.push([x, y]);
                    }
                }
                "CELLS" => {
                    let n = int(next("cell count")?)?;
                    next("cell list size")?;
                    for _ in 0..n {
                        if int(next("cell size")?)? != 4 {
                            return Err(bad("only quads are supported"));
                        }
                        let mut c = [0; 4];
                        for v in &mut c {
                            *v = int(next("cell node")?)?;
                        }
                        grid.cells.push(c);
                    }
                }
                "CELL_TYPES" => {
                    let n = int(next("cell type count")?)?;
                    for _ in 0..n {
                        if int(next("cell type")?)? != VTK_QUAD as usize {
                            return Err(bad("only quads are supported"));
                        }
                    }
                }
                "CELL_DATA" | "POINT_DATA" => {
                    count = int(next("data count")?)?;
                    section = key;
                }
                "SCALARS" => {
                    let name = next("field name")?.to_string();
                    next("field type")?;
                    let mut t = next("LOOKUP_TABLE")?;
                    if t != "LOOKUP_TABLE" {
                        // optional component count
                        t = next("LOOKUP_TABLE")?;
                    }
                    if t != "LOOKUP_TABLE" {
                        return Err(bad("expected LOOKUP_TABLE"));
                    }
                    next("table name")?;
                    let mut v = Vec::with_capacity(count);
                    for _ in 0..count {
                        v.push(num(next("value")?)?);
                    }
                    match section.as_str() {
                        "CELL_DATA" => grid.cell_scalars.push((name, v)),
                        "POINT_DATA" => grid.point_scalars.push((name, v)),
                        _ => return Err(bad("SCALARS outside a data section")),
                    }
                }
                "VECTORS" => {
                    let name = next("field name")?.to_string();
                    next("field type")?;
                    if section != "POINT_DATA" {
                        return Err(bad("only point vectors are supported"));
                    }
                    let mut v = Vec::with_capacity(count);
                    for _ in 0..count {
                        let x = num(next("x")?)?;
                        let y = num(next("y")?)?;
                        num(next("z")?)?;
                        v.push([x, y]);
                    }
                    grid.point_vectors.push((name, v));
                }
                other => return Err(bad(&format!("unsupported keyword '{other}'"))),
            }
        }
        grid.check().map_err(|e| bad(&e.to_string()))?;
        Ok(grid)
    }

    pub fn cell_scalar(&self, name: &str) -> Option<&[f64]> {
        self.cell_scalars.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn point_scalar(&self, name: &str) -> Option<&[f64]> {
        self.point_scalars.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect()
}

fn write_scalars(s: &mut String, name: &str, v: &[f64]) {
    let _ = writeln!(s, "SCALARS {} double 1\nLOOKUP_TABLE default", sanitize(name));
    for x in v {
        let _ = writeln!(s, "{x:e}");
    }
}

/// Point values as the mean of the adjacent cell values.
pub fn cell_to_point(cells: &[[usize; 4]], n_points: usize, values: &[f64]) -> Vec<f64> {
    let mut sum = vec![0.0; n_points];
    let mut count = vec![0usize; n_points];
    for (c, nodes) in cells.iter().enumerate() {
        for &n in nodes {
            sum[n] += values[c];
            count[n] += 1;
        }
    }
    sum.iter()
        .zip(&count)
        .map(|(s, &k)| if k > 0 { s / k as f64 } else { 0.0 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_round_trip() {
        let mesh = Mesh::build_grid(1, 1, 1.0, 1.0, 0.1).unwrap();
        let g = VtkGrid::from_mesh(&mesh, "one").with_cell_scalar("rho", vec![1.0]);
        let back = VtkGrid::parse(&g.to_vtk_string().unwrap()).unwrap();
        assert_eq!(back.cells.len(), 1);
        assert_eq!(back.cell_scalar("rho"), Some(&[1.0][..]));
    }

    #[test]
    fn values_survive_round_trip() {
        let mesh = Mesh::build_grid(3, 2, 0.3, 0.2, 0.1).unwrap();
        let rho: Vec<f64> = (0..6).map(|i| (i as f64 * 0.37).sin().abs() / 3.0).collect();
        let p: Vec<f64> = (0..12).map(|i| 1e5 * (i as f64 / 7.0)).collect();
        let u: Vec<f64> = (0..24).map(|i| 1e-4 * (i as f64).cos() / 3.0).collect();
        let g = VtkGrid::from_mesh(&mesh, "t")
            .with_cell_scalar("rho", rho.clone())
            .with_point_scalar("pressure", p.clone())
            .with_point_vector("displacement", &u);
        let back = VtkGrid::parse(&g.to_vtk_string().unwrap()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let mesh = Mesh::build_grid(2, 2, 1.0, 1.0, 0.1).unwrap();
        let g = VtkGrid::from_mesh(&mesh, "t").with_cell_scalar("rho", vec![1.0; 3]);
        assert!(g.to_vtk_string().is_err());
    }

    #[test]
    fn cell_to_point_on_four_cells() {
        // 2×2 cells with values 1, 2, 3, 4: the centre node sees all four
        let mesh = Mesh::build_grid(2, 2, 2.0, 2.0, 0.1).unwrap();
        let v = cell_to_point(mesh.elements(), mesh.n_nodes(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(v[4], 2.5);
        assert_eq!(v[0], 1.0);
        assert_eq!(v[1], 1.5);
        assert_eq!(v[3], 2.0);
        assert_eq!(v[8], 4.0);
    }
}
