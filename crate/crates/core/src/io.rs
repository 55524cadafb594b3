//! Output files: legacy VTK snapshots, CSV tables and JSON summaries.
//!
//! Every file goes through [`write_atomic`], which writes a sibling temporary
//! file and renames it over the target.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::SimplexMesh;
use crate::optimizer::HistoryRow;

/// Replaces `path` with `bytes` so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

enum Data<'a> {
    Scalars(&'a [f64]),
    Ints(&'a [i64]),
    Vectors(&'a [f64], usize),
}

/// Legacy ASCII unstructured grid with point and cell arrays.
pub struct VtkFile<'a> {
    mesh: &'a SimplexMesh,
    title: String,
    points: Vec<(String, Data<'a>)>,
    cells: Vec<(String, Data<'a>)>,
}

impl<'a> VtkFile<'a> {
    pub fn new(mesh: &'a SimplexMesh, title: &str) -> Self {
        VtkFile {
            mesh,
            title: title.replace('\n', " "),
            points: Vec::new(),
            cells: Vec::new(),
        }
    }

    pub fn point_scalars(mut self, name: &str, values: &'a [f64]) -> Result<Self> {
        check_len(name, values.len(), self.mesh.num_nodes())?;
        self.points.push((name.to_string(), Data::Scalars(values)));
        Ok(self)
    }

    /// Nodal vectors stored interleaved with `components` entries per node;
    /// padded to three components on output.
    pub fn point_vectors(mut self, name: &str, values: &'a [f64], components: usize) -> Result<Self> {
        if !(1..=3).contains(&components) {
            return Err(Error::validation(name, "needs 1 to 3 components"));
        }
        check_len(name, values.len(), self.mesh.num_nodes() * components)?;
        self.points.push((name.to_string(), Data::Vectors(values, components)));
        Ok(self)
    }

    pub fn cell_scalars(mut self, name: &str, values: &'a [f64]) -> Result<Self> {
        check_len(name, values.len(), self.mesh.num_elements())?;
        self.cells.push((name.to_string(), Data::Scalars(values)));
        Ok(self)
    }

    pub fn cell_ints(mut self, name: &str, values: &'a [i64]) -> Result<Self> {
        check_len(name, values.len(), self.mesh.num_elements())?;
        self.cells.push((name.to_string(), Data::Ints(values)));
        Ok(self)
    }

    pub fn render(&self) -> String {
        let m = self.mesh;
        let nv = m.nodes_per_element();
        let mut s = String::new();
        let _ = writeln!(s, "# vtk DataFile Version 3.0\n{}\nASCII\nDATASET UNSTRUCTURED_GRID", self.title);
        let _ = writeln!(s, "POINTS {} double", m.num_nodes());
        for x in m.nodes() {
            let _ = writeln!(s, "{} {} {}", x[0], x[1], x[2]);
        }
        let _ = writeln!(s, "CELLS {} {}", m.num_elements(), m.num_elements() * (nv + 1));
        for conn in m.elements() {
            s.push_str(&nv.to_string());
            for v in conn {
                let _ = write!(s, " {v}");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "CELL_TYPES {}", m.num_elements());
        let kind = if m.dim() == 2 { 5 } else { 10 };
        for _ in 0..m.num_elements() {
            let _ = writeln!(s, "{kind}");
        }
        if !self.points.is_empty() {
            let _ = writeln!(s, "POINT_DATA {}", m.num_nodes());
            for (name, data) in &self.points {
                render_array(&mut s, name, data);
            }
        }
        if !self.cells.is_empty() {
            let _ = writeln!(s, "CELL_DATA {}", m.num_elements());
            for (name, data) in &self.cells {
                render_array(&mut s, name, data);
            }
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.render().as_bytes())
    }
}

fn check_len(name: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::validation(name, format!("has {got} values, expected {want}")));
    }
    Ok(())
}

fn render_array(s: &mut String, name: &str, data: &Data) {
    let name = name.replace(char::is_whitespace, "_");
    match data {
        Data::Scalars(v) => {
            let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for x in *v {
                let _ = writeln!(s, "{x}");
            }
        }
        Data::Ints(v) => {
            let _ = writeln!(s, "SCALARS {name} int 1\nLOOKUP_TABLE default");
            for x in *v {
                let _ = writeln!(s, "{x}");
            }
        }
        Data::Vectors(v, k) => {
            let _ = writeln!(s, "VECTORS {name} double");
            for chunk in v.chunks_exact(*k) {
                let mut c = [0.0; 3];
                c[..*k].copy_from_slice(chunk);
                let _ = writeln!(s, "{} {} {}", c[0], c[1], c[2]);
            }
        }
    }
}

/// RFC-4180 table: CRLF records, quoting only where needed.
pub fn csv_string<H, R, F>(header: &[H], rows: R) -> Result<String>
where
    H: AsRef<[u8]>,
    R: IntoIterator<Item = Vec<F>>,
    F: AsRef<[u8]>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    let wrap = |e: csv::Error| Error::Config(format!("csv: {e}"));
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub const HISTORY_HEADER: [&str; 7] = ["iter", "objective", "volume_fraction", "G_vol", "J_h", "lambda_vol", "lambda_h"];

pub fn history_csv(rows: &[HistoryRow]) -> Result<String> {
    csv_string(
        &HISTORY_HEADER,
        rows.iter().map(|r| {
            vec![
                r.iter.to_string(),
                r.objective.to_string(),
                r.volume_fraction.to_string(),
                r.g_vol.to_string(),
                r.j_h.to_string(),
                r.lambda_vol.to_string(),
                r.lambda_h.to_string(),
            ]
        }),
    )
}

/// Pretty JSON with a trailing newline.
pub fn json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Config(format!("json: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, json_string(value)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_box_mesh, BoxSpec};

    #[test]
    fn vtk_layout_counts() {
        let m = generate_box_mesh(&BoxSpec::new_2d([0.0, 0.0], [1.0, 1.0], [2, 1])).unwrap();
        let phi = vec![1.0; m.num_nodes()];
        let u = vec![0.5; 2 * m.num_nodes()];
        let labels = vec![-1i64; m.num_elements()];
        let text = VtkFile::new(&m, "t")
            .point_scalars("phi", &phi)
            .unwrap()
            .point_vectors("u", &u, 2)
            .unwrap()
            .cell_ints("void_component", &labels)
            .unwrap()
            .render();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert!(text.contains("POINTS 6 double"));
        assert!(text.contains("CELLS 4 16"));
        assert!(text.contains("POINT_DATA 6"));
        assert!(text.contains("CELL_DATA 4"));
        assert!(text.contains("0.5 0.5 0\n"));
        let types = text.split("CELL_TYPES 4\n").nth(1).unwrap();
        assert_eq!(types.lines().take(4).filter(|l| *l == "5").count(), 4);
    }

    #[test]
    fn vtk_rejects_wrong_lengths() {
        let m = generate_box_mesh(&BoxSpec::new_2d([0.0, 0.0], [1.0, 1.0], [2, 1])).unwrap();
        assert!(VtkFile::new(&m, "t").point_scalars("phi", &[1.0]).is_err());
        assert!(VtkFile::new(&m, "t").cell_scalars("chi", &[1.0; 6]).is_err());
    }

    #[test]
    fn csv_quotes_and_crlf() {
        let s = csv_string(&["a", "b"], vec![vec!["1", "x,y"], vec!["2", "say \"hi\""]]).unwrap();
        assert_eq!(s, "a,b\r\n1,\"x,y\"\r\n2,\"say \"\"hi\"\"\"\r\n");
    }

    #[test]
    fn history_header_matches() {
        let row = HistoryRow {
            iter: 0,
            objective: 1.5,
            volume_fraction: 1.0,
            g_vol: 0.25,
            j_h: 0.0,
            lambda_vol: 0.0,
            lambda_h: 0.0,
        };
        let s = history_csv(&[row]).unwrap();
        assert_eq!(s, "iter,objective,volume_fraction,G_vol,J_h,lambda_vol,lambda_h\r\n0,1.5,1,0.25,0,0,0\r\n");
    }

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("out.txt");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "second");
        let entries: Vec<_> = fs::read_dir(path.parent().unwrap()).unwrap().collect();
        assert_eq!(entries.len(), 1);
    }
}
