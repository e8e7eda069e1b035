//! File formats: 1D measures and point clouds as CSV, grid fields as PGM or
//! CSV matrices, flows as pairs of matrices, solver history as CSV. Every
//! writer goes through a temporary file renamed into place.
//!
//! Grid fields are stored row-major: row `i`, column `j` holds cell `(i, j)`.
//! PGM output is 16-bit and scaled so the largest value maps to 65535;
//! reading a PGM back normalizes to unit mass.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::dr::HistoryEntry;
use crate::error::{Error, Result};
use crate::geom::PointCloud;
use crate::grid2d::{FlowField, GridMeasure, ScalarField};
use crate::median1d::Measure1D;

/// Largest PGM sample value.
pub const PGM_MAXVAL: u32 = 65535;

/// Writes `bytes` to a temporary file next to `path` and renames it over
/// `path`, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes())
}

fn parse_f64(field: &str, line: u64) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line}: `{field}` is not a number")))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

fn headers(reader: &mut csv::Reader<&[u8]>) -> Result<Vec<String>> {
    Ok(reader.headers().map_err(csv_err)?.iter().map(str::to_owned).collect())
}

/// Reads rows of `columns` numbers, checking the header.
fn read_columns(text: &str, columns: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv_reader(text);
    let found = headers(&mut reader)?;
    if found != columns {
        return Err(Error::Parse(format!("expected header `{}`, found `{}`", columns.join(","), found.join(","))));
    }
    let mut cols = vec![Vec::new(); columns.len()];
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        for (k, field) in record.iter().enumerate() {
            cols[k].push(parse_f64(field, line)?);
        }
    }
    Ok(cols)
}

/// Parses a 1D measure from CSV with header `x,mass` (atoms) or
/// `edge_left,edge_right,mass` (histogram bins). Masses are normalized.
pub fn parse_measure_1d(text: &str) -> Result<Measure1D> {
    let header = headers(&mut csv_reader(text))?;
    match header.len() {
        2 => {
            let cols = read_columns(text, &["x", "mass"])?;
            Measure1D::from_atoms(&cols[0], &cols[1])
        }
        _ => {
            let cols = read_columns(text, &["edge_left", "edge_right", "mass"])?;
            Measure1D::from_histogram(&cols[0], &cols[1], &cols[2])
        }
    }
}

/// Atomic measures as `x,mass`, anything else as `edge_left,edge_right,mass`
/// with atoms written as zero-width bins.
pub fn format_measure_1d(m: &Measure1D) -> String {
    let mut out = String::new();
    if m.is_atomic() {
        out.push_str("x,mass\n");
        for (x, w) in m.atoms() {
            out.push_str(&format!("{x},{w}\n"));
        }
    } else {
        out.push_str("edge_left,edge_right,mass\n");
        for s in m.segments().filter(|s| s.mass() > 0.0) {
            out.push_str(&format!("{},{},{}\n", s.x0, s.x1, s.mass()));
        }
    }
    out
}

pub fn read_measure_1d(path: &Path) -> Result<Measure1D> {
    parse_measure_1d(&fs::read_to_string(path)?)
}

pub fn write_measure_1d(path: &Path, m: &Measure1D) -> Result<()> {
    write_atomic(path, format_measure_1d(m).as_bytes())
}

/// Parses a point cloud from CSV with header `x,y,mass`.
pub fn parse_point_cloud(text: &str) -> Result<PointCloud> {
    let cols = read_columns(text, &["x", "y", "mass"])?;
    let points = cols[0].iter().zip(&cols[1]).map(|(x, y)| [*x, *y]).collect();
    PointCloud::normalized(points, cols[2].clone())
}

pub fn format_point_cloud(c: &PointCloud) -> String {
    let mut out = String::from("x,y,mass\n");
    for (pt, m) in c.iter() {
        out.push_str(&format!("{},{},{}\n", pt[0], pt[1], m));
    }
    out
}

pub fn read_point_cloud(path: &Path) -> Result<PointCloud> {
    parse_point_cloud(&fs::read_to_string(path)?)
}

pub fn write_point_cloud(path: &Path, c: &PointCloud) -> Result<()> {
    write_atomic(path, format_point_cloud(c).as_bytes())
}

/// Parses a square CSV matrix without header, one grid row per line.
pub fn parse_matrix_csv(text: &str) -> Result<ScalarField> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut rows = 0usize;
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        if *width.get_or_insert(record.len()) != record.len() {
            return Err(Error::Parse(format!("line {line}: ragged matrix row")));
        }
        for field in record.iter() {
            values.push(parse_f64(field, line)?);
        }
        rows += 1;
    }
    if width != Some(rows) {
        return Err(Error::Parse(format!("matrix is {rows} × {}, expected square", width.unwrap_or(0))));
    }
    ScalarField::new(rows, values)
}

pub fn format_matrix_csv(f: &ScalarField) -> String {
    let p = f.side();
    let mut out = String::new();
    for row in f.as_slice().chunks(p) {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn read_matrix_csv(path: &Path) -> Result<ScalarField> {
    parse_matrix_csv(&fs::read_to_string(path)?)
}

pub fn write_matrix_csv(path: &Path, f: &ScalarField) -> Result<()> {
    write_atomic(path, format_matrix_csv(f).as_bytes())
}

/// Splits a PGM header into tokens, skipping `#` comments. Returns the four
/// header tokens and the offset just past the single whitespace byte that
/// ends the header.
fn pgm_header(bytes: &[u8]) -> Result<(Vec<String>, usize)> {
    let mut tokens = Vec::new();
    let mut k = 0;
    while tokens.len() < 4 {
        while k < bytes.len() && (bytes[k].is_ascii_whitespace() || bytes[k] == b'#') {
            if bytes[k] == b'#' {
                while k < bytes.len() && bytes[k] != b'\n' {
                    k += 1;
                }
            } else {
                k += 1;
            }
        }
        let start = k;
        while k < bytes.len() && !bytes[k].is_ascii_whitespace() && bytes[k] != b'#' {
            k += 1;
        }
        if start == k {
            return Err(Error::Parse("truncated PGM header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..k]).into_owned());
    }
    Ok((tokens, k + 1))
}

/// Decodes a square P2 or P5 image into raw sample values.
pub fn parse_pgm(bytes: &[u8]) -> Result<ScalarField> {
    let (header, data_start) = pgm_header(bytes)?;
    let num = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad PGM header field `{s}`")));
    let (width, height, maxval) = (num(&header[1])?, num(&header[2])?, num(&header[3])?);
    if width != height {
        return Err(Error::Parse(format!("PGM is {width} × {height}, expected square")));
    }
    if maxval == 0 || maxval > PGM_MAXVAL as usize {
        return Err(Error::Parse(format!("PGM maxval {maxval} outside 1..=65535")));
    }
    let n = width * height;
    let values: Vec<f64> = match header[0].as_str() {
        "P2" => {
            let text = std::str::from_utf8(bytes.get(data_start.min(bytes.len())..).unwrap_or(&[]))
                .map_err(|_| Error::Parse("P2 body is not text".into()))?;
            let vals = text
                .split_ascii_whitespace()
                .map(|t| t.parse::<u32>().map(f64::from).map_err(|_| Error::Parse(format!("bad P2 sample `{t}`"))))
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != n {
                return Err(Error::Parse(format!("P2 body has {} samples, expected {n}", vals.len())));
            }
            vals
        }
        "P5" => {
            let wide = maxval > 255;
            let need = n * if wide { 2 } else { 1 };
            let body = bytes
                .get(data_start..data_start + need)
                .ok_or_else(|| Error::Parse("truncated P5 body".into()))?;
            if wide {
                body.chunks_exact(2).map(|b| f64::from(u16::from_be_bytes([b[0], b[1]]))).collect()
            } else {
                body.iter().map(|b| f64::from(*b)).collect()
            }
        }
        other => return Err(Error::Parse(format!("unsupported PGM magic `{other}`"))),
    };
    if values.iter().any(|v| *v > maxval as f64) {
        return Err(Error::Parse("PGM sample exceeds maxval".into()));
    }
    ScalarField::new(width, values)
}

/// Encodes a field as a 16-bit PGM, P5 when `binary` and P2 otherwise.
/// Values are scaled so the maximum maps to 65535; negatives become zero.
/// Each cell is reproduced to within `max / 131070` absolute error.
pub fn encode_pgm(f: &ScalarField, binary: bool) -> Vec<u8> {
    let p = f.side();
    let top = f.max();
    let scale = if top > 0.0 { PGM_MAXVAL as f64 / top } else { 0.0 };
    let q: Vec<u16> = f
        .as_slice()
        .iter()
        .map(|v| (v.max(0.0) * scale).round().min(PGM_MAXVAL as f64) as u16)
        .collect();
    let mut out = format!("{}\n{p} {p}\n{PGM_MAXVAL}\n", if binary { "P5" } else { "P2" }).into_bytes();
    if binary {
        for v in q {
            out.extend_from_slice(&v.to_be_bytes());
        }
    } else {
        for row in q.chunks(p) {
            let line: Vec<String> = row.iter().map(u16::to_string).collect();
            out.extend_from_slice(line.join(" ").as_bytes());
            out.push(b'\n');
        }
    }
    out
}

pub fn write_pgm(path: &Path, f: &ScalarField) -> Result<()> {
    write_atomic(path, &encode_pgm(f, true))
}

/// Reads a grid measure from `.pgm` or `.csv`, normalizing to unit mass.
pub fn read_grid_measure(path: &Path) -> Result<GridMeasure> {
    let field = match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("pgm") => parse_pgm(&fs::read(path)?)?,
        Some(e) if e.eq_ignore_ascii_case("csv") => read_matrix_csv(path)?,
        _ => {
            return Err(Error::Parse(format!(
                "{}: expected a .pgm or .csv grid file",
                path.display()
            )))
        }
    };
    GridMeasure::from_density(field)
}

fn flow_paths(stem: &Path) -> (PathBuf, PathBuf) {
    let with = |suffix: &str| {
        let mut s = stem.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    };
    (with("_vx.csv"), with("_vy.csv"))
}

/// Writes `<stem>_vx.csv` and `<stem>_vy.csv`.
pub fn write_flow(stem: &Path, flow: &FlowField) -> Result<()> {
    let p = flow.side();
    let (px, py) = flow_paths(stem);
    write_matrix_csv(&px, &ScalarField::new(p, flow.vx().to_vec())?)?;
    write_matrix_csv(&py, &ScalarField::new(p, flow.vy().to_vec())?)
}

pub fn read_flow(stem: &Path) -> Result<FlowField> {
    let (px, py) = flow_paths(stem);
    let (vx, vy) = (read_matrix_csv(&px)?, read_matrix_csv(&py)?);
    if vx.side() != vy.side() {
        return Err(Error::GridMismatch {
            expected: vx.side(),
            got: vy.side(),
        });
    }
    FlowField::new(vx.side(), vx.into_vec(), vy.into_vec())
}

/// History as CSV `iter,residual,primal_value`.
pub fn format_history(history: &[HistoryEntry]) -> String {
    let mut out = String::from("iter,residual,primal_value\n");
    for h in history {
        out.push_str(&format!("{},{},{}\n", h.iter, h.residual, h.primal_value));
    }
    out
}

pub fn parse_history(text: &str) -> Result<Vec<HistoryEntry>> {
    let cols = read_columns(text, &["iter", "residual", "primal_value"])?;
    Ok((0..cols[0].len())
        .map(|k| HistoryEntry {
            iter: cols[0][k] as usize,
            residual: cols[1][k],
            primal_value: cols[2][k],
        })
        .collect())
}

/// Serializes `value` as pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atoms_roundtrip_exactly() {
        let m = Measure1D::from_atoms(&[0.1, -2.5, 3.0], &[0.2, 0.3, 0.5]).unwrap();
        let back = parse_measure_1d(&format_measure_1d(&m)).unwrap();
        assert_eq!(back, m);
        assert!(format_measure_1d(&m).starts_with("x,mass\n"));
    }

    #[test]
    fn histogram_with_atom_roundtrips() {
        let m = Measure1D::from_histogram(&[0.0, 1.0, 2.0], &[0.5, 1.0, 3.0], &[0.25, 0.25, 0.5]).unwrap();
        let text = format_measure_1d(&m);
        assert!(text.starts_with("edge_left,edge_right,mass\n"));
        let back = parse_measure_1d(&text).unwrap();
        for (a, b) in back.points().iter().zip(m.points()) {
            assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_wrong_headers_and_numbers() {
        assert!(parse_measure_1d("pos,mass\n0,1\n").is_err());
        assert!(parse_measure_1d("x,mass\n0,abc\n").is_err());
        assert!(parse_matrix_csv("1,2\n3\n").is_err());
        assert!(parse_matrix_csv("1,2,3\n4,5,6\n").is_err());
    }

    #[test]
    fn matrix_roundtrip_is_exact() {
        let f = ScalarField::from_fn(5, |i, j| (i as f64 + 0.1) / (j as f64 + 3.0));
        assert_eq!(parse_matrix_csv(&format_matrix_csv(&f)).unwrap(), f);
    }

    #[test]
    fn pgm_is_row_major() {
        let f = ScalarField::from_fn(3, |i, j| (3 * i + j) as f64);
        let text = String::from_utf8(encode_pgm(&f, false)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[3], "0 8192 16384");
    }

    #[test]
    fn pgm_roundtrip_within_quantization() {
        let f = ScalarField::from_fn(16, |i, j| ((i * 7 + j * 3) % 11) as f64 + 0.37);
        for binary in [true, false] {
            let g = parse_pgm(&encode_pgm(&f, binary)).unwrap();
            let scale = f.max() / PGM_MAXVAL as f64;
            for (a, b) in f.as_slice().iter().zip(g.as_slice()) {
                assert!((a - b * scale).abs() <= 0.5 * scale + 1e-12);
            }
        }
    }

    #[test]
    fn pgm_reader_accepts_comments_and_8_bit() {
        let mut bytes = b"P5\n# comment\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 10, 20, 255]);
        let f = parse_pgm(&bytes).unwrap();
        assert_eq!(f.as_slice(), &[0.0, 10.0, 20.0, 255.0]);
        assert!(parse_pgm(b"P2\n2 3\n255\n1 2 3 4 5 6\n").is_err());
        assert!(parse_pgm(b"P2\n2 2\n255\n1 2 3\n").is_err());
    }

    #[test]
    fn point_cloud_and_history_roundtrip() {
        let c = PointCloud::new(vec![[0.5, 1.0], [-2.0, 3.25]], vec![0.25, 0.75]).unwrap();
        assert_eq!(parse_point_cloud(&format_point_cloud(&c)).unwrap(), c);
        let h = vec![HistoryEntry { iter: 1, residual: 1e-3, primal_value: 2.5 }];
        assert_eq!(parse_history(&format_history(&h)).unwrap(), h);
    }

    #[test]
    fn atomic_writes_replace_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn flows_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("flow_0");
        let flow = FlowField::new(2, vec![1.0, -0.5, 0.25, 0.0], vec![0.0, 2.0, -1.0, 3.5]).unwrap();
        write_flow(&stem, &flow).unwrap();
        assert!(dir.path().join("flow_0_vx.csv").exists());
        assert_eq!(read_flow(&stem).unwrap(), flow);
    }
}
