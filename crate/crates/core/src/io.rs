//! Plain-text serialization of densities, operators, grids, spectra and
//! entropy curves.
//!
//! Formats:
//! - density CSV: header `M,delta`, one row with their values, then `M` rows
//!   of `M` values; row `i` is the q-cell, column `j` the p-cell.
//! - density JSON: `{"M", "delta", "values": [[..]; M]}`, same layout.
//! - orbits JSON: array of `{"T", "n", "points": [{"q", "p"}]}`.
//! - matrix JSON: `{"dim", "data": [[re, im]; dim^2]}`, row-major.
//! - grid CSV: `N` rows of `N` values, row `a` is `q = a/N`, column `b` is
//!   `p = b/N`; metadata JSON sidecar `{"N", "delta", "T", "kind"}`.
//! - points CSV: `a,b,q,p,value`.
//! - spectrum CSV: `re,im,modulus`.
//! - entropy CSV: `#`-prefixed `key=value` metadata lines, then `T,mean,std`.
//!
//! Floats are written by [`num`] in shortest round-trip form, so equal
//! inputs give byte-identical files.

use std::io::{BufRead, Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::classical::{ClassicalDensity, PeriodicOrbit};
use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, C64};
use crate::phasespace::HusimiGrid;
use crate::spectral::{EntropyCurve, EntropyPoint};

/// Shortest round-trip form, with an exponent for very small or large values.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("bad number {s:?}: {e}")))
}

fn csv_reader<R: Read>(r: R, headers: bool) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(headers)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(r)
}

fn write_rows<W: Write>(w: W, header: Option<&[&str]>, rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut out = csv::WriterBuilder::new().flexible(true).from_writer(w);
    if let Some(h) = header {
        out.write_record(h)?;
    }
    for row in rows {
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

fn matrix_rows(m: &DMatrix<f64>) -> impl Iterator<Item = Vec<String>> + '_ {
    (0..m.nrows()).map(move |i| (0..m.ncols()).map(|j| num(m[(i, j)])).collect())
}

fn read_square<R: Read>(reader: &mut csv::Reader<R>) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        rows.push(rec.iter().map(parse_f64).collect::<Result<_>>()?);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse(format!("expected a square table, found {n} rows")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn write_density_csv<W: Write>(w: W, f: &ClassicalDensity, delta: f64) -> Result<()> {
    let head = vec![f.resolution().to_string(), num(delta)];
    write_rows(w, Some(&["M", "delta"]), std::iter::once(head).chain(matrix_rows(f.values())))
}

/// Returns the density and `delta`.
pub fn read_density_csv<R: Read>(r: R) -> Result<(ClassicalDensity, f64)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut records = reader.records();
    let head = records.next().ok_or_else(|| Error::Parse("missing M,delta row".into()))??;
    let m = parse_f64(head.get(0).unwrap_or(""))? as usize;
    let delta = parse_f64(head.get(1).unwrap_or(""))?;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    for rec in records {
        rows.push(rec?.iter().map(parse_f64).collect::<Result<_>>()?);
    }
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(Error::Parse(format!("density table is not {m} x {m}")));
    }
    let values = DMatrix::from_fn(m, m, |i, j| rows[i][j]);
    Ok((ClassicalDensity::new(values)?, delta))
}

#[derive(Debug, Serialize, Deserialize)]
struct DensityRecord {
    #[serde(rename = "M")]
    m: usize,
    delta: f64,
    values: Vec<Vec<f64>>,
}

pub fn write_density_json<W: Write>(w: W, f: &ClassicalDensity, delta: f64) -> Result<()> {
    let m = f.resolution();
    let rec = DensityRecord {
        m,
        delta,
        values: (0..m).map(|i| (0..m).map(|j| f.get(i, j)).collect()).collect(),
    };
    serde_json::to_writer_pretty(w, &rec)?;
    Ok(())
}

pub fn read_density_json<R: Read>(r: R) -> Result<(ClassicalDensity, f64)> {
    let rec: DensityRecord = serde_json::from_reader(r)?;
    let m = rec.m;
    if rec.values.len() != m || rec.values.iter().any(|r| r.len() != m) {
        return Err(Error::Parse(format!("density values are not {m} x {m}")));
    }
    let values = DMatrix::from_fn(m, m, |i, j| rec.values[i][j]);
    Ok((ClassicalDensity::new(values)?, rec.delta))
}

pub fn write_orbits_json<W: Write>(w: W, orbits: &[PeriodicOrbit]) -> Result<()> {
    serde_json::to_writer_pretty(w, orbits)?;
    Ok(())
}

pub fn read_orbits_json<R: Read>(r: R) -> Result<Vec<PeriodicOrbit>> {
    Ok(serde_json::from_reader(r)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct MatrixRecord {
    dim: usize,
    data: Vec<[f64; 2]>,
}

/// Square complex matrix (operator or density matrix) as row-major pairs.
pub fn write_matrix_json<W: Write>(w: W, m: &ComplexMatrix) -> Result<()> {
    let n = m.nrows();
    let rec = MatrixRecord {
        dim: n,
        data: (0..n * n).map(|k| {
            let z = m[(k / n, k % n)];
            [z.re, z.im]
        }).collect(),
    };
    serde_json::to_writer(w, &rec)?;
    Ok(())
}

pub fn read_matrix_json<R: Read>(r: R) -> Result<ComplexMatrix> {
    let rec: MatrixRecord = serde_json::from_reader(r)?;
    let n = rec.dim;
    if rec.data.len() != n * n {
        return Err(Error::Parse(format!("expected {} entries, found {}", n * n, rec.data.len())));
    }
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        let [re, im] = rec.data[i * n + j];
        C64::new(re, im)
    }))
}

/// Sidecar describing a lattice grid file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMetadata {
    #[serde(rename = "N")]
    pub n: usize,
    pub delta: f64,
    #[serde(rename = "T")]
    pub t: usize,
    /// `husimi` or `return-probability`.
    pub kind: String,
}

pub fn write_grid_csv<W: Write>(w: W, grid: &HusimiGrid) -> Result<()> {
    write_rows(w, None, matrix_rows(grid.values()))
}

pub fn read_grid_csv<R: Read>(r: R) -> Result<HusimiGrid> {
    HusimiGrid::from_values(read_square(&mut csv_reader(r, false))?)
}

pub fn write_grid_metadata<W: Write>(w: W, meta: &GridMetadata) -> Result<()> {
    serde_json::to_writer_pretty(w, meta)?;
    Ok(())
}

pub fn read_grid_metadata<R: Read>(r: R) -> Result<GridMetadata> {
    Ok(serde_json::from_reader(r)?)
}

/// Values at scattered lattice points `(a, b, value)`.
pub fn write_points_csv<W: Write>(w: W, n: usize, points: &[(usize, usize, f64)]) -> Result<()> {
    let nf = n as f64;
    write_rows(
        w,
        Some(&["a", "b", "q", "p", "value"]),
        points.iter().map(|&(a, b, v)| {
            vec![a.to_string(), b.to_string(), num(a as f64 / nf), num(b as f64 / nf), num(v)]
        }),
    )
}

pub fn read_points_csv<R: Read>(r: R) -> Result<Vec<(usize, usize, f64)>> {
    let mut reader = csv_reader(r, true);
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let field = |k: usize| rec.get(k).ok_or_else(|| Error::Parse(format!("missing column {k}")));
        let a = field(0)?.parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?;
        let b = field(1)?.parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?;
        out.push((a, b, parse_f64(field(4)?)?));
    }
    Ok(out)
}

pub fn write_spectrum_csv<W: Write>(w: W, values: &[C64]) -> Result<()> {
    write_rows(
        w,
        Some(&["re", "im", "modulus"]),
        values.iter().map(|z| vec![num(z.re), num(z.im), num(z.norm())]),
    )
}

pub fn read_spectrum_csv<R: Read>(r: R) -> Result<Vec<C64>> {
    let mut reader = csv_reader(r, true);
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        out.push(C64::new(parse_f64(&rec[0])?, parse_f64(&rec[1])?));
    }
    Ok(out)
}

pub fn write_entropy_csv<W: Write>(mut w: W, curve: &EntropyCurve) -> Result<()> {
    writeln!(w, "# N={}", curve.n)?;
    writeln!(w, "# delta={}", num(curve.delta))?;
    writeln!(w, "# samples={}", curve.samples)?;
    writeln!(w, "# seed={}", curve.seed)?;
    if let Some(fit) = curve.slope {
        writeln!(w, "# slope={}", num(fit.slope))?;
        writeln!(w, "# intercept={}", num(fit.intercept))?;
        writeln!(w, "# t_lin={}", fit.t_lin)?;
    }
    write_rows(
        w,
        Some(&["T", "mean", "std"]),
        curve.points.iter().map(|p| vec![p.t.to_string(), num(p.mean), num(p.std)]),
    )
}

/// `key=value` metadata lines in file order.
pub type Metadata = Vec<(String, String)>;

/// Metadata lines and the data rows.
pub fn read_entropy_csv<R: BufRead>(r: R) -> Result<(Metadata, Vec<EntropyPoint>)> {
    let mut meta = Vec::new();
    let mut body = String::new();
    for line in r.lines() {
        let line = line?;
        match line.strip_prefix('#') {
            Some(rest) => {
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("bad metadata line {line:?}")))?;
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
            None => {
                body.push_str(&line);
                body.push('\n');
            }
        }
    }
    let mut reader = csv_reader(body.as_bytes(), true);
    let mut points = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let t = rec[0].parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?;
        points.push(EntropyPoint {
            t,
            mean: parse_f64(&rec[1])?,
            std: parse_f64(&rec[2])?,
        });
    }
    Ok((meta, points))
}

/// Matplotlib script rendering a grid CSV as a heatmap with `q` on the
/// horizontal axis.
pub fn heatmap_script(csv_name: &str, title: &str) -> String {
    format!(
        "import numpy as np\n\
         import matplotlib.pyplot as plt\n\
         \n\
         grid = np.loadtxt({csv_name:?}, delimiter=\",\")\n\
         n = grid.shape[0]\n\
         plt.imshow(grid.T, origin=\"lower\", extent=(0, 1, 0, 1), cmap=\"viridis\")\n\
         plt.xlabel(\"q\")\n\
         plt.ylabel(\"p\")\n\
         plt.title({title:?})\n\
         plt.colorbar()\n\
         plt.savefig({png:?}, dpi=150)\n",
        png = format!("{}.png", csv_name.trim_end_matches(".csv")),
    )
}
