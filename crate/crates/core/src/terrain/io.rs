//! ESRI ASCII and CSV grid readers and writers.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Cell, GeoRef, Mask, TerrainGrid};
use crate::error::{Error, Result};
use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridFormat {
    EsriAscii,
    Csv,
}

impl std::str::FromStr for GridFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "esri_ascii" | "asc" | "esri" => Ok(GridFormat::EsriAscii),
            "csv" => Ok(GridFormat::Csv),
            other => Err(Error::Config(format!(
                "unknown grid format {other:?} (expected esri_ascii or csv)"
            ))),
        }
    }
}

/// How the existing lower water body is identified.
#[derive(Debug, Clone, PartialEq)]
pub enum LowerSpec {
    /// Cells whose elevation is within `tolerance` of `level`. For CSV input the
    /// level may be omitted and is then read from the metadata sidecar.
    ByElevation { level: Option<f64>, tolerance: f64 },
    /// ESRI ASCII raster of the same shape; nonzero cells are lower body. The
    /// water level defaults to the mean elevation of the masked cells.
    MaskFile { path: PathBuf, level: Option<f64> },
}

impl LowerSpec {
    pub fn by_elevation(level: f64, tolerance: f64) -> Self {
        LowerSpec::ByElevation {
            level: Some(level),
            tolerance,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Pad non-square inputs with NODATA instead of rejecting them.
    pub pad_to_square: bool,
    /// Metadata sidecar for CSV grids; defaults to the CSV path with extension `.meta`.
    pub csv_metadata: Option<PathBuf>,
}

/// A raw raster as stored in an ESRI ASCII file.
#[derive(Debug, Clone, PartialEq)]
pub struct AsciiRaster {
    pub rows: usize,
    pub cols: usize,
    pub cellsize: f64,
    pub georef: GeoRef,
    pub nodata: Option<f64>,
    pub values: Vec<f64>,
}

impl AsciiRaster {
    pub fn is_nodata(&self, v: f64) -> bool {
        self.nodata.is_some_and(|nd| v == nd)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let header_err = |message: String| Error::MalformedHeader {
            path: path.to_path_buf(),
            message,
        };
        let mut header: HashMap<String, f64> = HashMap::new();
        let mut lines = text.lines().enumerate().peekable();
        while let Some((_, line)) = lines.peek() {
            let mut tokens = line.split_whitespace();
            let Some(key) = tokens.next() else {
                lines.next();
                continue;
            };
            if !key.starts_with(|c: char| c.is_ascii_alphabetic()) {
                break;
            }
            let key = key.to_ascii_lowercase();
            let value = tokens
                .next()
                .ok_or_else(|| header_err(format!("missing value for {key}")))?;
            let value: f64 = value
                .parse()
                .map_err(|_| header_err(format!("bad value {value:?} for {key}")))?;
            if tokens.next().is_some() {
                return Err(header_err(format!("trailing tokens after {key}")));
            }
            const KNOWN: [&str; 8] = [
                "ncols",
                "nrows",
                "xllcorner",
                "xllcenter",
                "yllcorner",
                "yllcenter",
                "cellsize",
                "nodata_value",
            ];
            if !KNOWN.contains(&key.as_str()) {
                return Err(header_err(format!("unknown header key {key}")));
            }
            header.insert(key, value);
            lines.next();
        }
        let count = |key: &str| -> Result<usize> {
            let v = *header
                .get(key)
                .ok_or_else(|| header_err(format!("missing {key}")))?;
            if v < 1.0 || v.fract() != 0.0 {
                return Err(header_err(format!("{key} must be a positive integer, got {v}")));
            }
            Ok(v as usize)
        };
        let cols = count("ncols")?;
        let rows = count("nrows")?;
        let cellsize = *header
            .get("cellsize")
            .ok_or_else(|| header_err("missing cellsize".into()))?;
        if !(cellsize > 0.0) {
            return Err(header_err(format!("cellsize must be positive, got {cellsize}")));
        }
        let half = cellsize / 2.0;
        let xll = header
            .get("xllcorner")
            .copied()
            .or_else(|| header.get("xllcenter").map(|v| v - half))
            .unwrap_or(0.0);
        let yll = header
            .get("yllcorner")
            .copied()
            .or_else(|| header.get("yllcenter").map(|v| v - half))
            .unwrap_or(0.0);

        let mut values = Vec::with_capacity(rows * cols);
        let mut data_rows = 0;
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let start = values.len();
            for token in line.split_whitespace() {
                values.push(token.parse::<f64>().map_err(|_| Error::NonNumeric {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    token: token.to_string(),
                })?);
            }
            let found = values.len() - start;
            if found != cols {
                return Err(Error::InconsistentRowLength {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    expected: cols,
                    found,
                });
            }
            data_rows += 1;
        }
        if data_rows != rows {
            return Err(header_err(format!("nrows is {rows} but {data_rows} data rows found")));
        }
        Ok(AsciiRaster {
            rows,
            cols,
            cellsize,
            georef: GeoRef { xll, yll },
            nodata: header.get("nodata_value").copied(),
            values,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        AsciiRaster::parse(&text, path)
    }

    /// Renders the raster; integral values are printed without a fraction.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "ncols {}", self.cols);
        let _ = writeln!(out, "nrows {}", self.rows);
        let _ = writeln!(out, "xllcorner {}", self.georef.xll);
        let _ = writeln!(out, "yllcorner {}", self.georef.yll);
        let _ = writeln!(out, "cellsize {}", self.cellsize);
        if let Some(nd) = self.nodata {
            let _ = writeln!(out, "NODATA_value {nd}");
        }
        for row in self.values.chunks(self.cols) {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }
}

/// Loads a terrain grid and marks its lower water body.
pub fn load_grid<T: Scalar>(
    path: &Path,
    format: GridFormat,
    lower_spec: &LowerSpec,
    options: &LoadOptions,
) -> Result<TerrainGrid<T>> {
    let (raster, sidecar_level) = match format {
        GridFormat::EsriAscii => (AsciiRaster::read(path)?, None),
        GridFormat::Csv => read_csv(path, options.csv_metadata.as_deref())?,
    };
    let raster = if raster.rows != raster.cols {
        if !options.pad_to_square {
            return Err(Error::NotSquare {
                rows: raster.rows,
                cols: raster.cols,
            });
        }
        pad_square(raster)
    } else {
        raster
    };
    let (rows, cols) = (raster.rows, raster.cols);
    let nodata = Mask::from_fn(rows, cols, |c| raster.is_nodata(raster.values[c.row * cols + c.col]));

    let (lower, level) = match lower_spec {
        LowerSpec::ByElevation { level, tolerance } => {
            let level = level.or(sidecar_level).ok_or_else(|| {
                Error::Config("lower body level not given and no metadata sidecar provides it".into())
            })?;
            let mask = Mask::from_fn(rows, cols, |c| {
                !nodata.contains(c) && (raster.values[c.row * cols + c.col] - level).abs() <= *tolerance
            });
            (mask, level)
        }
        LowerSpec::MaskFile { path: mask_path, level } => {
            let m = AsciiRaster::read(mask_path)?;
            let m = if (m.rows, m.cols) != (rows, cols) && options.pad_to_square {
                pad_square(m)
            } else {
                m
            };
            if (m.rows, m.cols) != (rows, cols) {
                return Err(Error::InvalidGrid(format!(
                    "lower mask is {}x{} but grid is {rows}x{cols}",
                    m.rows, m.cols
                )));
            }
            let mask = Mask::from_fn(rows, cols, |c| {
                let v = m.values[c.row * cols + c.col];
                !m.is_nodata(v) && v != 0.0 && !nodata.contains(c)
            });
            let level = match level.or(sidecar_level) {
                Some(l) => l,
                None if mask.is_empty() => 0.0,
                None => {
                    mask.cells().map(|c| raster.values[c.row * cols + c.col]).sum::<f64>()
                        / mask.count() as f64
                }
            };
            (mask, level)
        }
    };
    if lower.is_empty() {
        return Err(Error::EmptyLowerMask);
    }
    let elevations = raster.values.iter().map(|v| T::lit(*v)).collect();
    Ok(
        TerrainGrid::new(rows, cols, T::lit(raster.cellsize), elevations, lower, nodata, T::lit(level))?
            .with_georef(raster.georef),
    )
}

fn pad_square(r: AsciiRaster) -> AsciiRaster {
    let n = r.rows.max(r.cols);
    let fill = r.nodata.unwrap_or(-9999.0);
    let mut values = vec![fill; n * n];
    for row in 0..r.rows {
        values[row * n..row * n + r.cols].copy_from_slice(&r.values[row * r.cols..(row + 1) * r.cols]);
    }
    AsciiRaster {
        rows: n,
        cols: n,
        georef: GeoRef {
            xll: r.georef.xll,
            yll: r.georef.yll - (n - r.rows) as f64 * r.cellsize,
        },
        nodata: Some(fill),
        values,
        ..r
    }
}

/// Parses a `key=value` metadata file; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<HashMap<String, String>> {
    let mut out = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::ModelParse {
            line: idx + 1,
            message: format!("expected key=value, got {line:?}"),
        })?;
        out.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
    }
    Ok(out)
}

fn read_csv(path: &Path, metadata: Option<&Path>) -> Result<(AsciiRaster, Option<f64>)> {
    let meta_path = metadata.map_or_else(|| path.with_extension("meta"), Path::to_path_buf);
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta = parse_key_values(&meta_text)?;
    let header_err = |message: String| Error::MalformedHeader {
        path: meta_path.clone(),
        message,
    };
    let number = |key: &str| -> Result<Option<f64>> {
        meta.get(key)
            .map(|v| v.parse::<f64>().map_err(|_| header_err(format!("bad value {v:?} for {key}"))))
            .transpose()
    };
    let cellsize = number("cell_length")?.ok_or_else(|| header_err("missing cell_length".into()))?;
    if !(cellsize > 0.0) {
        return Err(header_err(format!("cell_length must be positive, got {cellsize}")));
    }
    let lower_level = number("lower_elevation")?;
    let nodata = number("nodata")?;

    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let start = values.len();
        for token in line.split(',') {
            let token = token.trim();
            values.push(token.parse::<f64>().map_err(|_| Error::NonNumeric {
                path: path.to_path_buf(),
                line: idx + 1,
                token: token.to_string(),
            })?);
        }
        let found = values.len() - start;
        match cols {
            None => cols = Some(found),
            Some(expected) if expected != found => {
                return Err(Error::InconsistentRowLength {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    expected,
                    found,
                })
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::InvalidGrid(format!("{} has no data", path.display())))?;
    Ok((
        AsciiRaster {
            rows,
            cols,
            cellsize,
            georef: GeoRef::default(),
            nodata,
            values,
        },
        lower_level,
    ))
}

/// Writes elevations as ESRI ASCII, NODATA cells as -9999.
pub fn write_grid_ascii<T: Scalar>(path: &Path, grid: &TerrainGrid<T>) -> Result<()> {
    let raster = AsciiRaster {
        rows: grid.rows(),
        cols: grid.cols(),
        cellsize: grid.cell_length().f64(),
        georef: grid.georef(),
        nodata: Some(-9999.0),
        values: grid
            .cells()
            .map(|c| if grid.is_nodata(c) { -9999.0 } else { grid.elevation(c).f64() })
            .collect(),
    };
    raster.write(path)
}

/// Cell roles in a reservoir mask raster.
pub const MASK_OUTSIDE: u8 = 0;
pub const MASK_PERIMETER: u8 = 1;
pub const MASK_INTERIOR: u8 = 2;

/// Renders a reservoir mask (`0` outside, `1` perimeter, `2` interior) on the
/// geometry of `grid`.
pub fn render_reservoir_mask<T: Scalar>(
    grid: &TerrainGrid<T>,
    perimeter: &[Cell],
    interior: &[Cell],
) -> AsciiRaster {
    let mut values = vec![MASK_OUTSIDE as f64; grid.len()];
    for c in perimeter {
        values[c.row * grid.cols() + c.col] = MASK_PERIMETER as f64;
    }
    for c in interior {
        values[c.row * grid.cols() + c.col] = MASK_INTERIOR as f64;
    }
    AsciiRaster {
        rows: grid.rows(),
        cols: grid.cols(),
        cellsize: grid.cell_length().f64(),
        georef: grid.georef(),
        nodata: None,
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
        let p = dir.path().join(name);
        let mut f = fs::File::create(&p).unwrap();
        f.write_all(text.as_bytes()).unwrap();
        p
    }

    #[test]
    fn uniform_grid_is_all_lower() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(
            &dir,
            "flat.asc",
            "NCOLS 3\nnrows 3\nxllcorner 0\nyllcorner 0\nCellSize 34\nnodata_value -9999\n385 385 385\n385 385 385\n385 385 385\n",
        );
        let g: TerrainGrid<f64> =
            load_grid(&p, GridFormat::EsriAscii, &LowerSpec::by_elevation(385.0, 0.5), &LoadOptions::default())
                .unwrap();
        assert_eq!(g.lower_mask().count(), 9);
        assert_eq!(g.cell_length(), 34.0);
    }

    #[test]
    fn ragged_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "bad.asc", "ncols 4\nnrows 2\ncellsize 1\n1 2 3 4\n1 2 3 4 5\n");
        let err = AsciiRaster::read(&p).unwrap_err();
        assert!(matches!(err, Error::InconsistentRowLength { expected: 4, found: 5, line: 5, .. }), "{err}");
    }

    #[test]
    fn non_numeric_and_header_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "nn.asc", "ncols 2\nnrows 1\ncellsize 1\n1 abc\n");
        assert!(matches!(AsciiRaster::read(&p), Err(Error::NonNumeric { .. })));
        let p = write_tmp(&dir, "nh.asc", "ncols 2\ncellsize 1\n1 2\n");
        assert!(matches!(AsciiRaster::read(&p), Err(Error::MalformedHeader { .. })));
        let p = write_tmp(&dir, "zero.asc", "ncols 2\nnrows 1\ncellsize 0\n1 2\n");
        assert!(matches!(AsciiRaster::read(&p), Err(Error::MalformedHeader { .. })));
    }

    #[test]
    fn non_square_rejected_or_padded() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "rect.asc", "ncols 3\nnrows 2\ncellsize 10\n5 5 9\n5 9 9\n");
        let spec = LowerSpec::by_elevation(5.0, 0.1);
        let err = load_grid::<f64>(&p, GridFormat::EsriAscii, &spec, &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NotSquare { rows: 2, cols: 3 }));
        let opts = LoadOptions { pad_to_square: true, ..Default::default() };
        let g = load_grid::<f64>(&p, GridFormat::EsriAscii, &spec, &opts).unwrap();
        assert_eq!((g.rows(), g.cols()), (3, 3));
        assert!(g.is_nodata(Cell::new(2, 0)));
        assert_eq!(g.lower_mask().count(), 3);
    }

    #[test]
    fn empty_lower_mask_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "hi.asc", "ncols 2\nnrows 2\ncellsize 10\n9 9\n9 9\n");
        let err = load_grid::<f32>(&p, GridFormat::EsriAscii, &LowerSpec::by_elevation(5.0, 0.5), &LoadOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::EmptyLowerMask));
    }

    #[test]
    fn csv_with_sidecar_and_mask_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "dem.csv", "100,100,120\n100,130,140\n150,150,150\n");
        write_tmp(&dir, "dem.meta", "# site\ncell_length = 34\nlower_elevation=100\n");
        let g: TerrainGrid<f64> = load_grid(
            &p,
            GridFormat::Csv,
            &LowerSpec::ByElevation { level: None, tolerance: 0.5 },
            &LoadOptions::default(),
        )
        .unwrap();
        assert_eq!(g.lower_mask().count(), 3);
        assert_eq!(g.lower_elevation(), 100.0);

        let m = write_tmp(&dir, "lower.asc", "ncols 3\nnrows 3\ncellsize 34\n1 0 0\n0 0 0\n0 0 0\n");
        let g: TerrainGrid<f64> = load_grid(
            &p,
            GridFormat::Csv,
            &LowerSpec::MaskFile { path: m, level: None },
            &LoadOptions::default(),
        )
        .unwrap();
        assert_eq!(g.lower_mask().cells().collect::<Vec<_>>(), vec![Cell::new(0, 0)]);

        let bad = write_tmp(&dir, "bad.csv", "1,2,3,4\n1,2,3,4,5\n");
        write_tmp(&dir, "bad.meta", "cell_length=1\nlower_elevation=1\n");
        let err = load_grid::<f64>(&bad, GridFormat::Csv, &LowerSpec::by_elevation(1.0, 0.5), &LoadOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::InconsistentRowLength { .. }));
    }

    #[test]
    fn mask_render_round_trips() {
        let g = TerrainGrid::from_rows(2.0, &[vec![1.0, 5.0], vec![5.0, 5.0]], 1.0, 0.1).unwrap();
        let r = render_reservoir_mask(&g, &[Cell::new(0, 1)], &[Cell::new(1, 1)]);
        let parsed = AsciiRaster::parse(&r.render(), Path::new("mem")).unwrap();
        assert_eq!(parsed.values, vec![0.0, 1.0, 0.0, 2.0]);
    }
}
