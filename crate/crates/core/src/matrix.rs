//! Year-by-year judgment matrices with missing cells.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::years::{Condition, YearRange};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixMeta {
    pub model: String,
    pub condition: Condition,
}

impl Default for MatrixMeta {
    fn default() -> Self {
        Self {
            model: "unknown".into(),
            condition: Condition::Year,
        }
    }
}

impl MatrixMeta {
    pub fn new(model: impl Into<String>, condition: Condition) -> Self {
        Self {
            model: model.into(),
            condition,
        }
    }

    fn header_cell(&self) -> String {
        format!("model={};condition={}", self.model, self.condition)
    }

    fn from_header_cell(cell: &str) -> Self {
        let mut meta = MatrixMeta::default();
        for part in cell.split(';') {
            match part.split_once('=') {
                Some(("model", v)) => meta.model = v.to_string(),
                Some(("condition", v)) => {
                    if let Ok(c) = v.parse() {
                        meta.condition = c;
                    }
                }
                _ => {}
            }
        }
        meta
    }
}

/// Square n x n grid indexed by years, row-major, `None` = missing.
#[derive(Debug, Clone, PartialEq)]
pub struct YearGrid {
    range: YearRange,
    cells: Vec<Option<f64>>,
}

impl YearGrid {
    pub fn missing(range: YearRange) -> Self {
        let n = range.len();
        Self {
            range,
            cells: vec![None; n * n],
        }
    }

    pub fn from_cells(range: YearRange, cells: Vec<Option<f64>>) -> Result<Self> {
        let n = range.len();
        if cells.len() != n * n {
            return Err(Error::structure(format!(
                "{} cells for a {n}x{n} grid",
                cells.len()
            )));
        }
        Ok(Self { range, cells })
    }

    pub fn from_fn(range: YearRange, mut f: impl FnMut(i32, i32) -> Option<f64>) -> Self {
        let mut cells = Vec::with_capacity(range.len() * range.len());
        for i in range.years() {
            for j in range.years() {
                cells.push(f(i, j));
            }
        }
        Self { range, cells }
    }

    pub fn range(&self) -> YearRange {
        self.range
    }

    pub fn n(&self) -> usize {
        self.range.len()
    }

    pub fn cells(&self) -> &[Option<f64>] {
        &self.cells
    }

    /// Cell by row/column position.
    pub fn at(&self, row: usize, col: usize) -> Option<f64> {
        self.cells[row * self.n() + col]
    }

    /// Cell by year pair; years outside the range read as missing.
    pub fn get(&self, i: i32, j: i32) -> Option<f64> {
        let r = self.range.index_of(i)?;
        let c = self.range.index_of(j)?;
        self.at(r, c)
    }

    pub fn set(&mut self, i: i32, j: i32, value: Option<f64>) -> Result<()> {
        let (r, c) = self
            .range
            .index_of(i)
            .zip(self.range.index_of(j))
            .ok_or_else(|| Error::structure(format!("pair ({i}, {j}) outside {}", self.range)))?;
        let n = self.n();
        self.cells[r * n + c] = value;
        Ok(())
    }

    pub fn missing_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_none()).count()
    }

    pub fn transpose(&self) -> Self {
        let n = self.n();
        let mut cells = vec![None; n * n];
        for r in 0..n {
            for c in 0..n {
                cells[c * n + r] = self.cells[r * n + c];
            }
        }
        Self {
            range: self.range,
            cells,
        }
    }

    fn check_unit_interval(&self, what: &str) -> Result<()> {
        if let Some(bad) = self
            .cells
            .iter()
            .flatten()
            .find(|v| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::Data(format!("{what} cell {bad} outside [0, 1]")));
        }
        Ok(())
    }

    fn write_csv_to<W: Write>(&self, meta: &MatrixMeta, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec![meta.header_cell()];
        header.extend(self.range.years().map(|y| y.to_string()));
        out.write_record(&header)?;
        let n = self.n();
        let mut row = Vec::with_capacity(n + 1);
        for (r, year) in self.range.years().enumerate() {
            row.clear();
            row.push(year.to_string());
            row.extend(
                self.cells[r * n..(r + 1) * n]
                    .iter()
                    .map(|c| c.map(|v| v.to_string()).unwrap_or_default()),
            );
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    fn read_csv_from<R: Read>(r: R) -> Result<(Self, MatrixMeta)> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
        let mut records = rdr.records();
        let header = records
            .next()
            .ok_or_else(|| Error::Data("empty matrix CSV".into()))??;
        let meta = MatrixMeta::from_header_cell(header.get(0).unwrap_or_default());
        let years = header
            .iter()
            .skip(1)
            .map(|y| {
                y.trim()
                    .parse::<i32>()
                    .map_err(|e| Error::Data(format!("bad header year {y:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let (first, last) = match (years.first(), years.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return Err(Error::Data("matrix CSV has no year columns".into())),
        };
        let range = YearRange::new(first, last)?;
        if years.iter().copied().ne(range.years()) {
            return Err(Error::Data("matrix CSV years are not a contiguous ascending range".into()));
        }
        let n = range.len();
        let mut cells = Vec::with_capacity(n * n);
        let mut rows = 0usize;
        for rec in records {
            let rec = rec?;
            if rec.len() != n + 1 {
                return Err(Error::Data(format!("row {} has {} fields, expected {}", rows + 1, rec.len(), n + 1)));
            }
            let year: i32 = rec[0]
                .trim()
                .parse()
                .map_err(|e| Error::Data(format!("bad row year {:?}: {e}", &rec[0])))?;
            if range.year_at(rows) != Some(year) {
                return Err(Error::Data(format!("row year {year} out of order")));
            }
            for field in rec.iter().skip(1) {
                let field = field.trim();
                cells.push(if field.is_empty() {
                    None
                } else {
                    Some(field.parse::<f64>().map_err(|e| {
                        Error::Data(format!("bad cell {field:?} in row {year}: {e}"))
                    })?)
                });
            }
            rows += 1;
        }
        if rows != n {
            return Err(Error::Data(format!("{rows} rows for {n} columns")));
        }
        Ok((Self { range, cells }, meta))
    }
}

macro_rules! unit_matrix {
    ($name:ident, $what:literal) => {
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            grid: YearGrid,
            pub meta: MatrixMeta,
        }

        impl $name {
            pub fn new(grid: YearGrid, meta: MatrixMeta) -> Result<Self> {
                grid.check_unit_interval($what)?;
                Ok(Self { grid, meta })
            }

            pub fn grid(&self) -> &YearGrid {
                &self.grid
            }

            pub fn range(&self) -> YearRange {
                self.grid.range()
            }

            pub fn get(&self, i: i32, j: i32) -> Option<f64> {
                self.grid.get(i, j)
            }

            pub fn to_csv_string(&self) -> String {
                let mut buf = Vec::new();
                self.grid
                    .write_csv_to(&self.meta, &mut buf)
                    .expect("writing to memory");
                String::from_utf8(buf).expect("csv output is utf-8")
            }

            pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
                let file = std::fs::File::create(path)?;
                self.grid.write_csv_to(&self.meta, std::io::BufWriter::new(file))
            }

            pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
                let file = std::fs::File::open(path)?;
                Self::from_csv_reader(std::io::BufReader::new(file))
            }

            pub fn from_csv_reader<R: Read>(r: R) -> Result<Self> {
                let (grid, meta) = YearGrid::read_csv_from(r)?;
                Self::new(grid, meta)
            }

            /// SHA-256 of the canonical CSV rendering.
            pub fn digest(&self) -> String {
                hex::encode(Sha256::digest(self.to_csv_string().as_bytes()))
            }
        }
    };
}

unit_matrix!(SimilarityMatrix, "similarity");
unit_matrix!(DistanceMatrix, "distance");

pub fn similarity_to_distance(s: &SimilarityMatrix) -> DistanceMatrix {
    let cells = s.grid.cells.iter().map(|c| c.map(|v| 1.0 - v)).collect();
    DistanceMatrix {
        grid: YearGrid {
            range: s.grid.range,
            cells,
        },
        meta: s.meta.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimilarityMatrix {
        let range = YearRange::new(2000, 2002).unwrap();
        let grid = YearGrid::from_fn(range, |i, j| {
            if i == 2001 && j == 2002 {
                None
            } else {
                Some(if i == j { 1.0 } else { 0.25 })
            }
        });
        SimilarityMatrix::new(grid, MatrixMeta::new("mock", Condition::Year)).unwrap()
    }

    #[test]
    fn distance_conversion() {
        let s = small();
        let d = similarity_to_distance(&s);
        assert_eq!(d.get(2000, 2000), Some(0.0));
        assert_eq!(d.get(2000, 2001), Some(0.75));
        assert_eq!(d.get(2001, 2002), None);
        assert_eq!(d.get(1999, 2000), None);
    }

    #[test]
    fn out_of_range_cells_rejected() {
        let range = YearRange::new(1, 2).unwrap();
        let grid = YearGrid::from_fn(range, |_, _| Some(1.5));
        assert!(SimilarityMatrix::new(grid, MatrixMeta::default()).is_err());
    }

    #[test]
    fn csv_round_trip_keeps_missing_and_meta() {
        let s = small();
        let text = s.to_csv_string();
        assert!(text.starts_with("model=mock;condition=year,2000,2001,2002\n"));
        let back = SimilarityMatrix::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.digest(), s.digest());
    }

    #[test]
    fn csv_rejects_ragged_rows() {
        let text = "x,2000,2001\n2000,1,0.5\n2001,0.5\n";
        assert!(SimilarityMatrix::from_csv_reader(text.as_bytes()).is_err());
    }

    #[test]
    fn transpose_swaps() {
        let s = small();
        let t = s.grid().transpose();
        assert_eq!(t.get(2002, 2001), None);
        assert_eq!(t.get(2001, 2002), Some(0.25));
    }
}
