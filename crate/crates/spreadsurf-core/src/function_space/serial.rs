//! CSV and JSON forms of a surface.
//!
//! CSV layout: header row carries the η grid (first cell is the literal
//! `xi`), each body row starts with its ξ node followed by the values.
//! The JSON form is `{"grid": {...}, "values": [[...], ...]}` with one
//! inner array per ξ node.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function_space::grid::SurfaceGrid;
use crate::function_space::surface::HbSurface;

#[derive(Debug, Serialize, Deserialize)]
pub struct SurfaceJson {
    pub grid: SurfaceGrid,
    pub values: Vec<Vec<f64>>,
}

impl HbSurface {
    pub fn to_json(&self) -> SurfaceJson {
        let ep = self.grid().eta_points();
        let values = self
            .values()
            .chunks(ep)
            .map(|row| row.to_vec())
            .collect();
        SurfaceJson { grid: *self.grid(), values }
    }

    pub fn from_json(json: &SurfaceJson) -> Result<HbSurface> {
        let grid = SurfaceGrid::new(
            json.grid.xi_max,
            json.grid.n_xi,
            json.grid.n_eta,
            json.grid.beta,
            json.grid.beta_prime,
        )?;
        if json.values.len() != grid.xi_points() {
            return Err(Error::Data(format!(
                "surface json has {} rows, grid needs {}",
                json.values.len(),
                grid.xi_points()
            )));
        }
        let mut flat = Vec::with_capacity(grid.len());
        for (i, row) in json.values.iter().enumerate() {
            if row.len() != grid.eta_points() {
                return Err(Error::Data(format!(
                    "surface json row {i} has {} columns, grid needs {}",
                    row.len(),
                    grid.eta_points()
                )));
            }
            flat.extend_from_slice(row);
        }
        HbSurface::from_values(grid, flat)
    }

    pub fn to_csv(&self) -> String {
        let g = self.grid();
        let mut out = String::from("xi");
        for k in 0..g.eta_points() {
            out.push(',');
            out.push_str(&format_float(g.eta(k)));
        }
        out.push('\n');
        for i in 0..g.xi_points() {
            out.push_str(&format_float(g.xi(i)));
            for k in 0..g.eta_points() {
                out.push(',');
                out.push_str(&format_float(self.at(i, k)));
            }
            out.push('\n');
        }
        out
    }

    /// Parses the CSV form back onto an explicitly supplied grid, checking
    /// that the axis labels in the file agree with the grid's nodes.
    pub fn from_csv(grid: SurfaceGrid, text: &str) -> Result<HbSurface> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Data("empty surface csv".into()))?;
        let header_cells: Vec<&str> = header.split(',').collect();
        if header_cells.len() != grid.eta_points() + 1 {
            return Err(Error::Data(format!(
                "surface csv header has {} cells, grid needs {}",
                header_cells.len(),
                grid.eta_points() + 1
            )));
        }
        for (k, cell) in header_cells[1..].iter().enumerate() {
            let eta: f64 = parse_float(cell, "header eta")?;
            if (eta - grid.eta(k)).abs() > 1e-9 {
                return Err(Error::Data(format!(
                    "csv eta node {eta} does not match grid node {}",
                    grid.eta(k)
                )));
            }
        }
        let mut flat = Vec::with_capacity(grid.len());
        for (row, line) in lines.enumerate() {
            let mut cells = line.split(',');
            let xi: f64 = parse_float(
                cells.next().ok_or_else(|| Error::Data("empty csv row".into()))?,
                "row xi",
            )?;
            if row >= grid.xi_points() {
                return Err(Error::Data("surface csv has too many rows".into()));
            }
            if (xi - grid.xi(row)).abs() > 1e-9 * grid.xi_max {
                return Err(Error::Data(format!(
                    "csv xi node {xi} does not match grid node {}",
                    grid.xi(row)
                )));
            }
            for cell in cells {
                flat.push(parse_float(cell, "value")?);
            }
        }
        HbSurface::from_values(grid, flat)
    }
}

pub(crate) fn format_float(v: f64) -> String {
    // Shortest round-trip representation; `{}` on f64 is exact for parsing.
    let mut s = format!("{v}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

fn parse_float(cell: &str, what: &str) -> Result<f64> {
    cell.trim()
        .parse::<f64>()
        .map_err(|_| Error::Data(format!("cannot parse {what} from '{cell}'")))
}
