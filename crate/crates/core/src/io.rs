//! CSV tables: per-cell snapshots (`x[,y],A1,...`) and generic numeric
//! tables such as the diagnostics output. Lines starting with `#` are
//! comments.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::solver::{Grid, State};

/// Writes one row per cell: the cell center followed by every species.
pub fn write_snapshot<T: Real, W: Write>(
    out: &mut W,
    grid: &Grid<T>,
    state: &State<T>,
    species: &[String],
    comment: Option<&str>,
) -> io::Result<()> {
    if let Some(c) = comment {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "# t = {:.16e}", state.t.as_f64())?;
    let mut header = vec!["x".to_string()];
    if grid.is_2d() {
        header.push("y".into());
    }
    header.extend(species.iter().cloned());
    writeln!(out, "{}", header.join(","))?;
    for cell in 0..grid.cells() {
        let (x, y) = grid.center(cell);
        let mut line = format!("{:.16e}", x.as_f64());
        if grid.is_2d() {
            line.push_str(&format!(",{:.16e}", y.as_f64()));
        }
        for field in &state.fields {
            line.push_str(&format!(",{:.16e}", field[cell].as_f64()));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// A numeric CSV table with named columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Column by name. A trailing `sq` on a name that is not itself a
    /// column squares the values, so `L2sq` reads `L2^2`.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        if let Some(i) = self.index(name) {
            return Some(self.rows.iter().map(|r| r[i]).collect());
        }
        let i = self.index(name.strip_suffix("sq")?)?;
        Some(self.rows.iter().map(|r| r[i] * r[i]).collect())
    }
}

/// Parses a comma-separated table whose first non-comment line is the header.
pub fn read_table(text: &str) -> Result<Table> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (_, head) = lines.next().ok_or_else(|| Error::Csv("no header line".into()))?;
    let header: Vec<String> = head.split(',').map(|h| h.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (lineno, line) in lines {
        let row = line
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Csv(format!("line {lineno}: `{}` is not a number", v.trim())))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            return Err(Error::Csv(format!(
                "line {lineno}: {} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// Reads per-cell values for `species` from a snapshot table. Rows must be
/// in cell order (x fastest).
pub fn read_snapshot<T: Real>(text: &str, grid: &Grid<T>, species: &[String]) -> Result<Vec<Vec<T>>> {
    let table = read_table(text)?;
    if table.rows.len() != grid.cells() {
        return Err(Error::InitialData(format!(
            "snapshot has {} rows, grid has {} cells",
            table.rows.len(),
            grid.cells()
        )));
    }
    species
        .iter()
        .map(|name| {
            let col = table
                .column(name)
                .filter(|_| table.index(name).is_some())
                .ok_or_else(|| Error::InitialData(format!("snapshot has no column {name}")))?;
            Ok(col.into_iter().map(T::lit).collect())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trip() {
        let grid = Grid::rectangle(1.0, 2.0, 4, 5).unwrap();
        let names = vec!["A1".to_string(), "B".to_string()];
        let state = State {
            t: 0.25,
            fields: vec![
                (0..20).map(|c| 1.0 + c as f64 / 3.0).collect(),
                (0..20).map(|c| (c as f64).sqrt()).collect(),
            ],
        };
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &grid, &state, &names, Some("rdbalance x")).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(2).unwrap() == "x,y,A1,B");
        let back: Vec<Vec<f64>> = read_snapshot(&text, &grid, &names).unwrap();
        assert_eq!(back, state.fields);

        let small = Grid::rectangle(1.0, 2.0, 4, 4).unwrap();
        assert!(read_snapshot::<f64>(&text, &small, &names).is_err());
        assert!(read_snapshot::<f64>(&text, &grid, &["C".to_string()]).is_err());
    }

    #[test]
    fn tables() {
        let t = read_table("# c\nt,L2\n0,0.5\n1,0.25\n").unwrap();
        assert_eq!(t.column("L2").unwrap(), [0.5, 0.25]);
        assert_eq!(t.column("L2sq").unwrap(), [0.25, 0.0625]);
        assert!(t.column("L4").is_none());
        assert!(read_table("t,L2\n0,x\n").is_err());
        assert!(read_table("t,L2\n0\n").is_err());
        assert!(read_table("# only\n").is_err());
        assert!(read_table("t,v\n0,inf\n").unwrap().rows[0][1].is_infinite());
    }
}
