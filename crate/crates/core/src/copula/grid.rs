//! Midpoint grids of copula densities and their CSV form.

use std::io::Write;

use rayon::prelude::*;

use super::{Coord, CopulaSurface, Provenance};
use crate::error::{Error, Result};

/// `n × n` densities at `u_j = (j + ½)/n` (columns), `v_i = (i + ½)/n` (rows).
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaGrid {
    pub n: usize,
    pub s: f64,
    pub t: f64,
    pub provenance: Provenance,
    /// Row-major, row index is `v`.
    pub values: Vec<f64>,
}

pub fn midpoints(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
}

impl CopulaGrid {
    pub(crate) fn evaluate(surface: &CopulaSurface, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::param("n", format!("grid size must be at least 2, got {n}")));
        }
        let mids = midpoints(n);
        let fam = surface.family();
        let us: Vec<Coord> = mids.par_iter().map(|&u| fam.coord_u(u)).collect::<Result<_>>()?;
        let vs: Vec<Coord> = mids.par_iter().map(|&v| fam.coord_v(v)).collect::<Result<_>>()?;
        let values: Vec<f64> = vs
            .par_iter()
            .flat_map_iter(|b| us.iter().map(move |a| fam.density_at(a, b)))
            .collect();
        let (s, t) = surface.times();
        Ok(Self {
            n,
            s,
            t,
            provenance: surface.provenance(),
            values,
        })
    }

    /// Density in row `i` (v), column `j` (u).
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn header(&self) -> String {
        format!("# copula,{},s={},t={},n={}", self.provenance, self.s, self.t, self.n)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.header())?;
        for row in self.values.chunks(self.n) {
            let line: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty copula grid".into()))?;
        let fields: Vec<&str> = header
            .strip_prefix("# copula,")
            .ok_or_else(|| Error::Parse(format!("bad copula header `{header}`")))?
            .split(',')
            .collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!("bad copula header `{header}`")));
        }
        let provenance = Provenance::parse(fields[0])?;
        let field = |i: usize, key: &str| -> Result<&str> {
            fields[i]
                .strip_prefix(key)
                .ok_or_else(|| Error::Parse(format!("expected `{key}` in `{header}`")))
        };
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}")));
        let s = num(field(1, "s=")?)?;
        let t = num(field(2, "t=")?)?;
        let n: usize = field(3, "n=")?
            .parse()
            .map_err(|e| Error::Parse(format!("grid size: {e}")))?;
        let mut values = Vec::with_capacity(n * n);
        let mut rows = 0;
        for line in lines {
            let row: Vec<f64> = line.split(',').map(|x| num(x.trim())).collect::<Result<_>>()?;
            if row.len() != n {
                return Err(Error::Parse(format!(
                    "row {rows} has {} entries, expected {n}",
                    row.len()
                )));
            }
            values.extend(row);
            rows += 1;
        }
        if rows != n {
            return Err(Error::Parse(format!("found {rows} rows, expected {n}")));
        }
        Ok(Self {
            n,
            s,
            t,
            provenance,
            values,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::gaussian_closed_form;

    #[test]
    fn center_cell_of_odd_grid() {
        let g = gaussian_closed_form(1.0, 2.0).unwrap().grid_eval(3).unwrap();
        assert!((g.at(1, 1) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let g = gaussian_closed_form(0.5, 1.25).unwrap().grid_eval(5).unwrap();
        let back = CopulaGrid::parse_csv(&g.to_csv()).unwrap();
        assert_eq!(g, back);
        assert!(g.to_csv().starts_with("# copula,closed_form,s=0.5,t=1.25,n=5\n"));
    }

    #[test]
    fn rejects_small_or_ragged_grids() {
        assert!(gaussian_closed_form(1.0, 2.0).unwrap().grid_eval(1).is_err());
        assert!(CopulaGrid::parse_csv("# copula,closed_form,s=1,t=2,n=2\n1,2\n3\n").is_err());
    }
}
