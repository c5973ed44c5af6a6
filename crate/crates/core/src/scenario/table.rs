use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numeric CSV table with a fixed twelve-significant-digit format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::Dimension(format!(
                "row of {} values for {} columns",
                row.len(),
                self.header.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                write!(s, "{v:.11e}").expect("writing to a String");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::arg("empty CSV"))?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut t = Self {
            header,
            rows: Vec::new(),
        };
        for line in lines.filter(|l| !l.is_empty()) {
            let row = line
                .split(',')
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|e| Error::arg(format!("bad value `{v}`: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            t.push(row)?;
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_to_twelve_digits() {
        let mut t = Table::new(&["t", "P1"]);
        t.push(vec![0.0, 1.0 / 3.0]).unwrap();
        t.push(vec![1.5, -2e-17]).unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with("t,P1\n0.00000000000e0,3.33333333333e-1\n"));
        let back = Table::from_csv(&csv).unwrap();
        assert_eq!(back.header, t.header);
        assert!((back.rows[0][1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_ragged_rows() {
        assert!(Table::new(&["a", "b"]).push(vec![1.0]).is_err());
    }
}
