//! Plain-text formats: CSV tables with a `#` comment header, and TOML
//! snapshots of configurations, densities and sampled flows.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Vec3;

/// Numeric table. Cells print in shortest round-trip form, so equal data
/// gives equal bytes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Csv {
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Csv {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { comments: Vec::new(), columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    /// Appends comment lines; embedded newlines split into several.
    pub fn comment(&mut self, text: impl Into<String>) -> &mut Self {
        self.comments.extend(text.into().lines().map(str::to_string));
        self
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::InvalidParameter(format!("row has {} cells, table has {} columns", row.len(), self.columns.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Column header and data rows, without comments.
    pub fn body(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                let m = v.abs();
                if m == 0.0 || (1e-4..1e15).contains(&m) || !v.is_finite() {
                    let _ = write!(out, "{v}");
                } else {
                    let _ = write!(out, "{v:e}");
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in &self.comments {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out + &self.body()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut csv = Csv::default();
        let mut header = false;
        for line in text.lines() {
            if let Some(c) = line.strip_prefix('#') {
                csv.comments.push(c.strip_prefix(' ').unwrap_or(c).to_string());
            } else if !header {
                csv.columns = line.split(',').map(str::to_string).collect();
                header = true;
            } else if !line.is_empty() {
                let row = line
                    .split(',')
                    .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("bad cell {s:?}: {e}"))))
                    .collect::<Result<Vec<_>>>()?;
                csv.push(row)?;
            }
        }
        Ok(csv)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

/// Rows `(x, y, z, ux, uy, uz)`.
pub fn field_csv(points: &[Vec3], values: &[Vec3]) -> Result<Csv> {
    if points.len() != values.len() {
        return Err(Error::InvalidParameter("points and values differ in length".into()));
    }
    let mut csv = Csv::new(["x", "y", "z", "ux", "uy", "uz"]);
    for (x, u) in points.iter().zip(values) {
        csv.push(vec![x.x, x.y, x.z, u.x, u.y, u.z])?;
    }
    Ok(csv)
}

/// Sampled velocity field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSnapshot {
    pub label: String,
    pub lambda: f64,
    pub points: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    Ok(toml::to_string(value)?)
}

pub fn from_toml<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(toml::from_str(text)?)
}

pub fn save_toml<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    fs::write(path, to_toml(value)?)?;
    Ok(())
}

pub fn load_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    from_toml(&fs::read_to_string(path)?)
}
