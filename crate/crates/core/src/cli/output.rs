//! CSV tables with fixed columns and locale-independent numbers.

use anyhow::{ensure, Result};

/// Twelve decimals, no exponent, and never `-0`.
pub fn fmt_num(v: f64) -> String {
    let s = format!("{v:.12}");
    if s.bytes().all(|b| matches!(b, b'-' | b'0' | b'.')) {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

/// One row per quantity: `quantity,id,analytical,empirical,abs_diff`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    rows: Vec<ResultRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub quantity: String,
    pub id: String,
    pub analytical: Option<f64>,
    pub empirical: Option<f64>,
}

impl ResultRow {
    pub fn abs_diff(&self) -> Option<f64> {
        Some((self.analytical? - self.empirical?).abs())
    }
}

impl ResultTable {
    pub const HEADER: [&'static str; 5] = ["quantity", "id", "analytical", "empirical", "abs_diff"];

    pub fn push(&mut self, quantity: &str, id: impl Into<String>, analytical: Option<f64>, empirical: Option<f64>) {
        self.rows.push(ResultRow { quantity: quantity.to_string(), id: id.into(), analytical, empirical });
    }

    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }

    /// Missing values are empty cells.
    pub fn to_csv(&self) -> Result<String> {
        let cell = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::HEADER)?;
        for r in &self.rows {
            ensure!(
                [r.analytical, r.empirical].iter().flatten().all(|v| v.is_finite()),
                "non-finite value in row {} {}",
                r.quantity,
                r.id
            );
            w.write_record([
                r.quantity.clone(),
                r.id.clone(),
                cell(r.analytical),
                cell(r.empirical),
                cell(r.abs_diff()),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}

/// Writes a header line followed by preformatted rows.
pub fn write_csv(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
