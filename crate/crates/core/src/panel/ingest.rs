use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{CountryCode, DiseaseCategory, Panel, PanelCell, MAX_YEAR, MIN_YEAR};
use crate::error::{Error, Result};

/// Header names for the five panel columns (matched case-insensitively).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub country: String,
    pub disease: String,
    pub year: String,
    pub participants: String,
    pub dalys: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            country: "country".into(),
            disease: "disease".into(),
            year: "year".into(),
            participants: "participants".into(),
            dalys: "dalys".into(),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct IngestOptions {
    /// Field delimiter; `None` auto-detects comma vs tab from the header line.
    pub delimiter: Option<u8>,
    pub columns: ColumnMapping,
    /// Accept years outside 2000..=2024 (synthetic fixtures).
    pub relax_year_bounds: bool,
}

/// A row that parsed but violated a cell invariant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RejectedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct IngestReport {
    pub panel: Panel,
    pub rows_read: usize,
    /// Rows whose key had already been seen (their counts were summed).
    pub duplicates: usize,
    pub rejected: Vec<RejectedRow>,
}

/// Tab if the first line has more tabs than commas, else comma.
pub fn detect_delimiter(first_line: &str) -> u8 {
    let tabs = first_line.matches('\t').count();
    let commas = first_line.matches(',').count();
    if tabs > commas {
        b'\t'
    } else {
        b','
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case(name.trim()))
        .ok_or_else(|| Error::invalid(format!("missing column `{name}`")))
}

fn parse_number(field: &str, what: &str, line: u64) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::Row { line, message: format!("non-numeric {what} `{}`", field.trim()) })?;
    if !v.is_finite() {
        return Err(Error::Row { line, message: format!("non-finite {what}") });
    }
    Ok(v)
}

/// Reads a delimited panel table.
///
/// Malformed rows (non-numeric counts, unknown ISO3 or disease labels) abort
/// ingestion with the offending line number. Rows that parse but violate a
/// cell invariant (negative participants, non-positive DALYs, year outside
/// the analysis window) are skipped and listed in the report. Duplicate keys
/// are summed.
pub fn ingest_panel<R: Read>(mut source: R, opts: &IngestOptions) -> Result<IngestReport> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    if text.trim().is_empty() {
        return Err(Error::EmptyInput);
    }
    let delimiter = opts.delimiter.unwrap_or_else(|| detect_delimiter(text.lines().next().unwrap_or("")));
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let cols = &opts.columns;
    let ic = column_index(&headers, &cols.country)?;
    let id = column_index(&headers, &cols.disease)?;
    let iy = column_index(&headers, &cols.year)?;
    let ip = column_index(&headers, &cols.participants)?;
    let ib = column_index(&headers, &cols.dalys)?;

    let mut cells = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut rejected = Vec::new();
    let mut duplicates = 0;
    let mut rows_read = 0;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        rows_read += 1;
        let country = CountryCode::parse(&record[ic]).map_err(|e| Error::Row { line, message: e.to_string() })?;
        let disease = DiseaseCategory::parse(&record[id]).map_err(|e| Error::Row { line, message: e.to_string() })?;
        let year: u16 = record[iy]
            .trim()
            .parse()
            .map_err(|_| Error::Row { line, message: format!("non-integer year `{}`", record[iy].trim()) })?;
        let participants = parse_number(&record[ip], "participants", line)?;
        let dalys = parse_number(&record[ib], "dalys", line)?;

        let reason = if !opts.relax_year_bounds && !(MIN_YEAR..=MAX_YEAR).contains(&year) {
            Some(format!("year {year} outside {MIN_YEAR}..={MAX_YEAR}"))
        } else if participants < 0.0 {
            Some(format!("negative participants {participants}"))
        } else if dalys <= 0.0 {
            Some(format!("non-positive dalys {dalys}"))
        } else {
            None
        };
        if let Some(reason) = reason {
            rejected.push(RejectedRow { line, reason });
            continue;
        }
        if !seen.insert((country, disease, year)) {
            duplicates += 1;
        }
        cells.push(PanelCell::new(country, disease, year, participants, dalys));
    }
    if rows_read == 0 {
        return Err(Error::EmptyInput);
    }
    let panel = Panel::from_cells(cells)?;
    Ok(IngestReport { panel, rows_read, duplicates, rejected })
}

/// Writes the canonical panel form: country, disease, year, participants, dalys.
///
/// Dimensions that were aggregated away are written as empty fields. Numbers
/// use shortest round-trip formatting, so re-ingesting reproduces the panel.
pub fn emit_panel<W: Write>(panel: &Panel, sink: W, delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(sink);
    w.write_record(["country", "disease", "year", "participants", "dalys"])?;
    for (k, t) in panel.cells() {
        w.write_record([
            k.country.map(|c| c.to_string()).unwrap_or_default(),
            k.disease.map(|d| d.name().to_string()).unwrap_or_default(),
            k.year.map(|y| y.to_string()).unwrap_or_default(),
            t.participants.to_string(),
            t.dalys.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ingest(text: &str) -> Result<IngestReport> {
        ingest_panel(text.as_bytes(), &IngestOptions::default())
    }

    #[test]
    fn single_row() {
        let r = ingest("country,disease,year,participants,dalys\nUSA,cardiovascular,2010,100,5000\n").unwrap();
        assert_eq!(r.panel.len(), 1);
        assert_eq!(r.panel.global().participants, 100.0);
        assert_eq!(r.duplicates, 0);
    }

    #[test]
    fn duplicate_keys_are_summed() {
        let r = ingest(
            "country,disease,year,participants,dalys\nUSA,Neoplasms,2010,10,5\nUSA,neoplasms,2010,20,5\n",
        )
        .unwrap();
        assert_eq!(r.panel.len(), 1);
        assert_eq!(r.panel.global().participants, 30.0);
        assert_eq!(r.duplicates, 1);
    }

    #[test]
    fn tab_delimited_is_detected() {
        let r = ingest("country\tdisease\tyear\tparticipants\tdalys\nDNK\tNeoplasms\t2001\t1.5\t2\n").unwrap();
        assert_eq!(r.panel.global().participants, 1.5);
    }

    #[test]
    fn malformed_rows_are_errors_with_line_numbers() {
        let err = ingest("country,disease,year,participants,dalys\nUSA,Neoplasms,2010,ten,5\n").unwrap_err();
        assert!(matches!(err, Error::Row { line: 2, .. }), "{err}");
        let err = ingest("country,disease,year,participants,dalys\nUSA,Neoplasms,2010,1,5\nXYZ,Neoplasms,2010,1,5\n")
            .unwrap_err();
        assert!(matches!(err, Error::Row { line: 3, .. }), "{err}");
        let err = ingest("country,disease,year,participants,dalys\nUSA,Enteric,2010,1,5\n").unwrap_err();
        assert!(err.to_string().contains("unknown disease"));
        assert!(matches!(ingest(""), Err(Error::EmptyInput)));
        assert!(matches!(ingest("country,disease,year,participants,dalys\n"), Err(Error::EmptyInput)));
    }

    #[test]
    fn invariant_violations_are_rejected_and_reported() {
        let r = ingest(
            "country,disease,year,participants,dalys\n\
             USA,Neoplasms,2010,1,5\n\
             USA,Neoplasms,1999,1,5\n\
             USA,Neoplasms,2011,-1,5\n\
             USA,Neoplasms,2012,1,0\n",
        )
        .unwrap();
        assert_eq!(r.panel.len(), 1);
        let lines: Vec<u64> = r.rejected.iter().map(|x| x.line).collect();
        assert_eq!(lines, vec![3, 4, 5]);
    }

    #[test]
    fn relaxed_year_bounds() {
        let opts = IngestOptions { relax_year_bounds: true, ..Default::default() };
        let r = ingest_panel("country,disease,year,participants,dalys\nUSA,Neoplasms,1990,1,5\n".as_bytes(), &opts)
            .unwrap();
        assert_eq!(r.panel.len(), 1);
    }

    #[test]
    fn custom_column_mapping() {
        let opts = IngestOptions {
            columns: ColumnMapping {
                country: "iso3".into(),
                disease: "cause".into(),
                year: "yr".into(),
                participants: "n".into(),
                dalys: "daly".into(),
            },
            ..Default::default()
        };
        let r = ingest_panel("ISO3,cause,yr,n,daly\nFRA,Mental disorders,2005,3,4\n".as_bytes(), &opts).unwrap();
        assert_eq!(r.panel.len(), 1);
    }
}
