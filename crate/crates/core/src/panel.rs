//! Weekly count panels: K jurisdictions observed on a shared 7-day grid.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column names used when reading or writing panel CSV files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvColumns {
    pub date: String,
    pub id: String,
    pub value: String,
}

impl Default for CsvColumns {
    fn default() -> Self {
        Self {
            date: "week_start".into(),
            id: "jurisdiction".into(),
            value: "cases".into(),
        }
    }
}

/// Aligned weekly counts. Row `k` of `counts` belongs to `jurisdictions[k]`,
/// column `t` to `week_starts[t]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSeriesPanel {
    jurisdictions: Vec<String>,
    week_starts: Vec<NaiveDate>,
    counts: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestionReport {
    pub rows_read: usize,
    pub fills: usize,
    pub date_range: (NaiveDate, NaiveDate),
}

impl TimeSeriesPanel {
    /// Builds a panel after checking every structural invariant.
    pub fn new(
        jurisdictions: Vec<String>,
        week_starts: Vec<NaiveDate>,
        counts: Vec<Vec<u64>>,
    ) -> Result<Self> {
        if jurisdictions.is_empty() || week_starts.is_empty() {
            return Err(Error::InvalidPanel("panel must have at least one series and one week".into()));
        }
        if counts.len() != jurisdictions.len() {
            return Err(Error::InvalidPanel(format!(
                "{} count rows for {} jurisdictions",
                counts.len(),
                jurisdictions.len()
            )));
        }
        if let Some(row) = counts.iter().find(|r| r.len() != week_starts.len()) {
            return Err(Error::InvalidPanel(format!(
                "row of length {} on a grid of {} weeks",
                row.len(),
                week_starts.len()
            )));
        }
        for pair in week_starts.windows(2) {
            if pair[1] - pair[0] != Duration::days(7) {
                return Err(Error::InvalidPanel(format!(
                    "weeks {} and {} are not 7 days apart",
                    pair[0], pair[1]
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for id in &jurisdictions {
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidPanel(format!("duplicate jurisdiction '{id}'")));
            }
        }
        Ok(Self {
            jurisdictions,
            week_starts,
            counts,
        })
    }

    pub fn jurisdictions(&self) -> &[String] {
        &self.jurisdictions
    }

    pub fn week_starts(&self) -> &[NaiveDate] {
        &self.week_starts
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn n_series(&self) -> usize {
        self.jurisdictions.len()
    }

    pub fn n_weeks(&self) -> usize {
        self.week_starts.len()
    }

    pub fn first_week(&self) -> NaiveDate {
        self.week_starts[0]
    }

    pub fn last_week(&self) -> NaiveDate {
        self.week_starts[self.week_starts.len() - 1]
    }

    /// Index of `week` on the grid, if it is a grid point.
    pub fn week_index(&self, week: NaiveDate) -> Option<usize> {
        let offset = (week - self.first_week()).num_days();
        if offset < 0 || offset % 7 != 0 {
            return None;
        }
        let idx = (offset / 7) as usize;
        (idx < self.n_weeks()).then_some(idx)
    }

    pub fn jurisdiction_index(&self, id: &str) -> Option<usize> {
        self.jurisdictions.iter().position(|j| j == id)
    }

    /// Counts of one series as reals.
    pub fn levels(&self, k: usize) -> Vec<f64> {
        self.counts[k].iter().map(|&c| c as f64).collect()
    }

    /// Sub-panel holding every week up to and including `cutoff`.
    pub fn slice_until(&self, cutoff: NaiveDate) -> Result<Self> {
        if cutoff < self.first_week() {
            return Err(Error::CutoffBeforeStart(cutoff));
        }
        let idx = self.week_index(cutoff).ok_or(Error::OffGrid {
            date: cutoff,
            anchor: self.first_week(),
        })?;
        Ok(self.slice_to_index(idx))
    }

    /// Sub-panel holding weeks `0..=last`.
    pub(crate) fn slice_to_index(&self, last: usize) -> Self {
        Self {
            jurisdictions: self.jurisdictions.clone(),
            week_starts: self.week_starts[..=last].to_vec(),
            counts: self.counts.iter().map(|r| r[..=last].to_vec()).collect(),
        }
    }

    /// Per-jurisdiction totals by calendar year of the week start.
    pub fn annual_totals(&self) -> BTreeMap<String, BTreeMap<i32, u64>> {
        let mut out = BTreeMap::new();
        for (k, id) in self.jurisdictions.iter().enumerate() {
            let mut years: BTreeMap<i32, u64> = BTreeMap::new();
            for (t, week) in self.week_starts.iter().enumerate() {
                *years.entry(week.year()).or_default() += self.counts[k][t];
            }
            out.insert(id.clone(), years);
        }
        out
    }

    /// Writes the panel as long-format CSV (one row per jurisdiction-week).
    pub fn write_csv<W: Write>(&self, writer: W, columns: &CsvColumns) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([&columns.id, &columns.date, &columns.value])?;
        for (k, id) in self.jurisdictions.iter().enumerate() {
            for (t, week) in self.week_starts.iter().enumerate() {
                w.write_record([
                    id.as_str(),
                    &week.format("%Y-%m-%d").to_string(),
                    &self.counts[k][t].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a long-format CSV file into a dense panel.
pub fn load_panel(
    path: impl AsRef<Path>,
    date_column: &str,
    id_column: &str,
    value_column: &str,
) -> Result<(TimeSeriesPanel, IngestionReport)> {
    let file = std::fs::File::open(path)?;
    read_panel(
        file,
        &CsvColumns {
            date: date_column.into(),
            id: id_column.into(),
            value: value_column.into(),
        },
    )
}

/// Same as [`load_panel`] over any reader.
///
/// Jurisdictions keep their order of first appearance. Missing
/// (jurisdiction, week) pairs become zeros and are counted in `fills`.
pub fn read_panel<R: Read>(reader: R, columns: &CsvColumns) -> Result<(TimeSeriesPanel, IngestionReport)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let date_idx = find(&columns.date)?;
    let id_idx = find(&columns.id)?;
    let value_idx = find(&columns.value)?;

    let mut order: Vec<String> = Vec::new();
    let mut index_of: HashMap<String, usize> = HashMap::new();
    let mut cells: HashMap<(usize, NaiveDate), u64> = HashMap::new();
    let mut rows_read = 0usize;

    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("");
        let raw_date = field(date_idx);
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|_| Error::BadDate {
            line,
            value: raw_date.to_string(),
        })?;
        let raw_value = field(value_idx);
        let value: i64 = raw_value.parse().map_err(|_| Error::BadCount {
            line,
            value: raw_value.to_string(),
        })?;
        if value < 0 {
            return Err(Error::NegativeCount { line, value });
        }
        let id = field(id_idx).to_string();
        let k = *index_of.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            order.len() - 1
        });
        if cells.insert((k, date), value as u64).is_some() {
            return Err(Error::DuplicateKey { jurisdiction: id, week: date });
        }
        rows_read += 1;
    }

    let first = cells.keys().map(|(_, d)| *d).min().ok_or(Error::EmptyInput)?;
    let last = cells.keys().map(|(_, d)| *d).max().ok_or(Error::EmptyInput)?;
    if let Some(&(_, bad)) = cells.keys().find(|(_, d)| (*d - first).num_days() % 7 != 0) {
        return Err(Error::OffGrid { date: bad, anchor: first });
    }
    let n_weeks = ((last - first).num_days() / 7 + 1) as usize;
    let week_starts: Vec<NaiveDate> = (0..n_weeks).map(|t| first + Duration::days(7 * t as i64)).collect();

    let mut counts = vec![vec![0u64; n_weeks]; order.len()];
    for (&(k, date), &v) in &cells {
        counts[k][((date - first).num_days() / 7) as usize] = v;
    }
    let fills = order.len() * n_weeks - cells.len();
    let panel = TimeSeriesPanel::new(order, week_starts, counts)?;
    Ok((
        panel,
        IngestionReport {
            rows_read,
            fills,
            date_range: (first, last),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn read(text: &str) -> Result<(TimeSeriesPanel, IngestionReport)> {
        read_panel(text.as_bytes(), &CsvColumns::default())
    }

    #[test]
    fn single_series_transcribed() {
        let (p, report) = read("jurisdiction,week_start,cases\nA,2023-01-01,3\nA,2023-01-08,5\n").unwrap();
        assert_eq!(p.n_series(), 1);
        assert_eq!(p.n_weeks(), 2);
        assert_eq!(p.counts(), &[vec![3, 5]]);
        assert_eq!(report.fills, 0);
        assert_eq!(report.rows_read, 2);
    }

    #[test]
    fn missing_pairs_zero_filled() {
        let (p, report) = read("jurisdiction,week_start,cases\nA,2023-01-01,3\nB,2023-01-08,1\n").unwrap();
        assert_eq!(p.jurisdictions(), &["A".to_string(), "B".to_string()]);
        assert_eq!(p.counts(), &[vec![3, 0], vec![0, 1]]);
        assert_eq!(report.fills, 2);
        assert_eq!(report.date_range, (date("2023-01-01"), date("2023-01-08")));
    }

    #[test]
    fn interior_gap_extends_grid() {
        let (p, report) = read("jurisdiction,week_start,cases\nA,2023-01-01,3\nA,2023-01-22,4\n").unwrap();
        assert_eq!(p.counts(), &[vec![3, 0, 0, 4]]);
        assert_eq!(report.fills, 2);
    }

    #[test]
    fn duplicate_key_rejected() {
        let err = read("jurisdiction,week_start,cases\nA,2023-01-01,3\nA,2023-01-01,4\n").unwrap_err();
        assert!(matches!(err, Error::DuplicateKey { .. }));
    }

    #[test]
    fn bad_inputs_rejected() {
        assert!(matches!(
            read("jurisdiction,week_start,cases\nA,01/02/2023,3\n").unwrap_err(),
            Error::BadDate { .. }
        ));
        assert!(matches!(
            read("jurisdiction,week_start,cases\nA,2023-01-01,-3\n").unwrap_err(),
            Error::NegativeCount { .. }
        ));
        assert!(matches!(
            read("jurisdiction,week_start,cases\nA,2023-01-01,3\nA,2023-01-05,1\n").unwrap_err(),
            Error::OffGrid { .. }
        ));
        assert!(matches!(
            read("jurisdiction,date,cases\nA,2023-01-01,3\n").unwrap_err(),
            Error::MissingColumn(_)
        ));
        assert!(matches!(read("jurisdiction,week_start,cases\n").unwrap_err(), Error::EmptyInput));
        assert!(read("jurisdiction,week_start,cases\nA,2023-01-01\n").is_err());
    }

    fn long_panel(t: usize) -> TimeSeriesPanel {
        let start = date("2023-01-01");
        let weeks = (0..t).map(|i| start + Duration::days(7 * i as i64)).collect();
        TimeSeriesPanel::new(vec!["A".into()], weeks, vec![(0..t as u64).collect()]).unwrap()
    }

    #[test]
    fn slice_boundaries() {
        let p = long_panel(100);
        let w60 = p.week_starts()[60];
        assert_eq!(p.slice_until(w60).unwrap().n_weeks(), 61);
        assert_eq!(p.slice_until(p.last_week()).unwrap(), p);
        assert_eq!(p.slice_until(p.first_week()).unwrap().n_weeks(), 1);
        assert!(matches!(
            p.slice_until(date("2022-12-25")).unwrap_err(),
            Error::CutoffBeforeStart(_)
        ));
        assert!(p.slice_until(date("2023-01-03")).is_err());
    }

    #[test]
    fn annual_totals_split_by_year() {
        let p = long_panel(60);
        let totals = p.annual_totals();
        let a = &totals["A"];
        // 2023-01-01 + 52 weeks = 2023-12-31, so weeks 0..=52 are 2023.
        assert_eq!(a[&2023], (0..=52u64).sum::<u64>());
        assert_eq!(a[&2024], (53..60u64).sum::<u64>());
    }

    #[test]
    fn constructor_checks_invariants() {
        let d = date("2023-01-01");
        assert!(TimeSeriesPanel::new(vec!["A".into()], vec![d, d + Duration::days(6)], vec![vec![1, 2]]).is_err());
        assert!(TimeSeriesPanel::new(vec!["A".into(), "A".into()], vec![d], vec![vec![1], vec![2]]).is_err());
        assert!(TimeSeriesPanel::new(vec!["A".into()], vec![d], vec![vec![1, 2]]).is_err());
    }
}
