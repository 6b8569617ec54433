use std::collections::BTreeSet;
use std::io::{Read, Write};

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Name of the CSV column holding the selection mask.
pub const SELECTED_COLUMN: &str = "__selected";

/// Column-oriented sample table keyed by variable name.
///
/// Simulated datasets also carry the seed they came from, the per-row noise draw of
/// every additive equation, and the names of unobserved columns, so that true
/// counterfactuals can be reconstructed and fitting can exclude latent variables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset<T> {
    columns: IndexMap<String, Vec<T>>,
    noise: IndexMap<String, Vec<T>>,
    hidden: BTreeSet<String>,
    selected: Option<Vec<bool>>,
    seed: Option<u64>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new() -> Self {
        Dataset {
            columns: IndexMap::new(),
            noise: IndexMap::new(),
            hidden: BTreeSet::new(),
            selected: None,
            seed: None,
        }
    }

    pub fn from_columns<I, S>(columns: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<T>)>,
        S: Into<String>,
    {
        let mut d = Dataset::new();
        for (name, col) in columns {
            d.insert(name, col)?;
        }
        Ok(d)
    }

    pub fn n_rows(&self) -> usize {
        self.columns.values().next().map_or(0, Vec::len)
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    pub fn column(&self, name: &str) -> Result<&[T]> {
        self.columns.get(name).map(Vec::as_slice).ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Adds or replaces a column.
    pub fn insert(&mut self, name: impl Into<String>, column: Vec<T>) -> Result<()> {
        let name = name.into();
        let replacing = self.columns.contains_key(&name);
        let expected = if replacing && self.columns.len() == 1 { column.len() } else { self.n_rows() };
        if !self.columns.is_empty() && column.len() != expected {
            return Err(Error::LengthMismatch { left: expected, right: column.len() });
        }
        self.columns.insert(name, column);
        Ok(())
    }

    pub fn with_column(mut self, name: impl Into<String>, column: Vec<T>) -> Result<Self> {
        self.insert(name, column)?;
        Ok(self)
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    /// Noise draw recorded for `node` during simulation.
    pub fn noise(&self, node: &str) -> Result<&[T]> {
        self.noise.get(node).map(Vec::as_slice).ok_or_else(|| Error::MissingColumn(format!("noise of {node}")))
    }

    pub(crate) fn insert_noise(&mut self, node: &str, draws: Vec<T>) {
        self.noise.insert(node.to_string(), draws);
    }

    /// Marks a column as unobserved.
    pub fn hide(&mut self, name: &str) {
        self.hidden.insert(name.to_string());
    }

    pub fn is_hidden(&self, name: &str) -> bool {
        self.hidden.contains(name)
    }

    pub fn hidden(&self) -> &BTreeSet<String> {
        &self.hidden
    }

    /// Copy without unobserved columns or their noise.
    pub fn observed(&self) -> Self {
        let mut d = self.clone();
        d.columns.retain(|k, _| !self.hidden.contains(k));
        d.noise.retain(|k, _| !self.hidden.contains(k));
        d.hidden.clear();
        d
    }

    pub fn selection_mask(&self) -> Option<&[bool]> {
        self.selected.as_deref()
    }

    pub fn set_selection_mask(&mut self, mask: Vec<bool>) -> Result<()> {
        if mask.len() != self.n_rows() {
            return Err(Error::LengthMismatch { left: self.n_rows(), right: mask.len() });
        }
        self.selected = Some(mask);
        Ok(())
    }

    /// Rows at `indices`, in that order; repeats allowed. Noise and mask follow the rows.
    pub fn rows(&self, indices: &[usize]) -> Self {
        let pick = |c: &Vec<T>| indices.iter().map(|&i| c[i]).collect::<Vec<T>>();
        Dataset {
            columns: self.columns.iter().map(|(k, c)| (k.clone(), pick(c))).collect(),
            noise: self.noise.iter().map(|(k, c)| (k.clone(), pick(c))).collect(),
            hidden: self.hidden.clone(),
            selected: self.selected.as_ref().map(|m| indices.iter().map(|&i| m[i]).collect()),
            seed: self.seed,
        }
    }

    /// Contiguous row range.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        self.rows(&range.collect::<Vec<_>>())
    }

    /// Rows whose `keep` flag is set.
    pub fn filter(&self, keep: &[bool]) -> Result<Self> {
        if keep.len() != self.n_rows() {
            return Err(Error::LengthMismatch { left: self.n_rows(), right: keep.len() });
        }
        let idx: Vec<usize> = (0..keep.len()).filter(|&i| keep[i]).collect();
        Ok(self.rows(&idx))
    }

    /// Rows retained by the selection mask (all rows when there is no mask).
    pub fn selected_rows(&self) -> Self {
        match &self.selected {
            Some(m) => {
                let mut d = self.filter(m).expect("mask matches row count");
                d.selected = None;
                d
            }
            None => self.clone(),
        }
    }

    /// Writes a header row and one row per sample; the selection mask, when
    /// present, becomes a 0/1 column named [`SELECTED_COLUMN`].
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = self.column_names().collect();
        if self.selected.is_some() {
            header.push(SELECTED_COLUMN);
        }
        w.write_record(&header)?;
        let cols: Vec<&Vec<T>> = self.columns.values().collect();
        for i in 0..self.n_rows() {
            let mut rec: Vec<String> = cols.iter().map(|c| c[i].to_string()).collect();
            if let Some(m) = &self.selected {
                rec.push(if m[i] { "1" } else { "0" }.to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
    }

    /// Reads a dataset written by [`Dataset::write_csv`]. Lines starting with `#`
    /// are comments.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut cols: Vec<Vec<T>> = vec![Vec::new(); header.len()];
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            for (j, field) in rec.iter().enumerate() {
                let v = field.trim().parse::<T>().map_err(|_| Error::Parse {
                    line: row + 2,
                    message: format!("column `{}`: not a number: `{field}`", header[j]),
                })?;
                cols[j].push(v);
            }
        }
        let mut d = Dataset::new();
        for (name, col) in header.into_iter().zip(cols) {
            if name == SELECTED_COLUMN {
                d.selected = Some(col.iter().map(|v| *v != T::zero()).collect());
            } else if d.has_column(&name) {
                return Err(Error::InvalidInput(format!("duplicate column `{name}`")));
            } else {
                d.insert(name, col)?;
            }
        }
        Ok(d)
    }
}
