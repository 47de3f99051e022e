//! Column-oriented mixed-type table shared by the copula and the fidelity
//! metrics.

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{read_labeled, write_labeled, LabeledExample, PreTacticalFeatures, LABELED_COLUMNS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Categorical,
}

/// How the levels of a categorical column are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelOrder {
    FirstAppearance,
    /// Levels parse as numbers and are ordered by value.
    Numeric,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Continuous(Vec<f64>),
    Categorical { levels: Vec<String>, codes: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

impl Column {
    pub fn continuous(name: impl Into<String>, values: Vec<f64>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Continuous(values),
        }
    }

    pub fn categorical<S: AsRef<str>>(name: impl Into<String>, labels: &[S], order: LevelOrder) -> Self {
        let mut levels: Vec<String> = Vec::new();
        let mut seen: HashMap<&str, ()> = HashMap::new();
        for l in labels {
            if seen.insert(l.as_ref(), ()).is_none() {
                levels.push(l.as_ref().to_string());
            }
        }
        if order == LevelOrder::Numeric {
            levels.sort_by(|a, b| {
                let (x, y) = (a.parse::<f64>().unwrap_or(f64::NAN), b.parse::<f64>().unwrap_or(f64::NAN));
                x.partial_cmp(&y).unwrap_or_else(|| a.cmp(b))
            });
        }
        Self::with_levels(name, levels, labels)
    }

    /// Builds a categorical column against a fixed level list. Labels missing
    /// from `levels` are appended in first-appearance order.
    pub fn with_levels<S: AsRef<str>>(name: impl Into<String>, mut levels: Vec<String>, labels: &[S]) -> Self {
        let mut index: HashMap<String, u32> = levels.iter().enumerate().map(|(i, l)| (l.clone(), i as u32)).collect();
        let codes = labels
            .iter()
            .map(|l| {
                let l = l.as_ref();
                *index.entry(l.to_string()).or_insert_with(|| {
                    levels.push(l.to_string());
                    (levels.len() - 1) as u32
                })
            })
            .collect();
        Column {
            name: name.into(),
            data: ColumnData::Categorical { levels, codes },
        }
    }

    pub fn kind(&self) -> ColumnKind {
        match self.data {
            ColumnData::Continuous(_) => ColumnKind::Continuous,
            ColumnData::Categorical { .. } => ColumnKind::Categorical,
        }
    }

    pub fn len(&self) -> usize {
        match &self.data {
            ColumnData::Continuous(v) => v.len(),
            ColumnData::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_continuous(&self) -> Option<&[f64]> {
        match &self.data {
            ColumnData::Continuous(v) => Some(v),
            _ => None,
        }
    }

    pub fn labels(&self) -> Option<Vec<&str>> {
        match &self.data {
            ColumnData::Categorical { levels, codes } => Some(codes.iter().map(|&c| levels[c as usize].as_str()).collect()),
            _ => None,
        }
    }

    /// Cell rendered as text.
    pub fn cell(&self, row: usize) -> String {
        match &self.data {
            ColumnData::Continuous(v) => format!("{}", v[row]),
            ColumnData::Categorical { levels, codes } => levels[codes[row] as usize].clone(),
        }
    }

    fn take(&self, rows: &[usize]) -> Column {
        let data = match &self.data {
            ColumnData::Continuous(v) => ColumnData::Continuous(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Categorical { levels, codes } => ColumnData::Categorical {
                levels: levels.clone(),
                codes: rows.iter().map(|&r| codes[r]).collect(),
            },
        };
        Column {
            name: self.name.clone(),
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<Column>,
}

impl Table {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        if let Some(first) = columns.first() {
            if let Some(bad) = columns.iter().find(|c| c.len() != first.len()) {
                return Err(Error::InvalidInput(format!(
                    "column {} has {} rows, expected {}",
                    bad.name,
                    bad.len(),
                    first.len()
                )));
            }
        }
        Ok(Table { columns })
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Column::len)
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn indices_of(&self, kind: ColumnKind) -> Vec<usize> {
        (0..self.columns.len()).filter(|&i| self.columns[i].kind() == kind).collect()
    }

    pub fn schema(&self) -> Vec<(String, ColumnKind)> {
        self.columns.iter().map(|c| (c.name.clone(), c.kind())).collect()
    }

    /// Errors with the names of columns whose name or kind differ.
    pub fn check_schema(&self, other: &Table) -> Result<()> {
        let (a, b) = (self.schema(), other.schema());
        let mut offending = Vec::new();
        for i in 0..a.len().max(b.len()) {
            match (a.get(i), b.get(i)) {
                (Some(x), Some(y)) if x == y => {}
                (Some(x), Some(y)) if x.0 == y.0 => offending.push(x.0.clone()),
                (Some(x), Some(y)) => {
                    offending.push(x.0.clone());
                    offending.push(y.0.clone());
                }
                (Some(x), None) | (None, Some(x)) => offending.push(x.0.clone()),
                (None, None) => unreachable!(),
            }
        }
        if offending.is_empty() {
            Ok(())
        } else {
            Err(Error::SchemaMismatch(offending))
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Table {
        Table {
            columns: self.columns.iter().map(|c| c.take(rows)).collect(),
        }
    }

    /// Permutes every column independently: marginals are kept, cross-column
    /// dependence is destroyed.
    pub fn shuffle_columns(&self, seed: u64) -> Table {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.n_rows();
        Table {
            columns: self
                .columns
                .iter()
                .map(|c| {
                    let mut idx: Vec<usize> = (0..n).collect();
                    idx.shuffle(&mut rng);
                    c.take(&idx)
                })
                .collect(),
        }
    }

    /// Mixed-type view of labeled examples. Carrier, airports and aircraft type
    /// are categorical; the calendar fields are ordinal categoricals ordered by
    /// value; scheduled duration and the three targets are continuous.
    pub fn from_examples(examples: &[LabeledExample]) -> Table {
        let strs = |f: fn(&PreTacticalFeatures) -> &str| examples.iter().map(|e| f(&e.features)).collect::<Vec<_>>();
        let ints = |f: fn(&PreTacticalFeatures) -> u32| examples.iter().map(|e| f(&e.features).to_string()).collect::<Vec<_>>();
        let nums = |f: fn(&LabeledExample) -> i64| examples.iter().map(|e| f(e) as f64).collect::<Vec<_>>();
        let c = LABELED_COLUMNS;
        Table {
            columns: vec![
                Column::categorical(c[0], &strs(|f| &f.carrier_code), LevelOrder::FirstAppearance),
                Column::categorical(c[1], &strs(|f| &f.dep_airport), LevelOrder::FirstAppearance),
                Column::categorical(c[2], &strs(|f| &f.arr_airport), LevelOrder::FirstAppearance),
                Column::categorical(c[3], &strs(|f| &f.aircraft_type), LevelOrder::FirstAppearance),
                Column::categorical(c[4], &ints(|f| f.month), LevelOrder::Numeric),
                Column::categorical(c[5], &ints(|f| f.day), LevelOrder::Numeric),
                Column::categorical(c[6], &ints(|f| f.hour), LevelOrder::Numeric),
                Column::categorical(c[7], &ints(|f| f.minute), LevelOrder::Numeric),
                Column::categorical(c[8], &ints(|f| f.day_of_week), LevelOrder::Numeric),
                Column::continuous(c[9], nums(|e| e.features.sched_duration)),
                Column::continuous(c[10], nums(|e| e.dep_delay)),
                Column::continuous(c[11], nums(|e| e.arr_delay)),
                Column::continuous(c[12], nums(|e| e.turnaround)),
            ],
        }
    }

    /// Inverse of [`Table::from_examples`]; continuous cells are rounded to
    /// whole minutes.
    pub fn to_examples(&self) -> Result<Vec<LabeledExample>> {
        let expected = Table::from_examples(&[]);
        self.check_schema(&expected)?;
        let n = self.n_rows();
        let cell = |c: usize, r: usize| self.columns[c].cell(r);
        let int = |c: usize, r: usize| -> Result<u32> {
            let s = cell(c, r);
            s.parse::<u32>()
                .map_err(|_| Error::InvalidInput(format!("column {}: not an integer: {s:?}", self.columns[c].name)))
        };
        let num = |c: usize, r: usize| -> i64 { self.columns[c].as_continuous().map_or(0.0, |v| v[r]).round() as i64 };
        (0..n)
            .map(|r| {
                Ok(LabeledExample {
                    features: PreTacticalFeatures {
                        carrier_code: cell(0, r),
                        dep_airport: cell(1, r),
                        arr_airport: cell(2, r),
                        aircraft_type: cell(3, r),
                        month: int(4, r)?,
                        day: int(5, r)?,
                        hour: int(6, r)?,
                        minute: int(7, r)?,
                        day_of_week: int(8, r)?,
                        sched_duration: num(9, r),
                    },
                    dep_delay: num(10, r),
                    arr_delay: num(11, r),
                    turnaround: num(12, r),
                })
            })
            .collect()
    }

    pub fn read_labeled_csv<R: Read>(source: R) -> Result<Table> {
        Ok(Table::from_examples(&read_labeled(source)?))
    }

    pub fn write_labeled_csv<W: Write>(&self, sink: W) -> Result<()> {
        write_labeled(sink, &self.to_examples()?)
    }

    /// Generic CSV dump: header of column names, cells rendered as text.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for r in 0..self.n_rows() {
            w.write_record(self.columns.iter().map(|c| c.cell(r)))?;
        }
        w.flush().map_err(|e| Error::io("writing table", e))?;
        Ok(())
    }
}
