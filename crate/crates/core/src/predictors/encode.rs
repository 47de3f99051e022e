use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledExample, PreTacticalFeatures, Target};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const FEATURE_NAMES: [&str; 10] = [
    "carrier",
    "dep_airport",
    "arr_airport",
    "aircraft_type",
    "month",
    "day",
    "hour",
    "minute",
    "day_of_week",
    "sched_duration",
];

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    data: Vec<T>,
    n_rows: usize,
    n_cols: usize,
}

impl<T: Scalar> Matrix<T> {
    pub fn new(data: Vec<T>, n_cols: usize) -> Result<Self> {
        if n_cols == 0 || !data.len().is_multiple_of(n_cols) {
            return Err(Error::DimensionMismatch {
                expected: n_cols,
                actual: data.len(),
            });
        }
        Ok(Matrix {
            n_rows: data.len() / n_cols,
            data,
            n_cols,
        })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: bad.len(),
            });
        }
        Matrix::new(rows.concat(), d)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n_cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    /// Same rows with columns reordered so that new column `k` is old column
    /// `order[k]`.
    pub fn permute_columns(&self, order: &[usize]) -> Matrix<T> {
        let data = (0..self.n_rows)
            .flat_map(|i| order.iter().map(move |&j| self.get(i, j)))
            .collect();
        Matrix {
            data,
            n_rows: self.n_rows,
            n_cols: order.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    /// Codes follow first appearance in the dictionary-building pass; unseen
    /// values get the reserved code `levels.len()`.
    Categorical { levels: Vec<String> },
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub name: String,
    pub kind: FeatureKind,
}

/// Encoding dictionary, built on training data only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Encoding {
    pub columns: Vec<FeatureMeta>,
}

impl Encoding {
    pub fn fit(examples: &[LabeledExample]) -> Self {
        let strings: [fn(&PreTacticalFeatures) -> &str; 4] = [
            |f| &f.carrier_code,
            |f| &f.dep_airport,
            |f| &f.arr_airport,
            |f| &f.aircraft_type,
        ];
        let mut columns: Vec<FeatureMeta> = strings
            .iter()
            .enumerate()
            .map(|(k, get)| {
                let mut levels: Vec<String> = Vec::new();
                let mut seen = std::collections::HashSet::new();
                for e in examples {
                    let v = get(&e.features);
                    if seen.insert(v) {
                        levels.push(v.to_string());
                    }
                }
                FeatureMeta {
                    name: FEATURE_NAMES[k].to_string(),
                    kind: FeatureKind::Categorical { levels },
                }
            })
            .collect();
        columns.extend(FEATURE_NAMES[4..].iter().map(|n| FeatureMeta {
            name: n.to_string(),
            kind: FeatureKind::Numeric,
        }));
        Encoding { columns }
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn code(&self, column: usize, value: &str) -> usize {
        match &self.columns[column].kind {
            FeatureKind::Categorical { levels } => levels.iter().position(|l| l == value).unwrap_or(levels.len()),
            FeatureKind::Numeric => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix<T> {
    pub x: Matrix<T>,
    pub encoding: Encoding,
}

/// Ordinal-encodes the pre-tactical features. Builds the dictionary from
/// `examples` unless one is supplied.
pub fn encode<T: Scalar>(examples: &[LabeledExample], dictionary: Option<&Encoding>) -> Result<EncodedMatrix<T>> {
    if examples.is_empty() {
        return Err(Error::Empty("no examples to encode".into()));
    }
    let encoding = dictionary.cloned().unwrap_or_else(|| Encoding::fit(examples));
    let index: Vec<std::collections::HashMap<&str, usize>> = encoding.columns[..4]
        .iter()
        .map(|c| match &c.kind {
            FeatureKind::Categorical { levels } => levels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect(),
            FeatureKind::Numeric => Default::default(),
        })
        .collect();
    let mut data = Vec::with_capacity(examples.len() * FEATURE_NAMES.len());
    for e in examples {
        let f = &e.features;
        for (k, v) in [&f.carrier_code, &f.dep_airport, &f.arr_airport, &f.aircraft_type].into_iter().enumerate() {
            let code = index[k].get(v.as_str()).copied().unwrap_or(index[k].len());
            data.push(T::of_usize(code));
        }
        for v in [f.month, f.day, f.hour, f.minute, f.day_of_week] {
            data.push(T::of(v as f64));
        }
        data.push(T::of(f.sched_duration as f64));
    }
    Ok(EncodedMatrix {
        x: Matrix::new(data, FEATURE_NAMES.len())?,
        encoding,
    })
}

pub fn targets<T: Scalar>(examples: &[LabeledExample], target: Target) -> Vec<T> {
    examples.iter().map(|e| T::of(target.of(e) as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(carrier: &str, duration: i64) -> LabeledExample {
        LabeledExample {
            features: PreTacticalFeatures {
                carrier_code: carrier.into(),
                dep_airport: "FRA".into(),
                arr_airport: "CDG".into(),
                aircraft_type: "A320".into(),
                month: 3,
                day: 4,
                hour: 9,
                minute: 15,
                day_of_week: 0,
                sched_duration: duration,
            },
            dep_delay: 5,
            arr_delay: 3,
            turnaround: 60,
        }
    }

    #[test]
    fn dictionary_contract() {
        let train = vec![ex("LH", 150), ex("AF", 90), ex("LH", 80)];
        let enc = encode::<f64>(&train, None).unwrap();
        assert_eq!(enc.x.column(0), vec![0.0, 1.0, 0.0]);
        assert_eq!(enc.x.get(0, 9), 150.0);
        let test = encode::<f64>(&[ex("BA", 100)], Some(&enc.encoding)).unwrap();
        assert_eq!(test.x.get(0, 0), 2.0);
        let again = encode::<f64>(&train, Some(&enc.encoding)).unwrap();
        assert_eq!(again, enc);
        assert!(encode::<f64>(&[], None).is_err());
    }
}
