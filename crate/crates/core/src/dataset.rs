//! Two-class numeric datasets: ingestion, validation and resampling helpers.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use serde::Serialize;

use crate::error::{Error, Result};

/// Class label. Class 1 minus class 2 is the sign convention everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Class {
    One,
    Two,
}

impl Class {
    pub fn index(self) -> usize {
        match self {
            Class::One => 0,
            Class::Two => 1,
        }
    }

    pub fn other(self) -> Class {
        match self {
            Class::One => Class::Two,
            Class::Two => Class::One,
        }
    }

    fn parse(s: &str) -> Option<Class> {
        match s.trim().parse::<f64>().ok()? {
            1.0 => Some(Class::One),
            2.0 => Some(Class::Two),
            _ => None,
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Class::One => f.write_str("1"),
            Class::Two => f.write_str("2"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CsvOptions {
    pub has_header: bool,
    /// Zero-based index of the label column.
    pub label_column: usize,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self { has_header: true, label_column: 0 }
    }
}

/// A feature that is constant within one class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Degeneracy {
    pub feature: usize,
    pub name: String,
    pub class: Class,
}

/// `N x p` feature matrix with one class label per row.
///
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassedDataset {
    x: Array2<f64>,
    y: Vec<Class>,
    n1: usize,
    n2: usize,
    feature_names: Vec<String>,
}

impl ClassedDataset {
    pub fn new(x: Array2<f64>, y: Vec<Class>, feature_names: Option<Vec<String>>) -> Result<Self> {
        let (n, p) = x.dim();
        if y.len() != n {
            return Err(Error::InvalidArgument(format!("{} labels for {} rows", y.len(), n)));
        }
        if p < 2 {
            return Err(Error::TooFewFeatures(p));
        }
        if let Some(((row, column), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Parse { row, column, value: x[[row, column]].to_string() });
        }
        let n1 = y.iter().filter(|&&c| c == Class::One).count();
        let n2 = n - n1;
        for (class, count) in [(Class::One, n1), (Class::Two, n2)] {
            if count < 2 {
                return Err(Error::ClassTooSmall { class, count });
            }
        }
        let feature_names = match feature_names {
            Some(names) if names.len() != p => {
                return Err(Error::InvalidArgument(format!("{} feature names for {} features", names.len(), p)))
            }
            Some(names) => names,
            None => (1..=p).map(|j| format!("V{j}")).collect(),
        };
        Ok(Self { x, y, n1, n2, feature_names })
    }

    pub fn load_csv(path: impl AsRef<Path>, options: CsvOptions) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
        Self::from_csv_reader(file, options)
    }

    /// Parses CSV from any reader. Row numbers in errors are 1-based data rows.
    pub fn from_csv_reader<R: Read>(reader: R, options: CsvOptions) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(options.has_header)
            .flexible(true)
            .from_reader(reader);

        let header: Option<Vec<String>> = if options.has_header {
            Some(rdr.headers()?.iter().map(|s| s.trim().to_owned()).collect())
        } else {
            None
        };

        let mut width = header.as_ref().map(Vec::len);
        let mut values = Vec::new();
        let mut y = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let row = i + 1;
            let expected = *width.get_or_insert(record.len());
            if record.len() != expected {
                return Err(Error::RaggedRow { row, found: record.len(), expected });
            }
            if options.label_column >= expected {
                return Err(Error::LabelColumn { column: options.label_column, width: expected });
            }
            for (column, cell) in record.iter().enumerate() {
                let cell = cell.trim();
                if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
                    return Err(Error::Missing { row, column });
                }
                if column == options.label_column {
                    let class = Class::parse(cell).ok_or_else(|| Error::InvalidLabel { row, value: cell.to_owned() })?;
                    y.push(class);
                } else {
                    match cell.parse::<f64>() {
                        Ok(v) if v.is_finite() => values.push(v),
                        _ => return Err(Error::Parse { row, column, value: cell.to_owned() }),
                    }
                }
            }
        }

        let width = width.unwrap_or(0);
        if width <= options.label_column && width > 0 {
            return Err(Error::LabelColumn { column: options.label_column, width });
        }
        let p = width.saturating_sub(1);
        let names = header.map(|h| {
            h.into_iter()
                .enumerate()
                .filter(|&(c, _)| c != options.label_column)
                .map(|(_, name)| name)
                .collect::<Vec<_>>()
        });
        let x = Array2::from_shape_vec((y.len(), p), values)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Self::new(x, y, names)
    }

    /// Writes label-first CSV with a header; values use 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["class".to_owned()];
        header.extend(self.feature_names.iter().cloned());
        wtr.write_record(&header)?;
        for (row, class) in self.x.rows().into_iter().zip(&self.y) {
            let mut rec = vec![class.to_string()];
            rec.extend(row.iter().map(|&v| crate::io::fmt_f64(v)));
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|source| Error::Io { path: "<writer>".into(), source })?;
        Ok(())
    }

    /// Features with zero within-class standard deviation, one report per (feature, class).
    pub fn validate(&self) -> Vec<Degeneracy> {
        let mut reports = Vec::new();
        for j in 0..self.p() {
            for class in [Class::One, Class::Two] {
                let mut vals = self.class_rows(class).map(|i| self.x[[i, j]]);
                let first = vals.next();
                if let Some(first) = first {
                    if vals.all(|v| v == first) {
                        reports.push(Degeneracy { feature: j, name: self.feature_names[j].clone(), class });
                    }
                }
            }
        }
        reports
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn class_count(&self, class: Class) -> usize {
        match class {
            Class::One => self.n1,
            Class::Two => self.n2,
        }
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &[Class] {
        &self.y
    }

    pub fn feature(&self, j: usize) -> ArrayView1<'_, f64> {
        self.x.column(j)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Row indices belonging to `class`, in file order.
    pub fn class_rows(&self, class: Class) -> impl Iterator<Item = usize> + '_ {
        self.y.iter().enumerate().filter(move |(_, &c)| c == class).map(|(i, _)| i)
    }

    /// Same features, different labels. Class sizes must remain valid.
    pub fn with_labels(&self, y: Vec<Class>) -> Result<Self> {
        Self::new(self.x.clone(), y, Some(self.feature_names.clone()))
    }

    /// Labels with the two classes exchanged.
    pub fn swapped_labels(&self) -> Self {
        let y = self.y.iter().map(|c| c.other()).collect();
        self.with_labels(y).expect("swapping labels preserves validity")
    }

    /// Rows selected (with repetition allowed) in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let x = self.x.select(Axis(0), rows);
        let y = rows.iter().map(|&i| self.y[i]).collect();
        Self::new(x, y, Some(self.feature_names.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn load(s: &str) -> Result<ClassedDataset> {
        ClassedDataset::from_csv_reader(s.as_bytes(), CsvOptions::default())
    }

    #[test]
    fn loads_small_file() {
        let ds = load("y,a,b,c\n1,0.5,1,2\n1,1.5,2,3\n2,0,0,1\n2,1,4,2\n").unwrap();
        assert_eq!((ds.n(), ds.p(), ds.n1(), ds.n2()), (4, 3, 2, 2));
        assert_eq!(ds.feature_names(), ["a", "b", "c"]);
        assert_eq!(ds.x()[[1, 0]], 1.5);
        assert_eq!(ds.y(), [Class::One, Class::One, Class::Two, Class::Two]);
    }

    #[test]
    fn default_names_without_header() {
        let opts = CsvOptions { has_header: false, label_column: 2 };
        let ds = ClassedDataset::from_csv_reader("0,1,1\n2,3,1\n4,5,2\n6,8,2\n".as_bytes(), opts).unwrap();
        assert_eq!(ds.feature_names(), ["V1", "V2"]);
        assert_eq!(ds.x()[[3, 1]], 8.0);
    }

    #[test]
    fn rejects_bad_label() {
        let err = load("y,a,b\n1,0,1\n3,1,2\n2,0,0\n2,1,1\n").unwrap_err();
        assert!(matches!(err, Error::InvalidLabel { row: 2, .. }), "{err}");
        assert!(err.to_string().contains("invalid class label"));
    }

    #[test]
    fn rejects_small_class() {
        let err = load("y,a,b\n1,0,1\n1,1,2\n1,5,2\n2,0,0\n").unwrap_err();
        assert!(matches!(err, Error::ClassTooSmall { class: Class::Two, count: 1 }), "{err}");
        assert!(err.to_string().contains("class too small"));
    }

    #[test]
    fn rejects_missing_and_garbage() {
        let err = load("y,a,b\n1,,1\n1,1,2\n2,0,0\n2,1,1\n").unwrap_err();
        assert!(matches!(err, Error::Missing { row: 1, column: 1 }), "{err}");
        let err = load("y,a,b\n1,0,1\n1,1,x\n2,0,0\n2,1,1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, column: 2, .. }), "{err}");
        let err = load("y,a,b\n1,0,1\n1,1,inf\n2,0,0\n2,1,1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn rejects_single_feature() {
        let err = load("y,a\n1,0\n1,1\n2,0\n2,1\n").unwrap_err();
        assert!(matches!(err, Error::TooFewFeatures(1)));
    }

    #[test]
    fn validate_reports_degenerate_features() {
        let x = array![[1.0, 0.0, 5.0], [1.0, 1.0, 5.0], [0.0, 2.0, 5.0], [2.0, 3.0, 5.0]];
        let y = vec![Class::One, Class::One, Class::Two, Class::Two];
        let ds = ClassedDataset::new(x, y, None).unwrap();
        let reports = ds.validate();
        assert_eq!(
            reports.iter().map(|r| (r.feature, r.class)).collect::<Vec<_>>(),
            vec![(0, Class::One), (2, Class::One), (2, Class::Two)]
        );

        let x = array![[1.0, 0.0], [2.0, 1.0], [0.0, 2.0], [2.0, 3.0]];
        let ds = ClassedDataset::new(x, ds.y().to_vec(), None).unwrap();
        assert!(ds.validate().is_empty());
    }

    #[test]
    fn two_degenerate_features_two_reports() {
        let x = array![[1.0, 0.0, 3.0], [1.0, 0.0, 4.0], [0.0, 2.0, 5.0], [2.0, 3.0, 6.0]];
        let y = vec![Class::One, Class::One, Class::Two, Class::Two];
        let reports = ClassedDataset::new(x, y, None).unwrap().validate();
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[0].name, "V1");
        assert_eq!(reports[1].name, "V2");
    }
}
