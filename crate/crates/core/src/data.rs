//! Datasets, CSV input/output, splitting, subsampling and a synthetic
//! negative-binomial crash-count generator.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand_distr::{Distribution, Gamma, Poisson};

use crate::error::{check_len, Error, Result};
use crate::numerics::{RngStream, RowMatrix};

/// Conventional name of the year column.
pub const YEAR_COLUMN: &str = "year";

/// Largest linear predictor a synthetic spec may reach.
pub const MAX_LOG_MEAN: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: RowMatrix,
    targets: Vec<f64>,
    feature_names: Vec<String>,
    target_name: String,
    years: Option<Vec<i64>>,
}

impl Dataset {
    pub fn new(
        features: RowMatrix,
        targets: Vec<f64>,
        feature_names: Vec<String>,
        target_name: impl Into<String>,
        years: Option<Vec<i64>>,
    ) -> Result<Self> {
        if features.ncols() == 0 {
            return Err(Error::invalid("a dataset needs at least one feature"));
        }
        check_len("dataset targets", features.nrows(), targets.len())?;
        check_len("dataset feature names", features.ncols(), feature_names.len())?;
        if let Some(y) = &years {
            check_len("dataset year labels", features.nrows(), y.len())?;
        }
        if !features.all_finite() || !targets.iter().all(|t| t.is_finite()) {
            return Err(Error::invalid("dataset entries must be finite"));
        }
        Ok(Dataset {
            features,
            targets,
            feature_names,
            target_name: target_name.into(),
            years,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &RowMatrix {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn years(&self) -> Option<&[i64]> {
        self.years.as_deref()
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            years: self.years.as_ref().map(|y| indices.iter().map(|&i| y[i]).collect()),
        }
    }
}

/// Read a headed CSV. Every column other than the target and the year column
/// becomes a feature, in header order. Parse errors report the 1-based file
/// line (the header is line 1).
pub fn load_csv(path: impl AsRef<Path>, target_column: &str, year_column: Option<&str>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path.as_ref())?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
    };
    let target_at = find(target_column)?;
    let year_at = year_column.map(find).transpose()?;
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != target_at && Some(c) != year_at).collect();
    if feature_cols.is_empty() {
        return Err(Error::Schema("no feature columns besides the target".into()));
    }

    let mut data = Vec::new();
    let mut targets = Vec::new();
    let mut years = year_at.map(|_| Vec::new());
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(i as u64 + 2, |p| p.line()) as usize;
        let cell = |c: usize| -> Result<&str> {
            record.get(c).ok_or_else(|| Error::Parse {
                row: line,
                column: headers[c].clone(),
                value: String::new(),
            })
        };
        let number = |c: usize| -> Result<f64> {
            let raw = cell(c)?;
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse {
                    row: line,
                    column: headers[c].clone(),
                    value: raw.to_owned(),
                }),
            }
        };
        for &c in &feature_cols {
            data.push(number(c)?);
        }
        targets.push(number(target_at)?);
        if let (Some(c), Some(ys)) = (year_at, years.as_mut()) {
            let raw = cell(c)?;
            ys.push(raw.parse::<i64>().map_err(|_| Error::Parse {
                row: line,
                column: headers[c].clone(),
                value: raw.to_owned(),
            })?);
        }
    }
    let rows = targets.len();
    let features = RowMatrix::from_vec(rows, feature_cols.len(), data)?;
    let names = feature_cols.iter().map(|&c| headers[c].clone()).collect();
    Dataset::new(features, targets, names, target_column, years)
}

/// Write features, then the target, then `year` when present. Numbers use the
/// shortest text that parses back to the same value.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let mut header: Vec<&str> = ds.feature_names.iter().map(String::as_str).collect();
    header.push(&ds.target_name);
    if ds.years.is_some() {
        header.push(YEAR_COLUMN);
    }
    writer.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for r in 0..ds.n_rows() {
        row.clear();
        row.extend(ds.features.row(r).iter().map(|v| v.to_string()));
        row.push(ds.targets[r].to_string());
        if let Some(y) = &ds.years {
            row.push(y[r].to_string());
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Partition rows by year label, preserving order. Rows whose year is in
/// neither set are dropped.
pub fn split_by_year(ds: &Dataset, train_years: &[i64], test_years: &[i64]) -> Result<(Dataset, Dataset)> {
    let years = ds
        .years()
        .ok_or_else(|| Error::invalid("splitting by year needs year labels"))?;
    let train_set: HashSet<i64> = train_years.iter().copied().collect();
    let test_set: HashSet<i64> = test_years.iter().copied().collect();
    if let Some(y) = train_set.intersection(&test_set).next() {
        return Err(Error::invalid(format!("year {y} is in both the training and test sets")));
    }
    let train: Vec<usize> = (0..ds.n_rows()).filter(|&i| train_set.contains(&years[i])).collect();
    let test: Vec<usize> = (0..ds.n_rows()).filter(|&i| test_set.contains(&years[i])).collect();
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid(format!(
            "year split leaves an empty part ({} train rows, {} test rows)",
            train.len(),
            test.len()
        )));
    }
    Ok((ds.select(&train), ds.select(&test)))
}

/// `ceil(fraction * n)` guarded against representation error, at least 1.
pub fn subsample_size(n: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("subsample fraction must be in (0, 1], got {fraction}")));
    }
    Ok(((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1.min(n), n))
}

/// Indices of `ceil(fraction * n)` distinct rows in draw order (partial
/// Fisher–Yates).
pub fn subsample_indices(n: usize, fraction: f64, stream: &mut RngStream) -> Result<Vec<usize>> {
    let m = subsample_size(n, fraction)?;
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..m {
        let j = i + stream.below(n - i);
        idx.swap(i, j);
    }
    idx.truncate(m);
    Ok(idx)
}

/// Random subset without replacement.
pub fn subsample(ds: &Dataset, fraction: f64, stream: &mut RngStream) -> Result<Dataset> {
    Ok(ds.select(&subsample_indices(ds.n_rows(), fraction, stream)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureShape {
    Uniform,
    /// Uniform in `ln x`; needs a positive range.
    LogUniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub name: String,
    pub low: f64,
    pub high: f64,
    pub shape: FeatureShape,
    pub coefficient: f64,
}

impl FeatureSpec {
    pub fn new(name: &str, low: f64, high: f64, shape: FeatureShape, coefficient: f64) -> Self {
        FeatureSpec {
            name: name.to_owned(),
            low,
            high,
            shape,
            coefficient,
        }
    }

    fn sample(&self, stream: &mut RngStream) -> f64 {
        let u = stream.uniform();
        match self.shape {
            FeatureShape::Uniform => self.low + u * (self.high - self.low),
            FeatureShape::LogUniform => (self.low.ln() + u * (self.high.ln() - self.low.ln())).exp(),
        }
    }
}

/// How year labels are attached to generated rows.
#[derive(Debug, Clone, PartialEq)]
pub enum YearLayout {
    /// Row `i` gets `first + i % count`.
    RoundRobin { first: i64, count: usize },
    /// Consecutive blocks of rows per year; the counts must sum to `n_rows`.
    Blocks(Vec<(i64, usize)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_rows: usize,
    pub features: Vec<FeatureSpec>,
    pub intercept: f64,
    /// NB2 `k`: variance `mu + mu^2 / k`.
    pub dispersion: f64,
    pub years: YearLayout,
    pub target_name: String,
    pub seed: u64,
}

impl SynthSpec {
    /// Six road covariates over nine years, 418 sections per year.
    pub fn case1(seed: u64) -> Self {
        use FeatureShape::*;
        SynthSpec {
            n_rows: 3762,
            features: vec![
                FeatureSpec::new("exposure", 0.5, 60.0, LogUniform, 0.03),
                FeatureSpec::new("aadt", 14_500.0, 442_900.0, LogUniform, 2.5e-6),
                FeatureSpec::new("left_shoulder", 0.5, 4.0, Uniform, -0.15),
                FeatureSpec::new("median_width", 2.0, 30.0, Uniform, -0.02),
                FeatureSpec::new("right_shoulder", 1.0, 3.5, Uniform, -0.2),
                FeatureSpec::new("curve_deflection", 0.0, 40.0, Uniform, 0.01),
            ],
            intercept: 0.8,
            dispersion: 2.0,
            years: YearLayout::RoundRobin { first: 2000, count: 9 },
            target_name: "crashes".into(),
            seed,
        }
    }

    /// Sixteen storm-hour covariates over six winter seasons; the first four
    /// seasons hold 85,183 rows and the last two 36,875.
    pub fn case2(seed: u64) -> Self {
        use FeatureShape::*;
        SynthSpec {
            n_rows: 122_058,
            features: vec![
                FeatureSpec::new("region", 1.0, 5.0, Uniform, 0.02),
                FeatureSpec::new("road_type", 0.0, 1.0, Uniform, 0.2),
                FeatureSpec::new("storm_hour", 1.0, 48.0, Uniform, -0.005),
                FeatureSpec::new("month_id", 1.0, 6.0, Uniform, 0.03),
                FeatureSpec::new("temperature", -25.0, 2.0, Uniform, -0.02),
                FeatureSpec::new("wind_speed", 0.0, 60.0, Uniform, 0.005),
                FeatureSpec::new("visibility", 0.1, 25.0, Uniform, -0.03),
                FeatureSpec::new("precipitation", 0.0, 5.0, Uniform, 0.15),
                FeatureSpec::new("rsi", 0.1, 1.0, Uniform, -1.0),
                FeatureSpec::new("wrm", 0.0, 10.0, Uniform, -0.02),
                FeatureSpec::new("anti_icing", 0.0, 1.0, Uniform, -0.1),
                FeatureSpec::new("traffic_volume", 100.0, 5000.0, LogUniform, 2e-4),
                FeatureSpec::new("length", 12.9, 139.5, Uniform, 0.008),
                FeatureSpec::new("paved_shoulder_full", 0.0, 100.0, Uniform, -0.002),
                FeatureSpec::new("paved_shoulder_partial", 0.0, 50.0, Uniform, 0.002),
                FeatureSpec::new("t_intersections", 0.0, 30.0, Uniform, 0.01),
            ],
            intercept: -4.3,
            dispersion: 1.0,
            years: YearLayout::Blocks(vec![
                (2000, 21_296),
                (2001, 21_296),
                (2002, 21_296),
                (2003, 21_295),
                (2004, 18_438),
                (2005, 18_437),
            ]),
            target_name: "crashes".into(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rows == 0 || self.features.is_empty() {
            return Err(Error::invalid("synthetic spec needs rows and at least one feature"));
        }
        if !(self.dispersion > 0.0 && self.dispersion.is_finite()) {
            return Err(Error::invalid("synthetic dispersion must be positive"));
        }
        let mut max_eta = self.intercept;
        for f in &self.features {
            let finite = f.low.is_finite() && f.high.is_finite() && f.coefficient.is_finite();
            if !finite || f.low > f.high || (f.shape == FeatureShape::LogUniform && f.low <= 0.0) {
                return Err(Error::invalid(format!("feature '{}' has an invalid range", f.name)));
            }
            max_eta += (f.coefficient * f.low).max(f.coefficient * f.high);
        }
        if !(max_eta <= MAX_LOG_MEAN) {
            return Err(Error::invalid(format!(
                "linear predictor can reach {max_eta}, above the limit {MAX_LOG_MEAN}"
            )));
        }
        match &self.years {
            YearLayout::RoundRobin { count, .. } if *count == 0 => {
                return Err(Error::invalid("round-robin year layout needs at least one year"));
            }
            YearLayout::Blocks(blocks) if blocks.iter().map(|b| b.1).sum::<usize>() != self.n_rows => {
                return Err(Error::invalid("year block sizes must sum to the row count"));
            }
            _ => {}
        }
        Ok(())
    }

    fn year_labels(&self) -> Vec<i64> {
        match &self.years {
            YearLayout::RoundRobin { first, count } => {
                (0..self.n_rows).map(|i| first + (i % count) as i64).collect()
            }
            YearLayout::Blocks(blocks) => blocks.iter().flat_map(|&(y, n)| std::iter::repeat_n(y, n)).collect(),
        }
    }

    /// Generator parameters as `key = value` lines.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "n_rows = {}", self.n_rows);
        let _ = writeln!(out, "intercept = {}", self.intercept);
        let _ = writeln!(out, "dispersion = {}", self.dispersion);
        let _ = writeln!(out, "target = {}", self.target_name);
        match &self.years {
            YearLayout::RoundRobin { first, count } => {
                let _ = writeln!(out, "years = round_robin {first} {count}");
            }
            YearLayout::Blocks(blocks) => {
                let parts: Vec<String> = blocks.iter().map(|(y, n)| format!("{y}:{n}")).collect();
                let _ = writeln!(out, "years = blocks {}", parts.join(","));
            }
        }
        for f in &self.features {
            let shape = match f.shape {
                FeatureShape::Uniform => "uniform",
                FeatureShape::LogUniform => "log_uniform",
            };
            let _ = writeln!(
                out,
                "feature.{} = {} {} {} {}",
                f.name, shape, f.low, f.high, f.coefficient
            );
        }
        out
    }
}

/// Draw a dataset: features per spec, counts from NB2 (Gamma–Poisson mixture)
/// with mean `exp(intercept + sum coef * x)`.
pub fn synthesize(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut stream = RngStream::new(spec.seed);
    let d = spec.features.len();
    let k = spec.dispersion;
    let mut data = Vec::with_capacity(spec.n_rows * d);
    let mut targets = Vec::with_capacity(spec.n_rows);
    for _ in 0..spec.n_rows {
        let mut eta = spec.intercept;
        for f in &spec.features {
            let x = f.sample(&mut stream);
            eta += f.coefficient * x;
            data.push(x);
        }
        let mu = eta.exp();
        let gamma = Gamma::new(k, mu / k).map_err(|e| Error::invalid(format!("gamma draw: {e}")))?;
        let lambda = gamma.sample(&mut stream);
        let count = if lambda > 0.0 {
            Poisson::new(lambda)
                .map_err(|e| Error::invalid(format!("poisson draw: {e}")))?
                .sample(&mut stream)
        } else {
            0.0
        };
        targets.push(count);
    }
    let features = RowMatrix::from_vec(spec.n_rows, d, data)?;
    let names = spec.features.iter().map(|f| f.name.clone()).collect();
    Dataset::new(features, targets, names, spec.target_name.clone(), Some(spec.year_labels()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::fs;

    fn tiny(years: Option<Vec<i64>>) -> Dataset {
        let x = RowMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0], [7.0, 8.0]]).unwrap();
        Dataset::new(x, vec![0.0, 1.0, 2.0, 3.0], vec!["a".into(), "b".into()], "y", years).unwrap()
    }

    fn flat(intercept: f64, k: f64, n: usize, seed: u64) -> SynthSpec {
        SynthSpec {
            n_rows: n,
            features: vec![FeatureSpec::new("x", 0.0, 1.0, FeatureShape::Uniform, 0.0)],
            intercept,
            dispersion: k,
            years: YearLayout::RoundRobin { first: 2000, count: 3 },
            target_name: "y".into(),
            seed,
        }
    }

    #[test]
    fn load_simple_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        fs::write(&p, "f1,f2,target\n1,2,3\n4,5,6\n7,8,9\n").unwrap();
        let ds = load_csv(&p, "target", None).unwrap();
        assert_eq!((ds.n_rows(), ds.n_features()), (3, 2));
        assert_eq!(ds.targets(), &[3.0, 6.0, 9.0]);
        assert_eq!(ds.feature_names(), &["f1".to_string(), "f2".to_string()]);
        assert!(ds.years().is_none());
    }

    #[test]
    fn load_year_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        fs::write(&p, "year,f1,target\n2000,1,3\n2001,4,6\n").unwrap();
        let ds = load_csv(&p, "target", Some("year")).unwrap();
        assert_eq!(ds.years(), Some(&[2000, 2001][..]));
        assert_eq!(ds.n_features(), 1);
    }

    #[test]
    fn load_errors_name_coordinates() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        fs::write(&p, "f1,f2,target\nabc,2,3\n").unwrap();
        match load_csv(&p, "target", None) {
            Err(Error::Parse { row, column, value }) => {
                assert_eq!((row, column.as_str(), value.as_str()), (2, "f1", "abc"));
            }
            other => panic!("{other:?}"),
        }
        match load_csv(&p, "crashes", None) {
            Err(Error::Schema(msg)) => assert!(msg.contains("crashes")),
            other => panic!("{other:?}"),
        }
        fs::write(&p, "f1,target\n1,\n").unwrap();
        assert!(matches!(load_csv(&p, "target", None), Err(Error::Parse { .. })));
        fs::write(&p, "f1,target\nNaN,1\n").unwrap();
        assert!(matches!(load_csv(&p, "target", None), Err(Error::Parse { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let ds = synthesize(&SynthSpec::case1(3)).unwrap();
        write_csv(&ds, &p).unwrap();
        let back = load_csv(&p, "crashes", Some(YEAR_COLUMN)).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn split_examples() {
        let ds = synthesize(&SynthSpec::case1(1)).unwrap();
        let (train, test) = split_by_year(&ds, &(2000..=2006).collect::<Vec<_>>(), &[2007, 2008]).unwrap();
        assert_eq!(train.n_rows() + test.n_rows(), ds.n_rows());
        assert_eq!(test.n_rows(), 2 * 418);
        assert!(split_by_year(&ds, &[2000, 2001], &[2001]).is_err());
        assert!(split_by_year(&ds, &[2000], &[1990]).is_err());
        assert!(split_by_year(&tiny(None), &[1], &[2]).is_err());

        let t = tiny(Some(vec![1, 2, 1, 2]));
        let (a, b) = split_by_year(&t, &[1], &[2]).unwrap();
        assert_eq!(a.targets(), &[0.0, 2.0]);
        assert_eq!(b.targets(), &[1.0, 3.0]);
    }

    #[test]
    fn case2_style_split_counts() {
        let n = 122_058;
        let x = RowMatrix::zeros(n, 1);
        let years: Vec<i64> = (0..n).map(|i| if i < 85_183 { 2000 + (i % 4) as i64 } else { 2004 + (i % 2) as i64 }).collect();
        let ds = Dataset::new(x, vec![0.0; n], vec!["x".into()], "y", Some(years)).unwrap();
        let (train, test) = split_by_year(&ds, &[2000, 2001, 2002, 2003], &[2004, 2005]).unwrap();
        assert_eq!((train.n_rows(), test.n_rows()), (85_183, 36_875));
    }

    #[test]
    fn subsample_examples() {
        let ds = synthesize(&SynthSpec::case1(2)).unwrap();
        let mut s = RngStream::new(5);
        assert_eq!(subsample(&ds, 0.05, &mut s).unwrap().n_rows(), 189);
        let mut idx = subsample_indices(100, 1.0, &mut s).unwrap();
        idx.sort_unstable();
        assert_eq!(idx, (0..100).collect::<Vec<_>>());
        let a = subsample_indices(500, 0.3, &mut RngStream::new(9)).unwrap();
        let b = subsample_indices(500, 0.3, &mut RngStream::new(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(subsample_size(100, 0.35).unwrap(), 35);
        assert!(subsample_size(10, 0.0).is_err());
        assert!(subsample_size(10, 1.5).is_err());
    }

    #[test]
    fn synth_mean_and_poisson_limit() {
        let ds = synthesize(&flat(10f64.ln(), 2.0, 10_000, 1)).unwrap();
        let mean = ds.targets().iter().sum::<f64>() / 1e4;
        assert!((mean - 10.0).abs() < 0.5, "{mean}");

        let ds = synthesize(&flat(1.5, 1e6, 10_000, 2)).unwrap();
        let y = ds.targets();
        let mean = y.iter().sum::<f64>() / 1e4;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (1e4 - 1.0);
        assert!((var / mean - 1.0).abs() < 0.1, "{var} vs {mean}");
    }

    #[test]
    fn synth_determinism_and_limits() {
        let a = synthesize(&SynthSpec::case1(7)).unwrap();
        assert_eq!(a, synthesize(&SynthSpec::case1(7)).unwrap());
        assert_ne!(a, synthesize(&SynthSpec::case1(8)).unwrap());
        assert_eq!((a.n_rows(), a.n_features()), (3762, 6));
        assert!(synthesize(&flat(31.0, 1.0, 10, 0)).is_err());
        assert!(synthesize(&flat(0.0, 0.0, 10, 0)).is_err());
    }

    #[test]
    fn case2_shape() {
        let spec = SynthSpec::case2(7);
        spec.validate().unwrap();
        assert_eq!(spec.features.len(), 16);
        let labels = spec.year_labels();
        assert_eq!(labels.len(), 122_058);
        assert_eq!(labels.iter().filter(|y| **y <= 2003).count(), 85_183);
    }

    proptest! {
        #[test]
        fn subsample_has_no_duplicates(n in 1usize..300, f in 0.01f64..=1.0, seed in 0u64..100) {
            let idx = subsample_indices(n, f, &mut RngStream::new(seed)).unwrap();
            let set: HashSet<usize> = idx.iter().copied().collect();
            prop_assert_eq!(set.len(), idx.len());
            prop_assert!(idx.iter().all(|&i| i < n));
        }

        #[test]
        fn synth_targets_are_counts(seed in 0u64..50, b in -2.0f64..3.0) {
            let ds = synthesize(&flat(b, 1.5, 200, seed)).unwrap();
            prop_assert!(ds.targets().iter().all(|t| *t >= 0.0 && t.fract() == 0.0));
        }
    }
}
