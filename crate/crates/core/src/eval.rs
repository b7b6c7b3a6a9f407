//! Error metrics and the repeated-subsampling benchmark.
//!
//! For every fraction `f` and repetition `r` a training subset is drawn from
//! the child stream `(seed, f, r)`; every model is fitted on that same subset
//! and scored on the fixed test set. Cells aggregate min/avg/max over
//! repetitions, each metric independently.

use std::fmt::Write as _;

use crate::data::{subsample_indices, Dataset};
use crate::error::{check_len, Error, Result};
use crate::numerics::{splitmix64, RngStream};
use crate::par::Parallelism;

pub fn mae(predictions: &[f64], observations: &[f64]) -> Result<f64> {
    check_pair(predictions, observations)?;
    let sum: f64 = predictions.iter().zip(observations).map(|(p, o)| (p - o).abs()).sum();
    Ok(sum / predictions.len() as f64)
}

pub fn rmse(predictions: &[f64], observations: &[f64]) -> Result<f64> {
    check_pair(predictions, observations)?;
    let sum: f64 = predictions.iter().zip(observations).map(|(p, o)| (p - o).powi(2)).sum();
    Ok((sum / predictions.len() as f64).sqrt())
}

fn check_pair(predictions: &[f64], observations: &[f64]) -> Result<()> {
    check_len("metric inputs", observations.len(), predictions.len())?;
    if predictions.is_empty() {
        return Err(Error::invalid("metrics need at least one prediction"));
    }
    Ok(())
}

/// `100 * (base - model) / base`.
pub fn improvement_pct(base_error: f64, model_error: f64) -> f64 {
    100.0 * (base_error - model_error) / base_error
}

/// Something that can be trained from scratch on a subset and predict the
/// test set. `seed` is shared by every model within one repetition.
pub trait ModelBuilder: Sync {
    fn name(&self) -> String;
    fn fit_predict(&self, train: &Dataset, test: &Dataset, seed: u64) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig {
    pub fractions: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    pub parallelism: Parallelism,
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fractions.is_empty() || !self.fractions.iter().all(|f| *f > 0.0 && *f <= 1.0) {
            return Err(Error::Config(format!("fractions must lie in (0, 1], got {:?}", self.fractions)));
        }
        if self.reps == 0 {
            return Err(Error::Config("at least one repetition is required".into()));
        }
        Ok(())
    }
}

/// One model on one subset.
#[derive(Debug, Clone, PartialEq)]
pub struct RepRecord {
    pub model: String,
    pub fraction: f64,
    pub rep: usize,
    /// Order-insensitive hash of the training rows the model saw.
    pub fingerprint: u64,
    /// `(mae, rmse)`, or the failure message.
    pub outcome: std::result::Result<(f64, f64), String>,
}

/// Aggregate of one `(model, fraction)` cell over its successful repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub model: String,
    pub fraction: f64,
    pub mae_min: f64,
    pub mae_max: f64,
    pub mae_avg: f64,
    pub rmse_min: f64,
    pub rmse_max: f64,
    pub rmse_avg: f64,
    pub reps: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapReport {
    pub seed: u64,
    pub fractions: Vec<f64>,
    pub models: Vec<String>,
    /// Ordered by model, then fraction.
    pub cells: Vec<CellSummary>,
    /// Ordered by model, then fraction, then repetition.
    pub records: Vec<RepRecord>,
}

impl BootstrapReport {
    pub fn cell(&self, model: &str, fraction: f64) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.model == model && c.fraction == fraction)
    }
}

/// Order-insensitive hash of a set of row indices.
pub fn subset_fingerprint(indices: &[usize]) -> u64 {
    let (sum, xor) = indices.iter().fold((0u64, 0u64), |(s, x), &i| {
        let h = splitmix64(i as u64 ^ 0xa076_1d64_78bd_642f);
        (s.wrapping_add(h), x ^ h.rotate_left(17))
    });
    splitmix64(sum ^ xor.rotate_left(32) ^ indices.len() as u64)
}

/// Stream that draws the subset for `(fraction, rep)`.
pub fn subset_stream(seed: u64, fraction: f64, rep: usize) -> RngStream {
    RngStream::new(seed).child(&[fraction.to_bits(), rep as u64, 0])
}

/// Seed handed to every model for `(fraction, rep)`.
pub fn model_seed(seed: u64, fraction: f64, rep: usize) -> u64 {
    RngStream::new(seed).child(&[fraction.to_bits(), rep as u64, 1]).seed()
}

pub fn bootstrap_experiment(
    models: &[&dyn ModelBuilder],
    train: &Dataset,
    test: &Dataset,
    config: &BootstrapConfig,
) -> Result<BootstrapReport> {
    config.validate()?;
    if models.is_empty() {
        return Err(Error::Config("no models selected".into()));
    }
    if train.n_rows() == 0 || test.n_rows() == 0 {
        return Err(Error::invalid("benchmark needs non-empty training and test sets"));
    }
    check_len("test feature width", train.n_features(), test.n_features())?;

    let names: Vec<String> = models.iter().map(|m| m.name()).collect();
    let tasks: Vec<(f64, usize)> = config
        .fractions
        .iter()
        .flat_map(|&f| (0..config.reps).map(move |r| (f, r)))
        .collect();
    let per_task: Vec<Result<Vec<RepRecord>>> = config.parallelism.map(tasks.len(), |t| {
        let (fraction, rep) = tasks[t];
        let indices = subsample_indices(train.n_rows(), fraction, &mut subset_stream(config.seed, fraction, rep))?;
        let fingerprint = subset_fingerprint(&indices);
        let subset = train.select(&indices);
        let seed = model_seed(config.seed, fraction, rep);
        Ok(models
            .iter()
            .zip(&names)
            .map(|(m, name)| {
                let outcome = m
                    .fit_predict(&subset, test, seed)
                    .and_then(|pred| Ok((mae(&pred, test.targets())?, rmse(&pred, test.targets())?)))
                    .map_err(|e| e.to_string());
                RepRecord {
                    model: name.clone(),
                    fraction,
                    rep,
                    fingerprint,
                    outcome,
                }
            })
            .collect())
    });
    let per_task = per_task.into_iter().collect::<Result<Vec<_>>>()?;

    for group in &per_task {
        if group.windows(2).any(|w| w[0].fingerprint != w[1].fingerprint) {
            return Err(Error::Experiment("models saw different training subsets".into()));
        }
        for rec in group {
            if let Ok((m, r)) = rec.outcome {
                if m > r * (1.0 + 1e-12) {
                    return Err(Error::Experiment(format!("{}: MAE {m} exceeds RMSE {r}", rec.model)));
                }
            }
        }
    }

    let mut records = Vec::with_capacity(per_task.len() * models.len());
    let mut cells = Vec::new();
    for (mi, name) in names.iter().enumerate() {
        for &fraction in &config.fractions {
            let cell: Vec<RepRecord> = per_task
                .iter()
                .zip(&tasks)
                .filter(|(_, (f, _))| *f == fraction)
                .map(|(group, _)| group[mi].clone())
                .collect();
            let ok: Vec<(f64, f64)> = cell.iter().filter_map(|r| r.outcome.clone().ok()).collect();
            let failures = cell.len() - ok.len();
            if 2 * failures > cell.len() {
                let first = cell.iter().find_map(|r| r.outcome.clone().err()).unwrap_or_default();
                return Err(Error::Experiment(format!(
                    "{name} failed in {failures} of {} repetitions at fraction {}: {first}",
                    cell.len(),
                    format_percent(fraction)
                )));
            }
            cells.push(summarize(name, fraction, &ok, failures));
            records.extend(cell);
        }
    }
    Ok(BootstrapReport {
        seed: config.seed,
        fractions: config.fractions.clone(),
        models: names,
        cells,
        records,
    })
}

fn summarize(model: &str, fraction: f64, ok: &[(f64, f64)], failures: usize) -> CellSummary {
    let stats = |pick: fn(&(f64, f64)) -> f64| {
        let min = ok.iter().map(pick).fold(f64::INFINITY, f64::min);
        let max = ok.iter().map(pick).fold(f64::NEG_INFINITY, f64::max);
        let avg = (ok.iter().map(pick).sum::<f64>() / ok.len() as f64).clamp(min, max);
        (min, max, avg)
    };
    let (mae_min, mae_max, mae_avg) = stats(|p| p.0);
    let (rmse_min, rmse_max, rmse_avg) = stats(|p| p.1);
    CellSummary {
        model: model.to_owned(),
        fraction,
        mae_min,
        mae_max,
        mae_avg,
        rmse_min,
        rmse_max,
        rmse_avg,
        reps: ok.len(),
        failures,
    }
}

/// `0.05` -> `5%`.
pub fn format_percent(fraction: f64) -> String {
    let pct = (fraction * 100.0 * 1e9).round() / 1e9;
    format!("{pct}%")
}

/// `5%` -> `0.05`.
pub fn parse_percent(text: &str) -> Result<f64> {
    let body = text.strip_suffix('%').ok_or_else(|| Error::Format(format!("'{text}' is not a percentage")))?;
    body.parse::<f64>()
        .map(|p| p / 100.0)
        .map_err(|_| Error::Format(format!("'{text}' is not a percentage")))
}

pub const REPORT_HEADER: &str = "model,fraction,mae_min,mae_max,mae_avg,rmse_min,rmse_max,rmse_avg";
pub const DETAIL_HEADER: &str = "model,fraction,rep,mae,rmse";

pub fn report_to_csv(report: &BootstrapReport) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for c in &report.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            c.model,
            format_percent(c.fraction),
            c.mae_min,
            c.mae_max,
            c.mae_avg,
            c.rmse_min,
            c.rmse_max,
            c.rmse_avg
        );
    }
    out
}

/// One row per model, fraction and repetition; failed repetitions carry NaN.
pub fn detail_to_csv(report: &BootstrapReport) -> String {
    let mut out = String::from(DETAIL_HEADER);
    out.push('\n');
    for r in &report.records {
        let (m, e) = r.outcome.clone().unwrap_or((f64::NAN, f64::NAN));
        let _ = writeln!(out, "{},{},{},{},{}", r.model, format_percent(r.fraction), r.rep, m, e);
    }
    out
}

/// Parse a report CSV back into cells (`reps` and `failures` are not stored).
pub fn parse_report_csv(text: &str) -> Result<Vec<CellSummary>> {
    let mut lines = text.lines();
    if lines.next() != Some(REPORT_HEADER) {
        return Err(Error::Format("report header mismatch".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 8 {
                return Err(Error::Format(format!("report row has {} fields: {line}", parts.len())));
            }
            let num = |i: usize| {
                parts[i]
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad number '{}' in report", parts[i])))
            };
            Ok(CellSummary {
                model: parts[0].to_owned(),
                fraction: parse_percent(parts[1])?,
                mae_min: num(2)?,
                mae_max: num(3)?,
                mae_avg: num(4)?,
                rmse_min: num(5)?,
                rmse_max: num(6)?,
                rmse_avg: num(7)?,
                reps: 0,
                failures: 0,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{fit_nb, predict_nb};
    use crate::data::{synthesize, SynthSpec};
    use crate::numerics::RowMatrix;
    use proptest::prelude::*;

    #[test]
    fn metric_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[2.0, 4.0], &[1.0, 2.0]).unwrap(), 1.5);
        assert!((rmse(&[2.0, 4.0], &[1.0, 2.0]).unwrap() - 2.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(mae(&[4.0, 2.0], &[2.0, 1.0]).unwrap(), 1.5);
        assert!(matches!(mae(&[1.0], &[1.0, 2.0]), Err(Error::Dimension { .. })));
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn improvement_examples() {
        assert!((improvement_pct(11.80, 8.00) - 32.20).abs() < 0.01);
        assert!((improvement_pct(11.80, 8.85) - 25.00).abs() < 0.01);
        assert_eq!(improvement_pct(3.5, 3.5), 0.0);
    }

    #[test]
    fn percent_formatting() {
        assert_eq!(format_percent(0.05), "5%");
        assert_eq!(format_percent(0.07), "7%");
        assert_eq!(format_percent(1.0), "100%");
        assert_eq!(format_percent(0.125), "12.5%");
        assert_eq!(parse_percent("35%").unwrap(), 0.35);
        assert!(parse_percent("35").is_err());
    }

    #[test]
    fn fingerprint_ignores_order() {
        assert_eq!(subset_fingerprint(&[1, 5, 9]), subset_fingerprint(&[9, 1, 5]));
        assert_ne!(subset_fingerprint(&[1, 5, 9]), subset_fingerprint(&[1, 5, 8]));
        assert_ne!(subset_fingerprint(&[1, 5]), subset_fingerprint(&[1, 5, 5]));
    }

    struct Mean;
    impl ModelBuilder for Mean {
        fn name(&self) -> String {
            "mean".into()
        }
        fn fit_predict(&self, train: &Dataset, test: &Dataset, _seed: u64) -> Result<Vec<f64>> {
            let m = train.targets().iter().sum::<f64>() / train.n_rows() as f64;
            Ok(vec![m; test.n_rows()])
        }
    }

    struct Nb;
    impl ModelBuilder for Nb {
        fn name(&self) -> String {
            "nb".into()
        }
        fn fit_predict(&self, train: &Dataset, test: &Dataset, _seed: u64) -> Result<Vec<f64>> {
            let model = fit_nb(train.features(), train.targets())?;
            test.features().rows_iter().map(|x| predict_nb(&model, x)).collect()
        }
    }

    struct Flaky(usize);
    impl ModelBuilder for Flaky {
        fn name(&self) -> String {
            "flaky".into()
        }
        fn fit_predict(&self, train: &Dataset, test: &Dataset, seed: u64) -> Result<Vec<f64>> {
            if seed % self.0 as u64 == 0 {
                Err(Error::invalid("refused"))
            } else {
                Mean.fit_predict(train, test, seed)
            }
        }
    }

    fn small_split() -> (Dataset, Dataset) {
        let mut spec = SynthSpec::case1(4);
        spec.n_rows = 450;
        let ds = synthesize(&spec).unwrap();
        let scaled = ds.features().as_slice().iter().zip(0..).map(|(v, i)| if i % 6 == 1 { v / 1e5 } else { *v });
        let x = RowMatrix::from_vec(ds.n_rows(), 6, scaled.collect()).unwrap();
        let ds = Dataset::new(x, ds.targets().to_vec(), ds.feature_names().to_vec(), "crashes", ds.years().map(<[i64]>::to_vec))
            .unwrap();
        crate::data::split_by_year(&ds, &(2000..=2006).collect::<Vec<_>>(), &[2007, 2008]).unwrap()
    }

    fn config(fractions: Vec<f64>, reps: usize) -> BootstrapConfig {
        BootstrapConfig {
            fractions,
            reps,
            seed: 1,
            parallelism: Parallelism::default(),
        }
    }

    #[test]
    fn single_rep_collapses_cells() {
        let (train, test) = small_split();
        let r = bootstrap_experiment(&[&Mean], &train, &test, &config(vec![0.5, 1.0], 1)).unwrap();
        for c in &r.cells {
            assert_eq!((c.mae_min, c.mae_max), (c.mae_avg, c.mae_avg));
            assert_eq!((c.rmse_min, c.rmse_max), (c.rmse_avg, c.rmse_avg));
        }
    }

    #[test]
    fn full_fraction_nb_has_no_spread() {
        let (train, test) = small_split();
        let r = bootstrap_experiment(&[&Nb], &train, &test, &config(vec![1.0], 4)).unwrap();
        let c = &r.cells[0];
        assert!(c.mae_max - c.mae_min < 1e-9 * c.mae_avg);
        assert!(c.rmse_max - c.rmse_min < 1e-9 * c.rmse_avg);
    }

    #[test]
    fn report_shape_order_and_round_trip() {
        let (train, test) = small_split();
        let fractions: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
        let r = bootstrap_experiment(&[&Mean], &train, &test, &config(fractions.clone(), 2)).unwrap();
        let csv = report_to_csv(&r);
        assert_eq!(csv.lines().count(), 21);
        assert_eq!(csv.lines().next().unwrap(), REPORT_HEADER);
        let parsed = parse_report_csv(&csv).unwrap();
        for (p, c) in parsed.iter().zip(&r.cells) {
            assert_eq!((p.mae_min, p.mae_avg, p.rmse_max), (c.mae_min, c.mae_avg, c.rmse_max));
            assert!((p.fraction - c.fraction).abs() < 1e-15);
        }
        for c in &r.cells {
            assert!(c.mae_min <= c.mae_avg && c.mae_avg <= c.mae_max);
            assert!(c.rmse_min <= c.rmse_avg && c.rmse_avg <= c.rmse_max);
            assert!(c.mae_avg <= c.rmse_avg);
        }
        assert_eq!(detail_to_csv(&r).lines().count(), 41);
    }

    #[test]
    fn paired_subsets_and_schedule_independence() {
        let (train, test) = small_split();
        let cfg = config(vec![0.3, 0.6], 3);
        let par = bootstrap_experiment(&[&Mean, &Nb], &train, &test, &cfg).unwrap();
        let seq = bootstrap_experiment(
            &[&Mean, &Nb],
            &train,
            &test,
            &BootstrapConfig {
                parallelism: Parallelism::Sequential,
                ..cfg
            },
        )
        .unwrap();
        assert_eq!(report_to_csv(&par), report_to_csv(&seq));
        for r in par.records.iter().filter(|r| r.model == "mean") {
            let twin = par
                .records
                .iter()
                .find(|o| o.model == "nb" && o.fraction == r.fraction && o.rep == r.rep)
                .unwrap();
            assert_eq!(r.fingerprint, twin.fingerprint);
        }
    }

    #[test]
    fn failure_policy() {
        let (train, test) = small_split();
        let r = bootstrap_experiment(&[&Mean], &train, &test, &config(vec![1.0], 3)).unwrap();
        assert_eq!(r.cells[0].failures, 0);
        let err = bootstrap_experiment(&[&Flaky(1)], &train, &test, &config(vec![1.0], 3)).unwrap_err();
        assert!(matches!(err, Error::Experiment(_)));
        let seeds: Vec<u64> = (0..40).map(|rep| model_seed(1, 1.0, rep)).collect();
        let some = bootstrap_experiment(&[&Flaky(3)], &train, &test, &config(vec![1.0], 40));
        let failed = seeds.iter().filter(|s| *s % 3 == 0).count();
        match some {
            Ok(r) => assert_eq!(r.cells[0].failures, failed),
            Err(e) => assert!(2 * failed > 40, "{e}"),
        }
    }

    proptest! {
        #[test]
        fn mae_never_exceeds_rmse(v in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50)) {
            let (p, o): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            prop_assert!(mae(&p, &o).unwrap() <= rmse(&p, &o).unwrap() * (1.0 + 1e-12));
        }
    }
}
