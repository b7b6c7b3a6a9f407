//! Versioned plain-text model container.
//!
//! ```text
//! RDBN 1
//! kind <dbn | regdbn | bayesnn | nb | kr>
//! <key> <values...>
//! ...
//! end
//! ```
//!
//! One record per line, whitespace separated. Reals are written in shortest
//! round-trip scientific notation, so decoding reproduces every bit.
//!
//! Record order by kind:
//!
//! - `dbn`: `activation`, `mode`, `chain`, `layers n`, then per layer
//!   `rbm n_visible n_hidden`, `weights` (row-major), `visible_bias`, `hidden_bias`.
//! - `regdbn`, `bayesnn`: `x_min`, `x_max`, `y_min`, `y_max`, `activation`,
//!   `layers n`, then per hidden layer `dense n_in n_out`, `weights`, `bias`;
//!   then `output_weights`, `output_bias`.
//! - `nb`: `x_min`, `x_max`, `coefficients`, `dispersion`, `log_likelihood`,
//!   `iterations`.
//! - `kr`: `x_min`, `x_max`, `bandwidth`, `rows n`, then `n` lines of
//!   `sample x_1 ... x_d y`.

use std::fmt::Write as _;

use crate::baselines::{KernelModel, NbModel};
use crate::dbn::DbnModel;
use crate::error::{Error, Result};
use crate::finetune::{DenseLayer, FeedforwardNet};
use crate::numerics::{RowMatrix, Scaler};
use crate::pipeline::{ModelKind, TrainedModel};
use crate::rbm::{ActivationParams, ChainSampling, ContinuousRbm, RbmMode};

pub const MAGIC: &str = "RDBN";
pub const FORMAT_VERSION: u32 = 1;

struct Out(String);

impl Out {
    fn new(kind: &str) -> Self {
        Out(format!("{MAGIC} {FORMAT_VERSION}\nkind {kind}\n"))
    }

    fn reals(&mut self, key: &str, values: &[f64]) {
        self.0.push_str(key);
        for v in values {
            let _ = write!(self.0, " {v:e}");
        }
        self.0.push('\n');
    }

    fn line(&mut self, key: &str, rest: impl std::fmt::Display) {
        let _ = writeln!(self.0, "{key} {rest}");
    }

    fn activation(&mut self, a: &ActivationParams) {
        self.reals("activation", &[a.theta_low, a.theta_high, a.sigma, a.noise_control]);
    }

    fn scaler(&mut self, prefix: &str, s: &Scaler) {
        self.reals(&format!("{prefix}_min"), s.min());
        self.reals(&format!("{prefix}_max"), s.max());
    }

    fn finish(mut self) -> String {
        self.0.push_str("end\n");
        self.0
    }
}

struct In<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> In<'a> {
    fn new(text: &'a str) -> Result<(Self, String)> {
        let mut input = In {
            lines: text.lines().enumerate().peekable(),
        };
        let header = input.record(MAGIC)?;
        let version: u32 = single(&header, "format version")?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported format version {version}")));
        }
        let kind = input.record("kind")?;
        if kind.len() != 1 {
            return Err(Error::Format("kind record needs exactly one value".into()));
        }
        Ok((input, kind[0].to_owned()))
    }

    fn record(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let (n, line) = self
            .lines
            .next()
            .ok_or_else(|| Error::Format(format!("unexpected end of file, expected '{key}'")))?;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some(k) if k == key => Ok(parts.collect()),
            other => Err(Error::Format(format!(
                "line {}: expected '{key}', found '{}'",
                n + 1,
                other.unwrap_or("")
            ))),
        }
    }

    fn reals(&mut self, key: &str, expected: usize) -> Result<Vec<f64>> {
        let parts = self.record(key)?;
        if parts.len() != expected {
            return Err(Error::Format(format!("'{key}' needs {expected} values, found {}", parts.len())));
        }
        parts.iter().map(|p| parse(p, key)).collect()
    }

    fn real(&mut self, key: &str) -> Result<f64> {
        Ok(self.reals(key, 1)?[0])
    }

    fn counts(&mut self, key: &str, expected: usize) -> Result<Vec<usize>> {
        let parts = self.record(key)?;
        if parts.len() != expected {
            return Err(Error::Format(format!("'{key}' needs {expected} values, found {}", parts.len())));
        }
        parts.iter().map(|p| parse(p, key)).collect()
    }

    fn activation(&mut self) -> Result<ActivationParams> {
        let a = self.reals("activation", 4)?;
        ActivationParams::new(a[0], a[1], a[2], a[3])
    }

    fn scaler(&mut self, prefix: &str) -> Result<Scaler> {
        let min = self.record(&format!("{prefix}_min"))?;
        let min: Vec<f64> = min.iter().map(|p| parse(p, prefix)).collect::<Result<_>>()?;
        let max = self.reals(&format!("{prefix}_max"), min.len())?;
        Scaler::from_bounds(min, max)
    }

    fn end(mut self) -> Result<()> {
        self.record("end")?;
        if let Some((n, line)) = self.lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(Error::Format(format!("line {}: trailing content '{line}'", n + 1)));
        }
        Ok(())
    }
}

fn parse<T: std::str::FromStr>(text: &str, key: &str) -> Result<T> {
    text.parse()
        .map_err(|_| Error::Format(format!("cannot read '{text}' in '{key}'")))
}

fn single<T: std::str::FromStr>(parts: &[&str], key: &str) -> Result<T> {
    match parts {
        [one] => parse(one, key),
        _ => Err(Error::Format(format!("'{key}' needs exactly one value"))),
    }
}

fn mode_name(mode: RbmMode) -> &'static str {
    match mode {
        RbmMode::Binary => "binary",
        RbmMode::Continuous => "continuous",
    }
}

fn chain_name(chain: ChainSampling) -> &'static str {
    match chain {
        ChainSampling::Continuous => "continuous",
        ChainSampling::BernoulliHidden => "bernoulli_hidden",
    }
}

pub fn encode_dbn(dbn: &DbnModel) -> String {
    let mut out = Out::new("dbn");
    out.activation(&dbn.activation());
    out.line("mode", mode_name(dbn.mode()));
    out.line("chain", chain_name(dbn.layers()[0].chain_sampling()));
    out.line("layers", dbn.layers().len());
    for l in dbn.layers() {
        out.line("rbm", format_args!("{} {}", l.n_visible(), l.n_hidden()));
        out.reals("weights", l.weights().as_slice());
        out.reals("visible_bias", l.visible_bias());
        out.reals("hidden_bias", l.hidden_bias());
    }
    out.finish()
}

pub fn decode_dbn(text: &str) -> Result<DbnModel> {
    let (mut input, kind) = In::new(text)?;
    if kind != "dbn" {
        return Err(Error::Format(format!("expected a dbn container, found '{kind}'")));
    }
    let activation = input.activation()?;
    let mode = match single::<String>(&input.record("mode")?, "mode")?.as_str() {
        "binary" => RbmMode::Binary,
        "continuous" => RbmMode::Continuous,
        other => return Err(Error::Format(format!("unknown RBM mode '{other}'"))),
    };
    let chain = match single::<String>(&input.record("chain")?, "chain")?.as_str() {
        "continuous" => ChainSampling::Continuous,
        "bernoulli_hidden" => ChainSampling::BernoulliHidden,
        other => return Err(Error::Format(format!("unknown chain sampling '{other}'"))),
    };
    let n: usize = single(&input.record("layers")?, "layers")?;
    let mut layers = Vec::with_capacity(n);
    for _ in 0..n {
        let dims = input.counts("rbm", 2)?;
        let weights = RowMatrix::from_vec(dims[0], dims[1], input.reals("weights", dims[0] * dims[1])?)?;
        let vb = input.reals("visible_bias", dims[0])?;
        let hb = input.reals("hidden_bias", dims[1])?;
        layers.push(ContinuousRbm::from_parts(weights, vb, hb, activation, mode)?.with_chain_sampling(chain));
    }
    input.end()?;
    DbnModel::from_layers(layers)
}

pub fn encode_model(model: &TrainedModel) -> String {
    let mut out = Out::new(model.kind().name());
    match model {
        TrainedModel::Net {
            net, x_scaler, y_scaler, ..
        } => {
            out.scaler("x", x_scaler);
            out.scaler("y", y_scaler);
            out.activation(&net.activation());
            out.line("layers", net.hidden_layers().len());
            for l in net.hidden_layers() {
                out.line("dense", format_args!("{} {}", l.weights.nrows(), l.weights.ncols()));
                out.reals("weights", l.weights.as_slice());
                out.reals("bias", &l.bias);
            }
            out.reals("output_weights", net.output_weights());
            out.reals("output_bias", &[net.output_bias()]);
        }
        TrainedModel::Nb { model, x_scaler } => {
            out.scaler("x", x_scaler);
            out.reals("coefficients", &model.coefficients);
            out.reals("dispersion", &[model.dispersion]);
            out.reals("log_likelihood", &[model.log_likelihood]);
            out.line("iterations", model.iterations);
        }
        TrainedModel::Kr { model, x_scaler } => {
            out.scaler("x", x_scaler);
            out.reals("bandwidth", model.bandwidth());
            out.line("rows", model.targets().len());
            let mut sample = Vec::with_capacity(model.bandwidth().len() + 1);
            for (row, y) in model.features().rows_iter().zip(model.targets()) {
                sample.clear();
                sample.extend_from_slice(row);
                sample.push(*y);
                out.reals("sample", &sample);
            }
        }
    }
    out.finish()
}

pub fn decode_model(text: &str) -> Result<TrainedModel> {
    let (mut input, kind) = In::new(text)?;
    let kind: ModelKind = kind
        .parse()
        .map_err(|_| Error::Format(format!("'{kind}' is not a trained-model kind")))?;
    let x_scaler = input.scaler("x")?;
    let d = x_scaler.width();
    let model = match kind {
        ModelKind::RegDbn | ModelKind::BayesNn => {
            let y_scaler = input.scaler("y")?;
            let activation = input.activation()?;
            let n: usize = single(&input.record("layers")?, "layers")?;
            let mut hidden = Vec::with_capacity(n);
            for _ in 0..n {
                let dims = input.counts("dense", 2)?;
                let weights = RowMatrix::from_vec(dims[0], dims[1], input.reals("weights", dims[0] * dims[1])?)?;
                let bias = input.reals("bias", dims[1])?;
                hidden.push(DenseLayer { weights, bias });
            }
            let top = hidden.last().map_or(d, |l: &DenseLayer| l.weights.ncols());
            let output_weights = input.reals("output_weights", top)?;
            let output_bias = input.real("output_bias")?;
            let net = FeedforwardNet::from_parts(hidden, output_weights, output_bias, activation)?;
            if net.input_width() != d {
                return Err(Error::Format("network input width disagrees with the feature scaler".into()));
            }
            TrainedModel::Net {
                kind,
                net,
                x_scaler,
                y_scaler,
            }
        }
        ModelKind::Nb => {
            let coefficients = input.reals("coefficients", d + 1)?;
            let dispersion = input.real("dispersion")?;
            let mut model = NbModel::new(coefficients, dispersion)?;
            model.log_likelihood = input.real("log_likelihood")?;
            model.iterations = single(&input.record("iterations")?, "iterations")?;
            TrainedModel::Nb { model, x_scaler }
        }
        ModelKind::Kr => {
            let bandwidth = input.reals("bandwidth", d)?;
            let rows: usize = single(&input.record("rows")?, "rows")?;
            let mut data = Vec::with_capacity(rows * d);
            let mut targets = Vec::with_capacity(rows);
            for _ in 0..rows {
                let s = input.reals("sample", d + 1)?;
                data.extend_from_slice(&s[..d]);
                targets.push(s[d]);
            }
            let model = KernelModel::new(RowMatrix::from_vec(rows, d, data)?, targets, bandwidth)?;
            TrainedModel::Kr { model, x_scaler }
        }
    };
    input.end()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthesize, SynthSpec};
    use crate::finetune::FineTuneConfig;
    use crate::numerics::RngStream;
    use crate::pipeline::{fit_model, ModelSettings};

    fn bits(v: &[f64]) -> Vec<u64> {
        v.iter().map(|x| x.to_bits()).collect()
    }

    #[test]
    fn dbn_round_trip_is_bit_exact() {
        let mut s = RngStream::new(4);
        let dbn = DbnModel::new(&[3, 5, 2], ActivationParams::default(), RbmMode::Continuous, &mut s)
            .unwrap()
            .with_chain_sampling(ChainSampling::BernoulliHidden);
        let back = decode_dbn(&encode_dbn(&dbn)).unwrap();
        assert_eq!(back, dbn);
        for (a, b) in back.layers().iter().zip(dbn.layers()) {
            assert_eq!(bits(&a.params_flat()), bits(&b.params_flat()));
        }
    }

    #[test]
    fn trained_models_round_trip() {
        let mut spec = SynthSpec::case1(2);
        spec.n_rows = 200;
        let ds = synthesize(&spec).unwrap();
        let settings = ModelSettings {
            pretrain_epochs: 2,
            finetune: FineTuneConfig {
                epochs: 5,
                ..FineTuneConfig::default()
            },
            ..ModelSettings::default()
        };
        for kind in ModelKind::ALL {
            let model = fit_model(kind, &settings, &ds, 1).unwrap().model;
            let text = encode_model(&model);
            assert!(text.starts_with(&format!("RDBN 1\nkind {kind}\n")));
            let back = decode_model(&text).unwrap();
            assert_eq!(back, model);
            assert_eq!(
                bits(&back.predict(ds.features()).unwrap()),
                bits(&model.predict(ds.features()).unwrap())
            );
        }
    }

    #[test]
    fn rejects_bad_containers() {
        assert!(matches!(decode_model("RDBN 2\nkind nb\n"), Err(Error::Format(_))));
        assert!(matches!(decode_model("XYZ 1\n"), Err(Error::Format(_))));
        assert!(matches!(decode_model("RDBN 1\nkind svm\n"), Err(Error::Format(_))));
        let nb = "RDBN 1\nkind nb\nx_min 0e0\nx_max 1e0\ncoefficients 1e0\n";
        assert!(matches!(decode_model(nb), Err(Error::Format(_))));
        let ok = "RDBN 1\nkind nb\nx_min 0e0\nx_max 1e0\ncoefficients 1e0 2e0\ndispersion 1e0\nlog_likelihood -1e0\niterations 3\nend\n";
        assert!(decode_model(ok).is_ok());
        assert!(decode_model(&format!("{ok}junk\n")).is_err());
        assert!(decode_dbn(ok).is_err());
    }
}
