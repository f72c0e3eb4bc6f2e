use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::{Activation, Mlp};
use super::windows::TrainingSample;
use crate::error::{Error, Result};
use crate::stats::quantile_sorted;

const FORMAT_TAG: &str = "rarefx-forecaster";
const FORMAT_VERSION: u32 = 1;

/// Affine map `(y - shift) / scale` applied to one series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub shift: f64,
    pub scale: f64,
}

impl Normalization {
    pub const IDENTITY: Normalization = Normalization {
        shift: 0.0,
        scale: 1.0,
    };

    /// Median shift and interquartile-range scale. Falls back to the full
    /// range, then to 1, when the spread is zero.
    pub fn robust(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::IDENTITY;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let shift = quantile_sorted(&v, 0.5);
        let iqr = quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25);
        let range = v[v.len() - 1] - v[0];
        let scale = if iqr > 0.0 {
            iqr
        } else if range > 0.0 {
            range
        } else {
            1.0
        };
        Self { shift, scale }
    }

    pub fn apply(&self, y: f64) -> f64 {
        (y - self.shift) / self.scale
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.scale + self.shift
    }
}

/// Per-series normalization from the values the samples cover, each
/// absolute index counted once.
pub(crate) fn fit_normalization(samples: &[TrainingSample]) -> Vec<Normalization> {
    let n_series = samples.iter().map(|s| s.series + 1).max().unwrap_or(0);
    let mut seen: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n_series];
    for s in samples {
        let input_start = s.label_start - s.input.len();
        let map = &mut seen[s.series];
        for (k, &v) in s.input.iter().enumerate() {
            map.insert(input_start + k, v);
        }
        for (k, &v) in s.label.iter().enumerate() {
            map.insert(s.label_start + k, v);
        }
    }
    seen.iter()
        .map(|m| Normalization::robust(&m.values().copied().collect::<Vec<_>>()))
        .collect()
}

/// A feedforward forecaster mapping `lookback` normalized values to
/// `horizon` normalized predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedForecaster {
    pub(crate) network: Mlp,
    pub(crate) normalization: Vec<Normalization>,
    pub(crate) loss_history: Vec<f64>,
}

impl TrainedForecaster {
    pub fn from_parts(network: Mlp, normalization: Vec<Normalization>) -> Result<Self> {
        if normalization.is_empty() {
            return Err(Error::Validation("forecaster needs at least one series normalization".into()));
        }
        if normalization
            .iter()
            .any(|n| !(n.scale > 0.0) || !n.scale.is_finite() || !n.shift.is_finite())
        {
            return Err(Error::Validation("normalization must have finite shift and positive scale".into()));
        }
        Ok(Self {
            network,
            normalization,
            loss_history: Vec::new(),
        })
    }

    /// Randomly initialized network with identity normalization for
    /// `n_series` series.
    pub fn untrained(layer_sizes: &[usize], activation: Activation, n_series: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let network = Mlp::init(layer_sizes, activation, &mut rng)?;
        Self::from_parts(network, vec![Normalization::IDENTITY; n_series.max(1)])
    }

    pub fn network(&self) -> &Mlp {
        &self.network
    }

    pub fn layer_sizes(&self) -> &[usize] {
        self.network.layer_sizes()
    }

    pub fn activation(&self) -> Activation {
        self.network.activation()
    }

    pub fn parameters(&self) -> &[f64] {
        self.network.params()
    }

    pub fn normalization(&self) -> &[Normalization] {
        &self.normalization
    }

    pub fn lookback(&self) -> usize {
        self.network.input_size()
    }

    pub fn horizon(&self) -> usize {
        self.network.output_size()
    }

    /// Mean per-sample training loss of each epoch.
    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }

    pub(crate) fn norm(&self, series: usize) -> Result<Normalization> {
        self.normalization.get(series).copied().ok_or_else(|| {
            Error::ModelMismatch(format!(
                "series {series} has no normalization; model knows {} series",
                self.normalization.len()
            ))
        })
    }

    /// Forecast of the next `horizon` raw values of `series` given its last
    /// `lookback` raw values.
    pub fn predict(&self, series: usize, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.lookback() {
            return Err(Error::ModelMismatch(format!(
                "input of {} values for lookback {}",
                input.len(),
                self.lookback()
            )));
        }
        let norm = self.norm(series)?;
        let x: Vec<f64> = input.iter().map(|&v| norm.apply(v)).collect();
        Ok(self.network.forward(&x).into_iter().map(|z| norm.invert(z)).collect())
    }

    /// Writes the versioned text format. Floats use Rust's shortest
    /// round-trip representation, so [`TrainedForecaster::load`] restores
    /// every parameter bit for bit.
    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{FORMAT_TAG} {FORMAT_VERSION}")?;
        writeln!(w, "activation {}", self.activation().name())?;
        let sizes: Vec<String> = self.layer_sizes().iter().map(|s| s.to_string()).collect();
        writeln!(w, "layers {}", sizes.join(" "))?;
        writeln!(w, "normalization {}", self.normalization.len())?;
        for n in &self.normalization {
            writeln!(w, "{:?} {:?}", n.shift, n.scale)?;
        }
        writeln!(w, "parameters {}", self.parameters().len())?;
        for p in self.parameters() {
            writeln!(w, "{p:?}")?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let mut next = |what: &str| -> Result<(u64, String)> {
            match lines.next() {
                Some((i, Ok(l))) => Ok((i as u64 + 1, l)),
                Some((i, Err(e))) => Err(Error::Parse {
                    path: "<model>".into(),
                    line: i as u64 + 1,
                    message: e.to_string(),
                }),
                None => Err(bad(0, &format!("unexpected end of file, expected {what}"))),
            }
        };
        let (ln, header) = next("header")?;
        if header != format!("{FORMAT_TAG} {FORMAT_VERSION}") {
            return Err(bad(ln, &format!("unsupported header '{header}'")));
        }
        let (ln, act) = next("activation")?;
        let activation = act
            .strip_prefix("activation ")
            .and_then(Activation::parse)
            .ok_or_else(|| bad(ln, "expected 'activation relu|tanh'"))?;
        let (ln, layers) = next("layers")?;
        let layer_sizes = layers
            .strip_prefix("layers ")
            .ok_or_else(|| bad(ln, "expected 'layers ...'"))?
            .split_whitespace()
            .map(|s| s.parse::<usize>().map_err(|e| bad(ln, &e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let (ln, nline) = next("normalization")?;
        let n_norm = count_after(&nline, "normalization ", ln)?;
        let mut normalization = Vec::with_capacity(n_norm);
        for _ in 0..n_norm {
            let (ln, l) = next("normalization entry")?;
            let parts: Vec<&str> = l.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(bad(ln, "expected '<shift> <scale>'"));
            }
            normalization.push(Normalization {
                shift: parse_f64(parts[0], ln)?,
                scale: parse_f64(parts[1], ln)?,
            });
        }
        let (ln, pline) = next("parameters")?;
        let n_params = count_after(&pline, "parameters ", ln)?;
        let mut params = Vec::with_capacity(n_params);
        for _ in 0..n_params {
            let (ln, l) = next("parameter")?;
            params.push(parse_f64(l.trim(), ln)?);
        }
        let network = Mlp::from_parts(layer_sizes, activation, params)?;
        Self::from_parts(network, normalization)
    }
}

fn bad(line: u64, message: &str) -> Error {
    Error::Parse {
        path: "<model>".into(),
        line,
        message: message.to_string(),
    }
}

fn count_after(line: &str, prefix: &str, ln: u64) -> Result<usize> {
    line.strip_prefix(prefix)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| bad(ln, &format!("expected '{prefix}<count>'")))
}

fn parse_f64(s: &str, ln: u64) -> Result<f64> {
    s.parse::<f64>().map_err(|e| bad(ln, &format!("'{s}': {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn robust_normalization() {
        let n = Normalization::robust(&[1.0, 2.0, 3.0, 4.0, 100.0]);
        assert_eq!(n.shift, 3.0);
        assert_eq!(n.scale, 2.0);
        assert_eq!(Normalization::robust(&[5.0; 4]), Normalization { shift: 5.0, scale: 1.0 });
        assert_eq!(n.invert(n.apply(17.5)), 17.5);
    }

    #[test]
    fn save_load_round_trip() {
        let mut m = TrainedForecaster::untrained(&[5, 7, 3], Activation::Tanh, 2, 9).unwrap();
        m.normalization[1] = Normalization {
            shift: 0.1 + 0.2,
            scale: 1.0 / 3.0,
        };
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let back = TrainedForecaster::load(buf.as_slice()).unwrap();
        assert_eq!(back.network, m.network);
        assert_eq!(back.normalization, m.normalization);
        for (a, b) in back.parameters().iter().zip(m.parameters()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn load_rejects_garbage() {
        assert!(TrainedForecaster::load("nope\n".as_bytes()).is_err());
        let truncated = "rarefx-forecaster 1\nactivation relu\nlayers 2 1\nnormalization 1\n0 1\nparameters 3\n0.5\n";
        assert!(TrainedForecaster::load(truncated.as_bytes()).is_err());
    }
}
