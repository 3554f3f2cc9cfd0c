use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::mlp::Mlp;
use super::train::{minibatch_fit, Standardizer, TrainConfig};
use crate::dataset::Dataset;
use crate::error::{invalid, Error, Result};
use crate::seed;
use crate::types::{ActionVec, Platform, StateVec};

/// Shape of the neural baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleConfig {
    pub members: usize,
    pub hidden: Vec<usize>,
    /// Predict `s' - s` instead of `s'`.
    pub predict_delta: bool,
}

impl Default for EnsembleConfig {
    /// Four members with four weight layers of width 200.
    fn default() -> Self {
        Self { members: 4, hidden: vec![200; 3], predict_delta: false }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.members == 0 {
            return invalid("an ensemble needs at least one member");
        }
        if self.hidden.contains(&0) {
            return invalid("hidden layer widths must be nonzero");
        }
        Ok(())
    }
}

/// Bootstrap ensemble of MLPs predicting the next state; the prediction is
/// the member mean.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleNN {
    platform: Platform,
    members: Vec<Mlp>,
    input_norm: Standardizer,
    output_norm: Standardizer,
    predict_delta: bool,
}

const INPUT_STD_FLOOR: f64 = 1e-3;
const OUTPUT_STD_FLOOR: f64 = 1e-6;

impl EnsembleNN {
    pub fn platform(&self) -> Platform {
        self.platform
    }

    pub fn members(&self) -> &[Mlp] {
        &self.members
    }

    pub fn predict_delta(&self) -> bool {
        self.predict_delta
    }

    fn check_rows(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.platform.input_dim() {
            return invalid(format!("expected {} input columns, got {}", self.platform.input_dim(), x.ncols()));
        }
        Ok(())
    }

    fn finish(&self, x: &ArrayView2<f64>, mut y: Array2<f64>) -> Array2<f64> {
        self.output_norm.invert_in_place(&mut y);
        if self.predict_delta {
            let d = self.platform.state_dim();
            y += &x.slice(ndarray::s![.., ..d]);
        }
        y
    }

    /// Next-state prediction of one member for each input row.
    pub fn member_predict(&self, k: usize, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_rows(&x)?;
        let m = self.members.get(k).ok_or_else(|| Error::InvalidArgument(format!("no member {k}")))?;
        let y = m.forward_batch(self.input_norm.apply(x).view());
        Ok(self.finish(&x, y))
    }

    /// Mean next-state prediction for each row of `[s, a]` inputs.
    pub fn predict_rows(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_rows(&x)?;
        Ok(self.predict_rows_unchecked(x))
    }

    pub(crate) fn predict_rows_unchecked(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let xn = self.input_norm.apply(x);
        let mut y = self.members[0].forward_batch(xn.view());
        for m in &self.members[1..] {
            y += &m.forward_batch(xn.view());
        }
        y /= self.members.len() as f64;
        self.finish(&x, y)
    }

    pub fn predict(&self, s: &StateVec, a: &ActionVec) -> Result<StateVec> {
        if s.platform() != self.platform || a.platform() != self.platform {
            return invalid("input platform does not match model");
        }
        let mut x = s.values().to_vec();
        x.extend_from_slice(a.values());
        let y = self.predict_rows_unchecked(ArrayView2::from_shape((1, x.len()), &x).expect("row"));
        StateVec::new(self.platform, y.into_raw_vec_and_offset().0)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "ensemble platform={} members={} delta={}\n",
            self.platform.tag(),
            self.members.len(),
            u8::from(self.predict_delta)
        );
        self.input_norm.write_text("in", &mut s);
        self.output_norm.write_text("out", &mut s);
        for m in &self.members {
            m.write_text(&mut s);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head = lines.next().ok_or_else(|| Error::Format("empty ensemble file".into()))?;
        let mut fields = head.split_ascii_whitespace();
        if fields.next() != Some("ensemble") {
            return Err(Error::Format(format!("not an ensemble file: `{head}`")));
        }
        let mut platform = None;
        let mut count = None;
        let mut delta = None;
        for f in fields {
            match f.split_once('=') {
                Some(("platform", v)) => platform = v.parse::<Platform>().ok(),
                Some(("members", v)) => count = v.parse::<usize>().ok(),
                Some(("delta", v)) => delta = Some(v == "1"),
                _ => return Err(Error::Format(format!("unknown header field `{f}`"))),
            }
        }
        let (platform, count, predict_delta) = match (platform, count, delta) {
            (Some(p), Some(c), Some(d)) if c > 0 => (p, c, d),
            _ => return Err(Error::Format("incomplete ensemble header".into())),
        };
        let input_norm = Standardizer::read_text("in", platform.input_dim(), &mut lines)?;
        let output_norm = Standardizer::read_text("out", platform.state_dim(), &mut lines)?;
        let mut members = Vec::with_capacity(count);
        for _ in 0..count {
            let m = Mlp::read_text(&mut lines)?;
            if m.input_dim() != platform.input_dim() || m.output_dim() != platform.state_dim() {
                return Err(Error::Format("member layout does not match platform".into()));
            }
            members.push(m);
        }
        Ok(Self { platform, members, input_norm, output_norm, predict_delta })
    }

    pub fn checksum(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Training record of one ensemble fit.
#[derive(Clone, Debug)]
pub struct EnsembleFit {
    pub model: EnsembleNN,
    /// Per member: mean standardised loss before training, then per epoch.
    pub loss_history: Vec<Vec<f64>>,
}

/// Trains every member on its own bootstrap resample to minimise mean
/// squared (standardised) next-state error.
pub fn train_ensemble_detailed(data: &Dataset, arch: &EnsembleConfig, cfg: &TrainConfig) -> Result<EnsembleFit> {
    arch.validate()?;
    cfg.validate()?;
    if data.is_empty() {
        return invalid("cannot train on an empty dataset");
    }
    let platform = data.platform();
    let (xr, yr) = data.rows();
    let n = data.len();
    let x = Array2::from_shape_vec((n, platform.input_dim()), xr).expect("row layout");
    let mut y = Array2::from_shape_vec((n, platform.state_dim()), yr).expect("row layout");
    if arch.predict_delta {
        y -= &x.slice(ndarray::s![.., ..platform.state_dim()]);
    }
    let input_norm = Standardizer::fit(x.view(), INPUT_STD_FLOOR);
    let output_norm = Standardizer::fit(y.view(), OUTPUT_STD_FLOOR);
    let xn = input_norm.apply(x.view());
    let yn = output_norm.apply(y.view());
    let mut sizes = vec![platform.input_dim()];
    sizes.extend(&arch.hidden);
    sizes.push(platform.state_dim());

    let loss = |pred: &Array2<f64>, rows: &[usize]| {
        let mut d = pred.clone();
        let mut total = 0.0;
        let inv = 1.0 / platform.state_dim() as f64;
        for (mut dr, &r) in d.rows_mut().into_iter().zip(rows) {
            for (v, t) in dr.iter_mut().zip(yn.row(r)) {
                let e = *v - t;
                total += e * e * inv;
                *v = 2.0 * e * inv;
            }
        }
        (total, d)
    };

    let trained: Vec<(Mlp, Vec<f64>)> = (0..arch.members)
        .into_par_iter()
        .map(|k| {
            let mut rng = seed::rng(cfg.seed, 0xE45E, k as u64);
            let mut net = Mlp::random(&sizes, false, &mut rng).expect("valid sizes");
            let idx: Vec<usize> = if arch.members == 1 { (0..n).collect() } else { (0..n).map(|_| rng.random_range(0..n)).collect() };
            let hist = minibatch_fit(&mut net, xn.view(), &idx, cfg, &mut rng, &loss);
            (net, hist)
        })
        .collect();
    let (members, loss_history): (Vec<_>, Vec<_>) = trained.into_iter().unzip();
    if members.iter().any(|m| !m.is_finite()) {
        return Err(Error::Training("ensemble training diverged".into()));
    }
    let model = EnsembleNN { platform, members, input_norm, output_norm, predict_delta: arch.predict_delta };
    Ok(EnsembleFit { model, loss_history })
}

pub fn train_ensemble(data: &Dataset, arch: &EnsembleConfig, cfg: &TrainConfig) -> Result<EnsembleNN> {
    Ok(train_ensemble_detailed(data, arch, cfg)?.model)
}
