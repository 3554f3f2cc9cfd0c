use ndarray::{Array2, ArrayView2};

use super::ensemble::EnsembleNN;
use super::mlp::{fmt_row, parse_row, Mlp};
use super::train::{minibatch_fit, Standardizer, TrainConfig};
use crate::dataset::Dataset;
use crate::error::{invalid, Error, Result};
use crate::seed;
use crate::symreg::SrModel;
use crate::types::{ActionVec, Platform, StateVec};

/// A frozen base dynamics model.
#[derive(Clone, Debug, PartialEq)]
pub enum BaseModel {
    Sr(SrModel),
    Nn(EnsembleNN),
}

impl BaseModel {
    pub fn platform(&self) -> Platform {
        match self {
            BaseModel::Sr(m) => m.platform(),
            BaseModel::Nn(m) => m.platform(),
        }
    }

    pub fn predict_rows(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        match self {
            BaseModel::Sr(m) => m.batch_eval(x),
            BaseModel::Nn(m) => m.predict_rows(x),
        }
    }

    pub fn predict(&self, s: &StateVec, a: &ActionVec) -> Result<StateVec> {
        match self {
            BaseModel::Sr(m) => m.predict(s, a),
            BaseModel::Nn(m) => m.predict(s, a),
        }
    }

    pub fn to_text(&self) -> String {
        match self {
            BaseModel::Sr(m) => m.to_text(),
            BaseModel::Nn(m) => m.to_text(),
        }
    }

    /// Parses either model file format, dispatching on the header.
    pub fn from_text(text: &str) -> Result<Self> {
        let head = text.trim_start();
        if head.starts_with("sr-model") {
            Ok(BaseModel::Sr(SrModel::from_text(text)?))
        } else if head.starts_with("ensemble") {
            Ok(BaseModel::Nn(EnsembleNN::from_text(text)?))
        } else {
            Err(Error::Format("unrecognised model file".into()))
        }
    }

    /// Short digest of the serialised parameters.
    pub fn checksum(&self) -> String {
        match self {
            BaseModel::Sr(m) => m.checksum(),
            BaseModel::Nn(m) => m.checksum(),
        }
    }
}

/// Small MLP correction `f_res(x) = scale * mlp((x - mean) / std)`.
///
/// Input standardisation and the per-output scale are fixed the first time
/// the network is trained and stay put across later trials.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualNet {
    platform: Platform,
    pub mlp: Mlp,
    pub input_norm: Standardizer,
    pub output_scale: Vec<f64>,
    fitted: bool,
}

impl ResidualNet {
    /// Random hidden layers and a zero output layer, so the initial
    /// correction is exactly zero.
    pub fn new(platform: Platform, hidden: &[usize], seed_value: u64) -> Result<Self> {
        let mut sizes = vec![platform.input_dim()];
        sizes.extend(hidden);
        sizes.push(platform.state_dim());
        let mut rng = seed::rng(seed_value, 0x4E5, 0);
        Ok(Self {
            platform,
            mlp: Mlp::random(&sizes, true, &mut rng)?,
            input_norm: Standardizer::identity(platform.input_dim()),
            output_scale: vec![1.0; platform.state_dim()],
            fitted: false,
        })
    }

    /// Wraps a raw-input MLP with identity scaling.
    pub fn from_mlp(platform: Platform, mlp: Mlp) -> Result<Self> {
        if mlp.input_dim() != platform.input_dim() || mlp.output_dim() != platform.state_dim() {
            return invalid("residual MLP layout does not match platform");
        }
        Ok(Self {
            platform,
            mlp,
            input_norm: Standardizer::identity(platform.input_dim()),
            output_scale: vec![1.0; platform.state_dim()],
            fitted: true,
        })
    }

    pub fn platform(&self) -> Platform {
        self.platform
    }

    pub fn forward_rows(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut y = self.mlp.forward_batch(self.input_norm.apply(x).view());
        for mut r in y.rows_mut() {
            r.iter_mut().zip(&self.output_scale).for_each(|(v, s)| *v *= s);
        }
        y
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.platform.input_dim() {
            return invalid("residual input length mismatch");
        }
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row");
        Ok(self.forward_rows(x).into_raw_vec_and_offset().0)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("residual-mlp platform={} fitted={}\n", self.platform.tag(), u8::from(self.fitted));
        self.input_norm.write_text("in", &mut s);
        s.push_str(&fmt_row("scale", self.output_scale.iter()));
        self.mlp.write_text(&mut s);
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head = lines.next().ok_or_else(|| Error::Format("empty residual file".into()))?;
        let rest = head
            .strip_prefix("residual-mlp platform=")
            .ok_or_else(|| Error::Format(format!("not a residual file: `{head}`")))?;
        let (tag, fitted) = rest.split_once(" fitted=").ok_or_else(|| Error::Format("missing fitted flag".into()))?;
        let platform: Platform = tag.parse().map_err(|_| Error::Format(format!("unknown platform `{tag}`")))?;
        let input_norm = Standardizer::read_text("in", platform.input_dim(), &mut lines)?;
        let output_scale = parse_row(lines.next(), "scale", platform.state_dim())?;
        let mlp = Mlp::read_text(&mut lines)?;
        if mlp.input_dim() != platform.input_dim() || mlp.output_dim() != platform.state_dim() {
            return Err(Error::Format("residual layout does not match platform".into()));
        }
        Ok(Self { platform, mlp, input_norm, output_scale, fitted: fitted == "1" })
    }
}

/// The learned correction on top of a frozen base.
#[derive(Clone, Debug, PartialEq)]
pub enum Residual {
    Nn(ResidualNet),
    Sr(SrModel),
}

impl Residual {
    pub fn to_text(&self) -> String {
        match self {
            Residual::Nn(r) => r.to_text(),
            Residual::Sr(m) => m.to_text(),
        }
    }
}

/// Composite predictor `f_base(s, a) + f_res(s, a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualModel {
    pub base: BaseModel,
    pub residual: Residual,
    pub lambda: f64,
}

impl ResidualModel {
    pub fn new(base: BaseModel, residual: Residual, lambda: f64) -> Result<Self> {
        let rp = match &residual {
            Residual::Nn(r) => r.platform(),
            Residual::Sr(m) => m.platform(),
        };
        if rp != base.platform() {
            return invalid("base and residual platforms differ");
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return invalid("lambda must be nonnegative");
        }
        Ok(Self { base, residual, lambda })
    }

    /// Base plus a fresh zero-output residual network.
    pub fn with_nn_residual(base: BaseModel, hidden: &[usize], lambda: f64, seed_value: u64) -> Result<Self> {
        let r = ResidualNet::new(base.platform(), hidden, seed_value)?;
        Self::new(base, Residual::Nn(r), lambda)
    }

    pub fn platform(&self) -> Platform {
        self.base.platform()
    }

    pub fn residual_rows(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        match &self.residual {
            Residual::Nn(r) => Ok(r.forward_rows(x)),
            Residual::Sr(m) => m.batch_eval(x),
        }
    }

    pub fn predict_rows(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut y = self.base.predict_rows(x)?;
        y += &self.residual_rows(x)?;
        Ok(y)
    }
}

/// `f_base(s, a) + f_res(s, a)` for one state-action pair.
pub fn residual_predict(r: &ResidualModel, s: &StateVec, a: &ActionVec) -> Result<StateVec> {
    if s.platform() != r.platform() || a.platform() != r.platform() {
        return invalid("input platform does not match model");
    }
    let base = r.base.predict(s, a)?;
    let mut x = s.values().to_vec();
    x.extend_from_slice(a.values());
    let res = match &r.residual {
        Residual::Nn(n) => n.forward(&x)?,
        Residual::Sr(m) => m.exprs().iter().map(|e| e.eval_unchecked(&x)).collect(),
    };
    let v = base.values().iter().zip(&res).map(|(b, d)| b + d).collect();
    StateVec::new(r.platform(), v)
}

/// Residual training record.
#[derive(Clone, Debug)]
pub struct ResidualFit {
    pub model: ResidualModel,
    /// Mean per-sample objective before training, then per epoch.
    pub objective: Vec<f64>,
}

impl ResidualFit {
    pub fn initial_objective(&self) -> f64 {
        self.objective[0]
    }

    pub fn final_objective(&self) -> f64 {
        self.objective.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

const RESIDUAL_INPUT_STD_FLOOR: f64 = 1e-3;
const RESIDUAL_SCALE_FLOOR: f64 = 1e-6;

/// Fits the network residual by minibatch Adam on
/// `|s' - (f_base + f_res)|^2 + lambda |f_res|^2`, averaged over samples.
/// The base is only evaluated, never modified.
pub fn train_residual(r: &ResidualModel, data: &Dataset, cfg: &TrainConfig) -> Result<ResidualFit> {
    cfg.validate()?;
    if data.is_empty() {
        return invalid("cannot train on an empty dataset");
    }
    if data.platform() != r.platform() {
        return invalid("dataset platform does not match model");
    }
    let Residual::Nn(net) = &r.residual else {
        return invalid("train_residual needs a network residual");
    };
    let platform = r.platform();
    let n = data.len();
    let (xr, yr) = data.rows();
    let x = Array2::from_shape_vec((n, platform.input_dim()), xr).expect("row layout");
    let mut e = Array2::from_shape_vec((n, platform.state_dim()), yr).expect("row layout");
    e -= &r.base.predict_rows(x.view())?;
    if !e.iter().all(|v| v.is_finite()) {
        return Err(Error::Training("base model produces non-finite predictions on the data".into()));
    }

    let mut net = net.clone();
    if !net.fitted {
        net.input_norm = Standardizer::fit(x.view(), RESIDUAL_INPUT_STD_FLOOR);
        net.output_scale = e
            .columns()
            .into_iter()
            .map(|c| (c.dot(&c) / n as f64).sqrt().max(RESIDUAL_SCALE_FLOOR))
            .collect();
        net.fitted = true;
    }
    let xn = net.input_norm.apply(x.view());
    let scale = net.output_scale.clone();
    let lambda = cfg.lambda;
    let loss = |z: &Array2<f64>, rows: &[usize]| {
        let mut d = z.clone();
        let mut total = 0.0;
        for (mut dr, &i) in d.rows_mut().into_iter().zip(rows) {
            for ((v, t), s) in dr.iter_mut().zip(e.row(i)).zip(&scale) {
                let out = *v * s;
                total += (t - out) * (t - out) + lambda * out * out;
                *v = s * (2.0 * (out - t) + 2.0 * lambda * out);
            }
        }
        (total, d)
    };
    let idx: Vec<usize> = (0..n).collect();
    let mut rng = seed::rng(cfg.seed, 0x2E5, 0);
    let objective = minibatch_fit(&mut net.mlp, xn.view(), &idx, cfg, &mut rng, &loss);
    if !net.mlp.is_finite() {
        return Err(Error::Training("residual training diverged".into()));
    }
    let model = ResidualModel { base: r.base.clone(), residual: Residual::Nn(net), lambda };
    Ok(ResidualFit { model, objective })
}
