use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::batch::{eval_columns, EvalWorkspace};
use super::expr::Expr;
use super::gp::{fit_expression, ExprFit, SrSearchConfig};
use crate::dataset::Dataset;
use crate::error::{invalid, Error, Result};
use crate::types::{ActionVec, Platform, StateVec};

/// One expression per state dimension over the `[s, a]` input layout.
#[derive(Clone, Debug, PartialEq)]
pub struct SrModel {
    platform: Platform,
    exprs: Vec<Expr>,
}

impl SrModel {
    pub fn new(platform: Platform, exprs: Vec<Expr>) -> Result<Self> {
        if exprs.len() != platform.state_dim() {
            return invalid(format!("{platform} model needs {} expressions, got {}", platform.state_dim(), exprs.len()));
        }
        for (i, e) in exprs.iter().enumerate() {
            if e.max_var().is_some_and(|m| m >= platform.input_dim()) {
                return invalid(format!("expression {i} reads beyond the {} inputs", platform.input_dim()));
            }
        }
        Ok(Self { platform, exprs })
    }

    /// `s' = s`.
    pub fn passthrough(platform: Platform) -> Self {
        Self { platform, exprs: (0..platform.state_dim()).map(Expr::var).collect() }
    }

    /// Every output identically zero; the neutral residual.
    pub fn zero(platform: Platform) -> Self {
        Self { platform, exprs: vec![Expr::constant(0.0); platform.state_dim()] }
    }

    pub fn platform(&self) -> Platform {
        self.platform
    }

    pub fn exprs(&self) -> &[Expr] {
        &self.exprs
    }

    pub fn predict(&self, s: &StateVec, a: &ActionVec) -> Result<StateVec> {
        if s.platform() != self.platform || a.platform() != self.platform {
            return invalid("input platform does not match model");
        }
        let mut x = s.values().to_vec();
        x.extend_from_slice(a.values());
        StateVec::new(self.platform, self.exprs.iter().map(|e| e.eval_unchecked(&x)).collect())
    }

    /// Evaluates all outputs over column-major inputs; `out[d]` receives
    /// output column `d`.
    pub fn eval_columns(&self, cols: &[&[f64]], n: usize, out: &mut [Vec<f64>], ws: &mut EvalWorkspace) {
        for (e, o) in self.exprs.iter().zip(out.iter_mut()) {
            o.resize(n, 0.0);
            eval_columns(e, cols, n, o, ws);
        }
    }

    /// Row-major batch evaluation: row `i` of the result holds every
    /// expression evaluated on input row `i`.
    pub fn batch_eval(&self, inputs: ArrayView2<f64>) -> Result<Array2<f64>> {
        let d = self.platform.state_dim();
        if inputs.ncols() != self.platform.input_dim() {
            return invalid(format!("expected {} input columns, got {}", self.platform.input_dim(), inputs.ncols()));
        }
        let n = inputs.nrows();
        let cols: Vec<Vec<f64>> = inputs.columns().into_iter().map(|c| c.to_vec()).collect();
        let views: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        let mut out = vec![Vec::new(); d];
        self.eval_columns(&views, n, &mut out, &mut EvalWorkspace::default());
        Ok(Array2::from_shape_fn((n, d), |(r, k)| out[k][r]))
    }

    /// Per state dimension: does any action variable appear?
    pub fn action_dependency(&self) -> Vec<bool> {
        let d = self.platform.state_dim();
        self.exprs
            .iter()
            .map(|e| (d..self.platform.input_dim()).any(|i| e.uses_var(i)))
            .collect()
    }

    /// Action indices (0-based within the action vector) used anywhere.
    pub fn actions_used(&self) -> Vec<bool> {
        let d = self.platform.state_dim();
        (0..self.platform.action_dim())
            .map(|k| self.exprs.iter().any(|e| e.uses_var(d + k)))
            .collect()
    }

    pub fn total_complexity(&self) -> usize {
        self.exprs.iter().map(|e| e.complexity()).sum()
    }

    pub fn header(platform: Platform) -> String {
        format!(
            "sr-model platform={} inputs=s0..s{},a0..a{}",
            platform.tag(),
            platform.state_dim() - 1,
            platform.action_dim() - 1
        )
    }

    pub fn to_text(&self) -> String {
        let mut s = Self::header(self.platform);
        s.push('\n');
        for (i, e) in self.exprs.iter().enumerate() {
            s.push_str(&format!("dim={i} expr={}\n", e.to_sexpr()));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head = lines.next().ok_or_else(|| Error::Format("empty model file".into()))?;
        let platform = [Platform::Quadrotor, Platform::Racecar]
            .into_iter()
            .find(|p| Self::header(*p) == head.trim())
            .ok_or_else(|| Error::Format(format!("unrecognised model header `{head}`")))?;
        let mut exprs = Vec::with_capacity(platform.state_dim());
        for (i, line) in lines.enumerate() {
            let rest = line
                .strip_prefix(&format!("dim={i} expr="))
                .ok_or_else(|| Error::Format(format!("line {}: expected `dim={i} expr=...`", i + 2)))?;
            let e = Expr::parse(rest).map_err(|e| Error::Format(format!("line {}: {e}", i + 2)))?;
            exprs.push(e);
        }
        Self::new(platform, exprs).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn checksum(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Per-dimension results of a model fit.
#[derive(Clone, Debug)]
pub struct SrFitReport {
    pub model: SrModel,
    pub dims: Vec<ExprFit>,
}

fn dim_seed(seed: u64, dim: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add((dim as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9).wrapping_add(1))
}

/// Fits one expression per target column against shared input columns.
pub fn fit_columns(
    platform: Platform,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    cfg: &SrSearchConfig,
    warm: Option<&SrModel>,
) -> Result<SrFitReport> {
    if targets.len() != platform.state_dim() || inputs.len() != platform.input_dim() {
        return invalid("column counts do not match the platform layout");
    }
    if targets[0].is_empty() {
        return invalid("cannot fit a model to an empty dataset");
    }
    if let Some(w) = warm {
        if w.platform != platform {
            return invalid("warm-start model is for a different platform");
        }
    }
    let dims: Vec<ExprFit> = (0..platform.state_dim())
        .into_par_iter()
        .map(|d| {
            let seeds: Vec<Expr> = warm.map(|w| vec![w.exprs[d].clone()]).unwrap_or_default();
            fit_expression(inputs, &targets[d], cfg, &seeds, dim_seed(cfg.seed, d))
        })
        .collect::<Result<_>>()?;
    let model = SrModel::new(platform, dims.iter().map(|f| f.best.clone()).collect())?;
    Ok(SrFitReport { model, dims })
}

pub fn fit_sr_model_detailed(data: &Dataset, cfg: &SrSearchConfig, warm: Option<&SrModel>) -> Result<SrFitReport> {
    if data.is_empty() {
        return invalid("cannot fit a model to an empty dataset");
    }
    fit_columns(data.platform(), &data.input_columns(), &data.target_columns(), cfg, warm)
}

/// Fits a symbolic dynamics model, one next-state expression per dimension.
pub fn fit_sr_model(data: &Dataset, cfg: &SrSearchConfig, warm: Option<&SrModel>) -> Result<SrModel> {
    Ok(fit_sr_model_detailed(data, cfg, warm)?.model)
}
