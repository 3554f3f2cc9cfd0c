//! A common interface over every next-state predictor.

use std::cell::RefCell;

use ndarray::ArrayView2;

use crate::error::{invalid, Result};
use crate::neural::{BaseModel, EnsembleNN, ResidualModel};
use crate::sim::Env;
use crate::symreg::{EvalWorkspace, SrModel};
use crate::types::{ActionVec, Platform, StateVec};

/// Batched one-step dynamics `s' = f(s, a)`.
pub trait Dynamics: Sync {
    fn platform(&self) -> Platform;

    /// `x` holds `n` rows of `[s, a]` (row-major); `out` receives `n` rows of
    /// next states. Non-finite outputs are allowed and signal model blow-up.
    fn predict_rows(&self, x: &[f64], n: usize, out: &mut [f64]);

    fn predict(&self, s: &StateVec, a: &ActionVec) -> Result<StateVec> {
        let p = self.platform();
        if s.platform() != p || a.platform() != p {
            return invalid("input platform does not match model");
        }
        let mut x = s.values().to_vec();
        x.extend_from_slice(a.values());
        let mut out = vec![0.0; p.state_dim()];
        self.predict_rows(&x, 1, &mut out);
        StateVec::new(p, out)
    }
}

impl Dynamics for Env {
    fn platform(&self) -> Platform {
        Env::platform(self)
    }

    fn predict_rows(&self, x: &[f64], n: usize, out: &mut [f64]) {
        let p = Env::platform(self);
        let (d, w) = (p.state_dim(), p.input_dim());
        for r in 0..n {
            let row = &x[r * w..(r + 1) * w];
            self.step_raw(&row[..d], &row[d..], &mut out[r * d..(r + 1) * d]);
        }
    }
}

thread_local! {
    static SR_SCRATCH: RefCell<(EvalWorkspace, Vec<Vec<f64>>, Vec<Vec<f64>>)> = RefCell::default();
}

impl Dynamics for SrModel {
    fn platform(&self) -> Platform {
        SrModel::platform(self)
    }

    fn predict_rows(&self, x: &[f64], n: usize, out: &mut [f64]) {
        let p = SrModel::platform(self);
        let (d, w) = (p.state_dim(), p.input_dim());
        SR_SCRATCH.with(|cell| {
            let (ws, cols, res) = &mut *cell.borrow_mut();
            cols.resize(w, Vec::new());
            for (k, c) in cols.iter_mut().enumerate() {
                c.clear();
                c.extend((0..n).map(|r| x[r * w + k]));
            }
            res.resize(d, Vec::new());
            let views: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
            self.eval_columns(&views, n, res, ws);
            for (k, col) in res.iter().enumerate() {
                for r in 0..n {
                    out[r * d + k] = col[r];
                }
            }
        });
    }
}

fn copy_rows(y: ndarray::Array2<f64>, out: &mut [f64]) {
    match y.as_slice() {
        Some(s) => out[..s.len()].copy_from_slice(s),
        None => out.iter_mut().zip(y.iter()).for_each(|(o, v)| *o = *v),
    }
}

impl Dynamics for EnsembleNN {
    fn platform(&self) -> Platform {
        EnsembleNN::platform(self)
    }

    fn predict_rows(&self, x: &[f64], n: usize, out: &mut [f64]) {
        let w = EnsembleNN::platform(self).input_dim();
        let xv = ArrayView2::from_shape((n, w), &x[..n * w]).expect("row layout");
        copy_rows(self.predict_rows_unchecked(xv), out);
    }
}

impl Dynamics for BaseModel {
    fn platform(&self) -> Platform {
        BaseModel::platform(self)
    }

    fn predict_rows(&self, x: &[f64], n: usize, out: &mut [f64]) {
        match self {
            BaseModel::Sr(m) => Dynamics::predict_rows(m, x, n, out),
            BaseModel::Nn(m) => Dynamics::predict_rows(m, x, n, out),
        }
    }
}

impl Dynamics for ResidualModel {
    fn platform(&self) -> Platform {
        ResidualModel::platform(self)
    }

    fn predict_rows(&self, x: &[f64], n: usize, out: &mut [f64]) {
        let w = ResidualModel::platform(self).input_dim();
        let xv = ArrayView2::from_shape((n, w), &x[..n * w]).expect("row layout");
        let y = ResidualModel::predict_rows(self, xv).expect("layout checked at construction");
        copy_rows(y, out);
    }
}
