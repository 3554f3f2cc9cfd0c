use ndarray::{Array2, ArrayView2, Axis};

use super::mlp::{fmt_row, parse_row, Grads, Mlp};
use crate::error::{invalid, Error, Result};

/// Minibatch training hyperparameters shared by ensemble and residual fits.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Weight of the residual magnitude penalty; unused by the ensemble.
    pub lambda: f64,
    pub seed: u64,
    /// Stop after this many epochs without improvement; 0 disables.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 200, batch_size: 64, learning_rate: 1e-3, lambda: 0.01, seed: 0, patience: 20 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return invalid("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return invalid("batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return invalid("learning_rate must be positive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return invalid("lambda must be nonnegative");
        }
        Ok(())
    }
}

/// Adam optimiser state for one network.
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: vec![0.0; num_params], v: vec![0.0; num_params] }
    }

    pub fn step(&mut self, net: &mut Mlp, g: &Grads) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let mut k = 0;
        let mut upd = |p: &mut f64, gi: f64, m: &mut [f64], v: &mut [f64]| {
            m[k] = b1 * m[k] + (1.0 - b1) * gi;
            v[k] = b2 * v[k] + (1.0 - b2) * gi * gi;
            *p -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
            k += 1;
        };
        for l in 0..net.weights.len() {
            for (p, gi) in net.weights[l].iter_mut().zip(g.weights[l].iter()) {
                upd(p, *gi, &mut self.m, &mut self.v);
            }
            for (p, gi) in net.biases[l].iter_mut().zip(g.biases[l].iter()) {
                upd(p, *gi, &mut self.m, &mut self.v);
            }
        }
    }
}

/// Per-column affine standardisation, fitted once and stored with a model.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    /// Column means and standard deviations, with `std` floored at `floor`.
    pub fn fit(rows: ArrayView2<f64>, floor: f64) -> Self {
        let n = rows.nrows().max(1) as f64;
        let mean: Vec<f64> = rows.sum_axis(Axis(0)).iter().map(|s| s / n).collect();
        let std = rows
            .columns()
            .into_iter()
            .zip(&mean)
            .map(|(c, m)| (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt().max(floor))
            .collect();
        Self { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, rows: ArrayView2<f64>) -> Array2<f64> {
        let mut out = rows.to_owned();
        for mut r in out.rows_mut() {
            for ((v, m), s) in r.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        out
    }

    pub fn invert_in_place(&self, rows: &mut Array2<f64>) {
        for mut r in rows.rows_mut() {
            for ((v, m), s) in r.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + m;
            }
        }
    }

    pub(crate) fn write_text(&self, tag: &str, out: &mut String) {
        out.push_str(&fmt_row(&format!("{tag}-mean"), self.mean.iter()));
        out.push_str(&fmt_row(&format!("{tag}-std"), self.std.iter()));
    }

    pub(crate) fn read_text<'a>(tag: &str, dim: usize, lines: &mut impl Iterator<Item = &'a str>) -> Result<Self> {
        let mean = parse_row(lines.next(), &format!("{tag}-mean"), dim)?;
        let std = parse_row(lines.next(), &format!("{tag}-std"), dim)?;
        if std.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Format(format!("{tag} scale must be positive")));
        }
        Ok(Self { mean, std })
    }
}

/// Value and parameter gradient of the regularised residual objective
/// `sum_d (t_d - r_d)^2 + lambda * r_d^2` for one sample, with `r = m(x)`.
pub fn residual_objective(m: &Mlp, input: &[f64], target: &[f64], lambda: f64) -> (f64, Grads) {
    let x = ArrayView2::from_shape((1, input.len()), input).expect("row view");
    let tape = m.forward_tape(x);
    let r = tape.output();
    let mut loss = 0.0;
    let mut d = Array2::zeros(r.dim());
    for (k, (&ri, &ti)) in r.iter().zip(target).enumerate() {
        loss += (ti - ri) * (ti - ri) + lambda * ri * ri;
        d[(0, k)] = 2.0 * (ri - ti) + 2.0 * lambda * ri;
    }
    (loss, m.backward(&tape, d))
}

/// Largest relative disagreement between analytic gradients of
/// [`residual_objective`] and central finite differences with step 1e-5.
pub fn gradient_check(m: &Mlp, input: &[f64], target: &[f64], lambda: f64) -> f64 {
    const H: f64 = 1e-5;
    let (_, g) = residual_objective(m, input, target, lambda);
    let mut analytic: Vec<f64> = Vec::with_capacity(m.num_params());
    for (w, b) in g.weights.iter().zip(&g.biases) {
        analytic.extend(w.iter());
        analytic.extend(b.iter());
    }
    let base = m.params();
    let mut probe = m.clone();
    let mut p = base.clone();
    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        p[i] = base[i] + H;
        probe.set_params(&p).expect("same length");
        let up = residual_objective(&probe, input, target, lambda).0;
        p[i] = base[i] - H;
        probe.set_params(&p).expect("same length");
        let down = residual_objective(&probe, input, target, lambda).0;
        p[i] = base[i];
        let numeric = (up - down) / (2.0 * H);
        let a = analytic[i];
        let scale = a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((a - numeric).abs() / scale);
    }
    worst
}

/// Sum of a batch loss and its gradient w.r.t. the network outputs.
pub(crate) type BatchLoss<'a> = dyn Fn(&Array2<f64>, &[usize]) -> (f64, Array2<f64>) + Sync + 'a;

/// Minibatch Adam over the rows `idx` of `x`. `loss` receives the network
/// outputs for a batch and the dataset rows they came from, and returns the
/// summed loss and its output gradient. The parameters with the lowest
/// full-pass mean loss (including the starting point) are kept. Returns the
/// mean loss before training followed by one value per completed epoch.
pub(crate) fn minibatch_fit<R: rand::Rng>(
    net: &mut Mlp,
    x: ArrayView2<f64>,
    idx: &[usize],
    cfg: &TrainConfig,
    rng: &mut R,
    loss: &BatchLoss<'_>,
) -> Vec<f64> {
    use rand::seq::SliceRandom;
    let full = |net: &Mlp| -> f64 {
        let mut total = 0.0;
        for chunk in idx.chunks(4096) {
            let xb = x.select(Axis(0), chunk);
            total += loss(&net.forward_batch(xb.view()), chunk).0;
        }
        total / idx.len() as f64
    };
    let mut history = vec![full(net)];
    let mut best = (history[0], net.clone());
    let mut since_best = 0;
    let mut opt = Adam::new(net.num_params(), cfg.learning_rate);
    let mut order = idx.to_vec();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.batch_size) {
            let xb = x.select(Axis(0), chunk);
            let tape = net.forward_tape(xb.view());
            let (_, mut d) = loss(tape.output(), chunk);
            d /= chunk.len() as f64;
            let g = net.backward(&tape, d);
            opt.step(net, &g);
        }
        let l = full(net);
        history.push(l);
        if l < best.0 {
            best = (l, net.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience > 0 && since_best >= cfg.patience {
                break;
            }
        }
        if !l.is_finite() {
            break;
        }
    }
    *net = best.1;
    history
}
