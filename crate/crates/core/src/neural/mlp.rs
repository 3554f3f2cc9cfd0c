use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};

/// Rational approximation of tanh, accurate to about 1e-7 and written so
/// the compiler can vectorise it over a slice.
#[inline]
pub fn fast_tanh(x: f64) -> f64 {
    const CLAMP: f64 = 9.0;
    const A: [f64; 7] = [
        4.893_524_558_917_86e-3,
        6.372_619_288_754_36e-4,
        1.485_722_357_179_79e-5,
        5.122_297_090_371_14e-8,
        -8.604_671_522_137_35e-11,
        2.000_187_904_824_77e-13,
        -2.760_768_477_423_55e-16,
    ];
    const B: [f64; 4] = [4.893_525_185_543_85e-3, 2.268_434_632_439e-3, 1.185_347_056_866_54e-4, 1.198_258_394_667_02e-6];
    let x = x.clamp(-CLAMP, CLAMP);
    let x2 = x * x;
    let p = x * (A[0] + x2 * (A[1] + x2 * (A[2] + x2 * (A[3] + x2 * (A[4] + x2 * (A[5] + x2 * A[6]))))));
    let q = B[0] + x2 * (B[1] + x2 * (B[2] + x2 * B[3]));
    (p / q).clamp(-1.0, 1.0)
}

fn activate(a: &mut Array2<f64>) {
    match a.as_slice_mut() {
        Some(s) => s.iter_mut().for_each(|v| *v = fast_tanh(*v)),
        None => a.mapv_inplace(fast_tanh),
    }
}

/// Fully connected network: tanh on hidden layers, identity on the output.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    /// `weights[l]` has shape `(sizes[l], sizes[l + 1])`.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Parameter gradients, shaped like the network.
#[derive(Clone, Debug)]
pub struct Grads {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Activations kept from a forward pass for backpropagation.
pub struct Tape {
    acts: Vec<Array2<f64>>,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().unwrap()
    }
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return invalid("an MLP needs at least input and output sizes, all nonzero");
        }
        Ok(Self {
            weights: sizes.windows(2).map(|w| Array2::zeros((w[0], w[1]))).collect(),
            biases: sizes[1..].iter().map(|&n| Array1::zeros(n)).collect(),
        })
    }

    /// Glorot-normal weights and zero biases. With `zero_output` the last
    /// layer starts at zero so the network initially outputs exactly 0.
    pub fn random<R: Rng + ?Sized>(sizes: &[usize], zero_output: bool, rng: &mut R) -> Result<Self> {
        let mut m = Self::zeros(sizes)?;
        let last = m.weights.len() - 1;
        for (l, w) in m.weights.iter_mut().enumerate() {
            if zero_output && l == last {
                continue;
            }
            let (fan_in, fan_out) = w.dim();
            let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Normal::new(0.0, std).expect("positive std");
            w.iter_mut().for_each(|v| *v = dist.sample(rng));
        }
        Ok(m)
    }

    pub fn from_parts(weights: Vec<Array2<f64>>, biases: Vec<Array1<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return invalid("layer count mismatch");
        }
        for l in 0..weights.len() {
            if weights[l].ncols() != biases[l].len() || (l > 0 && weights[l - 1].ncols() != weights[l].nrows()) {
                return invalid(format!("layer {l} has incompatible shapes"));
            }
        }
        Ok(Self { weights, biases })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.weights[0].nrows()];
        s.extend(self.weights.iter().map(|w| w.ncols()));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().unwrap().ncols()
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return invalid(format!("MLP expects {} inputs, got {}", self.input_dim(), input.len()));
        }
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row view");
        Ok(self.forward_batch(x).into_raw_vec_and_offset().0)
    }

    /// Forward pass over a batch of rows.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let last = self.weights.len() - 1;
        let mut a = x.dot(&self.weights[0]) + &self.biases[0];
        if last > 0 {
            activate(&mut a);
        }
        for l in 1..=last {
            a = a.dot(&self.weights[l]) + &self.biases[l];
            if l < last {
                activate(&mut a);
            }
        }
        a
    }

    pub fn forward_tape(&self, x: ArrayView2<f64>) -> Tape {
        let last = self.weights.len() - 1;
        let mut acts = Vec::with_capacity(self.weights.len() + 1);
        acts.push(x.to_owned());
        for l in 0..=last {
            let mut z = acts[l].dot(&self.weights[l]) + &self.biases[l];
            if l < last {
                activate(&mut z);
            }
            acts.push(z);
        }
        Tape { acts }
    }

    /// Backpropagates `d_out` (gradient of the loss w.r.t. the outputs).
    pub fn backward(&self, tape: &Tape, d_out: Array2<f64>) -> Grads {
        let nl = self.weights.len();
        let mut gw = Vec::with_capacity(nl);
        let mut gb = Vec::with_capacity(nl);
        let mut delta = d_out;
        for l in (0..nl).rev() {
            gw.push(tape.acts[l].t().dot(&delta));
            gb.push(delta.sum_axis(Axis(0)));
            if l > 0 {
                let mut prev = delta.dot(&self.weights[l].t());
                prev.zip_mut_with(&tape.acts[l], |d, a| *d *= 1.0 - a * a);
                delta = prev;
            }
        }
        gw.reverse();
        gb.reverse();
        Grads { weights: gw, biases: gb }
    }

    /// Flat parameter vector: each layer's weights (row-major) then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            v.extend(w.iter());
            v.extend(b.iter());
        }
        v
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.num_params() {
            return invalid("parameter vector length mismatch");
        }
        let mut k = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for v in w.iter_mut() {
                *v = p[k];
                k += 1;
            }
            for v in b.iter_mut() {
                *v = p[k];
                k += 1;
            }
        }
        Ok(())
    }

    pub(crate) fn write_text(&self, out: &mut String) {
        let sizes: Vec<String> = self.sizes().iter().map(|s| s.to_string()).collect();
        out.push_str(&format!("mlp sizes={}\n", sizes.join(",")));
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push_str(&fmt_row("w", w.iter()));
            out.push_str(&fmt_row("b", b.iter()));
        }
    }

    pub(crate) fn read_text<'a>(lines: &mut impl Iterator<Item = &'a str>) -> Result<Self> {
        let head = lines.next().ok_or_else(|| Error::Format("missing mlp header".into()))?;
        let sizes: Vec<usize> = head
            .strip_prefix("mlp sizes=")
            .ok_or_else(|| Error::Format(format!("expected mlp header, got `{head}`")))?
            .split(',')
            .map(|s| s.parse().map_err(|_| Error::Format(format!("bad layer size `{s}`"))))
            .collect::<Result<_>>()?;
        let mut m = Mlp::zeros(&sizes).map_err(|e| Error::Format(e.to_string()))?;
        for l in 0..sizes.len() - 1 {
            let w = parse_row(lines.next(), "w", sizes[l] * sizes[l + 1])?;
            let b = parse_row(lines.next(), "b", sizes[l + 1])?;
            m.weights[l] = Array2::from_shape_vec((sizes[l], sizes[l + 1]), w).expect("length checked");
            m.biases[l] = Array1::from(b);
        }
        Ok(m)
    }
}

pub(crate) fn fmt_row<'a>(tag: &str, vals: impl Iterator<Item = &'a f64>) -> String {
    let mut s = String::from(tag);
    for v in vals {
        s.push(' ');
        s.push_str(&format!("{v:?}"));
    }
    s.push('\n');
    s
}

pub(crate) fn parse_row(line: Option<&str>, tag: &str, len: usize) -> Result<Vec<f64>> {
    let line = line.ok_or_else(|| Error::Format(format!("missing `{tag}` row")))?;
    let mut it = line.split_ascii_whitespace();
    if it.next() != Some(tag) {
        return Err(Error::Format(format!("expected `{tag}` row")));
    }
    let v: Vec<f64> = it
        .map(|t| t.parse::<f64>().map_err(|_| Error::Format(format!("bad number `{t}`"))))
        .collect::<Result<_>>()?;
    if v.len() != len {
        return Err(Error::Format(format!("`{tag}` row has {} values, expected {len}", v.len())));
    }
    Ok(v)
}
