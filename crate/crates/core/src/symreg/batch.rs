//! Column-vectorised expression evaluation.

use super::expr::{Expr, Node};

/// Scratch buffers reused across evaluations.
#[derive(Default)]
pub struct EvalWorkspace {
    stack: Vec<Vec<f64>>,
    pool: Vec<Vec<f64>>,
}

impl EvalWorkspace {
    fn take(&mut self, n: usize) -> Vec<f64> {
        let mut v = self.pool.pop().unwrap_or_default();
        v.clear();
        v.reserve(n);
        v
    }
}

/// Evaluates `expr` on `n` rows given as input columns, writing into `out`.
///
/// Each column must hold at least `n` values. Results are identical to
/// row-by-row [`Expr::eval_unchecked`] because every node applies the same
/// scalar operation in the same order.
pub fn eval_columns(expr: &Expr, cols: &[&[f64]], n: usize, out: &mut [f64], ws: &mut EvalWorkspace) {
    debug_assert!(ws.stack.is_empty());
    for node in expr.nodes() {
        match *node {
            Node::Const(c) => {
                let mut v = ws.take(n);
                v.resize(n, c);
                ws.stack.push(v);
            }
            Node::Var(i) => {
                let mut v = ws.take(n);
                v.extend_from_slice(&cols[i as usize][..n]);
                ws.stack.push(v);
            }
            Node::Sin | Node::Cos => {
                let v = ws.stack.last_mut().unwrap();
                if *node == Node::Sin {
                    v.iter_mut().for_each(|x| *x = x.sin());
                } else {
                    v.iter_mut().for_each(|x| *x = x.cos());
                }
            }
            Node::Add | Node::Sub | Node::Mul => {
                let b = ws.stack.pop().unwrap();
                let a = ws.stack.last_mut().unwrap();
                match node {
                    Node::Add => a.iter_mut().zip(&b).for_each(|(x, y)| *x += y),
                    Node::Sub => a.iter_mut().zip(&b).for_each(|(x, y)| *x -= y),
                    _ => a.iter_mut().zip(&b).for_each(|(x, y)| *x *= y),
                }
                ws.pool.push(b);
            }
        }
    }
    let res = ws.stack.pop().unwrap();
    out[..n].copy_from_slice(&res);
    ws.pool.push(res);
}

/// Mean absolute error of `expr` against `y`, or infinity when any
/// prediction is non-finite.
pub fn mae_columns(expr: &Expr, cols: &[&[f64]], y: &[f64], out: &mut Vec<f64>, ws: &mut EvalWorkspace) -> f64 {
    let n = y.len();
    out.resize(n, 0.0);
    eval_columns(expr, cols, n, out, ws);
    let mut s = 0.0;
    for (p, t) in out.iter().zip(y) {
        s += (p - t).abs();
    }
    let m = s / n.max(1) as f64;
    if m.is_finite() {
        m
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn matches_scalar_evaluation() {
        let e = Expr::parse("(+ (* (sin x1) (- x0 0.3)) (cos (* x2 x2)))").unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..37).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        let views: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        let mut out = vec![0.0; 37];
        let mut ws = EvalWorkspace::default();
        eval_columns(&e, &views, 37, &mut out, &mut ws);
        for r in 0..37 {
            let row = [cols[0][r], cols[1][r], cols[2][r]];
            assert_eq!(out[r].to_bits(), e.eval_unchecked(&row).to_bits());
        }
    }

    #[test]
    fn zero_rows() {
        let e = Expr::var(0);
        let mut out: Vec<f64> = vec![];
        let mut ws = EvalWorkspace::default();
        eval_columns(&e, &[&[]], 0, &mut out, &mut ws);
        assert!(out.is_empty());
    }
}
