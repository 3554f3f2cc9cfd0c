//! Island-model genetic programming with constant refinement.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::batch::{mae_columns, EvalWorkspace};
use super::expr::{Expr, Node};
use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SrSearchConfig {
    /// Individuals per island.
    pub population: usize,
    pub islands: usize,
    /// Generations per search iteration.
    pub generations: usize,
    /// Warm-started search iterations per fit.
    pub iterations: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    /// Relative std of Gaussian constant perturbations.
    pub const_perturb_scale: f64,
    pub max_complexity: usize,
    pub parsimony: f64,
    pub tournament: usize,
    /// Generations between ring migrations.
    pub migration_interval: usize,
    /// Rows used for fitness; larger datasets are subsampled once per fit.
    pub max_fit_rows: usize,
    /// Hall-of-fame entries refined per generation.
    pub const_opt_per_generation: usize,
    pub seed: u64,
}

impl Default for SrSearchConfig {
    fn default() -> Self {
        Self {
            population: 64,
            islands: 4,
            generations: 40,
            iterations: 5,
            crossover_prob: 0.25,
            mutation_prob: 0.7,
            const_perturb_scale: 0.3,
            max_complexity: 85,
            parsimony: 1e-3,
            tournament: 5,
            migration_interval: 10,
            max_fit_rows: 600,
            const_opt_per_generation: 2,
            seed: 0,
        }
    }
}

impl SrSearchConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            self.population,
            self.islands,
            self.generations,
            self.iterations,
            self.max_complexity,
            self.tournament,
            self.migration_interval,
            self.max_fit_rows,
        ];
        if counts.contains(&0) {
            return invalid("symbolic search counts must be at least 1");
        }
        let probs = [self.crossover_prob, self.mutation_prob];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || self.crossover_prob + self.mutation_prob > 1.0 + 1e-12 {
            return invalid("crossover/mutation probabilities must lie in [0, 1] and sum to at most 1");
        }
        if !(self.parsimony >= 0.0) || !(self.const_perturb_scale >= 0.0) {
            return invalid("parsimony and perturbation scale must be nonnegative");
        }
        Ok(())
    }

    /// Parsimony-penalised fitness used for selection.
    pub fn score(&self, mae: f64, complexity: usize) -> f64 {
        mae * (1.0 + self.parsimony * complexity as f64)
    }
}

/// Outcome of a single-output search.
#[derive(Clone, Debug)]
pub struct ExprFit {
    pub best: Expr,
    /// Training MAE of `best` on all rows.
    pub best_mae: f64,
    /// Best expression per complexity, with full-data MAE.
    pub front: Vec<(Expr, f64)>,
    /// Selection score after each search iteration.
    pub iteration_scores: Vec<f64>,
}

#[derive(Clone)]
struct Individual {
    expr: Expr,
    score: f64,
}

struct Data<'a> {
    cols: Vec<&'a [f64]>,
    y: &'a [f64],
}

struct Search<'a> {
    cfg: &'a SrSearchConfig,
    n_inputs: usize,
    fit: Data<'a>,
    rng: ChaCha8Rng,
    ws: EvalWorkspace,
    buf: Vec<f64>,
    hof: Vec<Option<(Expr, f64)>>,
    dirty: Vec<usize>,
}

impl Search<'_> {
    fn mae(&mut self, e: &Expr) -> f64 {
        mae_columns(e, &self.fit.cols, self.fit.y, &mut self.buf, &mut self.ws)
    }

    fn individual(&mut self, expr: Expr) -> Individual {
        let mae = self.mae(&expr);
        let score = self.cfg.score(mae, expr.complexity());
        self.offer(&expr, mae);
        Individual { expr, score }
    }

    fn offer(&mut self, e: &Expr, mae: f64) {
        let c = e.complexity();
        if c > self.cfg.max_complexity || !mae.is_finite() {
            return;
        }
        let better = match &self.hof[c] {
            Some((_, m)) => mae < *m,
            None => true,
        };
        if better {
            self.hof[c] = Some((e.clone(), mae));
            if !self.dirty.contains(&c) {
                self.dirty.push(c);
            }
        }
    }

    fn gauss(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    fn leaf(&mut self) -> Node {
        if self.rng.random::<f64>() < 0.75 {
            Node::Var(self.rng.random_range(0..self.n_inputs) as u16)
        } else {
            Node::Const(self.gauss())
        }
    }

    fn random_op(&mut self) -> Node {
        match self.rng.random_range(0..12) {
            0..=3 => Node::Add,
            4..=5 => Node::Sub,
            6..=9 => Node::Mul,
            10 => Node::Sin,
            _ => Node::Cos,
        }
    }

    fn grow(&mut self, depth: usize, out: &mut Vec<Node>) {
        if depth == 0 || self.rng.random::<f64>() < 0.3 {
            let l = self.leaf();
            out.push(l);
            return;
        }
        let op = self.random_op();
        for _ in 0..op.arity() {
            self.grow(depth - 1, out);
        }
        out.push(op);
    }

    fn random_tree(&mut self, max_depth: usize) -> Vec<Node> {
        let d = self.rng.random_range(1..=max_depth);
        let mut v = Vec::new();
        self.grow(d, &mut v);
        v
    }

    fn tournament<'p>(&mut self, pop: &'p [Individual]) -> &'p Individual {
        let mut best = &pop[self.rng.random_range(0..pop.len())];
        for _ in 1..self.cfg.tournament {
            let c = &pop[self.rng.random_range(0..pop.len())];
            if c.score < best.score || (c.score == best.score && c.expr.complexity() < best.expr.complexity()) {
                best = c;
            }
        }
        best
    }

    fn crossover(&mut self, a: &Expr, b: &Expr) -> Expr {
        let ra = self.rng.random_range(0..a.complexity());
        let rb = self.rng.random_range(0..b.complexity());
        a.replace_subtree(ra, b.subtree(rb))
    }

    fn perturb_constants(&mut self, e: &Expr) -> Option<Expr> {
        let idx: Vec<usize> = e
            .nodes()
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n, Node::Const(_)))
            .map(|(i, _)| i)
            .collect();
        if idx.is_empty() {
            return None;
        }
        let k = idx[self.rng.random_range(0..idx.len())];
        let mut out = e.clone();
        let s = self.cfg.const_perturb_scale;
        let (g1, g2) = (self.gauss(), self.gauss());
        let flip = self.rng.random::<f64>() < 0.05;
        if let Node::Const(c) = &mut out.nodes_mut()[k] {
            *c = *c * (1.0 + s * g1) + 0.01 * s * g2;
            if flip {
                *c = -*c;
            }
        }
        Some(out)
    }

    fn mutate(&mut self, e: &Expr) -> Expr {
        let len = e.complexity();
        loop {
            match self.rng.random_range(0..20) {
                0..=5 => {
                    if let Some(x) = self.perturb_constants(e) {
                        return x;
                    }
                }
                6..=8 => {
                    // swap a node for one of the same arity
                    let i = self.rng.random_range(0..len);
                    let mut out = e.clone();
                    let new = match e.nodes()[i].arity() {
                        0 => self.leaf(),
                        1 => {
                            if e.nodes()[i] == Node::Sin {
                                Node::Cos
                            } else {
                                Node::Sin
                            }
                        }
                        _ => [Node::Add, Node::Sub, Node::Mul][self.rng.random_range(0..3)],
                    };
                    out.nodes_mut()[i] = new;
                    return out;
                }
                9..=11 => {
                    let i = self.rng.random_range(0..len);
                    let t = self.random_tree(3);
                    return e.replace_subtree(i, &t);
                }
                12..=13 => {
                    // wrap a subtree in a new operator
                    let i = self.rng.random_range(0..len);
                    let sub = e.subtree(i).to_vec();
                    let op = self.random_op();
                    let mut t = Vec::with_capacity(sub.len() + 2);
                    if op.arity() == 1 {
                        t.extend(sub);
                    } else if self.rng.random::<bool>() {
                        t.extend(sub);
                        t.push(self.leaf());
                    } else {
                        t.push(self.leaf());
                        t.extend(sub);
                    }
                    t.push(op);
                    return e.replace_subtree(i, &t);
                }
                14..=15 => {
                    // hoist a child over its parent
                    let ops: Vec<usize> = (0..len).filter(|&i| e.nodes()[i].arity() > 0).collect();
                    if ops.is_empty() {
                        continue;
                    }
                    let i = ops[self.rng.random_range(0..ops.len())];
                    let right = i - 1;
                    let child = if e.nodes()[i].arity() == 2 && self.rng.random::<bool>() {
                        e.subtree_start(right) - 1
                    } else {
                        right
                    };
                    let sub = e.subtree(child).to_vec();
                    return e.replace_subtree(i, &sub);
                }
                _ => {
                    // append a scaled term: (+ e (* c t))
                    let mut nodes = e.nodes().to_vec();
                    nodes.push(Node::Const(0.1 * self.gauss()));
                    let t = self.random_tree(2);
                    nodes.extend(t);
                    nodes.push(Node::Mul);
                    nodes.push(Node::Add);
                    return Expr::from_postfix_unchecked(nodes);
                }
            }
        }
    }

    /// Coordinate pattern search on the constants against the fitness rows.
    fn refine_constants(&mut self, e: &Expr, mae: f64) -> (Expr, f64) {
        let idx: Vec<usize> = e
            .nodes()
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n, Node::Const(_)))
            .map(|(i, _)| i)
            .collect();
        let mut cur = e.clone();
        let mut best = mae;
        for &k in &idx {
            let Node::Const(c0) = cur.nodes()[k] else { unreachable!() };
            let mut step = 0.1 * c0.abs().max(1e-2);
            for _ in 0..8 {
                let mut improved = false;
                for dir in [1.0, -1.0] {
                    let mut cand = cur.clone();
                    if let Node::Const(c) = &mut cand.nodes_mut()[k] {
                        *c += dir * step;
                    }
                    let m = self.mae(&cand);
                    if m < best {
                        best = m;
                        cur = cand;
                        improved = true;
                        break;
                    }
                }
                if improved {
                    step *= 2.0;
                } else {
                    step *= 0.25;
                }
            }
        }
        (cur, best)
    }

    fn evolve(&mut self, pop: &mut Vec<Individual>) {
        let n = pop.len();
        let elite = pop
            .iter()
            .min_by(|a, b| a.score.total_cmp(&b.score))
            .cloned()
            .expect("population is never empty");
        let mut next = Vec::with_capacity(n);
        next.push(elite);
        while next.len() < n {
            let r: f64 = self.rng.random();
            let parent = self.tournament(pop).clone();
            let child = if r < self.cfg.crossover_prob {
                let other = self.tournament(pop).expr.clone();
                Some(self.crossover(&parent.expr, &other))
            } else if r < self.cfg.crossover_prob + self.cfg.mutation_prob {
                Some(self.mutate(&parent.expr))
            } else {
                None
            };
            match child {
                Some(c) if c.complexity() <= self.cfg.max_complexity => {
                    let ind = self.individual(c);
                    next.push(ind);
                }
                _ => next.push(parent),
            }
        }
        *pop = next;
    }

    fn refine_front(&mut self, islands: &mut [Vec<Individual>], gen: usize) {
        let mut dirty = std::mem::take(&mut self.dirty);
        dirty.sort_by(|a, b| {
            let sa = self.hof[*a].as_ref().map(|(_, m)| self.cfg.score(*m, *a)).unwrap_or(f64::INFINITY);
            let sb = self.hof[*b].as_ref().map(|(_, m)| self.cfg.score(*m, *b)).unwrap_or(f64::INFINITY);
            sa.total_cmp(&sb)
        });
        for (j, c) in dirty.into_iter().take(self.cfg.const_opt_per_generation).enumerate() {
            let Some((e, m)) = self.hof[c].clone() else { continue };
            if e.constants().next().is_none() {
                continue;
            }
            let (e2, m2) = self.refine_constants(&e, m);
            if m2 < m {
                self.hof[c] = Some((e2.clone(), m2));
                let isl = &mut islands[(gen + j) % islands.len()];
                let worst = isl
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.score.total_cmp(&b.1.score))
                    .map(|(i, _)| i)
                    .unwrap();
                let score = self.cfg.score(m2, e2.complexity());
                isl[worst] = Individual { expr: e2, score };
            }
        }
        self.dirty.clear();
    }

    fn migrate(&mut self, islands: &mut [Vec<Individual>]) {
        let k = islands.len();
        if k < 2 {
            return;
        }
        let bests: Vec<Individual> = islands
            .iter()
            .map(|p| p.iter().min_by(|a, b| a.score.total_cmp(&b.score)).unwrap().clone())
            .collect();
        for (i, b) in bests.into_iter().enumerate() {
            let dst = &mut islands[(i + 1) % k];
            let worst = dst
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.score.total_cmp(&b.1.score))
                .map(|(i, _)| i)
                .unwrap();
            dst[worst] = b;
        }
    }
}

fn mae_full(e: &Expr, cols: &[&[f64]], y: &[f64], ws: &mut EvalWorkspace, buf: &mut Vec<f64>) -> f64 {
    mae_columns(e, cols, y, buf, ws)
}

/// Searches for an expression mapping input columns to `y` under ℓ1 loss.
///
/// `warm` expressions seed the initial population and the result front, so
/// the returned selection score never exceeds that of any warm seed.
pub fn fit_expression(cols: &[Vec<f64>], y: &[f64], cfg: &SrSearchConfig, warm: &[Expr], seed: u64) -> Result<ExprFit> {
    cfg.validate()?;
    let n = y.len();
    if n == 0 {
        return invalid("cannot fit an expression to zero rows");
    }
    if cols.is_empty() || cols.iter().any(|c| c.len() != n) {
        return invalid("input columns must all match the target length");
    }
    let n_inputs = cols.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // fixed fitness subset
    let (sub_cols, sub_y): (Vec<Vec<f64>>, Vec<f64>) = if n > cfg.max_fit_rows {
        let mut rows = index::sample(&mut rng, n, cfg.max_fit_rows).into_vec();
        rows.sort_unstable();
        (
            cols.iter().map(|c| rows.iter().map(|&r| c[r]).collect()).collect(),
            rows.iter().map(|&r| y[r]).collect(),
        )
    } else {
        (cols.to_vec(), y.to_vec())
    };
    let full_views: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();

    let mut s = Search {
        cfg,
        n_inputs,
        fit: Data { cols: sub_cols.iter().map(|c| c.as_slice()).collect(), y: &sub_y },
        rng,
        ws: EvalWorkspace::default(),
        buf: Vec::new(),
        hof: vec![None; cfg.max_complexity + 1],
        dirty: Vec::new(),
    };

    let warm: Vec<Expr> = warm
        .iter()
        .filter(|e| e.complexity() <= cfg.max_complexity && e.max_var().is_none_or(|m| m < n_inputs))
        .cloned()
        .collect();

    let mut full_front: Vec<Option<(Expr, f64)>> = vec![None; cfg.max_complexity + 1];
    let mut full_ws = EvalWorkspace::default();
    let mut full_buf = Vec::new();
    for w in &warm {
        let m = mae_full(w, &full_views, y, &mut full_ws, &mut full_buf);
        let c = w.complexity();
        if m.is_finite() && full_front[c].as_ref().is_none_or(|(_, old)| m < *old) {
            full_front[c] = Some((w.clone(), m));
        }
    }

    let mut islands: Vec<Vec<Individual>> = Vec::with_capacity(cfg.islands);
    for _ in 0..cfg.islands {
        let mut pop = Vec::with_capacity(cfg.population);
        for w in &warm {
            if pop.len() < cfg.population {
                let ind = s.individual(w.clone());
                pop.push(ind);
            }
        }
        let n_warm_variants = if warm.is_empty() { 0 } else { cfg.population / 4 };
        for k in 0..n_warm_variants {
            if pop.len() >= cfg.population {
                break;
            }
            let m = s.mutate(&warm[k % warm.len()]);
            if m.complexity() <= cfg.max_complexity {
                let ind = s.individual(m);
                pop.push(ind);
            }
        }
        while pop.len() < cfg.population {
            let t = s.random_tree(4);
            let e = Expr::from_postfix_unchecked(t);
            if e.complexity() <= cfg.max_complexity {
                let ind = s.individual(e);
                pop.push(ind);
            }
        }
        islands.push(pop);
    }

    let mut iteration_scores = Vec::with_capacity(cfg.iterations);
    let mut gen_total = 0;
    for _ in 0..cfg.iterations {
        for _ in 0..cfg.generations {
            for isl in islands.iter_mut() {
                s.evolve(isl);
            }
            s.refine_front(&mut islands, gen_total);
            gen_total += 1;
            if gen_total % cfg.migration_interval == 0 {
                s.migrate(&mut islands);
            }
        }
        // merge the subset front into the full-data front
        for c in 1..=cfg.max_complexity {
            if let Some((e, _)) = &s.hof[c] {
                let m = mae_full(e, &full_views, y, &mut full_ws, &mut full_buf);
                if m.is_finite() && full_front[c].as_ref().is_none_or(|(_, old)| m < *old) {
                    full_front[c] = Some((e.clone(), m));
                }
            }
        }
        let (_, score) = select(&full_front, cfg).expect("front holds at least the leaf individuals");
        iteration_scores.push(score);
    }

    let (best_c, _) = select(&full_front, cfg).expect("non-empty front");
    let (best, best_mae) = full_front[best_c].clone().unwrap();
    let front = full_front.into_iter().flatten().collect();
    Ok(ExprFit { best, best_mae, front, iteration_scores })
}

/// Index and score of the entry minimising `mae * (1 + parsimony * complexity)`.
fn select(front: &[Option<(Expr, f64)>], cfg: &SrSearchConfig) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (c, e) in front.iter().enumerate() {
        if let Some((_, m)) = e {
            let sc = cfg.score(*m, c);
            if best.is_none_or(|(_, b)| sc < b) {
                best = Some((c, sc));
            }
        }
    }
    best
}
