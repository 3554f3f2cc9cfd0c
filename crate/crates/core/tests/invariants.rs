use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use symdyn_core::mppi::mppi_weights;
use symdyn_core::neural::{gradient_check, train_ensemble, train_residual, BaseModel, EnsembleConfig, EnsembleNN, Mlp, ResidualModel, ResidualNet, TrainConfig};
use symdyn_core::sim::{quadrotor_step, QuadParams};
use symdyn_core::symreg::{eval_columns, fit_expression, EvalWorkspace, Expr, SrModel, SrSearchConfig};
use symdyn_core::trajlog::{read_trajectories, write_trajectories};
use symdyn_core::{quat_distance, ActionVec, Dataset, Platform, StateVec, Termination, Trajectory, Transition};

fn expr_of(leaf_vars: u16) -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0..leaf_vars).prop_map(|i| Expr::var(i as usize)),
        (-3.0f64..3.0).prop_map(Expr::constant),
    ];
    leaf.prop_recursive(5, 40, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::add(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::sub(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::mul(a, b)),
            inner.clone().prop_map(Expr::sin),
            inner.prop_map(Expr::cos),
        ]
    })
}

fn quad_model() -> impl Strategy<Value = SrModel> {
    prop::collection::vec(expr_of(17), 13).prop_map(|e| SrModel::new(Platform::Quadrotor, e).unwrap())
}

fn unit_quat() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-1.0f64..1.0).prop_filter_map("non-degenerate", |q| {
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        (n > 1e-3).then(|| q.map(|v| v / n))
    })
}

fn vec_in(n: usize, r: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-r..r, n)
}

fn random_dataset(seed: u64, n: usize) -> Dataset {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = Platform::Racecar;
    let mut traj = Trajectory::new(p, "circle");
    for t in 0..n {
        let mut sv: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
        let th: f64 = rng.random_range(-3.0..3.0);
        (sv[2], sv[3]) = (th.sin(), th.cos());
        let s = StateVec::new(p, sv.clone()).unwrap();
        let a = ActionVec::new(p, vec![rng.random_range(-0.3..0.3), rng.random_range(0.0..2.0)]).unwrap();
        sv[0] += 0.05 * sv[4];
        let s2 = StateVec::new(p, sv).unwrap();
        traj.transitions.push(Transition::new(s, a, s2, t, 0).unwrap());
    }
    traj.termination = Termination::Completed;
    Dataset::from_trajectories(p, [traj]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mppi_weights_sum_to_one_and_ignore_shifts(costs in vec_in(40, 50.0), shift in -1e3f64..1e3, temp in 0.01f64..10.0) {
        let w = mppi_weights(&costs, temp).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|v| *v >= 0.0));
        let shifted: Vec<f64> = costs.iter().map(|c| c + shift).collect();
        let w2 = mppi_weights(&shifted, temp).unwrap();
        for (a, b) in w.iter().zip(&w2) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn cold_temperature_puts_all_weight_on_argmin(costs in prop::collection::hash_set(0i32..10_000, 2..50)) {
        let costs: Vec<f64> = costs.into_iter().map(|c| c as f64 * 0.01).collect();
        let w = mppi_weights(&costs, 1e-6).unwrap();
        let best = costs.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        prop_assert!((w[best] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quat_distance_identities(q in unit_quat(), r in unit_quat()) {
        let d = quat_distance(&q, &r).unwrap();
        prop_assert!((d - quat_distance(&r, &q).unwrap()).abs() < 1e-12);
        let neg = q.map(|v| -v);
        prop_assert!((d - quat_distance(&neg, &r).unwrap()).abs() < 1e-12);
        prop_assert!(quat_distance(&q, &q).unwrap().abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
    }

    #[test]
    fn batch_eval_matches_scalar(m in quad_model(), rows in prop::collection::vec(vec_in(17, 2.0), 1..20)) {
        let n = rows.len();
        let x = Array2::from_shape_vec((n, 17), rows.concat()).unwrap();
        let y = m.batch_eval(x.view()).unwrap();
        for (i, row) in rows.iter().enumerate() {
            for (j, e) in m.exprs().iter().enumerate() {
                prop_assert_eq!(y[(i, j)].to_bits(), e.eval(row).unwrap().to_bits());
            }
        }
    }

    #[test]
    fn column_eval_matches_scalar(e in expr_of(3), rows in prop::collection::vec(vec_in(3, 4.0), 1..70)) {
        let cols: Vec<Vec<f64>> = (0..3).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let mut out = vec![0.0; rows.len()];
        eval_columns(&e, &refs, rows.len(), &mut out, &mut EvalWorkspace::default());
        for (r, v) in rows.iter().zip(&out) {
            prop_assert_eq!(v.to_bits(), e.eval(r).unwrap().to_bits());
        }
    }

    #[test]
    fn model_text_round_trip_is_bit_exact(m in quad_model()) {
        let back = SrModel::from_text(&m.to_text()).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(back.checksum(), m.checksum());
    }

    #[test]
    fn expression_round_trip_is_bit_exact(e in expr_of(6)) {
        let back = Expr::parse(&e.to_sexpr()).unwrap();
        prop_assert_eq!(back, e);
    }

    #[test]
    fn gradients_match_finite_differences(
        hidden in prop::collection::vec(2usize..12, 0..3),
        lambda in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![4];
        sizes.extend(&hidden);
        sizes.push(3);
        let m = Mlp::random(&sizes, false, &mut rng).unwrap();
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        prop_assert!(gradient_check(&m, &x, &t, lambda) < 1e-4);
    }

    #[test]
    fn free_fall_error_shrinks_with_dt(dt in 0.001f64..0.05) {
        let p = QuadParams { dt, ..Default::default() };
        let steps = (1.0 / dt).round() as usize;
        let horizon = steps as f64 * dt;
        let mut s = StateVec::new(Platform::Quadrotor, [vec![0.0, 0.0, 100.0, 1.0], vec![0.0; 9]].concat()).unwrap();
        let a = ActionVec::new(Platform::Quadrotor, vec![0.0; 4]).unwrap();
        for _ in 0..steps {
            s = quadrotor_step(&s, &a, &p).unwrap();
        }
        let exact = 100.0 - 0.5 * p.gravity * horizon * horizon;
        let err = (s.values()[2] - exact).abs();
        prop_assert!((err - 0.5 * p.gravity * dt * horizon).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn search_respects_complexity_cap(cap in 1usize..20, seed in any::<u64>()) {
        let x0: Vec<f64> = (0..60).map(|i| i as f64 * 0.1 - 3.0).collect();
        let x1: Vec<f64> = x0.iter().map(|v| (v * 1.7).cos()).collect();
        let y: Vec<f64> = x0.iter().zip(&x1).map(|(a, b)| a * a * b + (3.0 * a).sin()).collect();
        let cfg = SrSearchConfig { population: 16, islands: 2, generations: 6, iterations: 2, max_complexity: cap, ..Default::default() };
        let fit = fit_expression(&[x0, x1], &y, &cfg, &[], seed).unwrap();
        prop_assert!(fit.best.complexity() <= cap);
        prop_assert!(fit.front.iter().all(|(e, _)| e.complexity() <= cap));
    }

    #[test]
    fn residual_training_leaves_base_untouched(seed in any::<u64>()) {
        let exprs = (0..7).map(|i| Expr::add(Expr::var(i), Expr::constant(0.01 * i as f64))).collect();
        let base = BaseModel::Sr(SrModel::new(Platform::Racecar, exprs).unwrap());
        let before = base.checksum();
        let r = ResidualModel::with_nn_residual(base.clone(), &[8], 0.01, seed).unwrap();
        let cfg = TrainConfig { epochs: 3, batch_size: 16, seed, ..Default::default() };
        let fit = train_residual(&r, &random_dataset(seed, 64), &cfg).unwrap();
        prop_assert_eq!(fit.model.base.checksum(), before);
        prop_assert_eq!(&fit.model.base, &base);
    }
}

#[test]
fn network_checkpoints_round_trip_bit_exact() {
    let arch = EnsembleConfig { members: 2, hidden: vec![5, 4], predict_delta: false };
    let ens = train_ensemble(&random_dataset(3, 40), &arch, &TrainConfig { epochs: 1, ..Default::default() }).unwrap();
    let back = EnsembleNN::from_text(&ens.to_text()).unwrap();
    assert_eq!(back.checksum(), ens.checksum());
    let r = ResidualNet::new(Platform::Racecar, &[6, 6], 9).unwrap();
    assert_eq!(ResidualNet::from_text(&r.to_text()).unwrap(), r);
}

#[test]
fn trajectory_log_round_trip_bit_exact() {
    let data = random_dataset(4, 30);
    let mut buf = Vec::new();
    write_trajectories(&mut buf, data.episodes()).unwrap();
    let back = read_trajectories(buf.as_slice()).unwrap();
    assert_eq!(back.len(), 1);
    assert_eq!(back[0].transitions, data.episodes()[0].transitions);
    assert_eq!(back[0].termination, data.episodes()[0].termination);
}
