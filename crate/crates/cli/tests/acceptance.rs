//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//!
//! Heavy artifacts are cached under `ACCEPTANCE_OUT` (default: the cargo
//! target tmp dir), so a rerun only recomputes missing cells. Delete the
//! directory to start from scratch. `ACCEPTANCE_ONLY=1,5` runs a subset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::Rng;
use symdyn_cli::commands::{bench, load_base, load_dataset, save_base};
use symdyn_cli::report::{csv_rows, read_file};
use symdyn_cli::suite::{ensure_sr_base, read_auc_table, read_efficiency, run_suite, Suite, GRID_HEADER};
use symdyn_cli::ScenarioConfig;
use symdyn_core::mppi::mppi_weights;
use symdyn_core::neural::{gradient_check, train_ensemble, train_residual, BaseModel, EnsembleConfig, Mlp, ResidualModel, TrainConfig};
use symdyn_core::sim::{quadrotor_step, QuadParams};
use symdyn_core::symreg::{fit_expression, EvalWorkspace, Expr, SrModel, SrSearchConfig};
use symdyn_core::{quat_distance, seed, ActionVec, Platform, StateVec};

struct Verdict {
    pass: bool,
    detail: String,
}

type Check = Result<Verdict, String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

const QUAD_BASE: &str = r#"
platform = "quadrotor"
seeds = [0, 1, 2]

[mppi]
samples = 256

[nn]
hidden = [64, 64, 64]

[adapt]
combos = ["sr_nn", "nn_nn", "nn_sr"]
"#;

const CAR_BASE: &str = r#"
platform = "racecar"
seeds = [0, 1, 2]

[mppi]
samples = 256

[nn]
hidden = [64, 64, 64]

[adapt]
combos = ["sr_nn", "nn_nn", "nn_sr"]

[suite]
scenarios = ["low_friction"]
"#;

fn config(platform: Platform) -> ScenarioConfig {
    let text = match platform {
        Platform::Quadrotor => QUAD_BASE,
        Platform::Racecar => CAR_BASE,
    };
    ScenarioConfig::parse(text).expect("acceptance config parses")
}

fn dir(root: &Path, platform: Platform) -> PathBuf {
    root.join(platform.tag())
}

const PLATFORMS: [Platform; 2] = [Platform::Quadrotor, Platform::Racecar];

fn data_efficiency(root: &Path) -> Check {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in PLATFORMS {
        let cfg = config(p);
        let out = dir(root, p);
        run_suite(Suite::Efficiency, &cfg, &[0], &out).map_err(err)?;
        let row = read_efficiency(&out.join("efficiency.csv")).map_err(err)?.remove(0);
        let cap = if p == Platform::Quadrotor { 15 } else { 20 };
        let sr_ok = row.sr_plateau.is_some() && row.sr_episodes <= cap;
        let nn_ok = row.nn_reached.is_none_or(|k| k >= 3 * row.sr_episodes);
        pass &= sr_ok && nn_ok;
        let nn = match row.nn_reached {
            Some(k) => format!("nn reached it at {k}"),
            None => format!("nn not within {} episodes", row.nn_episodes),
        };
        parts.push(format!(
            "{p}: sr plateau {} eps (cap {cap}) at {:.3} m, {nn}",
            row.sr_plateau.map_or("none".into(), |k| k.to_string()),
            row.sr_level
        ));
    }
    Ok(Verdict { pass, detail: parts.join("; ") })
}

fn inference_speed(root: &Path) -> Check {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in PLATFORMS {
        let text = format!("platform = \"{}\"\n[bench]\ncalls = 10\n", p.tag());
        let cfg = ScenarioConfig::parse(&text).map_err(err)?;
        let out = dir(root, p).join("bench");
        let lab = config(p);
        let sr = ensure_sr_base(&lab, 0, &dir(root, p)).map_err(err)?;
        let nn_path = out.join("nn_4x200.model");
        if !nn_path.exists() {
            // latency does not depend on how well the weights fit
            let data = load_dataset(&sr.dir.join("data_sr.csv"), &lab).map_err(err)?;
            let arch = EnsembleConfig { members: 4, hidden: vec![200; 3], predict_delta: false };
            let nn = train_ensemble(&data, &arch, &TrainConfig { epochs: 1, ..Default::default() }).map_err(err)?;
            save_base(&nn_path, &BaseModel::Nn(nn)).map_err(err)?;
        }
        let report = bench(&cfg, &[sr.dir.join("sr.model"), nn_path], &out).map_err(err)?;
        let (s, n) = (&report.timing[0], &report.timing[1]);
        let ratio = n.median_us / s.median_us;
        pass &= ratio >= 2.0;
        parts.push(format!("{p}: sr {:.1} ms, nn {:.1} ms, {ratio:.1}x", s.median_us / 1e3, n.median_us / 1e3));
    }
    Ok(Verdict { pass, detail: parts.join("; ") })
}

/// (scenario, combo, auc, reduction) over both sim2sim suites.
fn sim2sim_table(root: &Path) -> Result<Vec<(String, String, f64, f64)>, String> {
    let mut rows = Vec::new();
    for (p, suite) in [(Platform::Quadrotor, Suite::Sim2SimQuad), (Platform::Racecar, Suite::Sim2SimCar)] {
        let cfg = config(p);
        let out = dir(root, p);
        run_suite(suite, &cfg, &cfg.file.seeds, &out).map_err(err)?;
        rows.extend(read_auc_table(&out.join("auc.csv")).map_err(err)?);
    }
    Ok(rows)
}

fn few_shot(root: &Path) -> Check {
    let rows = sim2sim_table(root)?;
    let mine: Vec<_> = rows.iter().filter(|r| r.1 == "sr_nn").collect();
    let pass = mine.len() == 6 && mine.iter().all(|r| r.3 >= 0.2);
    let detail = mine.iter().map(|r| format!("{} {:.0}%", r.0, 100.0 * r.3)).collect::<Vec<_>>().join(", ");
    Ok(Verdict { pass, detail: format!("cost reduction: {detail}") })
}

fn baseline_ordering(root: &Path) -> Check {
    let rows = sim2sim_table(root)?;
    let auc = |s: &str, c: &str| rows.iter().find(|r| r.0 == s && r.1 == c).map_or(f64::NAN, |r| r.2);
    let mut wins = 0;
    let mut parts = Vec::new();
    for r in rows.iter().filter(|r| r.1 == "sr_nn") {
        let (nn_nn, nn_sr) = (auc(&r.0, "nn_nn"), auc(&r.0, "nn_sr"));
        if r.2 <= nn_nn && r.2 <= nn_sr {
            wins += 1;
        }
        parts.push(format!("{} {:.0}/{:.0}/{:.0}", r.0, r.2, nn_nn, nn_sr));
    }
    Ok(Verdict { pass: wins >= 5, detail: format!("{wins}/6 scenarios; auc sr_nn/nn_nn/nn_sr: {}", parts.join(", ")) })
}

fn coverage(root: &Path) -> Check {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in PLATFORMS {
        let cfg = config(p);
        let out = dir(root, p);
        run_suite(Suite::Coverage, &cfg, &[0], &out).map_err(err)?;
        let rows = csv_rows(&read_file(&out.join("grid.csv")).map_err(err)?, GRID_HEADER).map_err(err)?;
        let rate = |l: &str, s: &str| {
            rows.iter().find(|r| r[0] == l && r[1] == s).and_then(|r| r[3].parse::<f64>().ok()).unwrap_or(f64::NAN)
        };
        let (sr_tr, sr_te, nn_tr, nn_te) = (rate("sr", "train"), rate("sr", "test"), rate("nn", "train"), rate("nn", "test"));
        pass &= sr_te - nn_te >= 0.3 && sr_tr >= 0.95 && nn_tr >= 0.95;
        parts.push(format!(
            "{p}: train sr {:.0}% nn {:.0}%, test sr {:.0}% nn {:.0}%",
            100.0 * sr_tr,
            100.0 * nn_tr,
            100.0 * sr_te,
            100.0 * nn_te
        ));
    }
    Ok(Verdict { pass, detail: parts.join("; ") })
}

fn action_dependency(root: &Path) -> Check {
    let mut parts = Vec::new();
    let mut pass = true;
    for p in PLATFORMS {
        let cfg = config(p);
        let mut ok = 0;
        for &s in &cfg.file.seeds {
            let base = ensure_sr_base(&cfg, s, &dir(root, p)).map_err(err)?;
            let BaseModel::Sr(m) = base.model else { return Err("symbolic base expected".into()) };
            let hit = match p {
                Platform::Quadrotor => {
                    let dep = m.action_dependency();
                    dep[Platform::Z_INDEX] && dep[Platform::VZ_INDEX]
                }
                Platform::Racecar => m.actions_used().iter().all(|u| *u),
            };
            ok += usize::from(hit);
        }
        pass &= ok >= 2;
        parts.push(format!("{p}: {ok}/{} seeds", cfg.file.seeds.len()));
    }
    Ok(Verdict { pass, detail: parts.join("; ") })
}

fn prop(name: &str, cases: u32, f: impl FnOnce(&mut TestRunner) -> Result<(), String>) -> Result<(), String> {
    let mut runner = TestRunner::new(PropConfig { cases, failure_persistence: None, ..PropConfig::default() });
    f(&mut runner).map_err(|e| format!("{name}: {e}"))
}

fn check(ok: bool, msg: &str) -> Result<(), TestCaseError> {
    if ok { Ok(()) } else { Err(TestCaseError::fail(msg.to_string())) }
}

fn small_expr(vars: u16) -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![(0..vars).prop_map(|i| Expr::var(i as usize)), (-3.0f64..3.0).prop_map(Expr::constant)];
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

fn invariants(root: &Path) -> Check {
    let cases = 128;
    prop("weights", cases, |r| {
        r.run(&(prop::collection::vec(-50.0f64..50.0, 1..64), -1e3f64..1e3, 0.01f64..10.0), |(c, shift, t)| {
            let w = mppi_weights(&c, t).unwrap();
            check((w.iter().sum::<f64>() - 1.0).abs() < 1e-12, "weights do not sum to one")?;
            let shifted: Vec<f64> = c.iter().map(|v| v + shift).collect();
            let w2 = mppi_weights(&shifted, t).unwrap();
            check(w.iter().zip(&w2).all(|(a, b)| (a - b).abs() < 1e-9), "shift changed weights")
        })
        .map_err(|e| e.to_string())
    })?;
    prop("argmin", cases, |r| {
        r.run(&prop::collection::hash_set(0i32..10_000, 2..50), |c| {
            let c: Vec<f64> = c.into_iter().map(|v| v as f64 * 0.01).collect();
            let w = mppi_weights(&c, 1e-6).unwrap();
            let best = c.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            check((w[best] - 1.0).abs() < 1e-12, "cold weights miss the argmin")
        })
        .map_err(|e| e.to_string())
    })?;
    prop("complexity cap", 16, |r| {
        r.run(&(1usize..20, any::<u64>()), |(cap, s)| {
            let x0: Vec<f64> = (0..60).map(|i| i as f64 * 0.1 - 3.0).collect();
            let y: Vec<f64> = x0.iter().map(|a| a * a * a.cos() + (3.0 * a).sin()).collect();
            let cfg = SrSearchConfig { population: 16, islands: 2, generations: 6, iterations: 2, max_complexity: cap, ..Default::default() };
            let fit = fit_expression(&[x0], &y, &cfg, &[], s).unwrap();
            check(fit.front.iter().all(|(e, _)| e.complexity() <= cap) && fit.best.complexity() <= cap, "cap exceeded")
        })
        .map_err(|e| e.to_string())
    })?;
    // the default cap, checked on every stored base expression
    for p in PLATFORMS {
        let m = dir(root, p).join("bases");
        if let Ok(entries) = std::fs::read_dir(&m) {
            for e in entries.flatten() {
                if let Ok(BaseModel::Sr(sr)) = load_base(&e.path().join("sr.model")) {
                    if sr.exprs().iter().any(|x| x.complexity() > 85) {
                        return Err(format!("{}: expression above complexity 85", e.path().display()));
                    }
                }
            }
        }
    }
    prop("frozen base", 8, |r| {
        r.run(&any::<u64>(), |s| {
            let exprs = (0..7).map(|i| Expr::add(Expr::var(i), Expr::constant(0.01 * i as f64))).collect();
            let base = BaseModel::Sr(SrModel::new(Platform::Racecar, exprs).unwrap());
            let before = base.checksum();
            let model = ResidualModel::with_nn_residual(base, &[8], 0.01, s).unwrap();
            let fit = train_residual(&model, &car_dataset(s), &TrainConfig { epochs: 3, seed: s, ..Default::default() }).unwrap();
            check(fit.model.base.checksum() == before, "base checksum changed")
        })
        .map_err(|e| e.to_string())
    })?;
    prop("gradient", cases, |r| {
        r.run(&(prop::collection::vec(2usize..12, 0..3), 0.0f64..1.0, any::<u64>()), |(hidden, lambda, s)| {
            let mut rng = seed::rng(s, 0, 0);
            let sizes: Vec<usize> = std::iter::once(4).chain(hidden).chain([3]).collect();
            let m = Mlp::random(&sizes, false, &mut rng).unwrap();
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let t: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            check(gradient_check(&m, &x, &t, lambda) < 1e-4, "gradient mismatch")
        })
        .map_err(|e| e.to_string())
    })?;
    prop("quaternion", cases, |r| {
        r.run(&(prop::array::uniform4(-1.0f64..1.0), prop::array::uniform4(-1.0f64..1.0)), |(q, w)| {
            let unit = |v: [f64; 4]| {
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
                v.map(|x| x / n)
            };
            let (q, w) = (unit(q), unit(w));
            let d = quat_distance(&q, &w).unwrap();
            check((d - quat_distance(&w, &q).unwrap()).abs() < 1e-12, "not symmetric")?;
            check((d - quat_distance(&q.map(|x| -x), &w).unwrap()).abs() < 1e-12, "sign flip changes distance")?;
            check(quat_distance(&q, &q).unwrap().abs() < 1e-12, "nonzero at identity")
        })
        .map_err(|e| e.to_string())
    })?;
    prop("free fall", 32, |r| {
        r.run(&(0.001f64..0.05), |dt| {
            let p = QuadParams { dt, ..Default::default() };
            let steps = (1.0 / dt).round() as usize;
            let horizon = steps as f64 * dt;
            let mut s = StateVec::new(Platform::Quadrotor, [vec![0.0, 0.0, 100.0, 1.0], vec![0.0; 9]].concat()).unwrap();
            let a = ActionVec::new(Platform::Quadrotor, vec![0.0; 4]).unwrap();
            for _ in 0..steps {
                s = quadrotor_step(&s, &a, &p).unwrap();
            }
            let e = (s.values()[2] - (100.0 - 0.5 * p.gravity * horizon * horizon)).abs();
            check((e - 0.5 * p.gravity * dt * horizon).abs() < 1e-9, "free fall is not first order in dt")
        })
        .map_err(|e| e.to_string())
    })?;
    prop("batch eval", cases, |r| {
        r.run(&(prop::collection::vec(small_expr(17), 13), prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 17), 1..20)), |(ex, rows)| {
            let m = SrModel::new(Platform::Quadrotor, ex).unwrap();
            let cols: Vec<Vec<f64>> = (0..17).map(|j| rows.iter().map(|row| row[j]).collect()).collect();
            let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
            let mut out = vec![Vec::new(); 13];
            m.eval_columns(&refs, rows.len(), &mut out, &mut EvalWorkspace::default());
            for (i, row) in rows.iter().enumerate() {
                for (k, e) in m.exprs().iter().enumerate() {
                    check(out[k][i].to_bits() == e.eval(row).unwrap().to_bits(), "batch differs from scalar")?;
                }
            }
            let back = SrModel::from_text(&m.to_text()).unwrap();
            check(back == m && back.checksum() == m.checksum(), "model text round trip")
        })
        .map_err(|e| e.to_string())
    })?;
    Ok(Verdict { pass: true, detail: "weights, argmin, cap, frozen base, gradients, quaternions, free fall, batch eval, round trips".into() })
}

fn car_dataset(s: u64) -> symdyn_core::Dataset {
    use symdyn_core::{Termination, Trajectory, Transition};
    let p = Platform::Racecar;
    let mut rng = seed::rng(s, 1, 0);
    let mut traj = Trajectory::new(p, "circle");
    for t in 0..48 {
        let th: f64 = rng.random_range(-3.0..3.0);
        let mut v: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
        (v[2], v[3]) = (th.sin(), th.cos());
        let st = StateVec::new(p, v.clone()).unwrap();
        v[0] += 0.05 * v[4];
        let a = ActionVec::new(p, vec![rng.random_range(-0.3..0.3), rng.random_range(0.0..2.0)]).unwrap();
        traj.transitions.push(Transition::new(st, a, StateVec::new(p, v).unwrap(), t, 0).unwrap());
    }
    traj.termination = Termination::Completed;
    symdyn_core::Dataset::from_trajectories(p, [traj]).unwrap()
}

fn sr_recovery(_: &Path) -> Check {
    let sample = |s: u64, n: usize| {
        let mut rng = seed::rng(s, 0x8, 0);
        let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let x1: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = x0.iter().zip(&x1).map(|(a, b)| 2.0 * a + b.sin()).collect();
        (vec![x0, x1], y)
    };
    let mut ok = 0;
    let mut maes = Vec::new();
    for s in 0..3u64 {
        let (cols, y) = sample(s, 500);
        let cfg = SrSearchConfig { iterations: 5, ..Default::default() };
        let fit = fit_expression(&cols, &y, &cfg, &[], s).map_err(err)?;
        let (hc, hy) = sample(s + 100, 500);
        let mae = hy
            .iter()
            .enumerate()
            .map(|(i, t)| (fit.best.eval(&[hc[0][i], hc[1][i]]).unwrap() - t).abs())
            .sum::<f64>()
            / hy.len() as f64;
        ok += usize::from(mae < 1e-3);
        maes.push(format!("{mae:.1e}"));
    }
    Ok(Verdict { pass: ok >= 2, detail: format!("{ok}/3 seeds below 1e-3 held-out MAE ({})", maes.join(", ")) })
}

fn main() {
    let root = std::env::var_os("ACCEPTANCE_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance"));
    std::fs::create_dir_all(&root).expect("acceptance output dir");
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect());

    let criteria: [(usize, &str, fn(&Path) -> Check); 8] = [
        (1, "data efficiency", data_efficiency),
        (2, "inference speed", inference_speed),
        (3, "few-shot adaptation", few_shot),
        (4, "baseline ordering", baseline_ordering),
        (5, "coverage ordering", coverage),
        (6, "action dependency", action_dependency),
        (7, "invariant suite", invariants),
        (8, "symbolic recovery", sr_recovery),
    ];
    println!("acceptance artifacts in {}", root.display());
    let (mut passed, mut failed, mut broken) = (0, 0, 0);
    for (id, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t0 = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(|| f(&root)));
        let secs = t0.elapsed().as_secs_f64();
        match r {
            Ok(Ok(v)) => {
                let tag = if v.pass { "PASS" } else { "FAIL" };
                if v.pass { passed += 1 } else { failed += 1 }
                println!("{tag} {id} {name} [{secs:.0}s]: {}", v.detail);
            }
            Ok(Err(e)) => {
                broken += 1;
                println!("FAIL {id} {name} [{secs:.0}s]: error: {e}");
            }
            Err(_) => {
                broken += 1;
                println!("FAIL {id} {name} [{secs:.0}s]: panicked");
            }
        }
    }
    println!("acceptance: {passed} passed, {failed} failed, {broken} errored");
    if broken > 0 {
        std::process::exit(1);
    }
}
