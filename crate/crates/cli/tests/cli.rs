use std::path::Path;
use std::process::{Command, Output};

use symdyn_core::neural::BaseModel;
use tempfile::TempDir;

const TINY_QUAD: &str = r#"
platform = "quadrotor"
seeds = [0]
max_steps = 25
tracks = ["hover"]

[base]
max_episodes = 2

[sr]
population = 12
islands = 2
generations = 3
iterations = 1
max_fit_rows = 100

[mppi]
samples = 32
"#;

const TINY_CAR: &str = r#"
platform = "racecar"
seeds = [0]
max_steps = 30
tracks = ["circle"]
disturbance = "low_friction"

[base]
learners = ["sr", "nn"]
max_episodes = 2

[sr]
population = 12
islands = 2
generations = 3
iterations = 1
max_fit_rows = 100

[nn]
members = 2
hidden = [8, 8]

[train]
epochs = 3

[mppi]
samples = 32

[adapt]
residual_hidden = [8]

[bench]
calls = 3
"#;

fn symdyn(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_symdyn"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("SYM2REAL_THREADS", t),
        None => cmd.env_remove("SYM2REAL_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).to_string()
}

#[test]
fn minimal_quad_config_yields_full_model() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "q.toml", TINY_QUAD);
    let out = tmp.path().join("out");
    let o = symdyn(&["train-base", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("base_sr_seed0.model")).unwrap();
    let BaseModel::Sr(m) = BaseModel::from_text(&text).unwrap() else { panic!("symbolic base expected") };
    assert_eq!(m.exprs().len(), 13);
    assert!(out.join("curve_sr_seed0.csv").exists());
    assert!(out.join("data_sr_seed0.csv").exists());
    let report = std::fs::read_to_string(out.join("report.toml")).unwrap();
    assert!(report.contains("command = \"train-base\""));
}

#[test]
fn runs_are_deterministic_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "q.toml", TINY_QUAD);
    let mut models = Vec::new();
    for (i, threads) in [Some("1"), Some("3"), Some("1")].into_iter().enumerate() {
        let out = tmp.path().join(format!("out{i}"));
        let o = symdyn(&["train-base", "--config", &cfg, "--out", out.to_str().unwrap()], threads);
        assert!(o.status.success(), "{}", stderr(&o));
        models.push(std::fs::read(out.join("base_sr_seed0.model")).unwrap());
    }
    assert_eq!(models[0], models[1]);
    assert_eq!(models[0], models[2]);
}

#[test]
fn car_workflow_end_to_end() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", TINY_CAR);
    let out = tmp.path().join("out");
    let o = symdyn(&["train-base", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let sr = out.join("base_sr_seed0.model");
    let nn = out.join("base_nn_seed0.model");
    assert!(nn.exists());

    let a = symdyn(
        &["adapt", "--config", &cfg, "--out", out.to_str().unwrap(), "--base", sr.to_str().unwrap(), "--combo", "sr_nn", "--budget", "2"],
        None,
    );
    assert!(a.status.success(), "{}", stderr(&a));
    let csv = std::fs::read_to_string(out.join("adapt_sr_nn_seed0.csv")).unwrap();
    assert!(csv.starts_with("trial,episodes_used,episode_cost,avg_pos_err"));
    assert!(csv.lines().count() >= 2);

    // an ensemble base cannot drive an SR-base combo
    let wrong = symdyn(
        &["adapt", "--config", &cfg, "--out", out.to_str().unwrap(), "--base", nn.to_str().unwrap(), "--combo", "sr_nn"],
        None,
    );
    assert_eq!(wrong.status.code(), Some(2));

    let b = symdyn(
        &["bench", "--config", &cfg, "--out", out.to_str().unwrap(), "--model", sr.to_str().unwrap(), "--model", nn.to_str().unwrap()],
        None,
    );
    assert!(b.status.success(), "{}", stderr(&b));
    let report = std::fs::read_to_string(out.join("report.toml")).unwrap();
    assert!(report.contains("median_us"));
}

#[test]
fn config_errors_exit_2_and_name_the_field() {
    let tmp = TempDir::new().unwrap();
    let bad = write_config(tmp.path(), "bad.toml", "platform = \"quadrotor\"\n[mppi]\nsamples = 0\n");
    let o = symdyn(&["train-base", "--config", &bad, "--out", tmp.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mppi"), "{}", stderr(&o));

    let unknown = write_config(tmp.path(), "u.toml", "platform = \"quadrotor\"\nsampels = 3\n");
    let o = symdyn(&["train-base", "--config", &unknown, "--out", tmp.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sampels"), "{}", stderr(&o));

    let plat = write_config(tmp.path(), "p.toml", "platform = \"boat\"\n");
    let o = symdyn(&["train-base", "--config", &plat, "--out", tmp.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("platform"));

    let ok = write_config(tmp.path(), "ok.toml", "platform = \"racecar\"\n");
    let o = symdyn(&["suite", "sim2real", "--config", &ok, "--out", tmp.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    let o = symdyn(&["train-base", "--config", &ok, "--out", tmp.path().to_str().unwrap()], Some("zero"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_artifacts_exit_3() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "platform = \"racecar\"\n");
    let corrupt = tmp.path().join("corrupt.model");
    std::fs::write(&corrupt, "not a model\n").unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = symdyn(&["adapt", "--config", &cfg, "--out", out, "--base", corrupt.to_str().unwrap(), "--combo", "sr_nn"], None);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let missing = tmp.path().join("missing.model");
    let o = symdyn(&["eval-coverage", "--config", &cfg, "--out", out, "--base", missing.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn unknown_combo_exits_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "platform = \"racecar\"\n");
    let o = symdyn(
        &["adapt", "--config", &cfg, "--out", tmp.path().to_str().unwrap(), "--base", "x.model", "--combo", "sr_xx"],
        None,
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["quadrotor.toml", "racecar.toml"] {
        let cfg = symdyn_cli::ScenarioConfig::load(&root.join(name)).unwrap();
        assert_eq!(cfg.mppi.samples, 256);
        assert_eq!(cfg.file.adapt.combos.len(), 3);
    }
}

#[test]
fn suites_aggregate_and_resume() {
    let tmp = TempDir::new().unwrap();
    let text = format!(
        "{}\n[suite]\nscenarios = [\"low_friction\"]\n",
        TINY_CAR.replace("residual_hidden = [8]", "residual_hidden = [8]\nbudget = 1\ncombos = [\"sr_nn\", \"nn_nn\"]")
            + "\n[coverage]\ntrials = 2\n"
    );
    let cfg = write_config(tmp.path(), "s.toml", &text);
    let out = tmp.path().join("suite");
    let o_str = out.to_str().unwrap();
    for name in ["sim2sim-car", "coverage", "efficiency"] {
        let o = symdyn(&["suite", name, "--config", &cfg, "--out", o_str], None);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
    }
    let auc = std::fs::read_to_string(out.join("auc.csv")).unwrap();
    assert!(auc.starts_with(symdyn_cli::suite::AUC_HEADER));
    assert_eq!(auc.lines().count(), 3);
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.lines().skip(1).all(|l| l.starts_with("low_friction,")));
    let grid = std::fs::read_to_string(out.join("grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 5);
    assert!(out.join("efficiency.csv").exists());

    // a rerun reuses the finished cells and reproduces the tables
    let cell = out.join("low_friction/seed0/sr_nn.csv");
    let stamp = std::fs::metadata(&cell).unwrap().modified().unwrap();
    let o = symdyn(&["suite", "sim2sim-car", "--config", &cfg, "--out", o_str], None);
    assert!(o.status.success());
    assert_eq!(std::fs::metadata(&cell).unwrap().modified().unwrap(), stamp);
    assert_eq!(std::fs::read_to_string(out.join("auc.csv")).unwrap(), auc);

    let wrong = symdyn(&["suite", "sim2sim-quad", "--config", &cfg, "--out", o_str], None);
    assert_eq!(wrong.status.code(), Some(2));
}
