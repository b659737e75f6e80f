use std::path::Path;
use std::process::{Command, Output};

use astoc::table::Table;

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_astoc"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("ASTOC_OUT_DIR")
        .output()
        .unwrap()
}

fn ok(args: &[&str], out: &Path) {
    let o = run(args, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn table(path: &Path) -> Table {
    Table::parse(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn walk_schema() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["walk", "--n", "30", "--reps", "500", "--gammas", "0.5,0.9"], dir.path());
    let path = table(&dir.path().join("walk_gamma_0.5.csv"));
    assert_eq!(path.header, ["k", "alpha_walk_min_so_far", "alpha_star"]);
    assert_eq!(path.rows.len(), 31);
    let alphas = path.column("alpha_walk_min_so_far").unwrap();
    assert_eq!(alphas[0], 1.0);
    assert!(alphas.windows(2).all(|w| w[1] <= w[0]));

    let summary = table(&dir.path().join("walk_summary.csv"));
    assert_eq!(
        summary.header,
        ["gamma", "alpha_star", "level", "success_prob", "dip_fraction", "dip_ci_halfwidth", "reps"]
    );
    assert_eq!(summary.column("gamma").unwrap(), [0.5, 0.9]);
    assert!(dir.path().join("walk_gamma_0.9.csv").exists());
}

#[test]
fn hitting_rows() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["hitting", "--n", "100", "--l-max", "10", "--reps", "1000"], dir.path());
    let t = table(&dir.path().join("hitting.csv"));
    assert_eq!(t.header, ["l", "exact", "bound", "mc_estimate", "mc_ci_halfwidth"]);
    assert_eq!(t.rows.len(), 11);
    assert_eq!(t.column("exact").unwrap()[0], 1.0);
    assert_eq!(t.column("bound").unwrap()[0], 1.0);
    let bound = t.column("bound").unwrap()[10];
    assert!((bound - 2.162e-3).abs() < 1e-6, "{bound}");

    ok(&["hitting", "--n", "4", "--l-max", "6", "--reps", "1000"], dir.path());
    let t = table(&dir.path().join("hitting.csv"));
    let exact = t.column("exact").unwrap();
    assert_eq!(&exact[5..], [0.0, 0.0]);
    assert!(exact[4] > 0.0);
}

#[test]
fn optimize_zero_noise_stops_after_one_step() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &["optimize", "--dim", "2", "--conditioning", "1", "--start", "2", "--epsilon", "1e-3"],
        dir.path(),
    );
    let trace = table(&dir.path().join("trace.csv"));
    assert_eq!(trace.header, ["k", "alpha", "success", "cost0", "cost1", "true_grad_norm", "true_gap"]);
    assert_eq!(trace.rows.len(), 2);
    let summary = table(&dir.path().join("summary.csv"));
    assert_eq!(summary.header, ["T_eps", "toc0", "toc1", "toc"]);
    assert_eq!(summary.rows, [["1", "2", "1", "3"]]);
    assert!(summary.comments.iter().any(|c| c == "method=sass"));
}

#[test]
fn optimize_without_stopping_leaves_t_empty() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &["optimize", "--oracle", "constant", "--sigma-f", "1", "--sigma-g", "1", "--epsilon", "1e-9", "--max-iterations", "5"],
        dir.path(),
    );
    let summary = table(&dir.path().join("summary.csv"));
    assert_eq!(summary.rows[0][0], "");
    assert_eq!(table(&dir.path().join("trace.csv")).rows.len(), 6);
}

#[test]
fn costs_are_monotone() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["costs", "--sigma-f", "1", "--sigma-g", "1", "--points", "5"], dir.path());
    let t = table(&dir.path().join("costs.csv"));
    assert_eq!(t.header, ["alpha", "oc0", "oc1"]);
    let oc0 = t.column("oc0").unwrap();
    assert_eq!(oc0.len(), 5);
    assert!(oc0.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn sweep_schema() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &["sweep", "--method", "storm", "--sigma-g", "0.1", "--epsilons", "0.2,0.1", "--reps", "4", "--report"],
        dir.path(),
    );
    let t = table(&dir.path().join("sweep.csv"));
    assert_eq!(
        t.header,
        ["epsilon", "mean_T", "mean_toc0", "mean_toc1", "bound_expected", "bound_highprob", "exceed_frac"]
    );
    assert_eq!(t.rows.len(), 2);
    let r = table(&dir.path().join("sweep_report.csv"));
    assert_eq!(r.header[..3], ["epsilon", "n", "gamma"]);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"n": 20, "l_max": 3, "reps": 100, "p": 0.9}"#).unwrap();
    ok(&["hitting", "--config", cfg.to_str().unwrap(), "--l-max", "5"], dir.path());
    let t = table(&dir.path().join("hitting.csv"));
    assert_eq!(t.rows.len(), 6);
    let direct = tempfile::tempdir().unwrap();
    ok(&["hitting", "--n", "20", "--l-max", "5", "--reps", "100", "--p", "0.9"], direct.path());
    assert_eq!(
        std::fs::read(dir.path().join("hitting.csv")).unwrap(),
        std::fs::read(direct.path().join("hitting.csv")).unwrap()
    );

    std::fs::write(&cfg, r#"{"no_such_flag": 1}"#).unwrap();
    assert_eq!(run(&["hitting", "--config", cfg.to_str().unwrap()], dir.path()).status.code(), Some(1));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["walk", "--p", "0.3", "--reps", "10"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["walk", "--bogus"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["sweep", "--gamma-policy", "corollary"], dir.path()).status.code(), Some(1));

    let file = dir.path().join("occupied");
    std::fs::write(&file, "").unwrap();
    assert_eq!(run(&["hitting", "--reps", "10"], &file).status.code(), Some(3));
    let missing = dir.path().join("missing.json");
    let o = run(&["hitting", "--config", missing.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3));

    let help = Command::new(env!("CARGO_BIN_EXE_astoc")).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_astoc"))
        .args(["costs", "--points", "3"])
        .env("ASTOC_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("costs.csv").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["optimize", "--sigma-f", "0.1", "--sigma-g", "0.1", "--epsilon", "1e-2", "--seed", "9"];
    ok(&args, a.path());
    ok(&args, b.path());
    for name in ["trace.csv", "summary.csv"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
    }
}

#[test]
fn threshold_policy_sets_gamma_from_horizon() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &[
            "sweep", "--gamma-policy", "threshold", "--horizon", "200", "--epsilons", "0.1", "--reps", "4", "--report",
        ],
        dir.path(),
    );
    let r = table(&dir.path().join("sweep_report.csv"));
    let gamma = r.column("gamma").unwrap()[0];
    let n = r.column("n").unwrap()[0];
    assert_eq!(n, 200.0);
    assert!((0.5..1.0).contains(&gamma), "{gamma}");
}
