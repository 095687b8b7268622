use std::path::Path;
use std::process::{Command, Output};

use podsim_cli::experiment::{RESULT_COLUMNS, SUMMARY_COLUMNS};

const SMALL: &str = r#"
name = "small"

[cluster]
servers = 6
racks = 2

[pool]
size = 10
seed = 3

[[policies]]
name = "bp"

[[policies]]
name = "jsq_mw_pod"
pod = { n_rack = 1, n_remote = 2 }

[run]
loads = [0.4, 0.8]
replications = 2
horizon = { arrivals = 3000 }
workers = 2
"#;

fn podsim(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_podsim"))
        .args(args)
        .env("PODSIM_OUT_DIR", out_dir)
        .output()
        .unwrap()
}

fn write_spec(dir: &Path, text: &str) -> String {
    let p = dir.join("spec.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_writes_tables_and_charts() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    let o = podsim(&["run", &spec], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let results = std::fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = results.lines();
    assert_eq!(lines.next().unwrap(), RESULT_COLUMNS.join(","));
    assert_eq!(lines.count(), 2 * 2 * 2);
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().next().unwrap(), SUMMARY_COLUMNS.join(","));
    assert_eq!(summary.lines().count(), 1 + 4);
    for f in [
        "completion_full.dat",
        "completion_full.svg",
        "completion_high.dat",
        "completion_high.svg",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn csv_headers_are_stable() {
    assert_eq!(
        RESULT_COLUMNS.join(","),
        "policy,rho,seed,mean_completion_time,ci_half_width,frac_local,frac_rack,frac_remote,\
         route_cost_per_task,sched_cost_per_decision,stability_ratio"
    );
    assert_eq!(
        SUMMARY_COLUMNS.join(","),
        "policy,rho,replications,mean_completion_time,ci_half_width,frac_local,frac_rack,frac_remote,\
         route_cost_per_task,sched_cost_per_decision,stability_ratio"
    );
}

#[test]
fn empty_load_grid_gives_header_only_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), &SMALL.replace("loads = [0.4, 0.8]", "loads = []"));
    let out = tmp.path().join("out");
    assert!(podsim(&["run", &spec], &out).status.success());
    assert_eq!(
        std::fs::read_to_string(out.join("results.csv")).unwrap(),
        RESULT_COLUMNS.join(",") + "\n"
    );
    assert_eq!(
        std::fs::read_to_string(out.join("summary.csv")).unwrap(),
        SUMMARY_COLUMNS.join(",") + "\n"
    );
}

#[test]
fn plot_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    assert!(podsim(&["run", &spec], &out).status.success());
    let summary = out.join("summary.csv");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        assert!(podsim(&["plot", summary.to_str().unwrap()], d).status.success());
    }
    for f in ["completion_full.dat", "completion_full.svg"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");

    let spec = write_spec(tmp.path(), &format!("colour = \"red\"\n{SMALL}"));
    assert_eq!(podsim(&["run", &spec], &out).status.code(), Some(2));
    assert_eq!(podsim(&["run", "preset:nope"], &out).status.code(), Some(2));

    // 200 types on 500 servers is 100,001 LP variables.
    let spec = write_spec(tmp.path(), "[cluster]\nservers = 500\nracks = 10\n[pool]\nsize = 200\n");
    let o = podsim(&["capacity", &spec], &out);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("explicit rate vector"));

    let spec = write_spec(tmp.path(), &SMALL.replace("arrivals = 3000", "arrivals = 10"));
    assert_eq!(podsim(&["run", &spec], &out).status.code(), Some(4));
}

#[test]
fn capacity_reports_margin() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(
        tmp.path(),
        "[cluster]\nservers = 3\nracks = 1\n[workload]\ntypes = [[1, 2, 3]]\nrates = [4.0]\n",
    );
    let o = podsim(&["capacity", &spec], tmp.path());
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("margin rho*    0.75"), "{text}");
    assert!(text.contains("outside capacity region"), "{text}");
}

#[test]
fn goldens_match_committed_traces() {
    podsim_cli::goldens::check_goldens(&podsim_cli::goldens::default_dir()).unwrap();
}
