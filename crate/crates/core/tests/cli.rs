//! End-to-end runs of the `npu` binary.

use std::fs;
use std::path::Path;
use std::process::Command;

fn npu(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_npu")).args(args).output().expect("binary runs")
}

fn data_lines(path: &Path) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# schema=1"), "{}", path.display());
    lines.map(str::to_string).collect()
}

#[test]
fn simple_writes_records_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = npu(&["simple", "--models", "real_npu", "--runs", "3", "--iterations", "2000", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let ckpts = fs::read_dir(dir.path().join("checkpoints")).unwrap().count();
    assert_eq!(ckpts, 3);

    let runs = data_lines(&dir.path().join("runs.csv"));
    assert!(runs[0].starts_with("run_id,"));
    let mut ids: Vec<&str> = runs[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    ids.dedup();
    assert_eq!(ids.len(), 3);

    let summary = data_lines(&dir.path().join("summary.csv"));
    let rows: Vec<&String> = summary[1..].iter().filter(|l| l.starts_with("real_npu,simple-")).collect();
    assert_eq!(rows.len(), 4, "one row per op");
    assert!(rows.iter().all(|l| l.split(',').nth(2) == Some("3")));
}

#[test]
fn runs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, workers) in [(&a, "1"), (&b, "2")] {
        let o = npu(&[
            "simple", "--models", "npu,nmu", "--runs", "2", "--iterations", "500", "--workers", workers, "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(o.status.success());
    }
    for f in ["summary.csv", "runs.csv", "pareto.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_file_is_applied_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "# tiny\nexperiment.models = nmu\nexperiment.runs = 1\ntrain.iterations = 50\n").unwrap();
    let out = dir.path().join("out");
    let o = npu(&[
        "simple", "--config", conf.to_str().unwrap(), "--runs", "2", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = data_lines(&out.join("summary.csv"));
    assert!(summary[1..].iter().all(|l| l.starts_with("nmu,") && l.split(',').nth(2) == Some("2")));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(npu(&["simple", "--models", "bogus", "--out", out]).status.code(), Some(2));
    assert_eq!(npu(&["nonsense"]).status.code(), Some(2));
    let conf = dir.path().join("bad.conf");
    fs::write(&conf, "train.nope = 1\n").unwrap();
    assert_eq!(npu(&["simple", "--config", conf.to_str().unwrap(), "--out", out]).status.code(), Some(2));
}

#[test]
fn gradsurf_and_heatmap_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("s.conf");
    fs::write(&conf, "surface.points = 7\nsurface.batch = 32\n").unwrap();
    let out = dir.path().join("gs");
    let o = npu(&["gradsurf", "--config", conf.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let surface = data_lines(&out.join("surface.csv"));
    assert_eq!(surface[0], "unit,w1,w2,gnorm");
    assert_eq!(surface.len(), 1 + 3 * 49);

    let out = dir.path().join("hm");
    let o = npu(&[
        "heatmap", "--models", "nmu", "--runs", "1", "--iterations", "100", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for op in ["add", "mul", "div", "sqrt"] {
        let lines = data_lines(&out.join(format!("heatmap_{op}.csv")));
        assert_eq!(lines[0], "model,x,y,abs_err");
        assert!(lines.len() > 1);
    }
}

#[test]
fn fsir_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("f.conf");
    fs::write(&conf, "fsir.steps = 200\nfsir.finetune_iterations = 5\n").unwrap();
    let out = dir.path().join("f");
    let o = npu(&[
        "fsir", "--config", conf.to_str().unwrap(), "--models", "real_npu,dense", "--runs", "1", "--hidden", "6",
        "--betas", "0", "--iterations", "10", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let truth = data_lines(&out.join("fsir_truth.csv"));
    assert_eq!(truth[0], "t,S,I,R");
    assert_eq!(truth.len(), 41);
    assert!(out.join("readout.txt").exists());
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("readout.json")).unwrap()).unwrap();
    assert!(json.is_array() || json.is_object());
}

#[test]
fn shipped_configs_parse() {
    use npu::cli::{Experiment, ExperimentConfig};
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in ["simple", "large-scale", "fsir", "gradsurf", "heatmap"] {
        let kind: Experiment = name.parse().unwrap();
        let mut c = ExperimentConfig::defaults(kind);
        c.apply_file(&fs::read_to_string(dir.join(format!("{name}.conf"))).unwrap()).unwrap();
        c.validate().unwrap();
        assert_eq!(c.experiment, kind);
        assert_eq!(c.out, Path::new("out").join(name));
    }
}
