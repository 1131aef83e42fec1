mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::small_config;
use tempfile::TempDir;
use usskill::io::{load_checkpoint, load_dataset};
use usskill::pipeline;
use usskill::train::evaluate_action_loss;

struct Run {
    dir: TempDir,
    cfg: PathBuf,
}

impl Run {
    fn new() -> Run {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("small.cfg");
        small_config().save(&cfg).unwrap();
        Run { dir, cfg }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn cmd(&self, out: &str, args: &[&str]) -> Command {
        let mut c = Command::new(env!("CARGO_BIN_EXE_usskill"));
        c.arg("--config").arg(&self.cfg).arg("--out").arg(self.path(out)).args(args);
        c.env_remove("USSKILL_OUT_DIR");
        c
    }

    fn ok(&self, out: &str, args: &[&str]) -> String {
        let o = self.cmd(out, args).output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    }

    fn status(&self, out: &str, args: &[&str]) -> Output {
        self.cmd(out, args).output().unwrap()
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_data_is_reproducible_per_seed() {
    let r = Run::new();
    r.ok("a", &["gen-data"]);
    r.ok("b", &["gen-data"]);
    r.ok("c", &["--seed", "8", "gen-data"]);
    let a = std::fs::read(r.path("a/dataset.usd")).unwrap();
    assert_eq!(a, std::fs::read(r.path("b/dataset.usd")).unwrap());
    assert_ne!(a, std::fs::read(r.path("c/dataset.usd")).unwrap());
    let d = load_dataset(&r.path("a/dataset.usd")).unwrap();
    assert_eq!(d.episode_count(), 12);
}

#[test]
fn zero_episodes_writes_a_valid_empty_dataset() {
    let r = Run::new();
    let out = r.ok("z", &["gen-data", "--episodes", "0"]);
    assert!(out.starts_with("records=0 "), "{out}");
    assert!(load_dataset(&r.path("z/dataset.usd")).unwrap().is_empty());
    let o = r.status("z", &["train-bc", "--data", s(&r.path("z/dataset.usd"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn out_dir_can_come_from_the_environment() {
    let r = Run::new();
    let o = Command::new(env!("CARGO_BIN_EXE_usskill"))
        .arg("--config")
        .arg(&r.cfg)
        .args(["gen-data", "--episodes", "1"])
        .env("USSKILL_OUT_DIR", r.path("env"))
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(r.path("env/dataset.usd").exists());
    assert!(r.path("env/run.cfg").exists());
}

#[test]
fn oracle_eval_trace_has_one_row_per_step() {
    let r = Run::new();
    let out = r.ok("e", &["eval", "--oracle", "--episodes", "1"]);
    assert!(out.starts_with("episodes=1 success_rate="), "{out}");
    let mut rdr = csv::Reader::from_path(r.path("e/eval_trace.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["episode_id", "step", "q", "label"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|x| x.unwrap()).collect();
    assert!(!rows.is_empty() && rows.len() <= 16);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(&row[0], "0");
        assert_eq!(row[1].parse::<usize>().unwrap(), i);
    }
}

#[test]
fn gradcheck_exit_codes() {
    let r = Run::new();
    let clean = r.status("g", &["gradcheck"]);
    assert_eq!(clean.status.code(), Some(0));
    let faulty = r.status("g", &["gradcheck", "--inject-fault"]);
    assert_eq!(faulty.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&faulty.stdout).contains("FAIL"));
}

#[test]
fn bad_inputs_map_to_exit_codes() {
    let r = Run::new();
    let missing = r.status("m", &["train-bc", "--data", s(&r.path("nope.usd"))]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.usd"));

    std::fs::write(r.path("bad.cfg"), "seed = banana\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_usskill")).arg("--config").arg(r.path("bad.cfg")).arg("show-config").output().unwrap();
    assert_eq!(o.status.code(), Some(1));

    let usage = r.status("m", &["no-such-command"]);
    assert_eq!(usage.status.code(), Some(1));
}

#[test]
fn pipeline_through_the_binary() {
    let r = Run::new();
    r.ok("p", &["gen-data"]);
    let data = r.path("p/dataset.usd");
    let out = r.ok("p", &["train-bc", "--data", s(&data)]);
    assert!(out.contains("ratio="), "{out}");

    // the checkpoint reproduces the reported validation loss
    let cfg = small_config();
    let d = load_dataset(&data).unwrap();
    let (_, _, val) = pipeline::behavior_cloning(&cfg, &d).unwrap();
    let p = load_checkpoint(&r.path("p/bc.ckpt"), &cfg.arch).unwrap();
    let mut rdr = csv::Reader::from_path(r.path("p/bc_report.csv")).unwrap();
    let last = rdr.records().last().unwrap().unwrap();
    let reported: f64 = last[2].parse().unwrap();
    assert!((evaluate_action_loss(&p, &val).unwrap() - reported).abs() < 1e-12);

    // guidance needs a trained quality head
    let refused = r.status("p", &["post-opt", "--ckpt", s(&r.path("p/bc.ckpt"))]);
    assert_eq!(refused.status.code(), Some(1));

    r.ok("p", &["train-quality", "--data", s(&data), "--ckpt", s(&r.path("p/bc.ckpt"))]);
    r.ok("p", &["post-opt", "--ckpt", s(&r.path("p/quality.ckpt"))]);
    let out = r.ok("p", &["eval", "--ckpt", s(&r.path("p/post.ckpt"))]);
    assert!(out.starts_with("episodes=3 "), "{out}");
    let rows = r.ok("p", &["plot-data", "--data", s(&data)]);
    assert!(rows.starts_with(&format!("rows={} ", d.len())));

    // a flipped payload byte is caught by the checksum
    let mut bytes = std::fs::read(r.path("p/post.ckpt")).unwrap();
    let n = bytes.len();
    bytes[n - 9] ^= 0x40;
    std::fs::write(r.path("p/broken.ckpt"), bytes).unwrap();
    let broken = r.status("p", &["eval", "--ckpt", s(&r.path("p/broken.ckpt"))]);
    assert_eq!(broken.status.code(), Some(3));
}
