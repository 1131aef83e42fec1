//! `usskill` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::checks;
use crate::error::Result;
use crate::guided::{ConfidenceSource, EvalSummary};
use crate::io::report::{to_file, write_dataset_table, write_guidance_report, write_trace, write_train_report};
use crate::io::{load_checkpoint, load_dataset, save_checkpoint, save_dataset, RunConfig};
use crate::pipeline;
use crate::policy::PolicyParams;

#[derive(Debug, Parser)]
#[command(name = "usskill", version, about = "Ultrasound scanning skill learning in a synthetic phantom")]
struct Cli {
    /// Run configuration (flat `key = value` file); defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "USSKILL_OUT_DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Record oracle demonstrations into `dataset.usd`.
    GenData {
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Behavior cloning; writes `bc.ckpt` and `bc_report.csv`.
    TrainBc {
        #[arg(long)]
        data: PathBuf,
    },
    /// Trains the quality head on frozen features; writes `quality.ckpt` and `quality_report.csv`.
    TrainQuality {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
    },
    /// Guided post-optimization; writes `post.ckpt` and `post_report.csv`.
    PostOpt {
        #[arg(long)]
        ckpt: PathBuf,
    },
    /// Evaluation rollouts; writes `eval_trace.csv` and prints a summary line.
    Eval {
        /// Policy checkpoint. With `--oracle` it only supplies the confidence.
        #[arg(long, required_unless_present = "oracle")]
        ckpt: Option<PathBuf>,
        /// Roll the scripted guide instead of a learned policy.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Finite-difference gradient checks over every layer kind and the policy composites.
    Gradcheck {
        /// Flip the sign of one analytic gradient (the run must then fail).
        #[arg(long)]
        inject_fault: bool,
    },
    /// Writes the dataset's poses, wrenches, actions and labels as `dataset.csv`.
    PlotData {
        #[arg(long)]
        data: PathBuf,
    },
    /// Prints the effective configuration.
    ShowConfig,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_path(cfg: &RunConfig, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    Ok(cfg.out_dir.join(name))
}

fn load_policy(cfg: &RunConfig, path: &Path) -> Result<PolicyParams> {
    load_checkpoint(path, &cfg.arch)
}

fn summary_line(s: &EvalSummary) -> String {
    format!(
        "episodes={} success_rate={:.4} overshoot_rate={:.4} mean_final_offset_m={:.6}",
        s.episodes.len(),
        s.success_rate,
        s.overshoot_rate,
        s.mean_final_offset
    )
}

fn execute(cli: Cli) -> Result<i32> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::ShowConfig => print!("{}", cfg.to_text()),
        Command::GenData { episodes } => {
            if let Some(n) = episodes {
                cfg.episodes = n;
            }
            let d = pipeline::generate_dataset(&cfg)?;
            let path = out_path(&cfg, "dataset.usd")?;
            save_dataset(&path, &d)?;
            cfg.save(&out_path(&cfg, "run.cfg")?)?;
            let (neg, pos) = d.label_counts();
            println!(
                "records={} label0={} label1={} episodes={} path={}",
                d.len(),
                neg,
                pos,
                d.episode_count(),
                path.display()
            );
        }
        Command::TrainBc { data } => {
            let d = load_dataset(&data)?;
            let (p, report, _) = pipeline::behavior_cloning(&cfg, &d)?;
            save_checkpoint(&out_path(&cfg, "bc.ckpt")?, &p)?;
            to_file(&out_path(&cfg, "bc_report.csv")?, |f| write_train_report(f, &report))?;
            let (first, last) = (&report.rows[0], report.last());
            println!(
                "epochs={} val_loss_epoch0={} val_loss_final={} ratio={:.4} checksum={:#010x}",
                last.epoch,
                first.val_loss,
                last.val_loss,
                last.val_loss / first.val_loss,
                report.checksum
            );
        }
        Command::TrainQuality { data, ckpt } => {
            let d = load_dataset(&data)?;
            let p = load_policy(&cfg, &ckpt)?;
            let (p, report) = pipeline::quality(&cfg, p, &d)?;
            save_checkpoint(&out_path(&cfg, "quality.ckpt")?, &p)?;
            to_file(&out_path(&cfg, "quality_report.csv")?, |f| write_train_report(f, &report))?;
            let last = report.last();
            println!(
                "epochs={} train_accuracy={:.4} val_accuracy={:.4} checksum={:#010x}",
                last.epoch,
                last.train_accuracy.unwrap_or(f64::NAN),
                last.val_accuracy.unwrap_or(f64::NAN),
                report.checksum
            );
        }
        Command::PostOpt { ckpt } => {
            let p = load_policy(&cfg, &ckpt)?;
            let (p, report) = pipeline::post_optimization(&cfg, p)?;
            save_checkpoint(&out_path(&cfg, "post.ckpt")?, &p)?;
            to_file(&out_path(&cfg, "post_report.csv")?, |f| write_guidance_report(f, &report))?;
            let requests: usize = report.epochs.iter().map(|e| e.guidance_requests).sum();
            let chosen: usize = report.epochs.iter().map(|e| e.guide_chosen).sum();
            println!(
                "epochs={} guidance_requests={requests} guide_chosen={chosen} checksum={:#010x}",
                report.epochs.len(),
                report.checksum
            );
        }
        Command::Eval { ckpt, oracle, episodes } => {
            if let Some(n) = episodes {
                cfg.eval.episodes = n;
            }
            let p = ckpt.as_deref().map(|c| load_policy(&cfg, c)).transpose()?;
            let summary = match (&p, oracle) {
                (Some(p), false) => pipeline::evaluate(&cfg, p)?,
                (Some(p), true) => pipeline::evaluate_oracle(&cfg, &ConfidenceSource::Learned(p))?,
                (None, _) => pipeline::evaluate_oracle(&cfg, &ConfidenceSource::GroundTruth)?,
            };
            to_file(&out_path(&cfg, "eval_trace.csv")?, |f| write_trace(f, &summary))?;
            println!("{}", summary_line(&summary));
        }
        Command::Gradcheck { inject_fault } => {
            let results = checks::run_all(inject_fault);
            let mut ok = true;
            for c in &results {
                ok &= c.passed();
                println!(
                    "{:<40} max_rel_error={:.3e} tolerance={:.0e} {}",
                    c.name,
                    c.max_rel_error,
                    c.tolerance,
                    if c.passed() { "pass" } else { "FAIL" }
                );
            }
            if !ok {
                return Ok(1);
            }
        }
        Command::PlotData { data } => {
            let d = load_dataset(&data)?;
            let path = out_path(&cfg, "dataset.csv")?;
            to_file(&path, |f| write_dataset_table(f, &d))?;
            println!("rows={} path={}", d.len(), path.display());
        }
    }
    Ok(0)
}

/// Parses `args` and runs the command, returning the process exit status:
/// 0 success, 1 validation or configuration error, 2 divergence, 3 I/O error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
