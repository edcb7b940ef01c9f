use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use zrex_cli::{
    cmd_evaluate, cmd_explain, cmd_export, cmd_preprocess, cmd_recommend, cmd_sweep, cmd_synth,
    cmd_train, parse_grid, CliError, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "zrex",
    version,
    about = "Explainable user-city recommendations"
)]
struct Cli {
    #[command(flatten)]
    opts: Overrides,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset into --out.
    Synth,
    /// Build the graph and feature tables and write a manifest.
    Preprocess,
    /// Train the model and write a checkpoint and loss log.
    Train {
        /// Continue from the existing checkpoint.
        #[arg(long)]
        resume: bool,
    },
    /// nDCG@{1,3,5,10} for the model and both baselines.
    Evaluate,
    /// Top-K cities for one user.
    Recommend {
        #[arg(long)]
        user: String,
    },
    /// Explain one recommendation.
    Explain {
        #[arg(long)]
        user: String,
        /// Defaults to the user's top recommendation.
        #[arg(long)]
        city: Option<String>,
        /// Also write a Graphviz rendering.
        #[arg(long)]
        dot: bool,
    },
    /// One-at-a-time hyperparameter sweep.
    Sweep {
        /// `key=v1,v2;key2=v3`; may repeat.
        #[arg(long, required = true)]
        grid: Vec<String>,
    },
    /// Write final node embeddings as TSV.
    Export,
}

/// Settings shared by every command; each overrides the --config file.
#[derive(Args)]
struct Overrides {
    /// Flat key=value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory holding events.csv, regions.csv and cities.csv.
    #[arg(long, global = true)]
    dataset: Option<String>,
    #[arg(long, global = true)]
    events: Option<String>,
    #[arg(long, global = true)]
    regions: Option<String>,
    /// City population table.
    #[arg(long, global = true)]
    cities: Option<String>,
    #[arg(long, global = true)]
    checkpoint: Option<String>,
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    dim: Option<String>,
    #[arg(long, global = true)]
    lr: Option<String>,
    #[arg(long, global = true)]
    weight_decay: Option<String>,
    #[arg(long, global = true)]
    epochs: Option<String>,
    #[arg(long, global = true)]
    margin: Option<String>,
    #[arg(long, global = true)]
    neg_ratio: Option<String>,
    /// nDCG cutoff.
    #[arg(long = "K", global = true)]
    big_k: Option<String>,
    /// Explanation subgraph hops.
    #[arg(long = "k", global = true)]
    k: Option<String>,
    /// pri, hid or hbc.
    #[arg(long, global = true)]
    strategy: Option<String>,
    #[arg(long, global = true)]
    budget: Option<String>,
    /// Edges removed per explanation in fidelity and highlighted in DOT.
    #[arg(long = "m", global = true)]
    m: Option<String>,
    /// all or unseen.
    #[arg(long, global = true)]
    relevance: Option<String>,
    /// Planted structure for synth: none, feature_signal or hub_structure.
    #[arg(long, global = true)]
    mode: Option<String>,
    #[arg(long, global = true)]
    strength: Option<String>,
    #[arg(long, global = true)]
    users: Option<String>,
    #[arg(long, global = true)]
    listings: Option<String>,
    #[arg(long, global = true)]
    n_cities: Option<String>,
    #[arg(long, global = true)]
    days: Option<String>,
}

impl Overrides {
    fn config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        let pairs = [
            ("dataset", &self.dataset),
            ("events", &self.events),
            ("regions", &self.regions),
            ("cities", &self.cities),
            ("checkpoint", &self.checkpoint),
            ("out", &self.out),
            ("seed", &self.seed),
            ("dim", &self.dim),
            ("lr", &self.lr),
            ("weight_decay", &self.weight_decay),
            ("epochs", &self.epochs),
            ("margin", &self.margin),
            ("neg_ratio", &self.neg_ratio),
            ("K", &self.big_k),
            ("k", &self.k),
            ("strategy", &self.strategy),
            ("budget", &self.budget),
            ("m", &self.m),
            ("relevance", &self.relevance),
            ("mode", &self.mode),
            ("strength", &self.strength),
            ("users", &self.users),
            ("listings", &self.listings),
            ("n_cities", &self.n_cities),
            ("days", &self.days),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => {
        let _ = writeln!($out, $($arg)*);
    };
}

fn threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("ZREX_THREADS") else {
        return Ok(());
    };
    let n: usize =
        v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            CliError::Config(format!("ZREX_THREADS={v:?} is not a positive integer"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn run(cli: Cli, out: &mut String) -> Result<(), CliError> {
    threads()?;
    let cfg = cli.opts.config()?;
    match cli.cmd {
        Command::Synth => {
            let s = cmd_synth(&cfg)?;
            say!(out, "wrote dataset to {}", s.dir.display());
            for c in &s.report.checks {
                say!(
                    out,
                    "{}\t{}\t{:.4}\texpected {}",
                    if c.ok { "ok" } else { "off" },
                    c.name,
                    c.value,
                    c.expected
                );
            }
        }
        Command::Preprocess => {
            let m = cmd_preprocess(&cfg)?;
            say!(out, "{}", serde_json::to_string_pretty(&m)?);
        }
        Command::Train { resume } => {
            let s = cmd_train(&cfg, resume)?;
            let first = s.steps - s.losses.len() as u64;
            say!(out, "epoch\tloss\tseconds");
            for (i, (l, t)) in s.losses.iter().zip(&s.epoch_seconds).enumerate() {
                say!(out, "{}\t{l:.6}\t{t:.3}", first + i as u64 + 1);
            }
            say!(
                out,
                "checkpoint {} ({})",
                s.checkpoint.display(),
                s.checkpoint_id
            );
        }
        Command::Evaluate => {
            let tables = cmd_evaluate(&cfg)?;
            say!(out, "method\tK\tndcg\tn_users");
            for t in &tables {
                for r in &t.rows {
                    say!(out, "{}\t{}\t{:.4}\t{}", t.method, r.k, r.ndcg, r.n_users);
                }
            }
        }
        Command::Recommend { user } => {
            say!(out, "rank\tcity\tscore");
            for r in cmd_recommend(&cfg, &user)? {
                say!(out, "{}\t{}\t{:.6}", r.rank, r.city, r.score);
            }
        }
        Command::Explain { user, city, dot } => {
            let e = cmd_explain(&cfg, &user, city.as_deref(), dot)?;
            say!(out, "{}", e.to_json());
        }
        Command::Sweep { grid } => {
            let mut g = Vec::new();
            for text in &grid {
                g.extend(parse_grid(text)?);
            }
            say!(out, "param\tvalue\tndcg@1");
            for r in cmd_sweep(&cfg, &g)? {
                say!(out, "{}\t{}\t{:.4}", r.param, r.value, r.ndcg_at_1);
            }
        }
        Command::Export => {
            let p = cmd_export(&cfg)?;
            say!(out, "wrote {}", p.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut out = String::new();
    let res = run(Cli::parse(), &mut out);
    // a closed pipe downstream is not an error
    let _ = std::io::stdout().lock().write_all(out.as_bytes());
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
