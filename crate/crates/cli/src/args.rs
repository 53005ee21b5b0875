use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use mapf_ir::refine::{parse_rules, InitialSolver, RefineConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InitKind {
    #[value(name = "pibt_complete")]
    PibtComplete,
    Pibt,
    Ps,
    Hca,
    Whca,
    Ecbs,
}

/// Anytime multi-agent pathfinding: a fast initial plan, then iterative
/// refinement of agent subsets.
#[derive(Parser, Clone, Debug)]
#[command(name = "mapf-ir", version, args_override_self = true)]
pub struct Args {
    /// Flat `key = value` file; keys are flag names without dashes. Flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// MovingAI grid map.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// MovingAI scenario; without it a random instance is drawn.
    #[arg(long)]
    pub scen: Option<PathBuf>,
    /// Number of agents (all scenario entries when omitted with --scen).
    #[arg(long)]
    pub agents: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = InitKind::PibtComplete)]
    pub init: InitKind,
    #[arg(long, default_value_t = 5)]
    pub whca_window: usize,
    #[arg(long, default_value_t = 1.2)]
    pub ecbs_w: f64,
    /// `composition` or a comma-separated list of rules run as stages.
    #[arg(long, default_value = "composition")]
    pub rules: String,
    /// Size of random modification sets (default min(30, agents)).
    #[arg(long)]
    pub random_set_size: Option<usize>,
    #[arg(long, default_value_t = 500)]
    pub refine_timeout_ms: u64,
    #[arg(long, default_value_t = 10_000)]
    pub node_limit: u64,
    /// Total wall-clock budget including the initial solver.
    #[arg(long, default_value_t = 10_000)]
    pub budget_ms: u64,
    /// Iteration cap (1000 by default in deterministic mode).
    #[arg(long)]
    pub iterations: Option<u64>,
    /// Ignore the wall clock; runs are reproducible and traces count iterations.
    #[arg(long)]
    pub deterministic: bool,
    #[arg(long)]
    pub out_solution: Option<PathBuf>,
    #[arg(long)]
    pub out_trace: Option<PathBuf>,
    /// Run a benchmark sweep described by this file instead of a single instance.
    #[arg(long)]
    pub sweep: Option<PathBuf>,
}

/// `key = value` lines, with `#` comments and blank lines skipped.
pub fn read_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("{}:{}: expected `key = value`", path.display(), i + 1);
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Turns `key = value` pairs into command-line flags.
pub fn pairs_to_flags(pairs: &[(String, String)]) -> Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (k, v) in pairs {
        let k = k.replace('_', "-");
        if k == "deterministic" {
            match v.as_str() {
                "true" | "1" | "yes" => out.push("--deterministic".into()),
                "false" | "0" | "no" => {}
                _ => bail!("deterministic expects true or false, got {v:?}"),
            }
        } else {
            out.push(format!("--{k}").into());
            out.push(v.into());
        }
    }
    Ok(out)
}

impl Args {
    /// Parses the command line, filling unset values from `--config`.
    pub fn load() -> Result<Args> {
        let argv: Vec<OsString> = std::env::args_os().collect();
        Self::load_from(argv)
    }

    pub fn load_from(argv: Vec<OsString>) -> Result<Args> {
        let first = Args::try_parse_from(&argv)?;
        let Some(cfg) = &first.config else {
            return Ok(first);
        };
        let pairs = read_pairs(cfg)?;
        if pairs.iter().any(|(k, _)| k == "config") {
            bail!("config files cannot include other config files");
        }
        let mut merged = vec![argv[0].clone()];
        merged.extend(pairs_to_flags(&pairs)?);
        merged.extend(argv.into_iter().skip(1));
        Ok(Args::try_parse_from(merged)?)
    }

    pub fn initial_solver(&self) -> InitialSolver {
        match self.init {
            InitKind::PibtComplete => InitialSolver::PibtComplete,
            InitKind::Pibt => InitialSolver::Pibt { horizon: None },
            InitKind::Ps => InitialSolver::PushAndSwap,
            InitKind::Hca => InitialSolver::Hca,
            InitKind::Whca => InitialSolver::Whca {
                window: self.whca_window,
            },
            InitKind::Ecbs => InitialSolver::Ecbs { w: self.ecbs_w },
        }
    }

    pub fn refine_config(&self) -> Result<RefineConfig> {
        if self.whca_window == 0 {
            bail!("--whca-window must be positive");
        }
        if self.ecbs_w.is_nan() || self.ecbs_w < 1.0 {
            bail!("--ecbs-w must be at least 1");
        }
        if self.refine_timeout_ms == 0 || self.node_limit == 0 || self.budget_ms == 0 {
            bail!("timeouts and limits must be positive");
        }
        let rules = parse_rules(&self.rules)?;
        let max_iterations = match (self.iterations, self.deterministic) {
            (Some(0), _) => bail!("--iterations must be positive"),
            (Some(i), _) => Some(i),
            (None, true) => Some(1000),
            (None, false) => None,
        };
        Ok(RefineConfig {
            initial: self.initial_solver(),
            rules,
            random_k: self.random_set_size,
            refine_timeout: Some(Duration::from_millis(self.refine_timeout_ms)),
            node_limit: Some(self.node_limit),
            budget: Some(Duration::from_millis(self.budget_ms)),
            max_iterations,
            seed: self.seed,
            deterministic: self.deterministic,
            ..RefineConfig::default()
        })
    }
}
