mod args;
mod sweep;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use mapf_ir::plan::{format_solution, validate};
use mapf_ir::refine::{iterative_refine_with, TraceRow};
use mapf_ir::{parse_map, parse_scen, random_instance, Grid, Instance};

use args::Args;

pub fn load_grid(path: &Path) -> Result<Arc<Grid>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading map {}", path.display()))?;
    Ok(Arc::new(parse_map(&text).with_context(|| format!("parsing map {}", path.display()))?))
}

fn load_instance(args: &Args) -> Result<Instance> {
    let Some(map) = &args.map else {
        bail!("--map is required");
    };
    let grid = load_grid(map)?;
    match &args.scen {
        Some(scen) => {
            let text = std::fs::read_to_string(scen).with_context(|| format!("reading {}", scen.display()))?;
            let n = match args.agents {
                Some(n) => n,
                None => text.lines().skip(1).filter(|l| !l.trim().is_empty()).count(),
            };
            Ok(parse_scen(&text, grid, n).with_context(|| format!("parsing {}", scen.display()))?)
        }
        None => {
            let Some(n) = args.agents else {
                bail!("--agents is required without --scen");
            };
            Ok(random_instance(grid, n, args.seed)?)
        }
    }
}

fn run_single(args: &Args) -> Result<()> {
    let instance = load_instance(args)?;
    let config = args.refine_config()?;
    let mut trace = match &args.out_trace {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
            writeln!(w, "{}", TraceRow::HEADER)?;
            w.flush()?;
            Some(w)
        }
        None => None,
    };
    let mut write_err = None;
    let started = Instant::now();
    let result = iterative_refine_with(&instance, &config, |row, _| {
        if let Some(w) = trace.as_mut() {
            if let Err(e) = writeln!(w, "{}", row.csv()).and_then(|_| w.flush()) {
                write_err.get_or_insert(e);
            }
        }
    })?;
    let total = started.elapsed();
    if let Some(e) = write_err {
        return Err(e).context("writing trace");
    }
    if let Err(v) = validate(&instance, &result.solution) {
        bail!("internal error: final solution is invalid: {:?}", v.first());
    }
    if let Some(p) = &args.out_solution {
        std::fs::write(p, format_solution(instance.grid(), &result.solution))
            .with_context(|| format!("writing {}", p.display()))?;
    }
    let cost = result.solution.sum_of_costs();
    let ratio = sweep::ratio(cost, instance.lower_bound());
    println!(
        "cost={} ratio={:.4} init_ms={} total_ms={}",
        cost,
        ratio,
        result.init_time.as_millis(),
        total.as_millis()
    );
    Ok(())
}

fn main() -> ExitCode {
    let outcome = Args::load().and_then(|args| match &args.sweep {
        Some(path) => sweep::run(path),
        None => run_single(&args),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(clap) = e.downcast_ref::<clap::Error>() {
                let _ = clap.print();
                return if clap.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
            }
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
