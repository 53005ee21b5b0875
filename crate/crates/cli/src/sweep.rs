use std::collections::hash_map::DefaultHasher;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Parser;
use mapf_ir::plan::validate;
use mapf_ir::refine::{iterative_refine, RefineConfig};
use mapf_ir::{random_instance, Instance};
use rayon::prelude::*;

use crate::args::{pairs_to_flags, read_pairs, Args};

struct Pipeline {
    name: String,
    config: RefineConfig,
}

struct Plan {
    map: PathBuf,
    agents: usize,
    instances: usize,
    seed: u64,
    out: PathBuf,
    trace_dir: Option<PathBuf>,
    pipelines: Vec<Pipeline>,
}

#[derive(Clone, Debug)]
pub struct Row {
    pub pipeline: String,
    pub instance: usize,
    pub hash: u64,
    pub initial_ratio: Option<f64>,
    pub final_ratio: Option<f64>,
    pub init_ms: Option<u128>,
    pub total_ms: u128,
    pub trace: Option<PathBuf>,
}

pub fn ratio(cost: u64, lower: u64) -> f64 {
    if lower == 0 {
        1.0
    } else {
        cost as f64 / lower as f64
    }
}

pub fn instance_hash(instance: &Instance) -> u64 {
    let g = instance.grid();
    let mut h = DefaultHasher::new();
    (g.width(), g.height()).hash(&mut h);
    for a in 0..instance.num_agents() {
        g.coords(instance.start(a)).hash(&mut h);
        g.coords(instance.goal(a)).hash(&mut h);
    }
    h.finish()
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = PathBuf::from(p);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

fn load_plan(path: &Path) -> Result<Plan> {
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut map = None;
    let mut agents = None;
    let mut instances = 1usize;
    let mut seed = 0u64;
    let mut out = base.join("sweep_report.csv");
    let mut trace_dir = None;
    let mut lines = Vec::new();
    let mut shared = Vec::new();
    for (k, v) in read_pairs(path)? {
        match k.replace('_', "-").as_str() {
            "map" => map = Some(resolve(&base, &v)),
            "agents" => agents = Some(v.parse().context("agents")?),
            "instances" => instances = v.parse().context("instances")?,
            "seed" => seed = v.parse().context("seed")?,
            "out" => out = resolve(&base, &v),
            "trace-dir" => trace_dir = Some(resolve(&base, &v)),
            "pipeline" => lines.push(v),
            "scen" | "sweep" | "config" | "out-solution" | "out-trace" => {
                bail!("`{k}` is not allowed in a sweep file")
            }
            _ => shared.push((k, v)),
        }
    }
    let Some(map) = map else { bail!("sweep file needs `map`") };
    let Some(agents) = agents else { bail!("sweep file needs `agents`") };
    if instances == 0 {
        bail!("`instances` must be positive");
    }
    if lines.is_empty() {
        lines.push(String::new());
    }
    let mut pipelines = Vec::new();
    for line in lines {
        let mut name = None;
        let mut pairs = shared.clone();
        for tok in line.split_whitespace() {
            let Some((k, v)) = tok.split_once('=') else {
                bail!("pipeline token {tok:?} is not key=value");
            };
            if k == "name" {
                name = Some(v.to_string());
            } else {
                pairs.push((k.to_string(), v.to_string()));
            }
        }
        let mut argv: Vec<OsString> = vec!["mapf-ir".into()];
        argv.extend(pairs_to_flags(&pairs)?);
        let args = Args::try_parse_from(argv).with_context(|| format!("pipeline {line:?}"))?;
        let name = name.unwrap_or_else(|| if line.is_empty() { "default".into() } else { line.replace(' ', "_") });
        if pipelines.iter().any(|p: &Pipeline| p.name == name) {
            bail!("duplicate pipeline name {name:?}");
        }
        pipelines.push(Pipeline {
            name,
            config: args.refine_config()?,
        });
    }
    Ok(Plan {
        map,
        agents,
        instances,
        seed,
        out,
        trace_dir,
        pipelines,
    })
}

fn run_one(plan: &Plan, instance: &Instance, idx: usize, pipe: &Pipeline) -> Row {
    let seed = plan.seed + idx as u64;
    let config = RefineConfig {
        seed,
        ..pipe.config.clone()
    };
    let lower = instance.lower_bound();
    let started = Instant::now();
    let mut row = Row {
        pipeline: pipe.name.clone(),
        instance: idx,
        hash: instance_hash(instance),
        initial_ratio: None,
        final_ratio: None,
        init_ms: None,
        total_ms: 0,
        trace: None,
    };
    if let Ok(r) = iterative_refine(instance, &config) {
        if validate(instance, &r.solution).is_ok() {
            row.initial_ratio = Some(ratio(r.initial_cost, lower));
            row.final_ratio = Some(ratio(r.solution.sum_of_costs(), lower));
            row.init_ms = Some(r.init_time.as_millis());
            if let Some(dir) = &plan.trace_dir {
                let p = dir.join(format!("{}_{}.csv", pipe.name, idx));
                if std::fs::write(&p, r.trace.to_csv()).is_ok() {
                    row.trace = Some(p);
                }
            }
        }
    }
    row.total_ms = started.elapsed().as_millis();
    row
}

pub fn report_csv(rows: &[Row]) -> String {
    let mut s = String::from("pipeline,instance,instance_hash,initial_ratio,final_ratio,success,init_ms,total_ms,trace\n");
    let opt = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_default();
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:016x},{},{},{},{},{},{}",
            r.pipeline,
            r.instance,
            r.hash,
            opt(r.initial_ratio),
            opt(r.final_ratio),
            r.final_ratio.is_some(),
            r.init_ms.map(|v| v.to_string()).unwrap_or_default(),
            r.total_ms,
            r.trace.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
        );
    }
    s
}

pub fn summary(rows: &[Row], pipelines: &[String]) -> String {
    let mut s = String::from("pipeline,instances,success,mean_initial_ratio,mean_final_ratio,mean_init_ms\n");
    for name in pipelines {
        let mine: Vec<&Row> = rows.iter().filter(|r| &r.pipeline == name).collect();
        let ok: Vec<&&Row> = mine.iter().filter(|r| r.final_ratio.is_some()).collect();
        let mean = |f: &dyn Fn(&Row) -> f64| {
            if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
            }
        };
        let _ = writeln!(
            s,
            "{},{},{},{:.6},{:.6},{:.1}",
            name,
            mine.len(),
            ok.len(),
            mean(&|r| r.initial_ratio.unwrap()),
            mean(&|r| r.final_ratio.unwrap()),
            mean(&|r| r.init_ms.unwrap() as f64)
        );
    }
    s
}

pub fn run(path: &Path) -> Result<()> {
    let plan = load_plan(path)?;
    let grid = crate::load_grid(&plan.map)?;
    if let Some(d) = &plan.trace_dir {
        std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    let instances: Vec<Instance> = (0..plan.instances)
        .map(|i| random_instance(grid.clone(), plan.agents, plan.seed + i as u64))
        .collect::<Result<_, _>>()?;
    let jobs: Vec<(usize, usize)> = (0..plan.pipelines.len())
        .flat_map(|p| (0..plan.instances).map(move |i| (p, i)))
        .collect();
    let rows: Vec<Row> = jobs
        .par_iter()
        .map(|&(p, i)| run_one(&plan, &instances[i], i, &plan.pipelines[p]))
        .collect();
    std::fs::write(&plan.out, report_csv(&rows)).with_context(|| format!("writing {}", plan.out.display()))?;
    let names: Vec<String> = plan.pipelines.iter().map(|p| p.name.clone()).collect();
    print!("{}", summary(&rows, &names));
    Ok(())
}
