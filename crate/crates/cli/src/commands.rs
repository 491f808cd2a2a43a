use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use llmpc_core::eval::{bench_matrix, edge_metrics, BenchConfig, MatchMode};
use llmpc_core::graph::{graph_stats, CausalGraph, GraphFile};
use llmpc_core::llm::{
    bfs_prior, pairwise_prior, parse_mem_response, render_mem_prompt, score_mem, split_for_mem,
    ChatClient, MemKind,
};
use llmpc_core::pc::{discover, PcConfig, PriorKnowledge};
use llmpc_core::refine::{
    enforce_acyclicity, expand_edges, prune_edges, DirectionResolver, EdgeScore, PruneConfig, PruneOrder,
};
use llmpc_core::scm::{build_scm, derive_seed, Activation, Dist, MechanismSpec, NoiseSpec};
use serde_json::{json, Value};

use crate::args::*;
use crate::inputs::{ci_test, llm_client, load_graph, usage};
use crate::manifest::{manifest_path, Recorder};

/// Writes `text` to `out` and its manifest, or to stdout.
fn emit(out: Option<&Path>, text: &str, mut rec: Recorder) -> Result<()> {
    match out {
        Some(path) => {
            write_file(path, text)?;
            rec.output(path);
            rec.write(&manifest_path(path))
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn recorder(name: &str, args: &impl serde::Serialize, seed: u64, jobs: usize) -> Result<Recorder> {
    let config = json!({ "args": serde_json::to_value(args)?, "jobs": jobs });
    Ok(Recorder::new(name, config, json!({ "seed": seed })))
}

fn parse_dist(flag: &str, text: &str) -> Result<Dist> {
    text.parse().map_err(|e| usage(format!("--{flag}: {e}")))
}

pub fn gen_data(a: &GenDataArgs, seed: u64, jobs: usize) -> Result<()> {
    let mut rec = recorder("gen-data", a, seed, jobs)?;
    let file = load_graph(&a.graph, &mut rec)?;
    let noise: NoiseSpec = a.noise.parse().map_err(|e| usage(format!("--noise: {e}")))?;
    let mech = match a.mech {
        Mech::Linear => MechanismSpec::Linear {
            coef: parse_dist("coef", &a.coef)?,
        },
        Mech::Mlp => MechanismSpec::Mlp {
            depth: a.depth,
            width: a.width,
            activation: match a.activation {
                Act::Relu => Activation::Relu,
                Act::Tanh => Activation::Tanh,
            },
            init: parse_dist("init", &a.init)?,
        },
    };
    let (scm_seed, sample_seed) = (derive_seed(&[seed, 1]), derive_seed(&[seed, 2]));
    let scm = build_scm(&file.graph, mech, noise, scm_seed)?;
    let data = scm.sample(a.n, sample_seed)?;
    if let Some(p) = &a.params {
        let text = serde_json::to_string_pretty(&scm.parameters_json())? + "\n";
        write_file(p, &text)?;
        rec.output(p);
    }
    rec.extra(json!({ "scm_seed": scm_seed, "sample_seed": sample_seed }));
    emit(a.out.as_deref(), &data.to_csv(), rec)
}

fn named(g: &CausalGraph, vars: &[usize]) -> Vec<String> {
    vars.iter().map(|&v| g.name(v).to_string()).collect()
}

pub fn discover_cmd(a: &DiscoverArgs, seed: u64, jobs: usize) -> Result<()> {
    let mut rec = recorder("discover", a, seed, jobs)?;
    let test = ci_test(&a.source, seed, &mut rec)?;
    let vars = test.variables().to_vec();
    let mut prior = match &a.prior {
        Some(p) => {
            rec.input(p);
            let file = GraphFile::load(p).with_context(|| format!("loading prior {}", p.display()))?;
            PriorKnowledge::from_graph_file(&file, &vars)?
        }
        None => PriorKnowledge::default(),
    };
    if a.forbid_from_prior {
        if a.prior.is_none() {
            return Err(usage("--forbid-from-prior needs --prior <graph>"));
        }
        prior = prior.forbid_non_prior(vars.len());
    }
    let cfg = PcConfig {
        alpha: a.alpha,
        max_cond_size: a.max_cond.or(PcConfig::for_test(test.kind()).max_cond_size),
    };
    let out = discover(test.as_ref(), &cfg, &prior)?;
    let g = &out.graph;
    if let Some(path) = &a.report {
        let sepsets: Vec<Value> = out
            .skeleton
            .sepsets
            .iter()
            .map(|(&(x, y), s)| json!({ "x": g.name(x), "y": g.name(y), "sepset": named(g, s) }))
            .collect();
        let excluded: Vec<Value> = out
            .skeleton
            .excluded
            .iter()
            .map(|(&(x, y), s)| {
                json!({ "x": g.name(x), "y": g.name(y), "sepset": s.as_ref().map(|s| named(g, s)) })
            })
            .collect();
        let report = json!({
            "alpha": cfg.alpha,
            "max_cond_size": cfg.max_cond_size,
            "sepsets": sepsets,
            "excluded": excluded,
            "conflicts": out.conflicts,
        });
        write_file(path, &(serde_json::to_string_pretty(&report)? + "\n"))?;
        rec.output(path);
    }
    rec.extra(json!({ "n_conflicts": out.conflicts.len() }));
    emit(a.out.as_deref(), &GraphFile::new(&a.name, out.graph).to_json(), rec)
}

fn scores_csv(stages: &[(&str, &[EdgeScore])], g: &CausalGraph) -> String {
    let mut s = String::from("stage,x,y,witness,p_value\n");
    for (stage, scores) in stages {
        for e in *scores {
            let witness = named(g, &e.witness).join(";");
            s.push_str(&format!(
                "{stage},{},{},{},{}\n",
                csv_field(g.name(e.edge.0)),
                csv_field(g.name(e.edge.1)),
                csv_field(&witness),
                e.p_value
            ));
        }
    }
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn refine_cmd(a: &RefineArgs, seed: u64, jobs: usize) -> Result<()> {
    let mut rec = recorder("refine", a, seed, jobs)?;
    let file = load_graph(&a.graph, &mut rec)?;
    let test = ci_test(&a.source, seed, &mut rec)?;
    let resolver = match &a.prior {
        Some(p) => {
            rec.input(p);
            let prior = GraphFile::load(p).with_context(|| format!("loading prior {}", p.display()))?.graph;
            let mut dirs = Vec::new();
            for (u, v) in prior.directed_edges() {
                let (Ok(a), Ok(b)) = (file.graph.node_index(prior.name(u)), file.graph.node_index(prior.name(v)))
                else {
                    bail!("prior edge {} -> {} names a node outside the graph", prior.name(u), prior.name(v));
                };
                dirs.push((a, b));
            }
            DirectionResolver::new(dirs)
        }
        None => DirectionResolver::default(),
    };
    let mut g = enforce_acyclicity(&file.graph, &resolver);
    let mut added = Vec::new();
    if let Some(alpha) = a.expand {
        (g, added) = expand_edges(&g, test.as_ref(), alpha, &resolver)?;
    }
    let mut pruned = Vec::new();
    if a.prune > 0.0 {
        let cfg = PruneConfig {
            remove_fraction: a.prune,
            order: match a.order {
                Order::HighestPFirst => PruneOrder::HighestPFirst,
                Order::LowestPFirst => PruneOrder::LowestPFirst,
            },
        };
        (g, pruned) = prune_edges(&g, test.as_ref(), &cfg)?;
    }
    if let Some(path) = &a.scores {
        write_file(path, &scores_csv(&[("expand", &added), ("prune", &pruned)], &g))?;
        rec.output(path);
    }
    rec.extra(json!({ "added": added.len(), "scored_for_pruning": pruned.len() }));
    let mut out = GraphFile::new(&file.name, g);
    out.forbidden = file.forbidden;
    emit(a.out.as_deref(), &out.to_json(), rec)
}

pub fn prior_cmd(a: &PriorArgs, seed: u64, jobs: usize) -> Result<()> {
    let mut rec = recorder("prior", a, seed, jobs)?;
    let vars = load_graph(&a.vars, &mut rec)?;
    let (client, cfg) = llm_client(&a.llm);
    let nodes = vars.graph.nodes();
    let outcome = match a.strategy {
        Strategy::Pairwise => pairwise_prior(nodes, &client, a.llm.retries)?,
        Strategy::Bfs => bfs_prior(nodes, &client, a.llm.retries)?,
    };
    for f in &outcome.failures {
        eprintln!("warning: {}: {}", f.context, f.error);
    }
    if !outcome.unknown_names.is_empty() {
        eprintln!("warning: unknown names in responses: {}", outcome.unknown_names.join(", "));
    }
    let misses = outcome.failures.iter().filter(|f| f.error.starts_with("offline mode")).count();
    if misses > 0 {
        bail!("{misses} prompts have no cached response in {} (use --online to query the endpoint)", cfg.cache_dir.display());
    }
    rec.extra(json!({
        "model": cfg.model,
        "offline": cfg.offline,
        "requests": outcome.requests,
        "network_calls": client.network_calls(),
        "failures": outcome.failures,
        "unknown_names": outcome.unknown_names,
    }));
    let file = GraphFile::new(format!("{} prior", vars.name), outcome.graph);
    emit(a.out.as_deref(), &file.to_json(), rec)
}

pub fn memtest_cmd(a: &MemtestArgs, seed: u64, jobs: usize) -> Result<()> {
    let mut rec = recorder("memtest", a, seed, jobs)?;
    let file = load_graph(&a.graph, &mut rec)?;
    let (client, cfg) = llm_client(&a.llm);
    let name = a.dataset_name.clone().unwrap_or_else(|| file.name.clone());
    let kinds = match a.kind {
        Kind::M1 => vec![MemKind::M1],
        Kind::M2 => vec![MemKind::M2],
        Kind::M3 => vec![MemKind::M3],
        Kind::All => vec![MemKind::M1, MemKind::M2, MemKind::M3],
    };
    let mut results = Vec::new();
    for kind in kinds {
        let task = split_for_mem(&file.graph, &name, kind, a.fraction, seed);
        let prompt = render_mem_prompt(&task);
        let raw = client.complete(&prompt).with_context(|| format!("{kind} prompt"))?;
        let response = parse_mem_response(kind, &raw);
        let score = score_mem(&response, &task);
        let f1 = |p: Option<llmpc_core::llm::Prf>| p.map_or("-".to_string(), |p| format!("{:.3}", p.f1));
        eprintln!("{kind}: nodes F1 {}, edges F1 {}", f1(score.nodes), f1(score.edges));
        results.push(json!({ "task": task, "prompt": prompt, "response": response, "score": score }));
    }
    rec.extra(json!({ "model": cfg.model, "offline": cfg.offline, "network_calls": client.network_calls() }));
    let report = json!({ "dataset": name, "model": cfg.model, "results": results });
    emit(a.out.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"), rec)
}

pub fn evaluate_cmd(a: &EvaluateArgs, seed: u64, jobs: usize) -> Result<()> {
    let mut rec = recorder("evaluate", a, seed, jobs)?;
    let pred = load_graph(&a.pred, &mut rec)?;
    let truth = load_graph(&a.truth, &mut rec)?;
    let mode = match a.mode {
        Mode::DirectedStrict => MatchMode::DirectedStrict,
        Mode::Skeleton => MatchMode::Skeleton,
        Mode::CpdagAware => MatchMode::CpdagAware,
    };
    let report = edge_metrics(&pred.graph, &truth.graph, mode)?;
    let text = serde_json::to_string_pretty(&report)? + "\n";
    if let Some(path) = &a.out {
        write_file(path, &text)?;
        rec.output(path);
        rec.write(&manifest_path(path))?;
    }
    print!("{text}");
    Ok(())
}

pub fn stats_cmd(a: &StatsArgs) -> Result<()> {
    let mut rec = Recorder::new("stats", Value::Null, Value::Null);
    let file = load_graph(&a.graph, &mut rec)?;
    let s = graph_stats(&file.graph, a.unshielded);
    if a.json {
        println!("{}", serde_json::to_string_pretty(&s)?);
        return Ok(());
    }
    println!("nodes: {}, edges: {}", s.n_nodes, s.n_edges);
    let kind = if a.unshielded { "unshielded colliders" } else { "colliders" };
    println!("{kind}: {}", s.n_colliders);
    println!("in-degree min/median/max: {}/{}/{}", s.in_degree_min, s.in_degree_median, s.in_degree_max);
    match s.longest_directed_path {
        Some(k) => println!("longest directed path: {k}"),
        None => println!("longest directed path: undefined (cycle)"),
    }
    Ok(())
}

pub fn bench_cmd(a: &BenchArgs, seed: u64, jobs: usize) -> Result<()> {
    let mut rec = recorder("bench", a, seed, jobs)?;
    rec.input(&a.config);
    let cfg = BenchConfig::load(&a.config)?;
    let report = bench_matrix(&cfg)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let files = [
        ("runs.csv", report.runs_csv()),
        ("summary.csv", report.summary_csv()),
        ("table.md", report.markdown()),
        ("errors.json", serde_json::to_string_pretty(&report.errors_json())? + "\n"),
    ];
    for (name, text) in &files {
        let path = a.out_dir.join(name);
        write_file(&path, text)?;
        rec.output(&path);
    }
    let n_errors = report.errors().len();
    if n_errors > 0 {
        eprintln!("warning: {n_errors} runs failed; see errors.json");
    }
    rec.extra(json!({ "runs": report.rows.len(), "failed_runs": n_errors }));
    rec.write(&a.out_dir.join("bench.manifest.json"))?;
    print!("{}", report.markdown());
    Ok(())
}
