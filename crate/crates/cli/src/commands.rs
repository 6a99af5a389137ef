use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use synthsearch::dataprep::{read_pinned_tsv, run_pipeline, write_outputs};
use synthsearch::eval::{evaluate_chunk, EvalAccumulator, EvalOptions};
use synthsearch::gateway::SyntheticUniverse;
use synthsearch::graph::{graph_to_json, route_to_dot, RouteLimits};
use synthsearch::search::{
    even_checkpoints, metrics_over_time, run_search, summarize, sweep as run_sweep, Axis, SearchSummary,
};
use synthsearch::stats::{mean, percentile};
use synthsearch::Normalizer;

use crate::config::{self, EvalConfig, GenUniverseConfig, PrepFileConfig, ReportConfig, SearchConfig, SweepConfig};
use crate::output::{OutDir, Provenance};
use crate::{CliError, Common};

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

pub fn eval_single(c: &Common) -> Result<(), CliError> {
    let ctx = config::load::<EvalConfig>(&c.config)?;
    let cfg = &ctx.config;
    let out = OutDir::create(&c.out, Provenance::new("eval-single", cfg))?;
    let handle = config::open_model(&cfg.model, &ctx)?;
    let samples = config::eval_samples(cfg.dataset.as_ref(), &handle, &ctx)?;
    if samples.is_empty() {
        return Err(CliError::Config("no evaluation samples".into()));
    }
    let oracle = cfg.oracle.as_ref().map(|o| config::open_oracle(o, &ctx)).transpose()?;
    let opts = EvalOptions {
        ks: cfg.ks.clone(),
        num_results: cfg.num_results,
        oracle: oracle.as_deref(),
        ..EvalOptions::default()
    };

    let pool = pool(c.workers)?;
    let chunk = samples.len().div_ceil(pool.current_num_threads() * 4).max(1);
    let parts: Vec<_> = pool.install(|| {
        samples
            .par_chunks(chunk)
            .map(|s| evaluate_chunk(handle.model.as_ref(), s, &opts))
            .collect()
    });
    let mut acc = EvalAccumulator::new(&cfg.ks);
    let mut error = None;
    for (a, e) in parts {
        acc.merge(&a);
        if error.is_none() {
            error = e;
        }
    }
    let report = acc.finish(
        handle.model.name(),
        cfg.num_results,
        oracle.is_some(),
        error.as_ref().map(|e| e.to_string()),
    );

    out.json("eval_report.json", &report)?;
    #[derive(Serialize)]
    struct Row {
        metric: String,
        value: f64,
    }
    let rows: Vec<Row> = report.rows().into_iter().map(|(metric, value)| Row { metric, value }).collect();
    out.csv("eval_report.csv", &rows)?;
    match error {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

#[derive(Debug, Serialize)]
struct MetricRow {
    target_index: usize,
    target: String,
    checkpoint_calls: f64,
    unique_calls: u64,
    wall_time_s: f64,
    step: usize,
    solved: bool,
    packing: usize,
    packing_running_max: usize,
}

pub fn search(c: &Common) -> Result<(), CliError> {
    let ctx = config::load::<SearchConfig>(&c.config)?;
    let cfg = &ctx.config;
    let out = OutDir::create(&c.out, Provenance::new("search", cfg))?;
    let handle = config::open_model(&cfg.model, &ctx)?;
    let inventory = config::open_inventory(cfg.inventory.as_ref(), &handle, &ctx)?;
    let targets = config::open_targets(cfg.targets.as_ref(), &handle, &ctx)?;
    let model = handle.model.as_ref();

    let per_target = |i: usize| -> Result<(SearchSummary, Vec<MetricRow>), CliError> {
        let t = &targets[i];
        let outcome = run_search(&cfg.algorithm, t, model, &inventory, &cfg.budget, cfg.num_results)?;
        let summary = summarize(&t.id, cfg.algorithm.name(), model.name(), &outcome, cfg.max_routes);
        out.text(&format!("traces/target_{i:04}.jsonl"), &outcome.trace.to_jsonl())?;

        let limits = RouteLimits {
            max_routes: cfg.max_routes,
            ..outcome.route_caps
        };
        let checkpoints = match cfg.budget.max_model_calls {
            Some(m) => (0..=cfg.checkpoints.max(1))
                .map(|k| m as f64 * k as f64 / cfg.checkpoints.max(1) as f64)
                .collect(),
            None => even_checkpoints(&outcome.trace, Axis::Calls, cfg.checkpoints),
        };
        let rows = metrics_over_time(&outcome.graph, &outcome.trace, Axis::Calls, &checkpoints, &limits)
            .into_iter()
            .map(|p| MetricRow {
                target_index: i,
                target: t.id.clone(),
                checkpoint_calls: p.checkpoint,
                unique_calls: p.unique_calls,
                wall_time_s: p.wall_time_s,
                step: p.step,
                solved: p.solved,
                packing: p.packing,
                packing_running_max: p.packing_running_max,
            })
            .collect();

        if cfg.dot_routes > 0 && outcome.solved() {
            for (r, route) in outcome.routes(cfg.dot_routes).iter().enumerate() {
                out.text(&format!("routes/target_{i:04}_route_{r:02}.dot"), &route_to_dot(&outcome.graph, route))?;
            }
        }
        if cfg.write_graphs {
            out.json(&format!("graphs/target_{i:04}.json"), &graph_to_json(&outcome.graph))?;
        }
        Ok((summary, rows))
    };

    let results: Vec<_> = pool(c.workers)?.install(|| (0..targets.len()).into_par_iter().map(per_target).collect());
    let mut summaries = Vec::with_capacity(results.len());
    let mut metrics = Vec::new();
    for r in results {
        let (s, m) = r?;
        summaries.push(s);
        metrics.extend(m);
    }
    let solved = summaries.iter().filter(|s| s.solved).count();
    log::info!("solved {solved}/{} targets", summaries.len());
    out.csv("summary.csv", &summaries)?;
    out.csv("metrics.csv", &metrics)
}

pub fn sweep(c: &Common) -> Result<(), CliError> {
    let ctx = config::load::<SweepConfig>(&c.config)?;
    let cfg = &ctx.config;
    let out = OutDir::create(&c.out, Provenance::new("sweep", cfg))?;
    let handle = config::open_model(&cfg.model, &ctx)?;
    let inventory = config::open_inventory(cfg.inventory.as_ref(), &handle, &ctx)?;
    let targets = config::open_targets(cfg.targets.as_ref(), &handle, &ctx)?;
    let results = pool(c.workers)?.install(|| {
        run_sweep(
            &cfg.algorithm,
            handle.model.as_ref(),
            &inventory,
            &targets,
            &cfg.grid,
            &cfg.budget,
            cfg.num_results,
            cfg.max_routes,
        )
    })?;

    #[derive(Serialize)]
    struct Row {
        rank: usize,
        index: usize,
        score: f64,
        solved: usize,
        median_packing: f64,
        mean_packing: f64,
        params: String,
    }
    let rows: Vec<Row> = results
        .iter()
        .enumerate()
        .map(|(rank, r)| Row {
            rank: rank + 1,
            index: r.index,
            score: r.score,
            solved: r.solved,
            median_packing: r.median_packing,
            mean_packing: r.mean_packing,
            params: serde_json::to_string(&r.params).expect("params serialize"),
        })
        .collect();
    out.csv("sweep.csv", &rows)?;
    out.json("sweep.json", &serde_json::json!({ "results": results }))
}

pub fn prep(c: &Common) -> Result<(), CliError> {
    let mut ctx = config::load::<PrepFileConfig>(&c.config)?;
    if let Some(s) = c.seed {
        ctx.config.rules.seed = s;
    }
    let cfg = &ctx.config;
    let prov = Provenance::new("prep", cfg);
    let n = Normalizer::default();
    let input = ctx.path(&cfg.input);
    let text = std::fs::read_to_string(&input).map_err(|e| CliError::io(&input, e))?;
    let pinned = match &cfg.pinned {
        Some(p) => {
            let p = ctx.path(p);
            let t = std::fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))?;
            read_pinned_tsv(&t, &n).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => BTreeMap::new(),
    };
    let result = pool(c.workers)?
        .install(|| run_pipeline(&text, &cfg.rules, &n, &pinned, None))
        .map_err(prep_err)?;
    write_outputs(&result, &c.out, &n, &prov.header_lines()).map_err(prep_err)?;
    let r = &result.report;
    log::info!("{} reactions in, {} survivors", r.input_count, r.survivors);
    Ok(())
}

fn prep_err(e: synthsearch::dataprep::DataprepError) -> CliError {
    match e {
        synthsearch::dataprep::DataprepError::Io { path, source } => CliError::Io { path, source },
        other => CliError::Config(other.to_string()),
    }
}

pub fn gen_universe(c: &Common) -> Result<(), CliError> {
    let mut ctx = config::load::<GenUniverseConfig>(&c.config)?;
    if let Some(s) = c.seed {
        ctx.config.universe.seed = s;
    }
    let cfg = &ctx.config;
    let out = OutDir::create(&c.out, Provenance::new("gen-universe", cfg))?;
    let u = SyntheticUniverse::generate(cfg.universe.clone())?;

    out.json("universe.json", &serde_json::json!({ "digest": u.digest(), "universe": u }))?;
    out.text("model.tsv", &u.to_model_tsv())?;
    let blocks: String = u.building_blocks.iter().map(|b| format!("{b}\n")).collect();
    out.text("inventory.smi", &blocks)?;
    let targets: String = u.targets.iter().map(|t| format!("{t}\n")).collect();
    out.text("targets.smi", &targets)?;
    let eval: String = u.eval_samples().iter().map(|(p, r)| format!("{}\t{}\n", p.id, r)).collect();
    out.text("eval.tsv", &eval)?;

    #[derive(Serialize)]
    struct Row<'a> {
        target: &'a str,
        solvable: bool,
        min_route_reactions: Option<u32>,
        route_count_bound: u64,
    }
    let rows: Vec<Row> = u
        .targets
        .iter()
        .map(|t| {
            let g = u.truth(t);
            Row {
                target: t,
                solvable: g.solvable,
                min_route_reactions: g.min_route_reactions,
                route_count_bound: g.route_count_bound,
            }
        })
        .collect();
    out.csv("ground_truth.csv", &rows)
}

#[derive(Debug, Deserialize)]
struct SummaryRow {
    solved: bool,
    time_to_solution_s: Option<f64>,
    calls_to_solution: Option<f64>,
    final_packing: f64,
}

fn read_summary(path: &std::path::Path) -> Result<Vec<SummaryRow>, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<Result<Vec<SummaryRow>, _>>()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn fmt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn report(c: &Common) -> Result<(), CliError> {
    let ctx = config::load::<ReportConfig>(&c.config)?;
    let cfg = &ctx.config;
    if cfg.percentiles.iter().any(|q| !(0.0..=100.0).contains(q)) {
        return Err(CliError::Config("percentiles must lie in [0, 100]".into()));
    }
    let out = OutDir::create(&c.out, Provenance::new("report", cfg))?;
    let runs: Vec<(String, Vec<SummaryRow>)> = cfg
        .runs
        .iter()
        .map(|r| Ok((r.label.clone(), read_summary(&ctx.path(&r.summary))?)))
        .collect::<Result<_, CliError>>()?;

    let mut header = vec!["run".to_string(), "metric".into(), "targets".into(), "solved".into(), "n".into()];
    header.extend(cfg.percentiles.iter().map(|q| format!("p{q}")));
    header.push("mean".into());
    let mut table = vec![header];
    type Pick = fn(&SummaryRow) -> Option<f64>;
    let metrics: [(&str, Pick); 3] = [
        ("time_to_solution_s", |r| r.time_to_solution_s.filter(|_| r.solved)),
        ("calls_to_solution", |r| r.calls_to_solution.filter(|_| r.solved)),
        ("final_packing", |r| Some(r.final_packing)),
    ];
    for (label, rows) in &runs {
        let solved = rows.iter().filter(|r| r.solved).count();
        for (name, pick) in metrics {
            let mut xs: Vec<f64> = rows.iter().filter_map(pick).collect();
            xs.sort_by(f64::total_cmp);
            let mut rec = vec![
                label.clone(),
                name.to_string(),
                rows.len().to_string(),
                solved.to_string(),
                xs.len().to_string(),
            ];
            rec.extend(cfg.percentiles.iter().map(|&q| fmt(percentile(&xs, q))));
            rec.push(fmt(mean(&xs)));
            table.push(rec);
        }
    }
    let mut body = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut body);
        for rec in &table {
            w.write_record(rec).map_err(|e| CliError::Config(e.to_string()))?;
        }
        w.flush().map_err(|e| CliError::io(&c.out, e))?;
    }
    out.text("percentiles.csv", &String::from_utf8(body).expect("csv is utf-8"))?;

    #[derive(Serialize)]
    struct SeriesRow<'a> {
        run: &'a str,
        axis: &'a str,
        x: f64,
        solved_fraction: f64,
    }
    let mut series = Vec::new();
    let axes: [(&str, Pick); 2] = [("calls", metrics[1].1), ("seconds", metrics[0].1)];
    let n = cfg.series_points.max(1);
    for (axis, pick) in axes {
        let end = runs
            .iter()
            .flat_map(|(_, rows)| rows.iter().filter_map(pick))
            .fold(0.0f64, f64::max);
        for (label, rows) in &runs {
            let values: Vec<f64> = rows.iter().filter_map(pick).collect();
            for k in 0..=n {
                let x = end * k as f64 / n as f64;
                let hit = values.iter().filter(|&&v| v <= x).count();
                series.push(SeriesRow {
                    run: label,
                    axis,
                    x,
                    solved_fraction: if rows.is_empty() { 0.0 } else { hit as f64 / rows.len() as f64 },
                });
            }
        }
    }
    out.csv("series.csv", &series)
}
