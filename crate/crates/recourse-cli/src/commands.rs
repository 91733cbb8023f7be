//! Subcommand implementations. Every command is deterministic given its
//! configuration (wall-clock timings in `bench` aside) and writes fresh
//! CSV files into the run's output directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use nalgebra::{DMatrix, DVector};

use recourse_core::classifier::{self, MlpModel, TrainConfig};
use recourse_core::data::{
    encode_dataset, fit_scaler, load_csv, split, synth_2d, synth_schema, Dataset, FeatureSchema,
    RawValue, SplitConfig,
};
use recourse_core::geometry::{directions, eigenbasis_from_directions, DistanceKind, DistanceVector, SimilaritySource};
use recourse_core::graph::{build_graph, load_graph, pairwise_distance_quantile, save_graph, ActionGraph};
use recourse_core::interpolate::{
    plan_graph, plan_linear, RecoursePlan, Selector, SelectorParams,
};
use recourse_core::metrics;
use recourse_core::quad;

use crate::config::{path_str, DataSource, Mode, RunConfig};

pub struct Prepared {
    pub schema: FeatureSchema,
    pub train: Dataset,
    pub test: Dataset,
}

pub fn prepare_data(config: &RunConfig) -> Result<Prepared> {
    let (raw, schema) = match &config.data {
        DataSource::Synthetic { n, seed } => (synth_2d(*n, *seed), synth_schema()),
        DataSource::Csv {
            path,
            schema,
            label,
        } => {
            let schema = FeatureSchema::from_json_file(schema)?;
            let raw = load_csv(path, &schema, label)?;
            (raw, schema)
        }
    };
    let (train_raw, test_raw) = split(
        &raw,
        SplitConfig {
            train_fraction: config.split.train_fraction,
            seed: config.split.seed,
        },
    )?;
    let scaler = fit_scaler(&train_raw, &schema)?;
    let train = encode_dataset(&train_raw, &schema, &scaler);
    let test = encode_dataset(&test_raw, &schema, &scaler);
    Ok(Prepared {
        schema,
        train,
        test,
    })
}

fn load_model(config: &RunConfig) -> Result<MlpModel> {
    let path = config.model_path();
    MlpModel::load(&path)
        .with_context(|| format!("loading model {} (run `train` first)", path.display()))
}

fn unfavorable_instances(prepared: &Prepared, model: &MlpModel, max: usize) -> Vec<DVector<f64>> {
    (0..prepared.test.len())
        .map(|i| prepared.test.instance(i))
        .filter(|x| model.predict_label(x).unwrap_or(1) == 0)
        .take(max)
        .collect()
}

fn favorable_train_matrix(prepared: &Prepared, model: &MlpModel) -> DMatrix<f64> {
    let cols: Vec<usize> = (0..prepared.train.len())
        .filter(|&i| {
            model
                .predict_label(&prepared.train.instance(i))
                .unwrap_or(0)
                == 1
        })
        .collect();
    let mut m = DMatrix::zeros(prepared.train.x.nrows(), cols.len());
    for (c, &i) in cols.iter().enumerate() {
        m.set_column(c, &prepared.train.x.column(i));
    }
    m
}

pub fn cmd_train(config: &RunConfig) -> Result<()> {
    config.ensure_out_dir()?;
    let prepared = prepare_data(config)?;
    let mut dims = vec![prepared.schema.encoded_dim()];
    dims.extend_from_slice(&config.classifier.hidden);
    dims.push(1);
    let train_config = TrainConfig {
        learning_rate: config.classifier.learning_rate,
        epochs: config.classifier.epochs,
        batch_size: config.classifier.batch_size,
        seed: config.classifier.seed,
        l2_penalty: config.classifier.l2_penalty,
    };
    let model = classifier::train(&prepared.train, &dims, &train_config)?;
    let (accuracy, auc) = classifier::eval(&model, &prepared.test)?;
    model.save(config.model_path())?;

    let report = config.out.join("train_report.csv");
    let mut w = csv::Writer::from_path(&report)?;
    w.write_record(["dataset", "accuracy", "auc"])?;
    w.write_record([
        config.dataset_name(),
        accuracy.to_string(),
        auc.map(|a| a.to_string()).unwrap_or_default(),
    ])?;
    w.flush()?;
    println!(
        "trained {} -> {} (test accuracy {:.4}, auc {})",
        config.dataset_name(),
        path_str(&config.model_path()),
        accuracy,
        auc.map(|a| format!("{a:.4}")).unwrap_or_else(|| "undefined".into()),
    );
    Ok(())
}

pub fn cmd_synth(config: &RunConfig, n: usize, seed: u64) -> Result<()> {
    config.ensure_out_dir()?;
    let raw = synth_2d(n, seed);
    let csv_path = config.out.join("synthetic.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["x1", "x2", "label"])?;
    for (row, label) in raw.rows.iter().zip(&raw.labels) {
        let get = |v: &RawValue| match v {
            RawValue::Continuous(x) => x.to_string(),
            RawValue::Level(l) => l.to_string(),
        };
        w.write_record([get(&row[0]), get(&row[1]), label.to_string()])?;
    }
    w.flush()?;

    // companion schema so the file round-trips through the csv source
    let schema_path = config.out.join("schema.json");
    std::fs::write(
        &schema_path,
        r#"[
  {"name": "x1", "kind": "continuous", "mutable": true},
  {"name": "x2", "kind": "continuous", "mutable": true}
]
"#,
    )?;
    println!(
        "wrote {n} samples to {} (schema {})",
        path_str(&csv_path),
        path_str(&schema_path)
    );
    Ok(())
}

pub fn cmd_graph(config: &RunConfig) -> Result<()> {
    config.ensure_out_dir()?;
    let prepared = prepare_data(config)?;
    let model = load_model(config)?;
    let epsilon = match config.graph.epsilon {
        Some(e) => e,
        None => pairwise_distance_quantile(&prepared.train, config.graph.quantile)?,
    };
    let graph = build_graph(&prepared.train, &model, &prepared.schema, epsilon)?;
    save_graph(&graph, config.graph_path())?;
    let report = graph.report();
    println!(
        "built graph: {} nodes, {} edges, epsilon {:.6} -> {}",
        report.nodes,
        report.edges,
        report.epsilon,
        path_str(&config.graph_path())
    );
    Ok(())
}

enum Outcome {
    Planned(Box<RecoursePlan>),
    Skipped(String),
}

fn generate_plan(
    config: &RunConfig,
    x0: &DVector<f64>,
    prepared: &Prepared,
    model: &MlpModel,
    graph: Option<&ActionGraph>,
    selector: Selector,
    params: &SelectorParams,
) -> Outcome {
    let result = match config.mode {
        Mode::Linear => plan_linear(
            x0,
            &prepared.train,
            model,
            selector,
            params,
            &config.linear_params(),
        ),
        Mode::Graph => plan_graph(
            x0,
            graph.expect("graph mode supplies a graph"),
            model,
            selector,
            params,
        ),
    };
    match result {
        Ok(plan) => Outcome::Planned(Box::new(plan)),
        Err(e) => Outcome::Skipped(e.to_string()),
    }
}

struct InstanceRow {
    instance: usize,
    status: String,
    plan_metrics: Option<metrics::PlanMetrics>,
    path_metrics: Option<metrics::PathMetrics>,
}

fn evaluate_instances(
    config: &RunConfig,
    prepared: &Prepared,
    model: &MlpModel,
    graph: Option<&ActionGraph>,
    selector: Selector,
    params: &SelectorParams,
    inputs: &[DVector<f64>],
    mut on_plan: Option<&mut dyn FnMut(usize, &RecoursePlan)>,
) -> Result<Vec<InstanceRow>> {
    let positives = favorable_train_matrix(prepared, model);
    let mut rows = Vec::with_capacity(inputs.len());
    for (idx, x0) in inputs.iter().enumerate() {
        match generate_plan(config, x0, prepared, model, graph, selector, params) {
            Outcome::Planned(plan) => {
                let (plan_metrics, path_metrics) = match config.mode {
                    Mode::Linear => (
                        metrics::evaluate_linear_plan(&plan, model, &positives)?,
                        None,
                    ),
                    Mode::Graph => {
                        let (pm, path) = metrics::evaluate_graph_plan(
                            &plan,
                            model,
                            graph.expect("graph mode supplies a graph"),
                        )?;
                        (pm, Some(path))
                    }
                };
                if let Some(cb) = on_plan.as_deref_mut() {
                    cb(idx, &plan);
                }
                rows.push(InstanceRow {
                    instance: idx,
                    status: "ok".into(),
                    plan_metrics: Some(plan_metrics),
                    path_metrics,
                });
            }
            Outcome::Skipped(reason) => rows.push(InstanceRow {
                instance: idx,
                status: reason,
                plan_metrics: None,
                path_metrics: None,
            }),
        }
    }
    Ok(rows)
}

fn mean<I: Iterator<Item = f64>>(iter: I) -> Option<f64> {
    let values: Vec<f64> = iter.collect();
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn cmd_plan(config: &RunConfig, dump_trace: Option<PathBuf>) -> Result<()> {
    config.ensure_out_dir()?;
    let selector = config.selector()?;
    let prepared = prepare_data(config)?;
    let model = load_model(config)?;
    let graph_store;
    let graph = match config.mode {
        Mode::Graph => {
            graph_store = load_graph(config.graph_path()).with_context(|| {
                format!(
                    "loading graph {} (run `graph` first)",
                    config.graph_path().display()
                )
            })?;
            Some(&graph_store)
        }
        Mode::Linear => None,
    };
    let params = config.selector_params();
    let inputs = unfavorable_instances(&prepared, &model, config.max_instances);
    anyhow::ensure!(!inputs.is_empty(), "no unfavorably-predicted test instances");

    if let Some(trace_path) = &dump_trace {
        dump_quad_trace(config, &prepared, &model, graph, &inputs[0], trace_path)?;
    }

    let plans_path = config.out.join("plans.jsonl");
    let mut plans_file = BufWriter::new(File::create(&plans_path)?);
    let mut write_plan = |_: usize, plan: &RecoursePlan| {
        let record = serde_json::to_string(&plan.to_record()).expect("plan serializes");
        writeln!(plans_file, "{record}").expect("plan file writable");
    };
    let rows = evaluate_instances(
        config,
        &prepared,
        &model,
        graph,
        selector,
        &params,
        &inputs,
        Some(&mut write_plan),
    )?;

    let metrics_path = config.out.join("plan_metrics.csv");
    let mut w = csv::Writer::from_path(&metrics_path)?;
    let mut header = vec![
        "dataset",
        "method",
        "instance",
        "status",
        "cost",
        "valid",
        "anti_diversity",
        "dpp",
        "manifold_distance",
    ];
    if config.mode == Mode::Graph {
        header.extend(["shortest_path_cost", "path_diversity", "path_anti_diversity"]);
    }
    w.write_record(&header)?;
    let dataset = config.dataset_name();
    for row in &rows {
        let mut record = vec![
            dataset.clone(),
            config.method.clone(),
            row.instance.to_string(),
            row.status.clone(),
        ];
        match &row.plan_metrics {
            Some(m) => record.extend([
                m.cost.to_string(),
                u8::from(m.valid).to_string(),
                m.anti_diversity.to_string(),
                m.dpp.to_string(),
                m.manifold_distance.to_string(),
            ]),
            None => record.extend(std::iter::repeat_n(String::new(), 5)),
        }
        if config.mode == Mode::Graph {
            match &row.path_metrics {
                Some(p) => record.extend([
                    p.shortest_path_cost.to_string(),
                    fmt_opt(p.path_diversity),
                    fmt_opt(p.path_anti_diversity),
                ]),
                None => record.extend(std::iter::repeat_n(String::new(), 3)),
            }
        }
        w.write_record(&record)?;
    }

    // aggregate row over the scored instances
    let scored: Vec<&metrics::PlanMetrics> =
        rows.iter().filter_map(|r| r.plan_metrics.as_ref()).collect();
    let validity = mean(scored.iter().map(|m| f64::from(u8::from(m.valid))));
    let mut record = vec![
        dataset.clone(),
        config.method.clone(),
        "aggregate".to_string(),
        format!("{} ok, {} skipped", scored.len(), rows.len() - scored.len()),
        fmt_opt(mean(scored.iter().map(|m| m.cost))),
        fmt_opt(validity),
        fmt_opt(mean(scored.iter().map(|m| m.anti_diversity))),
        fmt_opt(mean(scored.iter().map(|m| m.dpp))),
        fmt_opt(mean(scored.iter().map(|m| m.manifold_distance))),
    ];
    if config.mode == Mode::Graph {
        let paths: Vec<&metrics::PathMetrics> =
            rows.iter().filter_map(|r| r.path_metrics.as_ref()).collect();
        record.extend([
            fmt_opt(mean(paths.iter().map(|p| p.shortest_path_cost))),
            fmt_opt(mean(paths.iter().filter_map(|p| p.path_diversity))),
            fmt_opt(mean(paths.iter().filter_map(|p| p.path_anti_diversity))),
        ]);
    }
    w.write_record(&record)?;
    w.flush()?;

    println!(
        "planned {} instances ({} skipped) -> {}, {}; aggregate validity {}",
        rows.len(),
        rows.len() - scored.len(),
        path_str(&metrics_path),
        path_str(&plans_path),
        validity.map(|v| format!("{v:.3}")).unwrap_or_else(|| "undefined".into()),
    );
    Ok(())
}

/// Writes the per-iteration screening trace of the first instance for the
/// quadratic methods.
fn dump_quad_trace(
    config: &RunConfig,
    prepared: &Prepared,
    model: &MlpModel,
    graph: Option<&ActionGraph>,
    x0: &DVector<f64>,
    path: &PathBuf,
) -> Result<()> {
    let selector = config.selector()?;
    if !matches!(selector, Selector::QuadBestResponse | Selector::QuadDualAscent) {
        anyhow::bail!("--dump-trace applies to quad-br and quad-da only");
    }
    anyhow::ensure!(
        config.weight > 0.0,
        "--dump-trace needs a positive weight (the zero-weight route is closed-form)"
    );
    // rebuild the selection problem exactly as the pipeline sees it
    let (candidates, d_values): (DMatrix<f64>, Vec<f64>) = match config.mode {
        Mode::Linear => {
            let m = favorable_train_matrix(prepared, model);
            let d = (0..m.ncols()).map(|i| (m.column(i) - x0).norm()).collect();
            (m, d)
        }
        Mode::Graph => {
            let g = graph.expect("graph mode supplies a graph");
            let attached = recourse_core::graph::attach_input(g, x0, model)?;
            let source = attached.input_node().expect("just attached");
            let sp = recourse_core::graph::shortest_paths(&attached, source);
            let ids: Vec<usize> = (0..attached.len())
                .filter(|&v| v != source && attached.nodes[v].label == 1 && sp.dist[v].is_finite())
                .collect();
            let mut m = DMatrix::zeros(x0.len(), ids.len());
            for (c, &v) in ids.iter().enumerate() {
                m.set_column(c, &attached.nodes[v].coords);
            }
            let d = ids.iter().map(|&v| sp.dist[v]).collect();
            (m, d)
        }
    };
    let dir = directions(x0, &candidates);
    let d: Vec<f64> = dir.kept().iter().map(|&i| d_values[i]).collect();
    let problem = quad::QuadProblem::new(
        SimilaritySource::Directions(dir.matrix().clone()),
        d,
        config.weight,
        config.k,
    )?;
    let m = config
        .rank
        .unwrap_or_else(|| dir.matrix().nrows().min(20))
        .clamp(1, dir.ncols());
    let basis = eigenbasis_from_directions(dir.matrix(), m)?;
    let trace = match selector {
        Selector::QuadBestResponse => quad::best_response(&problem, &basis, config.iterations)?,
        _ => quad::dual_ascent(&problem, &basis, config.iterations, config.step)?,
    };
    let file = File::create(path)?;
    trace.write_csv(BufWriter::new(file))?;
    println!("wrote screening trace to {}", path_str(path));
    Ok(())
}

pub fn cmd_pareto(config: &RunConfig, weights: &[f64]) -> Result<()> {
    config.ensure_out_dir()?;
    let prepared = prepare_data(config)?;
    let model = load_model(config)?;
    let graph_store;
    let graph = match config.mode {
        Mode::Graph => {
            graph_store = load_graph(config.graph_path())?;
            Some(&graph_store)
        }
        Mode::Linear => None,
    };
    let selector = config.selector()?;
    let inputs = unfavorable_instances(&prepared, &model, config.max_instances);
    anyhow::ensure!(!inputs.is_empty(), "no unfavorably-predicted test instances");

    let path = config.out.join("pareto.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["weight", "mean_cost", "mean_anti_diversity", "mean_dpp"])?;
    for &weight in weights {
        let mut params = config.selector_params();
        params.weight = weight;
        let rows = evaluate_instances(
            config, &prepared, &model, graph, selector, &params, &inputs, None,
        )?;
        let scored: Vec<&metrics::PlanMetrics> =
            rows.iter().filter_map(|r| r.plan_metrics.as_ref()).collect();
        w.write_record([
            weight.to_string(),
            fmt_opt(mean(scored.iter().map(|m| m.cost))),
            fmt_opt(mean(scored.iter().map(|m| m.anti_diversity))),
            fmt_opt(mean(scored.iter().map(|m| m.dpp))),
        ])?;
    }
    w.flush()?;
    println!("wrote {} rows to {}", weights.len(), path_str(&path));
    Ok(())
}

pub fn cmd_sweep_k(config: &RunConfig, ks: &[usize]) -> Result<()> {
    config.ensure_out_dir()?;
    let prepared = prepare_data(config)?;
    let model = load_model(config)?;
    let graph_store;
    let graph = match config.mode {
        Mode::Graph => {
            graph_store = load_graph(config.graph_path())?;
            Some(&graph_store)
        }
        Mode::Linear => None,
    };
    let selector = config.selector()?;
    let inputs = unfavorable_instances(&prepared, &model, config.max_instances);
    anyhow::ensure!(!inputs.is_empty(), "no unfavorably-predicted test instances");

    let path = config.out.join("sweep_k.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["k", "mean_anti_diversity", "mean_dpp", "status"])?;
    for &k in ks {
        let mut params = config.selector_params();
        params.k = k;
        let rows = evaluate_instances(
            config, &prepared, &model, graph, selector, &params, &inputs, None,
        )?;
        let scored: Vec<&metrics::PlanMetrics> =
            rows.iter().filter_map(|r| r.plan_metrics.as_ref()).collect();
        let status = if scored.is_empty() {
            rows.first()
                .map(|r| r.status.clone())
                .unwrap_or_else(|| "skipped".into())
        } else {
            format!("{} ok", scored.len())
        };
        w.write_record([
            k.to_string(),
            fmt_opt(mean(scored.iter().map(|m| m.anti_diversity))),
            fmt_opt(mean(scored.iter().map(|m| m.dpp))),
            status,
        ])?;
    }
    w.flush()?;
    println!("wrote {} rows to {}", ks.len(), path_str(&path));
    Ok(())
}

pub fn cmd_bench(config: &RunConfig, sizes: &[usize], reps: usize) -> Result<()> {
    config.ensure_out_dir()?;
    let path = config.out.join("bench.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["method", "n", "mean_seconds"])?;
    let k = config.k;
    let methods = [
        Selector::DppGreedy,
        Selector::DppLocalSearch,
        Selector::QuadBestResponse,
        Selector::QuadGreedy,
        Selector::QuadLocalSearch,
    ];
    for &n in sizes {
        let mut totals = vec![0.0f64; methods.len()];
        for rep in 0..reps {
            let (dir, d) = bench_instance(n, 1000 + rep as u64)?;
            let mut params = config.selector_params();
            params.k = k;
            for (mi, &selector) in methods.iter().enumerate() {
                let start = Instant::now();
                let sel = recourse_core::interpolate::select_prototypes(
                    &dir, &d, selector, &params,
                )?;
                totals[mi] += start.elapsed().as_secs_f64();
                anyhow::ensure!(sel.len() == k, "selector returned a short set");
            }
        }
        for (mi, selector) in methods.iter().enumerate() {
            w.write_record([
                selector.name().to_string(),
                n.to_string(),
                (totals[mi] / reps as f64).to_string(),
            ])?;
        }
    }
    w.flush()?;
    println!(
        "timed {} methods across {:?} ({} reps) -> {}",
        methods.len(),
        sizes,
        reps,
        path_str(&path)
    );
    Ok(())
}

fn bench_instance(
    n: usize,
    seed: u64,
) -> Result<(recourse_core::geometry::DirectionMatrix, DistanceVector)> {
    let raw = synth_2d(2 * n + 200, seed);
    let schema = synth_schema();
    let scaler = fit_scaler(&raw, &schema)?;
    let all = encode_dataset(&raw, &schema, &scaler);
    let mut pool = DMatrix::zeros(2, n);
    let mut c = 0;
    let mut x0 = None;
    for i in 0..all.len() {
        if all.y[i] == 1 && c < n {
            pool.set_column(c, &all.x.column(i));
            c += 1;
        } else if all.y[i] == 0 && x0.is_none() {
            x0 = Some(all.instance(i));
        }
    }
    anyhow::ensure!(c == n, "not enough favorable samples for n = {n}");
    let x0 = x0.context("no unfavorable sample in the synthetic pool")?;
    let dir = directions(&x0, &pool);
    let d = DistanceVector {
        values: dir
            .kept()
            .iter()
            .map(|&i| (pool.column(i) - &x0).norm())
            .collect(),
        kind: DistanceKind::Euclidean,
    };
    Ok((dir, d))
}
