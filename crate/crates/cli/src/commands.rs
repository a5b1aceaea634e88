//! One function per subcommand.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use commonspace::adapters::{
    adapter_from_json, adapter_to_json, mapper_from_json, mapper_to_json, Architecture, TrainConfig,
};
use commonspace::alignment::{AlignmentReport, ReportOptions};
use commonspace::selection::{
    coverage_permutation_test, extreme_items, greedy_select, Termination,
};
use commonspace::synth::{generate_benchmark, Benchmark, SynthConfig};
use commonspace::Mat;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::*;
use crate::pipeline::{
    align_subject, build_universe, common_ids, output_mse, reference_common_space, rows_for_ids,
    train_reference_subject, AlignPlan, Reference,
};
use crate::report::{digest_bytes, digest_path, Report};
use crate::UsageError;

/// Everything a command needs besides its own arguments.
pub struct RunContext<'a> {
    pub argv: &'a [String],
    pub global: &'a Global,
    pub config: Value,
    pub started: Instant,
}

fn require_out(g: &Global) -> Result<&Path> {
    g.out
        .as_deref()
        .ok_or_else(|| UsageError("--out is required for this command".into()).into())
}

fn write(path: &Path, text: &str, outputs: &mut BTreeMap<String, String>) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    outputs.insert(name, digest_bytes(text.as_bytes()));
    Ok(())
}

fn load_bench(path: &Path) -> Result<Benchmark> {
    if !path.is_dir() {
        bail!("benchmark directory {} does not exist", path.display());
    }
    Benchmark::load(path).with_context(|| format!("loading benchmark from {}", path.display()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

#[derive(Debug, Serialize, Deserialize)]
struct ReferenceMeta {
    subject_id: String,
    architecture: Architecture,
}

fn load_reference(dir: &Path) -> Result<Reference> {
    let meta: ReferenceMeta = serde_json::from_str(&read(&dir.join("reference.json"))?)
        .with_context(|| format!("parsing {}", dir.join("reference.json").display()))?;
    let adapter = adapter_from_json(&read(&dir.join("adapter.json"))?)
        .with_context(|| format!("parsing {}", dir.join("adapter.json").display()))?;
    let mapper = mapper_from_json(&read(&dir.join("mapper.json"))?)
        .with_context(|| format!("parsing {}", dir.join("mapper.json").display()))?;
    Ok(Reference {
        subject_id: meta.subject_id,
        arch: meta.architecture,
        adapter,
        mapper,
    })
}

fn inputs(paths: &[(&str, &Path)]) -> Result<BTreeMap<String, String>> {
    paths
        .iter()
        .map(|(k, p)| Ok((k.to_string(), digest_path(p)?)))
        .collect()
}

fn finish(
    ctx: &RunContext,
    metrics: Value,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    report_path: Option<&Path>,
) -> Result<()> {
    let report = Report {
        command: ctx.argv.to_vec(),
        config: ctx.config.clone(),
        seed: ctx.global.seed,
        metrics,
        inputs,
        outputs,
        wall_clock_secs: ctx.started.elapsed().as_secs_f64(),
    };
    let text = report.to_json()?;
    match report_path {
        Some(p) => fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    if report_path.is_some() && !ctx.global.quiet {
        println!("{}", serde_json::to_string_pretty(&report.metrics)?);
    }
    Ok(())
}

pub fn simulate(ctx: &RunContext, a: &SimulateArgs) -> Result<()> {
    let out = require_out(ctx.global)?;
    let mut cfg = match a.preset {
        Preset::Standard => SynthConfig::standard(),
        Preset::StandardOrthogonal => SynthConfig::standard_orthogonal(),
    };
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = a.$f { cfg.$f = v; })* };
    }
    set!(
        n_subjects,
        n_common,
        n_unique,
        n_test,
        latent_dim,
        subject_dim,
        target_dim,
        noise_sigma,
        n_categories
    );
    if let Some(t) = a.transform {
        cfg.transform = t.into();
    }
    if let Some(s) = ctx.global.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    let bench = generate_benchmark(&cfg)?;
    bench
        .save(out)
        .with_context(|| format!("writing benchmark to {}", out.display()))?;
    let outputs = BTreeMap::from([("benchmark".to_string(), digest_path(out)?)]);
    let metrics = json!({
        "synth_config": cfg,
        "subjects": bench.subjects.len(),
        "items_per_subject": cfg.items_per_subject(),
        "total_items": cfg.total_items(),
    });
    finish(
        ctx,
        metrics,
        BTreeMap::new(),
        outputs,
        Some(&out.join("report.json")),
    )
}

pub fn train_reference(ctx: &RunContext, a: &TrainReferenceArgs) -> Result<()> {
    let out = require_out(ctx.global)?;
    let bench = load_bench(&a.data)?;
    let arch = Architecture {
        adapter_kind: a.arch.adapter_kind,
        common_dim: a.arch.common_dim,
        adapter_hidden: a.arch.adapter_hidden,
        mapper_hidden: a.arch.mapper_hidden,
        residual: a.arch.residual,
    };
    let cfg = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.lr,
        seed: ctx.global.seed.unwrap_or(0),
        ..Default::default()
    };
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    let (reference, trace) = train_reference_subject(&bench, &a.subject, &arch, &cfg)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut outputs = BTreeMap::new();
    write(
        &out.join("adapter.json"),
        &adapter_to_json(&reference.adapter),
        &mut outputs,
    )?;
    write(
        &out.join("mapper.json"),
        &mapper_to_json(&reference.mapper),
        &mut outputs,
    )?;
    write(&out.join("trace.csv"), &trace.to_csv(), &mut outputs)?;
    let meta = ReferenceMeta {
        subject_id: a.subject.clone(),
        architecture: arch,
    };
    write(
        &out.join("reference.json"),
        &(serde_json::to_string_pretty(&meta)? + "\n"),
        &mut outputs,
    )?;
    let s = bench.subject(&a.subject)?;
    let metrics = json!({
        "train_config": cfg,
        "architecture": meta.architecture,
        "epochs_run": trace.records.len(),
        "final_output_mse": trace.final_output_mse,
        "test_output_mse": output_mse(&bench, s, &reference.adapter, &reference.mapper, commonspace::synth::Split::Test)?,
    });
    finish(
        ctx,
        metrics,
        inputs(&[("data", &a.data)])?,
        outputs,
        Some(&out.join("report.json")),
    )
}

/// Selection artifact: the greedy result plus the binning it ran on.
#[derive(Debug, Serialize, Deserialize)]
pub struct SelectionFile {
    pub chosen: Vec<usize>,
    pub gap_trace: Vec<usize>,
    pub empty_total: usize,
    pub empty_uncoverable: usize,
    pub termination: Termination,
    pub saturated_after: Option<usize>,
    pub d: usize,
    pub w: usize,
    pub bin_counts: Vec<usize>,
    pub skipped_dims: Vec<usize>,
    pub singular_values: Vec<f64>,
    pub universe_size: usize,
    pub reference_subject: String,
    /// Global ids of `chosen`.
    pub item_ids: Vec<usize>,
    pub inputs: BTreeMap<String, String>,
}

pub fn load_selection(path: &Path) -> Result<SelectionFile> {
    serde_json::from_str(&read(path)?)
        .with_context(|| format!("parsing selection {}", path.display()))
}

pub fn align(ctx: &RunContext, a: &AlignArgs) -> Result<()> {
    let out = require_out(ctx.global)?;
    let bench = load_bench(&a.data)?;
    let reference = load_reference(&a.reference)?;
    let n_common = common_ids(&bench, &reference.subject_id)?.len();
    let mut inputs_ = inputs(&[("data", &a.data), ("reference", &a.reference)])?;
    let mut commons: Vec<usize> = match &a.select {
        Some(p) => {
            let sel = load_selection(p)?;
            if sel.universe_size != n_common {
                bail!(
                    "selection {} was made over {} items, benchmark has {n_common} common items",
                    p.display(),
                    sel.universe_size
                );
            }
            if let Some(&bad) = sel.chosen.iter().find(|&&i| i >= n_common) {
                bail!(
                    "selection {} lists index {bad} outside {n_common} common items",
                    p.display()
                );
            }
            inputs_.insert("selection".into(), digest_path(p)?);
            sel.chosen
        }
        None => (0..n_common).collect(),
    };
    if let Some(limit) = a.common_limit {
        commons.truncate(limit);
    }
    let cfg = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.lr,
        lambda3: a.lambda3,
        stage1_epochs: a.stage1_epochs,
        stage1_learning_rate: a.stage1_lr,
        stage1_tolerance: a.stage1_tolerance,
        seed: ctx.global.seed.unwrap_or(0),
        mode: a.mode,
    };
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    let plan = AlignPlan {
        subject_id: a.subject.clone(),
        commons,
        include_unique: a.include_unique,
        cfg,
    };
    let aligned = align_subject(&bench, &reference, &plan)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut outputs = BTreeMap::new();
    let o = &aligned.outcome;
    write(
        &out.join("adapter.json"),
        &adapter_to_json(&o.adapter),
        &mut outputs,
    )?;
    write(
        &out.join("mapper.json"),
        &mapper_to_json(&o.mapper),
        &mut outputs,
    )?;
    write(&out.join("trace.csv"), &o.trace.to_csv(), &mut outputs)?;
    if let Some(s1) = &o.stage1 {
        write(&out.join("stage1_trace.csv"), &s1.to_csv(), &mut outputs)?;
    }
    let metrics = json!({
        "train_config": plan.cfg,
        "mode": a.mode.as_str(),
        "subject": a.subject,
        "reference_subject": reference.subject_id,
        "selection_digest": inputs_.get("selection"),
        "results": aligned.metrics,
    });
    finish(
        ctx,
        metrics,
        inputs_,
        outputs,
        Some(&out.join("report.json")),
    )
}

pub fn select(ctx: &RunContext, a: &SelectArgs) -> Result<()> {
    let bench = load_bench(&a.data)?;
    let reference = load_reference(&a.reference)?;
    if a.dims == 0 || a.dims > reference.arch.common_dim {
        return Err(UsageError(format!(
            "--dims must be in 1..={}",
            reference.arch.common_dim
        ))
        .into());
    }
    if a.w == 0 || a.budget == Some(0) {
        return Err(UsageError("--w and --budget must be positive".into()).into());
    }
    let z = reference_common_space(&bench, &reference)?;
    let (u, binning, _) = build_universe(&z, &reference.adapter, a.dims, a.w)?;
    let r = greedy_select(&u, a.budget)?;
    let ids = common_ids(&bench, &reference.subject_id)?;
    let file = SelectionFile {
        item_ids: r.chosen.iter().map(|&i| ids[i]).collect(),
        chosen: r.chosen,
        gap_trace: r.gap_trace,
        empty_total: r.empty_total,
        empty_uncoverable: r.empty_uncoverable,
        termination: r.termination,
        saturated_after: r.saturated_after,
        d: binning.d,
        w: binning.w,
        bin_counts: binning.bin_counts,
        skipped_dims: binning.skipped_dims,
        singular_values: binning.singular_values,
        universe_size: u.items(),
        reference_subject: reference.subject_id.clone(),
        inputs: inputs(&[("data", &a.data), ("reference", &a.reference)])?,
    };
    let text = serde_json::to_string_pretty(&file)? + "\n";
    match &ctx.global.out {
        Some(p) => {
            fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?;
            if !ctx.global.quiet {
                println!(
                    "selected {} of {} items; empty bins {} (uncoverable {}); {}",
                    file.chosen.len(),
                    file.universe_size,
                    file.empty_total,
                    file.empty_uncoverable,
                    file.termination.as_str()
                );
            }
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn common_embeddings(
    bench: &Benchmark,
    id: &str,
    ids: &[usize],
    adapter: Option<&PathBuf>,
) -> Result<Mat> {
    let s = bench.subject(id)?;
    let x = s.embeddings.select_rows(&rows_for_ids(s, ids)?)?;
    match adapter {
        None => Ok(x),
        Some(p) => {
            let a = adapter_from_json::<f64>(&read(p)?)
                .with_context(|| format!("parsing {}", p.display()))?;
            Ok(a.forward(&x)
                .with_context(|| format!("applying {} to subject {id}", p.display()))?)
        }
    }
}

pub fn metrics(ctx: &RunContext, a: &MetricsArgs) -> Result<()> {
    let bench = load_bench(&a.data)?;
    for (id, _) in &a.adapters {
        if !a.subjects.contains(id) {
            return Err(UsageError(format!(
                "--adapter given for subject {id} not listed in --subjects"
            ))
            .into());
        }
    }
    let ids = common_ids(&bench, &a.subjects[0])?;
    let mut mats = Vec::with_capacity(a.subjects.len());
    let mut paths: Vec<(String, PathBuf)> = vec![("data".into(), a.data.clone())];
    for id in &a.subjects {
        let adapter = a.adapters.iter().find(|(s, _)| s == id).map(|(_, p)| p);
        if let Some(p) = adapter {
            paths.push((format!("adapter_{id}"), p.clone()));
        }
        mats.push(common_embeddings(&bench, id, &ids, adapter)?);
    }
    let refs: Vec<&Mat> = mats.iter().collect();
    let opts = ReportOptions {
        knn_k: a.knn_k,
        eig_k: a.eig_k,
        center: a.center,
    };
    let report = AlignmentReport::build(&a.subjects, &refs, opts)?;
    let input_refs: Vec<(&str, &Path)> = paths
        .iter()
        .map(|(k, p)| (k.as_str(), p.as_path()))
        .collect();
    let out = ctx.global.out.as_deref();
    finish(
        ctx,
        serde_json::to_value(&report)?,
        inputs(&input_refs)?,
        BTreeMap::new(),
        out,
    )
}

pub fn coverage_test(ctx: &RunContext, a: &CoverageTestArgs) -> Result<()> {
    if a.trials == 0 {
        return Err(UsageError("--trials must be >= 1".into()).into());
    }
    let bench = load_bench(&a.data)?;
    let reference = load_reference(&a.reference)?;
    let sel = load_selection(&a.selection)?;
    let z = reference_common_space(&bench, &reference)?;
    if sel.universe_size != z.rows() {
        bail!(
            "selection {} was made over {} items, benchmark has {} common items",
            a.selection.display(),
            sel.universe_size,
            z.rows()
        );
    }
    let (u, binning, _) = build_universe(&z, &reference.adapter, sel.d, sel.w)?;
    if binning.bin_counts != sel.bin_counts {
        bail!(
            "selection {} was binned differently from this reference",
            a.selection.display()
        );
    }
    let subset_size = a.subset_size.unwrap_or(sel.chosen.len());
    let t = coverage_permutation_test(
        &u,
        &sel.chosen,
        subset_size,
        a.trials,
        ctx.global.seed.unwrap_or(0),
    )?;
    let metrics = json!({
        "test": t,
        "selected_size": sel.chosen.len(),
        "empty_uncoverable": u.empty_uncoverable(),
        "total_bins": u.total_bins(),
        "below_mean_minus_3sd": (t.selected_empty as f64) < t.random_mean - 3.0 * t.random_std,
    });
    let out = ctx.global.out.as_deref();
    let inp = inputs(&[
        ("data", &a.data),
        ("reference", &a.reference),
        ("selection", &a.selection),
    ])?;
    finish(ctx, metrics, inp, BTreeMap::new(), out)
}

pub fn extremes(ctx: &RunContext, a: &ExtremesArgs) -> Result<()> {
    if a.dim >= a.dims {
        return Err(UsageError(format!("--dim {} must be below --dims {}", a.dim, a.dims)).into());
    }
    let bench = load_bench(&a.data)?;
    let reference = load_reference(&a.reference)?;
    if a.dims > reference.arch.common_dim {
        return Err(UsageError(format!(
            "--dims must be at most {}",
            reference.arch.common_dim
        ))
        .into());
    }
    let z = reference_common_space(&bench, &reference)?;
    let ids = common_ids(&bench, &reference.subject_id)?;
    let (_, _, proj) = build_universe(&z, &reference.adapter, a.dims, 1)?;
    let (top, bottom) = extreme_items(&proj, a.dim, a.count)?;
    let metrics = json!({
        "dim": a.dim,
        "dims": a.dims,
        "count": a.count,
        "top_item_ids": top.iter().map(|&i| ids[i]).collect::<Vec<_>>(),
        "bottom_item_ids": bottom.iter().map(|&i| ids[i]).collect::<Vec<_>>(),
        "top_values": top.iter().map(|&i| proj[(i, a.dim)]).collect::<Vec<_>>(),
        "bottom_values": bottom.iter().map(|&i| proj[(i, a.dim)]).collect::<Vec<_>>(),
    });
    let out = ctx.global.out.as_deref();
    finish(
        ctx,
        metrics,
        inputs(&[("data", &a.data), ("reference", &a.reference)])?,
        BTreeMap::new(),
        out,
    )
}
