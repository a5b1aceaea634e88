//! Experiment building blocks shared by the subcommands and the acceptance suite.

use std::collections::HashMap;

use anyhow::{bail, Context, Result};
use commonspace::adapters::{
    finetune, train_reference, AdapterModel, Architecture, FinetuneData, FinetuneOutcome,
    MapperModel, TrainConfig, TrainTrace,
};
use commonspace::alignment::mean_squared_error;
use commonspace::selection::{
    bin_universe, compute_bins, principal_basis, project_onto_principal, BinnedUniverse,
};
use commonspace::synth::{Benchmark, Split, SubjectDataset};
use commonspace::Mat;
use serde::{Deserialize, Serialize};

/// Reference subject models plus the architecture they were trained with.
#[derive(Clone, Debug)]
pub struct Reference {
    pub subject_id: String,
    pub arch: Architecture,
    pub adapter: AdapterModel<f64>,
    pub mapper: MapperModel<f64>,
}

/// Rows used to train a subject from scratch: common then unique items.
pub fn training_rows(s: &SubjectDataset) -> Vec<usize> {
    let mut rows = s.rows(Split::Common);
    rows.extend(s.rows(Split::Unique));
    rows
}

pub fn targets_for(bench: &Benchmark, s: &SubjectDataset, rows: &[usize]) -> Result<Mat> {
    Ok(bench.targets.select_rows(&s.ids(rows))?)
}

pub fn train_reference_subject(
    bench: &Benchmark,
    subject_id: &str,
    arch: &Architecture,
    cfg: &TrainConfig,
) -> Result<(Reference, TrainTrace)> {
    let s = bench.subject(subject_id)?;
    let rows = training_rows(s);
    let x = s.embeddings.select_rows(&rows)?;
    let t = targets_for(bench, s, &rows)?;
    let (adapter, mapper, trace) = train_reference(&x, &t, arch, cfg)?;
    Ok((
        Reference {
            subject_id: subject_id.to_string(),
            arch: arch.clone(),
            adapter,
            mapper,
        },
        trace,
    ))
}

/// MSE of `mapper(adapter(X))` against the targets of `split` items.
pub fn output_mse(
    bench: &Benchmark,
    s: &SubjectDataset,
    a: &AdapterModel<f64>,
    m: &MapperModel<f64>,
    split: Split,
) -> Result<f64> {
    let rows = s.rows(split);
    if rows.is_empty() {
        bail!("subject {} has no {} items", s.subject_id, split.as_str());
    }
    let pred = m.forward(&a.forward(&s.embeddings.select_rows(&rows)?)?)?;
    Ok(mean_squared_error(&pred, &targets_for(bench, s, &rows)?)?)
}

/// Common item ids shared by every subject, in the reference subject's row order.
pub fn common_ids(bench: &Benchmark, reference: &str) -> Result<Vec<usize>> {
    let r = bench.subject(reference)?;
    Ok(r.ids(&r.rows(Split::Common)))
}

/// Embeddings of `ids` for subject `s`, in the order given.
pub fn rows_for_ids(s: &SubjectDataset, ids: &[usize]) -> Result<Vec<usize>> {
    let pos: HashMap<usize, usize> = s
        .item_ids
        .iter()
        .enumerate()
        .map(|(r, &id)| (id, r))
        .collect();
    ids.iter()
        .map(|id| {
            pos.get(id)
                .copied()
                .with_context(|| format!("subject {} never saw item {id}", s.subject_id))
        })
        .collect()
}

/// Reference adapter outputs on the common items, the selection universe.
pub fn reference_common_space(bench: &Benchmark, reference: &Reference) -> Result<Mat> {
    let r = bench.subject(&reference.subject_id)?;
    let rows = rows_for_ids(r, &common_ids(bench, &reference.subject_id)?)?;
    Ok(reference
        .adapter
        .forward(&r.embeddings.select_rows(&rows)?)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub d: usize,
    pub w: usize,
    pub singular_values: Vec<f64>,
    pub bin_counts: Vec<usize>,
    pub skipped_dims: Vec<usize>,
}

/// Projects common-space embeddings onto the reference weight's leading directions and bins them.
pub fn build_universe(
    z: &Mat,
    reference: &AdapterModel<f64>,
    d: usize,
    w: usize,
) -> Result<(BinnedUniverse, Binning, Mat)> {
    let weight = reference.common_space_weight();
    let (_, s) = principal_basis(&weight, d)?;
    let bins = compute_bins(&s, w)?;
    let proj = project_onto_principal(z, &weight, d)?;
    let u = bin_universe(&proj, &bins)?;
    let binning = Binning {
        d,
        w,
        singular_values: s,
        bin_counts: bins,
        skipped_dims: u.skipped_dims.clone(),
    };
    Ok((u, binning, proj))
}

/// What a new subject is fine-tuned on.
#[derive(Clone, Debug)]
pub struct AlignPlan {
    pub subject_id: String,
    /// Positions into the common item list used for training.
    pub commons: Vec<usize>,
    pub include_unique: bool,
    pub cfg: TrainConfig,
}

#[derive(Clone, Debug, Serialize)]
pub struct AlignMetrics {
    pub train_items: usize,
    pub train_commons: usize,
    pub test_output_mse: f64,
    /// Adapter output vs reference adapter output, over every common item.
    pub common_adapter_mse: f64,
    pub final_train_output_mse: Option<f64>,
    pub stage1_adapter_mse: Option<f64>,
}

pub struct Aligned {
    pub outcome: FinetuneOutcome<f64>,
    pub metrics: AlignMetrics,
}

pub fn align_subject(
    bench: &Benchmark,
    reference: &Reference,
    plan: &AlignPlan,
) -> Result<Aligned> {
    let s = bench.subject(&plan.subject_id)?;
    let all_common = common_ids(bench, &reference.subject_id)?;
    if let Some(&bad) = plan.commons.iter().find(|&&i| i >= all_common.len()) {
        bail!(
            "common index {bad} outside the {} common items",
            all_common.len()
        );
    }
    let ids: Vec<usize> = plan.commons.iter().map(|&i| all_common[i]).collect();
    let mut rows = rows_for_ids(s, &ids)?;
    if plan.include_unique {
        rows.extend(s.rows(Split::Unique));
    }
    if rows.is_empty() {
        bail!("no training items for subject {}", plan.subject_id);
    }
    let z_ref = reference_common_space(bench, reference)?;
    let data = FinetuneData {
        x: s.embeddings.select_rows(&rows)?,
        targets: targets_for(bench, s, &rows)?,
        common_rows: (0..ids.len()).collect(),
        reference_common: if ids.is_empty() {
            None
        } else {
            Some(z_ref.select_rows(&plan.commons)?)
        },
    };
    let outcome = finetune(&data, &reference.mapper, &reference.arch, &plan.cfg)?;
    let common_rows = rows_for_ids(s, &all_common)?;
    let z_new = outcome
        .adapter
        .forward(&s.embeddings.select_rows(&common_rows)?)?;
    let metrics = AlignMetrics {
        train_items: rows.len(),
        train_commons: ids.len(),
        test_output_mse: output_mse(bench, s, &outcome.adapter, &outcome.mapper, Split::Test)?,
        common_adapter_mse: mean_squared_error(&z_new, &z_ref)?,
        final_train_output_mse: outcome.trace.final_output_mse,
        stage1_adapter_mse: outcome.stage1.as_ref().and_then(|t| t.final_adapter_mse),
    };
    Ok(Aligned { outcome, metrics })
}
