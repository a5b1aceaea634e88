//! Full-batch Adam training for the reference subject and the fine-tuning regimes.

use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adapters::grad::{loss, loss_and_gradients, AdapterTarget, LossBreakdown};
use crate::adapters::model::{AdapterKind, AdapterModel, MapperModel, Params};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const MAPPER_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    Baseline,
    Aamax,
    Step1Only,
    FrozenMapper,
}

impl TrainMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TrainMode::Baseline => "baseline",
            TrainMode::Aamax => "aamax",
            TrainMode::Step1Only => "step1_only",
            TrainMode::FrozenMapper => "frozen_mapper",
        }
    }
}

impl FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(TrainMode::Baseline),
            "aamax" => Ok(TrainMode::Aamax),
            "step1" | "step1_only" | "step1-only" => Ok(TrainMode::Step1Only),
            "frozen_mapper" | "frozen-mapper" => Ok(TrainMode::FrozenMapper),
            other => Err(Error::InvalidArgument(format!(
                "unknown training mode {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Weight of the adapter-level MSE on common items.
    pub lambda3: f64,
    pub stage1_epochs: usize,
    pub stage1_learning_rate: f64,
    /// Stage 1 stops as soon as the adapter MSE is at or below this.
    pub stage1_tolerance: f64,
    pub seed: u64,
    pub mode: TrainMode,
}

/// Reference pre-training settings; see [`TrainConfig::finetune`] for new subjects.
impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            learning_rate: 1e-2,
            lambda3: 1.0,
            stage1_epochs: 2000,
            stage1_learning_rate: 1e-2,
            stage1_tolerance: 1e-6,
            seed: 0,
            mode: TrainMode::Aamax,
        }
    }
}

impl TrainConfig {
    /// Fine-tuning settings for a new subject against a transferred mapper.
    pub fn finetune(mode: TrainMode) -> Self {
        Self {
            epochs: 300,
            learning_rate: 1e-3,
            mode,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        positive("learning_rate", self.learning_rate)?;
        positive("stage1_learning_rate", self.stage1_learning_rate)?;
        if !(self.lambda3 >= 0.0 && self.lambda3.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda3 must be >= 0, got {}",
                self.lambda3
            )));
        }
        if self.stage1_tolerance.is_nan() || self.stage1_tolerance < 0.0 {
            return Err(Error::InvalidArgument(
                "stage1_tolerance must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Network shapes shared by the reference and fine-tuned subjects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub adapter_kind: AdapterKind,
    pub common_dim: usize,
    /// Hidden width of the two-layer adapter; ignored by other kinds.
    pub adapter_hidden: usize,
    pub mapper_hidden: usize,
    /// `None` enables the residual exactly when common dim equals target dim.
    pub residual: Option<bool>,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            adapter_kind: AdapterKind::Linear,
            common_dim: 32,
            adapter_hidden: 64,
            mapper_hidden: 64,
            residual: None,
        }
    }
}

impl Architecture {
    pub fn init_adapter<T: Scalar>(&self, input_dim: usize, seed: u64) -> AdapterModel<T> {
        AdapterModel::init(
            self.adapter_kind,
            input_dim,
            self.common_dim,
            self.adapter_hidden,
            seed,
        )
    }

    pub fn init_mapper<T: Scalar>(&self, target_dim: usize, seed: u64) -> Result<MapperModel<T>> {
        MapperModel::init(
            self.common_dim,
            self.mapper_hidden,
            target_dim,
            self.residual,
            seed ^ MAPPER_SEED_SALT,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub total_loss: f64,
    pub output_mse: Option<f64>,
    pub adapter_mse: Option<f64>,
    /// Seconds since training started.
    pub elapsed_secs: f64,
}

/// Per-epoch losses, measured on the parameters each epoch starts from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<EpochRecord>,
    /// Loss of the returned parameters.
    pub final_total: Option<f64>,
    pub final_output_mse: Option<f64>,
    pub final_adapter_mse: Option<f64>,
}

impl TrainTrace {
    pub const CSV_HEADER: &'static str = "epoch,total_loss,output_mse,adapter_mse";

    /// Wall-clock stamps are left out so identical runs produce identical files.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{:?},{},{}\n",
                r.epoch,
                r.total_loss,
                opt(r.output_mse),
                opt(r.adapter_mse)
            ));
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

struct Adam<T> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: i32,
    lr: T,
}

impl<T: Scalar> Adam<T> {
    fn new<P: Params<T>>(model: &P, lr: f64) -> Self {
        let zeros: Vec<Vec<T>> = model
            .slices()
            .iter()
            .map(|s| vec![T::zero(); s.len()])
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
            lr: T::lit(lr),
        }
    }

    fn update<P: Params<T>>(&mut self, model: &mut P, grads: &P) {
        self.step += 1;
        let (b1, b2, eps) = (T::lit(BETA1), T::lit(BETA2), T::lit(ADAM_EPS));
        let c1 = T::one() - b1.powi(self.step);
        let c2 = T::one() - b2.powi(self.step);
        for (((p, g), m), v) in model
            .slices_mut()
            .into_iter()
            .zip(grads.slices())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= self.lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

fn finite_or_diverged<T: Scalar>(l: &LossBreakdown<T>, epoch: usize) -> Result<()> {
    if l.total.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged { epoch })
    }
}

/// Rows and targets for the adapter-level term.
#[derive(Clone, Copy, Debug)]
pub struct AdapterTerm<'a, T> {
    pub rows: &'a [usize],
    pub target: &'a Matrix<T>,
    pub lambda3: f64,
}

/// End-to-end full-batch Adam from the given starting parameters.
/// With `update_mapper = false` the mapper is used but never changed.
#[allow(clippy::too_many_arguments)]
pub fn train_end_to_end<T: Scalar>(
    mut adapter: AdapterModel<T>,
    mut mapper: MapperModel<T>,
    x: &Matrix<T>,
    t_out: &Matrix<T>,
    term: Option<AdapterTerm<'_, T>>,
    epochs: usize,
    learning_rate: f64,
    update_mapper: bool,
) -> Result<(AdapterModel<T>, MapperModel<T>, TrainTrace)> {
    let started = Instant::now();
    let target = term.map(|t| AdapterTarget {
        rows: t.rows,
        target: t.target,
    });
    let lambda3 = T::lit(term.map_or(0.0, |t| t.lambda3));
    let mut opt_a = Adam::new(&adapter, learning_rate);
    let mut opt_m = Adam::new(&mapper, learning_rate);
    let mut trace = TrainTrace::default();
    for epoch in 0..epochs {
        let (l, g) = loss_and_gradients(&adapter, Some(&mapper), x, t_out, target, lambda3)?;
        finite_or_diverged(&l, epoch)?;
        trace.records.push(EpochRecord {
            epoch,
            total_loss: l.total.as_f64(),
            output_mse: Some(l.output_mse.as_f64()),
            adapter_mse: target.map(|_| l.adapter_mse.as_f64()),
            elapsed_secs: started.elapsed().as_secs_f64(),
        });
        opt_a.update(&mut adapter, &g.adapter);
        if update_mapper {
            opt_m.update(
                &mut mapper,
                g.mapper.as_ref().expect("mapper gradients present"),
            );
        }
    }
    let l = loss(&adapter, Some(&mapper), x, t_out, target, lambda3)?;
    finite_or_diverged(&l, epochs)?;
    trace.final_total = Some(l.total.as_f64());
    trace.final_output_mse = Some(l.output_mse.as_f64());
    trace.final_adapter_mse = target.map(|_| l.adapter_mse.as_f64());
    Ok((adapter, mapper, trace))
}

/// Trains a fresh adapter and mapper on one subject with output MSE only.
pub fn train_reference<T: Scalar>(
    x: &Matrix<T>,
    targets: &Matrix<T>,
    arch: &Architecture,
    cfg: &TrainConfig,
) -> Result<(AdapterModel<T>, MapperModel<T>, TrainTrace)> {
    cfg.validate()?;
    if targets.rows() != x.rows() {
        return Err(Error::shape(
            "train_reference",
            format!("{} inputs vs {} targets", x.rows(), targets.rows()),
        ));
    }
    let adapter = arch.init_adapter(x.cols(), cfg.seed);
    let mapper = arch.init_mapper(targets.cols(), cfg.seed)?;
    train_end_to_end(
        adapter,
        mapper,
        x,
        targets,
        None,
        cfg.epochs,
        cfg.learning_rate,
        true,
    )
}

/// Fits `adapter` to the reference subject's common-space outputs, adapter only.
/// Stops after `stage1_epochs` or once the MSE reaches `stage1_tolerance`.
pub fn align_adapter_stage1<T: Scalar>(
    mut adapter: AdapterModel<T>,
    x_common: &Matrix<T>,
    reference_outputs: &Matrix<T>,
    cfg: &TrainConfig,
) -> Result<(AdapterModel<T>, TrainTrace)> {
    cfg.validate()?;
    if x_common.rows() != reference_outputs.rows() {
        return Err(Error::shape(
            "align_adapter_stage1",
            format!(
                "{} common inputs vs {} reference rows",
                x_common.rows(),
                reference_outputs.rows()
            ),
        ));
    }
    let started = Instant::now();
    let tol = T::lit(cfg.stage1_tolerance.min(f64::MAX));
    let mut opt = Adam::new(&adapter, cfg.stage1_learning_rate);
    let mut trace = TrainTrace::default();
    let mut current = None;
    for epoch in 0..cfg.stage1_epochs {
        let (l, g) =
            loss_and_gradients(&adapter, None, x_common, reference_outputs, None, T::zero())?;
        finite_or_diverged(&l, epoch)?;
        if l.output_mse <= tol {
            current = Some(l);
            break;
        }
        trace.records.push(EpochRecord {
            epoch,
            total_loss: l.output_mse.as_f64(),
            output_mse: None,
            adapter_mse: Some(l.output_mse.as_f64()),
            elapsed_secs: started.elapsed().as_secs_f64(),
        });
        opt.update(&mut adapter, &g.adapter);
    }
    let l = match current {
        Some(l) => l,
        None => loss(&adapter, None, x_common, reference_outputs, None, T::zero())?,
    };
    finite_or_diverged(&l, trace.records.len())?;
    trace.final_total = Some(l.output_mse.as_f64());
    trace.final_adapter_mse = Some(l.output_mse.as_f64());
    Ok((adapter, trace))
}

/// Training data for a new subject.
#[derive(Clone, Debug)]
pub struct FinetuneData<T> {
    /// Training inputs (common and, optionally, unique items).
    pub x: Matrix<T>,
    /// Output targets row-matched to `x`.
    pub targets: Matrix<T>,
    /// Rows of `x` holding common items.
    pub common_rows: Vec<usize>,
    /// Reference adapter outputs for `common_rows`, in the same order.
    pub reference_common: Option<Matrix<T>>,
}

#[derive(Clone, Debug)]
pub struct FinetuneOutcome<T> {
    pub adapter: AdapterModel<T>,
    pub mapper: MapperModel<T>,
    /// Present for the modes that run adapter alignment first.
    pub stage1: Option<TrainTrace>,
    /// Adapter right after stage 1, when it ran.
    pub stage1_adapter: Option<AdapterModel<T>>,
    pub trace: TrainTrace,
}

/// Fine-tunes a new subject against a transferred mapper under `cfg.mode`.
pub fn finetune<T: Scalar>(
    data: &FinetuneData<T>,
    reference_mapper: &MapperModel<T>,
    arch: &Architecture,
    cfg: &TrainConfig,
) -> Result<FinetuneOutcome<T>> {
    cfg.validate()?;
    if data.targets.rows() != data.x.rows() {
        return Err(Error::shape(
            "finetune",
            format!(
                "{} inputs vs {} targets",
                data.x.rows(),
                data.targets.rows()
            ),
        ));
    }
    let adapter = arch.init_adapter(data.x.cols(), cfg.seed);
    if adapter.output_dim() != reference_mapper.common_dim() {
        return Err(Error::shape(
            "finetune",
            format!(
                "adapter emits {} dims, mapper expects {}",
                adapter.output_dim(),
                reference_mapper.common_dim()
            ),
        ));
    }
    let needs_common = cfg.mode != TrainMode::Baseline;
    let term = if needs_common {
        let reference = data
            .reference_common
            .as_ref()
            .ok_or(Error::EmptyTrainingSet("no reference common outputs"))?;
        if data.common_rows.is_empty() {
            return Err(Error::EmptyTrainingSet("no common items"));
        }
        if reference.rows() != data.common_rows.len() {
            return Err(Error::shape(
                "finetune",
                format!(
                    "{} common rows vs {} reference rows",
                    data.common_rows.len(),
                    reference.rows()
                ),
            ));
        }
        Some(AdapterTerm {
            rows: &data.common_rows,
            target: reference,
            lambda3: cfg.lambda3,
        })
    } else {
        None
    };

    let run_stage1 = matches!(cfg.mode, TrainMode::Aamax | TrainMode::Step1Only);
    let (adapter, stage1, stage1_adapter) = if run_stage1 {
        let term = term.expect("common term required");
        let x_common = data.x.select_rows(term.rows)?;
        let (a, tr) = align_adapter_stage1(adapter, &x_common, term.target, cfg)?;
        (a.clone(), Some(tr), Some(a))
    } else {
        (adapter, None, None)
    };

    if cfg.mode == TrainMode::Step1Only {
        return Ok(FinetuneOutcome {
            adapter,
            mapper: reference_mapper.clone(),
            stage1,
            stage1_adapter,
            trace: TrainTrace::default(),
        });
    }
    let update_mapper = cfg.mode != TrainMode::FrozenMapper;
    let (adapter, mapper, trace) = train_end_to_end(
        adapter,
        reference_mapper.clone(),
        &data.x,
        &data.targets,
        term,
        cfg.epochs,
        cfg.learning_rate,
        update_mapper,
    )?;
    Ok(FinetuneOutcome {
        adapter,
        mapper,
        stage1,
        stage1_adapter,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::model::Dense;

    #[test]
    fn zero_epochs_returns_initial_model() {
        let arch = Architecture {
            common_dim: 3,
            mapper_hidden: 4,
            ..Default::default()
        };
        let x = Matrix::from_fn(5, 4, |i, j| (i + j) as f64 * 0.1);
        let t = Matrix::from_fn(5, 3, |i, j| (i * j) as f64 * 0.1);
        let cfg = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        let (a, m, trace) = train_reference(&x, &t, &arch, &cfg).unwrap();
        assert!(trace.is_empty());
        assert_eq!(a, arch.init_adapter(4, 0));
        assert_eq!(m, arch.init_mapper(3, 0).unwrap());
        assert_eq!(trace.to_csv(), "epoch,total_loss,output_mse,adapter_mse\n");
    }

    #[test]
    fn zero_model_on_matching_targets_stays_at_zero_loss() {
        let a =
            AdapterModel::new(AdapterKind::LinearGelu, Dense::<f64>::zeros(2, 3), None).unwrap();
        let m = MapperModel::new(Dense::zeros(4, 2), Dense::zeros(2, 4), false).unwrap();
        let x = Matrix::from_fn(6, 3, |i, j| (i as f64) - (j as f64));
        let t = Matrix::zeros(6, 2);
        let (a2, m2, trace) =
            train_end_to_end(a.clone(), m.clone(), &x, &t, None, 20, 1e-2, true).unwrap();
        assert!(trace.records.iter().all(|r| r.total_loss == 0.0));
        assert_eq!(a2, a);
        assert_eq!(m2, m);
    }

    #[test]
    fn diverging_run_reports_epoch() {
        let x = Matrix::from_fn(4, 2, |i, j| 1e200 * (i + j + 1) as f64);
        let t = Matrix::from_fn(4, 2, |_, _| 1.0);
        let a = AdapterModel::<f64>::init(AdapterKind::Linear, 2, 2, 0, 3);
        let m = MapperModel::init(2, 2, 2, None, 3).unwrap();
        let err = train_end_to_end(a, m, &x, &t, None, 5, 1e-2, true).unwrap_err();
        assert!(matches!(err, Error::Diverged { epoch: 0 }));
    }

    #[test]
    fn infinite_tolerance_skips_stage1() {
        let a = AdapterModel::<f64>::init(AdapterKind::Linear, 3, 2, 0, 9);
        let x = Matrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64);
        let t = Matrix::from_fn(4, 2, |i, _| i as f64);
        let cfg = TrainConfig {
            stage1_tolerance: f64::INFINITY,
            ..Default::default()
        };
        let (out, trace) = align_adapter_stage1(a.clone(), &x, &t, &cfg).unwrap();
        assert_eq!(out, a);
        assert!(trace.is_empty());
        assert!(trace.final_adapter_mse.is_some());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("step1".parse::<TrainMode>().unwrap(), TrainMode::Step1Only);
        assert_eq!(
            "frozen-mapper".parse::<TrainMode>().unwrap(),
            TrainMode::FrozenMapper
        );
        assert!("sgd".parse::<TrainMode>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig {
            learning_rate: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            lambda3: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn modes_without_commons_fail() {
        let arch = Architecture {
            common_dim: 2,
            mapper_hidden: 3,
            ..Default::default()
        };
        let data = FinetuneData {
            x: Matrix::from_fn(4, 3, |i, j| (i + j) as f64),
            targets: Matrix::zeros(4, 2),
            common_rows: vec![],
            reference_common: None,
        };
        let mapper = arch.init_mapper::<f64>(2, 1).unwrap();
        let cfg = TrainConfig {
            mode: TrainMode::Aamax,
            ..Default::default()
        };
        assert!(matches!(
            finetune(&data, &mapper, &arch, &cfg),
            Err(Error::EmptyTrainingSet(_))
        ));
        let cfg = TrainConfig {
            mode: TrainMode::Baseline,
            epochs: 2,
            ..Default::default()
        };
        assert!(finetune(&data, &mapper, &arch, &cfg).is_ok());
    }
}
