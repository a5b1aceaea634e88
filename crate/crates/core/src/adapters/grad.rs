//! Losses and exact backpropagated gradients for adapter (+ mapper) stacks.
//!
//! The objective is
//! `MSE(mapper(adapter(X)), T_out) + λ₃ · MSE(adapter(X)[common], T_adapter)`,
//! where the second term is restricted to the listed common rows. Without a
//! mapper the first term compares the adapter output directly.

use crate::adapters::activation::gelu;
use crate::adapters::model::{AdapterModel, Dense, MapperModel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Adapter-level target for a subset of rows.
#[derive(Clone, Copy, Debug)]
pub struct AdapterTarget<'a, T> {
    /// Row indices into `X` (the common items).
    pub rows: &'a [usize],
    /// `rows.len() × common_dim`
    pub target: &'a Matrix<T>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown<T> {
    pub total: T,
    pub output_mse: T,
    /// Zero when no adapter target is supplied.
    pub adapter_mse: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub adapter: AdapterModel<T>,
    pub mapper: Option<MapperModel<T>>,
}

pub fn mse_loss<T: Scalar>(p: &Matrix<T>, t: &Matrix<T>) -> Result<T> {
    if p.shape() != t.shape() {
        return Err(Error::shape(
            "mse_loss",
            format!("{:?} vs {:?}", p.shape(), t.shape()),
        ));
    }
    let total: T = p
        .data()
        .iter()
        .zip(t.data())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    Ok(total / T::lit(p.data().len() as f64))
}

/// `∂ MSE / ∂P = 2(P − T) / |P|`
fn mse_grad<T: Scalar>(p: &Matrix<T>, t: &Matrix<T>) -> Matrix<T> {
    let k = T::lit(2.0 / p.data().len() as f64);
    p.sub(t).expect("shapes checked").scale(k)
}

struct AdapterCache<T> {
    pre: Matrix<T>,
    out: Matrix<T>,
}

fn adapter_forward_cached<T: Scalar>(
    a: &AdapterModel<T>,
    x: &Matrix<T>,
) -> Result<AdapterCache<T>> {
    if x.cols() != a.input_dim() {
        return Err(Error::shape(
            "gradients",
            format!(
                "input has {} features, adapter expects {}",
                x.cols(),
                a.input_dim()
            ),
        ));
    }
    let pre = a.first.forward(x)?;
    let out = match &a.second {
        Some(second) => second.forward(&pre)?,
        None => {
            let act = a.kind.activation();
            pre.map(|v| act.apply(v))
        }
    };
    Ok(AdapterCache { pre, out })
}

struct MapperCache<T> {
    pre: Matrix<T>,
    hidden: Matrix<T>,
    out: Matrix<T>,
}

fn mapper_forward_cached<T: Scalar>(m: &MapperModel<T>, z: &Matrix<T>) -> Result<MapperCache<T>> {
    if z.cols() != m.common_dim() {
        return Err(Error::shape(
            "gradients",
            format!(
                "adapter emits {} features, mapper expects {}",
                z.cols(),
                m.common_dim()
            ),
        ));
    }
    let pre = m.hidden.forward(z)?;
    let hidden = pre.map(gelu);
    let mut out = m.output.forward(&hidden)?;
    if m.residual {
        out = out.add(z)?;
    }
    Ok(MapperCache { pre, hidden, out })
}

fn dense_backward<T: Scalar>(
    layer: &Dense<T>,
    input: &Matrix<T>,
    d_out: &Matrix<T>,
) -> Result<(Dense<T>, Matrix<T>)> {
    let grad = Dense {
        weight: d_out.t_matmul(input)?,
        bias: d_out.column_sums(),
    };
    let d_in = d_out.matmul(&layer.weight)?;
    Ok((grad, d_in))
}

fn check_targets<T: Scalar>(
    x: &Matrix<T>,
    out_dim: usize,
    t_out: &Matrix<T>,
    common_dim: usize,
    at: Option<AdapterTarget<'_, T>>,
) -> Result<()> {
    if t_out.shape() != (x.rows(), out_dim) {
        return Err(Error::shape(
            "gradients",
            format!(
                "output target is {:?}, expected {:?}",
                t_out.shape(),
                (x.rows(), out_dim)
            ),
        ));
    }
    if let Some(at) = at {
        if at.target.shape() != (at.rows.len(), common_dim) {
            return Err(Error::shape(
                "gradients",
                format!(
                    "adapter target is {:?}, expected {:?}",
                    at.target.shape(),
                    (at.rows.len(), common_dim)
                ),
            ));
        }
        if let Some(&bad) = at.rows.iter().find(|&&r| r >= x.rows()) {
            return Err(Error::OutOfRange {
                index: bad,
                len: x.rows(),
            });
        }
    }
    Ok(())
}

/// Loss only; no gradient bookkeeping.
pub fn loss<T: Scalar>(
    adapter: &AdapterModel<T>,
    mapper: Option<&MapperModel<T>>,
    x: &Matrix<T>,
    t_out: &Matrix<T>,
    adapter_target: Option<AdapterTarget<'_, T>>,
    lambda3: T,
) -> Result<LossBreakdown<T>> {
    let z = adapter.forward(x)?;
    let out_dim = mapper.map_or(z.cols(), |m| m.target_dim());
    check_targets(x, out_dim, t_out, z.cols(), adapter_target)?;
    let p = match mapper {
        Some(m) => m.forward(&z)?,
        None => z.clone(),
    };
    let output_mse = mse_loss(&p, t_out)?;
    let adapter_mse = match adapter_target {
        Some(at) if !at.rows.is_empty() => mse_loss(&z.select_rows(at.rows)?, at.target)?,
        _ => T::zero(),
    };
    Ok(LossBreakdown {
        total: output_mse + lambda3 * adapter_mse,
        output_mse,
        adapter_mse,
    })
}

/// Loss and exact gradients with respect to every adapter and mapper parameter.
pub fn loss_and_gradients<T: Scalar>(
    adapter: &AdapterModel<T>,
    mapper: Option<&MapperModel<T>>,
    x: &Matrix<T>,
    t_out: &Matrix<T>,
    adapter_target: Option<AdapterTarget<'_, T>>,
    lambda3: T,
) -> Result<(LossBreakdown<T>, Gradients<T>)> {
    let ac = adapter_forward_cached(adapter, x)?;
    let out_dim = mapper.map_or(ac.out.cols(), |m| m.target_dim());
    check_targets(x, out_dim, t_out, ac.out.cols(), adapter_target)?;

    let (output_mse, mut d_z, mapper_grad) = match mapper {
        Some(m) => {
            let mc = mapper_forward_cached(m, &ac.out)?;
            let output_mse = mse_loss(&mc.out, t_out)?;
            let d_p = mse_grad(&mc.out, t_out);
            let (g_out, d_hidden) = dense_backward(&m.output, &mc.hidden, &d_p)?;
            let mut d_pre = d_hidden;
            for (d, &a) in d_pre.data_mut().iter_mut().zip(mc.pre.data()) {
                *d *= super::activation::gelu_grad(a);
            }
            let (g_hidden, mut d_z) = dense_backward(&m.hidden, &ac.out, &d_pre)?;
            if m.residual {
                d_z = d_z.add(&d_p)?;
            }
            (
                output_mse,
                d_z,
                Some(MapperModel {
                    hidden: g_hidden,
                    output: g_out,
                    residual: m.residual,
                }),
            )
        }
        None => (mse_loss(&ac.out, t_out)?, mse_grad(&ac.out, t_out), None),
    };

    let mut adapter_mse = T::zero();
    if let Some(at) = adapter_target.filter(|at| !at.rows.is_empty()) {
        let zc = ac.out.select_rows(at.rows)?;
        adapter_mse = mse_loss(&zc, at.target)?;
        let g = mse_grad(&zc, at.target).scale(lambda3);
        for (k, &r) in at.rows.iter().enumerate() {
            for (d, &v) in d_z.row_mut(r).iter_mut().zip(g.row(k)) {
                *d += v;
            }
        }
    }

    let adapter_grad = match &adapter.second {
        Some(second) => {
            let (g2, d_pre) = dense_backward(second, &ac.pre, &d_z)?;
            let (g1, _) = dense_backward(&adapter.first, x, &d_pre)?;
            AdapterModel {
                kind: adapter.kind,
                first: g1,
                second: Some(g2),
            }
        }
        None => {
            let act = adapter.kind.activation();
            let mut d_pre = d_z;
            for (d, &a) in d_pre.data_mut().iter_mut().zip(ac.pre.data()) {
                *d *= act.derivative(a);
            }
            let (g1, _) = dense_backward(&adapter.first, x, &d_pre)?;
            AdapterModel {
                kind: adapter.kind,
                first: g1,
                second: None,
            }
        }
    };

    let breakdown = LossBreakdown {
        total: output_mse + lambda3 * adapter_mse,
        output_mse,
        adapter_mse,
    };
    Ok((
        breakdown,
        Gradients {
            adapter: adapter_grad,
            mapper: mapper_grad,
        },
    ))
}

pub fn gradients<T: Scalar>(
    adapter: &AdapterModel<T>,
    mapper: Option<&MapperModel<T>>,
    x: &Matrix<T>,
    t_out: &Matrix<T>,
    adapter_target: Option<AdapterTarget<'_, T>>,
    lambda3: T,
) -> Result<Gradients<T>> {
    loss_and_gradients(adapter, mapper, x, t_out, adapter_target, lambda3).map(|(_, g)| g)
}
