//! JSON model files; each parameter array is an embedded base64 RAMX payload.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::adapters::model::{AdapterKind, AdapterModel, Dense, MapperModel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{from_ramx_bytes, to_ramx_bytes, Matrix};

#[derive(Serialize, Deserialize)]
struct AdapterFile {
    kind: AdapterKind,
    input_dim: usize,
    output_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hidden_dim: Option<usize>,
    params: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct MapperFile {
    kind: String,
    common_dim: usize,
    hidden_dim: usize,
    target_dim: usize,
    residual: bool,
    params: BTreeMap<String, String>,
}

fn encode<T: Scalar>(m: &Matrix<T>) -> String {
    STANDARD.encode(to_ramx_bytes(m))
}

fn encode_bias<T: Scalar>(b: &[T]) -> String {
    encode(&Matrix::from_vec(1, b.len(), b.to_vec()).expect("non-empty bias"))
}

fn decode<T: Scalar>(params: &BTreeMap<String, String>, key: &str) -> Result<Matrix<T>> {
    let text = params
        .get(key)
        .ok_or_else(|| Error::Model(format!("missing parameter {key:?}")))?;
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| Error::Model(format!("{key}: {e}")))?;
    from_ramx_bytes(&bytes)
}

fn decode_dense<T: Scalar>(
    params: &BTreeMap<String, String>,
    w: &str,
    b: &str,
) -> Result<Dense<T>> {
    let weight = decode(params, w)?;
    let bias = decode::<T>(params, b)?;
    if bias.rows() != 1 {
        return Err(Error::Model(format!("{b} must be a single row")));
    }
    Ok(Dense {
        weight,
        bias: bias.into_vec(),
    })
}

pub fn adapter_to_json<T: Scalar>(a: &AdapterModel<T>) -> String {
    let mut params = BTreeMap::new();
    params.insert("w1".to_string(), encode(&a.first.weight));
    params.insert("b1".to_string(), encode_bias(&a.first.bias));
    if let Some(s) = &a.second {
        params.insert("w2".to_string(), encode(&s.weight));
        params.insert("b2".to_string(), encode_bias(&s.bias));
    }
    let file = AdapterFile {
        kind: a.kind,
        input_dim: a.input_dim(),
        output_dim: a.output_dim(),
        hidden_dim: a.second.as_ref().map(|_| a.first.out_dim()),
        params,
    };
    serde_json::to_string_pretty(&file).expect("serializable")
}

pub fn adapter_from_json<T: Scalar>(text: &str) -> Result<AdapterModel<T>> {
    let file: AdapterFile = serde_json::from_str(text)?;
    let first = decode_dense(&file.params, "w1", "b1")?;
    let second = if file.kind == AdapterKind::TwoLayerLinear {
        Some(decode_dense(&file.params, "w2", "b2")?)
    } else {
        None
    };
    let a = AdapterModel::new(file.kind, first, second)?;
    if a.input_dim() != file.input_dim || a.output_dim() != file.output_dim {
        return Err(Error::Model(
            "declared shape does not match parameters".into(),
        ));
    }
    Ok(a)
}

pub fn mapper_to_json<T: Scalar>(m: &MapperModel<T>) -> String {
    let mut params = BTreeMap::new();
    params.insert("w_h".to_string(), encode(&m.hidden.weight));
    params.insert("b_h".to_string(), encode_bias(&m.hidden.bias));
    params.insert("w_o".to_string(), encode(&m.output.weight));
    params.insert("b_o".to_string(), encode_bias(&m.output.bias));
    let file = MapperFile {
        kind: "mapper".into(),
        common_dim: m.common_dim(),
        hidden_dim: m.hidden_dim(),
        target_dim: m.target_dim(),
        residual: m.residual,
        params,
    };
    serde_json::to_string_pretty(&file).expect("serializable")
}

pub fn mapper_from_json<T: Scalar>(text: &str) -> Result<MapperModel<T>> {
    let file: MapperFile = serde_json::from_str(text)?;
    if file.kind != "mapper" {
        return Err(Error::Model(format!(
            "expected kind \"mapper\", found {:?}",
            file.kind
        )));
    }
    let m = MapperModel::new(
        decode_dense(&file.params, "w_h", "b_h")?,
        decode_dense(&file.params, "w_o", "b_o")?,
        file.residual,
    )?;
    if (m.common_dim(), m.hidden_dim(), m.target_dim())
        != (file.common_dim, file.hidden_dim, file.target_dim)
    {
        return Err(Error::Model(
            "declared shape does not match parameters".into(),
        ));
    }
    Ok(m)
}
