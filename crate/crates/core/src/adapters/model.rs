use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adapters::activation::Activation;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Flat views over every learnable array of a model, in a fixed order.
pub trait Params<T> {
    fn slices(&self) -> Vec<&[T]>;
    fn slices_mut(&mut self) -> Vec<&mut [T]>;
}

/// Affine layer `y = x·Wᵀ + b` with `W` stored `out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    /// Weights uniform in `±1/√fan_in`, zero bias.
    pub fn init(rng: &mut ChaCha8Rng, out_dim: usize, in_dim: usize) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let weight = Matrix::from_fn(out_dim, in_dim, |_, _| {
            T::lit(rng.random_range(-bound..=bound))
        });
        Self {
            weight,
            bias: vec![T::zero(); out_dim],
        }
    }

    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            weight: Matrix::zeros(out_dim, in_dim),
            bias: vec![T::zero(); out_dim],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.out_dim(), self.in_dim())
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let mut y = x.matmul_t(&self.weight)?;
        y.add_row_vector(&self.bias);
        Ok(y)
    }
}

impl<T> Params<T> for Dense<T> {
    fn slices(&self) -> Vec<&[T]> {
        vec![self.weight.data(), &self.bias]
    }

    fn slices_mut(&mut self) -> Vec<&mut [T]> {
        vec![self.weight.data_mut(), &mut self.bias]
    }
}

impl<T: Scalar> Dense<T> {
    fn check(&self, name: &str) -> Result<()> {
        if self.bias.len() != self.out_dim() {
            return Err(Error::Model(format!(
                "{name}: bias length {} does not match {} outputs",
                self.bias.len(),
                self.out_dim()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterKind {
    Linear,
    LinearGelu,
    LinearRelu,
    TwoLayerLinear,
}

impl AdapterKind {
    pub fn activation(self) -> Activation {
        match self {
            AdapterKind::LinearGelu => Activation::Gelu,
            AdapterKind::LinearRelu => Activation::Relu,
            AdapterKind::Linear | AdapterKind::TwoLayerLinear => Activation::Identity,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AdapterKind::Linear => "linear",
            AdapterKind::LinearGelu => "linear_gelu",
            AdapterKind::LinearRelu => "linear_relu",
            AdapterKind::TwoLayerLinear => "two_layer_linear",
        }
    }

    pub const ALL: [AdapterKind; 4] = [
        AdapterKind::Linear,
        AdapterKind::LinearGelu,
        AdapterKind::LinearRelu,
        AdapterKind::TwoLayerLinear,
    ];
}

impl std::str::FromStr for AdapterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AdapterKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown adapter kind {s:?}")))
    }
}

/// Per-subject map from input space into the common space.
#[derive(Clone, Debug, PartialEq)]
pub struct AdapterModel<T> {
    pub kind: AdapterKind,
    pub first: Dense<T>,
    /// Present only for [`AdapterKind::TwoLayerLinear`].
    pub second: Option<Dense<T>>,
}

impl<T: Scalar> AdapterModel<T> {
    pub fn new(kind: AdapterKind, first: Dense<T>, second: Option<Dense<T>>) -> Result<Self> {
        let m = Self {
            kind,
            first,
            second,
        };
        m.validate()?;
        Ok(m)
    }

    /// `hidden_dim` is used by the two-layer kind only.
    pub fn init(
        kind: AdapterKind,
        input_dim: usize,
        common_dim: usize,
        hidden_dim: usize,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match kind {
            AdapterKind::TwoLayerLinear => {
                let first = Dense::init(&mut rng, hidden_dim, input_dim);
                let second = Dense::init(&mut rng, common_dim, hidden_dim);
                Self {
                    kind,
                    first,
                    second: Some(second),
                }
            }
            _ => Self {
                kind,
                first: Dense::init(&mut rng, common_dim, input_dim),
                second: None,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.first.check("adapter layer 1")?;
        match (&self.kind, &self.second) {
            (AdapterKind::TwoLayerLinear, Some(second)) => {
                second.check("adapter layer 2")?;
                if second.in_dim() != self.first.out_dim() {
                    return Err(Error::Model("adapter layers do not chain".into()));
                }
                Ok(())
            }
            (AdapterKind::TwoLayerLinear, None) => {
                Err(Error::Model("two_layer_linear needs a second layer".into()))
            }
            (_, Some(_)) => Err(Error::Model(format!(
                "{} takes exactly one layer",
                self.kind.as_str()
            ))),
            (_, None) => Ok(()),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.first.in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.second.as_ref().unwrap_or(&self.first).out_dim()
    }

    /// The weight whose rows span the common space (the last layer's, or the
    /// product of both layers for the two-layer kind).
    pub fn common_space_weight(&self) -> Matrix<T> {
        match &self.second {
            Some(second) => second
                .weight
                .matmul(&self.first.weight)
                .expect("layers chain"),
            None => self.first.weight.clone(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            kind: self.kind,
            first: self.first.zeros_like(),
            second: self.second.as_ref().map(Dense::zeros_like),
        }
    }

    pub fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape(
                "adapter_forward",
                format!(
                    "input has {} features, adapter expects {}",
                    x.cols(),
                    self.input_dim()
                ),
            ));
        }
        let pre = self.first.forward(x)?;
        match &self.second {
            Some(second) => second.forward(&pre),
            None => {
                let act = self.kind.activation();
                Ok(pre.map(|v| act.apply(v)))
            }
        }
    }
}

impl<T> Params<T> for AdapterModel<T> {
    fn slices(&self) -> Vec<&[T]> {
        let mut out = self.first.slices();
        if let Some(s) = &self.second {
            out.extend(s.slices());
        }
        out
    }

    fn slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = self.first.slices_mut();
        if let Some(s) = &mut self.second {
            out.extend(s.slices_mut());
        }
        out
    }
}

/// Shared one-hidden-layer GELU network from the common space to target latents.
#[derive(Clone, Debug, PartialEq)]
pub struct MapperModel<T> {
    pub hidden: Dense<T>,
    pub output: Dense<T>,
    /// Adds the input to the output; only valid when common dim equals target dim.
    pub residual: bool,
}

impl<T: Scalar> MapperModel<T> {
    pub fn new(hidden: Dense<T>, output: Dense<T>, residual: bool) -> Result<Self> {
        let m = Self {
            hidden,
            output,
            residual,
        };
        m.validate()?;
        Ok(m)
    }

    /// Residual defaults to on exactly when `common_dim == target_dim`.
    pub fn init(
        common_dim: usize,
        hidden_dim: usize,
        target_dim: usize,
        residual: Option<bool>,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hidden = Dense::init(&mut rng, hidden_dim, common_dim);
        let output = Dense::init(&mut rng, target_dim, hidden_dim);
        Self::new(hidden, output, residual.unwrap_or(common_dim == target_dim))
    }

    pub fn validate(&self) -> Result<()> {
        self.hidden.check("mapper hidden")?;
        self.output.check("mapper output")?;
        if self.output.in_dim() != self.hidden.out_dim() {
            return Err(Error::Model("mapper layers do not chain".into()));
        }
        if self.residual && self.common_dim() != self.target_dim() {
            return Err(Error::Model(format!(
                "residual needs common dim {} == target dim {}",
                self.common_dim(),
                self.target_dim()
            )));
        }
        Ok(())
    }

    pub fn common_dim(&self) -> usize {
        self.hidden.in_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden.out_dim()
    }

    pub fn target_dim(&self) -> usize {
        self.output.out_dim()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            hidden: self.hidden.zeros_like(),
            output: self.output.zeros_like(),
            residual: self.residual,
        }
    }

    pub fn forward(&self, z: &Matrix<T>) -> Result<Matrix<T>> {
        if z.cols() != self.common_dim() {
            return Err(Error::shape(
                "mapper_forward",
                format!(
                    "input has {} features, mapper expects {}",
                    z.cols(),
                    self.common_dim()
                ),
            ));
        }
        let h = self.hidden.forward(z)?.map(super::activation::gelu);
        let out = self.output.forward(&h)?;
        if self.residual {
            out.add(z)
        } else {
            Ok(out)
        }
    }
}

impl<T> Params<T> for MapperModel<T> {
    fn slices(&self) -> Vec<&[T]> {
        let mut out = self.hidden.slices();
        out.extend(self.output.slices());
        out
    }

    fn slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = self.hidden.slices_mut();
        out.extend(self.output.slices_mut());
        out
    }
}
