use crate::scalar::Scalar;

/// Exact GELU, `0.5·x·(1 + erf(x/√2))`.
#[inline]
pub fn gelu<T: Scalar>(x: T) -> T {
    T::lit(0.5) * x * (T::one() + (x * T::lit(std::f64::consts::FRAC_1_SQRT_2)).erf())
}

/// `Φ(x) + x·φ(x)`
#[inline]
pub fn gelu_grad<T: Scalar>(x: T) -> T {
    let cdf = T::lit(0.5) * (T::one() + (x * T::lit(std::f64::consts::FRAC_1_SQRT_2)).erf());
    let pdf = (-T::lit(0.5) * x * x).exp() * T::lit(0.398_942_280_401_432_7);
    cdf + x * pdf
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Gelu,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Identity => x,
            Activation::Gelu => gelu(x),
            Activation::Relu => x.max(T::zero()),
        }
    }

    #[inline]
    pub fn derivative<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Gelu => gelu_grad(x),
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Φ(1) from the Taylor series of erf, summed to convergence.
    fn erf_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        while term.abs() > 1e-18 {
            n += 1.0;
            term *= -x * x / n;
            sum += term / (2.0 * n + 1.0);
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    }

    #[test]
    fn gelu_values() {
        assert_eq!(gelu(0.0f64), 0.0);
        assert!((gelu(10.0f64) - 10.0).abs() <= 1e-9);
        let oracle = 0.5 * (1.0 + erf_series(std::f64::consts::FRAC_1_SQRT_2));
        assert!((oracle - 0.8413447).abs() <= 1e-6);
        assert!((gelu(1.0f64) - oracle).abs() <= 1e-12);
    }

    #[test]
    fn erf_accuracy() {
        for i in -20..=20 {
            let x = i as f64 / 10.0;
            assert!((libm::erf(x) - erf_series(x)).abs() <= 1e-12, "x = {x}");
        }
        // Reference values for the tail, where the series cancels badly.
        let tail = [
            (2.5, 0.999_593_047_982_555),
            (3.0, 0.999_977_909_503_001_4),
            (4.0, 0.999_999_984_582_742_1),
            (5.5, 0.999_999_999_999_992_7),
        ];
        for (x, v) in tail {
            assert!((libm::erf(x) - v).abs() <= 1e-12, "x = {x}");
            assert!((libm::erf(-x) + v).abs() <= 1e-12, "x = -{x}");
        }
    }

    #[test]
    fn gelu_derivative_matches_difference_quotient() {
        for i in -30..=30 {
            let x = i as f64 / 7.0;
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((gelu_grad(x) - fd).abs() < 1e-8);
        }
    }
}
