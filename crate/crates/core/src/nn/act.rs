use crate::scalar::Scalar;

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_CUBIC: f64 = 0.044_715;

/// GELU, tanh approximation, evaluated as `x * sigmoid(2u)`.
#[inline]
pub fn gelu<T: Scalar>(x: T) -> T {
    let inner = T::lit(SQRT_2_OVER_PI) * (x + T::lit(GELU_CUBIC) * x * x * x);
    x / (T::one() + (T::lit(-2.0) * inner).exp())
}

#[inline]
pub fn gelu_grad<T: Scalar>(x: T) -> T {
    let half = T::lit(0.5);
    let inner = T::lit(SQRT_2_OVER_PI) * (x + T::lit(GELU_CUBIC) * x * x * x);
    let s = T::one() / (T::one() + (T::lit(-2.0) * inner).exp());
    let t = T::lit(2.0) * s - T::one();
    let d_inner = T::lit(SQRT_2_OVER_PI) * (T::one() + T::lit(3.0 * GELU_CUBIC) * x * x);
    half * (T::one() + t) + half * x * (T::one() - t * t) * d_inner
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
