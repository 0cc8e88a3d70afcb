//! Adaptive Gauss-Kronrod (7/15) quadrature.

#![allow(clippy::excessive_precision)]

use crate::scalar::Real;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights paired with XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_DEPTH: u32 = 60;

fn kronrod<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let radius = half * (b - a);
    let fc = f(center);
    let mut k = fc * T::lit(WGK[7]);
    let mut g = fc * T::lit(WG[3]);
    for i in 0..7 {
        let dx = radius * T::lit(XGK[i]);
        let pair = f(center - dx) + f(center + dx);
        k = k + T::lit(WGK[i]) * pair;
        if i % 2 == 1 {
            g = g + T::lit(WG[i / 2]) * pair;
        }
    }
    (k * radius, ((k - g) * radius).abs())
}

fn adapt<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, whole: (T, T), tol: T, depth: u32) -> T {
    let (value, err) = whole;
    if err <= tol || depth >= MAX_DEPTH || !(err.is_finite()) {
        return value;
    }
    let mid = T::lit(0.5) * (a + b);
    if mid <= a || mid >= b {
        return value;
    }
    let left = kronrod(f, a, mid);
    let right = kronrod(f, mid, b);
    let half_tol = tol * T::lit(0.5);
    adapt(f, a, mid, left, half_tol, depth + 1) + adapt(f, mid, b, right, half_tol, depth + 1)
}

/// Integrates `f` over `[a, b]` to the absolute tolerance `tol`.
pub fn integrate<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, tol: T) -> T {
    if a == b {
        return T::zero();
    }
    let whole = kronrod(&f, a, b);
    adapt(&f, a, b, whole, tol, 0)
}

/// Integrates `f` over `[0, inf)` via the substitution `x = t / (1 - t)`.
pub fn integrate_half_line<T: Real, F: Fn(T) -> T>(f: F, tol: T) -> T {
    let g = |t: T| {
        let om = T::one() - t;
        let v = f(t / om) / (om * om);
        if v.is_finite() {
            v
        } else {
            T::zero()
        }
    };
    integrate(g, T::zero(), T::one(), tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v: f64 = integrate(|x: f64| x.powi(5) - 2.0 * x, 0.0, 2.0, 1e-14);
        assert!((v - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn half_line_gaussian() {
        let v: f64 = integrate_half_line(|x: f64| (-x * x / 2.0).exp(), 1e-14);
        assert!((v - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-12);
    }
}
