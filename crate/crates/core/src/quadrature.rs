//! Globally adaptive Gauss–Kronrod (7/15 point) quadrature.

// node and weight tables are kept at their published digits
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
    0.000_000_000_000_000_000_000_000_000_000_000,
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

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig<T = f64> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_subdivisions: usize,
}

impl<T: Real> Default for QuadConfig<T> {
    fn default() -> Self {
        let eps = T::epsilon();
        Self {
            abs_tol: T::lit(1e-10).max(eps * T::lit(50.0)),
            rel_tol: T::lit(1e-12).max(eps * T::lit(50.0)),
            max_subdivisions: 2000,
        }
    }
}

impl<T: Real> QuadConfig<T> {
    pub fn tight() -> Self {
        let eps = T::epsilon();
        Self {
            abs_tol: T::lit(1e-15).max(eps * T::lit(10.0)),
            rel_tol: T::lit(1e-13).max(eps * T::lit(50.0)),
            max_subdivisions: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T = f64> {
    pub value: T,
    pub abs_error: T,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy)]
struct Segment<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

fn gk15<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> Segment<T> {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let fc = f(center);
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half_len * T::lit(XGK[j]);
        let pair = f(center - dx) + f(center + dx);
        kronrod = kronrod + T::lit(WGK[j]) * pair;
        if j % 2 == 1 {
            gauss = gauss + T::lit(WG[j / 2]) * pair;
        }
    }
    Segment {
        a,
        b,
        value: kronrod * half_len,
        error: ((kronrod - gauss) * half_len).abs(),
    }
}

/// Integrates `f` over `[a, b]`, bisecting the segment with the largest error
/// estimate until the summed estimate meets `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<T, F>(mut f: F, a: T, b: T, cfg: &QuadConfig<T>) -> QuadResult<T>
where
    T: Real,
    F: FnMut(T) -> T,
{
    if a == b {
        return QuadResult {
            value: T::zero(),
            abs_error: T::zero(),
            evaluations: 0,
            converged: true,
        };
    }
    let (lo, hi, sign) = if a < b { (a, b, T::one()) } else { (b, a, -T::one()) };
    let mut segments = vec![gk15(&mut f, lo, hi)];
    let mut evaluations = 15;
    loop {
        let (value, error) = segments
            .iter()
            .fold((T::zero(), T::zero()), |(v, e), s| (v + s.value, e + s.error));
        let target = cfg.abs_tol.max(cfg.rel_tol * value.abs());
        if error <= target || segments.len() >= cfg.max_subdivisions {
            return QuadResult {
                value: sign * value,
                abs_error: error,
                evaluations,
                converged: error <= target,
            };
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.partial_cmp(&y.1.error).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let seg = segments.swap_remove(worst);
        let mid = T::lit(0.5) * (seg.a + seg.b);
        if !(mid > seg.a && mid < seg.b) {
            // interval exhausted at machine precision
            segments.push(Segment {
                error: T::zero(),
                ..seg
            });
            continue;
        }
        segments.push(gk15(&mut f, seg.a, mid));
        segments.push(gk15(&mut f, mid, seg.b));
        evaluations += 30;
    }
}

/// Iterated integral `∫_a^b dx ∫_{lo(x)}^{hi(x)} f(x, y) dy`.
pub fn integrate_2d<T, F, L, H>(f: F, a: T, b: T, lo: L, hi: H, cfg: &QuadConfig<T>) -> QuadResult<T>
where
    T: Real,
    F: Fn(T, T) -> T,
    L: Fn(T) -> T,
    H: Fn(T) -> T,
{
    let inner_cfg = QuadConfig {
        abs_tol: cfg.abs_tol * T::lit(0.01),
        ..*cfg
    };
    let mut inner_ok = true;
    let mut outer = integrate(
        |x| {
            let r = integrate(|y| f(x, y), lo(x), hi(x), &inner_cfg);
            inner_ok &= r.converged;
            r.value
        },
        a,
        b,
        cfg,
    );
    outer.converged &= inner_ok;
    outer
}
