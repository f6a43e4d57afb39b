//! Gauss hypergeometric function for the family `₂F₁(1, b; 1 + b; x)`, `x ≤ 0`.
//!
//! This is the only member of the ₂F₁ family that the PPP interference
//! integral produces: with `b = 2/η` the annulus integral
//! `∫ r / (1 + r^η / c) dr` reduces to `(L²/2)·₂F₁(1, b; 1 + b; −L^η / c)`.
//! The public evaluator refuses anything outside that family.
//!
//! Evaluation regions:
//!
//! * `|x| < 0.5`: Maclaurin series, term ratio `x·(b + n)/(b + 1 + n)`.
//! * `0.5 ≤ |x| ≤ 2`: Pfaff transformation to `z = x/(x − 1) ∈ [1/3, 2/3]`,
//!   `₂F₁(1, b; 1 + b; x) = (1 − x)⁻¹ · ₂F₁(1, 1; 1 + b; z)`, a positive-term series.
//! * `|x| > 2`: the `1/x` connection formula, rewritten so that the removable
//!   singularity at `b = 1` disappears (see [`reflected`]).
//!
//! [`oracle`] holds an independent adaptive Gauss–Kronrod evaluation of the
//! Euler integral, used by the test suites.

use std::f64::consts::PI;

use thiserror::Error;

/// Relative truncation threshold for every series.
const SERIES_EPS: f64 = 1e-16;
/// Hard cap on series terms.
const MAX_TERMS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecFunError {
    #[error("unsupported parameters for 2F1: a={a}, b={b}, c={c}, x={x} (need a=1, 0<b<=1, c=1+b, x<=0)")]
    UnsupportedDomain { a: f64, b: f64, c: f64, x: f64 },
    #[error("series did not converge after {terms} terms (last term {last_term:e})")]
    SeriesNotConverged { terms: usize, last_term: f64 },
    #[error("quadrature did not converge: estimated error {achieved:e} exceeds tolerance {requested:e}")]
    QuadratureNotConverged { achieved: f64, requested: f64 },
}

/// Parameters of `₂F₁(a, b; c; x)` restricted to the model family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyp2F1Params {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub x: f64,
}

impl Hyp2F1Params {
    /// The family member used by the capture probability for path-loss exponent `eta`.
    pub fn for_path_loss_exponent(eta: f64, x: f64) -> Self {
        let b = 2.0 / eta;
        Self { a: 1.0, b, c: 1.0 + b, x }
    }

    fn check(&self) -> Result<(), SpecFunError> {
        let ok = self.a == 1.0
            && self.b > 0.0
            && self.b <= 1.0
            && (self.c - (1.0 + self.b)).abs() <= 4.0 * f64::EPSILON * self.c.abs()
            && self.x <= 0.0
            && self.x.is_finite();
        if ok {
            Ok(())
        } else {
            Err(SpecFunError::UnsupportedDomain {
                a: self.a,
                b: self.b,
                c: self.c,
                x: self.x,
            })
        }
    }
}

/// `₂F₁(a, b; c; x)` for `a = 1`, `0 < b ≤ 1`, `c = 1 + b`, `x ≤ 0`.
pub fn hyp2f1(a: f64, b: f64, c: f64, x: f64) -> Result<f64, SpecFunError> {
    Hyp2F1Params { a, b, c, x }.check()?;
    unit_family(b, x)
}

/// `₂F₁(1, b; 1 + b; x)` with the parameter family implied.
pub(crate) fn unit_family(b: f64, x: f64) -> Result<f64, SpecFunError> {
    let ax = -x;
    if x == 0.0 {
        Ok(1.0)
    } else if ax < 0.5 {
        maclaurin(b, x)
    } else if ax <= 2.0 {
        pfaff(b, x)
    } else {
        reflected(b, x)
    }
}

/// `Σ_n b/(b + n) · xⁿ`.
fn maclaurin(b: f64, x: f64) -> Result<f64, SpecFunError> {
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..MAX_TERMS {
        let nf = n as f64;
        term *= x * (b + nf) / (b + nf + 1.0);
        sum += term;
        if term.abs() < SERIES_EPS * sum.abs() {
            return Ok(sum);
        }
    }
    Err(SpecFunError::SeriesNotConverged {
        terms: MAX_TERMS,
        last_term: term,
    })
}

/// `(1 − x)⁻¹ Σ_n (1)_n (1)_n / ((1 + b)_n n!) zⁿ` with `z = x/(x − 1)`.
fn pfaff(b: f64, x: f64) -> Result<f64, SpecFunError> {
    let z = x / (x - 1.0);
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..MAX_TERMS {
        let nf = n as f64;
        term *= z * (1.0 + nf) / (1.0 + b + nf);
        sum += term;
        if term.abs() < SERIES_EPS * sum.abs() {
            return Ok(sum / (1.0 - x));
        }
    }
    Err(SpecFunError::SeriesNotConverged {
        terms: MAX_TERMS,
        last_term: term,
    })
}

/// Connection formula for `x < −2`.
///
/// With `u = −x`, `ε = 1 − b`, `s = πε / sin(πε)`:
///
/// `F = (b/u)·[ s·ln(u)·exprel(ε ln u) + (s − 1)/ε − Σ_{n≥1} (−1/u)ⁿ/(n + ε) ]`
///
/// which is the standard `1/x` transformation with the two pole terms at
/// `b → 1` combined analytically. At `b = 1` it reduces to `ln(1 + u)/u`.
fn reflected(b: f64, x: f64) -> Result<f64, SpecFunError> {
    let u = -x;
    let eps = 1.0 - b;
    let log_u = u.ln();
    let (s, s_minus_one_over_eps) = sinc_ratio(eps);
    let y = eps * log_u;
    let exprel = if y == 0.0 { 1.0 } else { y.exp_m1() / y };
    let head = s * log_u * exprel + s_minus_one_over_eps;

    let w = -1.0 / u;
    let mut power = 1.0;
    let mut tail = 0.0;
    let mut converged = false;
    let mut last = 0.0;
    for n in 1..=MAX_TERMS {
        power *= w;
        last = power / (n as f64 + eps);
        tail += last;
        if last.abs() < SERIES_EPS * head.abs() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(SpecFunError::SeriesNotConverged {
            terms: MAX_TERMS,
            last_term: last,
        });
    }
    Ok(b / u * (head - tail))
}

/// Returns `(πε/sin πε, (πε/sin πε − 1)/ε)`, both finite at `ε = 0`.
fn sinc_ratio(eps: f64) -> (f64, f64) {
    if eps == 0.0 {
        return (1.0, 0.0);
    }
    let t = PI * eps;
    if eps > 0.05 {
        let s = t / t.sin();
        return (s, (s - 1.0) / eps);
    }
    // x/sin x = 1 + x²/6 + 7x⁴/360 + 31x⁶/15120 + 127x⁸/604800 + 73x¹⁰/3421440
    let t2 = t * t;
    let poly = t2
        * (1.0 / 6.0
            + t2 * (7.0 / 360.0
                + t2 * (31.0 / 15120.0 + t2 * (127.0 / 604800.0 + t2 * (73.0 / 3421440.0)))));
    (1.0 + poly, poly / eps)
}

pub mod oracle {
    //! Slow reference evaluation of `₂F₁(1, b; 1 + b; x)` by adaptive
    //! Gauss–Kronrod quadrature of the Euler integral
    //!
    //! `₂F₁(a, b; c; x) = ∫₀¹ t^{b−1}(1 − t)^{c−b−1}(1 − xt)^{−a} dt / B(b, c − b)`.
    //!
    //! For the model family `B(b, 1) = 1/b`; the substitution `t = s^{1/b}`
    //! removes the endpoint singularity, leaving `∫₀¹ ds / (1 − x s^{1/b})`.

    use std::collections::BinaryHeap;

    use super::{Hyp2F1Params, SpecFunError};

    const DEFAULT_REL_TOL: f64 = 1e-13;
    const MAX_SUBDIVISIONS: usize = 20_000;

    /// Oracle evaluation at the default tolerance (error ≤ 1e−13·|F|, which
    /// is tighter than 1e−12 absolute since `0 < F ≤ 1` in this family).
    pub fn hyp2f1_oracle(a: f64, b: f64, c: f64, x: f64) -> Result<f64, SpecFunError> {
        hyp2f1_oracle_tol(a, b, c, x, DEFAULT_REL_TOL)
    }

    pub fn hyp2f1_oracle_tol(
        a: f64,
        b: f64,
        c: f64,
        x: f64,
        rel_tol: f64,
    ) -> Result<f64, SpecFunError> {
        Hyp2F1Params { a, b, c, x }.check()?;
        let inv_b = 1.0 / b;
        let f = |s: f64| 1.0 / (1.0 - x * s.powf(inv_b));
        adaptive_gauss_kronrod(f, 0.0, 1.0, rel_tol)
    }

    // 15-point Kronrod nodes/weights with the embedded 7-point Gauss rule.
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
    const WG: [f64; 4] = [
        0.129_484_966_168_869_693_270_611_432_679_082,
        0.279_705_391_489_276_667_901_467_771_423_780,
        0.381_830_050_505_118_944_950_369_775_488_975,
        0.417_959_183_673_469_387_755_102_040_816_327,
    ];

    struct Segment {
        lo: f64,
        hi: f64,
        value: f64,
        error: f64,
    }

    impl PartialEq for Segment {
        fn eq(&self, other: &Self) -> bool {
            self.error == other.error
        }
    }
    impl Eq for Segment {}
    impl PartialOrd for Segment {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Segment {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.error.total_cmp(&other.error)
        }
    }

    fn kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Segment {
        let center = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let fc = f(center);
        let mut kronrod = WGK[7] * fc;
        let mut gauss = WG[3] * fc;
        for j in 0..7 {
            let dx = half * XGK[j];
            let pair = f(center - dx) + f(center + dx);
            kronrod += WGK[j] * pair;
            if j % 2 == 1 {
                gauss += WG[j / 2] * pair;
            }
        }
        Segment {
            lo,
            hi,
            value: kronrod * half,
            error: ((kronrod - gauss) * half).abs(),
        }
    }

    fn adaptive_gauss_kronrod<F: Fn(f64) -> f64>(
        f: F,
        lo: f64,
        hi: f64,
        rel_tol: f64,
    ) -> Result<f64, SpecFunError> {
        let mut heap = BinaryHeap::new();
        heap.push(kronrod(&f, lo, hi));
        for _ in 0..MAX_SUBDIVISIONS {
            let (value, error): (f64, f64) = heap
                .iter()
                .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
            if error <= rel_tol * value.abs() {
                return Ok(value);
            }
            let worst = heap.pop().expect("heap is never empty");
            let mid = 0.5 * (worst.lo + worst.hi);
            heap.push(kronrod(&f, worst.lo, mid));
            heap.push(kronrod(&f, mid, worst.hi));
        }
        let (value, error): (f64, f64) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
        Err(SpecFunError::QuadratureNotConverged {
            achieved: error,
            requested: rel_tol * value.abs(),
        })
    }
}
