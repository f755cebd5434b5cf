//! Criterion functions built from the coefficients: the family `G_a`, its
//! linearisation `H`, and the jump functionals `I_a` and `I`.
//!
//! `I_a` is evaluated from its single-integral form
//! `∫ (z/x + (1 - (1 + z/x)^{1-a}) / (1 - a)) π(dz)`, exactly for atomic `π`
//! and by adaptive quadrature otherwise.

use std::io::{self, Write};

use crate::error::{domain, Result};
use crate::model::{FragmentationKernel, JumpFunctionals, JumpMeasure, ModelSpec};

/// `|a - 1|` below which `G_a` is not evaluated; use [`eval_h`] instead.
pub const A_NEAR_ONE: f64 = 1e-6;

/// Signed contributions to a criterion value; `value` is their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Terms {
    pub growth: f64,
    pub diffusion: f64,
    pub catastrophe: f64,
    pub jump: f64,
}

impl Terms {
    pub fn sum(&self) -> f64 {
        self.growth + self.diffusion + self.catastrophe + self.jump
    }
}

/// One evaluation of `G_a(x)` or `H(x)` (the latter reported with `a = 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionPoint {
    pub x: f64,
    pub a: f64,
    pub value: f64,
    pub terms: Terms,
}

pub fn kernel_moment(kappa: &FragmentationKernel, u: f64) -> Result<f64> {
    kappa.moment(u)
}

pub fn kernel_log_moment(kappa: &FragmentationKernel, tau: f64) -> Result<f64> {
    kappa.log_moment(tau)
}

pub fn jump_functionals(pi: &JumpMeasure) -> Result<JumpFunctionals> {
    pi.functionals()
}

/// `y - ((1 + y)^{1-a} - 1) / (1 - a)`, the integrand of `I_a` at `y = z/x`.
/// At `a = 1` this is `y - ln(1 + y)`. Non-negative for `y >= 0`.
pub(crate) fn ia_integrand(a: f64, y: f64) -> f64 {
    if y < 0.05 {
        // Σ_{k≥2} (-1)^k a(a+1)…(a+k-2)/k! y^k
        let mut term = 0.5 * a * y * y;
        let mut sum = term;
        let mut k = 2.0;
        while term.abs() > 1e-17 * sum.abs() {
            term *= -(a + k - 1.0) / (k + 1.0) * y;
            sum += term;
            k += 1.0;
        }
        sum
    } else if a == 1.0 {
        y - y.ln_1p()
    } else {
        y + ((1.0 - a) * y.ln_1p()).exp_m1() / (a - 1.0)
    }
}

fn check_x(op: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(domain(op, format!("x = {x} must be finite and > 0")))
    }
}

fn i_a_unchecked(pi: &JumpMeasure, x: f64, a: f64) -> Result<f64> {
    if pi.is_zero() {
        return Ok(0.0);
    }
    pi.integrate(|z| ia_integrand(a, z / x))
}

pub fn eval_i_a(m: &ModelSpec, x: f64, a: f64) -> Result<f64> {
    check_x("eval_I_a", x)?;
    if !(a > 0.0) || a == 1.0 {
        return Err(domain("eval_I_a", format!("a = {a} must be > 0 and != 1")));
    }
    i_a_unchecked(m.pi(), x, a)
}

/// `I(x) = -∫ [ln(1 + z/x) - z/x] π(dz)`.
pub fn eval_i(m: &ModelSpec, x: f64) -> Result<f64> {
    check_x("eval_I", x)?;
    i_a_unchecked(m.pi(), x, 1.0)
}

/// `G_a` with its `a`-dependent constants precomputed, for repeated
/// evaluation along simulated paths.
#[derive(Debug, Clone)]
pub struct GaEvaluator<'m> {
    model: &'m ModelSpec,
    a: f64,
    // (1 - E[Θ^{1-a}]) / (1 - a)
    catastrophe_factor: f64,
}

impl<'m> GaEvaluator<'m> {
    pub fn new(model: &'m ModelSpec, a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(domain("eval_G_a", format!("a = {a} must be > 0")));
        }
        if (a - 1.0).abs() < A_NEAR_ONE {
            return Err(domain(
                "eval_G_a",
                format!("|a - 1| = {:e} < {A_NEAR_ONE:e}; use eval_H for the linearisation at a = 1", (a - 1.0).abs()),
            ));
        }
        let catastrophe_factor = model.kappa().one_minus_moment(1.0 - a)? / (1.0 - a);
        Ok(Self {
            model,
            a,
            catastrophe_factor,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn point(&self, x: f64) -> Result<CriterionPoint> {
        check_x("eval_G_a", x)?;
        let m = self.model;
        let a = self.a;
        let scale = a - 1.0;
        let r = m.r().eval(x);
        let p = m.p().eval(x);
        let jump = if p == 0.0 { 0.0 } else { p * i_a_unchecked(m.pi(), x, a)? };
        let catastrophe = if r == 0.0 { 0.0 } else { r * self.catastrophe_factor };
        let terms = Terms {
            growth: scale * m.g().eval(x) / x,
            diffusion: -scale * a * m.sigma2().eval(x) / (x * x),
            catastrophe: -scale * catastrophe,
            jump: -scale * jump,
        };
        Ok(CriterionPoint {
            x,
            a,
            value: terms.sum(),
            terms,
        })
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        self.point(x).map(|p| p.value)
    }
}

/// `G_a(x) = (a-1)(g/x - a σ²/x² - r (1 - 𝔼[Θ^{1-a}])/(1-a) - p I_a)`.
pub fn eval_g_a(m: &ModelSpec, x: f64, a: f64) -> Result<CriterionPoint> {
    GaEvaluator::new(m, a)?.point(x)
}

/// `H(x) = g/x - σ²/x² + r 𝔼[ln Θ] - p I(x)`, the limit of `G_a / (a - 1)`.
pub fn eval_h(m: &ModelSpec, x: f64) -> Result<CriterionPoint> {
    check_x("eval_H", x)?;
    let r = m.r().eval(x);
    let p = m.p().eval(x);
    let log_theta = m.kappa().log_moment(0.0)?;
    let jump = if p == 0.0 { 0.0 } else { p * i_a_unchecked(m.pi(), x, 1.0)? };
    let terms = Terms {
        growth: m.g().eval(x) / x,
        diffusion: -m.sigma2().eval(x) / (x * x),
        catastrophe: if r == 0.0 { 0.0 } else { r * log_theta },
        jump: -jump,
    };
    Ok(CriterionPoint {
        x,
        a: 1.0,
        value: terms.sum(),
        terms,
    })
}

pub const CRITERION_CSV_HEADER: &str = "x,a,value,term_growth,term_diffusion,term_catastrophe,term_jump";

pub fn write_criterion_csv<W: Write>(mut out: W, points: &[CriterionPoint]) -> io::Result<()> {
    writeln!(out, "{CRITERION_CSV_HEADER}")?;
    for p in points {
        writeln!(
            out,
            "{:e},{},{:e},{:e},{:e},{:e},{:e}",
            p.x, p.a, p.value, p.terms.growth, p.terms.diffusion, p.terms.catastrophe, p.terms.jump
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, CoefficientFn, ModelConfig};
    use std::f64::consts::LN_2;

    fn with_pi(pi: JumpMeasure) -> ModelSpec {
        let mut c = ModelConfig::zero();
        c.pi = pi;
        build_model(c).unwrap()
    }

    fn unit_atom() -> ModelSpec {
        with_pi(JumpMeasure::Atoms {
            points: vec![(1.0, 1.0)],
        })
    }

    fn m_g() -> ModelSpec {
        build_model(ModelConfig {
            g: CoefficientFn::Linear { c: 2.0 },
            sigma2: CoefficientFn::Power { c: 1.0, beta: 2.0 },
            p: CoefficientFn::Zero,
            r: CoefficientFn::Affine { c0: 1.0, c1: 0.0 },
            pi: JumpMeasure::Zero,
            kappa: FragmentationKernel::Atom { theta: 0.5 },
        })
        .unwrap()
    }

    #[test]
    fn integrand_series_matches_direct_form() {
        for a in [0.3, 1.0, 1.5, 4.0] {
            for y in [0.049, 0.0499] {
                let direct = if a == 1.0 {
                    y - f64::ln_1p(y)
                } else {
                    y + (1.0 - (1.0 + y).powf(1.0 - a)) / (1.0 - a)
                };
                let s = ia_integrand(a, y);
                assert!((s / direct - 1.0).abs() < 1e-10, "a={a} y={y} {s} {direct}");
            }
        }
        assert!(ia_integrand(2.0, 1e-9) > 0.0);
    }

    #[test]
    fn i_a_unit_atom() {
        let m = unit_atom();
        assert!((eval_i_a(&m, 1.0, 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((eval_i(&m, 1.0).unwrap() - (1.0 - LN_2)).abs() < 1e-15);
        assert!((eval_i(&m, 2.0).unwrap() - (0.5 - 1.5f64.ln())).abs() < 1e-15);
        assert!((eval_i_a(&m, 1.0, 1.001).unwrap() - (1.0 - LN_2)).abs() < 1e-3);
    }

    #[test]
    fn zero_measure_gives_zero() {
        let m = ModelSpec::zero();
        for x in [0.1, 1.0, 10.0] {
            assert_eq!(eval_i(&m, x).unwrap(), 0.0);
            assert_eq!(eval_i_a(&m, x, 0.5).unwrap(), 0.0);
        }
    }

    #[test]
    fn domain_errors() {
        let m = unit_atom();
        assert!(eval_i_a(&m, 0.0, 2.0).is_err());
        assert!(eval_i_a(&m, 1.0, 1.0).is_err());
        assert!(eval_i(&m, -1.0).is_err());
        assert!(eval_g_a(&m, 1.0, 1.0 + 1e-7).is_err());
    }

    #[test]
    fn g_a_constant_for_m_g() {
        let m = m_g();
        for x in [0.01, 1.0, 37.0] {
            let p = eval_g_a(&m, x, 2.0).unwrap();
            assert!((p.value + 1.0).abs() < 1e-12, "{p:?}");
            assert!((p.value - p.terms.sum()).abs() < 1e-12);
        }
    }

    #[test]
    fn g_a_pure_growth() {
        let mut c = ModelConfig::zero();
        c.g = CoefficientFn::Linear { c: 1.0 };
        let m = build_model(c).unwrap();
        assert_eq!(eval_g_a(&m, 5.0, 3.0).unwrap().value, 2.0);
    }

    #[test]
    fn identity_kernel_has_no_catastrophe_term() {
        let mut c = ModelConfig::zero();
        c.r = CoefficientFn::Affine { c0: 3.0, c1: 1.0 };
        let m = build_model(c).unwrap();
        for a in [0.2, 0.9, 1.5, 3.0] {
            assert_eq!(eval_g_a(&m, 2.0, a).unwrap().terms.catastrophe, 0.0);
        }
    }

    #[test]
    fn infinite_kernel_moment_propagates() {
        let mut c = ModelConfig::zero();
        c.kappa = FragmentationKernel::Uniform;
        let m = build_model(c).unwrap();
        assert!(matches!(eval_g_a(&m, 1.0, 2.5), Err(crate::Error::InfiniteMoment(_))));
    }

    #[test]
    fn h_for_m1() {
        let m = build_model(ModelConfig {
            g: CoefficientFn::Linear { c: 0.1 },
            sigma2: CoefficientFn::Linear { c: 1.0 },
            p: CoefficientFn::Zero,
            r: CoefficientFn::Affine { c0: 1.0, c1: 0.0 },
            pi: JumpMeasure::Zero,
            kappa: FragmentationKernel::Atom { theta: 0.5 },
        })
        .unwrap();
        let h = eval_h(&m, 10.0).unwrap();
        assert!((h.value + LN_2).abs() < 1e-12, "{h:?}");
    }

    #[test]
    fn csv_has_header_and_rows() {
        let m = m_g();
        let pts: Vec<_> = [1.0, 2.0].iter().map(|&x| eval_g_a(&m, x, 2.0).unwrap()).collect();
        let mut buf = Vec::new();
        write_criterion_csv(&mut buf, &pts).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with(CRITERION_CSV_HEADER));
    }
}
