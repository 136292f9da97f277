use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::quad::{gauss_legendre, integrate_gl, intervals_where_nonpositive};
use crate::zones::ZoneParams;
use crate::{Error, Result};

use super::{ids_pipeline, PipelineOptions, SpectralProblem};

#[derive(Clone, Debug, Serialize)]
pub struct SpectralFunctionValue {
    pub x: Vec<f64>,
    pub value: f64,
    /// x-independent part, equal to the pipeline IDS.
    pub mean: f64,
    pub oscillating: f64,
}

/// First-order diagonal spectral kernel in `d = 1`, reusable across `x`.
///
/// With `Pi = theta(tau - A''_0(hD))` and the accumulated generator
/// first-order generator `G = eps sum_theta P_theta(xi) e^{i theta x}`, the kernel is taken from
/// `Pi + (i/h)[G, Pi]`, whose diagonal is
/// `(2 pi h)^{-1} [ int Pi + (i/h) sum_theta e^{i theta x} int P_theta (Pi(xi - h theta/2) - Pi(xi + h theta/2)) ]`.
#[derive(Clone, Debug)]
pub struct LeadingKernel {
    pub h: f64,
    pub mean: f64,
    /// `(theta, int P_theta (Pi(xi - h theta / 2) - Pi(xi + h theta / 2)) dxi)`.
    pub modes: Vec<(f64, Complex64)>,
}

impl LeadingKernel {
    pub fn new(
        problem: &SpectralProblem,
        tau: f64,
        params: &ZoneParams,
        steps: usize,
        opts: &PipelineOptions,
    ) -> Result<Self> {
        if problem.dim() != 1 {
            return Err(Error::Unsupported(format!(
                "leading spectral function in dimension {} (use the oracle)",
                problem.dim()
            )));
        }
        let ids = ids_pipeline(problem, tau, params, steps, opts)?;
        let h = problem.h;
        let mut out = Self {
            h,
            mean: ids.value,
            modes: Vec::new(),
        };
        let Some(chain) = ids.chains.iter().find(|c| c.label == "non_resonant") else {
            return Ok(out);
        };
        let base = &problem.base;
        let w = params.shell_width();
        let a_eff = chain.effective_zero();
        let inside = |x: f64| {
            let a = base.value(&[x]);
            if (a - tau).abs() <= w {
                a_eff.eval(&[x]).re <= tau
            } else {
                a < tau
            }
        };
        let r = base.sublevel_radius(tau + w) + 1.0;
        let mut sign = |x: f64| if inside(x) { -1.0 } else { 1.0 };
        let pieces = intervals_where_nonpositive(&mut sign, -r, r, 4096);

        let mut generator = crate::apsymbol::APSymbol::zero(chain.effective.module().clone());
        for step in &chain.steps {
            if let Some(g1) = step.generator.order(1) {
                generator = generator.add(&g1.scale(Complex64::new(problem.eps, 0.0)))?;
            }
        }
        let rule = gauss_legendre(20);
        for (theta, p) in generator.terms() {
            if theta.is_zero() {
                continue;
            }
            let t = theta.embedding()[0];
            let s = 0.5 * h * t;
            let mut acc = Complex64::new(0.0, 0.0);
            let window = |c: f64| -> Complex64 {
                let re = integrate_gl(|y| p.eval(&[y]).re, c - s, c + s, &rule);
                let im = integrate_gl(|y| p.eval(&[y]).im, c - s, c + s, &rule);
                Complex64::new(re, im)
            };
            for (a, b) in &pieces {
                acc += window(*b) - window(*a);
            }
            out.modes.push((t, acc));
        }
        Ok(out)
    }

    pub fn value(&self, x: f64) -> SpectralFunctionValue {
        let norm = 2.0 * PI * self.h;
        let osc: Complex64 = self
            .modes
            .iter()
            .map(|(t, c)| Complex64::from_polar(1.0, t * x) * Complex64::i() / self.h * c)
            .sum();
        let oscillating = osc.re / norm;
        SpectralFunctionValue {
            x: vec![x],
            value: self.mean + oscillating,
            mean: self.mean,
            oscillating,
        }
    }
}

/// Leading spectral function `e(x, x, tau)` at one point (`d = 1`).
pub fn spectral_function_leading(
    problem: &SpectralProblem,
    x: f64,
    tau: f64,
    params: &ZoneParams,
    steps: usize,
    opts: &PipelineOptions,
) -> Result<SpectralFunctionValue> {
    Ok(LeadingKernel::new(problem, tau, params, steps, opts)?.value(x))
}
