//! Normal-form engine: generators, conjugation series and the iterated
//! elimination of frequencies outside the retained subspace.

mod graded;

pub use graded::Graded;

use num_complex::Complex64;
use serde::Serialize;

use crate::apsymbol::{APSymbol, BaseSymbol, CoefficientFn, EvalCtx};
use crate::freqgeom::{QuasiLatticeSubspace, SumsetK};
use crate::zones::{CellLabel, ZoneDecomposition, ZoneParams};
use crate::{Error, Result};

/// Cap on the number of points used for sup-norm proxies.
const PROXY_POINTS: usize = 512;

/// Divided difference `A0(xi + h theta / 2) - A0(xi - h theta / 2)`.
pub fn divisor(
    base: &BaseSymbol,
    module: &std::sync::Arc<crate::freqgeom::FrequencyModule>,
    coords: &[i64],
    h: f64,
) -> CoefficientFn {
    let a = CoefficientFn::base(base.clone());
    let minus: Vec<i64> = coords.iter().map(|c| -c).collect();
    a.shift_lattice(module, coords, 0.5 * h)
        .sub(&a.shift_lattice(module, &minus, 0.5 * h))
}

/// Generator `P_theta = i h (A0(xi + h theta/2) - A0(xi - h theta/2))^{-1} b_theta`
/// for `theta` outside `V`, and `P_theta = 0` inside.
///
/// Every divisor is checked on the sample points: `|divisor / h| >= gamma / 2`.
#[allow(non_snake_case)]
pub fn build_P(
    b: &APSymbol,
    base: &BaseSymbol,
    v: &QuasiLatticeSubspace,
    gamma: f64,
    h: f64,
    samples: &[Vec<f64>],
) -> Result<APSymbol> {
    let module = b.module().clone();
    let mut terms = Vec::new();
    let mut ctx = EvalCtx::new();
    for (theta, coef) in b.terms() {
        if v.contains_frequency(theta) {
            continue;
        }
        let den = divisor(base, &module, theta.coords(), h);
        for p in samples {
            let value = den.eval_with(&mut ctx, p).norm() / h;
            if !(value >= 0.5 * gamma) {
                return Err(Error::SmallDivisor {
                    frequency: theta.coords().to_vec(),
                    xi: p.clone(),
                    value,
                    threshold: 0.5 * gamma,
                });
            }
        }
        terms.push((
            theta.coords().to_vec(),
            coef.scale(Complex64::new(0.0, h)).div(&den),
        ));
    }
    APSymbol::new(module, terms, b.is_hermitian())
}

/// Truncated conjugation `sum_{n<K} (-i/h)^n / n! Ad_G^n(A)` for a graded
/// generator `G` (which carries its powers of `eps`).
///
/// Returns the expansion (orders up to `max_order`) and the remainder proxy
/// `sup |(i/h)^K Ad_G^K(A)| / (K-1)!`.
pub fn conjugate_expand(
    a: &Graded,
    g: &Graded,
    h: f64,
    k: usize,
    max_order: usize,
    eps: f64,
    points: &[Vec<f64>],
) -> Result<(Graded, f64)> {
    if k == 0 {
        return Err(Error::Config("conjugation order must be at least 1".into()));
    }
    let mut out = a.clone();
    let mut cur = a.clone();
    let mut fact = 1.0;
    for n in 1..k {
        cur = Graded::commutator_i_over_h(g, &cur, h, max_order)?;
        if cur.is_zero() {
            return Ok((out, 0.0));
        }
        fact *= n as f64;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        out = out.add(&cur.scale(sign / fact))?;
    }
    let next = Graded::commutator_i_over_h(g, &cur, h, max_order)?;
    let proxy = next.weighted_sup(eps, points) / fact;
    Ok((out, proxy))
}

/// Region and retained subspace for one chain.
#[derive(Clone, Debug)]
pub struct ChainSupport {
    pub label: String,
    pub subspace: QuasiLatticeSubspace,
    pub gamma: f64,
    pub samples: Vec<Vec<f64>>,
}

/// Chain supports for the non-resonant zone and every resonant component.
pub fn chain_supports(z: &ZoneDecomposition) -> Vec<ChainSupport> {
    let d = z.shell.dim();
    let cell_samples = |idx: &[usize]| {
        let (lo, hi) = z.shell.cell_box(idx);
        let mut out = vec![z.shell.center(idx)];
        for mask in 0..(1usize << d) {
            out.push(
                (0..d)
                    .map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] })
                    .collect(),
            );
        }
        out
    };
    let mut out = Vec::new();
    let nonres: Vec<Vec<f64>> = z
        .cells
        .iter()
        .filter(|c| c.label == CellLabel::NonResonant)
        .flat_map(|c| cell_samples(&c.index))
        .collect();
    if !nonres.is_empty() {
        out.push(ChainSupport {
            label: "non_resonant".into(),
            subspace: QuasiLatticeSubspace::zero(d),
            gamma: z.params.gamma(1),
            samples: nonres,
        });
    }
    for comp in &z.components {
        out.push(ChainSupport {
            label: format!("component_{}", comp.id),
            subspace: comp.subspace.clone(),
            gamma: comp.gamma,
            samples: comp
                .cells
                .iter()
                .flat_map(|&c| cell_samples(&z.cells[c].index))
                .collect(),
        });
    }
    out
}

#[derive(Clone, Debug)]
pub struct GaugeSettings {
    /// Target remainder order: stop once the proxy is at most `h^{3M}`.
    pub m: u32,
    pub max_steps: usize,
    /// Fail with a convergence report when the target is missed.
    pub require_target: bool,
    /// Stop early once the target is met.
    pub stop_at_target: bool,
}

impl Default for GaugeSettings {
    fn default() -> Self {
        Self {
            m: 1,
            max_steps: 4,
            require_target: false,
            stop_at_target: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GaugeStep {
    pub index: usize,
    pub generator: Graded,
    pub eliminated: Vec<Vec<i64>>,
    pub gamma: f64,
    pub eps_before: f64,
    pub eps_after: f64,
    pub remainder_proxy: f64,
    /// `sum_n eps^n sup |off-V part|` after the step.
    pub residual_sup: f64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct GaugeChain {
    pub label: String,
    pub base: BaseSymbol,
    pub eps: f64,
    pub h: f64,
    pub subspace: QuasiLatticeSubspace,
    pub steps: Vec<GaugeStep>,
    /// On-`V` perturbation `B''` by order.
    pub effective: Graded,
    /// Off-`V` part discarded from the effective operator.
    pub residual: Graded,
    pub remainder_bound: f64,
    pub target: f64,
    pub max_order: usize,
    pub ad_order: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainSummary {
    pub zone: String,
    pub step: usize,
    pub gamma: f64,
    pub eps_k: f64,
    pub eliminated: usize,
    pub remainder_proxy: f64,
    pub residual_sup: f64,
}

impl GaugeChain {
    /// `A'' = A0 + sum_n eps^n B''_n`.
    pub fn effective_symbol(&self) -> APSymbol {
        let a0 = APSymbol::from_base(self.effective.module().clone(), &self.base);
        a0.add(&self.effective.collapse(self.eps))
            .expect("same module")
    }

    /// Frequency-zero coefficient of `A''`.
    pub fn effective_zero(&self) -> CoefficientFn {
        let zero = self.effective.module().zero();
        let mut parts = vec![CoefficientFn::base(self.base.clone())];
        for (n, s) in self.effective.orders() {
            if let Some(c) = s.terms().get(&zero) {
                parts.push(c.scale(Complex64::new(self.eps.powi(*n as i32), 0.0)));
            }
        }
        CoefficientFn::sum(parts)
    }

    /// `eps_0, eps_1, ...` from `eps_{k+1} = eps_k^2 gamma^{-2}`.
    pub fn eps_sequence(&self) -> Vec<f64> {
        let mut out = vec![self.eps];
        out.extend(self.steps.iter().map(|s| s.eps_after));
        out
    }

    pub fn summaries(&self) -> Vec<ChainSummary> {
        self.steps
            .iter()
            .map(|s| ChainSummary {
                zone: self.label.clone(),
                step: s.index,
                gamma: s.gamma,
                eps_k: s.eps_before,
                eliminated: s.eliminated.len(),
                remainder_proxy: s.remainder_proxy,
                residual_sup: s.residual_sup,
            })
            .collect()
    }

    /// Off-`V` frequencies present in `B''` (empty by construction).
    pub fn support_violations(&self, sumset: &SumsetK) -> Vec<Vec<i64>> {
        self.effective
            .support()
            .into_iter()
            .filter(|f| !self.subspace.contains_frequency(f) || !sumset.contains(f.coords()))
            .map(|f| f.coords().to_vec())
            .collect()
    }
}

fn proxy_points(samples: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if samples.len() <= PROXY_POINTS {
        return samples.to_vec();
    }
    let stride = samples.len() as f64 / PROXY_POINTS as f64;
    (0..PROXY_POINTS)
        .map(|i| samples[(i as f64 * stride) as usize].clone())
        .collect()
}

/// `ceil(3M / vartheta)`: highest power of `eps` kept in the graded symbols.
pub fn max_order(m: u32, vartheta: f64) -> usize {
    ((3.0 * m as f64 / vartheta) - 1e-9).ceil().max(1.0) as usize
}

/// `ceil(3M / delta_1)` capped at 8: conjugation terms per step.
pub fn ad_order(m: u32, delta1: f64) -> usize {
    (((3.0 * m as f64 / delta1) - 1e-9).ceil() as usize).clamp(2, 8)
}

/// One step: conjugates `A0 + B` by the generator built from `W = off-V part of B`.
///
/// The first-order image of `A0` is `-W` exactly, and higher images of `A0`
/// follow from `(i/h)[G, A0] = W`, so `A0` never enters a composition.
#[allow(clippy::too_many_arguments)]
fn conjugate_step(
    b: &Graded,
    w: &Graded,
    g: &Graded,
    h: f64,
    ad: usize,
    max_order: usize,
    eps: f64,
    points: &[Vec<f64>],
) -> Result<(Graded, f64, Vec<String>)> {
    let cap = max_order + 1;
    let mut out = b.add(&w.scale(-1.0))?;
    let mut cur_b = b.clone();
    let mut cur_w = w.clone();
    let mut fact = 1.0;
    let mut warnings = Vec::new();
    let mut prev_size = b.weighted_sup(eps, points);
    let mut series_proxy = 0.0;
    for n in 1..=ad {
        cur_b = Graded::commutator_i_over_h(g, &cur_b, h, cap)?;
        cur_w = Graded::commutator_i_over_h(g, &cur_w, h, cap)?;
        if cur_b.is_zero() && cur_w.is_zero() {
            break;
        }
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let unscaled = cur_b.add(&cur_w.scale(-1.0 / (n + 1) as f64))?;
        if n == ad {
            series_proxy = unscaled.weighted_sup(eps, points) / fact;
            warnings.push(format!("conjugation series truncated at {ad} terms"));
            break;
        }
        fact *= n as f64;
        let term = unscaled.scale(sign / fact);
        let size = term.weighted_sup(eps, points);
        if eps > 0.0 && size > prev_size / eps {
            warnings.push(format!(
                "conjugation term {n} has size {size:.3e}, above 1/eps times the previous term"
            ));
        }
        prev_size = size;
        out = out.add(&term)?;
    }
    Ok((out, series_proxy, warnings))
}

/// Runs the elimination chain for one support.
pub fn eliminate(
    base: &BaseSymbol,
    perturbation: &APSymbol,
    eps: f64,
    sumset: &SumsetK,
    support: &ChainSupport,
    params: &ZoneParams,
    settings: &GaugeSettings,
) -> Result<GaugeChain> {
    let h = params.h;
    let max_ord = max_order(settings.m, params.vartheta);
    let ad = ad_order(settings.m, params.deltas[0]);
    let target = h.powi(3 * settings.m as i32);
    let points = proxy_points(&support.samples);
    let v = &support.subspace;
    let gamma = support.gamma;

    let start = Graded::single(1, perturbation.clone());
    let (mut b, outside) = start.split_support(sumset);
    let dropped = outside.weighted_sup(eps, &points);
    let mut steps = Vec::new();
    let mut eps_k = eps;
    for index in 0..settings.max_steps {
        let (_, w) = b.split(v);
        if w.is_zero() {
            break;
        }
        let mut g = Graded::zero(b.module().clone());
        for (n, s) in w.orders() {
            g.push(*n, build_P(s, base, v, gamma, h, &support.samples)?)?;
        }
        let g = g.with_hermitian(w.is_hermitian());
        let (next, series_proxy, warnings) =
            conjugate_step(&b, &w, &g, h, ad, max_ord, eps, &points)?;
        let (kept, beyond) = next.split_orders(max_ord);
        let (kept, outside) = kept.split_support(sumset);
        let truncated = beyond.weighted_sup(eps, &points) + outside.weighted_sup(eps, &points);
        let b_next = kept.with_hermitian(b.is_hermitian());
        let residual_sup = b_next.split(v).1.weighted_sup(eps, &points);
        let eps_after = if gamma > 0.0 {
            eps_k * eps_k / (gamma * gamma)
        } else {
            f64::INFINITY
        };
        steps.push(GaugeStep {
            index,
            eliminated: w.support().iter().map(|f| f.coords().to_vec()).collect(),
            generator: g,
            gamma,
            eps_before: eps_k,
            eps_after,
            remainder_proxy: series_proxy + truncated,
            residual_sup,
            warnings,
        });
        eps_k = eps_after;
        b = b_next;
        let so_far = dropped + steps.iter().map(|s| s.remainder_proxy).sum::<f64>() + residual_sup;
        if settings.stop_at_target && so_far <= target {
            break;
        }
    }
    let (effective, residual) = b.split(v);
    let remainder_bound = dropped
        + steps.iter().map(|s| s.remainder_proxy).sum::<f64>()
        + residual.weighted_sup(eps, &points);
    let chain = GaugeChain {
        label: support.label.clone(),
        base: base.clone(),
        eps,
        h,
        subspace: v.clone(),
        steps,
        effective,
        residual,
        remainder_bound,
        target,
        max_order: max_ord,
        ad_order: ad,
    };
    if settings.require_target && chain.remainder_bound > target {
        return Err(Error::Convergence {
            zone: chain.label.clone(),
            detail: format!(
                "remainder proxy {:.3e} above h^(3M) = {target:.3e} after {} steps; eps_k = {:?}",
                chain.remainder_bound,
                chain.steps.len(),
                chain.eps_sequence()
            ),
        });
    }
    Ok(chain)
}
