//! Momentum-space zones around the energy shell: parameters, shell sampling,
//! geometric margins, resonance classification and cutoff symbols.

mod classify;
mod geometry;

pub use classify::{classify, CellLabel, ClassifiedCell, ResonantComponent, ZoneDecomposition};
pub use geometry::{arc_measure, arc_measure_vec, build_cutoff, smooth_step, CutoffSymbol};

use serde::Serialize;

use crate::apsymbol::BaseSymbol;
use crate::{Error, Result};

/// Exponents and constants that fix the zone scales
/// `gamma_j = c eps^{1/2} h^{-delta_j}` and the shell width `C0 eps + h^{1 - varsigma}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZoneParams {
    pub eps: f64,
    pub h: f64,
    pub vartheta: f64,
    pub deltas: Vec<f64>,
    pub varsigma: f64,
    pub sigma: f64,
    pub c: f64,
    pub c0: f64,
    /// Resonant components must have diameter at most `diameter_factor * c * gamma_j`.
    pub diameter_factor: f64,
}

impl ZoneParams {
    /// Defaults for dimension `d` and `steps` gauge steps:
    /// `delta_j = vartheta j / (6 steps)`, `varsigma = delta_1 / 2`,
    /// `sigma = delta_1 / 4`, `c = 1`, `C0 = 2 sup|B|`.
    pub fn with_defaults(eps: f64, h: f64, dim: usize, steps: usize, sup_b: f64) -> Result<Self> {
        let p = Self::defaults(eps, h, dim, steps, sup_b);
        p.validate()?;
        Ok(p)
    }

    /// The same defaults without validation, for callers that override fields first.
    pub fn defaults(eps: f64, h: f64, dim: usize, steps: usize, sup_b: f64) -> Self {
        let vartheta = if eps > 0.0 && eps > h {
            eps.ln() / h.ln()
        } else {
            1.0
        };
        let k = steps.max(1) as f64;
        let levels = dim.saturating_sub(1).max(1);
        let deltas: Vec<f64> = (1..=levels)
            .map(|j| vartheta / (6.0 * k) * j as f64)
            .collect();
        let d1 = deltas[0];
        Self {
            eps,
            h,
            vartheta,
            deltas,
            varsigma: d1 / 2.0,
            sigma: d1 / 4.0,
            c: 1.0,
            c0: 2.0 * sup_b,
            diameter_factor: 4.0,
        }
    }

    /// Zone scale of level `j` (1-based).
    pub fn gamma(&self, j: usize) -> f64 {
        let j = j.clamp(1, self.deltas.len());
        self.c * self.eps.sqrt() * self.h.powf(-self.deltas[j - 1])
    }

    /// Half-width of the energy shell.
    pub fn shell_width(&self) -> f64 {
        self.c0 * self.eps + self.h.powf(1.0 - self.varsigma)
    }

    /// Smallest admissible cutoff margin `h^{1 - varsigma}`.
    pub fn min_margin(&self) -> f64 {
        self.h.powf(1.0 - self.varsigma)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.h > 0.0 && self.h < 1.0) {
            return bad(format!("h must lie in (0, 1), got {}", self.h));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return bad(format!("eps must be nonnegative, got {}", self.eps));
        }
        if !(self.vartheta > 0.0) {
            return bad(format!("vartheta must be positive, got {}", self.vartheta));
        }
        if self.eps > self.h.powf(self.vartheta) * (1.0 + 1e-12) {
            return bad(format!(
                "eps = {} exceeds h^vartheta = {}; lower vartheta or eps",
                self.eps,
                self.h.powf(self.vartheta)
            ));
        }
        if self.deltas.is_empty() || self.deltas[0] <= 0.0 {
            return bad("deltas must be positive".into());
        }
        if self.deltas.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!(
                "deltas must increase strictly, got {:?}",
                self.deltas
            ));
        }
        if !(self.varsigma > 0.0 && self.varsigma < self.deltas[0]) {
            return bad(format!(
                "varsigma = {} must lie in (0, delta_1 = {})",
                self.varsigma, self.deltas[0]
            ));
        }
        if !(self.sigma > 0.0) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.c > 0.0 && self.c0 >= 0.0 && self.diameter_factor > 0.0) {
            return bad("c, diameter_factor must be positive and C0 nonnegative".into());
        }
        if self.gamma(1) >= 1.0 {
            return bad(format!(
                "gamma_1 = {} is not below 1; decrease c or delta_1",
                self.gamma(1)
            ));
        }
        Ok(())
    }

    /// Human-readable notes on admissible but unusual settings.
    pub fn notes(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.eps < self.h {
            out.push(format!(
                "eps = {} is below h = {}; zone scales shrink accordingly",
                self.eps, self.h
            ));
        }
        out
    }
}

/// Sampled energy shell `{ |A0 - tau| <= width }` on a uniform grid.
#[derive(Clone, Debug, Serialize)]
pub struct EnergyShell {
    pub tau: f64,
    pub width: f64,
    pub step: f64,
    /// Lower corner of the grid box.
    pub origin: Vec<f64>,
    /// Cells per axis.
    pub counts: Vec<usize>,
    /// Integer indices of cells meeting the shell, sorted.
    pub cells: Vec<Vec<usize>>,
}

impl EnergyShell {
    pub fn new(base: &BaseSymbol, tau: f64, width: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && width >= 0.0) {
            return Err(Error::Config(
                "shell step must be positive and width nonnegative".into(),
            ));
        }
        let r = base.sublevel_radius(tau + width);
        if !r.is_finite() {
            return Err(Error::Config("base symbol is not elliptic".into()));
        }
        let d = base.dim();
        let half = r + step;
        let n = ((2.0 * half) / step).ceil() as usize;
        if n.saturating_pow(d as u32) > 50_000_000 {
            return Err(Error::Resource {
                what: "shell grid cells".into(),
                cap: 50_000_000,
            });
        }
        let origin = vec![-half; d];
        let counts = vec![n; d];
        let mut shell = Self {
            tau,
            width,
            step,
            origin,
            counts,
            cells: Vec::new(),
        };
        let total = n.pow(d as u32);
        let lip_pad = |c: &[f64]| {
            let g = base.gradient(c);
            let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            let hn = base.hessian(c).iter().map(|x| x.abs()).fold(0.0, f64::max) * d as f64;
            let rad = 0.5 * step * (d as f64).sqrt();
            gn * rad + 0.5 * hn * rad * rad
        };
        for flat in 0..total {
            let idx = shell.unflatten(flat);
            let c = shell.center(&idx);
            let a = base.value(&c);
            let pad = lip_pad(&c);
            if a + pad >= tau - width && a - pad <= tau + width {
                shell.cells.push(idx);
            }
        }
        shell.cells.sort();
        Ok(shell)
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        self.counts
            .iter()
            .map(|&n| {
                let i = flat % n;
                flat /= n;
                i
            })
            .collect()
    }

    pub fn center(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .zip(&self.origin)
            .map(|(&i, o)| o + (i as f64 + 0.5) * self.step)
            .collect()
    }

    pub fn cell_box(&self, idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let lo: Vec<f64> = idx
            .iter()
            .zip(&self.origin)
            .map(|(&i, o)| o + i as f64 * self.step)
            .collect();
        let hi = lo.iter().map(|x| x + self.step).collect();
        (lo, hi)
    }

    /// Exact shell predicate at a point.
    pub fn contains(&self, base: &BaseSymbol, xi: &[f64]) -> bool {
        (base.value(xi) - self.tau).abs() <= self.width
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        self.cells.iter().map(|c| self.center(c)).collect()
    }
}

/// `min over shell cells of |A0(xi) - lambda| + |grad A0(xi)|`.
pub fn microhyperbolicity_margin(base: &BaseSymbol, lambda: f64, shell: &EnergyShell) -> f64 {
    shell
        .centers()
        .iter()
        .map(|c| {
            let g = base.gradient(c);
            (base.value(c) - lambda).abs() + g.iter().map(|x| x * x).sum::<f64>().sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Minimum of the tangential Hessian of `A0` over level-set points found in
/// the shell cells. Vacuous (infinite) in one dimension.
pub fn convexity_margin(base: &BaseSymbol, lambda: f64, shell: &EnergyShell) -> f64 {
    let d = shell.dim();
    if d == 1 {
        return f64::INFINITY;
    }
    let mut best = f64::INFINITY;
    for c in shell.centers() {
        let Some(p) = project_to_level(base, lambda, &c) else {
            continue;
        };
        if p.iter().zip(&c).any(|(a, b)| (a - b).abs() > shell.step) {
            continue;
        }
        let g = base.gradient(&p);
        let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if gn == 0.0 {
            return 0.0;
        }
        let hs = base.hessian(&p);
        let tangents = tangent_basis(&g);
        for t in tangents {
            let mut q = 0.0;
            for i in 0..d {
                for j in 0..d {
                    q += t[i] * hs[i * d + j] * t[j];
                }
            }
            best = best.min(q);
        }
    }
    best
}

/// Newton steps along the gradient onto `{A0 = lambda}`.
pub(crate) fn project_to_level(base: &BaseSymbol, lambda: f64, start: &[f64]) -> Option<Vec<f64>> {
    let mut p = start.to_vec();
    for _ in 0..50 {
        let f = base.value(&p) - lambda;
        let g = base.gradient(&p);
        let g2: f64 = g.iter().map(|x| x * x).sum();
        if g2 == 0.0 {
            return None;
        }
        for (x, gi) in p.iter_mut().zip(&g) {
            *x -= f * gi / g2;
        }
        if f.abs() < 1e-13 * (1.0 + lambda.abs()) {
            return Some(p);
        }
    }
    ((base.value(&p) - lambda).abs() < 1e-9).then_some(p)
}

/// Orthonormal basis of the complement of `g` (Gram-Schmidt on coordinate axes).
pub(crate) fn tangent_basis(g: &[f64]) -> Vec<Vec<f64>> {
    let d = g.len();
    let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut basis: Vec<Vec<f64>> = vec![g.iter().map(|x| x / gn).collect()];
    for axis in 0..d {
        let mut v = vec![0.0; d];
        v[axis] = 1.0;
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= dot * bi;
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            basis.push(v.iter().map(|x| x / n).collect());
        }
        if basis.len() == d {
            break;
        }
    }
    basis.remove(0);
    basis
}

/// Grid step `min(gamma_1 / 8, h^{1 - varsigma} / 4)`.
pub fn default_step(params: &ZoneParams) -> f64 {
    let g = params.gamma(1);
    let m = params.min_margin() / 4.0;
    if g > 0.0 {
        (g / 8.0).min(m)
    } else {
        m
    }
}
