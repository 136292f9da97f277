//! Semiclassical spectral quantities from the gauge-reduced symbols.

mod fiber;
mod kernel;
mod study;
mod volume;

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::apsymbol::{APSymbol, BaseSymbol};
use crate::freqgeom::{sumset, SumsetK};
use crate::gauge::{chain_supports, eliminate, GaugeChain, GaugeSettings};
use crate::oracle::PeriodicOperator;
use crate::quad::intervals_where_nonpositive;
use crate::zones::{classify, default_step, CellLabel, EnergyShell, ZoneDecomposition, ZoneParams};
use crate::{Error, Execution, Result};

pub use fiber::{resonant_fiber_ids, FiberSettings, ResonantFiberIds};
pub use kernel::{spectral_function_leading, LeadingKernel, SpectralFunctionValue};
pub use study::{
    convergence_study, fit_slope, ConvergenceRow, ConvergenceStudy, SlopeRecord, SpectralTable,
    StudyCase,
};
pub use volume::{
    kappa0_volume, sublevel_area_2d, sublevel_measure_1d, MAX_REFINEMENTS, VOLUME_TOL,
};

/// `A0(hD) + eps B(x, hD)` together with the sumset order used by the gauge chains.
#[derive(Clone, Debug)]
pub struct SpectralProblem {
    pub base: BaseSymbol,
    pub perturbation: APSymbol,
    pub eps: f64,
    pub h: f64,
    pub sumset_k: usize,
}

impl SpectralProblem {
    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn sumset(&self) -> Result<SumsetK> {
        sumset(self.perturbation.module(), self.sumset_k)
    }

    /// Periodic operator for the oracle (lattice modules only).
    pub fn periodic(&self) -> Result<PeriodicOperator> {
        PeriodicOperator::new(
            self.base.clone(),
            self.perturbation.clone(),
            self.eps,
            self.h,
        )
    }

    /// Estimate of `sup |B|` on a box of half-width `r`.
    pub fn sup_perturbation(&self, r: f64) -> f64 {
        let d = self.dim();
        let region = crate::apsymbol::XiBox::new(vec![-r; d], vec![r; d]);
        let res = if d == 1 { 64 } else { 16 };
        self.perturbation
            .sup_norm_estimate(&region, res)
            .unwrap_or(f64::INFINITY)
    }

    /// Estimate of `sup |B|` on a box around the level set of `tau`.
    pub fn sup_perturbation_near(&self, tau: f64) -> f64 {
        self.sup_perturbation(self.base.sublevel_radius(tau.abs() + 1.0) + 1.0)
    }

    /// Default zone parameters for `steps` gauge steps near energy `tau`.
    pub fn default_params(&self, tau: f64, steps: usize) -> Result<ZoneParams> {
        ZoneParams::with_defaults(
            self.eps,
            self.h,
            self.dim(),
            steps,
            self.sup_perturbation_near(tau),
        )
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOptions {
    /// Gauge settings; `max_steps` is overridden by the step count.
    pub gauge: GaugeSettings,
    /// Shell grid step; defaults to [`default_step`].
    pub grid_step: Option<f64>,
    pub fiber: FiberSettings,
    /// Rays for the two-dimensional shell integral (doubled while refining).
    pub rays: usize,
    pub exec: Execution,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            gauge: GaugeSettings::default(),
            grid_step: None,
            fiber: FiberSettings::default(),
            rays: 256,
            exec: Execution::Parallel,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ZoneContribution {
    pub zone: String,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct PipelineIds {
    pub tau: f64,
    /// Sum of the contributions, in order.
    pub value: f64,
    pub contributions: Vec<ZoneContribution>,
    pub decomposition: Option<ZoneDecomposition>,
    pub chains: Vec<GaugeChain>,
    pub notes: Vec<String>,
}

impl PipelineIds {
    fn from_parts(tau: f64, contributions: Vec<ZoneContribution>) -> Self {
        let value = contributions.iter().fold(0.0, |s, c| s + c.value);
        Self {
            tau,
            value,
            contributions,
            decomposition: None,
            chains: Vec::new(),
            notes: Vec::new(),
        }
    }
}

/// Integrated density of states at `tau` after `steps` gauge steps.
///
/// Splits `{A0 <= tau + w}` into the interior `{A0 < tau - w}`, counted with
/// the free volume, and the shell `{|A0 - tau| <= w}`, whose non-resonant
/// part is counted with the frequency-zero effective symbol and whose
/// resonant components are counted fiber by fiber.
pub fn ids_pipeline(
    problem: &SpectralProblem,
    tau: f64,
    params: &ZoneParams,
    steps: usize,
    opts: &PipelineOptions,
) -> Result<PipelineIds> {
    let d = problem.dim();
    if !(1..=2).contains(&d) {
        return Err(Error::Unsupported(format!("IDS pipeline in dimension {d}")));
    }
    params.validate()?;
    let base = &problem.base;
    let h = problem.h;
    let a0 = |x: &[f64]| base.value(x);
    if problem.eps == 0.0 || problem.perturbation.is_zero() {
        let r = base.sublevel_radius(tau.max(0.0)) + 1.0;
        let v = kappa0_volume(&a0, d, tau, h, r, opts.exec)?;
        return Ok(PipelineIds::from_parts(
            tau,
            vec![ZoneContribution {
                zone: "free".into(),
                value: v,
            }],
        ));
    }

    let w = params.shell_width();
    let r_out = base.sublevel_radius(tau + w) + 1.0;
    let interior = kappa0_volume(&a0, d, tau - w, h, r_out, opts.exec)?;
    let step = opts.grid_step.unwrap_or_else(|| default_step(params));
    let shell = EnergyShell::new(base, tau, w, step)?;
    let sums = problem.sumset()?;
    let z = classify(base, &shell, &sums, params, opts.exec)?;
    if let Some(c) = z.critical_cells().next() {
        return Err(Error::Unsupported(format!(
            "the energy shell meets a resonant region at xi = {:?} in dimension 1",
            c.center
        )));
    }
    let settings = GaugeSettings {
        max_steps: steps,
        ..opts.gauge.clone()
    };
    let supports = chain_supports(&z);
    let chains = opts.exec.try_map(&supports, |s| {
        eliminate(
            base,
            &problem.perturbation,
            problem.eps,
            &sums,
            s,
            params,
            &settings,
        )
    })?;

    let mut contributions = vec![ZoneContribution {
        zone: "interior".into(),
        value: interior,
    }];
    let norm = (2.0 * PI * h).powi(d as i32);
    let lookup = CellLookup::new(&z);
    for chain in &chains {
        let value = if chain.label == "non_resonant" {
            let a_eff = chain.effective_zero();
            let f = |x: &[f64]| a_eff.eval(x).re;
            match d {
                1 => shell_sublevel_1d(base, tau, w, &f, r_out)?,
                _ => shell_sublevel_2d(base, tau, w, &f, &lookup, r_out, opts)?,
            }
        } else {
            let id: usize = chain
                .label
                .trim_start_matches("component_")
                .parse()
                .map_err(|_| Error::Numerical(format!("unexpected chain label {}", chain.label)))?;
            let member =
                |x: &[f64]| lookup.component_of(x) == Some(id) && (base.value(x) - tau).abs() <= w;
            resonant_fiber_ids(
                chain,
                tau,
                &member,
                &z.components[id],
                &shell,
                &opts.fiber,
                opts.exec,
            )?
            .volume
        };
        contributions.push(ZoneContribution {
            zone: chain.label.clone(),
            value: value / norm,
        });
    }
    let mut out = PipelineIds::from_parts(tau, contributions);
    out.notes = params.notes();
    out.decomposition = Some(z);
    out.chains = chains;
    Ok(out)
}

/// `|{ |A0 - tau| <= w, f <= tau }|` in one dimension.
fn shell_sublevel_1d<F: Fn(&[f64]) -> f64>(
    base: &BaseSymbol,
    tau: f64,
    w: f64,
    f: &F,
    r: f64,
) -> Result<f64> {
    let mut shell = |x: f64| (base.value(&[x]) - tau).abs() - w;
    let pieces = intervals_where_nonpositive(&mut shell, -r, r, 1024);
    let mut total = 0.0;
    for (a, b) in pieces {
        total += sublevel_measure_1d(|x| f(&[x]) - tau, a, b, 32)?;
    }
    Ok(total)
}

/// Area of the non-resonant shell cells where `f <= tau`, integrated in polar
/// coordinates with the rays cut at cell boundaries.
fn shell_sublevel_2d<F: Fn(&[f64]) -> f64 + Sync>(
    base: &BaseSymbol,
    tau: f64,
    w: f64,
    f: &F,
    lookup: &CellLookup,
    r_max: f64,
    opts: &PipelineOptions,
) -> Result<f64> {
    let ray = |phi: f64| -> f64 {
        let u = [phi.cos(), phi.sin()];
        let at = |r: f64| [r * u[0], r * u[1]];
        let mut shell = |r: f64| (base.value(&at(r)) - tau).abs() - w;
        let mut total = 0.0;
        for (a, b) in intervals_where_nonpositive(&mut shell, 0.0, r_max, 256) {
            for (s, t) in lookup.ray_pieces(&u, a, b) {
                let mid = 0.5 * (s + t);
                if !lookup.is_non_resonant(&at(mid)) {
                    continue;
                }
                let mut g = |r: f64| f(&at(r)) - tau;
                for (p, q) in intervals_where_nonpositive(&mut g, s, t, 2) {
                    total += 0.5 * (q * q - p * p);
                }
            }
        }
        total
    };
    let mut n = opts.rays.max(16);
    let mut vals = opts
        .exec
        .map_range(n, |i| ray(2.0 * PI * i as f64 / n as f64));
    let mut prev = 2.0 * PI / n as f64 * vals.iter().sum::<f64>();
    for _ in 0..MAX_REFINEMENTS {
        let odd = opts
            .exec
            .map_range(n, |i| ray(2.0 * PI * (i as f64 + 0.5) / n as f64));
        vals = vals.iter().zip(&odd).flat_map(|(a, b)| [*a, *b]).collect();
        n *= 2;
        let cur = 2.0 * PI / n as f64 * vals.iter().sum::<f64>();
        if (cur - prev).abs() <= VOLUME_TOL * cur.abs() {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Quadrature(format!(
        "shell integral did not reach relative tolerance {VOLUME_TOL} with {n} rays"
    )))
}

/// Grid index lookup for shell cells.
pub(crate) struct CellLookup {
    origin: Vec<f64>,
    step: f64,
    cells: HashMap<Vec<usize>, (CellLabel, Option<usize>)>,
}

impl CellLookup {
    pub(crate) fn new(z: &ZoneDecomposition) -> Self {
        let cells = z
            .cells
            .iter()
            .map(|c| {
                let comp = match c.label {
                    CellLabel::Resonant { component, .. } => Some(component),
                    CellLabel::NonResonant => None,
                };
                (c.index.clone(), (c.label, comp))
            })
            .collect();
        Self {
            origin: z.shell.origin.clone(),
            step: z.shell.step,
            cells,
        }
    }

    fn index(&self, x: &[f64]) -> Option<Vec<usize>> {
        x.iter()
            .zip(&self.origin)
            .map(|(v, o)| {
                let t = ((v - o) / self.step).floor();
                (t >= 0.0).then_some(t as usize)
            })
            .collect()
    }

    /// Points outside the sampled cells count as non-resonant.
    pub(crate) fn is_non_resonant(&self, x: &[f64]) -> bool {
        self.index(x)
            .and_then(|i| self.cells.get(&i))
            .is_none_or(|(l, _)| *l == CellLabel::NonResonant)
    }

    pub(crate) fn component_of(&self, x: &[f64]) -> Option<usize> {
        self.index(x)
            .and_then(|i| self.cells.get(&i))
            .and_then(|(_, c)| *c)
    }

    /// Splits the ray segment `r in [a, b]` along direction `u` at grid lines.
    fn ray_pieces(&self, u: &[f64], a: f64, b: f64) -> Vec<(f64, f64)> {
        let mut cuts = vec![a, b];
        for (axis, &ui) in u.iter().enumerate() {
            if ui.abs() < 1e-15 {
                continue;
            }
            let o = self.origin[axis];
            let (x0, x1) = (a * ui, b * ui);
            let (lo, hi) = (x0.min(x1), x0.max(x1));
            let mut k = ((lo - o) / self.step).ceil();
            while o + k * self.step < hi {
                cuts.push((o + k * self.step) / ui);
                k += 1.0;
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| (w[0], w[1]))
            .collect()
    }
}
