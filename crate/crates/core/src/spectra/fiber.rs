use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::apsymbol::EvalCtx;
use crate::gauge::GaugeChain;
use crate::oracle::hermitian_eigen;
use crate::zones::{EnergyShell, ResonantComponent};
use crate::{Error, Execution, Result};

#[derive(Clone, Debug)]
pub struct FiberSettings {
    /// Quasimomentum samples per fiber.
    pub k_points: usize,
    /// Samples across the component's transverse extent.
    pub perp_points: usize,
    /// Extra lattice sites on each side of the window.
    pub padding: usize,
    /// Allowed relative change when the padding doubles.
    pub padding_tol: f64,
}

impl Default for FiberSettings {
    fn default() -> Self {
        Self {
            k_points: 16,
            perp_points: 96,
            padding: 6,
            padding_tol: 1e-3,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResonantFiberIds {
    /// Phase-space volume of the component's states below `tau`.
    pub volume: f64,
    pub basis_size: usize,
    pub padding: usize,
    pub padding_delta: f64,
}

/// Fiber-wise count of the effective operator on one resonant component in
/// `d = 2` with a one-dimensional subspace.
///
/// For each transverse momentum `s` and quasimomentum `k` the effective
/// operator reduces to a periodic problem along the lattice direction `g`;
/// eigenvectors below `tau` are weighted by their mass on sites
/// `s e_perp + h (k + n) g` that `member` accepts.
pub fn resonant_fiber_ids<M: Fn(&[f64]) -> bool + Sync>(
    chain: &GaugeChain,
    tau: f64,
    member: &M,
    component: &ResonantComponent,
    shell: &EnergyShell,
    settings: &FiberSettings,
    exec: Execution,
) -> Result<ResonantFiberIds> {
    if shell.dim() != 2 || component.subspace.dim() != 1 {
        return Err(Error::Unsupported(format!(
            "fiber counting needs d = 2 and a line subspace (d = {}, dim V = {})",
            shell.dim(),
            component.subspace.dim()
        )));
    }
    let module = chain.effective.module().clone();
    let p = primitive(&component.subspace.basis_coords()[0]);
    let symbol = chain.effective_symbol();
    let mut terms = Vec::new();
    for (theta, c) in symbol.terms() {
        let m = multiple_of(theta.coords(), &p).ok_or_else(|| {
            Error::Unsupported(format!(
                "effective frequency {:?} is not a multiple of the lattice generator {p:?}",
                theta.coords()
            ))
        })?;
        terms.push((m, c.clone()));
    }
    let g = module.embed(&p);
    let gn = (g[0] * g[0] + g[1] * g[1]).sqrt();
    let along = [g[0] / gn, g[1] / gn];
    let perp = [-along[1], along[0]];
    let h = chain.h;
    let dt = h * gn;

    let (mut s_lo, mut s_hi, mut t_lo, mut t_hi) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for idx in component_indices(component, shell) {
        let (lo, hi) = shell.cell_box(&idx);
        for c in [
            [lo[0], lo[1]],
            [lo[0], hi[1]],
            [hi[0], lo[1]],
            [hi[0], hi[1]],
        ] {
            let s = c[0] * perp[0] + c[1] * perp[1];
            let t = c[0] * along[0] + c[1] * along[1];
            s_lo = s_lo.min(s);
            s_hi = s_hi.max(s);
            t_lo = t_lo.min(t);
            t_hi = t_hi.max(t);
        }
    }
    if s_lo > s_hi {
        return Ok(ResonantFiberIds {
            volume: 0.0,
            basis_size: 0,
            padding: settings.padding,
            padding_delta: 0.0,
        });
    }
    let n_lo = (t_lo / dt).floor() as i64;
    let n_hi = (t_hi / dt).ceil() as i64;

    let run = |pad: i64| -> (f64, usize) {
        let sites: Vec<i64> = (n_lo - pad..=n_hi + pad).collect();
        let ns = settings.perp_points.max(1);
        let nk = settings.k_points.max(1);
        let ds = (s_hi - s_lo) / ns as f64;
        let rows = exec.map_range(ns * nk, |i| {
            let s = s_lo + (i / nk) as f64 * ds + 0.5 * ds;
            let k = ((i % nk) as f64 + 0.5) / nk as f64;
            let at = |x: f64| [s * perp[0] + x * along[0], s * perp[1] + x * along[1]];
            let weights: Vec<f64> = sites
                .iter()
                .map(|&n| {
                    if member(&at(dt * (k + n as f64))) {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            if weights.iter().all(|w| *w == 0.0) {
                return 0.0;
            }
            let len = sites.len();
            let mut mat = DMatrix::from_element(len, len, Complex64::new(0.0, 0.0));
            let mut ctx = EvalCtx::new();
            for (m, c) in &terms {
                for b in 0..len {
                    let a = b as i64 + m;
                    if a < 0 || a >= len as i64 {
                        continue;
                    }
                    let a = a as usize;
                    let mid = 0.5 * (sites[a] + sites[b]) as f64;
                    mat[(a, b)] += c.eval_with(&mut ctx, &at(dt * (k + mid)));
                }
            }
            let (vals, vecs) = hermitian_eigen(&mat);
            let mut occ = 0.0;
            for (j, lam) in vals.iter().enumerate() {
                if *lam > tau {
                    break;
                }
                occ += (0..len)
                    .map(|r| vecs[(r, j)].norm_sqr() * weights[r])
                    .sum::<f64>();
            }
            occ
        });
        let total: f64 = rows.iter().sum();
        (total * ds * dt / nk as f64, sites.len())
    };
    let pad = settings.padding as i64;
    let (v1, _) = run(pad);
    let (v2, size) = run(2 * pad);
    let delta = (v2 - v1).abs();
    if delta > settings.padding_tol * v2.abs().max(dt * (s_hi - s_lo)) {
        return Err(Error::Resource {
            what: format!(
                "fiber padding for component {} (count changed by {delta:.3e} when doubling)",
                component.id
            ),
            cap: 2 * settings.padding,
        });
    }
    Ok(ResonantFiberIds {
        volume: v2,
        basis_size: size,
        padding: 2 * settings.padding,
        padding_delta: delta,
    })
}

fn component_indices(component: &ResonantComponent, shell: &EnergyShell) -> Vec<Vec<usize>> {
    component
        .cells
        .iter()
        .filter_map(|&pos| shell.cells.get(pos).cloned())
        .collect()
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn primitive(c: &[i64]) -> Vec<i64> {
    let g = c.iter().fold(0, |g, &x| gcd(g, x)).max(1);
    let sign = if c.iter().find(|&&x| x != 0).is_some_and(|&x| x < 0) {
        -1
    } else {
        1
    };
    c.iter().map(|x| sign * x / g).collect()
}

fn multiple_of(q: &[i64], p: &[i64]) -> Option<i64> {
    let i = p.iter().position(|&x| x != 0)?;
    if q[i] % p[i] != 0 {
        return None;
    }
    let m = q[i] / p[i];
    q.iter().zip(p).all(|(a, b)| *a == m * b).then_some(m)
}
