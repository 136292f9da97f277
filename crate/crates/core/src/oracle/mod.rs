//! Bloch-Floquet ground truth for periodic configurations: plane-wave fiber
//! matrices, counting functions, spectral-function diagonals and fiber
//! propagators.

mod fiber;

pub use fiber::{
    hermitian_deviation, hermitian_eigen, hermitian_eigenvalues, hermitian_exp,
    symbol_fiber_matrix, FiberBasis,
};

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::apsymbol::{APSymbol, BaseSymbol, XiBox};
use crate::freqgeom::FrequencyModule;
use crate::{Error, Execution, Result};

/// `A0(hD) + eps B(x, hD)` with a lattice frequency set.
#[derive(Clone, Debug)]
pub struct PeriodicOperator {
    pub base: BaseSymbol,
    pub perturbation: APSymbol,
    pub eps: f64,
    pub h: f64,
}

impl PeriodicOperator {
    pub fn new(base: BaseSymbol, perturbation: APSymbol, eps: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Config(format!("h must be positive, got {h}")));
        }
        if !(eps >= 0.0) {
            return Err(Error::Config(format!("eps must be nonnegative, got {eps}")));
        }
        if base.dim() != perturbation.module().dim() {
            return Err(Error::Config(
                "base symbol and frequency set differ in dimension".into(),
            ));
        }
        fiber::require_lattice(perturbation.module())?;
        Ok(Self {
            base,
            perturbation,
            eps,
            h,
        })
    }

    pub fn module(&self) -> &Arc<FrequencyModule> {
        self.perturbation.module()
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Full symbol `A0 + eps B`.
    pub fn symbol(&self) -> APSymbol {
        let a0 = APSymbol::from_base(self.module().clone(), &self.base);
        a0.add(&self.perturbation.scale(Complex64::new(self.eps, 0.0)))
            .expect("same module")
    }

    /// Sampled `sum_theta sup |b_theta|` on a box covering `|xi| <= r`.
    pub fn sup_perturbation(&self, r: f64) -> f64 {
        let d = self.dim();
        let bx = XiBox::new(vec![-r; d], vec![r; d]);
        let res = if d == 1 { 257 } else { 41 };
        self.perturbation.sup_norm_estimate(&bx, res).unwrap_or(0.0)
    }

    fn cell_half_diagonal(&self) -> f64 {
        let g = self.module().generators();
        0.5 * (0..g.ncols()).map(|j| g.column(j).norm()).sum::<f64>()
    }

    fn max_generator(&self) -> f64 {
        let g = self.module().generators();
        (0..g.ncols())
            .map(|j| g.column(j).norm())
            .fold(0.0, f64::max)
    }

    /// Plane-wave radius beyond which `A0(h(k + gamma))` exceeds
    /// `tau + eps sup|B| + margin`, plus a few lattice shells of padding.
    pub fn auto_radius(&self, tau: f64) -> f64 {
        let margin = 1.0 + 0.25 * tau.abs();
        let r0 = self.base.sublevel_radius(tau + margin);
        let level = tau + self.eps * self.sup_perturbation(r0 + 1.0) + margin;
        let r_xi = self.base.sublevel_radius(level);
        r_xi / self.h + self.cell_half_diagonal() + 6.0 * self.max_generator()
    }

    /// `covol / (2 pi)^d`: converts averaged fiber counts into states per unit phase volume.
    pub fn count_normalization(&self) -> f64 {
        let covol = self.module().lattice_covolume().unwrap_or(1.0);
        covol / (2.0 * PI).powi(self.dim() as i32)
    }

    /// Quasimomentum `k = G t` for fractional coordinates `t`.
    pub fn quasimomentum(&self, t: &[f64]) -> Vec<f64> {
        let g = self.module().generators();
        (0..self.dim())
            .map(|i| (0..t.len()).map(|j| g[(i, j)] * t[j]).sum())
            .collect()
    }
}

/// A single fiber of the Bloch-Floquet decomposition.
#[derive(Clone, Debug)]
pub struct FiberProblem {
    pub k: Vec<f64>,
    pub basis: FiberBasis,
    pub matrix: DMatrix<Complex64>,
}

pub fn fiber_matrix(op: &PeriodicOperator, k: &[f64], radius: f64) -> Result<FiberProblem> {
    let basis = FiberBasis::new(op.module(), radius)?;
    let matrix = symbol_fiber_matrix(&op.symbol(), &basis, k, op.h);
    Ok(FiberProblem {
        k: k.to_vec(),
        basis,
        matrix,
    })
}

#[derive(Clone, Debug)]
pub struct OracleSettings {
    /// Quasimomentum points per dimension.
    pub k_points: usize,
    /// Plane-wave radius; chosen from the energy window when `None`.
    pub radius: Option<f64>,
    /// Number of quasimomenta at which the radius is doubled as a truncation check.
    pub truncation_checks: usize,
    /// In one dimension, locate band crossings of `tau` inside each k-cell.
    pub refine_band_edges: bool,
    pub exec: Execution,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            k_points: 200,
            radius: None,
            truncation_checks: 2,
            refine_band_edges: true,
            exec: Execution::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleIds {
    pub value: f64,
    pub radius: f64,
    pub basis_size: usize,
    pub k_points: usize,
}

struct Prepared {
    symbol: APSymbol,
    basis: FiberBasis,
    radius: f64,
}

fn prepare(op: &PeriodicOperator, tau: f64, settings: &OracleSettings) -> Result<Prepared> {
    if settings.k_points == 0 {
        return Err(Error::Config("k_points must be positive".into()));
    }
    let radius = settings.radius.unwrap_or_else(|| op.auto_radius(tau));
    let basis = FiberBasis::new(op.module(), radius)?;
    let symbol = op.symbol();
    if settings.truncation_checks > 0 {
        let doubled = FiberBasis::new(op.module(), 2.0 * radius)?;
        for i in 0..settings.truncation_checks {
            let frac = 0.5 * (i as f64 + 0.5) / settings.truncation_checks as f64 - 0.1234;
            let t = vec![frac; op.dim()];
            let k = op.quasimomentum(&t);
            let n1 = count_below(
                &hermitian_eigenvalues(&symbol_fiber_matrix(&symbol, &basis, &k, op.h)),
                tau,
            );
            let n2 = count_below(
                &hermitian_eigenvalues(&symbol_fiber_matrix(&symbol, &doubled, &k, op.h)),
                tau,
            );
            if n1 != n2 {
                return Err(Error::Truncation(format!(
                    "fiber count at k = {k:?} changed from {n1} to {n2} when the plane-wave radius doubled from {radius}"
                )));
            }
        }
    }
    Ok(Prepared {
        symbol,
        basis,
        radius,
    })
}

fn count_below(vals: &[f64], tau: f64) -> usize {
    vals.iter().filter(|&&v| v <= tau).count()
}

/// Fractional midpoint grid over the fundamental cell.
fn midpoint_grid(d: usize, n: usize) -> Vec<Vec<f64>> {
    let total = n.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            (0..d)
                .map(|_| {
                    let j = idx % n;
                    idx /= n;
                    -0.5 + (j as f64 + 0.5) / n as f64
                })
                .collect()
        })
        .collect()
}

/// Per-band fraction of each k-cell `[t_i, t_{i+1}]` on which the band lies at
/// or below `tau` (one dimension).
fn band_fractions(
    op: &PeriodicOperator,
    prep: &Prepared,
    tau: f64,
    n: usize,
    exec: Execution,
) -> Vec<Vec<f64>> {
    let nodes: Vec<f64> = (0..=n).map(|i| -0.5 + i as f64 / n as f64).collect();
    let eig_at = |t: f64| {
        let k = op.quasimomentum(&[t]);
        hermitian_eigenvalues(&symbol_fiber_matrix(&prep.symbol, &prep.basis, &k, op.h))
    };
    let node_vals: Vec<Vec<f64>> = exec.map(&nodes, |&t| eig_at(t));
    exec.map_range(n, |i| {
        let (a, b) = (&node_vals[i], &node_vals[i + 1]);
        let bands = a.len().min(b.len());
        let mut out = Vec::new();
        for j in 0..bands {
            let (fa, fb) = (a[j] - tau, b[j] - tau);
            let frac = match (fa <= 0.0, fb <= 0.0) {
                (true, true) => 1.0,
                (false, false) => {
                    if fa > 0.0 && j > 0 && a[j - 1] > tau && b[j - 1] > tau {
                        break;
                    }
                    0.0
                }
                (ina, _) => {
                    let root =
                        crate::quad::bisect(|t| eig_at(t)[j] - tau, nodes[i], nodes[i + 1], fa);
                    let left = (root - nodes[i]) * n as f64;
                    if ina {
                        left
                    } else {
                        1.0 - left
                    }
                }
            };
            out.push(frac);
        }
        out
    })
}

/// Integrated density of states from the fiber counting function.
pub fn ids_oracle(op: &PeriodicOperator, tau: f64, settings: &OracleSettings) -> Result<OracleIds> {
    let prep = prepare(op, tau, settings)?;
    let n = settings.k_points;
    let avg = if op.dim() == 1 && settings.refine_band_edges {
        let fr = band_fractions(op, &prep, tau, n, settings.exec);
        fr.iter().map(|c| c.iter().sum::<f64>()).sum::<f64>() / n as f64
    } else {
        let grid = midpoint_grid(op.dim(), n);
        let counts = settings.exec.map(&grid, |t| {
            let k = op.quasimomentum(t);
            count_below(
                &hermitian_eigenvalues(&symbol_fiber_matrix(&prep.symbol, &prep.basis, &k, op.h)),
                tau,
            )
        });
        counts.iter().sum::<usize>() as f64 / grid.len() as f64
    };
    Ok(OracleIds {
        value: op.count_normalization() * avg,
        radius: prep.radius,
        basis_size: prep.basis.len(),
        k_points: n,
    })
}

/// Reduces `x` modulo the period lattice of the plane waves.
fn reduce_position(module: &FrequencyModule, x: &[f64]) -> Vec<f64> {
    let g = module.generators();
    let d = x.len();
    let diagonal = (0..d).all(|i| (0..d).all(|j| i == j || g[(i, j)] == 0.0));
    if diagonal {
        return (0..d)
            .map(|i| x[i].rem_euclid(2.0 * PI / g[(i, i)].abs()))
            .collect();
    }
    let s: Vec<f64> = (0..d)
        .map(|j| ((0..d).map(|i| g[(i, j)] * x[i]).sum::<f64>() / (2.0 * PI)).rem_euclid(1.0))
        .collect();
    let inv_t = g.transpose().try_inverse().expect("lattice");
    (0..d)
        .map(|i| 2.0 * PI * (0..d).map(|j| inv_t[(i, j)] * s[j]).sum::<f64>())
        .collect()
}

fn density_at(basis: &FiberBasis, vec: nalgebra::DVectorView<'_, Complex64>, x: &[f64]) -> f64 {
    let mut psi = Complex64::new(0.0, 0.0);
    for (r, p) in basis.points.iter().enumerate() {
        let ph: f64 = p.iter().zip(x).map(|(a, b)| a * b).sum();
        psi += vec[r] * Complex64::from_polar(1.0, ph);
    }
    psi.norm_sqr()
}

/// Diagonal of the spectral projector kernel, `e(x, x, tau)`.
pub fn spectral_function_oracle(
    op: &PeriodicOperator,
    x: &[f64],
    tau: f64,
    settings: &OracleSettings,
) -> Result<f64> {
    let prep = prepare(op, tau, settings)?;
    let xr = reduce_position(op.module(), x);
    let n = settings.k_points;
    let avg = if op.dim() == 1 && settings.refine_band_edges {
        let fr = band_fractions(op, &prep, tau, n, settings.exec);
        let vals = settings.exec.map_range(n, |i| {
            if fr[i].iter().all(|f| *f == 0.0) {
                return 0.0;
            }
            let t = -0.5 + (i as f64 + 0.5) / n as f64;
            let k = op.quasimomentum(&[t]);
            let (_, vecs) =
                hermitian_eigen(&symbol_fiber_matrix(&prep.symbol, &prep.basis, &k, op.h));
            fr[i]
                .iter()
                .enumerate()
                .filter(|(_, f)| **f > 0.0)
                .map(|(j, f)| f * density_at(&prep.basis, vecs.column(j), &xr))
                .sum::<f64>()
        });
        vals.iter().sum::<f64>() / n as f64
    } else {
        let grid = midpoint_grid(op.dim(), n);
        let vals = settings.exec.map(&grid, |t| {
            let k = op.quasimomentum(t);
            let (ev, vecs) =
                hermitian_eigen(&symbol_fiber_matrix(&prep.symbol, &prep.basis, &k, op.h));
            ev.iter()
                .enumerate()
                .filter(|(_, v)| **v <= tau)
                .map(|(j, _)| density_at(&prep.basis, vecs.column(j), &xr))
                .sum::<f64>()
        });
        vals.iter().sum::<f64>() / grid.len() as f64
    };
    Ok(op.count_normalization() * avg)
}

#[derive(Clone, Debug)]
pub struct PropagationSettings {
    /// Quasimomentum samples per dimension.
    pub k_samples: usize,
    pub radius: f64,
    pub exec: Execution,
}

#[derive(Clone, Debug, Serialize)]
pub struct PropagationRecord {
    pub t_max: f64,
    pub norm: f64,
    pub worst_time: f64,
    pub worst_k: Vec<f64>,
}

/// Maximal unitarity defect tolerated for the fiber exponential.
pub const UNITARITY_TOL: f64 = 1e-10;

/// `sup_k max_{t in {T/4, T/2, T}} || diag(Q2) exp(i t M / h) diag(Q1) ||`.
pub fn propagation_norm<F1, F2>(
    op: &PeriodicOperator,
    q1: F1,
    q2: F2,
    t_max: f64,
    settings: &PropagationSettings,
) -> Result<PropagationRecord>
where
    F1: Fn(&[f64]) -> f64 + Sync,
    F2: Fn(&[f64]) -> f64 + Sync,
{
    if settings.k_samples == 0 {
        return Err(Error::Config("k_samples must be positive".into()));
    }
    let basis = FiberBasis::new(op.module(), settings.radius)?;
    let symbol = op.symbol();
    let grid = midpoint_grid(op.dim(), settings.k_samples);
    let times = [0.25 * t_max, 0.5 * t_max, t_max];
    let per_k = settings
        .exec
        .try_map(&grid, |t| -> Result<(f64, f64, Vec<f64>)> {
            let k = op.quasimomentum(t);
            let m = symbol_fiber_matrix(&symbol, &basis, &k, op.h);
            let (vals, vecs) = hermitian_eigen(&m);
            let xi: Vec<Vec<f64>> = basis
                .points
                .iter()
                .map(|p| p.iter().zip(&k).map(|(a, b)| op.h * (a + b)).collect())
                .collect();
            let d1: Vec<f64> = xi.iter().map(|x| q1(x)).collect();
            let d2: Vec<f64> = xi.iter().map(|x| q2(x)).collect();
            let mut best = (0.0, 0.0);
            for &tt in &times {
                let e = fiber::exp_from_eigen(&vals, &vecs, tt / op.h);
                let defect = (e.adjoint() * &e
                    - DMatrix::<Complex64>::identity(e.nrows(), e.ncols()))
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
                if defect > UNITARITY_TOL {
                    return Err(Error::Numerical(format!(
                        "fiber exponential unitarity defect {defect:.3e} at t = {tt}"
                    )));
                }
                let mut s = e;
                for r in 0..s.nrows() {
                    for c in 0..s.ncols() {
                        s[(r, c)] *= d2[r] * d1[c];
                    }
                }
                let norm = s.singular_values().iter().cloned().fold(0.0, f64::max);
                if norm > best.0 {
                    best = (norm, tt);
                }
            }
            Ok((best.0, best.1, k))
        })?;
    let (norm, worst_time, worst_k) =
        per_k
            .into_iter()
            .fold((0.0, 0.0, Vec::new()), |a, b| if b.0 > a.0 { b } else { a });
    Ok(PropagationRecord {
        t_max,
        norm,
        worst_time,
        worst_k,
    })
}
