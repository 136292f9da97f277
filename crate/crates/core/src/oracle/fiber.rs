use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::apsymbol::{APSymbol, EvalCtx};
use crate::freqgeom::FrequencyModule;
use crate::{Error, Result};

/// Plane-wave basis: lattice points `gamma = G n` with `|gamma| <= radius`.
#[derive(Clone, Debug)]
pub struct FiberBasis {
    pub radius: f64,
    pub coords: Vec<Vec<i64>>,
    pub points: Vec<Vec<f64>>,
}

impl FiberBasis {
    pub fn new(module: &FrequencyModule, radius: f64) -> Result<Self> {
        require_lattice(module)?;
        let d = module.dim();
        let g = module.generators();
        let inv = g
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular generator matrix".into()))?;
        let bound: Vec<i64> = (0..d)
            .map(|i| {
                let row: f64 = (0..d).map(|j| inv[(i, j)].powi(2)).sum::<f64>().sqrt();
                (radius * row).ceil() as i64 + 1
            })
            .collect();
        let mut coords = Vec::new();
        let mut cur: Vec<i64> = bound.iter().map(|b| -b).collect();
        'outer: loop {
            let p = module.embed(&cur);
            if p.iter().map(|x| x * x).sum::<f64>().sqrt() <= radius + 1e-12 {
                coords.push(cur.clone());
            }
            let mut i = 0;
            loop {
                if i == d {
                    break 'outer;
                }
                cur[i] += 1;
                if cur[i] > bound[i] {
                    cur[i] = -bound[i];
                    i += 1;
                } else {
                    break;
                }
            }
        }
        coords.sort();
        let points = coords.iter().map(|c| module.embed(c)).collect();
        Ok(Self {
            radius,
            coords,
            points,
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn index_of(&self, coords: &[i64]) -> Option<usize> {
        self.coords
            .binary_search_by(|c| c.as_slice().cmp(coords))
            .ok()
    }
}

pub(crate) fn require_lattice(module: &FrequencyModule) -> Result<()> {
    if module.is_lattice() {
        Ok(())
    } else {
        Err(Error::Unsupported(
            "the Bloch-Floquet oracle needs a lattice frequency set".into(),
        ))
    }
}

/// Plane-wave matrix of the Weyl quantization of `symbol` on the fiber at
/// quasimomentum `k`: entry `(g, g')` is `s_{g-g'}(h (k + (g + g')/2))`.
pub fn symbol_fiber_matrix(
    symbol: &APSymbol,
    basis: &FiberBasis,
    k: &[f64],
    h: f64,
) -> DMatrix<Complex64> {
    let n = basis.len();
    let d = k.len();
    let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    let mut ctx = EvalCtx::new();
    let mut diff = vec![0i64; basis.coords.first().map_or(0, |c| c.len())];
    let mut xi = vec![0.0; d];
    for (theta, b) in symbol.terms() {
        for (j, cj) in basis.coords.iter().enumerate() {
            for (dst, (a, t)) in diff.iter_mut().zip(cj.iter().zip(theta.coords())) {
                *dst = a + t;
            }
            let Some(i) = basis.index_of(&diff) else {
                continue;
            };
            for (r, x) in xi.iter_mut().enumerate() {
                *x = h * (k[r] + 0.5 * (basis.points[i][r] + basis.points[j][r]));
            }
            m[(i, j)] += b.eval_with(&mut ctx, &xi);
        }
    }
    m
}

/// Eigenvalues in ascending order with the matching unit eigenvectors as columns.
pub fn hermitian_eigen(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (vals, vecs)
}

/// Ascending eigenvalues only.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().cloned().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `exp(i t M)` for Hermitian `M` through its spectral decomposition.
pub fn hermitian_exp(m: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
    let (vals, vecs) = hermitian_eigen(m);
    exp_from_eigen(&vals, &vecs, t)
}

pub(crate) fn exp_from_eigen(
    vals: &[f64],
    vecs: &DMatrix<Complex64>,
    t: f64,
) -> DMatrix<Complex64> {
    let n = vals.len();
    let mut scaled = vecs.clone();
    for (c, lam) in vals.iter().enumerate() {
        let ph = Complex64::from_polar(1.0, t * lam);
        for r in 0..n {
            scaled[(r, c)] *= ph;
        }
    }
    scaled * vecs.adjoint()
}

/// Largest entrywise deviation from Hermitian symmetry.
pub fn hermitian_deviation(m: &DMatrix<Complex64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}
