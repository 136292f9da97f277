use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use super::{BaseSymbol, CoefficientFn, EvalCtx};
use crate::freqgeom::{Frequency, FrequencyModule, QuasiLatticeSubspace};
use crate::{Error, Result};

/// Axis-aligned box in momentum space.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct XiBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl XiBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Self { lo, hi }
    }

    pub fn interval(a: f64, b: f64) -> Self {
        Self::new(vec![a], vec![b])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty() || self.lo.iter().zip(&self.hi).any(|(a, b)| !(a <= b))
    }

    /// Tensor grid with `n` points per axis (endpoints included).
    pub fn grid(&self, n: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        let n = n.max(1);
        let total = n.pow(d as u32);
        (0..total)
            .map(|mut idx| {
                (0..d)
                    .map(|i| {
                        let j = idx % n;
                        idx /= n;
                        if n == 1 {
                            0.5 * (self.lo[i] + self.hi[i])
                        } else {
                            self.lo[i] + (self.hi[i] - self.lo[i]) * j as f64 / (n - 1) as f64
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Exponential-type symbol `sum_theta b_theta(xi) e^{i<theta,x>}` with finite support.
#[derive(Clone, Debug)]
pub struct APSymbol {
    module: Arc<FrequencyModule>,
    terms: BTreeMap<Frequency, CoefficientFn>,
    hermitian: bool,
}

impl APSymbol {
    pub fn zero(module: Arc<FrequencyModule>) -> Self {
        Self {
            module,
            terms: BTreeMap::new(),
            hermitian: true,
        }
    }

    /// Builds a symbol from `(coords, coefficient)` pairs. Repeated frequencies are summed.
    pub fn new(
        module: Arc<FrequencyModule>,
        terms: Vec<(Vec<i64>, CoefficientFn)>,
        hermitian: bool,
    ) -> Result<Self> {
        let mut acc: BTreeMap<Frequency, Vec<CoefficientFn>> = BTreeMap::new();
        for (c, f) in terms {
            if c.len() != module.rank() {
                return Err(Error::Config(format!(
                    "frequency {c:?} has {} coordinates, expected {}",
                    c.len(),
                    module.rank()
                )));
            }
            acc.entry(module.frequency(c)).or_default().push(f);
        }
        Ok(Self::from_parts(module, acc, hermitian))
    }

    fn from_parts(
        module: Arc<FrequencyModule>,
        acc: BTreeMap<Frequency, Vec<CoefficientFn>>,
        hermitian: bool,
    ) -> Self {
        let terms = acc
            .into_iter()
            .filter_map(|(k, v)| {
                let s = CoefficientFn::sum(v);
                (!s.is_zero_literal()).then_some((k, s))
            })
            .collect();
        Self {
            module,
            terms,
            hermitian,
        }
    }

    /// The base symbol as a frequency-zero term.
    pub fn from_base(module: Arc<FrequencyModule>, base: &BaseSymbol) -> Self {
        let zero = module.zero();
        let mut terms = BTreeMap::new();
        terms.insert(zero, CoefficientFn::base(base.clone()));
        Self {
            module,
            terms,
            hermitian: true,
        }
    }

    pub fn module(&self) -> &Arc<FrequencyModule> {
        &self.module
    }

    pub fn terms(&self) -> &BTreeMap<Frequency, CoefficientFn> {
        &self.terms
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn with_hermitian(mut self, flag: bool) -> Self {
        self.hermitian = flag;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn support(&self) -> Vec<Frequency> {
        self.terms.keys().cloned().collect()
    }

    pub fn coefficient(&self, coords: &[i64]) -> Option<&CoefficientFn> {
        self.terms.get(&self.module.frequency(coords.to_vec()))
    }

    fn check_module(&self, other: &APSymbol) -> Result<()> {
        if Arc::ptr_eq(&self.module, &other.module) || self.module.same_group(&other.module) {
            Ok(())
        } else {
            Err(Error::Config(
                "symbols are defined over different frequency modules".into(),
            ))
        }
    }

    pub fn add(&self, other: &APSymbol) -> Result<APSymbol> {
        self.check_module(other)?;
        let mut acc: BTreeMap<Frequency, Vec<CoefficientFn>> = BTreeMap::new();
        for (k, v) in self.terms.iter().chain(other.terms.iter()) {
            acc.entry(k.clone()).or_default().push(v.clone());
        }
        Ok(Self::from_parts(
            self.module.clone(),
            acc,
            self.hermitian && other.hermitian,
        ))
    }

    /// Multiplies every coefficient by `c`. Hermiticity survives real factors only.
    pub fn scale(&self, c: Complex64) -> APSymbol {
        let terms = self
            .terms
            .iter()
            .map(|(k, v)| (k.clone(), v.scale(c)))
            .filter(|(_, v)| !v.is_zero_literal())
            .collect();
        APSymbol {
            module: self.module.clone(),
            terms,
            hermitian: self.hermitian && c.im == 0.0,
        }
    }

    /// Keeps only the frequencies accepted by `keep`.
    pub fn filter<F: Fn(&Frequency) -> bool>(&self, keep: F) -> APSymbol {
        APSymbol {
            module: self.module.clone(),
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            hermitian: self.hermitian,
        }
    }

    /// `(on V, off V)`; the zero frequency always lies in `V`.
    pub fn split(&self, v: &QuasiLatticeSubspace) -> (APSymbol, APSymbol) {
        (
            self.filter(|f| v.contains_frequency(f)),
            self.filter(|f| !v.contains_frequency(f)),
        )
    }

    /// Exact Weyl symbol of the operator product `op(self) op(other)`.
    pub fn weyl_compose(&self, other: &APSymbol, h: f64) -> Result<APSymbol> {
        self.check_module(other)?;
        let m = &self.module;
        let half = 0.5 * h;
        let mut acc: BTreeMap<Frequency, Vec<CoefficientFn>> = BTreeMap::new();
        for (theta, b) in &self.terms {
            let minus_theta: Vec<i64> = theta.coords().iter().map(|c| -c).collect();
            let c_shift = |c: &CoefficientFn| c.shift_lattice(m, &minus_theta, half);
            for (phi, c) in &other.terms {
                let bs = b.shift_lattice(m, phi.coords(), half);
                let term = bs.mul(&c_shift(c));
                if term.is_zero_literal() {
                    continue;
                }
                let sum: Vec<i64> = theta
                    .coords()
                    .iter()
                    .zip(phi.coords())
                    .map(|(a, b)| a + b)
                    .collect();
                acc.entry(m.frequency(sum)).or_default().push(term);
            }
        }
        let hermitian = self.hermitian && other.hermitian && self.same_terms(other);
        Ok(Self::from_parts(m.clone(), acc, hermitian))
    }

    fn same_terms(&self, other: &APSymbol) -> bool {
        std::ptr::eq(self, other)
            || (self.terms.len() == other.terms.len()
                && self
                    .terms
                    .iter()
                    .zip(&other.terms)
                    .all(|((a, f), (b, g))| a == b && f.ptr_eq(g)))
    }

    /// `(i/h)(P # S - S # P)`. Hermitian when both inputs are.
    pub fn commutator_i_over_h(p: &APSymbol, s: &APSymbol, h: f64) -> Result<APSymbol> {
        let ps = p.weyl_compose(s, h)?;
        let sp = s.weyl_compose(p, h)?;
        let diff = ps.add(&sp.scale(Complex64::new(-1.0, 0.0)))?;
        Ok(diff
            .scale(Complex64::new(0.0, 1.0 / h))
            .with_hermitian(p.hermitian && s.hermitian))
    }

    /// `sum_theta b_theta(xi) e^{i<theta,x>}`.
    pub fn evaluate(&self, x: &[f64], xi: &[f64]) -> Complex64 {
        let mut ctx = EvalCtx::new();
        self.terms
            .iter()
            .map(|(theta, b)| {
                let phase: f64 = theta.embedding().iter().zip(x).map(|(t, y)| t * y).sum();
                b.eval_with(&mut ctx, xi) * Complex64::from_polar(1.0, phase)
            })
            .sum()
    }

    /// `sum_theta max_grid |b_theta|` over a tensor grid of the box.
    pub fn sup_norm_estimate(&self, region: &XiBox, resolution: usize) -> Result<f64> {
        if region.is_empty() || resolution == 0 {
            return Err(Error::Config("empty grid for sup-norm estimate".into()));
        }
        let pts = region.grid(resolution);
        Ok(self.sup_norm_at(&pts))
    }

    /// `sum_theta max |b_theta|` over explicit sample points.
    pub fn sup_norm_at(&self, points: &[Vec<f64>]) -> f64 {
        let mut ctx = EvalCtx::new();
        self.terms
            .values()
            .map(|b| {
                points
                    .iter()
                    .map(|p| b.eval_with(&mut ctx, p).norm())
                    .fold(0.0, f64::max)
            })
            .sum()
    }

    /// Largest `|b_{-theta}(xi) - conj(b_theta(xi))|` over the sample points,
    /// with missing partners counted as zero coefficients.
    pub fn hermitian_defect(&self, points: &[Vec<f64>]) -> f64 {
        let mut ctx = EvalCtx::new();
        let zero = CoefficientFn::zero();
        let mut worst: f64 = 0.0;
        for (theta, b) in &self.terms {
            let neg = self
                .module
                .frequency(theta.coords().iter().map(|c| -c).collect());
            let partner = self.terms.get(&neg).unwrap_or(&zero);
            for p in points {
                let d = (partner.eval_with(&mut ctx, p) - b.eval_with(&mut ctx, p).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Sampled check of the declared flag.
    pub fn verify_hermitian(&self, points: &[Vec<f64>], tol: f64) -> bool {
        self.hermitian_defect(points) <= tol
    }
}
