//! Exact frequency-set geometry.
//!
//! Frequencies are integer coordinate vectors against a fixed real generator
//! matrix, so sums, intersections with subspaces and integer dependence are
//! decided exactly, while angles and norms use the real embedding.

mod conditions;
mod hnf;
mod subspace;

pub use conditions::{
    check_conditions, ConditionRecord, ConditionReport, ConditionStatus, Thresholds,
};
pub use hnf::{hermite_normal_form, integer_kernel, HnfResult};
pub use subspace::{
    enumerate_subspaces, lattice_in_subspace, r_min, s_min, subspace_angle, AngleWitness,
    NormWitness, QuasiLatticeSubspace, ResonanceLattice, SUBSPACE_CAP,
};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::{Error, Result};

/// Default cap on the number of sumset elements.
pub const SUMSET_CAP: usize = 200_000;

/// Numeric rank tolerance for real linear dependence.
pub const RANK_TOL: f64 = 1e-9;

/// A frequency: exact integer coordinates plus the cached real embedding.
///
/// Equality, ordering and hashing use the coordinates only.
#[derive(Clone, Debug)]
pub struct Frequency {
    coords: Vec<i64>,
    embedding: Vec<f64>,
}

impl Frequency {
    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    pub fn embedding(&self) -> &[f64] {
        &self.embedding
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    pub fn norm(&self) -> f64 {
        self.embedding.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl PartialEq for Frequency {
    fn eq(&self, other: &Self) -> bool {
        self.coords == other.coords
    }
}
impl Eq for Frequency {}

impl Hash for Frequency {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.coords.hash(state)
    }
}

impl PartialOrd for Frequency {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Frequency {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.coords.cmp(&other.coords)
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Declared coefficient decay `|b_theta| <= constant * (1 + |theta|)^-rate`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Decay {
    pub rate: f64,
    pub constant: f64,
}

/// Frequency set together with its generator matrix (`d x r`).
#[derive(Clone, Debug)]
pub struct FrequencyModule {
    dim: usize,
    generators: DMatrix<f64>,
    frequencies: Vec<Vec<i64>>,
    decay: Option<Decay>,
}

impl FrequencyModule {
    /// Builds a module from generator columns (`generators[j]` is the j-th
    /// column, of length `d`) and a list of coordinate vectors. The list is
    /// closed under negation and `0` is added.
    pub fn new(
        dim: usize,
        generators: Vec<Vec<f64>>,
        frequencies: Vec<Vec<i64>>,
        decay: Option<Decay>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        if generators.is_empty() {
            return Err(Error::Config("at least one generator is required".into()));
        }
        let rank = generators.len();
        for (j, g) in generators.iter().enumerate() {
            if g.len() != dim {
                return Err(Error::Config(format!(
                    "generator {j} has length {}, expected {dim}",
                    g.len()
                )));
            }
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config(format!("generator {j} is not finite")));
            }
        }
        let gm = DMatrix::from_fn(dim, rank, |i, j| generators[j][i]);
        let mut set = BTreeSet::new();
        set.insert(vec![0i64; rank]);
        for c in frequencies {
            if c.len() != rank {
                return Err(Error::Config(format!(
                    "frequency {c:?} has {} coordinates, expected {rank}",
                    c.len()
                )));
            }
            set.insert(c.iter().map(|x| -x).collect());
            set.insert(c);
        }
        if let Some(d) = decay {
            if !(d.rate > 0.0 && d.constant >= 0.0) {
                return Err(Error::Config("decay rate must be positive".into()));
            }
        }
        Ok(Self {
            dim,
            generators: gm,
            frequencies: set.into_iter().collect(),
            decay,
        })
    }

    /// The standard lattice `Z^d` with all frequencies of Euclidean norm at most `radius`.
    pub fn integer_lattice(dim: usize, radius: f64) -> Result<Self> {
        let gens = (0..dim)
            .map(|j| (0..dim).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let r = radius.floor() as i64;
        let mut freqs = Vec::new();
        let mut cur = vec![-r; dim];
        loop {
            let n2: i64 = cur.iter().map(|x| x * x).sum();
            if (n2 as f64) <= radius * radius + 1e-12 {
                freqs.push(cur.clone());
            }
            let mut i = 0;
            loop {
                if i == dim {
                    return Self::new(dim, gens, freqs, None);
                }
                cur[i] += 1;
                if cur[i] > r {
                    cur[i] = -r;
                    i += 1;
                } else {
                    break;
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of generators.
    pub fn rank(&self) -> usize {
        self.generators.ncols()
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.generators
    }

    pub fn decay(&self) -> Option<Decay> {
        self.decay
    }

    pub fn coords(&self) -> &[Vec<i64>] {
        &self.frequencies
    }

    /// Embedding `G c`, summed in a fixed order so it is reproducible bit for bit.
    pub fn embed(&self, coords: &[i64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| {
                let mut s = 0.0;
                for (j, &c) in coords.iter().enumerate() {
                    s += self.generators[(i, j)] * c as f64;
                }
                s
            })
            .collect()
    }

    pub fn frequency(&self, coords: Vec<i64>) -> Frequency {
        let embedding = self.embed(&coords);
        Frequency { coords, embedding }
    }

    pub fn zero(&self) -> Frequency {
        self.frequency(vec![0; self.rank()])
    }

    pub fn frequencies(&self) -> Vec<Frequency> {
        self.frequencies
            .iter()
            .map(|c| self.frequency(c.clone()))
            .collect()
    }

    pub fn nonzero_frequencies(&self) -> Vec<Frequency> {
        self.frequencies()
            .into_iter()
            .filter(|f| !f.is_zero())
            .collect()
    }

    /// Generator columns form a basis of `R^d`: the frequency group is a lattice.
    pub fn is_lattice(&self) -> bool {
        self.rank() == self.dim && self.generators.clone().lu().determinant().abs() > RANK_TOL
    }

    /// Covolume of the generated lattice (`|det G|`) when [`Self::is_lattice`].
    pub fn lattice_covolume(&self) -> Option<f64> {
        self.is_lattice()
            .then(|| self.generators.clone().lu().determinant().abs())
    }

    /// Numeric check that the listed frequencies span `R^d`.
    pub fn spans(&self) -> bool {
        let freqs = self.nonzero_frequencies();
        if freqs.is_empty() {
            return false;
        }
        let m = DMatrix::from_fn(self.dim, freqs.len(), |i, j| freqs[j].embedding[i]);
        numeric_rank(&m) == self.dim
    }

    /// Same generators (structural identity used to reject mixing modules).
    pub fn same_group(&self, other: &FrequencyModule) -> bool {
        self.dim == other.dim && self.generators == other.generators
    }

    fn with_frequencies(&self, frequencies: Vec<Vec<i64>>) -> Self {
        Self {
            dim: self.dim,
            generators: self.generators.clone(),
            frequencies,
            decay: self.decay,
        }
    }
}

/// Numeric rank via SVD, relative tolerance [`RANK_TOL`].
pub fn numeric_rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * max.max(1.0)).count()
}

/// Outcome of [`truncate`].
#[derive(Clone, Debug)]
pub struct Truncation {
    pub module: Arc<FrequencyModule>,
    /// Set when no nonzero frequency survives.
    pub warning: Option<String>,
    /// Tail bound of the discarded coefficients, when a decay law is declared.
    pub tail_bound: Option<f64>,
    /// `omega^-L`, the target the tail bound is compared against.
    pub target: f64,
}

/// Restricts the frequency list to the closed ball of radius `omega`.
pub fn truncate(module: &FrequencyModule, omega: f64, l: u32) -> Result<Truncation> {
    if !(omega > 0.0) {
        return Err(Error::Config(format!(
            "omega must be positive, got {omega}"
        )));
    }
    let kept: Vec<Vec<i64>> = module
        .frequencies
        .iter()
        .filter(|c| norm(&module.embed(c)) <= omega)
        .cloned()
        .collect();
    let out = module.with_frequencies(kept);
    let warning = (out.frequencies.len() <= 1)
        .then(|| format!("no nonzero frequency has norm <= {omega}; truncated set is {{0}}"));
    let tail_bound = module.decay.map(|d| decay_tail_bound(module, d, omega));
    Ok(Truncation {
        module: Arc::new(out),
        warning,
        tail_bound,
        target: omega.powf(-(l as f64)),
    })
}

/// Integral-comparison bound for `sum_{|theta| > omega} C (1 + |theta|)^-rate`.
///
/// The frequency density is `1 / covolume` for lattices and otherwise the
/// empirical density of the listed frequencies inside their bounding ball.
fn decay_tail_bound(module: &FrequencyModule, decay: Decay, omega: f64) -> f64 {
    let d = module.dim as i32;
    if decay.rate <= d as f64 {
        return f64::INFINITY;
    }
    let density = match module.lattice_covolume() {
        Some(v) => 1.0 / v,
        None => {
            let rmax = module
                .frequencies
                .iter()
                .map(|c| norm(&module.embed(c)))
                .fold(0.0, f64::max)
                .max(1.0);
            module.frequencies.len() as f64 / ball_volume(module.dim, rmax)
        }
    };
    let sphere = match module.dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        n => n as f64 * ball_volume(n, 1.0),
    };
    // r = omega / u maps (omega, inf) onto (0, 1].
    let integrand = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let r = omega / u;
        decay.constant * (1.0 + r).powf(-decay.rate) * r.powi(d - 1) * omega / (u * u)
    };
    // Shell of width one unit ahead of omega absorbs the lattice-point discrepancy.
    let core = crate::quad::adaptive_simpson(integrand, 0.0, 1.0, 1e-14, 40);
    let boundary = decay.constant * (1.0 + omega).powf(-decay.rate) * (omega + 1.0).powi(d - 1);
    density * sphere * (core + boundary)
}

fn ball_volume(d: usize, r: f64) -> f64 {
    match d {
        1 => 2.0 * r,
        2 => std::f64::consts::PI * r * r,
        3 => 4.0 / 3.0 * std::f64::consts::PI * r * r * r,
        n => {
            let half = n as f64 / 2.0;
            std::f64::consts::PI.powf(half) / gamma_half_int(n) * r.powi(n as i32)
        }
    }
}

// Gamma(n/2 + 1) for integer n.
fn gamma_half_int(n: usize) -> f64 {
    let mut g = if n.is_multiple_of(2) {
        1.0
    } else {
        std::f64::consts::PI.sqrt() / 2.0
    };
    let mut k = if n.is_multiple_of(2) { 1.0 } else { 1.5 };
    while k <= n as f64 / 2.0 {
        g *= k;
        k += 1.0;
    }
    g
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// The K-fold sumset of the module's frequency list, with one witness
/// decomposition per element.
#[derive(Clone, Debug)]
pub struct SumsetK {
    pub k: usize,
    module: Arc<FrequencyModule>,
    elements: BTreeMap<Vec<i64>, Vec<Vec<i64>>>,
}

impl SumsetK {
    pub fn module(&self) -> &Arc<FrequencyModule> {
        &self.module
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, coords: &[i64]) -> bool {
        self.elements.contains_key(coords)
    }

    pub fn coords(&self) -> impl Iterator<Item = &Vec<i64>> {
        self.elements.keys()
    }

    /// Elements of the module's frequency list whose sum is the given element.
    pub fn witness(&self, coords: &[i64]) -> Option<&[Vec<i64>]> {
        self.elements.get(coords).map(|v| v.as_slice())
    }

    pub fn frequencies(&self) -> Vec<Frequency> {
        self.elements
            .keys()
            .map(|c| self.module.frequency(c.clone()))
            .collect()
    }

    pub fn nonzero_frequencies(&self) -> Vec<Frequency> {
        self.frequencies()
            .into_iter()
            .filter(|f| !f.is_zero())
            .collect()
    }
}

/// Exact deduplicated K-fold sumset. Because `0` is in the list this is the
/// set of sums of at most `k` frequencies.
pub fn sumset(module: &Arc<FrequencyModule>, k: usize) -> Result<SumsetK> {
    sumset_capped(module, k, SUMSET_CAP)
}

pub fn sumset_capped(module: &Arc<FrequencyModule>, k: usize, cap: usize) -> Result<SumsetK> {
    if k == 0 {
        return Err(Error::Config("sumset order K must be at least 1".into()));
    }
    let base = &module.frequencies;
    let mut elements: BTreeMap<Vec<i64>, Vec<Vec<i64>>> = base
        .iter()
        .map(|c| {
            let w = if c.iter().all(|&x| x == 0) {
                Vec::new()
            } else {
                vec![c.clone()]
            };
            (c.clone(), w)
        })
        .collect();
    for _ in 1..k {
        let mut next = elements.clone();
        for (s, w) in &elements {
            for b in base {
                if b.iter().all(|&x| x == 0) {
                    continue;
                }
                let sum: Vec<i64> = s.iter().zip(b).map(|(x, y)| x + y).collect();
                if let std::collections::btree_map::Entry::Vacant(e) = next.entry(sum) {
                    let mut wit = w.clone();
                    wit.push(b.clone());
                    e.insert(wit);
                    if next.len() > cap {
                        return Err(Error::Resource {
                            what: format!("sumset of order {k} exceeds element cap"),
                            cap,
                        });
                    }
                }
            }
        }
        elements = next;
    }
    Ok(SumsetK {
        k,
        module: module.clone(),
        elements,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> FrequencyModule {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let mut f = Vec::new();
        for n in -4..=4 {
            for m in -4..=4 {
                f.push(vec![n, m]);
            }
        }
        FrequencyModule::new(1, vec![vec![1.0], vec![phi]], f, None).unwrap()
    }

    #[test]
    fn truncate_integers() {
        let m = FrequencyModule::integer_lattice(1, 10.0).unwrap();
        let t = truncate(&m, 2.5, 3).unwrap();
        let c: Vec<i64> = t.module.coords().iter().map(|c| c[0]).collect();
        assert_eq!(c, vec![-2, -1, 0, 1, 2]);
        assert!(t.warning.is_none());
    }

    #[test]
    fn truncate_golden_matches_enumeration() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let t = truncate(&golden(), 2.0, 3).unwrap();
        let mut expect = Vec::new();
        for n in -4i64..=4 {
            for m in -4i64..=4 {
                if (n as f64 + m as f64 * phi).abs() <= 2.0 {
                    expect.push(vec![n, m]);
                }
            }
        }
        expect.sort();
        assert_eq!(t.module.coords(), expect.as_slice());
    }

    #[test]
    fn truncate_below_min_norm_warns() {
        let m = FrequencyModule::integer_lattice(1, 3.0).unwrap();
        let t = truncate(&m, 0.5, 1).unwrap();
        assert_eq!(t.module.coords().len(), 1);
        assert!(t.warning.is_some());
    }

    #[test]
    fn sumset_small_cases() {
        let m = Arc::new(FrequencyModule::integer_lattice(1, 1.0).unwrap());
        let s = sumset(&m, 3).unwrap();
        let c: Vec<i64> = s.coords().map(|c| c[0]).collect();
        assert_eq!(c, vec![-3, -2, -1, 0, 1, 2, 3]);
        let w = s.witness(&[3]).unwrap();
        assert_eq!(w.len(), 3);

        let m2 = Arc::new(FrequencyModule::integer_lattice(2, 1.0).unwrap());
        let s2 = sumset(&m2, 2).unwrap();
        assert_eq!(s2.len(), 13);
        for c in s2.coords() {
            assert!(c[0].abs() + c[1].abs() <= 2);
        }
    }

    #[test]
    fn sumset_cap_is_reported() {
        let m = Arc::new(FrequencyModule::integer_lattice(2, 3.0).unwrap());
        match sumset_capped(&m, 4, 100) {
            Err(Error::Resource { cap, .. }) => assert_eq!(cap, 100),
            other => panic!("expected resource error, got {other:?}"),
        }
    }

    #[test]
    fn golden_min_norm_after_pair_sums() {
        let t = truncate(&golden(), 2.0, 3).unwrap();
        let s = sumset(&t.module, 2).unwrap();
        let (r, _) = r_min(&s).unwrap();
        let base: Vec<f64> = t
            .module
            .frequencies()
            .iter()
            .map(|f| f.embedding()[0])
            .collect();
        let mut expect = f64::INFINITY;
        for a in &base {
            for b in &base {
                let v = (a + b).abs();
                if v > 1e-9 {
                    expect = expect.min(v);
                }
            }
        }
        assert!((r - expect).abs() < 1e-12, "{r} vs {expect}");
    }

    #[test]
    fn decay_tail_bound_shrinks_with_omega() {
        let m = FrequencyModule::new(
            1,
            vec![vec![1.0]],
            (-20..=20).map(|n| vec![n]).collect(),
            Some(Decay {
                rate: 4.0,
                constant: 1.0,
            }),
        )
        .unwrap();
        let a = truncate(&m, 4.0, 2).unwrap().tail_bound.unwrap();
        let b = truncate(&m, 8.0, 2).unwrap().tail_bound.unwrap();
        assert!(b < a);
        // direct sum over |n| > 4 for comparison (bound must dominate)
        let direct: f64 = (5..10000).map(|n| 2.0 * (1.0 + n as f64).powf(-4.0)).sum();
        assert!(a >= direct, "{a} < {direct}");
    }

    #[test]
    fn embedding_is_reproducible() {
        let g = golden();
        let f1 = g.frequency(vec![3, -2]);
        let f2 = g.frequency(vec![3, -2]);
        assert_eq!(f1.embedding()[0].to_bits(), f2.embedding()[0].to_bits());
        assert_eq!(f1, f2);
    }
}
