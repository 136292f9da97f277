use std::collections::HashSet;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use super::{hermite_normal_form, Frequency, FrequencyModule, SumsetK};
use crate::{Error, Result};

/// Hard cap on the number of enumerated quasi-lattice subspaces.
pub const SUBSPACE_CAP: usize = 100_000;

const ANGLE_TOL: f64 = 1e-9;
const MEMBER_TOL: f64 = 1e-9;

/// Span of linearly independent nonzero frequencies.
#[derive(Clone, Debug)]
pub struct QuasiLatticeSubspace {
    dim_ambient: usize,
    basis: Vec<Frequency>,
    ortho: DMatrix<f64>,
}

impl QuasiLatticeSubspace {
    /// The zero subspace of `R^d`.
    pub fn zero(dim_ambient: usize) -> Self {
        Self {
            dim_ambient,
            basis: Vec::new(),
            ortho: DMatrix::zeros(dim_ambient, 0),
        }
    }

    pub fn new(dim_ambient: usize, basis: Vec<Frequency>) -> Result<Self> {
        let mut cols: Vec<nalgebra::DVector<f64>> = Vec::new();
        for f in &basis {
            if f.embedding().len() != dim_ambient {
                return Err(Error::Config("frequency dimension mismatch".into()));
            }
            let v = nalgebra::DVector::from_column_slice(f.embedding());
            let n0 = v.norm();
            if f.is_zero() || n0 == 0.0 {
                return Err(Error::Config("subspace basis contains zero".into()));
            }
            let mut r = v.clone();
            for _ in 0..2 {
                for q in &cols {
                    let c = q.dot(&r);
                    r -= q * c;
                }
            }
            let rn = r.norm();
            if rn <= MEMBER_TOL * n0 {
                return Err(Error::Config(format!(
                    "frequency {f} is linearly dependent on the preceding basis"
                )));
            }
            cols.push(r / rn);
        }
        let ortho = if cols.is_empty() {
            DMatrix::zeros(dim_ambient, 0)
        } else {
            DMatrix::from_columns(&cols)
        };
        Ok(Self {
            dim_ambient,
            basis,
            ortho,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim_ambient
    }

    pub fn basis(&self) -> &[Frequency] {
        &self.basis
    }

    /// Orthonormal basis, `d x q`.
    pub fn orthonormal(&self) -> &DMatrix<f64> {
        &self.ortho
    }

    pub fn projector(&self) -> DMatrix<f64> {
        &self.ortho * self.ortho.transpose()
    }

    /// Distance of `v` from the subspace.
    pub fn residual(&self, v: &[f64]) -> f64 {
        let x = nalgebra::DVector::from_column_slice(v);
        if self.dim() == 0 {
            return x.norm();
        }
        let p = &self.ortho * (self.ortho.transpose() * &x);
        (x - p).norm()
    }

    pub fn contains_vector(&self, v: &[f64]) -> bool {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        self.residual(v) <= MEMBER_TOL * n.max(1.0)
    }

    pub fn contains_frequency(&self, f: &Frequency) -> bool {
        f.is_zero() || self.contains_vector(f.embedding())
    }

    /// Rounded projector entries; equal keys identify equal subspaces.
    pub fn key(&self) -> Vec<i64> {
        self.projector()
            .iter()
            .map(|x| (x * 1e7).round() as i64)
            .collect()
    }

    pub fn basis_coords(&self) -> Vec<Vec<i64>> {
        self.basis.iter().map(|f| f.coords().to_vec()).collect()
    }
}

/// Principal-angle sines of the smaller subspace relative to the larger, ascending.
fn principal_sines(v: &QuasiLatticeSubspace, u: &QuasiLatticeSubspace) -> Vec<f64> {
    let (big, small) = if v.dim() >= u.dim() { (v, u) } else { (u, v) };
    if small.dim() == 0 {
        return Vec::new();
    }
    let d = big.ambient_dim();
    let perp = DMatrix::<f64>::identity(d, d) - big.projector();
    let m = perp * small.orthonormal();
    let mut s: Vec<f64> = m
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .collect();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    s
}

/// Sine of the angle between `V ⊖ W` and `U ⊖ W` with `W = V ∩ U`; zero
/// exactly when one subspace contains the other.
pub fn subspace_angle(v: &QuasiLatticeSubspace, u: &QuasiLatticeSubspace) -> f64 {
    let s = principal_sines(v, u);
    let w = s.iter().filter(|&&x| x <= ANGLE_TOL).count();
    if w == s.len() {
        0.0
    } else {
        s[w].min(1.0)
    }
}

/// All distinct quasi-lattice subspaces of dimension `1..=max_dim` spanned by
/// nonzero sumset elements, in a deterministic order.
pub fn enumerate_subspaces(sumset: &SumsetK, max_dim: usize) -> Result<Vec<QuasiLatticeSubspace>> {
    enumerate_capped(sumset, max_dim, SUBSPACE_CAP)
}

fn enumerate_capped(
    sumset: &SumsetK,
    max_dim: usize,
    cap: usize,
) -> Result<Vec<QuasiLatticeSubspace>> {
    let d = sumset.module().dim();
    let elems = sumset.nonzero_frequencies();
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut stack: Vec<usize> = Vec::new();
    fn rec(
        d: usize,
        elems: &[Frequency],
        max_dim: usize,
        start: usize,
        stack: &mut Vec<usize>,
        out: &mut Vec<QuasiLatticeSubspace>,
        seen: &mut HashSet<Vec<i64>>,
        cap: usize,
    ) -> Result<()> {
        for i in start..elems.len() {
            stack.push(i);
            let basis: Vec<Frequency> = stack.iter().map(|&j| elems[j].clone()).collect();
            if let Ok(sub) = QuasiLatticeSubspace::new(d, basis) {
                if seen.insert(sub.key()) {
                    out.push(sub);
                    if out.len() > cap {
                        return Err(Error::Resource {
                            what: "quasi-lattice subspace enumeration".into(),
                            cap,
                        });
                    }
                }
                if stack.len() < max_dim {
                    rec(d, elems, max_dim, i + 1, stack, out, seen, cap)?;
                }
            }
            stack.pop();
        }
        Ok(())
    }
    if max_dim > 0 {
        rec(
            d,
            &elems,
            max_dim.min(d),
            0,
            &mut stack,
            &mut out,
            &mut seen,
            cap,
        )?;
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct AngleWitness {
    pub v: Vec<Vec<i64>>,
    pub u: Vec<Vec<i64>>,
    pub sin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NormWitness {
    pub frequency: Vec<i64>,
    pub norm: f64,
}

/// Minimum angle sine over strongly distinct pairs of proper quasi-lattice
/// subspaces; `1` when there are no such pairs.
pub fn s_min(sumset: &SumsetK) -> Result<(f64, Option<AngleWitness>)> {
    let d = sumset.module().dim();
    if d < 2 {
        return Ok((1.0, None));
    }
    let subs = enumerate_subspaces(sumset, d - 1)?;
    let mut best = (1.0, None);
    for i in 0..subs.len() {
        for j in i + 1..subs.len() {
            let s = subspace_angle(&subs[i], &subs[j]);
            if s > 0.0 && (best.1.is_none() || s < best.0) {
                best = (
                    s,
                    Some(AngleWitness {
                        v: subs[i].basis_coords(),
                        u: subs[j].basis_coords(),
                        sin: s,
                    }),
                );
            }
        }
    }
    Ok(best)
}

/// Minimum norm of a nonzero sumset element.
pub fn r_min(sumset: &SumsetK) -> Result<(f64, NormWitness)> {
    sumset
        .nonzero_frequencies()
        .into_iter()
        .map(|f| (f.norm(), f))
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then_with(|| a.1.cmp(&b.1)))
        .map(|(n, f)| {
            (
                n,
                NormWitness {
                    frequency: f.coords().to_vec(),
                    norm: n,
                },
            )
        })
        .ok_or_else(|| Error::Config("sumset has no nonzero element".into()))
}

/// Integer lattice generated by the sumset elements lying in a subspace.
#[derive(Clone, Debug)]
pub struct ResonanceLattice {
    pub subspace: QuasiLatticeSubspace,
    /// Hermite-normal-form basis in generator coordinates.
    pub basis: Vec<Vec<i64>>,
    pub covolume: f64,
}

impl ResonanceLattice {
    pub fn embedded_basis(&self, module: &FrequencyModule) -> Vec<Vec<f64>> {
        self.basis.iter().map(|c| module.embed(c)).collect()
    }
}

/// Hermite-normal-form basis of the integer span of `sumset ∩ V`, with its covolume.
pub fn lattice_in_subspace(sumset: &SumsetK, v: &QuasiLatticeSubspace) -> Result<ResonanceLattice> {
    let module: &Arc<FrequencyModule> = sumset.module();
    let members: Vec<Vec<i64>> = sumset
        .nonzero_frequencies()
        .into_iter()
        .filter(|f| v.contains_frequency(f))
        .map(|f| f.coords().to_vec())
        .collect();
    let h = hermite_normal_form(&members)?;
    if h.basis.len() > v.dim() {
        let witness = h.basis[v.dim()].clone();
        return Err(Error::Inconsistent(format!(
            "members of the sumset in a {}-dimensional subspace generate a rank-{} group; \
             element {witness:?} lies outside the rational span of {:?}",
            v.dim(),
            h.basis.len(),
            &h.basis[..v.dim()]
        )));
    }
    if h.basis.len() < v.dim() {
        return Err(Error::Config(format!(
            "subspace of dimension {} is not spanned by sumset members (rank {})",
            v.dim(),
            h.basis.len()
        )));
    }
    let b: Vec<Vec<f64>> = h.basis.iter().map(|c| module.embed(c)).collect();
    let q = b.len();
    let gram = DMatrix::from_fn(q, q, |i, j| {
        b[i].iter().zip(&b[j]).map(|(x, y)| x * y).sum::<f64>()
    });
    let covolume = if q == 0 {
        1.0
    } else {
        gram.determinant().max(0.0).sqrt()
    };
    Ok(ResonanceLattice {
        subspace: v.clone(),
        basis: h.basis,
        covolume,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{sumset, FrequencyModule};
    use super::*;

    fn z2() -> Arc<FrequencyModule> {
        Arc::new(FrequencyModule::integer_lattice(2, 1.0).unwrap())
    }

    fn line(m: &FrequencyModule, c: &[&[i64]]) -> QuasiLatticeSubspace {
        QuasiLatticeSubspace::new(2, c.iter().map(|c| m.frequency(c.to_vec())).collect()).unwrap()
    }

    #[test]
    fn angle_examples() {
        let m = z2();
        let v = line(&m, &[&[1, 0]]);
        let u = line(&m, &[&[1, 1]]);
        assert!((subspace_angle(&v, &u) - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((subspace_angle(&u, &v) - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(subspace_angle(&v, &v), 0.0);
        let full = line(&m, &[&[1, 0], &[0, 1]]);
        assert_eq!(subspace_angle(&v, &full), 0.0);
        assert_eq!(subspace_angle(&full, &v), 0.0);
    }

    #[test]
    fn tiny_angle_resolved() {
        let m = FrequencyModule::new(
            2,
            vec![vec![1.0, 0.0], vec![1.0, 1e-6]],
            vec![vec![1, 0], vec![0, 1]],
            None,
        )
        .unwrap();
        let v = line(&m, &[&[1, 0]]);
        let u = line(&m, &[&[0, 1]]);
        let s = subspace_angle(&v, &u);
        assert!((s - 1e-6).abs() < 1e-12, "{s}");
    }

    #[test]
    fn lattice_examples() {
        let m = Arc::new(
            FrequencyModule::new(
                2,
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![vec![2, 0], vec![1, 1], vec![2, 2], vec![0, 3]],
                None,
            )
            .unwrap(),
        );
        let s = sumset(&m, 1).unwrap();
        let x = line(&m, &[&[2, 0]]);
        let l = lattice_in_subspace(&s, &x).unwrap();
        assert_eq!(l.basis, vec![vec![2, 0]]);
        assert!((l.covolume - 2.0).abs() < 1e-12);
        let diag = line(&m, &[&[2, 2]]);
        let l = lattice_in_subspace(&s, &diag).unwrap();
        assert_eq!(l.basis, vec![vec![1, 1]]);
        assert!((l.covolume - 2f64.sqrt()).abs() < 1e-12);

        let full = z2();
        let s = sumset(&full, 1).unwrap();
        let plane = line(&full, &[&[1, 0], &[0, 1]]);
        let l = lattice_in_subspace(&s, &plane).unwrap();
        assert!((l.covolume - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_excess_is_inconsistent() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let m = Arc::new(
            FrequencyModule::new(
                1,
                vec![vec![1.0], vec![phi]],
                vec![vec![1, 0], vec![0, 1]],
                None,
            )
            .unwrap(),
        );
        let s = sumset(&m, 1).unwrap();
        let all = QuasiLatticeSubspace::new(1, vec![m.frequency(vec![1, 0])]).unwrap();
        assert!(matches!(
            lattice_in_subspace(&s, &all),
            Err(Error::Inconsistent(_))
        ));
    }

    #[test]
    fn enumeration_dedups_opposite_directions() {
        let m = z2();
        let s = sumset(&m, 1).unwrap();
        let subs = enumerate_subspaces(&s, 1).unwrap();
        assert_eq!(subs.len(), 2);
        let (smin, w) = s_min(&s).unwrap();
        assert!((smin - 1.0).abs() < 1e-12);
        assert!(w.is_some());
    }

    #[test]
    fn enumeration_cap() {
        let m = Arc::new(FrequencyModule::integer_lattice(2, 3.0).unwrap());
        let s = sumset(&m, 1).unwrap();
        assert!(matches!(
            enumerate_capped(&s, 1, 3),
            Err(Error::Resource { .. })
        ));
    }
}
