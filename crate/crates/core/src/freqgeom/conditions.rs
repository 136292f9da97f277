use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use super::{
    enumerate_subspaces, integer_kernel, lattice_in_subspace, numeric_rank, r_min, s_min, sumset,
    truncate, FrequencyModule,
};
use crate::{Error, Result};

const TUPLE_CAP: usize = 2_000_000;

/// Multiplicative constants in front of `omega^-1` for Conditions C and D.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Thresholds {
    pub angle: f64,
    pub norm: f64,
    pub covolume: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            angle: 1.0,
            norm: 1.0,
            covolume: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionStatus {
    Pass,
    Fail,
    NotCheckable,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionRecord {
    pub condition: &'static str,
    pub status: ConditionStatus,
    /// Signed distance to the threshold (positive when passing).
    pub margin: Option<f64>,
    /// Integer coordinates of the witnessing frequencies.
    pub witness: Vec<Vec<i64>>,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub omega: f64,
    pub l: u32,
    pub k: usize,
    pub records: Vec<ConditionRecord>,
    pub notes: Vec<String>,
}

impl ConditionReport {
    pub fn record(&self, condition: &str) -> &ConditionRecord {
        self.records
            .iter()
            .find(|r| r.condition == condition)
            .expect("every report carries A, B, C and D")
    }

    pub fn all_pass(&self) -> bool {
        self.records
            .iter()
            .all(|r| r.status == ConditionStatus::Pass)
    }

    /// Plain-text summary, one line per condition.
    pub fn summary(&self) -> String {
        let mut s = format!("omega = {}, L = {}, K = {}\n", self.omega, self.l, self.k);
        for r in &self.records {
            let status = match r.status {
                ConditionStatus::Pass => "PASS",
                ConditionStatus::Fail => "FAIL",
                ConditionStatus::NotCheckable => "NOT CHECKABLE",
            };
            s.push_str(&format!(
                "Condition {}: {status} - {}\n",
                r.condition, r.detail
            ));
        }
        for n in &self.notes {
            s.push_str(&format!("note: {n}\n"));
        }
        s
    }
}

/// Checks the four frequency conditions for the truncation of `module` at
/// radius `omega`, tail order `l` and sumset order `k`.
pub fn check_conditions(
    module: &FrequencyModule,
    k: usize,
    omega: f64,
    l: u32,
    thresholds: Thresholds,
) -> Result<ConditionReport> {
    let trunc = truncate(module, omega, l)?;
    let theta = trunc.module.clone();
    let d = module.dim();
    let mut notes = Vec::new();
    if let Some(w) = &trunc.warning {
        notes.push(w.clone());
    }

    let a = condition_a(&theta)?;
    let b = condition_b(module, omega, &trunc);
    let sum = sumset(&theta, k)?;

    let (s, s_wit) = s_min(&sum)?;
    let c = match r_min(&sum) {
        Ok((r, r_wit)) => {
            let s_thr = thresholds.angle / omega;
            let r_thr = thresholds.norm / omega;
            let ok = s >= s_thr && r >= r_thr;
            let (witness, detail) = if s < s_thr {
                let w = s_wit.expect("finite s_min carries a witness");
                let mut wv = w.v.clone();
                wv.extend(w.u.clone());
                (
                    wv,
                    format!(
                        "s_min = {s:.6e} < {s_thr:.6e} for subspaces {:?} and {:?}",
                        w.v, w.u
                    ),
                )
            } else if r < r_thr {
                (
                    vec![r_wit.frequency.clone()],
                    format!("r_min = {r:.6e} < {r_thr:.6e} at {:?}", r_wit.frequency),
                )
            } else {
                let mut wv = vec![r_wit.frequency.clone()];
                if let Some(w) = &s_wit {
                    wv.extend(w.v.clone());
                    wv.extend(w.u.clone());
                }
                (
                    wv,
                    format!("s_min = {s:.6e}, r_min = {r:.6e}, threshold {s_thr:.6e}"),
                )
            };
            ConditionRecord {
                condition: "C",
                status: if ok {
                    ConditionStatus::Pass
                } else {
                    ConditionStatus::Fail
                },
                margin: Some((s - s_thr).min(r - r_thr)),
                witness,
                detail,
            }
        }
        Err(_) => ConditionRecord {
            condition: "C",
            status: ConditionStatus::Fail,
            margin: None,
            witness: Vec::new(),
            detail: "truncated set has no nonzero frequency".into(),
        },
    };

    let dd = condition_d(&sum, d, omega, thresholds)?;
    notes.push(
        "resonance lattices are generated by the finite sumset only; covolumes are upper \
         bounds for the limiting lattices, so Condition D here is necessary, not sufficient"
            .into(),
    );
    if module.is_lattice() {
        notes.push("frequency set generates a lattice: Conditions A-D hold for large omega".into());
    } else if a.status == ConditionStatus::Pass {
        notes.push(
            "truncated set is finite and satisfies A: the union of its sumsets is a lattice".into(),
        );
    }
    notes.push(
        "integer dependence is decided on generator coordinates; generators are assumed \
         rationally independent"
            .into(),
    );
    Ok(ConditionReport {
        omega,
        l,
        k,
        records: vec![a, b, c, dd],
        notes,
    })
}

fn condition_a(theta: &Arc<FrequencyModule>) -> Result<ConditionRecord> {
    let d = theta.dim();
    let freqs = theta.nonzero_frequencies();
    let mut checked = 0usize;
    let mut dependent = 0usize;
    let mut kernel_examples: Vec<Vec<i64>> = Vec::new();
    let mut failure: Option<Vec<Vec<i64>>> = None;
    let mut idx: Vec<usize> = (0..d).collect();
    if freqs.len() >= d {
        loop {
            checked += 1;
            if checked > TUPLE_CAP {
                return Err(Error::Resource {
                    what: "Condition A tuple enumeration".into(),
                    cap: TUPLE_CAP,
                });
            }
            let m = DMatrix::from_fn(d, d, |i, j| freqs[idx[j]].embedding()[i]);
            if numeric_rank(&m) < d {
                dependent += 1;
                let cols: Vec<Vec<i64>> = idx.iter().map(|&j| freqs[j].coords().to_vec()).collect();
                let ker = integer_kernel(&cols)?;
                if ker.is_empty() {
                    failure = Some(cols);
                    break;
                } else if kernel_examples.len() < 4 {
                    kernel_examples.push(ker[0].clone());
                }
            }
            // next combination
            let mut i = d;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if idx[i] < freqs.len() - d + i {
                    idx[i] += 1;
                    for j in i + 1..d {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
                if i == 0 {
                    idx.clear();
                }
            }
            if idx.is_empty() {
                break;
            }
        }
    }
    Ok(match failure {
        Some(w) => ConditionRecord {
            condition: "A",
            status: ConditionStatus::Fail,
            margin: None,
            detail: format!(
                "tuple {w:?} is linearly dependent over R but has empty integer kernel"
            ),
            witness: w,
        },
        None => ConditionRecord {
            condition: "A",
            status: ConditionStatus::Pass,
            margin: None,
            detail: format!(
                "{checked} {d}-tuples checked, {dependent} dependent over R, each with a \
                 nonzero integer kernel vector; independent tuples have empty integer kernel"
            ),
            witness: kernel_examples,
        },
    })
}

fn condition_b(module: &FrequencyModule, omega: f64, trunc: &super::Truncation) -> ConditionRecord {
    let outside: Vec<Vec<i64>> = module
        .coords()
        .iter()
        .filter(|c| super::norm(&module.embed(c)) > omega)
        .cloned()
        .collect();
    if outside.is_empty() && module.decay().is_none() {
        return ConditionRecord {
            condition: "B",
            status: ConditionStatus::Pass,
            margin: Some(trunc.target),
            witness: Vec::new(),
            detail: "all frequencies lie within omega; truncation is exact".into(),
        };
    }
    match trunc.tail_bound {
        Some(tail) => ConditionRecord {
            condition: "B",
            status: if tail <= trunc.target {
                ConditionStatus::Pass
            } else {
                ConditionStatus::Fail
            },
            margin: Some(trunc.target - tail),
            witness: Vec::new(),
            detail: format!("tail bound {tail:.6e} vs omega^-L = {:.6e}", trunc.target),
        },
        None => ConditionRecord {
            condition: "B",
            status: ConditionStatus::NotCheckable,
            margin: None,
            witness: outside.into_iter().take(4).collect(),
            detail: "frequencies beyond omega without a declared decay law".into(),
        },
    }
}

fn condition_d(
    sum: &super::SumsetK,
    d: usize,
    omega: f64,
    thresholds: Thresholds,
) -> Result<ConditionRecord> {
    let thr = thresholds.covolume / omega;
    if d < 2 {
        return Ok(ConditionRecord {
            condition: "D",
            status: ConditionStatus::Pass,
            margin: None,
            witness: Vec::new(),
            detail: "no proper nonzero quasi-lattice subspaces in dimension 1".into(),
        });
    }
    let subs = enumerate_subspaces(sum, d - 1)?;
    let mut worst: Option<(f64, Vec<Vec<i64>>)> = None;
    for v in &subs {
        match lattice_in_subspace(sum, v) {
            Ok(lat) => {
                if worst.as_ref().is_none_or(|(c, _)| lat.covolume < *c) {
                    worst = Some((lat.covolume, lat.basis.clone()));
                }
            }
            Err(Error::Inconsistent(msg)) => {
                return Ok(ConditionRecord {
                    condition: "D",
                    status: ConditionStatus::Fail,
                    margin: None,
                    witness: v.basis_coords(),
                    detail: msg,
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(match worst {
        None => ConditionRecord {
            condition: "D",
            status: ConditionStatus::Pass,
            margin: None,
            witness: Vec::new(),
            detail: "no proper subspaces enumerated".into(),
        },
        Some((c, basis)) => ConditionRecord {
            condition: "D",
            status: if c >= thr { ConditionStatus::Pass } else { ConditionStatus::Fail },
            margin: Some(c - thr),
            detail: format!(
                "minimum covolume {c:.6e} over {} subspaces (threshold {thr:.6e}) at basis {basis:?}",
                subs.len()
            ),
            witness: basis,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z2_lattice_passes() {
        let m = FrequencyModule::integer_lattice(2, 2.0).unwrap();
        let r = check_conditions(&m, 1, 2.0, 2, Thresholds::default()).unwrap();
        assert!(r.all_pass(), "{}", r.summary());
        assert!(r.notes.iter().any(|n| n.contains("lattice")));
    }

    #[test]
    fn near_parallel_fails_c() {
        let m = FrequencyModule::new(
            2,
            vec![vec![1.0, 0.0], vec![1.0, 1e-6]],
            vec![vec![1, 0], vec![0, 1]],
            None,
        )
        .unwrap();
        let r = check_conditions(&m, 1, 10.0, 2, Thresholds::default()).unwrap();
        let c = r.record("C");
        assert_eq!(c.status, ConditionStatus::Fail);
        assert!(c.witness.contains(&vec![1, 0]) || c.witness.contains(&vec![-1, 0]));
        assert!(c.witness.contains(&vec![0, 1]) || c.witness.contains(&vec![0, -1]));
        assert_eq!(r.record("A").status, ConditionStatus::Pass);
    }

    #[test]
    fn golden_passes_a() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let m = FrequencyModule::new(
            1,
            vec![vec![1.0], vec![phi]],
            vec![vec![1, 0], vec![0, 1]],
            None,
        )
        .unwrap();
        let r = check_conditions(&m, 2, 2.0, 2, Thresholds::default()).unwrap();
        assert_eq!(r.record("A").status, ConditionStatus::Pass);
    }

    #[test]
    fn dependent_over_r_without_integer_relation_fails_a() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        // (1,0) and (phi,0) are parallel in R^2 with no integer relation.
        let m = FrequencyModule::new(
            2,
            vec![vec![1.0, 0.0], vec![phi, 0.0], vec![0.0, 1.0]],
            vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]],
            None,
        )
        .unwrap();
        let r = check_conditions(&m, 1, 3.0, 2, Thresholds::default()).unwrap();
        assert_eq!(r.record("A").status, ConditionStatus::Fail);
    }

    #[test]
    fn condition_b_not_checkable_without_decay() {
        let m = FrequencyModule::integer_lattice(1, 5.0).unwrap();
        let r = check_conditions(&m, 1, 2.0, 2, Thresholds::default()).unwrap();
        assert_eq!(r.record("B").status, ConditionStatus::NotCheckable);
    }
}
