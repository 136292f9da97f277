use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write;

use serde::Serialize;

use super::{EnergyShell, ZoneParams};
use crate::apsymbol::BaseSymbol;
use crate::freqgeom::{Frequency, QuasiLatticeSubspace, SumsetK};
use crate::{Error, Execution, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CellLabel {
    NonResonant,
    Resonant { level: usize, component: usize },
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassifiedCell {
    pub index: Vec<usize>,
    pub center: Vec<f64>,
    pub label: CellLabel,
    /// Some frequency violates the level-1 threshold, but the dimension
    /// leaves no proper resonance subspace (only possible for `d = 1`).
    pub critical: bool,
    /// Smallest `|<grad A0, theta>|` over the cell samples and nonzero `theta`.
    pub min_divisor: f64,
}

#[derive(Clone, Debug)]
pub struct ResonantComponent {
    pub id: usize,
    pub level: usize,
    pub subspace: QuasiLatticeSubspace,
    pub witnesses: Vec<Vec<i64>>,
    /// Positions in [`ZoneDecomposition::cells`].
    pub cells: Vec<usize>,
    pub diameter: f64,
    pub gamma: f64,
    /// `min |<grad A0, theta>|` over the component for `theta` outside `V`.
    pub transverse_margin: f64,
}

#[derive(Clone, Debug)]
pub struct ZoneDecomposition {
    pub shell: EnergyShell,
    pub params: ZoneParams,
    pub cells: Vec<ClassifiedCell>,
    pub components: Vec<ResonantComponent>,
}

struct CellInfo {
    level: usize,
    witnesses: Vec<Frequency>,
    critical: bool,
    overfull: bool,
    min_divisor: f64,
}

/// Corners and center of a cell.
fn samples(shell: &EnergyShell, idx: &[usize]) -> Vec<Vec<f64>> {
    let (lo, hi) = shell.cell_box(idx);
    let d = lo.len();
    let mut out = vec![shell.center(idx)];
    for mask in 0..(1usize << d) {
        out.push(
            (0..d)
                .map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] })
                .collect(),
        );
    }
    out
}

fn greedy_independent(d: usize, ordered: &[&Frequency], limit: usize) -> Vec<Frequency> {
    let mut chosen: Vec<Frequency> = Vec::new();
    for f in ordered {
        if chosen.len() == limit {
            break;
        }
        let mut trial = chosen.clone();
        trial.push((*f).clone());
        if QuasiLatticeSubspace::new(d, trial).is_ok() {
            chosen.push((*f).clone());
        }
    }
    chosen
}

fn classify_cell(
    base: &BaseSymbol,
    shell: &EnergyShell,
    idx: &[usize],
    freqs: &[Frequency],
    params: &ZoneParams,
) -> CellInfo {
    let d = shell.dim();
    let pts = samples(shell, idx);
    let grads: Vec<Vec<f64>> = pts.iter().map(|p| base.gradient(p)).collect();
    let div: Vec<f64> = freqs
        .iter()
        .map(|f| {
            grads
                .iter()
                .map(|g| {
                    g.iter()
                        .zip(f.embedding())
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                        .abs()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let min_divisor = div.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_level = d.saturating_sub(1);
    let mut info = CellInfo {
        level: 0,
        witnesses: Vec::new(),
        critical: false,
        overfull: false,
        min_divisor,
    };
    let violated_at = |gamma: f64| -> Vec<&Frequency> {
        let mut v: Vec<(f64, &Frequency)> = freqs
            .iter()
            .zip(&div)
            .filter(|(_, s)| **s < gamma)
            .map(|(f, s)| (*s, f))
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        v.into_iter().map(|(_, f)| f).collect()
    };
    let first = violated_at(params.gamma(1));
    if first.is_empty() {
        return info;
    }
    if max_level == 0 {
        info.critical = true;
        return info;
    }
    for j in (1..=max_level).rev() {
        let v = violated_at(params.gamma(j));
        let indep = greedy_independent(d, &v, d);
        if indep.len() >= j {
            info.level = j;
            info.overfull = indep.len() > j;
            info.witnesses = indep.into_iter().take(j).collect();
            break;
        }
    }
    info
}

fn subspace_key(level: usize, s: &QuasiLatticeSubspace) -> (usize, Vec<i64>) {
    (level, s.key())
}

/// Labels every shell cell, groups resonant cells into face-connected
/// components with a common subspace, applies the upward absorption rule and
/// checks the component diameters.
pub fn classify(
    base: &BaseSymbol,
    shell: &EnergyShell,
    sumset: &SumsetK,
    params: &ZoneParams,
    exec: Execution,
) -> Result<ZoneDecomposition> {
    let d = shell.dim();
    if sumset.module().dim() != d || base.dim() != d {
        return Err(Error::Config(
            "dimension mismatch in zone classification".into(),
        ));
    }
    let freqs = sumset.nonzero_frequencies();
    let infos = exec.map(&shell.cells, |idx| {
        classify_cell(base, shell, idx, &freqs, params)
    });
    if let Some(pos) = infos.iter().position(|i| i.overfull) {
        return Err(Error::Decomposition(format!(
            "cell at {:?} violates more independent frequencies than the dimension allows; \
             the shell meets a critical region",
            shell.center(&shell.cells[pos])
        )));
    }
    let position: HashMap<&[usize], usize> = shell
        .cells
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_slice(), i))
        .collect();
    let mut level: Vec<usize> = infos.iter().map(|i| i.level).collect();
    let mut subspaces: Vec<Option<QuasiLatticeSubspace>> = infos
        .iter()
        .map(|i| {
            (i.level > 0)
                .then(|| QuasiLatticeSubspace::new(d, i.witnesses.clone()).expect("independent"))
        })
        .collect();
    let neighbours = |i: usize| -> Vec<usize> {
        let idx = &shell.cells[i];
        let mut out = Vec::new();
        for ax in 0..d {
            for delta in [-1i64, 1] {
                let v = idx[ax] as i64 + delta;
                if v < 0 || v as usize >= shell.counts[ax] {
                    continue;
                }
                let mut n = idx.clone();
                n[ax] = v as usize;
                if let Some(&p) = position.get(n.as_slice()) {
                    out.push(p);
                }
            }
        }
        out
    };

    let flood = |level: &[usize], subspaces: &[Option<QuasiLatticeSubspace>]| -> Vec<Vec<usize>> {
        let keys: Vec<Option<(usize, Vec<i64>)>> = subspaces
            .iter()
            .zip(level)
            .map(|(s, l)| s.as_ref().map(|s| subspace_key(*l, s)))
            .collect();
        let mut comp = vec![usize::MAX; level.len()];
        let mut out = Vec::new();
        for start in 0..level.len() {
            if level[start] == 0 || comp[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = Vec::new();
            let mut queue = VecDeque::from([start]);
            comp[start] = id;
            while let Some(c) = queue.pop_front() {
                members.push(c);
                for n in neighbours(c) {
                    if comp[n] == usize::MAX && level[n] > 0 && keys[n] == keys[c] {
                        comp[n] = id;
                        queue.push_back(n);
                    }
                }
            }
            members.sort();
            out.push(members);
        }
        out
    };

    // Absorption: a level-j component touching a higher-level cell joins it.
    for _ in 0..d.saturating_sub(1) {
        let comps = flood(&level, &subspaces);
        let mut changed = false;
        for members in &comps {
            let l = level[members[0]];
            let target = members
                .iter()
                .flat_map(|&c| neighbours(c))
                .filter(|&n| level[n] > l)
                .min_by_key(|&n| (level[n], n));
            if let Some(t) = target {
                let (tl, ts) = (level[t], subspaces[t].clone());
                for &c in members {
                    level[c] = tl;
                    subspaces[c] = ts.clone();
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let comps = flood(&level, &subspaces);
    let mut labels = vec![CellLabel::NonResonant; shell.cells.len()];
    let mut components = Vec::with_capacity(comps.len());
    for (id, members) in comps.into_iter().enumerate() {
        let l = level[members[0]];
        let subspace = subspaces[members[0]]
            .clone()
            .expect("resonant cell has a subspace");
        for &c in &members {
            labels[c] = CellLabel::Resonant {
                level: l,
                component: id,
            };
        }
        let centers: Vec<Vec<f64>> = members
            .iter()
            .map(|&c| shell.center(&shell.cells[c]))
            .collect();
        let diameter = diameter(&centers) + shell.step * (d as f64).sqrt();
        let gamma = params.gamma(l);
        if diameter > params.diameter_factor * gamma {
            return Err(Error::Decomposition(format!(
                "component {id} (level {l}) has diameter {diameter:.4} above {} * gamma_{l} = {:.4}; \
                 adjust c or the zone exponents",
                params.diameter_factor,
                params.diameter_factor * gamma
            )));
        }
        let transverse_margin = centers
            .iter()
            .map(|p| {
                let g = base.gradient(p);
                freqs
                    .iter()
                    .filter(|f| !subspace.contains_frequency(f))
                    .map(|f| {
                        g.iter()
                            .zip(f.embedding())
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                            .abs()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min);
        components.push(ResonantComponent {
            id,
            level: l,
            witnesses: subspace.basis_coords(),
            subspace,
            cells: members,
            diameter,
            gamma,
            transverse_margin,
        });
    }

    let cells = shell
        .cells
        .iter()
        .zip(infos)
        .zip(labels)
        .map(|((idx, info), label)| ClassifiedCell {
            index: idx.clone(),
            center: shell.center(idx),
            label,
            critical: info.critical,
            min_divisor: info.min_divisor,
        })
        .collect();
    Ok(ZoneDecomposition {
        shell: shell.clone(),
        params: params.clone(),
        cells,
        components,
    })
}

fn diameter(points: &[Vec<f64>]) -> f64 {
    let dist = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    if points.len() <= 4000 {
        let mut best: f64 = 0.0;
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                best = best.max(dist(&points[i], &points[j]));
            }
        }
        best
    } else {
        let d = points[0].len();
        let lo: Vec<f64> = (0..d)
            .map(|i| points.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min))
            .collect();
        let hi: Vec<f64> = (0..d)
            .map(|i| {
                points
                    .iter()
                    .map(|p| p[i])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        dist(&lo, &hi)
    }
}

impl ZoneDecomposition {
    pub fn non_resonant_cells(&self) -> impl Iterator<Item = &ClassifiedCell> {
        self.cells
            .iter()
            .filter(|c| c.label == CellLabel::NonResonant)
    }

    pub fn resonant_cell_count(&self) -> usize {
        self.cells.len() - self.non_resonant_cells().count()
    }

    pub fn critical_cells(&self) -> impl Iterator<Item = &ClassifiedCell> {
        self.cells.iter().filter(|c| c.critical)
    }

    /// Counts per label kind: `level -> number of cells` (level 0 is non-resonant).
    pub fn level_histogram(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for c in &self.cells {
            let l = match c.label {
                CellLabel::NonResonant => 0,
                CellLabel::Resonant { level, .. } => level,
            };
            *out.entry(l).or_insert(0) += 1;
        }
        out
    }

    /// Comma-separated cell table with a header row.
    pub fn to_csv(&self) -> String {
        let d = self.shell.dim();
        let mut s = String::new();
        for i in 0..d {
            let _ = write!(s, "xi_{},", i + 1);
        }
        s.push_str("label,level,component,critical,subspace_basis\n");
        for c in &self.cells {
            for x in &c.center {
                let _ = write!(s, "{},", crate::report::fmt_num(*x));
            }
            let (label, level, comp, basis) = match c.label {
                CellLabel::NonResonant => ("non_resonant", 0, String::new(), String::new()),
                CellLabel::Resonant { level, component } => {
                    let b = self.components[component]
                        .witnesses
                        .iter()
                        .map(|w| {
                            format!(
                                "({})",
                                w.iter()
                                    .map(|x| x.to_string())
                                    .collect::<Vec<_>>()
                                    .join(" ")
                            )
                        })
                        .collect::<Vec<_>>()
                        .join(" ");
                    ("resonant", level, component.to_string(), b)
                }
            };
            let _ = writeln!(s, "{label},{level},{comp},{},{basis}", c.critical);
        }
        s
    }
}
