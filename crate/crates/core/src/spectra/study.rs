use serde::Serialize;

use crate::oracle::{ids_oracle, OracleSettings};
use crate::report::fmt_num;
use crate::zones::ZoneParams;
use crate::{Execution, Result};

use super::{ids_pipeline, PipelineOptions, SpectralProblem, ZoneContribution};

/// One `(h, K)` cell of a convergence study.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StudyCase {
    pub h: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub eps: f64,
    pub tau: f64,
    pub steps: usize,
    pub n_pipeline: f64,
    pub n_oracle: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub contributions: Vec<ZoneContribution>,
    /// Why the row is excluded from the fits.
    pub flag: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SlopeRecord {
    pub steps: usize,
    /// Least-squares slope of `ln(h^d abs_err)` against `ln h`.
    pub slope: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralTable {
    pub dim: usize,
    pub rows: Vec<ConvergenceRow>,
    pub slopes: Vec<SlopeRecord>,
}

pub type ConvergenceStudy = SpectralTable;

impl SpectralTable {
    pub fn slope(&self, steps: usize) -> Option<f64> {
        self.slopes
            .iter()
            .find(|s| s.steps == steps)
            .map(|s| s.slope)
    }

    /// Comma-separated rows with one column per zone label.
    pub fn to_csv(&self) -> String {
        let mut zones: Vec<String> = Vec::new();
        for r in &self.rows {
            for c in &r.contributions {
                if !zones.contains(&c.zone) {
                    zones.push(c.zone.clone());
                }
            }
        }
        let mut out = String::from("h,epsilon,tau,K,n_pipeline,n_oracle,abs_err");
        for z in &zones {
            out.push(',');
            out.push_str(z);
        }
        out.push('\n');
        for r in &self.rows {
            let mut line = [r.h, r.eps, r.tau]
                .iter()
                .map(|v| fmt_num(*v))
                .collect::<Vec<_>>();
            line.push(r.steps.to_string());
            line.push(fmt_num(r.n_pipeline));
            line.extend([r.n_oracle, r.abs_err].iter().map(|v| {
                if v.is_finite() {
                    fmt_num(*v)
                } else {
                    String::new()
                }
            }));
            for z in &zones {
                line.push(
                    r.contributions
                        .iter()
                        .find(|c| &c.zone == z)
                        .map_or_else(String::new, |c| fmt_num(c.value)),
                );
            }
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Runs pipeline and oracle for every `h` and step count.
///
/// `build(h, K)` supplies the operator and zone parameters of a row; the
/// oracle is run once per `h`. Rows whose oracle or pipeline fails are kept
/// with a flag and left out of the slope fits.
pub fn convergence_study<B>(
    build: B,
    tau: f64,
    hs: &[f64],
    steps: &[usize],
    opts: &PipelineOptions,
    oracle: &OracleSettings,
    exec: Execution,
) -> Result<SpectralTable>
where
    B: Fn(f64, usize) -> Result<(SpectralProblem, ZoneParams)> + Sync,
{
    let dim = match hs.first().zip(steps.first()) {
        Some((&h, &k)) => build(h, k)?.0.dim(),
        None => 0,
    };
    let oracle_vals = exec.map(hs, |&h| -> Result<f64> {
        let (p, _) = build(h, steps.first().copied().unwrap_or(0))?;
        Ok(ids_oracle(&p.periodic()?, tau, oracle)?.value)
    });
    let cases: Vec<(usize, StudyCase)> = hs
        .iter()
        .enumerate()
        .flat_map(|(i, &h)| steps.iter().map(move |&k| (i, StudyCase { h, steps: k })))
        .collect();
    let rows = exec.map(&cases, |(i, case)| {
        let mut row = ConvergenceRow {
            h: case.h,
            eps: f64::NAN,
            tau,
            steps: case.steps,
            n_pipeline: f64::NAN,
            n_oracle: f64::NAN,
            abs_err: f64::NAN,
            rel_err: f64::NAN,
            contributions: Vec::new(),
            flag: None,
        };
        match &oracle_vals[*i] {
            Ok(v) => row.n_oracle = *v,
            Err(e) => row.flag = Some(format!("oracle: {e}")),
        }
        let res = build(case.h, case.steps).and_then(|(p, params)| {
            row.eps = p.eps;
            ids_pipeline(&p, tau, &params, case.steps, opts)
        });
        match res {
            Ok(ids) => {
                row.n_pipeline = ids.value;
                row.contributions = ids.contributions;
            }
            Err(e) => row.flag = Some(format!("pipeline: {e}")),
        }
        row.abs_err = (row.n_pipeline - row.n_oracle).abs();
        row.rel_err = row.abs_err / row.n_oracle.abs();
        row
    });
    let mut slopes = Vec::new();
    for &k in steps {
        let (xs, ys): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.steps == k && r.flag.is_none())
            .map(|r| (r.h, r.h.powi(dim as i32) * r.abs_err))
            .unzip();
        slopes.push(SlopeRecord {
            steps: k,
            slope: fit_slope(&xs, &ys),
            points: xs.len(),
        });
    }
    Ok(SpectralTable { dim, rows, slopes })
}
