use std::f64::consts::PI;

use crate::quad::intervals_where_nonpositive;
use crate::{Error, Result};

/// Relative agreement required between successive refinements.
pub const VOLUME_TOL: f64 = 1e-5;
/// Maximal number of refinements.
pub const MAX_REFINEMENTS: u32 = 6;

/// Length of `{t in [a, b] : f(t) <= 0}` with sampling refined until two
/// successive passes agree.
pub fn sublevel_measure_1d<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    samples: usize,
) -> Result<f64> {
    let mut n = samples.max(8);
    let mut prev = measure(&mut f, a, b, n);
    for _ in 0..MAX_REFINEMENTS {
        n *= 2;
        let cur = measure(&mut f, a, b, n);
        if (cur - prev).abs() <= 1e-12 * (b - a).abs().max(1.0) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Quadrature(format!(
        "sublevel length on [{a}, {b}] did not stabilize after {MAX_REFINEMENTS} refinements"
    )))
}

fn measure<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, n: usize) -> f64 {
    intervals_where_nonpositive(f, a, b, n)
        .iter()
        .map(|(l, r)| r - l)
        .sum()
}

/// Area of `{xi in R^2 : f(xi) <= 0}` inside the disc of radius `r_max`, in
/// polar coordinates: each ray contributes `sum (r_b^2 - r_a^2) / 2` over its
/// sublevel intervals and the angular integral uses the periodic trapezoid
/// rule, doubled until successive values agree.
pub fn sublevel_area_2d<F: Fn(&[f64]) -> f64 + Sync>(
    f: &F,
    r_max: f64,
    exec: crate::Execution,
) -> Result<f64> {
    let ray = |phi: f64| {
        let (c, s) = (phi.cos(), phi.sin());
        let mut g = |r: f64| f(&[r * c, r * s]);
        intervals_where_nonpositive(&mut g, 0.0, r_max, 128)
            .iter()
            .map(|(a, b)| 0.5 * (b * b - a * a))
            .sum::<f64>()
    };
    let mut n = 64usize;
    let mut vals = exec.map_range(n, |i| ray(2.0 * PI * i as f64 / n as f64));
    let mut prev = 2.0 * PI / n as f64 * vals.iter().sum::<f64>();
    for _ in 0..MAX_REFINEMENTS + 2 {
        let odd = exec.map_range(n, |i| ray(2.0 * PI * (i as f64 + 0.5) / n as f64));
        let mut merged = Vec::with_capacity(2 * n);
        for (a, b) in vals.iter().zip(&odd) {
            merged.push(*a);
            merged.push(*b);
        }
        vals = merged;
        n *= 2;
        let cur = 2.0 * PI / n as f64 * vals.iter().sum::<f64>();
        if (cur - prev).abs() <= VOLUME_TOL * 1e-3 * cur.abs().max(1e-300) {
            return Ok(cur);
        }
        prev = cur;
    }
    Ok(prev)
}

/// `(2 pi h)^{-d} vol{A_eff <= tau}` for `d` in `{1, 2}`; `r_max` bounds the sublevel set.
pub fn kappa0_volume<F: Fn(&[f64]) -> f64 + Sync>(
    a_eff: &F,
    dim: usize,
    tau: f64,
    h: f64,
    r_max: f64,
    exec: crate::Execution,
) -> Result<f64> {
    let vol = match dim {
        1 => sublevel_measure_1d(|x| a_eff(&[x]) - tau, -r_max, r_max, 256)?,
        2 => sublevel_area_2d(&|x: &[f64]| a_eff(x) - tau, r_max, exec)?,
        _ => return Err(Error::Unsupported(format!("dimension {dim}"))),
    };
    Ok(vol / (2.0 * PI * h).powi(dim as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Execution;

    #[test]
    fn free_volumes() {
        let q = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let v1 = kappa0_volume(&q, 1, 1.0, 0.1, 2.0, Execution::Parallel).unwrap();
        assert!((v1 - 10.0 / PI).abs() < 1e-12);
        let v2 = kappa0_volume(&q, 2, 1.0, 0.1, 2.0, Execution::Parallel).unwrap();
        assert!((v2 - PI / (2.0 * PI * 0.1f64).powi(2)).abs() < 1e-9, "{v2}");
        assert_eq!(
            kappa0_volume(&q, 1, -0.5, 0.1, 2.0, Execution::Parallel).unwrap(),
            0.0
        );
    }

    #[test]
    fn ellipse_area() {
        let e = |x: &[f64]| x[0] * x[0] + 4.0 * x[1] * x[1];
        let a = sublevel_area_2d(&|x: &[f64]| e(x) - 1.0, 2.0, Execution::Sequential).unwrap();
        assert!((a - PI / 2.0).abs() < 1e-10, "{a}");
    }
}
