use std::f64::consts::PI;

use serde::Serialize;

use crate::apsymbol::{BaseSymbol, XiBox};
use crate::freqgeom::Frequency;
use crate::quad::{bisect, gauss_legendre, integrate_gl, intervals_where_nonpositive};
use crate::{Error, Result};

/// Radius of the level curve `A0 = lambda` along direction `phi`.
fn level_radius(base: &BaseSymbol, lambda: f64, phi: f64, r_max: f64) -> f64 {
    let u = [phi.cos(), phi.sin()];
    let f = |r: f64| base.value(&[r * u[0], r * u[1]]) - lambda;
    bisect(f, 0.0, r_max, f(0.0))
}

fn arc_element(base: &BaseSymbol, lambda: f64, phi: f64, r_max: f64) -> f64 {
    let r = level_radius(base, lambda, phi, r_max);
    let (c, s) = (phi.cos(), phi.sin());
    let g = base.gradient(&[r * c, r * s]);
    let dr = g[0] * c + g[1] * s;
    let dphi = r * (-g[0] * s + g[1] * c);
    let rp = -dphi / dr;
    (r * r + rp * rp).sqrt()
}

/// Length of `{xi in Sigma_lambda : |<grad A0(xi), theta>| < gamma}` for `d = 2`.
///
/// The level curve is parametrized in polar form, which assumes it is
/// star-shaped about the origin (true for the supported base symbols).
pub fn arc_measure(base: &BaseSymbol, theta: &Frequency, gamma: f64, lambda: f64) -> Result<f64> {
    arc_measure_vec(base, theta.embedding(), gamma, lambda)
}

pub fn arc_measure_vec(base: &BaseSymbol, theta: &[f64], gamma: f64, lambda: f64) -> Result<f64> {
    if base.dim() != 2 || theta.len() != 2 {
        return Err(Error::Unsupported(
            "arc measure is defined for d = 2".into(),
        ));
    }
    if !(lambda > base.infimum()) {
        return Err(Error::Config(format!(
            "level {lambda} is not above the minimum of A0"
        )));
    }
    let r_max = 1.01 * base.sublevel_radius(lambda) + 1e-9;
    let mut g = |phi: f64| {
        let r = level_radius(base, lambda, phi, r_max);
        let grad = base.gradient(&[r * phi.cos(), r * phi.sin()]);
        (grad[0] * theta[0] + grad[1] * theta[1]).abs() - gamma
    };
    let pieces = intervals_where_nonpositive(&mut g, 0.0, 2.0 * PI, 4096);
    let rule = gauss_legendre(20);
    let mut total = 0.0;
    for (a, b) in pieces {
        let n = ((b - a) / (2.0 * PI / 64.0)).ceil().max(1.0) as usize;
        let w = (b - a) / n as f64;
        for i in 0..n {
            let (l, r) = (a + i as f64 * w, a + (i + 1) as f64 * w);
            total += integrate_gl(|p| arc_element(base, lambda, p, r_max), l, r, &rule);
        }
    }
    Ok(total)
}

/// `C^infinity` step: 0 for `t <= 0`, 1 for `t >= 1`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let f = |s: f64| (-1.0 / s).exp();
        let a = f(t);
        a / (a + f(1.0 - t))
    }
}

/// Smooth cutoff equal to 1 on a box and 0 outside its `ell`-enlargement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CutoffSymbol {
    pub region: XiBox,
    pub ell: f64,
}

impl CutoffSymbol {
    pub fn value(&self, xi: &[f64]) -> f64 {
        let mut q = 1.0;
        for (i, &x) in xi.iter().enumerate() {
            let lo = self.region.lo[i] - self.ell;
            let hi = self.region.hi[i] + self.ell;
            q *= smooth_step((x - lo) / self.ell) * smooth_step((hi - x) / self.ell);
            if q == 0.0 {
                break;
            }
        }
        q
    }

    /// The enlarged box outside which the cutoff vanishes.
    pub fn support(&self) -> XiBox {
        XiBox::new(
            self.region.lo.iter().map(|x| x - self.ell).collect(),
            self.region.hi.iter().map(|x| x + self.ell).collect(),
        )
    }

    /// Euclidean gap between the supports of two cutoffs (0 when they overlap).
    pub fn separation(&self, other: &CutoffSymbol) -> f64 {
        let (a, b) = (self.support(), other.support());
        a.lo.iter()
            .zip(&a.hi)
            .zip(b.lo.iter().zip(&b.hi))
            .map(|((al, ah), (bl, bh))| (bl - ah).max(al - bh).max(0.0).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Finite-difference estimates of `max |D Q| ell` and `max |D^2 Q| ell^2`
    /// along each axis, sampled over the support.
    pub fn scaled_derivative_bounds(&self, samples: usize) -> (f64, f64) {
        let sup = self.support();
        let d = sup.dim();
        let step = self.ell * 1e-3;
        let mut b1: f64 = 0.0;
        let mut b2: f64 = 0.0;
        for p in sup.grid(samples) {
            let q0 = self.value(&p);
            for ax in 0..d {
                let mut pp = p.clone();
                let mut pm = p.clone();
                pp[ax] += step;
                pm[ax] -= step;
                let (qp, qm) = (self.value(&pp), self.value(&pm));
                b1 = b1.max(((qp - qm) / (2.0 * step)).abs() * self.ell);
                b2 = b2.max(((qp - 2.0 * q0 + qm) / (step * step)).abs() * self.ell * self.ell);
            }
        }
        (b1, b2)
    }
}

/// Cutoff with margin `ell`, which must not undercut `h^{1 - varsigma}`.
pub fn build_cutoff(region: XiBox, ell: f64, h: f64, varsigma: f64) -> Result<CutoffSymbol> {
    if region.is_empty() {
        return Err(Error::Config("cutoff region is empty".into()));
    }
    let floor = h.powf(1.0 - varsigma);
    if !(ell >= floor * (1.0 - 1e-12)) {
        return Err(Error::Config(format!(
            "cutoff margin {ell} is below h^(1 - varsigma) = {floor}: uncertainty principle violated"
        )));
    }
    Ok(CutoffSymbol { region, ell })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_arc_examples() {
        let b = BaseSymbol::isotropic(2);
        let m = arc_measure_vec(&b, &[1.0, 0.0], 0.1, 1.0).unwrap();
        let expect = 4.0 * (0.05f64).asin();
        assert!((m - expect).abs() < 1e-9, "{m} {expect}");
        let half = arc_measure_vec(&b, &[2.0, 0.0], 0.1, 1.0).unwrap();
        assert!((half / m - 0.5).abs() < 0.01);
        let mut last = f64::INFINITY;
        for g in [0.2, 0.1, 0.05, 0.01, 0.0] {
            let v = arc_measure_vec(&b, &[1.0, 0.0], g, 1.0).unwrap();
            assert!(v <= last);
            last = v;
        }
        assert_eq!(last, 0.0);
    }

    #[test]
    fn full_circle_length() {
        let b = BaseSymbol::isotropic(2);
        let m = arc_measure_vec(&b, &[1.0, 0.0], 10.0, 1.0).unwrap();
        assert!((m - 2.0 * PI).abs() < 1e-9);
        let e = BaseSymbol::diagonal(vec![1.0, 4.0]);
        let m = arc_measure_vec(&e, &[1.0, 0.0], 100.0, 1.0).unwrap();
        assert!((m - 4.844224110273838).abs() < 1e-8, "{m}");
    }

    #[test]
    fn cutoff_examples() {
        let q = build_cutoff(XiBox::interval(0.8, 1.2), 0.1, 0.01, 0.2).unwrap();
        assert_eq!(q.value(&[0.8]), 1.0);
        assert_eq!(q.value(&[1.0]), 1.0);
        assert_eq!(q.value(&[1.2]), 1.0);
        assert_eq!(q.value(&[0.7]), 0.0);
        assert_eq!(q.value(&[1.3]), 0.0);
        assert!(q.value(&[0.75]) > 0.0 && q.value(&[0.75]) < 1.0);
        let h: f64 = 0.05;
        let s = 0.1;
        assert!(build_cutoff(XiBox::interval(0.0, 1.0), h.powf(1.0 - s), h, s).is_ok());
        assert!(build_cutoff(XiBox::interval(0.0, 1.0), h, h, s).is_err());
        let (b1, b2) = q.scaled_derivative_bounds(2001);
        assert!(b1 < 3.0 && b2 < 30.0, "{b1} {b2}");
    }
}
