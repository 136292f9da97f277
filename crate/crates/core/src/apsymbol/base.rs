use serde::Serialize;

/// Closed-form unperturbed symbol `A0(xi)` with analytic derivatives.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseSymbol {
    /// `sum_i a_i xi_i^2`.
    Quadratic { coeffs: Vec<f64> },
    /// `|xi|^2 + beta |xi|^4`.
    Quartic { dim: usize, beta: f64 },
}

impl BaseSymbol {
    pub fn isotropic(dim: usize) -> Self {
        BaseSymbol::Quadratic {
            coeffs: vec![1.0; dim],
        }
    }

    pub fn diagonal(coeffs: Vec<f64>) -> Self {
        BaseSymbol::Quadratic { coeffs }
    }

    pub fn quartic(dim: usize, beta: f64) -> Self {
        BaseSymbol::Quartic { dim, beta }
    }

    pub fn dim(&self) -> usize {
        match self {
            BaseSymbol::Quadratic { coeffs } => coeffs.len(),
            BaseSymbol::Quartic { dim, .. } => *dim,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        let bad = match self {
            BaseSymbol::Quadratic { coeffs } => {
                coeffs.is_empty() || coeffs.iter().any(|a| !(a.is_finite() && *a >= 0.0))
            }
            BaseSymbol::Quartic { dim, beta } => *dim == 0 || !(beta.is_finite() && *beta >= 0.0),
        };
        if bad {
            Err(crate::Error::Config(format!(
                "invalid base symbol {self:?}"
            )))
        } else {
            Ok(())
        }
    }

    #[inline]
    pub fn value(&self, xi: &[f64]) -> f64 {
        match self {
            BaseSymbol::Quadratic { coeffs } => coeffs.iter().zip(xi).map(|(a, x)| a * x * x).sum(),
            BaseSymbol::Quartic { beta, .. } => {
                let r2: f64 = xi.iter().map(|x| x * x).sum();
                r2 + beta * r2 * r2
            }
        }
    }

    pub fn gradient(&self, xi: &[f64]) -> Vec<f64> {
        match self {
            BaseSymbol::Quadratic { coeffs } => {
                coeffs.iter().zip(xi).map(|(a, x)| 2.0 * a * x).collect()
            }
            BaseSymbol::Quartic { beta, .. } => {
                let r2: f64 = xi.iter().map(|x| x * x).sum();
                xi.iter().map(|x| 2.0 * x + 4.0 * beta * r2 * x).collect()
            }
        }
    }

    /// Row-major `d x d` Hessian.
    pub fn hessian(&self, xi: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut h = vec![0.0; d * d];
        match self {
            BaseSymbol::Quadratic { coeffs } => {
                for i in 0..d {
                    h[i * d + i] = 2.0 * coeffs[i];
                }
            }
            BaseSymbol::Quartic { beta, .. } => {
                let r2: f64 = xi.iter().map(|x| x * x).sum();
                for i in 0..d {
                    for j in 0..d {
                        h[i * d + j] = 8.0 * beta * xi[i] * xi[j];
                    }
                    h[i * d + i] += 2.0 + 4.0 * beta * r2;
                }
            }
        }
        h
    }

    /// Growth order `m`.
    pub fn order(&self) -> u32 {
        match self {
            BaseSymbol::Quadratic { .. } => 2,
            BaseSymbol::Quartic { beta, .. } if *beta > 0.0 => 4,
            BaseSymbol::Quartic { .. } => 2,
        }
    }

    /// Ellipticity constants `(c0, C0)` with `A0(xi) >= c0 |xi|^m - C0`.
    pub fn ellipticity(&self) -> (f64, f64) {
        match self {
            BaseSymbol::Quadratic { coeffs } => {
                (coeffs.iter().cloned().fold(f64::INFINITY, f64::min), 0.0)
            }
            BaseSymbol::Quartic { beta, .. } if *beta > 0.0 => (*beta, 0.0),
            BaseSymbol::Quartic { .. } => (1.0, 0.0),
        }
    }

    pub fn infimum(&self) -> f64 {
        0.0
    }

    /// Radius bounding the sublevel set `{A0 <= level}`; infinite when not elliptic.
    pub fn sublevel_radius(&self, level: f64) -> f64 {
        let (c0, cc0) = self.ellipticity();
        if c0 <= 0.0 {
            return f64::INFINITY;
        }
        ((level.max(0.0) + cc0) / c0).powf(1.0 / self.order() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(b: &BaseSymbol, xi: &[f64]) {
        let g = b.gradient(xi);
        let step = 1e-5;
        for i in 0..xi.len() {
            let mut p = xi.to_vec();
            let mut m = xi.to_vec();
            p[i] += step;
            m[i] -= step;
            let fd = (b.value(&p) - b.value(&m)) / (2.0 * step);
            assert!(
                (fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1.0),
                "{fd} vs {}",
                g[i]
            );
            let gp = b.gradient(&p);
            let gm = b.gradient(&m);
            let hess = b.hessian(xi);
            for j in 0..xi.len() {
                let fdh = (gp[j] - gm[j]) / (2.0 * step);
                let hij = hess[j * xi.len() + i];
                assert!((fdh - hij).abs() <= 1e-6 * hij.abs().max(1.0));
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for b in [
            BaseSymbol::isotropic(2),
            BaseSymbol::diagonal(vec![1.0, 4.0]),
            BaseSymbol::quartic(2, 0.3),
            BaseSymbol::quartic(1, 0.5),
        ] {
            for xi in [[0.3, -1.2], [1.0, 0.0], [-0.7, 0.4]] {
                fd_check(&b, &xi[..b.dim()]);
            }
        }
    }

    #[test]
    fn ellipticity_holds_on_grid() {
        for b in [
            BaseSymbol::diagonal(vec![1.0, 4.0]),
            BaseSymbol::quartic(2, 0.3),
        ] {
            let (c0, cc0) = b.ellipticity();
            let m = b.order() as i32;
            for i in -20..=20 {
                for j in -20..=20 {
                    let xi = [i as f64 * 0.25, j as f64 * 0.25];
                    let r = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
                    assert!(b.value(&xi) >= c0 * r.powi(m) - cc0 - 1e-12);
                }
            }
        }
    }
}
