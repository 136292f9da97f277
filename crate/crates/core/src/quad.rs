//! One-dimensional quadrature and root bracketing used by the level-set
//! volume, arc-length and fiber-window integrals.

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { z } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm1) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Fixed-order Gauss-Legendre rule on [a, b].
pub fn integrate_gl<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rule: &(Vec<f64>, Vec<f64>),
) -> f64 {
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    rule.0
        .iter()
        .zip(&rule.1)
        .map(|(x, w)| w * f(c + r * x))
        .sum::<f64>()
        * r
}

/// Bisection for a sign change of `f` on `[a, b]`; `fa` is `f(a)`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if (fm <= 0.0) == (fa <= 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Measure of `{t in [a, b] : f(t) <= 0}`, locating crossings by sampling
/// `samples` subintervals and bisecting each sign change.
pub fn sublevel_length<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, samples: usize) -> f64 {
    intervals_where_nonpositive(&mut f, a, b, samples)
        .iter()
        .map(|(l, r)| r - l)
        .sum()
}

/// Sub-intervals of `[a, b]` on which `f <= 0`.
pub fn intervals_where_nonpositive<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    samples: usize,
) -> Vec<(f64, f64)> {
    if b <= a {
        return Vec::new();
    }
    let n = samples.max(1);
    let step = (b - a) / n as f64;
    let mut out = Vec::new();
    let mut prev_t = a;
    let mut prev_f = f(a);
    let mut open: Option<f64> = if prev_f <= 0.0 { Some(a) } else { None };
    for i in 1..=n {
        let t = if i == n { b } else { a + step * i as f64 };
        let ft = f(t);
        if (ft <= 0.0) != (prev_f <= 0.0) {
            let root = bisect(&mut *f, prev_t, t, prev_f);
            match open.take() {
                Some(start) => out.push((start, root)),
                None => open = Some(root),
            }
        }
        prev_t = t;
        prev_f = ft;
    }
    if let Some(start) = open {
        out.push((start, b));
    }
    out
}

/// Adaptive Simpson integration with an absolute tolerance and depth cap.
pub fn adaptive_simpson<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(&mut f, a, b, fa, fm, fb, whole, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = gauss_legendre(8);
        let v = integrate_gl(|x| x.powi(14) + 3.0 * x * x, 0.0, 2.0, &rule);
        let exact = 2f64.powi(15) / 15.0 + 8.0;
        assert!((v - exact).abs() < 1e-9 * exact);
        let w: f64 = rule.1.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sublevel_length_of_parabola() {
        let len = sublevel_length(|x| x * x - 1.0, -3.0, 3.0, 17);
        assert!((len - 2.0).abs() < 1e-13);
    }

    #[test]
    fn simpson_sqrt_endpoint() {
        let v = adaptive_simpson(|x| (1.0 - x * x).max(0.0).sqrt(), -1.0, 1.0, 1e-10, 40);
        assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-7);
    }
}
