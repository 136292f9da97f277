//! Coefficient functions `xi -> C` as immutable expression graphs.
//!
//! The gauge recursion builds coefficients from sums, products, quotients and
//! half-frequency argument shifts of earlier coefficients. Nodes are shared
//! through `Arc`, and evaluation memoizes each `(node, argument)` pair, so the
//! cost stays polynomial in the graph size even though repeated composition
//! produces exponentially many evaluation paths.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use super::BaseSymbol;
use crate::freqgeom::FrequencyModule;

const MAX_DIM: usize = 3;

#[derive(Clone)]
pub struct CoefficientFn(Arc<Node>);

enum Node {
    Const(Complex64),
    /// `sum_k c_k xi^alpha_k`.
    Polynomial(Vec<(Vec<u32>, Complex64)>),
    /// `amp * exp(-a |xi|^2)`.
    Gaussian {
        amp: Complex64,
        a: f64,
    },
    /// `amp * (1 + |xi|^2)^-s`.
    Reciprocal {
        amp: Complex64,
        s: f64,
    },
    Base(BaseSymbol),
    Sum(Vec<CoefficientFn>),
    Product(Vec<CoefficientFn>),
    Scale(Complex64, CoefficientFn),
    Quotient(CoefficientFn, CoefficientFn),
    ShiftReal(CoefficientFn, Vec<f64>),
    /// Shift by `scale * G * coords` for the module's generator matrix `G`.
    ShiftLattice {
        inner: CoefficientFn,
        coords: Vec<i64>,
        scale: f64,
        module: Arc<FrequencyModule>,
    },
}

/// Per-evaluation memo table. Reuse one context across calls at nearby
/// points to share work between coefficients of the same symbol.
#[derive(Default)]
pub struct EvalCtx {
    memo: HashMap<(usize, [u64; MAX_DIM]), Complex64>,
}

impl EvalCtx {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.memo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.memo.is_empty()
    }
}

#[derive(Clone)]
struct Offset<'a> {
    real: [f64; MAX_DIM],
    lattice: Option<(Vec<i64>, u64, &'a Arc<FrequencyModule>)>,
}

impl<'a> Offset<'a> {
    fn zero() -> Self {
        Self {
            real: [0.0; MAX_DIM],
            lattice: None,
        }
    }

    fn point(&self, base: &[f64]) -> [f64; MAX_DIM] {
        let mut p = [0.0; MAX_DIM];
        for i in 0..base.len() {
            p[i] = base[i] + self.real[i];
        }
        if let Some((coords, scale_bits, module)) = &self.lattice {
            let scale = f64::from_bits(*scale_bits);
            let e = module.embed(coords);
            for i in 0..base.len() {
                p[i] += scale * e[i];
            }
        }
        p
    }

    fn add_real(&self, v: &[f64]) -> Self {
        let mut o = self.clone();
        for (i, x) in v.iter().enumerate() {
            o.real[i] += x;
        }
        o
    }

    fn add_lattice(&self, coords: &[i64], scale: f64, module: &'a Arc<FrequencyModule>) -> Self {
        let mut o = self.clone();
        match &mut o.lattice {
            None => o.lattice = Some((coords.to_vec(), scale.to_bits(), module)),
            Some((c, s, m))
                if *s == scale.to_bits() && (Arc::ptr_eq(m, module) || m.same_group(module)) =>
            {
                for (a, b) in c.iter_mut().zip(coords) {
                    *a += b;
                }
            }
            Some(_) => {
                let e = module.embed(coords);
                for (i, x) in e.iter().enumerate() {
                    o.real[i] += scale * x;
                }
            }
        }
        o
    }
}

fn point_key(p: &[f64; MAX_DIM]) -> [u64; MAX_DIM] {
    [p[0].to_bits(), p[1].to_bits(), p[2].to_bits()]
}

impl CoefficientFn {
    fn wrap(n: Node) -> Self {
        CoefficientFn(Arc::new(n))
    }

    pub fn constant(c: Complex64) -> Self {
        Self::wrap(Node::Const(c))
    }

    pub fn real(c: f64) -> Self {
        Self::constant(Complex64::new(c, 0.0))
    }

    pub fn zero() -> Self {
        Self::real(0.0)
    }

    pub fn polynomial(terms: Vec<(Vec<u32>, Complex64)>) -> Self {
        Self::wrap(Node::Polynomial(terms))
    }

    pub fn gaussian(amp: Complex64, a: f64) -> Self {
        Self::wrap(Node::Gaussian { amp, a })
    }

    pub fn reciprocal_power(amp: Complex64, s: f64) -> Self {
        Self::wrap(Node::Reciprocal { amp, s })
    }

    pub fn base(b: BaseSymbol) -> Self {
        Self::wrap(Node::Base(b))
    }

    /// `Some(c)` when this is a literal constant.
    pub fn as_constant(&self) -> Option<Complex64> {
        match &*self.0 {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero_literal(&self) -> bool {
        self.as_constant() == Some(Complex64::new(0.0, 0.0))
    }

    pub fn add(&self, other: &CoefficientFn) -> Self {
        Self::sum(vec![self.clone(), other.clone()])
    }

    pub fn sub(&self, other: &CoefficientFn) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Sum of terms, flattening nested sums and folding literal constants.
    pub fn sum(terms: Vec<CoefficientFn>) -> Self {
        let mut flat = Vec::with_capacity(terms.len());
        let mut c = Complex64::new(0.0, 0.0);
        for t in terms {
            match &*t.0 {
                Node::Const(v) => c += v,
                Node::Sum(inner) => {
                    for u in inner {
                        match &*u.0 {
                            Node::Const(v) => c += v,
                            _ => flat.push(u.clone()),
                        }
                    }
                }
                _ => flat.push(t),
            }
        }
        if c != Complex64::new(0.0, 0.0) {
            flat.push(Self::constant(c));
        }
        match flat.len() {
            0 => Self::zero(),
            1 => flat.pop().unwrap(),
            _ => Self::wrap(Node::Sum(flat)),
        }
    }

    pub fn mul(&self, other: &CoefficientFn) -> Self {
        match (self.as_constant(), other.as_constant()) {
            (Some(a), Some(b)) => Self::constant(a * b),
            (Some(a), None) => other.scale(a),
            (None, Some(b)) => self.scale(b),
            (None, None) => Self::wrap(Node::Product(vec![self.clone(), other.clone()])),
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        if c == Complex64::new(0.0, 0.0) {
            return Self::zero();
        }
        if c == Complex64::new(1.0, 0.0) {
            return self.clone();
        }
        match &*self.0 {
            Node::Const(v) => Self::constant(v * c),
            Node::Scale(a, inner) => inner.scale(a * c),
            _ => Self::wrap(Node::Scale(c, self.clone())),
        }
    }

    /// Pointwise quotient. No regularization: callers guard the denominator.
    pub fn div(&self, den: &CoefficientFn) -> Self {
        if self.is_zero_literal() {
            return Self::zero();
        }
        match den.as_constant() {
            Some(c) => self.scale(c.inv()),
            None => Self::wrap(Node::Quotient(self.clone(), den.clone())),
        }
    }

    /// `xi -> f(xi + v)`. Nested real shifts collapse into one.
    pub fn shift(&self, v: &[f64]) -> Self {
        if v.iter().all(|x| *x == 0.0) {
            return self.clone();
        }
        match &*self.0 {
            Node::Const(_) => self.clone(),
            Node::ShiftReal(inner, w) => {
                let s: Vec<f64> = w.iter().zip(v).map(|(a, b)| a + b).collect();
                inner.shift(&s)
            }
            _ => Self::wrap(Node::ShiftReal(self.clone(), v.to_vec())),
        }
    }

    /// `xi -> f(xi + scale * G * coords)`; nested lattice shifts with the same
    /// scale add their coordinates exactly.
    pub fn shift_lattice(&self, module: &Arc<FrequencyModule>, coords: &[i64], scale: f64) -> Self {
        if coords.iter().all(|&c| c == 0) || scale == 0.0 {
            return self.clone();
        }
        match &*self.0 {
            Node::Const(_) => self.clone(),
            Node::ShiftLattice {
                inner,
                coords: c0,
                scale: s0,
                module: m0,
            } if s0.to_bits() == scale.to_bits() && m0.same_group(module) => {
                let c: Vec<i64> = c0.iter().zip(coords).map(|(a, b)| a + b).collect();
                inner.shift_lattice(module, &c, scale)
            }
            _ => Self::wrap(Node::ShiftLattice {
                inner: self.clone(),
                coords: coords.to_vec(),
                scale,
                module: module.clone(),
            }),
        }
    }

    pub fn eval(&self, xi: &[f64]) -> Complex64 {
        let mut ctx = EvalCtx::new();
        self.eval_with(&mut ctx, xi)
    }

    pub fn eval_with(&self, ctx: &mut EvalCtx, xi: &[f64]) -> Complex64 {
        assert!(xi.len() <= MAX_DIM, "dimension above {MAX_DIM} unsupported");
        self.eval_at(ctx, xi, &Offset::zero())
    }

    fn eval_at<'a>(&'a self, ctx: &mut EvalCtx, base: &[f64], off: &Offset<'a>) -> Complex64 {
        match &*self.0 {
            Node::Const(c) => *c,
            Node::ShiftReal(inner, v) => inner.eval_at(ctx, base, &off.add_real(v)),
            Node::ShiftLattice {
                inner,
                coords,
                scale,
                module,
            } => inner.eval_at(ctx, base, &off.add_lattice(coords, *scale, module)),
            Node::Polynomial(_)
            | Node::Gaussian { .. }
            | Node::Reciprocal { .. }
            | Node::Base(_) => {
                let p = off.point(base);
                self.eval_leaf(&p[..base.len()])
            }
            _ => {
                let p = off.point(base);
                let key = (Arc::as_ptr(&self.0) as *const u8 as usize, point_key(&p));
                if let Some(v) = ctx.memo.get(&key) {
                    return *v;
                }
                let v = match &*self.0 {
                    Node::Sum(ts) => ts.iter().map(|t| t.eval_at(ctx, base, off)).sum(),
                    Node::Product(ts) => ts
                        .iter()
                        .map(|t| t.eval_at(ctx, base, off))
                        .fold(Complex64::new(1.0, 0.0), |a, b| a * b),
                    Node::Scale(c, inner) => c * inner.eval_at(ctx, base, off),
                    Node::Quotient(n, d) => {
                        let nv = n.eval_at(ctx, base, off);
                        if nv == Complex64::new(0.0, 0.0) {
                            nv
                        } else {
                            nv / d.eval_at(ctx, base, off)
                        }
                    }
                    _ => unreachable!(),
                };
                ctx.memo.insert(key, v);
                v
            }
        }
    }

    fn eval_leaf(&self, p: &[f64]) -> Complex64 {
        match &*self.0 {
            Node::Polynomial(terms) => terms
                .iter()
                .map(|(alpha, c)| {
                    let m: f64 = alpha
                        .iter()
                        .zip(p)
                        .map(|(&a, &x)| x.powi(a as i32))
                        .product();
                    c * m
                })
                .sum(),
            Node::Gaussian { amp, a } => {
                let r2: f64 = p.iter().map(|x| x * x).sum();
                amp * (-a * r2).exp()
            }
            Node::Reciprocal { amp, s } => {
                let r2: f64 = p.iter().map(|x| x * x).sum();
                amp * (1.0 + r2).powf(-s)
            }
            Node::Base(b) => Complex64::new(b.value(p), 0.0),
            _ => unreachable!(),
        }
    }

    pub fn ptr_eq(&self, other: &CoefficientFn) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    /// Number of distinct nodes reachable from this one.
    pub fn node_count(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        fn walk(f: &CoefficientFn, seen: &mut std::collections::HashSet<usize>) {
            if !seen.insert(Arc::as_ptr(&f.0) as *const u8 as usize) {
                return;
            }
            match &*f.0 {
                Node::Sum(ts) | Node::Product(ts) => ts.iter().for_each(|t| walk(t, seen)),
                Node::Scale(_, i) | Node::ShiftReal(i, _) => walk(i, seen),
                Node::ShiftLattice { inner, .. } => walk(inner, seen),
                Node::Quotient(a, b) => {
                    walk(a, seen);
                    walk(b, seen)
                }
                _ => {}
            }
        }
        walk(self, &mut seen);
        seen.len()
    }
}

impl fmt::Debug for CoefficientFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::Const(c) => write!(f, "Const({c})"),
            Node::Polynomial(t) => write!(f, "Polynomial({t:?})"),
            Node::Gaussian { amp, a } => write!(f, "Gaussian({amp}, {a})"),
            Node::Reciprocal { amp, s } => write!(f, "Reciprocal({amp}, {s})"),
            Node::Base(b) => write!(f, "Base({b:?})"),
            _ => write!(f, "CoefficientFn({} nodes)", self.node_count()),
        }
    }
}
