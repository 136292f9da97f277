use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_complex::Complex64;

use crate::apsymbol::APSymbol;
use crate::freqgeom::{Frequency, FrequencyModule, QuasiLatticeSubspace, SumsetK};
use crate::Result;

/// Symbol graded by powers of `eps`: `sum_n eps^n S_n`.
#[derive(Clone, Debug)]
pub struct Graded {
    module: Arc<FrequencyModule>,
    orders: BTreeMap<usize, APSymbol>,
}

impl Graded {
    pub fn zero(module: Arc<FrequencyModule>) -> Self {
        Self {
            module,
            orders: BTreeMap::new(),
        }
    }

    pub fn single(order: usize, s: APSymbol) -> Self {
        let mut g = Self::zero(s.module().clone());
        g.push(order, s).expect("same module");
        g
    }

    pub fn module(&self) -> &Arc<FrequencyModule> {
        &self.module
    }

    pub fn orders(&self) -> &BTreeMap<usize, APSymbol> {
        &self.orders
    }

    pub fn order(&self, n: usize) -> Option<&APSymbol> {
        self.orders.get(&n)
    }

    pub fn is_zero(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn lowest_order(&self) -> Option<usize> {
        self.orders.keys().next().copied()
    }

    /// Adds `s` at order `n`, dropping orders that become empty.
    pub fn push(&mut self, n: usize, s: APSymbol) -> Result<()> {
        let merged = match self.orders.remove(&n) {
            Some(prev) => prev.add(&s)?,
            None => s,
        };
        if !merged.is_zero() {
            self.orders.insert(n, merged);
        }
        Ok(())
    }

    pub fn add(&self, other: &Graded) -> Result<Graded> {
        let mut out = self.clone();
        for (n, s) in &other.orders {
            out.push(*n, s.clone())?;
        }
        Ok(out)
    }

    pub fn scale(&self, c: f64) -> Graded {
        let orders = self
            .orders
            .iter()
            .map(|(n, s)| (*n, s.scale(Complex64::new(c, 0.0))))
            .filter(|(_, s)| !s.is_zero())
            .collect();
        Graded {
            module: self.module.clone(),
            orders,
        }
    }

    pub fn filter<F: Fn(&Frequency) -> bool>(&self, keep: F) -> Graded {
        let orders = self
            .orders
            .iter()
            .map(|(n, s)| (*n, s.filter(&keep)))
            .filter(|(_, s)| !s.is_zero())
            .collect();
        Graded {
            module: self.module.clone(),
            orders,
        }
    }

    /// `(on V, off V)`.
    pub fn split(&self, v: &QuasiLatticeSubspace) -> (Graded, Graded) {
        (
            self.filter(|f| v.contains_frequency(f)),
            self.filter(|f| !v.contains_frequency(f)),
        )
    }

    /// `(inside the sumset, outside)`.
    pub fn split_support(&self, sumset: &SumsetK) -> (Graded, Graded) {
        (
            self.filter(|f| sumset.contains(f.coords())),
            self.filter(|f| !sumset.contains(f.coords())),
        )
    }

    /// `(orders <= max, orders > max)`.
    pub fn split_orders(&self, max: usize) -> (Graded, Graded) {
        let mut lo = Graded::zero(self.module.clone());
        let mut hi = Graded::zero(self.module.clone());
        for (n, s) in &self.orders {
            let target = if *n <= max { &mut lo } else { &mut hi };
            target.orders.insert(*n, s.clone());
        }
        (lo, hi)
    }

    pub fn with_hermitian(mut self, flag: bool) -> Graded {
        for s in self.orders.values_mut() {
            *s = s.clone().with_hermitian(flag);
        }
        self
    }

    pub fn is_hermitian(&self) -> bool {
        self.orders.values().all(|s| s.is_hermitian())
    }

    /// `(i/h)[G, X]` with orders adding; products above `max_order` are skipped.
    pub fn commutator_i_over_h(g: &Graded, x: &Graded, h: f64, max_order: usize) -> Result<Graded> {
        let mut out = Graded::zero(g.module.clone());
        for (a, gs) in &g.orders {
            for (b, xs) in &x.orders {
                if a + b > max_order {
                    continue;
                }
                out.push(a + b, APSymbol::commutator_i_over_h(gs, xs, h)?)?;
            }
        }
        Ok(out)
    }

    /// `sum_n eps^n S_n` as a single symbol.
    pub fn collapse(&self, eps: f64) -> APSymbol {
        let mut acc = APSymbol::zero(self.module.clone());
        for (n, s) in &self.orders {
            acc = acc
                .add(&s.scale(Complex64::new(eps.powi(*n as i32), 0.0)))
                .expect("same module");
        }
        acc.with_hermitian(self.is_hermitian())
    }

    /// `sum_n eps^n sup |S_n|` over the sample points.
    pub fn weighted_sup(&self, eps: f64, points: &[Vec<f64>]) -> f64 {
        self.orders
            .iter()
            .map(|(n, s)| eps.powi(*n as i32) * s.sup_norm_at(points))
            .sum()
    }

    pub fn support(&self) -> BTreeSet<Frequency> {
        self.orders
            .values()
            .flat_map(|s| s.terms().keys().cloned())
            .collect()
    }

    pub fn hermitian_defect(&self, points: &[Vec<f64>]) -> f64 {
        self.orders
            .values()
            .map(|s| s.hermitian_defect(points))
            .fold(0.0, f64::max)
    }
}
