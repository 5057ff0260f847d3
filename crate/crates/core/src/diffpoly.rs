//! The differential polynomial ring `Q[u2, u3, ...; d/dx]`.
//!
//! Elements are finite sums of monomials in the symbols `u_j` (`j >= 2`) and
//! their x-derivatives, with exact rational coefficients.  The symbol `u_j`
//! carries weight `j` and each derivative adds one, so every operation here
//! either preserves weight homogeneity or reports exactly how it failed.
//!
//! Design notes.  A monomial is a sorted factor list rather than an exponent
//! vector because the variable set is open ended: new `u_j` appear whenever a
//! Lax operator is expanded one degree further.  Term order is graded (higher
//! weight first, then lexicographic on the factor list), which makes map
//! iteration produce the canonical display order directly and gives
//! `integrate_exact` a stable pivot order.  Integration is a finite linear
//! solve: an antiderivative of a weight-`w` component, if one exists, lives in
//! the span of the weight-`w-1` monomials over the same variable indices, so
//! failure comes with a certificate (the unreduced remainder), not a heuristic.

use std::collections::{BTreeMap, BTreeSet};
use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{CalcError, CalcResult};

/// Exact scalar type for every coefficient in the crate.
pub type Rational = num_rational::BigRational;

/// `n/d` as a [`Rational`]; panics only on `d == 0`.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Integer shorthand for [`Rational`].
pub fn rat_int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// A single derivative symbol `u_index^(order)`; `order == 0` is `u_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarDeriv {
    pub index: u32,
    pub order: u32,
}

impl VarDeriv {
    /// New symbol; the ring only contains `u_j` for `j >= 2` (`u0 = 1` and
    /// `u1 = 0` are folded away at construction time by the callers).
    pub fn new(index: u32, order: u32) -> Self {
        assert!(index >= 2, "u{index} is not a ring generator");
        VarDeriv { index, order }
    }

    /// Scaling weight: `u_j` weighs `j`, each derivative adds one.
    pub fn weight(&self) -> i64 {
        self.index as i64 + self.order as i64
    }
}

/// A product of [`VarDeriv`] powers, kept sorted with positive exponents.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    factors: Vec<(VarDeriv, u32)>,
}

impl Monomial {
    /// The empty product.
    pub fn one() -> Self {
        Monomial { factors: Vec::new() }
    }

    /// A single symbol to the first power.
    pub fn var(v: VarDeriv) -> Self {
        Monomial { factors: vec![(v, 1)] }
    }

    /// Build from arbitrary (symbol, exponent) pairs; merges and sorts.
    pub fn from_factors<I: IntoIterator<Item = (VarDeriv, u32)>>(iter: I) -> Self {
        let mut map: BTreeMap<VarDeriv, u32> = BTreeMap::new();
        for (v, e) in iter {
            if e > 0 {
                *map.entry(v).or_insert(0) += e;
            }
        }
        Monomial { factors: map.into_iter().collect() }
    }

    pub fn is_one(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn factors(&self) -> &[(VarDeriv, u32)] {
        &self.factors
    }

    /// Sum of factor weights times exponents.
    pub fn weight(&self) -> i64 {
        self.factors
            .iter()
            .map(|(v, e)| v.weight() * *e as i64)
            .sum()
    }

    /// Total degree (number of symbol occurrences counted with exponent).
    pub fn degree(&self) -> u32 {
        self.factors.iter().map(|(_, e)| *e).sum()
    }

    /// Product of two monomials.
    pub fn mul(&self, other: &Monomial) -> Monomial {
        if self.is_one() {
            return other.clone();
        }
        if other.is_one() {
            return self.clone();
        }
        let mut out = Vec::with_capacity(self.factors.len() + other.factors.len());
        let (mut i, mut j) = (0, 0);
        while i < self.factors.len() && j < other.factors.len() {
            match self.factors[i].0.cmp(&other.factors[j].0) {
                Ordering::Less => {
                    out.push(self.factors[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.factors[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((self.factors[i].0, self.factors[i].1 + other.factors[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.factors[i..]);
        out.extend_from_slice(&other.factors[j..]);
        Monomial { factors: out }
    }

    /// Exponent of `v` in this monomial (0 if absent).
    pub fn exponent(&self, v: VarDeriv) -> u32 {
        self.factors
            .binary_search_by(|(w, _)| w.cmp(&v))
            .map(|i| self.factors[i].1)
            .unwrap_or(0)
    }

    /// Copy with the exponent of `v` lowered by one (must be present).
    fn without_one(&self, v: VarDeriv) -> Monomial {
        let mut factors = self.factors.clone();
        let i = factors
            .binary_search_by(|(w, _)| w.cmp(&v))
            .expect("factor not present");
        if factors[i].1 == 1 {
            factors.remove(i);
        } else {
            factors[i].1 -= 1;
        }
        Monomial { factors }
    }
}

// Canonical term order: higher weight first, then lexicographic on the
// sorted factor list.  With this order a `BTreeMap` iterates terms exactly
// the way they should be printed.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .weight()
            .cmp(&self.weight())
            .then_with(|| self.factors.cmp(&other.factors))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A differential polynomial: monomials mapped to nonzero rational
/// coefficients, in canonical term order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DiffPoly {
    terms: BTreeMap<Monomial, Rational>,
}

impl DiffPoly {
    pub fn zero() -> Self {
        DiffPoly { terms: BTreeMap::new() }
    }

    pub fn one() -> Self {
        DiffPoly::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::one(), c);
        }
        DiffPoly { terms }
    }

    /// The generator `u_j`.
    pub fn var(index: u32) -> Self {
        DiffPoly::var_deriv(index, 0)
    }

    /// The derivative symbol `u_j^(order)`.
    pub fn var_deriv(index: u32, order: u32) -> Self {
        DiffPoly::from_monomial(Monomial::var(VarDeriv::new(index, order)), Rational::one())
    }

    /// `u_r^(order)` with the hierarchy conventions `u0 = 1`, `u1 = 0`
    /// folded in, so formulas ranging over all `r >= 0` can be transcribed
    /// literally.
    pub fn u_folded(index: u32, order: u32) -> Self {
        match index {
            0 => {
                if order == 0 {
                    DiffPoly::one()
                } else {
                    DiffPoly::zero()
                }
            }
            1 => DiffPoly::zero(),
            _ => DiffPoly::var_deriv(index, order),
        }
    }

    pub fn from_monomial(m: Monomial, c: Rational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        DiffPoly { terms }
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, Rational)>>(iter: I) -> Self {
        let mut out = DiffPoly::zero();
        for (m, c) in iter {
            out.add_term(m, c);
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when the polynomial is a rational constant (including zero).
    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(Monomial::is_one)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Coefficient of `m` (zero if absent).
    pub fn coeff(&self, m: &Monomial) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    /// First monomial in canonical order, if any.
    pub fn leading_monomial(&self) -> Option<&Monomial> {
        self.terms.keys().next()
    }

    /// The coefficient of the empty monomial.
    pub fn constant_term(&self) -> Rational {
        self.coeff(&Monomial::one())
    }

    fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get() + &c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &DiffPoly) -> DiffPoly {
        let mut out = self.clone();
        for (m, c) in other.terms.iter() {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &DiffPoly) -> DiffPoly {
        let mut out = self.clone();
        for (m, c) in other.terms.iter() {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn neg(&self) -> DiffPoly {
        DiffPoly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), -c.clone()))
                .collect(),
        }
    }

    pub fn mul(&self, other: &DiffPoly) -> DiffPoly {
        let mut out = DiffPoly::zero();
        for (m1, c1) in self.terms.iter() {
            for (m2, c2) in other.terms.iter() {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn scale(&self, c: &Rational) -> DiffPoly {
        if c.is_zero() {
            return DiffPoly::zero();
        }
        DiffPoly {
            terms: self
                .terms
                .iter()
                .map(|(m, k)| (m.clone(), k * c))
                .collect(),
        }
    }

    pub fn pow(&self, e: u32) -> DiffPoly {
        let mut out = DiffPoly::one();
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Rewrite each coefficient through `f`, dropping terms sent to zero.
    pub fn map_coeffs<F: Fn(&Monomial, &Rational) -> Rational>(&self, f: F) -> DiffPoly {
        let mut out = DiffPoly::zero();
        for (m, c) in self.terms.iter() {
            out.add_term(m.clone(), f(m, c));
        }
        out
    }

    /// Total x-derivative (product rule across every factor).
    pub fn dx(&self) -> DiffPoly {
        let mut out = DiffPoly::zero();
        for (m, c) in self.terms.iter() {
            for (v, e) in m.factors() {
                let mut bumped = m.without_one(*v);
                bumped = bumped.mul(&Monomial::var(VarDeriv::new(v.index, v.order + 1)));
                out.add_term(bumped, c * rat_int(*e as i64));
            }
        }
        out
    }

    /// `k`-fold x-derivative.
    pub fn dx_n(&self, k: u32) -> DiffPoly {
        let mut out = self.clone();
        for _ in 0..k {
            out = out.dx();
        }
        out
    }

    /// Partial derivative with respect to the single symbol `v`.
    pub fn partial(&self, v: VarDeriv) -> DiffPoly {
        let mut out = DiffPoly::zero();
        for (m, c) in self.terms.iter() {
            let e = m.exponent(v);
            if e > 0 {
                out.add_term(m.without_one(v), c * rat_int(e as i64));
            }
        }
        out
    }

    /// Highest derivative order of `u_j` occurring, if `u_j` occurs at all.
    pub fn max_order(&self, index: u32) -> Option<u32> {
        self.terms
            .keys()
            .flat_map(|m| m.factors().iter())
            .filter(|(v, _)| v.index == index)
            .map(|(v, _)| v.order)
            .max()
    }

    /// The set of variable indices that occur.
    pub fn var_indices(&self) -> BTreeSet<u32> {
        self.terms
            .keys()
            .flat_map(|m| m.factors().iter())
            .map(|(v, _)| v.index)
            .collect()
    }

    /// Variational derivative with respect to `u_j`:
    /// `sum_d (-d/dx)^d  dp/du_j^(d)`.  Zero exactly on the image of `dx`
    /// plus constants, which makes it the crate's independent exactness
    /// detector.
    pub fn variational_derivative(&self, index: u32) -> DiffPoly {
        let mut out = DiffPoly::zero();
        let top = match self.max_order(index) {
            Some(d) => d,
            None => return out,
        };
        for d in 0..=top {
            let p = self.partial(VarDeriv::new(index, d));
            let signed = if d % 2 == 0 { p.dx_n(d) } else { p.dx_n(d).neg() };
            out = out.add(&signed);
        }
        out
    }

    /// Weight of a homogeneous polynomial, or why it has none.
    pub fn weight(&self) -> CalcResult<i64> {
        let mut it = self.terms.keys();
        let first = it.next().ok_or(CalcError::ZeroPolynomial)?.weight();
        for m in it {
            if m.weight() != first {
                return Err(CalcError::Inhomogeneous(first, m.weight()));
            }
        }
        Ok(first)
    }

    /// Split into weight-homogeneous components, keyed by weight.
    pub fn split_by_weight(&self) -> BTreeMap<i64, DiffPoly> {
        let mut out: BTreeMap<i64, DiffPoly> = BTreeMap::new();
        for (m, c) in self.terms.iter() {
            out.entry(m.weight())
                .or_insert_with(DiffPoly::zero)
                .add_term(m.clone(), c.clone());
        }
        out
    }

    /// Replace every bound `u_j` (and all its derivatives, via the chain
    /// rule `u_j^(d) -> dx^d(binding)`) by its bound expression.  Bindings
    /// must not mention any bound variable, so one simultaneous pass is
    /// well defined.
    pub fn substitute(&self, bindings: &BTreeMap<u32, DiffPoly>) -> CalcResult<DiffPoly> {
        let bound: BTreeSet<u32> = bindings.keys().copied().collect();
        for (j, b) in bindings.iter() {
            if b.var_indices().iter().any(|i| bound.contains(i)) {
                return Err(CalcError::SelfReferential(*j));
            }
        }
        let mut deriv_cache: BTreeMap<(u32, u32), DiffPoly> = BTreeMap::new();
        let mut derivative_of = |index: u32, order: u32| -> DiffPoly {
            if let Some(hit) = deriv_cache.get(&(index, order)) {
                return hit.clone();
            }
            let value = if order == 0 {
                bindings[&index].clone()
            } else {
                // Build up from the highest cached order below `order`.
                let mut best = None;
                for o in (0..order).rev() {
                    if deriv_cache.contains_key(&(index, o)) {
                        best = Some(o);
                        break;
                    }
                }
                match best {
                    Some(o) => deriv_cache[&(index, o)].dx_n(order - o),
                    None => bindings[&index].dx_n(order),
                }
            };
            deriv_cache.insert((index, order), value.clone());
            value
        };

        let mut out = DiffPoly::zero();
        for (m, c) in self.terms.iter() {
            let mut kept = Monomial::one();
            let mut replaced = DiffPoly::constant(c.clone());
            for (v, e) in m.factors() {
                if bound.contains(&v.index) {
                    let base = derivative_of(v.index, v.order);
                    replaced = replaced.mul(&base.pow(*e));
                } else {
                    kept = kept.mul(&Monomial::from_factors([(*v, *e)]));
                }
            }
            let kept_poly = DiffPoly::from_monomial(kept, Rational::one());
            out = out.add(&replaced.mul(&kept_poly));
        }
        Ok(out)
    }

    /// Time derivative induced by prescribed flows `u_j_t = flows[j]`:
    /// `sum_{j,d} dp/du_j^(d) * dx^d(flows[j])`.
    pub fn evolve(&self, flows: &BTreeMap<u32, DiffPoly>) -> CalcResult<DiffPoly> {
        for j in self.var_indices() {
            if !flows.contains_key(&j) {
                return Err(CalcError::MissingFlow(j));
            }
        }
        let mut out = DiffPoly::zero();
        for j in self.var_indices() {
            let top = self.max_order(j).unwrap_or(0);
            let mut flow_deriv = flows[&j].clone();
            for d in 0..=top {
                let p = self.partial(VarDeriv::new(j, d));
                if !p.is_zero() {
                    out = out.add(&p.mul(&flow_deriv));
                }
                if d < top {
                    flow_deriv = flow_deriv.dx();
                }
            }
        }
        Ok(out)
    }

    /// Exact antiderivative with zero constant part, or a `NotExact` error.
    ///
    /// Works weight component by weight component: an antiderivative of a
    /// homogeneous component of weight `w` must be a rational combination of
    /// the finitely many weight-`w-1` monomials over the same variable
    /// indices, so existence reduces to membership of the component in the
    /// span of their derivatives.  Solved by Gaussian elimination in the
    /// canonical term order.
    pub fn integrate_exact(&self) -> CalcResult<DiffPoly> {
        if self.is_zero() {
            return Ok(DiffPoly::zero());
        }
        if !self.constant_term().is_zero() {
            return Err(CalcError::NotExact(format!(
                "constant term {} survives every derivative",
                self.constant_term()
            )));
        }
        let mut result = DiffPoly::zero();
        for (w, component) in self.split_by_weight() {
            let indices: Vec<u32> = component.var_indices().into_iter().collect();
            let candidates = monomials_of_weight(w - 1, &indices);

            // Echelon basis of { dx(candidate) }: pairs of (reduced image,
            // preimage combination), keyed by the image's leading monomial.
            let mut pivots: BTreeMap<Monomial, (DiffPoly, DiffPoly)> = BTreeMap::new();
            let reduce = |p: &mut DiffPoly,
                          pre: &mut DiffPoly,
                          pivots: &BTreeMap<Monomial, (DiffPoly, DiffPoly)>| {
                loop {
                    let hit = p
                        .terms()
                        .find(|(m, _)| pivots.contains_key(*m))
                        .map(|(m, c)| (m.clone(), c.clone()));
                    match hit {
                        None => break,
                        Some((m, c)) => {
                            let (img, pim) = &pivots[&m];
                            *p = p.sub(&img.scale(&c));
                            *pre = pre.sub(&pim.scale(&c));
                        }
                    }
                }
            };
            for cand in candidates {
                let mut img = DiffPoly::from_monomial(cand.clone(), Rational::one()).dx();
                let mut pre = DiffPoly::from_monomial(cand, Rational::one());
                reduce(&mut img, &mut pre, &pivots);
                if img.is_zero() {
                    continue;
                }
                let lead = img.leading_monomial().unwrap().clone();
                let lc = img.coeff(&lead);
                let inv = Rational::one() / lc;
                pivots.insert(lead, (img.scale(&inv), pre.scale(&inv)));
            }

            let mut rem = component.clone();
            let mut acc = DiffPoly::zero();
            reduce(&mut rem, &mut acc, &pivots);
            if !rem.is_zero() {
                return Err(CalcError::NotExact(format!(
                    "weight-{w} component leaves remainder {rem}"
                )));
            }
            // `acc` tracked the negative of the combination.
            result = result.sub(&acc);
        }
        Ok(result)
    }
}

/// All monomials of the given weight over the given variable indices
/// (constants excluded), in no particular order.
pub fn monomials_of_weight(weight: i64, indices: &[u32]) -> Vec<Monomial> {
    let mut letters: Vec<VarDeriv> = Vec::new();
    for &j in indices {
        let mut d = 0;
        while (j as i64 + d as i64) <= weight {
            letters.push(VarDeriv::new(j, d));
            d += 1;
        }
    }
    letters.sort();
    let mut out = Vec::new();
    let mut current: Vec<(VarDeriv, u32)> = Vec::new();
    fn recurse(
        letters: &[VarDeriv],
        i: usize,
        rem: i64,
        current: &mut Vec<(VarDeriv, u32)>,
        out: &mut Vec<Monomial>,
    ) {
        if rem == 0 {
            if !current.is_empty() {
                out.push(Monomial::from_factors(current.iter().copied()));
            }
            return;
        }
        if i >= letters.len() {
            return;
        }
        let lw = letters[i].weight();
        recurse(letters, i + 1, rem, current, out);
        let mut count = 1;
        while lw * count as i64 <= rem {
            current.push((letters[i], count));
            recurse(letters, i + 1, rem - lw * count as i64, current, out);
            current.pop();
            count += 1;
        }
    }
    if weight > 0 {
        recurse(&letters, 0, weight, &mut current, &mut out);
    }
    out
}

impl std::ops::Add for &DiffPoly {
    type Output = DiffPoly;
    fn add(self, rhs: &DiffPoly) -> DiffPoly {
        DiffPoly::add(self, rhs)
    }
}

impl std::ops::Sub for &DiffPoly {
    type Output = DiffPoly;
    fn sub(self, rhs: &DiffPoly) -> DiffPoly {
        DiffPoly::sub(self, rhs)
    }
}

impl std::ops::Mul for &DiffPoly {
    type Output = DiffPoly;
    fn mul(self, rhs: &DiffPoly) -> DiffPoly {
        DiffPoly::mul(self, rhs)
    }
}

impl std::ops::Neg for &DiffPoly {
    type Output = DiffPoly;
    fn neg(self) -> DiffPoly {
        DiffPoly::neg(self)
    }
}

/// Signed decomposition used by the display code: (|coeff|, is_negative).
pub(crate) fn abs_parts(c: &Rational) -> (Rational, bool) {
    if c.is_negative() {
        (-c.clone(), true)
    } else {
        (c.clone(), false)
    }
}
