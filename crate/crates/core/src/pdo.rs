//! Pseudo-differential operators over the differential polynomial ring.
//!
//! Two representations cover everything the hierarchy calculus needs:
//!
//! * [`LaurentPDO`] - a formal sum `sum_k f_k D^k` over integer degrees,
//!   composed with the generalized Leibniz rule
//!   `D^k f = sum_j C(k,j) f^(j) D^(k-j)`.  Negative degrees make the series
//!   infinite, so each operator tracks the lowest degree at which it is still
//!   exact (`min_deg = None` means exact everywhere).  Compositions check that
//!   their inputs are expanded deep enough for the requested output and fail
//!   loudly otherwise instead of silently returning wrong low-order terms.
//!
//! * [`NonlocalPDO`] - a differential operator plus finitely many integral
//!   tails `P D^-1 Q`.  This class is closed under the four composition rules
//!   implemented in [`NonlocalPDO::compose`] whenever the one integration the
//!   last rule needs exists in the ring; when it does not the composition
//!   reports `NotExact` rather than inventing a symbol.  Tails are kept in a
//!   canonical form derived from the tensor `sum_i P_i (x) Q_i`: equality of
//!   that tensor is equivalent to equality of the operators, and a reduced
//!   row echelon factorization of its coefficient matrix gives a unique
//!   emission.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::diffpoly::{DiffPoly, Monomial, Rational};
use crate::error::{CalcError, CalcResult};

/// Generalized binomial `C(k, j) = k (k-1) ... (k-j+1) / j!` for integer `k`
/// of either sign and `j >= 0`.
pub fn binom(k: i64, j: i64) -> CalcResult<Rational> {
    if j < 0 {
        return Err(CalcError::NegativeJ(j));
    }
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for i in 0..j {
        num *= BigInt::from(k - i);
        den *= BigInt::from(i + 1);
    }
    Ok(Rational::new(num, den))
}

/// A formal Laurent series in `D` with differential polynomial coefficients.
///
/// `min_deg == None` means every degree is known (all absent degrees are
/// truly zero).  `min_deg == Some(m)` means degrees `>= m` are known and
/// degrees below `m` have been truncated away.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaurentPDO {
    coeffs: BTreeMap<i64, DiffPoly>,
    min_deg: Option<i64>,
}

impl LaurentPDO {
    /// The zero operator, known exactly at every degree.
    pub fn zero() -> Self {
        LaurentPDO { coeffs: BTreeMap::new(), min_deg: None }
    }

    /// `D^k` (so `delta(0)` is the identity).
    pub fn delta(k: i64) -> Self {
        LaurentPDO::single(k, DiffPoly::one())
    }

    /// Multiplication by a polynomial, as a degree-zero operator.
    pub fn from_poly(p: &DiffPoly) -> Self {
        LaurentPDO::single(0, p.clone())
    }

    /// `coeff * D^degree`.
    pub fn single(degree: i64, coeff: DiffPoly) -> Self {
        let mut coeffs = BTreeMap::new();
        if !coeff.is_zero() {
            coeffs.insert(degree, coeff);
        }
        LaurentPDO { coeffs, min_deg: None }
    }

    /// Assemble from (degree, coefficient) pairs with an explicit cutoff.
    pub fn from_coeffs<I: IntoIterator<Item = (i64, DiffPoly)>>(
        iter: I,
        min_deg: Option<i64>,
    ) -> Self {
        let mut coeffs: BTreeMap<i64, DiffPoly> = BTreeMap::new();
        for (d, p) in iter {
            if p.is_zero() {
                continue;
            }
            if let Some(m) = min_deg {
                if d < m {
                    continue;
                }
            }
            let e = coeffs.entry(d).or_insert_with(DiffPoly::zero);
            *e = e.add(&p);
            if e.is_zero() {
                coeffs.remove(&d);
            }
        }
        LaurentPDO { coeffs, min_deg }
    }

    /// Lowest degree still known exactly (`None` = all of them).
    pub fn min_deg(&self) -> Option<i64> {
        self.min_deg
    }

    /// Highest degree with a nonzero known coefficient.
    pub fn max_deg(&self) -> Option<i64> {
        self.coeffs.keys().next_back().copied()
    }

    /// Highest degree at which the true operator could be nonzero.
    fn effective_max(&self) -> Option<i64> {
        match (self.max_deg(), self.min_deg) {
            (Some(k), Some(m)) => Some(k.max(m - 1)),
            (Some(k), None) => Some(k),
            (None, Some(m)) => Some(m - 1),
            (None, None) => None,
        }
    }

    /// True when no known coefficient is nonzero.  For a truncated operator
    /// this only says the *known* part vanishes.
    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// True when the operator is fully known, with no `D^k` for `k < 0`.
    pub fn is_local(&self) -> bool {
        self.min_deg.is_none() && self.coeffs.keys().all(|d| *d >= 0)
    }

    /// Coefficient of `D^d` (zero when absent, even below the cutoff).
    pub fn coeff(&self, d: i64) -> DiffPoly {
        self.coeffs.get(&d).cloned().unwrap_or_else(DiffPoly::zero)
    }

    /// Known (degree, coefficient) pairs, highest degree first.
    pub fn iter_desc(&self) -> impl Iterator<Item = (i64, &DiffPoly)> {
        self.coeffs.iter().rev().map(|(d, p)| (*d, p))
    }

    pub fn add(&self, other: &LaurentPDO) -> LaurentPDO {
        let min_deg = join_cutoffs(self.min_deg, other.min_deg);
        let mut coeffs = self.coeffs.clone();
        for (d, p) in other.coeffs.iter() {
            let e = coeffs.entry(*d).or_insert_with(DiffPoly::zero);
            *e = e.add(p);
            if e.is_zero() {
                coeffs.remove(d);
            }
        }
        if let Some(m) = min_deg {
            coeffs.retain(|d, _| *d >= m);
        }
        LaurentPDO { coeffs, min_deg }
    }

    pub fn neg(&self) -> LaurentPDO {
        LaurentPDO {
            coeffs: self.coeffs.iter().map(|(d, p)| (*d, p.neg())).collect(),
            min_deg: self.min_deg,
        }
    }

    pub fn sub(&self, other: &LaurentPDO) -> LaurentPDO {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Rational) -> LaurentPDO {
        if c.is_zero() {
            return LaurentPDO { coeffs: BTreeMap::new(), min_deg: self.min_deg };
        }
        LaurentPDO {
            coeffs: self.coeffs.iter().map(|(d, p)| (*d, p.scale(c))).collect(),
            min_deg: self.min_deg,
        }
    }

    /// Left-multiply every coefficient by a polynomial.
    pub fn scale_poly(&self, p: &DiffPoly) -> LaurentPDO {
        LaurentPDO {
            coeffs: self
                .coeffs
                .iter()
                .map(|(d, f)| (*d, f.mul(p)))
                .filter(|(_, f)| !f.is_zero())
                .collect(),
            min_deg: self.min_deg,
        }
    }

    /// Rewrite every coefficient (used to push substitutions through
    /// operators); the map must be a ring homomorphism commuting with `dx`
    /// for the result to mean anything.
    pub fn try_map_coeffs<F>(&self, f: F) -> CalcResult<LaurentPDO>
    where
        F: Fn(&DiffPoly) -> CalcResult<DiffPoly>,
    {
        let mut coeffs = BTreeMap::new();
        for (d, p) in self.coeffs.iter() {
            let q = f(p)?;
            if !q.is_zero() {
                coeffs.insert(*d, q);
            }
        }
        Ok(LaurentPDO { coeffs, min_deg: self.min_deg })
    }

    /// Drop degrees below `m` and remember the truncation.
    pub fn truncate_below(&self, m: i64) -> LaurentPDO {
        let min_deg = Some(join_cutoffs(self.min_deg, Some(m)).unwrap());
        LaurentPDO {
            coeffs: self
                .coeffs
                .iter()
                .filter(|(d, _)| **d >= m)
                .map(|(d, p)| (*d, p.clone()))
                .collect(),
            min_deg,
        }
    }

    /// Composition `self . other` by the generalized Leibniz rule, exact at
    /// every degree `>= want_min`.  When both operands are fully known and
    /// the expansion terminates on its own (no negative degree meets a
    /// non-constant coefficient) the result is exact everywhere and
    /// `want_min` is irrelevant.
    pub fn leibniz_compose(&self, other: &LaurentPDO, want_min: i64) -> CalcResult<LaurentPDO> {
        self.compose_impl(other, Some(want_min))
    }

    /// Composition that must terminate by itself; use for differential
    /// operators and constant-coefficient factors.
    pub fn compose_exact(&self, other: &LaurentPDO) -> CalcResult<LaurentPDO> {
        self.compose_impl(other, None)
    }

    fn compose_impl(&self, other: &LaurentPDO, want: Option<i64>) -> CalcResult<LaurentPDO> {
        // A fully known zero annihilates regardless of the other side.
        if self.min_deg.is_none() && self.is_zero() {
            return Ok(LaurentPDO::zero());
        }
        if other.min_deg.is_none() && other.is_zero() {
            return Ok(LaurentPDO::zero());
        }

        let finite = self.min_deg.is_none()
            && other.min_deg.is_none()
            && (self.coeffs.keys().all(|k| *k >= 0)
                || other.coeffs.values().all(DiffPoly::is_constant));

        let want_min = match (finite, want) {
            (true, _) => None,
            (false, Some(w)) => Some(w),
            (false, None) => {
                return Err(CalcError::InsufficientCutoff(
                    "composition expands into an infinite series; a target cutoff is required"
                        .into(),
                ))
            }
        };

        if let Some(w) = want_min {
            if let Some(ma) = self.min_deg {
                if let Some(bm) = other.effective_max() {
                    if ma > w - bm {
                        return Err(CalcError::InsufficientCutoff(format!(
                            "left factor known above degree {ma}, need degree {}",
                            w - bm
                        )));
                    }
                }
            }
            if let Some(mb) = other.min_deg {
                if let Some(am) = self.effective_max() {
                    if mb > w - am {
                        return Err(CalcError::InsufficientCutoff(format!(
                            "right factor known above degree {mb}, need degree {}",
                            w - am
                        )));
                    }
                }
            }
        }

        let mut out: BTreeMap<i64, DiffPoly> = BTreeMap::new();
        for (&d, g) in other.coeffs.iter() {
            // One derivative chain of g serves every left-hand degree.
            let mut j_top: i64 = -1;
            for &k in self.coeffs.keys() {
                let cap = match want_min {
                    Some(w) => {
                        if k >= 0 {
                            (k + d - w).min(k)
                        } else {
                            k + d - w
                        }
                    }
                    None => {
                        if k >= 0 {
                            k
                        } else {
                            0
                        }
                    }
                };
                j_top = j_top.max(cap);
            }
            if j_top < 0 {
                continue;
            }
            let mut g_deriv = g.clone();
            for j in 0..=j_top {
                if j > 0 {
                    g_deriv = g_deriv.dx();
                }
                if g_deriv.is_zero() {
                    break;
                }
                for (&k, f) in self.coeffs.iter() {
                    if k >= 0 && j > k {
                        continue;
                    }
                    let target = k + d - j;
                    if let Some(w) = want_min {
                        if target < w {
                            continue;
                        }
                    }
                    let c = binom(k, j)?;
                    if c.is_zero() {
                        continue;
                    }
                    let term = f.mul(&g_deriv).scale(&c);
                    if term.is_zero() {
                        continue;
                    }
                    let e = out.entry(target).or_insert_with(DiffPoly::zero);
                    *e = e.add(&term);
                    if e.is_zero() {
                        out.remove(&target);
                    }
                }
            }
        }
        Ok(LaurentPDO { coeffs: out, min_deg: want_min })
    }

    /// Formal adjoint `(f D^d)* = (-1)^d D^d . f`, exact at `>= want_min`.
    pub fn adjoint(&self, want_min: i64) -> CalcResult<LaurentPDO> {
        self.adjoint_impl(Some(want_min))
    }

    /// Adjoint of a differential operator (no negative degrees), exact
    /// everywhere.
    pub fn adjoint_exact(&self) -> CalcResult<LaurentPDO> {
        self.adjoint_impl(None)
    }

    fn adjoint_impl(&self, want: Option<i64>) -> CalcResult<LaurentPDO> {
        let finite = self.min_deg.is_none() && self.coeffs.keys().all(|d| *d >= 0);
        let want_min = match (finite, want) {
            (true, _) => None,
            (false, Some(w)) => {
                if let Some(m) = self.min_deg {
                    if m > w {
                        return Err(CalcError::InsufficientCutoff(format!(
                            "operator known above degree {m}, adjoint needs degree {w}"
                        )));
                    }
                }
                Some(w)
            }
            (false, None) => {
                return Err(CalcError::InsufficientCutoff(
                    "adjoint of a nonlocal operator is an infinite series; a cutoff is required"
                        .into(),
                ))
            }
        };
        let mut out: BTreeMap<i64, DiffPoly> = BTreeMap::new();
        for (&d, f) in self.coeffs.iter() {
            let sign = if d.rem_euclid(2) == 0 { Rational::one() } else { -Rational::one() };
            let j_top = match want_min {
                Some(w) => d - w,
                None => d, // d >= 0 here
            };
            let mut f_deriv = f.clone();
            for j in 0..=j_top {
                if j > 0 {
                    f_deriv = f_deriv.dx();
                }
                if f_deriv.is_zero() {
                    break;
                }
                let c = binom(d, j)?;
                if c.is_zero() {
                    continue;
                }
                let term = f_deriv.scale(&(c * &sign));
                let e = out.entry(d - j).or_insert_with(DiffPoly::zero);
                *e = e.add(&term);
                if e.is_zero() {
                    out.remove(&(d - j));
                }
            }
        }
        Ok(LaurentPDO { coeffs: out, min_deg: want_min })
    }

    /// Nonnegative-degree part, as a fully known differential operator.
    pub fn project_plus(&self) -> CalcResult<LaurentPDO> {
        if let Some(m) = self.min_deg {
            if m > 0 {
                return Err(CalcError::InsufficientCutoff(format!(
                    "degrees [0, {m}) were truncated away; the plus part is not known"
                )));
            }
        }
        Ok(LaurentPDO {
            coeffs: self
                .coeffs
                .iter()
                .filter(|(d, _)| **d >= 0)
                .map(|(d, p)| (*d, p.clone()))
                .collect(),
            min_deg: None,
        })
    }

    /// Strictly negative-degree part; inherits the cutoff.
    pub fn project_minus(&self) -> LaurentPDO {
        LaurentPDO {
            coeffs: self
                .coeffs
                .iter()
                .filter(|(d, _)| **d < 0)
                .map(|(d, p)| (*d, p.clone()))
                .collect(),
            min_deg: self.min_deg,
        }
    }

    /// `self^m`, exact at `>= want_min`.  Intermediate cutoffs are derived
    /// from the operator's top degree so no accuracy is lost along the way.
    pub fn power(&self, m: u32, want_min: i64) -> CalcResult<LaurentPDO> {
        if m == 0 {
            return Ok(LaurentPDO::delta(0));
        }
        let d1 = match self.effective_max() {
            Some(d) => d,
            None => return Ok(LaurentPDO::zero()),
        };
        let mut acc = self.clone();
        for step in 2..=m {
            let w = want_min - (m - step) as i64 * d1;
            acc = acc.leibniz_compose(self, w)?;
        }
        Ok(acc)
    }

    /// Apply to a polynomial.  Degrees `>= 0` differentiate, degree `-1`
    /// integrates (exactly or not at all), anything lower leaves the ring.
    pub fn apply_to_poly(&self, p: &DiffPoly) -> CalcResult<DiffPoly> {
        if self.min_deg.is_some() {
            return Err(CalcError::InsufficientCutoff(
                "cannot apply a truncated operator: its low-order coefficients are unknown".into(),
            ));
        }
        if let Some(d) = self.coeffs.keys().next() {
            if *d < -1 {
                return Err(CalcError::TooNonlocal(format!(
                    "operator contains D^{d}; only D^-1 acts on polynomials"
                )));
            }
        }
        let mut out = DiffPoly::zero();
        let top = self.max_deg().unwrap_or(0).max(0);
        let mut p_deriv = p.clone();
        for d in 0..=top {
            if d > 0 {
                p_deriv = p_deriv.dx();
            }
            let f = self.coeff(d);
            if !f.is_zero() {
                out = out.add(&f.mul(&p_deriv));
            }
        }
        let f = self.coeff(-1);
        if !f.is_zero() {
            let anti = p.integrate_exact().map_err(|e| match e {
                CalcError::NotExact(msg) => {
                    CalcError::NotExact(format!("D^-1 applied to inexact polynomial: {msg}"))
                }
                other => other,
            })?;
            out = out.add(&f.mul(&anti));
        }
        Ok(out)
    }
}

/// Combine two cutoffs: the sum/difference of operators is known where both
/// are.
fn join_cutoffs(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (None, None) => None,
        (Some(m), None) | (None, Some(m)) => Some(m),
        (Some(m), Some(n)) => Some(m.max(n)),
    }
}

/// A differential operator plus integral tails `sum_i P_i D^-1 Q_i`.
///
/// The tail list is always held in its canonical tensor form, so structural
/// equality is semantic equality.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonlocalPDO {
    local: LaurentPDO,
    tails: Vec<(DiffPoly, DiffPoly)>,
}

impl NonlocalPDO {
    pub fn zero() -> Self {
        NonlocalPDO { local: LaurentPDO::zero(), tails: Vec::new() }
    }

    /// Wrap a fully known Laurent operator.  Degree `-1` becomes the tail
    /// `coeff D^-1 1`; anything deeper is not representable.
    pub fn from_local(op: &LaurentPDO) -> CalcResult<Self> {
        if op.min_deg().is_some() {
            return Err(CalcError::InsufficientCutoff(
                "a truncated operator cannot be promoted to a closed-form one".into(),
            ));
        }
        let mut tails = Vec::new();
        let mut coeffs: BTreeMap<i64, DiffPoly> = BTreeMap::new();
        for (d, p) in op.coeffs.iter() {
            if *d >= 0 {
                coeffs.insert(*d, p.clone());
            } else if *d == -1 {
                tails.push((p.clone(), DiffPoly::one()));
            } else {
                return Err(CalcError::TooNonlocal(format!(
                    "D^{d} cannot be written as a single integral tail"
                )));
            }
        }
        Ok(NonlocalPDO::from_parts(
            LaurentPDO { coeffs, min_deg: None },
            tails,
        ))
    }

    /// Assemble and canonicalize.
    pub fn from_parts(local: LaurentPDO, tails: Vec<(DiffPoly, DiffPoly)>) -> Self {
        debug_assert!(local.is_local(), "local part must be a differential operator");
        NonlocalPDO { local, tails: canonical_tails(&tails) }
    }

    /// The tail `P D^-1 Q`.
    pub fn tail(p: DiffPoly, q: DiffPoly) -> Self {
        NonlocalPDO::from_parts(LaurentPDO::zero(), vec![(p, q)])
    }

    pub fn local(&self) -> &LaurentPDO {
        &self.local
    }

    pub fn tails(&self) -> &[(DiffPoly, DiffPoly)] {
        &self.tails
    }

    pub fn is_zero(&self) -> bool {
        self.local.is_zero() && self.tails.is_empty()
    }

    pub fn add(&self, other: &NonlocalPDO) -> NonlocalPDO {
        let mut tails = self.tails.clone();
        tails.extend(other.tails.iter().cloned());
        NonlocalPDO::from_parts(self.local.add(&other.local), tails)
    }

    pub fn neg(&self) -> NonlocalPDO {
        NonlocalPDO {
            local: self.local.neg(),
            tails: self.tails.iter().map(|(p, q)| (p.neg(), q.clone())).collect(),
        }
    }

    pub fn sub(&self, other: &NonlocalPDO) -> NonlocalPDO {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Rational) -> NonlocalPDO {
        NonlocalPDO::from_parts(
            self.local.scale(c),
            self.tails.iter().map(|(p, q)| (p.scale(c), q.clone())).collect(),
        )
    }

    /// Composition, closed under four rules:
    /// local . local (Leibniz, always terminates), local . tail (derivatives
    /// of `P` peel off), tail . local (integration by parts on `Q`), and
    /// tail . tail, which needs the one honest antiderivative
    /// `W = integrate(Q1 P2)` and fails with its certificate when `W` does
    /// not exist.
    pub fn compose(&self, other: &NonlocalPDO) -> CalcResult<NonlocalPDO> {
        let mut local = self.local.compose_exact(&other.local)?;
        let mut tails: Vec<(DiffPoly, DiffPoly)> = Vec::new();

        // local . tail
        for (p, q) in other.tails.iter() {
            for (j, f) in self.local.iter_desc() {
                let mut p_deriv = p.clone();
                for i in 0..j {
                    let c = binom(j, i)?;
                    let lead = f.mul(&p_deriv).scale(&c);
                    if !lead.is_zero() {
                        let mid = LaurentPDO::delta(j - i - 1)
                            .compose_exact(&LaurentPDO::from_poly(q))?;
                        local = local.add(&mid.scale_poly(&lead));
                    }
                    p_deriv = p_deriv.dx();
                }
                // The i == j remainder keeps a tail.
                let pj = p.dx_n(j as u32);
                let head = f.mul(&pj);
                if !head.is_zero() {
                    tails.push((head, q.clone()));
                }
            }
        }

        // tail . local
        for (p, q) in self.tails.iter() {
            for (j, f) in other.local.iter_desc() {
                let g = q.mul(f);
                let mut g_deriv = g.clone();
                for i in 1..=j {
                    // (-1)^(i-1) P g^(i-1) D^(j-i)
                    let sign = if (i - 1) % 2 == 0 { Rational::one() } else { -Rational::one() };
                    let term = p.mul(&g_deriv).scale(&sign);
                    if !term.is_zero() {
                        local = local.add(&LaurentPDO::single(j - i, term));
                    }
                    g_deriv = g_deriv.dx();
                }
                let sign = if j % 2 == 0 { Rational::one() } else { -Rational::one() };
                let pq = p.scale(&sign);
                if !pq.is_zero() && !g_deriv.is_zero() {
                    tails.push((pq, g_deriv));
                }
            }
        }

        // tail . tail
        for (p1, q1) in self.tails.iter() {
            for (p2, q2) in other.tails.iter() {
                let w = q1.mul(p2).integrate_exact().map_err(|e| match e {
                    CalcError::NotExact(msg) => CalcError::NotExact(format!(
                        "tail-tail composition needs an antiderivative of ({}) times ({}): {msg}",
                        q1, p2
                    )),
                    other => other,
                })?;
                tails.push((p1.mul(&w), q2.clone()));
                tails.push((p1.neg(), w.mul(q2)));
            }
        }

        Ok(NonlocalPDO::from_parts(local, tails))
    }

    /// Apply to a polynomial: the local part differentiates, each tail
    /// contributes `P * integrate(Q p)`.
    pub fn apply_to_poly(&self, p: &DiffPoly) -> CalcResult<DiffPoly> {
        let mut out = self.local.apply_to_poly(p)?;
        for (pt, qt) in self.tails.iter() {
            let anti = qt.mul(p).integrate_exact().map_err(|e| match e {
                CalcError::NotExact(msg) => CalcError::NotExact(format!(
                    "tail D^-1 applied to inexact polynomial: {msg}"
                )),
                other => other,
            })?;
            out = out.add(&pt.mul(&anti));
        }
        Ok(out)
    }
}

/// Canonical tail list of the tensor `sum_i P_i (x) Q_i`.
///
/// Expand the tensor into its monomial-by-monomial coefficient matrix (rows
/// indexed by `P`-monomials), take the reduced row echelon basis `E_j` of the
/// row space - unique for the tensor, independent of how the tails were
/// written - and read each row's coordinates off its pivot entries.  The
/// output pairs `(sum_m C[m,j] m, E_j)` are sorted by pivot monomial.
fn canonical_tails(tails: &[(DiffPoly, DiffPoly)]) -> Vec<(DiffPoly, DiffPoly)> {
    let mut rows: BTreeMap<Monomial, DiffPoly> = BTreeMap::new();
    for (p, q) in tails {
        if q.is_zero() {
            continue;
        }
        for (m, c) in p.terms() {
            let e = rows.entry(m.clone()).or_insert_with(DiffPoly::zero);
            *e = e.add(&q.scale(c));
        }
    }
    rows.retain(|_, v| !v.is_zero());

    // Reduced row echelon basis of the row span, pivots in canonical order.
    let mut basis: Vec<(Monomial, DiffPoly)> = Vec::new();
    for row in rows.values() {
        let mut r = row.clone();
        for (piv, b) in basis.iter() {
            let c = r.coeff(piv);
            if !c.is_zero() {
                r = r.sub(&b.scale(&c));
            }
        }
        if r.is_zero() {
            continue;
        }
        let lead = r.leading_monomial().unwrap().clone();
        let lc = r.coeff(&lead);
        let r = r.scale(&(Rational::one() / lc));
        for (_, b) in basis.iter_mut() {
            let c = b.coeff(&lead);
            if !c.is_zero() {
                *b = b.sub(&r.scale(&c));
            }
        }
        basis.push((lead, r));
        basis.sort_by(|a, b| a.0.cmp(&b.0));
    }

    let mut ptilde: Vec<DiffPoly> = vec![DiffPoly::zero(); basis.len()];
    for (m, row) in rows.iter() {
        for (j, (piv, _)) in basis.iter().enumerate() {
            let c = row.coeff(piv);
            if !c.is_zero() {
                ptilde[j] = ptilde[j].add(&DiffPoly::from_monomial(m.clone(), c));
            }
        }
    }
    basis
        .into_iter()
        .zip(ptilde)
        .filter(|(_, p)| !p.is_zero())
        .map(|((_, e), p)| (p, e))
        .collect()
}
