//! Recursion operators of the `(2n+1)`-reduced hierarchies.
//!
//! For a `(2n+1)`-reduction the Lax power `L^{2n+1}` is a purely
//! differential operator `D^nu + p_{nu-2} D^{nu-2} + ... + p_0` with
//! `nu = 2n+1`.  The reduced flows close under a recursion operator that is
//! assembled from four operator matrices built out of the `p_l` and their
//! derivatives:
//!
//! * `S_{ab} = C_{-a,b-a}` and `T_{ab} = C_{-a,nu+b-a-1}` are matrices of
//!   multiplication operators,
//! * `M_{ab} = D_{-a,nu-a+b-1}` is lower triangular with diagonal `-nu*D`,
//! * `N_{ab}` is `D_{-a,b-a}` on and above the diagonal and `C_{-a,b-a}`
//!   below it,
//!
//! where `C_{j,mu} = sum_l C(j-mu, l-mu) p_l^{(l-mu)}` is a scalar and
//! `D_{j,s} = C_{j,s} - sum_mu C(s+mu, s) p_{s+mu} D^mu` an operator.  The
//! KP-side recursion is `Phi = W (S - T M^-1 N) W^-1` with `W_{ab} =
//! O_{a+1,b}`, and the BKP/CKP recursion is carved out of `Phi^2` by the
//! `B`-operators:
//! `HatPhi_{k,mu} = (Phi^2)_{2k-1,2mu-1} + sum_i (Phi^2)_{2k-1,2i} B_{-2i,-2mu+1}`.
//!
//! Design notes
//! ------------
//! * The action route never inverts a matrix: it solves the two triangular
//!   systems by forward substitution, integrating exactly at each row, so a
//!   non-integrable intermediate is an error instead of a wrong answer.
//! * The operator route composes `(W (S - (T M^-1) N)) W^-1` in exactly
//!   that order; it keeps integral tails canonical at each step and fails
//!   loudly if a tail product requires a non-polynomial antiderivative.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::diffpoly::{DiffPoly, Rational};
use crate::error::{CalcError, CalcResult};
use crate::hierarchy::{b_operator, eliminate_odd, make_lax, o_operator, HierarchyKind};
use crate::pdo::{binom, LaurentPDO, NonlocalPDO};

// ---------------------------------------------------------------------------
// Operator matrices
// ---------------------------------------------------------------------------

/// A dense matrix of operator-like entries, indexed 1-based to match the
/// formulas above.
#[derive(Debug, Clone)]
pub struct OpMatrix<T> {
    rows: usize,
    cols: usize,
    entries: Vec<T>,
}

impl<T> OpMatrix<T> {
    pub fn build<F>(rows: usize, cols: usize, mut f: F) -> CalcResult<Self>
    where
        F: FnMut(usize, usize) -> CalcResult<T>,
    {
        let mut entries = Vec::with_capacity(rows * cols);
        for a in 1..=rows {
            for b in 1..=cols {
                entries.push(f(a, b)?);
            }
        }
        Ok(OpMatrix { rows, cols, entries })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Entry at 1-based `(a, b)`.
    pub fn at(&self, a: usize, b: usize) -> &T {
        assert!(a >= 1 && a <= self.rows && b >= 1 && b <= self.cols);
        &self.entries[(a - 1) * self.cols + (b - 1)]
    }
}

fn poly_mat_vec(m: &OpMatrix<DiffPoly>, v: &[DiffPoly]) -> Vec<DiffPoly> {
    assert_eq!(m.cols, v.len());
    (1..=m.rows)
        .map(|a| {
            let mut acc = DiffPoly::zero();
            for b in 1..=m.cols {
                acc = acc.add(&m.at(a, b).mul(&v[b - 1]));
            }
            acc
        })
        .collect()
}

fn local_mat_apply(m: &OpMatrix<LaurentPDO>, v: &[DiffPoly]) -> CalcResult<Vec<DiffPoly>> {
    assert_eq!(m.cols, v.len());
    let mut out = Vec::with_capacity(m.rows);
    for a in 1..=m.rows {
        let mut acc = DiffPoly::zero();
        for b in 1..=m.cols {
            acc = acc.add(&m.at(a, b).apply_to_poly(&v[b - 1])?);
        }
        out.push(acc);
    }
    Ok(out)
}

/// Extract the constant `c` of a diagonal entry `c*D`, rejecting anything
/// else: the triangular solves rely on that exact shape.
fn diagonal_derivative_constant(entry: &LaurentPDO) -> CalcResult<Rational> {
    let c = entry.coeff(1);
    if c.is_constant() && !c.is_zero() && *entry == LaurentPDO::single(1, c.clone()) {
        Ok(c.constant_term())
    } else {
        Err(CalcError::BadIndex(format!(
            "triangular solve requires a c*D diagonal, found {entry}"
        )))
    }
}

/// Solve `M z = y` for a lower-triangular `M` whose diagonal entries are
/// constant multiples of `D`, integrating exactly row by row.
pub fn solve_lower_triangular(
    m: &OpMatrix<LaurentPDO>,
    y: &[DiffPoly],
) -> CalcResult<Vec<DiffPoly>> {
    assert_eq!(m.rows, m.cols);
    assert_eq!(m.rows, y.len());
    let mut z: Vec<DiffPoly> = Vec::with_capacity(y.len());
    for a in 1..=m.rows {
        let c = diagonal_derivative_constant(m.at(a, a))?;
        let mut rhs = y[a - 1].clone();
        for b in 1..a {
            rhs = rhs.sub(&m.at(a, b).apply_to_poly(&z[b - 1])?);
        }
        let integrated = rhs.integrate_exact().map_err(|e| match e {
            CalcError::NotExact(msg) => {
                CalcError::NotExact(format!("triangular solve, row {a}: {msg}"))
            }
            other => other,
        })?;
        z.push(integrated.scale(&c.recip()));
    }
    Ok(z)
}

/// Invert a lower-triangular matrix of local operators with `c*D`
/// diagonals.  The result is a matrix of closed-form operators with `D^-1`
/// tails.
pub fn matrix_inverse(m: &OpMatrix<LaurentPDO>) -> CalcResult<OpMatrix<NonlocalPDO>> {
    assert_eq!(m.rows, m.cols);
    let k = m.rows;
    let identity = NonlocalPDO::from_local(&LaurentPDO::delta(0))?;
    let zero = NonlocalPDO::zero();
    let mut inv: Vec<Vec<NonlocalPDO>> = vec![vec![zero; k]; k];
    for a in 1..=k {
        let c = diagonal_derivative_constant(m.at(a, a))?;
        let diag_inv = NonlocalPDO::tail(DiffPoly::constant(c.recip()), DiffPoly::one());
        for b in 1..=a {
            let mut rhs = if a == b { identity.clone() } else { NonlocalPDO::zero() };
            for g in b..a {
                let mg = NonlocalPDO::from_local(m.at(a, g))?;
                rhs = rhs.sub(&mg.compose(&inv[g - 1][b - 1])?);
            }
            inv[a - 1][b - 1] = diag_inv.compose(&rhs)?;
        }
    }
    OpMatrix::build(k, k, |a, b| Ok(inv[a - 1][b - 1].clone()))
}

fn compose_mats(
    x: &OpMatrix<NonlocalPDO>,
    y: &OpMatrix<NonlocalPDO>,
) -> CalcResult<OpMatrix<NonlocalPDO>> {
    assert_eq!(x.cols, y.rows);
    OpMatrix::build(x.rows, y.cols, |a, b| {
        let mut acc = NonlocalPDO::zero();
        for g in 1..=x.cols {
            acc = acc.add(&x.at(a, g).compose(y.at(g, b))?);
        }
        Ok(acc)
    })
}

fn sub_mats(x: &OpMatrix<NonlocalPDO>, y: &OpMatrix<NonlocalPDO>) -> OpMatrix<NonlocalPDO> {
    assert_eq!((x.rows, x.cols), (y.rows, y.cols));
    OpMatrix::build(x.rows, x.cols, |a, b| Ok(x.at(a, b).sub(y.at(a, b))))
        .expect("infallible build")
}

fn poly_mat_to_ops(m: &OpMatrix<DiffPoly>) -> CalcResult<OpMatrix<NonlocalPDO>> {
    OpMatrix::build(m.rows, m.cols, |a, b| {
        NonlocalPDO::from_local(&LaurentPDO::from_poly(m.at(a, b)))
    })
}

fn local_mat_to_ops(m: &OpMatrix<LaurentPDO>) -> CalcResult<OpMatrix<NonlocalPDO>> {
    OpMatrix::build(m.rows, m.cols, |a, b| NonlocalPDO::from_local(m.at(a, b)))
}

// ---------------------------------------------------------------------------
// Recursion context
// ---------------------------------------------------------------------------

/// The `p_l` table of a `(2n+1)`-reduction together with everything
/// derived from it.
#[derive(Debug, Clone)]
pub struct RecursionContext {
    kind: HierarchyKind,
    n: u32,
    nu: i64,
    p: BTreeMap<i64, DiffPoly>,
}

/// The four matrices of the `Phi = W (S - T M^-1 N) W^-1` factorization.
#[derive(Debug, Clone)]
pub struct RecursionMatrices {
    pub s: OpMatrix<DiffPoly>,
    pub t: OpMatrix<DiffPoly>,
    pub m: OpMatrix<LaurentPDO>,
    pub n: OpMatrix<LaurentPDO>,
    pub w: OpMatrix<LaurentPDO>,
}

impl RecursionContext {
    /// Build the context for the `(2n+1)`-reduction of the given kind.
    /// The `p_l` involve only `u2 ..= u_{2n}` (BKP/CKP) or
    /// `u2 ..= u_{2n+1}` (KP), so no reduction bindings enter here.
    pub fn new(kind: HierarchyKind, n: u32) -> CalcResult<Self> {
        if n == 0 {
            return Err(CalcError::BadIndex("reduction order n must be >= 1".into()));
        }
        let nu = 2 * n as i64 + 1;
        let lax = make_lax(kind, 2 * n + 1)?;
        let pw = lax.power(2 * n as u32 + 1, 0)?;
        let mut p = BTreeMap::new();
        for l in 0..=nu {
            p.insert(l, pw.coeff(l));
        }
        debug_assert_eq!(p[&nu], DiffPoly::one());
        debug_assert!(p[&(nu - 1)].is_zero());
        Ok(RecursionContext { kind, n, nu, p })
    }

    pub fn kind(&self) -> HierarchyKind {
        self.kind
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn nu(&self) -> i64 {
        self.nu
    }

    /// Coefficient `p_l` of the reduced Lax power (zero outside `0..=nu`).
    pub fn p_coeff(&self, l: i64) -> DiffPoly {
        self.p.get(&l).cloned().unwrap_or_else(DiffPoly::zero)
    }

    /// Scalar `C_{j,mu} = sum_{l=max(0,mu)}^{nu} C(j-mu, l-mu) p_l^{(l-mu)}`.
    pub fn c_entry(&self, j: i64, mu: i64) -> CalcResult<DiffPoly> {
        let mut acc = DiffPoly::zero();
        for l in mu.max(0)..=self.nu {
            let c = binom(j - mu, l - mu)?;
            if c.is_zero() {
                continue;
            }
            acc = acc.add(&self.p_coeff(l).dx_n((l - mu) as u32).scale(&c));
        }
        Ok(acc)
    }

    /// Operator `Ctilde_s = sum_{mu=0}^{nu-s} C(s+mu, s) p_{s+mu} D^mu`.
    pub fn ctilde_entry(&self, s: i64) -> CalcResult<LaurentPDO> {
        let mut acc = LaurentPDO::zero();
        if s < 0 {
            return Err(CalcError::BadIndex(format!(
                "Ctilde_s needs s >= 0, got s={s}"
            )));
        }
        for mu in 0..=(self.nu - s).max(-1) {
            let c = binom(s + mu, s)?;
            let p = self.p_coeff(s + mu).scale(&c);
            if !p.is_zero() {
                acc = acc.add(&LaurentPDO::single(mu, p));
            }
        }
        Ok(acc)
    }

    /// Operator `D_{j,s} = C_{j,s} - Ctilde_s`.
    pub fn d_entry(&self, j: i64, s: i64) -> CalcResult<LaurentPDO> {
        let c = self.c_entry(j, s)?;
        Ok(LaurentPDO::from_poly(&c).sub(&self.ctilde_entry(s)?))
    }

    /// Assemble `S`, `T`, `M`, `N`, and the flow matrix `W`.
    pub fn matrices(&self) -> CalcResult<RecursionMatrices> {
        let two_n = 2 * self.n as usize;
        let nu = self.nu as usize;
        let s = OpMatrix::build(two_n, two_n, |a, b| {
            self.c_entry(-(a as i64), b as i64 - a as i64)
        })?;
        let t = OpMatrix::build(two_n, nu, |a, b| {
            self.c_entry(-(a as i64), self.nu + b as i64 - a as i64 - 1)
        })?;
        let m = OpMatrix::build(nu, nu, |a, b| {
            if b > a {
                Ok(LaurentPDO::zero())
            } else {
                self.d_entry(-(a as i64), self.nu - a as i64 + b as i64 - 1)
            }
        })?;
        let n = OpMatrix::build(nu, two_n, |a, b| {
            if b >= a {
                self.d_entry(-(a as i64), b as i64 - a as i64)
            } else {
                Ok(LaurentPDO::from_poly(&self.c_entry(
                    -(a as i64),
                    b as i64 - a as i64,
                )?))
            }
        })?;
        let table = match self.kind {
            HierarchyKind::Kp => None,
            _ => Some(eliminate_odd(self.kind, 2 * self.n + 1)?),
        };
        let w = OpMatrix::build(two_n, two_n, |a, b| {
            let o = o_operator(a as i64 + 1, b as i64)?;
            match &table {
                Some(t) => o.try_map_coeffs(|p| t.apply(p)),
                None => Ok(o),
            }
        })?;
        Ok(RecursionMatrices { s, t, m, n, w })
    }

    /// The four recursion matrices `(S, T, M, N)`.
    pub fn build_matrices(
        &self,
    ) -> CalcResult<(
        OpMatrix<DiffPoly>,
        OpMatrix<DiffPoly>,
        OpMatrix<LaurentPDO>,
        OpMatrix<LaurentPDO>,
    )> {
        let mats = self.matrices()?;
        Ok((mats.s, mats.t, mats.m, mats.n))
    }

    /// The flow-coefficient matrix `W` with `W_{ab} = O_{a+1,b}`, lower
    /// triangular with `D` down the diagonal.
    pub fn kp_flow_matrix(&self) -> CalcResult<OpMatrix<LaurentPDO>> {
        Ok(self.matrices()?.w)
    }

    /// Prolong the `n` free flow components `(u_{2,t}, ..., u_{2n,t})` to
    /// the full `2n`-vector indexed by `u_{a+1}`: odd variables evolve by
    /// their `B`-operator images, `u_{2mu+1,t} = sum_g B_{-2mu,-2g+1} u_{2g,t}`.
    pub fn lift_flows(&self, free: &[DiffPoly]) -> CalcResult<Vec<DiffPoly>> {
        self.kind.constraint_k().ok_or_else(|| {
            CalcError::BadIndex("flow lifting needs the bkp or ckp constraint".into())
        })?;
        if free.len() != self.n as usize {
            return Err(CalcError::BadIndex(format!(
                "expected {} free flow components, got {}",
                self.n,
                free.len()
            )));
        }
        let two_n = 2 * self.n as usize;
        let mut v = vec![DiffPoly::zero(); two_n];
        for mu in 1..=self.n as usize {
            v[2 * mu - 2] = free[mu - 1].clone();
        }
        for i in 1..=self.n {
            let mut acc = DiffPoly::zero();
            for g in 1..=i {
                let c = b_operator(self.kind, i, g)?;
                acc = acc.add(&free[g as usize - 1].dx_n(2 * i - 2 * g + 1).scale(&c));
            }
            v[2 * i as usize - 1] = acc;
        }
        Ok(v)
    }
}

// ---------------------------------------------------------------------------
// Recursion operators
// ---------------------------------------------------------------------------

/// The KP-side recursion operator `Phi = W (S - T M^-1 N) W^-1` as a
/// `2n x 2n` matrix of closed-form operators.
pub fn kp_phi_operator(ctx: &RecursionContext) -> CalcResult<OpMatrix<NonlocalPDO>> {
    let mats = ctx.matrices()?;
    let s_op = poly_mat_to_ops(&mats.s)?;
    let t_op = poly_mat_to_ops(&mats.t)?;
    let n_op = local_mat_to_ops(&mats.n)?;
    let w_op = local_mat_to_ops(&mats.w)?;
    let m_inv = matrix_inverse(&mats.m)?;
    let t_mi = compose_mats(&t_op, &m_inv)?;
    let t_mi_n = compose_mats(&t_mi, &n_op)?;
    let r = sub_mats(&s_op, &t_mi_n);
    let w_r = compose_mats(&w_op, &r)?;
    let w_inv = matrix_inverse(&mats.w)?;
    compose_mats(&w_r, &w_inv)
}

/// The BKP/CKP recursion operator as an `n x n` matrix:
/// `HatPhi_{k,mu} = (Phi^2)_{2k-1,2mu-1} + sum_{i=mu}^{n} (Phi^2)_{2k-1,2i} B_{-2i,-2mu+1}`.
pub fn hat_phi_operator(ctx: &RecursionContext) -> CalcResult<OpMatrix<NonlocalPDO>> {
    ctx.kind().constraint_k().ok_or_else(|| {
        CalcError::BadIndex("the hat recursion operator needs bkp or ckp".into())
    })?;
    let phi = kp_phi_operator(ctx)?;
    let phi2 = compose_mats(&phi, &phi)?;
    let n = ctx.n() as usize;
    OpMatrix::build(n, n, |k, mu| {
        let mut e = phi2.at(2 * k - 1, 2 * mu - 1).clone();
        for i in mu..=n {
            let c = b_operator(ctx.kind(), i as u32, mu as u32)?;
            let b = NonlocalPDO::from_local(
                &LaurentPDO::delta((2 * i - 2 * mu + 1) as i64).scale(&c),
            )?;
            e = e.add(&phi2.at(2 * k - 1, 2 * i).compose(&b)?);
        }
        Ok(e)
    })
}

/// Apply `Phi` to a full `2n`-component coordinate flow vector `reps`
/// times, entirely through the solve-based pipeline (no closed operators):
/// peel `W` off by forward substitution, apply `N`, solve against `M`,
/// combine with `S` and `T`, and put `W` back.
///
/// An even BKP/CKP flow enters as the [`RecursionContext::lift_flows`]
/// prolongation of its free components; two applications of `Phi` then
/// advance every free component by one step of the squared recursion.
pub fn phi_action(
    ctx: &RecursionContext,
    v: &[DiffPoly],
    reps: u32,
) -> CalcResult<Vec<DiffPoly>> {
    let two_n = 2 * ctx.n() as usize;
    if v.len() != two_n {
        return Err(CalcError::BadIndex(format!(
            "expected a coordinate flow vector of length {two_n}, got {}",
            v.len()
        )));
    }
    let mats = ctx.matrices()?;
    let mut v = v.to_vec();
    for _ in 0..reps {
        let w = solve_lower_triangular(&mats.w, &v)?;
        let y = local_mat_apply(&mats.n, &w)?;
        let z = solve_lower_triangular(&mats.m, &y)?;
        let sw = poly_mat_vec(&mats.s, &w);
        let tz = poly_mat_vec(&mats.t, &z);
        let u: Vec<DiffPoly> = sw
            .iter()
            .zip(tz.iter())
            .map(|(x, y)| x.sub(y))
            .collect();
        v = local_mat_apply(&mats.w, &u)?;
    }
    Ok(v)
}

// ---------------------------------------------------------------------------
// Scaling transforms
// ---------------------------------------------------------------------------

/// Rescale a flow right-hand side: substitute `u2 -> u_scale * u2` and
/// divide by `u_scale * t_scale`, i.e. pass to the variables
/// `u = u2 / u_scale`, `t' = t * t_scale` up to the overall normalization
/// used when matching literature forms.
pub fn scaling_transform(
    p: &DiffPoly,
    u_scale: &Rational,
    t_scale: &Rational,
) -> CalcResult<DiffPoly> {
    if u_scale.is_zero() || t_scale.is_zero() {
        return Err(CalcError::BadIndex("scale factors must be nonzero".into()));
    }
    let norm = (u_scale * t_scale).recip();
    Ok(p.map_coeffs(|m, c| {
        let mut out = c * &norm;
        for (v, e) in m.factors() {
            if v.index == 2 {
                for _ in 0..*e {
                    out *= u_scale;
                }
            }
        }
        out
    }))
}
