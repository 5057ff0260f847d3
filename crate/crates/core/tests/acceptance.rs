//! Acceptance gate: one integration test per numbered criterion, each
//! printing a single `criterion NN (<label>): PASS` line (with elapsed time)
//! on success.  Every comparison is exact rational equality — no tolerances.
//!
//! Expected values are frozen reference tables, reproduced here as canonical
//! text and parsed back before comparison.  Two entries of those tables are
//! internally inconsistent, and the corresponding tests are knowingly red:
//!
//! * criterion 3: the t5/t7 columns of the unreduced flow tables are not the
//!   coefficient of `D^-1` in the Lax equation.  The forensics printed on
//!   failure show (a) an independent commutator oracle reproducing our
//!   flows, (b) the t5 discrepancy factoring exactly as a multiple of
//!   `(d/dx)^3` of the 3-reduction residual `u4 + u2^2 - c*u2_xx`, and
//!   (c) both t7 candidates collapsing to the same reduced t7 flow once the
//!   3-reduction is imposed.  The tables were evidently simplified modulo
//!   the 3-reduction ideal; the unreduced flows must not be.
//! * criterion 8: neither scaled-target equation is weight homogeneous, so
//!   neither can be the image of a homogeneous flow under any rescaling
//!   `u2 -> a*u2`, `t -> b*t`.  The forensics print the weight split and the
//!   exact term-level deviations from the nearest consistent images (the
//!   standard seventh-order equations recovered by `scaling_transform`).
//!
//! Both tests implement the stated comparison faithfully and fail loudly
//! rather than redefine the target.

use std::collections::BTreeMap;
use std::time::Instant;

use bckp::{
    b_operator, b_operator_by_composition, binom, constraint_residual, eliminate_odd,
    even_residual_check, flow, hat_phi_operator, kp_phi_operator, make_lax, phi_action, rat_int,
    reduce, reduced_flow, scaling_transform, DiffPoly, HierarchyKind, LaurentPDO, Rational,
    RecursionContext,
};

use bckp::textform::parse_poly;

const KINDS: [HierarchyKind; 2] = [HierarchyKind::Bkp, HierarchyKind::Ckp];

fn p(s: &str) -> DiffPoly {
    parse_poly(s).unwrap_or_else(|e| panic!("reference string failed to parse: {e}\n  in: {s}"))
}

fn report(num: u32, label: &str, started: Instant) {
    println!(
        "criterion {num:02} ({label}): PASS [{} ms]",
        started.elapsed().as_millis()
    );
}

// ---------------------------------------------------------------------------
// criterion 1 — odd-variable elimination tables
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_odd_variable_elimination_tables() {
    let t0 = Instant::now();
    let expected: [(HierarchyKind, [(u32, &str); 4]); 2] = [
        (
            HierarchyKind::Bkp,
            [
                (3, "-u2_x"),
                (5, "u2_xxx - 2*u4_x"),
                (7, "-3*u2_xxxxx + 5*u4_xxx - 3*u6_x"),
                (9, "17*u2^(7) - 28*u4_xxxxx + 14*u6_xxx - 4*u8_x"),
            ],
        ),
        (
            HierarchyKind::Ckp,
            [
                (3, "-1/2*u2_x"),
                (5, "1/4*u2_xxx - 3/2*u4_x"),
                (7, "-1/2*u2_xxxxx + 5/2*u4_xxx - 5/2*u6_x"),
                (9, "17/8*u2^(7) - 21/2*u4_xxxxx + 35/4*u6_xxx - 7/2*u8_x"),
            ],
        ),
    ];
    for (kind, rows) in &expected {
        let table = eliminate_odd(*kind, 9).unwrap();
        for (odd, text) in rows {
            let got = table.bindings().get(odd).unwrap_or_else(|| {
                panic!("criterion 01: {} table has no binding for u{odd}", kind.name())
            });
            assert_eq!(
                got,
                &p(text),
                "criterion 01: {} u{odd} binding disagrees with the reference table",
                kind.name()
            );
        }
    }
    report(1, "odd-variable elimination tables", t0);
}

// ---------------------------------------------------------------------------
// criterion 2 — B-operator scalars against two independent oracles
// ---------------------------------------------------------------------------

/// Scalar of `A_{j,m} = -1/2 * (-1)^m * C(j+m-k, m) * D^m`, the coefficient
/// operator of the adjoint-constraint recursion (`k` = 1 or 0).
fn a_scalar(k: i64, j: i64, m: i64) -> Rational {
    let sign = if m % 2 == 0 { 1 } else { -1 };
    binom(j + m - k, m).unwrap() * rat_int(-sign) / rat_int(2)
}

/// Composition-sum oracle: enumerate every chain of positive even steps
/// `i_1, ..., i_v` with `i_1 + ... + i_v <= 2l - 2mu` and accumulate the
/// product of `A` scalars along the chain, closing each chain with the odd
/// step that lands on `-2mu + 1`.  This is the closed-form expansion the
/// in-crate recursion is meant to sum, evaluated with no shared code.
fn b_scalar_by_chains(k: i64, l: i64, mu: i64) -> Rational {
    fn walk(k: i64, l: i64, mu: i64, consumed: i64, prod: Rational, total: &mut Rational) {
        let j_now = -2 * l + consumed;
        let last = (2 * l - 2 * mu + 1) - consumed;
        *total += prod.clone() * a_scalar(k, j_now, last);
        let mut step = 2;
        while consumed + step <= 2 * l - 2 * mu {
            let next = prod.clone() * a_scalar(k, j_now, step);
            walk(k, l, mu, consumed + step, next, total);
            step += 2;
        }
    }
    let mut total = Rational::from_integer(0.into());
    walk(k, l, mu, 0, rat_int(1), &mut total);
    total
}

#[test]
fn criterion_02_b_operator_scalars() {
    let t0 = Instant::now();
    let worked: [(HierarchyKind, [(u32, u32, i64, i64); 10]); 2] = [
        (
            HierarchyKind::Bkp,
            [
                (1, 1, -1, 1),
                (2, 1, 1, 1),
                (2, 2, -2, 1),
                (3, 1, -3, 1),
                (3, 2, 5, 1),
                (3, 3, -3, 1),
                (4, 1, 17, 1),
                (4, 2, -28, 1),
                (4, 3, 14, 1),
                (4, 4, -4, 1),
            ],
        ),
        (
            HierarchyKind::Ckp,
            [
                (1, 1, -1, 2),
                (2, 1, 1, 4),
                (2, 2, -3, 2),
                (3, 1, -1, 2),
                (3, 2, 5, 2),
                (3, 3, -5, 2),
                (4, 1, 17, 8),
                (4, 2, -21, 2),
                (4, 3, 35, 4),
                (4, 4, -7, 2),
            ],
        ),
    ];
    for (kind, rows) in &worked {
        for (l, mu, num, den) in rows {
            let got = b_operator(*kind, *l, *mu).unwrap();
            let want = rat_int(*num) / rat_int(*den);
            assert_eq!(
                got, want,
                "criterion 02: {} B_{{-{},-{}}} disagrees with the worked value",
                kind.name(),
                2 * l,
                2 * mu - 1
            );
        }
    }
    // Oracle sweep for l <= 5: the recursion, the chain enumeration, and the
    // operator-composition evaluation must all coincide.
    for kind in KINDS {
        let k = match kind {
            HierarchyKind::Bkp => 1,
            HierarchyKind::Ckp => 0,
            HierarchyKind::Kp => unreachable!(),
        };
        for l in 1..=5u32 {
            for mu in 1..=l {
                let scalar = b_operator(kind, l, mu).unwrap();
                let chains = b_scalar_by_chains(k, l as i64, mu as i64);
                assert_eq!(
                    scalar, chains,
                    "criterion 02: {} B_{{-{},-{}}} recursion != chain-enumeration oracle",
                    kind.name(),
                    2 * l,
                    2 * mu - 1
                );
                let op = b_operator_by_composition(kind, l, mu).unwrap();
                let deg = (2 * l - 2 * mu + 1) as i64;
                let want = LaurentPDO::delta(deg).scale(&scalar);
                assert_eq!(
                    op, want,
                    "criterion 02: {} B_{{-{},-{}}} operator-composition oracle mismatch",
                    kind.name(),
                    2 * l,
                    2 * mu - 1
                );
            }
        }
    }
    report(2, "B-operator scalars and composition oracle", t0);
}

// ---------------------------------------------------------------------------
// criterion 3 — unreduced u2 flow tables for t1, t3, t5, t7 (knowingly red)
// ---------------------------------------------------------------------------

const FLOW_TABLE_BKP: [&str; 4] = [
    "u2_x",
    "6*u2*u2_x + 3*u4_x - 2*u2_xxx",
    "20*u2*u4_x + 20*u4*u2_x + 10*u2*u2_xxx + 5*u6_x + 60*u2_x*u2_xx - 2/3*u2_xxxxx \
     + 30*u2^2*u2_x",
    "10/3*u2^(7) + 406*u2_x*u2*u2_xx + 210*u2*u4*u2_x + 7*u8_x - 7*u4_xxxxx + 14*u6_xxx \
     + 112*u2_x^3 + 42*u2*u6_x + 42*u4*u4_x + 42*u6*u2_x + 49*u2*u4_xxx + 98*u4*u2_xxx \
     + 49*u2*u2_xxxxx + 203*u2_x*u4_xx + 252*u4_x*u2_xx + 294*u2_x*u2_xxxx \
     + 609*u2_xx*u2_xxx + 105*u2^2*u4_x + 91*u2^2*u2_xxx + 140*u2^3*u2_x",
];

const FLOW_TABLE_CKP: [&str; 4] = [
    "u2_x",
    "6*u2*u2_x + 3*u4_x - 1/2*u2_xxx",
    "20*u2*u4_x + 20*u4*u2_x + 5*u6_x + 95*u2_x*u2_xx + 30*u2*u2_xxx + 10*u4_xxx \
     + 30*u2^2*u2_x - 3/2*u2_xxxxx",
    "42*u2*u6_x + 42*u4*u4_x + 42*u6*u2_x + 49*u2*u4_xxx + 98*u4*u2_xxx + 35*u2*u2_xxxxx \
     + 7*u8_x + 385/2*u2_x*u4_xx + 483/2*u2_xx*u4_x + 154*u2_x*u2_xxxx + 287*u2_xx*u2_xxx \
     + 105*u2^2*u4_x + 91*u2^2*u2_xxx + 140*u2^3*u2_x + 210*u2*u4*u2_x \
     + 791/2*u2_x*u2*u2_xx + 14*u6_xxx + 427/4*u2_x^3 - 7*u4_xxxxx + 13/6*u2^(7)",
];

/// Independent flow oracle: build the full Lax operator with enough
/// variables, raise it, project, and read the coefficient of `D^-1` in the
/// literal commutator `[(L^{2m+1})_+, L]`.  Shares no code with `flow`'s
/// triangular `Q`-operator assembly.
fn commutator_flow(kind: HierarchyKind, m: u32) -> DiffPoly {
    let cutoff = 2 * m + 4;
    let lax = make_lax(kind, cutoff).unwrap();
    let plus = lax.power(2 * m + 1, 0).unwrap().project_plus().unwrap();
    let bl = plus.leibniz_compose(&lax, -1).unwrap();
    let lb = lax.leibniz_compose(&plus, -1).unwrap();
    bl.sub(&lb).coeff(-1).clone()
}

#[test]
fn criterion_03_unreduced_flow_tables() {
    let t0 = Instant::now();
    let tables = [
        (HierarchyKind::Bkp, &FLOW_TABLE_BKP),
        (HierarchyKind::Ckp, &FLOW_TABLE_CKP),
    ];
    let mut failures: Vec<(HierarchyKind, u32, DiffPoly, DiffPoly)> = Vec::new();
    for (kind, table) in tables {
        for (m, text) in table.iter().enumerate() {
            let m = m as u32;
            let computed = flow(kind, 1, m, 2 * (1 + m) + 1).unwrap();
            let reference = p(text);
            if computed != reference {
                failures.push((kind, m, computed, reference));
            }
        }
    }
    if failures.is_empty() {
        report(3, "unreduced flow tables t1..t7", t0);
        return;
    }

    println!(
        "criterion 03 (unreduced flow tables t1..t7): FAIL — {} of 8 reference entries disagree",
        failures.len()
    );
    for (kind, m, computed, reference) in &failures {
        let t = 2 * m + 1;
        println!("--- {} u2 flow at t{t} ---", kind.name());
        println!("  computed : {computed}");
        println!("  reference: {reference}");

        // Forensic 1: an independent commutator oracle reproduces the
        // computed flow, so the reference entry is not the Lax flow.
        let oracle = commutator_flow(*kind, *m);
        assert_eq!(
            &oracle, computed,
            "commutator oracle disagrees with flow(); that would be an implementation bug"
        );
        println!(
            "  forensic: the D^-1 coefficient of [(L^{t})+, L], computed directly from the \
             operator algebra, equals the computed flow exactly — the reference entry is not \
             the Lax flow."
        );

        let delta = reference.sub(computed);
        println!("  reference - computed = {delta}");

        // Forensic 2: the discrepancy lies in the 3-reduction ideal.
        match m {
            2 => {
                let (c, a) = match kind {
                    HierarchyKind::Bkp => (rat_int(10), p("2/3*u2_xx")),
                    HierarchyKind::Ckp => (rat_int(15), p("1/6*u2_xx")),
                    HierarchyKind::Kp => unreachable!(),
                };
                let residual = DiffPoly::var(4)
                    .add(&DiffPoly::var(2).mul(&DiffPoly::var(2)))
                    .sub(&a);
                assert_eq!(
                    delta,
                    residual.dx_n(3).scale(&c),
                    "t5 discrepancy does not factor through the 3-reduction residual"
                );
                println!(
                    "  forensic: reference - computed == {c} * (d/dx)^3 (u4 + u2^2 - ...), an \
                     x-derivative of the 3-reduction residual; the reference row was \
                     simplified modulo the 3-reduction ideal."
                );
            }
            3 => {
                let red = reduce(*kind, 1, 8).unwrap();
                let lhs = red.apply(reference).unwrap();
                let rhs = red.apply(computed).unwrap();
                assert_eq!(
                    lhs, rhs,
                    "t7 candidates do not collapse to the same reduced flow"
                );
                assert_eq!(
                    lhs,
                    reduced_flow(*kind, 1, 1, 3).unwrap(),
                    "reduced t7 flow mismatch"
                );
                println!(
                    "  forensic: imposing the 3-reduction sends both sides to the same \
                     reduced t7 flow, so the discrepancy again lies inside the 3-reduction \
                     ideal."
                );
            }
            _ => {}
        }
    }
    panic!(
        "criterion 03: the t5/t7 reference rows are not the unreduced Lax flows (they were \
         simplified modulo the 3-reduction ideal); see forensics above"
    );
}

// ---------------------------------------------------------------------------
// criterion 4 — 3-reduction bindings u4, u6, u8
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_three_reduction_bindings() {
    let t0 = Instant::now();
    // Chained forms: u6 is written in terms of u2 and u4, u8 in terms of
    // u2, u4, u6.  Substituting the chain into itself yields the canonical
    // u2-only bindings that `reduce` produces directly.
    let chains: [(HierarchyKind, &str, &str, &str); 2] = [
        (
            HierarchyKind::Bkp,
            "-u2^2 + 2/3*u2_xx",
            "-2*u2*u4 - 11/3*u2_x^2 - 1/3*u2^3 - 7/3*u2*u2_xx + 2/3*u4_xx - 1/3*u2_xxxx",
            "-2*u2*u6 - 7/3*u2*u4_xx + 9*u2*u2_x^2 - 1/3*u2^2*u2_xx - 32/3*u2_x*u4_x \
             - 10*u4*u2_xx + 7/3*u2_xx^2 + 2/3*u6_xx - 1/3*u4_xxxx + 1/9*u2_xxxxxx - u4^2 \
             - u2^2*u4",
        ),
        (
            HierarchyKind::Ckp,
            "-u2^2 + 1/6*u2_xx",
            "-2*u2*u4 - 17/12*u2_x^2 - 1/3*u2^3 - 4/3*u2*u2_xx + 2/3*u4_xx - 1/6*u2_xxxx",
            "-2*u2*u6 + 9/4*u2*u2_x^2 - 49/6*u2_x*u4_x + 2/3*u2_x*u2_xxx - u4^2 \
             - 7/3*u2*u4_xx - 1/3*u2*u2_xxxx - 4/3*u2^2*u2_xx - 8*u4*u2_xx + 17/12*u2_xx^2 \
             + 2/3*u6_xx - 1/3*u4_xxxx + 1/18*u2_xxxxxx - u2^2*u4",
        ),
    ];
    for (kind, c4, c6, c8) in &chains {
        let b4 = p(c4);
        let mut sub4 = BTreeMap::new();
        sub4.insert(4u32, b4.clone());
        let b6 = p(c6).substitute(&sub4).unwrap();
        let mut sub46 = sub4.clone();
        sub46.insert(6u32, b6.clone());
        let b8 = p(c8).substitute(&sub46).unwrap();

        let red = reduce(*kind, 1, 8).unwrap();
        for (idx, want) in [(4u32, &b4), (6, &b6), (8, &b8)] {
            assert_eq!(
                red.bindings().get(&idx).unwrap(),
                want,
                "criterion 04: {} u{idx} binding disagrees with the chained reference",
                kind.name()
            );
        }
    }
    report(4, "3-reduction bindings u4/u6/u8", t0);
}

// ---------------------------------------------------------------------------
// criterion 5 — reduced t7 flows
// ---------------------------------------------------------------------------

const REDUCED_T7_BKP: &str = "-7/9*u2*u2_xxxxx - 14/9*u2_x*u2_xxxx - 7/3*u2_xx*u2_xxx \
     - 14/3*u2_xxx*u2^2 - 28/3*u2^3*u2_x - 14*u2_x*u2*u2_xx - 7/3*u2_x^3 - 1/27*u2^(7)";

const REDUCED_T7_CKP: &str = "-35/6*u2_x^3 - 28/3*u2^3*u2_x - 14/3*u2^2*u2_xxx \
     - 14/3*u2_xx*u2_xxx - 21*u2_x*u2*u2_xx - 49/18*u2_x*u2_xxxx - 1/27*u2^(7) \
     - 7/9*u2*u2_xxxxx";

#[test]
fn criterion_05_reduced_t7_flows() {
    let t0 = Instant::now();
    for (kind, text) in [
        (HierarchyKind::Bkp, REDUCED_T7_BKP),
        (HierarchyKind::Ckp, REDUCED_T7_CKP),
    ] {
        assert_eq!(
            reduced_flow(kind, 1, 1, 3).unwrap(),
            p(text),
            "criterion 05: {} reduced t7 flow disagrees with the reference",
            kind.name()
        );
    }
    report(5, "reduced t7 flows", t0);
}

// ---------------------------------------------------------------------------
// criterion 6 — closed-form Phi(3) and hat-Phi(3), canonical text
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_closed_form_operators() {
    let t0 = Instant::now();
    let phi_expected: [(HierarchyKind, [&str; 4]); 2] = [
        (
            HierarchyKind::Bkp,
            [
                "1/3*D^3 + u2*D - u2_x - u2_xx*D^-1",
                "2/3*D^2 + 2*u2 + u2_x*D^-1",
                "-2/9*D^4 - 4/3*u2*D^2 - 2*u2_x*D - 2*u2^2 - (2*u2*u2_x - 1/3*u2_xxx)*D^-1",
                "-1/3*D^3 - u2*D - 3*u2_x - u2_xx*D^-1",
            ],
        ),
        (
            HierarchyKind::Ckp,
            [
                "1/3*D^3 + u2*D + 1/2*u2_x",
                "2/3*D^2 + 2*u2 + u2_x*D^-1",
                "-2/9*D^4 - 4/3*u2*D^2 - 2*u2_x*D - (2*u2^2 + u2_xx) - (2*u2*u2_x + 1/6*u2_xxx)*D^-1",
                "-1/3*D^3 - u2*D - 3/2*u2_x - 1/2*u2_xx*D^-1",
            ],
        ),
    ];
    for (kind, texts) in &phi_expected {
        let ctx = RecursionContext::new(*kind, 1).unwrap();
        let phi = kp_phi_operator(&ctx).unwrap();
        let mut idx = 0;
        for a in 1..=2 {
            for b in 1..=2 {
                let got = phi.at(a, b).to_string();
                assert_eq!(
                    got, texts[idx],
                    "criterion 06: {} Phi(3)[{a},{b}] canonical text mismatch",
                    kind.name()
                );
                idx += 1;
            }
        }
    }

    let hat_expected: [(HierarchyKind, &str); 2] = [
        (
            HierarchyKind::Bkp,
            "-1/27*D^6 - 2/3*u2*D^4 - u2_x*D^3 - (3*u2^2 + 11/9*u2_xx)*D^2 \
             - (7*u2*u2_x + 10/9*u2_xxx)*D - (16/3*u2*u2_xx + 4*u2^3 + 2*u2_x^2 + 5/9*u2_xxxx) \
             - (u2_x)*Dinv*(u2^2 + 2/3*u2_xx) \
             - (5/3*u2*u2_xxx + 5*u2^2*u2_x + 5/3*u2_x*u2_xx + 1/9*u2_xxxxx)*D^-1",
        ),
        (
            HierarchyKind::Ckp,
            "-1/27*D^6 - 2/3*u2*D^4 - 2*u2_x*D^3 - (3*u2^2 + 49/18*u2_xx)*D^2 \
             - (10*u2*u2_x + 35/18*u2_xxx)*D \
             - (41/6*u2*u2_xx + 4*u2^3 + 23/4*u2_x^2 + 13/18*u2_xxxx) \
             - (u2_x)*Dinv*(u2^2 + 1/6*u2_xx) \
             - (5/3*u2*u2_xxx + 5*u2^2*u2_x + 25/6*u2_x*u2_xx + 1/9*u2_xxxxx)*D^-1",
        ),
    ];
    for (kind, text) in &hat_expected {
        let ctx = RecursionContext::new(*kind, 1).unwrap();
        let hat = hat_phi_operator(&ctx).unwrap();
        assert_eq!(hat.rows(), 1);
        assert_eq!(hat.cols(), 1);
        let want: String = text.split_whitespace().collect::<Vec<_>>().join(" ");
        assert_eq!(
            hat.at(1, 1).to_string(),
            want,
            "criterion 06: {} hat-Phi(3) canonical text mismatch",
            kind.name()
        );
    }
    report(6, "closed-form Phi(3) and hat-Phi(3)", t0);
}

// ---------------------------------------------------------------------------
// criterion 7 — hat-Phi(3) acting on u2_x reproduces the reduced t7 flow
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_recursion_action_on_t1() {
    let t0 = Instant::now();
    for kind in KINDS {
        let ctx = RecursionContext::new(kind, 1).unwrap();
        let hat = hat_phi_operator(&ctx).unwrap();
        let image = hat
            .at(1, 1)
            .apply_to_poly(&DiffPoly::var_deriv(2, 1))
            .unwrap();
        assert_eq!(
            image,
            reduced_flow(kind, 1, 1, 3).unwrap(),
            "criterion 07: {} hat-Phi(3) u2_x != reduced t7 flow",
            kind.name()
        );
    }
    report(7, "hat-Phi(3) action on u2_x", t0);
}

// ---------------------------------------------------------------------------
// criterion 8 — scaling-transform targets (knowingly red)
// ---------------------------------------------------------------------------

const SCALED_TARGET_BKP: &str = "3*u2^(7) + 15*u2*u2_xxxxx + 189*u2_xxx^3 \
     + 1134*u2*u2_x*u2_xx + 126*u2_x*u2_xxxx + 756*u2^3*u2_x + 189*u2_xx*u2_xxx \
     + 126*u2^2*u2_xxx";

const SCALED_TARGET_CKP: &str = "u2^(7) + 14*u2*u2_xxxxx + 49*u2*u2_xxxx + 84*u2_xx*u2_xxx \
     + 56*u2^2*u2_xxx + 224/3*u2^3*u2_x + 256*u2*u2_x*u2_xx + 70*u2_x^3";

const SK7: &str = "u2^(7) + 7*u2*u2_xxxxx + 14*u2_x*u2_xxxx + 21*u2_xx*u2_xxx \
     + 14*u2^2*u2_xxx + 28/3*u2^3*u2_x + 42*u2*u2_x*u2_xx + 7*u2_x^3";

const KK7: &str = "u2^(7) + 14*u2*u2_xxxxx + 49*u2_x*u2_xxxx + 84*u2_xx*u2_xxx \
     + 56*u2^2*u2_xxx + 224/3*u2^3*u2_x + 252*u2*u2_x*u2_xx + 70*u2_x^3";

fn weight_split_string(q: &DiffPoly) -> String {
    q.split_by_weight()
        .iter()
        .map(|(w, part)| format!("weight {w}: {part}"))
        .collect::<Vec<_>>()
        .join("\n    ")
}

#[test]
fn criterion_08_scaling_transform_targets() {
    let t0 = Instant::now();
    let t_scale = rat_int(-1) / rat_int(27);
    let rt7_bkp = reduced_flow(HierarchyKind::Bkp, 1, 1, 3).unwrap();
    let rt7_ckp = reduced_flow(HierarchyKind::Ckp, 1, 1, 3).unwrap();

    // Stated parameters: u2 -> (1/3) u2 and t -> -27 t on the reduced t7
    // flows (t_scale is the reciprocal time factor).
    let got_bkp = scaling_transform(&rt7_bkp, &(rat_int(1) / rat_int(3)), &t_scale).unwrap();
    let got_ckp = scaling_transform(&rt7_ckp, &(rat_int(3) / rat_int(2)), &t_scale).unwrap();
    let want_bkp = p(SCALED_TARGET_BKP);
    let want_ckp = p(SCALED_TARGET_CKP);

    if got_bkp == want_bkp && got_ckp == want_ckp {
        report(8, "scaling-transform targets", t0);
        return;
    }

    println!("criterion 08 (scaling-transform targets): FAIL — both reference targets disagree");

    // Forensic 1 (both kinds): every scaling image of a weight-homogeneous
    // flow is weight homogeneous, but neither reference target is.
    for (kind, target, image) in [
        (HierarchyKind::Bkp, &want_bkp, &got_bkp),
        (HierarchyKind::Ckp, &want_ckp, &got_ckp),
    ] {
        println!("--- {} ---", kind.name());
        println!("  computed image under the stated parameters: {image}");
        println!("  reference target: {target}");
        let weights: Vec<i64> = target.split_by_weight().keys().copied().collect();
        println!(
            "  forensic: the reference target mixes weights {:?}; a rescaling u2 -> a*u2, \
             t -> b*t maps a weight-9 flow to a weight-9 flow, so no parameter choice can \
             reach it.  weight split:\n    {}",
            weights,
            weight_split_string(target)
        );
    }

    // Forensic 2 (bkp): the stated parameters reproduce the standard
    // seventh-order equation exactly; the reference target is instead close
    // to the raw reduced flow with t -> -81 t and no u2 rescaling.
    assert_eq!(
        got_bkp,
        p(SK7),
        "bkp image under the stated parameters should be the standard seventh-order flow"
    );
    let unscaled = scaling_transform(&rt7_bkp, &rat_int(1), &(rat_int(-1) / rat_int(81))).unwrap();
    println!(
        "  bkp: computed image equals the standard seventh-order flow; reference target minus \
         (reduced t7 with t -> -81 t, u2 unscaled) = {}",
        p(SCALED_TARGET_BKP).sub(&unscaled)
    );

    // Forensic 3 (ckp): with the reciprocal u2 factor 2/3 the image is the
    // standard seventh-order equation, and the reference target deviates
    // from it in exactly two terms.
    let best = scaling_transform(&rt7_ckp, &(rat_int(2) / rat_int(3)), &t_scale).unwrap();
    assert_eq!(
        best,
        p(KK7),
        "ckp image under u2 -> (2/3) u2 should be the standard seventh-order flow"
    );
    println!(
        "  ckp: with u2 -> (2/3) u2 (reciprocal of the stated factor) the image is the \
         standard seventh-order flow; reference target minus that image = {}",
        p(SCALED_TARGET_CKP).sub(&best)
    );

    panic!(
        "criterion 08: neither scaled reference target is reachable by scaling_transform — \
         both are weight inhomogeneous (see forensics above)"
    );
}

// ---------------------------------------------------------------------------
// criterion 9 — property suite
// ---------------------------------------------------------------------------

#[test]
fn criterion_09a_constraint_residual_vanishes() {
    let t0 = Instant::now();
    for kind in KINDS {
        for cutoff in 3..=8u32 {
            let r = constraint_residual(kind, cutoff).unwrap();
            let lo = 1 - cutoff as i64;
            let hi = r.max_deg().unwrap_or(lo);
            for d in lo..=hi {
                assert!(
                    r.coeff(d).is_zero(),
                    "criterion 09a: {} constraint residual nonzero at degree {d} (cutoff {cutoff})",
                    kind.name()
                );
            }
        }
    }
    report(9, "property (a): adjoint constraint residual", t0);
}

#[test]
fn criterion_09b_flow_weight_homogeneity() {
    let t0 = Instant::now();
    for kind in KINDS {
        for j in 1..=3u32 {
            for m in 0..=2u32 {
                let f = flow(kind, j, m, 2 * (j + m) + 1).unwrap();
                assert_eq!(
                    f.weight().unwrap(),
                    (2 * j + 2 * m + 1) as i64,
                    "criterion 09b: {} flow (j={j}, m={m}) is not weight homogeneous",
                    kind.name()
                );
            }
        }
        for m in 0..=3u32 {
            let f = reduced_flow(kind, 1, 1, m).unwrap();
            if (2 * m + 1) % 3 == 0 {
                // t_{2m+1} with 2m+1 divisible by 2n+1 is the trivial flow
                // under the (2n+1)-reduction: [(L^{2m+1})_+, L] = [L^{2m+1}, L] = 0.
                assert!(f.is_zero());
                continue;
            }
            assert_eq!(
                f.weight().unwrap(),
                (2 + 2 * m + 1) as i64,
                "criterion 09b: {} reduced flow (m={m}) is not weight homogeneous",
                kind.name()
            );
        }
    }
    report(9, "property (b): flow weight homogeneity", t0);
}

#[test]
fn criterion_09c_flow_commutativity_t3_t5() {
    let t0 = Instant::now();
    for kind in KINDS {
        let mut t3_flows = BTreeMap::new();
        let mut t5_flows = BTreeMap::new();
        for j in 1..=3u32 {
            t3_flows.insert(2 * j, flow(kind, j, 1, 2 * (j + 1) + 1).unwrap());
            t5_flows.insert(2 * j, flow(kind, j, 2, 2 * (j + 2) + 1).unwrap());
        }
        let u2_t3 = t3_flows[&2].clone();
        let u2_t5 = t5_flows[&2].clone();
        let bracket = u2_t5
            .evolve(&t3_flows)
            .unwrap()
            .sub(&u2_t3.evolve(&t5_flows).unwrap());
        assert!(
            bracket.is_zero(),
            "criterion 09c: {} [t3, t5] u2 = {bracket}",
            kind.name()
        );
    }
    report(9, "property (c): flow commutativity [t3, t5]", t0);
}

#[test]
fn criterion_09d_even_residual_checks() {
    let t0 = Instant::now();
    for kind in KINDS {
        for n in 1..=2u32 {
            for h in 1..=3u32 {
                let r = even_residual_check(kind, n, h).unwrap();
                assert!(
                    r.is_zero(),
                    "criterion 09d: {} even residual (n={n}, h={h}) = {r}",
                    kind.name()
                );
            }
        }
    }
    report(9, "property (d): even coefficient residuals", t0);
}

#[test]
fn criterion_09e_hat_phi_advances_reduced_flows() {
    let t0 = Instant::now();
    for kind in KINDS {
        let ctx = RecursionContext::new(kind, 1).unwrap();
        for m in [1u32, 2] {
            let seed = reduced_flow(kind, 1, 1, m).unwrap();
            let lifted = ctx.lift_flows(std::slice::from_ref(&seed)).unwrap();
            let advanced = phi_action(&ctx, &lifted, 2).unwrap();
            assert_eq!(
                advanced[0],
                reduced_flow(kind, 1, 1, m + 3).unwrap(),
                "criterion 09e: {} hat-Phi(3) on reduced t{} != reduced t{}",
                kind.name(),
                2 * m + 1,
                2 * m + 7
            );
        }
    }
    report(9, "property (e): hat-Phi(3) advances t3/t5 to t9/t11", t0);
}

#[test]
fn criterion_09f_hat_phi_squared_reaches_t13() {
    let t0 = Instant::now();
    for kind in KINDS {
        let ctx = RecursionContext::new(kind, 1).unwrap();
        let seed = DiffPoly::var_deriv(2, 1);
        let lifted = ctx.lift_flows(std::slice::from_ref(&seed)).unwrap();
        let advanced = phi_action(&ctx, &lifted, 4).unwrap();
        assert_eq!(
            advanced[0],
            reduced_flow(kind, 1, 1, 6).unwrap(),
            "criterion 09f: {} hat-Phi(3)^2 u2_x != reduced t13 flow",
            kind.name()
        );
    }
    report(9, "property (f): hat-Phi(3)^2 reaches the t13 flow", t0);
}

// ---------------------------------------------------------------------------
// criterion 10 — 5-reduction recursion action (slow)
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_five_reduction_recursion_action_slow() {
    let t0 = Instant::now();
    for kind in KINDS {
        let ctx = RecursionContext::new(kind, 2).unwrap();
        let free = [DiffPoly::var_deriv(2, 1), DiffPoly::var_deriv(4, 1)];
        let lifted = ctx.lift_flows(&free).unwrap();
        let advanced = phi_action(&ctx, &lifted, 2).unwrap();
        for (slot, j) in [(0usize, 1u32), (2, 2)] {
            assert_eq!(
                advanced[slot],
                reduced_flow(kind, 2, j, 5).unwrap(),
                "criterion 10: {} hat-Phi(5) t1 action, u{} component != reduced t11 flow",
                kind.name(),
                2 * j
            );
        }
    }
    report(10, "5-reduction recursion action t1 -> t11", t0);
}
