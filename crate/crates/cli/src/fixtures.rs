//! Golden-fixture keys and the `verify` runner.
//!
//! Design notes.  A fixture file is line-oriented data: one `key = value`
//! record per line, `#` comments and blank lines ignored.  The key encodes
//! the full derivation — `u2_t7@red3!scale(1/3,-1/27)[bkp]` reads as "the u2
//! flow at t7 under the 3-reduction, rescaled, in the BKP hierarchy" — so
//! every entry is recomputable from its key alone and the suite doubles as
//! machine-checkable errata for the reference tables it was copied from.
//! Values are canonical text (differential polynomials or closed operators);
//! comparisons parse the expected text and demand exact equality, with the
//! difference printed for polynomial mismatches so a single perturbed
//! coefficient shows up as a one-term diff.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use bckp::textform::{parse_operator, parse_poly};
use bckp::{
    eliminate_odd, flow, hat_phi_operator, kp_phi_operator, reduce, reduced_flow,
    scaling_transform, CalcError, DiffPoly, HierarchyKind, NonlocalPDO, Rational,
    RecursionContext,
};

use crate::emit::poly_from_json;

/// A parsed fixture key.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureKey {
    pub kind: HierarchyKind,
    pub body: KeyBody,
    /// Optional `!scale(u,t)` postfix, polynomial values only.
    pub scale: Option<(Rational, Rational)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KeyBody {
    /// `u7` — odd-variable elimination binding.
    Elim { odd: u32 },
    /// `u2_t5` — unreduced flow of `u_{2j}` at `t_{2m+1}`.
    Flow { j: u32, m: u32 },
    /// `u4@red3` — dependent-variable binding of the `(2n+1)`-reduction.
    Binding { n: u32, index: u32 },
    /// `u2_t7@red3` — reduced flow.
    ReducedFlow { n: u32, j: u32, m: u32 },
    /// `phi12@red3` — entry of the lifted recursion matrix Phi(2n+1).
    Phi { n: u32, a: usize, b: usize },
    /// `hatphi11@red3` — entry of the reduced recursion matrix.
    HatPhi { n: u32, a: usize, b: usize },
}

/// A recomputed fixture value.
pub enum FixtureValue {
    Poly(DiffPoly),
    Operator(NonlocalPDO),
}

fn parse_kind(s: &str) -> Result<HierarchyKind, String> {
    match s {
        "bkp" => Ok(HierarchyKind::Bkp),
        "ckp" => Ok(HierarchyKind::Ckp),
        "kp" => Ok(HierarchyKind::Kp),
        other => Err(format!("unknown hierarchy kind {other:?}")),
    }
}

fn parse_red(n_text: &str) -> Result<u32, String> {
    let v: u32 = n_text
        .parse()
        .map_err(|_| format!("bad reduction order {n_text:?}"))?;
    if v < 3 || v % 2 == 0 {
        return Err(format!("reduction order must be odd and >= 3, got {v}"));
    }
    Ok((v - 1) / 2)
}

/// Parse a fixture key such as `u2_t7@red3!scale(1/3,-1/27)[bkp]`.
pub fn parse_key(key: &str) -> Result<FixtureKey, String> {
    let inner = key
        .strip_suffix(']')
        .ok_or_else(|| format!("key {key:?} does not end with a [kind] tag"))?;
    let (mut body, kind_text) = inner
        .rsplit_once('[')
        .ok_or_else(|| format!("key {key:?} does not end with a [kind] tag"))?;
    let kind = parse_kind(kind_text)?;

    let mut scale = None;
    if let Some((head, args)) = body.split_once("!scale(") {
        let args = args
            .strip_suffix(')')
            .ok_or_else(|| format!("unterminated !scale(...) in {key:?}"))?;
        let (u_text, t_text) = args
            .split_once(',')
            .ok_or_else(|| format!("!scale needs two comma-separated rationals in {key:?}"))?;
        let u: Rational = u_text
            .parse()
            .map_err(|_| format!("bad scale factor {u_text:?} in {key:?}"))?;
        let t: Rational = t_text
            .parse()
            .map_err(|_| format!("bad scale factor {t_text:?} in {key:?}"))?;
        scale = Some((u, t));
        body = head;
    }

    let mut red = None;
    if let Some((head, n_text)) = body.split_once("@red") {
        red = Some(parse_red(n_text)?);
        body = head;
    }

    let body = parse_body(body, red).map_err(|e| format!("{e} in key {key:?}"))?;
    if scale.is_some() && matches!(body, KeyBody::Phi { .. } | KeyBody::HatPhi { .. }) {
        return Err(format!("!scale applies to polynomial values only, in {key:?}"));
    }
    Ok(FixtureKey { kind, body, scale })
}

fn parse_body(body: &str, red: Option<u32>) -> Result<KeyBody, String> {
    if let Some(digits) = body.strip_prefix("hatphi") {
        let (a, b) = parse_entry_digits(digits)?;
        let n = red.ok_or("hatphi entries need an @red context")?;
        return Ok(KeyBody::HatPhi { n, a, b });
    }
    if let Some(digits) = body.strip_prefix("phi") {
        let (a, b) = parse_entry_digits(digits)?;
        let n = red.ok_or("phi entries need an @red context")?;
        return Ok(KeyBody::Phi { n, a, b });
    }
    let rest = body
        .strip_prefix('u')
        .ok_or_else(|| format!("unrecognized key body {body:?}"))?;
    if let Some((idx_text, t_text)) = rest.split_once("_t") {
        let index: u32 = idx_text
            .parse()
            .map_err(|_| format!("bad variable index in {body:?}"))?;
        let t: u32 = t_text
            .parse()
            .map_err(|_| format!("bad time index in {body:?}"))?;
        if index % 2 != 0 || index == 0 || t % 2 == 0 {
            return Err(format!(
                "flows are indexed by even variables and odd times, got {body:?}"
            ));
        }
        let (j, m) = (index / 2, (t - 1) / 2);
        return Ok(match red {
            Some(n) => KeyBody::ReducedFlow { n, j, m },
            None => KeyBody::Flow { j, m },
        });
    }
    let index: u32 = rest
        .parse()
        .map_err(|_| format!("bad variable index in {body:?}"))?;
    match red {
        Some(n) => {
            if index % 2 != 0 || index < 2 * n + 2 {
                return Err(format!(
                    "reduction bindings cover even u_j with j >= {}, got {body:?}",
                    2 * n + 2
                ));
            }
            Ok(KeyBody::Binding { n, index })
        }
        None => {
            if index % 2 == 0 || index < 3 {
                return Err(format!(
                    "elimination bindings cover odd u_j with j >= 3, got {body:?}"
                ));
            }
            Ok(KeyBody::Elim { odd: index })
        }
    }
}

fn parse_entry_digits(digits: &str) -> Result<(usize, usize), String> {
    let chars: Vec<char> = digits.chars().collect();
    if chars.len() != 2 || !chars[0].is_ascii_digit() || !chars[1].is_ascii_digit() {
        return Err(format!("matrix entries are two digits, got {digits:?}"));
    }
    let a = chars[0] as usize - '0' as usize;
    let b = chars[1] as usize - '0' as usize;
    if a == 0 || b == 0 {
        return Err("matrix entries are 1-indexed".into());
    }
    Ok((a, b))
}

/// Recompute the value a fixture key denotes.
pub fn recompute(key: &FixtureKey) -> Result<FixtureValue, CalcError> {
    let value = match &key.body {
        KeyBody::Elim { odd } => {
            let table = eliminate_odd(key.kind, *odd)?;
            FixtureValue::Poly(table.bindings()[odd].clone())
        }
        KeyBody::Flow { j, m } => {
            FixtureValue::Poly(flow(key.kind, *j, *m, 2 * (j + m) + 1)?)
        }
        KeyBody::Binding { n, index } => {
            let red = reduce(key.kind, *n, *index)?;
            FixtureValue::Poly(red.bindings()[index].clone())
        }
        KeyBody::ReducedFlow { n, j, m } => {
            FixtureValue::Poly(reduced_flow(key.kind, *n, *j, *m)?)
        }
        KeyBody::Phi { n, a, b } => {
            let ctx = RecursionContext::new(key.kind, *n)?;
            let phi = kp_phi_operator(&ctx)?;
            check_entry(*a, *b, phi.rows(), phi.cols())?;
            FixtureValue::Operator(phi.at(*a, *b).clone())
        }
        KeyBody::HatPhi { n, a, b } => {
            let ctx = RecursionContext::new(key.kind, *n)?;
            let hat = hat_phi_operator(&ctx)?;
            check_entry(*a, *b, hat.rows(), hat.cols())?;
            FixtureValue::Operator(hat.at(*a, *b).clone())
        }
    };
    match (&key.scale, value) {
        (None, value) => Ok(value),
        (Some((u, t)), FixtureValue::Poly(p)) => {
            Ok(FixtureValue::Poly(scaling_transform(&p, u, t)?))
        }
        (Some(_), FixtureValue::Operator(_)) => Err(CalcError::BadIndex(
            "!scale applies to polynomial values only".into(),
        )),
    }
}

fn check_entry(a: usize, b: usize, rows: usize, cols: usize) -> Result<(), CalcError> {
    if a > rows || b > cols {
        return Err(CalcError::BadIndex(format!(
            "matrix entry ({a},{b}) out of range for a {rows}x{cols} operator matrix"
        )));
    }
    Ok(())
}

/// Outcome of checking one fixture record.
pub struct EntryReport {
    pub key: String,
    pub passed: bool,
    pub detail: String,
}

fn check_entry_line(key_text: &str, expected_text: &str) -> EntryReport {
    let fail = |detail: String| EntryReport {
        key: key_text.to_string(),
        passed: false,
        detail,
    };
    let key = match parse_key(key_text) {
        Ok(k) => k,
        Err(e) => return fail(format!("unparseable key: {e}")),
    };
    let computed = match recompute(&key) {
        Ok(v) => v,
        Err(e) => return fail(format!("recomputation failed: {e}")),
    };
    match computed {
        FixtureValue::Poly(got) => {
            let want = match parse_poly(expected_text) {
                Ok(p) => p,
                Err(e) => return fail(format!("unparseable expected value: {e}")),
            };
            if got == want {
                return EntryReport {
                    key: key_text.to_string(),
                    passed: true,
                    detail: String::new(),
                };
            }
            let mut detail = String::new();
            let _ = writeln!(detail, "  expected: {want}");
            let _ = writeln!(detail, "  computed: {got}");
            let _ = write!(detail, "  difference (expected - computed): {}", want.sub(&got));
            fail(detail)
        }
        FixtureValue::Operator(got) => {
            let want = match parse_operator(expected_text).map_err(|e| e.to_string()).and_then(
                |op| op.into_nonlocal().map_err(|e| e.to_string()),
            ) {
                Ok(op) => op,
                Err(e) => return fail(format!("unparseable expected operator: {e}")),
            };
            if got == want {
                return EntryReport {
                    key: key_text.to_string(),
                    passed: true,
                    detail: String::new(),
                };
            }
            let mut detail = String::new();
            let _ = writeln!(detail, "  expected: {want}");
            let _ = writeln!(detail, "  computed: {got}");
            let _ = write!(detail, "  difference (expected - computed): {}", want.sub(&got));
            fail(detail)
        }
    }
}

/// Verify every record in one fixture file, in file order.  `.jsonl` files
/// carry the JSON emit form (one object per line); everything else is the
/// `key = canonical text` form.
pub fn verify_file(path: &Path) -> Result<Vec<EntryReport>, String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let json_lines = path.extension().is_some_and(|ext| ext == "jsonl");
    let mut reports = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let place = || format!("{}:{}", path.display(), lineno + 1);
        if json_lines {
            reports.push(check_json_line(line, place));
            continue;
        }
        let Some((key_text, expected_text)) = line.split_once(" = ") else {
            reports.push(EntryReport {
                key: place(),
                passed: false,
                detail: "malformed record (expected `key = value`)".into(),
            });
            continue;
        };
        reports.push(check_entry_line(key_text.trim(), expected_text.trim()));
    }
    Ok(reports)
}

/// Check one JSON record: `{"lhs": key, "terms": [...]}` for polynomials or
/// `{"lhs": key, "operator": "..."}` for operators.
fn check_json_line(line: &str, place: impl Fn() -> String) -> EntryReport {
    let value: serde_json::Value = match line.parse() {
        Ok(v) => v,
        Err(e) => {
            return EntryReport {
                key: place(),
                passed: false,
                detail: format!("malformed JSON record: {e}"),
            }
        }
    };
    let Some(key_text) = value.get("lhs").and_then(serde_json::Value::as_str) else {
        return EntryReport {
            key: place(),
            passed: false,
            detail: "JSON record is missing an \"lhs\" string".into(),
        };
    };
    if let Some(terms) = value.get("terms") {
        let expected = match poly_from_json(terms) {
            Ok(p) => p,
            Err(e) => {
                return EntryReport {
                    key: key_text.to_string(),
                    passed: false,
                    detail: format!("bad \"terms\" payload: {e}"),
                }
            }
        };
        return check_entry_line(key_text, &expected.to_string());
    }
    if let Some(op_text) = value.get("operator").and_then(serde_json::Value::as_str) {
        return check_entry_line(key_text, op_text);
    }
    EntryReport {
        key: key_text.to_string(),
        passed: false,
        detail: "JSON record needs a \"terms\" or \"operator\" payload".into(),
    }
}

/// Verify a fixture file, or every `*.txt` file under a directory (sorted by
/// name so the report order is stable).
pub fn verify_path(path: &Path) -> Result<Vec<EntryReport>, String> {
    if path.is_dir() {
        let mut files: Vec<_> = fs::read_dir(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "txt" || ext == "jsonl"))
            .collect();
        files.sort();
        let mut reports = Vec::new();
        for file in files {
            reports.extend(verify_file(&file)?);
        }
        Ok(reports)
    } else {
        verify_file(path)
    }
}
