//! Output rendering: canonical text, LaTeX, and the JSON interchange form.
//!
//! Design notes.  Text and JSON are read/write pairs — whatever this module
//! emits, [`poly_from_json`] or the core parsers take back bit-exactly.
//! LaTeX is emit-only and mirrors the subscript conventions used in the
//! surrounding literature (`u_{2,xx}`) so outputs can be eyeballed against
//! typeset equations.  JSON objects are rendered through `serde_json`'s
//! default (sorted-key) maps, which keeps every format byte-deterministic.

use bckp::textform::{latex_nonlocal, latex_poly};
use bckp::{DiffPoly, NonlocalPDO, Rational};
use serde_json::{json, Value};

/// Output format selected by `--format`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Latex,
    Json,
}

/// A rendered result value: either a differential polynomial or a closed
/// operator.
pub enum Rendered {
    Poly(DiffPoly),
    Operator(NonlocalPDO),
}

/// One `lhs = value` output line in the requested format (JSON lines carry
/// the lhs inside the object instead).
pub fn render_line(lhs: &str, value: &Rendered, format: Format) -> String {
    match (format, value) {
        (Format::Text, Rendered::Poly(p)) => format!("{lhs} = {p}"),
        (Format::Text, Rendered::Operator(op)) => format!("{lhs} = {op}"),
        (Format::Latex, Rendered::Poly(p)) => format!("{lhs} = {}", latex_poly(p)),
        (Format::Latex, Rendered::Operator(op)) => format!("{lhs} = {}", latex_nonlocal(op)),
        (Format::Json, Rendered::Poly(p)) => {
            json!({ "lhs": lhs, "terms": poly_to_json(p) }).to_string()
        }
        (Format::Json, Rendered::Operator(op)) => {
            json!({ "lhs": lhs, "operator": op.to_string() }).to_string()
        }
    }
}

/// The interchange form: a list of `{coeff, factors}` records with exact
/// rational coefficients rendered as `num/den` strings.
pub fn poly_to_json(p: &DiffPoly) -> Value {
    let mut terms = Vec::new();
    for (mono, coeff) in p.terms() {
        let factors: Vec<Value> = mono
            .factors()
            .iter()
            .map(|(v, e)| json!({ "var": v.index, "deriv": v.order, "exp": e }))
            .collect();
        terms.push(json!({ "coeff": coeff.to_string(), "factors": factors }));
    }
    Value::Array(terms)
}

/// Inverse of [`poly_to_json`].  Returns a message describing the first
/// malformed record on failure.
pub fn poly_from_json(v: &Value) -> Result<DiffPoly, String> {
    let records = v.as_array().ok_or("expected a JSON array of terms")?;
    let mut out = DiffPoly::zero();
    for rec in records {
        let coeff_text = rec
            .get("coeff")
            .and_then(Value::as_str)
            .ok_or("term record is missing a \"coeff\" string")?;
        let coeff: Rational = coeff_text
            .parse()
            .map_err(|e| format!("bad coefficient {coeff_text:?}: {e}"))?;
        let mut term = DiffPoly::constant(coeff);
        let factors = rec
            .get("factors")
            .and_then(Value::as_array)
            .ok_or("term record is missing a \"factors\" array")?;
        for f in factors {
            let var = f.get("var").and_then(Value::as_u64).ok_or("factor is missing \"var\"")?;
            let deriv = f
                .get("deriv")
                .and_then(Value::as_u64)
                .ok_or("factor is missing \"deriv\"")?;
            let exp = f.get("exp").and_then(Value::as_u64).ok_or("factor is missing \"exp\"")?;
            let base = DiffPoly::var_deriv(var as u32, deriv as u32);
            for _ in 0..exp {
                term = term.mul(&base);
            }
        }
        out = out.add(&term);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use bckp::textform::parse_poly;

    #[test]
    fn json_roundtrips_polynomials() {
        for text in [
            "u2_x",
            "6*u2*u2_x + 3*u4_x - 1/2*u2_xxx",
            "17/8*u2^(7) - 21/2*u4_xxxxx + 35/4*u6_xxx - 7/2*u8_x",
            "-u2^2 + 2/3*u2_xx",
        ] {
            let p = parse_poly(text).unwrap();
            let v = poly_to_json(&p);
            assert_eq!(poly_from_json(&v).unwrap(), p, "roundtrip failed for {text}");
        }
    }

    #[test]
    fn json_lines_carry_the_lhs() {
        let p = parse_poly("-u2_x").unwrap();
        let line = render_line("u3", &Rendered::Poly(p), Format::Json);
        let v: Value = line.parse().unwrap();
        assert_eq!(v.get("lhs").and_then(Value::as_str), Some("u3"));
        assert!(v.get("terms").is_some());
    }

    #[test]
    fn latex_uses_comma_subscripts() {
        let p = parse_poly("-u2_x").unwrap();
        assert_eq!(
            render_line("u3", &Rendered::Poly(p), Format::Latex),
            "u3 = -u_{2,x}"
        );
    }
}
