//! Canonical text form, LaTeX emission, and parsing.
//!
//! The text form is deterministic and round-trips: terms appear in canonical
//! order, coefficients print as `num/den` with unit denominators omitted,
//! derivatives print as `u2_xxx` up to order six and `u2^(7)` beyond, powers
//! as `u2^2`, products joined by `*`.  Operators print their `coeff*D^k`
//! terms by decreasing degree with integral tails `(P)*Dinv*(Q)` at the end;
//! a canonical tail whose right factor is `1` prints as a plain `D^-1` term.
//! The parsers accept any term order and both derivative notations at every
//! order, so hand-written expressions can be pasted in directly.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed};

use crate::diffpoly::{abs_parts, DiffPoly, Monomial, Rational, VarDeriv};
use crate::error::{CalcError, CalcResult};
use crate::pdo::{LaurentPDO, NonlocalPDO};

/// Where and why a parse failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub msg: String,
    pub pos: usize,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at byte {}: {}", self.pos, self.msg)
    }
}

impl std::error::Error for ParseError {}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

fn rational_str(r: &Rational) -> String {
    format!("{r}")
}

fn factor_str(v: &VarDeriv, exp: u32) -> String {
    let mut s = format!("u{}", v.index);
    match v.order {
        0 => {}
        1..=6 => {
            s.push('_');
            for _ in 0..v.order {
                s.push('x');
            }
        }
        _ => s.push_str(&format!("^({})", v.order)),
    }
    if exp >= 2 {
        s.push_str(&format!("^{exp}"));
    }
    s
}

/// One term without its sign: `(coefficient magnitude, monomial)` plus an
/// optional operator suffix such as `D^3`.
fn term_str(abs: &Rational, m: &Monomial, suffix: Option<&str>) -> String {
    let mut pieces: Vec<String> = Vec::new();
    let coeff_needed = !abs.is_one() || (m.is_one() && suffix.is_none());
    if coeff_needed {
        pieces.push(rational_str(abs));
    }
    for (v, e) in m.factors() {
        pieces.push(factor_str(v, *e));
    }
    if let Some(sfx) = suffix {
        pieces.push(sfx.to_string());
    }
    pieces.join("*")
}

impl fmt::Display for DiffPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in self.terms() {
            let (abs, neg) = abs_parts(c);
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            write!(f, "{}", term_str(&abs, m, None))?;
        }
        Ok(())
    }
}

/// Negate-if-needed wrapper so multi-term coefficients print as
/// `- (poly)*D^k` when their leading term is negative.
fn signed_poly_piece(p: &DiffPoly, suffix: Option<&str>) -> (bool, String) {
    if p.num_terms() == 1 {
        let (m, c) = p.terms().next().unwrap();
        let (abs, neg) = abs_parts(c);
        (neg, term_str(&abs, m, suffix))
    } else {
        let lead_neg = p
            .terms()
            .next()
            .map(|(_, c)| c.is_negative())
            .unwrap_or(false);
        let shown = if lead_neg { p.neg() } else { p.clone() };
        let mut s = format!("({shown})");
        if let Some(sfx) = suffix {
            s.push('*');
            s.push_str(sfx);
        }
        (lead_neg, s)
    }
}

fn degree_suffix(d: i64) -> Option<String> {
    match d {
        0 => None,
        1 => Some("D".to_string()),
        _ => Some(format!("D^{d}")),
    }
}

fn join_pieces(pieces: Vec<(bool, String)>) -> String {
    if pieces.is_empty() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (i, (neg, s)) in pieces.iter().enumerate() {
        if i == 0 {
            if *neg {
                out.push('-');
            }
        } else if *neg {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        out.push_str(s);
    }
    out
}

impl fmt::Display for LaurentPDO {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut pieces = Vec::new();
        for (d, p) in self.iter_desc() {
            let sfx = degree_suffix(d);
            pieces.push(signed_poly_piece(p, sfx.as_deref()));
        }
        write!(f, "{}", join_pieces(pieces))
    }
}

impl fmt::Display for NonlocalPDO {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut pieces = Vec::new();
        for (d, p) in self.local().iter_desc() {
            let sfx = degree_suffix(d);
            pieces.push(signed_poly_piece(p, sfx.as_deref()));
        }
        // Canonical tails: the `Q = 1` row prints as a D^-1 term, the rest
        // keep their explicit Dinv form.
        for (pt, qt) in self.tails() {
            if qt == &DiffPoly::one() {
                pieces.push(signed_poly_piece(pt, Some("D^-1")));
            } else {
                let (neg, pstr) = signed_poly_piece(pt, None);
                let body = if pstr.starts_with('(') {
                    format!("{pstr}*Dinv*({qt})")
                } else {
                    format!("({pstr})*Dinv*({qt})")
                };
                pieces.push((neg, body));
            }
        }
        write!(f, "{}", join_pieces(pieces))
    }
}

// ---------------------------------------------------------------------------
// LaTeX
// ---------------------------------------------------------------------------

fn latex_rational(r: &Rational) -> String {
    if r.denom() == &BigInt::one() {
        format!("{}", r.numer())
    } else {
        format!("\\frac{{{}}}{{{}}}", r.numer(), r.denom())
    }
}

fn latex_factor(v: &VarDeriv, exp: u32) -> String {
    let base = match v.order {
        0 => format!("u_{{{}}}", v.index),
        1..=6 => {
            let xs: String = std::iter::repeat('x').take(v.order as usize).collect();
            format!("u_{{{},{}}}", v.index, xs)
        }
        _ => format!("u_{{{}}}^{{({})}}", v.index, v.order),
    };
    if exp < 2 {
        base
    } else if v.order >= 7 {
        format!("\\left({base}\\right)^{{{exp}}}")
    } else {
        format!("{base}^{{{exp}}}")
    }
}

/// LaTeX form of a polynomial, mirroring the subscript conventions of the
/// surrounding literature (`u_{2,xx}`, `\frac{2}{3}`).
pub fn latex_poly(p: &DiffPoly) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    let mut out = String::new();
    let mut first = true;
    for (m, c) in p.terms() {
        let (abs, neg) = abs_parts(c);
        if first {
            if neg {
                out.push('-');
            }
            first = false;
        } else if neg {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        if !abs.is_one() || m.is_one() {
            out.push_str(&latex_rational(&abs));
        }
        for (v, e) in m.factors() {
            out.push_str(&latex_factor(v, *e));
        }
    }
    out
}

fn latex_op_pieces(pieces: &mut Vec<(bool, String)>, d: i64, p: &DiffPoly) {
    let sfx = match d {
        0 => String::new(),
        1 => "\\partial".to_string(),
        _ => format!("\\partial^{{{d}}}"),
    };
    let (neg, body) = if p.num_terms() == 1 {
        let (m, c) = p.terms().next().unwrap();
        let (abs, neg) = abs_parts(c);
        let mut s = String::new();
        if !abs.is_one() || (m.is_one() && sfx.is_empty()) {
            s.push_str(&latex_rational(&abs));
        }
        for (v, e) in m.factors() {
            s.push_str(&latex_factor(v, *e));
        }
        s.push_str(&sfx);
        (neg, s)
    } else {
        let lead_neg = p.terms().next().map(|(_, c)| c.is_negative()).unwrap_or(false);
        let shown = if lead_neg { p.neg() } else { p.clone() };
        (lead_neg, format!("\\left({}\\right){}", latex_poly(&shown), sfx))
    };
    pieces.push((neg, body));
}

/// LaTeX form of a closed-form operator.
pub fn latex_nonlocal(op: &NonlocalPDO) -> String {
    let mut pieces = Vec::new();
    for (d, p) in op.local().iter_desc() {
        latex_op_pieces(&mut pieces, d, p);
    }
    for (pt, qt) in op.tails() {
        if qt == &DiffPoly::one() {
            latex_op_pieces(&mut pieces, -1, pt);
        } else {
            let (neg, shown) = if pt
                .terms()
                .next()
                .map(|(_, c)| c.is_negative())
                .unwrap_or(false)
            {
                (true, pt.neg())
            } else {
                (false, pt.clone())
            };
            let body = if shown.num_terms() == 1 {
                latex_poly(&shown)
            } else {
                format!("\\left({}\\right)", latex_poly(&shown))
            };
            pieces.push((
                neg,
                format!("{body}\\partial^{{-1}}\\left({}\\right)", latex_poly(qt)),
            ));
        }
    }
    let rendered: Vec<(bool, String)> = pieces;
    let mut out = String::new();
    for (i, (neg, s)) in rendered.iter().enumerate() {
        if i == 0 {
            if *neg {
                out.push('-');
            }
        } else if *neg {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        out.push_str(s);
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

/// LaTeX form of a Laurent operator (known part only).
pub fn latex_laurent(op: &LaurentPDO) -> String {
    let mut pieces = Vec::new();
    for (d, p) in op.iter_desc() {
        latex_op_pieces(&mut pieces, d, p);
    }
    let mut out = String::new();
    for (i, (neg, s)) in pieces.iter().enumerate() {
        if i == 0 {
            if *neg {
                out.push('-');
            }
        } else if *neg {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        out.push_str(s);
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

struct Cursor<'a> {
    s: &'a [u8],
    i: usize,
}

impl<'a> Cursor<'a> {
    fn new(s: &'a str) -> Self {
        Cursor { s: s.as_bytes(), i: 0 }
    }

    fn skip_ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.i).copied()
    }

    fn peek_at(&self, off: usize) -> Option<u8> {
        self.s.get(self.i + off).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek();
        if c.is_some() {
            self.i += 1;
        }
        c
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{}'", c as char)))
        }
    }

    fn err(&self, msg: String) -> ParseError {
        ParseError { msg, pos: self.i }
    }

    fn parse_uint(&mut self) -> Result<u64, ParseError> {
        let start = self.i;
        while self.peek().map(|c| c.is_ascii_digit()).unwrap_or(false) {
            self.i += 1;
        }
        if self.i == start {
            return Err(self.err("expected a number".into()));
        }
        std::str::from_utf8(&self.s[start..self.i])
            .unwrap()
            .parse::<u64>()
            .map_err(|_| self.err("number too large".into()))
    }

    fn parse_int(&mut self) -> Result<i64, ParseError> {
        let neg = self.eat(b'-');
        let n = self.parse_uint()? as i64;
        Ok(if neg { -n } else { n })
    }

    /// `num` or `num/den` (no sign).
    fn parse_rational(&mut self) -> Result<Rational, ParseError> {
        let n = self.parse_uint()?;
        let num = BigInt::from(n);
        if self.eat(b'/') {
            let d = self.parse_uint()?;
            if d == 0 {
                return Err(self.err("zero denominator".into()));
            }
            Ok(Rational::new(num, BigInt::from(d)))
        } else {
            Ok(Rational::from_integer(num))
        }
    }

    /// `u<j>` with optional derivative and exponent suffixes.  Both
    /// notations are accepted at every order (`u2_xxxxx` and `u2^(5)`).
    fn parse_factor(&mut self) -> Result<(VarDeriv, u32), ParseError> {
        self.expect(b'u')?;
        let index = self.parse_uint()? as u32;
        if index < 2 {
            return Err(self.err(format!("u{index} is not a ring variable")));
        }
        let mut order: u32 = 0;
        let mut had_underscore = false;
        if self.eat(b'_') {
            had_underscore = true;
            while self.peek() == Some(b'x') {
                self.i += 1;
                order += 1;
            }
            if order == 0 {
                return Err(self.err("expected 'x' after '_'".into()));
            }
        }
        let mut exp: u32 = 1;
        if self.peek() == Some(b'^') {
            if self.peek_at(1) == Some(b'(') {
                if had_underscore {
                    return Err(self.err("two derivative markers on one factor".into()));
                }
                self.i += 2;
                order = self.parse_uint()? as u32;
                self.expect(b')')?;
                if self.peek() == Some(b'^') {
                    self.i += 1;
                    exp = self.parse_uint()? as u32;
                }
            } else {
                self.i += 1;
                exp = self.parse_uint()? as u32;
            }
        }
        if exp == 0 {
            return Err(self.err("exponent must be at least 1".into()));
        }
        Ok((VarDeriv::new(index, order), exp))
    }

    /// A term without its sign: `coeff`, `factors`, or `coeff*factors`.
    fn parse_term(&mut self) -> Result<(Rational, Monomial), ParseError> {
        let mut coeff = Rational::one();
        let mut factors: Vec<(VarDeriv, u32)> = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some(c) if c.is_ascii_digit() => {
                    coeff *= self.parse_rational()?;
                }
                Some(b'u') => {
                    factors.push(self.parse_factor()?);
                }
                _ => return Err(self.err("expected a coefficient or a variable".into())),
            }
            self.skip_ws();
            if !self.eat(b'*') {
                break;
            }
        }
        Ok((coeff, Monomial::from_factors(factors)))
    }
}

/// Parse a differential polynomial in the canonical text form (any term
/// order, both derivative notations).
pub fn parse_poly(input: &str) -> Result<DiffPoly, ParseError> {
    let mut cur = Cursor::new(input);
    cur.skip_ws();
    if cur.peek().is_none() {
        return Err(cur.err("empty input".into()));
    }
    let mut out = DiffPoly::zero();
    let mut sign_neg = cur.eat(b'-');
    if !sign_neg {
        cur.eat(b'+');
    }
    loop {
        cur.skip_ws();
        let (c, m) = cur.parse_term()?;
        let c = if sign_neg { -c } else { c };
        out = out.add(&DiffPoly::from_monomial(m, c));
        cur.skip_ws();
        match cur.peek() {
            None => break,
            Some(b'+') => {
                cur.bump();
                sign_neg = false;
            }
            Some(b'-') => {
                cur.bump();
                sign_neg = true;
            }
            Some(c) => {
                return Err(cur.err(format!("unexpected '{}'", c as char)));
            }
        }
    }
    Ok(out)
}

/// A standalone signed rational such as `-1/27` (CLI scale arguments).
pub fn parse_rational(input: &str) -> Result<Rational, ParseError> {
    let mut cur = Cursor::new(input);
    cur.skip_ws();
    let neg = cur.eat(b'-');
    let r = cur.parse_rational()?;
    cur.skip_ws();
    if cur.peek().is_some() {
        return Err(cur.err("trailing input after number".into()));
    }
    Ok(if neg { -r } else { r })
}

/// Parsed operator text before it commits to a representation.
#[derive(Debug, Clone, Default)]
pub struct ParsedOp {
    pub coeffs: BTreeMap<i64, DiffPoly>,
    pub tails: Vec<(DiffPoly, DiffPoly)>,
}

impl ParsedOp {
    /// View as a Laurent operator (no explicit tails allowed).
    pub fn into_laurent(self, min_deg: Option<i64>) -> CalcResult<LaurentPDO> {
        if !self.tails.is_empty() {
            return Err(CalcError::TooNonlocal(
                "operator text contains Dinv tails; not a Laurent series".into(),
            ));
        }
        Ok(LaurentPDO::from_coeffs(self.coeffs, min_deg))
    }

    /// View as a closed-form operator; `D^-1` terms become tails.
    pub fn into_nonlocal(self) -> CalcResult<NonlocalPDO> {
        let local = LaurentPDO::from_coeffs(self.coeffs, None);
        let mut out = NonlocalPDO::from_local(&local)?;
        if !self.tails.is_empty() {
            out = out.add(&NonlocalPDO::from_parts(LaurentPDO::zero(), self.tails));
        }
        Ok(out)
    }
}

/// Parse operator text: signed chunks of `coeff*D^k` terms, parenthesized
/// coefficient polynomials, and `(P)*Dinv*(Q)` tails.
pub fn parse_operator(input: &str) -> Result<ParsedOp, ParseError> {
    let mut cur = Cursor::new(input);
    let mut op = ParsedOp::default();
    cur.skip_ws();
    if cur.peek().is_none() {
        return Err(cur.err("empty input".into()));
    }
    // Sole "0" is the zero operator.
    if cur.peek() == Some(b'0') && {
        let mut probe = cur.i + 1;
        while probe < cur.s.len() && cur.s[probe].is_ascii_whitespace() {
            probe += 1;
        }
        probe == cur.s.len()
    } {
        return Ok(op);
    }
    let mut sign_neg = cur.eat(b'-');
    if !sign_neg {
        cur.eat(b'+');
    }
    loop {
        cur.skip_ws();
        // One chunk: '*'-joined atoms.
        let mut poly_part = DiffPoly::one();
        let mut degree: Option<i64> = None;
        let mut dinv_seen = false;
        let mut left: Option<DiffPoly> = None;
        loop {
            cur.skip_ws();
            match cur.peek() {
                Some(b'(') => {
                    cur.bump();
                    let start = cur.i;
                    let mut depth = 1;
                    while depth > 0 {
                        match cur.bump() {
                            Some(b'(') => depth += 1,
                            Some(b')') => depth -= 1,
                            Some(_) => {}
                            None => return Err(cur.err("unbalanced '('".into())),
                        }
                    }
                    let inner = std::str::from_utf8(&cur.s[start..cur.i - 1]).unwrap();
                    let p = parse_poly(inner).map_err(|e| ParseError {
                        msg: e.msg,
                        pos: start + e.pos,
                    })?;
                    poly_part = poly_part.mul(&p);
                }
                Some(b'D') => {
                    // "D", "D^k", or "Dinv".
                    if cur.peek_at(1) == Some(b'i') {
                        if !cur.s[cur.i..].starts_with(b"Dinv") {
                            return Err(cur.err("expected 'Dinv'".into()));
                        }
                        cur.i += 4;
                        if dinv_seen {
                            return Err(cur.err("two Dinv markers in one term".into()));
                        }
                        dinv_seen = true;
                        left = Some(poly_part);
                        poly_part = DiffPoly::one();
                    } else {
                        cur.bump();
                        let d = if cur.eat(b'^') { cur.parse_int()? } else { 1 };
                        if degree.is_some() {
                            return Err(cur.err("two D markers in one term".into()));
                        }
                        degree = Some(d);
                    }
                }
                Some(c) if c.is_ascii_digit() => {
                    let r = cur.parse_rational()?;
                    poly_part = poly_part.scale(&r);
                }
                Some(b'u') => {
                    let (v, e) = cur.parse_factor()?;
                    let f = DiffPoly::from_monomial(
                        Monomial::from_factors([(v, e)]),
                        Rational::one(),
                    );
                    poly_part = poly_part.mul(&f);
                }
                _ => return Err(cur.err("expected an operator term".into())),
            }
            cur.skip_ws();
            if !cur.eat(b'*') {
                break;
            }
        }
        let signed = |p: DiffPoly| if sign_neg { p.neg() } else { p };
        if dinv_seen {
            if degree.is_some() {
                return Err(cur.err("a term cannot carry both D^k and Dinv".into()));
            }
            op.tails.push((signed(left.unwrap()), poly_part));
        } else {
            let d = degree.unwrap_or(0);
            let p = signed(poly_part);
            let e = op.coeffs.entry(d).or_insert_with(DiffPoly::zero);
            *e = e.add(&p);
            if e.is_zero() {
                op.coeffs.remove(&d);
            }
        }
        cur.skip_ws();
        match cur.peek() {
            None => break,
            Some(b'+') => {
                cur.bump();
                sign_neg = false;
            }
            Some(b'-') => {
                cur.bump();
                sign_neg = true;
            }
            Some(c) => return Err(cur.err(format!("unexpected '{}'", c as char))),
        }
    }
    Ok(op)
}
