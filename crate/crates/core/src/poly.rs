//! Multivariate polynomials over named parameters with exact rational
//! coefficients, kept in canonical form.
//!
//! Canonical form means: monomials are unique, sorted by graded
//! lexicographic order (leading term first), and no zero coefficient is
//! stored. Two labels are "identical" exactly when their canonical forms are
//! equal, so `PartialEq`/`Hash` on [`Polynomial`] decide label equality.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("parameter `{0}` is not assigned in the valuation")]
    MissingParam(String),
}

/// Assignment of real values to parameter names.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Valuation {
    map: BTreeMap<String, f64>,
}

impl Valuation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        Self {
            map: pairs.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }

    pub fn set(&mut self, name: impl Into<String>, value: f64) {
        self.map.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.map.get(name).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.map.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Exact rational view of the assignment (every f64 is a rational).
    pub fn to_exact(&self) -> BTreeMap<String, BigRational> {
        self.map
            .iter()
            .map(|(k, v)| {
                let r = BigRational::from_float(*v)
                    .unwrap_or_else(|| panic!("valuation for `{k}` is not finite"));
                (k.clone(), r)
            })
            .collect()
    }
}

/// A monomial: variables with positive integer exponents, sorted by name.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    vars: Vec<(String, u32)>,
}

impl Monomial {
    pub fn one() -> Self {
        Monomial { vars: Vec::new() }
    }

    pub fn var(name: impl Into<String>) -> Self {
        Monomial {
            vars: vec![(name.into(), 1)],
        }
    }

    pub fn degree(&self) -> u64 {
        self.vars.iter().map(|(_, e)| *e as u64).sum()
    }

    pub fn is_one(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn vars(&self) -> &[(String, u32)] {
        &self.vars
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut out: BTreeMap<&str, u32> = BTreeMap::new();
        for (v, e) in self.vars.iter().chain(other.vars.iter()) {
            *out.entry(v.as_str()).or_insert(0) += *e;
        }
        Monomial {
            vars: out.into_iter().map(|(v, e)| (v.to_string(), e)).collect(),
        }
    }
}

impl Ord for Monomial {
    /// Graded lexicographic order with variables ordered by name: higher
    /// total degree first, ties broken by the first variable (in name
    /// order) whose exponents differ. This fixes the serialized form.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        let mut i = 0;
        let mut j = 0;
        while i < self.vars.len() || j < other.vars.len() {
            let (self_exp, other_exp, name_ord) = match (self.vars.get(i), other.vars.get(j)) {
                (Some((a, ea)), Some((b, eb))) => match a.cmp(b) {
                    Ordering::Equal => (*ea, *eb, Ordering::Equal),
                    Ordering::Less => (*ea, 0, Ordering::Less),
                    Ordering::Greater => (0, *eb, Ordering::Greater),
                },
                (Some((_, ea)), None) => (*ea, 0, Ordering::Less),
                (None, Some((_, eb))) => (0, *eb, Ordering::Greater),
                (None, None) => break,
            };
            match self_exp.cmp(&other_exp) {
                Ordering::Equal => {}
                ord => return ord,
            }
            match name_ord {
                Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// A polynomial in canonical form.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Polynomial {
    /// Sorted by monomial order, leading term first; no zero coefficients.
    terms: Vec<(Monomial, BigRational)>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial { terms: Vec::new() }
    }

    pub fn constant(c: BigRational) -> Self {
        if c.is_zero() {
            Polynomial::zero()
        } else {
            Polynomial {
                terms: vec![(Monomial::one(), c)],
            }
        }
    }

    pub fn from_int(n: i64) -> Self {
        Polynomial::constant(BigRational::from_integer(BigInt::from(n)))
    }

    /// n/d as a polynomial constant.
    pub fn from_ratio(n: i64, d: i64) -> Self {
        assert!(d != 0, "zero denominator");
        Polynomial::constant(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn var(name: impl Into<String>) -> Self {
        Polynomial {
            terms: vec![(Monomial::var(name), BigRational::one())],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty() || (self.terms.len() == 1 && self.terms[0].0.is_one())
    }

    /// The constant value if the polynomial has no variables.
    pub fn constant_value(&self) -> Option<BigRational> {
        if self.terms.is_empty() {
            Some(BigRational::zero())
        } else if self.is_constant() {
            Some(self.terms[0].1.clone())
        } else {
            None
        }
    }

    pub fn terms(&self) -> &[(Monomial, BigRational)] {
        &self.terms
    }

    pub fn degree(&self) -> u64 {
        self.terms.iter().map(|(m, _)| m.degree()).max().unwrap_or(0)
    }

    /// Parameter names occurring in the polynomial, sorted, deduplicated.
    pub fn params(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .terms
            .iter()
            .flat_map(|(m, _)| m.vars.iter().map(|(v, _)| v.clone()))
            .collect();
        out.sort();
        out.dedup();
        out
    }

    fn from_terms(terms: Vec<(Monomial, BigRational)>) -> Self {
        let mut map: BTreeMap<Monomial, BigRational> = BTreeMap::new();
        for (m, c) in terms {
            let entry = map.entry(m).or_insert_with(BigRational::zero);
            *entry += c;
        }
        let mut terms: Vec<_> = map.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        terms.sort_by(|a, b| b.0.cmp(&a.0));
        Polynomial { terms }
    }

    pub fn neg(&self) -> Polynomial {
        Polynomial {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), -c.clone()))
                .collect(),
        }
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        Polynomial::from_terms(
            self.terms
                .iter()
                .chain(other.terms.iter())
                .cloned()
                .collect(),
        )
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                terms.push((m1.mul(m2), c1 * c2));
            }
        }
        Polynomial::from_terms(terms)
    }

    pub fn scale(&self, c: &BigRational) -> Polynomial {
        self.mul(&Polynomial::constant(c.clone()))
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        let mut out = Polynomial::from_int(1);
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Evaluate at a valuation, converting to floating point at the boundary.
    pub fn eval(&self, v: &Valuation) -> Result<f64, PolyError> {
        let mut sum = 0.0;
        for (m, c) in &self.terms {
            let mut prod = c.to_f64().expect("rational representable as f64");
            for (name, e) in &m.vars {
                let x = v
                    .get(name)
                    .ok_or_else(|| PolyError::MissingParam(name.clone()))?;
                prod *= x.powi(*e as i32);
            }
            sum += prod;
        }
        Ok(sum)
    }

    /// Evaluate in exact rational arithmetic.
    pub fn eval_exact(
        &self,
        v: &BTreeMap<String, BigRational>,
    ) -> Result<BigRational, PolyError> {
        let mut sum = BigRational::zero();
        for (m, c) in &self.terms {
            let mut prod = c.clone();
            for (name, e) in &m.vars {
                let x = v
                    .get(name)
                    .ok_or_else(|| PolyError::MissingParam(name.clone()))?;
                for _ in 0..*e {
                    prod *= x;
                }
            }
            sum += prod;
        }
        Ok(sum)
    }
}

impl std::ops::Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        Polynomial::add(self, rhs)
    }
}

impl std::ops::Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        Polynomial::sub(self, rhs)
    }
}

impl std::ops::Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        Polynomial::mul(self, rhs)
    }
}

fn fmt_coeff(c: &BigRational) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

impl fmt::Display for Polynomial {
    /// Serialized canonical form; parses back to an equal polynomial.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let coeff_is_one = mag.is_one();
            if m.is_one() {
                write!(f, "{}", fmt_coeff(&mag))?;
            } else {
                if !coeff_is_one {
                    write!(f, "{}*", fmt_coeff(&mag))?;
                }
                for (j, (v, e)) in m.vars.iter().enumerate() {
                    if j > 0 {
                        write!(f, "*")?;
                    }
                    if *e == 1 {
                        write!(f, "{v}")?;
                    } else {
                        write!(f, "{v}^{e}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial({self})")
    }
}

/// Expression tree over rational constants, parameters, +, -, *, and integer
/// powers, as produced by the model-format parser.
#[derive(Debug, Clone, PartialEq)]
pub enum PolyExpr {
    Const(BigRational),
    Var(String),
    Neg(Box<PolyExpr>),
    Add(Box<PolyExpr>, Box<PolyExpr>),
    Sub(Box<PolyExpr>, Box<PolyExpr>),
    Mul(Box<PolyExpr>, Box<PolyExpr>),
    Pow(Box<PolyExpr>, u32),
}

impl PolyExpr {
    /// Expand, merge and sort into canonical form. Evaluation is preserved
    /// at every valuation.
    pub fn canonicalize(&self) -> Polynomial {
        match self {
            PolyExpr::Const(c) => Polynomial::constant(c.clone()),
            PolyExpr::Var(v) => Polynomial::var(v.clone()),
            PolyExpr::Neg(e) => e.canonicalize().neg(),
            PolyExpr::Add(a, b) => a.canonicalize().add(&b.canonicalize()),
            PolyExpr::Sub(a, b) => a.canonicalize().sub(&b.canonicalize()),
            PolyExpr::Mul(a, b) => a.canonicalize().mul(&b.canonicalize()),
            PolyExpr::Pow(e, k) => e.canonicalize().pow(*k),
        }
    }

    /// Direct evaluation of the unexpanded tree, used to cross-check that
    /// canonicalization preserves values.
    pub fn eval(&self, v: &Valuation) -> Result<f64, PolyError> {
        Ok(match self {
            PolyExpr::Const(c) => c.to_f64().expect("finite"),
            PolyExpr::Var(name) => v
                .get(name)
                .ok_or_else(|| PolyError::MissingParam(name.clone()))?,
            PolyExpr::Neg(e) => -e.eval(v)?,
            PolyExpr::Add(a, b) => a.eval(v)? + b.eval(v)?,
            PolyExpr::Sub(a, b) => a.eval(v)? - b.eval(v)?,
            PolyExpr::Mul(a, b) => a.eval(v)? * b.eval(v)?,
            PolyExpr::Pow(e, k) => e.eval(v)?.powi(*k as i32),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::parse_polynomial;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn poly(s: &str) -> Polynomial {
        parse_polynomial(s).unwrap().canonicalize()
    }

    #[test]
    fn coefficient_merge() {
        assert_eq!(poly("x + x"), poly("2*x"));
    }

    #[test]
    fn evaluation_preserved_around_canonicalization() {
        let expr = parse_polynomial("1 - x - y").unwrap();
        let v = Valuation::from_pairs([("x", 0.3), ("y", 0.3)]);
        let before = expr.eval(&v).unwrap();
        let after = expr.canonicalize().eval(&v).unwrap();
        assert!((before - 0.4).abs() < 1e-12);
        assert!((after - 0.4).abs() < 1e-12);
    }

    #[test]
    fn expand_and_merge() {
        // (1-p)*p + p*p = p - p^2 + p^2 = p
        let p = poly("(1 - p)*p + p*p");
        assert_eq!(p, poly("p"));
        // Oracle: direct evaluation of the unexpanded tree at 5 points.
        let expr = parse_polynomial("(1 - p)*p + p*p").unwrap();
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..5 {
            let x: f64 = rng.random_range(0.0..1.0);
            let v = Valuation::from_pairs([("p", x)]);
            assert!((expr.eval(&v).unwrap() - p.eval(&v).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn eval_basics() {
        let v = Valuation::from_pairs([("x", 0.5)]);
        assert_eq!(poly("x").eval(&v).unwrap(), 0.5);

        let v = Valuation::from_pairs([("p", 0.9)]);
        assert!((poly("1 - p").eval(&v).unwrap() - 0.1).abs() < 1e-15);

        let v = Valuation::from_pairs([("x", 0.2), ("y", 0.5)]);
        assert!((poly("1 - x - y").eval(&v).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn missing_param_is_an_error() {
        let v = Valuation::new();
        assert_eq!(
            poly("x").eval(&v),
            Err(PolyError::MissingParam("x".to_string()))
        );
    }

    #[test]
    fn display_round_trips() {
        for s in [
            "0",
            "1",
            "-3/4",
            "x",
            "2*x - 1",
            "x^2*y + 3/4*z - 1/2",
            "1 - x - y",
        ] {
            let p = poly(s);
            assert_eq!(poly(&p.to_string()), p, "round trip of `{s}`");
        }
    }

    #[test]
    fn monomial_order_is_graded_lex() {
        let p = poly("1 + x + x^2 + x*y");
        let rendered = p.to_string();
        // degree 2 terms first (x^2 before x*y lexicographically), then x, then 1
        assert_eq!(rendered, "x^2 + x*y + x + 1");
    }

    #[test]
    fn random_eval_preservation_property() {
        // For random expression trees, canonicalization preserves evaluation.
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..120 {
            let expr = random_expr(&mut rng, 3);
            let v = Valuation::from_pairs([
                ("x", rng.random_range(-1.0..1.0)),
                ("y", rng.random_range(-1.0..1.0)),
                ("z", rng.random_range(-1.0..1.0)),
            ]);
            let direct = expr.eval(&v).unwrap();
            let canon = expr.canonicalize().eval(&v).unwrap();
            assert!(
                (direct - canon).abs() <= 1e-12 * (1.0 + direct.abs()),
                "{expr:?}: {direct} vs {canon}"
            );
        }
    }

    fn random_expr(rng: &mut StdRng, depth: u32) -> PolyExpr {
        if depth == 0 || rng.random_bool(0.3) {
            if rng.random_bool(0.5) {
                let n = rng.random_range(-4i64..=4);
                let d = rng.random_range(1i64..=4);
                PolyExpr::Const(BigRational::new(BigInt::from(n), BigInt::from(d)))
            } else {
                let v = ["x", "y", "z"][rng.random_range(0..3usize)];
                PolyExpr::Var(v.to_string())
            }
        } else {
            let a = Box::new(random_expr(rng, depth - 1));
            let b = Box::new(random_expr(rng, depth - 1));
            match rng.random_range(0..4u32) {
                0 => PolyExpr::Add(a, b),
                1 => PolyExpr::Sub(a, b),
                2 => PolyExpr::Mul(a, b),
                _ => PolyExpr::Pow(a, rng.random_range(0..3)),
            }
        }
    }
}

#[cfg(test)]
mod prop_tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_expr() -> impl Strategy<Value = PolyExpr> {
        let leaf = prop_oneof![
            (-9i64..=9, 1i64..=9).prop_map(|(n, d)| {
                PolyExpr::Const(BigRational::new(BigInt::from(n), BigInt::from(d)))
            }),
            prop_oneof![Just("x"), Just("y"), Just("z")]
                .prop_map(|v| PolyExpr::Var(v.to_string())),
        ];
        leaf.prop_recursive(3, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| PolyExpr::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| PolyExpr::Sub(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| PolyExpr::Mul(Box::new(a), Box::new(b))),
                (inner, 0u32..3).prop_map(|(a, e)| PolyExpr::Pow(Box::new(a), e)),
            ]
        })
    }

    proptest! {
        #[test]
        fn canonicalization_preserves_evaluation(
            expr in arb_expr(),
            x in -1.0..1.0f64,
            y in -1.0..1.0f64,
            z in -1.0..1.0f64,
        ) {
            let v = Valuation::from_pairs([("x", x), ("y", y), ("z", z)]);
            let direct = expr.eval(&v).unwrap();
            let canon = expr.canonicalize().eval(&v).unwrap();
            prop_assert!(
                (direct - canon).abs() <= 1e-7 * (1.0 + direct.abs() + canon.abs()),
                "{direct} vs {canon}"
            );
        }

        #[test]
        fn serialized_form_parses_back_to_the_same_polynomial(expr in arb_expr()) {
            let p = expr.canonicalize();
            let back = crate::format::parse_polynomial(&p.to_string())
                .unwrap()
                .canonicalize();
            prop_assert_eq!(back, p);
        }
    }
}
