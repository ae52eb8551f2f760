//! Multivariate rational functions: parsing, evaluation, realization as
//! subspace collections, extraction of numerator and denominator, recovery of
//! one-variable collections, and coefficient counting.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::algebra::{add_y, additive_zero, merge_phases_y, merge_phases_z, substitute_into_y, substitute_into_z, AlgebraError};
use crate::atoms::{linear_y, z2_collection};
use crate::collections::{CollectionError, YCollection, ZCollection};
use crate::numcore::{c64, null_space, pseudo_inverse, re, ComplexMatrix, Tolerance, C64};
use crate::random::rng;
use crate::reduction::{prune_y, prune_z, ReductionError};
use crate::solvers::{annulus_point, eval_y, eval_z, SolveError};
use crate::spaces::Subspace;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RatFuncError {
    #[error("syntax error at offset {position}: expected {expected}")]
    Syntax { position: usize, expected: String },
    #[error("not homogenizable: {0}")]
    NotHomogenizable(String),
    #[error("not normalizable: {0}")]
    NotNormalizable(String),
    #[error("denominator vanishes at the evaluation point")]
    PoleHit,
    #[error("realization failed: residual {residual:e} at sample {sample}")]
    RealizationFailed { residual: f64, sample: usize },
    #[error("collection is not pruned: {0}")]
    NotPruned(String),
    #[error("dim U = {0}, expected 1")]
    UNotScalar(usize),
    #[error("degree mismatch: {0}")]
    DegreeMismatch(String),
    #[error("not expressible: {0}")]
    NotExpressible(String),
    #[error("degenerate quadratic: discriminant {discriminant}")]
    DegenerateQuadratic { discriminant: C64 },
    #[error("dimension constraint violated: {0}")]
    DimensionConstraintViolated(String),
    #[error("variable count mismatch: expected {expected}, got {got}")]
    VariableCount { expected: usize, got: usize },
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Collection(#[from] CollectionError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

type Result<T> = std::result::Result<T, RatFuncError>;

/// Sparse polynomial in `n_vars` complex variables.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiPoly {
    n_vars: usize,
    terms: BTreeMap<Vec<u32>, C64>,
}

impl MultiPoly {
    pub fn zero(n_vars: usize) -> Self {
        Self {
            n_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n_vars: usize, c: C64) -> Self {
        Self::monomial(vec![0; n_vars], c)
    }

    /// The variable `z_{i+1}`.
    pub fn var(n_vars: usize, i: usize) -> Self {
        let mut e = vec![0; n_vars];
        e[i] = 1;
        Self::monomial(e, re(1.0))
    }

    pub fn monomial(exponents: Vec<u32>, c: C64) -> Self {
        Self::from_terms(exponents.len(), [(exponents, c)])
    }

    /// Sums the given terms, dropping exact zeros.
    pub fn from_terms(n_vars: usize, terms: impl IntoIterator<Item = (Vec<u32>, C64)>) -> Self {
        let mut p = Self::zero(n_vars);
        for (e, c) in terms {
            assert_eq!(e.len(), n_vars, "exponent length");
            p.add_term(e, c);
        }
        p
    }

    fn add_term(&mut self, e: Vec<u32>, c: C64) {
        let zero = C64::new(0.0, 0.0);
        match self.terms.entry(e) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == zero {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                if c != zero {
                    v.insert(c);
                }
            }
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], C64)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), *c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, exponents: &[u32]) -> C64 {
        self.terms.get(exponents).copied().unwrap_or_default()
    }

    /// Largest total degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    pub fn degree_in(&self, var: usize) -> u32 {
        self.terms.keys().map(|e| e[var]).max().unwrap_or(0)
    }

    pub fn is_homogeneous(&self) -> bool {
        let mut sums = self.terms.keys().map(|e| e.iter().sum::<u32>());
        match sums.next() {
            None => true,
            Some(d) => sums.all(|s| s == d),
        }
    }

    pub fn involves(&self, var: usize) -> bool {
        self.terms.keys().any(|e| e[var] > 0)
    }

    pub fn eval(&self, z: &[C64]) -> C64 {
        assert_eq!(z.len(), self.n_vars, "point dimension");
        self.terms
            .iter()
            .map(|(e, c)| e.iter().zip(z).fold(*c, |acc, (&a, zi)| acc * zi.powu(a)))
            .sum()
    }

    /// `Σ |c| Π |z_i|^{a_i}`: the scale against which cancellation is judged.
    pub fn eval_abs(&self, z: &[C64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| e.iter().zip(z).fold(c.norm(), |acc, (&a, zi)| acc * zi.norm().powi(a as i32)))
            .sum()
    }

    /// Value at `(1, …, 1)`.
    pub fn coefficient_sum(&self) -> C64 {
        self.terms.values().sum()
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_terms(self.n_vars, self.terms.iter().map(|(e, c)| (e.clone(), c * s)))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(re(-1.0)))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.n_vars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, c1 * c2);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::constant(self.n_vars, re(1.0)), |acc, _| acc.mul(self))
    }

    /// Multiplies each term by the power of `z_{var+1}` that brings it to total degree `degree`.
    pub fn homogenize(&self, degree: u32, var: usize) -> Self {
        Self::from_terms(
            self.n_vars,
            self.terms.iter().map(|(e, c)| {
                let mut e = e.clone();
                e[var] += degree - e.iter().sum::<u32>();
                (e, *c)
            }),
        )
    }

    /// Zeroes real and imaginary parts below `rel` times the largest coefficient.
    pub fn chop(&self, rel: f64) -> Self {
        let cut = rel * self.max_abs_coefficient();
        let part = |x: f64| if x.abs() > cut { x } else { 0.0 };
        Self::from_terms(self.n_vars, self.terms.iter().map(|(e, c)| (e.clone(), C64::new(part(c.re), part(c.im)))))
    }

    /// Coefficients of the polynomial in `z_{var+1}` obtained by fixing the other variables.
    pub fn slice(&self, var: usize, others: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.degree_in(var) as usize + 1];
        for (e, c) in &self.terms {
            let mut v = *c;
            for (i, &a) in e.iter().enumerate() {
                if i != var {
                    v *= others[i].powu(a);
                }
            }
            out[e[var] as usize] += v;
        }
        out
    }

    pub fn render(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut s = String::new();
        // Highest degree first reads naturally.
        let mut terms: Vec<_> = self.terms.iter().collect();
        terms.sort_by(|a, b| b.0.iter().sum::<u32>().cmp(&a.0.iter().sum::<u32>()).then(b.0.cmp(a.0)));
        for (k, (e, c)) in terms.into_iter().enumerate() {
            let mono: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &a)| a > 0)
                .map(|(i, &a)| if a == 1 { format!("z{}", i + 1) } else { format!("z{}^{}", i + 1, a) })
                .collect();
            let (neg, coef) = render_coefficient(*c);
            if k == 0 {
                if neg {
                    s.push('-');
                }
            } else {
                s.push_str(if neg { " - " } else { " + " });
            }
            match (coef, mono.is_empty()) {
                (None, true) => s.push('1'),
                (None, false) => s.push_str(&mono.join("*")),
                (Some(c), true) => s.push_str(&c),
                (Some(c), false) => {
                    s.push_str(&c);
                    s.push('*');
                    s.push_str(&mono.join("*"));
                }
            }
        }
        s
    }
}

/// Sign and magnitude text of a coefficient; `None` magnitude means one.
fn render_coefficient(c: C64) -> (bool, Option<String>) {
    if c.im == 0.0 {
        let neg = c.re < 0.0;
        let a = c.re.abs();
        (neg, if a == 1.0 { None } else { Some(format!("{a:?}")) })
    } else if c.re == 0.0 {
        let neg = c.im < 0.0;
        (neg, Some(format!("{:?}i", c.im.abs())))
    } else {
        let sign = if c.im < 0.0 { '-' } else { '+' };
        (false, Some(format!("({:?}{sign}{:?}i)", c.re, c.im.abs())))
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Homogeneous `Z = p/q` of degree one with `deg p = deg q + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiRational {
    p: MultiPoly,
    q: MultiPoly,
}

impl MultiRational {
    /// Checks homogeneity and the degree pattern; does not normalize.
    pub fn new(p: MultiPoly, q: MultiPoly) -> Result<Self> {
        if p.n_vars() != q.n_vars() {
            return Err(RatFuncError::VariableCount {
                expected: p.n_vars(),
                got: q.n_vars(),
            });
        }
        let (dp, dq) = match (p.degree(), q.degree()) {
            (Some(dp), Some(dq)) => (dp, dq),
            _ => return Err(RatFuncError::NotNormalizable("zero numerator or denominator".into())),
        };
        if !p.is_homogeneous() || !q.is_homogeneous() || dp != dq + 1 {
            return Err(RatFuncError::NotHomogenizable(format!(
                "numerator degree {dp}, denominator degree {dq}, homogeneous: {}/{}",
                p.is_homogeneous(),
                q.is_homogeneous()
            )));
        }
        Ok(Self { p, q })
    }

    /// Homogenizes and normalizes so that `p(1,…,1) = q(1,…,1) = 1`.
    ///
    /// Input already homogeneous of degree one is kept; otherwise the pair is
    /// read as the slice `z_n = 1` and homogenized with powers of `z_n`.
    pub fn normalized(p: MultiPoly, q: MultiPoly) -> Result<Self> {
        let (p, q) = homogenize_pair(p, q)?;
        let (pv, qv) = (p.coefficient_sum(), q.coefficient_sum());
        check_normalizable(&p, pv, "numerator")?;
        check_normalizable(&q, qv, "denominator")?;
        let one = re(1.0);
        let p = if pv == one { p } else { p.scale(one / pv) };
        let q = if qv == one { q } else { q.scale(one / qv) };
        Self::new(p, q)
    }

    pub fn p(&self) -> &MultiPoly {
        &self.p
    }

    pub fn q(&self) -> &MultiPoly {
        &self.q
    }

    pub fn n_vars(&self) -> usize {
        self.p.n_vars()
    }

    /// Degree of the numerator.
    pub fn degree(&self) -> u32 {
        self.p.degree().unwrap_or(0)
    }

    pub fn eval(&self, z: &[C64]) -> Result<C64> {
        if z.len() != self.n_vars() {
            return Err(RatFuncError::VariableCount {
                expected: self.n_vars(),
                got: z.len(),
            });
        }
        let qv = self.q.eval(z);
        if qv.norm() <= 1e-13 * self.q.eval_abs(z) || qv == C64::new(0.0, 0.0) {
            return Err(RatFuncError::PoleHit);
        }
        Ok(self.p.eval(z) / qv)
    }

    pub fn render(&self) -> String {
        if self.q == MultiPoly::constant(self.n_vars(), re(1.0)) {
            self.p.render()
        } else {
            format!("({})/({})", self.p.render(), self.q.render())
        }
    }

    /// Largest `|self(z) − other(z)|` over `count` seeded annulus points,
    /// skipping points where either has a pole.
    pub fn max_difference(&self, other: &MultiRational, count: usize, seed: u64) -> f64 {
        let mut g = rng(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..count {
            let z = annulus_point(&mut g, self.n_vars());
            if let (Ok(a), Ok(b)) = (self.eval(&z), other.eval(&z)) {
                worst = worst.max((a - b).norm());
            }
        }
        worst
    }
}

impl fmt::Display for MultiRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

fn check_normalizable(p: &MultiPoly, v: C64, what: &str) -> Result<()> {
    let ones = vec![re(1.0); p.n_vars()];
    if p.is_zero() || v.norm() <= 1e-12 * p.eval_abs(&ones) {
        return Err(RatFuncError::NotNormalizable(format!("{what} vanishes at (1, …, 1)")));
    }
    Ok(())
}

fn homogenize_pair(p: MultiPoly, q: MultiPoly) -> Result<(MultiPoly, MultiPoly)> {
    if p.is_zero() || q.is_zero() {
        return Err(RatFuncError::NotNormalizable("zero numerator or denominator".into()));
    }
    let (dp, dq) = (p.degree().unwrap(), q.degree().unwrap());
    if p.is_homogeneous() && q.is_homogeneous() && dp == dq + 1 {
        return Ok((p, q));
    }
    let last = p.n_vars() - 1;
    if p.involves(last) || q.involves(last) {
        return Err(RatFuncError::NotHomogenizable(format!(
            "degrees ({dp}, {dq}) and z{} already appears",
            last + 1
        )));
    }
    let d = dp.max(dq + 1);
    Ok((p.homogenize(d, last), q.homogenize(d - 1, last)))
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Imag(f64),
    Var(usize),
    Op(char),
    LParen,
    RParen,
    End,
}

fn syntax(position: usize, expected: &str) -> RatFuncError {
    RatFuncError::Syntax {
        position,
        expected: expected.into(),
    }
}

fn tokenize(src: &str, n_vars: usize) -> Result<Vec<(usize, Tok)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        match c {
            ' ' | '\t' | '\n' | '\r' => {
                i += 1;
                continue;
            }
            '+' | '*' | '/' | '^' => {
                out.push((start, Tok::Op(c)));
                i += 1;
            }
            '-' | '−' => {
                out.push((start, Tok::Op('-')));
                i += 1;
            }
            '(' => {
                out.push((start, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((start, Tok::RParen));
                i += 1;
            }
            'i' => {
                out.push((start, Tok::Imag(1.0)));
                i += 1;
            }
            'z' => {
                i += 1;
                let s = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let idx: usize = chars[s..i].iter().collect::<String>().parse().map_err(|_| syntax(s, "variable index"))?;
                if idx == 0 || idx > n_vars {
                    return Err(syntax(start, &format!("variable z1..z{n_vars}")));
                }
                out.push((start, Tok::Var(idx - 1)));
            }
            d if d.is_ascii_digit() || d == '.' => {
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut k = i + 1;
                    if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        i = k;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let v: f64 = text.parse().map_err(|_| syntax(start, "number"))?;
                if i < chars.len() && chars[i] == 'i' {
                    i += 1;
                    out.push((start, Tok::Imag(v)));
                } else {
                    out.push((start, Tok::Num(v)));
                }
            }
            _ => return Err(syntax(start, "number, variable, operator or parenthesis")),
        }
    }
    out.push((chars.len(), Tok::End));
    Ok(out)
}

/// Quotient of polynomials carried through parsing.
#[derive(Clone)]
struct Frac {
    num: MultiPoly,
    den: MultiPoly,
}

impl Frac {
    fn poly(p: MultiPoly) -> Self {
        let n = p.n_vars();
        Self {
            num: p,
            den: MultiPoly::constant(n, re(1.0)),
        }
    }

    fn constant_den(&self) -> Option<C64> {
        if self.den.len() == 1 && self.den.degree() == Some(0) {
            Some(self.den.coefficient_sum())
        } else {
            None
        }
    }

    fn add(&self, o: &Self) -> Self {
        if self.den == o.den {
            return Self {
                num: self.num.add(&o.num),
                den: self.den.clone(),
            };
        }
        if let (Some(a), Some(b)) = (self.constant_den(), o.constant_den()) {
            let n = self.num.n_vars();
            return Self {
                num: self.num.scale(re(1.0) / a).add(&o.num.scale(re(1.0) / b)),
                den: MultiPoly::constant(n, re(1.0)),
            };
        }
        Self {
            num: self.num.mul(&o.den).add(&o.num.mul(&self.den)),
            den: self.den.mul(&o.den),
        }
    }

    fn neg(&self) -> Self {
        Self {
            num: self.num.scale(re(-1.0)),
            den: self.den.clone(),
        }
    }

    fn mul(&self, o: &Self) -> Self {
        Self {
            num: self.num.mul(&o.num),
            den: self.den.mul(&o.den),
        }
    }

    fn div(&self, o: &Self) -> Self {
        if let Some(c) = o.num.constant_value() {
            return Self {
                num: self.num.mul(&o.den).scale(re(1.0) / c),
                den: self.den.clone(),
            };
        }
        Self {
            num: self.num.mul(&o.den),
            den: self.den.mul(&o.num),
        }
    }
}

impl MultiPoly {
    fn constant_value(&self) -> Option<C64> {
        match (self.len(), self.degree()) {
            (1, Some(0)) => Some(self.coefficient_sum()),
            _ => None,
        }
    }
}

struct Parser<'a> {
    toks: &'a [(usize, Tok)],
    pos: usize,
    n: usize,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn expr(&mut self) -> Result<Frac> {
        let mut acc = self.term()?;
        while let Tok::Op(c @ ('+' | '-')) = *self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = if c == '+' { acc.add(&rhs) } else { acc.add(&rhs.neg()) };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Frac> {
        let mut acc = self.unary()?;
        while let Tok::Op(c @ ('*' | '/')) = *self.peek() {
            self.pos += 1;
            let at = self.offset();
            let rhs = self.unary()?;
            if c == '*' {
                acc = acc.mul(&rhs);
            } else {
                if rhs.num.is_zero() {
                    return Err(RatFuncError::NotNormalizable(format!("division by zero at offset {at}")));
                }
                acc = acc.div(&rhs);
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Frac> {
        match self.peek() {
            Tok::Op('-') => {
                self.pos += 1;
                Ok(self.unary()?.neg())
            }
            Tok::Op('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Frac> {
        let base = self.atom()?;
        if *self.peek() == Tok::Op('^') {
            self.pos += 1;
            let at = self.offset();
            match *self.peek() {
                Tok::Num(v) if v >= 0.0 && v.fract() == 0.0 && v <= 64.0 => {
                    self.pos += 1;
                    let k = v as u32;
                    return Ok(Frac {
                        num: base.num.pow(k),
                        den: base.den.pow(k),
                    });
                }
                _ => return Err(syntax(at, "nonnegative integer exponent")),
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Frac> {
        let at = self.offset();
        let n = self.n;
        let t = self.peek().clone();
        self.pos += 1;
        match t {
            Tok::Num(v) => Ok(Frac::poly(MultiPoly::constant(n, re(v)))),
            Tok::Imag(v) => Ok(Frac::poly(MultiPoly::constant(n, c64(0.0, v)))),
            Tok::Var(i) => Ok(Frac::poly(MultiPoly::var(n, i))),
            Tok::LParen => {
                let inner = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return Err(syntax(self.offset(), "')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            _ => Err(syntax(at, "number, variable, 'i', '(' or '-'")),
        }
    }
}

fn parse_pair(expr: &str, n_vars: usize) -> Result<(MultiPoly, MultiPoly)> {
    if n_vars == 0 {
        return Err(RatFuncError::VariableCount { expected: 1, got: 0 });
    }
    let toks = tokenize(expr, n_vars)?;
    let mut parser = Parser {
        toks: &toks,
        pos: 0,
        n: n_vars,
    };
    let f = parser.expr()?;
    if *parser.peek() != Tok::End {
        return Err(syntax(parser.offset(), "operator or end of input"));
    }
    Ok((f.num, f.den))
}

/// Parses an expression in `z1..zN` into a normalized degree-one function.
pub fn parse(expr: &str, n_vars: usize) -> Result<MultiRational> {
    let (p, q) = parse_pair(expr, n_vars)?;
    MultiRational::normalized(p, q)
}

// ---------------------------------------------------------------------------
// Realization

/// A realized collection with the sample evidence that it has the target function.
#[derive(Clone, Debug)]
pub struct RealizationCertificate<C, T> {
    pub collection: C,
    pub target: T,
    /// Sample points and `|solved − target|` at each.
    pub samples: Vec<(Vec<C64>, f64)>,
}

impl<C, T> RealizationCertificate<C, T> {
    pub fn max_residual(&self) -> f64 {
        self.samples.iter().map(|s| s.1).fold(0.0, f64::max)
    }
}

pub type ScalarCertificate = RealizationCertificate<ZCollection, MultiRational>;
pub type MatrixCertificate = RealizationCertificate<YCollection, Vec<Vec<MatrixEntry>>>;

pub const CERTIFICATE_POINTS: usize = 25;
pub const SCALAR_CERTIFICATE_TOL: f64 = 1e-7;
pub const MATRIX_CERTIFICATE_TOL: f64 = 1e-6;

/// Builds collections for degree-one functions of `n` variables out of the
/// linear and product atoms, composing by substitution and pruning each stage.
struct Realizer {
    n: usize,
    tol: Tolerance,
    vars: Vec<ZCollection>,
    product: ZCollection,
    monomials: HashMap<Vec<u32>, ZCollection>,
}

impl Realizer {
    fn new(n: usize, tol: Tolerance) -> Result<Self> {
        let vars = (0..n).map(|i| variable_collection(n, i, &tol)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            tol,
            vars,
            product: product_collection(&tol)?,
            monomials: HashMap::new(),
        })
    }

    /// `host(plug_1(z), …, plug_k(z))` for plugs in the realizer's variables.
    fn compose(&self, host: &ZCollection, plugs: &[&ZCollection]) -> Result<ZCollection> {
        let n = self.n;
        let mut c = host.clone();
        for (s, plug) in plugs.iter().enumerate() {
            c = substitute_into_z(&c, plug, if s == 0 { 0 } else { n })?;
            if s > 0 {
                for i in 0..n {
                    c = merge_phases_z(&c, i, n)?;
                }
            }
        }
        Ok(prune_z(&c, &self.tol)?.0)
    }

    /// `Σ c_k f_k` with `Σ c_k = 1`.
    fn linear(&self, parts: &[(C64, ZCollection)]) -> Result<ZCollection> {
        if parts.len() == 1 {
            return Ok(parts[0].1.clone());
        }
        let coefs: Vec<C64> = parts.iter().map(|p| p.0).collect();
        let host = linear_collection(&coefs, &self.tol)?;
        let plugs: Vec<&ZCollection> = parts.iter().map(|p| &p.1).collect();
        self.compose(&host, &plugs)
    }

    /// `f g / h`.
    fn ratio(&self, f: &ZCollection, g: &ZCollection, h: &ZCollection) -> Result<ZCollection> {
        self.compose(&self.product, &[f, g, h])
    }

    fn is_var(&self, c: &ZCollection, i: usize) -> bool {
        c.h() == 1 && c.phases()[i].dim() == 1
    }

    /// `f g / z_n`.
    fn times(&self, f: &ZCollection, g: &ZCollection) -> Result<ZCollection> {
        let last = self.n - 1;
        if self.is_var(f, last) {
            return Ok(g.clone());
        }
        if self.is_var(g, last) {
            return Ok(f.clone());
        }
        self.ratio(f, g, &self.vars[last])
    }

    /// `z^a / z_n^{|a| − 1}`.
    fn monomial(&mut self, a: &[u32]) -> Result<ZCollection> {
        let n = self.n;
        let mut a = a.to_vec();
        a[n - 1] = 0;
        let deg: u32 = a.iter().sum();
        if deg == 0 {
            return Ok(self.vars[n - 1].clone());
        }
        if let Some(c) = self.monomials.get(&a) {
            return Ok(c.clone());
        }
        let v = a.iter().position(|&x| x > 0).unwrap();
        let c = if deg == 1 {
            self.vars[v].clone()
        } else {
            let mut rest = a.clone();
            rest[v] -= 1;
            let inner = self.monomial(&rest)?;
            self.times(&self.vars[v].clone(), &inner)?
        };
        self.monomials.insert(a, c.clone());
        Ok(c)
    }

    /// `P / z_n^{D − 1}` for homogeneous terms of degree `D` with `Σ c_t = 1`,
    /// factoring out one variable at a time.
    fn polynomial(&mut self, terms: &[(Vec<u32>, C64)]) -> Result<ZCollection> {
        if terms.len() == 1 {
            return self.monomial(&terms[0].0);
        }
        let last = self.n - 1;
        let weight = |ts: &[(Vec<u32>, C64)]| ts.iter().map(|t| t.1).sum::<C64>();
        let ok = |c: C64| c.norm() > SPLIT_EPS;
        let split_var = (0..last)
            .filter(|&v| terms.iter().any(|t| t.0[v] > 0))
            .max_by_key(|&v| terms.iter().filter(|t| t.0[v] > 0).count());
        if let Some(v) = split_var {
            let (with, without): (Vec<_>, Vec<_>) = terms.iter().cloned().partition(|t| t.0[v] > 0);
            let (a, b) = (weight(&with), weight(&without));
            if ok(a) && (without.is_empty() || ok(b)) {
                let reduced: Vec<_> = with
                    .iter()
                    .map(|(e, c)| {
                        let mut e = e.clone();
                        e[v] -= 1;
                        (e, c / a)
                    })
                    .collect();
                let inner = self.polynomial(&reduced)?;
                let factored = self.times(&self.vars[v].clone(), &inner)?;
                if without.is_empty() {
                    return Ok(factored);
                }
                let rest = self.polynomial(&scaled(&without, b))?;
                return self.linear(&[(a, factored), (b, rest)]);
            }
        }
        // Peel off the term that keeps both weights farthest from zero.
        let score = |c: C64| c.norm().min((re(1.0) - c).norm());
        let t = (0..terms.len()).max_by(|&i, &j| score(terms[i].1).total_cmp(&score(terms[j].1))).unwrap();
        let c = terms[t].1;
        let rest: Vec<_> = terms.iter().enumerate().filter(|(i, _)| *i != t).map(|(_, x)| x.clone()).collect();
        let head = self.monomial(&terms[t].0)?;
        let tail = self.polynomial(&scaled(&rest, re(1.0) - c))?;
        self.linear(&[(c, head), (re(1.0) - c, tail)])
    }

    fn rational(&mut self, r: &MultiRational) -> Result<ZCollection> {
        let n = self.n;
        let terms = |p: &MultiPoly| p.terms().map(|(e, c)| (e.to_vec(), c)).collect::<Vec<_>>();
        let p_hat = self.polynomial(&terms(r.p()))?;
        if r.q().degree() == Some(0) {
            return Ok(p_hat);
        }
        // p/q = p̂ z_n / q̂ with p̂ = p / z_n^{D−1}, q̂ = q / z_n^{D−2}.
        let q_hat = self.polynomial(&terms(r.q()))?;
        if self.is_var(&q_hat, n - 1) {
            return Ok(p_hat);
        }
        let zn = self.vars[n - 1].clone();
        self.ratio(&p_hat, &zn, &q_hat)
    }
}

const SPLIT_EPS: f64 = 1e-3;

fn scaled(terms: &[(Vec<u32>, C64)], s: C64) -> Vec<(Vec<u32>, C64)> {
    terms.iter().map(|(e, c)| (e.clone(), c / s)).collect()
}

/// `H = U = P_{i+1}`, `E = J = 0`: the function `z_{i+1}`.
pub fn variable_collection(n: usize, i: usize, tol: &Tolerance) -> Result<ZCollection> {
    let phases = (0..n).map(|k| if k == i { Subspace::full(1) } else { Subspace::zero(1) }).collect();
    Ok(ZCollection::new(ComplexMatrix::identity(1), Subspace::zero(1), Subspace::zero(1), phases, tol)?)
}

/// `Σ c_i z_i` for coefficients summing to one, on `C^k` with `E = 0`.
///
/// `U` is the first axis, `J` the others, and `P_i` is spanned by `u + v_i`
/// with `v_i` the `J` axes and `v_k = −Σ_{i<k} c_i v_i / c_k`.
pub fn linear_collection(c: &[C64], tol: &Tolerance) -> Result<ZCollection> {
    let k = c.len();
    let sum: C64 = c.iter().sum();
    if (sum - re(1.0)).norm() > 1e-9 || c[k - 1].norm() == 0.0 {
        return Err(RatFuncError::NotNormalizable(format!("coefficients sum to {sum}")));
    }
    let mut phases = Vec::with_capacity(k);
    for i in 0..k {
        let mut p = vec![C64::new(0.0, 0.0); k];
        p[0] = re(1.0);
        if i + 1 < k {
            p[i + 1] = re(1.0);
        } else {
            for (j, cj) in c.iter().take(k - 1).enumerate() {
                p[j + 1] = -cj / c[k - 1];
            }
        }
        phases.push(Subspace::span_of(k, &[p], tol));
    }
    let j: Vec<usize> = (1..k).collect();
    Ok(ZCollection::new(
        ComplexMatrix::identity(k).column_range(0, 1),
        Subspace::zero(k),
        Subspace::coordinate(k, &j),
        phases,
        tol,
    )?)
}

/// `z_1 z_2 / z_3` on `C^3` with `U, E, J` the coordinate axes and phases
/// spanned by `(1,1,0)`, `(1,0,1)`, `(1,1,1)`.
pub fn product_collection(tol: &Tolerance) -> Result<ZCollection> {
    let one = re(1.0);
    let zero = C64::new(0.0, 0.0);
    Ok(ZCollection::new(
        ComplexMatrix::identity(3).column_range(0, 1),
        Subspace::coordinate(3, &[1]),
        Subspace::coordinate(3, &[2]),
        vec![
            Subspace::span_of(3, &[vec![one, one, zero]], tol),
            Subspace::span_of(3, &[vec![one, zero, one]], tol),
            Subspace::span_of(3, &[vec![one, one, one]], tol),
        ],
        tol,
    )?)
}

/// `9(2z_1/3 + z_2/3)²/(8 z_3) − (2z_1 − z_2)²/(8 z_3) = z_1 z_2 / z_3`, composed
/// from the square atom `z_1²/z_2` and the affine atoms `c z_1 + (1 − c) z_2`.
pub fn square_identity_product(tol: &Tolerance) -> Result<ZCollection> {
    let r = Realizer::new(3, *tol)?;
    let affine = |f: &ZCollection, g: &ZCollection, c: C64| -> Result<ZCollection> {
        let host = z2_collection([re(1.0) - c, re(0.0), c], [re(1.0); 3], tol)?;
        r.compose(&host, &[f, g])
    };
    let square = z2_collection([re(-1.0), re(1.0), re(1.0)], [re(1.0); 3], tol)?;
    let (x, y, w) = (&r.vars[0], &r.vars[1], &r.vars[2]);
    let a = r.compose(&square, &[&affine(x, y, re(2.0 / 3.0))?, w])?;
    let b = r.compose(&square, &[&affine(x, y, re(2.0))?, w])?;
    affine(&a, &b, re(9.0 / 8.0))
}

/// Random normalized function of `n` variables whose numerator has degree
/// `degree` and about `density` of the admissible monomials.
pub fn random_rational<R: rand::Rng>(rng: &mut R, n: usize, degree: u32, density: f64) -> MultiRational {
    loop {
        let mut poly = |d: u32| {
            let exps = exponents(n, d);
            let mut p = MultiPoly::zero(n);
            for e in exps {
                if rng.random_bool(density) {
                    p = p.add(&MultiPoly::monomial(e, crate::random::complex(rng)));
                }
            }
            p
        };
        let (p, q) = (poly(degree), poly(degree - 1));
        if let Ok(r) = MultiRational::normalized(p, q) {
            let scale = r.p().max_abs_coefficient().max(r.q().max_abs_coefficient());
            if r.degree() == degree && scale < 50.0 {
                return r;
            }
        }
    }
}

/// All exponent vectors of `n` variables with total degree `d`.
pub fn exponents(n: usize, d: u32) -> Vec<Vec<u32>> {
    if n == 1 {
        return vec![vec![d]];
    }
    (0..=d)
        .flat_map(|a| {
            exponents(n - 1, d - a).into_iter().map(move |mut rest| {
                rest.insert(0, a);
                rest
            })
        })
        .collect()
}

/// Samples `|solve − target|` at seeded annulus points.
fn certify_scalar(c: &ZCollection, r: &MultiRational, seed: u64) -> Result<Vec<(Vec<C64>, f64)>> {
    let mut g = rng(seed);
    let mut out = Vec::with_capacity(CERTIFICATE_POINTS);
    while out.len() < CERTIFICATE_POINTS {
        let z = annulus_point(&mut g, r.n_vars());
        let Ok(target) = r.eval(&z) else { continue };
        let got = eval_z(c, &z)?[(0, 0)];
        out.push((z, (got - target).norm()));
    }
    Ok(out)
}

pub const DEFAULT_SEED: u64 = 0;

/// Collection with `dim U = 1` whose function is `r`.
pub fn realize_scalar(r: &MultiRational) -> Result<ScalarCertificate> {
    realize_scalar_seeded(r, DEFAULT_SEED)
}

pub fn realize_scalar_seeded(r: &MultiRational, seed: u64) -> Result<ScalarCertificate> {
    let tol = Tolerance::default();
    let collection = Realizer::new(r.n_vars(), tol)?.rational(r)?;
    let samples = certify_scalar(&collection, r, seed)?;
    check_samples(&samples, SCALAR_CERTIFICATE_TOL)?;
    Ok(RealizationCertificate {
        collection,
        target: r.clone(),
        samples,
    })
}

fn check_samples(samples: &[(Vec<C64>, f64)], tol: f64) -> Result<()> {
    for (k, (_, res)) in samples.iter().enumerate() {
        if !(*res < tol) {
            return Err(RatFuncError::RealizationFailed { residual: *res, sample: k });
        }
    }
    Ok(())
}

/// One entry of a target `Y` matrix: a sum `Σ s_k r_k` of scaled normalized functions.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixEntry {
    pub terms: Vec<(C64, MultiRational)>,
}

impl MatrixEntry {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn scaled(s: C64, r: MultiRational) -> Self {
        Self { terms: vec![(s, r)] }
    }

    /// Parses any degree-one function; a numerator vanishing at `(1, …, 1)`
    /// is split into two terms that do not.
    pub fn parse(expr: &str, n_vars: usize) -> Result<Self> {
        let (p, q) = parse_pair(expr, n_vars)?;
        if p.is_zero() {
            return Ok(Self::zero());
        }
        let (p, q) = homogenize_pair(p, q)?;
        let qv = q.coefficient_sum();
        check_normalizable(&q, qv, "denominator")?;
        let ones = vec![re(1.0); n_vars];
        let pv = p.coefficient_sum();
        let parts = if pv.norm() > 1e-12 * p.eval_abs(&ones) {
            vec![p]
        } else {
            let (e, c) = p.terms().next().map(|(e, c)| (e.to_vec(), c)).unwrap();
            let head = MultiPoly::monomial(e, c);
            let tail = p.sub(&head);
            if tail.is_zero() {
                vec![head]
            } else {
                vec![head, tail]
            }
        };
        let terms = parts
            .into_iter()
            .map(|part| {
                let s = part.coefficient_sum() / qv;
                Ok((s, MultiRational::normalized(part, q.clone())?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { terms })
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, z: &[C64]) -> Result<C64> {
        self.terms.iter().map(|(s, r)| Ok(s * r.eval(z)?)).sum()
    }
}

/// `Y` collection whose function is the given matrix of degree-one functions.
pub fn realize_y_matrix(targets: &[Vec<MatrixEntry>], n_vars: usize) -> Result<MatrixCertificate> {
    realize_y_matrix_seeded(targets, n_vars, DEFAULT_SEED)
}

pub fn realize_y_matrix_seeded(targets: &[Vec<MatrixEntry>], n_vars: usize, seed: u64) -> Result<MatrixCertificate> {
    let tol = Tolerance::default();
    let m = targets.len();
    if m == 0 || targets.iter().any(|row| row.len() != m) {
        return Err(RatFuncError::DegreeMismatch("target must be a nonempty square matrix".into()));
    }
    let mut realizer = Realizer::new(n_vars, tol)?;
    let mut pieces = Vec::new();
    for (i, row) in targets.iter().enumerate() {
        for (j, entry) in row.iter().enumerate() {
            for (s, r) in &entry.terms {
                if r.n_vars() != n_vars {
                    return Err(RatFuncError::VariableCount {
                        expected: n_vars,
                        got: r.n_vars(),
                    });
                }
                if *s == C64::new(0.0, 0.0) {
                    continue;
                }
                let f = realizer.rational(r)?;
                // A = s E_ij has eigenvalue s when i = j.
                let halves = if i == j && (s + re(1.0)).norm() < 1e-9 { 2 } else { 1 };
                let mut a = ComplexMatrix::zeros(m, m);
                a[(i, j)] = s / re(halves as f64);
                let host = linear_y(&a, &tol)?;
                let piece = substitute_into_y(&host, &f, 0)?;
                for _ in 0..halves {
                    pieces.push((a.clone(), piece.clone()));
                }
            }
        }
    }
    let id = ComplexMatrix::identity(m);
    // Y(1, …, 1) is the sum of the matrices A; no partial sum may have eigenvalue −1.
    let admissible = |y1: &ComplexMatrix| (&id + y1).det().norm() > 1e-9 * (1.0 + y1.max_abs()).powi(m as i32);
    let total = pieces.iter().fold(ComplexMatrix::zeros(m, m), |acc, (a, _)| acc + a);
    if !admissible(&total) {
        return Err(RatFuncError::NotExpressible("Y(1, …, 1) has eigenvalue −1".into()));
    }
    let mut acc: Option<(ComplexMatrix, YCollection)> = None;
    while !pieces.is_empty() {
        let partial = acc.as_ref().map(|a| a.0.clone()).unwrap_or_else(|| ComplexMatrix::zeros(m, m));
        let k = pieces
            .iter()
            .position(|(a, _)| admissible(&(&partial + a)))
            .ok_or_else(|| RatFuncError::NotExpressible("no admissible order of the terms".into()))?;
        let (a, piece) = pieces.remove(k);
        acc = Some(match acc {
            None => (a, prune_y(&piece, &tol)?.0),
            Some((y1, c)) => {
                let mut sum = add_y(&c, &piece, &id, &id)?;
                for i in 0..n_vars {
                    sum = merge_phases_y(&sum, i, n_vars)?;
                }
                (&y1 + &a, prune_y(&sum, &tol)?.0)
            }
        });
    }
    let collection = acc.map(|a| a.1).unwrap_or_else(|| additive_zero(m, n_vars, &tol));

    let mut g = rng(seed);
    let mut samples = Vec::with_capacity(CERTIFICATE_POINTS);
    while samples.len() < CERTIFICATE_POINTS {
        let z = annulus_point(&mut g, n_vars);
        let mut want = ComplexMatrix::zeros(m, m);
        let mut pole = false;
        for (i, row) in targets.iter().enumerate() {
            for (j, entry) in row.iter().enumerate() {
                match entry.eval(&z) {
                    Ok(v) => want[(i, j)] = v,
                    Err(_) => pole = true,
                }
            }
        }
        if pole {
            continue;
        }
        let got = eval_y(&collection, &z)?;
        samples.push((z, got.max_abs_diff(&want)));
    }
    check_samples(&samples, MATRIX_CERTIFICATE_TOL)?;
    Ok(RealizationCertificate {
        collection,
        target: targets.to_vec(),
        samples,
    })
}

// ---------------------------------------------------------------------------
// Extraction

/// Interpolates a homogeneous polynomial of the given degree from its values
/// on a grid of roots of unity (last variable fixed to one).
pub fn interpolate_homogeneous(n_vars: usize, degree: u32, f: impl Fn(&[C64]) -> C64) -> MultiPoly {
    let free = n_vars - 1;
    let size = degree as usize + 1;
    let count = size.pow(free as u32);
    let roots: Vec<C64> = (0..size).map(|k| C64::from_polar(1.0, std::f64::consts::TAU * k as f64 / size as f64)).collect();
    let index = |mut flat: usize| -> Vec<usize> {
        let mut idx = vec![0; free];
        for slot in idx.iter_mut() {
            *slot = flat % size;
            flat /= size;
        }
        idx
    };
    let values: Vec<C64> = (0..count)
        .map(|flat| {
            let mut z: Vec<C64> = index(flat).iter().map(|&k| roots[k]).collect();
            z.push(re(1.0));
            f(&z)
        })
        .collect();
    let mut terms = Vec::new();
    for flat_a in 0..count {
        let a = index(flat_a);
        let total: usize = a.iter().sum();
        if total > degree as usize {
            continue;
        }
        // Inverse discrete Fourier transform along every free variable.
        let mut coef = C64::new(0.0, 0.0);
        for (flat_k, v) in values.iter().enumerate() {
            let k = index(flat_k);
            let phase: usize = a.iter().zip(&k).map(|(ai, ki)| ai * ki).sum();
            coef += v * roots[phase % size].conj();
        }
        coef /= count as f64;
        let mut e: Vec<u32> = a.iter().map(|&x| x as u32).collect();
        e.push(degree - total as u32);
        terms.push((e, coef));
    }
    MultiPoly::from_terms(n_vars, terms).chop(1e-12)
}

/// `det(Σ z_i M_i)` as a homogeneous polynomial.
pub fn pencil_determinant(mats: &[ComplexMatrix]) -> MultiPoly {
    let size = mats[0].rows();
    interpolate_homogeneous(mats.len(), size as u32, |z| {
        let mut s = ComplexMatrix::zeros(size, size);
        for (zi, m) in z.iter().zip(mats) {
            s = s + m.scale(*zi);
        }
        s.det()
    })
}

/// The matrices `A_i` of `(Γ_0 + Γ_1) Λ_i (Γ_0 + Γ_1)` on `U ⊕ E` and `B_i`
/// of `(Γ_0 + Γ_2) Λ_i (Γ_0 + Γ_2)` on `U ⊕ J`, with `U` first.
pub fn pencil_matrices(c: &ZCollection) -> (Vec<ComplexMatrix>, Vec<ComplexMatrix>) {
    let tol = c.tol();
    let on = |w: &ComplexMatrix, g: &ComplexMatrix| {
        let coords = pseudo_inverse(w, tol);
        c.lambdas().iter().map(|l| &coords * &(&(g * l) * w)).collect::<Vec<_>>()
    };
    let wa = ComplexMatrix::hstack(c.h(), &[c.u_frame(), c.e().ortho()]);
    let wb = ComplexMatrix::hstack(c.h(), &[c.u_frame(), c.j().ortho()]);
    let ga = c.gamma0() + c.gamma1();
    let gb = c.gamma0() + c.gamma2();
    (on(&wa, &ga), on(&wb, &gb))
}

/// Numerator and denominator of the function of a pruned collection with `dim U = 1`.
pub fn extract_pq(c: &ZCollection) -> Result<MultiRational> {
    if c.m() != 1 {
        return Err(RatFuncError::UNotScalar(c.m()));
    }
    let (_, report) = prune_z(c, c.tol())?;
    if report.after.ambient < report.before.ambient {
        return Err(RatFuncError::NotPruned(format!(
            "ambient dimension {} prunes to {}",
            report.before.ambient, report.after.ambient
        )));
    }
    let (a, b) = pencil_matrices(c);
    let q1 = c.e().dim() as u32;
    let dims = c.phase_dims();
    let p = pencil_determinant(&a);
    let q = interpolate_homogeneous(c.n(), q1, |z| {
        let size = b[0].rows();
        let mut s = ComplexMatrix::zeros(size, size);
        for (zi, m) in z.iter().zip(&b) {
            s = s + m.scale(re(1.0) / zi);
        }
        z.iter().zip(&dims).fold(s.det(), |acc, (zi, &pi)| acc * zi.powu(pi as u32))
    });
    MultiRational::new(p, q)
}

// ---------------------------------------------------------------------------
// One-variable functions and Z(2) collections

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    /// `h = 2d`.
    Even,
    /// `h = 2d − 1`.
    Odd,
}

/// Parameters of the canonical pruned `Z(2)` collection with `dim U = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct OneVarParams {
    pub parity: Parity,
    /// `γ_1 … γ_{d−1}`.
    pub gammas: Vec<C64>,
    /// `δ_1 … δ_d` (even) or `δ_1 … δ_{d−1}` (odd).
    pub deltas: Vec<C64>,
}

impl OneVarParams {
    pub fn new(parity: Parity, gammas: Vec<C64>, deltas: Vec<C64>) -> Result<Self> {
        let d = gammas.len() + 1;
        let want = match parity {
            Parity::Even => d,
            Parity::Odd => d - 1,
        };
        if deltas.len() != want {
            return Err(RatFuncError::DegreeMismatch(format!(
                "{} gammas need {want} deltas, got {}",
                gammas.len(),
                deltas.len()
            )));
        }
        Ok(Self { parity, gammas, deltas })
    }

    pub fn d(&self) -> usize {
        self.gammas.len() + 1
    }

    pub fn h(&self) -> usize {
        match self.parity {
            Parity::Even => 2 * self.d(),
            Parity::Odd => 2 * self.d() - 1,
        }
    }

    /// Largest entrywise difference, or infinity when the shapes differ.
    pub fn max_difference(&self, other: &OneVarParams) -> f64 {
        if self.parity != other.parity || self.gammas.len() != other.gammas.len() || self.deltas.len() != other.deltas.len() {
            return f64::INFINITY;
        }
        self.gammas
            .iter()
            .zip(&other.gammas)
            .chain(self.deltas.iter().zip(&other.deltas))
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// The canonical collection on the basis `v_1 … v_h` (standard coordinates)
/// with `v_1 = u`, `v_{2j} = Λ_1 v_{2j−1}`, `v_{2j+1} = Γ_1 v_{2j}`.
pub fn build_1var(params: &OneVarParams, tol: &Tolerance) -> Result<ZCollection> {
    let d = params.d();
    let h = params.h();
    // Coordinate index of v_k.
    let v = |k: usize| k - 1;
    let g = &params.gammas;
    let dl = &params.deltas;
    let zero = C64::new(0.0, 0.0);
    let one = re(1.0);

    let e_idx: Vec<usize> = (1..d).map(|j| v(2 * j + 1)).collect();
    let mut constraints = Vec::new();
    // Γ_0 x = 0.
    let mut row = vec![zero; h];
    row[v(1)] = one;
    for (j, dj) in dl.iter().enumerate() {
        row[v(2 * (j + 1))] = *dj;
    }
    constraints.push(row);
    // Γ_1 x = 0, one row per v_{2j+1}.
    for j in 1..d {
        let mut row = vec![zero; h];
        row[v(2 * j + 1)] = one;
        row[v(2 * j)] = one;
        if params.parity == Parity::Even {
            row[v(2 * d)] += g[j - 1];
        }
        constraints.push(row);
    }
    let j_space = Subspace::span(&null_space(&ComplexMatrix::from_rows(&constraints), tol), tol);

    let (p1, p2) = match params.parity {
        Parity::Even => {
            let p1: Vec<usize> = (1..=d).map(|j| v(2 * j)).collect();
            let p2: Vec<Vec<C64>> = (1..=d)
                .map(|j| {
                    let mut x = vec![zero; h];
                    x[v(2 * j - 1)] = one;
                    x[v(2 * j)] = -one;
                    x
                })
                .collect();
            (Subspace::coordinate(h, &p1), Subspace::span_of(h, &p2, tol))
        }
        Parity::Odd => {
            let p1: Vec<usize> = (1..d).map(|j| v(2 * j)).collect();
            // Kernel of Λ_1: x_{2j} + x_{2j−1} + γ_j x_{2d−1} = 0.
            let rows: Vec<Vec<C64>> = (1..d)
                .map(|j| {
                    let mut r = vec![zero; h];
                    r[v(2 * j)] = one;
                    r[v(2 * j - 1)] += one;
                    r[v(2 * d - 1)] += g[j - 1];
                    r
                })
                .collect();
            let ker = if rows.is_empty() {
                ComplexMatrix::identity(h)
            } else {
                null_space(&ComplexMatrix::from_rows(&rows), tol)
            };
            (Subspace::coordinate(h, &p1), Subspace::span(&ker, tol))
        }
    };
    let mut u = ComplexMatrix::zeros(h, 1);
    u[(v(1), 0)] = one;
    Ok(ZCollection::new(u, Subspace::coordinate(h, &e_idx), j_space, vec![p1, p2], tol)?)
}

/// Coefficients in powers of `x = 1 − z_1` of a polynomial in `z_1`.
fn to_x_powers(c: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); c.len()];
    for (a, ca) in c.iter().enumerate() {
        // z^a = (1 − x)^a
        let mut binom = 1.0;
        for k in 0..=a {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            out[k] += ca * (sign * binom);
            binom = binom * (a - k) as f64 / (k + 1) as f64;
        }
    }
    out
}

fn effective_degree(c: &[C64], rel: f64) -> usize {
    let scale = c.iter().map(|x| x.norm()).fold(0.0, f64::max);
    c.iter().rposition(|x| x.norm() > rel * scale).unwrap_or(0)
}

/// Recovers the canonical `Z(2)` parameters with `dim H = h` from `Z(z_1, z_2)`.
pub fn recover_1var(r: &MultiRational, h: usize) -> Result<OneVarParams> {
    if r.n_vars() != 2 {
        return Err(RatFuncError::VariableCount {
            expected: 2,
            got: r.n_vars(),
        });
    }
    if h == 0 {
        return Err(RatFuncError::DegreeMismatch("h must be positive".into()));
    }
    let (parity, d) = if h % 2 == 0 { (Parity::Even, h / 2) } else { (Parity::Odd, h.div_ceil(2)) };
    let ones = [re(1.0), re(1.0)];
    let px = to_x_powers(&r.p().slice(0, &ones));
    let qx = to_x_powers(&r.q().slice(0, &ones));
    let (dp, dq) = (effective_degree(&px, 1e-10), effective_degree(&qx, 1e-10));
    let p_cap = if parity == Parity::Even { d } else { d - 1 };
    if dp > p_cap || dq > d - 1 {
        return Err(RatFuncError::DegreeMismatch(format!(
            "numerator degree {dp} (cap {p_cap}), denominator degree {dq} (cap {})",
            d - 1
        )));
    }
    let q0 = qx[0];
    if q0.norm() <= 1e-12 * qx.iter().map(|x| x.norm()).sum::<f64>() {
        return Err(RatFuncError::NotExpressible("denominator vanishes at z_1 = z_2".into()));
    }
    if (px[0] - q0).norm() > 1e-8 * q0.norm() {
        return Err(RatFuncError::NotExpressible("Z(1, 1) differs from 1".into()));
    }
    let at = |v: &[C64], k: usize| v.get(k).copied().unwrap_or_default() / q0;
    // q = 1 − Σ s_j x^j
    let s: Vec<C64> = (0..d).map(|j| if j == 0 { C64::new(0.0, 0.0) } else { -at(&qx, j) }).collect();
    let gammas: Vec<C64> = (1..d).map(|j| s[d - j]).collect();
    let diff = |k: usize| at(&qx, k) - at(&px, k);
    let mut deltas: Vec<C64> = Vec::new();
    match parity {
        Parity::Even => {
            // q − p = Σ_{j=0}^{d−1} t_j x^{j+1}
            let t: Vec<C64> = (0..d).map(|j| diff(j + 1)).collect();
            deltas.push(t[0]);
            for j in 1..d {
                let acc: C64 = (1..=j).map(|i| deltas[i - 1] * s[1 + j - i]).sum();
                deltas.push(t[j] + acc);
            }
        }
        Parity::Odd => {
            // q − p = Σ_{j=1}^{d−1} t_j x^j
            for j in 1..d {
                let acc: C64 = (1..j).map(|i| deltas[i - 1] * s[j - i]).sum();
                deltas.push(diff(j) + acc);
            }
        }
    }
    OneVarParams::new(parity, gammas, deltas)
}

// ---------------------------------------------------------------------------
// Counting and non-uniqueness

/// The two-variable example with basis `u, Λ_1u, Λ_2u, Γ_1Λ_1u, Γ_1Λ_2u` and
/// closure constants `γ_1 … γ_4`, `δ_1`, `δ_2`.
pub fn nonuniqueness_collection(gammas: [C64; 4], deltas: [C64; 2], tol: &Tolerance) -> Result<ZCollection> {
    let [g1, g2, g3, g4] = gammas;
    let [d1, d2] = deltas;
    let zero = C64::new(0.0, 0.0);
    let one = re(1.0);
    let h = 5;
    let j_rows = vec![
        vec![one, d1, d2, zero, zero],
        vec![zero, one, zero, one, zero],
        vec![zero, zero, one, zero, one],
    ];
    let p3_rows = vec![vec![one, one, zero, g1, g3], vec![one, zero, one, g2, g4]];
    let span_null = |rows: Vec<Vec<C64>>| Subspace::span(&null_space(&ComplexMatrix::from_rows(&rows), tol), tol);
    let mut u = ComplexMatrix::zeros(h, 1);
    u[(0, 0)] = one;
    Ok(ZCollection::new(
        u,
        Subspace::coordinate(h, &[3, 4]),
        span_null(j_rows),
        vec![Subspace::coordinate(h, &[1]), Subspace::coordinate(h, &[2]), span_null(p3_rows)],
        tol,
    )?)
}

/// Result of [`nonuniqueness_demo`].
#[derive(Clone, Debug)]
pub struct NonUniqueness {
    /// `Z(z_1, z_2, z_3)` with `z_3` homogenizing.
    pub z: MultiRational,
    /// `t_1 = γ_2 γ_3` and `t_2 = γ_3 δ_1 + γ_2 δ_2`.
    pub t: [C64; 2],
    /// Both roots `γ_2` of `δ_2 γ_2² − t_2 γ_2 + t_1 δ_1 = 0`.
    pub gamma2: [C64; 2],
    /// The matching `γ_3` for each root.
    pub gamma3: [C64; 2],
}

/// The function of the two-variable example with `γ_1 = γ_4 = 0`, and the two
/// parameter sets that produce it.
pub fn nonuniqueness_demo(gamma2: C64, gamma3: C64, delta1: C64, delta2: C64) -> Result<NonUniqueness> {
    if delta2.norm() < 1e-14 {
        return Err(RatFuncError::DegenerateQuadratic { discriminant: C64::new(0.0, 0.0) });
    }
    let t1 = gamma2 * gamma3;
    let t2 = gamma3 * delta1 + gamma2 * delta2;
    let disc = t2 * t2 - re(4.0) * t1 * delta1 * delta2;
    let scale = (t2 * t2).norm() + (re(4.0) * t1 * delta1 * delta2).norm();
    if disc.norm() <= 1e-12 * scale.max(1e-300) {
        return Err(RatFuncError::DegenerateQuadratic { discriminant: disc });
    }
    let root = disc.sqrt();
    let gamma2_roots = [(t2 + root) / (re(2.0) * delta2), (t2 - root) / (re(2.0) * delta2)];
    let gamma3_of = |g2: C64| {
        if delta1.norm() > 1e-14 {
            (t2 - g2 * delta2) / delta1
        } else {
            t1 / g2
        }
    };
    // Z = 1 + (δ_1 x + δ_2 y − t_2 x y)/(1 − t_1 x y), x = z_1 − 1, y = z_2 − 1.
    let n = 3;
    let one = MultiPoly::constant(n, re(1.0));
    let x = MultiPoly::var(n, 0).sub(&one);
    let y = MultiPoly::var(n, 1).sub(&one);
    let xy = x.mul(&y);
    let q = one.sub(&xy.scale(t1));
    let p = q.add(&x.scale(delta1)).add(&y.scale(delta2)).sub(&xy.scale(t2));
    Ok(NonUniqueness {
        z: MultiRational::normalized(p, q)?,
        t: [t1, t2],
        gamma2: gamma2_roots,
        gamma3: [gamma3_of(gamma2_roots[0]), gamma3_of(gamma2_roots[1])],
    })
}

/// Numbers `(k_1, k_2)` of independent coefficients in `p` and `q` for a
/// pruned `Z(3)` collection with `dim U = 1`.
pub fn coefficient_count(p: [usize; 3], q1: usize, q2: usize) -> Result<(i64, i64)> {
    let h = p.iter().sum::<usize>();
    if 1 + q1 + q2 != h {
        return Err(RatFuncError::DimensionConstraintViolated(format!(
            "1 + q1 + q2 = {} but p1 + p2 + p3 = {h}",
            1 + q1 + q2
        )));
    }
    if let Some(pi) = p.iter().find(|&&pi| pi > 1 + q1.min(q2)) {
        return Err(RatFuncError::DimensionConstraintViolated(format!(
            "phase dimension {pi} exceeds 1 + min(q1, q2) = {}",
            1 + q1.min(q2)
        )));
    }
    let sq: i64 = p.iter().map(|&x| (x * x) as i64).sum();
    let (h, q1, q2) = (h as i64, q1 as i64, q2 as i64);
    let k1 = (2 * (1 + q1) * q2 - sq + h) / 2;
    let k2 = (2 * (1 + q2) * q1 - sq + h) / 2;
    Ok((k1, k2))
}

/// Number of exponent triples with `Σ a_i = total` and `0 ≤ a_i ≤ p_i`.
pub fn count_exponents(p: [usize; 3], total: usize) -> usize {
    (0..=p[0].min(total))
        .flat_map(|a1| (0..=p[1].min(total - a1)).map(move |a2| (a1, a2)))
        .filter(|&(a1, a2)| total - a1 - a2 <= p[2])
        .count()
}
