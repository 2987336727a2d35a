//! Exact arithmetic in cyclotomic fields.
//!
//! An element of `Q(ζ_n)` is stored as a coefficient vector in the power basis
//! `1, ζ_n, …, ζ_n^{φ(n)-1}` of `Q[x]/(Φ_n(x))`. Every value is kept in
//! canonical form: the conductor is the smallest `n` (never `≡ 2 mod 4`) such
//! that the value lies in `Q(ζ_n)`, so structural equality is field equality.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::arith;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CycloError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("galois exponent {t} is not coprime to conductor {conductor}")]
    NotCoprime { t: i64, conductor: u64 },
    #[error("value {0} is not rational")]
    NotRational(String),
    #[error("value {0} is not an integer")]
    NotIntegral(String),
    #[error("value of conductor {conductor} does not lie in Q(E({field}))")]
    NotInField { conductor: u64, field: u64 },
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

fn cyclotomic_poly(n: u64) -> Arc<Vec<BigInt>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<Vec<BigInt>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(p) = cache.lock().unwrap().get(&n) {
        return p.clone();
    }
    // x^n - 1 divided by Φ_d for every proper divisor d.
    let mut num: Vec<BigInt> = vec![BigInt::zero(); n as usize + 1];
    num[0] = BigInt::from(-1);
    num[n as usize] = BigInt::one();
    for d in arith::divisors(n) {
        if d == n {
            continue;
        }
        let den = cyclotomic_poly(d);
        num = exact_div_monic(&num, &den);
    }
    let p = Arc::new(num);
    cache.lock().unwrap().insert(n, p.clone());
    p
}

fn exact_div_monic(num: &[BigInt], den: &[BigInt]) -> Vec<BigInt> {
    let dn = den.len() - 1;
    let mut rem = num.to_vec();
    let mut q = vec![BigInt::zero(); num.len() - dn];
    for i in (dn..num.len()).rev() {
        let c = rem[i].clone();
        if c.is_zero() {
            continue;
        }
        q[i - dn] = c.clone();
        for (j, dj) in den.iter().enumerate() {
            rem[i - dn + j] -= &c * dj;
        }
    }
    debug_assert!(rem.iter().all(|c| c.is_zero()));
    q
}

/// Reduces a dense polynomial in `ζ_n` modulo `Φ_n`, returning `φ(n)` coefficients.
fn reduce_mod_phi(mut poly: Vec<BigRational>, n: u64) -> Vec<BigRational> {
    let phi = cyclotomic_poly(n);
    let deg = phi.len() - 1;
    for i in (deg..poly.len()).rev() {
        if poly[i].is_zero() {
            continue;
        }
        let c = poly[i].clone();
        for (j, pj) in phi.iter().enumerate() {
            if !pj.is_zero() {
                poly[i - deg + j] -= &c * BigRational::from_integer(pj.clone());
            }
        }
    }
    poly.resize(deg, BigRational::zero());
    poly
}

/// Solves `A x = b` over Q; `None` when inconsistent. `A` is given by columns.
fn solve_columns(cols: &[Vec<BigRational>], rhs: &[BigRational]) -> Option<Vec<BigRational>> {
    let rows = rhs.len();
    let ncols = cols.len();
    let mut m: Vec<Vec<BigRational>> = (0..rows)
        .map(|r| {
            let mut row: Vec<BigRational> = cols.iter().map(|c| c[r].clone()).collect();
            row.push(rhs[r].clone());
            row
        })
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        let Some(pr) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, pr);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                let pivot = m[r].clone();
                for (x, pv) in m[i][c..=ncols].iter_mut().zip(&pivot[c..=ncols]) {
                    *x -= &f * pv;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows {
            break;
        }
    }
    if m[r..].iter().any(|row| !row[ncols].is_zero()) {
        return None;
    }
    let mut x = vec![BigRational::zero(); ncols];
    for (i, &c) in pivots.iter().enumerate() {
        x[c] = m[i][ncols].clone();
    }
    Some(x)
}

/// An exact element of a cyclotomic field, in canonical form.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Cyclotomic {
    conductor: u64,
    coeffs: Vec<BigRational>,
}

impl Cyclotomic {
    pub fn zero() -> Self {
        Self::from_rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Self::from_integer(1)
    }

    pub fn from_integer(k: i64) -> Self {
        Self::from_rational(BigRational::from_integer(BigInt::from(k)))
    }

    pub fn from_rational(q: BigRational) -> Self {
        Cyclotomic { conductor: 1, coeffs: vec![q] }
    }

    /// `ζ_n^k`.
    pub fn root(n: u64, k: i64) -> Self {
        assert!(n >= 1, "root of unity order must be positive");
        let mut dense = vec![BigRational::zero(); n as usize];
        dense[arith::modn(k, n) as usize] = BigRational::one();
        Self::from_dense(n, dense)
    }

    /// Builds `Σ_j c_j ζ_n^j` from coefficients indexed by exponent (any length).
    pub fn from_dense(n: u64, dense: Vec<BigRational>) -> Self {
        let mut folded = vec![BigRational::zero(); n as usize];
        for (j, c) in dense.into_iter().enumerate() {
            if !c.is_zero() {
                folded[j % n as usize] += c;
            }
        }
        Self::canonical(n, reduce_mod_phi(folded, n))
    }

    pub fn conductor(&self) -> u64 {
        self.conductor
    }

    /// Power-basis coefficients in `Q(ζ_conductor)`.
    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.conductor == 1 && self.coeffs[0].is_zero()
    }

    fn canonical(n: u64, coeffs: Vec<BigRational>) -> Self {
        if coeffs.iter().skip(1).all(|c| c.is_zero()) {
            let q = coeffs.into_iter().next().unwrap_or_else(BigRational::zero);
            return Cyclotomic { conductor: 1, coeffs: vec![q] };
        }
        for m in arith::divisors(n) {
            if m == 1 || m == n || m % 4 == 2 {
                continue;
            }
            if let Some(sub) = Self::restrict_to(n, &coeffs, m) {
                return Cyclotomic { conductor: m, coeffs: sub };
            }
        }
        if n % 4 == 2 {
            // Q(ζ_n) = Q(ζ_{n/2}); the loop above skipped m = n/2 only if n/2 ≡ 2 mod 4,
            // which cannot happen for n ≡ 2 mod 4.
            unreachable!("conductor {n} should have been reduced to {}", n / 2);
        }
        Cyclotomic { conductor: n, coeffs }
    }

    /// Coordinates of a `Q(ζ_n)` element in `Q(ζ_m)`, `m | n`, if it lies there.
    fn restrict_to(n: u64, coeffs: &[BigRational], m: u64) -> Option<Vec<BigRational>> {
        let phi_m = arith::totient(m) as usize;
        let step = n / m;
        let cols: Vec<Vec<BigRational>> = (0..phi_m)
            .map(|j| {
                let mut dense = vec![BigRational::zero(); n as usize];
                dense[(j as u64 * step % n) as usize] = BigRational::one();
                reduce_mod_phi(dense, n)
            })
            .collect();
        solve_columns(&cols, coeffs)
    }

    /// Dense exponent coefficients in `Q(ζ_n)` for a multiple `n` of the conductor.
    fn embed_dense(&self, n: u64) -> Vec<BigRational> {
        debug_assert_eq!(n % self.conductor, 0);
        let step = n / self.conductor;
        let mut dense = vec![BigRational::zero(); n as usize];
        for (j, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                dense[(j as u64 * step % n) as usize] += c;
            }
        }
        dense
    }

    pub fn scalar_mul(&self, q: &BigRational) -> Self {
        if q.is_zero() {
            return Self::zero();
        }
        Cyclotomic { conductor: self.conductor, coeffs: self.coeffs.iter().map(|c| c * q).collect() }
    }

    /// Applies `ζ ↦ ζ^t`.
    pub fn galois(&self, t: i64) -> Result<Self, CycloError> {
        let n = self.conductor;
        if n == 1 {
            return Ok(self.clone());
        }
        let tm = arith::modn(t, n);
        if arith::gcd(tm, n) != 1 {
            return Err(CycloError::NotCoprime { t, conductor: n });
        }
        let mut dense = vec![BigRational::zero(); n as usize];
        for (j, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                dense[(j as u64 * tm % n) as usize] += c;
            }
        }
        Ok(Self::from_dense(n, dense))
    }

    /// Trace from `Q(ζ_c)` to `Q` where `c` is the (reduced) conductor.
    pub fn trace(&self) -> BigRational {
        let n = self.conductor;
        let mut acc = BigRational::zero();
        for (j, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            // Ramanujan sum c_n(j).
            let g = arith::gcd(j as u64, n);
            let q = n / g;
            let r = arith::mobius(q) * (arith::totient(n) / arith::totient(q)) as i64;
            acc += c * BigRational::from_integer(BigInt::from(r));
        }
        acc
    }

    /// Trace from `Q(ζ_n)` to `Q`; the value must lie in `Q(ζ_n)`.
    pub fn trace_over(&self, n: u64) -> Result<BigRational, CycloError> {
        if !n.is_multiple_of(self.conductor) {
            return Err(CycloError::NotInField { conductor: self.conductor, field: n });
        }
        let deg = arith::totient(n) / arith::totient(self.conductor);
        Ok(self.trace() * BigRational::from_integer(BigInt::from(deg)))
    }

    /// Product of all Galois conjugates.
    pub fn norm(&self) -> BigRational {
        let mut acc = Self::one();
        for t in arith::units_mod(self.conductor) {
            acc = &acc * &self.galois(t as i64).expect("unit exponents are coprime");
        }
        acc.as_rational().expect("norm is rational")
    }

    pub fn inverse(&self) -> Result<Self, CycloError> {
        if self.is_zero() {
            return Err(CycloError::DivisionByZero);
        }
        let mut others = Self::one();
        for t in arith::units_mod(self.conductor) {
            if t != 1 {
                others = &others * &self.galois(t as i64).expect("coprime");
            }
        }
        let n = (&others * self).as_rational().expect("norm is rational");
        Ok(others.scalar_mul(&n.recip()))
    }

    pub fn checked_div(&self, rhs: &Self) -> Result<Self, CycloError> {
        Ok(self * &rhs.inverse()?)
    }

    pub fn as_rational(&self) -> Result<BigRational, CycloError> {
        if self.conductor == 1 {
            Ok(self.coeffs[0].clone())
        } else {
            Err(CycloError::NotRational(self.to_string()))
        }
    }

    pub fn as_integer(&self) -> Result<BigInt, CycloError> {
        let q = self.as_rational()?;
        if q.is_integer() {
            Ok(q.to_integer())
        } else {
            Err(CycloError::NotIntegral(self.to_string()))
        }
    }

    /// Whether `ζ ↦ ζ^t` fixes this value (`t` coprime to the conductor).
    pub fn is_fixed_by(&self, t: i64) -> bool {
        match self.galois(t) {
            Ok(v) => &v == self,
            Err(_) => false,
        }
    }

    /// Complex value under `ζ_n ↦ exp(2πi/n)`. Floating point; sanity checks only.
    pub fn to_complex(&self) -> (f64, f64) {
        let n = self.conductor as f64;
        let mut re = 0.0;
        let mut im = 0.0;
        for (j, c) in self.coeffs.iter().enumerate() {
            let cf = c.to_f64().unwrap_or(f64::NAN);
            let ang = 2.0 * std::f64::consts::PI * j as f64 / n;
            re += cf * ang.cos();
            im += cf * ang.sin();
        }
        (re, im)
    }
}

impl fmt::Debug for Cyclotomic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cyclotomic({self})")
    }
}

fn fmt_rational(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

impl fmt::Display for Cyclotomic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.conductor;
        let mut out = String::new();
        for (j, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let term = if j == 0 {
                fmt_rational(c)
            } else {
                let root = if j == 1 { format!("E({n})") } else { format!("E({n})^{j}") };
                if c.is_one() {
                    root
                } else if (-c).is_one() {
                    format!("-{root}")
                } else {
                    format!("{}*{root}", fmt_rational(c))
                }
            };
            if !out.is_empty() && !term.starts_with('-') {
                out.push('+');
            }
            out.push_str(&term);
        }
        if out.is_empty() {
            out.push('0');
        }
        f.write_str(&out)
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, CycloError> {
        Err(CycloError::Parse { pos: self.pos, msg: msg.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn uint(&mut self) -> Result<BigInt, CycloError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected digits");
        }
        let txt = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii digits");
        Ok(txt.parse().expect("digits parse"))
    }

    fn small_uint(&mut self) -> Result<u64, CycloError> {
        let v = self.uint()?;
        match v.to_u64() {
            Some(x) => Ok(x),
            None => self.err("integer too large"),
        }
    }

    fn rational(&mut self) -> Result<BigRational, CycloError> {
        let num = self.uint()?;
        if self.eat(b'/') {
            let den = self.uint()?;
            if den.is_zero() {
                return self.err("zero denominator");
            }
            Ok(BigRational::new(num, den))
        } else {
            Ok(BigRational::from_integer(num))
        }
    }

    fn root(&mut self) -> Result<Cyclotomic, CycloError> {
        if !(self.eat(b'E') && self.eat(b'(')) {
            return self.err("expected E(");
        }
        let n = self.small_uint()?;
        if n == 0 {
            return self.err("E(0) is undefined");
        }
        if !self.eat(b')') {
            return self.err("expected )");
        }
        let mut k: i64 = 1;
        if self.eat(b'^') {
            let neg = self.eat(b'-');
            let e = self.small_uint()? as i64;
            k = if neg { -e } else { e };
        }
        Ok(Cyclotomic::root(n, k))
    }

    fn term(&mut self) -> Result<Cyclotomic, CycloError> {
        match self.peek() {
            Some(b'E') => self.root(),
            Some(c) if c.is_ascii_digit() => {
                let q = self.rational()?;
                if self.eat(b'*') {
                    Ok(self.root()?.scalar_mul(&q))
                } else {
                    Ok(Cyclotomic::from_rational(q))
                }
            }
            _ => self.err("expected a term"),
        }
    }

    fn expr(&mut self) -> Result<Cyclotomic, CycloError> {
        let mut acc = Cyclotomic::zero();
        let mut first = true;
        loop {
            let neg = if self.eat(b'-') {
                true
            } else if self.eat(b'+') || first {
                false
            } else {
                break;
            };
            let t = self.term()?;
            acc = if neg { &acc - &t } else { &acc + &t };
            first = false;
        }
        if self.peek().is_some() {
            return self.err("unexpected trailing input");
        }
        Ok(acc)
    }
}

impl FromStr for Cyclotomic {
    type Err = CycloError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Parser { s: s.as_bytes(), pos: 0 }.expr()
    }
}

impl serde::Serialize for Cyclotomic {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for Cyclotomic {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(serde::Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(k) => Ok(Cyclotomic::from_integer(k)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

fn binary(a: &Cyclotomic, b: &Cyclotomic, mul: bool) -> Cyclotomic {
    if a.conductor == 1 && b.conductor == 1 {
        let q = if mul { &a.coeffs[0] * &b.coeffs[0] } else { &a.coeffs[0] + &b.coeffs[0] };
        return Cyclotomic::from_rational(q);
    }
    if mul {
        if a.conductor == 1 {
            return b.scalar_mul(&a.coeffs[0]);
        }
        if b.conductor == 1 {
            return a.scalar_mul(&b.coeffs[0]);
        }
    }
    let n = arith::lcm(a.conductor, b.conductor);
    let da = a.embed_dense(n);
    let db = b.embed_dense(n);
    if mul {
        let mut prod = vec![BigRational::zero(); n as usize];
        for (i, x) in da.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in db.iter().enumerate() {
                if !y.is_zero() {
                    prod[(i + j) % n as usize] += x * y;
                }
            }
        }
        Cyclotomic::from_dense(n, prod)
    } else {
        Cyclotomic::from_dense(n, da.into_iter().zip(db).map(|(x, y)| x + y).collect())
    }
}

impl Add for &Cyclotomic {
    type Output = Cyclotomic;
    fn add(self, rhs: &Cyclotomic) -> Cyclotomic {
        binary(self, rhs, false)
    }
}

impl Add for Cyclotomic {
    type Output = Cyclotomic;
    fn add(self, rhs: Cyclotomic) -> Cyclotomic {
        binary(&self, &rhs, false)
    }
}

impl AddAssign<&Cyclotomic> for Cyclotomic {
    fn add_assign(&mut self, rhs: &Cyclotomic) {
        *self = binary(self, rhs, false);
    }
}

impl Sub for &Cyclotomic {
    type Output = Cyclotomic;
    fn sub(self, rhs: &Cyclotomic) -> Cyclotomic {
        binary(self, &-rhs, false)
    }
}

impl Sub for Cyclotomic {
    type Output = Cyclotomic;
    fn sub(self, rhs: Cyclotomic) -> Cyclotomic {
        &self - &rhs
    }
}

impl Mul for &Cyclotomic {
    type Output = Cyclotomic;
    fn mul(self, rhs: &Cyclotomic) -> Cyclotomic {
        binary(self, rhs, true)
    }
}

impl Mul for Cyclotomic {
    type Output = Cyclotomic;
    fn mul(self, rhs: Cyclotomic) -> Cyclotomic {
        binary(&self, &rhs, true)
    }
}

impl Neg for &Cyclotomic {
    type Output = Cyclotomic;
    fn neg(self) -> Cyclotomic {
        Cyclotomic { conductor: self.conductor, coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }
}

impl Neg for Cyclotomic {
    type Output = Cyclotomic;
    fn neg(self) -> Cyclotomic {
        -&self
    }
}

impl std::iter::Sum for Cyclotomic {
    fn sum<I: Iterator<Item = Cyclotomic>>(iter: I) -> Self {
        iter.fold(Cyclotomic::zero(), |a, b| &a + &b)
    }
}

/// A root of unity `ζ_order^exponent`, stored with `order` equal to its exact
/// multiplicative order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct RootOfUnity {
    pub order: u64,
    pub exponent: u64,
}

impl RootOfUnity {
    pub fn new(order: u64, exponent: i64) -> Self {
        assert!(order >= 1, "root of unity order must be positive");
        let e = arith::modn(exponent, order);
        let g = arith::gcd(e, order);
        let g = if e == 0 { order } else { g };
        RootOfUnity { order: order / g, exponent: e / g }
    }

    pub fn one() -> Self {
        RootOfUnity { order: 1, exponent: 0 }
    }

    pub fn times(self, other: Self) -> Self {
        let n = arith::lcm(self.order, other.order);
        let e = self.exponent * (n / self.order) + other.exponent * (n / other.order);
        Self::new(n, e as i64)
    }

    pub fn pow(self, k: i64) -> Self {
        let e = arith::modn(k, self.order) * self.exponent;
        Self::new(self.order, e as i64)
    }

    pub fn inverse(self) -> Self {
        self.pow(-1)
    }

    /// Exponent `e` with `self = ζ_n^e`, for a multiple `n` of the order.
    pub fn exponent_in(self, n: u64) -> Option<u64> {
        n.is_multiple_of(self.order).then(|| self.exponent * (n / self.order) % n)
    }

    pub fn to_cyclotomic(self) -> Cyclotomic {
        Cyclotomic::root(self.order, self.exponent as i64)
    }
}

impl fmt::Display for RootOfUnity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.order, self.exponent) {
            (1, _) => write!(f, "1"),
            (2, _) => write!(f, "-1"),
            (n, 1) => write!(f, "E({n})"),
            (n, k) => write!(f, "E({n})^{k}"),
        }
    }
}
