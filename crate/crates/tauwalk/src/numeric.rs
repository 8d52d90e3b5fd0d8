//! Scalars, exact helpers and determinants shared by every module.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Q = BigRational;

/// Commutative ring element usable as a state-vector coefficient or matrix entry.
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    /// Whether the value should be dropped from sparse containers.
    fn is_negligible(&self, floor: f64) -> bool;
}

impl Scalar for f64 {
    fn is_negligible(&self, floor: f64) -> bool {
        self.abs() <= floor
    }
}

impl Scalar for Q {
    fn is_negligible(&self, _floor: f64) -> bool {
        self.is_zero()
    }
}

impl Scalar for Laurent {
    fn is_negligible(&self, _floor: f64) -> bool {
        self.is_zero()
    }
}

/// Scalars with exact-enough division, used where recurrences divide by integers.
pub trait Field: Scalar + std::ops::Div<Output = Self> {
    fn from_i64(n: i64) -> Self;
    fn det(m: &Matrix<Self>) -> Self;
}

impl Field for f64 {
    fn from_i64(n: i64) -> Self {
        n as f64
    }
    fn det(m: &Matrix<Self>) -> Self {
        det_f64(m).0
    }
}

impl Field for Q {
    fn from_i64(n: i64) -> Self {
        q_int(n)
    }
    fn det(m: &Matrix<Self>) -> Self {
        det_rational(m)
    }
}

pub fn q_int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn q_frac(p: i64, q: i64) -> Q {
    Q::new(BigInt::from(p), BigInt::from(q))
}

pub fn q_to_f64(x: &Q) -> f64 {
    // numer/denom may individually overflow f64; go through logs then.
    match (x.numer().to_f64(), x.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            if x.is_zero() {
                return 0.0;
            }
            let s = if x.is_negative() { -1.0 } else { 1.0 };
            s * q_ln_abs(x).exp()
        }
    }
}

pub fn big_ln(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits < 1000 {
        return n.to_f64().unwrap().abs().ln();
    }
    let shift = bits - 64;
    let top: BigInt = n.abs() >> shift;
    top.to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

/// ln |x| for a non-zero rational of any size.
pub fn q_ln_abs(x: &Q) -> f64 {
    big_ln(x.numer()) - big_ln(x.denom())
}

/// "p/q", or "p" for integers.
pub fn q_to_string(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Parses "p", "p/q" or a finite decimal like "0.25" into an exact rational.
pub fn parse_rational(s: &str) -> Option<Q> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(Q::new(p, q));
    }
    if s.contains(['e', 'E']) {
        return None;
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    let digits = format!("{int}{frac}");
    if !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let n: BigInt = digits.parse().ok()?;
    let d = num_traits::pow(BigInt::from(10), frac.len());
    let v = Q::new(n, d);
    Some(if neg { -v } else { v })
}

pub fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * k)
}

pub fn binomial(a: i64, b: i64) -> BigInt {
    if b < 0 || a < 0 || b > a {
        return BigInt::zero();
    }
    let b = b.min(a - b);
    let mut acc = BigInt::one();
    for i in 0..b {
        acc = acc * (a - i) / (i + 1);
    }
    acc
}

pub fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    libm::lgamma(n as f64 + 1.0)
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Neumaier-compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Numerically stable log(Σ exp(v)).
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let mut s = KahanSum::default();
    for v in values {
        s.add((v - m).exp());
    }
    m + s.value().ln()
}

/// Laurent polynomial in one formal variable `w` with rational coefficients.
///
/// Gauss-type Boltzmann factors are integer powers of w = e^{-c/2}, so keeping
/// w formal lets those potentials stay exact.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Laurent {
    terms: BTreeMap<i64, Q>,
}

impl Laurent {
    pub fn monomial(coef: Q, exp: i64) -> Self {
        let mut terms = BTreeMap::new();
        if !coef.is_zero() {
            terms.insert(exp, coef);
        }
        Laurent { terms }
    }

    pub fn constant(c: Q) -> Self {
        Self::monomial(c, 0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&i64, &Q)> {
        self.terms.iter()
    }

    /// The rational value when no power of w survives.
    pub fn as_rational(&self) -> Option<Q> {
        match self.terms.len() {
            0 => Some(Q::zero()),
            1 => self.terms.get(&0).cloned(),
            _ => None,
        }
    }

    pub fn eval(&self, w: f64) -> f64 {
        let mut s = KahanSum::default();
        for (e, c) in &self.terms {
            s.add(q_to_f64(c) * w.powi(*e as i32));
        }
        s.value()
    }

    fn add_term(&mut self, e: i64, c: Q) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(e).or_insert_with(Q::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&e);
        }
    }
}

impl Add for Laurent {
    type Output = Laurent;
    fn add(mut self, rhs: Laurent) -> Laurent {
        for (e, c) in rhs.terms {
            self.add_term(e, c);
        }
        self
    }
}

impl Sub for Laurent {
    type Output = Laurent;
    fn sub(self, rhs: Laurent) -> Laurent {
        self + (-rhs)
    }
}

impl Neg for Laurent {
    type Output = Laurent;
    fn neg(mut self) -> Laurent {
        for c in self.terms.values_mut() {
            *c = -c.clone();
        }
        self
    }
}

impl Mul for Laurent {
    type Output = Laurent;
    fn mul(self, rhs: Laurent) -> Laurent {
        let mut out = Laurent::default();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &rhs.terms {
                out.add_term(e1 + e2, c1 * c2);
            }
        }
        out
    }
}

impl Zero for Laurent {
    fn zero() -> Self {
        Laurent::default()
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

impl One for Laurent {
    fn one() -> Self {
        Laurent::constant(Q::one())
    }
}

/// Dense square matrix helper: row-major `Vec<Vec<S>>`.
pub type Matrix<S> = Vec<Vec<S>>;

fn check_square<S>(m: &Matrix<S>) -> Result<usize> {
    let n = m.len();
    for row in m {
        if row.len() != n {
            return Err(Error::LengthMismatch { left: n, right: row.len() });
        }
    }
    Ok(n)
}

/// Division-free determinant by cofactor expansion memoized over used-column sets.
/// O(n 2^n); intended for n ≤ 16.
pub fn det_ring<S: Scalar>(m: &Matrix<S>) -> S {
    let n = check_square(m).expect("square matrix");
    assert!(n <= 20, "det_ring is exponential; size {n} too large");
    if n == 0 {
        return S::one();
    }
    let mut dp: Vec<Option<S>> = vec![None; 1 << n];
    dp[0] = Some(S::one());
    for mask in 0usize..(1 << n) {
        let Some(cur) = dp[mask].take() else { continue };
        let r = mask.count_ones() as usize;
        if r == n {
            dp[mask] = Some(cur);
            continue;
        }
        for c in 0..n {
            if mask & (1 << c) != 0 || m[r][c].is_zero() {
                continue;
            }
            let above = (mask >> (c + 1)).count_ones();
            let mut term = cur.clone() * m[r][c].clone();
            if above % 2 == 1 {
                term = -term;
            }
            let next = mask | (1 << c);
            dp[next] = Some(match dp[next].take() {
                Some(v) => v + term,
                None => term,
            });
        }
    }
    dp[(1 << n) - 1].take().unwrap_or_else(S::zero)
}

/// Exact Gaussian elimination over the rationals.
pub fn det_rational(m: &Matrix<Q>) -> Q {
    let n = check_square(m).expect("square matrix");
    let mut a = m.clone();
    let mut det = Q::one();
    for col in 0..n {
        let Some(p) = (col..n).find(|&r| !a[r][col].is_zero()) else {
            return Q::zero();
        };
        if p != col {
            a.swap(p, col);
            det = -det;
        }
        let pivot = a[col][col].clone();
        det *= &pivot;
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let f = &a[r][col] / &pivot;
            for c in col..n {
                let v = &f * &a[col][c];
                a[r][c] -= v;
            }
        }
    }
    det
}

/// Fraction-free Bareiss elimination over the integers.
pub fn det_bigint(m: &Matrix<BigInt>) -> BigInt {
    let n = check_square(m).expect("square matrix");
    if n == 0 {
        return BigInt::one();
    }
    let mut a = m.clone();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                Some(p) => {
                    a.swap(p, k);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                let (q, r) = v.div_rem(&prev);
                debug_assert!(r.is_zero());
                a[i][j] = q;
            }
        }
        prev = a[k][k].clone();
    }
    sign * a[n - 1][n - 1].clone()
}

/// Partially pivoted elimination; returns (det, crude condition estimate
/// max|pivot| / min|pivot|).
pub fn det_f64(m: &Matrix<f64>) -> (f64, f64) {
    let n = check_square(m).expect("square matrix");
    let mut a = m.clone();
    let mut det = 1.0;
    let (mut pmax, mut pmin) = (0.0f64, f64::INFINITY);
    for col in 0..n {
        let p = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        if a[p][col] == 0.0 {
            return (0.0, f64::INFINITY);
        }
        if p != col {
            a.swap(p, col);
            det = -det;
        }
        let pivot = a[col][col];
        pmax = pmax.max(pivot.abs());
        pmin = pmin.min(pivot.abs());
        det *= pivot;
        for r in col + 1..n {
            let f = a[r][col] / pivot;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let cond = if n == 0 { 1.0 } else { pmax / pmin };
    (det, cond)
}

pub fn mat_mul<S: Scalar>(a: &Matrix<S>, b: &Matrix<S>) -> Matrix<S> {
    let n = a.len();
    let k = b.len();
    let m = if k == 0 { 0 } else { b[0].len() };
    let mut out = vec![vec![S::zero(); m]; n];
    for i in 0..n {
        for l in 0..k {
            if a[i][l].is_zero() {
                continue;
            }
            for j in 0..m {
                if !b[l][j].is_zero() {
                    out[i][j] = out[i][j].clone() + a[i][l].clone() * b[l][j].clone();
                }
            }
        }
    }
    out
}

/// Formats a float with 9 significant digits for CSV output.
pub fn sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    format!("{x:.8e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_rationals() {
        assert_eq!(parse_rational("0.25"), Some(q_frac(1, 4)));
        assert_eq!(parse_rational("-3/6"), Some(q_frac(-1, 2)));
        assert_eq!(parse_rational("2"), Some(q_int(2)));
        assert_eq!(parse_rational("1e3"), None);
        assert_eq!(q_to_string(&q_frac(6, 3)), "2");
    }

    #[test]
    fn determinant_routes_agree() {
        let m: Matrix<i64> = vec![vec![2, -1, 3, 0], vec![1, 4, 0, 2], vec![0, 5, 1, 1], vec![7, 0, 2, 3]];
        let qm: Matrix<Q> = m.iter().map(|r| r.iter().map(|&v| q_int(v)).collect()).collect();
        let bm: Matrix<BigInt> = m.iter().map(|r| r.iter().map(|&v| BigInt::from(v)).collect()).collect();
        let fm: Matrix<f64> = m.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
        let exact = det_rational(&qm);
        assert_eq!(det_ring(&qm), exact);
        assert_eq!(Q::from_integer(det_bigint(&bm)), exact);
        assert!((det_f64(&fm).0 - q_to_f64(&exact)).abs() < 1e-9);
    }

    #[test]
    fn laurent_arithmetic() {
        let a = Laurent::monomial(q_int(2), 3);
        let b = Laurent::monomial(q_frac(1, 2), -3);
        assert_eq!(a.clone() * b, Laurent::one());
        assert!((a.eval(0.5) - 0.25).abs() < 1e-15);
        assert!((a.clone() - a).is_zero());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), BigInt::from(6));
        assert_eq!(binomial(1, 2), BigInt::zero());
        assert!((ln_factorial(10) - (3628800f64).ln()).abs() < 1e-12);
    }
}
