//! Polynomials over GF(2).
//!
//! Coefficients are stored as a little-endian bit vector: bit `i` of the
//! vector is the coefficient of `x^i`. Octal text follows the usual
//! coding-literature convention where the most significant digit holds the
//! highest degree, so `"7"` is `x^2 + x + 1` and `"15"` is `x^3 + x^2 + 1`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Errors from polynomial parsing and arithmetic.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolyError {
    /// Division by the zero polynomial.
    #[error("division by the zero polynomial")]
    DivisionByZero,
    /// Text that is not a nonempty octal number.
    #[error("invalid octal polynomial {0:?}")]
    InvalidOctal(String),
    /// `min_complementary` needs a polynomial of degree at least 1 with
    /// constant term 1.
    #[error("polynomial {0} must have degree >= 1 and constant term 1")]
    NotComplementable(Gf2Poly),
    /// The bounded search in `min_complementary` ran out. Cannot happen for
    /// valid inputs.
    #[error("no complementary polynomial for {0} within the search bound")]
    SearchExhausted(Gf2Poly),
}

/// A polynomial over GF(2).
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Gf2Poly {
    /// Coefficient words, least significant first, with no trailing zero
    /// words.
    words: Vec<u64>,
}

impl Gf2Poly {
    /// The zero polynomial.
    #[must_use]
    pub fn zero() -> Self {
        Self { words: Vec::new() }
    }

    /// The constant polynomial 1.
    #[must_use]
    pub fn one() -> Self {
        Self::from_u64(1)
    }

    /// `x^n`.
    #[must_use]
    pub fn monomial(n: usize) -> Self {
        let mut p = Self::zero();
        p.set_coeff(n, true);
        p
    }

    /// `x^n + 1`.
    #[must_use]
    pub fn x_pow_plus_one(n: usize) -> Self {
        &Self::monomial(n) + &Self::one()
    }

    /// Builds a polynomial from a coefficient mask (bit `i` = coefficient of
    /// `x^i`).
    #[must_use]
    pub fn from_u64(mask: u64) -> Self {
        let mut p = Self { words: vec![mask] };
        p.normalize();
        p
    }

    /// Builds a polynomial from the exponents of its nonzero terms.
    /// Repeated exponents cancel.
    #[must_use]
    pub fn from_exponents(exponents: &[usize]) -> Self {
        let mut p = Self::zero();
        for &e in exponents {
            let c = p.coeff(e);
            p.set_coeff(e, !c);
        }
        p
    }

    /// Parses octal text such as `"15"` (= `x^3 + x^2 + 1`).
    pub fn from_octal(text: &str) -> Result<Self, PolyError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(PolyError::InvalidOctal(text.to_string()));
        }
        let mut p = Self::zero();
        for ch in text.chars() {
            let digit = ch
                .to_digit(8)
                .ok_or_else(|| PolyError::InvalidOctal(text.to_string()))?;
            p = p.shifted(3);
            if digit != 0 {
                p = &p + &Self::from_u64(u64::from(digit));
            }
        }
        Ok(p)
    }

    /// Octal text of this polynomial, most significant digit first.
    #[must_use]
    pub fn to_octal(&self) -> String {
        let Some(deg) = self.degree() else {
            return "0".to_string();
        };
        let digits = deg / 3 + 1;
        (0..digits)
            .rev()
            .map(|d| {
                let v = (0..3).fold(0u32, |acc, b| acc | (u32::from(self.coeff(3 * d + b)) << b));
                char::from_digit(v, 8).unwrap_or('0')
            })
            .collect()
    }

    /// Degree, or `None` for the zero polynomial.
    #[must_use]
    pub fn degree(&self) -> Option<usize> {
        let top = *self.words.last()?;
        Some(64 * (self.words.len() - 1) + 63 - top.leading_zeros() as usize)
    }

    /// Degree with the zero polynomial mapped to 0.
    #[must_use]
    pub fn degree_or_zero(&self) -> usize {
        self.degree().unwrap_or(0)
    }

    #[must_use]
    pub fn is_zero(&self) -> bool {
        self.words.is_empty()
    }

    #[must_use]
    pub fn is_one(&self) -> bool {
        self.words == [1]
    }

    /// Coefficient of `x^i`.
    #[must_use]
    pub fn coeff(&self, i: usize) -> bool {
        self.words
            .get(i / 64)
            .is_some_and(|w| (w >> (i % 64)) & 1 == 1)
    }

    /// Sets the coefficient of `x^i`.
    pub fn set_coeff(&mut self, i: usize, value: bool) {
        let w = i / 64;
        if value {
            if self.words.len() <= w {
                self.words.resize(w + 1, 0);
            }
            self.words[w] |= 1 << (i % 64);
        } else if w < self.words.len() {
            self.words[w] &= !(1 << (i % 64));
            self.normalize();
        }
    }

    /// Exponents of the nonzero terms in increasing order.
    #[must_use]
    pub fn exponents(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (wi, &w) in self.words.iter().enumerate() {
            let mut bits = w;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                out.push(64 * wi + b);
                bits &= bits - 1;
            }
        }
        out
    }

    /// Number of nonzero terms.
    #[must_use]
    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Low 64 coefficients as a mask; `None` if the degree exceeds 63.
    #[must_use]
    pub fn to_u64(&self) -> Option<u64> {
        match self.words.len() {
            0 => Some(0),
            1 => Some(self.words[0]),
            _ => None,
        }
    }

    /// Multiplies by `x^n`.
    #[must_use]
    pub fn shifted(&self, n: usize) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let word_shift = n / 64;
        let bit_shift = n % 64;
        let mut words = vec![0u64; word_shift];
        words.reserve(self.words.len() + 1);
        let mut carry = 0u64;
        for &w in &self.words {
            if bit_shift == 0 {
                words.push(w);
            } else {
                words.push((w << bit_shift) | carry);
                carry = w >> (64 - bit_shift);
            }
        }
        if carry != 0 {
            words.push(carry);
        }
        let mut p = Self { words };
        p.normalize();
        p
    }

    /// Reciprocal with respect to degree `n`: `x^n p(1/x)`.
    ///
    /// # Panics
    /// Panics if `n` is smaller than the degree.
    #[must_use]
    pub fn reciprocal(&self, n: usize) -> Self {
        assert!(self.degree_or_zero() <= n, "reciprocal degree too small");
        let exps: Vec<usize> = self.exponents().into_iter().map(|e| n - e).collect();
        Self::from_exponents(&exps)
    }

    fn normalize(&mut self) {
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
    }

    fn xor_shifted_in_place(&mut self, other: &Self, shift: usize) {
        let shifted = other.shifted(shift);
        if self.words.len() < shifted.words.len() {
            self.words.resize(shifted.words.len(), 0);
        }
        for (a, b) in self.words.iter_mut().zip(&shifted.words) {
            *a ^= b;
        }
        self.normalize();
    }
}

/// Carry-less product of two polynomials.
#[must_use]
pub fn poly_mul(a: &Gf2Poly, b: &Gf2Poly) -> Gf2Poly {
    let mut out = Gf2Poly::zero();
    for e in b.exponents() {
        out.xor_shifted_in_place(a, e);
    }
    out
}

/// Long division: returns `(quotient, remainder)` with
/// `a = b * quotient + remainder` and `deg remainder < deg b`.
pub fn poly_divmod(a: &Gf2Poly, b: &Gf2Poly) -> Result<(Gf2Poly, Gf2Poly), PolyError> {
    let db = b.degree().ok_or(PolyError::DivisionByZero)?;
    let mut quotient = Gf2Poly::zero();
    let mut rem = a.clone();
    while let Some(dr) = rem.degree() {
        if dr < db {
            break;
        }
        quotient.set_coeff(dr - db, true);
        rem.xor_shifted_in_place(b, dr - db);
    }
    Ok((quotient, rem))
}

/// Smallest `l >= 1` and the polynomial `z` of degree `l` with
/// `a(x) z(x) = x^(deg a + l) + 1`.
///
/// The search runs over `l = 1 ..= 2^(deg a) - 1`; the order of `x` in the
/// unit group of `GF(2)[x]/(a)` is below `2^(deg a)`, so a solution always
/// exists within that range.
pub fn min_complementary(a: &Gf2Poly) -> Result<(Gf2Poly, usize), PolyError> {
    let n = match a.degree() {
        Some(n) if n >= 1 && a.coeff(0) => n,
        _ => return Err(PolyError::NotComplementable(a.clone())),
    };
    let bound = if n >= usize::BITS as usize - 1 {
        usize::MAX
    } else {
        (1usize << n) - 1
    };
    // Track x^(n+l) mod a incrementally instead of dividing afresh each time.
    let (_, mut power) = poly_divmod(&Gf2Poly::monomial(n), a)?;
    for l in 1..=bound {
        power = power.shifted(1);
        if power.coeff(n) {
            power = &power + a;
        }
        if power.is_one() {
            let (z, rem) = poly_divmod(&Gf2Poly::x_pow_plus_one(n + l), a)?;
            debug_assert!(rem.is_zero());
            return Ok((z, l));
        }
    }
    Err(PolyError::SearchExhausted(a.clone()))
}

impl std::ops::Add for &Gf2Poly {
    type Output = Gf2Poly;

    fn add(self, rhs: &Gf2Poly) -> Gf2Poly {
        let mut out = self.clone();
        out.xor_shifted_in_place(rhs, 0);
        out
    }
}

impl std::ops::Mul for &Gf2Poly {
    type Output = Gf2Poly;

    fn mul(self, rhs: &Gf2Poly) -> Gf2Poly {
        poly_mul(self, rhs)
    }
}

impl FromStr for Gf2Poly {
    type Err = PolyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_octal(s)
    }
}

impl fmt::Display for Gf2Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let terms: Vec<String> = self
            .exponents()
            .into_iter()
            .rev()
            .map(|e| match e {
                0 => "1".to_string(),
                1 => "x".to_string(),
                _ => format!("x^{e}"),
            })
            .collect();
        f.write_str(&terms.join("+"))
    }
}

impl fmt::Debug for Gf2Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Gf2Poly({self})")
    }
}
