//! Arithmetic in prime fields GF(p) and dense matrices over them.
//!
//! Subfile symbols live in a single field per caching system. Elements carry
//! their modulus so that mixing elements of two different fields is caught
//! instead of silently producing garbage.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest modulus accepted; keeps `a * b` inside a `u64`.
pub const MAX_MODULUS: u64 = u32::MAX as u64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GaloisError {
    #[error("{0} is not a prime modulus")]
    NotPrime(u64),
    #[error("modulus {0} exceeds the supported maximum")]
    ModulusTooLarge(u64),
    #[error("value {value} is not an element of GF({p})")]
    OutOfRange { value: u64, p: u64 },
    #[error("operands belong to different fields: GF({left}) and GF({right})")]
    FieldMismatch { left: u64, right: u64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("matrix is singular")]
    Singular,
    #[error("matrix dimensions do not agree: {0}")]
    Dimension(String),
    #[error("system needs at least one user and one file (got K={users}, N={files})")]
    EmptySystem { users: usize, files: usize },
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n.is_multiple_of(2) {
        return false;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// The prime field GF(p).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Field {
    p: u64,
}

impl<'de> Deserialize<'de> for Field {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            p: u64,
        }
        let raw = Raw::deserialize(deserializer)?;
        Field::new(raw.p).map_err(serde::de::Error::custom)
    }
}

impl Field {
    pub fn new(p: u64) -> Result<Self, GaloisError> {
        if p > MAX_MODULUS {
            return Err(GaloisError::ModulusTooLarge(p));
        }
        if !is_prime(p) {
            return Err(GaloisError::NotPrime(p));
        }
        Ok(Field { p })
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    pub fn elem(&self, value: u64) -> Result<FieldElement, GaloisError> {
        if value >= self.p {
            return Err(GaloisError::OutOfRange { value, p: self.p });
        }
        Ok(FieldElement { value, p: self.p })
    }

    /// Reduces an arbitrary integer into the field.
    pub fn reduce(&self, value: i64) -> FieldElement {
        let value = value.rem_euclid(self.p as i64) as u64;
        FieldElement { value, p: self.p }
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement { value: 0, p: self.p }
    }

    pub fn one(&self) -> FieldElement {
        FieldElement {
            value: 1 % self.p,
            p: self.p,
        }
    }

    pub fn elements(&self) -> impl Iterator<Item = FieldElement> + '_ {
        (0..self.p).map(move |value| FieldElement { value, p: self.p })
    }

    pub fn elems(&self, values: &[u64]) -> Result<Vec<FieldElement>, GaloisError> {
        values.iter().map(|&v| self.elem(v)).collect()
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF({})", self.p)
    }
}

/// Field for a `(K, N)` system: the smallest prime `>= max(K*N, 2)`.
///
/// A Reed-Solomon code of length `K*N` needs that many distinct evaluation
/// points, which the smallest such prime provides.
pub fn field_for_params(users: usize, files: usize) -> Result<Field, GaloisError> {
    if users == 0 || files == 0 {
        return Err(GaloisError::EmptySystem { users, files });
    }
    let mut p = users.saturating_mul(files).max(2) as u64;
    while !is_prime(p) {
        p += 1;
    }
    Field::new(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElement {
    value: u64,
    p: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl FieldElement {
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn field(&self) -> Field {
        Field { p: self.p }
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    fn same_field(&self, other: &Self) -> Result<(), GaloisError> {
        if self.p != other.p {
            return Err(GaloisError::FieldMismatch {
                left: self.p,
                right: other.p,
            });
        }
        Ok(())
    }

    pub fn try_add(self, other: Self) -> Result<Self, GaloisError> {
        self.same_field(&other)?;
        Ok(self.add_unchecked(other))
    }

    pub fn try_sub(self, other: Self) -> Result<Self, GaloisError> {
        self.same_field(&other)?;
        Ok(self.add_unchecked(other.neg_unchecked()))
    }

    pub fn try_mul(self, other: Self) -> Result<Self, GaloisError> {
        self.same_field(&other)?;
        Ok(self.mul_unchecked(other))
    }

    pub fn try_div(self, other: Self) -> Result<Self, GaloisError> {
        self.same_field(&other)?;
        Ok(self.mul_unchecked(other.inverse()?))
    }

    pub fn pow(self, mut exp: u64) -> Self {
        let mut base = self;
        let mut acc = self.field().one();
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc.mul_unchecked(base);
            }
            base = base.mul_unchecked(base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat's little theorem.
    pub fn inverse(self) -> Result<Self, GaloisError> {
        if self.is_zero() {
            return Err(GaloisError::DivisionByZero);
        }
        Ok(self.pow(self.p - 2))
    }

    fn add_unchecked(self, other: Self) -> Self {
        FieldElement {
            value: (self.value + other.value) % self.p,
            p: self.p,
        }
    }

    fn neg_unchecked(self) -> Self {
        FieldElement {
            value: (self.p - self.value) % self.p,
            p: self.p,
        }
    }

    fn mul_unchecked(self, other: Self) -> Self {
        FieldElement {
            value: (self.value * other.value) % self.p,
            p: self.p,
        }
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

/// Checked binary arithmetic on two field elements.
pub fn field_arith(a: FieldElement, b: FieldElement, op: ArithOp) -> Result<FieldElement, GaloisError> {
    match op {
        ArithOp::Add => a.try_add(b),
        ArithOp::Sub => a.try_sub(b),
        ArithOp::Mul => a.try_mul(b),
        ArithOp::Div => a.try_div(b),
    }
}

// Operator impls panic on a field mismatch. They are meant for code paths
// where both operands provably come from the same system; use the `try_*`
// forms on untrusted input.
impl Add for FieldElement {
    type Output = FieldElement;
    fn add(self, rhs: Self) -> Self {
        self.try_add(rhs).expect("field mismatch in addition")
    }
}

impl Sub for FieldElement {
    type Output = FieldElement;
    fn sub(self, rhs: Self) -> Self {
        self.try_sub(rhs).expect("field mismatch in subtraction")
    }
}

impl Mul for FieldElement {
    type Output = FieldElement;
    fn mul(self, rhs: Self) -> Self {
        self.try_mul(rhs).expect("field mismatch in multiplication")
    }
}

impl Neg for FieldElement {
    type Output = FieldElement;
    fn neg(self) -> Self {
        self.neg_unchecked()
    }
}

/// Dense row-major matrix over a prime field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    field: Field,
    rows: usize,
    cols: usize,
    data: Vec<FieldElement>,
}

impl Matrix {
    pub fn from_values(field: Field, values: &[Vec<u64>]) -> Result<Self, GaloisError> {
        let rows = values.len();
        let cols = values.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows * cols);
        for (r, row) in values.iter().enumerate() {
            if row.len() != cols {
                return Err(GaloisError::Dimension(format!(
                    "row {} has {} entries, expected {}",
                    r,
                    row.len(),
                    cols
                )));
            }
            for &v in row {
                data.push(field.elem(v)?);
            }
        }
        Ok(Matrix {
            field,
            rows,
            cols,
            data,
        })
    }

    pub fn zeros(field: Field, rows: usize, cols: usize) -> Self {
        Matrix {
            field,
            rows,
            cols,
            data: vec![field.zero(); rows * cols],
        }
    }

    pub fn identity(field: Field, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.set(i, i, field.one());
        }
        m
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> FieldElement {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: FieldElement) {
        debug_assert_eq!(v.field(), self.field);
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[FieldElement] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_values(&self) -> Vec<Vec<u64>> {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(FieldElement::value).collect())
            .collect()
    }

    /// Sub-matrix made of the given 0-based columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(self.field, self.rows, cols.len());
        for r in 0..self.rows {
            for (j, &c) in cols.iter().enumerate() {
                out.set(r, j, self.get(r, c));
            }
        }
        out
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix, GaloisError> {
        if self.field != other.field {
            return Err(GaloisError::FieldMismatch {
                left: self.field.p,
                right: other.field.p,
            });
        }
        if self.cols != other.rows {
            return Err(GaloisError::Dimension(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.field, self.rows, other.cols);
        for r in 0..self.rows {
            for c in 0..other.cols {
                let mut acc = self.field.zero();
                for i in 0..self.cols {
                    acc = acc + self.get(r, i) * other.get(i, c);
                }
                out.set(r, c, acc);
            }
        }
        Ok(out)
    }

    /// Row vector times matrix: `v · self`.
    pub fn left_mul_vec(&self, v: &[FieldElement]) -> Result<Vec<FieldElement>, GaloisError> {
        if v.len() != self.rows {
            return Err(GaloisError::Dimension(format!(
                "vector of length {} times {}x{} matrix",
                v.len(),
                self.rows,
                self.cols
            )));
        }
        for x in v {
            if x.field() != self.field {
                return Err(GaloisError::FieldMismatch {
                    left: x.p,
                    right: self.field.p,
                });
            }
        }
        let mut out = vec![self.field.zero(); self.cols];
        for (r, &x) in v.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (c, slot) in out.iter_mut().enumerate() {
                *slot = *slot + x * self.get(r, c);
            }
        }
        Ok(out)
    }

    /// Gauss-Jordan inverse.
    pub fn inverse(&self) -> Result<Matrix, GaloisError> {
        if !self.is_square() {
            return Err(GaloisError::Dimension(format!(
                "cannot invert a {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Matrix::identity(self.field, n);
        for col in 0..n {
            let pivot = (col..n)
                .find(|&r| !a.get(r, col).is_zero())
                .ok_or(GaloisError::Singular)?;
            if pivot != col {
                a.swap_rows(pivot, col);
                inv.swap_rows(pivot, col);
            }
            let scale = a.get(col, col).inverse()?;
            a.scale_row(col, scale);
            inv.scale_row(col, scale);
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a.get(r, col);
                if factor.is_zero() {
                    continue;
                }
                a.sub_scaled_row(r, col, factor);
                inv.sub_scaled_row(r, col, factor);
            }
        }
        Ok(inv)
    }

    pub fn is_invertible(&self) -> bool {
        self.inverse().is_ok()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    fn scale_row(&mut self, r: usize, s: FieldElement) {
        for c in 0..self.cols {
            let v = self.get(r, c) * s;
            self.set(r, c, v);
        }
    }

    // row[target] -= factor * row[source]
    fn sub_scaled_row(&mut self, target: usize, source: usize, factor: FieldElement) {
        for c in 0..self.cols {
            let v = self.get(target, c) - factor * self.get(source, c);
            self.set(target, c, v);
        }
    }
}

pub fn invert_matrix(m: &Matrix) -> Result<Matrix, GaloisError> {
    m.inverse()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gf(p: u64) -> Field {
        Field::new(p).unwrap()
    }

    #[test]
    fn primality() {
        let primes: Vec<u64> = (0..30).filter(|&n| is_prime(n)).collect();
        assert_eq!(primes, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
        assert_eq!(Field::new(4), Err(GaloisError::NotPrime(4)));
        assert_eq!(Field::new(1), Err(GaloisError::NotPrime(1)));
    }

    #[test]
    fn field_choice_per_system() {
        assert_eq!(field_for_params(2, 2).unwrap().modulus(), 5);
        assert_eq!(field_for_params(3, 2).unwrap().modulus(), 7);
        assert_eq!(field_for_params(1, 1).unwrap().modulus(), 2);
        assert_eq!(field_for_params(5, 5).unwrap().modulus(), 29);
        assert!(matches!(field_for_params(0, 2), Err(GaloisError::EmptySystem { .. })));
        assert!(field_for_params(3, 0).is_err());
    }

    #[test]
    fn arithmetic_examples() {
        let f5 = gf(5);
        let a = f5.elem(3).unwrap();
        let b = f5.elem(4).unwrap();
        assert_eq!(field_arith(a, b, ArithOp::Add).unwrap().value(), 2);
        let one = f5.elem(1).unwrap();
        let three = f5.elem(3).unwrap();
        assert_eq!(field_arith(one, three, ArithOp::Sub).unwrap().value(), 3);

        let f2 = gf(2);
        let x = f2.elem(1).unwrap();
        assert_eq!(field_arith(x, x, ArithOp::Add).unwrap().value(), 0);
    }

    #[test]
    fn arithmetic_errors() {
        let f5 = gf(5);
        let f7 = gf(7);
        let a = f5.elem(2).unwrap();
        assert_eq!(
            field_arith(a, f5.zero(), ArithOp::Div),
            Err(GaloisError::DivisionByZero)
        );
        assert_eq!(
            field_arith(a, f7.elem(2).unwrap(), ArithOp::Add),
            Err(GaloisError::FieldMismatch { left: 5, right: 7 })
        );
        assert_eq!(f5.elem(5), Err(GaloisError::OutOfRange { value: 5, p: 5 }));
    }

    #[test]
    fn exhaustive_inverse_laws_small_primes() {
        for p in [2u64, 3, 5, 7, 11, 13] {
            let f = gf(p);
            for a in f.elements() {
                for b in f.elements() {
                    assert_eq!((a + b) - b, a);
                    if !b.is_zero() {
                        assert_eq!(a.try_mul(b).unwrap().try_div(b).unwrap(), a);
                    }
                }
            }
        }
    }

    #[test]
    fn invert_examples() {
        let f5 = gf(5);
        let id = Matrix::identity(f5, 3);
        assert_eq!(invert_matrix(&id).unwrap(), id);

        let m = Matrix::from_values(f5, &[vec![1, 1], vec![1, 2]]).unwrap();
        let inv = invert_matrix(&m).unwrap();
        assert_eq!(inv.to_values(), vec![vec![2, 4], vec![4, 1]]);
        assert_eq!(m.mul(&inv).unwrap(), Matrix::identity(f5, 2));

        let singular = Matrix::from_values(f5, &[vec![1, 1], vec![2, 2]]).unwrap();
        assert_eq!(invert_matrix(&singular), Err(GaloisError::Singular));

        let rect = Matrix::from_values(f5, &[vec![1, 1, 0]]).unwrap();
        assert!(matches!(rect.inverse(), Err(GaloisError::Dimension(_))));
    }

    #[test]
    fn inverse_of_every_invertible_2x2_over_gf3() {
        let f = gf(3);
        let mut invertible = 0;
        for code in 0..81u64 {
            let vals = [code % 3, (code / 3) % 3, (code / 9) % 3, (code / 27) % 3];
            let m = Matrix::from_values(f, &[vec![vals[0], vals[1]], vec![vals[2], vals[3]]]).unwrap();
            let det = (vals[0] * vals[3] + 3 - (vals[1] * vals[2]) % 3) % 3;
            match m.inverse() {
                Ok(inv) => {
                    invertible += 1;
                    assert_ne!(det, 0);
                    assert_eq!(inv.mul(&m).unwrap(), Matrix::identity(f, 2));
                }
                Err(e) => {
                    assert_eq!(e, GaloisError::Singular);
                    assert_eq!(det, 0);
                }
            }
        }
        // |GL(2,3)| = (9-1)(9-3)
        assert_eq!(invertible, 48);
    }

    #[test]
    fn left_mul_vec_matches_matrix_product_shape() {
        let f = gf(7);
        let m = Matrix::from_values(f, &[vec![1, 2, 3], vec![4, 5, 6]]).unwrap();
        let v = f.elems(&[1, 1]).unwrap();
        let out: Vec<u64> = m.left_mul_vec(&v).unwrap().iter().map(|x| x.value()).collect();
        assert_eq!(out, vec![5, 0, 2]);
        assert!(m.left_mul_vec(&f.elems(&[1]).unwrap()).is_err());
    }
}
