//! Systematic MDS generator matrices: construction, encoding, any-k decoding
//! and exhaustive verification of the MDS property.
//!
//! Code positions are 1-based in every public signature.

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::galois::{Field, FieldElement, GaloisError, Matrix};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MdsError {
    #[error(transparent)]
    Galois(#[from] GaloisError),
    #[error("invalid code shape: n={n}, k={k}")]
    InvalidShape { n: usize, k: usize },
    #[error("GF({p}) has fewer than {n} elements; supply an explicit generator")]
    FieldTooSmall { p: u64, n: usize },
    #[error("generator is not in systematic form (left {k}x{k} block is not the identity)")]
    NotSystematic { k: usize },
    #[error("expected {expected} symbols, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("code position {position} is outside 1..={n}")]
    PositionOutOfRange { position: usize, n: usize },
    #[error("code position {0} repeated")]
    DuplicatePosition(usize),
    #[error("columns {positions:?} of the generator are linearly dependent")]
    SingularSubmatrix { positions: Vec<usize> },
    #[error("malformed generator document: {0}")]
    Document(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Construction {
    /// Row-reduced Vandermonde matrix; MDS by construction.
    ReedSolomon,
    /// Supplied by the caller; MDS only if `verify_mds` says so.
    Explicit,
}

/// A `k x n` generator in systematic form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorMatrix {
    matrix: Matrix,
    construction: Construction,
}

/// Outcome of an exhaustive MDS check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MdsVerdict {
    pub is_mds: bool,
    /// First (lexicographic) set of 1-based positions whose columns are
    /// dependent.
    pub witness: Option<Vec<usize>>,
    pub submatrices_checked: usize,
}

/// JSON fixture form: `{field_p, n, k, rows}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorDocument {
    pub field_p: u64,
    pub n: usize,
    pub k: usize,
    pub rows: Vec<Vec<u64>>,
}

/// Builds a systematic `(n, k)` Reed-Solomon generator over `field`.
///
/// The Vandermonde matrix evaluated at the points `0..n` has every `k x k`
/// column minor invertible; multiplying by the inverse of its left block
/// keeps that property and yields systematic form.
pub fn systematic_generator(n: usize, k: usize, field: Field) -> Result<GeneratorMatrix, MdsError> {
    if k == 0 || k > n {
        return Err(MdsError::InvalidShape { n, k });
    }
    if n == k {
        return Ok(GeneratorMatrix {
            matrix: Matrix::identity(field, k),
            construction: Construction::ReedSolomon,
        });
    }
    if (field.modulus() as u128) < n as u128 {
        return Err(MdsError::FieldTooSmall { p: field.modulus(), n });
    }
    let mut vandermonde = Matrix::zeros(field, k, n);
    for c in 0..n {
        let x = field.elem(c as u64)?;
        for r in 0..k {
            vandermonde.set(r, c, x.pow(r as u64));
        }
    }
    let left: Vec<usize> = (0..k).collect();
    let left_inv = vandermonde.select_columns(&left).inverse()?;
    let matrix = left_inv.mul(&vandermonde)?;
    Ok(GeneratorMatrix {
        matrix,
        construction: Construction::ReedSolomon,
    })
}

impl GeneratorMatrix {
    /// Wraps an explicit `k x n` matrix. Rejects non-systematic input but
    /// does not check the MDS property; see [`GeneratorMatrix::verify_mds`].
    pub fn from_rows(field: Field, rows: &[Vec<u64>]) -> Result<Self, MdsError> {
        let matrix = Matrix::from_values(field, rows)?;
        let (k, n) = (matrix.rows(), matrix.cols());
        if k == 0 || k > n {
            return Err(MdsError::InvalidShape { n, k });
        }
        for r in 0..k {
            for c in 0..k {
                let expected = if r == c { 1 } else { 0 };
                if matrix.get(r, c).value() != expected {
                    return Err(MdsError::NotSystematic { k });
                }
            }
        }
        Ok(GeneratorMatrix {
            matrix,
            construction: Construction::Explicit,
        })
    }

    pub fn from_document(doc: &GeneratorDocument) -> Result<Self, MdsError> {
        let field = Field::new(doc.field_p)?;
        if doc.rows.len() != doc.k || doc.rows.iter().any(|r| r.len() != doc.n) {
            return Err(MdsError::Document(format!(
                "declared {}x{} but rows do not match",
                doc.k, doc.n
            )));
        }
        Self::from_rows(field, &doc.rows)
    }

    pub fn to_document(&self) -> GeneratorDocument {
        GeneratorDocument {
            field_p: self.field().modulus(),
            n: self.n(),
            k: self.k(),
            rows: self.matrix.to_values(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, MdsError> {
        let doc: GeneratorDocument = serde_json::from_str(text).map_err(|e| MdsError::Document(e.to_string()))?;
        Self::from_document(&doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("generator document serializes")
    }

    pub fn k(&self) -> usize {
        self.matrix.rows()
    }

    pub fn n(&self) -> usize {
        self.matrix.cols()
    }

    pub fn field(&self) -> Field {
        self.matrix.field()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// Coefficient of message symbol `row` in code position `position` (both 1-based).
    pub fn coefficient(&self, row: usize, position: usize) -> FieldElement {
        self.matrix.get(row - 1, position - 1)
    }

    /// True when the matrix came from [`systematic_generator`] and therefore
    /// needs no exhaustive check.
    pub fn is_mds_by_construction(&self) -> bool {
        self.construction == Construction::ReedSolomon
    }

    /// Same matrix with one entry replaced; the result is treated as explicit.
    pub fn with_entry(&self, row: usize, position: usize, value: u64) -> Result<Self, MdsError> {
        let mut rows = self.matrix.to_values();
        rows[row - 1][position - 1] = value;
        Self::from_rows(self.field(), &rows)
    }

    /// Codeword `message · G`.
    pub fn encode(&self, message: &[FieldElement]) -> Result<Vec<FieldElement>, MdsError> {
        if message.len() != self.k() {
            return Err(MdsError::LengthMismatch {
                expected: self.k(),
                got: message.len(),
            });
        }
        Ok(self.matrix.left_mul_vec(message)?)
    }

    /// Encodes `k` subfiles of equal stripe length column-wise, returning
    /// `n` coded subfiles of the same length.
    pub fn encode_stripes(&self, subfiles: &[Vec<FieldElement>]) -> Result<Vec<Vec<FieldElement>>, MdsError> {
        if subfiles.len() != self.k() {
            return Err(MdsError::LengthMismatch {
                expected: self.k(),
                got: subfiles.len(),
            });
        }
        let stripes = subfiles[0].len();
        if let Some(bad) = subfiles.iter().find(|s| s.len() != stripes) {
            return Err(MdsError::LengthMismatch {
                expected: stripes,
                got: bad.len(),
            });
        }
        let mut coded = vec![Vec::with_capacity(stripes); self.n()];
        for t in 0..stripes {
            let message: Vec<FieldElement> = subfiles.iter().map(|s| s[t]).collect();
            for (slot, symbol) in coded.iter_mut().zip(self.encode(&message)?) {
                slot.push(symbol);
            }
        }
        Ok(coded)
    }

    fn decoding_matrix(&self, positions: &[usize]) -> Result<Matrix, MdsError> {
        if positions.len() != self.k() {
            return Err(MdsError::LengthMismatch {
                expected: self.k(),
                got: positions.len(),
            });
        }
        let mut cols = Vec::with_capacity(positions.len());
        for &p in positions {
            if p == 0 || p > self.n() {
                return Err(MdsError::PositionOutOfRange {
                    position: p,
                    n: self.n(),
                });
            }
            if cols.contains(&(p - 1)) {
                return Err(MdsError::DuplicatePosition(p));
            }
            cols.push(p - 1);
        }
        self.matrix.select_columns(&cols).inverse().map_err(|e| match e {
            GaloisError::Singular => MdsError::SingularSubmatrix {
                positions: positions.to_vec(),
            },
            other => other.into(),
        })
    }

    /// Recovers the message from the symbols at `k` distinct positions.
    pub fn decode_from_any_k(
        &self,
        positions: &[usize],
        symbols: &[FieldElement],
    ) -> Result<Vec<FieldElement>, MdsError> {
        if symbols.len() != positions.len() {
            return Err(MdsError::LengthMismatch {
                expected: positions.len(),
                got: symbols.len(),
            });
        }
        let inv = self.decoding_matrix(positions)?;
        Ok(inv.left_mul_vec(symbols)?)
    }

    /// Stripe-wise version of [`GeneratorMatrix::decode_from_any_k`]; the
    /// submatrix is inverted once.
    pub fn decode_stripes(
        &self,
        positions: &[usize],
        coded: &[Vec<FieldElement>],
    ) -> Result<Vec<Vec<FieldElement>>, MdsError> {
        if coded.len() != positions.len() {
            return Err(MdsError::LengthMismatch {
                expected: positions.len(),
                got: coded.len(),
            });
        }
        let inv = self.decoding_matrix(positions)?;
        let stripes = coded.first().map_or(0, Vec::len);
        let mut subfiles = vec![Vec::with_capacity(stripes); self.k()];
        for t in 0..stripes {
            let received: Vec<FieldElement> = coded.iter().map(|c| c[t]).collect();
            for (slot, symbol) in subfiles.iter_mut().zip(inv.left_mul_vec(&received)?) {
                slot.push(symbol);
            }
        }
        Ok(subfiles)
    }

    /// Checks all `C(n, k)` column submatrices.
    pub fn verify_mds(&self) -> MdsVerdict {
        let mut checked = 0;
        for cols in (0..self.n()).combinations(self.k()) {
            checked += 1;
            if !self.matrix.select_columns(&cols).is_invertible() {
                return MdsVerdict {
                    is_mds: false,
                    witness: Some(cols.iter().map(|c| c + 1).collect()),
                    submatrices_checked: checked,
                };
            }
        }
        MdsVerdict {
            is_mds: true,
            witness: None,
            submatrices_checked: checked,
        }
    }
}
