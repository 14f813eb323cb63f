//! Two small fixed configurations with hand-picked generator matrices.
//!
//! `example1`: K=2, N=2 over GF(2) with the (4,3) single-parity code.
//! `example2`: K=3, N=2 over GF(5) with a (6,4) code.

use std::str::FromStr;

use crate::galois::Field;
use crate::mds::GeneratorMatrix;
use crate::model::{FileLibrary, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Example1,
    Example2,
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "example1" => Ok(Preset::Example1),
            "example2" => Ok(Preset::Example2),
            other => Err(format!("unknown preset {other:?} (expected example1 or example2)")),
        }
    }
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Example1 => "example1",
            Preset::Example2 => "example2",
        }
    }

    /// Parameters with subfiles of `stripe_len` symbols, plus the generator.
    pub fn build(&self, stripe_len: usize) -> (SystemParams, GeneratorMatrix) {
        let (users, files, p, rows) = match self {
            Preset::Example1 => (2, 2, 2, EXAMPLE1_ROWS.iter().map(|r| r.to_vec()).collect::<Vec<_>>()),
            Preset::Example2 => (3, 2, 5, EXAMPLE2_ROWS.iter().map(|r| r.to_vec()).collect()),
        };
        let field = Field::new(p).expect("preset modulus is prime");
        let params = SystemParams::with_stripe(users, files, stripe_len, field).expect("preset parameters are valid");
        let g = GeneratorMatrix::from_rows(field, &rows).expect("preset generator is systematic");
        (params, g)
    }
}

const EXAMPLE1_ROWS: [[u64; 4]; 3] = [[1, 0, 0, 1], [0, 1, 0, 1], [0, 0, 1, 1]];

const EXAMPLE2_ROWS: [[u64; 6]; 4] = [
    [1, 0, 0, 0, 1, 1],
    [0, 1, 0, 0, 1, 2],
    [0, 0, 1, 0, 1, 3],
    [0, 0, 0, 1, 1, 4],
];

pub fn example1() -> (SystemParams, GeneratorMatrix) {
    Preset::Example1.build(1)
}

pub fn example2() -> (SystemParams, GeneratorMatrix) {
    Preset::Example2.build(1)
}

/// A fixed GF(2) library for the first example: `A = 101`, `B = 011`.
pub fn example1_library() -> FileLibrary {
    let (params, _) = example1();
    FileLibrary::new(params.field(), &[vec![1, 0, 1], vec![0, 1, 1]]).expect("valid library")
}
