//! The `(KN, N)` non-private scheme with coded placement.
//!
//! Each file is split into `K(N-1)+1` subfiles and encoded with a
//! `(KN, K(N-1)+1)` MDS code. Virtual user `i` caches the field sum of the
//! `i`-th coded subfile of every file. Under a uniform demand profile
//! (every file requested by exactly `K` virtual users) the server sends, for
//! each virtual user, the coded subfiles at that user's position of every
//! file it did not request.

use serde::Serialize;
use thiserror::Error;

use crate::galois::FieldElement;
use crate::mds::{GeneratorMatrix, MdsError};
use crate::model::{
    demand_profile, CacheContent, DemandVector, FileLibrary, ModelError, SystemParams, Transmission, TransmissionRecord,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mds(#[from] MdsError),
    #[error("generator is {k}x{n}, the system needs {expected_k}x{expected_n}")]
    GeneratorShape {
        n: usize,
        k: usize,
        expected_n: usize,
        expected_k: usize,
    },
    #[error("generator over GF({generator}) but the system uses GF({system})")]
    FieldMismatch { generator: u64, system: u64 },
    #[error("generator is not MDS: columns {witness:?} are dependent")]
    NotMds { witness: Vec<usize> },
    #[error("demand vector has {got} entries, expected {expected}")]
    DemandLength { expected: usize, got: usize },
    #[error("demand profile {counts:?} is not uniform")]
    NonUniformProfile { counts: Vec<usize> },
    #[error("broadcast lacks the subfile of file {file} for virtual user {virtual_user}")]
    MissingTransmission { virtual_user: usize, file: usize },
    #[error("only {available} coded subfiles available, {needed} needed")]
    InsufficientSubfiles { needed: usize, available: usize },
    #[error("cache holds {got} symbols, expected {expected}")]
    CacheLength { expected: usize, got: usize },
    #[error("virtual user {0} does not exist")]
    NoSuchUser(usize),
    #[error("memory {0} is outside the achievable range")]
    Memory(String),
    #[error("{0} keys supplied for {1} users")]
    KeyCount(usize, usize),
    #[error("key {value} for user {user} is outside 1..={files}")]
    KeyOutOfRange { user: usize, value: usize, files: usize },
}

/// Coded subfile `C_{n,i}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CodedSubfile {
    pub file_index: usize,
    pub position: usize,
    #[serde(serialize_with = "serialize_symbols")]
    pub symbols: Vec<FieldElement>,
}

fn serialize_symbols<S: serde::Serializer>(symbols: &[FieldElement], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(symbols.iter().map(FieldElement::value))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonPrivatePlacement {
    params: SystemParams,
    generator: GeneratorMatrix,
    coded: Vec<Vec<CodedSubfile>>,
    caches: Vec<CacheContent>,
}

fn check_generator(params: &SystemParams, g: &GeneratorMatrix) -> Result<(), SchemeError> {
    let (expected_n, expected_k) = (params.virtual_user_count(), params.subpacket_count());
    if g.n() != expected_n || g.k() != expected_k {
        return Err(SchemeError::GeneratorShape {
            n: g.n(),
            k: g.k(),
            expected_n,
            expected_k,
        });
    }
    if g.field() != params.field() {
        return Err(SchemeError::FieldMismatch {
            generator: g.field().modulus(),
            system: params.field().modulus(),
        });
    }
    Ok(())
}

/// Placement with a generator known to be MDS, either by construction or by
/// an exhaustive check.
pub fn np_place(
    params: &SystemParams,
    lib: &FileLibrary,
    g: &GeneratorMatrix,
) -> Result<NonPrivatePlacement, SchemeError> {
    check_generator(params, g)?;
    if !g.is_mds_by_construction() {
        let verdict = g.verify_mds();
        if let Some(witness) = verdict.witness {
            return Err(SchemeError::NotMds { witness });
        }
    }
    np_place_unchecked(params, lib, g)
}

/// Placement that skips the MDS check. Used by audits that deliberately run
/// broken generators to observe decoding failures.
pub fn np_place_unchecked(
    params: &SystemParams,
    lib: &FileLibrary,
    g: &GeneratorMatrix,
) -> Result<NonPrivatePlacement, SchemeError> {
    check_generator(params, g)?;
    lib.check_matches(params)?;
    let stripe = params.stripe_len();
    let subpackets = params.subpacket_count();
    let field = params.field();

    let mut coded = Vec::with_capacity(params.files());
    for (n, file) in lib.files().iter().enumerate() {
        let subfiles: Vec<Vec<FieldElement>> = (0..subpackets)
            .map(|j| file[j * stripe..(j + 1) * stripe].to_vec())
            .collect();
        let codewords = g.encode_stripes(&subfiles)?;
        coded.push(
            codewords
                .into_iter()
                .enumerate()
                .map(|(i, symbols)| CodedSubfile {
                    file_index: n + 1,
                    position: i + 1,
                    symbols,
                })
                .collect::<Vec<_>>(),
        );
    }

    let caches = (0..params.virtual_user_count())
        .map(|i| {
            let mut symbols = vec![field.zero(); stripe];
            for file in &coded {
                for (acc, &s) in symbols.iter_mut().zip(&file[i].symbols) {
                    *acc = *acc + s;
                }
            }
            CacheContent { user: i + 1, symbols }
        })
        .collect();

    Ok(NonPrivatePlacement {
        params: *params,
        generator: g.clone(),
        coded,
        caches,
    })
}

impl NonPrivatePlacement {
    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn generator(&self) -> &GeneratorMatrix {
        &self.generator
    }

    /// `C_{n,i}`, both 1-based.
    pub fn coded(&self, file: usize, position: usize) -> &CodedSubfile {
        &self.coded[file - 1][position - 1]
    }

    pub fn caches(&self) -> &[CacheContent] {
        &self.caches
    }

    /// `Z_i` of virtual user `i`, 1-based.
    pub fn cache(&self, virtual_user: usize) -> &CacheContent {
        &self.caches[virtual_user - 1]
    }

    pub fn deliver(&self, d: &DemandVector) -> Result<TransmissionRecord, SchemeError> {
        np_deliver(self, d)
    }
}

/// Broadcast for a uniform demand over the `KN` virtual users.
pub fn np_deliver(pl: &NonPrivatePlacement, d: &DemandVector) -> Result<TransmissionRecord, SchemeError> {
    let params = pl.params();
    let virtual_users = params.virtual_user_count();
    if d.len() != virtual_users {
        return Err(SchemeError::DemandLength {
            expected: virtual_users,
            got: d.len(),
        });
    }
    if let Some(&bad) = d.as_slice().iter().find(|&&x| x == 0 || x > params.files()) {
        return Err(ModelError::DemandOutOfRange {
            user: d.as_slice().iter().position(|&x| x == bad).unwrap() + 1,
            file: bad,
            files: params.files(),
        }
        .into());
    }
    let profile = demand_profile(d, params.files());
    if !profile.is_uniform() {
        return Err(SchemeError::NonUniformProfile { counts: profile.counts });
    }
    let mut entries = Vec::with_capacity(virtual_users * (params.files() - 1));
    for k in 1..=virtual_users {
        for file in (1..=params.files()).filter(|&f| f != d.get(k)) {
            entries.push(Transmission {
                virtual_user: Some(k),
                file,
                symbols: pl.coded(file, k).symbols.clone(),
            });
        }
    }
    Ok(TransmissionRecord::new(entries, params.file_len()))
}

/// Virtual user `k` recovers file `d_k` from its cache and the broadcast.
///
/// The user's own position is obtained as `Z_k` minus the `N-1` coded
/// subfiles addressed to it; the remaining positions are the ones sent to
/// users that requested other files. Uncoded broadcast items are ignored.
pub fn np_decode(
    k: usize,
    z: &CacheContent,
    d_k: usize,
    x: &TransmissionRecord,
    g: &GeneratorMatrix,
) -> Result<Vec<FieldElement>, SchemeError> {
    if k == 0 || k > g.n() {
        return Err(SchemeError::NoSuchUser(k));
    }
    let needed = g.k();
    let stripe = z.symbols.len();
    // a (KN, K(N-1)+1) code determines K = n - k + 1 and N = n / K
    let files = g.n() / (g.n() - g.k() + 1);

    let mut own = z.symbols.clone();
    for file in (1..=files).filter(|&f| f != d_k) {
        let entry = x
            .coded_for(k)
            .find(|e| e.file == file)
            .ok_or(SchemeError::MissingTransmission { virtual_user: k, file })?;
        if entry.symbols.len() != stripe {
            return Err(SchemeError::CacheLength {
                expected: entry.symbols.len(),
                got: stripe,
            });
        }
        for (acc, &s) in own.iter_mut().zip(&entry.symbols) {
            *acc = *acc - s;
        }
    }

    let mut received: Vec<(usize, Vec<FieldElement>)> = vec![(k, own)];
    received.extend(
        x.entries()
            .iter()
            .filter(|e| e.file == d_k)
            .filter_map(|e| e.virtual_user.filter(|&vu| vu != k).map(|vu| (vu, e.symbols.clone())))
            .take(needed - 1),
    );
    if received.len() < needed {
        return Err(SchemeError::InsufficientSubfiles {
            needed,
            available: received.len(),
        });
    }
    received.sort_by_key(|(pos, _)| *pos);
    let positions: Vec<usize> = received.iter().map(|(p, _)| *p).collect();
    let coded: Vec<Vec<FieldElement>> = received.into_iter().map(|(_, s)| s).collect();
    let subfiles = g.decode_stripes(&positions, &coded)?;
    Ok(subfiles.concat())
}
