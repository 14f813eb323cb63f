//! Shared vocabulary: system parameters, file libraries, demands, caches and
//! broadcast transmissions.
//!
//! Users, files and code positions are 1-based, matching `[K]` and `[N]`.
//! File lengths are counted in field symbols and every rate is normalized by
//! the file length `F`.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::galois::{Field, FieldElement, GaloisError};
use crate::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Galois(#[from] GaloisError),
    #[error("system needs at least one user and one file (got K={users}, N={files})")]
    EmptySystem { users: usize, files: usize },
    #[error("file length {file_len} is not a positive multiple of the {subpackets} subpackets")]
    Subpacketization { file_len: usize, subpackets: usize },
    #[error("expected {expected} files, found {got}")]
    FileCount { expected: usize, got: usize },
    #[error("file {file} has {got} symbols, expected {expected}")]
    FileLength { file: usize, expected: usize, got: usize },
    #[error("user {user} demands file {file}, outside 1..={files}")]
    DemandOutOfRange { user: usize, file: usize, files: usize },
    #[error("cannot parse demand entry {0:?}")]
    DemandSyntax(String),
    #[error("library field GF({library}) differs from system field GF({system})")]
    FieldMismatch { library: u64, system: u64 },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("malformed document: {0}")]
    Document(String),
}

/// Parameters of a `(K, N)` system with file length `F` symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SystemParams {
    users: usize,
    files: usize,
    file_len: usize,
    field: Field,
}

impl SystemParams {
    pub fn new(users: usize, files: usize, file_len: usize, field: Field) -> Result<Self, ModelError> {
        if users == 0 || files == 0 {
            return Err(ModelError::EmptySystem { users, files });
        }
        let subpackets = users * (files - 1) + 1;
        if file_len == 0 || !file_len.is_multiple_of(subpackets) {
            return Err(ModelError::Subpacketization { file_len, subpackets });
        }
        Ok(SystemParams {
            users,
            files,
            file_len,
            field,
        })
    }

    /// Parameters whose subfiles are `stripe_len` symbols long.
    pub fn with_stripe(users: usize, files: usize, stripe_len: usize, field: Field) -> Result<Self, ModelError> {
        if users == 0 || files == 0 {
            return Err(ModelError::EmptySystem { users, files });
        }
        Self::new(users, files, (users * (files - 1) + 1) * stripe_len, field)
    }

    /// `K`
    pub fn users(&self) -> usize {
        self.users
    }

    /// `N`
    pub fn files(&self) -> usize {
        self.files
    }

    /// `F`, in symbols.
    pub fn file_len(&self) -> usize {
        self.file_len
    }

    pub fn field(&self) -> Field {
        self.field
    }

    /// `K(N-1)+1`
    pub fn subpacket_count(&self) -> usize {
        self.users * (self.files - 1) + 1
    }

    /// `KN`
    pub fn virtual_user_count(&self) -> usize {
        self.users * self.files
    }

    /// Symbols per subfile.
    pub fn stripe_len(&self) -> usize {
        self.file_len / self.subpacket_count()
    }

    /// Normalized cache size `1/(K(N-1)+1)` of the coded scheme.
    pub fn m_star(&self) -> Rational {
        Rational::new(1, self.subpacket_count() as i128)
    }

    pub fn with_file_len(&self, file_len: usize) -> Result<Self, ModelError> {
        Self::new(self.users, self.files, file_len, self.field)
    }
}

impl fmt::Display for SystemParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "K={} N={} F={} over {}",
            self.users, self.files, self.file_len, self.field
        )
    }
}

/// The `N` files, each `F` field symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileLibrary {
    field: Field,
    files: Vec<Vec<FieldElement>>,
}

/// Library JSON: `{p, K, N, F, files}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryDocument {
    pub p: u64,
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "N")]
    pub files_count: usize,
    #[serde(rename = "F")]
    pub file_len: usize,
    pub files: Vec<Vec<u64>>,
}

impl FileLibrary {
    pub fn new(field: Field, values: &[Vec<u64>]) -> Result<Self, ModelError> {
        let expected = values.first().map_or(0, Vec::len);
        let mut files = Vec::with_capacity(values.len());
        for (i, file) in values.iter().enumerate() {
            if file.len() != expected {
                return Err(ModelError::FileLength {
                    file: i + 1,
                    expected,
                    got: file.len(),
                });
            }
            files.push(field.elems(file)?);
        }
        Ok(FileLibrary { field, files })
    }

    pub fn zero(params: &SystemParams) -> Self {
        let zero = params.field().zero();
        FileLibrary {
            field: params.field(),
            files: vec![vec![zero; params.file_len()]; params.files()],
        }
    }

    /// Uniform symbols from a ChaCha8 stream seeded with `seed`.
    pub fn random(params: &SystemParams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let field = params.field();
        let files = (0..params.files())
            .map(|_| {
                (0..params.file_len())
                    .map(|_| field.reduce(rng.gen_range(0..field.modulus()) as i64))
                    .collect()
            })
            .collect();
        FileLibrary { field, files }
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn file_count(&self) -> usize {
        self.files.len()
    }

    pub fn file_len(&self) -> usize {
        self.files.first().map_or(0, Vec::len)
    }

    /// File `n`, 1-based.
    pub fn file(&self, n: usize) -> &[FieldElement] {
        &self.files[n - 1]
    }

    pub fn files(&self) -> &[Vec<FieldElement>] {
        &self.files
    }

    /// The symbols `start..end` of every file.
    pub fn segment(&self, start: usize, end: usize) -> FileLibrary {
        FileLibrary {
            field: self.field,
            files: self.files.iter().map(|f| f[start..end].to_vec()).collect(),
        }
    }

    pub fn check_matches(&self, params: &SystemParams) -> Result<(), ModelError> {
        if self.field != params.field() {
            return Err(ModelError::FieldMismatch {
                library: self.field.modulus(),
                system: params.field().modulus(),
            });
        }
        if self.files.len() != params.files() {
            return Err(ModelError::FileCount {
                expected: params.files(),
                got: self.files.len(),
            });
        }
        if self.file_len() != params.file_len() {
            return Err(ModelError::FileLength {
                file: 1,
                expected: params.file_len(),
                got: self.file_len(),
            });
        }
        Ok(())
    }

    pub fn to_document(&self, users: usize) -> LibraryDocument {
        LibraryDocument {
            p: self.field.modulus(),
            users,
            files_count: self.files.len(),
            file_len: self.file_len(),
            files: self
                .files
                .iter()
                .map(|f| f.iter().map(FieldElement::value).collect())
                .collect(),
        }
    }
}

pub fn parse_library(text: &str) -> Result<(SystemParams, FileLibrary), ModelError> {
    let doc: LibraryDocument = serde_json::from_str(text).map_err(|e| ModelError::Document(e.to_string()))?;
    let field = Field::new(doc.p)?;
    let params = SystemParams::new(doc.users, doc.files_count, doc.file_len, field)?;
    let library = FileLibrary::new(field, &doc.files)?;
    library.check_matches(&params)?;
    Ok((params, library))
}

pub fn load_library(path: &Path) -> Result<(SystemParams, FileLibrary), ModelError> {
    let text = std::fs::read_to_string(path).map_err(|e| ModelError::Io(format!("{}: {}", path.display(), e)))?;
    parse_library(&text)
}

pub fn random_library(params: &SystemParams, seed: u64) -> FileLibrary {
    FileLibrary::random(params, seed)
}

/// File requested by each user, 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DemandVector(Vec<usize>);

impl DemandVector {
    pub fn new(demands: Vec<usize>, files: usize) -> Result<Self, ModelError> {
        for (i, &d) in demands.iter().enumerate() {
            if d == 0 || d > files {
                return Err(ModelError::DemandOutOfRange {
                    user: i + 1,
                    file: d,
                    files,
                });
            }
        }
        Ok(DemandVector(demands))
    }

    /// Accepts file letters (`A,B`) or 1-based indices (`1,2`).
    pub fn parse(text: &str, files: usize) -> Result<Self, ModelError> {
        let demands = text
            .split(',')
            .map(|tok| parse_file_label(tok.trim()).ok_or_else(|| ModelError::DemandSyntax(tok.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(demands, files)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Demand of user `k`, 1-based.
    pub fn get(&self, k: usize) -> usize {
        self.0[k - 1]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Every demand except user `k`'s.
    pub fn others(&self, k: usize) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|&(i, _)| i + 1 != k)
            .map(|(_, &d)| d)
            .collect()
    }

    pub fn profile(&self, files: usize) -> DemandProfile {
        demand_profile(self, files)
    }
}

impl fmt::Display for DemandVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = self.0.iter().map(|&d| crate::notation::file_letter(d)).collect();
        write!(f, "[{}]", labels.join(","))
    }
}

fn parse_file_label(tok: &str) -> Option<usize> {
    if let Ok(n) = tok.parse::<usize>() {
        return Some(n);
    }
    let mut chars = tok.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii_alphabetic() => Some((c.to_ascii_uppercase() as u8 - b'A') as usize + 1),
        _ => None,
    }
}

/// Every vector in `[files]^len`, in lexicographic order.
pub fn all_vectors(len: usize, files: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = (files as u64).checked_pow(len as u32).unwrap_or(u64::MAX);
    (0..total).map(move |mut code| {
        let mut v = vec![1; len];
        for slot in v.iter_mut().rev() {
            *slot = (code % files as u64) as usize + 1;
            code /= files as u64;
        }
        v
    })
}

/// Per-file demand counts sorted in non-increasing order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DemandProfile {
    pub counts: Vec<usize>,
}

impl DemandProfile {
    pub fn is_uniform(&self) -> bool {
        is_uniform(self)
    }
}

pub fn demand_profile(d: &DemandVector, files: usize) -> DemandProfile {
    let mut counts = vec![0; files];
    for &x in d.as_slice() {
        counts[x - 1] += 1;
    }
    counts.sort_unstable_by(|a, b| b.cmp(a));
    DemandProfile { counts }
}

/// All files requested by the same number of users.
pub fn is_uniform(profile: &DemandProfile) -> bool {
    profile.counts.windows(2).all(|w| w[0] == w[1])
}

/// Cache of one (real or virtual) user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheContent {
    pub user: usize,
    pub symbols: Vec<FieldElement>,
}

impl CacheContent {
    pub fn values(&self) -> Vec<u64> {
        self.symbols.iter().map(FieldElement::value).collect()
    }
}

/// One broadcast item. Coded items carry the virtual user they serve (which
/// is also the code position of the symbols); uncoded items carry none.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transmission {
    pub virtual_user: Option<usize>,
    pub file: usize,
    pub symbols: Vec<FieldElement>,
}

impl Transmission {
    fn order_key(&self) -> (bool, usize, usize) {
        (self.virtual_user.is_none(), self.virtual_user.unwrap_or(0), self.file)
    }
}

/// The broadcast `X`, kept in canonical order: coded items by ascending
/// virtual user then file, followed by uncoded items by file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransmissionRecord {
    entries: Vec<Transmission>,
    file_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub vu: Option<usize>,
    pub file: usize,
    pub symbols: Vec<u64>,
}

/// Trace JSON: `{entries: [{vu, file, symbols}], rate_num, rate_den}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceDocument {
    pub entries: Vec<TraceEntry>,
    pub rate_num: i128,
    pub rate_den: i128,
}

impl TransmissionRecord {
    pub fn new(mut entries: Vec<Transmission>, file_len: usize) -> Self {
        entries.sort_by_key(Transmission::order_key);
        TransmissionRecord { entries, file_len }
    }

    pub fn entries(&self) -> &[Transmission] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn file_len(&self) -> usize {
        self.file_len
    }

    pub fn total_symbols(&self) -> usize {
        self.entries.iter().map(|e| e.symbols.len()).sum()
    }

    /// Normalized rate: broadcast symbols over `F`.
    pub fn rate(&self) -> Rational {
        Rational::new(self.total_symbols() as i128, self.file_len as i128)
    }

    pub fn coded_for(&self, virtual_user: usize) -> impl Iterator<Item = &Transmission> {
        self.entries
            .iter()
            .filter(move |e| e.virtual_user == Some(virtual_user))
    }

    pub fn to_document(&self) -> TraceDocument {
        let rate = self.rate();
        TraceDocument {
            entries: self
                .entries
                .iter()
                .map(|e| TraceEntry {
                    vu: e.virtual_user,
                    file: e.file,
                    symbols: e.symbols.iter().map(FieldElement::value).collect(),
                })
                .collect(),
            rate_num: *rate.numer(),
            rate_den: *rate.denom(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("trace serializes")
    }

    /// Compact text form of everything an observer of the broadcast sees:
    /// labels and symbol values.
    pub fn observer_key(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            match e.virtual_user {
                Some(vu) => out.push_str(&format!("{}:{}=", vu, e.file)),
                None => out.push_str(&format!("*:{}=", e.file)),
            }
            for (i, s) in e.symbols.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&s.value().to_string());
            }
            out.push(';');
        }
        out
    }
}
