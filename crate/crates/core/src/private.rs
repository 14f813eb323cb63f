//! The `(K, N)` demand-private scheme built over `KN` virtual users.
//!
//! During placement the server draws a secret key `S_k` uniformly from `[N]`
//! for every real user and hands user `k` the cache of virtual user
//! `(k-1)N + S_k`. At delivery the real demand vector is expanded into a
//! virtual one whose `k`-th block is `(1, ..., N)` shifted right by
//! `(S_k - d_k) mod N`, which is always a uniform profile, and the
//! non-private broadcast for that virtual demand is sent.

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::galois::FieldElement;
use crate::mds::{GeneratorDocument, GeneratorMatrix};
use crate::model::{CacheContent, DemandVector, FileLibrary, SystemParams, Transmission, TransmissionRecord};
use crate::nonprivate::{np_decode, np_deliver, np_place, NonPrivatePlacement, SchemeError};
use crate::Rational;

/// Secret key `S_k` of real user `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct PrivacyKey {
    pub user: usize,
    pub value: usize,
}

/// Keys drawn independently and uniformly from `[files]`.
pub fn draw_keys(users: usize, files: usize, seed: u64) -> Vec<PrivacyKey> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (1..=users)
        .map(|user| PrivacyKey {
            user,
            value: rng.gen_range(1..=files),
        })
        .collect()
}

pub fn keys_from_values(values: &[usize], files: usize) -> Result<Vec<PrivacyKey>, SchemeError> {
    values
        .iter()
        .enumerate()
        .map(|(i, &value)| {
            if value == 0 || value > files {
                Err(SchemeError::KeyOutOfRange {
                    user: i + 1,
                    value,
                    files,
                })
            } else {
                Ok(PrivacyKey { user: i + 1, value })
            }
        })
        .collect()
}

/// Virtual user impersonated by real user `user` holding key `key`.
pub fn virtual_user_index(user: usize, key: usize, files: usize) -> usize {
    (user - 1) * files + key
}

/// Demand over the `KN` virtual users, `K` blocks of length `N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VirtualDemandVector {
    demands: Vec<usize>,
    files: usize,
}

impl VirtualDemandVector {
    pub fn blocks(&self) -> impl Iterator<Item = &[usize]> {
        self.demands.chunks(self.files)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.demands
    }

    pub fn to_demand_vector(&self) -> DemandVector {
        DemandVector::new(self.demands.clone(), self.files).expect("virtual demands stay in range")
    }
}

/// Block `q_k` at position `j` is `((j - shift - 1) mod N) + 1` with
/// `shift = (S_k - d_k) mod N`, so `q_k[S_k] = d_k`.
pub fn virtual_demand(d: &DemandVector, keys: &[PrivacyKey], files: usize) -> VirtualDemandVector {
    assert_eq!(d.len(), keys.len(), "one key per user");
    let n = files as i64;
    let mut demands = Vec::with_capacity(d.len() * files);
    for (k, key) in keys.iter().enumerate() {
        let shift = (key.value as i64 - d.as_slice()[k] as i64).rem_euclid(n);
        for j in 1..=n {
            demands.push(((j - shift - 1).rem_euclid(n) + 1) as usize);
        }
    }
    VirtualDemandVector { demands, files }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivatePlacement {
    base: NonPrivatePlacement,
    keys: Vec<PrivacyKey>,
    forced: bool,
    real_caches: Vec<CacheContent>,
}

/// Placement record for replay. Keys are marked secret and never appear in
/// the broadcast trace.
#[derive(Debug, Clone, Serialize)]
pub struct PlacementDocument {
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "N")]
    pub files: usize,
    #[serde(rename = "F")]
    pub file_len: usize,
    pub p: u64,
    pub generator: GeneratorDocument,
    pub keys: SecretKeys,
    pub real_caches: Vec<RealCacheDoc>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SecretKeys {
    pub secret: bool,
    /// Set when keys were supplied by hand instead of drawn at random.
    pub forced: bool,
    pub values: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RealCacheDoc {
    pub user: usize,
    pub virtual_user: usize,
    pub symbols: Vec<u64>,
}

impl PrivatePlacement {
    pub fn from_base(base: NonPrivatePlacement, keys: Vec<PrivacyKey>, forced: bool) -> Result<Self, SchemeError> {
        let params = *base.params();
        if keys.len() != params.users() {
            return Err(SchemeError::KeyCount(keys.len(), params.users()));
        }
        for key in &keys {
            if key.value == 0 || key.value > params.files() {
                return Err(SchemeError::KeyOutOfRange {
                    user: key.user,
                    value: key.value,
                    files: params.files(),
                });
            }
        }
        let real_caches = keys
            .iter()
            .map(|key| {
                let vu = virtual_user_index(key.user, key.value, params.files());
                CacheContent {
                    user: key.user,
                    symbols: base.cache(vu).symbols.clone(),
                }
            })
            .collect();
        Ok(PrivatePlacement {
            base,
            keys,
            forced,
            real_caches,
        })
    }

    pub fn base(&self) -> &NonPrivatePlacement {
        &self.base
    }

    pub fn params(&self) -> &SystemParams {
        self.base.params()
    }

    pub fn keys(&self) -> &[PrivacyKey] {
        &self.keys
    }

    pub fn is_forced(&self) -> bool {
        self.forced
    }

    /// Cache of real user `k`, 1-based.
    pub fn cache(&self, k: usize) -> &CacheContent {
        &self.real_caches[k - 1]
    }

    pub fn real_caches(&self) -> &[CacheContent] {
        &self.real_caches
    }

    pub fn virtual_user(&self, k: usize) -> usize {
        virtual_user_index(k, self.keys[k - 1].value, self.params().files())
    }

    pub fn to_document(&self) -> PlacementDocument {
        let params = self.params();
        PlacementDocument {
            users: params.users(),
            files: params.files(),
            file_len: params.file_len(),
            p: params.field().modulus(),
            generator: self.base.generator().to_document(),
            keys: SecretKeys {
                secret: true,
                forced: self.forced,
                values: self.keys.iter().map(|k| k.value).collect(),
            },
            real_caches: self
                .real_caches
                .iter()
                .map(|c| RealCacheDoc {
                    user: c.user,
                    virtual_user: self.virtual_user(c.user),
                    symbols: c.values(),
                })
                .collect(),
        }
    }
}

/// Placement with keys drawn from `seed`.
pub fn pv_place(
    params: &SystemParams,
    lib: &FileLibrary,
    g: &GeneratorMatrix,
    seed: u64,
) -> Result<PrivatePlacement, SchemeError> {
    let base = np_place(params, lib, g)?;
    let keys = draw_keys(params.users(), params.files(), seed);
    PrivatePlacement::from_base(base, keys, false)
}

/// Placement with explicitly chosen keys; the result is flagged as forced.
pub fn pv_place_with_keys(
    params: &SystemParams,
    lib: &FileLibrary,
    g: &GeneratorMatrix,
    keys: &[usize],
) -> Result<PrivatePlacement, SchemeError> {
    let keys = keys_from_values(keys, params.files())?;
    let base = np_place(params, lib, g)?;
    PrivatePlacement::from_base(base, keys, true)
}

pub fn pv_deliver(pl: &PrivatePlacement, d: &DemandVector) -> Result<TransmissionRecord, SchemeError> {
    let params = pl.params();
    if d.len() != params.users() {
        return Err(SchemeError::DemandLength {
            expected: params.users(),
            got: d.len(),
        });
    }
    let virtual_d = virtual_demand(d, pl.keys(), params.files());
    np_deliver(pl.base(), &virtual_d.to_demand_vector())
}

/// Real user `k` decodes as virtual user `(k-1)N + S_k`.
pub fn pv_decode(
    k: usize,
    z: &CacheContent,
    key: &PrivacyKey,
    d_k: usize,
    x: &TransmissionRecord,
    g: &GeneratorMatrix,
) -> Result<Vec<FieldElement>, SchemeError> {
    let users = g.n() - g.k() + 1;
    let files = g.n() / users;
    np_decode(virtual_user_index(k, key.value, files), z, d_k, x, g)
}

/// Memory sharing between `M = 0` and `M = 1/(K(N-1)+1)`.
#[derive(Debug, Clone)]
pub struct HybridDelivery {
    pub memory: Rational,
    /// Symbols of each file handled by the coded scheme; the rest is sent
    /// uncoded.
    pub coded_len: usize,
    pub placement: Option<PrivatePlacement>,
    pub record: TransmissionRecord,
}

/// Splits every file into a prefix of `alpha F` symbols served by the
/// private coded scheme and a suffix broadcast in the clear, where
/// `alpha = M (K(N-1)+1)`.
pub fn hybrid_deliver(
    params: &SystemParams,
    lib: &FileLibrary,
    g: &GeneratorMatrix,
    seed: u64,
    memory: Rational,
    d: &DemandVector,
) -> Result<HybridDelivery, SchemeError> {
    lib.check_matches(params)?;
    let alpha = memory * Rational::from_integer(params.subpacket_count() as i128);
    if alpha < Rational::zero() || alpha > Rational::one() {
        return Err(SchemeError::Memory(format!(
            "{} (must lie in [0, {}])",
            memory,
            params.m_star()
        )));
    }
    let cache_len = memory * Rational::from_integer(params.file_len() as i128);
    if !cache_len.is_integer() {
        return Err(SchemeError::Memory(format!(
            "{} gives a cache of {} symbols for F={}",
            memory,
            cache_len,
            params.file_len()
        )));
    }
    let coded_len = cache_len.to_integer() as usize * params.subpacket_count();

    let mut entries: Vec<Transmission> = Vec::new();
    let placement = if coded_len > 0 {
        let prefix_params = params.with_file_len(coded_len)?;
        let prefix = lib.segment(0, coded_len);
        let pl = pv_place(&prefix_params, &prefix, g, seed)?;
        entries.extend(pv_deliver(&pl, d)?.entries().iter().cloned());
        Some(pl)
    } else {
        None
    };
    if coded_len < params.file_len() {
        for n in 1..=params.files() {
            entries.push(Transmission {
                virtual_user: None,
                file: n,
                symbols: lib.file(n)[coded_len..].to_vec(),
            });
        }
    }
    Ok(HybridDelivery {
        memory,
        coded_len,
        placement,
        record: TransmissionRecord::new(entries, params.file_len()),
    })
}

impl HybridDelivery {
    /// Cache of real user `k` (empty when `M = 0`).
    pub fn cache(&self, k: usize) -> CacheContent {
        match &self.placement {
            Some(pl) => pl.cache(k).clone(),
            None => CacheContent {
                user: k,
                symbols: Vec::new(),
            },
        }
    }

    pub fn decode(&self, k: usize, d_k: usize) -> Result<Vec<FieldElement>, SchemeError> {
        let mut file = match &self.placement {
            Some(pl) => pv_decode(
                k,
                pl.cache(k),
                &pl.keys()[k - 1],
                d_k,
                &self.record,
                pl.base().generator(),
            )?,
            None => Vec::new(),
        };
        if let Some(tail) = self
            .record
            .entries()
            .iter()
            .find(|e| e.virtual_user.is_none() && e.file == d_k)
        {
            file.extend_from_slice(&tail.symbols);
        }
        Ok(file)
    }
}
