//! Exhaustive checks of decodability and demand privacy.
//!
//! Both checks fix one library realization and enumerate every key vector
//! `S` and every demand vector `d`. Privacy compares, for each user `k`, the
//! exact distribution of the user's view `(d_k, Z_k, X)` conditioned on each
//! value of the other users' demands; the scheme is private for that user
//! iff all these conditional distributions coincide. Probabilities are exact
//! rationals, so the verdict involves no thresholds.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::galois::FieldElement;
use crate::mds::GeneratorMatrix;
use crate::model::{all_vectors, DemandVector, FileLibrary, SystemParams, TransmissionRecord};
use crate::nonprivate::{np_decode, np_deliver, np_place_unchecked, NonPrivatePlacement, SchemeError};
use crate::notation::render_record;
use crate::private::{keys_from_values, virtual_demand, virtual_user_index};
use crate::{Rational, RationalDoc};

pub const DEFAULT_CASE_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuditError {
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error("enumeration needs {required} cases, cap is {cap}")]
    CapExceeded { required: u64, cap: u64 },
}

/// How keys are distributed during an audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyPolicy {
    /// Independent and uniform over `[N]`, enumerated exhaustively.
    Uniform,
    /// One fixed key vector; removes the randomness the scheme relies on.
    Fixed(Vec<usize>),
}

impl KeyPolicy {
    /// Every user gets key 1.
    pub fn identity(users: usize) -> Self {
        KeyPolicy::Fixed(vec![1; users])
    }

    fn key_space(&self, users: usize, files: usize) -> Vec<Vec<usize>> {
        match self {
            KeyPolicy::Uniform => all_vectors(users, files).collect(),
            KeyPolicy::Fixed(keys) => vec![keys.clone()],
        }
    }

    fn space_size(&self, users: usize, files: usize) -> u64 {
        match self {
            KeyPolicy::Uniform => pow_saturating(files, users),
            KeyPolicy::Fixed(_) => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditOptions {
    pub cap: u64,
    pub keys: KeyPolicy,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            cap: DEFAULT_CASE_CAP,
            keys: KeyPolicy::Uniform,
        }
    }
}

fn pow_saturating(base: usize, exp: usize) -> u64 {
    (base as u64).checked_pow(exp as u32).unwrap_or(u64::MAX)
}

fn values(symbols: &[FieldElement]) -> Vec<u64> {
    symbols.iter().map(FieldElement::value).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub demand: Vec<usize>,
    pub keys: Vec<usize>,
    pub user: usize,
    pub expected_file: usize,
    pub expected: Vec<u64>,
    pub decoded: Option<Vec<u64>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecodabilityReport {
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "N")]
    pub files: usize,
    pub p: u64,
    pub key_policy: KeyPolicy,
    pub cases_total: u64,
    pub cases_examined: u64,
    /// False when the cap cut the enumeration short.
    pub complete: bool,
    pub passed: bool,
    pub counterexamples: Vec<Counterexample>,
}

/// Decodes every user's file for every `(d, S)` pair, stopping after
/// `opts.cap` cases. The generator is not pre-checked, so a broken code shows
/// up as counterexamples.
pub fn verify_decodability(
    params: &SystemParams,
    lib: &FileLibrary,
    g: &GeneratorMatrix,
    opts: &AuditOptions,
) -> Result<DecodabilityReport, AuditError> {
    let (users, files) = (params.users(), params.files());
    if let KeyPolicy::Fixed(keys) = &opts.keys {
        keys_from_values(keys, files)?;
    }
    let base = np_place_unchecked(params, lib, g)?;
    let total = opts
        .keys
        .space_size(users, files)
        .saturating_mul(pow_saturating(files, users));
    let examined = total.min(opts.cap);

    let key_space = opts.keys.key_space(users, files);
    let demands: Vec<Vec<usize>> = all_vectors(users, files).collect();
    let cases: Vec<(&Vec<usize>, &Vec<usize>)> = key_space
        .iter()
        .flat_map(|s| demands.iter().map(move |d| (s, d)))
        .take(examined as usize)
        .collect();

    let counterexamples: Vec<Counterexample> = cases
        .par_iter()
        .map(|(s, d)| check_case(&base, lib, g, s, d))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    Ok(DecodabilityReport {
        users,
        files,
        p: params.field().modulus(),
        key_policy: opts.keys.clone(),
        cases_total: total,
        cases_examined: examined,
        complete: examined == total,
        passed: counterexamples.is_empty(),
        counterexamples,
    })
}

fn check_case(
    base: &NonPrivatePlacement,
    lib: &FileLibrary,
    g: &GeneratorMatrix,
    s: &[usize],
    d: &[usize],
) -> Vec<Counterexample> {
    let files = base.params().files();
    let keys = keys_from_values(s, files).expect("key space is in range");
    let demand = DemandVector::new(d.to_vec(), files).expect("demand space is in range");
    let delivery = np_deliver(base, &virtual_demand(&demand, &keys, files).to_demand_vector());
    let mut out = Vec::new();
    for (k, &d_k) in d.iter().enumerate() {
        let user = k + 1;
        let expected = lib.file(d_k);
        let result = delivery.as_ref().map_err(Clone::clone).and_then(|x| {
            let vu = virtual_user_index(user, s[k], files);
            np_decode(vu, base.cache(vu), d_k, x, g)
        });
        let (decoded, error) = match result {
            Ok(file) if file == expected => continue,
            Ok(file) => (Some(values(&file)), None),
            Err(e) => (None, Some(e.to_string())),
        };
        out.push(Counterexample {
            demand: d.to_vec(),
            keys: s.to_vec(),
            user,
            expected_file: d_k,
            expected: values(expected),
            decoded,
            error,
        });
    }
    out
}

/// One equally likely outcome: the full demand vector and every user's view
/// serialized canonically.
#[derive(Debug, Clone)]
pub struct World {
    pub demand: Vec<usize>,
    pub views: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConditionalCell {
    /// `d` with user `k` removed.
    pub others: Vec<usize>,
    pub distribution: BTreeMap<String, RationalDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PrivacyWitness {
    pub others_a: Vec<usize>,
    pub others_b: Vec<usize>,
    pub event: String,
    pub prob_a: RationalDoc,
    pub prob_b: RationalDoc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UserPrivacy {
    pub user: usize,
    pub private: bool,
    /// Largest total-variation distance between two conditional
    /// distributions; diagnostic only.
    pub max_tv: RationalDoc,
    pub witness: Option<PrivacyWitness>,
    pub cells: Vec<ConditionalCell>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PrivacyReport {
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "N")]
    pub files: usize,
    pub p: u64,
    pub key_policy: KeyPolicy,
    pub cases: u64,
    pub private: bool,
    pub per_user: Vec<UserPrivacy>,
}

type Distribution = BTreeMap<String, Rational>;

/// Groups equally likely worlds by the other users' demands and compares the
/// resulting conditional view distributions for every user.
pub fn conditional_privacy(users: usize, worlds: &[World]) -> Vec<UserPrivacy> {
    (1..=users)
        .into_par_iter()
        .map(|user| user_privacy(user, worlds))
        .collect()
}

fn user_privacy(user: usize, worlds: &[World]) -> UserPrivacy {
    let mut tallies: BTreeMap<Vec<usize>, BTreeMap<String, u64>> = BTreeMap::new();
    for w in worlds {
        let others: Vec<usize> = w
            .demand
            .iter()
            .enumerate()
            .filter(|&(i, _)| i + 1 != user)
            .map(|(_, &d)| d)
            .collect();
        *tallies
            .entry(others)
            .or_default()
            .entry(w.views[user - 1].clone())
            .or_default() += 1;
    }
    let cells: Vec<(Vec<usize>, Distribution)> = tallies
        .into_iter()
        .map(|(others, counts)| {
            let total: u64 = counts.values().sum();
            let dist = counts
                .into_iter()
                .map(|(event, c)| (event, Rational::new(c as i128, total as i128)))
                .collect();
            (others, dist)
        })
        .collect();

    let mut max_tv = Rational::zero();
    for (i, (_, a)) in cells.iter().enumerate() {
        for (_, b) in &cells[i + 1..] {
            max_tv = max_tv.max(total_variation(a, b));
        }
    }
    let witness = cells.first().and_then(|(others_a, a)| {
        cells.iter().skip(1).find_map(|(others_b, b)| {
            first_difference(a, b).map(|(event, pa, pb)| PrivacyWitness {
                others_a: others_a.clone(),
                others_b: others_b.clone(),
                event,
                prob_a: pa.into(),
                prob_b: pb.into(),
            })
        })
    });

    UserPrivacy {
        user,
        private: witness.is_none(),
        max_tv: max_tv.into(),
        witness,
        cells: cells
            .into_iter()
            .map(|(others, dist)| ConditionalCell {
                others,
                distribution: dist.into_iter().map(|(e, p)| (e, p.into())).collect(),
            })
            .collect(),
    }
}

fn total_variation(a: &Distribution, b: &Distribution) -> Rational {
    let events: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    let zero = Rational::zero();
    let sum: Rational = events
        .into_iter()
        .map(|e| {
            let diff = *a.get(e).unwrap_or(&zero) - *b.get(e).unwrap_or(&zero);
            if diff < zero {
                -diff
            } else {
                diff
            }
        })
        .sum();
    sum / Rational::from_integer(2)
}

fn first_difference(a: &Distribution, b: &Distribution) -> Option<(String, Rational, Rational)> {
    let zero = Rational::zero();
    let events: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    events.into_iter().find_map(|e| {
        let pa = *a.get(e).unwrap_or(&zero);
        let pb = *b.get(e).unwrap_or(&zero);
        (pa != pb).then(|| (e.clone(), pa, pb))
    })
}

fn view_key(d_k: usize, cache: &[FieldElement], broadcast: &str) -> String {
    let z: Vec<String> = cache.iter().map(|s| s.value().to_string()).collect();
    format!("d={}|Z={}|X={}", d_k, z.join(","), broadcast)
}

fn broadcast_key(x: &Result<TransmissionRecord, SchemeError>) -> String {
    match x {
        Ok(x) => x.observer_key(),
        Err(e) => format!("<no broadcast: {e}>"),
    }
}

/// Exact demand-privacy check of the private scheme for one library.
pub fn verify_privacy(
    params: &SystemParams,
    lib: &FileLibrary,
    g: &GeneratorMatrix,
    opts: &AuditOptions,
) -> Result<PrivacyReport, AuditError> {
    let (users, files) = (params.users(), params.files());
    if let KeyPolicy::Fixed(keys) = &opts.keys {
        keys_from_values(keys, files)?;
    }
    let cases = opts
        .keys
        .space_size(users, files)
        .saturating_mul(pow_saturating(files, users));
    if cases > opts.cap {
        return Err(AuditError::CapExceeded {
            required: cases,
            cap: opts.cap,
        });
    }
    let base = np_place_unchecked(params, lib, g)?;
    let key_space = opts.keys.key_space(users, files);
    let demands: Vec<Vec<usize>> = all_vectors(users, files).collect();

    let worlds: Vec<World> = key_space
        .par_iter()
        .flat_map_iter(|s| {
            let keys = keys_from_values(s, files).expect("key space is in range");
            let base = &base;
            demands.iter().map(move |d| {
                let demand = DemandVector::new(d.clone(), files).expect("demand space is in range");
                let x = np_deliver(base, &virtual_demand(&demand, &keys, files).to_demand_vector());
                let bk = broadcast_key(&x);
                let views = (1..=users)
                    .map(|k| {
                        let vu = virtual_user_index(k, s[k - 1], files);
                        view_key(d[k - 1], &base.cache(vu).symbols, &bk)
                    })
                    .collect();
                World {
                    demand: d.clone(),
                    views,
                }
            })
        })
        .collect();

    let per_user = conditional_privacy(users, &worlds);
    Ok(PrivacyReport {
        users,
        files,
        p: params.field().modulus(),
        key_policy: opts.keys.clone(),
        cases,
        private: per_user.iter().all(|u| u.private),
        per_user,
    })
}

/// Privacy check of the bare `(KN, N)` scheme with each of the `KN` virtual
/// users treated as a real user holding a fixed cache. Only uniform demands
/// are served by that scheme, so the enumeration covers exactly those.
pub fn verify_privacy_nonprivate(
    params: &SystemParams,
    lib: &FileLibrary,
    g: &GeneratorMatrix,
    cap: u64,
) -> Result<PrivacyReport, AuditError> {
    let (virtual_users, files) = (params.virtual_user_count(), params.files());
    let cases = pow_saturating(files, virtual_users);
    if cases > cap {
        return Err(AuditError::CapExceeded { required: cases, cap });
    }
    let base = np_place_unchecked(params, lib, g)?;
    let worlds: Vec<World> = all_vectors(virtual_users, files)
        .filter_map(|d| {
            let demand = DemandVector::new(d.clone(), files).ok()?;
            if !demand.profile(files).is_uniform() {
                return None;
            }
            let bk = broadcast_key(&np_deliver(&base, &demand));
            let views = (1..=virtual_users)
                .map(|i| view_key(d[i - 1], &base.cache(i).symbols, &bk))
                .collect();
            Some(World { demand: d, views })
        })
        .collect();
    let per_user = conditional_privacy(virtual_users, &worlds);
    Ok(PrivacyReport {
        users: virtual_users,
        files,
        p: params.field().modulus(),
        key_policy: KeyPolicy::Fixed((1..=virtual_users).collect()),
        cases: worlds.len() as u64,
        private: per_user.iter().all(|u| u.private),
        per_user,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TableRow {
    pub keys: Vec<usize>,
    /// Virtual caches handed to the real users.
    pub caches: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TableColumn {
    pub virtual_demand: Vec<usize>,
    pub broadcast: Vec<String>,
    /// Labels and symbol values of the actual broadcast.
    pub trace: String,
}

/// Which demand vector produces which broadcast under which cache
/// assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BroadcastTable {
    pub rows: Vec<TableRow>,
    pub columns: Vec<TableColumn>,
    pub cells: Vec<Vec<Option<Vec<usize>>>>,
    /// Every cell of a column carries byte-identical broadcasts.
    pub consistent: bool,
}

/// Rebuilds the cache-assignment by broadcast table. Rows are key vectors in
/// lexicographic order and columns the distinct virtual demands in
/// lexicographic order.
pub fn table1_reconstruct(
    params: &SystemParams,
    lib: &FileLibrary,
    g: &GeneratorMatrix,
) -> Result<BroadcastTable, AuditError> {
    let (users, files) = (params.users(), params.files());
    let base = np_place_unchecked(params, lib, g)?;
    let key_space: Vec<Vec<usize>> = all_vectors(users, files).collect();
    let demands: Vec<Vec<usize>> = all_vectors(users, files).collect();

    let mut outcomes = Vec::new();
    let mut column_ids = BTreeSet::new();
    for s in &key_space {
        let keys = keys_from_values(s, files)?;
        for d in &demands {
            let demand = DemandVector::new(d.clone(), files).expect("in range");
            let vd = virtual_demand(&demand, &keys, files);
            let x = np_deliver(&base, &vd.to_demand_vector())?;
            column_ids.insert(vd.as_slice().to_vec());
            outcomes.push((s.clone(), d.clone(), vd.as_slice().to_vec(), x));
        }
    }
    let column_ids: Vec<Vec<usize>> = column_ids.into_iter().collect();
    let mut columns: Vec<Option<TableColumn>> = vec![None; column_ids.len()];
    let mut cells = vec![vec![None; column_ids.len()]; key_space.len()];
    let mut consistent = true;

    for (s, d, vd, x) in outcomes {
        let row = key_space.iter().position(|r| *r == s).expect("row exists");
        let col = column_ids.binary_search(&vd).expect("column exists");
        let trace = x.observer_key();
        match &columns[col] {
            Some(existing) => consistent &= existing.trace == trace,
            None => {
                columns[col] = Some(TableColumn {
                    virtual_demand: vd,
                    broadcast: render_record(&x, g),
                    trace,
                })
            }
        }
        if cells[row][col].is_some() {
            consistent = false;
        }
        cells[row][col] = Some(d);
    }

    Ok(BroadcastTable {
        rows: key_space
            .iter()
            .map(|s| TableRow {
                keys: s.clone(),
                caches: s
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| virtual_user_index(k + 1, v, files))
                    .collect(),
            })
            .collect(),
        columns: columns.into_iter().map(|c| c.expect("every column observed")).collect(),
        cells,
        consistent,
    })
}

impl BroadcastTable {
    /// Each row and each column holds every demand vector exactly once.
    pub fn is_latin(&self) -> bool {
        let n = self.rows.len();
        if self.columns.len() != n {
            return false;
        }
        let complete = |cells: Vec<&Option<Vec<usize>>>| {
            let set: BTreeSet<&Vec<usize>> = cells.iter().filter_map(|c| c.as_ref()).collect();
            set.len() == n && cells.iter().all(|c| c.is_some())
        };
        (0..n).all(|r| complete(self.cells[r].iter().collect()))
            && (0..n).all(|c| complete(self.cells.iter().map(|row| &row[c]).collect()))
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<&[usize]> {
        self.cells[row][col].as_deref()
    }

    /// Aligned text: broadcast headers stacked one item per line, one row
    /// per cache assignment.
    pub fn render_text(&self) -> String {
        let label = |row: &TableRow| {
            row.caches
                .iter()
                .map(|vu| format!("Z_{vu}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        let demand_label = |d: &Option<Vec<usize>>| match d {
            Some(d) => DemandVector::new(d.clone(), usize::MAX)
                .map(|v| v.to_string())
                .unwrap_or_default(),
            None => "-".to_string(),
        };
        let width = |s: &str| s.chars().count();
        let first_header = "Cache 1, Cache 2".to_string();
        let first_width = self
            .rows
            .iter()
            .map(|r| width(&label(r)))
            .chain(std::iter::once(width(&first_header)))
            .max()
            .unwrap_or(0);
        let col_widths: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .map(|(c, col)| {
                col.broadcast
                    .iter()
                    .map(|s| width(s))
                    .chain(self.cells.iter().map(|row| width(&demand_label(&row[c]))))
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let pad = |s: &str, w: usize| format!("{}{}", s, " ".repeat(w.saturating_sub(width(s))));

        let mut out = String::new();
        let header_lines = self.columns.iter().map(|c| c.broadcast.len()).max().unwrap_or(0);
        for line in 0..header_lines {
            let lead = if line == 0 { first_header.as_str() } else { "" };
            out.push_str(&pad(lead, first_width));
            for (c, col) in self.columns.iter().enumerate() {
                out.push_str(" | ");
                out.push_str(&pad(col.broadcast.get(line).map_or("", String::as_str), col_widths[c]));
            }
            out.push('\n');
        }
        let rule_len = first_width + col_widths.iter().map(|w| w + 3).sum::<usize>();
        out.push_str(&"-".repeat(rule_len));
        out.push('\n');
        for (r, row) in self.rows.iter().enumerate() {
            out.push_str(&pad(&label(row), first_width));
            for (c, w) in col_widths.iter().enumerate() {
                out.push_str(" | ");
                out.push_str(&pad(&demand_label(&self.cells[r][c]), *w));
            }
            out.push('\n');
        }
        out
    }
}
