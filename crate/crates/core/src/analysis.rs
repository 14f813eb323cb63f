//! Exact evaluation of the rate expressions the scheme is measured against.
//!
//! All arithmetic is on [`Rational`]; floats appear only in rendered output.

use std::fmt;

use num_traits::{One, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::{format_sig6, Rational, RationalDoc};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("system needs at least one user and one file (got K={users}, N={files})")]
    EmptySystem { users: usize, files: usize },
    #[error("memory {memory} lies outside [0, {limit}]")]
    OutOfRange { memory: Rational, limit: Rational },
    #[error("memory {memory} is not a multiple of 1/{users}")]
    NotOnGrid { memory: Rational, users: usize },
    #[error("binomial coefficient overflow")]
    Overflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// `N(1-M)` on `[0, M*]`.
    ThisWork,
    LowerBound,
    /// Virtual-user scheme with uncoded placement, lower convex envelope of
    /// the binomial grid rates.
    VirtualUser,
    /// Closed-form comparison scheme, quoted at `M*` only.
    LfrDpcu,
}

impl Scheme {
    pub fn label(&self) -> &'static str {
        match self {
            Scheme::ThisWork => "this_work",
            Scheme::LowerBound => "lower_bound",
            Scheme::VirtualUser => "virtual_user",
            Scheme::LfrDpcu => "lfr_dpcu",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl Serialize for Scheme {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

fn ser_rational<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    RationalDoc::from(*r).serialize(s)
}

fn ser_opt_rational<S: Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
    r.map(RationalDoc::from).serialize(s)
}

/// A labelled `(M, R)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RatePoint {
    #[serde(serialize_with = "ser_rational")]
    pub memory: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub rate: Rational,
    pub scheme: Scheme,
}

fn check_system(users: usize, files: usize) -> Result<(), AnalysisError> {
    if users == 0 || files == 0 {
        return Err(AnalysisError::EmptySystem { users, files });
    }
    Ok(())
}

fn int(x: usize) -> Rational {
    Rational::from_integer(x as i128)
}

/// `1/(K(N-1)+1)`
pub fn m_star(users: usize, files: usize) -> Rational {
    Rational::new(1, (users * (files - 1) + 1) as i128)
}

/// `N(1-M)`, valid for `0 <= M <= M*`.
pub fn optimal_private_rate(users: usize, files: usize, memory: Rational) -> Result<Rational, AnalysisError> {
    check_system(users, files)?;
    let limit = m_star(users, files);
    if memory < Rational::zero() || memory > limit {
        return Err(AnalysisError::OutOfRange { memory, limit });
    }
    Ok(int(files) * (Rational::one() - memory))
}

/// `max_{l in [N]} l + min(l+1,K)(N-l)/(N-l+min(l+1,K)) - lM`
pub fn lower_bound(users: usize, files: usize, memory: Rational) -> Result<Rational, AnalysisError> {
    check_system(users, files)?;
    if memory < Rational::zero() || memory > int(files) {
        return Err(AnalysisError::OutOfRange {
            memory,
            limit: int(files),
        });
    }
    Ok((1..=files)
        .map(|l| lower_bound_term(users, files, l, memory))
        .max()
        .expect("at least one file"))
}

fn lower_bound_term(users: usize, files: usize, l: usize, memory: Rational) -> Rational {
    let m = (l + 1).min(users);
    int(l) + Rational::new((m * (files - l)) as i128, (files - l + m) as i128) - int(l) * memory
}

/// `C(a, b)`, zero when `b < 0` or `b > a`.
pub fn binomial(a: i128, b: i128) -> Result<i128, AnalysisError> {
    if b < 0 || a < 0 || b > a {
        return Ok(0);
    }
    let b = b.min(a - b);
    let mut acc: i128 = 1;
    for i in 0..b {
        // acc * (a - i) is divisible by (i + 1)
        acc = acc.checked_mul(a - i).ok_or(AnalysisError::Overflow)? / (i + 1);
    }
    Ok(acc)
}

/// Binomial rate of the virtual-user scheme at `M in {0, 1/K, ..., N}`:
/// `[C(KN, KM+1) - C(KN-N, KM+1)] / C(KN, KM)`.
pub fn virtual_user_rate_grid(users: usize, files: usize, memory: Rational) -> Result<Rational, AnalysisError> {
    check_system(users, files)?;
    if memory < Rational::zero() || memory > int(files) {
        return Err(AnalysisError::OutOfRange {
            memory,
            limit: int(files),
        });
    }
    let t = memory * int(users);
    if !t.is_integer() {
        return Err(AnalysisError::NotOnGrid { memory, users });
    }
    let t = t.to_integer();
    let kn = (users * files) as i128;
    let num = binomial(kn, t + 1)? - binomial(kn - files as i128, t + 1)?;
    Ok(Rational::new(num, binomial(kn, t)?))
}

/// Lower convex hull of `points` (sorted by memory), by monotone chain.
fn lower_hull(points: &[(Rational, Rational)]) -> Vec<(Rational, Rational)> {
    let mut hull: Vec<(Rational, Rational)> = Vec::new();
    for &p in points {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross <= Rational::zero() {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Lower convex envelope of the binomial grid rates, at any `M in [0, N]`.
pub fn virtual_user_rate(users: usize, files: usize, memory: Rational) -> Result<Rational, AnalysisError> {
    check_system(users, files)?;
    if memory < Rational::zero() || memory > int(files) {
        return Err(AnalysisError::OutOfRange {
            memory,
            limit: int(files),
        });
    }
    let points = (0..=users * files)
        .map(|j| {
            let m = Rational::new(j as i128, users as i128);
            virtual_user_rate_grid(users, files, m).map(|r| (m, r))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let hull = lower_hull(&points);
    for w in hull.windows(2) {
        let ((m0, r0), (m1, r1)) = (w[0], w[1]);
        if memory >= m0 && memory <= m1 {
            return Ok(r0 + (r1 - r0) * (memory - m0) / (m1 - m0));
        }
    }
    Ok(hull[0].1)
}

/// Memory sharing of the virtual-user scheme evaluated at `M*`:
/// `N(1-M*) + (N-1)/(2[K(N-1)+1])`.
pub fn virtual_user_rate_at_mstar(users: usize, files: usize) -> Rational {
    let s = (users * (files - 1) + 1) as i128;
    int(files) * (Rational::one() - m_star(users, files)) + Rational::new(files as i128 - 1, 2 * s)
}

/// The closed-form comparison at `M*`, with separate branches for
/// `K >= N` and `K < N`.
pub fn lfr_dpcu_rate_at_mstar(users: usize, files: usize) -> Rational {
    let s = (users * (files - 1) + 1) as i128;
    let extra = if users >= files {
        files as i128 - 1
    } else {
        users as i128
    };
    int(files) * (Rational::one() - m_star(users, files)) + Rational::new(extra, s)
}

/// The `(1/K, (2K-N-1)/(2K))` pair as quoted for the virtual-user scheme.
pub fn virtual_user_quoted_pair(users: usize, files: usize) -> (Rational, Rational) {
    (
        Rational::new(1, users as i128),
        Rational::new(2 * users as i128 - files as i128 - 1, 2 * users as i128),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComparisonTable {
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "N")]
    pub files: usize,
    #[serde(serialize_with = "ser_rational")]
    pub m_star: Rational,
    pub points: Vec<RatePoint>,
    pub footnote: String,
}

impl ComparisonTable {
    pub fn rate(&self, scheme: Scheme) -> Option<Rational> {
        self.points.iter().find(|p| p.scheme == scheme).map(|p| p.rate)
    }
}

/// The four schemes side by side at `M* = 1/(K(N-1)+1)`.
pub fn comparison_rates_at_mstar(users: usize, files: usize) -> Result<ComparisonTable, AnalysisError> {
    check_system(users, files)?;
    let m = m_star(users, files);
    let point = |scheme, rate| RatePoint {
        memory: m,
        rate,
        scheme,
    };
    let points = vec![
        point(Scheme::ThisWork, optimal_private_rate(users, files, m)?),
        point(Scheme::VirtualUser, virtual_user_rate_at_mstar(users, files)),
        point(Scheme::LfrDpcu, lfr_dpcu_rate_at_mstar(users, files)),
        point(Scheme::LowerBound, lower_bound(users, files, m)?),
    ];
    let (qm, qr) = virtual_user_quoted_pair(users, files);
    let grid = virtual_user_rate_grid(users, files, qm)?;
    let footnote = if qr == grid {
        format!("virtual_user: quoted pair (M={qm}, R={qr}) agrees with the binomial grid rate")
    } else {
        format!(
            "virtual_user: quoted pair (M={qm}, R={qr}) differs from the binomial grid rate {grid} at M={qm}; \
             the virtual_user row uses the memory-sharing expression, which matches the binomial grid"
        )
    };
    Ok(ComparisonTable {
        users,
        files,
        m_star: m,
        points,
        footnote,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TradeoffRow {
    #[serde(serialize_with = "ser_rational")]
    pub memory: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub lower_bound: Rational,
    #[serde(serialize_with = "ser_opt_rational")]
    pub this_work: Option<Rational>,
    #[serde(serialize_with = "ser_rational")]
    pub virtual_user: Rational,
    #[serde(serialize_with = "ser_opt_rational")]
    pub lfr_dpcu: Option<Rational>,
    /// `M <= M*`, where the achievable rate meets the bound.
    pub optimal_region: bool,
    /// `lower_bound <= this_work <= every other scheme`.
    pub ordering_holds: bool,
}

impl TradeoffRow {
    pub fn points(&self) -> Vec<RatePoint> {
        let mut out = vec![RatePoint {
            memory: self.memory,
            rate: self.lower_bound,
            scheme: Scheme::LowerBound,
        }];
        if let Some(r) = self.this_work {
            out.push(RatePoint {
                memory: self.memory,
                rate: r,
                scheme: Scheme::ThisWork,
            });
        }
        out.push(RatePoint {
            memory: self.memory,
            rate: self.virtual_user,
            scheme: Scheme::VirtualUser,
        });
        if let Some(r) = self.lfr_dpcu {
            out.push(RatePoint {
                memory: self.memory,
                rate: r,
                scheme: Scheme::LfrDpcu,
            });
        }
        out
    }
}

pub fn tradeoff_table(users: usize, files: usize, grid: &[Rational]) -> Result<Vec<TradeoffRow>, AnalysisError> {
    check_system(users, files)?;
    let ms = m_star(users, files);
    grid.iter()
        .map(|&m| {
            let lb = lower_bound(users, files, m)?;
            let this_work = if m <= ms {
                Some(optimal_private_rate(users, files, m)?)
            } else {
                None
            };
            let virtual_user = virtual_user_rate(users, files, m)?;
            let lfr_dpcu = (m == ms).then(|| lfr_dpcu_rate_at_mstar(users, files));
            let reference = this_work.unwrap_or(lb);
            let ordering_holds =
                lb <= reference && reference <= virtual_user && lfr_dpcu.is_none_or(|r| reference <= r);
            Ok(TradeoffRow {
                memory: m,
                lower_bound: lb,
                this_work,
                virtual_user,
                lfr_dpcu,
                optimal_region: m <= ms,
                ordering_holds,
            })
        })
        .collect()
}

/// `{0, M*/2, M*}` followed by the virtual-user grid `{1/K, ..., N}`.
pub fn default_grid(users: usize, files: usize) -> Vec<Rational> {
    let ms = m_star(users, files);
    let mut grid = vec![Rational::zero(), ms / Rational::from_integer(2), ms];
    grid.extend((1..=users * files).map(|j| Rational::new(j as i128, users as i128)));
    grid.sort();
    grid.dedup();
    grid
}

/// `count` evenly spaced points from 0 to `M*` inclusive.
pub fn optimal_region_grid(users: usize, files: usize, count: usize) -> Vec<Rational> {
    let ms = m_star(users, files);
    if count < 2 {
        return vec![Rational::zero()];
    }
    (0..count)
        .map(|j| ms * Rational::new(j as i128, (count - 1) as i128))
        .collect()
}

/// CSV with columns `M_num,M_den,scheme,R_num,R_den,R_float`.
pub fn to_csv(points: &[RatePoint]) -> String {
    let mut out = String::from("M_num,M_den,scheme,R_num,R_den,R_float\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.memory.numer(),
            p.memory.denom(),
            p.scheme,
            p.rate.numer(),
            p.rate.denom(),
            format_sig6(p.rate)
        ));
    }
    out
}
