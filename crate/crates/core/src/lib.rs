//! Demand-private coded caching built on MDS-coded placement.
//!
//! A `(K, N)` system with `K` users and `N` files is lifted onto a `(KN, N)`
//! non-private scheme over virtual users. Every file is split into
//! `K(N-1)+1` subfiles and encoded with a `(KN, K(N-1)+1)` MDS code. Virtual
//! cache `i` holds the field sum of coded position `i` across all files.
//! Secret per-user keys pick which virtual cache a real user receives and
//! cyclically shift the virtual demand so that the broadcast reveals nothing
//! about the other users' demands.
//!
//! Besides the schemes themselves the crate contains exhaustive verifiers for
//! decodability and demand privacy ([`audit`]) and exact rational evaluation
//! of the rate formulas the scheme is compared against ([`analysis`]).

pub mod analysis;
pub mod audit;
pub mod galois;
pub mod mds;
pub mod model;
pub mod nonprivate;
pub mod notation;
pub mod presets;
pub mod private;

use serde::{Deserialize, Serialize};

/// Exact rational used for every rate and memory value.
pub type Rational = num_rational::Ratio<i128>;

/// `{num, den}` form of a [`Rational`] for JSON output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalDoc {
    pub num: i128,
    pub den: i128,
}

impl From<Rational> for RationalDoc {
    fn from(r: Rational) -> Self {
        RationalDoc {
            num: *r.numer(),
            den: *r.denom(),
        }
    }
}

impl From<RationalDoc> for Rational {
    fn from(doc: RationalDoc) -> Self {
        Rational::new(doc.num, doc.den)
    }
}

/// Parses `"3"`, `"-1/4"` or `"5/3"`.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    match text.split_once('/') {
        Some((n, d)) => {
            let n: i128 = n.trim().parse().ok()?;
            let d: i128 = d.trim().parse().ok()?;
            (d != 0).then(|| Rational::new(n, d))
        }
        None => text.parse::<i128>().ok().map(Rational::from_integer),
    }
}

/// Renders a rational as a float with 6 significant digits.
pub fn format_sig6(r: Rational) -> String {
    let x = *r.numer() as f64 / *r.denom() as f64;
    if x == 0.0 {
        return "0".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{:.*}", decimals, x)
}

pub use analysis::{RatePoint, Scheme};
pub use galois::{field_for_params, Field, FieldElement};
pub use mds::{systematic_generator, GeneratorMatrix};
pub use model::{
    CacheContent, DemandProfile, DemandVector, FileLibrary, SystemParams, Transmission, TransmissionRecord,
};
pub use nonprivate::NonPrivatePlacement;
pub use private::{PrivacyKey, PrivatePlacement, VirtualDemandVector};
