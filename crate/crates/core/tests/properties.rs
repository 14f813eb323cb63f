use itertools::Itertools;
use proptest::prelude::*;

use veilcache_core::analysis::{lower_bound, m_star, optimal_private_rate};
use veilcache_core::galois::is_prime;
use veilcache_core::model::demand_profile;
use veilcache_core::nonprivate::{np_decode, np_deliver, np_place};
use veilcache_core::private::{hybrid_deliver, keys_from_values, pv_decode, pv_deliver, pv_place, virtual_demand};
use veilcache_core::{
    field_for_params, systematic_generator, DemandVector, Field, FieldElement, FileLibrary, Rational, SystemParams,
};

fn prime_at_least(n: u64) -> u64 {
    (n.max(2)..).find(|&p| is_prime(p)).unwrap()
}

fn system(users: usize, files: usize, stripe: usize) -> (SystemParams, veilcache_core::GeneratorMatrix) {
    let field = field_for_params(users, files).unwrap();
    let params = SystemParams::with_stripe(users, files, stripe, field).unwrap();
    let g = systematic_generator(users * files, users * (files - 1) + 1, field).unwrap();
    (params, g)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn field_laws(p in prop::sample::select(vec![2u64, 3, 5, 7, 11, 13, 29, 31, 65521]), a: u64, b: u64, c: u64) {
        let f = Field::new(p).unwrap();
        let (a, b, c) = (f.reduce((a % p) as i64), f.reduce((b % p) as i64), f.reduce((c % p) as i64));
        prop_assert_eq!(a + b, b + a);
        prop_assert_eq!((a * b) * c, a * (b * c));
        prop_assert_eq!(a * (b + c), a * b + a * c);
        prop_assert_eq!((a - b) + b, a);
        if !b.is_zero() {
            prop_assert_eq!(a.try_div(b).unwrap() * b, a);
            prop_assert_eq!(b * b.inverse().unwrap(), f.one());
        }
    }

    #[test]
    fn mds_round_trip_every_subset(n in 1usize..=8, k_frac in 0.0f64..1.0, seed: u64) {
        let k = 1 + ((n as f64 * k_frac) as usize).min(n - 1);
        let field = Field::new(prime_at_least(n as u64)).unwrap();
        let g = systematic_generator(n, k, field).unwrap();
        let mut state = seed;
        let message: Vec<FieldElement> = (0..k)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                field.elem((state >> 33) % field.modulus()).unwrap()
            })
            .collect();
        let code = g.encode(&message).unwrap();
        prop_assert_eq!(&code[..k], &message[..]);
        for positions in (1..=n).combinations(k) {
            let symbols: Vec<FieldElement> = positions.iter().map(|&p| code[p - 1]).collect();
            prop_assert_eq!(g.decode_from_any_k(&positions, &symbols).unwrap(), message.clone());
        }
    }

    #[test]
    fn virtual_demand_is_uniform_and_anchored(
        (files, demand, keys) in (2usize..=5, 1usize..=5).prop_flat_map(|(files, users)| {
            (Just(files), prop::collection::vec(1..=files, users), prop::collection::vec(1..=files, users))
        })
    ) {
        let d = DemandVector::new(demand.clone(), files).unwrap();
        let ks = keys_from_values(&keys, files).unwrap();
        let vd = virtual_demand(&d, &ks, files);
        prop_assert!(demand_profile(&vd.to_demand_vector(), files).is_uniform());
        for (k, block) in vd.blocks().enumerate() {
            prop_assert_eq!(block[keys[k] - 1], demand[k]);
            let mut sorted = block.to_vec();
            sorted.sort();
            prop_assert_eq!(sorted, (1..=files).collect::<Vec<_>>());
        }
    }

    #[test]
    fn private_round_trip(users in 1usize..=4, files in 2usize..=4, stripe in 1usize..=4, seed: u64, picks: Vec<usize>) {
        let (params, g) = system(users, files, stripe);
        let lib = FileLibrary::random(&params, seed);
        let pl = pv_place(&params, &lib, &g, seed.rotate_left(17)).unwrap();
        let d: Vec<usize> = (0..users).map(|k| picks.get(k).map_or(1, |p| p % files + 1)).collect();
        let dv = DemandVector::new(d.clone(), files).unwrap();
        let x = pv_deliver(&pl, &dv).unwrap();
        prop_assert_eq!(
            x.rate(),
            Rational::new((users * files * (files - 1)) as i128, (users * (files - 1) + 1) as i128)
        );
        for k in 1..=users {
            let got = pv_decode(k, pl.cache(k), &pl.keys()[k - 1], d[k - 1], &x, &g).unwrap();
            prop_assert_eq!(got.as_slice(), lib.file(d[k - 1]));
        }
    }

    #[test]
    fn nonprivate_round_trip_uniform_demands(users in 1usize..=3, files in 2usize..=3, seed: u64, perm_seed: u64) {
        let (params, g) = system(users, files, 2);
        let lib = FileLibrary::random(&params, seed);
        let pl = np_place(&params, &lib, &g).unwrap();
        let mut d: Vec<usize> = (1..=files).flat_map(|f| std::iter::repeat_n(f, users)).collect();
        let mut s = perm_seed;
        for i in (1..d.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            d.swap(i, (s >> 33) as usize % (i + 1));
        }
        let dv = DemandVector::new(d.clone(), files).unwrap();
        let x = np_deliver(&pl, &dv).unwrap();
        for i in 1..=users * files {
            let got = np_decode(i, pl.cache(i), d[i - 1], &x, &g).unwrap();
            prop_assert_eq!(got.as_slice(), lib.file(d[i - 1]));
        }
    }

    #[test]
    fn hybrid_rate_and_decoding(users in 1usize..=3, files in 2usize..=3, share in 0usize..=4, seed: u64) {
        let s = users * (files - 1) + 1;
        let (params, g) = system(users, files, 4);
        let lib = FileLibrary::random(&params, seed);
        let memory = Rational::new(share as i128, (4 * s) as i128);
        let d: Vec<usize> = (0..users).map(|k| (k + seed as usize) % files + 1).collect();
        let dv = DemandVector::new(d.clone(), files).unwrap();
        let h = hybrid_deliver(&params, &lib, &g, seed, memory, &dv).unwrap();
        prop_assert_eq!(h.record.rate(), Rational::from_integer(files as i128) * (Rational::from_integer(1) - memory));
        prop_assert_eq!(h.cache(1).symbols.len(), share);
        for k in 1..=users {
            let got = h.decode(k, d[k - 1]).unwrap();
            prop_assert_eq!(got.as_slice(), lib.file(d[k - 1]));
        }
    }

    #[test]
    fn achievable_meets_bound_on_optimal_region(users in 1usize..=8, files in 1usize..=8, num in 0i128..=1000) {
        let m = m_star(users, files) * Rational::new(num, 1000);
        prop_assert_eq!(optimal_private_rate(users, files, m).unwrap(), lower_bound(users, files, m).unwrap());
    }
}

#[test]
fn generated_codes_are_mds() {
    for n in 1..=10 {
        let field = Field::new(prime_at_least(n as u64)).unwrap();
        for k in 1..=n {
            let g = systematic_generator(n, k, field).unwrap();
            assert!(g.is_mds_by_construction());
            assert!(g.verify_mds().is_mds, "({n},{k}) over {field}");
        }
    }
}
