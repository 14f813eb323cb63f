//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use veilcache_cli::commands::{cmd_audit, cmd_simulate, AuditArgs, SimulateArgs};
use veilcache_cli::RunConfig;
use veilcache_core::analysis::{self, Scheme};
use veilcache_core::audit::{self, AuditOptions, KeyPolicy};
use veilcache_core::nonprivate::{np_decode, np_deliver, np_place};
use veilcache_core::notation::{render_cache, render_transmission};
use veilcache_core::presets;
use veilcache_core::private::{hybrid_deliver, pv_decode, pv_deliver, pv_place};
use veilcache_core::{
    field_for_params, systematic_generator, DemandVector, Field, FileLibrary, Rational, SystemParams,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn dv(v: &[usize], files: usize) -> DemandVector {
    DemandVector::new(v.to_vec(), files).unwrap()
}

fn default_system(users: usize, files: usize, stripe: usize) -> (SystemParams, veilcache_core::GeneratorMatrix) {
    let field = field_for_params(users, files).unwrap();
    let params = SystemParams::with_stripe(users, files, stripe, field).unwrap();
    let g = systematic_generator(users * files, users * (files - 1) + 1, field).unwrap();
    (params, g)
}

const AUDIT_CONFIGS: [(usize, usize); 3] = [(2, 2), (3, 2), (2, 3)];
const AUDIT_SEEDS: [u64; 5] = [11, 12, 13, 14, 15];

fn audit_libraries(params: &SystemParams) -> Vec<(String, FileLibrary)> {
    let mut libs = vec![("zero".to_string(), FileLibrary::zero(params))];
    libs.extend(
        AUDIT_SEEDS
            .iter()
            .map(|&s| (format!("seed {s}"), FileLibrary::random(params, s))),
    );
    libs
}

fn example1_golden() -> Outcome {
    let (params, g) = presets::example1();
    let lib = presets::example1_library();
    let pl = np_place(&params, &lib, &g).map_err(|e| e.to_string())?;

    let expected_caches = ["A_1⊕B_1", "A_2⊕B_2", "A_3⊕B_3", "A_1⊕A_2⊕A_3⊕B_1⊕B_2⊕B_3"];
    let expected_values = [1, 1, 0, 0];
    for i in 1..=4 {
        let sym = render_cache(i, 2, &g);
        ensure(sym == expected_caches[i - 1], || format!("Z_{i} = {sym}"))?;
        let v = pl.cache(i).values();
        ensure(v == vec![expected_values[i - 1]], || format!("Z_{i} values {v:?}"))?;
    }

    let d = dv(&[1, 1, 2, 2], 2);
    let x = np_deliver(&pl, &d).map_err(|e| e.to_string())?;
    let rendered: Vec<String> = x.entries().iter().map(|t| render_transmission(t, &g)).collect();
    ensure(rendered == ["B_1", "B_2", "A_3", "A_1⊕A_2⊕A_3"], || {
        format!("broadcast {rendered:?}")
    })?;
    for i in 1..=4 {
        let got = np_decode(i, pl.cache(i), d.get(i), &x, &g).map_err(|e| e.to_string())?;
        ensure(got.as_slice() == lib.file(d.get(i)), || {
            format!("virtual user {i} decoded {got:?}")
        })?;
    }
    Ok("4 caches, broadcast {B1, B2, A3, A1⊕A2⊕A3}, 4/4 decoded".into())
}

fn broadcast_table_golden() -> Outcome {
    let (params, g) = presets::example1();
    let lib = presets::example1_library();
    let table = audit::table1_reconstruct(&params, &lib, &g).map_err(|e| e.to_string())?;

    let a = 1;
    let b = 2;
    let expected_rows: [[usize; 2]; 4] = [[1, 3], [1, 4], [2, 3], [2, 4]];
    let expected_columns = [
        ["B_1", "A_2", "B_3", "A_1⊕A_2⊕A_3"],
        ["B_1", "A_2", "A_3", "B_1⊕B_2⊕B_3"],
        ["A_1", "B_2", "B_3", "A_1⊕A_2⊕A_3"],
        ["A_1", "B_2", "A_3", "B_1⊕B_2⊕B_3"],
    ];
    let expected_cells = [
        [[a, a], [a, b], [b, a], [b, b]],
        [[a, b], [a, a], [b, b], [b, a]],
        [[b, a], [b, b], [a, a], [a, b]],
        [[b, b], [b, a], [a, b], [a, a]],
    ];
    ensure(table.rows.len() == 4 && table.columns.len() == 4, || {
        "table is not 4x4".into()
    })?;
    for (r, row) in table.rows.iter().enumerate() {
        ensure(row.caches == expected_rows[r], || {
            format!("row {r} caches {:?}", row.caches)
        })?;
    }
    for (c, col) in table.columns.iter().enumerate() {
        ensure(col.broadcast == expected_columns[c], || {
            format!("column {c} broadcast {:?}", col.broadcast)
        })?;
    }
    let mut matched = 0;
    for (r, expected_row) in expected_cells.iter().enumerate() {
        for (c, expected) in expected_row.iter().enumerate() {
            let cell = table.cell(r, c);
            ensure(cell == Some(&expected[..]), || format!("cell ({r},{c}) = {cell:?}"))?;
            matched += 1;
        }
    }
    ensure(table.consistent, || "a column mixes different broadcasts".into())?;
    ensure(table.is_latin(), || "grid is not a Latin square".into())?;

    let mut per_column = BTreeSet::new();
    for c in 0..4 {
        let col: BTreeSet<_> = (0..4).filter_map(|r| table.cell(r, c)).collect();
        per_column.insert(col.len());
    }
    ensure(per_column == BTreeSet::from([4]), || {
        "column misses a demand vector".into()
    })?;
    Ok(format!("{matched}/16 cells match, Latin"))
}

fn example2_golden() -> Outcome {
    let (params, g) = presets::example2();
    let lib = FileLibrary::random(&params, 2);
    let pl = np_place(&params, &lib, &g).map_err(|e| e.to_string())?;
    let d = dv(&[1, 1, 1, 2, 2, 2], 2);
    let x = np_deliver(&pl, &d).map_err(|e| e.to_string())?;

    let labels: Vec<(usize, usize)> = x.entries().iter().map(|t| (t.file, t.virtual_user.unwrap())).collect();
    let expected = [(2, 1), (2, 2), (2, 3), (1, 4), (1, 5), (1, 6)];
    ensure(labels == expected, || format!("broadcast labels {labels:?}"))?;
    for t in x.entries() {
        let vu = t.virtual_user.unwrap();
        ensure(t.symbols == pl.coded(t.file, vu).symbols, || {
            format!("C_{{{},{vu}}} payload differs", t.file)
        })?;
    }
    for i in 1..=6 {
        let got = np_decode(i, pl.cache(i), d.get(i), &x, &g).map_err(|e| e.to_string())?;
        ensure(got.as_slice() == lib.file(d.get(i)), || {
            format!("virtual user {i} failed to decode")
        })?;
    }
    let rate = x.rate();
    ensure(rate == Rational::new(3, 2), || format!("rate {rate}"))?;
    Ok("C_{2,1..3}, C_{1,4..6}; 6/6 decoded; rate 3/2".into())
}

fn privacy_exact() -> Outcome {
    let mut checked = Vec::new();
    for (users, files) in AUDIT_CONFIGS {
        let (params, g) = default_system(users, files, 1);
        let mut cases = 0;
        for (name, lib) in audit_libraries(&params) {
            let report =
                audit::verify_privacy(&params, &lib, &g, &AuditOptions::default()).map_err(|e| e.to_string())?;
            ensure(report.private, || {
                let bad = report.per_user.iter().find(|u| !u.private).unwrap();
                format!(
                    "({users},{files}) library {name}: user {} leaks, {:?}",
                    bad.user, bad.witness
                )
            })?;
            ensure(
                report
                    .per_user
                    .iter()
                    .all(|u| u.max_tv == Rational::from_integer(0).into()),
                || format!("({users},{files}) library {name}: non-zero total variation"),
            )?;
            cases = report.cases;
        }
        let expected = (files as u64).pow(2 * users as u32);
        ensure(cases == expected, || {
            format!("({users},{files}) enumerated {cases} cases, expected {expected}")
        })?;
        checked.push(format!("({users},{files}):{cases}"));
    }
    Ok(format!("zero + 5 random libraries each, cases {}", checked.join(" ")))
}

fn privacy_negative_control() -> Outcome {
    let (params, g) = default_system(2, 2, 1);
    let lib = FileLibrary::random(&params, 11);
    let opts = AuditOptions {
        keys: KeyPolicy::identity(2),
        ..Default::default()
    };
    let report = audit::verify_privacy(&params, &lib, &g, &opts).map_err(|e| e.to_string())?;
    ensure(!report.private, || "identity keys passed the privacy check".into())?;
    let leaking = report.per_user.iter().find(|u| !u.private).unwrap();
    let witness = leaking.witness.as_ref().ok_or("no witness reported")?;
    ensure(witness.prob_a != witness.prob_b, || {
        "witness probabilities coincide".into()
    })?;
    ensure(witness.others_a != witness.others_b, || {
        "witness conditions coincide".into()
    })?;
    Ok(format!(
        "user {} leaks: one view has probability {}/{} given others {:?} but {}/{} given {:?}",
        leaking.user,
        witness.prob_a.num,
        witness.prob_a.den,
        witness.others_a,
        witness.prob_b.num,
        witness.prob_b.den,
        witness.others_b
    ))
}

fn decodability_exhaustive() -> Outcome {
    let mut summary = Vec::new();
    for (users, files) in AUDIT_CONFIGS {
        let (params, g) = default_system(users, files, 1);
        for (name, lib) in audit_libraries(&params) {
            let report =
                audit::verify_decodability(&params, &lib, &g, &AuditOptions::default()).map_err(|e| e.to_string())?;
            ensure(report.passed && report.complete, || {
                format!("({users},{files}) library {name}: {:?}", report.counterexamples.first())
            })?;
        }
        summary.push(format!("({users},{files})"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut trials = 0;
    for (users, files) in AUDIT_CONFIGS {
        for stripe in [1, 4, 16] {
            let (params, g) = default_system(users, files, stripe);
            for _ in 0..20 {
                let lib = FileLibrary::random(&params, rng.gen());
                let pl = pv_place(&params, &lib, &g, rng.gen()).map_err(|e| e.to_string())?;
                let d: Vec<usize> = (0..users).map(|_| rng.gen_range(1..=files)).collect();
                let d = dv(&d, files);
                let x = pv_deliver(&pl, &d).map_err(|e| e.to_string())?;
                for k in 1..=users {
                    let got =
                        pv_decode(k, pl.cache(k), &pl.keys()[k - 1], d.get(k), &x, &g).map_err(|e| e.to_string())?;
                    ensure(got.as_slice() == lib.file(d.get(k)), || {
                        format!("({users},{files}) L={stripe}: user {k} decoded the wrong file")
                    })?;
                }
                trials += 1;
            }
        }
    }
    Ok(format!(
        "exhaustive {} x 6 libraries; {trials} random round trips at L in {{1,4,16}}",
        summary.join(" ")
    ))
}

fn rate_identity() -> Outcome {
    let mut configs = 0;
    for users in 1..=5 {
        for files in 1..=5 {
            let s = users * (files - 1) + 1;
            let (params, g) = default_system(users, files, 1);
            let lib = FileLibrary::random(&params, (users * 10 + files) as u64);
            let pl = pv_place(&params, &lib, &g, 1).map_err(|e| e.to_string())?;
            let d: Vec<usize> = (0..users).map(|k| k % files + 1).collect();
            let x = pv_deliver(&pl, &dv(&d, files)).map_err(|e| e.to_string())?;
            let expected = Rational::new((users * files * (files - 1)) as i128, s as i128);
            ensure(x.rate() == expected, || {
                format!("({users},{files}) rate {} != {expected}", x.rate())
            })?;

            let wide = SystemParams::with_stripe(users, files, 2, params.field()).unwrap();
            let wide_lib = FileLibrary::random(&wide, 5);
            let ms = analysis::m_star(users, files);
            for memory in [Rational::from_integer(0), ms / Rational::from_integer(2), ms] {
                let h = hybrid_deliver(&wide, &wide_lib, &g, 3, memory, &dv(&d, files)).map_err(|e| e.to_string())?;
                let want = Rational::from_integer(files as i128) * (Rational::from_integer(1) - memory);
                ensure(h.record.rate() == want, || {
                    format!(
                        "({users},{files}) M={memory}: hybrid rate {} != {want}",
                        h.record.rate()
                    )
                })?;
                for k in 1..=users {
                    let got = h.decode(k, d[k - 1]).map_err(|e| e.to_string())?;
                    ensure(got.as_slice() == wide_lib.file(d[k - 1]), || {
                        format!("({users},{files}) M={memory}: user {k} decoded the wrong file")
                    })?;
                }
            }
            configs += 1;
        }
    }
    Ok(format!(
        "{configs} (K,N) configurations with K,N <= 5, hybrid at M in {{0, M*/2, M*}}"
    ))
}

fn optimality() -> Outcome {
    let mut points = 0;
    for users in 1..=5 {
        for files in 1..=5 {
            let grid = analysis::optimal_region_grid(users, files, 20);
            ensure(grid.len() == 20, || "grid size".into())?;
            for m in grid {
                let gap = analysis::optimal_private_rate(users, files, m).map_err(|e| e.to_string())?
                    - analysis::lower_bound(users, files, m).map_err(|e| e.to_string())?;
                ensure(gap == Rational::from_integer(0), || {
                    format!("({users},{files}) M={m}: gap {gap}")
                })?;
                points += 1;
            }
            let table = analysis::comparison_rates_at_mstar(users, files).map_err(|e| e.to_string())?;
            let lb = table.rate(Scheme::LowerBound).unwrap();
            let ours = table.rate(Scheme::ThisWork).unwrap();
            let vu = table.rate(Scheme::VirtualUser).unwrap();
            let lfr = table.rate(Scheme::LfrDpcu).unwrap();
            ensure(lb <= ours && ours <= vu && ours <= lfr, || {
                format!("({users},{files}): ordering fails, lb {lb} ours {ours} vu {vu} lfr {lfr}")
            })?;
        }
    }
    Ok(format!(
        "{points} grid points with zero gap; ordering holds at M* for 25 systems"
    ))
}

fn mds_property() -> Outcome {
    let (_, g1) = presets::example1();
    let (_, g2) = presets::example2();
    for (name, g) in [("example1", &g1), ("example2", &g2)] {
        let v = g.verify_mds();
        ensure(v.is_mds, || format!("{name} generator fails: {:?}", v.witness))?;
    }
    let mut generated = 0;
    for n in 1..=10usize {
        let field = Field::new(
            (n.max(2) as u64..)
                .find(|&p| veilcache_core::galois::is_prime(p))
                .unwrap(),
        )
        .unwrap();
        for k in 1..=n {
            let g = systematic_generator(n, k, field).map_err(|e| e.to_string())?;
            let v = g.verify_mds();
            ensure(v.is_mds, || {
                format!("systematic_generator({n},{k}) over {field} fails at {:?}", v.witness)
            })?;
            generated += 1;
        }
    }

    let mutated = g2.with_entry(1, 5, 0).map_err(|e| e.to_string())?;
    let v = mutated.verify_mds();
    ensure(!v.is_mds && v.witness.is_some(), || {
        "mutated generator passed verify_mds".into()
    })?;
    let (params, _) = presets::example2();
    let lib = FileLibrary::random(&params, 4);
    let report =
        audit::verify_decodability(&params, &lib, &mutated, &AuditOptions::default()).map_err(|e| e.to_string())?;
    ensure(!report.passed && !report.counterexamples.is_empty(), || {
        "decodability audit missed the mutation".into()
    })?;
    Ok(format!(
        "both preset generators, {generated} generated codes with n <= 10; mutation caught at {:?} with {} decode counterexamples",
        v.witness.unwrap(),
        report.counterexamples.len()
    ))
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let base = RunConfig {
        users: Some(3),
        files: Some(2),
        seed: Some(42),
        stripe: Some(4),
        ..Default::default()
    };
    let sim = SimulateArgs {
        demand: "A,B,B".into(),
        ..Default::default()
    };
    let mut runs = Vec::new();
    for run in ["sim1", "sim2"] {
        let cfg = RunConfig {
            out: Some(tmp.path().join(run)),
            ..base.clone()
        };
        let summary = cmd_simulate(&cfg, &sim).map_err(|e| e.to_string())?;
        ensure(summary.all_decoded(), || "simulate failed to decode".into())?;
        runs.push(dir_contents(&summary.out_dir));
    }
    ensure(runs[0] == runs[1], || "simulate outputs differ between runs".into())?;
    let sim_files = runs[0].len();

    let audit_base = RunConfig {
        stripe: None,
        ..base.clone()
    };
    let mut audits = Vec::new();
    for run in ["audit1", "audit2"] {
        let cfg = RunConfig {
            out: Some(tmp.path().join(run)),
            jobs: Some(if run == "audit1" { 1 } else { 4 }),
            ..audit_base.clone()
        };
        let summary = cmd_audit(&cfg, &AuditArgs::default()).map_err(|e| e.to_string())?;
        ensure(summary.decodable() && summary.private() == Some(true), || {
            "audit did not pass".into()
        })?;
        audits.push(dir_contents(&summary.out_dir));
    }
    ensure(audits[0] == audits[1], || "audit outputs differ between runs".into())?;
    Ok(format!(
        "{sim_files} simulate files and {} audit files byte-identical across runs",
        audits[0].len()
    ))
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion {
            id: 1,
            name: "example1 preset golden reproduction",
            limit: secs(1),
            run: example1_golden,
        },
        Criterion {
            id: 2,
            name: "cache-assignment broadcast table",
            limit: secs(1),
            run: broadcast_table_golden,
        },
        Criterion {
            id: 3,
            name: "example2 preset golden reproduction",
            limit: secs(1),
            run: example2_golden,
        },
        Criterion {
            id: 4,
            name: "exact demand privacy",
            limit: secs(30),
            run: privacy_exact,
        },
        Criterion {
            id: 5,
            name: "privacy negative control",
            limit: secs(1),
            run: privacy_negative_control,
        },
        Criterion {
            id: 6,
            name: "exhaustive decodability",
            limit: secs(30),
            run: decodability_exhaustive,
        },
        Criterion {
            id: 7,
            name: "rate identity",
            limit: secs(10),
            run: rate_identity,
        },
        Criterion {
            id: 8,
            name: "optimality and rate ordering",
            limit: secs(5),
            run: optimality,
        },
        Criterion {
            id: 9,
            name: "MDS property",
            limit: secs(10),
            run: mds_property,
        },
        Criterion {
            id: 10,
            name: "determinism",
            limit: None,
            run: determinism,
        },
    ];

    let mut failures = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.limit) {
            (Ok(_), Some(limit)) if elapsed > limit => Err(format!("took {elapsed:.2?}, limit {limit:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {} [{elapsed:.2?}]: {detail}", c.id, c.name),
            Err(why) => {
                failures += 1;
                println!("criterion {:>2} FAIL  {} [{elapsed:.2?}]: {why}", c.id, c.name);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
