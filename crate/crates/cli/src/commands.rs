//! `simulate`, `audit` and `rates`.
//!
//! Every command writes its artifacts with fixed key order and no timestamps,
//! so identical flags and seed reproduce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;

use veilcache_core::analysis::{self, ComparisonTable, RatePoint, TradeoffRow};
use veilcache_core::audit::{
    self, AuditError, AuditOptions, BroadcastTable, DecodabilityReport, KeyPolicy, PrivacyReport, DEFAULT_CASE_CAP,
};
use veilcache_core::mds::GeneratorDocument;
use veilcache_core::model::{load_library, TraceDocument};
use veilcache_core::nonprivate::{np_decode, np_deliver, np_place, SchemeError};
use veilcache_core::notation::{file_letter, render_transmission};
use veilcache_core::presets::{self, Preset};
use veilcache_core::private::{hybrid_deliver, pv_decode, pv_deliver, pv_place, pv_place_with_keys, PlacementDocument};
use veilcache_core::{
    format_sig6, parse_rational, DemandVector, FieldElement, FileLibrary, GeneratorMatrix, Rational, RationalDoc,
    SystemParams, TransmissionRecord,
};

use crate::config::{resolve_system, Mode, ResolvedSystem, RunConfig, DEFAULT_OUT_DIR};
use crate::{CliError, ExitStatus};

/// Mixed into the seed for the key stream so keys and library content are
/// drawn from unrelated sequences.
pub const KEY_STREAM_SALT: u64 = 0x6b65_7973;

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn input<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

fn in_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(CliError::Input("--jobs must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Io(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn values(symbols: &[FieldElement]) -> Vec<u64> {
    symbols.iter().map(FieldElement::value).collect()
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, Default, Args)]
pub struct SimulateArgs {
    /// Demand vector, as file letters (A,B) or 1-based indices (1,2)
    #[arg(long)]
    pub demand: String,
    /// Force the privacy keys (S_1,...,S_K); the run is then not demand-private
    #[arg(long, value_delimiter = ',')]
    pub keys: Option<Vec<usize>>,
    /// Run the bare (KN, N) scheme; the demand then has one entry per virtual user
    #[arg(long)]
    pub nonprivate: bool,
    /// Cache memory M in [0, M*]; runs the memory-sharing scheme
    #[arg(long)]
    pub memory: Option<String>,
    /// Library JSON ({p, K, N, F, files}); random from the seed otherwise
    #[arg(long)]
    pub library: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationMode {
    Private,
    Nonprivate,
    Hybrid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UserDecode {
    pub user: usize,
    pub file: usize,
    pub virtual_user: Option<usize>,
    pub ok: bool,
    pub error: Option<String>,
    pub symbols: Vec<u64>,
}

#[derive(Debug, Clone, Serialize)]
struct TraceFile<'a> {
    mode: SimulationMode,
    demand_private: bool,
    #[serde(flatten)]
    trace: &'a TraceDocument,
}

#[derive(Debug, Clone, Serialize)]
struct DecodeFile<'a> {
    mode: SimulationMode,
    demand: &'a [usize],
    users: &'a [UserDecode],
    all_decoded: bool,
    rate: RationalDoc,
    rate_float: String,
}

#[derive(Debug, Clone, Serialize)]
struct VirtualCacheDoc {
    virtual_user: usize,
    symbols: Vec<u64>,
}

#[derive(Debug, Clone, Serialize)]
struct NonPrivatePlacementDoc {
    #[serde(rename = "K")]
    users: usize,
    #[serde(rename = "N")]
    files: usize,
    #[serde(rename = "F")]
    file_len: usize,
    p: u64,
    generator: GeneratorDocument,
    virtual_caches: Vec<VirtualCacheDoc>,
}

#[derive(Debug, Clone, Serialize)]
struct HybridPlacementDoc {
    memory: RationalDoc,
    coded_len: usize,
    placement: Option<PlacementDocument>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
enum PlacementFile {
    Private(PlacementDocument),
    Nonprivate(NonPrivatePlacementDoc),
    Hybrid(HybridPlacementDoc),
}

#[derive(Debug, Clone)]
pub struct SimulateSummary {
    pub mode: SimulationMode,
    pub demand_private: bool,
    pub record: TransmissionRecord,
    pub rate: Rational,
    pub users: Vec<UserDecode>,
    pub out_dir: PathBuf,
}

impl SimulateSummary {
    pub fn all_decoded(&self) -> bool {
        self.users.iter().all(|u| u.ok)
    }

    pub fn status(&self) -> ExitStatus {
        if self.all_decoded() {
            ExitStatus::Success
        } else {
            ExitStatus::DecodeFailure
        }
    }
}

fn pick_library(
    cfg: &RunConfig,
    sys: &ResolvedSystem,
    args: &SimulateArgs,
    seed: u64,
) -> Result<(SystemParams, FileLibrary), CliError> {
    if let Some(path) = &args.library {
        let (params, lib) = load_library(path).map_err(input)?;
        if (params.users(), params.files(), params.field()) != (sys.users, sys.files, sys.field) {
            return Err(CliError::Input(format!(
                "library is for K={} N={} {}, system is K={} N={} {}",
                params.users(),
                params.files(),
                params.field(),
                sys.users,
                sys.files,
                sys.field
            )));
        }
        return Ok((params, lib));
    }
    let params = sys.params(cfg)?;
    if sys.preset == Some(Preset::Example1) && params.file_len() == 3 {
        return Ok((params, presets::example1_library()));
    }
    Ok((params, FileLibrary::random(&params, seed)))
}

fn decode_result(
    user: usize,
    file: usize,
    virtual_user: Option<usize>,
    lib: &FileLibrary,
    got: Result<Vec<FieldElement>, SchemeError>,
) -> UserDecode {
    match got {
        Ok(symbols) => UserDecode {
            user,
            file,
            virtual_user,
            ok: symbols.as_slice() == lib.file(file),
            error: None,
            symbols: values(&symbols),
        },
        Err(e) => UserDecode {
            user,
            file,
            virtual_user,
            ok: false,
            error: Some(e.to_string()),
            symbols: Vec::new(),
        },
    }
}

/// Places, delivers and decodes one demand vector, writing `placement.json`,
/// `trace.json`, `trace.txt` and `decode.json` to the output directory.
pub fn cmd_simulate(cfg: &RunConfig, args: &SimulateArgs) -> Result<SimulateSummary, CliError> {
    let sys = resolve_system(cfg)?;
    let seed = cfg.seed.unwrap_or(0);
    let nonprivate = args.nonprivate || cfg.mode == Some(Mode::Nonprivate);
    let memory = args
        .memory
        .as_deref()
        .map(|m| parse_rational(m).ok_or_else(|| CliError::Input(format!("bad --memory {m:?}"))))
        .transpose()?;
    if nonprivate && (memory.is_some() || args.keys.is_some()) {
        return Err(CliError::Input(
            "--nonprivate cannot be combined with --memory or --keys".into(),
        ));
    }
    if memory.is_some() && args.keys.is_some() {
        return Err(CliError::Input("--memory draws its own keys; drop --keys".into()));
    }
    let (params, lib) = pick_library(cfg, &sys, args, seed)?;
    let g = &sys.generator;
    let files = params.files();
    let demand = DemandVector::parse(&args.demand, files).map_err(input)?;

    let (mode, demand_private, placement, record, users) = if nonprivate {
        let pl = np_place(&params, &lib, g).map_err(input)?;
        let x = np_deliver(&pl, &demand).map_err(input)?;
        let users: Vec<UserDecode> = (1..=demand.len())
            .map(|i| {
                decode_result(
                    i,
                    demand.get(i),
                    Some(i),
                    &lib,
                    np_decode(i, pl.cache(i), demand.get(i), &x, g),
                )
            })
            .collect();
        let doc = NonPrivatePlacementDoc {
            users: params.users(),
            files,
            file_len: params.file_len(),
            p: params.field().modulus(),
            generator: g.to_document(),
            virtual_caches: pl
                .caches()
                .iter()
                .map(|c| VirtualCacheDoc {
                    virtual_user: c.user,
                    symbols: c.values(),
                })
                .collect(),
        };
        (
            SimulationMode::Nonprivate,
            false,
            PlacementFile::Nonprivate(doc),
            x,
            users,
        )
    } else if let Some(memory) = memory {
        if demand.len() != params.users() {
            return Err(CliError::Input(format!(
                "demand needs {} entries, got {}",
                params.users(),
                demand.len()
            )));
        }
        let h = hybrid_deliver(&params, &lib, g, seed ^ KEY_STREAM_SALT, memory, &demand).map_err(input)?;
        let users: Vec<UserDecode> = (1..=demand.len())
            .map(|k| {
                let vu = h.placement.as_ref().map(|pl| pl.virtual_user(k));
                decode_result(k, demand.get(k), vu, &lib, h.decode(k, demand.get(k)))
            })
            .collect();
        let doc = HybridPlacementDoc {
            memory: memory.into(),
            coded_len: h.coded_len,
            placement: h.placement.as_ref().map(|pl| pl.to_document()),
        };
        (
            SimulationMode::Hybrid,
            true,
            PlacementFile::Hybrid(doc),
            h.record,
            users,
        )
    } else {
        let pl = match &args.keys {
            Some(keys) => pv_place_with_keys(&params, &lib, g, keys).map_err(input)?,
            None => pv_place(&params, &lib, g, seed ^ KEY_STREAM_SALT).map_err(input)?,
        };
        let x = pv_deliver(&pl, &demand).map_err(input)?;
        let users: Vec<UserDecode> = (1..=demand.len())
            .map(|k| {
                let got = pv_decode(k, pl.cache(k), &pl.keys()[k - 1], demand.get(k), &x, g);
                decode_result(k, demand.get(k), Some(pl.virtual_user(k)), &lib, got)
            })
            .collect();
        (
            SimulationMode::Private,
            !pl.is_forced(),
            PlacementFile::Private(pl.to_document()),
            x,
            users,
        )
    };

    let rate = record.rate();
    let dir = out_dir(cfg);
    fs::create_dir_all(&dir)?;
    write_json(&dir, "placement.json", &placement)?;
    let trace = record.to_document();
    write_json(
        &dir,
        "trace.json",
        &TraceFile {
            mode,
            demand_private,
            trace: &trace,
        },
    )?;
    write_json(
        &dir,
        "decode.json",
        &DecodeFile {
            mode,
            demand: demand.as_slice(),
            users: &users,
            all_decoded: users.iter().all(|u| u.ok),
            rate: rate.into(),
            rate_float: format_sig6(rate),
        },
    )?;
    fs::write(
        dir.join("trace.txt"),
        render_trace_text(&params, g, mode, demand_private, &record, rate),
    )?;

    Ok(SimulateSummary {
        mode,
        demand_private,
        record,
        rate,
        users,
        out_dir: dir,
    })
}

fn render_trace_text(
    params: &SystemParams,
    g: &GeneratorMatrix,
    mode: SimulationMode,
    demand_private: bool,
    x: &TransmissionRecord,
    rate: Rational,
) -> String {
    let mode_label = match mode {
        SimulationMode::Private => "private",
        SimulationMode::Nonprivate => "nonprivate",
        SimulationMode::Hybrid => "hybrid",
    };
    let privacy = match (mode, demand_private) {
        (SimulationMode::Nonprivate, _) => "NOT demand-private: bare virtual-user scheme",
        (_, false) => "NOT demand-private: keys forced via --keys",
        (_, true) => "demand-private: keys drawn at random",
    };
    let mut out = format!(
        "# veilcache simulate ({mode_label}) K={} N={} F={} over {}\n# {privacy}\n# rate {} = {}\n",
        params.users(),
        params.files(),
        params.file_len(),
        params.field(),
        rate,
        format_sig6(rate)
    );
    for (i, t) in x.entries().iter().enumerate() {
        let target = match t.virtual_user {
            Some(vu) => format!("vu {vu}"),
            None => "all".to_string(),
        };
        out.push_str(&format!(
            "X{} [{target}, file {}] {}  = {:?}\n",
            i + 1,
            file_letter(t.file),
            render_transmission(t, g),
            values(&t.symbols)
        ));
    }
    out
}

// ---------------------------------------------------------------- audit

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BreakPrivacy {
    /// Force every key to 1
    IdentityKeys,
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    /// Deliberately weaken the scheme as a negative control
    #[arg(long, value_enum)]
    pub break_privacy: Option<BreakPrivacy>,
    /// Seeded random libraries checked in addition to the all-zero library
    #[arg(long, default_value_t = 5)]
    pub libraries: usize,
}

impl Default for AuditArgs {
    fn default() -> Self {
        AuditArgs {
            break_privacy: None,
            libraries: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LibraryResult<T> {
    pub library: String,
    pub result: T,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PrivacyOutcome {
    Checked(PrivacyReport),
    CapExceeded { required: u64, cap: u64 },
}

#[derive(Debug, Clone, Serialize)]
struct DecodabilityFile<'a> {
    #[serde(rename = "K")]
    users: usize,
    #[serde(rename = "N")]
    files: usize,
    #[serde(rename = "F")]
    file_len: usize,
    cap: u64,
    passed: bool,
    complete: bool,
    libraries: &'a [LibraryResult<DecodabilityReport>],
}

#[derive(Debug, Clone, Serialize)]
struct PrivacyFile<'a> {
    #[serde(rename = "K")]
    users: usize,
    #[serde(rename = "N")]
    files: usize,
    #[serde(rename = "F")]
    file_len: usize,
    cap: u64,
    passed: Option<bool>,
    libraries: &'a [LibraryResult<PrivacyOutcome>],
}

#[derive(Debug, Clone)]
pub struct AuditSummary {
    pub decodability: Vec<LibraryResult<DecodabilityReport>>,
    pub privacy: Vec<LibraryResult<PrivacyOutcome>>,
    pub table: Option<BroadcastTable>,
    pub out_dir: PathBuf,
}

impl AuditSummary {
    pub fn decodable(&self) -> bool {
        self.decodability.iter().all(|r| r.result.passed)
    }

    pub fn complete(&self) -> bool {
        self.decodability.iter().all(|r| r.result.complete)
            && self
                .privacy
                .iter()
                .all(|r| matches!(r.result, PrivacyOutcome::Checked(_)))
    }

    /// `None` when some library could not be checked within the cap.
    pub fn private(&self) -> Option<bool> {
        let mut all = true;
        for r in &self.privacy {
            match &r.result {
                PrivacyOutcome::Checked(report) => all &= report.private,
                PrivacyOutcome::CapExceeded { .. } => return None,
            }
        }
        Some(all)
    }

    pub fn status(&self) -> ExitStatus {
        if !self.decodable() {
            ExitStatus::DecodeFailure
        } else if self.private() == Some(false) {
            ExitStatus::PrivacyFailure
        } else if !self.complete() {
            ExitStatus::CapExceeded
        } else {
            ExitStatus::Success
        }
    }

    /// Diagnostic lines for stderr.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for r in &self.decodability {
            if !r.result.complete {
                out.push(format!(
                    "warning: decodability on library {} covered {} of {} cases (cap reached)",
                    r.library, r.result.cases_examined, r.result.cases_total
                ));
            }
        }
        for r in &self.privacy {
            if let PrivacyOutcome::CapExceeded { required, cap } = r.result {
                out.push(format!(
                    "warning: privacy on library {} not checked: needs {required} cases, cap is {cap}",
                    r.library
                ));
            }
        }
        out
    }
}

/// Exhaustive decodability and privacy audit over the all-zero library and
/// `args.libraries` random ones (seeds `seed, seed+1, ...`). Writes
/// `decodability.json`, `privacy.json` and, for `K = N = 2`, `table1.txt` and
/// `table1.json`.
pub fn cmd_audit(cfg: &RunConfig, args: &AuditArgs) -> Result<AuditSummary, CliError> {
    let sys = resolve_system(cfg)?;
    let params = SystemParams::with_stripe(sys.users, sys.files, 1, sys.field).map_err(input)?;
    if cfg.stripe.is_some_and(|l| l != 1) || cfg.file_len.is_some_and(|f| f != params.file_len()) {
        return Err(CliError::Input(format!(
            "audits run with one symbol per subfile (F={}); drop --stripe/--F",
            params.file_len()
        )));
    }
    let seed = cfg.seed.unwrap_or(0);
    let cap = cfg.cap.unwrap_or(DEFAULT_CASE_CAP);
    let keys = match args.break_privacy {
        Some(BreakPrivacy::IdentityKeys) => KeyPolicy::identity(params.users()),
        None => KeyPolicy::Uniform,
    };
    let opts = AuditOptions { cap, keys };
    let g = &sys.generator;

    let mut libraries = vec![("zero".to_string(), FileLibrary::zero(&params))];
    if sys.preset == Some(Preset::Example1) && params.file_len() == 3 {
        libraries.push(("example1".to_string(), presets::example1_library()));
    }
    for i in 0..args.libraries as u64 {
        let s = seed.wrapping_add(i);
        libraries.push((format!("seed:{s}"), FileLibrary::random(&params, s)));
    }

    let (decodability, privacy) = in_pool(cfg.jobs, || -> Result<_, CliError> {
        let mut dec = Vec::new();
        let mut pri = Vec::new();
        for (name, lib) in &libraries {
            let report = audit::verify_decodability(&params, lib, g, &opts).map_err(input)?;
            dec.push(LibraryResult {
                library: name.clone(),
                result: report,
            });
            let outcome = match audit::verify_privacy(&params, lib, g, &opts) {
                Ok(report) => PrivacyOutcome::Checked(report),
                Err(AuditError::CapExceeded { required, cap }) => PrivacyOutcome::CapExceeded { required, cap },
                Err(e) => return Err(input(e)),
            };
            pri.push(LibraryResult {
                library: name.clone(),
                result: outcome,
            });
        }
        Ok((dec, pri))
    })??;

    let table = if (params.users(), params.files()) == (2, 2) {
        let lib = &libraries.get(1).unwrap_or(&libraries[0]).1;
        Some(audit::table1_reconstruct(&params, lib, g).map_err(input)?)
    } else {
        None
    };

    let summary = AuditSummary {
        decodability,
        privacy,
        table,
        out_dir: out_dir(cfg),
    };
    let dir = &summary.out_dir;
    fs::create_dir_all(dir)?;
    write_json(
        dir,
        "decodability.json",
        &DecodabilityFile {
            users: params.users(),
            files: params.files(),
            file_len: params.file_len(),
            cap,
            passed: summary.decodable(),
            complete: summary.decodability.iter().all(|r| r.result.complete),
            libraries: &summary.decodability,
        },
    )?;
    write_json(
        dir,
        "privacy.json",
        &PrivacyFile {
            users: params.users(),
            files: params.files(),
            file_len: params.file_len(),
            cap,
            passed: summary.private(),
            libraries: &summary.privacy,
        },
    )?;
    if let Some(table) = &summary.table {
        fs::write(dir.join("table1.txt"), table.render_text())?;
        write_json(dir, "table1.json", table)?;
    }
    Ok(summary)
}

// ---------------------------------------------------------------- rates

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum RatesFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RatesArgs {
    /// Comma-separated memory values such as 0,1/6,1/3
    #[arg(long)]
    pub grid: Option<String>,
    /// Four-scheme comparison at M* instead of the tradeoff table
    #[arg(long)]
    pub at_mstar: bool,
    #[arg(long, value_enum, default_value_t = RatesFormat::Csv)]
    pub format: RatesFormat,
}

#[derive(Debug, Clone)]
pub enum RatesTable {
    Tradeoff(Vec<TradeoffRow>),
    Comparison(ComparisonTable),
}

#[derive(Debug, Clone)]
pub struct RatesOutput {
    pub table: RatesTable,
    /// Rendered CSV or JSON.
    pub body: String,
    /// Printed on stderr for CSV output; embedded in JSON output.
    pub footnote: Option<String>,
}

#[derive(Serialize)]
struct TradeoffFile<'a> {
    #[serde(rename = "K")]
    users: usize,
    #[serde(rename = "N")]
    files: usize,
    m_star: RationalDoc,
    rows: &'a [TradeoffRow],
}

fn system_size(cfg: &RunConfig) -> Result<(usize, usize), CliError> {
    if cfg.preset.is_some() {
        let sys = resolve_system(cfg)?;
        return Ok((sys.users, sys.files));
    }
    let users = cfg.users.ok_or_else(|| CliError::Input("--K is required".into()))?;
    let files = cfg.files.ok_or_else(|| CliError::Input("--N is required".into()))?;
    if users == 0 || files == 0 {
        return Err(CliError::Input("K and N must be positive".into()));
    }
    Ok((users, files))
}

pub fn parse_grid(text: &str) -> Result<Vec<Rational>, CliError> {
    text.split(',')
        .map(|t| parse_rational(t).ok_or_else(|| CliError::Input(format!("bad grid value {t:?}"))))
        .collect()
}

pub fn cmd_rates(cfg: &RunConfig, args: &RatesArgs) -> Result<RatesOutput, CliError> {
    let (users, files) = system_size(cfg)?;
    if args.at_mstar {
        if args.grid.is_some() {
            return Err(CliError::Input("--grid and --at-mstar are exclusive".into()));
        }
        let table = analysis::comparison_rates_at_mstar(users, files).map_err(input)?;
        let footnote = table.footnote.clone();
        let body = match args.format {
            RatesFormat::Csv => analysis::to_csv(&table.points),
            RatesFormat::Json => json_line(&table)?,
        };
        let footnote = (args.format == RatesFormat::Csv).then_some(footnote);
        return Ok(RatesOutput {
            table: RatesTable::Comparison(table),
            body,
            footnote,
        });
    }
    let grid = match &args.grid {
        Some(text) => parse_grid(text)?,
        None => analysis::default_grid(users, files),
    };
    let rows = analysis::tradeoff_table(users, files, &grid).map_err(input)?;
    let body = match args.format {
        RatesFormat::Csv => {
            let points: Vec<RatePoint> = rows.iter().flat_map(TradeoffRow::points).collect();
            analysis::to_csv(&points)
        }
        RatesFormat::Json => json_line(&TradeoffFile {
            users,
            files,
            m_star: analysis::m_star(users, files).into(),
            rows: &rows,
        })?,
    };
    Ok(RatesOutput {
        table: RatesTable::Tradeoff(rows),
        body,
        footnote: None,
    })
}

fn json_line<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    Ok(text)
}
