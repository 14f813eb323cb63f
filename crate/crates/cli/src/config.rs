//! Run configuration: command-line flags layered over an optional JSON file.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use veilcache_core::galois::{field_for_params, Field};
use veilcache_core::mds::{systematic_generator, GeneratorMatrix};
use veilcache_core::presets::Preset;
use veilcache_core::SystemParams;

use crate::CliError;

pub const DEFAULT_OUT_DIR: &str = "veilcache-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Private,
    Nonprivate,
}

/// Contents of `--config <file>`; every field optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "K")]
    pub users: Option<usize>,
    #[serde(rename = "N")]
    pub files: Option<usize>,
    #[serde(rename = "F")]
    pub file_len: Option<usize>,
    pub field: Option<u64>,
    pub generator: Option<PathBuf>,
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub stripe: Option<usize>,
    pub mode: Option<Mode>,
    pub out: Option<PathBuf>,
    pub cap: Option<u64>,
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON config file; flags take precedence over its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of users
    #[arg(long = "K")]
    pub users: Option<usize>,
    /// Number of files
    #[arg(long = "N")]
    pub files: Option<usize>,
    /// File length in field symbols
    #[arg(long = "F")]
    pub file_len: Option<usize>,
    /// Prime field override
    #[arg(long)]
    pub field: Option<u64>,
    /// Generator matrix JSON ({field_p, n, k, rows})
    #[arg(long)]
    pub generator: Option<PathBuf>,
    /// Built-in configuration: example1 or example2
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, env = "VEILCACHE_SEED")]
    pub seed: Option<u64>,
    /// Symbols per subfile
    #[arg(long)]
    pub stripe: Option<usize>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Enumeration cap for audits
    #[arg(long)]
    pub cap: Option<u64>,
    /// Worker threads for audits (default: available parallelism)
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl CommonArgs {
    /// Flags over file values.
    pub fn merged(&self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        Ok(RunConfig {
            users: self.users.or(file.users),
            files: self.files.or(file.files),
            file_len: self.file_len.or(file.file_len),
            field: self.field.or(file.field),
            generator: self.generator.clone().or(file.generator),
            preset: self.preset.clone().or(file.preset),
            seed: self.seed.or(file.seed),
            stripe: self.stripe.or(file.stripe),
            mode: file.mode,
            out: self.out.clone().or(file.out),
            cap: self.cap.or(file.cap),
            jobs: self.jobs.or(file.jobs),
        })
    }
}

/// A fully resolved system: sizes, field and generator.
#[derive(Debug, Clone)]
pub struct ResolvedSystem {
    pub users: usize,
    pub files: usize,
    pub field: Field,
    pub generator: GeneratorMatrix,
    pub preset: Option<Preset>,
}

impl ResolvedSystem {
    pub fn subpacket_count(&self) -> usize {
        self.users * (self.files - 1) + 1
    }

    /// Parameters for the coded scheme; `F` defaults to `K(N-1)+1` times the
    /// stripe length.
    pub fn params(&self, cfg: &RunConfig) -> Result<SystemParams, CliError> {
        let file_len = match cfg.file_len {
            Some(f) => f,
            None => self.subpacket_count() * cfg.stripe.unwrap_or(1),
        };
        SystemParams::new(self.users, self.files, file_len, self.field).map_err(|e| CliError::Input(e.to_string()))
    }
}

pub fn resolve_system(cfg: &RunConfig) -> Result<ResolvedSystem, CliError> {
    let preset = cfg
        .preset
        .as_deref()
        .map(str::parse::<Preset>)
        .transpose()
        .map_err(CliError::Input)?;

    let (users, files, field, generator) = if let Some(preset) = preset {
        let (params, g) = preset.build(1);
        for (flag, given, expected) in [("K", cfg.users, params.users()), ("N", cfg.files, params.files())] {
            if given.is_some_and(|v| v != expected) {
                return Err(CliError::Input(format!(
                    "--{flag} conflicts with preset {} ({flag}={expected})",
                    preset.name()
                )));
            }
        }
        if cfg.field.is_some_and(|p| p != params.field().modulus()) {
            return Err(CliError::Input(format!(
                "--field conflicts with preset {}",
                preset.name()
            )));
        }
        let g = match &cfg.generator {
            Some(path) => load_generator(path)?,
            None => g,
        };
        (params.users(), params.files(), params.field(), g)
    } else {
        let users = cfg.users.ok_or_else(|| CliError::Input("--K is required".into()))?;
        let files = cfg.files.ok_or_else(|| CliError::Input("--N is required".into()))?;
        let field = match cfg.field {
            Some(p) => Field::new(p).map_err(|e| CliError::Input(e.to_string()))?,
            None => field_for_params(users, files).map_err(|e| CliError::Input(e.to_string()))?,
        };
        let g = match &cfg.generator {
            Some(path) => load_generator(path)?,
            None => systematic_generator(users * files, users * (files - 1) + 1, field)
                .map_err(|e| CliError::Input(e.to_string()))?,
        };
        (users, files, field, g)
    };
    if generator.field() != field {
        return Err(CliError::Input(format!(
            "generator is over GF({}) but the system uses {}",
            generator.field().modulus(),
            field
        )));
    }
    Ok(ResolvedSystem {
        users,
        files,
        field,
        generator,
        preset,
    })
}

fn load_generator(path: &Path) -> Result<GeneratorMatrix, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    GeneratorMatrix::from_json(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}
