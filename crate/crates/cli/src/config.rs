//! Run configuration: the JSON schema, flag overrides, and resolution into
//! a fully materialized, echoable settings document.
//!
//! Precedence is command line over config file over built-in defaults. The
//! master seed has no default: it must arrive through `--seed` or the
//! config, so every run is reproducible from its echoed settings alone.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use fpprace_core::degrees::{parse_degree_file, DegreeSequence, DegreeSource};
use fpprace_core::ensemble::{default_burn_in, DegreeSourceEcho, ExperimentConfig, SeedEcho};
use fpprace_core::exploration::SeedChoice;
use fpprace_core::SCHEMA_VERSION;

/// Default IID degree law when no degree source is configured: half degree
/// two, half degree three. Minimum degree two keeps the giant component
/// covering the graph, and the mixed support keeps the size-biased law
/// nondegenerate.
pub const DEFAULT_PMF: [(usize, f64); 2] = [(2, 0.5), (3, 0.5)];
/// Default vertex count when neither `--n` nor the config provides one.
pub const DEFAULT_N: usize = 1000;
/// Default horizon for branching trajectories.
pub const DEFAULT_T_END: f64 = 10.0;

/// Errors are classed by exit code: validation failures (bad flags, bad
/// config, bad parameter values) exit 1, runtime failures exit 2.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "invalid configuration: {msg}"),
            CliError::Runtime(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Flags shared by every experiment subcommand. Each one overrides the
/// matching config-file field.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags given here override its fields.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master RNG seed. Required (here or in the config): runs never seed
    /// from the clock.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Vertex count for an IID degree source.
    #[arg(long)]
    pub n: Option<usize>,
    /// Infection rate of type 1.
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// Infection rate of type 2.
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Number of Monte Carlo replicas.
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Condition sampled graphs on simplicity (rejection sampling).
    #[arg(long)]
    pub simple: bool,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Late-window margin: windowed statistics stop at step (1-epsilon)N.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Burn-in override; the default is ceil(n^(1/3)).
    #[arg(long)]
    pub nu: Option<usize>,
}

/// The config file as written by the user. Unknown keys are rejected so a
/// typo cannot silently fall back to a default.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub schema_version: u32,
    /// When present, must match the invoked subcommand.
    #[serde(default)]
    pub subcommand: Option<String>,
    #[serde(default)]
    pub degrees: Option<DegreesSpec>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub lambda1: Option<f64>,
    #[serde(default)]
    pub lambda2: Option<f64>,
    #[serde(default)]
    pub seeds: Option<SeedSpec>,
    #[serde(default)]
    pub replicas: Option<usize>,
    #[serde(default)]
    pub master_seed: Option<u64>,
    #[serde(default)]
    pub nu: Option<usize>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub thinning: Option<usize>,
    #[serde(default)]
    pub simple: Option<bool>,
    #[serde(default)]
    pub fixed_sequence: Option<bool>,
    #[serde(default)]
    pub max_simple_attempts: Option<usize>,
    #[serde(default)]
    pub branching: Option<BranchingSpec>,
}

/// Degree source specification. JSON object keys are strings, so pmf keys
/// are parsed to integers during resolution.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DegreesSpec {
    Iid {
        pmf: BTreeMap<String, f64>,
        #[serde(default)]
        n: Option<usize>,
    },
    Explicit {
        values: Vec<i64>,
    },
    File {
        path: PathBuf,
    },
}

/// Seed-vertex selection, mirroring the engine's two modes.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SeedSpec {
    Uniform,
    Explicit { v1: usize, v2: usize },
}

impl From<SeedSpec> for SeedChoice {
    fn from(s: SeedSpec) -> Self {
        match s {
            SeedSpec::Uniform => SeedChoice::UniformDistinct,
            SeedSpec::Explicit { v1, v2 } => SeedChoice::Explicit { v1, v2 },
        }
    }
}

/// What the `branching` subcommand should produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BranchingMode {
    /// One pair trajectory plus growth-rate estimates.
    Trajectory,
    /// Replicated probes of the limit fraction b1/(b1+b2).
    V,
    /// Small-time comparison against the exploration engine.
    Coupling,
}

impl BranchingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BranchingMode::Trajectory => "trajectory",
            BranchingMode::V => "v",
            BranchingMode::Coupling => "coupling",
        }
    }
}

/// Branching-specific config section.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchingSpec {
    #[serde(default)]
    pub mode: Option<BranchingMode>,
    #[serde(default)]
    pub a1: Option<u64>,
    #[serde(default)]
    pub a2: Option<u64>,
    /// Offspring pmf on nonnegative integers. When absent the law is derived
    /// from the degree source: size-biased degree minus one.
    #[serde(default)]
    pub offspring: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub t_probe: Option<f64>,
}

/// Branching settings after resolution. `offspring` and `t_probe` may still
/// be computed from the realized degree sequence at run time; the command
/// materializes them into the echo before writing outputs.
#[derive(Debug, Clone)]
pub struct BranchingSettings {
    pub mode: BranchingMode,
    pub a1: u64,
    pub a2: u64,
    pub offspring: Option<BTreeMap<usize, f64>>,
    pub t_end: f64,
    pub t_probe: Option<f64>,
}

impl Default for BranchingSettings {
    fn default() -> Self {
        BranchingSettings {
            mode: BranchingMode::Trajectory,
            a1: 1,
            a2: 1,
            offspring: None,
            t_end: DEFAULT_T_END,
            t_probe: None,
        }
    }
}

/// Echo of the branching settings with every default materialized.
#[derive(Debug, Clone, Serialize)]
pub struct BranchingEcho {
    pub mode: &'static str,
    pub a1: u64,
    pub a2: u64,
    pub offspring: BTreeMap<usize, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_probe: Option<f64>,
}

/// The fully resolved settings document echoed into every output file.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub schema_version: u32,
    pub subcommand: String,
    pub degrees: DegreeSourceEcho,
    /// Path of the degree file, when the source was one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree_file: Option<PathBuf>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub seeds: SeedEcho,
    pub replicas: usize,
    pub master_seed: u64,
    pub nu: usize,
    pub epsilon: f64,
    pub out: PathBuf,
    pub thinning: usize,
    pub simple: bool,
    pub fixed_sequence: bool,
    pub max_simple_attempts: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branching: Option<BranchingEcho>,
}

/// Resolution output: the echo document plus the runnable pieces.
#[derive(Debug, Clone)]
pub struct Settings {
    pub echo: ResolvedConfig,
    pub degrees: DegreeSource,
    pub seeds: SeedChoice,
    pub branching: BranchingSettings,
}

impl Settings {
    /// The ensemble configuration these settings describe.
    pub fn experiment_config(&self) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(self.degrees.clone(), self.echo.master_seed);
        cfg.lambda1 = self.echo.lambda1;
        cfg.lambda2 = self.echo.lambda2;
        cfg.replicas = self.echo.replicas;
        cfg.burn_in = Some(self.echo.nu);
        cfg.epsilon = self.echo.epsilon;
        cfg.thinning = self.echo.thinning;
        cfg.simple = self.echo.simple;
        cfg.max_simple_attempts = self.echo.max_simple_attempts;
        cfg.fixed_sequence = self.echo.fixed_sequence;
        cfg.seeds = self.seeds;
        cfg
    }
}

fn parse_pmf_keys(map: &BTreeMap<String, f64>) -> Result<BTreeMap<usize, f64>, CliError> {
    let mut out = BTreeMap::new();
    for (key, &prob) in map {
        let value: usize = key.trim().parse().map_err(|_| {
            CliError::validation(format!("pmf key {key:?} is not a nonnegative integer"))
        })?;
        out.insert(value, prob);
    }
    Ok(out)
}

pub fn load_config_file(path: &Path) -> Result<RunConfigFile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
    let file: RunConfigFile = serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("config schema error in {}: {e}", path.display())))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(CliError::validation(format!(
            "config schema_version {} is unsupported (expected {})",
            file.schema_version, SCHEMA_VERSION
        )));
    }
    Ok(file)
}

/// Merges flags over the (optional) config file and materializes every
/// default. `subcommand` is the invoked name; a conflicting `subcommand`
/// field in the config is rejected.
pub fn resolve(subcommand: &str, args: &CommonArgs) -> Result<Settings, CliError> {
    let file = match &args.config {
        Some(path) => Some(load_config_file(path)?),
        None => None,
    };
    let file = file.as_ref();

    if let Some(declared) = file.and_then(|f| f.subcommand.as_deref()) {
        if declared != subcommand {
            return Err(CliError::validation(format!(
                "config declares subcommand {declared:?} but {subcommand:?} was invoked"
            )));
        }
    }

    let master_seed = args
        .seed
        .or(file.and_then(|f| f.master_seed))
        .ok_or_else(|| {
            CliError::validation(
                "a master seed is required: pass --seed or set master_seed in the config",
            )
        })?;

    let lambda1 = args.lambda1.or(file.and_then(|f| f.lambda1)).unwrap_or(1.0);
    let lambda2 = args.lambda2.or(file.and_then(|f| f.lambda2)).unwrap_or(1.0);
    for (name, value) in [("lambda1", lambda1), ("lambda2", lambda2)] {
        if !(value.is_finite() && value > 0.0) {
            return Err(CliError::validation(format!(
                "{name} must be a positive finite number, got {value}"
            )));
        }
    }

    let epsilon = args.epsilon.or(file.and_then(|f| f.epsilon)).unwrap_or(0.1);
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(CliError::validation(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }

    let replicas = args.replicas.or(file.and_then(|f| f.replicas)).unwrap_or(100);
    if replicas == 0 {
        return Err(CliError::validation("replicas must be at least 1"));
    }

    let thinning = file.and_then(|f| f.thinning).unwrap_or(100);
    if thinning == 0 {
        return Err(CliError::validation("thinning must be at least 1"));
    }

    let max_simple_attempts = file.and_then(|f| f.max_simple_attempts).unwrap_or(1000);
    if max_simple_attempts == 0 {
        return Err(CliError::validation("max_simple_attempts must be at least 1"));
    }

    let simple = args.simple || file.and_then(|f| f.simple).unwrap_or(false);
    let fixed_sequence = file.and_then(|f| f.fixed_sequence).unwrap_or(false);
    let out = args
        .out
        .clone()
        .or_else(|| file.and_then(|f| f.out.clone()))
        .unwrap_or_else(|| PathBuf::from("."));

    // Degree source. --n overrides the pmf's vertex count; for explicit
    // sources it must agree with the sequence length.
    let top_n = args.n.or(file.and_then(|f| f.n));
    let mut degree_file = None;
    let degrees = match file.and_then(|f| f.degrees.as_ref()) {
        Some(DegreesSpec::Iid { pmf, n }) => {
            let pmf = parse_pmf_keys(pmf)?;
            let n = top_n.or(*n).unwrap_or(DEFAULT_N);
            make_iid_source(pmf, n)?
        }
        Some(DegreesSpec::Explicit { values }) => {
            let seq = DegreeSequence::new(values)
                .map_err(|e| CliError::validation(format!("explicit degrees: {e}")))?;
            check_explicit_n(top_n, seq.n())?;
            DegreeSource::Explicit(seq)
        }
        Some(DegreesSpec::File { path }) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::validation(format!("cannot read degree file {}: {e}", path.display()))
            })?;
            let seq = parse_degree_file(&text)
                .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
            check_explicit_n(top_n, seq.n())?;
            degree_file = Some(path.clone());
            DegreeSource::Explicit(seq)
        }
        None => {
            let pmf: BTreeMap<usize, f64> = DEFAULT_PMF.iter().copied().collect();
            make_iid_source(pmf, top_n.unwrap_or(DEFAULT_N))?
        }
    };

    let n = degrees.n();
    if n < 2 {
        return Err(CliError::validation(format!(
            "the competition needs at least 2 vertices, got {n}"
        )));
    }
    let nu = args.nu.or(file.and_then(|f| f.nu)).unwrap_or_else(|| default_burn_in(n));

    let seeds: SeedChoice = file
        .and_then(|f| f.seeds)
        .map(SeedChoice::from)
        .unwrap_or(SeedChoice::UniformDistinct);
    if let SeedChoice::Explicit { v1, v2 } = seeds {
        if v1 == v2 {
            return Err(CliError::validation("seed vertices must be distinct"));
        }
        if v1 >= n || v2 >= n {
            return Err(CliError::validation(format!(
                "seed vertices ({v1}, {v2}) out of range for n = {n}"
            )));
        }
    }

    let branching = match file.and_then(|f| f.branching.as_ref()) {
        Some(spec) => {
            let offspring = match &spec.offspring {
                Some(map) => {
                    let map = parse_pmf_keys(map)?;
                    Some(map)
                }
                None => None,
            };
            let defaults = BranchingSettings::default();
            let a1 = spec.a1.unwrap_or(defaults.a1);
            let a2 = spec.a2.unwrap_or(defaults.a2);
            if a1 == 0 || a2 == 0 {
                return Err(CliError::validation("initial populations must be at least 1"));
            }
            for (name, value) in [("t_end", spec.t_end), ("t_probe", spec.t_probe)] {
                if let Some(v) = value {
                    if !(v.is_finite() && v >= 0.0) {
                        return Err(CliError::validation(format!(
                            "{name} must be a nonnegative finite number, got {v}"
                        )));
                    }
                }
            }
            BranchingSettings {
                mode: spec.mode.unwrap_or(defaults.mode),
                a1,
                a2,
                offspring,
                t_end: spec.t_end.unwrap_or(defaults.t_end),
                t_probe: spec.t_probe,
            }
        }
        None => BranchingSettings::default(),
    };

    let echo = ResolvedConfig {
        schema_version: SCHEMA_VERSION,
        subcommand: subcommand.to_string(),
        degrees: (&degrees).into(),
        degree_file,
        lambda1,
        lambda2,
        seeds: seeds.into(),
        replicas,
        master_seed,
        nu,
        epsilon,
        out,
        thinning,
        simple,
        fixed_sequence,
        max_simple_attempts,
        branching: None,
    };
    Ok(Settings {
        echo,
        degrees,
        seeds,
        branching,
    })
}

fn make_iid_source(pmf: BTreeMap<usize, f64>, n: usize) -> Result<DegreeSource, CliError> {
    let pmf = fpprace_core::degrees::IntPmf::positive(&pmf)
        .map_err(|e| CliError::validation(format!("degree pmf: {e}")))?;
    Ok(DegreeSource::Iid { pmf, n })
}

fn check_explicit_n(requested: Option<usize>, actual: usize) -> Result<(), CliError> {
    if let Some(n) = requested {
        if n != actual {
            return Err(CliError::validation(format!(
                "--n {n} conflicts with the explicit degree sequence of length {actual}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args_with_seed() -> CommonArgs {
        CommonArgs {
            seed: Some(7),
            ..CommonArgs::default()
        }
    }

    #[test]
    fn defaults_materialize() {
        let settings = resolve("compete", &args_with_seed()).unwrap();
        let echo = &settings.echo;
        assert_eq!(echo.master_seed, 7);
        assert_eq!(echo.lambda1, 1.0);
        assert_eq!(echo.replicas, 100);
        assert_eq!(echo.epsilon, 0.1);
        assert_eq!(echo.nu, 10); // ceil(1000^(1/3))
        assert_eq!(echo.subcommand, "compete");
        assert!(!echo.simple);
        match &settings.degrees {
            DegreeSource::Iid { pmf, n } => {
                assert_eq!(*n, DEFAULT_N);
                assert_eq!(pmf.support(), &[2, 3]);
            }
            other => panic!("unexpected source {other:?}"),
        }
    }

    #[test]
    fn missing_seed_is_a_validation_error() {
        let err = resolve("compete", &CommonArgs::default()).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("master seed"));
    }

    #[test]
    fn flags_override_config_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(
            &path,
            r#"{"schema_version":1,"lambda1":3.0,"master_seed":1,"replicas":5}"#,
        )
        .unwrap();
        let args = CommonArgs {
            config: Some(path),
            lambda1: Some(2.0),
            seed: Some(9),
            ..CommonArgs::default()
        };
        let settings = resolve("ensemble", &args).unwrap();
        assert_eq!(settings.echo.lambda1, 2.0);
        assert_eq!(settings.echo.master_seed, 9);
        assert_eq!(settings.echo.replicas, 5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(&path, r#"{"schema_version":1,"master_seed":1,"lamda1":2.0}"#).unwrap();
        let args = CommonArgs {
            config: Some(path),
            ..CommonArgs::default()
        };
        let err = resolve("compete", &args).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("schema error"));
    }

    #[test]
    fn subcommand_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(
            &path,
            r#"{"schema_version":1,"master_seed":1,"subcommand":"ensemble"}"#,
        )
        .unwrap();
        let args = CommonArgs {
            config: Some(path),
            ..CommonArgs::default()
        };
        assert!(resolve("compete", &args).is_err());
        let args2 = CommonArgs {
            config: Some(dir.path().join("run.json")),
            ..CommonArgs::default()
        };
        assert!(resolve("ensemble", &args2).is_ok());
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(&path, r#"{"schema_version":99,"master_seed":1}"#).unwrap();
        let args = CommonArgs {
            config: Some(path),
            ..CommonArgs::default()
        };
        let err = resolve("compete", &args).unwrap_err();
        assert!(err.to_string().contains("schema_version"));
    }

    #[test]
    fn explicit_degrees_and_seed_vertices_resolve() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(
            &path,
            r#"{
                "schema_version": 1,
                "master_seed": 3,
                "degrees": {"kind": "explicit", "values": [2, 2, 3, 3]},
                "seeds": {"mode": "explicit", "v1": 0, "v2": 3}
            }"#,
        )
        .unwrap();
        let args = CommonArgs {
            config: Some(path),
            ..CommonArgs::default()
        };
        let settings = resolve("compete", &args).unwrap();
        assert_eq!(settings.degrees.n(), 4);
        assert_eq!(
            settings.seeds,
            SeedChoice::Explicit { v1: 0, v2: 3 }
        );
        // nu materialized from the tiny n.
        assert_eq!(settings.echo.nu, 2);
    }

    #[test]
    fn n_conflict_with_explicit_degrees_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(
            &path,
            r#"{"schema_version":1,"master_seed":3,"degrees":{"kind":"explicit","values":[2,2]}}"#,
        )
        .unwrap();
        let args = CommonArgs {
            config: Some(path),
            n: Some(7),
            ..CommonArgs::default()
        };
        assert!(resolve("compete", &args).is_err());
    }

    #[test]
    fn branching_section_resolves_with_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(
            &path,
            r#"{
                "schema_version": 1,
                "master_seed": 3,
                "branching": {"mode": "v", "t_probe": 4.5, "offspring": {"2": 1.0}}
            }"#,
        )
        .unwrap();
        let args = CommonArgs {
            config: Some(path),
            ..CommonArgs::default()
        };
        let settings = resolve("branching", &args).unwrap();
        assert_eq!(settings.branching.mode, BranchingMode::V);
        assert_eq!(settings.branching.a1, 1);
        assert_eq!(settings.branching.t_probe, Some(4.5));
        assert_eq!(
            settings.branching.offspring.as_ref().unwrap().get(&2),
            Some(&1.0)
        );
    }

    #[test]
    fn bad_pmf_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(
            &path,
            r#"{"schema_version":1,"master_seed":1,"degrees":{"kind":"iid","pmf":{"two":0.5,"3":0.5}}}"#,
        )
        .unwrap();
        let args = CommonArgs {
            config: Some(path),
            ..CommonArgs::default()
        };
        let err = resolve("ensemble", &args).unwrap_err();
        assert!(err.to_string().contains("pmf key"));
    }
}
