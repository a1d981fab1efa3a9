//! Experiment profiles: flat TOML with explicit units in the key names.
//!
//! Every physical key carries its unit (`p_m_dbm`, `tau_d_db`,
//! `w_m_mhz`, `lambda_m_per_km2`), and the conversion to linear SI
//! happens exactly once, at parse time — the resolved
//! [`ExperimentConfig`] holds watts, hertz, linear SINR ratios, and
//! per-m² densities only. Densities are accepted either as absolute
//! per-km² values or as node counts per reference disk (a disk of radius
//! [`REFERENCE_DISK_RADIUS_M`]), the form network descriptions usually
//! quote.
//!
//! Profiles resolve in order: an explicit filesystem path, then
//! `$OFFNET_PROFILE_DIR/<name>[.toml]`, then the bundled profiles
//! compiled into the crate.

use std::env;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::content::CacheParams;
use crate::error::{Error, Result};
use crate::geometry::GeometryParams;
use crate::mc::{EdgePolicy, SimConfig};
use crate::perf::NetworkParams;
use crate::scheme::scheme_by_name;

/// Environment variable naming the directory searched for profiles
/// referenced by bare name.
pub const PROFILE_DIR_ENV: &str = "OFFNET_PROFILE_DIR";

/// Radius of the reference disk behind `*_n_per_reference_disk` keys.
pub const REFERENCE_DISK_RADIUS_M: f64 = 500.0;

const BUNDLED: &[(&str, &str)] = &[("table1", include_str!("../profiles/table1.toml"))];

/// Fully resolved experiment description in linear SI units.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub network: NetworkParams,
    pub cache: CacheParams,
    pub geometry: GeometryParams,
    pub sim: SimConfig,
    pub sweep: SweepSpec,
    pub output: OutputSpec,
}

/// Sweep axes. An empty axis means "no sweep requested": commands fall
/// back to a single default point on that axis.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    /// Candidate budgets, ascending.
    pub k: Vec<u32>,
    /// Content indices.
    pub c: Vec<u32>,
    /// Popularity skewness values.
    pub zeta: Vec<f64>,
    /// Selection-scheme registry names.
    pub schemes: Vec<String>,
}

impl SweepSpec {
    /// The k axis, or `[fallback]` when no sweep was requested.
    pub fn k_axis(&self, fallback: u32) -> Vec<u32> {
        if self.k.is_empty() {
            vec![fallback]
        } else {
            self.k.clone()
        }
    }

    /// The content axis, or `[fallback]` when no sweep was requested.
    pub fn c_axis(&self, fallback: u32) -> Vec<u32> {
        if self.c.is_empty() {
            vec![fallback]
        } else {
            self.c.clone()
        }
    }

    /// The scheme axis, or `[fallback]` when no sweep was requested.
    pub fn scheme_axis(&self, fallback: &str) -> Vec<String> {
        if self.schemes.is_empty() {
            vec![fallback.to_string()]
        } else {
            self.schemes.clone()
        }
    }
}

/// Where and how result tables are written.
#[derive(Debug, Clone)]
pub struct OutputSpec {
    /// Destination file; `None` writes to stdout.
    pub path: Option<PathBuf>,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::UnknownName {
                kind: "output format",
                name: other.into(),
                known: "csv, json".into(),
            }),
        }
    }
}

/// Converts a dBm power to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts a dB ratio to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Raw on-disk profile. Field names are the config-file schema; every
/// key is top-level and unit-suffixed.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    alpha: f64,

    lambda_m_per_km2: Option<f64>,
    lambda_m_n_per_reference_disk: Option<f64>,
    lambda_d_per_km2: Option<f64>,
    lambda_d_n_per_reference_disk: Option<f64>,
    lambda_u_per_km2: Option<f64>,
    lambda_u_n_per_reference_disk: Option<f64>,

    p_m_dbm: f64,
    p_d_dbm: f64,
    w_m_mhz: f64,
    w_d_mhz: f64,
    tau_m_db: f64,
    tau_d_db: f64,
    /// Omitted key means the interference-limited regime (σ² = 0).
    noise_dbm: Option<f64>,
    beta: f64,

    library_size: u32,
    zeta: f64,
    mbs_cache_files: u32,
    helper_cache_files: u32,

    #[serde(default = "default_trials")]
    trials: u64,
    #[serde(default)]
    seed: u64,
    window_radius_m: Option<f64>,
    edge_policy: Option<String>,

    sweep_k_min: Option<u32>,
    sweep_k_max: Option<u32>,
    #[serde(default)]
    sweep_c: Vec<u32>,
    #[serde(default)]
    sweep_zeta: Vec<f64>,
    #[serde(default)]
    sweep_schemes: Vec<String>,

    output_path: Option<String>,
    output_format: Option<String>,
}

fn default_trials() -> u64 {
    100_000
}

impl ExperimentConfig {
    /// Parses and fully validates a profile from TOML text.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawProfile =
            toml::from_str(text).map_err(|e| Error::Config(format!("profile parse: {e}")))?;
        raw.resolve()
    }

    /// Loads a profile from a file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read profile {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// A profile compiled into the library ([`bundled_profile_names`]).
    pub fn bundled(name: &str) -> Result<Self> {
        Self::from_toml_str(bundled_profile_text(name)?)
    }

    /// Resolves a profile reference: an existing file path first, then
    /// `$OFFNET_PROFILE_DIR/<name>[.toml]`, then the bundled set.
    pub fn resolve(spec: &str) -> Result<Self> {
        let direct = Path::new(spec);
        if direct.is_file() {
            return Self::load(direct);
        }
        if let Ok(dir) = env::var(PROFILE_DIR_ENV) {
            for candidate in [
                Path::new(&dir).join(spec),
                Path::new(&dir).join(format!("{spec}.toml")),
            ] {
                if candidate.is_file() {
                    return Self::load(&candidate);
                }
            }
        }
        Self::bundled(spec)
    }
}

/// Names of the profiles compiled into the library.
pub fn bundled_profile_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|&(name, _)| name).collect()
}

/// Raw TOML text of a bundled profile, for `profile dump`.
pub fn bundled_profile_text(name: &str) -> Result<&'static str> {
    BUNDLED
        .iter()
        .find(|&&(n, _)| n == name)
        .map(|&(_, text)| text)
        .ok_or_else(|| Error::UnknownName {
            kind: "profile",
            name: name.into(),
            known: format!(
                "bundled: {}; or a file path, or a name under ${PROFILE_DIR_ENV}",
                bundled_profile_names().join(", ")
            ),
        })
}

impl RawProfile {
    fn resolve(self) -> Result<ExperimentConfig> {
        let lambda_m = density_per_m2(
            "lambda_m",
            self.lambda_m_per_km2,
            self.lambda_m_n_per_reference_disk,
        )?;
        let lambda_d = density_per_m2(
            "lambda_d",
            self.lambda_d_per_km2,
            self.lambda_d_n_per_reference_disk,
        )?;
        let lambda_u = density_per_m2(
            "lambda_u",
            self.lambda_u_per_km2,
            self.lambda_u_n_per_reference_disk,
        )?;

        let network = NetworkParams {
            lambda_m,
            lambda_d,
            lambda_u,
            p_m: dbm_to_watts(self.p_m_dbm),
            p_d: dbm_to_watts(self.p_d_dbm),
            w_m: self.w_m_mhz * 1e6,
            w_d: self.w_d_mhz * 1e6,
            alpha: self.alpha,
            tau_m: db_to_linear(self.tau_m_db),
            tau_d: db_to_linear(self.tau_d_db),
            sigma2: self.noise_dbm.map_or(0.0, dbm_to_watts),
            beta: self.beta,
        };
        network.validate().map_err(profile_value_error)?;

        let cache = CacheParams::new(
            self.library_size,
            self.zeta,
            self.mbs_cache_files,
            self.helper_cache_files,
        )
        .map_err(profile_value_error)?;
        let geometry = GeometryParams::new(lambda_m, lambda_d).map_err(profile_value_error)?;

        let mut sim = SimConfig::new(self.trials, self.seed);
        sim.window_radius = self.window_radius_m;
        if let Some(policy) = &self.edge_policy {
            sim.edge_policy = policy.parse::<EdgePolicy>()?;
        }
        sim.validate().map_err(profile_value_error)?;

        let sweep = self.resolve_sweep(&cache)?;
        let output = OutputSpec {
            path: self.output_path.map(PathBuf::from),
            format: match &self.output_format {
                Some(f) => f.parse()?,
                None => OutputFormat::Csv,
            },
        };

        Ok(ExperimentConfig {
            network,
            cache,
            geometry,
            sim,
            sweep,
            output,
        })
    }

    fn resolve_sweep(&self, cache: &CacheParams) -> Result<SweepSpec> {
        // Either bound alone implies the other; no bound means no k sweep.
        let k = match (self.sweep_k_min, self.sweep_k_max) {
            (None, None) => Vec::new(),
            (lo, hi) => {
                let lo = lo.unwrap_or(1);
                let hi = hi.unwrap_or_else(|| lo.max(8));
                if lo < 1 || lo > hi {
                    return Err(Error::Config(format!(
                        "sweep k range needs 1 <= k_min <= k_max, got {lo}..{hi}"
                    )));
                }
                (lo..=hi).collect()
            }
        };
        for &c in &self.sweep_c {
            if c < 1 || c > cache.library_size {
                return Err(Error::Config(format!(
                    "sweep content index {c} outside [1, {}]",
                    cache.library_size
                )));
            }
        }
        // Each skewness value must itself yield a valid cache model.
        for &zeta in &self.sweep_zeta {
            CacheParams::new(
                cache.library_size,
                zeta,
                cache.mbs_cache_size,
                cache.helper_cache_size,
            )
            .map_err(profile_value_error)?;
        }
        let mut schemes = Vec::with_capacity(self.sweep_schemes.len());
        for name in &self.sweep_schemes {
            let canon = name.to_ascii_lowercase();
            scheme_by_name(&canon)?;
            schemes.push(canon);
        }
        Ok(SweepSpec {
            k,
            c: self.sweep_c.clone(),
            zeta: self.sweep_zeta.clone(),
            schemes,
        })
    }
}

/// Rebrands a domain error raised by a profile value as a configuration
/// error, so callers can distinguish bad input from numerical trouble.
fn profile_value_error(e: Error) -> Error {
    Error::Config(format!("invalid profile value: {e}"))
}

fn density_per_m2(name: &str, per_km2: Option<f64>, per_disk: Option<f64>) -> Result<f64> {
    let disk_area = PI * REFERENCE_DISK_RADIUS_M * REFERENCE_DISK_RADIUS_M;
    match (per_km2, per_disk) {
        (Some(v), None) => Ok(v * 1e-6),
        (None, Some(n)) => Ok(n / disk_area),
        (Some(_), Some(_)) => Err(Error::Config(format!(
            "{name}: give {name}_per_km2 or {name}_n_per_reference_disk, not both"
        ))),
        (None, None) => Err(Error::Config(format!(
            "{name}: missing density; give {name}_per_km2 or {name}_n_per_reference_disk"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::io::Write;

    fn minimal_profile() -> String {
        "\
alpha = 4.0
lambda_m_n_per_reference_disk = 10.0
lambda_d_n_per_reference_disk = 100.0
lambda_u_n_per_reference_disk = 200.0
p_m_dbm = 30.0
p_d_dbm = 23.0
w_m_mhz = 7.0
w_d_mhz = 3.0
tau_m_db = 30.0
tau_d_db = 30.0
noise_dbm = -110.0
beta = 0.8
library_size = 10000
zeta = 0.8
mbs_cache_files = 500
helper_cache_files = 20
"
        .to_string()
    }

    #[test]
    fn bundled_profile_resolves_to_linear_si_units() {
        let cfg = ExperimentConfig::bundled("table1").unwrap();
        let disk_area = PI * 500.0 * 500.0;
        assert_relative_eq!(cfg.network.lambda_m, 10.0 / disk_area, max_relative = 1e-15);
        assert_relative_eq!(cfg.network.lambda_d, 100.0 / disk_area, max_relative = 1e-15);
        assert_relative_eq!(cfg.network.lambda_u, 200.0 / disk_area, max_relative = 1e-15);
        assert_relative_eq!(cfg.network.p_m, 1.0, max_relative = 1e-12);
        assert_relative_eq!(cfg.network.p_d, 10f64.powf(-0.7), max_relative = 1e-12);
        assert_relative_eq!(cfg.network.w_m, 7e6, max_relative = 1e-15);
        assert_relative_eq!(cfg.network.tau_m, 1000.0, max_relative = 1e-12);
        assert_relative_eq!(cfg.network.sigma2, 1e-14, max_relative = 1e-12);
        assert_relative_eq!(cfg.geometry.eta_d(), 10.0, max_relative = 1e-12);
        assert_eq!(cfg.cache.library_size, 10_000);
        assert_eq!(cfg.cache.helper_cache_size, 20);
        assert_eq!(cfg.sim.trials, 100_000);
        assert_eq!(cfg.sweep.k, (1..=8).collect::<Vec<_>>());
        assert_eq!(cfg.sweep.c, vec![1, 10, 100]);
        assert_eq!(cfg.sweep.schemes, vec!["ns", "us"]);
        assert_eq!(cfg.output.format, OutputFormat::Csv);
    }

    #[test]
    fn density_forms_are_equivalent() {
        let per_disk = ExperimentConfig::from_toml_str(&minimal_profile()).unwrap();
        let text = minimal_profile().replace(
            "lambda_m_n_per_reference_disk = 10.0",
            &format!(
                "lambda_m_per_km2 = {:.17e}",
                10.0 / (PI * 500.0 * 500.0) * 1e6
            ),
        );
        let per_km2 = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_relative_eq!(
            per_disk.network.lambda_m,
            per_km2.network.lambda_m,
            max_relative = 1e-15
        );
    }

    #[test]
    fn duplicate_or_missing_density_keys_are_config_errors() {
        let both = format!("{}lambda_m_per_km2 = 12.7\n", minimal_profile());
        assert!(matches!(
            ExperimentConfig::from_toml_str(&both),
            Err(Error::Config(msg)) if msg.contains("not both")
        ));

        let neither = minimal_profile().replace("lambda_u_n_per_reference_disk = 200.0\n", "");
        assert!(matches!(
            ExperimentConfig::from_toml_str(&neither),
            Err(Error::Config(msg)) if msg.contains("missing density")
        ));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{}p_m_watts = 1.0\n", minimal_profile());
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(matches!(&err, Error::Config(msg) if msg.contains("p_m_watts")), "{err}");
    }

    #[test]
    fn unknown_scheme_names_are_rejected() {
        let text = format!("{}sweep_schemes = [\"nearest\"]\n", minimal_profile());
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(
            matches!(&err, Error::UnknownName { kind, .. } if *kind == "selection scheme"),
            "{err}"
        );
    }

    #[test]
    fn omitted_noise_key_selects_the_interference_limited_regime() {
        let text = minimal_profile().replace("noise_dbm = -110.0\n", "");
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg.network.sigma2, 0.0);
    }

    #[test]
    fn disordered_k_range_is_rejected() {
        let text = format!("{}sweep_k_min = 5\nsweep_k_max = 2\n", minimal_profile());
        assert!(matches!(
            ExperimentConfig::from_toml_str(&text),
            Err(Error::Config(msg)) if msg.contains("k range")
        ));
    }

    #[test]
    fn empty_axes_fall_back_to_single_points() {
        let cfg = ExperimentConfig::from_toml_str(&minimal_profile()).unwrap();
        assert!(cfg.sweep.c.is_empty());
        assert_eq!(cfg.sweep.c_axis(1), vec![1]);
        assert_eq!(cfg.sweep.scheme_axis("ns"), vec!["ns".to_string()]);
        assert_eq!(cfg.sweep.k_axis(3), (1..=8).collect::<Vec<_>>());
    }

    #[test]
    fn profiles_resolve_from_files_env_dir_and_bundled_set() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("custom.toml");
        let mut file = std::fs::File::create(&path).unwrap();
        let text = minimal_profile().replace("zeta = 0.8", "zeta = 1.2");
        file.write_all(text.as_bytes()).unwrap();
        drop(file);

        // Explicit path.
        let cfg = ExperimentConfig::resolve(path.to_str().unwrap()).unwrap();
        assert_relative_eq!(cfg.cache.zeta, 1.2);

        // Bare name through the profile directory.
        env::set_var(PROFILE_DIR_ENV, dir.path());
        let cfg = ExperimentConfig::resolve("custom").unwrap();
        assert_relative_eq!(cfg.cache.zeta, 1.2);
        env::remove_var(PROFILE_DIR_ENV);

        // Bundled fallback, and a diagnostic listing what exists.
        assert!(ExperimentConfig::resolve("table1").is_ok());
        let err = ExperimentConfig::resolve("missing").unwrap_err();
        assert!(matches!(&err, Error::UnknownName { known, .. } if known.contains("table1")));
    }

    #[test]
    fn output_format_names_round_trip() {
        for f in [OutputFormat::Csv, OutputFormat::Json] {
            assert_eq!(f.as_str().parse::<OutputFormat>().unwrap(), f);
        }
        assert!("yaml".parse::<OutputFormat>().is_err());
    }
}
