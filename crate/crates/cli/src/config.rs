//! Run configuration: a plain `key = value` file overlaid with command-line
//! flags, validated once, and echoed back in canonical form.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_3, TAU};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use smflow::diagnostics::{CompareConfig, DEFAULT_S_SAMPLES};
use smflow::fields::Grid;
use smflow::flow::{IntegratorConfig, Scheme, DEFAULT_CFL_GUARD};
use smflow::initial::InitialCondition;
use smflow::sphere::GeometryConstants;

use crate::error::CliError;

/// Every accepted key, in echo order.
pub const KEYS: &[&str] = &[
    "grid.dim",
    "grid.n",
    "grid.period",
    "integrator.scheme",
    "integrator.dt",
    "integrator.T",
    "initial.family",
    "initial.k",
    "initial.theta0",
    "initial.amplitude",
    "initial.modes",
    "initial.seed",
    "perturbation.eps",
    "perturbation.modes",
    "perturbation.seed",
    "output.dir",
    "output.stride",
    "diagnostics.s_samples",
    "diagnostics.hessian_samples",
    "verify.samples",
];

/// Unvalidated key/value pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut raw = RawConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "line {}: expected key = value",
                    lineno + 1
                )));
            };
            raw.set(key.trim(), value.trim())?;
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets `key`, rejecting names outside [`KEYS`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !KEYS.contains(&key) {
            return Err(CliError::Config(format!("unknown config key {key:?}")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Config(format!("{key}: cannot parse {v:?}"))),
        }
    }

    pub fn verify_samples(&self) -> Result<Option<usize>, CliError> {
        let n: Option<usize> = self.get("verify.samples")?;
        if let Some(n) = n {
            ensure(n >= 100, "verify.samples", "must be at least 100")?;
        }
        Ok(n)
    }

    fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.get(key)?.unwrap_or(default))
    }
}

fn ensure(ok: bool, key: &str, what: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!("{key}: {what}")))
    }
}

/// Fully resolved configuration of a `simulate` or `compare` run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub grid: Grid,
    pub integrator: IntegratorConfig,
    pub t_final: f64,
    pub initial: InitialCondition,
    pub eps: f64,
    pub perturbation_modes: u32,
    pub seed: u64,
    pub out: PathBuf,
    pub stride: usize,
    pub s_samples: usize,
    pub hessian_samples: usize,
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, CliError> {
        let dim: usize = raw.get_or("grid.dim", 1)?;
        ensure(dim == 1 || dim == 2, "grid.dim", "must be 1 or 2")?;
        let n: usize = raw
            .get("grid.n")?
            .ok_or_else(|| CliError::Config("grid.n is required (nodes per axis)".into()))?;
        let period: f64 = raw.get_or("grid.period", TAU)?;
        let grid =
            Grid::cubic(dim, n, period).map_err(|e| CliError::Config(format!("grid: {e}")))?;

        let scheme: Scheme = match raw.values.get("integrator.scheme") {
            None => Scheme::Rk4Project,
            Some(s) => s
                .parse()
                .map_err(|e| CliError::Config(format!("integrator.scheme: {e}")))?,
        };
        let h = grid.min_spacing();
        let dt: f64 = raw.get_or("integrator.dt", h * h / 8.0)?;
        ensure(
            dt.is_finite() && dt > 0.0,
            "integrator.dt",
            "must be positive",
        )?;
        let t_final: f64 = raw.get_or("integrator.T", 1.0)?;
        ensure(
            t_final.is_finite() && t_final >= 0.0,
            "integrator.T",
            "must be non-negative",
        )?;

        let family: String = raw.get_or("initial.family", "magnon".to_string())?;
        let k: i32 = raw.get_or("initial.k", 1)?;
        let theta0: f64 = raw.get_or("initial.theta0", FRAC_PI_3)?;
        ensure(theta0.is_finite(), "initial.theta0", "must be finite")?;
        let amplitude: f64 = raw.get_or("initial.amplitude", 0.5)?;
        ensure(
            amplitude.is_finite() && amplitude >= 0.0,
            "initial.amplitude",
            "must be non-negative",
        )?;
        let modes: u32 = raw.get_or("initial.modes", 2)?;
        ensure(modes >= 1, "initial.modes", "must be at least 1")?;
        let initial_seed: u64 = raw.get_or("initial.seed", 0)?;
        let initial = match family.as_str() {
            "constant" => InitialCondition::Constant,
            "winding" => InitialCondition::Winding { k },
            "magnon" => InitialCondition::Magnon { k, theta0 },
            "smooth_random" => InitialCondition::SmoothRandom {
                amplitude,
                modes,
                seed: initial_seed,
            },
            other => {
                return Err(CliError::Config(format!(
                    "initial.family: unknown family {other:?} (expected constant, winding, magnon or smooth_random)"
                )))
            }
        };

        let delta0 = GeometryConstants::unit_sphere().delta0;
        let eps: f64 = raw.get_or("perturbation.eps", 0.0)?;
        ensure(
            eps >= 0.0 && eps < delta0,
            "perturbation.eps",
            &format!("must lie in [0, {delta0}) (the closeness radius), got {eps}"),
        )?;
        let perturbation_modes: u32 = raw.get_or("perturbation.modes", 2)?;
        ensure(
            perturbation_modes >= 1,
            "perturbation.modes",
            "must be at least 1",
        )?;
        let seed: u64 = raw.get_or("perturbation.seed", 1)?;

        let out: PathBuf = raw.get_or("output.dir", PathBuf::from("out"))?;
        let stride: usize = raw.get_or("output.stride", 16)?;
        ensure(stride >= 1, "output.stride", "must be at least 1")?;
        let s_samples: usize = raw.get_or("diagnostics.s_samples", DEFAULT_S_SAMPLES)?;
        ensure(
            s_samples >= 3 && s_samples % 2 == 1,
            "diagnostics.s_samples",
            "must be odd and at least 3",
        )?;
        let hessian_samples: usize = raw.get_or("diagnostics.hessian_samples", 10_000)?;
        ensure(
            hessian_samples >= 1,
            "diagnostics.hessian_samples",
            "must be at least 1",
        )?;

        Ok(RunConfig {
            grid,
            integrator: IntegratorConfig {
                dt,
                scheme,
                cfl_guard: DEFAULT_CFL_GUARD,
            },
            t_final,
            initial,
            eps,
            perturbation_modes,
            seed,
            out,
            stride,
            s_samples,
            hessian_samples,
        })
    }

    pub fn compare_config(&self) -> CompareConfig {
        CompareConfig {
            grid: self.grid,
            initial: self.initial,
            eps: self.eps,
            modes: self.perturbation_modes,
            seed: self.seed,
            integrator: self.integrator,
            t_final: self.t_final,
            stride: self.stride,
            s_samples: self.s_samples,
            hessian_samples: self.hessian_samples,
        }
    }

    /// Every run key with its effective value. Floats use the shortest
    /// representation that parses back to the same bits.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("grid.dim", self.grid.dim().to_string());
        put("grid.n", self.grid.size(0).to_string());
        put("grid.period", format!("{:?}", self.grid.length(0)));
        put("integrator.scheme", self.integrator.scheme.to_string());
        put("integrator.dt", format!("{:?}", self.integrator.dt));
        put("integrator.T", format!("{:?}", self.t_final));
        let (family, k, theta0, amplitude, modes, seed) = match self.initial {
            InitialCondition::Constant => ("constant", 1, FRAC_PI_3, 0.5, 2, 0),
            InitialCondition::Winding { k } => ("winding", k, FRAC_PI_3, 0.5, 2, 0),
            InitialCondition::Magnon { k, theta0 } => ("magnon", k, theta0, 0.5, 2, 0),
            InitialCondition::SmoothRandom {
                amplitude,
                modes,
                seed,
            } => ("smooth_random", 1, FRAC_PI_3, amplitude, modes, seed),
        };
        put("initial.family", family.to_string());
        put("initial.k", k.to_string());
        put("initial.theta0", format!("{theta0:?}"));
        put("initial.amplitude", format!("{amplitude:?}"));
        put("initial.modes", modes.to_string());
        put("initial.seed", seed.to_string());
        put("perturbation.eps", format!("{:?}", self.eps));
        put("perturbation.modes", self.perturbation_modes.to_string());
        put("perturbation.seed", self.seed.to_string());
        put("output.dir", self.out.display().to_string());
        put("output.stride", self.stride.to_string());
        put("diagnostics.s_samples", self.s_samples.to_string());
        put(
            "diagnostics.hessian_samples",
            self.hessian_samples.to_string(),
        );
        m
    }
}

/// `key = value` lines in [`KEYS`] order.
pub fn echo_text(values: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    for key in KEYS {
        if let Some(v) = values.get(*key) {
            out.push_str(&format!("{key} = {v}\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::from_raw(&RawConfig::parse(text)?)
    }

    #[test]
    fn missing_grid_size_names_the_key() {
        let err = run("grid.dim = 1\n").unwrap_err();
        assert!(matches!(&err, CliError::Config(m) if m.contains("grid.n")));
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let err = run("grid.n = 32\ngrid.size = 4\n").unwrap_err();
        assert!(err.to_string().contains("grid.size"));
    }

    #[test]
    fn eps_beyond_radius_is_a_config_error() {
        let err = run("grid.n = 32\nperturbation.eps = 0.3\n").unwrap_err();
        assert!(err.to_string().contains("perturbation.eps"));
        assert!(run("grid.n = 32\nperturbation.eps = 0.2499\n").is_ok());
        assert!(run("grid.n = 32\nperturbation.eps = -0.1\n").is_err());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg =
            run("# a run\n\ngrid.n = 32   # nodes\ninitial.family = winding\ninitial.k = 3\n")
                .unwrap();
        assert_eq!(cfg.initial, InitialCondition::Winding { k: 3 });
    }

    #[test]
    fn echo_round_trips_bit_exactly() {
        let cfg = run("grid.n = 48\ngrid.dim = 2\nintegrator.T = 0.3\ninitial.family = smooth_random\ninitial.amplitude = 0.7\nperturbation.eps = 1e-3\n").unwrap();
        let back = run(&echo_text(&cfg.echo())).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.integrator.dt.to_bits(), cfg.integrator.dt.to_bits());
    }

    #[test]
    fn bad_values_are_rejected() {
        for text in [
            "grid.n = 4\n",
            "grid.n = x\n",
            "grid.n = 32\ngrid.dim = 3\n",
            "grid.n = 32\nintegrator.dt = -1\n",
            "grid.n = 32\nintegrator.scheme = euler\n",
            "grid.n = 32\ninitial.family = vortex\n",
            "grid.n = 32\ndiagnostics.s_samples = 4\n",
            "grid.n = 32\noutput.stride = 0\n",
            "grid.n\n",
        ] {
            assert!(matches!(run(text), Err(CliError::Config(_))), "{text}");
        }
    }
}
