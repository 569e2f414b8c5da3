//! Run configuration: a JSON document merged over defaults, then overridden
//! field by field from the command line.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use vekua_core::decomposition::{exp_x1, quadratic_x1, unit_f, ScalarJetFn};
use vekua_core::integral::{Coefficient, CoefficientTuple};
use vekua_core::jets::grad_vector;
use vekua_core::{BiquatField, Biquaternion, Complex, DomainGrid, DomainSpec};

use crate::error::CliError;

/// Largest accepted grid resolution.
pub const MAX_N: usize = 256;
/// Largest accepted exterior-point count.
pub const MAX_BASIS_M: usize = 4096;
/// Largest accepted config document.
pub const MAX_CONFIG_BYTES: usize = 1 << 20;

/// Named scalar functions `f` for the factorized operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FPreset {
    Unit,
    ExpX1,
    QuadraticX1,
}

impl FPreset {
    pub const ALL: [FPreset; 3] = [FPreset::Unit, FPreset::ExpX1, FPreset::QuadraticX1];

    pub fn jet(self) -> ScalarJetFn {
        match self {
            FPreset::Unit => unit_f(),
            FPreset::ExpX1 => exp_x1(),
            FPreset::QuadraticX1 => quadratic_x1(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FPreset::Unit => "unit",
            FPreset::ExpX1 => "exp-x1",
            FPreset::QuadraticX1 => "quadratic-x1",
        }
    }
}

/// Symbolic coefficient tuple `A`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CoefficientPreset {
    Zero,
    /// `a_j` as four `[re, im]` component pairs each.
    Constant { a: [[[f64; 2]; 4]; 4] },
    /// `A = (-∇f/f, 0, 0, 0)`, so that `D - Q_A = D + M^{∇f/f}`.
    MainVekua { f: FPreset },
    /// `A = (-alpha, 0, 0, 0)`, so that `D - Q_A = D + alpha`.
    Helmholtz { alpha: [f64; 2] },
    /// `A = (i pi e1, 0, 0, 0)`.
    Bessel,
}

impl CoefficientPreset {
    /// Constant preset with `a1 = s e0`.
    pub fn scalar_a1(s: f64) -> Self {
        let mut a = [[[0.0; 2]; 4]; 4];
        a[0][0][0] = s;
        CoefficientPreset::Constant { a }
    }

    fn validate(&self) -> Result<(), CliError> {
        let finite = match self {
            CoefficientPreset::Constant { a } => a.iter().flatten().flatten().all(|v| v.is_finite()),
            CoefficientPreset::Helmholtz { alpha } => alpha.iter().all(|v| v.is_finite()),
            _ => true,
        };
        if !finite {
            return Err(CliError::Config("coefficients must be finite".into()));
        }
        Ok(())
    }

    /// Materializes `A` on `grid`.
    pub fn tuple(&self, grid: &Arc<DomainGrid>) -> Result<CoefficientTuple, CliError> {
        let z = Biquaternion::ZERO;
        Ok(match self {
            CoefficientPreset::Zero => CoefficientTuple::zero(),
            CoefficientPreset::Constant { a } => CoefficientTuple::constant(std::array::from_fn(|j| {
                let c = a[j].map(|p| Complex::new(p[0], p[1]));
                Biquaternion::new(c[0], c[1], c[2], c[3])
            })),
            CoefficientPreset::MainVekua { f } => {
                let jet = f.jet();
                if let Some(x) = grid.centers().find(|&x| jet(x).v.norm() <= 1e-12) {
                    return Err(vekua_core::VekuaError::VanishingFunction(x).into());
                }
                let a1 = BiquatField::sample(grid, |x| {
                    let j = jet(x);
                    grad_vector(&j) * (-1.0 / j.v)
                });
                CoefficientTuple::new([Coefficient::Field(a1), Coefficient::Constant(z), Coefficient::Constant(z), Coefficient::Constant(z)])?
            }
            CoefficientPreset::Helmholtz { alpha } => {
                let a1 = Biquaternion::scalar(-Complex::new(alpha[0], alpha[1]));
                CoefficientTuple::constant([a1, z, z, z])
            }
            CoefficientPreset::Bessel => {
                let a1 = Biquaternion::unit(1) * Complex::new(0.0, std::f64::consts::PI);
                CoefficientTuple::constant([a1, z, z, z])
            }
        })
    }
}

/// Default tolerance set, keyed by check name.
pub fn default_tolerances() -> BTreeMap<String, f64> {
    [
        ("algebra", 1e-11),
        ("witness", 1e-12),
        ("right_inverse", 0.05),
        ("observed_order", 0.8),
        ("borel_pompeiu", 0.05),
        ("norm_bound_slack", 1.05),
        ("helmholtz_fd", 1e-4),
        ("neumann_ratio", 0.6),
        ("neumann", 1e-12),
        ("gram", 1e-10),
        ("gram_min_eig", 1e-8),
        ("reproduce", 1e-9),
        ("hermitian", 1e-9),
        ("projection", 1e-9),
        ("held_out_jitter", 0.05),
        ("orthogonality", 0.05),
        ("split", 1e-9),
        ("factorization", 1e-10),
        ("darboux", 1e-12),
        ("bessel_root", 1e-14),
        ("bessel_boundary", 1e-12),
        ("bessel_eigen", 1e-10),
        ("bessel_vekua", 1e-8),
        ("t_alpha", 0.2),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Fully resolved configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub n: usize,
    pub basis_m: usize,
    pub scale: f64,
    pub coefficients: CoefficientPreset,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            domain: DomainSpec::unit_ball(),
            n: 16,
            basis_m: 16,
            scale: vekua_core::bergman::DEFAULT_SCALE,
            coefficients: CoefficientPreset::Zero,
            tolerances: default_tolerances(),
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Config file contents; every field is optional and tolerances are merged
/// name by name over the defaults.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    domain: Option<DomainSpec>,
    n: Option<usize>,
    basis_m: Option<usize>,
    scale: Option<f64>,
    coefficients: Option<CoefficientPreset>,
    tolerances: Option<BTreeMap<String, f64>>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
}

/// Command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub domain: Option<DomainSpec>,
    pub n: Option<usize>,
    pub basis_m: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

/// Parses a config document and merges it over the defaults.
pub fn parse_run_config(bytes: &[u8]) -> Result<RunConfig, CliError> {
    if bytes.len() > MAX_CONFIG_BYTES {
        return Err(CliError::Config(format!("config of {} bytes is too large", bytes.len())));
    }
    let file: FileConfig = serde_json::from_slice(bytes).map_err(|e| CliError::Config(e.to_string()))?;
    let mut cfg = RunConfig::default();
    if let Some(d) = file.domain {
        cfg.domain = d;
    }
    if let Some(n) = file.n {
        cfg.n = n;
    }
    if let Some(m) = file.basis_m {
        cfg.basis_m = m;
    }
    if let Some(s) = file.scale {
        cfg.scale = s;
    }
    if let Some(c) = file.coefficients {
        cfg.coefficients = c;
    }
    if let Some(t) = file.tolerances {
        for (k, v) in t {
            if !cfg.tolerances.contains_key(&k) {
                return Err(CliError::Config(format!("unknown tolerance {k:?}")));
            }
            cfg.tolerances.insert(k, v);
        }
    }
    if let Some(s) = file.seed {
        cfg.seed = s;
    }
    if let Some(o) = file.output_dir {
        cfg.output_dir = o;
    }
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Resolves `flag > file > default`.
    pub fn resolve(file: Option<&[u8]>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match file {
            Some(bytes) => parse_run_config(bytes)?,
            None => RunConfig::default(),
        };
        if let Some(d) = &overrides.domain {
            cfg.domain = d.clone();
        }
        if let Some(n) = overrides.n {
            cfg.n = n;
        }
        if let Some(m) = overrides.basis_m {
            cfg.basis_m = m;
        }
        if let Some(s) = overrides.seed {
            cfg.seed = s;
        }
        if let Some(o) = &overrides.output_dir {
            cfg.output_dir = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.domain.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.n < 8 || self.n > MAX_N {
            return Err(CliError::Config(format!("n must lie in 8..={MAX_N}, got {}", self.n)));
        }
        if self.basis_m < 1 || self.basis_m > MAX_BASIS_M {
            return Err(CliError::Config(format!("basis_m must lie in 1..={MAX_BASIS_M}, got {}", self.basis_m)));
        }
        if !(self.scale > 1.0 && self.scale.is_finite()) {
            return Err(CliError::Config(format!("scale must exceed 1, got {}", self.scale)));
        }
        for (k, v) in &self.tolerances {
            if !(*v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("tolerance {k:?} must be positive, got {v}")));
            }
        }
        for k in default_tolerances().keys() {
            if !self.tolerances.contains_key(k) {
                return Err(CliError::Config(format!("missing tolerance {k:?}")));
            }
        }
        self.coefficients.validate()
    }

    pub fn tol(&self, name: &str) -> f64 {
        self.tolerances[name]
    }

    /// The computational part of the config (everything but the output
    /// directory) as JSON.
    pub fn canonical(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut().expect("object").remove("output_dir");
        v
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.canonical()).expect("config serializes");
        Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn grid(&self) -> Result<Arc<DomainGrid>, CliError> {
        Ok(DomainGrid::new(self.domain.clone(), self.n)?)
    }

    pub fn grid_at(&self, n: usize) -> Result<Arc<DomainGrid>, CliError> {
        Ok(DomainGrid::new(self.domain.clone(), n)?)
    }
}
