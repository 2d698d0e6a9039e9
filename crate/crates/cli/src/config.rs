//! Run configuration: JSON, `schema_version: 1`, complex numbers as
//! `[re, im]`.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Context;
use num_complex::Complex64;
use satnls_core::audit::Symmetry;
use satnls_core::gauge::{gauge_forward, profile_spec, SelfSimilarParams};
use satnls_core::mesh::{BoundaryCondition, ComplexGridFn, Mesh};
use satnls_core::saturation::Threshold;
use satnls_core::solver::{geometric_schedule, ProblemSpec, SolveConfig};
use satnls_core::support::{CompactSet, ScanForcing};
use serde::{Deserialize, Serialize};

use crate::io::read_field;

pub const SCHEMA_VERSION: u32 = 1;

/// Problems with the configuration itself; mapped to exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub problem: ProblemBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub support: SupportBlock,
    #[serde(default)]
    pub audit: AuditBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanBlock>,
    #[serde(default)]
    pub selfsimilar: SelfSimilarBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    pub domain: Domain,
    pub a: Complex64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Complex64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selfsim: Option<SelfSimBlock>,
    #[serde(default)]
    pub potential: PotentialDescriptor,
    pub forcing: ForcingDescriptor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfSimBlock {
    pub p: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Domain {
    Interval {
        lo: f64,
        hi: f64,
        cells: usize,
        #[serde(default = "dirichlet")]
        bc: BoundaryCondition,
    },
    Radial {
        dim: usize,
        radius: f64,
        cells: usize,
        #[serde(default = "dirichlet")]
        bc: BoundaryCondition,
    },
}

fn dirichlet() -> BoundaryCondition {
    BoundaryCondition::Dirichlet
}

impl Domain {
    pub fn mesh(&self) -> anyhow::Result<Mesh> {
        let m = match *self {
            Domain::Interval { lo, hi, cells, bc } => Mesh::interval(lo, hi, cells, bc),
            Domain::Radial {
                dim,
                radius,
                cells,
                bc,
            } => Mesh::radial(dim, radius, cells, bc),
        };
        m.map_err(|e| bad(format!("problem.domain: {e}")))
    }

    /// Same domain with `2^k` times as many cells.
    pub fn refined(&self, k: u32) -> Self {
        let mut d = *self;
        match &mut d {
            Domain::Interval { cells, .. } | Domain::Radial { cells, .. } => *cells <<= k,
        }
        d
    }
}

/// `V(x)`; `quadratic` is `c |x|^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PotentialDescriptor {
    #[default]
    Zero,
    Constant {
        value: Complex64,
    },
    Quadratic {
        coefficient: Complex64,
    },
    File {
        path: PathBuf,
    },
}

/// Forcing `F = core` on `K` and `F = tail` on the complement of `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ForcingDescriptor {
    /// `amplitude exp(-(x - center)^2 / (2 width^2))` on `K = support`.
    Gaussian {
        center: f64,
        width: f64,
        amplitude: Complex64,
        support: [f64; 2],
        #[serde(default)]
        tail: Complex64,
    },
    Indicator {
        support: [f64; 2],
        amplitude: Complex64,
        #[serde(default)]
        tail: Complex64,
    },
    /// Two Gaussians, one per piece of `K = supports[0] u supports[1]`.
    TwoBump {
        centers: [f64; 2],
        widths: [f64; 2],
        amplitude: Complex64,
        supports: [[f64; 2]; 2],
        #[serde(default)]
        tail: Complex64,
    },
    /// Nodal values from a field CSV; `support` lists the pieces of `K`.
    File {
        path: PathBuf,
        support: Vec<[f64; 2]>,
        #[serde(default)]
        tail: Complex64,
    },
}

impl ForcingDescriptor {
    pub fn k(&self) -> anyhow::Result<CompactSet> {
        let pieces: Vec<(f64, f64)> = match self {
            ForcingDescriptor::Gaussian { support, .. } | ForcingDescriptor::Indicator { support, .. } => {
                vec![(support[0], support[1])]
            }
            ForcingDescriptor::TwoBump { supports, .. } => supports.iter().map(|s| (s[0], s[1])).collect(),
            ForcingDescriptor::File { support, .. } => support.iter().map(|s| (s[0], s[1])).collect(),
        };
        CompactSet::new(pieces).map_err(|e| bad(format!("problem.forcing.support: {e}")))
    }

    pub fn tail(&self) -> Complex64 {
        match *self {
            ForcingDescriptor::Gaussian { tail, .. }
            | ForcingDescriptor::Indicator { tail, .. }
            | ForcingDescriptor::TwoBump { tail, .. }
            | ForcingDescriptor::File { tail, .. } => tail,
        }
    }

    fn validate(&self) -> anyhow::Result<()> {
        let widths: Vec<f64> = match self {
            ForcingDescriptor::Gaussian { width, .. } => vec![*width],
            ForcingDescriptor::TwoBump { widths, .. } => widths.to_vec(),
            _ => vec![],
        };
        if widths.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(bad("problem.forcing: widths must be positive"));
        }
        let k = self.k()?;
        if let ForcingDescriptor::TwoBump { .. } = self {
            if k.min_gap() <= 0.0 {
                return Err(bad("problem.forcing.supports: the two pieces must be disjoint"));
            }
        }
        Ok(())
    }

    /// Forcing restricted to `K`.
    pub fn core(&self, mesh: &Mesh, base_dir: &Path) -> anyhow::Result<ComplexGridFn> {
        let k = self.k()?;
        let gauss = |x: f64, c: f64, w: f64| (-(x - c).powi(2) / (2.0 * w * w)).exp();
        let zero = Complex64::new(0.0, 0.0);
        let f = match self {
            ForcingDescriptor::Gaussian {
                center,
                width,
                amplitude,
                ..
            } => ComplexGridFn::from_fn(mesh, |x| {
                if k.contains(x) {
                    amplitude * gauss(x, *center, *width)
                } else {
                    zero
                }
            }),
            ForcingDescriptor::Indicator { amplitude, .. } => {
                ComplexGridFn::from_fn(mesh, |x| if k.contains(x) { *amplitude } else { zero })
            }
            ForcingDescriptor::TwoBump {
                centers,
                widths,
                amplitude,
                ..
            } => ComplexGridFn::from_fn(mesh, |x| match k.piece_of(x) {
                Some(j) => amplitude * gauss(x, centers[j], widths[j]),
                None => zero,
            }),
            ForcingDescriptor::File { path, .. } => {
                let full = resolve(base_dir, path);
                let f = read_field(&full, mesh)
                    .with_context(|| format!("problem.forcing.path {}", full.display()))
                    .map_err(|e| bad(format!("{e:#}")))?;
                f.map_with_coord(|x, z| if k.contains(x) { z } else { zero })
            }
        };
        Ok(f)
    }

    /// Indicator of the complement of `K`.
    pub fn tail_indicator(&self, mesh: &Mesh) -> anyhow::Result<ComplexGridFn> {
        let k = self.k()?;
        Ok(ComplexGridFn::from_fn(mesh, |x| {
            if k.contains(x) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(1.0, 0.0)
            }
        }))
    }

    pub fn field(&self, mesh: &Mesh, base_dir: &Path) -> anyhow::Result<ComplexGridFn> {
        let core = self.core(mesh, base_dir)?;
        let tail = self.tail_indicator(mesh)?.scale(self.tail());
        Ok(core.add(&tail)?)
    }
}

/// Overrides of the solver defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    /// Continuation levels `n = base^k`, `k = 0..=max_power`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule_base: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule_max_power: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub picard_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub picard_max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuation_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polish: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weak_tests: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weak_residual_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportBlock {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// `tau_supp` as a multiple of `max |u|`.
    #[serde(default = "default_tau")]
    pub tau_relative: f64,
}

fn default_epsilon() -> f64 {
    0.5
}

fn default_tau() -> f64 {
    1e-8
}

impl Default for SupportBlock {
    fn default() -> Self {
        Self {
            epsilon: default_epsilon(),
            tau_relative: default_tau(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditBlock {
    #[serde(default = "yes")]
    pub estimates: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetry: Option<Symmetry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniqueness: Option<UniquenessBlock>,
}

fn yes() -> bool {
    true
}

impl Default for AuditBlock {
    fn default() -> Self {
        Self {
            estimates: true,
            symmetry: None,
            uniqueness: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniquenessBlock {
    pub radius: f64,
    #[serde(default = "five")]
    pub trials: usize,
}

fn five() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanBlock {
    pub l2_scales: Vec<f64>,
    pub tail_scales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfSimilarBlock {
    #[serde(default = "one")]
    pub times: Vec<f64>,
    /// Exponents for the scaling-law table.
    #[serde(default = "default_q")]
    pub q: Vec<f64>,
    /// Number of mesh halvings in the evolution-residual study.
    #[serde(default)]
    pub refine: u32,
}

fn one() -> Vec<f64> {
    vec![1.0]
}

fn default_q() -> Vec<f64> {
    vec![1.0, 2.0]
}

impl Default for SelfSimilarBlock {
    fn default() -> Self {
        Self {
            times: one(),
            q: default_q(),
            refine: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    #[serde(default = "yes")]
    pub svg: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: None,
            svg: true,
        }
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// A parsed configuration together with the directory relative paths are
/// resolved against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

pub fn parse(text: &str) -> anyhow::Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        bad(format!("at `{path}`: {inner}"))
    })?;
    validate(&cfg)?;
    Ok(cfg)
}

pub fn load(path: &Path) -> anyhow::Result<LoadedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
    let config = parse(&text).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedConfig { config, base_dir })
}

fn validate(cfg: &RunConfig) -> anyhow::Result<()> {
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(bad(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            cfg.schema_version
        )));
    }
    let p = &cfg.problem;
    match (&p.b, &p.selfsim) {
        (Some(_), Some(_)) => return Err(bad("problem: give either `b` or `selfsim`, not both")),
        (None, None) => return Err(bad("problem: one of `b` or `selfsim` is required")),
        _ => {}
    }
    p.forcing.validate()?;
    p.domain.mesh()?;
    if !(cfg.support.epsilon >= 0.0) {
        return Err(bad("support.epsilon must be nonnegative"));
    }
    if !(cfg.support.tau_relative > 0.0 && cfg.support.tau_relative < 1.0) {
        return Err(bad("support.tau_relative must lie in (0, 1)"));
    }
    if cfg.selfsimilar.times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(bad("selfsimilar.times must be positive"));
    }
    solve_config(cfg, None)?;
    Ok(())
}

pub fn solve_config(cfg: &RunConfig, seed: Option<u64>) -> anyhow::Result<SolveConfig> {
    let s = &cfg.solver;
    let mut out = SolveConfig::default();
    if s.schedule_base.is_some() || s.schedule_max_power.is_some() {
        out.n_schedule = geometric_schedule(s.schedule_base.unwrap_or(2), s.schedule_max_power.unwrap_or(48));
    }
    macro_rules! take {
        ($($f:ident),*) => { $( if let Some(v) = s.$f { out.$f = v; } )* };
    }
    take!(damping, picard_tol, picard_max_iters, continuation_tol, polish, weak_tests, weak_residual_tol, seed);
    if let Some(seed) = seed {
        out.seed = seed;
    }
    out.validate().map_err(|e| bad(format!("solver: {e}")))?;
    Ok(out)
}

impl LoadedConfig {
    pub fn mesh(&self) -> anyhow::Result<Mesh> {
        self.config.problem.domain.mesh()
    }

    pub fn params(&self) -> anyhow::Result<Option<SelfSimilarParams>> {
        let Some(ss) = self.config.problem.selfsim else {
            return Ok(None);
        };
        let mesh = self.mesh()?;
        SelfSimilarParams::new(ss.p, mesh.dim())
            .map(Some)
            .map_err(|e| bad(format!("problem.selfsim: {e}")))
    }

    pub fn potential(&self, mesh: &Mesh) -> anyhow::Result<ComplexGridFn> {
        Ok(match &self.config.problem.potential {
            PotentialDescriptor::Zero => ComplexGridFn::zeros(mesh),
            PotentialDescriptor::Constant { value } => ComplexGridFn::constant(mesh, *value),
            PotentialDescriptor::Quadratic { coefficient } => {
                ComplexGridFn::from_fn(mesh, |x| coefficient * (x * x))
            }
            PotentialDescriptor::File { path } => {
                let full = resolve(&self.base_dir, path);
                read_field(&full, mesh)
                    .with_context(|| format!("problem.potential.path {}", full.display()))
                    .map_err(|e| bad(format!("{e:#}")))?
            }
        })
    }

    /// Forcing as written in the config (the profile forcing `F` for
    /// self-similar runs).
    pub fn forcing(&self, mesh: &Mesh) -> anyhow::Result<ComplexGridFn> {
        self.config.problem.forcing.field(mesh, &self.base_dir)
    }

    /// The stationary problem actually solved on `mesh`.
    pub fn spec_on(&self, mesh: &Mesh) -> anyhow::Result<ProblemSpec> {
        let p = &self.config.problem;
        let f = self.forcing(mesh)?;
        match self.params()? {
            Some(params) => {
                if p.potential != PotentialDescriptor::Zero {
                    return Err(bad("problem.potential: self-similar runs fix V = -|x|^2/16"));
                }
                profile_spec(params, &f, p.a).map_err(|e| bad(format!("problem: {e}")))
            }
            None => {
                let v = self.potential(mesh)?;
                ProblemSpec::new(p.a, p.b.expect("validated"), v, f).map_err(|e| bad(format!("problem: {e}")))
            }
        }
    }

    pub fn spec(&self) -> anyhow::Result<ProblemSpec> {
        self.spec_on(&self.mesh()?)
    }

    /// Scan split in the variables of the solved problem.
    pub fn scan_forcing(&self, mesh: &Mesh) -> anyhow::Result<ScanForcing> {
        let fd = &self.config.problem.forcing;
        let core = fd.core(mesh, &self.base_dir)?;
        let tail = fd.tail_indicator(mesh)?;
        Ok(if self.config.problem.selfsim.is_some() {
            let g = |f: &ComplexGridFn| gauge_forward(f).scale(Complex64::new(-1.0, 0.0));
            ScanForcing {
                core: g(&core),
                tail: g(&tail),
            }
        } else {
            ScanForcing { core, tail }
        })
    }

    pub fn k(&self) -> anyhow::Result<CompactSet> {
        self.config.problem.forcing.k()
    }

    pub fn threshold(&self) -> Threshold {
        Threshold::Relative(self.config.support.tau_relative)
    }
}
