//! Run configuration read from a TOML file.

use crate::domain::{Aabb, DomainSpec};
use crate::eigen::LanczosConfig;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub h: Option<f64>,
    pub h_list: Option<Vec<f64>>,
    /// Voxelization box; defaults to the domain's bounding box.
    pub bbox: Option<Aabb>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub dense_cap: usize,
    pub tol: f64,
    pub max_restarts: usize,
    pub ncv: Option<usize>,
    pub seed: u64,
    pub inner_tol: f64,
    pub inner_max_iterations: usize,
    /// Worker threads; 0 lets rayon decide.
    pub threads: usize,
    /// Eigenpairs for `spectrum` on the sparse path.
    pub k: usize,
    /// Shift for `spectrum`; the smallest eigenvalues are computed when absent.
    pub shift: Option<f64>,
    /// Induced-Laplacian clusters in the `verify-theorem` window.
    pub window: usize,
    /// Eigenpairs per deflated run.
    pub batch: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let l = LanczosConfig::default();
        Self {
            dense_cap: 4096,
            tol: l.tol,
            max_restarts: l.max_restarts,
            ncv: l.ncv,
            seed: l.seed,
            inner_tol: l.inner_tol,
            inner_max_iterations: l.inner_max_iterations,
            threads: 0,
            k: 10,
            shift: None,
            window: 6,
            batch: 16,
        }
    }
}

impl SolverConfig {
    pub fn lanczos(&self) -> LanczosConfig {
        LanczosConfig {
            tol: self.tol,
            max_restarts: self.max_restarts,
            ncv: self.ncv,
            seed: self.seed,
            inner_tol: self.inner_tol,
            inner_max_iterations: self.inner_max_iterations,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub cluster: f64,
    pub spectrum_match: f64,
    pub map: f64,
    pub zero: f64,
    pub block_square: f64,
    pub lift: f64,
    pub symmetry: f64,
    pub zero_mode: f64,
    pub rayleigh_c: f64,
    pub merge: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            cluster: 1e-8,
            spectrum_match: 1e-9,
            map: 1e-8,
            zero: 1e-10,
            block_square: 1e-12,
            lift: 1e-8,
            symmetry: 1e-12,
            zero_mode: 1e-13,
            rayleigh_c: 1.0,
            merge: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Diagnostics {
    /// Largest polynomial degree for `zero-modes`.
    pub zero_mode_degree: u32,
    /// Largest truncation radius for `weyl`.
    pub n_max: u32,
    /// Pinned weight exponent for `weyl`; detected when absent.
    pub weight_exponent: Option<u32>,
    /// Lowest Gram clusters lifted by `verify-susy`.
    pub lift_clusters: usize,
    /// Random pairs in `selftest`.
    pub trials: usize,
    pub masses: Vec<f64>,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Self { zero_mode_degree: 2, n_max: 10, weight_exponent: None, lift_clusters: 2, trials: 100, masses: vec![-1.5, 0.0, 2.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Also write the assembled operator as Matrix Market.
    pub operator: bool,
    /// Also write spinor fields as CSV.
    pub fields: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), operator: false, fields: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub domain: Option<DomainSpec>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub mass: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub diagnostics: Diagnostics,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domain: None,
            grid: GridConfig::default(),
            mass: 0.0,
            solver: SolverConfig::default(),
            tolerances: Tolerances::default(),
            diagnostics: Diagnostics::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON form of the resolved config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        let named = [
            ("cluster", t.cluster),
            ("spectrum_match", t.spectrum_match),
            ("map", t.map),
            ("zero", t.zero),
            ("block_square", t.block_square),
            ("lift", t.lift),
            ("symmetry", t.symmetry),
            ("zero_mode", t.zero_mode),
            ("rayleigh_c", t.rayleigh_c),
            ("merge", t.merge),
            ("solver.tol", self.solver.tol),
            ("solver.inner_tol", self.solver.inner_tol),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("tolerance {name} must be positive, got {v}")));
            }
        }
        if !self.mass.is_finite() {
            return Err(Error::Config("mass must be finite".into()));
        }
        if let Some(h) = self.grid.h {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Config(format!("grid.h must be positive, got {h}")));
            }
        }
        if let Some(list) = &self.grid.h_list {
            if list.is_empty() || list.iter().any(|h| !(*h > 0.0)) || list.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::Config("grid.h_list must be positive and strictly decreasing".into()));
            }
        }
        if let Some(b) = &self.grid.bbox {
            if b.is_degenerate() {
                return Err(Error::Config("grid.bbox is degenerate".into()));
            }
        }
        if let Some(d) = &self.domain {
            d.validate().map_err(|e| Error::Config(format!("domain: {e}")))?;
        }
        if self.solver.k == 0 || self.solver.window == 0 || self.solver.batch == 0 {
            return Err(Error::Config("solver.k, solver.window and solver.batch must be positive".into()));
        }
        Ok(())
    }

    pub fn require_domain(&self) -> Result<&DomainSpec> {
        self.domain.as_ref().ok_or_else(|| Error::Config("missing [domain] section".into()))
    }

    pub fn require_h(&self) -> Result<f64> {
        self.grid.h.ok_or_else(|| Error::Config("missing grid.h".into()))
    }

    pub fn require_h_list(&self) -> Result<&[f64]> {
        self.grid.h_list.as_deref().ok_or_else(|| Error::Config("missing grid.h_list".into()))
    }

    /// The configured box, or the domain's bounding box.
    pub fn bbox(&self) -> Result<Aabb> {
        if let Some(b) = self.grid.bbox {
            return Ok(b);
        }
        self.require_domain()?
            .bounding_box()
            .ok_or_else(|| Error::Config("unbounded domain needs grid.bbox".into()))
    }
}
