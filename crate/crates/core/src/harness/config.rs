use serde::{Deserialize, Serialize};

use crate::boundary::{Boundary, Shape};
use crate::error::{Error, Result};
use crate::kernels::{HomogeneousKernel, KernelSpec};
use crate::potential::DensityKind;

pub const SCHEMA: &str = "miranda-layers/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    /// Exponents `d` of `t = -10^d`.
    pub decades: [f64; 2],
    pub n_t: usize,
    pub n_s: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            decades: [-5.0, -2.0],
            n_t: 7,
            n_s: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HolderConfig {
    pub n_s: usize,
    pub n_t: usize,
    pub t_min: f64,
    /// Side of the square grid from which the compact set `H` is cut.
    pub h_grid: usize,
    pub pair_budget: usize,
    /// Points for the bilinearity and zero-extension identities.
    pub check_points: usize,
}

impl Default for HolderConfig {
    fn default() -> Self {
        Self {
            n_s: 256,
            n_t: 12,
            t_min: 1e-5,
            h_grid: 24,
            pair_budget: 200_000,
            check_points: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub n_s: usize,
    pub n_t: usize,
    pub t_min: f64,
    pub component: usize,
    /// Grid on which `C''` is fitted.
    pub fit_n_s: usize,
    pub fit_n_t: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            n_s: 16,
            n_t: 8,
            t_min: 1e-5,
            component: 1,
            fit_n_s: 32,
            fit_n_t: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsConfig {
    pub x_nodes: usize,
    pub s_count: usize,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        Self {
            x_nodes: 512,
            s_count: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CylinderConfig {
    pub p_param: f64,
    pub r: f64,
    pub delta: f64,
    pub n_s: usize,
    pub n_t: usize,
}

impl Default for CylinderConfig {
    fn default() -> Self {
        Self {
            p_param: 0.0,
            r: 0.05,
            delta: 0.1,
            n_s: 48,
            n_t: 8,
        }
    }
}

/// One experiment setup. Every field has a default, so `{}` is a valid config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    pub boundary: Shape,
    pub kernel: KernelSpec,
    pub density: DensityKind,
    /// Densities across which fitted constants must stay within a factor 2.
    pub density_family: Vec<DensityKind>,
    pub kernel_family: Vec<KernelSpec>,
    pub theta: f64,
    pub tol: f64,
    pub seed: u64,
    pub scan: ScanConfig,
    pub holder: HolderConfig,
    pub split: SplitConfig,
    pub constants: ConstantsConfig,
    pub cylinder: CylinderConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema: SCHEMA.into(),
            boundary: Shape::Ellipse { a: 1.0, b: 0.5 },
            kernel: KernelSpec::Riesz { component: 1 },
            density: DensityKind::AbsCoord(1),
            density_family: vec![
                DensityKind::Const(1.0),
                DensityKind::Coord(1),
                DensityKind::AbsCoord(1),
                DensityKind::Trig(3),
            ],
            kernel_family: vec![KernelSpec::Riesz { component: 1 }, KernelSpec::Riesz { component: 2 }],
            theta: 0.5,
            tol: 1e-11,
            seed: 0,
            scan: ScanConfig::default(),
            holder: HolderConfig::default(),
            split: SplitConfig::default(),
            constants: ConstantsConfig::default(),
            cylinder: CylinderConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(Error::Config(format!("unsupported schema '{}', expected '{SCHEMA}'", self.schema)));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::Config(format!("theta must lie in (0, 1), got {}", self.theta)));
        }
        if !(self.tol >= 1e-13) {
            return Err(Error::Config(format!("tol must be >= 1e-13, got {}", self.tol)));
        }
        let s = &self.scan;
        if s.n_t == 0 || s.n_s == 0 || !(s.decades[0] <= s.decades[1]) {
            return Err(Error::Config("scan grid must be nonempty with decades[0] <= decades[1]".into()));
        }
        let h = &self.holder;
        if h.n_s == 0 || h.n_t == 0 || !(h.t_min > 0.0) || h.pair_budget == 0 {
            return Err(Error::Config("holder grid must be nonempty with t_min > 0".into()));
        }
        let sp = &self.split;
        if sp.n_s == 0 || sp.n_t == 0 || sp.fit_n_s == 0 || sp.fit_n_t == 0 || !(sp.t_min > 0.0) {
            return Err(Error::Config("split grids must be nonempty with t_min > 0".into()));
        }
        if sp.component != 1 && sp.component != 2 {
            return Err(Error::Config(format!("split component must be 1 or 2, got {}", sp.component)));
        }
        if self.constants.x_nodes == 0 || self.constants.s_count == 0 {
            return Err(Error::Config("constants grids must be nonempty".into()));
        }
        if self.density_family.is_empty() || self.kernel_family.is_empty() {
            return Err(Error::Config("density and kernel families must be nonempty".into()));
        }
        Ok(())
    }

    pub fn boundary(&self) -> Result<Boundary> {
        Boundary::new(self.boundary.clone()).map_err(|e| Error::Config(e.to_string()))
    }

    /// The configured kernel; non-odd kernels are refused since oddness is a hypothesis.
    pub fn kernel(&self) -> Result<HomogeneousKernel> {
        odd_kernel(&self.kernel)
    }

    pub fn kernels(&self) -> Result<Vec<HomogeneousKernel>> {
        self.kernel_family.iter().map(odd_kernel).collect()
    }
}

pub fn odd_kernel(spec: &KernelSpec) -> Result<HomogeneousKernel> {
    let k = HomogeneousKernel::from_spec(spec)?;
    let v = k.check_odd(1024);
    if v > 1e-12 {
        return Err(Error::Config(format!("kernel {} is not odd (violation {v:e})", k.label)));
    }
    Ok(k)
}
