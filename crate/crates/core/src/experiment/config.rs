use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::camera::Intrinsics;
use crate::error::{NbvError, Result};
use crate::evo::{EvolutionConfig, PoseBounds};
use crate::fitness::{FitnessParams, Heuristic};
use crate::forest::{ManikinParams, Resolution, SceneParams};

/// Regular grid of initial cameras over the scene extent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    /// Height above ground in meters.
    pub altitude: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            rows: 6,
            cols: 6,
            altitude: 25.0,
            pitch_deg: -90.0,
            yaw_deg: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraSpec {
    pub focal: f64,
    pub hfov_deg: f64,
    pub vfov_deg: f64,
}

impl Default for CameraSpec {
    fn default() -> Self {
        CameraSpec {
            focal: 1.0,
            hfov_deg: 84.0,
            vfov_deg: 62.0,
        }
    }
}

impl CameraSpec {
    pub fn intrinsics(&self) -> Result<Intrinsics<f64>> {
        Intrinsics::from_fov(self.focal, self.hfov_deg.to_radians(), self.vfov_deg.to_radians())
    }
}

/// Search box for new views, relative to the scene extent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSpec {
    /// Horizontal inflation of the extent in meters.
    pub margin_xy: f64,
    pub z: [f64; 2],
    pub pitch_deg: [f64; 2],
    pub yaw_deg: [f64; 2],
}

impl Default for BoundsSpec {
    fn default() -> Self {
        BoundsSpec {
            margin_xy: 5.0,
            z: [2.0, 30.0],
            pitch_deg: [-90.0, 0.0],
            yaw_deg: [-180.0, 180.0],
        }
    }
}

impl BoundsSpec {
    /// Bounds over `[0, w] × [0, d]` inflated by the margin; the height range
    /// must start above the ground plane `z = 0`.
    pub fn pose_bounds(&self, extent: [f64; 2]) -> Result<PoseBounds> {
        if !(self.z[0] > 0.0) {
            return Err(NbvError::InvalidConfig(
                "camera height range must start above the ground".into(),
            ));
        }
        if self.pitch_deg[0] < -90.0 || self.pitch_deg[1] > 90.0 {
            return Err(NbvError::InvalidConfig("pitch range must lie in [-90, 90]".into()));
        }
        let m = self.margin_xy;
        PoseBounds::new(
            [
                -m,
                -m,
                self.z[0],
                self.pitch_deg[0].to_radians(),
                self.yaw_deg[0].to_radians(),
            ],
            [
                extent[0] + m,
                extent[1] + m,
                self.z[1],
                self.pitch_deg[1].to_radians(),
                self.yaw_deg[1].to_radians(),
            ],
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitnessSpec {
    pub mu: f64,
    pub lambda: f64,
}

impl Default for FitnessSpec {
    fn default() -> Self {
        let p = FitnessParams::<f64>::default();
        FitnessSpec {
            mu: p.mu,
            lambda: p.lambda,
        }
    }
}

impl From<&FitnessSpec> for FitnessParams<f64> {
    fn from(s: &FitnessSpec) -> Self {
        FitnessParams {
            mu: s.mu,
            lambda: s.lambda,
        }
    }
}

/// Everything a simulation run needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scene: SceneParams,
    pub manikins: ManikinParams,
    pub grid: GridSpec,
    pub camera: CameraSpec,
    pub n_nbv: usize,
    pub heuristic: Heuristic,
    pub evolution: EvolutionConfig,
    pub bounds: BoundsSpec,
    pub fitness: FitnessSpec,
    /// Upper bound on the number of vertices fitness is evaluated on.
    pub vertex_cap: Option<usize>,
    pub render: Resolution,
    pub runs: usize,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scene: SceneParams::default(),
            manikins: ManikinParams::default(),
            grid: GridSpec::default(),
            camera: CameraSpec::default(),
            n_nbv: 20,
            heuristic: Heuristic::Visibility,
            evolution: EvolutionConfig::default(),
            bounds: BoundsSpec::default(),
            fitness: FitnessSpec::default(),
            vertex_cap: Some(DEFAULT_VERTEX_CAP),
            render: Resolution::default(),
            runs: 18,
            seed: 0,
            output_dir: None,
        }
    }
}

pub const DEFAULT_VERTEX_CAP: usize = 2500;

impl ExperimentConfig {
    /// Reads TOML (`.toml`) or JSON (anything else); missing keys keep defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| NbvError::io(path, e))?;
        let cfg: Self = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| NbvError::parse(path, 0, e.to_string()))?
        } else {
            serde_json::from_str(&text).map_err(|e| NbvError::parse(path, e.line(), e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.evolution.validate()?;
        self.camera.intrinsics()?;
        self.bounds.pose_bounds(self.scene.extent)?;
        if self.grid.rows == 0 || self.grid.cols == 0 {
            return Err(NbvError::InvalidConfig("grid needs at least one row and column".into()));
        }
        if !(self.fitness.lambda >= 0.0) {
            return Err(NbvError::InvalidConfig("lambda must be non-negative".into()));
        }
        if self.render.width == 0 || self.render.height == 0 {
            return Err(NbvError::InvalidConfig("render resolution must be positive".into()));
        }
        Ok(())
    }
}
