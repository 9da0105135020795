//! End-to-end simulation study: forest generation, initial nadir grid,
//! iterative view planning with the evolutionary optimizer, and evaluation
//! against hidden manikins.

mod config;
mod report;

use std::path::Path;

use nalgebra::Point3;
use rayon::prelude::*;

use crate::camera::{CameraView, Intrinsics};
use crate::error::{NbvError, Result};
use crate::evo::{self, GenerationStats, Genome, PoseBounds};
use crate::fitness::{FitnessContext, Heuristic};
use crate::forest::{detection_table, generate_scene, place_manikins, DetectionTable};
use crate::visibility::SurfaceModel;

pub use config::{
    BoundsSpec, CameraSpec, ExperimentConfig, FitnessSpec, GridSpec, DEFAULT_VERTEX_CAP,
};
pub use report::{
    aggregate, read_curve_csv, AggregateRow, CurvePoint, ReportWriter, REPORT_SCHEMA_VERSION,
};

/// Nadir-style cameras at the cell centers of a `rows × cols` grid.
pub fn make_initial_grid(
    spec: &GridSpec,
    extent: [f64; 2],
    intrinsics: Intrinsics<f64>,
) -> Result<Vec<CameraView<f64>>> {
    if spec.rows == 0 || spec.cols == 0 {
        return Err(NbvError::InvalidConfig("grid needs at least one row and column".into()));
    }
    let (dx, dy) = (extent[0] / spec.cols as f64, extent[1] / spec.rows as f64);
    let mut cams = Vec::with_capacity(spec.rows * spec.cols);
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            cams.push(CameraView::new(
                Point3::new((c as f64 + 0.5) * dx, (r as f64 + 0.5) * dy, spec.altitude),
                spec.pitch_deg.to_radians(),
                spec.yaw_deg.to_radians(),
                intrinsics,
            )?);
        }
    }
    Ok(cams)
}

/// Camera for an optimizer genome `(x, y, z, pitch, yaw)`.
pub fn genome_camera(g: &Genome, intrinsics: Intrinsics<f64>) -> Result<CameraView<f64>> {
    CameraView::new(Point3::new(g[0], g[1], g[2]), g[3], g[4], intrinsics)
}

/// SplitMix64 step; derives independent seeds from a master seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const SCENE_STREAM: u64 = 1;
const MANIKIN_STREAM: u64 = 2;
const EA_STREAM: u64 = 1000;
const RUN_STREAM: u64 = 1_000_000;

/// Seed of the forest generated for a run with master seed `master`.
pub fn scene_seed(master: u64) -> u64 {
    derive_seed(master, SCENE_STREAM)
}

/// Seed of the manikin placement for a run with master seed `master`.
pub fn manikin_seed(master: u64) -> u64 {
    derive_seed(master, MANIKIN_STREAM)
}

/// Optimizer outcome for one planned view.
#[derive(Clone, Debug)]
pub struct NbvStep {
    pub index: usize,
    pub camera: CameraView<f64>,
    pub best_fitness: f64,
    pub stats: Vec<GenerationStats>,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub seed: u64,
    pub heuristic: Heuristic,
    pub mesh_vertices: usize,
    pub evaluated_vertices: usize,
    pub vertex_cap: Option<usize>,
    pub initial_cameras: usize,
    /// Initial grid followed by the planned views.
    pub cameras: Vec<CameraView<f64>>,
    pub steps: Vec<NbvStep>,
    pub detection: DetectionTable,
}

impl RunReport {
    /// One point per camera count, starting at one camera.
    pub fn curve(&self) -> Vec<CurvePoint> {
        let vis = self.detection.visible_curve();
        let pix = self.detection.pixel_curve();
        vis.into_iter()
            .zip(pix)
            .enumerate()
            .map(|(k, (v, p))| CurvePoint {
                cameras: k + 1,
                visible_manikins: v,
                total_pixels: p,
            })
            .collect()
    }

    /// Manikins seen by the initial grid alone.
    pub fn baseline_visible(&self) -> usize {
        match self.initial_cameras {
            0 => 0,
            k => self.detection.visible_curve()[k - 1],
        }
    }

    pub fn final_visible(&self) -> usize {
        self.detection.seen_count()
    }
}

/// Runs one simulation. With `out`, every artefact is written there and each
/// planned view is flushed to disk before the next one starts.
pub fn run_simulation_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunReport> {
    cfg.validate()?;
    let intrinsics = cfg.camera.intrinsics()?;
    let bounds = cfg.bounds.pose_bounds(cfg.scene.extent)?;

    let scene = generate_scene(&cfg.scene, scene_seed(cfg.seed))?;
    let manikins = place_manikins(&scene, &cfg.manikins, manikin_seed(cfg.seed))?;
    let mut writer = match out {
        Some(dir) => Some(ReportWriter::create(dir, cfg, &scene, &manikins)?),
        None => None,
    };

    let mesh_vertices = scene.mesh.vertex_count();
    let model = SurfaceModel::with_vertex_cap(scene.mesh.clone(), cfg.vertex_cap)?;
    let initial = make_initial_grid(&cfg.grid, cfg.scene.extent, intrinsics)?;
    let mut ctx = FitnessContext::with_views(&model, (&cfg.fitness).into(), &initial)?;
    if let Some(w) = writer.as_mut() {
        for cam in &initial {
            w.camera(cam)?;
        }
    }

    let mut steps = Vec::with_capacity(cfg.n_nbv);
    for k in 0..cfg.n_nbv {
        let step = plan_next_view(&ctx, cfg, &bounds, intrinsics, k)?;
        ctx.commit_in_place(&step.camera);
        if let Some(w) = writer.as_mut() {
            w.step(&step)?;
        }
        log::info!(
            "run seed {} view {}/{}: fitness {:.4}",
            cfg.seed,
            k + 1,
            cfg.n_nbv,
            step.best_fitness
        );
        steps.push(step);
    }

    let cameras = ctx.cameras().to_vec();
    let detection = detection_table(model.index(), &manikins, &cameras, cfg.render);
    let report = RunReport {
        seed: cfg.seed,
        heuristic: cfg.heuristic,
        mesh_vertices,
        evaluated_vertices: model.len(),
        vertex_cap: cfg.vertex_cap,
        initial_cameras: initial.len(),
        cameras,
        steps,
        detection,
    };
    if let Some(w) = writer {
        w.finish(&report)?;
    }
    Ok(report)
}

/// Optimizes the configured heuristic for view number `index` (0-based).
pub fn plan_next_view(
    ctx: &FitnessContext<'_, f64>,
    cfg: &ExperimentConfig,
    bounds: &PoseBounds,
    intrinsics: Intrinsics<f64>,
    index: usize,
) -> Result<NbvStep> {
    let mut evo_cfg = cfg.evolution.clone();
    evo_cfg.seed = derive_seed(cfg.seed ^ cfg.evolution.seed, EA_STREAM + index as u64);
    let heuristic = cfg.heuristic;
    let result = evo::run(
        |g: &Genome| -> Result<f64> { Ok(ctx.score(heuristic, &genome_camera(g, intrinsics)?)) },
        bounds,
        &evo_cfg,
    )?;
    Ok(NbvStep {
        index,
        camera: genome_camera(&result.best, intrinsics)?,
        best_fitness: result.best_fitness,
        stats: result.stats,
    })
}

#[derive(Clone, Debug)]
pub struct BatchReport {
    pub runs: Vec<RunReport>,
    pub aggregate: Vec<AggregateRow>,
}

/// Seed of run `run` in a batch.
pub fn run_seed(master: u64, run: usize) -> u64 {
    derive_seed(master, RUN_STREAM + run as u64)
}

/// Independent runs with derived seeds, executed in parallel, plus
/// per-camera-count mean/min/max.
pub fn run_batch(cfg: &ExperimentConfig, n_runs: usize, out: Option<&Path>) -> Result<BatchReport> {
    if n_runs == 0 {
        return Err(NbvError::InvalidConfig("a batch needs at least one run".into()));
    }
    let runs = (0..n_runs)
        .into_par_iter()
        .map(|r| {
            let mut run_cfg = cfg.clone();
            run_cfg.seed = run_seed(cfg.seed, r);
            let dir = out.map(|o| o.join(format!("run_{r:03}")));
            run_simulation_experiment(&run_cfg, dir.as_deref())
        })
        .collect::<Result<Vec<_>>>()?;
    let curves: Vec<Vec<CurvePoint>> = runs.iter().map(RunReport::curve).collect();
    let aggregate = aggregate(&curves);
    if let Some(dir) = out {
        report::write_aggregate(&dir.join("aggregate.csv"), &aggregate)?;
    }
    Ok(BatchReport { runs, aggregate })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_grid_is_centered() {
        let spec = GridSpec {
            rows: 1,
            cols: 1,
            ..Default::default()
        };
        let cams = make_initial_grid(&spec, [30.0, 30.0], Intrinsics::default()).unwrap();
        assert_eq!(cams.len(), 1);
        assert_eq!(cams[0].position(), Point3::new(15.0, 15.0, 25.0));
    }

    #[test]
    fn six_by_six_grid_spacing() {
        let cams = make_initial_grid(&GridSpec::default(), [30.0, 30.0], Intrinsics::default()).unwrap();
        assert_eq!(cams.len(), 36);
        let xs: Vec<f64> = cams[..6].iter().map(|c| c.position().x).collect();
        assert_eq!(xs, vec![2.5, 7.5, 12.5, 17.5, 22.5, 27.5]);
        for c in &cams {
            assert!((c.pitch().to_degrees() + 90.0).abs() < 1e-12);
            assert!((c.view_direction().z + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn derived_seeds_differ() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|k| derive_seed(7, k)).collect();
        assert_eq!(s.len(), 1000);
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }
}
