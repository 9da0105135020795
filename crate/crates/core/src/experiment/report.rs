//! Run artefacts on disk.
//!
//! A run directory holds `config.json`, `scene.obj` + `scene_tags.csv`,
//! `manikins.csv`, `cameras.csv` (pose CSV), `convergence.csv`,
//! `detections.csv`, `curve.csv` and `report.json`. Cameras and convergence
//! rows are appended and flushed as each view is planned.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, NbvStep, RunReport};
use crate::camera::{CameraView, PoseRow};
use crate::error::{NbvError, Result};
use crate::forest::{write_manikins_csv, ForestScene, Manikin};
use crate::mesh::io::{write_obj, write_tags};

/// Bumped whenever a column or file changes meaning.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Row of `curve.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub cameras: usize,
    pub visible_manikins: usize,
    pub total_pixels: u64,
}

/// Row of `aggregate.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub cameras: usize,
    pub visible_mean: f64,
    pub visible_min: usize,
    pub visible_max: usize,
    pub pixels_mean: f64,
    pub pixels_min: u64,
    pub pixels_max: u64,
}

#[derive(Serialize)]
struct ConvergenceRow {
    nbv: usize,
    generation: usize,
    max_fitness: f64,
    mean_fitness: f64,
    best_ever: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    schema_version: u32,
    seed: u64,
    heuristic: String,
    mesh_vertices: usize,
    evaluated_vertices: usize,
    vertex_cap: Option<usize>,
    initial_cameras: usize,
    planned_views: usize,
    manikins: usize,
    baseline_visible: usize,
    final_visible: usize,
    total_pixels: u64,
    nbv_fitness: &'a [f64],
}

pub struct ReportWriter {
    dir: PathBuf,
    cameras: csv::Writer<File>,
    convergence: csv::Writer<File>,
    next_camera: u64,
}

impl ReportWriter {
    pub fn create(
        dir: &Path,
        cfg: &ExperimentConfig,
        scene: &ForestScene,
        manikins: &[Manikin],
    ) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| NbvError::io(dir, e))?;
        let cfg_path = dir.join("config.json");
        std::fs::write(&cfg_path, serde_json::to_string_pretty(cfg)?)
            .map_err(|e| NbvError::io(&cfg_path, e))?;
        write_obj(&scene.mesh, &dir.join("scene.obj"))?;
        write_tags(&scene.mesh, &dir.join("scene_tags.csv"))?;

        write_manikins_csv(&dir.join("manikins.csv"), manikins)?;

        Ok(ReportWriter {
            dir: dir.to_path_buf(),
            cameras: csv::Writer::from_path(dir.join("cameras.csv"))?,
            convergence: csv::Writer::from_path(dir.join("convergence.csv"))?,
            next_camera: 0,
        })
    }

    pub fn camera(&mut self, cam: &CameraView<f64>) -> Result<()> {
        self.cameras.serialize(PoseRow::from_camera(self.next_camera, cam))?;
        self.next_camera += 1;
        self.cameras.flush().map_err(|e| NbvError::io(&self.dir, e))
    }

    pub fn step(&mut self, step: &NbvStep) -> Result<()> {
        for s in &step.stats {
            self.convergence.serialize(ConvergenceRow {
                nbv: step.index,
                generation: s.generation,
                max_fitness: s.max_fitness,
                mean_fitness: s.mean_fitness,
                best_ever: s.best_ever,
            })?;
        }
        self.convergence.flush().map_err(|e| NbvError::io(&self.dir, e))?;
        self.camera(&step.camera)
    }

    pub fn finish(self, report: &RunReport) -> Result<()> {
        report.detection.write_csv(&self.dir.join("detections.csv"))?;
        write_curve_csv(&self.dir.join("curve.csv"), &report.curve())?;
        let fitness: Vec<f64> = report.steps.iter().map(|s| s.best_fitness).collect();
        let summary = Summary {
            schema_version: REPORT_SCHEMA_VERSION,
            seed: report.seed,
            heuristic: report.heuristic.to_string(),
            mesh_vertices: report.mesh_vertices,
            evaluated_vertices: report.evaluated_vertices,
            vertex_cap: report.vertex_cap,
            initial_cameras: report.initial_cameras,
            planned_views: report.steps.len(),
            manikins: report.detection.manikin_count(),
            baseline_visible: report.baseline_visible(),
            final_visible: report.final_visible(),
            total_pixels: report.detection.total_pixels(),
            nbv_fitness: &fitness,
        };
        let path = self.dir.join("report.json");
        std::fs::write(&path, serde_json::to_string_pretty(&summary)?).map_err(|e| NbvError::io(&path, e))
    }
}

pub fn write_curve_csv(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in curve {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| NbvError::io(path, e))
}

pub fn read_curve_csv(path: &Path) -> Result<Vec<CurvePoint>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| NbvError::parse(path, i + 2, e.to_string())))
        .collect()
}

/// Mean, min and max across runs for every camera count present in all runs.
pub fn aggregate(curves: &[Vec<CurvePoint>]) -> Vec<AggregateRow> {
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    let n = curves.len() as f64;
    (0..len)
        .map(|k| {
            let pts: Vec<&CurvePoint> = curves.iter().map(|c| &c[k]).collect();
            AggregateRow {
                cameras: pts[0].cameras,
                visible_mean: pts.iter().map(|p| p.visible_manikins as f64).sum::<f64>() / n,
                visible_min: pts.iter().map(|p| p.visible_manikins).min().unwrap_or(0),
                visible_max: pts.iter().map(|p| p.visible_manikins).max().unwrap_or(0),
                pixels_mean: pts.iter().map(|p| p.total_pixels as f64).sum::<f64>() / n,
                pixels_min: pts.iter().map(|p| p.total_pixels).min().unwrap_or(0),
                pixels_max: pts.iter().map(|p| p.total_pixels).max().unwrap_or(0),
            }
        })
        .collect()
}

pub(crate) fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| NbvError::io(path, e))
}
