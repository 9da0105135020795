//! Next-best-view objectives: weighted visibility `J_v` and the
//! D-optimality criterion `J_d` (evaluated as a sum of log-determinants).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Matrix2x3, Matrix3};
use serde::{Deserialize, Serialize};

use crate::camera::CameraView;
use crate::error::{NbvError, Result};
use crate::scalar::Real;
use crate::visibility::SurfaceModel;

/// Which objective drives view selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Heuristic {
    /// Weighted count of newly visible vertices.
    Visibility,
    /// Log-determinant of per-vertex information matrices.
    Geometry,
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Heuristic::Visibility => "visibility",
            Heuristic::Geometry => "geometry",
        })
    }
}

impl FromStr for Heuristic {
    type Err = NbvError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "visibility" | "jv" | "v" => Ok(Heuristic::Visibility),
            "geometry" | "jd" | "d" => Ok(Heuristic::Geometry),
            other => Err(NbvError::InvalidConfig(format!("unknown heuristic {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitnessParams<T> {
    /// View count at which a vertex weight drops to one half.
    pub mu: T,
    /// Ridge added to every information matrix before taking determinants.
    pub lambda: T,
}

impl<T: Real> Default for FitnessParams<T> {
    fn default() -> Self {
        FitnessParams {
            mu: T::lit(3.0),
            lambda: T::lit(1e-9),
        }
    }
}

/// Weight `α_i = (1 − tanh(m_i − μ)) / 2`: high for rarely seen vertices.
#[inline]
pub fn weight<T: Real>(count: u32, mu: T) -> T {
    let m = T::lit(f64::from(count));
    (T::one() - (m - mu).tanh()) * T::lit(0.5)
}

pub fn weights<T: Real>(counts: &[u32], mu: T) -> Vec<T> {
    counts.iter().map(|&m| weight(m, mu)).collect()
}

/// Closed-form determinant of a 3×3 matrix.
#[inline]
pub fn det3<T: Real>(m: &Matrix3<T>) -> T {
    m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
        - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
        + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
}

/// `ln det(G + λI)` for a positive semidefinite `G`.
///
/// Evaluated through the closed-form `LDLᵀ` pivots of the 3×3 matrix, which
/// keeps the small pivot accurate when `G` is nearly rank deficient. The
/// determinant is bounded below by `λ³`; rounding that drops below this bound
/// is clamped to it.
#[inline]
pub fn regularized_logdet<T: Real>(g: &Matrix3<T>, lambda: T) -> T {
    let floor = lambda * lambda * lambda;
    let d1 = g[(0, 0)] + lambda;
    if !(d1 > T::zero()) {
        return floor.ln();
    }
    let l21 = g[(1, 0)] / d1;
    let l31 = g[(2, 0)] / d1;
    let d2 = g[(1, 1)] + lambda - l21 * g[(1, 0)];
    if !(d2 > T::zero()) {
        return floor.ln();
    }
    let l32 = (g[(2, 1)] - l31 * g[(1, 0)]) / d2;
    let d3 = g[(2, 2)] + lambda - l31 * g[(2, 0)] - l32 * l32 * d2;
    if !(d3 > T::zero()) || !(d1 * d2 * d3 > floor) {
        return floor.ln();
    }
    d1.ln() + d2.ln() + d3.ln()
}

/// `AᵀA` for a 2×3 Jacobian.
#[inline]
pub fn normal_matrix<T: Real>(a: &Matrix2x3<T>) -> Matrix3<T> {
    a.tr_mul(a)
}

/// State derived from the placed cameras, used to score candidates.
///
/// Holds per-vertex view counts `m_i`, weights `α_i` and information matrices
/// `G_i = Σ_k A_{k,i}ᵀ A_{k,i}` over the cameras that see vertex `i`.
#[derive(Clone)]
pub struct FitnessContext<'m, T: Real> {
    model: &'m SurfaceModel<T>,
    params: FitnessParams<T>,
    cameras: Vec<CameraView<T>>,
    counts: Vec<u32>,
    alpha: Vec<T>,
    info: Vec<Matrix3<T>>,
    base_logdet: Vec<T>,
}

impl<'m, T: Real> FitnessContext<'m, T> {
    /// Context with no placed cameras.
    pub fn new(model: &'m SurfaceModel<T>, params: FitnessParams<T>) -> Result<Self> {
        if !(params.lambda >= T::zero()) {
            return Err(NbvError::InvalidConfig("lambda must be non-negative".into()));
        }
        if !params.mu.is_finite() {
            return Err(NbvError::InvalidConfig("mu must be finite".into()));
        }
        let n = model.len();
        let empty = regularized_logdet(&Matrix3::zeros(), params.lambda);
        Ok(FitnessContext {
            model,
            params,
            cameras: Vec::new(),
            counts: vec![0; n],
            alpha: vec![weight(0, params.mu); n],
            info: vec![Matrix3::zeros(); n],
            base_logdet: vec![empty; n],
        })
    }

    /// Context after committing `cams` in order.
    pub fn with_views(
        model: &'m SurfaceModel<T>,
        params: FitnessParams<T>,
        cams: &[CameraView<T>],
    ) -> Result<Self> {
        let mut ctx = Self::new(model, params)?;
        for cam in cams {
            ctx.commit_in_place(cam);
        }
        Ok(ctx)
    }

    pub fn model(&self) -> &'m SurfaceModel<T> {
        self.model
    }

    pub fn params(&self) -> &FitnessParams<T> {
        &self.params
    }

    pub fn cameras(&self) -> &[CameraView<T>] {
        &self.cameras
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn weights(&self) -> &[T] {
        &self.alpha
    }

    /// `G_i` for evaluated vertex `i` (without regularization).
    pub fn information(&self, i: usize) -> &Matrix3<T> {
        &self.info[i]
    }

    /// `Σ_i ln det(G_i + λI)` for the placed cameras alone.
    pub fn base_logdet(&self) -> T {
        self.base_logdet.iter().fold(T::zero(), |s, &v| s + v)
    }

    /// `J_v = Σ_i α_i w_i`.
    pub fn visibility_fitness(&self, cand: &CameraView<T>) -> T {
        let model = self.model;
        let verts = model.mesh().vertices();
        let mut sum = T::zero();
        for (i, &v) in model.samples().iter().enumerate() {
            let local = cand.to_local(&verts[v as usize]);
            if cand.local_in_frustum(&local) && model.line_of_sight(cand, v, local.norm()) {
                sum += self.alpha[i];
            }
        }
        sum
    }

    /// `Σ_i ln det(G_i + [i visible] A_iᵀA_i + λI)` for candidate `cand`.
    pub fn geometry_fitness(&self, cand: &CameraView<T>) -> T {
        let model = self.model;
        let verts = model.mesh().vertices();
        let lambda = self.params.lambda;
        let mut sum = T::zero();
        for (i, &v) in model.samples().iter().enumerate() {
            let local = cand.to_local(&verts[v as usize]);
            let contrib = if cand.local_in_frustum(&local)
                && model.line_of_sight(cand, v, local.norm())
            {
                let a = cand.jacobian_from_local(&local);
                regularized_logdet(&(self.info[i] + normal_matrix(&a)), lambda)
            } else {
                self.base_logdet[i]
            };
            sum += contrib;
        }
        sum
    }

    pub fn score(&self, heuristic: Heuristic, cand: &CameraView<T>) -> T {
        match heuristic {
            Heuristic::Visibility => self.visibility_fitness(cand),
            Heuristic::Geometry => self.geometry_fitness(cand),
        }
    }

    /// Both objectives in one pass: `(J_v, ln J_d)`.
    pub fn score_both(&self, cand: &CameraView<T>) -> (T, T) {
        let model = self.model;
        let verts = model.mesh().vertices();
        let lambda = self.params.lambda;
        let (mut jv, mut jd) = (T::zero(), T::zero());
        for (i, &v) in model.samples().iter().enumerate() {
            let local = cand.to_local(&verts[v as usize]);
            if cand.local_in_frustum(&local) && model.line_of_sight(cand, v, local.norm()) {
                jv += self.alpha[i];
                let a = cand.jacobian_from_local(&local);
                jd += regularized_logdet(&(self.info[i] + normal_matrix(&a)), lambda);
            } else {
                jd += self.base_logdet[i];
            }
        }
        (jv, jd)
    }

    /// Context with `cam` added to the placed views.
    pub fn commit_view(&self, cam: &CameraView<T>) -> Self {
        let mut next = self.clone();
        next.commit_in_place(cam);
        next
    }

    pub fn commit_in_place(&mut self, cam: &CameraView<T>) {
        let w = self.model.visibility_vector(cam);
        let verts = self.model.mesh().vertices();
        for (i, (&v, &seen)) in self.model.samples().iter().zip(&w).enumerate() {
            if !seen {
                continue;
            }
            self.counts[i] += 1;
            self.alpha[i] = weight(self.counts[i], self.params.mu);
            let local = cam.to_local(&verts[v as usize]);
            let a = cam.jacobian_from_local(&local);
            self.info[i] += normal_matrix(&a);
            self.base_logdet[i] = regularized_logdet(&self.info[i], self.params.lambda);
        }
        self.cameras.push(*cam);
    }
}

/// Row of a fitness trace: `iteration,candidate_id,J_v,logJ_d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub candidate_id: u64,
    #[serde(rename = "J_v")]
    pub j_v: f64,
    #[serde(rename = "logJ_d")]
    pub log_j_d: f64,
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| NbvError::io(path, e))
}
