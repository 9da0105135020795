//! Greedy view selection over a fixed set of posed images.
//!
//! Dataset CSV: the pose columns `id,x,y,z,pitch_deg,yaw_deg,f,hfov_deg,vfov_deg`
//! plus optional `sees_manikin_<j>` columns holding 0 or 1. A row with an empty
//! label cell is treated as unlabeled.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::Point3;
use rayon::prelude::*;
use serde::Serialize;

use crate::camera::{CameraView, Intrinsics, POSE_HEADER};
use crate::error::{NbvError, Result};
use crate::fitness::{FitnessContext, Heuristic, TraceRow};

const LABEL_PREFIX: &str = "sees_manikin_";

#[derive(Clone, Debug)]
pub struct PosedImageRecord {
    pub id: u64,
    pub camera: CameraView<f64>,
    /// Aligned with [`Dataset::manikin_ids`].
    pub labels: Option<Vec<bool>>,
}

#[derive(Clone, Debug, Default)]
pub struct Dataset {
    /// The `<j>` of each label column, in column order.
    pub manikin_ids: Vec<u32>,
    pub records: Vec<PosedImageRecord>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&PosedImageRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Splits records into the ones listed in `ids` (in the order given) and
    /// the rest (in file order).
    pub fn partition(&self, ids: &[u64]) -> Result<(Vec<PosedImageRecord>, Vec<PosedImageRecord>)> {
        let chosen: HashSet<u64> = ids.iter().copied().collect();
        let initial = ids
            .iter()
            .map(|&id| self.get(id).cloned().ok_or(NbvError::UnknownId(id)))
            .collect::<Result<Vec<_>>>()?;
        let rest = self
            .records
            .iter()
            .filter(|r| !chosen.contains(&r.id))
            .cloned()
            .collect();
        Ok((initial, rest))
    }
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let mut pose_cols = [0usize; 9];
    for (slot, name) in pose_cols.iter_mut().zip(POSE_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| NbvError::parse(path, 1, format!("missing column `{name}`")))?;
    }
    let mut label_cols = Vec::new();
    let mut manikin_ids = Vec::new();
    for (c, h) in headers.iter().enumerate() {
        if let Some(j) = h.trim().strip_prefix(LABEL_PREFIX) {
            let j: u32 = j
                .parse()
                .map_err(|_| NbvError::parse(path, 1, format!("bad label column `{h}`")))?;
            label_cols.push(c);
            manikin_ids.push(j);
        }
    }

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| NbvError::parse(path, line, e.to_string()))?;
        let field = |c: usize| row.get(c).unwrap_or("").trim();
        let num = |k: usize| -> Result<f64> {
            let c = pose_cols[k];
            field(c).parse().map_err(|_| {
                NbvError::parse(path, line, format!("`{}` is not a number: {:?}", POSE_HEADER[k], field(c)))
            })
        };
        let id: u64 = field(pose_cols[0])
            .parse()
            .map_err(|_| NbvError::parse(path, line, format!("bad id {:?}", field(pose_cols[0]))))?;
        if !seen.insert(id) {
            return Err(NbvError::parse(path, line, format!("duplicate id {id}")));
        }
        let invalid = |e: NbvError| NbvError::parse(path, line, e.to_string());
        let intr = Intrinsics::from_fov(num(6)?, num(7)?.to_radians(), num(8)?.to_radians())
            .map_err(invalid)?;
        let position = Point3::new(num(1)?, num(2)?, num(3)?);
        let camera = CameraView::new(position, num(4)?.to_radians(), num(5)?.to_radians(), intr)
            .map_err(invalid)?;
        let labels = if label_cols.is_empty() || label_cols.iter().any(|&c| field(c).is_empty()) {
            None
        } else {
            let mut v = Vec::with_capacity(label_cols.len());
            for &c in &label_cols {
                v.push(match field(c) {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(NbvError::parse(
                            path,
                            line,
                            format!("label `{}` must be 0 or 1, got {other:?}", &headers[c]),
                        ))
                    }
                });
            }
            Some(v)
        };
        records.push(PosedImageRecord { id, camera, labels });
    }
    log::info!("loaded {} posed images from {}", records.len(), path.display());
    Ok(Dataset { manikin_ids, records })
}

/// Reads image ids, one per line; blank lines and a non-numeric header are skipped.
pub fn read_id_list(path: &Path) -> Result<Vec<u64>> {
    let text = std::fs::read_to_string(path).map_err(|e| NbvError::io(path, e))?;
    let mut ids = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let s = line.split(',').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        match s.parse() {
            Ok(id) => ids.push(id),
            Err(_) if i == 0 => {}
            Err(_) => return Err(NbvError::parse(path, i + 1, format!("bad image id {s:?}"))),
        }
    }
    Ok(ids)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SelectionStep {
    pub step: usize,
    pub image_id: u64,
    pub fitness: f64,
}

pub struct Selection<'m> {
    pub steps: Vec<SelectionStep>,
    /// Scores of every remaining candidate at every step.
    pub trace: Vec<TraceRow>,
    /// Context after committing all selected views.
    pub context: FitnessContext<'m, f64>,
}

impl Selection<'_> {
    pub fn ids(&self) -> Vec<u64> {
        self.steps.iter().map(|s| s.image_id).collect()
    }
}

/// Scores every unselected candidate, commits the best (ties to the lowest
/// id) and repeats `n_views` times.
pub fn brute_force_nbv<'m>(
    ctx: &FitnessContext<'m, f64>,
    candidates: &[PosedImageRecord],
    heuristic: Heuristic,
    n_views: usize,
) -> Result<Selection<'m>> {
    if n_views == 0 {
        return Err(NbvError::InvalidConfig("n_views must be at least 1".into()));
    }
    if candidates.len() < n_views {
        return Err(NbvError::NotEnoughCandidates {
            needed: n_views,
            available: candidates.len(),
        });
    }
    let mut ctx = ctx.clone();
    let mut taken = vec![false; candidates.len()];
    let mut steps = Vec::with_capacity(n_views);
    let mut trace = Vec::new();
    for step in 0..n_views {
        let scores: Vec<(usize, f64, f64)> = candidates
            .par_iter()
            .enumerate()
            .filter(|(k, _)| !taken[*k])
            .map(|(k, rec)| {
                let (jv, jd) = ctx.score_both(&rec.camera);
                (k, jv, jd)
            })
            .collect();
        let mut best: Option<(usize, f64)> = None;
        for &(k, jv, jd) in &scores {
            trace.push(TraceRow {
                iteration: step,
                candidate_id: candidates[k].id,
                j_v: jv,
                log_j_d: jd,
            });
            let s = match heuristic {
                Heuristic::Visibility => jv,
                Heuristic::Geometry => jd,
            };
            let s = if s.is_nan() { f64::NEG_INFINITY } else { s };
            let better = match best {
                None => true,
                Some((b, bs)) => s > bs || (s == bs && candidates[k].id < candidates[b].id),
            };
            if better {
                best = Some((k, s));
            }
        }
        let (k, fitness) = best.expect("at least one candidate remains");
        taken[k] = true;
        ctx.commit_in_place(&candidates[k].camera);
        steps.push(SelectionStep {
            step,
            image_id: candidates[k].id,
            fitness,
        });
        log::info!("step {step}: image {} fitness {fitness:.6}", candidates[k].id);
    }
    Ok(Selection {
        steps,
        trace,
        context: ctx,
    })
}

pub fn write_selection_csv(path: &Path, steps: &[SelectionStep]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for s in steps {
        w.serialize(s)?;
    }
    w.flush().map_err(|e| NbvError::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelReport {
    /// The dataset has no label columns.
    Unlabeled,
    Labeled {
        manikin_ids: Vec<u32>,
        /// Selected images labeled as seeing each manikin.
        counts: Vec<usize>,
        /// Selected images whose labels are missing.
        unlabeled_images: Vec<u64>,
    },
}

impl LabelReport {
    /// Manikins seen by at least one selected image, out of all manikins.
    pub fn seen(&self) -> Option<(usize, usize)> {
        match self {
            LabelReport::Unlabeled => None,
            LabelReport::Labeled { counts, .. } => {
                Some((counts.iter().filter(|&&c| c > 0).count(), counts.len()))
            }
        }
    }

    /// `manikin_id,count` rows, or a single `unlabeled` marker line.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        match self {
            LabelReport::Unlabeled => w.write_record(["unlabeled"])?,
            LabelReport::Labeled {
                manikin_ids, counts, ..
            } => {
                w.write_record(["manikin_id", "count"])?;
                for (j, c) in manikin_ids.iter().zip(counts) {
                    w.write_record([j.to_string(), c.to_string()])?;
                }
            }
        }
        w.flush().map_err(|e| NbvError::io(path, e))
    }
}

pub fn label_report(selected: &[u64], dataset: &Dataset) -> Result<LabelReport> {
    if dataset.manikin_ids.is_empty() {
        return Ok(LabelReport::Unlabeled);
    }
    let mut counts = vec![0; dataset.manikin_ids.len()];
    let mut unlabeled_images = Vec::new();
    for &id in selected {
        let rec = dataset.get(id).ok_or(NbvError::UnknownId(id))?;
        match &rec.labels {
            Some(labels) => {
                for (c, &l) in counts.iter_mut().zip(labels) {
                    *c += usize::from(l);
                }
            }
            None => unlabeled_images.push(id),
        }
    }
    Ok(LabelReport::Labeled {
        manikin_ids: dataset.manikin_ids.clone(),
        counts,
        unlabeled_images,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    const HEAD: &str = "id,x,y,z,pitch_deg,yaw_deg,f,hfov_deg,vfov_deg";

    #[test]
    fn header_only_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "d.csv", &format!("{HEAD}\n"));
        let d = load_dataset(&p).unwrap();
        assert!(d.is_empty());
        assert!(d.manikin_ids.is_empty());
    }

    #[test]
    fn bad_yaw_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!("{HEAD}\n1,0,0,10,-90,0,1,84,62\n2,0,0,10,-90,east,1,84,62\n");
        let p = write(dir.path(), "d.csv", &body);
        match load_dataset(&p) {
            Err(NbvError::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("yaw_deg"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn labels_are_parsed() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!(
            "{HEAD},sees_manikin_1,sees_manikin_2\n5,0,0,10,-90,0,1,84,62,1,0\n6,1,0,10,-90,0,1,84,62,,\n"
        );
        let p = write(dir.path(), "d.csv", &body);
        let d = load_dataset(&p).unwrap();
        assert_eq!(d.manikin_ids, vec![1, 2]);
        assert_eq!(d.records[0].labels, Some(vec![true, false]));
        assert_eq!(d.records[1].labels, None);

        let rep = label_report(&[5, 6], &d).unwrap();
        assert_eq!(
            rep,
            LabelReport::Labeled {
                manikin_ids: vec![1, 2],
                counts: vec![1, 0],
                unlabeled_images: vec![6],
            }
        );
        assert_eq!(rep.seen(), Some((1, 2)));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!("{HEAD}\n1,0,0,10,-90,0,1,84,62\n1,0,0,10,-90,0,1,84,62\n");
        let p = write(dir.path(), "d.csv", &body);
        assert!(matches!(load_dataset(&p), Err(NbvError::Parse { line: 3, .. })));
    }

    #[test]
    fn id_list_skips_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "ids.txt", "image_id\n3\n\n7\n");
        assert_eq!(read_id_list(&p).unwrap(), vec![3, 7]);
    }
}
