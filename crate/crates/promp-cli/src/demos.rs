//! Demonstration ingestion: CSV (one file per demonstration) and JSON
//! (array-of-demos, the canonical round-trip format), phase normalization
//! and zero-crossing-velocity strike segmentation.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use promp_core::Demonstration;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// One demonstration in the JSON document: an id plus rows of
/// `[t, q0, ..., q{D-1}]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DemoRecord {
    pub id: String,
    pub rows: Vec<Vec<f64>>,
}

impl DemoRecord {
    pub fn from_demonstration(id: impl Into<String>, demo: &Demonstration) -> Self {
        let rows = demo
            .times()
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let mut row = Vec::with_capacity(demo.dof() + 1);
                row.push(t);
                for d in 0..demo.dof() {
                    row.push(demo.joints()[(i, d)]);
                }
                row
            })
            .collect();
        DemoRecord {
            id: id.into(),
            rows,
        }
    }

    fn into_demonstration(self, path: &Path) -> crate::Result<Demonstration> {
        if self.rows.len() < 2 {
            return Err(CliError::Input(format!(
                "demonstration '{}' in {} has fewer than two samples",
                self.id,
                path.display()
            )));
        }
        let width = self.rows[0].len();
        if width < 2 {
            return Err(CliError::InconsistentDimension(format!(
                "demonstration '{}' needs a time column and at least one joint column",
                self.id
            )));
        }
        let mut times = Vec::with_capacity(self.rows.len());
        let mut joints = DMatrix::zeros(self.rows.len(), width - 1);
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != width {
                return Err(CliError::InconsistentDimension(format!(
                    "demonstration '{}' row {} has {} values, expected {width}",
                    self.id,
                    i,
                    row.len()
                )));
            }
            times.push(row[0]);
            for d in 0..width - 1 {
                joints[(i, d)] = row[d + 1];
            }
        }
        for (i, pair) in times.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(CliError::NonMonotoneTime(format!(
                    "demonstration '{}' rows {} and {}",
                    self.id,
                    i,
                    i + 1
                )));
            }
        }
        Ok(Demonstration::new(times, joints)?)
    }
}

fn load_json_demos(path: &Path) -> crate::Result<Vec<Demonstration>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let records: Vec<DemoRecord> = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    records
        .into_iter()
        .map(|r| r.into_demonstration(path))
        .collect()
}

fn load_csv_demo(path: &Path) -> crate::Result<Demonstration> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: 1,
            column: 0,
            message: e.to_string(),
        })?;
    let width = reader
        .headers()
        .map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: 1,
            column: 0,
            message: e.to_string(),
        })?
        .len();
    if width < 2 {
        return Err(CliError::InconsistentDimension(format!(
            "{} needs columns t,q0,...",
            path.display()
        )));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            column: 0,
            message: e.to_string(),
        })?;
        if record.len() != width {
            return Err(CliError::InconsistentDimension(format!(
                "{} line {}: {} fields, expected {width}",
                path.display(),
                i + 2,
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(width);
        for (col, field) in record.iter().enumerate() {
            row.push(field.parse::<f64>().map_err(|e| CliError::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                column: col + 1,
                message: e.to_string(),
            })?);
        }
        rows.push(row);
    }
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "demo".into());
    DemoRecord { id, rows }.into_demonstration(path)
}

/// Load demonstrations from one path: `.json` documents may hold many, a
/// `.csv` file holds exactly one.
pub fn load_demos(path: &Path) -> crate::Result<Vec<Demonstration>> {
    let demos = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => load_json_demos(path)?,
        Some("csv") => vec![load_csv_demo(path)?],
        _ => {
            return Err(CliError::Input(format!(
                "unrecognized demonstration format: {} (expected .json or .csv)",
                path.display()
            )))
        }
    };
    check_consistent_dof(&demos)?;
    Ok(demos)
}

/// Load and pool demonstrations from several files.
pub fn load_demo_files(paths: &[impl AsRef<Path>]) -> crate::Result<Vec<Demonstration>> {
    let mut all = Vec::new();
    for p in paths {
        all.extend(load_demos(p.as_ref())?);
    }
    check_consistent_dof(&all)?;
    if all.is_empty() {
        return Err(CliError::Input("no demonstrations loaded".into()));
    }
    Ok(all)
}

fn check_consistent_dof(demos: &[Demonstration]) -> crate::Result<()> {
    if let Some(first) = demos.first() {
        for (i, d) in demos.iter().enumerate() {
            if d.dof() != first.dof() {
                return Err(CliError::InconsistentDimension(format!(
                    "demonstration {} has {} joints, expected {}",
                    i,
                    d.dof(),
                    first.dof()
                )));
            }
        }
    }
    Ok(())
}

pub fn save_demos_json(path: &Path, demos: &[Demonstration]) -> crate::Result<()> {
    let records: Vec<DemoRecord> = demos
        .iter()
        .enumerate()
        .map(|(i, d)| DemoRecord::from_demonstration(format!("demo{i}"), d))
        .collect();
    let json = serde_json::to_string_pretty(&records)
        .map_err(|e| CliError::Input(format!("cannot serialize demonstrations: {e}")))?;
    fs::write(path, json).map_err(|e| CliError::io(path, e))
}

/// Normalized sample phases of one demonstration.
pub fn normalize_phase(demo: &Demonstration) -> Vec<f64> {
    demo.phases()
}

#[derive(Debug, Clone)]
pub struct SegmentOptions {
    /// Joint speed below this fraction of the demo's peak speed counts as a
    /// velocity zero crossing.
    pub zero_fraction: f64,
    /// Moving-average window applied to the speed profile; 0 disables it.
    pub smoothing: usize,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        SegmentOptions {
            zero_fraction: 0.01,
            smoothing: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroppedHit {
    pub hit_time: f64,
    pub reason: String,
}

#[derive(Debug)]
pub struct Segmentation {
    pub segments: Vec<Demonstration>,
    pub dropped: Vec<DroppedHit>,
}

/// Cut a recording into strike segments around supplied hit times: each
/// segment spans the tightest pair of near-zero-speed instants bracketing
/// its hit. Hits that cannot be bracketed (or would overlap an earlier
/// segment) are dropped and reported, not fatal.
pub fn segment_strikes(
    demo: &Demonstration,
    hit_times: &[f64],
    opts: &SegmentOptions,
) -> crate::Result<Segmentation> {
    let n = demo.len();
    if n < 3 {
        return Err(CliError::Input(
            "segmentation needs at least three samples".into(),
        ));
    }
    let times = demo.times();
    let joints = demo.joints();
    let dof = demo.dof();

    // Central-difference joint speeds, one-sided at the ends.
    let mut speed = vec![0.0f64; n];
    for (i, s) in speed.iter_mut().enumerate() {
        let (lo, hi) = if i == 0 {
            (0, 1)
        } else if i == n - 1 {
            (n - 2, n - 1)
        } else {
            (i - 1, i + 1)
        };
        let dt = times[hi] - times[lo];
        let mut acc = 0.0;
        for d in 0..dof {
            let v = (joints[(hi, d)] - joints[(lo, d)]) / dt;
            acc += v * v;
        }
        *s = acc.sqrt();
    }
    if opts.smoothing > 1 {
        let w = opts.smoothing;
        let raw = speed.clone();
        for (i, s) in speed.iter_mut().enumerate() {
            let lo = i.saturating_sub(w / 2);
            let hi = (i + w / 2 + 1).min(n);
            *s = raw[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
        }
    }
    let peak = speed.iter().fold(0.0f64, |a, &b| a.max(b));
    let threshold = opts.zero_fraction * peak;
    let still: Vec<usize> = (0..n).filter(|&i| speed[i] <= threshold).collect();

    let mut hits: Vec<f64> = hit_times.to_vec();
    hits.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut segments = Vec::new();
    let mut dropped = Vec::new();
    let mut previous_end = 0usize;
    for &hit in &hits {
        if hit <= times[0] || hit >= times[n - 1] {
            dropped.push(DroppedHit {
                hit_time: hit,
                reason: "hit time outside the recording".into(),
            });
            continue;
        }
        let before = still.iter().copied().rfind(|&i| times[i] < hit);
        let after = still.iter().copied().find(|&i| times[i] > hit);
        let (Some(a), Some(b)) = (before, after) else {
            dropped.push(DroppedHit {
                hit_time: hit,
                reason: "no bracketing velocity zero crossings".into(),
            });
            continue;
        };
        if !segments.is_empty() && a < previous_end {
            dropped.push(DroppedHit {
                hit_time: hit,
                reason: "segment would overlap the previous strike".into(),
            });
            continue;
        }
        let rows = b - a + 1;
        let mut seg_joints = DMatrix::zeros(rows, dof);
        for (r, i) in (a..=b).enumerate() {
            seg_joints.row_mut(r).copy_from(&joints.row(i));
        }
        segments.push(Demonstration::new(times[a..=b].to_vec(), seg_joints)?);
        previous_end = b;
    }
    Ok(Segmentation { segments, dropped })
}

/// Training-set gate: too few surviving segments means the data collection
/// should be redone.
pub fn require_min_segments(segmentation: &Segmentation, minimum: usize) -> crate::Result<()> {
    if segmentation.segments.len() < minimum {
        return Err(CliError::Input(format!(
            "only {} strike segments survived segmentation (minimum {minimum}); \
             collect demonstrations again or adjust the hit times",
            segmentation.segments.len()
        )));
    }
    Ok(())
}
