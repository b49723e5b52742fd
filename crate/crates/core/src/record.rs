//! Result records: pretty-printed JSON with a fixed field order, holding the
//! full configuration, per-pair solve summaries and any metrics. See
//! `docs/record.md`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::eval::{AteResult, DepthMetrics, PoseError};
use crate::loss::LossComponents;
use crate::se3::{se3_log, PoseSE3};
use crate::solver::{SolveResult, TraceEntry};

pub const RECORD_FORMAT: &str = "hazevo-result";
pub const RECORD_VERSION: u32 = 1;

/// Which solve produced a pair summary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    Pose,
    Joint,
    Cycled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub source: String,
    pub target: String,
    pub mode: SolveMode,
    /// Row-major `[R | t]`.
    pub pose: [f64; 12],
    pub twist: [f64; 6],
    pub pose_backward: Option<[f64; 12]>,
    pub iterations: usize,
    pub converged: bool,
    pub final_total: f64,
    /// Unweighted terms at the final estimate.
    pub final_components: LossComponents,
    pub final_coverage: f64,
    pub cycle_loss: Option<f64>,
    pub loss_trace: Vec<TraceEntry>,
    /// Present when the ground-truth pose is known.
    pub pose_error: Option<PoseError>,
}

impl PairSummary {
    pub fn from_result(source: &str, target: &str, mode: SolveMode, r: &SolveResult) -> Result<Self> {
        Ok(Self {
            source: source.into(),
            target: target.into(),
            mode,
            pose: r.pose.to_row_major_3x4(),
            twist: se3_log(&r.pose)?.0,
            pose_backward: r.pose_backward.map(|p| p.to_row_major_3x4()),
            iterations: r.iterations,
            converged: r.converged,
            final_total: r.final_loss.total(),
            final_components: r.final_loss.components,
            final_coverage: r.final_loss.coverage,
            cycle_loss: r.cycle_loss,
            loss_trace: r.loss_trace.clone(),
            pose_error: None,
        })
    }

    pub fn pose(&self) -> Result<PoseSE3> {
        PoseSE3::from_row_major_3x4(&self.pose)
    }
}

/// Wall-clock durations in milliseconds. Excluded from records by default,
/// since they would break byte-for-byte reproducibility.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_ms: f64,
    pub per_pair_ms: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub format: String,
    pub format_version: u32,
    pub artifact_version: String,
    pub seed: u64,
    pub config: Config,
    pub pairs: Vec<PairSummary>,
    pub depth_metrics: Option<DepthMetrics>,
    pub ate: Option<AteResult>,
    pub timings: Option<Timings>,
}

impl ResultRecord {
    pub fn new(config: Config) -> Self {
        Self {
            format: RECORD_FORMAT.into(),
            format_version: RECORD_VERSION,
            artifact_version: env!("CARGO_PKG_VERSION").into(),
            seed: config.solver.seed,
            config,
            pairs: Vec::new(),
            depth_metrics: None,
            ate: None,
            timings: None,
        }
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::InvalidConfig(format!("record encoding: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: ResultRecord = serde_json::from_str(text).map_err(|e| Error::MalformedHeader(format!("result record: {e}")))?;
        if r.format != RECORD_FORMAT || r.format_version != RECORD_VERSION {
            return Err(Error::UnsupportedFormat(format!("{} version {}", r.format, r.format_version)));
        }
        r.config.validate()?;
        Ok(r)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::Alignment;

    #[test]
    fn json_round_trip() {
        let mut r = ResultRecord::new(Config::default());
        r.pairs.push(PairSummary {
            source: "a.png".into(),
            target: "b.png".into(),
            mode: SolveMode::Pose,
            pose: PoseSE3::from_axis_angle([0.01, 0.0, 0.02], [0.1, 0.2, 0.3]).to_row_major_3x4(),
            twist: [0.0; 6],
            pose_backward: None,
            iterations: 3,
            converged: true,
            final_total: 0.125,
            final_components: LossComponents::default(),
            final_coverage: 0.9,
            cycle_loss: None,
            loss_trace: vec![],
            pose_error: None,
        });
        r.ate = Some(AteResult {
            mean: 0.5,
            std: 0.25,
            per_frame_errors: vec![0.25, 0.75],
            alignment: Alignment::Similarity,
        });
        let text = r.to_json().unwrap();
        let back = ResultRecord::from_json(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json().unwrap(), text);
        // field order is the declaration order
        let f = text.find("\"format\"").unwrap();
        let c = text.find("\"config\"").unwrap();
        let p = text.find("\"pairs\"").unwrap();
        assert!(f < c && c < p);
    }

    #[test]
    fn rejects_other_formats() {
        let mut r = ResultRecord::new(Config::default());
        r.format = "other".into();
        let text = r.to_json().unwrap();
        assert!(matches!(ResultRecord::from_json(&text), Err(Error::UnsupportedFormat(_))));
        assert!(ResultRecord::from_json("{").is_err());
    }
}
