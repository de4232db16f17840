//! Routing and congestion metrics: rank, ETX, queue occupancy factor (QOF),
//! the exponentially weighted congestion level (EWQOF) and the Max-QOF
//! baseline, HDLAC hysteresis, parent score and the parent-selection rule.
//!
//! Everything here is a pure function of its inputs.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a node in the DODAG. The root is always `NodeId(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("link has {tnop} transmissions but no successes")]
    DivisionByZeroHistory { tnop: u64 },
    #[error("invalid queue: {nontp} packets in a queue of length {ql}")]
    InvalidQueue { nontp: usize, ql: usize },
    #[error("QOF history is empty")]
    EmptyHistory,
    #[error("QOF value {0} outside [0, 1]")]
    QofOutOfRange(f64),
    #[error("history capacity must be positive")]
    ZeroCapacity,
    #[error("slotframe {got} is not after the last recorded slotframe {last}")]
    NonMonotonicSlotframe { last: u64, got: u64 },
    #[error("link counters inconsistent: {tnopss} successes > {tnop} transmissions")]
    InconsistentLink { tnop: u64, tnopss: u64 },
    #[error("invalid estimator parameter {name} = {value}")]
    InvalidParam { name: &'static str, value: f64 },
}

/// Queue occupancy factor, a fraction in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Qof(f64);

impl Qof {
    pub const ZERO: Qof = Qof(0.0);
    pub const FULL: Qof = Qof(1.0);

    pub fn new(value: f64) -> Result<Self, MetricError> {
        if (0.0..=1.0).contains(&value) {
            Ok(Qof(value))
        } else {
            Err(MetricError::QofOutOfRange(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Qof {
    type Error = MetricError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Qof::new(value)
    }
}

impl From<Qof> for f64 {
    fn from(q: Qof) -> f64 {
        q.0
    }
}

/// Sliding window of the last `k` per-slotframe QOF samples, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct QofHistory {
    window: VecDeque<Qof>,
    capacity: usize,
    last_slotframe: Option<u64>,
}

impl QofHistory {
    pub fn new(k: usize) -> Result<Self, MetricError> {
        if k == 0 {
            return Err(MetricError::ZeroCapacity);
        }
        Ok(QofHistory { window: VecDeque::with_capacity(k), capacity: k, last_slotframe: None })
    }

    /// Builds a history from consecutive samples starting at slotframe 0.
    /// Only the most recent `k` values are kept.
    pub fn from_values(k: usize, values: &[f64]) -> Result<Self, MetricError> {
        let mut h = QofHistory::new(k)?;
        for (i, &v) in values.iter().enumerate() {
            h.push(i as u64, Qof::new(v)?)?;
        }
        Ok(h)
    }

    /// Appends the sample for `slotframe`, evicting the oldest entry once the
    /// window holds `k` samples.
    pub fn push(&mut self, slotframe: u64, qof: Qof) -> Result<(), MetricError> {
        if let Some(last) = self.last_slotframe {
            if slotframe <= last {
                return Err(MetricError::NonMonotonicSlotframe { last, got: slotframe });
            }
        }
        if self.window.len() == self.capacity {
            self.window.pop_front();
        }
        self.window.push_back(qof);
        self.last_slotframe = Some(slotframe);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn latest(&self) -> Option<Qof> {
        self.window.back().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = Qof> + '_ {
        self.window.iter().copied()
    }
}

/// Tuning of the congestion estimator and parent selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    /// Smoothing factor: weight kept by the older estimate at each step.
    pub alpha: f64,
    /// Congestion threshold on the current parent's advertised level.
    pub theta_th: f64,
    /// HDLAC hysteresis margin a candidate must beat.
    pub delta_th: f64,
    /// Weight of the advertised QOF inside the parent score.
    pub eta: f64,
    /// ETX substituted for links with attempts but no successes.
    pub etx_worst: f64,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        EstimatorParams { alpha: 0.5, theta_th: 0.5, delta_th: 0.5, eta: 0.25, etx_worst: DEFAULT_ETX_WORST }
    }
}

pub const DEFAULT_ETX_WORST: f64 = 16.0;

impl EstimatorParams {
    pub fn validate(&self) -> Result<(), MetricError> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.alpha) {
            return Err(MetricError::InvalidParam { name: "alpha", value: self.alpha });
        }
        if !open_unit(self.theta_th) {
            return Err(MetricError::InvalidParam { name: "theta_th", value: self.theta_th });
        }
        if !(self.delta_th >= 0.0) {
            return Err(MetricError::InvalidParam { name: "delta_th", value: self.delta_th });
        }
        if !(self.eta > 0.0) {
            return Err(MetricError::InvalidParam { name: "eta", value: self.eta });
        }
        if !(self.etx_worst >= 1.0) {
            return Err(MetricError::InvalidParam { name: "etx_worst", value: self.etx_worst });
        }
        Ok(())
    }
}

/// Transmission counters of one child → parent link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LinkStats {
    /// Total transmissions attempted over the link.
    pub tnop: u64,
    /// Successful transmissions.
    pub tnopss: u64,
}

impl LinkStats {
    pub fn new(tnop: u64, tnopss: u64) -> Result<Self, MetricError> {
        if tnopss > tnop {
            return Err(MetricError::InconsistentLink { tnop, tnopss });
        }
        Ok(LinkStats { tnop, tnopss })
    }

    pub fn record(&mut self, success: bool) {
        self.tnop += 1;
        if success {
            self.tnopss += 1;
        }
    }
}

/// A child's cached view of one candidate parent, built from the parent's
/// last DIO and the child's own link counters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParentView {
    pub parent_id: NodeId,
    pub rank: u32,
    pub advertised_qof: Qof,
    pub advertised_beta: f64,
    pub link: LinkStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SwapDecision {
    Keep,
    SwapTo(NodeId),
}

/// Congestion estimator applied to the QOF history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Exponentially weighted QOF.
    Ewqof,
    /// Window maximum of QOF (baseline).
    MaxQof,
}

impl Strategy {
    pub const ALL: [Strategy; 2] = [Strategy::Ewqof, Strategy::MaxQof];

    pub fn estimate(self, history: &QofHistory, alpha: f64) -> Result<f64, MetricError> {
        match self {
            Strategy::Ewqof => beta_ewqof(history, alpha),
            Strategy::MaxQof => beta_maxqof(history),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Ewqof => "ewqof",
            Strategy::MaxQof => "maxqof",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ewqof" => Ok(Strategy::Ewqof),
            "maxqof" | "max-qof" | "max_qof" => Ok(Strategy::MaxQof),
            other => Err(format!("unknown strategy '{other}' (expected ewqof or maxqof)")),
        }
    }
}

pub fn rank_from_hops(hop_distance: u32) -> u32 {
    hop_distance + 1
}

/// Expected transmission count `tnop / tnopss`; 1.0 before any attempt.
pub fn etx(link: LinkStats) -> Result<f64, MetricError> {
    match (link.tnop, link.tnopss) {
        (0, _) => Ok(1.0),
        (tnop, 0) => Err(MetricError::DivisionByZeroHistory { tnop }),
        (tnop, ok) => Ok(tnop as f64 / ok as f64),
    }
}

/// [`etx`] with zero-success links mapped to `worst`.
pub fn etx_or_worst(link: LinkStats, worst: f64) -> f64 {
    etx(link).unwrap_or(worst)
}

pub fn local_qof(nontp: usize, ql: usize) -> Result<Qof, MetricError> {
    if ql == 0 || nontp > ql {
        return Err(MetricError::InvalidQueue { nontp, ql });
    }
    Ok(Qof(nontp as f64 / ql as f64))
}

/// Folds the parent's advertised QOF into the local one. A node without a
/// parent (the root) advertises its own value.
pub fn propagated_qof(own: Qof, parent_qof: Option<Qof>) -> Qof {
    match parent_qof {
        Some(p) if p.0 > own.0 => p,
        _ => own,
    }
}

/// Exponentially weighted congestion level over the window, oldest first:
/// `b = q1`, then `b = (1 - alpha) * q + alpha * b` for each later sample.
/// The implied weights sum to one.
pub fn beta_ewqof(history: &QofHistory, alpha: f64) -> Result<f64, MetricError> {
    let mut samples = history.iter();
    let first = samples.next().ok_or(MetricError::EmptyHistory)?;
    let beta = samples.fold(first.0, |b, q| (1.0 - alpha) * q.0 + alpha * b);
    Ok(beta.clamp(0.0, 1.0))
}

/// Baseline estimator: the largest QOF in the window.
pub fn beta_maxqof(history: &QofHistory) -> Result<f64, MetricError> {
    history.iter().map(Qof::value).reduce(f64::max).ok_or(MetricError::EmptyHistory)
}

/// Hop distance link assessment criterion: `rank + ETX`.
pub fn hdlac(view: &ParentView, etx_worst: f64) -> f64 {
    view.rank as f64 + etx_or_worst(view.link, etx_worst)
}

/// `rank + ETX + eta * QOF`.
pub fn parent_score(view: &ParentView, eta: f64, etx_worst: f64) -> f64 {
    hdlac(view, etx_worst) + eta * view.advertised_qof.0
}

/// Decides whether to leave `current` and for which candidate.
///
/// Nothing happens unless the current parent's advertised congestion level is
/// strictly above `theta_th`. Candidates must then improve HDLAC by strictly
/// more than `delta_th`; among those the lowest parent score wins, ties broken
/// by lower rank and then lower node id.
pub fn select_parent(current: &ParentView, candidates: &[ParentView], params: &EstimatorParams) -> SwapDecision {
    if !(current.advertised_beta > params.theta_th) {
        return SwapDecision::Keep;
    }
    let current_hdlac = hdlac(current, params.etx_worst);
    let mut best: Option<(f64, u32, NodeId)> = None;
    for cand in candidates.iter().filter(|c| c.parent_id != current.parent_id) {
        if !(current_hdlac - hdlac(cand, params.etx_worst) > params.delta_th) {
            continue;
        }
        let key = (parent_score(cand, params.eta, params.etx_worst), cand.rank, cand.parent_id);
        let better = match best {
            None => true,
            Some(b) => key.0 < b.0 || (key.0 == b.0 && (key.1, key.2) < (b.1, b.2)),
        };
        if better {
            best = Some(key);
        }
    }
    best.map_or(SwapDecision::Keep, |(_, _, id)| SwapDecision::SwapTo(id))
}

/// Number of samples required before selection runs: `ceil(k / 2)`.
pub fn warmup_samples(k: usize) -> usize {
    k.div_ceil(2)
}
