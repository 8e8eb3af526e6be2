//! Domain state: fault catalog, crossing buffers, DSPs, farmlets and metrics.

use std::fmt;

use crate::scheduler::Task;

/// Identifier of one of the ten monitored fault scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FaultId {
    E1,
    E2,
    E3,
    E4,
    E5,
    E6,
    E7,
    E8,
    E9,
    E10,
}

impl FaultId {
    pub const ALL: [FaultId; 10] = [
        FaultId::E1,
        FaultId::E2,
        FaultId::E3,
        FaultId::E4,
        FaultId::E5,
        FaultId::E6,
        FaultId::E7,
        FaultId::E8,
        FaultId::E9,
        FaultId::E10,
    ];

    /// Zero-based position in [`FaultId::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            FaultId::E1 => "e1",
            FaultId::E2 => "e2",
            FaultId::E3 => "e3",
            FaultId::E4 => "e4",
            FaultId::E5 => "e5",
            FaultId::E6 => "e6",
            FaultId::E7 => "e7",
            FaultId::E8 => "e8",
            FaultId::E9 => "e9",
            FaultId::E10 => "e10",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            FaultId::E1 => "DSP over time budget on crossing processing",
            FaultId::E2 => "PA stuck in a loop within software timer control",
            FaultId::E3 => "application framework stuck in a loop outside software timer control",
            FaultId::E4 => "application branches to an illegal instruction",
            FaultId::E5 => "processing times per crossing too long",
            FaultId::E6 => "too many track segments",
            FaultId::E7 => "corrupt crossing data (truncated, misaligned or bad header)",
            FaultId::E8 => "corrupt data referencing nonexistent detector channels",
            FaultId::E9 => "crossing data lost",
            FaultId::E10 => "failed to transfer results down the L1 buffer link",
        }
    }

    /// Default multiplicative throughput penalty while the fault is active.
    /// Control-flow faults are harshest, data anomalies mildest.
    pub fn default_penalty(self) -> f64 {
        match self {
            FaultId::E3 | FaultId::E4 | FaultId::E9 => 0.5,
            FaultId::E1 | FaultId::E2 | FaultId::E10 => 0.7,
            FaultId::E5 | FaultId::E6 | FaultId::E7 | FaultId::E8 => 0.85,
        }
    }
}

impl fmt::Display for FaultId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultKind {
    pub id: FaultId,
    pub description: &'static str,
    pub penalty_factor: f64,
}

/// Per-kind throughput penalties, indexed by [`FaultId::index`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyTable(pub [f64; 10]);

impl Default for PenaltyTable {
    fn default() -> Self {
        Self(FaultId::ALL.map(FaultId::default_penalty))
    }
}

impl PenaltyTable {
    pub fn get(&self, id: FaultId) -> f64 {
        self.0[id.index()]
    }

    pub fn set(&mut self, id: FaultId, factor: f64) {
        self.0[id.index()] = factor;
    }

    /// First kind whose factor lies outside `(0, 1)`.
    pub fn validate(&self) -> Result<(), (FaultId, f64)> {
        for id in FaultId::ALL {
            let p = self.get(id);
            if !(p > 0.0 && p < 1.0) {
                return Err((id, p));
            }
        }
        Ok(())
    }

    pub fn catalog(&self) -> Vec<FaultKind> {
        FaultId::ALL
            .iter()
            .map(|&id| FaultKind {
                id,
                description: id.description(),
                penalty_factor: self.get(id),
            })
            .collect()
    }
}

/// The ten fault kinds in id order with the default penalties.
pub fn default_fault_catalog() -> Vec<FaultKind> {
    PenaltyTable::default().catalog()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultInstance {
    pub kind: FaultKind,
    pub injected_at: u64,
    pub cleared_at: Option<u64>,
}

impl FaultInstance {
    pub fn is_active(&self) -> bool {
        self.cleared_at.is_none()
    }

    pub fn time_to_clear(&self) -> Option<u64> {
        self.cleared_at.map(|c| c - self.injected_at)
    }
}

/// Bounded queue of fungible crossings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrossingBuffer {
    fill: u64,
    capacity: u64,
    overflow_count: u64,
}

impl CrossingBuffer {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: u64) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        Self {
            fill: 0,
            capacity,
            overflow_count: 0,
        }
    }

    pub fn fill(&self) -> u64 {
        self.fill
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn overflow_count(&self) -> u64 {
        self.overflow_count
    }

    pub fn watermark(&self) -> f64 {
        self.fill as f64 / self.capacity as f64
    }

    /// Enqueues up to `n` crossings; returns how many were dropped.
    pub fn push(&mut self, n: u64) -> u64 {
        let accepted = n.min(self.capacity - self.fill);
        self.fill += accepted;
        let dropped = n - accepted;
        self.overflow_count += dropped;
        dropped
    }

    /// Dequeues up to `n` crossings; returns how many were taken.
    pub fn take(&mut self, n: u64) -> u64 {
        let taken = n.min(self.fill);
        self.fill -= taken;
        taken
    }
}

/// One worker node.
#[derive(Debug, Clone, PartialEq)]
pub struct DspState {
    /// Global index across the farm.
    pub index: usize,
    pub buffer: CrossingBuffer,
    /// Crossings processable per tick with no active faults.
    pub base_rate: u64,
    /// Ticks since this DSP last completed a farmlet check.
    pub staleness: u64,
    pub active_task: Task,
    /// Active faults only; at most one per kind.
    pub faults: Vec<FaultInstance>,
    /// Ticks remaining in an in-progress check, 0 when idle.
    pub check_cooldown: u64,
    /// Round-robin position among this DSP's peers.
    pub peer_cursor: usize,
    /// Member slot targeted by the in-progress check.
    pub check_target: Option<usize>,
    /// Ticks spent under VLA control.
    pub vla_ticks: u64,
}

impl DspState {
    pub fn new(index: usize, base_rate: u64, capacity: u64) -> Self {
        Self {
            index,
            buffer: CrossingBuffer::new(capacity),
            base_rate,
            staleness: 0,
            active_task: Task::Vla,
            faults: Vec::new(),
            check_cooldown: 0,
            peer_cursor: 0,
            check_target: None,
            vla_ticks: 0,
        }
    }

    pub fn has_active(&self, id: FaultId) -> bool {
        self.faults.iter().any(|f| f.kind.id == id && f.is_active())
    }

    /// Adds a fault unless one of the same kind is already active.
    /// Returns whether the fault was added.
    pub fn add_fault(&mut self, kind: FaultKind, tick: u64) -> bool {
        if self.has_active(kind.id) {
            return false;
        }
        self.faults.push(FaultInstance {
            kind,
            injected_at: tick,
            cleared_at: None,
        });
        true
    }

    /// Clears every active fault, returning them stamped with `tick`.
    pub fn clear_faults(&mut self, tick: u64) -> Vec<FaultInstance> {
        let mut cleared = std::mem::take(&mut self.faults);
        for f in &mut cleared {
            f.cleared_at = Some(tick);
        }
        cleared
    }

    pub fn active_fault_count(&self) -> usize {
        self.faults.iter().filter(|f| f.is_active()).count()
    }

    pub fn effective_rate(&self) -> u64 {
        effective_rate(self.base_rate, self.faults.iter().filter(|f| f.is_active()).map(|f| f.kind.penalty_factor))
    }
}

/// `floor(base_rate * product(penalties))`.
pub fn effective_rate(base_rate: u64, penalties: impl IntoIterator<Item = f64>) -> u64 {
    let factor: f64 = penalties.into_iter().product();
    // the nudge absorbs representation error, e.g. 100 * 0.7 * 0.9
    (base_rate as f64 * factor + 1e-9).floor() as u64
}

/// A peer group of DSPs that monitor one another.
#[derive(Debug, Clone, PartialEq)]
pub struct Farmlet {
    pub id: usize,
    pub members: Vec<DspState>,
    /// Expected crossings arriving per member per tick.
    pub arrival_rate: f64,
    /// Common input queue, present only in shared-queue mode.
    pub shared_buffer: Option<CrossingBuffer>,
}

impl Farmlet {
    pub fn watermark_of(&self, slot: usize) -> f64 {
        match &self.shared_buffer {
            Some(b) => b.watermark(),
            None => self.members[slot].buffer.watermark(),
        }
    }

    pub fn total_fill(&self) -> u64 {
        self.shared_buffer.map_or(0, |b| b.fill())
            + self.members.iter().map(|m| m.buffer.fill()).sum::<u64>()
    }
}

/// Aggregates collected over a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunMetrics {
    pub ticks: u64,
    pub crossings_generated: u64,
    pub crossings_processed: u64,
    pub crossings_lost: u64,
    /// Crossings still queued when the run ended.
    pub residual_fill: u64,
    /// Draws that fell under the error rate, including no-op duplicates.
    pub injection_attempts: u64,
    pub faults_injected: u64,
    pub faults_cleared: u64,
    /// Sum over cleared faults of (cleared_at - injected_at).
    pub total_time_to_clear: u64,
    /// Per DSP, in global index order.
    pub fvla_tick_fraction: Vec<f64>,
}

impl RunMetrics {
    /// `None` until at least one fault has been cleared.
    pub fn mean_time_to_clear(&self) -> Option<f64> {
        (self.faults_cleared > 0).then(|| self.total_time_to_clear as f64 / self.faults_cleared as f64)
    }

    pub fn mean_fvla_tick_fraction(&self) -> f64 {
        if self.fvla_tick_fraction.is_empty() {
            return 0.0;
        }
        self.fvla_tick_fraction.iter().sum::<f64>() / self.fvla_tick_fraction.len() as f64
    }
}
