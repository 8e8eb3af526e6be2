//! Discrete-time simulation loop.
//!
//! Every tick runs five phases in a fixed order:
//!
//! 1. arrivals: each buffer receives `floor(rate)` crossings plus one more
//!    with probability `frac(rate)`, drawn from the receiving DSP's stream;
//! 2. arbitration: idle DSPs pick PA or VLA from their own watermark and
//!    staleness, DSPs mid-check stay VLA;
//! 3. action: PA DSPs drain their buffer at their effective rate, then VLA
//!    DSPs start or continue a check on their peers;
//! 4. injection: every DSP may acquire a new fault;
//! 5. bookkeeping: staleness, VLA tick counts and metrics.
//!
//! A fault injected at tick `t` therefore first slows its DSP at `t + 1`,
//! and a check completing at `t` clears faults stamped `cleared_at = t`.

use thiserror::Error;

use crate::model::{CrossingBuffer, DspState, FaultInstance, FaultKind, Farmlet, PenaltyTable, RunMetrics};
use crate::prng::{McwState, DEFAULT_W, DEFAULT_Z};
use crate::scheduler::{choose_task, vla_time_budget, BudgetParams, SchedulerParams, Task};

/// Constraint violation in a run configuration. `key` is the config path of
/// the offending field, e.g. `[engine].ticks`.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{key}: {reason}")]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

/// Which peers a completed check clears.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CheckFanout {
    /// One peer per check, cycling through the farmlet.
    #[default]
    RoundRobin,
    /// Every other member of the farmlet.
    AllPeers,
}

impl CheckFanout {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckFanout::RoundRobin => "round-robin",
            CheckFanout::AllPeers => "all-peers",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "round-robin" => Some(CheckFanout::RoundRobin),
            "all-peers" => Some(CheckFanout::AllPeers),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QueueMode {
    /// Each DSP owns its buffer and its watermark.
    #[default]
    PerDsp,
    /// Members pull from one farmlet queue and share its watermark.
    Shared,
}

impl QueueMode {
    pub fn as_str(self) -> &'static str {
        match self {
            QueueMode::PerDsp => "per-dsp",
            QueueMode::Shared => "shared",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "per-dsp" => Some(QueueMode::PerDsp),
            "shared" => Some(QueueMode::Shared),
            _ => None,
        }
    }
}

/// Default arrival rate as a fraction of the fault-free processing rate.
pub const DEFAULT_LOAD: f64 = 0.6;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Per-DSP buffer capacity (per member in shared mode).
    pub capacity: u64,
    pub base_rate: u64,
    /// Crossings per member per tick; `None` means
    /// [`DEFAULT_LOAD`] * base_rate.
    pub arrival_rate: Option<f64>,
    pub penalties: PenaltyTable,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            capacity: 1000,
            base_rate: 20,
            arrival_rate: None,
            penalties: PenaltyTable::default(),
        }
    }
}

impl ModelParams {
    pub fn arrival_rate(&self) -> f64 {
        self.arrival_rate.unwrap_or(DEFAULT_LOAD * self.base_rate as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub n_farmlets: usize,
    pub dsps_per_farmlet: usize,
    pub ticks: u64,
    /// Per-DSP per-tick fault probability.
    pub error_rate: f64,
    /// Ticks a check occupies its DSP.
    pub check_cost: u64,
    pub check_fanout: CheckFanout,
    pub queue_mode: QueueMode,
    pub scheduler: SchedulerParams,
    /// Cap VLA ticks per interval at [`vla_time_budget`].
    pub budget_cap: bool,
    pub budget: BudgetParams,
    pub model: ModelParams,
    pub seed: (u32, u32),
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            n_farmlets: 10,
            dsps_per_farmlet: 5,
            ticks: 10_000,
            error_rate: 0.01,
            check_cost: 1,
            check_fanout: CheckFanout::default(),
            queue_mode: QueueMode::default(),
            scheduler: SchedulerParams::default(),
            budget_cap: false,
            budget: BudgetParams::default(),
            model: ModelParams::default(),
            seed: (DEFAULT_Z, DEFAULT_W),
        }
    }
}

impl EngineConfig {
    pub fn total_dsps(&self) -> usize {
        self.n_farmlets * self.dsps_per_farmlet
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |k: &str, r: String| Err(ConfigError::new(k, r));
        if self.n_farmlets == 0 {
            return bad("[engine].n_farmlets", "must be >= 1".into());
        }
        if self.dsps_per_farmlet < 2 {
            return bad(
                "[engine].dsps_per_farmlet",
                format!("must be >= 2, got {}", self.dsps_per_farmlet),
            );
        }
        if u32::try_from(self.total_dsps()).is_err() {
            return bad("[engine].n_farmlets", "farm too large".into());
        }
        if self.ticks == 0 {
            return bad("[engine].ticks", "must be >= 1, got 0".into());
        }
        if !(0.0..=1.0).contains(&self.error_rate) {
            return bad(
                "[engine].error_rate",
                format!("must lie in [0, 1], got {}", self.error_rate),
            );
        }
        if self.check_cost == 0 {
            return bad("[engine].check_cost", "must be >= 1, got 0".into());
        }
        if self.budget_cap && self.budget.interval == 0 {
            return bad("[engine].budget_interval", "must be >= 1 when budget_cap is on".into());
        }
        if self.seed == (0, 0) {
            return bad("[engine].seed", "(0, 0) is not a valid seed".into());
        }
        if let Err((field, reason)) = self.scheduler.validate() {
            return bad(&format!("[scheduler].{field}"), reason);
        }
        if self.model.capacity == 0 {
            return bad("[model].capacity", "must be >= 1, got 0".into());
        }
        if self.model.base_rate == 0 {
            return bad("[model].base_rate", "must be >= 1, got 0".into());
        }
        let rate = self.model.arrival_rate();
        if !(rate.is_finite() && rate >= 0.0) {
            return bad(
                "[model].arrival_rate",
                format!("must be a finite real >= 0, got {rate}"),
            );
        }
        if let Err((id, p)) = self.model.penalties.validate() {
            return bad(
                &format!("[model].penalty_{id}"),
                format!("must lie in (0, 1), got {p}"),
            );
        }
        Ok(())
    }
}

/// Result of one injection draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Injection {
    /// The draw fell under the error rate.
    pub attempted: bool,
    /// A new fault instance was added (false for an already-active kind).
    pub injected: bool,
}

/// With probability `error_rate` adds a uniformly drawn fault kind to `dsp`.
pub fn inject_faults(
    dsp: &mut DspState,
    error_rate: f64,
    rng: &mut McwState,
    tick: u64,
    catalog: &[FaultKind],
) -> Injection {
    if rng.next_unit() >= error_rate {
        return Injection::default();
    }
    let pick = (rng.next_unit() * catalog.len() as f64) as usize;
    let kind = catalog[pick.min(catalog.len() - 1)];
    Injection {
        attempted: true,
        injected: dsp.add_fault(kind, tick),
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CheckOutcome {
    /// The check finished this tick.
    pub completed: bool,
    pub cleared: Vec<FaultInstance>,
}

/// Starts or continues a check by member `checker` of `farmlet`.
///
/// A check started at tick `t` completes at `t + check_cost - 1`; on
/// completion the targeted peers lose all active faults and the checker's
/// staleness resets.
///
/// # Panics
/// If the farmlet has fewer than two members.
pub fn perform_fvla_check(
    farmlet: &mut Farmlet,
    checker: usize,
    tick: u64,
    check_cost: u64,
    fanout: CheckFanout,
) -> CheckOutcome {
    let n = farmlet.members.len();
    assert!(n >= 2, "farmlet {} has no peers to check", farmlet.id);
    let dsp = &mut farmlet.members[checker];
    if dsp.check_cooldown == 0 {
        dsp.check_cooldown = check_cost;
        dsp.check_target = match fanout {
            CheckFanout::RoundRobin => {
                let t = (checker + 1 + dsp.peer_cursor % (n - 1)) % n;
                dsp.peer_cursor = (dsp.peer_cursor + 1) % (n - 1);
                Some(t)
            }
            CheckFanout::AllPeers => None,
        };
    }
    dsp.check_cooldown -= 1;
    if dsp.check_cooldown > 0 {
        return CheckOutcome::default();
    }

    dsp.staleness = 0;
    let target = dsp.check_target.take();
    let mut cleared = Vec::new();
    for (slot, peer) in farmlet.members.iter_mut().enumerate() {
        let hit = match target {
            Some(t) => slot == t,
            None => slot != checker,
        };
        if hit {
            cleared.extend(peer.clear_faults(tick));
        }
    }
    CheckOutcome {
        completed: true,
        cleared,
    }
}

/// One per-tick, per-DSP trace row. `watermark` and `staleness` are the
/// values the DSP arbitrated on; `active_fault_count` is taken after
/// injection.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub tick: u64,
    pub farmlet: usize,
    pub dsp: usize,
    pub task: Task,
    pub watermark: f64,
    pub staleness: u64,
    pub active_fault_count: usize,
    pub processed: u64,
}

pub struct Simulation {
    config: EngineConfig,
    catalog: Vec<FaultKind>,
    farm: Vec<Farmlet>,
    rngs: Vec<McwState>,
    metrics: RunMetrics,
    tick: u64,
    vla_budget: u64,
    interval_vla: Vec<u64>,
}

impl Simulation {
    pub fn new(config: EngineConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let per = config.dsps_per_farmlet;
        let m = &config.model;
        let rngs = (0..config.total_dsps())
            .map(|i| McwState::substream(config.seed.0, config.seed.1, i as u32))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ConfigError::new("[engine].seed", e.to_string()))?;
        let farm = (0..config.n_farmlets)
            .map(|f| Farmlet {
                id: f,
                members: (0..per)
                    .map(|s| DspState::new(f * per + s, m.base_rate, m.capacity))
                    .collect(),
                arrival_rate: m.arrival_rate(),
                shared_buffer: match config.queue_mode {
                    QueueMode::PerDsp => None,
                    QueueMode::Shared => Some(CrossingBuffer::new(m.capacity * per as u64)),
                },
            })
            .collect();
        Ok(Self {
            catalog: m.penalties.catalog(),
            vla_budget: vla_time_budget(&config.budget),
            interval_vla: vec![0; config.total_dsps()],
            metrics: RunMetrics {
                fvla_tick_fraction: vec![0.0; config.total_dsps()],
                ..Default::default()
            },
            farm,
            rngs,
            tick: 0,
            config,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn farm(&self) -> &[Farmlet] {
        &self.farm
    }

    pub fn farm_mut(&mut self) -> &mut [Farmlet] {
        &mut self.farm
    }

    /// Index of the next tick to execute.
    pub fn current_tick(&self) -> u64 {
        self.tick
    }

    pub fn metrics(&self) -> &RunMetrics {
        &self.metrics
    }

    /// Executes one tick, appending per-DSP rows to `trace` when given.
    pub fn step(&mut self, mut trace: Option<&mut Vec<TraceRecord>>) {
        let tick = self.tick;
        let cfg = &self.config;
        let per = cfg.dsps_per_farmlet;
        let metrics = &mut self.metrics;
        let mut processed_now = vec![0u64; per];
        let mut arbitration = vec![(0.0f64, 0u64); per];

        if cfg.budget_cap && tick.is_multiple_of(cfg.budget.interval) {
            self.interval_vla.fill(0);
        }

        for farmlet in &mut self.farm {
            let base = farmlet.id * per;
            let rngs = &mut self.rngs[base..base + per];

            // arrivals
            let whole = farmlet.arrival_rate.floor();
            let frac = farmlet.arrival_rate - whole;
            for (slot, rng) in rngs.iter_mut().enumerate() {
                let mut n = whole as u64;
                if frac > 0.0 && rng.next_unit() < frac {
                    n += 1;
                }
                metrics.crossings_generated += n;
                let buf = match farmlet.shared_buffer.as_mut() {
                    Some(b) => b,
                    None => &mut farmlet.members[slot].buffer,
                };
                metrics.crossings_lost += buf.push(n);
            }

            // arbitration
            for slot in 0..per {
                let w = farmlet.watermark_of(slot);
                let dsp = &mut farmlet.members[slot];
                arbitration[slot] = (w, dsp.staleness);
                dsp.active_task = if dsp.check_cooldown > 0 {
                    Task::Vla
                } else if cfg.budget_cap && self.interval_vla[dsp.index] >= self.vla_budget {
                    Task::Pa
                } else {
                    choose_task(w, dsp.staleness as f64, &cfg.scheduler)
                };
            }

            // action: PA first so this tick's clearing cannot speed up this tick's processing
            for slot in 0..per {
                let dsp = &mut farmlet.members[slot];
                processed_now[slot] = 0;
                if dsp.active_task == Task::Pa {
                    let rate = dsp.effective_rate();
                    let buf = match farmlet.shared_buffer.as_mut() {
                        Some(b) => b,
                        None => &mut dsp.buffer,
                    };
                    processed_now[slot] = buf.take(rate);
                    metrics.crossings_processed += processed_now[slot];
                }
            }
            let mut completed = vec![false; per];
            for slot in 0..per {
                if farmlet.members[slot].active_task == Task::Vla {
                    let out = perform_fvla_check(farmlet, slot, tick, cfg.check_cost, cfg.check_fanout);
                    completed[slot] = out.completed;
                    metrics.faults_cleared += out.cleared.len() as u64;
                    metrics.total_time_to_clear += out
                        .cleared
                        .iter()
                        .filter_map(FaultInstance::time_to_clear)
                        .sum::<u64>();
                }
            }

            // injection
            for (dsp, rng) in farmlet.members.iter_mut().zip(rngs.iter_mut()) {
                let inj = inject_faults(dsp, cfg.error_rate, rng, tick, &self.catalog);
                metrics.injection_attempts += u64::from(inj.attempted);
                metrics.faults_injected += u64::from(inj.injected);
            }

            // bookkeeping
            for (slot, dsp) in farmlet.members.iter_mut().enumerate() {
                if !completed[slot] {
                    dsp.staleness += 1;
                }
                if dsp.active_task == Task::Vla {
                    dsp.vla_ticks += 1;
                    self.interval_vla[dsp.index] += 1;
                }
            }

            if let Some(out) = trace.as_deref_mut() {
                for (slot, dsp) in farmlet.members.iter().enumerate() {
                    out.push(TraceRecord {
                        tick,
                        farmlet: farmlet.id,
                        dsp: dsp.index,
                        task: dsp.active_task,
                        watermark: arbitration[slot].0,
                        staleness: arbitration[slot].1,
                        active_fault_count: dsp.active_fault_count(),
                        processed: processed_now[slot],
                    });
                }
            }
        }

        self.tick += 1;
        self.metrics.ticks = self.tick;
        debug_assert!(self.invariants_hold(), "model invariant violated at tick {tick}");
    }

    /// Conservation, buffer bounds and fault accounting.
    pub fn invariants_hold(&self) -> bool {
        let m = &self.metrics;
        let fill = self.total_fill();
        let conserved = m.crossings_processed + m.crossings_lost + fill == m.crossings_generated;
        let bounded = self.farm.iter().all(|f| {
            f.shared_buffer.is_none_or(|b| b.fill() <= b.capacity())
                && f.members.iter().all(|d| {
                    d.buffer.fill() <= d.buffer.capacity()
                        && d.effective_rate() <= d.base_rate
                        && d.faults.iter().all(|x| x.is_active())
                })
        });
        conserved && bounded && m.faults_cleared <= m.faults_injected
    }

    pub fn total_fill(&self) -> u64 {
        self.farm.iter().map(Farmlet::total_fill).sum()
    }

    /// Final metrics for the ticks executed so far.
    pub fn finish(mut self) -> RunMetrics {
        self.metrics.residual_fill = self.total_fill();
        let ticks = self.tick.max(1) as f64;
        for farmlet in &self.farm {
            for dsp in &farmlet.members {
                self.metrics.fvla_tick_fraction[dsp.index] = dsp.vla_ticks as f64 / ticks;
            }
        }
        self.metrics
    }
}

/// Runs `config.ticks` ticks and returns the final metrics.
pub fn run(config: &EngineConfig) -> Result<RunMetrics, ConfigError> {
    let mut sim = Simulation::new(config.clone())?;
    for _ in 0..config.ticks {
        sim.step(None);
    }
    Ok(sim.finish())
}

/// Like [`run`], also returning one trace row per DSP per tick.
pub fn run_traced(config: &EngineConfig) -> Result<(RunMetrics, Vec<TraceRecord>), ConfigError> {
    let mut sim = Simulation::new(config.clone())?;
    let mut trace = Vec::with_capacity(config.ticks as usize * config.total_dsps());
    for _ in 0..config.ticks {
        sim.step(Some(&mut trace));
    }
    Ok((sim.finish(), trace))
}
