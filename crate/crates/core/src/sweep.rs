//! Steepness × error-rate grid sweeps and optimum location.

use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{self, ConfigError, EngineConfig};
use crate::model::RunMetrics;
use crate::prng::splitmix64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("invalid sweep grid: {key}: {reason}")]
    Grid { key: &'static str, reason: String },
    #[error("cell (error_rate = {error_rate}, d = {d}, replicate = {replicate}): {source}")]
    Cell {
        error_rate: f64,
        d: f64,
        replicate: u32,
        #[source]
        source: ConfigError,
    },
    #[error("no cells for error rate {0}")]
    UnknownErrorRate(f64),
    #[error("optimum d = {d_star} has no grid point {side} it by factor {factor}")]
    Boundary {
        d_star: f64,
        factor: f64,
        side: &'static str,
    },
    #[error("asymmetry factor must exceed 1, got {0}")]
    Factor(f64),
    #[error("failed to start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub d_values: Vec<f64>,
    pub error_rates: Vec<f64>,
    pub replicates: u32,
}

impl Default for SweepGrid {
    /// Twelve log-spaced steepness values over `[1e-4, 3]` and the five decade
    /// error rates `1e-5 ..= 1e-1`.
    fn default() -> Self {
        Self {
            d_values: log_spaced(1e-4, 3.0, 12),
            error_rates: vec![1e-5, 1e-4, 1e-3, 1e-2, 1e-1],
            replicates: 1,
        }
    }
}

/// `n` points from `lo` to `hi` inclusive, evenly spaced in log scale. The
/// endpoints are returned exactly.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            let step = (b - a) / (n - 1) as f64;
            (0..n)
                .map(|i| match i {
                    0 => lo,
                    i if i == n - 1 => hi,
                    i => (a + step * i as f64).exp(),
                })
                .collect()
        }
    }
}

impl SweepGrid {
    pub fn len(&self) -> usize {
        self.d_values.len() * self.error_rates.len() * self.replicates as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let grid = |key, reason: String| Err(SweepError::Grid { key, reason });
        if self.d_values.is_empty() {
            return grid("[sweep].d_values", "must not be empty".into());
        }
        if self.error_rates.is_empty() {
            return grid("[sweep].error_rates", "must not be empty".into());
        }
        if self.replicates == 0 {
            return grid("[sweep].replicates", "must be >= 1".into());
        }
        if let Some(d) = self.d_values.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return grid("[sweep].d_values", format!("must be positive, got {d}"));
        }
        if let Some(e) = self.error_rates.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return grid("[sweep].error_rates", format!("must lie in [0, 1], got {e}"));
        }
        if self.d_values.windows(2).any(|w| w[0] >= w[1]) {
            return grid("[sweep].d_values", "must be strictly increasing".into());
        }
        if self.error_rates.windows(2).any(|w| w[0] >= w[1]) {
            return grid("[sweep].error_rates", "must be strictly increasing".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub error_rate: f64,
    pub d: f64,
    pub replicate: u32,
    pub seed: (u32, u32),
    pub metrics: RunMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub error_rate: f64,
    pub d: f64,
    pub throughput: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Ordered by (error rate, d, replicate), ascending.
    pub cells: Vec<SweepCell>,
    /// One entry per error rate, ascending.
    pub optimum: Vec<Optimum>,
}

/// Seed of one cell: the base seed XOR a SplitMix64 hash of the cell's grid
/// coordinates.
pub fn cell_seed(base: (u32, u32), e_index: usize, d_index: usize, replicate: u32) -> (u32, u32) {
    let key = ((e_index as u64) << 40) ^ ((d_index as u64) << 20) ^ u64::from(replicate);
    let h = splitmix64(key);
    (base.0 ^ (h >> 32) as u32, base.1 ^ h as u32)
}

/// Engine configuration of one cell.
pub fn cell_config(
    base: &EngineConfig,
    grid: &SweepGrid,
    e_index: usize,
    d_index: usize,
    replicate: u32,
) -> EngineConfig {
    let mut cfg = base.clone();
    cfg.error_rate = grid.error_rates[e_index];
    cfg.scheduler.d = grid.d_values[d_index];
    cfg.seed = cell_seed(base.seed, e_index, d_index, replicate);
    cfg
}

/// Runs every cell of the grid on up to `parallel` worker threads.
///
/// The result is identical for any `parallel`; cells are merged in grid
/// order.
pub fn run_sweep(
    grid: &SweepGrid,
    base: &EngineConfig,
    parallel: usize,
) -> Result<SweepResult, SweepError> {
    grid.validate()?;
    let jobs: Vec<(usize, usize, u32)> = (0..grid.error_rates.len())
        .flat_map(|e| {
            (0..grid.d_values.len()).flat_map(move |d| (0..grid.replicates).map(move |r| (e, d, r)))
        })
        .collect();

    let run_one = |&(e, d, r): &(usize, usize, u32)| -> Result<SweepCell, SweepError> {
        let cfg = cell_config(base, grid, e, d, r);
        let metrics = engine::run(&cfg).map_err(|source| SweepError::Cell {
            error_rate: cfg.error_rate,
            d: cfg.scheduler.d,
            replicate: r,
            source,
        })?;
        Ok(SweepCell {
            error_rate: cfg.error_rate,
            d: cfg.scheduler.d,
            replicate: r,
            seed: cfg.seed,
            metrics,
        })
    };

    let cells = if parallel <= 1 {
        jobs.iter().map(run_one).collect::<Result<Vec<_>, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallel)
            .build()
            .map_err(|e| SweepError::Pool(e.to_string()))?;
        pool.install(|| jobs.par_iter().map(run_one).collect::<Result<Vec<_>, _>>())?
    };

    let optimum = grid
        .error_rates
        .iter()
        .map(|&e| {
            find_optimum_d(&cells, e).map(|(d, throughput)| Optimum {
                error_rate: e,
                d,
                throughput,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepResult { cells, optimum })
}

/// Mean crossings processed per d for one error rate, in ascending d order.
pub fn throughput_curve(cells: &[SweepCell], error_rate: f64) -> Vec<(f64, f64)> {
    let mut curve: Vec<(f64, f64, u32)> = Vec::new();
    for c in cells.iter().filter(|c| c.error_rate == error_rate) {
        match curve.iter_mut().find(|(d, _, _)| *d == c.d) {
            Some(slot) => {
                slot.1 += c.metrics.crossings_processed as f64;
                slot.2 += 1;
            }
            None => curve.push((c.d, c.metrics.crossings_processed as f64, 1)),
        }
    }
    curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    curve.into_iter().map(|(d, sum, n)| (d, sum / f64::from(n))).collect()
}

/// The d with the highest mean throughput at `error_rate`; ties go to the
/// smaller d.
pub fn find_optimum_d(cells: &[SweepCell], error_rate: f64) -> Result<(f64, f64), SweepError> {
    throughput_curve(cells, error_rate)
        .into_iter()
        .fold(None, |best: Option<(f64, f64)>, (d, t)| match best {
            Some((_, bt)) if bt >= t => best,
            _ => Some((d, t)),
        })
        .ok_or(SweepError::UnknownErrorRate(error_rate))
}

/// Throughput at the nearest grid point at or above `d* · factor` divided by
/// throughput at the nearest grid point at or below `d* / factor`.
///
/// Values above 1 mean over-monitoring costs less than under-monitoring.
pub fn asymmetry_ratio(cells: &[SweepCell], error_rate: f64, factor: f64) -> Result<f64, SweepError> {
    if factor.partial_cmp(&1.0) != Some(std::cmp::Ordering::Greater) {
        return Err(SweepError::Factor(factor));
    }
    let (d_star, _) = find_optimum_d(cells, error_rate)?;
    let curve = throughput_curve(cells, error_rate);
    // relative slack so that exactly representable multiples match
    let tol = 1e-9;
    let hi_target = d_star * factor;
    let lo_target = d_star / factor;
    let above = curve
        .iter()
        .find(|(d, _)| *d >= hi_target * (1.0 - tol))
        .ok_or(SweepError::Boundary {
            d_star,
            factor,
            side: "above",
        })?;
    let below = curve
        .iter()
        .rev()
        .find(|(d, _)| *d <= lo_target * (1.0 + tol))
        .ok_or(SweepError::Boundary {
            d_star,
            factor,
            side: "below",
        })?;
    Ok(above.1 / below.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(e: f64, d: f64, processed: u64) -> SweepCell {
        SweepCell {
            error_rate: e,
            d,
            replicate: 0,
            seed: (1, 1),
            metrics: RunMetrics {
                crossings_processed: processed,
                ..Default::default()
            },
        }
    }

    #[test]
    fn log_spacing_endpoints_and_ratio() {
        let v = log_spaced(1e-4, 3.0, 12);
        assert_eq!(v.len(), 12);
        assert_eq!(v[0], 1e-4);
        assert_eq!(v[11], 3.0);
        let r = (3.0f64 / 1e-4).powf(1.0 / 11.0);
        for w in v.windows(2) {
            assert!((w[1] / w[0] - r).abs() < 1e-9);
        }
    }

    #[test]
    fn default_grid_has_sixty_cells() {
        let g = SweepGrid::default();
        assert_eq!(g.len(), 60);
        g.validate().unwrap();
    }

    #[test]
    fn grid_rejects_unsorted() {
        let g = SweepGrid {
            d_values: vec![1.0, 0.5],
            ..Default::default()
        };
        assert!(matches!(g.validate(), Err(SweepError::Grid { key: "[sweep].d_values", .. })));
    }

    #[test]
    fn optimum_of_synthetic_tables() {
        let t = [cell(0.1, 1.0, 100), cell(0.1, 2.0, 300), cell(0.1, 3.0, 200)];
        assert_eq!(find_optimum_d(&t, 0.1).unwrap(), (2.0, 300.0));
        let tie = [cell(0.1, 1.0, 300), cell(0.1, 2.0, 300)];
        assert_eq!(find_optimum_d(&tie, 0.1).unwrap(), (1.0, 300.0));
        let single = [cell(0.01, 0.5, 7)];
        assert_eq!(find_optimum_d(&single, 0.01).unwrap(), (0.5, 7.0));
        assert_eq!(find_optimum_d(&single, 0.1), Err(SweepError::UnknownErrorRate(0.1)));
    }

    #[test]
    fn optimum_averages_replicates() {
        let mut t = vec![cell(0.1, 1.0, 100), cell(0.1, 1.0, 300), cell(0.1, 2.0, 190)];
        t[1].replicate = 1;
        assert_eq!(find_optimum_d(&t, 0.1).unwrap(), (1.0, 200.0));
    }

    #[test]
    fn asymmetry_fixtures() {
        let sym = [cell(0.1, 0.1, 50), cell(0.1, 1.0, 100), cell(0.1, 10.0, 50)];
        assert_eq!(asymmetry_ratio(&sym, 0.1, 10.0).unwrap(), 1.0);
        let skew = [cell(0.1, 0.1, 40), cell(0.1, 1.0, 100), cell(0.1, 10.0, 80)];
        assert_eq!(asymmetry_ratio(&skew, 0.1, 10.0).unwrap(), 2.0);
    }

    #[test]
    fn asymmetry_boundary_names_side() {
        let t = [cell(0.1, 1.0, 100), cell(0.1, 10.0, 50)];
        assert!(matches!(
            asymmetry_ratio(&t, 0.1, 10.0),
            Err(SweepError::Boundary { side: "below", .. })
        ));
        let t = [cell(0.1, 0.1, 50), cell(0.1, 1.0, 100)];
        assert!(matches!(
            asymmetry_ratio(&t, 0.1, 10.0),
            Err(SweepError::Boundary { side: "above", .. })
        ));
    }

    #[test]
    fn cell_seeds_differ() {
        let base = (362_436_069, 521_288_629);
        let mut seen = std::collections::HashSet::new();
        for e in 0..5 {
            for d in 0..12 {
                for r in 0..3 {
                    assert!(seen.insert(cell_seed(base, e, d, r)));
                }
            }
        }
    }
}
