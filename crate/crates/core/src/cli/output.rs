//! CSV emission for sweeps and traces.
//!
//! Reals are written with at most 12 significant digits, using the shortest
//! representation that round-trips at that precision. Missing values are
//! empty fields. Every line ends with `\n`.

use std::io::{self, Write};

use thiserror::Error;

use crate::engine::TraceRecord;
use crate::model::RunMetrics;
use crate::sweep::SweepResult;

pub const CELLS_HEADER: &str = "error_rate,d_value,replicate,crossings_processed,crossings_lost,faults_injected,faults_cleared,mean_time_to_clear,mean_fvla_tick_fraction";
pub const OPTIMUM_HEADER: &str = "error_rate,optimum_d,throughput_at_optimum";
pub const TRACE_HEADER: &str = "tick,farmlet,dsp,task,watermark,staleness,active_fault_count,processed";

#[derive(Debug, Error)]
#[error("write failed after {written} bytes: {source}")]
pub struct EmitError {
    pub written: u64,
    #[source]
    pub source: io::Error,
}

/// Formats a real with up to 12 significant digits.
pub fn fmt_real(x: f64) -> String {
    if !x.is_finite() {
        return String::new();
    }
    let shortest = format!("{x}");
    let digits = shortest
        .chars()
        .filter(char::is_ascii_digit)
        .skip_while(|c| *c == '0')
        .count();
    if digits <= 12 {
        return shortest;
    }
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    format!("{rounded}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

struct Counting<W> {
    inner: W,
    written: u64,
}

impl<W: Write> Counting<W> {
    fn line(&mut self, s: &str) -> Result<(), EmitError> {
        let mut buf = String::with_capacity(s.len() + 1);
        buf.push_str(s);
        buf.push('\n');
        // write piecewise so the count reflects partial progress
        let mut rest = buf.as_bytes();
        while !rest.is_empty() {
            match self.inner.write(rest) {
                Ok(0) => {
                    return Err(self.fail(io::Error::new(io::ErrorKind::WriteZero, "sink accepted no bytes")))
                }
                Ok(n) => {
                    self.written += n as u64;
                    rest = &rest[n..];
                }
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(self.fail(e)),
            }
        }
        Ok(())
    }

    fn fail(&self, source: io::Error) -> EmitError {
        EmitError {
            written: self.written,
            source,
        }
    }

    fn finish(mut self) -> Result<u64, EmitError> {
        match self.inner.flush() {
            Ok(()) => Ok(self.written),
            Err(e) => Err(self.fail(e)),
        }
    }
}

fn cell_row(error_rate: f64, d: f64, replicate: u32, m: &RunMetrics) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        fmt_real(error_rate),
        fmt_real(d),
        replicate,
        m.crossings_processed,
        m.crossings_lost,
        m.faults_injected,
        m.faults_cleared,
        fmt_opt(m.mean_time_to_clear()),
        fmt_real(m.mean_fvla_tick_fraction()),
    )
}

/// Writes the per-cell table. Rows follow (error rate, d, replicate).
pub fn write_cells_csv<W: Write>(result: &SweepResult, sink: W) -> Result<u64, EmitError> {
    let mut out = Counting { inner: sink, written: 0 };
    out.line(CELLS_HEADER)?;
    let mut cells: Vec<_> = result.cells.iter().collect();
    cells.sort_by(|a, b| {
        a.error_rate
            .total_cmp(&b.error_rate)
            .then(a.d.total_cmp(&b.d))
            .then(a.replicate.cmp(&b.replicate))
    });
    for c in cells {
        out.line(&cell_row(c.error_rate, c.d, c.replicate, &c.metrics))?;
    }
    out.finish()
}

/// Writes the optimum table, one row per error rate.
pub fn write_optimum_csv<W: Write>(result: &SweepResult, sink: W) -> Result<u64, EmitError> {
    let mut out = Counting { inner: sink, written: 0 };
    out.line(OPTIMUM_HEADER)?;
    let mut rows: Vec<_> = result.optimum.iter().collect();
    rows.sort_by(|a, b| a.error_rate.total_cmp(&b.error_rate));
    for o in rows {
        out.line(&format!(
            "{},{},{}",
            fmt_real(o.error_rate),
            fmt_real(o.d),
            fmt_real(o.throughput)
        ))?;
    }
    out.finish()
}

/// Writes both sweep tables and returns the total byte count.
pub fn emit_sweep_csv<A: Write, B: Write>(
    result: &SweepResult,
    cells_sink: A,
    optimum_sink: B,
) -> Result<u64, EmitError> {
    let a = write_cells_csv(result, cells_sink)?;
    let b = write_optimum_csv(result, optimum_sink).map_err(|e| EmitError {
        written: a + e.written,
        source: e.source,
    })?;
    Ok(a + b)
}

pub fn write_trace_csv<W: Write>(trace: &[TraceRecord], sink: W) -> Result<u64, EmitError> {
    let mut out = Counting { inner: sink, written: 0 };
    out.line(TRACE_HEADER)?;
    for r in trace {
        out.line(&format!(
            "{},{},{},{},{},{},{},{}",
            r.tick,
            r.farmlet,
            r.dsp,
            r.task.as_str(),
            fmt_real(r.watermark),
            r.staleness,
            r.active_fault_count,
            r.processed
        ))?;
    }
    out.finish()
}

/// Human-readable summary of one run.
pub fn metrics_report(m: &RunMetrics) -> String {
    let fr = &m.fvla_tick_fraction;
    let (lo, hi) = fr
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    format!(
        "ticks                   {}\n\
         crossings_generated     {}\n\
         crossings_processed     {}\n\
         crossings_lost          {}\n\
         residual_fill           {}\n\
         injection_attempts      {}\n\
         faults_injected         {}\n\
         faults_cleared          {}\n\
         mean_time_to_clear      {}\n\
         fvla_tick_fraction      mean {} min {} max {}\n",
        m.ticks,
        m.crossings_generated,
        m.crossings_processed,
        m.crossings_lost,
        m.residual_fill,
        m.injection_attempts,
        m.faults_injected,
        m.faults_cleared,
        m.mean_time_to_clear().map_or("n/a".to_string(), fmt_real),
        fmt_real(m.mean_fvla_tick_fraction()),
        fmt_real(if fr.is_empty() { 0.0 } else { lo }),
        fmt_real(hi),
    )
}
