//! Fixed-width text tables in the layout of a performance/resource summary:
//! one column per backend or directive configuration.

use std::time::Duration;

use crate::bench::BenchReport;
use crate::cost_model::CycleReport;
use crate::error::Error;

pub const ITERATION_ROW: &str = "Single iteration latency";
pub const SAMPLE_ROW: &str = "Sample computation latency";

fn render_table(title: &str, header: &[String], rows: &[(String, Vec<String>)]) -> String {
    let label_w = rows
        .iter()
        .map(|(l, _)| l.chars().count())
        .max()
        .unwrap_or(0)
        .max(title.chars().count());
    let col_w: Vec<usize> = (0..header.len())
        .map(|c| {
            rows.iter()
                .map(|(_, cells)| cells[c].chars().count())
                .chain(std::iter::once(header[c].chars().count()))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    let line = |label: &str, cells: &[String]| {
        let mut s = format!("{label:<label_w$}");
        for (cell, w) in cells.iter().zip(&col_w) {
            s.push_str(&format!(" | {cell:>w$}"));
        }
        s.push('\n');
        s
    };
    out.push_str(&line(title, header));
    let rule_len = label_w + col_w.iter().map(|w| w + 3).sum::<usize>();
    out.push_str(&"-".repeat(rule_len));
    out.push('\n');
    for (label, cells) in rows {
        out.push_str(&line(label, cells));
    }
    out
}

fn fmt_duration(d: Duration) -> String {
    let us = d.as_secs_f64() * 1e6;
    if us >= 1000.0 {
        format!("{:.3} ms", us / 1000.0)
    } else {
        format!("{us:.3} us")
    }
}

fn fmt_cycles(cycles: u64, clock_mhz: Option<f64>) -> String {
    match clock_mhz {
        Some(f) => format!("{cycles} clk ({:.3} ms)", cycles as f64 / (f * 1e3)),
        None => format!("{cycles} clk"),
    }
}

/// Cycle-model table: latency rows then resource proxy rows. With a clock
/// frequency the latency cells also show milliseconds.
pub fn render_cycle_report(reports: &[CycleReport], clock_mhz: Option<f64>) -> Result<String, Error> {
    if reports.is_empty() {
        return Err(Error::Bench("nothing to render".into()));
    }
    let header: Vec<String> = reports.iter().map(|r| r.label.clone()).collect();
    let row = |label: &str, f: &dyn Fn(&CycleReport) -> String| {
        (label.to_string(), reports.iter().map(f).collect::<Vec<_>>())
    };
    let rows = vec![
        row(ITERATION_ROW, &|r| fmt_cycles(r.iter_cycles, clock_mhz)),
        row(SAMPLE_ROW, &|r| fmt_cycles(r.solve_cycles, clock_mhz)),
        row("Iterations", &|r| r.iters.to_string()),
        row("Multipliers", &|r| r.resources.mults.to_string()),
        row("Adders", &|r| r.resources.adders.to_string()),
        row("Memory banks", &|r| r.resources.mem_banks.to_string()),
    ];
    Ok(render_table("Execution time", &header, &rows))
}

/// Wall-clock table, one column per backend.
pub fn render_bench_report(report: &BenchReport) -> Result<String, Error> {
    if report.rows.is_empty() {
        return Err(Error::Bench("empty benchmark report".into()));
    }
    let header: Vec<String> = report.rows.iter().map(|r| r.backend.to_string()).collect();
    let cells = |f: &dyn Fn(&crate::bench::BenchRow) -> String| report.rows.iter().map(f).collect::<Vec<_>>();
    let rows = vec![
        (ITERATION_ROW.to_string(), cells(&|r| fmt_duration(r.per_iteration))),
        (SAMPLE_ROW.to_string(), cells(&|r| fmt_duration(r.median))),
        ("Sample latency p95".to_string(), cells(&|r| fmt_duration(r.p95))),
        ("Iterations".to_string(), cells(&|r| r.iters.to_string())),
        ("Checksum".to_string(), cells(&|r| format!("{:.12e}", r.checksum))),
    ];
    let mut out = render_table("Execution time", &header, &rows);
    out.push_str(&format!(
        "\n{} timed repetitions per backend after one warm-up; {}\n",
        report.reps - 1,
        report.env_note
    ));
    if report.failures.is_empty() {
        out.push_str("status: ok\n");
    } else {
        out.push_str("status: FAILED\n");
        for f in &report.failures {
            out.push_str(&format!("  {f}\n"));
        }
    }
    Ok(out)
}
