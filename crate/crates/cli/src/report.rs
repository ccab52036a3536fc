//! The structured run report: plain text, fixed section and key order, so
//! two reports diff cleanly and the [config] section reloads as a config
//! file.

use std::fmt::Write as _;
use std::time::Duration;

use tagparse_core::eval::AccuracyReport;
use tagparse_core::solver::SolveReport;

use crate::config::RunConfig;

#[derive(Debug, Default)]
pub struct StageTimings {
    pub entries: Vec<(&'static str, Duration)>,
}

impl StageTimings {
    pub fn push(&mut self, stage: &'static str, elapsed: Duration) {
        self.entries.push((stage, elapsed));
    }
}

/// Everything a run wants to report; optional parts simply print nothing.
#[derive(Debug, Default)]
pub struct RunReport {
    pub command: &'static str,
    pub config: Option<RunConfig>,
    pub inputs: Vec<(&'static str, String)>,
    pub solve: Option<SolveReport>,
    pub zero_rows: Option<usize>,
    pub timings: StageTimings,
    pub accuracy: Option<AccuracyReport>,
}

impl RunReport {
    pub fn new(command: &'static str) -> Self {
        RunReport {
            command,
            ..Default::default()
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[run]");
        let _ = writeln!(out, "tool = tagparse {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "command = {}", self.command);
        if let Some(config) = &self.config {
            let _ = writeln!(out, "[config]");
            out.push_str(&config.echo());
        }
        if !self.inputs.is_empty() {
            let _ = writeln!(out, "[inputs]");
            for (key, value) in &self.inputs {
                let _ = writeln!(out, "{key} = {value}");
            }
        }
        if let Some(solve) = &self.solve {
            let _ = writeln!(out, "[solve]");
            let _ = writeln!(out, "iterations = {}", solve.iterations);
            let _ = writeln!(out, "converged = {}", solve.converged);
            let _ = writeln!(
                out,
                "final_relative_change = {}",
                solve.final_relative_change
            );
            for (i, obj) in solve.objective_trace.iter().enumerate() {
                let _ = writeln!(out, "objective_{i} = {obj}");
            }
        }
        if let Some(zero_rows) = self.zero_rows {
            let _ = writeln!(out, "[assign]");
            let _ = writeln!(out, "zero_rows = {zero_rows}");
        }
        if !self.timings.entries.is_empty() {
            let _ = writeln!(out, "[timing]");
            for (stage, elapsed) in &self.timings.entries {
                let _ = writeln!(out, "{stage}_ms = {}", elapsed.as_millis());
            }
        }
        if let Some(accuracy) = &self.accuracy {
            let _ = writeln!(out, "[accuracy]");
            for (c, acc) in accuracy.per_category.iter().enumerate() {
                match acc {
                    Some(v) => {
                        let _ = writeln!(out, "category_{c} = {v}");
                    }
                    None => {
                        let _ = writeln!(out, "category_{c} = absent");
                    }
                }
            }
            let _ = writeln!(out, "average = {}", accuracy.average);
        }
        out
    }
}
