//! Verification harness: scenario registry, runner and report emission.

pub mod config;
pub mod error;
pub mod plot;
pub mod report;
pub mod scenarios;

use std::time::Instant;

use rayon::prelude::*;

pub use config::{FileConfig, RunConfig};
pub use error::{HarnessError, Result};
pub use report::{Aggregate, Check, CheckVerdict, Provenance, Report};
pub use scenarios::{registry, Scenario};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn execute(s: &Scenario, cfg: &RunConfig) -> Report {
    let t = Instant::now();
    let checks = (s.run)(cfg);
    let pass = !checks.is_empty() && checks.iter().all(Check::passes);
    Report {
        scenario: s.id.to_string(),
        description: s.description.to_string(),
        tags: s.tags.iter().map(|t| t.to_string()).collect(),
        checks,
        pass,
        wall_time_s: t.elapsed().as_secs_f64(),
        version: VERSION.to_string(),
        config_hash: cfg.hash(),
    }
}

pub fn run_scenario(id: &str, cfg: &RunConfig) -> Result<Report> {
    let s = scenarios::find(id).ok_or_else(|| HarnessError::UnknownScenario(id.to_string()))?;
    Ok(execute(&s, cfg))
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(HarnessError::Config("--jobs must be at least 1".into()));
        }
        b = b.num_threads(j);
    }
    b.build().map_err(|e| HarnessError::Config(e.to_string()))
}

/// Runs the selected scenarios (all of them when `ids` is empty) that carry
/// `filter`, on a pool of `jobs` threads. Reports are ordered by id.
pub fn run_selected(ids: &[String], filter: Option<&str>, cfg: &RunConfig, jobs: Option<usize>) -> Result<Aggregate> {
    let all = registry();
    for id in ids {
        if !all.iter().any(|s| s.id == id) {
            return Err(HarnessError::UnknownScenario(id.clone()));
        }
    }
    let chosen: Vec<&Scenario> = all
        .iter()
        .filter(|s| ids.is_empty() || ids.iter().any(|i| i == s.id))
        .filter(|s| filter.is_none_or(|t| s.has_tag(t)))
        .collect();
    let t = Instant::now();
    let mut reports: Vec<Report> = pool(jobs)?.install(|| chosen.par_iter().map(|s| execute(s, cfg)).collect());
    reports.sort_by(|a, b| a.scenario.cmp(&b.scenario));
    let passed = reports.iter().filter(|r| r.pass).count();
    Ok(Aggregate {
        filter: filter.map(str::to_string),
        passed,
        failed: reports.len() - passed,
        pass: reports.iter().all(|r| r.pass),
        reports,
        wall_time_s: t.elapsed().as_secs_f64(),
        version: VERSION.to_string(),
        config_hash: cfg.hash(),
    })
}

pub fn run_all(filter: Option<&str>, cfg: &RunConfig, jobs: Option<usize>) -> Result<Aggregate> {
    run_selected(&[], filter, cfg, jobs)
}

/// One CSV row per check.
pub fn checks_csv(agg: &Aggregate) -> String {
    let mut s = String::from("scenario,check,expected,actual,tolerance,verdict,provenance\n");
    for r in &agg.reports {
        for c in &r.checks {
            let verdict =
                serde_json::to_value(c.verdict).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
            let prov = serde_json::to_value(c.provenance)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            s.push_str(&format!(
                "{},\"{}\",{},{},{},{},{}\n",
                r.scenario,
                c.name.replace('"', "\"\""),
                c.expected,
                c.actual,
                c.tolerance,
                verdict,
                prov
            ));
        }
    }
    s
}
