//! Dispatch of subcommands and output files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use cmj_core::forest::{simulate_forest, ForestOptions};
use cmj_core::models::{estimate_r1, estimate_r2, R1Options, R2Options, Variant};
use cmj_core::report::{ReportRow, TestReport, Verdict};
use cmj_core::rng::{substream, tag};
use cmj_core::stable_limit::{simulate_reflected_limit, StableParams};
use cmj_core::verify::{
    counterexample_divergence, fdd_main_check, identity_in_law_check, joint_tail_rz, ladder_law_check,
    laplace_check_s, tail_check_mu_v, FddOptions, IdentityOptions, JointTailOptions, LadderLawOptions,
};
use serde::Serialize;

use crate::config::{Loaded, TESTS};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{test}: {message}")]
    Setup { test: String, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn setup(test: &str, e: impl std::fmt::Display) -> RunError {
    RunError::Setup {
        test: test.into(),
        message: e.to_string(),
    }
}

/// Where everything goes for one invocation.
pub struct Output {
    dir: PathBuf,
    sha256: String,
    seed: u64,
    reports: Vec<TestReport>,
}

#[derive(Serialize)]
struct Record<'a> {
    config_sha256: &'a str,
    #[serde(flatten)]
    report: &'a TestReport,
}

#[derive(Serialize)]
struct Metadata<'a> {
    config_sha256: &'a str,
    seed: u64,
    subcommand: &'a str,
    workers: usize,
    version: &'a str,
    started_unix: u64,
    finished_unix: u64,
    verdicts: Vec<(&'a str, Verdict)>,
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

impl Output {
    pub fn new(dir: &Path, sha256: &str, seed: u64) -> Result<Self, RunError> {
        fs::create_dir_all(dir).map_err(|source| RunError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            sha256: sha256.into(),
            seed,
            reports: Vec::new(),
        })
    }

    fn create(&self, name: &str) -> Result<(PathBuf, BufWriter<File>), RunError> {
        let path = self.dir.join(name);
        let f = File::create(&path).map_err(|source| RunError::Io {
            path: path.clone(),
            source,
        })?;
        let mut w = BufWriter::new(f);
        writeln!(w, "# config_sha256={}, seed={}", self.sha256, self.seed).map_err(|source| RunError::Io {
            path: path.clone(),
            source,
        })?;
        Ok((path, w))
    }

    fn write_csv(&self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), RunError> {
        let (path, mut w) = self.create(name)?;
        f(&mut w)
            .and_then(|_| w.flush())
            .map_err(|source| RunError::Io { path, source })
    }

    fn push(&mut self, report: TestReport) -> Result<(), RunError> {
        println!("{}", report.summary_line());
        for warning in &report.warnings {
            println!("    warning: {warning}");
        }
        let name = format!("{}.csv", report.name);
        self.write_csv(&name, |w| {
            writeln!(w, "{}", ReportRow::CSV_HEADER)?;
            for r in &report.rows {
                writeln!(w, "{}", r.csv())?;
            }
            Ok(())
        })?;
        self.reports.push(report);
        Ok(())
    }

    /// Writes `reports.jsonl` and `metadata.json`; returns the worst verdict.
    pub fn finish(&self, subcommand: &str, workers: usize, started_unix: u64) -> Result<Verdict, RunError> {
        let path = self.dir.join("reports.jsonl");
        let io = |source| RunError::Io {
            path: path.clone(),
            source,
        };
        let mut w = BufWriter::new(File::create(&path).map_err(io)?);
        for report in &self.reports {
            let record = Record {
                config_sha256: &self.sha256,
                report,
            };
            writeln!(w, "{}", serde_json::to_string(&record).expect("report serializes")).map_err(io)?;
        }
        w.flush().map_err(io)?;
        let meta = Metadata {
            config_sha256: &self.sha256,
            seed: self.seed,
            subcommand,
            workers,
            version: env!("CARGO_PKG_VERSION"),
            started_unix,
            finished_unix: unix_now(),
            verdicts: self.reports.iter().map(|r| (r.name.as_str(), r.verdict)).collect(),
        };
        let path = self.dir.join("metadata.json");
        fs::write(&path, serde_json::to_string_pretty(&meta).expect("metadata serializes")).map_err(|source| {
            RunError::Io {
                path: path.clone(),
                source,
            }
        })?;
        Ok(Verdict::all(self.reports.iter().map(|r| r.verdict)))
    }
}

pub fn started() -> u64 {
    unix_now()
}

/// Runs one named test (or dump) into `out`.
pub fn run_test(name: &str, cfg: &Loaded, out: &mut Output) -> Result<(), RunError> {
    let c = &cfg.config;
    let spec = &cfg.spec;
    let tol = &c.tolerances;
    let seed = out.seed;
    let err = |e: &dyn std::fmt::Display| setup(name, e);
    match name {
        "simulate" => {
            let sampler = spec.sampler().map_err(|e| err(&e))?;
            let opts = ForestOptions {
                order: c.simulate.order,
                contour: c.simulate.contour,
                ..ForestOptions::default()
            };
            let mut rng = substream(seed, tag("simulate"), 0);
            let forest = simulate_forest(&sampler, c.simulate.n, &opts, &mut rng).map_err(|e| err(&e))?;
            out.write_csv("forest_paths.csv", |w| forest.write_paths_csv(w))?;
            if c.simulate.contour {
                out.write_csv("forest_contour.csv", |w| forest.write_contour_csv(w))?;
            }
            println!(
                "simulate: {} individuals, {} trees, written to {}",
                forest.len(),
                forest.walk.trees_among_first(forest.len()),
                out.dir.display()
            );
        }
        "limit-sample" => {
            let gamma = spec.gamma().ok_or_else(|| err(&"the life law has no tail index"))?;
            let a = spec.drift_constant().ok_or_else(|| err(&"the model has no drift constant"))?;
            let params = if c.limit_sample.declared_exponent {
                StableParams::new(gamma, a)
            } else {
                StableParams::lukasiewicz_limit(gamma, a)
            }
            .map_err(|e| err(&e))?;
            let paths: Vec<_> = (0..c.limit_sample.n_paths)
                .map(|i| {
                    let mut rng = substream(seed, tag("limit-sample"), i as u64);
                    simulate_reflected_limit(&params, c.limit_sample.horizon, c.mesh, &mut rng)
                })
                .collect::<Result<_, _>>()
                .map_err(|e| err(&e))?;
            out.write_csv("limit_paths.csv", |w| {
                writeln!(w, "path,t,S,reflected")?;
                for (i, path) in paths.iter().enumerate() {
                    for (k, t) in path.grid().iter().enumerate() {
                        writeln!(w, "{i},{t},{},{}", path.values[k], path.reflected[k])?;
                    }
                }
                Ok(())
            })?;
            println!("limit-sample: {} paths written to {}", paths.len(), out.dir.display());
        }
        "check-assumptions" => {
            let a = spec.drift_constant().ok_or_else(|| err(&"the model has no drift constant"))?;
            let ca = &c.check_assumptions;
            let r1 = estimate_r1(
                spec,
                &ca.t_grid,
                ca.n_samples_r1,
                &R1Options {
                    threshold: ca.r1_threshold,
                },
                seed,
            )
            .map_err(|e| err(&e))?;
            out.push(r1)?;
            let r2 = estimate_r2(
                spec,
                &c.p_grid,
                ca.x,
                ca.a_prime.unwrap_or(a / 2.0),
                ca.n_samples_r2,
                &R2Options {
                    threshold: ca.r2_threshold,
                    alpha: 1.0 - tol.confidence,
                },
                seed,
            )
            .map_err(|e| err(&e))?;
            out.push(r2)?;
        }
        "tail" => {
            let r = tail_check_mu_v(spec, &c.p_grid, &c.x_grid, c.tail.n_samples, seed, tol).map_err(|e| err(&e))?;
            out.push(r)?;
        }
        "laplace" => {
            let p = c.laplace.p.unwrap_or(cfg.largest_p());
            let r = laplace_check_s(spec, p, &c.lambda_grid, c.laplace.n_replicas, seed, tol).map_err(|e| err(&e))?;
            out.push(r)?;
        }
        "ladder-law" => {
            let l = &c.ladder_law;
            let opts = LadderLawOptions {
                max_steps: l.max_steps,
                n_boot: l.n_boot,
                convention: l.convention,
                ..LadderLawOptions::default()
            };
            let r = ladder_law_check(spec, l.n_samples, &opts, seed, tol).map_err(|e| err(&e))?;
            out.push(r)?;
        }
        "joint-tail" => {
            let j = &c.joint_tail;
            let opts = JointTailOptions {
                walks_per_pvp: j.walks_per_pvp,
                min_walks: j.min_walks,
                max_steps: j.max_steps,
                convention: j.convention,
            };
            let p = j.p.unwrap_or(cfg.largest_p());
            let r = joint_tail_rz(spec, p, &j.xy_grid, &opts, seed, tol).map_err(|e| err(&e))?;
            out.push(r)?;
        }
        "identity" => {
            let i = &c.identity;
            let opts = IdentityOptions {
                order: i.order,
                convention: i.convention,
                twin_r_scale: i.twin_r_scale,
            };
            let p = i.p.unwrap_or(cfg.largest_p());
            let t = i.t.unwrap_or(cfg.largest_t());
            let r = identity_in_law_check(spec, p, t, i.n_replicas, &opts, seed, tol).map_err(|e| err(&e))?;
            out.push(r)?;
        }
        "fdd" => {
            let opts = FddOptions {
                order: c.fdd.order,
                twin_a_scale: c.fdd.twin_a_scale,
            };
            let r = fdd_main_check(spec, &c.p_grid, &c.t_grid, c.fdd.n_replicas, c.mesh, &opts, seed, tol)
                .map_err(|e| err(&e))?;
            out.push(r)?;
        }
        "counterexample" => {
            let ce = &c.counterexample;
            let from_model = match (&spec.variant, spec.gamma()) {
                (Variant::Counterexample { gamma_prime }, Some(g)) => Some((g, *gamma_prime)),
                _ => None,
            };
            let gamma = ce.gamma.or(from_model.map(|m| m.0));
            let gamma_prime = ce.gamma_prime.or(from_model.map(|m| m.1));
            let (Some(gamma), Some(gamma_prime)) = (gamma, gamma_prime) else {
                return Err(err(&"set counterexample.gamma and gamma_prime, or use the counterexample model"));
            };
            let r = counterexample_divergence(gamma, gamma_prime, &c.p_grid, ce.n_replicas, seed, tol)
                .map_err(|e| err(&e))?;
            out.push(r)?;
        }
        other => return Err(err(&format!("unknown test '{other}'"))),
    }
    Ok(())
}

/// Tests run by `all`.
pub fn suite(cfg: &Loaded) -> Vec<String> {
    match &cfg.config.tests {
        Some(t) => t.clone(),
        None => TESTS.iter().filter(|t| **t != "limit-sample").map(|t| t.to_string()).collect(),
    }
}
