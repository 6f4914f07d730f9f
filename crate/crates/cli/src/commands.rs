//! The five experiment commands: trajectory generation, hierarchy error
//! comparison, exit-time statistics, the mean-field equilibrium curve and
//! the exact-oracle self-check.

use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use cgmc_core::analysis::{
    exit_time, exit_time_stats, fit_loglog_slope, histogram_pair, mean_field_equilibria,
    relative_entropy, relative_entropy_probs, weak_strong_errors, ErrorReport,
};
use cgmc_core::kmc::{Process, RunOptions, Sampling, TimeStepMode, TrajectorySample, UpdateMode};
use cgmc_core::oracle::{
    detailed_balance_audit, generator_matrix, gibbs_measure, pushforward, stationary_distribution,
    total_variation,
};
use cgmc_core::{AnalysisError, FieldMode, KmcError, LatticeSpec, OracleError, PotentialModel};

use crate::config::{ConfigError, ExperimentConfig};
use crate::csvio::{fmt, snapshot_csv, trajectory_csv, write_file};
use crate::manifest::{process_cpu_seconds, RunManifest};
use crate::runner::{init_for, make_pool, process_for, run_ensemble};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("simulation failure: {0}")]
    Kmc(#[from] KmcError),
    #[error("oracle failure: {0}")]
    Oracle(#[from] OracleError),
    #[error("analysis failure: {0}")]
    Analysis(#[from] AnalysisError),
    #[error("{0}")]
    Usage(String),
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub time_step: Option<TimeStepMode>,
    pub out: Option<PathBuf>,
}

struct Prepared {
    config: ExperimentConfig,
    config_text: String,
    model: PotentialModel,
    field: FieldMode,
    time_step: TimeStepMode,
    master_seed: u64,
    out_dir: PathBuf,
}

fn prepare(config_path: &Path, overrides: &Overrides) -> Result<Prepared, CliError> {
    let (config, config_text) = ExperimentConfig::load(config_path)?;
    let model = config.potential_model()?;
    let field = config.field_mode();
    let time_step = overrides
        .time_step
        .unwrap_or(config.time_step_mode()?);
    let master_seed = overrides.seed.unwrap_or(config.run.master_seed);
    let out_dir = overrides
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output.directory));
    std::fs::create_dir_all(&out_dir)?;
    Ok(Prepared {
        config,
        config_text,
        model,
        field,
        time_step,
        master_seed,
        out_dir,
    })
}

struct StageClock {
    wall: Instant,
    cpu: f64,
}

impl StageClock {
    fn start() -> Self {
        Self {
            wall: Instant::now(),
            cpu: process_cpu_seconds(),
        }
    }

    fn stop(&self) -> (f64, f64) {
        (
            self.wall.elapsed().as_secs_f64(),
            process_cpu_seconds() - self.cpu,
        )
    }
}

/// Write one trajectory CSV per (q, realization), plus configuration
/// snapshot files at the requested times.
pub fn cmd_simulate(config_path: &Path, overrides: &Overrides) -> Result<(), CliError> {
    let p = prepare(config_path, overrides)?;
    let mut manifest = RunManifest::new(
        "simulate",
        &p.config_text,
        p.master_seed,
        p.config.run.realizations,
    );
    manifest.write(&p.out_dir)?;
    let pool = make_pool(overrides.workers);

    let full_spec = p.config.spec_for(1);
    let sigma0 = p.config.initial_state().micro_config(&full_spec);

    for &q in &p.config.lattice.coarse_q {
        let clock = StageClock::start();
        let spec = p.config.spec_for(q);
        let mut opts = RunOptions::to_time(p.config.run.t_final);
        opts.sampling = Sampling::Grid {
            dt: p.config.run.sampling_dt,
        };
        opts.time_step = p.time_step;
        opts.update = UpdateMode::Local;
        opts.snapshot_times = p.config.output.snapshot_times.clone();
        let init = init_for(&spec, q, &sigma0);
        let ensemble = run_ensemble(
            &pool,
            process_for(q),
            &spec,
            &p.model,
            &p.field,
            &init,
            &opts,
            p.master_seed,
            p.config.run.realizations,
        )?;
        for (r, samples) in ensemble.iter().enumerate() {
            let path = p.out_dir.join(format!("trajectory_q{q}_r{r}.csv"));
            write_file(&path, &trajectory_csv(samples))?;
            for sample in samples {
                if let Some(snapshot) = &sample.snapshot {
                    let path = p
                        .out_dir
                        .join(format!("snapshot_q{q}_r{r}_t{}.csv", fmt(sample.t)));
                    write_file(&path, &snapshot_csv(snapshot))?;
                }
            }
        }
        let (wall, cpu) = clock.stop();
        manifest.record_stage(&format!("q{q}"), wall, cpu);
    }
    manifest.finalize(&p.out_dir)?;
    Ok(())
}

fn compare_report(
    reference: &[Vec<TrajectorySample>],
    coarse: &[Vec<TrajectorySample>],
    n: usize,
) -> Result<ErrorReport, CliError> {
    Ok(weak_strong_errors(&reference[..n], &coarse[..n])?)
}

/// Weak/strong errors of each coarse level against the seed-paired
/// microscopic reference, with realization-count convergence diagnostics
/// and fitted log-log slopes.
pub fn cmd_compare(config_path: &Path, overrides: &Overrides) -> Result<(), CliError> {
    let p = prepare(config_path, overrides)?;
    let reals = p.config.run.realizations;
    let mut manifest = RunManifest::new("compare", &p.config_text, p.master_seed, reals);
    manifest.write(&p.out_dir)?;
    let pool = make_pool(overrides.workers);

    let qs: Vec<usize> = p
        .config
        .lattice
        .coarse_q
        .iter()
        .copied()
        .filter(|&q| q > 1)
        .collect();
    if qs.is_empty() {
        return Err(usage("compare needs at least one coarse ratio q > 1 in lattice.coarse_q"));
    }

    let full_spec = p.config.spec_for(1);
    let sigma0 = p.config.initial_state().micro_config(&full_spec);
    let mut opts = RunOptions::to_time(p.config.run.t_final);
    opts.sampling = Sampling::Grid {
        dt: p.config.run.sampling_dt,
    };
    opts.time_step = p.time_step;
    opts.update = UpdateMode::Local;

    let clock = StageClock::start();
    let reference = run_ensemble(
        &pool,
        Process::Micro,
        &full_spec,
        &p.model,
        &p.field,
        &init_for(&full_spec, 1, &sigma0),
        &opts,
        p.master_seed,
        reals,
    )?;
    let (wall, cpu) = clock.stop();
    manifest.record_stage("reference_q1", wall, cpu);

    // Convergence diagnostics at nested realization counts.
    let mut subset_sizes: Vec<usize> = vec![reals / 4, reals / 2, reals];
    subset_sizes.retain(|&n| n >= 2);
    subset_sizes.dedup();

    let mut rows = String::from("q,realizations,e_w,e_s,rel_e_w,rel_e_s\n");
    let mut full_ew = Vec::new();
    let mut full_es = Vec::new();
    for &q in &qs {
        let clock = StageClock::start();
        let spec = p.config.spec_for(q);
        let coarse = run_ensemble(
            &pool,
            Process::Coarse,
            &spec,
            &p.model,
            &p.field,
            &init_for(&spec, q, &sigma0),
            &opts,
            p.master_seed,
            reals,
        )?;
        for &n in &subset_sizes {
            let report = compare_report(&reference, &coarse, n)?;
            rows.push_str(&format!(
                "{q},{n},{},{},{},{}\n",
                fmt(report.weak),
                fmt(report.strong),
                fmt(report.weak_relative),
                fmt(report.strong_relative)
            ));
            if n == reals {
                full_ew.push(report.weak);
                full_es.push(report.strong);
            }
        }
        let (wall, cpu) = clock.stop();
        manifest.record_stage(&format!("coarse_q{q}"), wall, cpu);
    }
    write_file(&p.out_dir.join("errors.csv"), &rows)?;

    if qs.len() >= 2 {
        let qf: Vec<f64> = qs.iter().map(|&q| q as f64).collect();
        let (ws, whw) = fit_loglog_slope(&qf, &full_ew);
        let (ss, shw) = fit_loglog_slope(&qf, &full_es);
        let body = format!(
            "metric,slope,half_width\ne_w,{},{}\ne_s,{},{}\n",
            fmt(ws),
            fmt(whw),
            fmt(ss),
            fmt(shw)
        );
        write_file(&p.out_dir.join("slopes.csv"), &body)?;
    }
    manifest.finalize(&p.out_dir)?;
    Ok(())
}

/// Exit-time statistics per coarse level: mean crossing time of the
/// coverage threshold, relative error and relative entropy against the
/// q = 1 baseline, censored fraction, and CPU seconds per level.
pub fn cmd_exit_times(config_path: &Path, overrides: &Overrides) -> Result<(), CliError> {
    let p = prepare(config_path, overrides)?;
    let reals = p.config.run.realizations;
    let mut manifest = RunManifest::new("exit-times", &p.config_text, p.master_seed, reals);
    manifest.write(&p.out_dir)?;
    let pool = make_pool(overrides.workers);

    if !p.config.lattice.coarse_q.contains(&1) {
        return Err(usage(
            "exit-times needs the microscopic baseline: include 1 in lattice.coarse_q",
        ));
    }
    let c_plus = p.config.run.threshold_c_plus;
    let full_spec = p.config.spec_for(1);
    let sigma0 = p.config.initial_state().micro_config(&full_spec);

    let mut opts = RunOptions::to_time(p.config.run.t_final);
    opts.sampling = Sampling::Grid {
        dt: p.config.run.sampling_dt,
    };
    opts.time_step = p.time_step;
    opts.update = UpdateMode::Local;
    opts.stop_at_coverage = Some(c_plus);

    // Baseline first; every other level reuses its histogram edges.
    let mut per_q: Vec<(usize, Vec<Option<f64>>, f64)> = Vec::new();
    for &q in &p.config.lattice.coarse_q {
        let clock = StageClock::start();
        let spec = p.config.spec_for(q);
        let ensemble = run_ensemble(
            &pool,
            process_for(q),
            &spec,
            &p.model,
            &p.field,
            &init_for(&spec, q, &sigma0),
            &opts,
            p.master_seed,
            reals,
        )?;
        let times: Vec<Option<f64>> = ensemble
            .iter()
            .map(|t| exit_time(t, c_plus))
            .collect::<Result<_, _>>()?;
        let (wall, cpu) = clock.stop();
        manifest.record_stage(&format!("q{q}"), wall, cpu);
        per_q.push((q, times, cpu));
    }

    let baseline: Vec<f64> = per_q
        .iter()
        .find(|(q, _, _)| *q == 1)
        .expect("baseline present")
        .1
        .iter()
        .filter_map(|&t| t)
        .collect();
    if baseline.is_empty() {
        return Err(usage(
            "no microscopic realization crossed the threshold; raise run.t_final",
        ));
    }
    let base_mean = baseline.iter().sum::<f64>() / baseline.len() as f64;

    let mut rows =
        String::from("q,mean_exit_time,rel_err_vs_q1,rel_entropy_vs_q1,censored_fraction,n_crossed,cpu_seconds\n");
    let mut hist_rows = String::from("q,bin_left,bin_right,prob_q,prob_ref\n");
    for (q, times, cpu) in &per_q {
        let stats = exit_time_stats(times)?;
        let crossed: Vec<f64> = times.iter().filter_map(|&t| t).collect();
        let (rel_err, rel_ent) = if *q == 1 {
            (0.0, 0.0)
        } else if crossed.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let (hq, href) = histogram_pair(&crossed, &baseline, 100)?;
            for b in 0..hq.n_bins() {
                hist_rows.push_str(&format!(
                    "{q},{},{},{},{}\n",
                    fmt(hq.bin_edges[b]),
                    fmt(hq.bin_edges[b + 1]),
                    fmt(hq.probs[b]),
                    fmt(href.probs[b])
                ));
            }
            (
                (stats.mean - base_mean).abs() / base_mean,
                relative_entropy(&hq, &href)?,
            )
        };
        rows.push_str(&format!(
            "{q},{},{},{},{},{},{}\n",
            fmt(stats.mean),
            fmt(rel_err),
            fmt(rel_ent),
            fmt(stats.censored_fraction),
            stats.n_crossed,
            fmt(*cpu)
        ));
    }
    write_file(&p.out_dir.join("exit_times.csv"), &rows)?;
    write_file(&p.out_dir.join("exit_time_histograms.csv"), &hist_rows)?;
    manifest.finalize(&p.out_dir)?;
    Ok(())
}

/// Mean-field equilibrium coverages over an external-field grid.
pub fn cmd_mean_field(config_path: &Path, overrides: &Overrides) -> Result<(), CliError> {
    let p = prepare(config_path, overrides)?;
    let mf = p
        .config
        .mean_field
        .as_ref()
        .ok_or_else(|| usage("mean-field needs a [mean_field] section (h_min, h_max, h_steps)"))?;
    let mut manifest = RunManifest::new("mean-field", &p.config_text, p.master_seed, 0);
    manifest.write(&p.out_dir)?;

    let clock = StageClock::start();
    let grid: Vec<f64> = (0..mf.h_steps)
        .map(|i| mf.h_min + (mf.h_max - mf.h_min) * i as f64 / (mf.h_steps - 1) as f64)
        .collect();
    let rows = mean_field_equilibria(&p.model, &grid);
    let mut body = String::from("h,n_roots,root1,root2,root3,degenerate\n");
    for row in rows {
        let mut cols = [String::new(), String::new(), String::new()];
        for (i, root) in row.roots.iter().take(3).enumerate() {
            cols[i] = fmt(*root);
        }
        body.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt(row.h),
            row.roots.len(),
            cols[0],
            cols[1],
            cols[2],
            row.degenerate
        ));
    }
    write_file(&p.out_dir.join("mean_field.csv"), &body)?;
    let (wall, cpu) = clock.stop();
    manifest.record_stage("mean_field", wall, cpu);
    manifest.finalize(&p.out_dir)?;
    Ok(())
}

/// One line of the oracle self-check report.
pub struct CheckLine {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Exhaustive-oracle battery over built-in tiny instances: stationary
/// distributions against Gibbs measures, detailed-balance audits, and
/// the data-processing inequality. Returns the report; any failed line
/// means the dynamics and the equilibrium theory disagree.
pub fn oracle_battery() -> Result<Vec<CheckLine>, CliError> {
    let mut lines = Vec::new();
    let mut check = |name: String, value: f64, bound: f64| {
        lines.push(CheckLine {
            name,
            value,
            bound,
            pass: value <= bound,
        });
    };

    let betas = [0.63, 2.7, 5.41];
    // Microscopic instances.
    for (n, l) in [(4usize, 1usize), (6, 2), (8, 2)] {
        for (bi, &beta) in betas.iter().enumerate() {
            let spec = LatticeSpec::new(n, 1, l).unwrap();
            let model = PotentialModel::new(6.0 / beta, beta, 1.0, 0.5).unwrap();
            for (fname, field) in [("none", FieldMode::NONE), ("grouped", FieldMode::Grouped)] {
                let process = Process::Micro;
                let gen = generator_matrix(process, &spec, &model, &field)?;
                let pi = stationary_distribution(&gen)?;
                let mu = gibbs_measure(process, &spec, &model, &field)?;
                check(
                    format!("micro N={n} L={l} beta{bi} {fname}: stationary vs gibbs TV"),
                    total_variation(&pi, &mu),
                    1e-10,
                );
                check(
                    format!("micro N={n} L={l} beta{bi} {fname}: detailed balance"),
                    detailed_balance_audit(process, &spec, &model, &field)?,
                    1e-10,
                );
            }
        }
    }
    // Coarse instances with the binomial prior.
    for (m, q) in [(3usize, 2usize), (2, 3), (4, 3), (3, 4)] {
        let n = m * q;
        let spec = LatticeSpec::new(n, q, (n / 2).min(q + 1)).unwrap();
        let model = PotentialModel::new(4.0, 1.3, 1.0, 0.4).unwrap();
        for (fname, field) in [("none", FieldMode::NONE), ("grouped", FieldMode::Grouped)] {
            let gen = generator_matrix(Process::Coarse, &spec, &model, &field)?;
            let pi = stationary_distribution(&gen)?;
            let mu = gibbs_measure(Process::Coarse, &spec, &model, &field)?;
            check(
                format!("coarse M={m} q={q} {fname}: stationary vs gibbs TV"),
                total_variation(&pi, &mu),
                1e-10,
            );
            check(
                format!("coarse M={m} q={q} {fname}: detailed balance"),
                detailed_balance_audit(Process::Coarse, &spec, &model, &field)?,
                1e-10,
            );
        }
    }
    // Synthetic instances.
    for q in [2usize, 3] {
        let spec = LatticeSpec::new(6, q, 2).unwrap();
        let model = PotentialModel::new(3.0, 1.1, 1.0, 0.6).unwrap();
        let gen = generator_matrix(Process::Synthetic, &spec, &model, &FieldMode::Grouped)?;
        let pi = stationary_distribution(&gen)?;
        let mu = gibbs_measure(Process::Synthetic, &spec, &model, &FieldMode::Grouped)?;
        check(
            format!("synthetic N=6 q={q}: stationary vs gibbs TV"),
            total_variation(&pi, &mu),
            1e-10,
        );
        check(
            format!("synthetic N=6 q={q}: detailed balance"),
            detailed_balance_audit(Process::Synthetic, &spec, &model, &FieldMode::Grouped)?,
            1e-10,
        );
    }
    // Data-processing inequality on Gibbs pairs at different temperatures.
    for q in [2usize, 4] {
        let spec = LatticeSpec::new(8, q, 2).unwrap();
        let hot = PotentialModel::new(3.0, 0.7, 1.0, 1.0).unwrap();
        let cold = PotentialModel::new(3.0, 1.9, 1.0, 1.0).unwrap();
        let mu1 = gibbs_measure(Process::Micro, &spec, &hot, &FieldMode::NONE)?;
        let mu2 = gibbs_measure(Process::Micro, &spec, &cold, &FieldMode::NONE)?;
        let fine = relative_entropy_probs(&mu1, &mu2);
        let coarse = relative_entropy_probs(&pushforward(&spec, &mu1), &pushforward(&spec, &mu2));
        check(
            format!("data processing q={q}: D(T*mu1||T*mu2) - D(mu1||mu2)"),
            coarse - fine,
            1e-12,
        );
    }
    Ok(lines)
}

/// Run the oracle battery and print one line per check; fails (nonzero
/// exit) if any check fails.
pub fn cmd_oracle_check(out: Option<&Path>) -> Result<bool, CliError> {
    let lines = oracle_battery()?;
    let mut body = String::new();
    let mut all_pass = true;
    for line in &lines {
        let status = if line.pass { "PASS" } else { "FAIL" };
        all_pass &= line.pass;
        let rendered = format!(
            "{status} {} = {:.3e} (bound {:.0e})",
            line.name, line.value, line.bound
        );
        println!("{rendered}");
        body.push_str(&rendered);
        body.push('\n');
    }
    println!(
        "oracle-check: {}/{} checks passed",
        lines.iter().filter(|l| l.pass).count(),
        lines.len()
    );
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_file(&dir.join("oracle_check.txt"), &body)?;
    }
    Ok(all_pass)
}
