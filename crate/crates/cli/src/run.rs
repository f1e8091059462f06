//! Subcommand drivers.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use raf_lab_core::networks::{init_params, Ansatz};
use raf_lab_core::ntk::{conditioning_at_init, median, Conditioning, ConditioningSummary};
use raf_lab_core::problems::{catalog, load_signal, synthetic_image, ProblemKind, Psnr, SignalDataset, SignalFormat};
use raf_lab_core::reproduce::{
    certify_atom, certify_chebyshev, certify_monomial, certify_polynomial, chebyshev_coeffs, cube_points, uniform_grid,
    Atom, Certificate, MonomialSpec, PolynomialSpec,
};
use raf_lab_core::training::{train_loop, Objective, PdeObjective, RegressionObjective, SignalObjective, TrainOutcome};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ActivationBlock, Command, ExperimentConfig, SignalConfig, TargetConfig};
use crate::error::CliError;
use crate::report::{AbortInfo, CertificateEntry, FamilyReport, RunReport, SeedReport, Summary};

/// Environment variable capping seed-level parallelism.
pub const THREADS_VAR: &str = "RAF_LAB_THREADS";

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub quiet: bool,
    /// Worker threads; `None` reads `RAF_LAB_THREADS`, then uses all cores.
    pub threads: Option<usize>,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        RunOptions { out_dir: out_dir.into(), quiet: true, threads: None }
    }

    fn pool(&self) -> Result<rayon::ThreadPool, CliError> {
        let threads =
            match self.threads {
                Some(n) => n,
                None => match std::env::var(THREADS_VAR) {
                    Ok(v) => v.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| {
                        CliError::invalid(THREADS_VAR, format!("expected a positive integer, got `{v}`"))
                    })?,
                    Err(_) => 0,
                },
            };
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::invalid(THREADS_VAR, e.to_string()))
    }
}

/// Runs `command`, writes its artifacts and `report.json` under the output
/// directory and returns the report.
pub fn execute(command: Command, cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport, CliError> {
    cfg.check_for(command)?;
    let start = Instant::now();
    let out = Output::create(&opts.out_dir)?;
    let mut report = RunReport {
        subcommand: command.name().into(),
        config: cfg.clone(),
        runs: Vec::new(),
        summary: None,
        ntk: Vec::new(),
        certificates: Vec::new(),
        wall_time_ms: None,
        artifacts: Vec::new(),
    };
    match command {
        Command::Train => train(cfg, opts, &out, &mut report)?,
        Command::FitSignal => fit_signal(cfg, opts, &out, &mut report)?,
        Command::Ntk => ntk(cfg, opts, &mut report)?,
        Command::Reproduce => reproduce(cfg, &out, &mut report)?,
    }
    if cfg.train.record_time {
        report.wall_time_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    report.artifacts.push("report.json".into());
    out.write_json("report.json", &report)?;
    Ok(report)
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.to_path_buf(), source })?;
        Ok(Output { dir: dir.to_path_buf() })
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| CliError::Write { path: parent.to_path_buf(), source })?;
        }
        fs::write(&path, contents).map_err(|source| CliError::Write { path, source })
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
        text.push('\n');
        self.write(name, &text)
    }
}

fn curve_name(seed: u64) -> String {
    format!("curves_{seed}.csv")
}

fn seed_report(seed: u64, initial: f64, outcome: &TrainOutcome) -> SeedReport {
    let m = &outcome.metrics;
    let last = m.last();
    SeedReport {
        seed,
        curve: curve_name(seed),
        iterations: m.records.len(),
        initial_rel_l2: initial,
        final_rel_l2: last.map(|r| r.rel_l2),
        best_rel_l2: last.map(|_| m.best()),
        moving_average: m.moving_average(),
        best_moving_average: m.best_moving_average(),
        final_loss: last.map(|r| r.loss),
        psnr_db: None,
        perfect_fit: None,
        abort: outcome.abort.as_ref().map(|(iteration, e)| AbortInfo { iteration: *iteration, error: e.to_string() }),
    }
}

fn median_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.collect();
    v.filter(|v| !v.is_empty()).map(|v| median(&v))
}

fn summarize(runs: &[SeedReport]) -> Summary {
    let psnr = runs.iter().any(|r| r.psnr_db.is_some() || r.perfect_fit == Some(true));
    Summary {
        final_rel_l2: median_of(runs.iter().map(|r| r.final_rel_l2)),
        best_rel_l2: median_of(runs.iter().map(|r| r.best_rel_l2)),
        best_moving_average: median_of(runs.iter().map(|r| r.best_moving_average)),
        psnr_db: if psnr {
            median_of(runs.iter().map(|r| if r.perfect_fit == Some(true) { Some(f64::INFINITY) } else { r.psnr_db }))
        } else {
            None
        },
    }
}

fn progress(opts: &RunOptions, run: &SeedReport) {
    if opts.quiet {
        return;
    }
    let best = run.best_rel_l2.map_or("n/a".to_string(), |v| format!("{v:.3e}"));
    match &run.abort {
        Some(a) => eprintln!("seed {}: aborted at iteration {}: {}", run.seed, a.iteration, a.error),
        None => eprintln!("seed {}: {} iterations, best rel L2 {best}", run.seed, run.iterations),
    }
}

fn run_seeds<F>(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
    out: &Output,
    report: &mut RunReport,
    one: F,
) -> Result<(), CliError>
where
    F: Fn(u64) -> Result<(SeedReport, String), CliError> + Sync,
{
    let results: Vec<Result<(SeedReport, String), CliError>> =
        opts.pool()?.install(|| cfg.seeds().par_iter().map(|&seed| one(seed)).collect());
    for r in results {
        let (run, csv) = r?;
        out.write(&run.curve, &csv)?;
        progress(opts, &run);
        report.artifacts.push(run.curve.clone());
        report.runs.push(run);
    }
    report.summary = Some(summarize(&report.runs));
    Ok(())
}

fn train(cfg: &ExperimentConfig, opts: &RunOptions, out: &Output, report: &mut RunReport) -> Result<(), CliError> {
    let name = cfg.problem.as_deref().expect("checked");
    run_seeds(cfg, opts, out, report, |seed| {
        let problem = catalog(name)?;
        let spec = cfg.network_spec(problem.dim(), &cfg.activation, "activation")?;
        let net = init_params(&spec, seed, cfg.init_scheme(Command::Train))?;
        let (initial, outcome) = match problem.kind {
            ProblemKind::Pde => {
                let ansatz = Ansatz { net, wrap: problem.wrap.clone() };
                let mut obj = PdeObjective::new(problem, ansatz, &cfg.train, seed)?;
                (obj.test_error()?, train_loop(&mut obj, &cfg.train)?)
            }
            ProblemKind::Regression => {
                let mut obj = RegressionObjective::new(problem, Ansatz::plain(net), &cfg.train, seed)?;
                (obj.test_error()?, train_loop(&mut obj, &cfg.train)?)
            }
        };
        Ok((seed_report(seed, initial, &outcome), outcome.metrics.to_csv()))
    })
}

fn load_dataset(sig: &SignalConfig) -> Result<SignalDataset, CliError> {
    match (&sig.path, sig.synthetic) {
        (Some(path), _) => {
            let format = match sig.format {
                Some(f) => f,
                None => SignalFormat::from_path(path).map_err(|e| CliError::invalid("signal.format", e.to_string()))?,
            };
            load_signal(path, format).map_err(CliError::Signal)
        }
        (None, Some(n)) => Ok(synthetic_image(n)?),
        (None, None) => Err(CliError::invalid("signal", "needs a path or a synthetic size")),
    }
}

fn fit_signal(cfg: &ExperimentConfig, opts: &RunOptions, out: &Output, report: &mut RunReport) -> Result<(), CliError> {
    let dataset = load_dataset(cfg.signal.as_ref().expect("checked"))?;
    run_seeds(cfg, opts, out, report, |seed| {
        let spec = cfg.network_spec(dataset.dim(), &cfg.activation, "activation")?;
        let net = init_params(&spec, seed, cfg.init_scheme(Command::FitSignal))?;
        let mut obj = SignalObjective::new(dataset.clone(), Ansatz::plain(net))?;
        let initial = obj.test_error()?;
        let outcome = train_loop(&mut obj, &cfg.train)?;
        obj.set_params(&outcome.params)?;
        let mut run = seed_report(seed, initial, &outcome);
        match obj.psnr()? {
            Psnr::Finite(v) => {
                run.psnr_db = Some(v);
                run.perfect_fit = Some(false);
            }
            Psnr::PerfectFit => run.perfect_fit = Some(true),
        }
        Ok((run, outcome.metrics.to_csv()))
    })
}

/// Conditioning summary of one activation family from per-seed results.
pub fn family_report(
    block: &ActivationBlock,
    seeds: &[u64],
    samples: usize,
    per_seed: Vec<Conditioning>,
) -> Result<FamilyReport, CliError> {
    Ok(FamilyReport {
        family: block.label(),
        activation: block.clone(),
        conditioning: ConditioningSummary::from_runs(seeds, samples, per_seed)?,
    })
}

fn ntk(cfg: &ExperimentConfig, opts: &RunOptions, report: &mut RunReport) -> Result<(), CliError> {
    let problem = catalog(cfg.problem.as_deref().expect("checked"))?;
    let families: Vec<(String, &ActivationBlock)> = if cfg.ntk.families.is_empty() {
        vec![("activation".into(), &cfg.activation)]
    } else {
        cfg.ntk.families.iter().enumerate().map(|(i, f)| (format!("ntk.families[{i}]"), f)).collect()
    };
    let pool = opts.pool()?;
    let scheme = cfg.init_scheme(Command::Ntk);
    let seeds = cfg.seeds();
    for (at, block) in families {
        let spec = cfg.network_spec(problem.dim(), block, &at)?;
        let per_seed = pool.install(|| {
            seeds
                .par_iter()
                .map(|&seed| conditioning_at_init(&problem, &spec, scheme, seed, cfg.ntk.samples))
                .collect::<Result<Vec<_>, _>>()
        })?;
        let fam = family_report(block, seeds, cfg.ntk.samples, per_seed)?;
        if !opts.quiet {
            let c = &fam.conditioning;
            let flag = if c.degenerate { " (degenerate)" } else { "" };
            eprintln!(
                "{}: kappa {:.3e}, lambda_max {:.3e}, lambda_min {:.3e}{flag}",
                fam.family, c.kappa, c.lambda_max, c.lambda_min
            );
        }
        report.ntk.push(fam);
    }
    Ok(())
}

fn exponents_dim(terms: &[Vec<u32>], at: &str) -> Result<usize, CliError> {
    let d = terms.first().map_or(0, Vec::len);
    if d == 0 || terms.iter().any(|e| e.len() != d) {
        return Err(CliError::invalid(at, "exponent vectors must be nonempty and of equal length"));
    }
    Ok(d)
}

fn certify_target(t: &TargetConfig, points: usize, seed: u64, at: &str) -> Result<Certificate, CliError> {
    Ok(match t {
        TargetConfig::Monomial(m) => {
            let d = exponents_dim(std::slice::from_ref(&m.exponents), &format!("{at}.monomial.exponents"))?;
            certify_monomial(&MonomialSpec::new(m.exponents.clone()), m.width, m.depth, &cube_points(points, d, seed))
        }
        TargetConfig::Polynomial(p) => {
            let exps: Vec<Vec<u32>> = p.terms.iter().map(|t| t.exponents.clone()).collect();
            let d = exponents_dim(&exps, &format!("{at}.polynomial.terms"))?;
            let terms = p.terms.iter().map(|t| (t.coeff, MonomialSpec::new(t.exponents.clone()))).collect();
            let mut spec = PolynomialSpec::new(d, terms);
            if p.rows.is_some() || p.columns.is_some() {
                let rows = p.rows.unwrap_or(1);
                let columns = p.columns.unwrap_or_else(|| p.terms.len().div_ceil(rows));
                spec = spec.with_layout(rows, columns);
            }
            certify_polynomial(&p.name, &spec, p.width, p.depth, &cube_points(points, d, seed))
        }
        TargetConfig::Chebyshev(c) => {
            let f = c.function;
            let mut spec = chebyshev_coeffs(|x| f.eval(x), c.degree, c.half_width)
                .map_err(|e| CliError::invalid(format!("{at}.chebyshev"), e.to_string()))?;
            if let Some(e) = c.ellipse {
                spec = spec
                    .with_ellipse(e.s, e.bound)
                    .map_err(|e| CliError::invalid(format!("{at}.chebyshev.ellipse"), e.to_string()))?;
            }
            let name = c.name.clone().unwrap_or_else(|| f.name().into());
            certify_chebyshev(&name, |x| f.eval(x), &spec, c.width, c.depth, &uniform_grid(c.grid, c.half_width))
        }
        TargetConfig::Atom(a) => {
            let atom = Atom::new(a.kind, a.params.clone())
                .map_err(|e| CliError::invalid(format!("{at}.atom"), e.to_string()))?;
            certify_atom(&atom, &cube_points(points, atom.dim(), seed))
        }
    })
}

fn slug(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}

fn reproduce(cfg: &ExperimentConfig, out: &Output, report: &mut RunReport) -> Result<(), CliError> {
    let seed = cfg.seeds()[0];
    for (i, t) in cfg.reproduce.targets.iter().enumerate() {
        let cert = certify_target(t, cfg.reproduce.points, seed, &format!("reproduce.targets[{i}]"))?;
        let file = format!("certificates/{i:03}-{}.json", slug(&cert.target));
        out.write_json(&file, &cert)?;
        report.artifacts.push(file.clone());
        report.certificates.push(CertificateEntry { target: cert.target, file, pass: cert.pass });
    }
    Ok(())
}
