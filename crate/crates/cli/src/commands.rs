use std::path::Path;
use std::process::ExitCode;

use sagnac_core::config::ScenarioConfig;
use sagnac_core::presets::{self, PRESET_NAMES};
use sagnac_core::validation::{self, Fault, Level};
use sagnac_core::{Error, Estimator};

use crate::output;

/// Failure classes and their exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    /// Bad config, arguments or I/O.
    Usage,
    /// The engine could not produce a trustworthy number.
    Numerical,
    /// A validation case failed.
    Validation,
}

impl From<Failure> for ExitCode {
    fn from(f: Failure) -> Self {
        ExitCode::from(match f {
            Failure::Usage => 2,
            Failure::Numerical => 3,
            Failure::Validation => 4,
        })
    }
}

fn classify(e: &Error) -> Failure {
    match e {
        Error::InvalidArgument(_) | Error::Domain(_) => Failure::Usage,
        Error::AtPhase { source, .. } => match classify(source) {
            Failure::Usage => Failure::Usage,
            _ => Failure::Numerical,
        },
        _ => Failure::Numerical,
    }
}

fn report(e: Error) -> Failure {
    eprintln!("error: {e}");
    classify(&e)
}

fn io_failure(what: &str, path: &Path, e: std::io::Error) -> Failure {
    eprintln!("error: cannot {what} {}: {e}", path.display());
    Failure::Usage
}

fn load(path: &Path) -> Result<ScenarioConfig, Failure> {
    ScenarioConfig::from_path(path).map_err(report)
}

fn run_config(config: &ScenarioConfig, out: &Path) -> Result<(), Failure> {
    let scenario = config.to_scenario().map_err(report)?;
    let grid = config.phase_grid.values().map_err(report)?;
    let curve = Estimator::with_convention(config.snl_convention)
        .sweep(&scenario, &grid)
        .map_err(report)?;
    output::write_run(out, config, &curve).map_err(|e| io_failure("write", out, e))
}

pub fn simulate(config: &Path, out: &Path) -> Result<(), Failure> {
    let cfg = load(config)?;
    run_config(&cfg, out)?;
    log::info!("wrote {}", out.display());
    Ok(())
}

pub fn figure(name: &str, dir: &Path) -> Result<(), Failure> {
    let Some(preset) = presets::preset(name) else {
        eprintln!(
            "error: unknown preset `{name}`; valid presets: {}",
            PRESET_NAMES.join(", ")
        );
        return Err(Failure::Usage);
    };
    std::fs::create_dir_all(dir).map_err(|e| io_failure("create", dir, e))?;
    for curve in &preset.curves {
        let out = dir.join(preset.file_name(curve));
        run_config(&curve.config, &out)?;
        println!("{}", out.display());
    }
    Ok(())
}

pub fn validate(level: Level, json: bool, inject_fault: bool) -> Result<(), Failure> {
    let fault = if inject_fault {
        Fault::BrokenLossMap
    } else {
        Fault::None
    };
    let report = validation::run(level, fault);
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        );
    } else {
        for case in &report.cases {
            println!("{case}");
        }
        let passed = report.cases.iter().filter(|c| c.passed).count();
        println!("{passed}/{} cases passed", report.cases.len());
    }
    match report.first_failure() {
        None => Ok(()),
        Some(case) => {
            eprintln!("first failure: {case}");
            Err(Failure::Validation)
        }
    }
}

pub fn optimize(config: &Path, json: bool) -> Result<(), Failure> {
    let cfg = load(config)?;
    let scenario = cfg.to_scenario().map_err(report)?;
    let estimator = Estimator::with_convention(cfg.snl_convention);
    let interval = (cfg.phase_grid.start, cfg.phase_grid.stop);
    let opt = estimator
        .find_optimum(&scenario, interval)
        .map_err(report)?;
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&opt).expect("optimum serializes")
        );
    } else {
        let p = &opt.point;
        println!("phi_star     {}", output::num(opt.phi_star));
        println!("delta2phi    {}", output::num(p.delta2phi));
        println!("ratio        {}", output::num(p.ratio));
        println!("ratio_db     {}", output::num(p.ratio_db));
        println!("at_boundary  {}", opt.at_boundary);
    }
    Ok(())
}
