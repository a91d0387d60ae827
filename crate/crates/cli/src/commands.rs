//! The `design`, `simulate` and `sweep` subcommands.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use nusrec_core::designer::{self, BranchDesign, DesignProblem};
use nusrec_core::experiment::{self, SimulationOutput, SimulationReport};
use nusrec_core::export;
use nusrec_core::reconstructor::Path as RecPath;
use nusrec_core::FilterBank;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Serialize)]
struct BankFile<'a> {
    config_sha256: &'a str,
    #[serde(flatten)]
    bank: &'a FilterBank,
}

#[derive(Debug, Serialize)]
struct BranchEntry {
    branch: usize,
    error_p: f64,
    error_p_db: f64,
    condition: f64,
    residual_inf: f64,
    ridge: f64,
}

impl From<&BranchDesign> for BranchEntry {
    fn from(d: &BranchDesign) -> Self {
        BranchEntry {
            branch: d.branch,
            error_p: d.diagnostics.error_p,
            error_p_db: 10.0 * d.diagnostics.error_p.max(1e-300).log10(),
            condition: d.diagnostics.condition,
            residual_inf: d.diagnostics.residual_inf,
            ridge: d.diagnostics.ridge,
        }
    }
}

#[derive(Debug, Serialize)]
struct DesignReport<'a> {
    config_sha256: &'a str,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "N")]
    n: usize,
    ridge: f64,
    designed_subset: bool,
    p_max: f64,
    branches: Vec<BranchEntry>,
}

#[derive(Debug, Serialize)]
struct MetricsFile<'a> {
    config_sha256: &'a str,
    #[serde(rename = "N")]
    n: usize,
    p_max: f64,
    input_snr_db: Option<f64>,
    #[serde(flatten)]
    report: &'a SimulationReport,
}

/// Files written by a command, in creation order.
#[derive(Debug, Default)]
pub struct Written(pub Vec<PathBuf>);

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).expect("report serializes");
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

fn write_with<F>(path: &Path, f: F) -> CliResult<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn p_max(designs: &[BranchDesign]) -> f64 {
    designs
        .iter()
        .map(|d| d.diagnostics.error_p)
        .fold(0.0, f64::max)
}

fn design_problem(problem: &DesignProblem) -> CliResult<(FilterBank, Vec<BranchDesign>)> {
    Ok(designer::design_bank_report(problem)?)
}

/// Writes `bank.json`, `design_report.json` and one `response_n<k>.csv` per
/// designed branch.
pub fn design(config: &RunConfig, out: &Path) -> CliResult<Written> {
    let problem = config.validate_design()?;
    let hash = config.hash();
    let (bank, designs) = design_problem(&problem)?;
    ensure_dir(out)?;
    let mut written = Written::default();

    let path = out.join("bank.json");
    write_json(&path, &BankFile { config_sha256: &hash, bank: &bank })?;
    written.0.push(path);

    let report = DesignReport {
        config_sha256: &hash,
        m: bank.period(),
        n: bank.order(),
        ridge: problem.ridge,
        designed_subset: bank.designed_subset(),
        p_max: p_max(&designs),
        branches: designs.iter().map(BranchEntry::from).collect(),
    };
    let path = out.join("design_report.json");
    write_json(&path, &report)?;
    written.0.push(path);

    // both images of the band plus half a bandwidth on each side
    let edge = (problem.band.omega2_t1() + 0.5 * problem.band.b_t1) / std::f64::consts::PI;
    for d in &designs {
        let table = designer::response_table(
            &d.taps,
            &problem.pattern,
            d.branch,
            -edge,
            edge,
            config.response_points,
        );
        let path = out.join(format!("response_n{}.csv", d.branch));
        let notes = [format!("config_sha256={hash}"), format!("branch={}", d.branch)];
        write_with(&path, |w| export::write_response_csv(w, &table, &notes))?;
        written.0.push(path);
    }
    Ok(written)
}

fn simulate_to(
    config: &RunConfig,
    out: &Path,
    traces: bool,
) -> CliResult<(Written, SimulationReport, f64)> {
    let scenario = config.scenario()?;
    let hash = config.hash();
    let (bank, designs) = design_problem(&scenario.problem)?;
    let output: SimulationOutput = experiment::simulate(&scenario, &bank)?;
    let pmax = p_max(&designs);
    ensure_dir(out)?;
    let mut written = Written::default();

    let path = out.join("metrics.json");
    let metrics = MetricsFile {
        config_sha256: &hash,
        n: scenario.problem.order,
        p_max: pmax,
        input_snr_db: scenario.noise.map(|n| n.snr_db),
        report: &output.report,
    };
    write_json(&path, &metrics)?;
    written.0.push(path);

    let note = [format!("config_sha256={hash}")];
    let path = out.join("spectrum.csv");
    write_with(&path, |w| export::write_spectrum_csv(w, &output.spectrum, &note))?;
    written.0.push(path);

    if traces {
        let mut sets = vec![
            ("reference.csv", &output.reference),
            ("output_clean.csv", &output.clean_output),
        ];
        if let Some(y) = &output.noisy_output {
            sets.push(("output_noisy.csv", y));
        }
        for (name, trace) in sets {
            let path = out.join(name);
            write_with(&path, |w| export::write_trace_csv(w, trace, &note))?;
            written.0.push(path);
        }
    }
    Ok((written, output.report, pmax))
}

/// Writes `metrics.json`, `spectrum.csv` and, with `traces`, the reference
/// and reconstructed output sequences.
pub fn simulate(config: &RunConfig, out: &Path, traces: bool) -> CliResult<Written> {
    simulate_to(config, out, traces).map(|(w, _, _)| w)
}

/// Outcome of one sweep row.
#[derive(Debug)]
pub struct SweepRow {
    pub order: usize,
    pub result: CliResult<(f64, f64, f64)>,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
    } else {
        s.to_string()
    }
}

/// Runs `simulate` for each order into `out/n<N>/` and writes the summary
/// `out/sweep.csv`. Failing orders are reported in their row.
pub fn sweep(config: &RunConfig, orders: &[usize], out: &Path) -> CliResult<(Written, Vec<SweepRow>)> {
    if orders.is_empty() {
        return Err(CliError::Validation("the order list is empty".into()));
    }
    ensure_dir(out)?;
    let rows: Vec<SweepRow> = orders
        .par_iter()
        .map(|&order| {
            let mut c = config.clone();
            c.filter_order = order;
            let dir = out.join(format!("n{order}"));
            let result = simulate_to(&c, &dir, false).map(|(_, r, p)| (p, r.sfdr_db, r.snr_db));
            SweepRow { order, result }
        })
        .collect();

    let path = out.join("sweep.csv");
    let hash = config.hash();
    write_with(&path, |w| {
        writeln!(w, "# config_sha256={hash}")?;
        writeln!(w, "N,P_max,sfdr_db,snr_db,status")?;
        for row in &rows {
            match &row.result {
                Ok((p, sfdr, snr)) => writeln!(w, "{},{p:e},{sfdr:.6},{snr:.6},ok", row.order)?,
                Err(e) => writeln!(w, "{},,,,{}", row.order, csv_field(&format!("error: {e}")))?,
            }
        }
        Ok(())
    })?;
    let mut written = Written(vec![path]);
    for row in &rows {
        if row.result.is_ok() {
            let dir = out.join(format!("n{}", row.order));
            written.0.push(dir.join("metrics.json"));
            written.0.push(dir.join("spectrum.csv"));
        }
    }
    Ok((written, rows))
}

/// Applies command-line overrides to a loaded configuration.
pub fn apply_overrides(config: &mut RunConfig, path: Option<RecPath>, no_noise: bool) {
    if let Some(p) = path {
        config.path = p;
    }
    if no_noise {
        config.noise.enabled = false;
    }
}
