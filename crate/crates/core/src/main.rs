//! Command-line front end: assemble a scenario, run the verification suite,
//! sample the characteristic function, or apply the rational calculus.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use carleman::error::{Error, Result};
use carleman::harness::report::render_lines;
use carleman::harness::{build_pipeline, checks, emit_report, run_checks, Scenario};
use carleman::operator::op_norm;
use carleman::transforms::{rational_calculus, CalculusMode, RationalFunction};
use carleman::C64;

#[derive(Parser)]
#[command(
    name = "carleman",
    version,
    about = "functional-model laboratory on parabolic spectral domains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// scenario JSON; the built-in n = 3 fixture when absent
    #[arg(long)]
    config: Option<PathBuf>,
    /// override the contour node count
    #[arg(long)]
    nodes: Option<usize>,
    /// override the branch truncation abscissa
    #[arg(long)]
    tmax: Option<f64>,
    /// override the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    /// output directory for report and CSV files
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// per-check tolerance override NAME=VALUE (repeatable)
    #[arg(long = "tol-override", value_name = "NAME=VALUE")]
    tol_override: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the constants bundle for the scenario.
    Geometry(CommonArgs),
    /// Sample delta along the contour and write the CSVs.
    Delta(CommonArgs),
    /// Run the full verification suite and emit the report.
    Verify(CommonArgs),
    /// Apply q(A) from a pole/residue list.
    Calculus {
        #[command(flatten)]
        common: CommonArgs,
        /// rational function JSON:
        /// {"constant": [re, im], "terms": [{"pole": [re, im], "residue": [re, im]}]}
        #[arg(long)]
        rational: PathBuf,
    },
    /// Re-render a stored report JSON as per-check lines.
    Report {
        /// path to a report.json
        #[arg(long)]
        report: PathBuf,
    },
}

fn load_scenario(common: &CommonArgs) -> Result<Scenario> {
    let mut scenario = match &common.config {
        Some(path) => Scenario::from_json(&std::fs::read_to_string(path)?)?,
        None => Scenario::fixture_n3(),
    };
    if let Some(n) = common.nodes {
        scenario.quadrature.nodes = n;
    }
    if let Some(t) = common.tmax {
        scenario.quadrature.t_max = Some(t);
    }
    if let Some(s) = common.seed {
        scenario.seed = s;
    }
    let mut overrides = BTreeMap::new();
    for kv in &common.tol_override {
        let (name, value) = kv
            .split_once('=')
            .ok_or_else(|| Error::Domain(format!("tolerance override '{kv}' is not NAME=VALUE")))?;
        let value: f64 = value.parse().map_err(|_| {
            Error::Domain(format!(
                "tolerance override value '{value}' is not a number"
            ))
        })?;
        overrides.insert(name.to_string(), value);
    }
    scenario.tolerances.extend(overrides);
    Ok(scenario)
}

#[derive(serde::Deserialize)]
struct RationalSpec {
    #[serde(default)]
    constant: Option<[f64; 2]>,
    terms: Vec<RationalTermSpec>,
}

#[derive(serde::Deserialize)]
struct RationalTermSpec {
    pole: [f64; 2],
    residue: [f64; 2],
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Geometry(common) => {
            let scenario = load_scenario(&common)?;
            let pipeline = build_pipeline(&scenario)?;
            let json = serde_json::to_string_pretty(&pipeline.constants)?;
            println!("{json}");
            println!(
                "contour: {} nodes (requested {}), t_max {:.3e}, tail bound {:.3e}",
                pipeline.contour.len(),
                pipeline.contour.n_requested,
                pipeline.contour.t_max,
                pipeline.contour.tail_bound
            );
            Ok(true)
        }
        Command::Delta(common) => {
            let scenario = load_scenario(&common)?;
            let pipeline = build_pipeline(&scenario)?;
            let report =
                carleman::harness::report::assemble(&pipeline, Vec::new(), Default::default());
            let written = emit_report(&report, &pipeline, &common.out)?;
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(true)
        }
        Command::Verify(common) => {
            let scenario = load_scenario(&common)?;
            let t0 = std::time::Instant::now();
            let pipeline = build_pipeline(&scenario)?;
            let t_build = t0.elapsed();
            let (results, bounds) = run_checks(&pipeline)?;
            let t_checks = t0.elapsed() - t_build;
            let mut report = carleman::harness::report::assemble(&pipeline, results, bounds);
            report.timing_ms = vec![
                ("pipeline".into(), t_build.as_secs_f64() * 1e3),
                ("checks".into(), t_checks.as_secs_f64() * 1e3),
            ];
            let written = emit_report(&report, &pipeline, &common.out)?;
            print!("{}", render_lines(&report));
            for (stage, ms) in &report.timing_ms {
                eprintln!("{stage}: {ms:.1} ms");
            }
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(report.all_pass)
        }
        Command::Calculus { common, rational } => {
            let mut scenario = load_scenario(&common)?;
            // only the frame data is needed from the check battery here
            scenario.checks = Some(vec!["exactness".into()]);
            let pipeline = build_pipeline(&scenario)?;
            let spec: RationalSpec = serde_json::from_str(&std::fs::read_to_string(&rational)?)?;
            let q = RationalFunction {
                constant: spec
                    .constant
                    .map(|c| C64::new(c[0], c[1]))
                    .unwrap_or_else(|| C64::new(0.0, 0.0)),
                terms: spec
                    .terms
                    .iter()
                    .map(|t| {
                        (
                            C64::new(t.pole[0], t.pole[1]),
                            C64::new(t.residue[0], t.residue[1]),
                        )
                    })
                    .collect(),
            };
            let direct = rational_calculus(
                &pipeline.system,
                &q,
                CalculusMode::Direct,
                &pipeline.domain,
                &pipeline.contour,
            )?;
            let contour_mode = rational_calculus(
                &pipeline.system,
                &q,
                CalculusMode::Contour,
                &pipeline.domain,
                &pipeline.contour,
            )?;
            let agreement = (direct.clone() - &contour_mode).norm() / direct.norm().max(1e-300);
            let (_, bounds) = run_checks(&pipeline)?;
            let sup = q.sup_on_contour(&pipeline.contour);
            let bound = bounds.k_similarity * sup;
            let norm_qa = op_norm(&direct);
            println!("||q(A)|| = {norm_qa:.12e}");
            println!("sup_Gamma |q| = {sup:.12e}");
            println!("K = {:.12e}, K sup = {bound:.12e}", bounds.k_similarity);
            println!("direct vs contour agreement: {agreement:.3e}");
            std::fs::create_dir_all(&common.out)?;
            let mut csv = String::from("row,col,re,im\n");
            for r in 0..direct.nrows() {
                for c in 0..direct.ncols() {
                    csv.push_str(&format!(
                        "{r},{c},{:.17e},{:.17e}\n",
                        direct[(r, c)].re,
                        direct[(r, c)].im
                    ));
                }
            }
            let path = common.out.join("qa.csv");
            std::fs::write(&path, csv)?;
            println!("wrote {}", path.display());
            Ok(norm_qa <= bound * (1.0 + 1e-9) && agreement <= 1e-8)
        }
        Command::Report { report } => {
            let parsed: carleman::harness::Report =
                serde_json::from_str(&std::fs::read_to_string(&report)?)?;
            print!("{}", render_lines(&parsed));
            let _ = checks::CHECK_ORDER;
            Ok(parsed.all_pass)
        }
    }
}

/// Restore default SIGPIPE handling so piping into `head` and friends
/// terminates the process instead of panicking on a closed stdout.
#[cfg(unix)]
fn reset_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn reset_sigpipe() {}

fn main() -> ExitCode {
    reset_sigpipe();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
