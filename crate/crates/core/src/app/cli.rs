//! The `safecomp` command line.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use super::ebs::{build_ebs_demo, run_ebs_demo, EbsParams};
use super::grid::{generate_grid, parse_dim, write_grid_csv};
use super::io::{read_dataset_csv, write_dataset_csv, RegionsFile};
use super::polar::{polar_dims, render_polar_svg, write_polar_csv};
use super::report::{parse_report, render_report, PropertyCheck, Report};
use super::runner::run_parallel_verification;
use super::semaphore::PipelineConfig;
use super::AppError;
use crate::compose::{
    check_assume_guarantee, check_property, parse_system, render_system, AbstractionConfig, Peer,
    System, SystemFile,
};
use crate::contracts::{
    emit_dnn_contract, parse_dnn_contract, render_component_contract, render_dnn_contract,
    ComponentContract, DnnContract, Property,
};
use crate::guard::{build_guard, guard_stream, GuardConfig};
use crate::network::{parse_network, render_network, Network};
use crate::regions::{discover_regions, DiscoveryConfig, Metric, RadiusStrategy, Region};
use crate::verifier::{
    Counterexample, FullVerification, SafetySummary, Verdict, VerifyConfig, VerifyStats,
};

#[derive(Debug, Parser)]
#[command(
    name = "safecomp",
    version,
    about = "Safe regions, contracts and compositional checks for ReLU classifiers"
)]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Args)]
struct Output {
    /// Report file; without it the report (json) or a summary (text) goes
    /// to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Zero all timing and worker-count fields in the report.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Debug, Args)]
struct Budget {
    #[arg(long, default_value_t = 50_000)]
    node_budget: u64,
    /// Seconds per verification task; 0 disables the limit.
    #[arg(long, default_value_t = 60.0)]
    time_budget: f64,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    min_box: f64,
    #[arg(long, env = "SAFECOMP_WORKERS", default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    workers: u64,
}

impl Budget {
    fn config(&self) -> VerifyConfig {
        VerifyConfig {
            node_budget: self.node_budget,
            time_budget_secs: (self.time_budget > 0.0).then_some(self.time_budget),
            min_box_width: self.min_box,
            epsilon: self.eps,
            ..VerifyConfig::default()
        }
    }

    fn echo(&self, r: &mut Report) {
        r.echo("node_budget", self.node_budget);
        r.echo("time_budget", self.time_budget);
        r.echo("eps", self.eps);
        r.echo("min_box", self.min_box);
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cluster a labeled dataset into label-pure regions.
    Discover {
        #[arg(long)]
        data: PathBuf,
        /// Normalize raw values and resolve labels through this network.
        #[arg(long)]
        net: Option<PathBuf>,
        /// Where to write the regions.
        #[arg(long)]
        regions: PathBuf,
        #[arg(long, default_value = "l2", value_parser = parse_metric)]
        metric: Metric,
        #[arg(long, default_value = "separating", value_parser = parse_radius)]
        radius: RadiusStrategy,
        #[arg(long, default_value_t = 3)]
        min_members: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Verify every region against every other label.
    Verify {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        regions: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write projected counterexamples to PREFIX.csv and PREFIX.svg
        /// (needs `polar_dims` network metadata).
        #[arg(long)]
        polar: Option<PathBuf>,
        /// Exit 1 when any target is unsafe.
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        budget: Budget,
        #[command(flatten)]
        output: Output,
    },
    /// Turn verdicts into a region contract.
    EmitContracts {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        regions: PathBuf,
        /// Reuse the verdicts of a `verify` report instead of verifying again.
        #[arg(long)]
        verdicts: Option<PathBuf>,
        /// Where to write the contract.
        #[arg(long)]
        contracts: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        budget: Budget,
        #[command(flatten)]
        output: Output,
    },
    /// Model-check a system, or prove a property by assume-guarantee
    /// reasoning when `--contracts` names a proof setup.
    CheckSystem {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        contracts: Option<PathBuf>,
        /// Check this property instead of those listed in the system file.
        #[arg(long)]
        property: Option<String>,
        #[command(flatten)]
        output: Output,
    },
    /// Stream CSV inputs through the runtime guard, one JSON decision per line.
    Guard {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        contracts: PathBuf,
        /// Input CSV with a header row; `-` reads stdin.
        #[arg(long, default_value = "-")]
        data: String,
        /// Decision stream; `-` writes stdout.
        #[arg(long, default_value = "-")]
        decisions: String,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, default_value = "fail_safe")]
        fail_safe: String,
        /// Inputs are already normalized.
        #[arg(long)]
        normalized: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Demonstration scenarios.
    Demo {
        #[command(subcommand)]
        scenario: Demo,
    },
    /// Cartesian product of cut points, streamed as CSV.
    Grid {
        /// `name=v1,v2,...`, once per dimension in order.
        #[arg(long = "dim", required = true)]
        dims: Vec<String>,
        #[arg(long)]
        label_with: Option<PathBuf>,
        /// Row output; `-` writes stdout.
        #[arg(long)]
        rows: Option<String>,
        /// Only report the row count.
        #[arg(long)]
        count_only: bool,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, Subcommand)]
enum Demo {
    /// Emergency braking with a traffic-light classifier.
    Ebs {
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
        braking_ticks: u32,
        #[arg(long, default_value_t = 2)]
        max_velocity: u32,
        /// Guard answer outside every region; `none` leaves it unguarded.
        #[arg(long, default_value = "red")]
        fail_safe: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "l2", value_parser = parse_metric)]
        metric: Metric,
        #[arg(long, default_value = "separating", value_parser = parse_radius)]
        radius: RadiusStrategy,
        #[arg(long, default_value_t = 3)]
        min_members: usize,
        /// Also write the network, dataset, regions, contract, system and
        /// proof setup into this directory.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        #[command(flatten)]
        budget: Budget,
        #[command(flatten)]
        output: Output,
    },
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse()
}

fn parse_radius(s: &str) -> Result<RadiusStrategy, String> {
    s.parse()
}

/// An assume-guarantee proof setup for `check-system`: M1 is a set of
/// components of the system file with contract `c1`, M2 is either more
/// components or a classifier contract file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgSetup {
    pub m1: Vec<String>,
    pub c1: ComponentContract,
    pub m2: PeerSetup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PeerSetup {
    Components {
        components: Vec<String>,
        contract: ComponentContract,
    },
    Dnn {
        /// Contract file, relative to the setup file.
        contract: PathBuf,
        abstraction: AbstractionConfig,
    },
}

/// Outcome of a subcommand: the report and whether it counts as a failure.
struct Outcome {
    report: Report,
    failed: bool,
    summary: Vec<String>,
    /// Stdout carries data, so summaries go to stderr.
    stdout_taken: bool,
}

impl Outcome {
    fn ok(report: Report, summary: Vec<String>) -> Self {
        Outcome {
            report,
            failed: false,
            summary,
            stdout_taken: false,
        }
    }
}

/// Runs the CLI on `argv` (including the program name) and returns the
/// exit code: 0 success, 1 a property or verification failure, 2 usage or
/// I/O errors.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let output = match &cli.command {
        Command::Discover { output, .. }
        | Command::Verify { output, .. }
        | Command::EmitContracts { output, .. }
        | Command::CheckSystem { output, .. }
        | Command::Guard { output, .. }
        | Command::Grid { output, .. }
        | Command::Demo {
            scenario: Demo::Ebs { output, .. },
        } => output,
    };
    let start = Instant::now();
    match run(&cli.command) {
        Ok(mut outcome) => {
            outcome.report.execution.elapsed_secs = start.elapsed().as_secs_f64();
            if output.no_timing {
                outcome.report.mask_timing();
            }
            if let Err(e) = emit(output, &outcome) {
                eprintln!("error: {e}");
                return 2;
            }
            i32::from(outcome.failed)
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn emit(output: &Output, o: &Outcome) -> Result<(), AppError> {
    let text = render_report(&o.report);
    if let Some(path) = &output.out {
        write_file(path, &text)?;
    }
    let mut sink: Box<dyn Write> = if o.stdout_taken {
        Box::new(io::stderr())
    } else {
        Box::new(io::stdout())
    };
    match (output.format, &output.out) {
        (Format::Json, None) => sink.write_all(text.as_bytes())?,
        (Format::Text, _) => {
            for line in &o.summary {
                writeln!(sink, "{line}")?;
            }
        }
        (Format::Json, Some(_)) => {}
    }
    Ok(())
}

fn read_file(path: &Path) -> Result<String, AppError> {
    fs::read_to_string(path).map_err(|e| AppError::Input(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), AppError> {
    fs::write(path, text).map_err(|e| AppError::Input(format!("{}: {e}", path.display())))
}

fn load_network(path: &Path) -> Result<Network, AppError> {
    parse_network(&read_file(path)?)
        .map_err(|e| AppError::Input(format!("{}: {e}", path.display())))
}

fn load_regions(path: &Path, net: &Network) -> Result<Vec<Region>, AppError> {
    let file: RegionsFile = serde_json::from_str(&read_file(path)?)
        .map_err(|e| AppError::Input(format!("{}: {e}", path.display())))?;
    let regions = file.to_regions(&net.labels)?;
    if let Some(r) = regions.iter().find(|r| r.centroid.len() != net.input_dim) {
        return Err(AppError::Input(format!(
            "region {} has {} coordinates, network `{}` takes {}",
            r.id,
            r.centroid.len(),
            net.name,
            net.input_dim
        )));
    }
    Ok(regions)
}

fn load_contract(path: &Path) -> Result<DnnContract, AppError> {
    parse_dnn_contract(&read_file(path)?)
        .map_err(|e| AppError::Input(format!("{}: {e}", path.display())))
}

fn summary_lines(r: &Report) -> Vec<String> {
    let mut lines = Vec::new();
    if let Some(s) = &r.summary {
        lines.push(format!(
            "{} regions: {} fully safe, {} targeted safe, {} unsafe, {} inconclusive",
            s.regions, s.fully_safe, s.targeted_safe, s.not_safe, s.inconclusive
        ));
    }
    if !r.counterexamples.is_empty() {
        lines.push(format!("{} counterexamples", r.counterexamples.len()));
    }
    lines
}

fn run(cmd: &Command) -> Result<Outcome, AppError> {
    match cmd {
        Command::Discover {
            data,
            net,
            regions,
            metric,
            radius,
            min_members,
            seed,
            ..
        } => {
            let network = net.as_deref().map(load_network).transpose()?;
            let ds = read_dataset_csv(&read_file(data)?, network.as_ref())?;
            let cfg = DiscoveryConfig {
                seed: *seed,
                min_members: *min_members,
                radius: *radius,
                ..DiscoveryConfig::default()
            };
            let found = discover_regions(&ds.data, *metric, &cfg)?;
            let file = RegionsFile::from_regions(
                network.as_ref().map(|n| n.name.clone()),
                &found.regions,
                &ds.label_names,
            );
            write_file(regions, &(serde_json::to_string_pretty(&file)? + "\n"))?;
            let mut r = Report::new("discover");
            r.echo("data", data);
            r.echo("metric", metric);
            r.echo("radius", radius);
            r.echo("min_members", min_members);
            r.echo("seed", seed);
            r.add_regions(&found.regions, &ds.label_names);
            r.outputs
                .insert("regions".into(), regions.display().to_string());
            r.notes.push(format!(
                "{} points, {} dropped clusters ({} singletons)",
                ds.data.len(),
                found.dropped.len(),
                found.singleton_count()
            ));
            let lines = vec![format!(
                "{} regions written to {}",
                found.regions.len(),
                regions.display()
            )];
            Ok(Outcome::ok(r, lines))
        }
        Command::Verify {
            net,
            regions,
            seed,
            polar,
            strict,
            budget,
            ..
        } => {
            let network = load_network(net)?;
            let regs = load_regions(regions, &network)?;
            let results = run_parallel_verification(
                &network,
                &regs,
                &budget.config(),
                budget.workers as usize,
                *seed,
            )?;
            let mut r = Report::new("verify");
            r.echo("network", &network.name);
            r.echo("regions", regions);
            r.echo("seed", seed);
            budget.echo(&mut r);
            r.execution.workers = budget.workers as usize;
            let dims = polar_dims(&network)?;
            r.add_verification(&network, &results, dims)?;
            if let Some(prefix) = polar {
                let dims = dims.ok_or_else(|| {
                    AppError::Input(format!(
                        "network `{}` has no polar_dims metadata",
                        network.name
                    ))
                })?;
                let pts: Vec<_> = r
                    .counterexamples
                    .iter()
                    .map(|c| {
                        (
                            c.target.clone(),
                            c.polar.unwrap_or_else(|| {
                                super::polar::PolarPoint::from_raw(&c.raw, dims.0, dims.1)
                            }),
                        )
                    })
                    .collect();
                let csv_path = prefix.with_extension("csv");
                let svg_path = prefix.with_extension("svg");
                let mut buf = Vec::new();
                write_polar_csv(&mut buf, &pts)?;
                fs::write(&csv_path, buf)?;
                write_file(&svg_path, &render_polar_svg(&pts))?;
                r.outputs
                    .insert("polar_csv".into(), csv_path.display().to_string());
                r.outputs
                    .insert("polar_svg".into(), svg_path.display().to_string());
            }
            let failed = *strict && !r.counterexamples.is_empty();
            let lines = summary_lines(&r);
            Ok(Outcome {
                report: r,
                failed,
                summary: lines,
                stdout_taken: false,
            })
        }
        Command::EmitContracts {
            net,
            regions,
            verdicts,
            contracts,
            seed,
            budget,
            ..
        } => {
            let network = load_network(net)?;
            let regs = load_regions(regions, &network)?;
            let mut r = Report::new("emit-contracts");
            r.echo("network", &network.name);
            r.echo("regions", regions);
            let results = match verdicts {
                Some(path) => {
                    r.echo("verdicts", path);
                    let prior = parse_report(&read_file(path)?)?;
                    results_from_report(&network, &regs, &prior)?
                }
                None => {
                    r.echo("seed", seed);
                    budget.echo(&mut r);
                    r.execution.workers = budget.workers as usize;
                    run_parallel_verification(
                        &network,
                        &regs,
                        &budget.config(),
                        budget.workers as usize,
                        *seed,
                    )?
                }
            };
            let contract = emit_dnn_contract(&network, &results)?;
            write_file(contracts, &render_dnn_contract(&contract))?;
            r.add_verification(&network, &results, polar_dims(&network)?)?;
            r.outputs
                .insert("contracts".into(), contracts.display().to_string());
            let mut lines = summary_lines(&r);
            lines.push(format!(
                "{} contract regions, {} annex entries written to {}",
                contract.regions.len(),
                contract.annex.len(),
                contracts.display()
            ));
            Ok(Outcome::ok(r, lines))
        }
        Command::CheckSystem {
            system,
            contracts,
            property,
            ..
        } => {
            let file = parse_system(&read_file(system)?)
                .map_err(|e| AppError::Input(format!("{}: {e}", system.display())))?;
            let props: Vec<Property> = match property {
                Some(p) => vec![p.parse()?],
                None => file.properties.clone(),
            };
            if props.is_empty() {
                return Err(AppError::Input(
                    "no property given and none listed in the system file".into(),
                ));
            }
            let mut r = Report::new("check-system");
            r.echo("system", system);
            r.echo("properties", &props);
            let mut lines = Vec::new();
            let failed = match contracts {
                None => {
                    let mut failed = false;
                    for p in props {
                        let result = check_property(&file.system, &p)?;
                        lines.push(match result.violation_tick() {
                            None => format!("holds: {p} ({} states)", result.states_explored),
                            Some(t) => format!("VIOLATED at tick {t}: {p}"),
                        });
                        failed |= !result.holds;
                        r.checks.push(PropertyCheck {
                            property: p,
                            result,
                        });
                    }
                    failed
                }
                Some(setup_path) => {
                    r.echo("contracts", setup_path);
                    let [p] = <[Property; 1]>::try_from(props).map_err(|_| {
                        AppError::Input(
                            "an assume-guarantee proof takes exactly one property".into(),
                        )
                    })?;
                    let setup: AgSetup = serde_json::from_str(&read_file(setup_path)?)
                        .map_err(|e| AppError::Input(format!("{}: {e}", setup_path.display())))?;
                    let m1 = subsystem(&file, &setup.m1)?;
                    let proof = match &setup.m2 {
                        PeerSetup::Components {
                            components,
                            contract,
                        } => {
                            let m2 = subsystem(&file, components)?;
                            check_assume_guarantee(
                                &m1,
                                &setup.c1,
                                Peer::Component {
                                    system: &m2,
                                    contract,
                                },
                                &p,
                            )?
                        }
                        PeerSetup::Dnn {
                            contract,
                            abstraction,
                        } => {
                            let base = setup_path.parent().unwrap_or(Path::new("."));
                            let c = load_contract(&base.join(contract))?;
                            check_assume_guarantee(
                                &m1,
                                &setup.c1,
                                Peer::Dnn {
                                    contract: &c,
                                    abstraction,
                                },
                                &p,
                            )?
                        }
                    };
                    lines.extend(proof_lines(&proof));
                    let failed = !proof.conclusion;
                    r.proof = Some(proof);
                    failed
                }
            };
            Ok(Outcome {
                report: r,
                failed,
                summary: lines,
                stdout_taken: false,
            })
        }
        Command::Guard {
            net,
            contracts,
            data,
            decisions,
            threshold,
            fail_safe,
            normalized,
            ..
        } => {
            let network = load_network(net)?;
            let contract = load_contract(contracts)?;
            let guard = build_guard(
                &contract,
                &GuardConfig {
                    fail_safe_action: fail_safe.clone(),
                    uncertainty_threshold: *threshold,
                },
            )?;
            let input: Box<dyn Read> = if data == "-" {
                Box::new(io::stdin())
            } else {
                Box::new(fs::File::open(data).map_err(|e| AppError::Input(format!("{data}: {e}")))?)
            };
            let (output, stdout_taken): (Box<dyn Write>, bool) = if decisions == "-" {
                (Box::new(io::stdout()), true)
            } else {
                (
                    Box::new(
                        fs::File::create(decisions)
                            .map_err(|e| AppError::Input(format!("{decisions}: {e}")))?,
                    ),
                    false,
                )
            };
            let stats = guard_stream(&guard, &network, input, output, *normalized)?;
            let mut r = Report::new("guard");
            r.echo("network", &network.name);
            r.echo("contracts", contracts);
            r.echo("threshold", threshold);
            r.echo("fail_safe", fail_safe);
            r.echo("normalized", normalized);
            if decisions != "-" {
                r.outputs.insert("decisions".into(), decisions.clone());
            }
            r.guard = Some(stats);
            let lines = vec![format!(
                "{} rows: {} covered, {} outside every region, {} too uncertain",
                stats.rows, stats.covered, stats.outside, stats.uncertain
            )];
            Ok(Outcome {
                report: r,
                failed: false,
                summary: lines,
                stdout_taken,
            })
        }
        Command::Grid {
            dims,
            label_with,
            rows,
            count_only,
            ..
        } => {
            let (names, cuts): (Vec<String>, Vec<Vec<f64>>) = dims
                .iter()
                .map(|d| parse_dim(d))
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .unzip();
            let grid = generate_grid(cuts, names)?;
            let count = grid.size();
            let mut r = Report::new("grid");
            r.echo("dims", dims);
            r.echo("count", count.to_string());
            let mut stdout_taken = false;
            if !count_only {
                let network = label_with.as_deref().map(load_network).transpose()?;
                let target = rows.clone().unwrap_or_else(|| "-".into());
                let written = if target == "-" {
                    stdout_taken = true;
                    write_grid_csv(grid, io::stdout().lock(), network.as_ref())?
                } else {
                    let f = fs::File::create(&target)
                        .map_err(|e| AppError::Input(format!("{target}: {e}")))?;
                    r.outputs.insert("rows".into(), target.clone());
                    write_grid_csv(grid, io::BufWriter::new(f), network.as_ref())?
                };
                if let Some(path) = label_with {
                    r.echo("label_with", path);
                }
                r.notes.push(format!("{written} rows written"));
            }
            Ok(Outcome {
                report: r,
                failed: false,
                summary: vec![format!("{count} grid points")],
                stdout_taken,
            })
        }
        Command::Demo {
            scenario:
                Demo::Ebs {
                    braking_ticks,
                    max_velocity,
                    fail_safe,
                    seed,
                    metric,
                    radius,
                    min_members,
                    fixtures,
                    budget,
                    ..
                },
        } => {
            let params = EbsParams {
                braking_ticks: *braking_ticks,
                max_velocity: *max_velocity,
                fail_safe: (fail_safe != "none").then(|| fail_safe.clone()),
            };
            let cfg = PipelineConfig {
                seed: *seed,
                metric: *metric,
                radius: *radius,
                min_members: *min_members,
                verify: budget.config(),
                workers: budget.workers as usize,
            };
            let out = run_ebs_demo(&params, &cfg)?;
            let mut r = Report::new("demo ebs");
            r.echo("braking_ticks", braking_ticks);
            r.echo("max_velocity", max_velocity);
            r.echo("fail_safe", &params.fail_safe);
            r.echo("seed", seed);
            r.echo("metric", metric);
            r.echo("radius", radius);
            r.echo("min_members", min_members);
            budget.echo(&mut r);
            r.execution.workers = budget.workers as usize;
            let sem = &out.pipeline.semaphore;
            r.add_verification(&sem.network, &out.pipeline.results, None)?;
            r.notes.push(format!(
                "classifier contract: {} regions, {} annex entries",
                out.pipeline.contract.regions.len(),
                out.pipeline.contract.annex.len()
            ));
            r.notes.push(format!(
                "monolithic check of M1 || abstraction: {}",
                if out.monolithic.holds {
                    "holds"
                } else {
                    "violated"
                }
            ));
            if let Some(dir) = fixtures {
                write_fixtures(dir, &params, &out)?;
                r.outputs
                    .insert("fixtures".into(), dir.display().to_string());
            }
            let mut lines = summary_lines(&r);
            lines.extend(proof_lines(&out.proof));
            let failed = !out.proof.conclusion;
            r.proof = Some(out.proof);
            Ok(Outcome {
                report: r,
                failed,
                summary: lines,
                stdout_taken: false,
            })
        }
    }
}

fn proof_lines(p: &crate::compose::AgReport) -> Vec<String> {
    let mut lines: Vec<String> = p
        .premises
        .iter()
        .map(|x| {
            format!(
                "premise {}: {} ({})",
                x.premise,
                if x.holds { "holds" } else { "FAILS" },
                x.statement
            )
        })
        .collect();
    if let Some(t) = p
        .failing()
        .and_then(|x| x.check.as_ref())
        .and_then(|c| c.violation_tick())
    {
        lines.push(format!("counterexample violates at tick {t}"));
    }
    lines.push(if p.conclusion {
        format!("conclusion: M1 || M2 |= {}", p.property)
    } else {
        "conclusion: not established".into()
    });
    lines
}

/// The named components of a parsed system, with the wires among them.
fn subsystem(file: &SystemFile, names: &[String]) -> Result<System, AppError> {
    let mut comps = Vec::new();
    for n in names {
        comps.push(
            file.system
                .component(n)
                .cloned()
                .ok_or_else(|| AppError::Input(format!("no component `{n}` in the system")))?,
        );
    }
    let mut sys = System::new(comps);
    sys.ticks_per_second = file.system.ticks_per_second;
    sys.wiring = file
        .system
        .wiring
        .iter()
        .filter(|w| names.contains(&w.from.component) && names.contains(&w.to.component))
        .cloned()
        .collect();
    Ok(sys)
}

/// Rebuilds verification results from a `verify` report for the given
/// regions.
pub fn results_from_report(
    net: &Network,
    regions: &[Region],
    report: &Report,
) -> Result<Vec<(Region, FullVerification)>, AppError> {
    let by_id: BTreeMap<&str, _> = report.regions.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut sorted: Vec<&Region> = regions.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = Vec::new();
    for region in sorted {
        let rr = by_id.get(region.id.as_str()).ok_or_else(|| {
            AppError::Input(format!("report has no verdicts for region {}", region.id))
        })?;
        let mut verdicts = BTreeMap::new();
        for (target, t) in &rr.targets {
            let idx = net
                .label_index(target)
                .ok_or_else(|| AppError::Input(format!("report names unknown label `{target}`")))?;
            let counterexample = report
                .counterexamples
                .iter()
                .find(|c| c.region == region.id && c.target == *target)
                .map(|c| Counterexample {
                    point: c.point.clone(),
                    scores: c.scores.clone(),
                });
            verdicts.insert(
                idx,
                Verdict {
                    status: t.status,
                    counterexample,
                    reason: t.reason,
                    stats: VerifyStats {
                        nodes: t.nodes,
                        max_depth: t.max_depth,
                        elapsed_secs: t.elapsed_secs,
                    },
                },
            );
        }
        let expected: Vec<usize> = (0..net.num_labels())
            .filter(|&l| l != region.expected_label)
            .collect();
        if verdicts.keys().copied().collect::<Vec<_>>() != expected {
            return Err(AppError::Input(format!(
                "report verdicts for {} do not cover every other label",
                region.id
            )));
        }
        let summary = SafetySummary::from_verdicts(&verdicts);
        out.push((region.clone(), FullVerification { verdicts, summary }));
    }
    Ok(out)
}

/// Files of an EBS run: the classifier, its data, regions and contract, the
/// closed system with the property, and a proof setup for `check-system`
/// that splits it into M1 and the classifier.
fn write_fixtures(
    dir: &Path,
    params: &EbsParams,
    out: &super::ebs::EbsOutcome,
) -> Result<(), AppError> {
    fs::create_dir_all(dir)?;
    let sem = &out.pipeline.semaphore;
    write_file(
        &dir.join("semaphore.relunet"),
        &render_network(&sem.network),
    )?;
    let labels: Vec<String> = sem
        .dataset
        .labels
        .iter()
        .map(|&l| sem.label_names[l].clone())
        .collect();
    let mut buf = Vec::new();
    write_dataset_csv(
        &mut buf,
        &sem.dataset.attributes,
        &sem.dataset.points,
        &labels,
    )?;
    fs::write(dir.join("semaphore.csv"), buf)?;
    let regions = RegionsFile::from_regions(
        Some(sem.network.name.clone()),
        &out.pipeline.discovery.regions,
        &sem.label_names,
    );
    write_file(
        &dir.join("regions.json"),
        &(serde_json::to_string_pretty(&regions)? + "\n"),
    )?;
    write_file(
        &dir.join("contract.json"),
        &render_dnn_contract(&out.pipeline.contract),
    )?;
    let demo = build_ebs_demo(params)?;
    let system = SystemFile {
        description: Some(format!(
            "emergency braking, {} braking ticks, velocity 0..={}; {} abstracts the classifier contract",
            params.braking_ticks, params.max_velocity, demo.abstraction.name
        )),
        system: demo.closed_system(&out.pipeline.contract)?,
        properties: vec![demo.property.clone()],
    };
    write_file(&dir.join("system.json"), &render_system(&system)?)?;
    write_file(&dir.join("c1.json"), &render_component_contract(&demo.c1))?;
    let setup = AgSetup {
        m1: demo.m1.components.iter().map(|c| c.name.clone()).collect(),
        c1: demo.c1.clone(),
        m2: PeerSetup::Dnn {
            contract: "contract.json".into(),
            abstraction: demo.abstraction.clone(),
        },
    };
    write_file(
        &dir.join("ag.json"),
        &(serde_json::to_string_pretty(&setup)? + "\n"),
    )?;
    Ok(())
}
