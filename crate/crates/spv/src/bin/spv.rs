use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use spv::{
    builtin_program, builtin_source, check_cert, export_dot, parse_program, run_reduction_trace, verify_integrity,
    verify_secrecy, Evidence, ProtocolSystem, Verdict, VerificationReport, WitnessCert, DEFAULT_BUDGET,
};
use spv_core::process::REPLICATION_LIMIT;

#[derive(Parser)]
#[command(name = "spv", version, about = "Observational-equivalence checks for security protocols")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Prop {
    Integrity,
    Secrecy,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    System,
    Modified,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide integrity (Sys ≈ ~Sys) or secrecy for a protocol.
    Verify {
        /// Built-in name or path to a `.spv` file.
        #[arg(long)]
        protocol: String,
        #[arg(long, value_enum)]
        property: Prop,
        #[arg(long, env = "SPV_BUDGET", default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        /// Product-state limit for `repl` unfoldings.
        #[arg(long, default_value_t = REPLICATION_LIMIT)]
        replication_bound: usize,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the witness certificate here when one is found.
        #[arg(long)]
        witness_out: Option<PathBuf>,
    },
    /// Apply the reductions to the system graph.
    Reduce {
        #[arg(long)]
        protocol: String,
        /// Print every removed edge with its pass and frame.
        #[arg(long)]
        trace: bool,
        /// Write one DOT file per pass into this directory.
        #[arg(long)]
        emit_dot: Option<PathBuf>,
    },
    /// Write a process graph as DOT.
    Render {
        #[arg(long)]
        protocol: String,
        #[arg(long)]
        emit_dot: PathBuf,
        #[arg(long, value_enum, default_value = "system")]
        which: Which,
    },
    /// Re-validate a witness certificate (or a report carrying one).
    CheckCert {
        #[arg(long)]
        protocol: String,
        #[arg(long)]
        witness: PathBuf,
    },
}

fn load(name: &str, repl_limit: usize) -> Result<ProtocolSystem, String> {
    let prog = if let Ok(p) = builtin_program(name) {
        p
    } else if let Some(src) = builtin_source(name) {
        parse_program(src).map_err(|e| format!("{}: {}", name, e))?
    } else {
        let src = fs::read_to_string(name).map_err(|e| format!("cannot read {}: {}", name, e))?;
        parse_program(&src).map_err(|e| format!("{}:{}", name, e))?
    };
    ProtocolSystem::from_program_with_limit(prog, repl_limit).map_err(|e| format!("{}: {}", name, e))
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    fs::write(path, text).map_err(|e| format!("cannot write {}: {}", path.display(), e))
}

fn read_cert(path: &Path) -> Result<WitnessCert, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {}", path.display(), e))?;
    if let Ok(c) = serde_json::from_str::<WitnessCert>(&text) {
        return Ok(c);
    }
    match serde_json::from_str::<VerificationReport>(&text) {
        Ok(VerificationReport { evidence: Evidence::Witness { certificate }, .. }) => Ok(*certificate),
        Ok(_) => Err(format!("{}: report carries no witness", path.display())),
        Err(e) => Err(format!("{}: not a certificate: {}", path.display(), e)),
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.cmd {
        Cmd::Verify { protocol, property, budget, replication_bound, report, witness_out } => {
            let ps = load(&protocol, replication_bound)?;
            let r = match property {
                Prop::Integrity => verify_integrity(&ps, budget),
                Prop::Secrecy => verify_secrecy(&ps, budget),
            };
            println!("{}", r);
            if let Some(path) = report {
                write(&path, &serde_json::to_string_pretty(&r).expect("report serializes"))?;
            }
            if let (Some(path), Evidence::Witness { certificate }) = (witness_out, &r.evidence) {
                write(&path, &certificate.to_json())?;
            }
            Ok(ExitCode::from(match r.verdict {
                Verdict::Holds => 0,
                Verdict::Refuted => 1,
                Verdict::Inconclusive => 2,
            }))
        }
        Cmd::Reduce { protocol, trace, emit_dot } => {
            let ps = load(&protocol, REPLICATION_LIMIT)?;
            let steps = run_reduction_trace(&ps);
            if let Some(dir) = &emit_dot {
                fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {}", dir.display(), e))?;
                write(&dir.join("pass0.dot"), &export_dot(&ps.system))?;
            }
            let mut last = &ps.system;
            for s in &steps {
                println!("pass {}: {} states, {} edges", s.pass, s.process.len(), s.process.transitions().len());
                if trace {
                    for e in &s.removed {
                        let frame = match &e.frame {
                            Some(f) => {
                                let d: Vec<String> = f.disclosed.iter().map(|t| t.pretty()).collect();
                                format!("  D = {{{}}}, b = {}", d.join(", "), f.cond)
                            }
                            None => String::new(),
                        };
                        println!("  {:?} {} -{}-> {}{}", e.reason, e.from, e.action.pretty(), e.to, frame);
                    }
                }
                if let Some(dir) = &emit_dot {
                    write(&dir.join(format!("pass{}.dot", s.pass)), &export_dot(&s.process))?;
                }
                last = &s.process;
            }
            println!("reduced: {} states, {} edges", last.len(), last.transitions().len());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Render { protocol, emit_dot, which } => {
            let ps = load(&protocol, REPLICATION_LIMIT)?;
            let p = match which {
                Which::System => &ps.system,
                Which::Modified => &ps.modified_system,
            };
            write(&emit_dot, &export_dot(p))?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::CheckCert { protocol, witness } => {
            let ps = load(&protocol, REPLICATION_LIMIT)?;
            let cert = read_cert(&witness)?;
            match check_cert(&ps, &cert) {
                Ok(()) => {
                    println!("certificate accepted");
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    println!("certificate rejected: {}", e);
                    Ok(ExitCode::from(1))
                }
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(3)
        }
    }
}
