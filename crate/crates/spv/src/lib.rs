//! Protocol front end: the `.spv` language, the built-in case studies,
//! integrity and secrecy drivers, witness certificates and DOT export.

pub mod ast;
pub mod builtins;
pub mod cert;
pub mod dot;
pub mod parser;
pub mod system;
pub mod verify;

pub use ast::{pretty_print, Program};
pub use builtins::{builtin, builtin_program, builtin_source, BuiltinError, BUILTINS};
pub use cert::{check_cert, CertError, WitnessCert};
pub use dot::export_dot;
pub use parser::{parse_formula, parse_program, parse_term, DslError, Scope};
pub use system::{parse, ElabError, ProtocolSystem};
pub use verify::{
    run_reduction_trace, secrecy_pair, verify_integrity, verify_secrecy, Evidence, Property, TraceStep, Verdict,
    VerificationReport, DEFAULT_BUDGET,
};
