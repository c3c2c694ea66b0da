//! Stub guest runner: `dpe-stub-guest <solution_file> <entry_point> <input_file>`.
//!
//! Speaks the READY/GO/DONE marker protocol on stdin/stdout for programs
//! written in the stub language (see `dpe_core::stub_guest`).

use std::io::{self, BufRead, Write};
use std::process::ExitCode;

use dpe_core::stub_guest::{dpe_measured_region, StubProgram};
use dpe_core::value::Args;

fn load(solution: &str, entry: &str, input: &str) -> Result<(StubProgram, Args), String> {
    let source = std::fs::read_to_string(solution).map_err(|e| format!("{solution}: {e}"))?;
    let program = StubProgram::parse(&source)?;
    if program.function(entry).is_none() {
        return Err(format!("entry point {entry:?} not defined"));
    }
    let text = std::fs::read_to_string(input).map_err(|e| format!("{input}: {e}"))?;
    let args = Args::decode(&text).map_err(|e| e.to_string())?;
    Ok((program, args))
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    if argv.len() != 4 {
        eprintln!("usage: dpe-stub-guest <solution_file> <entry_point> <input_file>");
        return ExitCode::from(2);
    }
    let (program, args) = match load(&argv[1], &argv[2], &argv[3]) {
        Ok(loaded) => loaded,
        Err(e) => {
            eprintln!("load failure: {e}");
            return ExitCode::from(2);
        }
    };
    let func = program.function(&argv[2]).expect("checked at load");

    let mut out = io::stdout().lock();
    if out.write_all(b"READY\n").and_then(|_| out.flush()).is_err() {
        return ExitCode::from(3);
    }
    let mut line = String::new();
    if io::stdin().lock().read_line(&mut line).is_err() || line != "GO\n" {
        eprintln!("protocol: expected GO, got {line:?}");
        return ExitCode::from(3);
    }

    let result = dpe_measured_region(func, &args);

    match result {
        Ok(value) => {
            let ok = out
                .write_all(b"DONE\n")
                .and_then(|_| out.flush())
                .and_then(|_| writeln!(out, "{}", value.encode()))
                .and_then(|_| out.flush());
            if ok.is_err() {
                return ExitCode::from(3);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let _ = out.write_all(b"FAIL\n").and_then(|_| out.flush());
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
