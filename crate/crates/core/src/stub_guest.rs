//! A fixed-cost fake guest language used to exercise the harness without a
//! real interpreter.
//!
//! A stub program is a list of functions:
//!
//! ```text
//! # sums a list with ~40 units of busy work per element
//! def solve
//!     work 40 1
//!     return sum
//! ```
//!
//! Operations run top to bottom:
//!
//! * `work <per_unit> [power]` spins `per_unit * n^power` loop iterations,
//!   where `n` is the magnitude of the first argument.
//! * `work_const <iters>`, `sleep_ms <ms>`, `spin`, `alloc_forever`,
//!   `fail <message>`, `print <text>` (to stderr).
//! * `return <expr>` with `arg <i>`, `sum`, `sum_plus <k>`, `len`,
//!   `float <f64>`, `float_sum_plus <f64>`, `json <encoded value>`,
//!   `scaled_list`, `scaled_int [cap]`.
//!
//! The measured window of the stub runner is exactly [`dpe_measured_region`].

use std::hint::black_box;
use std::time::Duration;

use num_bigint::BigInt;
use num_traits::Zero;

use crate::value::{Args, Value};

/// Symbol name exported around the measured invocation.
pub const REGION_SYMBOL: &str = "dpe_measured_region";

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Work { per_unit: u64, power: u32 },
    WorkConst(u64),
    SleepMs(u64),
    Spin,
    AllocForever,
    Fail(String),
    Print(String),
    Return(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Arg(usize),
    Sum,
    SumPlus(i64),
    Len,
    Float(f64),
    FloatSumPlus(f64),
    Literal(Value),
    ScaledList,
    ScaledInt(Option<u64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StubFunction {
    pub name: String,
    pub body: Vec<Op>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StubProgram {
    pub functions: Vec<StubFunction>,
}

impl StubProgram {
    pub fn parse(source: &str) -> Result<Self, String> {
        let mut functions: Vec<StubFunction> = Vec::new();
        for (lineno, raw) in source.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| format!("line {}: {msg}: {raw:?}", lineno + 1);
            let (head, rest) = match line.split_once(char::is_whitespace) {
                Some((h, r)) => (h, r.trim()),
                None => (line, ""),
            };
            if head == "def" {
                let name = rest.split('(').next().unwrap_or("").trim_end_matches(':').trim();
                if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
                    return Err(err("bad function name"));
                }
                functions.push(StubFunction {
                    name: name.to_string(),
                    body: Vec::new(),
                });
                continue;
            }
            let func = functions
                .last_mut()
                .ok_or_else(|| err("statement outside of a def"))?;
            let num = |s: Option<&str>| -> Result<u64, String> {
                s.ok_or_else(|| err("missing number"))?
                    .parse::<u64>()
                    .map_err(|_| err("bad number"))
            };
            let mut words = rest.split_whitespace();
            let op = match head {
                "work" => {
                    let per_unit = num(words.next())?;
                    let power = match words.next() {
                        Some(p) => p.parse::<u32>().map_err(|_| err("bad power"))?,
                        None => 1,
                    };
                    if power > 4 {
                        return Err(err("power above 4"));
                    }
                    Op::Work { per_unit, power }
                }
                "work_const" => Op::WorkConst(num(words.next())?),
                "sleep_ms" => Op::SleepMs(num(words.next())?),
                "spin" => Op::Spin,
                "alloc_forever" => Op::AllocForever,
                "fail" => Op::Fail(rest.to_string()),
                "print" => Op::Print(rest.to_string()),
                "return" => Op::Return(parse_expr(rest).map_err(|m| err(&m))?),
                _ => return Err(err("unknown operation")),
            };
            func.body.push(op);
        }
        Ok(StubProgram { functions })
    }

    pub fn function(&self, name: &str) -> Option<&StubFunction> {
        self.functions.iter().find(|f| f.name == name)
    }
}

fn parse_expr(text: &str) -> Result<Expr, String> {
    let (head, rest) = match text.split_once(char::is_whitespace) {
        Some((h, r)) => (h, r.trim()),
        None => (text, ""),
    };
    Ok(match head {
        "arg" => Expr::Arg(rest.parse().map_err(|_| "bad arg index".to_string())?),
        "sum" => Expr::Sum,
        "sum_plus" => Expr::SumPlus(rest.parse().map_err(|_| "bad offset".to_string())?),
        "len" => Expr::Len,
        "float" => Expr::Float(rest.parse().map_err(|_| "bad float".to_string())?),
        "float_sum_plus" => {
            Expr::FloatSumPlus(rest.parse().map_err(|_| "bad float".to_string())?)
        }
        "json" => Expr::Literal(Value::decode(rest).map_err(|e| e.to_string())?),
        "scaled_list" => Expr::ScaledList,
        "scaled_int" => Expr::ScaledInt(if rest.is_empty() {
            None
        } else {
            Some(rest.parse().map_err(|_| "bad cap".to_string())?)
        }),
        other => return Err(format!("unknown expression {other:?}")),
    })
}

#[inline(never)]
fn burn(iters: u64) -> u64 {
    let mut acc = 0u64;
    let mut i = 0u64;
    while i < iters {
        acc = black_box(acc ^ i).wrapping_add(1);
        i += 1;
    }
    acc
}

fn work_units(args: &Args, per_unit: u64, power: u32) -> u64 {
    let n = args.first().map(Value::magnitude).unwrap_or(1) as u128;
    let iters = (per_unit as u128).saturating_mul(n.saturating_pow(power));
    iters.min(u64::MAX as u128) as u64
}

fn int_sum(args: &Args) -> Result<BigInt, String> {
    match args.first() {
        Some(Value::Int(i)) => Ok(i.clone()),
        Some(Value::List(items)) => items.iter().try_fold(BigInt::zero(), |acc, v| match v {
            Value::Int(i) => Ok(acc + i),
            other => Err(format!("sum over non-int {}", other.type_name())),
        }),
        Some(other) => Err(format!("cannot sum {}", other.type_name())),
        None => Err("sum of no arguments".into()),
    }
}

fn float_sum(args: &Args) -> Result<f64, String> {
    match args.first() {
        Some(Value::Float(f)) => Ok(*f),
        Some(Value::List(items)) => items.iter().try_fold(0.0, |acc, v| match v {
            Value::Float(f) => Ok(acc + f),
            Value::Int(i) => Ok(acc + i.to_string().parse::<f64>().unwrap_or(f64::NAN)),
            other => Err(format!("sum over {}", other.type_name())),
        }),
        Some(Value::Int(i)) => Ok(i.to_string().parse::<f64>().unwrap_or(f64::NAN)),
        Some(other) => Err(format!("cannot sum {}", other.type_name())),
        None => Err("sum of no arguments".into()),
    }
}

fn scale_of(args: &Args) -> Result<u64, String> {
    args.first()
        .and_then(Value::as_int)
        .and_then(|i| num_traits::ToPrimitive::to_u64(i))
        .ok_or_else(|| "generator expects a non-negative integer scale".to_string())
}

fn eval(expr: &Expr, args: &Args) -> Result<Value, String> {
    Ok(match expr {
        Expr::Arg(i) => args
            .0
            .get(*i)
            .cloned()
            .ok_or_else(|| format!("no argument {i}"))?,
        Expr::Sum => Value::Int(int_sum(args)?),
        Expr::SumPlus(k) => Value::Int(int_sum(args)? + BigInt::from(*k)),
        Expr::Len => Value::int(args.first().map(Value::magnitude).unwrap_or(0) as i64),
        Expr::Float(f) => Value::Float(*f),
        Expr::FloatSumPlus(eps) => Value::Float(float_sum(args)? + eps),
        Expr::Literal(v) => v.clone(),
        Expr::ScaledList => {
            let n = scale_of(args)?;
            Value::List(vec![Value::List((0..n as i64).map(Value::int).collect())])
        }
        Expr::ScaledInt(cap) => {
            let n = scale_of(args)?;
            let n = cap.map_or(n, |c| n.min(c));
            Value::List(vec![Value::Int(BigInt::from(n))])
        }
    })
}

/// Runs one function body. This is the only code inside the measured window
/// of the stub runner.
#[no_mangle]
#[inline(never)]
pub fn dpe_measured_region(func: &StubFunction, args: &Args) -> Result<Value, String> {
    let mut sink = 0u64;
    for op in &func.body {
        match op {
            Op::Work { per_unit, power } => sink ^= burn(work_units(args, *per_unit, *power)),
            Op::WorkConst(n) => sink ^= burn(*n),
            Op::SleepMs(ms) => std::thread::sleep(Duration::from_millis(*ms)),
            Op::Spin => loop {
                sink = black_box(sink.wrapping_add(1));
            },
            Op::AllocForever => {
                let mut hoard: Vec<Vec<u8>> = Vec::new();
                loop {
                    hoard.push(vec![1u8; 16 << 20]);
                    black_box(&hoard);
                }
            }
            Op::Fail(msg) => return Err(format!("guest raised: {msg}")),
            Op::Print(text) => eprintln!("{text}"),
            Op::Return(expr) => {
                black_box(sink);
                return eval(expr, args);
            }
        }
    }
    black_box(sink);
    Ok(Value::Null)
}
