mod args;
mod commands;
mod error;
mod output;
mod svg;

use std::ffi::OsString;
use std::path::Path;

use clap::Parser;

use args::Cli;
use error::{CliError, Kind};

/// Splices `--config FILE` into the argument list: every key of the flat JSON
/// object becomes `--key value` unless that flag was given explicitly.
fn expand_config(raw: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut args: Vec<String> = Vec::with_capacity(raw.len());
    for a in raw {
        args.push(a.into_string().map_err(|a| CliError::usage(format!("argument is not UTF-8: {a:?}")))?);
    }
    let mut config = None;
    let mut i = 1;
    while i < args.len() {
        if let Some(v) = args[i].strip_prefix("--config=") {
            config = Some(v.to_string());
            args.remove(i);
        } else if args[i] == "--config" {
            let v = args.get(i + 1).cloned().ok_or_else(|| CliError::usage("--config needs a file"))?;
            config = Some(v);
            args.drain(i..i + 2);
        } else {
            i += 1;
        }
    }
    let Some(config) = config else {
        return Ok(args.into_iter().map(OsString::from).collect());
    };
    let raw = std::fs::read(&config).map_err(|e| CliError::io(Path::new(&config), e))?;
    let value: serde_json::Value = serde_json::from_slice(&raw).map_err(|e| CliError::usage(format!("{config}: {e}")))?;
    let serde_json::Value::Object(map) = value else {
        return Err(CliError::usage(format!("{config}: expected a JSON object")));
    };
    let Some(sub) = args.iter().skip(1).position(|a| !a.starts_with('-')).map(|p| p + 1) else {
        return Err(CliError::usage("missing command"));
    };
    let mut extra = Vec::new();
    for (key, v) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        let given = args.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if given {
            continue;
        }
        let text = |v: &serde_json::Value| match v {
            serde_json::Value::String(s) => Ok(s.clone()),
            serde_json::Value::Number(n) => Ok(n.to_string()),
            other => Err(CliError::usage(format!("{config}: unsupported value for {key}: {other}"))),
        };
        match &v {
            serde_json::Value::Null | serde_json::Value::Bool(false) => {}
            serde_json::Value::Bool(true) => extra.push(flag),
            serde_json::Value::Array(items) => {
                let parts = items.iter().map(text).collect::<Result<Vec<_>, _>>()?;
                extra.push(flag);
                extra.push(parts.join(","));
            }
            other => {
                extra.push(flag);
                extra.push(text(other)?);
            }
        }
    }
    args.splice(sub + 1..sub + 1, extra);
    Ok(args.into_iter().map(OsString::from).collect())
}

fn run() -> Result<(), CliError> {
    let argv = expand_config(std::env::args_os().collect())?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return Ok(());
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return Err(CliError::new(Kind::Usage, "Usage", first));
        }
    };
    commands::execute(cli.command)
}

fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(e.kind.exit_code());
    }
}
