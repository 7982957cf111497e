//! Flat TOML config files. Every key is a long flag name of the chosen
//! subcommand (`iou-thr = 0.5`, `crop-images = true`); the values are
//! spliced in front of the command-line flags so explicit flags win.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::CommandFactory;

use crate::args::Cli;
use crate::error::CliError;

/// Finds `--config <path>` or `--config=<path>` in raw arguments.
fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn value_to_arg(key: &str, v: &toml::Value) -> Result<Option<String>, CliError> {
    let scalar = |v: &toml::Value| -> Result<String, CliError> {
        match v {
            toml::Value::String(s) => Ok(s.clone()),
            toml::Value::Integer(i) => Ok(i.to_string()),
            toml::Value::Float(f) => Ok(f.to_string()),
            _ => Err(CliError::Config(format!("`{key}` must be a scalar or a list of scalars"))),
        }
    };
    match v {
        toml::Value::Boolean(true) => Ok(None),
        toml::Value::Array(items) => Ok(Some(
            items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?.join(","),
        )),
        other => scalar(other).map(Some),
    }
}

/// Reads the config file named in `argv`, if any, and returns the argument
/// list with its settings inserted right after the subcommand name.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|source| CliError::Io { path: path.clone(), source })?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    splice(argv, &table, &path)
}

fn splice(argv: Vec<OsString>, table: &toml::Table, path: &Path) -> Result<Vec<OsString>, CliError> {
    let cmd = Cli::command();
    let subcommands: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_owned()).collect();
    let Some(pos) = argv.iter().position(|a| subcommands.iter().any(|s| a.to_str() == Some(s))) else {
        // clap will report the missing subcommand
        return Ok(argv);
    };
    let name = argv[pos].to_string_lossy().into_owned();
    let sub = cmd.find_subcommand(&name).expect("listed above");
    let known: Vec<String> = sub
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_owned))
        .filter(|l| l != "config")
        .collect();

    let mut injected = Vec::new();
    for (key, value) in table {
        let flag = key.replace('_', "-");
        if !known.contains(&flag) {
            if subcommands.iter().all(|s| {
                !cmd.find_subcommand(s)
                    .expect("listed above")
                    .get_arguments()
                    .any(|a| a.get_long() == Some(flag.as_str()))
            }) {
                return Err(CliError::Config(format!(
                    "{}: `{key}` is not a flag of any subcommand",
                    path.display()
                )));
            }
            log::debug!("config key `{key}` does not apply to `{name}`");
            continue;
        }
        if matches!(value, toml::Value::Boolean(false)) {
            continue;
        }
        injected.push(OsString::from(format!("--{flag}")));
        if let Some(v) = value_to_arg(key, value)? {
            injected.push(OsString::from(v));
        }
    }
    let mut out = argv;
    out.splice(pos + 1..pos + 1, injected);
    Ok(out)
}
