//! Folding a TOML config file into the argument list.
//!
//! Keys are flag names (`noise_amp` or `noise-amp`). A key only takes
//! effect when the flag was not given on the command line, so the order is
//! built-in default < file < explicit flag.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, Command};

fn render(key: &str, v: &toml::Value) -> Result<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        other => bail!("config key {key:?}: unsupported value {other}"),
    })
}

/// Extra arguments to append after the subcommand's own arguments.
pub fn config_args(path: &Path, sub: &Command, matches: &ArgMatches) -> Result<Vec<OsString>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let table: toml::Table = text
        .parse()
        .with_context(|| format!("parsing {}", path.display()))?;
    let mut out = Vec::new();
    for (key, value) in &table {
        let id = key.replace('-', "_");
        let Some(arg) = sub.get_arguments().find(|a| a.get_id().as_str() == id) else {
            bail!(
                "{}: `{}` has no flag {key:?}",
                path.display(),
                sub.get_name()
            );
        };
        if id == "config" {
            bail!(
                "{}: a config file cannot name another config file",
                path.display()
            );
        }
        if matches.value_source(&id) == Some(ValueSource::CommandLine) {
            continue;
        }
        let long = format!("--{}", arg.get_long().expect("every flag is long"));
        let values: Vec<&toml::Value> = match value {
            toml::Value::Array(items) => items.iter().collect(),
            v => vec![v],
        };
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match value {
                toml::Value::Boolean(true) => out.push(long.into()),
                toml::Value::Boolean(false) => {}
                _ => bail!("config key {key:?} must be true or false"),
            }
            continue;
        }
        for v in values {
            out.push(long.clone().into());
            out.push(render(key, v)?.into());
        }
    }
    Ok(out)
}
