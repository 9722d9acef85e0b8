//! Flat `key=value` config files and the effective run config embedded in
//! every artifact.
//!
//! A config file is either a plain list of `key=value` lines, or an artifact
//! written by this tool: a CSV whose `# key=value` header lines carry the
//! config (recognized by a leading `## schema:` line), or a JSON document
//! with a `config` object. Lines starting with `##` are comments.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::Path;

use clap::parser::ValueSource;
use clap::{ArgMatches, Command};

use crate::CliError;

pub type RunConfig = BTreeMap<String, String>;

/// Keys that are never recorded or read back.
const SKIP: [&str; 3] = ["config", "help", "version"];

fn is_key(k: &str) -> bool {
    let mut chars = k.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn entry(line: &str) -> Option<(String, String)> {
    let (k, v) = line.split_once('=')?;
    let k = k.trim();
    is_key(k).then(|| (k.to_string(), v.trim().to_string()))
}

pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, CliError> {
    if text.trim_start().starts_with('{') {
        let doc: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("config JSON: {e}")))?;
        let obj = doc
            .get("config")
            .and_then(|c| c.as_object())
            .ok_or_else(|| CliError::Config("config JSON has no `config` object".into()))?;
        return obj
            .iter()
            .map(|(k, v)| match v.as_str() {
                Some(s) => Ok((k.clone(), s.to_string())),
                None => Err(CliError::Config(format!("config value for {k} must be a string"))),
            })
            .collect();
    }
    let artifact = text.lines().find(|l| !l.trim().is_empty()).is_some_and(|l| l.starts_with("## schema:"));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with("##") {
            continue;
        }
        if let Some(rest) = t.strip_prefix('#') {
            out.extend(entry(rest));
        } else if !artifact {
            out.push(entry(t).ok_or_else(|| CliError::Config(format!("config line {}: expected key=value", i + 1)))?);
        }
    }
    Ok(out)
}

/// Walks to the innermost subcommand, returning its path, definition and matches.
fn innermost<'a>(cmd: &'a Command, m: &'a ArgMatches) -> (Vec<String>, &'a Command, &'a ArgMatches) {
    let (mut cmd, mut m) = (cmd, m);
    let mut path = Vec::new();
    while let Some((name, sub_m)) = m.subcommand() {
        path.push(name.to_string());
        cmd = cmd.find_subcommand(name).expect("matched subcommand is defined");
        m = sub_m;
    }
    (path, cmd, m)
}

/// Appends `--key value` for config entries the command line left unset.
pub fn merge_config(
    argv: &[OsString],
    cmd: &Command,
    matches: &ArgMatches,
    file: &Path,
) -> Result<Vec<OsString>, CliError> {
    let text = std::fs::read_to_string(file)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", file.display())))?;
    let (path, sub, m) = innermost(cmd, matches);
    let mut out = argv.to_vec();
    for (key, value) in parse_config_text(&text)? {
        if key == "command" {
            if value != path.join(" ") {
                return Err(CliError::Config(format!("config was recorded for `{value}`, not `{}`", path.join(" "))));
            }
            continue;
        }
        if SKIP.contains(&key.as_str()) {
            continue;
        }
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| CliError::Config(format!("unknown config key {key:?} for `{}`", path.join(" "))))?;
        if m.value_source(arg.get_id().as_str()) == Some(ValueSource::CommandLine) {
            continue;
        }
        if arg.get_action().takes_values() {
            out.push(format!("--{key}").into());
            out.push(value.into());
        } else {
            match value.as_str() {
                "true" => out.push(format!("--{key}").into()),
                "false" => {}
                other => return Err(CliError::Config(format!("config key {key} expects true or false, got {other:?}"))),
            }
        }
    }
    Ok(out)
}

/// Every recorded argument of the innermost subcommand, defaults included,
/// plus `command`.
pub fn effective(cmd: &Command, matches: &ArgMatches) -> RunConfig {
    let (path, sub, m) = innermost(cmd, matches);
    let mut cfg = RunConfig::new();
    cfg.insert("command".into(), path.join(" "));
    for arg in sub.get_arguments() {
        let Some(long) = arg.get_long() else { continue };
        if SKIP.contains(&long) {
            continue;
        }
        if let Some(raw) = m.get_raw(arg.get_id().as_str()) {
            let vals: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
            cfg.insert(long.to_string(), vals.join(","));
        }
    }
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_and_artifact_text() {
        let plain = "## run\nseed = 4\nlaw=bernoulli:p=0.7\n";
        assert_eq!(
            parse_config_text(plain).unwrap(),
            vec![("seed".into(), "4".into()), ("law".into(), "bernoulli:p=0.7".into())]
        );
        assert!(parse_config_text("seed 4\n").is_err());
        let csv = "## schema: shape-v1\n# N=10\n## verdict: holds\nx,law\n0.5,exp:rate=1\n";
        assert_eq!(parse_config_text(csv).unwrap(), vec![("N".into(), "10".into())]);
        let json = r#"{"config": {"seed": "3"}, "result": 1}"#;
        assert_eq!(parse_config_text(json).unwrap(), vec![("seed".into(), "3".into())]);
    }
}
