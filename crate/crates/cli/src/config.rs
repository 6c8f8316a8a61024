//! `key=value` config files and run manifests.
//!
//! A config file is spliced into the argument list as `--key value` pairs
//! placed before the user's own flags; since every flag overrides earlier
//! occurrences of itself, explicit flags win. Manifests use the same format,
//! so a manifest can be passed back through `--config` to repeat a run.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Command};

/// Returns `argv` with the contents of any `--config FILE` of the chosen
/// subcommand expanded in place.
pub fn expand(argv: Vec<OsString>, cli: &Command) -> Result<Vec<OsString>> {
    let Some(sub_name) = argv.get(1).and_then(|s| s.to_str()) else {
        return Ok(argv);
    };
    let Some(sub) = cli.find_subcommand(sub_name) else {
        return Ok(argv);
    };
    let mut path = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut iter = argv[2..].iter();
    while let Some(arg) = iter.next() {
        match arg.to_str() {
            Some("--config") => {
                let value = iter.next().context("--config needs a file argument")?;
                path = Some(value.clone());
            }
            Some(s) if s.starts_with("--config=") => path = Some(OsString::from(&s["--config=".len()..])),
            _ => rest.push(arg.clone()),
        }
    }
    let Some(path) = path else {
        return Ok(argv);
    };
    let path = Path::new(&path);
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut out = argv[..2].to_vec();
    out.extend(config_args(&text, sub).with_context(|| format!("in config {}", path.display()))?);
    out.extend(rest);
    Ok(out)
}

fn config_args(text: &str, sub: &Command) -> Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected key=value", lineno + 1);
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) && key != "config")
            .with_context(|| format!("line {}: unknown key {key:?} for {}", lineno + 1, sub.get_name()))?;
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match value {
                "true" => out.push(format!("--{key}").into()),
                "false" => {}
                _ => bail!("line {}: {key} must be true or false", lineno + 1),
            }
        } else {
            out.push(format!("--{key}").into());
            out.push(value.into());
        }
    }
    Ok(out)
}

/// Writes `# proxyhash <version>` plus one `key=value` line per entry.
pub fn write_manifest(path: &Path, command: &str, entries: &[(&str, String)]) -> Result<()> {
    let mut text = format!("# proxyhash {} {command}\n", env!("CARGO_PKG_VERSION"));
    for (k, v) in entries {
        text.push_str(&format!("{k}={v}\n"));
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Arg;

    fn cli() -> Command {
        Command::new("t").subcommand(
            Command::new("run")
                .args_override_self(true)
                .arg(Arg::new("alpha").long("alpha"))
                .arg(Arg::new("phnet-lr").long("phnet-lr"))
                .arg(Arg::new("standardize").long("standardize").action(ArgAction::SetTrue))
                .arg(Arg::new("config").long("config")),
        )
    }

    fn strings(v: &[OsString]) -> Vec<&str> {
        v.iter().map(|s| s.to_str().unwrap()).collect()
    }

    #[test]
    fn config_lines_become_leading_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        fs::write(&path, "# comment\nalpha = 0.5\nphnet_lr=0.01\nstandardize=true\n\n").unwrap();
        let argv: Vec<OsString> = ["t", "run", "--alpha", "0.2", "--config", path.to_str().unwrap()]
            .iter()
            .map(OsString::from)
            .collect();
        let out = expand(argv, &cli()).unwrap();
        assert_eq!(
            strings(&out),
            ["t", "run", "--alpha", "0.5", "--phnet-lr", "0.01", "--standardize", "--alpha", "0.2"]
        );
        let m = cli().get_matches_from(out);
        assert_eq!(m.subcommand_matches("run").unwrap().get_one::<String>("alpha").unwrap(), "0.2");
    }

    #[test]
    fn bad_config_lines_are_rejected() {
        let sub = cli().find_subcommand("run").unwrap().clone();
        assert!(config_args("beta=1", &sub).is_err());
        assert!(config_args("alpha", &sub).is_err());
        assert!(config_args("standardize=yes", &sub).is_err());
        assert!(config_args("config=x", &sub).is_err());
        assert!(config_args("standardize=false", &sub).unwrap().is_empty());
    }

    #[test]
    fn no_config_leaves_arguments_alone() {
        let argv: Vec<OsString> = ["t", "run", "--alpha", "1"].iter().map(OsString::from).collect();
        assert_eq!(expand(argv.clone(), &cli()).unwrap(), argv);
    }
}
