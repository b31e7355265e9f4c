//! `key = value` config files, expanded into command-line flags.
//!
//! Keys are long flag names without the leading dashes (`lambda-u = 0.1`).
//! Whitespace-separated values become separate tokens (`shift = 5 5`), and
//! `true`/`false` toggle switches. The expanded flags are inserted before
//! the user's own flags, so anything given on the command line wins.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Tokens for one config file.
pub fn config_tokens(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    parse_config(&text).with_context(|| format!("parsing config file {}", path.display()))
}

pub fn parse_config(text: &str) -> Result<Vec<String>> {
    let mut tokens = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected `key = value`, got {raw:?}", i + 1);
        };
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            bail!("line {}: invalid key {key:?}", i + 1);
        }
        let value = value.trim();
        match value {
            "true" => tokens.push(format!("--{key}")),
            "false" => {}
            _ => {
                tokens.push(format!("--{key}"));
                tokens.extend(value.split_whitespace().map(str::to_string));
            }
        }
    }
    Ok(tokens)
}

/// Replaces `--config FILE` (or `--config=FILE`) after the subcommand with
/// the file's tokens, placed directly after the subcommand name.
pub fn expand_args(args: Vec<String>) -> Result<Vec<String>> {
    if args.len() < 2 {
        return Ok(args);
    }
    let mut head = args[..2].to_vec();
    let mut rest = Vec::new();
    let mut inserted = Vec::new();
    let mut iter = args[2..].iter();
    while let Some(arg) = iter.next() {
        if arg == "--config" {
            let Some(path) = iter.next() else {
                bail!("--config needs a file path");
            };
            inserted.extend(config_tokens(Path::new(path))?);
        } else if let Some(path) = arg.strip_prefix("--config=") {
            inserted.extend(config_tokens(Path::new(path))?);
        } else {
            rest.push(arg.clone());
        }
    }
    head.extend(inserted);
    head.extend(rest);
    Ok(head)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_values_and_switches() {
        let text = "# comment\nlambda_u = 0.5\nshift = 5 -3  # trailing\n\nverbose = true\nquiet = false\n";
        assert_eq!(
            parse_config(text).unwrap(),
            ["--lambda-u", "0.5", "--shift", "5", "-3", "--verbose"]
        );
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse_config("lambda-u 0.5").is_err());
        assert!(parse_config("= 3").is_err());
        assert!(parse_config("config = other.cfg").is_err());
    }

    #[test]
    fn config_flags_precede_user_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "iterations = 10\nlambda-k = 3\n").unwrap();
        let args: Vec<String> = ["specfuse", "fuse", "--iterations", "20", "--config"]
            .iter()
            .map(|s| s.to_string())
            .chain([path.display().to_string()])
            .collect();
        assert_eq!(
            expand_args(args).unwrap(),
            ["specfuse", "fuse", "--iterations", "10", "--lambda-k", "3", "--iterations", "20"]
        );
    }
}
