//! Flat `key = value` config files.
//!
//! Keys are long flag names of the subcommand (`n-trees = 100`, or
//! `n_trees = 100`). `true` turns a switch on and `false` leaves it off.
//! Config values are injected ahead of the command-line flags, so flags win.

use std::path::Path;

use crate::error::{Error, Result};
use crate::jsonl;

pub fn parse(path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in jsonl::lines(path)? {
        let line = line.trim();
        if line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, n, "expected `key = value`"))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() || key.starts_with('-') {
            return Err(Error::parse(path, n, format!("bad key {:?}", k.trim())));
        }
        out.push((key, v.trim().trim_matches('"').to_string()));
    }
    Ok(out)
}

pub fn to_args(pairs: &[(String, String)]) -> Vec<String> {
    let mut args = Vec::new();
    for (k, v) in pairs {
        match v.as_str() {
            "true" => args.push(format!("--{k}")),
            "false" => {}
            _ => {
                args.push(format!("--{k}"));
                args.push(v.clone());
            }
        }
    }
    args
}

/// Rewrites `argv` (program, subcommand, flags...) so the contents of any
/// `--config FILE` come right after the subcommand and the `--config` flag
/// itself is removed.
pub fn expand(argv: Vec<String>) -> Result<Vec<String>> {
    let mut config = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            config = Some(it.next().ok_or_else(|| Error::Format("--config needs a file".into()))?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            config = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let injected = to_args(&parse(Path::new(&path))?);
    // program name, then the subcommand (first non-flag argument)
    let at = rest.iter().skip(1).position(|a| !a.starts_with('-')).map(|i| i + 2).unwrap_or(rest.len());
    let tail = rest.split_off(at.min(rest.len()));
    rest.extend(injected);
    rest.extend(tail);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn injects_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.conf");
        std::fs::write(&p, "# comment\nk = 15\nforce = true\nquiet = false\nn_trees = 10\n").unwrap();
        let argv: Vec<String> = ["eegattn", "reduce", "--config", p.to_str().unwrap(), "--k", "5"]
            .map(String::from)
            .to_vec();
        let out = expand(argv).unwrap();
        assert_eq!(
            out,
            ["eegattn", "reduce", "--k", "15", "--force", "--n-trees", "10", "--k", "5"].map(String::from)
        );
    }

    #[test]
    fn rejects_malformed_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.conf");
        std::fs::write(&p, "k 15\n").unwrap();
        assert!(matches!(parse(&p), Err(Error::Parse { line: 1, .. })));
    }
}
