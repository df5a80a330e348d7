//! Flat `key=value` configuration files.
//!
//! Each key names a long flag without its leading dashes (`seed=7`,
//! `burn-in=100`). Values from the file are appended to the command line
//! only for flags that are not already given there, so explicit flags
//! always win. `true` turns a switch on and `false` leaves it off. Blank
//! lines and lines starting with `#` are ignored.

use std::ffi::OsString;
use std::path::Path;

use crowdbelief::{Error, Result};

pub fn parse(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Parse(format!(
                "{}:{}: expected key=value, found {line:?}",
                origin.display(),
                i + 1
            ))
        })?;
        let key = key.trim().trim_start_matches("--").to_string();
        if key.is_empty() || key == "config" {
            return Err(Error::Parse(format!(
                "{}:{}: invalid key {key:?}",
                origin.display(),
                i + 1
            )));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

/// Position of the `--config` value in `args`, if any.
fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

fn given(args: &[OsString], key: &str) -> bool {
    let flag = format!("--{key}");
    args.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag || s.starts_with(&format!("{flag}="))
    })
}

/// Appends file settings that the command line does not already set.
pub fn merge(mut args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let path = Path::new(&path).to_path_buf();
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    for (key, value) in parse(&text, &path)? {
        if given(&args, &key) {
            continue;
        }
        match value.as_str() {
            "true" => args.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                args.push(format!("--{key}").into());
                args.push(value.into());
            }
        }
    }
    Ok(args)
}
