//! `--config` files: one `key = value` per line, `#` starts a comment.
//! Entries become flags appended to argv unless the flag is already given,
//! so the command line always wins. `true` stands for a bare switch and
//! `false` leaves it off.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;

use clap::Command;

pub fn parse(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("config line {}: expected `key = value`", i + 1))?;
        let key = k.trim().trim_start_matches("--").to_string();
        let val = v.trim().trim_matches('"').to_string();
        if key.is_empty() {
            return Err(format!("config line {}: empty key", i + 1));
        }
        out.push((key, val));
    }
    Ok(out)
}

fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

fn longs(cmd: &Command) -> BTreeSet<String> {
    cmd.get_arguments().filter_map(|a| a.get_long().map(str::to_string)).collect()
}

fn has_flag(argv: &[OsString], key: &str) -> bool {
    let bare = format!("--{key}");
    let eq = format!("--{key}=");
    argv.iter().any(|a| {
        let s = a.to_string_lossy();
        s == bare || s.starts_with(&eq)
    })
}

/// argv with config-file entries merged in. Keys that no subcommand knows
/// are an error; keys that belong to a different subcommand are skipped, so
/// one file can serve several commands.
pub fn merge(argv: Vec<OsString>, cmd: &Command) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config {}: {e}", path.to_string_lossy()))?;
    let entries = parse(&text)?;

    let global = longs(cmd);
    let sub = argv.iter().skip(1).find_map(|a| cmd.find_subcommand(a.to_string_lossy().as_ref()).cloned());
    let mut known_anywhere = global.clone();
    for s in cmd.get_subcommands() {
        known_anywhere.extend(longs(s));
    }
    let here: BTreeSet<String> = match &sub {
        Some(s) => global.union(&longs(s)).cloned().collect(),
        None => global,
    };

    let mut out = argv.clone();
    for (key, val) in entries {
        if key == "config" {
            continue;
        }
        if !known_anywhere.contains(&key) {
            return Err(format!("config: unknown key `{key}`"));
        }
        if !here.contains(&key) || has_flag(&argv, &key) {
            continue;
        }
        match val.as_str() {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                out.push(format!("--{key}").into());
                out.push(val.into());
            }
        }
    }
    Ok(out)
}
