//! `--config <file>` support: keys of a JSON object become flags placed in
//! front of the ones typed on the command line, so the typed ones win.

use std::path::PathBuf;

use serde_json::Value;

/// Globals that take a value, needed to find the subcommand in argv.
const VALUED_GLOBALS: [&str; 2] = ["--config", "--threads"];

/// Path given with `--config`, if any.
pub fn config_path(argv: &[String]) -> Option<PathBuf> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

/// Index of the subcommand in argv.
fn subcommand_index(argv: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let a = &argv[i];
        if VALUED_GLOBALS.contains(&a.as_str()) {
            i += 2;
            continue;
        }
        if !a.starts_with('-') {
            return Some(i);
        }
        i += 1;
    }
    None
}

/// Turns a JSON object into flags. Underscores in keys become dashes;
/// `true` becomes a bare switch, `false` and `null` are dropped, arrays
/// repeat the flag.
pub fn flags_from(config: &Value) -> Result<Vec<String>, String> {
    let obj = config
        .as_object()
        .ok_or_else(|| "config file must hold a JSON object".to_string())?;
    let mut out = Vec::new();
    for (key, v) in obj {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" {
            continue;
        }
        push_value(&mut out, &flag, v)?;
    }
    Ok(out)
}

fn push_value(out: &mut Vec<String>, flag: &str, v: &Value) -> Result<(), String> {
    match v {
        Value::Null | Value::Bool(false) => {}
        Value::Bool(true) => out.push(flag.to_string()),
        Value::Number(n) => {
            out.push(flag.to_string());
            out.push(n.to_string());
        }
        Value::String(s) => {
            out.push(flag.to_string());
            out.push(s.clone());
        }
        Value::Array(items) => {
            for item in items {
                push_value(out, flag, item)?;
            }
        }
        Value::Object(_) => return Err(format!("config key {flag} cannot hold an object")),
    }
    Ok(())
}

/// argv with the config flags spliced in right after the subcommand.
pub fn merge(argv: &[String], extra: Vec<String>) -> Vec<String> {
    match subcommand_index(argv) {
        Some(i) => {
            let mut out = argv[..=i].to_vec();
            out.extend(extra);
            out.extend_from_slice(&argv[i + 1..]);
            out
        }
        None => argv.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn splices_after_subcommand() {
        let argv = s(&["gridfreq", "--config", "c.json", "fp-kurtosis", "--b", "1"]);
        assert_eq!(config_path(&argv), Some(PathBuf::from("c.json")));
        let extra =
            flags_from(&serde_json::json!({"d_over_m": 0.5, "b": 2, "quiet": true, "x": false}))
                .unwrap();
        let merged = merge(&argv, extra);
        assert_eq!(
            merged,
            s(&[
                "gridfreq",
                "--config",
                "c.json",
                "fp-kurtosis",
                "--b",
                "2",
                "--d-over-m",
                "0.5",
                "--quiet",
                "--b",
                "1"
            ])
        );
    }
}
