//! Flag parsing helpers and the `--config` key=value file.

use std::ffi::OsString;
use std::fs;

use crate::error::{CliError, CliResult};

/// Parses `a,b,c` into numbers.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad number '{p}': {e}"))).collect()
}

/// Parses `lo:hi` with `0 < lo <= hi`.
pub fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got '{s}'"))?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("bad lower bound '{a}': {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("bad upper bound '{b}': {e}"))?;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(format!("invalid range {lo}:{hi}"));
    }
    Ok((lo, hi))
}

/// Parses `lambda0,c`.
pub fn parse_schedule(s: &str) -> Result<(f64, f64), String> {
    match parse_list(s)?.as_slice() {
        [l, c] => Ok((*l, *c)),
        _ => Err(format!("expected lambda0,c, got '{s}'")),
    }
}

/// Reads a flat `key = value` file. Blank lines and `#` comments are skipped.
pub fn read_config(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", no + 1)))?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            return Err(CliError::Usage(format!("config line {}: empty key", no + 1)));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Removes `--config <path>` from `args` and splices the file's entries in
/// as flags right after the subcommand, so explicit flags later on the
/// command line override them. `true` becomes a bare switch, `false` is
/// dropped.
pub fn expand_config(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut path = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        match a.to_str() {
            Some("--config") => {
                let p = it.next().ok_or_else(|| CliError::Usage("--config needs a path".into()))?;
                path = Some(p);
            }
            Some(s) if s.starts_with("--config=") => path = Some(OsString::from(&s["--config=".len()..])),
            _ => rest.push(a),
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.to_string_lossy())))?;
    let mut flags = Vec::new();
    for (k, v) in read_config(&text)? {
        match v.as_str() {
            "true" => flags.push(OsString::from(format!("--{k}"))),
            "false" => {}
            _ => flags.push(OsString::from(format!("--{k}={v}"))),
        }
    }
    let at = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|i| i + 2)
        .ok_or_else(|| CliError::Usage("--config needs a subcommand".into()))?;
    rest.splice(at..at, flags);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_list("0, 0,30").unwrap(), vec![0.0, 0.0, 30.0]);
        assert!(parse_list("1,x").is_err());
        assert_eq!(parse_range("30:300").unwrap(), (30.0, 300.0));
        assert!(parse_range("3:1").is_err());
        assert_eq!(parse_schedule("0.1,10").unwrap(), (0.1, 10.0));
    }

    #[test]
    fn config_lines() {
        let kv = read_config("# c\n\ndim = 5\nconvex_lambda=0.5\n").unwrap();
        assert_eq!(kv, vec![("dim".into(), "5".into()), ("convex-lambda".into(), "0.5".into())]);
        assert!(read_config("oops").is_err());
    }

    #[test]
    fn config_flags_precede_explicit_ones() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.txt");
        fs::write(&p, "dim=5\naccelerate=true\nquiet=false\n").unwrap();
        let args = os(&["dppm", "--config", p.to_str().unwrap(), "bench-convex-rate", "--dim", "7"]);
        let out = expand_config(args).unwrap();
        assert_eq!(out, os(&["dppm", "bench-convex-rate", "--dim=5", "--accelerate", "--dim", "7"]));
    }

    #[test]
    fn no_config_is_identity() {
        let args = os(&["dppm", "validate", "--suite", "all"]);
        assert_eq!(expand_config(args.clone()).unwrap(), args);
    }
}
