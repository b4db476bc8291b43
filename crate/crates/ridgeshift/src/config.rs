//! Config files, grid expressions and list values.

use std::fmt;

use ridgeshift_core::risk::log_grid;

/// One `key = value` entry with its line number.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Parses flat `key = value` lines. Blank lines and `#` comments are
/// skipped; keys may not repeat.
pub fn parse_config(text: &str) -> Result<Vec<Entry>, Vec<String>> {
    let mut entries: Vec<Entry> = Vec::new();
    let mut errors = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            errors.push(format!("line {line}: expected `key = value`, got `{content}`"));
            continue;
        };
        let key = k.trim().trim_start_matches("--").to_string();
        let value = v.trim().to_string();
        if key.is_empty() {
            errors.push(format!("line {line}: missing key"));
        } else if entries.iter().any(|e| e.key == key) {
            errors.push(format!("line {line}: duplicate key `{key}`"));
        } else {
            entries.push(Entry { line, key, value });
        }
    }
    if errors.is_empty() {
        Ok(entries)
    } else {
        Err(errors)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    Linear { start: f64, stop: f64, count: usize },
    Log { start: f64, stop: f64, count: usize },
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        match *self {
            Grid::Linear { start, stop, count } => {
                if count == 1 {
                    return vec![start];
                }
                let step = (stop - start) / (count - 1) as f64;
                (0..count)
                    .map(|i| if i + 1 == count { stop } else { start + step * i as f64 })
                    .collect()
            }
            Grid::Log { start, stop, count } => {
                if count == 1 {
                    vec![start]
                } else {
                    log_grid(start, stop, count)
                }
            }
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grid::Linear { start, stop, count } => write!(f, "{start}:{stop}:{count}"),
            Grid::Log { start, stop, count } => write!(f, "log:{start}:{stop}:{count}"),
        }
    }
}

pub fn parse_float(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{}` is not a number", s.trim()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{}` is not finite", s.trim()))
    }
}

/// `start:stop:count` (linear, inclusive) or `log:start:stop:count`.
pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.trim().split(':').collect();
    let (log, nums) = match parts.as_slice() {
        ["log", rest @ ..] => (true, rest),
        rest => (false, rest),
    };
    let [a, b, n] = nums else {
        return Err(format!("`{s}` is not `start:stop:count` or `log:start:stop:count`"));
    };
    let start = parse_float(a)?;
    let stop = parse_float(b)?;
    let count: usize = n.trim().parse().map_err(|_| format!("count `{}` is not a positive integer", n.trim()))?;
    if count == 0 {
        return Err("count must be >= 1".into());
    }
    if count > 1 && !(stop > start) {
        return Err(format!("stop ({stop}) must exceed start ({start})"));
    }
    if log {
        if !(start > 0.0) {
            return Err(format!("log grid needs start > 0, got {start}"));
        }
        Ok(Grid::Log { start, stop, count })
    } else {
        Ok(Grid::Linear { start, stop, count })
    }
}

/// Comma-separated floats.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    if s.trim().is_empty() {
        return Err("empty list".into());
    }
    s.split(',').map(parse_float).collect()
}

/// `;`-separated groups of comma-separated floats.
pub fn parse_groups(s: &str) -> Result<Vec<Vec<f64>>, String> {
    s.split(';').map(parse_list).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_lines() {
        let text = "# experiment\ngamma = 0.5,1\n\nsnr=2  # trailing\n--lambda = optimal\n";
        let e = parse_config(text).unwrap();
        assert_eq!(e.len(), 3);
        assert_eq!(e[0].key, "gamma");
        assert_eq!(e[0].value, "0.5,1");
        assert_eq!(e[1].value, "2");
        assert_eq!(e[1].line, 4);
        assert_eq!(e[2].key, "lambda");
    }

    #[test]
    fn config_errors_are_collected() {
        let err = parse_config("gamma\nsnr = 1\nsnr = 2\n= 3\n").unwrap_err();
        assert_eq!(err.len(), 3);
        assert!(err[0].starts_with("line 1"));
        assert!(err[1].contains("duplicate"));
    }

    #[test]
    fn linear_grid() {
        let g = parse_grid("0:1.5:31").unwrap();
        let p = g.points();
        assert_eq!(p.len(), 31);
        assert_eq!(p[0], 0.0);
        assert_eq!(p[30], 1.5);
        assert!((p[10] - 0.5).abs() < 1e-15);
        assert_eq!(parse_grid("2:2:1").unwrap().points(), vec![2.0]);
    }

    #[test]
    fn log_grid_expression() {
        let p = parse_grid("log:1e-2:1e2:50").unwrap().points();
        assert_eq!(p.len(), 50);
        assert_eq!(p[0], 1e-2);
        assert_eq!(p[49], 1e2);
        assert_eq!(parse_grid("log:1e-2:1e2:50").unwrap().to_string(), "log:0.01:100:50");
    }

    #[test]
    fn bad_grids() {
        for s in ["1:2", "log:0:1:5", "1:0:3", "a:1:3", "0:1:0", "0:1:x", "lin:0:1:3"] {
            assert!(parse_grid(s).is_err(), "{s}");
        }
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list("0.25, 1,4").unwrap(), vec![0.25, 1.0, 4.0]);
        assert!(parse_list("1,,2").is_err());
        assert!(parse_list("inf").is_err());
        assert_eq!(parse_groups("1,0.5;0.3").unwrap(), vec![vec![1.0, 0.5], vec![0.3]]);
    }
}
