//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    pub n: usize,
    pub m: usize,
    pub g: usize,
    pub l: f64,
    pub lambda: Option<u32>,
    pub lambda_max: Option<u32>,
    pub mu: Option<(i32, i32)>,
    pub n_list: Option<Vec<usize>>,
    pub q: Option<f64>,
    pub s: Option<f64>,
    pub moments: Option<usize>,
    pub a: Option<f64>,
    pub c0: Option<f64>,
    pub rho: Option<f64>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub ascent_steps: Option<usize>,
    pub cases: Option<usize>,
    pub structure: Option<String>,
    pub out: Option<String>,
    /// `tol.<check> = value` overrides.
    pub tolerances: BTreeMap<String, f64>,
}

const KEYS: &[&str] = &[
    "experiment", "n", "m", "G", "L", "lambda", "lambda_max", "mu", "N", "q", "s", "M", "A", "C0", "rho", "seed",
    "trials", "ascent_steps", "cases", "structure", "out",
];

const STRUCTURES: &[&str] = &["random", "column", "block"];

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn num<T: std::str::FromStr>(v: &str, line: usize, key: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e| perr(line, format!("{key}: {e}")))
}

impl ExperimentConfig {
    /// A config with only the grid keys set.
    pub fn minimal(n: usize, m: usize, g: usize, l: f64) -> Self {
        Self {
            experiment: None,
            n,
            m,
            g,
            l,
            lambda: None,
            lambda_max: None,
            mu: None,
            n_list: None,
            q: None,
            s: None,
            moments: None,
            a: None,
            c0: None,
            rho: None,
            seed: None,
            trials: None,
            ascent_steps: None,
            cases: None,
            structure: None,
            out: None,
            tolerances: BTreeMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut seen: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body.split_once('=').ok_or_else(|| perr(line, "expected `key = value`"))?;
            let (k, v) = (k.trim(), v.trim());
            if v.is_empty() {
                return Err(perr(line, format!("empty value for `{k}`")));
            }
            let known = KEYS.contains(&k) || k.strip_prefix("tol.").is_some_and(|t| !t.is_empty());
            if !known {
                return Err(perr(line, format!("unknown key `{k}`")));
            }
            if seen.insert(k.to_string(), (line, v.to_string())).is_some() {
                return Err(perr(line, format!("duplicate key `{k}`")));
            }
        }
        let eof = text.lines().count() + 1;
        let req = |k: &str| seen.get(k).cloned().ok_or_else(|| perr(eof, format!("missing required key `{k}`")));
        let (ln, v) = req("n")?;
        let n: usize = num(&v, ln, "n")?;
        if n == 0 || n > 2 {
            return Err(perr(ln, "n must be 1 or 2"));
        }
        let (lm, v) = req("m")?;
        let m: usize = num(&v, lm, "m")?;
        if m == 0 || m > 3 {
            return Err(perr(lm, "m must be 1, 2 or 3"));
        }
        let (lg, v) = req("G")?;
        let g: usize = num(&v, lg, "G")?;
        if g < 2 || g % 2 != 0 {
            return Err(perr(lg, "G must be even and at least 2"));
        }
        let (ll, v) = req("L")?;
        let l: f64 = num(&v, ll, "L")?;
        if !(l > 0.0 && l.is_finite()) {
            return Err(perr(ll, "L must be positive"));
        }
        let mut c = Self::minimal(n, m, g, l);
        for (k, (line, v)) in &seen {
            let line = *line;
            match k.as_str() {
                "n" | "m" | "G" | "L" => {}
                "experiment" => c.experiment = Some(v.clone()),
                "lambda" => c.lambda = Some(num(v, line, k)?),
                "lambda_max" => c.lambda_max = Some(num(v, line, k)?),
                "mu" => {
                    let (a, b) = v.split_once("..").ok_or_else(|| perr(line, "mu must be a range `lo..hi`"))?;
                    let (a, b): (i32, i32) = (num(a.trim(), line, k)?, num(b.trim(), line, k)?);
                    if a > b {
                        return Err(perr(line, "empty mu range"));
                    }
                    c.mu = Some((a, b));
                }
                "N" => {
                    let list: Vec<usize> = v.split(',').map(|t| num(t.trim(), line, k)).collect::<Result<_>>()?;
                    if list.is_empty() || list.contains(&0) {
                        return Err(perr(line, "N must list positive sizes"));
                    }
                    c.n_list = Some(list);
                }
                "q" => c.q = Some(num(v, line, k)?),
                "s" => c.s = Some(num(v, line, k)?),
                "M" => c.moments = Some(num(v, line, k)?),
                "A" => c.a = Some(num(v, line, k)?),
                "C0" => c.c0 = Some(num(v, line, k)?),
                "rho" => c.rho = Some(num(v, line, k)?),
                "seed" => c.seed = Some(num(v, line, k)?),
                "trials" => c.trials = Some(num(v, line, k)?),
                "ascent_steps" => c.ascent_steps = Some(num(v, line, k)?),
                "cases" => c.cases = Some(num(v, line, k)?),
                "structure" => {
                    if !STRUCTURES.contains(&v.as_str()) {
                        return Err(perr(line, format!("structure must be one of {STRUCTURES:?}")));
                    }
                    c.structure = Some(v.clone());
                }
                "out" => c.out = Some(v.clone()),
                _ => {
                    let name = k.trim_start_matches("tol.");
                    c.tolerances.insert(name.to_string(), num(v, line, k)?);
                }
            }
        }
        for (k, v) in [("q", c.q), ("A", c.a), ("C0", c.c0), ("rho", c.rho)] {
            if let Some(x) = v {
                if !(x > 0.0 && x.is_finite()) {
                    return Err(perr(seen[k].0, format!("{k} must be positive")));
                }
            }
        }
        if let Some(mm) = c.moments {
            if mm == 0 || mm > 10 {
                return Err(perr(seen["M"].0, "M must be in 1..=10"));
            }
        }
        Ok(c)
    }

    /// Canonical echo; parsing it reproduces the config exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        if let Some(e) = &self.experiment {
            kv("experiment", e.clone());
        }
        kv("n", self.n.to_string());
        kv("m", self.m.to_string());
        kv("G", self.g.to_string());
        kv("L", format!("{:?}", self.l));
        let f = |x: f64| format!("{x:?}");
        if let Some(v) = self.lambda {
            kv("lambda", v.to_string());
        }
        if let Some(v) = self.lambda_max {
            kv("lambda_max", v.to_string());
        }
        if let Some((a, b)) = self.mu {
            kv("mu", format!("{a}..{b}"));
        }
        if let Some(v) = &self.n_list {
            kv("N", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","));
        }
        for (k, v) in [("q", self.q), ("s", self.s)] {
            if let Some(x) = v {
                kv(k, f(x));
            }
        }
        if let Some(v) = self.moments {
            kv("M", v.to_string());
        }
        for (k, v) in [("A", self.a), ("C0", self.c0), ("rho", self.rho)] {
            if let Some(x) = v {
                kv(k, f(x));
            }
        }
        if let Some(v) = self.seed {
            kv("seed", v.to_string());
        }
        for (k, v) in [("trials", self.trials), ("ascent_steps", self.ascent_steps), ("cases", self.cases)] {
            if let Some(x) = v {
                kv(k, x.to_string());
            }
        }
        if let Some(v) = &self.structure {
            kv("structure", v.clone());
        }
        if let Some(v) = &self.out {
            kv("out", v.clone());
        }
        for (k, v) in &self.tolerances {
            kv(&format!("tol.{k}"), f(*v));
        }
        s
    }

    pub fn tol(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_roundtrip() {
        let text = "n = 1\nm = 2\nG = 128\nL = 16.0\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.to_text(), text);
        let full = "experiment = scaling-N\nn = 1\nm = 2\nG = 400\nL = 8.0\nlambda = 0\nmu = 2..6\nN = 16,32\nq = 4.0\nM = 3\nA = 1.0\nseed = 7\ntrials = 64\nstructure = block\ntol.slope = 0.35\n";
        let c = ExperimentConfig::parse(full).unwrap();
        assert_eq!(c.to_text(), full);
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn rejections() {
        let e = ExperimentConfig::parse("n = 1\nm = 2\nG = 128\nL = 16\nfoo = 3\n").unwrap_err();
        assert!(matches!(&e, Error::Parse { line: 5, msg } if msg.contains("foo")), "{e}");
        let e = ExperimentConfig::parse("n = 1\nm = 2\nL = 16\n").unwrap_err();
        assert!(e.to_string().contains("`G`"), "{e}");
        let e = ExperimentConfig::parse("n = 1\nm = 4\nG = 128\nL = 16\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        let e = ExperimentConfig::parse("n = 1\nm = 2\nG = 128\nL = 16\nmu = 5\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 5, .. }));
        assert!(ExperimentConfig::parse("n = 1\nm = 2\nG = 127\nL = 16\n").is_err());
        assert!(ExperimentConfig::parse("n = 1\nn = 1\nm = 2\nG = 128\nL = 16\n").is_err());
    }
}
