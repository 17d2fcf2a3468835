//! Run-config files: flat `key = value` lines grouped under `[section]`
//! headers. `#` starts a comment. Method sections are named
//! `[method.<label>]`; every other section name is fixed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use spbfgs::penalty::{BetaSchedule, PenaltyPolicy, Recovery, SkipRule};
use spbfgs::problems::{benchmark_suite, by_name};
use spbfgs::{Budget, FkSource, LineSearchConfig};

use crate::error::BenchError;
use crate::experiment::{ExperimentSpec, MethodSpec, NoiseMode, PolicySpec, StepRelaxation};

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
    used: bool,
}

#[derive(Debug, Clone)]
struct Section {
    name: String,
    line: usize,
    entries: BTreeMap<String, Entry>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.value.clone(), e.line)
        })
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, BenchError> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|_| BenchError::Config {
                line,
                message: format!("[{}] {key}: cannot parse {v:?}", self.name),
            }),
        }
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64, BenchError> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn required_f64(&mut self, key: &str) -> Result<f64, BenchError> {
        let line = self.line;
        let name = self.name.clone();
        self.parse(key)?.ok_or_else(|| BenchError::Config {
            line,
            message: format!("[{name}] missing required key {key}"),
        })
    }

    fn bool_or(&mut self, key: &str, default: bool) -> Result<bool, BenchError> {
        match self.take(key) {
            None => Ok(default),
            Some((v, line)) => match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" | "on" => Ok(true),
                "false" | "no" | "0" | "off" => Ok(false),
                _ => Err(BenchError::Config {
                    line,
                    message: format!("[{}] {key}: expected a boolean, got {v:?}", self.name),
                }),
            },
        }
    }

    fn finish(&self) -> Result<(), BenchError> {
        match self.entries.iter().find(|(_, e)| !e.used) {
            Some((k, e)) => {
                Err(BenchError::Config { line: e.line, message: format!("[{}] unknown key {k}", self.name) })
            }
            None => Ok(()),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<Section>, BenchError> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| BenchError::Config {
                line,
                message: format!("unterminated section header {content:?}"),
            })?;
            let name = name.trim().to_string();
            if name.is_empty() || sections.iter().any(|s| s.name == name) {
                return Err(BenchError::Config {
                    line,
                    message: format!("empty or duplicate section [{name}]"),
                });
            }
            sections.push(Section { name, line, entries: BTreeMap::new() });
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| BenchError::Config {
            line,
            message: format!("expected key = value, got {content:?}"),
        })?;
        let section = sections
            .last_mut()
            .ok_or_else(|| BenchError::Config { line, message: "key outside of any [section]".into() })?;
        let key = key.trim().to_string();
        if section.entries.contains_key(&key) {
            return Err(BenchError::Config { line, message: format!("duplicate key {key}") });
        }
        section.entries.insert(key, Entry { value: value.trim().to_string(), line, used: false });
    }
    Ok(sections)
}

fn parse_skip_rule(v: &str, line: usize) -> Result<SkipRule, BenchError> {
    let bad = || BenchError::Config { line, message: format!("bad skip_rule {v:?}") };
    match v.split_once(':') {
        None => match v {
            "none" => Ok(SkipRule::None),
            "nonpositive" => Ok(SkipRule::SkipOnNonpositive),
            _ => Err(bad()),
        },
        Some(("eps", x)) => Ok(SkipRule::EpsStepNorm { eps: x.trim().parse().map_err(|_| bad())? }),
        Some(("cosine", x)) => Ok(SkipRule::CosineBound { zeta: x.trim().parse().map_err(|_| bad())? }),
        Some(_) => Err(bad()),
    }
}

fn parse_method(label: &str, mut sec: Section) -> Result<MethodSpec, BenchError> {
    let (kind, kind_line) = sec.take("kind").ok_or_else(|| BenchError::Config {
        line: sec.line,
        message: format!("[{}] missing kind (spbfgs or bfgs)", sec.name),
    })?;
    let skip_rule = match sec.take("skip_rule") {
        Some((v, line)) => Some(parse_skip_rule(&v, line)?),
        None => None,
    };
    let policy = match kind.as_str() {
        "bfgs" => PolicySpec::Bfgs { skip_rule: skip_rule.unwrap_or(SkipRule::SkipOnNonpositive) },
        "spbfgs" => {
            let (schedule, line) =
                sec.take("schedule").unwrap_or_else(|| ("noise_scaled".to_string(), sec.line));
            let recovery = match sec.take("recovery") {
                None => Recovery::Skip,
                Some((v, _)) if v == "skip" => Recovery::Skip,
                Some((v, _)) if v == "shrink" => Recovery::ShrinkBeta { c3: sec.f64_or("c3", 2.0)? },
                Some((v, line)) => {
                    return Err(BenchError::Config { line, message: format!("bad recovery {v:?}") })
                }
            };
            let skip_rule = skip_rule.unwrap_or(SkipRule::None);
            let fixed = |schedule| PolicySpec::Fixed(PenaltyPolicy { schedule, recovery, skip_rule });
            match schedule.as_str() {
                "noise_scaled" => PolicySpec::NoiseScaled {
                    scale: sec.f64_or("scale", 1e8)?,
                    offset: sec.f64_or("offset", 1e-10)?,
                    recovery,
                    skip_rule,
                },
                "linear" => fixed(BetaSchedule::LinearInStep {
                    slope: sec.required_f64("slope")?,
                    offset: sec.f64_or("offset", 1e-10)?,
                }),
                "thresholded" => fixed(BetaSchedule::Thresholded {
                    slope: sec.required_f64("slope")?,
                    intercept: sec.required_f64("intercept")?,
                }),
                "constant" => fixed(BetaSchedule::Constant(sec.required_f64("value")?)),
                "infinity" => fixed(BetaSchedule::ConstantInfinity),
                other => return Err(BenchError::Config { line, message: format!("bad schedule {other:?}") }),
            }
        }
        other => {
            return Err(BenchError::Config {
                line: kind_line,
                message: format!("bad kind {other:?}, expected spbfgs or bfgs"),
            })
        }
    };
    sec.finish()?;
    Ok(MethodSpec { label: label.to_string(), policy })
}

fn parse_cells(v: &str, line: usize) -> Result<Vec<(f64, f64)>, BenchError> {
    v.split(',')
        .map(|cell| {
            let cell = cell.trim();
            let parsed = cell
                .split_once(':')
                .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
            match parsed {
                Some((f, g)) if f >= 0.0 && g >= 0.0 && f64::is_finite(f) && f64::is_finite(g) => Ok((f, g)),
                _ => Err(BenchError::Config {
                    line,
                    message: format!("bad noise cell {cell:?}, expected eps_f:eps_g with both >= 0"),
                }),
            }
        })
        .collect()
}

/// Parses config text. `base_dir` resolves a relative `out_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<ExperimentSpec, BenchError> {
    let mut sections = tokenize(text)?;
    let mut take_section =
        |name: &str| sections.iter().position(|s| s.name == name).map(|i| sections.remove(i));

    let mut exp = take_section("experiment")
        .ok_or(BenchError::Config { line: 1, message: "missing [experiment] section".into() })?;
    let name: String = exp.parse("name")?.unwrap_or_else(|| "experiment".into());
    let master_seed: u64 = exp.parse("seed")?.unwrap_or(0);
    let replicates: usize = exp.parse("replicates")?.unwrap_or(30);
    let evals: Option<usize> = exp.parse("budget_evals")?;
    let iters: Option<usize> = exp.parse("budget_iters")?;
    let budget = match (evals, iters) {
        (Some(_), Some(_)) => {
            return Err(BenchError::Config {
                line: exp.line,
                message: "set only one of budget_evals and budget_iters".into(),
            })
        }
        (None, Some(n)) => Budget::Iterations(n),
        (Some(n), None) => Budget::FunctionEvals(n),
        (None, None) => Budget::FunctionEvals(2000),
    };
    let workers: usize = exp.parse("workers")?.unwrap_or(0);
    let out_dir =
        exp.take("out_dir").map(|(v, _)| base_dir.join(v)).unwrap_or_else(|| base_dir.join("results"));
    let trace = exp.bool_or("trace", false)?;
    let fk_source = if exp.bool_or("remeasure_f", false)? { FkSource::Remeasure } else { FkSource::Carry };
    let diagnostics = exp.bool_or("hessian_diagnostics", false)?;
    exp.finish()?;

    let mut probs = take_section("problems")
        .ok_or(BenchError::Config { line: 1, message: "missing [problems] section".into() })?;
    let (names, names_line) = probs
        .take("names")
        .ok_or(BenchError::Config { line: probs.line, message: "[problems] needs names = ...".into() })?;
    probs.finish()?;
    let problems = if names.trim().eq_ignore_ascii_case("suite") {
        benchmark_suite()
    } else {
        names
            .split(',')
            .map(|n| {
                by_name(n.trim()).map_err(|e| BenchError::Config { line: names_line, message: e.to_string() })
            })
            .collect::<Result<Vec<_>, _>>()?
    };

    let mut noise = take_section("noise")
        .ok_or(BenchError::Config { line: 1, message: "missing [noise] section".into() })?;
    let mode = match noise.take("mode") {
        None => NoiseMode::Absolute,
        Some((v, _)) if v == "absolute" => NoiseMode::Absolute,
        Some((v, _)) if v == "relative" => NoiseMode::Relative,
        Some((v, line)) => return Err(BenchError::Config { line, message: format!("bad noise mode {v:?}") }),
    };
    let (cells, cells_line) = noise.take("cells").ok_or(BenchError::Config {
        line: noise.line,
        message: "[noise] needs cells = eps_f:eps_g, ...".into(),
    })?;
    let cells = parse_cells(&cells, cells_line)?;
    noise.finish()?;

    let mut ls = LineSearchConfig::default();
    let mut relaxation = StepRelaxation::FunctionNoise;
    if let Some(mut sec) = take_section("line_search") {
        ls.c1 = sec.f64_or("c1", ls.c1)?;
        ls.alpha0 = sec.f64_or("alpha0", ls.alpha0)?;
        ls.tau = sec.f64_or("tau", ls.tau)?;
        ls.max_backtracks = sec.parse("max_backtracks")?.unwrap_or(ls.max_backtracks);
        if let Some((v, line)) = sec.take("eps_a") {
            if v != "auto" {
                let x: f64 = v.parse().map_err(|_| BenchError::Config {
                    line,
                    message: format!("eps_a must be a number or auto, got {v:?}"),
                })?;
                relaxation = StepRelaxation::Fixed(x);
            }
        }
        sec.finish()?;
    }

    let mut methods = Vec::new();
    for sec in std::mem::take(&mut sections) {
        match sec.name.strip_prefix("method.") {
            Some(label) if !label.is_empty() => {
                let label = label.to_string();
                methods.push(parse_method(&label, sec)?);
            }
            _ => {
                return Err(BenchError::Config {
                    line: sec.line,
                    message: format!("unknown section [{}]", sec.name),
                })
            }
        }
    }
    if methods.is_empty() {
        return Err(BenchError::Config { line: 1, message: "no [method.<label>] sections".into() });
    }

    let spec = ExperimentSpec {
        name,
        problems,
        methods,
        cells,
        noise_mode: mode,
        replicates,
        master_seed,
        budget,
        line_search: ls,
        relaxation,
        fk_source,
        hessian_diagnostics: diagnostics,
        workers,
        out_dir,
        write_traces: trace,
    };
    spec.validate().map_err(|e| BenchError::Config { line: 1, message: e.to_string() })?;
    Ok(spec)
}

pub fn load_config(path: &Path) -> Result<ExperimentSpec, BenchError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| BenchError::ConfigFile { path: path.to_path_buf(), source: e })?;
    let base: PathBuf = std::env::current_dir().unwrap_or_default();
    parse_config(&text, &base).map_err(|e| match e {
        BenchError::Config { line, message } => {
            BenchError::ConfigAt { path: path.to_path_buf(), line, message }
        }
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "
[experiment]
name = demo   # trailing comment
seed = 7
replicates = 3
budget_evals = 200

[problems]
names = ROSENBR, beale

[noise]
mode = relative
cells = 0:1e-4, 1e-4:1e-4

[line_search]
max_backtracks = 45
eps_a = auto

[method.sp]
kind = spbfgs
schedule = noise_scaled
scale = 1e8

[method.bfgs]
kind = bfgs
";

    #[test]
    fn parses_full_example() {
        let spec = parse_config(GOOD, Path::new("/tmp")).unwrap();
        assert_eq!(spec.name, "demo");
        assert_eq!(spec.master_seed, 7);
        assert_eq!(spec.problems.len(), 2);
        assert_eq!(spec.cells, vec![(0.0, 1e-4), (1e-4, 1e-4)]);
        assert_eq!(spec.methods.len(), 2);
        assert_eq!(spec.budget, Budget::FunctionEvals(200));
        assert_eq!(spec.noise_mode, NoiseMode::Relative);
        assert_eq!(spec.line_search.max_backtracks, 45);
        assert_eq!(spec.out_dir, PathBuf::from("/tmp/results"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = GOOD.replace("seed = 7", "seed = seven");
        match parse_config(&text, Path::new(".")) {
            Err(BenchError::Config { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let text = GOOD.replace("kind = bfgs", "kind = bfgs\ncolour = red");
        match parse_config(&text, Path::new(".")) {
            Err(BenchError::Config { line, message }) => {
                assert_eq!(line, 26);
                assert!(message.contains("colour"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_cells_and_sections() {
        let text = GOOD.replace("0:1e-4,", "0:-1,");
        assert!(parse_config(&text, Path::new(".")).is_err());
        let text = format!("{GOOD}\n[plots]\nx = 1\n");
        assert!(parse_config(&text, Path::new(".")).is_err());
        assert!(parse_config("name = x", Path::new(".")).is_err());
    }

    #[test]
    fn skip_rules() {
        assert_eq!(parse_skip_rule("eps:1e-8", 1).unwrap(), SkipRule::EpsStepNorm { eps: 1e-8 });
        assert_eq!(parse_skip_rule("cosine:0.1", 1).unwrap(), SkipRule::CosineBound { zeta: 0.1 });
        assert!(parse_skip_rule("always", 1).is_err());
    }
}
