//! Line-oriented experiment configuration.
//!
//! ```text
//! # comment
//! [potential main]
//! family = trig
//! terms = 1:2.0
//! shift = 3
//!
//! [experiment]
//! potential = main
//! m_cut = 16
//! k_points = 8
//! tol.trace = 1e-6
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{PotentialFamily, PotentialSpec, TrigTerm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Spectrum,
    Pimatrix,
    Decay,
    Sumrule,
    Perturb,
    Trace,
    Delta,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Self::Spectrum,
        Self::Pimatrix,
        Self::Decay,
        Self::Sumrule,
        Self::Perturb,
        Self::Trace,
        Self::Delta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Spectrum => "spectrum",
            Self::Pimatrix => "pimatrix",
            Self::Decay => "decay",
            Self::Sumrule => "sumrule",
            Self::Perturb => "perturb",
            Self::Trace => "trace",
            Self::Delta => "delta",
        }
    }

    /// Tolerances understood by the experiment, with their defaults.
    pub fn default_tolerances(self) -> &'static [(&'static str, f64)] {
        match self {
            Self::Spectrum => &[("orthonormality", 1e-10), ("free", 1e-10)],
            Self::Pimatrix => &[("hermiticity", 1e-12), ("fh", 1e-6)],
            Self::Decay => &[("stabilization", 0.01)],
            Self::Sumrule => &[("sumrule", 1e-3)],
            Self::Perturb => &[("feshbach", 1e-10), ("kp", 1e-4), ("order", 1e-8)],
            Self::Trace => &[("trace", 1e-6)],
            Self::Delta => &[("slope", 0.1), ("pi", 0.01), ("holder", 0.1)],
        }
    }

    fn needs_potential(self) -> bool {
        self != Self::Delta
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|e| e.name()).collect();
                Error::Config(format!(
                    "unknown experiment `{s}` (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KSelection {
    /// Monkhorst–Pack grid with `n` points per axis.
    Grid { n: usize, offset: f64 },
    Points { points: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourParams {
    pub beta: f64,
    pub mu: f64,
    /// Upper edge of the relevant spectrum; defaults to `mu`.
    pub top: f64,
    pub delta: Option<f64>,
    pub x_max: Option<f64>,
    pub n_quad: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderParams {
    pub t_min: f64,
    pub t_max: f64,
    pub cutoff: usize,
}

/// Fully resolved experiment description; echoed verbatim in every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub potential_name: Option<String>,
    pub potential: Option<PotentialSpec>,
    pub m_cut: Option<i64>,
    pub k: KSelection,
    pub bands: Option<usize>,
    pub band: usize,
    pub alpha: usize,
    pub cutoffs: Vec<usize>,
    pub order: u32,
    pub s_max: usize,
    pub t_max: Vec<usize>,
    pub window: Option<(f64, f64)>,
    pub times: Vec<f64>,
    pub series_cutoff: Option<usize>,
    pub converges: bool,
    pub fh_bands: Vec<usize>,
    pub k0: Option<Vec<f64>>,
    pub fixed_point_tol: f64,
    pub max_iterations: usize,
    pub fd_step: f64,
    pub expect_absolute: Option<bool>,
    pub contour: Option<ContourParams>,
    pub directions: Vec<usize>,
    pub oracle: Option<bool>,
    pub g: f64,
    pub j_max: Option<usize>,
    pub pi_j: Vec<usize>,
    pub holder: Option<HolderParams>,
    pub tolerances: BTreeMap<String, f64>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn tol(&self, name: &str) -> f64 {
        self.tolerances[name]
    }

    /// Applies a seed to the potential's random family, if any.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self.potential = self.potential.map(|p| p.with_seed(seed));
        self
    }

    pub fn dim(&self) -> usize {
        self.potential.as_ref().map_or(1, |p| p.dim)
    }
}

fn err(line: usize, msg: impl fmt::Display) -> Error {
    Error::Config(format!("line {line}: {msg}"))
}

#[derive(Debug)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug)]
struct Section {
    line: usize,
    entries: BTreeMap<String, Entry>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn parse<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.take(key)
            .map(|e| {
                e.value
                    .parse::<T>()
                    .map_err(|x| err(e.line, format!("bad value for `{key}`: {x}")))
            })
            .transpose()
    }

    fn require<T: FromStr>(&mut self, key: &str, what: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        let line = self.line;
        self.parse(key)?
            .ok_or_else(|| err(line, format!("{what} needs `{key}`")))
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: fmt::Display,
    {
        self.take(key)
            .map(|e| parse_list(&e.value, ',', e.line, key))
            .transpose()
    }

    fn finish(self, what: &str) -> Result<()> {
        match self.entries.into_iter().next() {
            Some((key, e)) => Err(err(e.line, format!("unknown key `{key}` in {what}"))),
            None => Ok(()),
        }
    }
}

fn parse_list<T: FromStr>(s: &str, sep: char, line: usize, key: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    s.split(sep)
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| {
            x.parse::<T>()
                .map_err(|e| err(line, format!("bad entry `{x}` in `{key}`: {e}")))
        })
        .collect()
}

struct Document {
    potentials: BTreeMap<String, Section>,
    experiment: Option<Section>,
}

fn parse_document(text: &str) -> Result<Document> {
    let mut doc = Document {
        potentials: BTreeMap::new(),
        experiment: None,
    };
    // (is_potential, name)
    let mut current: Option<(bool, String)> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(header) = content.strip_prefix('[') {
            let header = header
                .strip_suffix(']')
                .ok_or_else(|| err(line, "unterminated section header"))?
                .trim();
            let mut words = header.split_whitespace();
            let section = Section {
                line,
                entries: BTreeMap::new(),
            };
            match (words.next(), words.next(), words.next()) {
                (Some("potential"), Some(name), None) => {
                    if doc.potentials.insert(name.to_string(), section).is_some() {
                        return Err(err(line, format!("duplicate potential `{name}`")));
                    }
                    current = Some((true, name.to_string()));
                }
                (Some("experiment"), None, None) => {
                    if doc.experiment.replace(section).is_some() {
                        return Err(err(line, "duplicate [experiment] section"));
                    }
                    current = Some((false, String::new()));
                }
                _ => return Err(err(line, format!("unknown section `[{header}]`"))),
            }
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(err(line, "empty key"));
        }
        let section = match &current {
            Some((true, name)) => doc.potentials.get_mut(name).unwrap(),
            Some((false, _)) => doc.experiment.as_mut().unwrap(),
            None => return Err(err(line, "key outside of any section")),
        };
        let entry = Entry {
            value: value.to_string(),
            line,
        };
        if section.entries.insert(key.to_string(), entry).is_some() {
            return Err(err(line, format!("duplicate key `{key}`")));
        }
    }
    Ok(doc)
}

/// `m:cos[:sin]` items separated by commas; multi-dimensional frequencies
/// list their components separated by `/`, as in `1/0:2.0`.
fn parse_terms(s: &str, dim: usize, line: usize) -> Result<Vec<TrigTerm>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|item| {
            let parts: Vec<&str> = item.split(':').map(str::trim).collect();
            if !(2..=3).contains(&parts.len()) {
                return Err(err(line, format!("term `{item}` is not `m:cos[:sin]`")));
            }
            let comps: Vec<i64> = parse_list(parts[0], '/', line, "terms")?;
            if comps.len() != dim {
                return Err(err(line, format!("term `{item}` has {} components, dim is {dim}", comps.len())));
            }
            let mut freq = [0i64; 3];
            freq[..dim].copy_from_slice(&comps);
            let num = |x: &str| {
                x.parse::<f64>()
                    .map_err(|e| err(line, format!("bad coefficient in `{item}`: {e}")))
            };
            Ok(TrigTerm {
                freq,
                cos: num(parts[1])?,
                sin: parts.get(2).map_or(Ok(0.0), |x| num(x))?,
            })
        })
        .collect()
}

fn parse_potential(mut s: Section) -> Result<PotentialSpec> {
    let line = s.line;
    let dim: usize = s.parse("dim")?.unwrap_or(1);
    let shift: f64 = s.parse("shift")?.unwrap_or(0.0);
    let family: String = s.require("family", "a potential")?;
    let family = match family.as_str() {
        "zero" => PotentialFamily::Zero,
        "trig" => {
            let e = s
                .take("terms")
                .ok_or_else(|| err(line, "trig potential needs `terms`"))?;
            PotentialFamily::TrigPolynomial {
                terms: parse_terms(&e.value, dim, e.line)?,
            }
        }
        "power-law" => PotentialFamily::PowerLawDecay {
            amplitude: s.require("amplitude", "power-law")?,
            exponent: s.require("exponent", "power-law")?,
            cutoff: s.require("cutoff", "power-law")?,
            seed: s.parse("seed")?,
        },
        "gaussian" => PotentialFamily::GaussianDecay {
            amplitude: s.require("amplitude", "gaussian")?,
            width: s.require("width", "gaussian")?,
            cutoff: s.require("cutoff", "gaussian")?,
            seed: s.parse("seed")?,
        },
        "truncated-delta" => PotentialFamily::TruncatedDelta {
            strength: s.require("strength", "truncated-delta")?,
            cutoff: s.require("cutoff", "truncated-delta")?,
        },
        "random-smooth" => PotentialFamily::RandomSmooth {
            amplitude: s.require("amplitude", "random-smooth")?,
            width: s.require("width", "random-smooth")?,
            cutoff: s.require("cutoff", "random-smooth")?,
            seed: s.parse("seed")?.unwrap_or(0),
        },
        other => return Err(err(line, format!("unknown potential family `{other}`"))),
    };
    s.finish("potential section")?;
    Ok(PotentialSpec::new(dim, family, shift))
}

fn parse_points(e: Entry, dim: usize, key: &str) -> Result<Vec<Vec<f64>>> {
    let points: Vec<Vec<f64>> = e
        .value
        .split(';')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|p| parse_list(p, ',', e.line, key))
        .collect::<Result<_>>()?;
    if points.is_empty() || points.iter().any(|p| p.len() != dim) {
        return Err(err(e.line, format!("`{key}` needs points of dimension {dim}")));
    }
    Ok(points)
}

/// Parses a configuration for `experiment`. A `name` key in the file, if
/// present, must agree with it.
pub fn parse_config(text: &str, experiment: Experiment) -> Result<ExperimentConfig> {
    let mut doc = parse_document(text)?;
    let mut ex = doc
        .experiment
        .take()
        .ok_or_else(|| Error::Config("missing [experiment] section".into()))?;
    let line = ex.line;
    if let Some(e) = ex.take("name") {
        if e.value != experiment.name() {
            return Err(err(
                e.line,
                format!("config is for `{}`, not `{experiment}`", e.value),
            ));
        }
    }

    let chosen = ex.take("potential");
    let (potential_name, potential) = if experiment.needs_potential() {
        let (name, at) = match chosen {
            Some(e) => (e.value, e.line),
            None if doc.potentials.len() == 1 => {
                (doc.potentials.keys().next().unwrap().clone(), line)
            }
            None => return Err(err(line, "`potential` must name one of the [potential] sections")),
        };
        let section = doc
            .potentials
            .remove(&name)
            .ok_or_else(|| err(at, format!("no potential named `{name}`")))?;
        (Some(name), Some(parse_potential(section)?))
    } else {
        (None, None)
    };
    for (_, s) in std::mem::take(&mut doc.potentials) {
        parse_potential(s)?;
    }
    let dim = potential.as_ref().map_or(1, |p| p.dim);

    let m_cut: Option<i64> = ex.parse("m_cut")?;
    if experiment.needs_potential() && m_cut.is_none() {
        return Err(err(line, "`m_cut` is required"));
    }
    let k = match (ex.take("k"), ex.parse::<usize>("k_points")?) {
        (Some(_), Some(_)) => return Err(err(line, "give either `k` or `k_points`, not both")),
        (Some(e), None) => KSelection::Points {
            points: parse_points(e, dim, "k")?,
        },
        (None, n) => KSelection::Grid {
            n: n.unwrap_or(1),
            offset: ex.parse("k_offset")?.unwrap_or(0.0),
        },
    };
    let k0 = ex
        .take("k0")
        .map(|e| parse_points(e, dim, "k0").map(|mut p| p.swap_remove(0)))
        .transpose()?;

    let window = match ex.list::<f64>("window")? {
        None => None,
        Some(w) if w.len() == 2 => Some((w[0], w[1])),
        Some(_) => return Err(err(line, "`window` needs two values `lo, hi`")),
    };
    let contour = match ex.parse::<f64>("beta")? {
        None => None,
        Some(beta) => {
            let mu: f64 = ex.require("mu", "a contour")?;
            Some(ContourParams {
                beta,
                mu,
                top: ex.parse("top")?.unwrap_or(mu),
                delta: ex.parse("delta")?,
                x_max: ex.parse("x_max")?,
                n_quad: ex.parse("n_quad")?,
            })
        }
    };
    let holder = match ex.list::<f64>("holder")? {
        None => None,
        Some(h) if h.len() == 2 => Some(HolderParams {
            t_min: h[0],
            t_max: h[1],
            cutoff: ex.parse("holder_cutoff")?.unwrap_or(1000),
        }),
        Some(_) => return Err(err(line, "`holder` needs two values `t_min, t_max`")),
    };

    let mut tolerances: BTreeMap<String, f64> = experiment
        .default_tolerances()
        .iter()
        .map(|&(k, v)| (k.to_string(), v))
        .collect();
    let tol_keys: Vec<String> = ex
        .entries
        .keys()
        .filter(|k| k.starts_with("tol."))
        .cloned()
        .collect();
    for key in tol_keys {
        let e = ex.take(&key).unwrap();
        let name = &key[4..];
        if !tolerances.contains_key(name) {
            return Err(err(e.line, format!("`{experiment}` has no tolerance `{name}`")));
        }
        let v: f64 = e
            .value
            .parse()
            .map_err(|x| err(e.line, format!("bad value for `{key}`: {x}")))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(err(e.line, format!("tolerance `{name}` must be positive")));
        }
        tolerances.insert(name.to_string(), v);
    }

    let config = ExperimentConfig {
        experiment,
        potential_name,
        potential,
        m_cut,
        k,
        bands: ex.parse("bands")?,
        band: ex.parse("band")?.unwrap_or(1),
        alpha: ex.parse("alpha")?.unwrap_or(0),
        cutoffs: ex.list("cutoffs")?.unwrap_or_default(),
        order: ex.parse("order")?.unwrap_or(1),
        s_max: ex.parse("s_max")?.unwrap_or(4),
        t_max: ex.list("t_max")?.unwrap_or_default(),
        window,
        times: ex.list("t")?.unwrap_or_default(),
        series_cutoff: ex.parse("series_cutoff")?,
        converges: ex.parse("converges")?.unwrap_or(true),
        fh_bands: ex.list("fh_bands")?.unwrap_or_else(|| vec![1, 2, 3]),
        k0,
        fixed_point_tol: ex.parse("fixed_point_tol")?.unwrap_or(1e-13),
        max_iterations: ex.parse("max_iterations")?.unwrap_or(50),
        fd_step: ex.parse("fd_step")?.unwrap_or(1e-3),
        expect_absolute: ex.parse("expect_absolute")?,
        contour,
        directions: ex.list("directions")?.unwrap_or_default(),
        oracle: ex.parse("oracle")?,
        g: ex.parse("g")?.unwrap_or(1.0),
        j_max: ex.parse("j_max")?,
        pi_j: ex.list("pi_j")?.unwrap_or_default(),
        holder,
        tolerances,
        out: ex.parse("out")?,
        seed: ex.parse("seed")?,
    };
    ex.finish("[experiment]")?;
    let config = match config.seed {
        Some(s) => config.with_seed(s),
        None => config,
    };
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRACE: &str = "
# cosine lattice
[potential cos]
family = trig
terms = 1:2.0
shift = 3

[experiment]
name = trace
m_cut = 16   # basis
k_points = 4
beta = 2
mu = 10
directions = 0, 0
cutoffs = 12
tol.trace = 1e-7
";

    #[test]
    fn parses_trace_config() {
        let c = parse_config(TRACE, Experiment::Trace).unwrap();
        assert_eq!(c.potential_name.as_deref(), Some("cos"));
        assert_eq!(c.m_cut, Some(16));
        assert_eq!(c.k, KSelection::Grid { n: 4, offset: 0.0 });
        assert_eq!(c.directions, vec![0, 0]);
        assert_eq!(c.tol("trace"), 1e-7);
        let p = c.potential.unwrap();
        assert_eq!(p.shift, 3.0);
        assert!(matches!(p.family, PotentialFamily::TrigPolynomial { ref terms } if terms[0].cos == 2.0));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = TRACE.replace("k_points = 4", "k_pionts = 4");
        let e = parse_config(&bad, Experiment::Trace).unwrap_err().to_string();
        assert!(e.contains("line 11") && e.contains("k_pionts"), "{e}");

        let bad = TRACE.replace("shift = 3", "shift 3");
        let e = parse_config(&bad, Experiment::Trace).unwrap_err().to_string();
        assert!(e.starts_with("line 6"), "{e}");

        let e = parse_config(TRACE, Experiment::Delta).unwrap_err().to_string();
        assert!(e.contains("line 9"), "{e}");

        let bad = TRACE.replace("tol.trace = 1e-7", "tol.trace = -1");
        assert!(parse_config(&bad, Experiment::Trace).is_err());
        let bad = TRACE.replace("tol.trace", "tol.kp");
        assert!(parse_config(&bad, Experiment::Trace).is_err());
    }

    #[test]
    fn explicit_points_and_terms() {
        let text = "
[potential p]
family = trig
dim = 2
terms = 1/0:1.0, 0/1:0.5:0.25
[experiment]
m_cut = 4
k = 0.1, 0.2; 0.3, -0.4
";
        let c = parse_config(text, Experiment::Spectrum).unwrap();
        assert_eq!(
            c.k,
            KSelection::Points {
                points: vec![vec![0.1, 0.2], vec![0.3, -0.4]]
            }
        );
        assert!(parse_config(&text.replace("0.3, -0.4", "0.3"), Experiment::Spectrum).is_err());
        assert!(parse_config(&text.replace("0/1:0.5", "0:0.5"), Experiment::Spectrum).is_err());
    }

    #[test]
    fn delta_needs_no_potential() {
        let c = parse_config("[experiment]\ng = 1\ncutoffs = 100, 200, 300, 400\n", Experiment::Delta)
            .unwrap();
        assert!(c.potential.is_none());
        assert_eq!(c.cutoffs.len(), 4);
    }

    #[test]
    fn seed_reaches_the_potential() {
        let text = "[potential r]\nfamily = random-smooth\namplitude = 1\nwidth = 2\ncutoff = 4\n[experiment]\nm_cut = 8\nseed = 9\n";
        let c = parse_config(text, Experiment::Spectrum).unwrap();
        assert!(matches!(
            c.potential.unwrap().family,
            PotentialFamily::RandomSmooth { seed: 9, .. }
        ));
    }
}
