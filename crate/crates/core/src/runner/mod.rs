//! Config-driven experiment runner. Only [`write_outputs`] touches the file system.

mod config;

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

pub use config::{
    parse_config, ContourParams, Experiment, ExperimentConfig, HolderParams, KSelection,
};

use crate::decay::{commutator_norm, decay_exponent_fit, theorem1_sweep};
use crate::delta::{delta_levels, delta_pi, delta_sumrule_divergence, holder_fit, pi_table_csv};
use crate::error::{Error, Result};
use crate::fiber::{band_structure, fiber_spectrum, FiberSpectrum};
use crate::model::{
    build_basis, build_potential, sample_brillouin_shifted, ContourSpec, FourierPotential, KGrid,
    PlaneWaveBasis,
};
use crate::momentum::{feynman_hellmann_check, momentum_matrix, MomentumMatrix, DEFAULT_FD_STEP};
use crate::output::{Csv, Field};
use crate::perturb::{band_curvature_fd, feshbach_eigenvalue, kp_second_derivative, nested_sum};
use crate::sumrule::{oscillation_series, sumrule_lhs, sumrule_rhs_partial};
use crate::trace::{trace_oracle_direct, trace_per_unit_volume, DIRECT_MAX_BASIS};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    /// Passes when `value <= tolerance`.
    fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
            detail: None,
        }
    }

    fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub experiment: Experiment,
    pub timestamp: String,
    pub config: ExperimentConfig,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub errors: Vec<String>,
    pub results: Value,
    pub files: Vec<String>,
}

/// A finished run: the report plus CSV payloads keyed by file name.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub files: Vec<(String, String)>,
}

#[derive(Default)]
struct Collector {
    checks: Vec<Check>,
    errors: Vec<String>,
    results: serde_json::Map<String, Value>,
    files: Vec<(String, String)>,
}

impl Collector {
    fn result<T: Serialize>(&mut self, key: &str, value: &T) {
        let v = serde_json::to_value(value).unwrap_or_else(|e| json!(e.to_string()));
        self.results.insert(key.into(), v);
    }

    fn file(&mut self, name: impl Into<String>, body: String) {
        self.files.push((name.into(), body));
    }

    /// Records a failed sub-step without aborting the remaining ones.
    fn attempt<T>(&mut self, what: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.errors.push(format!("{what}: {e}"));
                None
            }
        }
    }
}

struct Setup {
    v: FourierPotential,
    basis: PlaneWaveBasis,
    grid: KGrid,
}

fn setup(c: &ExperimentConfig) -> Result<Setup> {
    let spec = c
        .potential
        .as_ref()
        .ok_or_else(|| Error::Config("experiment needs a potential".into()))?;
    let v = build_potential(spec)?;
    let basis = build_basis(spec.dim, c.m_cut.unwrap_or(0))?;
    let grid = match &c.k {
        KSelection::Grid { n, offset } => sample_brillouin_shifted(spec.dim, *n, *offset)?,
        KSelection::Points { points } => KGrid::from_points(spec.dim, points.clone())?,
    };
    Ok(Setup { v, basis, grid })
}

impl Setup {
    fn first_k(&self) -> &[f64] {
        &self.grid.points[0]
    }

    fn spectrum_pi(&self, c: &ExperimentConfig, k: &[f64]) -> Result<(FiberSpectrum, MomentumMatrix)> {
        let spec = fiber_spectrum(&self.v, &self.basis, k, c.bands)?;
        let pi = momentum_matrix(&spec, c.alpha)?;
        Ok((spec, pi))
    }
}

/// Runs one experiment. Numerical failures are collected in the report;
/// only configuration problems return `Err`.
pub fn run(c: &ExperimentConfig) -> Result<Outcome> {
    let mut col = Collector::default();
    match c.experiment {
        Experiment::Delta => run_delta(c, &mut col)?,
        ex => {
            let s = setup(c)?;
            match ex {
                Experiment::Spectrum => run_spectrum(c, &s, &mut col),
                Experiment::Pimatrix => run_pimatrix(c, &s, &mut col),
                Experiment::Decay => run_decay(c, &s, &mut col),
                Experiment::Sumrule => run_sumrule(c, &s, &mut col),
                Experiment::Perturb => run_perturb(c, &s, &mut col),
                Experiment::Trace => run_trace(c, &s, &mut col)?,
                Experiment::Delta => unreachable!(),
            }
        }
    }
    let passed = col.errors.is_empty() && col.checks.iter().all(|ch| ch.passed);
    let report = Report {
        experiment: c.experiment,
        timestamp: chrono::Utc::now().to_rfc3339(),
        config: c.clone(),
        passed,
        checks: col.checks,
        errors: col.errors,
        results: Value::Object(col.results),
        files: col.files.iter().map(|(n, _)| n.clone()).collect(),
    };
    Ok(Outcome {
        report,
        files: col.files,
    })
}

/// Runs on a dedicated pool of `workers` threads.
pub fn run_with_workers(c: &ExperimentConfig, workers: usize) -> Result<Outcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run(c))
}

/// Writes `report.json` and the CSV files into `dir`, creating it if needed.
pub fn write_outputs(outcome: &Outcome, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, body) in &outcome.files {
        let p = dir.join(name);
        fs::write(&p, body)?;
        written.push(p);
    }
    let p = dir.join("report.json");
    let mut body = serde_json::to_string_pretty(&outcome.report)?;
    body.push('\n');
    fs::write(&p, body)?;
    written.push(p);
    Ok(written)
}

fn run_spectrum(c: &ExperimentConfig, s: &Setup, col: &mut Collector) {
    let Some(bs) = col.attempt(
        "band structure",
        band_structure(&s.v, &s.basis, &s.grid, c.bands, true),
    ) else {
        return;
    };
    col.file("bands.csv", bs.to_csv());
    let mut defect: f64 = 0.0;
    for sp in &bs.spectra {
        if let Some(d) = col.attempt("orthonormality", sp.orthonormality_defect()) {
            defect = defect.max(d);
        }
    }
    col.checks.push(Check::at_most(
        "orthonormality",
        defect,
        c.tol("orthonormality"),
    ));
    let free = s.v.support().all(|(m, z)| *m == [0, 0, 0] || z.norm() == 0.0);
    if free {
        let mut worst: f64 = 0.0;
        for sp in &bs.spectra {
            let mut exact: Vec<f64> = s
                .basis
                .freqs()
                .iter()
                .map(|m| {
                    sp.k()
                        .iter()
                        .enumerate()
                        .map(|(a, k)| (2.0 * PI * m[a] as f64 + k).powi(2))
                        .sum::<f64>()
                        + s.v.shift()
                })
                .collect();
            exact.sort_by(f64::total_cmp);
            for (e, x) in sp.eigenvalues().iter().zip(&exact) {
                worst = worst.max((e - x).abs() / x.abs().max(1.0));
            }
        }
        col.checks.push(Check::at_most("free-exactness", worst, c.tol("free")));
    }
    col.result(
        "spectrum",
        &json!({
            "k_points": bs.spectra.len(),
            "bands": bs.spectra.first().map_or(0, |sp| sp.n_bands()),
            "max_jump": bs.max_jump(),
            "orthonormality_defect": defect,
            "lowest": bs.spectra.iter().map(|sp| sp.eigenvalue(1)).fold(f64::INFINITY, f64::min),
        }),
    );
}

fn run_pimatrix(c: &ExperimentConfig, s: &Setup, col: &mut Collector) {
    let mut summaries = Vec::new();
    let mut herm: f64 = 0.0;
    for (i, k) in s.grid.points.iter().enumerate() {
        if let Some((_, pi)) = col.attempt(&format!("k-point {i}"), s.spectrum_pi(c, k)) {
            herm = herm.max(pi.hermiticity_defect());
            col.file(format!("pi_k{i}.csv"), pi.to_csv());
            summaries.push(pi.summary());
        }
    }
    col.result("summaries", &summaries);
    col.checks
        .push(Check::at_most("hermiticity", herm, c.tol("hermiticity")));

    let mut fh = Vec::new();
    let mut worst = (0.0, String::new());
    for (i, k) in s.grid.points.iter().enumerate() {
        for &band in &c.fh_bands {
            let r = feynman_hellmann_check(&s.v, &s.basis, k, band, c.alpha, DEFAULT_FD_STEP);
            if let Some(r) = col.attempt(&format!("Feynman-Hellmann k-point {i} band {band}"), r) {
                if let Some(res) = r.residual() {
                    if res > worst.0 {
                        worst = (res, format!("k-point {i} {k:?}, band {band}"));
                    }
                }
                fh.push(json!({"k_index": i, "band": band, "result": r}));
            }
        }
    }
    col.result("feynman_hellmann", &fh);
    if !fh.is_empty() {
        col.checks
            .push(Check::at_most("feynman-hellmann", worst.0, c.tol("fh")).detail(worst.1));
    }
}

fn relative_change(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn run_decay(c: &ExperimentConfig, s: &Setup, col: &mut Collector) {
    let Some((spec, pi)) = col.attempt("spectrum", s.spectrum_pi(c, s.first_k())) else {
        return;
    };
    if !c.t_max.is_empty() {
        if let Some(sweep) =
            col.attempt("ratio sweep", theorem1_sweep(&pi, &spec, c.order, c.s_max, &c.t_max))
        {
            if sweep.ratios.len() >= 2 {
                let n = sweep.ratios.len();
                let change = relative_change(sweep.ratios[n - 1].value, sweep.ratios[n - 2].value);
                col.checks.push(Check::at_most(
                    "ratio-stabilization",
                    change,
                    c.tol("stabilization"),
                ));
            }
            col.result("ratio_sweep", &sweep);
        }
    }
    if let Some(window) = c.window {
        if let Some(fit) = col.attempt("decay fit", decay_exponent_fit(&pi, &spec, c.band, window)) {
            col.file("decay_pairs.csv", fit.pairs_csv());
            col.result("decay_fit", &fit);
        }
    }
    if !c.cutoffs.is_empty() {
        if let Some(r) = col.attempt(
            "commutator norm",
            commutator_norm(&spec, &pi, c.order, &c.cutoffs),
        ) {
            col.result("commutator_norm", &r);
        }
    }
}

fn run_sumrule(c: &ExperimentConfig, s: &Setup, col: &mut Collector) {
    let Some((spec, pi)) = col.attempt("spectrum", s.spectrum_pi(c, s.first_k())) else {
        return;
    };
    let lhs = col.attempt("left-hand side", sumrule_lhs(&s.v, &spec, c.band, c.alpha));
    if !c.cutoffs.is_empty() {
        if let Some(mut partial) =
            col.attempt("partial sums", sumrule_rhs_partial(&pi, &spec, c.band, &c.cutoffs))
        {
            if let Some(l) = lhs {
                partial = partial.with_lhs(l);
            }
            if c.converges {
                if let Some(gap) = partial.relative_gap() {
                    col.checks
                        .push(Check::at_most("sum-rule", gap, c.tol("sumrule")));
                }
            }
            col.file("sumrule.csv", partial.to_csv());
            col.result("partial", &partial);
        }
    }
    if !c.times.is_empty() {
        let cutoff = c
            .series_cutoff
            .or(c.cutoffs.last().copied())
            .unwrap_or(spec.n_bands());
        if let Some(series) = col.attempt(
            "oscillation series",
            oscillation_series(&pi, &spec, c.band, &c.times, cutoff),
        ) {
            let holder = series.holder_exponent().ok();
            col.file("oscillation.csv", series.to_csv());
            col.result("oscillation", &json!({"series": series, "holder": holder}));
        }
    }
    col.result("lhs", &lhs);
}

fn run_perturb(c: &ExperimentConfig, s: &Setup, col: &mut Collector) {
    let k = s.first_k();
    let k0 = c.k0.clone().unwrap_or_else(|| vec![0.0; k.len()]);
    let fesh = col.attempt(
        "Feshbach iteration",
        feshbach_eigenvalue(&s.v, &s.basis, &k0, k, c.fixed_point_tol),
    );
    let direct = col.attempt("direct eigenvalue", fiber_spectrum(&s.v, &s.basis, k, Some(1)));
    if let (Some(f), Some(d)) = (&fesh, &direct) {
        let diff = (f.lambda - d.eigenvalue(1)).abs();
        col.checks.push(
            Check::at_most("feshbach", diff, c.tol("feshbach"))
                .detail(format!("{} iterations", f.iterations)),
        );
        col.checks.push(Check::at_most(
            "feshbach-iterations",
            f.iterations as f64,
            c.max_iterations as f64,
        ));
        let mut csv = Csv::with_header(&["iteration", "lambda", "rhs", "residual", "damped"]);
        for (i, st) in f.history.iter().enumerate() {
            csv.row(&[
                (i + 1).into(),
                st.lambda.into(),
                st.rhs.into(),
                st.residual.into(),
                Field::Int(st.damped as i64),
            ]);
        }
        col.file("feshbach_trace.csv", csv.finish());
        col.result("feshbach", &json!({"result": f, "direct": d.eigenvalue(1)}));
    }

    let Some((spec, pi)) = col.attempt("spectrum", s.spectrum_pi(c, k)) else {
        return;
    };
    let kp = kp_second_derivative(&spec, &pi, c.band).and_then(|kp| {
        band_curvature_fd(&s.v, &s.basis, k, c.band, c.alpha, c.fd_step)
            .map(|fd| kp.with_finite_difference(fd))
    });
    if let Some(kp) = col.attempt("k·p curvature", kp) {
        if let Some(rel) = kp.relative_error() {
            col.checks.push(Check::at_most("kp-curvature", rel, c.tol("kp")));
        }
        col.result("kp", &kp);
    }

    if !c.cutoffs.is_empty() {
        if let Some(r) = col.attempt("nested sum", nested_sum(&pi, &spec, &c.cutoffs)) {
            col.checks
                .push(Check::at_most("order-difference", r.order_difference, c.tol("order")));
            if let Some(expect) = c.expect_absolute {
                col.checks.push(Check {
                    name: "absolute-convergence".into(),
                    value: r.abs_step,
                    tolerance: crate::perturb::NESTED_CAUCHY_TOL,
                    passed: r.converged == expect,
                    detail: Some(format!("converged = {}, expected {expect}", r.converged)),
                });
            }
            let mut csv = Csv::with_header(&["cutoff", "re", "im", "re_reversed", "im_reversed", "abs_sum"]);
            for i in 0..r.cutoffs.len() {
                csv.row(&[
                    r.cutoffs[i].into(),
                    r.values[i].re.into(),
                    r.values[i].im.into(),
                    r.values_reversed[i].re.into(),
                    r.values_reversed[i].im.into(),
                    r.abs_sums[i].into(),
                ]);
            }
            col.file("nested.csv", csv.finish());
            col.result("nested", &r);
        }
    }
}

fn run_trace(c: &ExperimentConfig, s: &Setup, col: &mut Collector) -> Result<()> {
    let p = c
        .contour
        .as_ref()
        .ok_or_else(|| Error::Config("trace needs `beta` and `mu`".into()))?;
    let mut contour = ContourSpec::with_defaults(p.beta, p.mu, p.top)?;
    if let Some(d) = p.delta {
        contour.delta = d;
    }
    if let Some(x) = p.x_max {
        contour.x_max = x;
    }
    if let Some(n) = p.n_quad {
        contour.n_quad = n;
    }
    contour.validate()?;
    let cutoff = *c
        .cutoffs
        .last()
        .ok_or_else(|| Error::Config("trace needs a band cutoff in `cutoffs`".into()))?;
    if c.directions.is_empty() {
        return Err(Error::Config("trace needs `directions`".into()));
    }

    let band = col.attempt(
        "band sum",
        trace_per_unit_volume(&s.v, &s.basis, &contour, &c.directions, cutoff, &s.grid),
    );
    if let Some(b) = &band {
        col.file("trace_band_sum.csv", b.per_k_csv());
        col.result("band_sum", b);
    }
    let oracle = c.oracle.unwrap_or(s.basis.len() <= DIRECT_MAX_BASIS);
    if oracle {
        let direct = col.attempt(
            "direct quadrature",
            trace_oracle_direct(&s.v, &s.basis, &contour, &c.directions, &s.grid),
        );
        if let (Some(b), Some(d)) = (&band, &direct) {
            let mut check = Check::at_most("trace-oracle", b.relative_difference(d), c.tol("trace"));
            if !check.passed {
                if let Some((i, diff)) = b.worst_k_against(d) {
                    check = check.detail(format!(
                        "worst k-point {i} at k = {:?} (weighted difference {diff:.3e})",
                        s.grid.points[i]
                    ));
                }
            }
            col.checks.push(check);
        }
        if let Some(d) = &direct {
            col.file("trace_direct.csv", d.per_k_csv());
            col.result("direct", d);
        }
    }
    Ok(())
}

fn run_delta(c: &ExperimentConfig, col: &mut Collector) -> Result<()> {
    let needed = c
        .cutoffs
        .iter()
        .chain(&c.pi_j)
        .copied()
        .max()
        .unwrap_or(1);
    let j_max = c.j_max.unwrap_or(needed).max(needed);
    let Some(model) = col.attempt("delta levels", delta_levels(c.g, j_max)) else {
        return Ok(());
    };
    col.file("levels.csv", model.levels_csv());
    col.result("ground", model.ground());

    if !c.pi_j.is_empty() {
        let rows: Vec<_> = c
            .pi_j
            .iter()
            .filter_map(|&j| col.attempt(&format!("π̂ at j = {j}"), delta_pi(&model, j)))
            .collect();
        if let Some(last) = rows.iter().max_by_key(|r| r.j) {
            let rel = last.remainder.norm() / last.leading.norm();
            col.checks.push(
                Check::at_most("pi-leading-term", rel, c.tol("pi")).detail(format!("j = {}", last.j)),
            );
        }
        col.file("pi.csv", pi_table_csv(&rows));
        col.result("pi", &rows);
    }
    if !c.cutoffs.is_empty() {
        if let Some(d) = col.attempt("sum-rule divergence", delta_sumrule_divergence(&model, &c.cutoffs)) {
            col.checks
                .push(Check::at_most("divergence-slope", d.relative_error(), c.tol("slope")));
            col.file("divergence.csv", d.to_csv());
            col.result("divergence", &d);
        }
    }
    if let Some(h) = &c.holder {
        if let Some(fit) = col.attempt("Hölder fit", holder_fit(h.t_min, h.t_max, h.cutoff)) {
            col.checks.push(Check::at_most(
                "holder-exponent",
                (fit.exponent - 0.5).abs(),
                c.tol("holder"),
            ));
            col.result("holder", &fit);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str, ex: Experiment) -> ExperimentConfig {
        parse_config(text, ex).unwrap()
    }

    #[test]
    fn free_spectrum_passes() {
        let c = cfg(
            "[potential free]\nfamily = zero\nshift = 1\n[experiment]\nm_cut = 8\nk_points = 4\n",
            Experiment::Spectrum,
        );
        let out = run(&c).unwrap();
        assert!(out.report.passed, "{:?}", out.report.checks);
        assert_eq!(out.report.checks.len(), 2);
        assert_eq!(out.files[0].0, "bands.csv");
    }

    #[test]
    fn trace_mismatch_names_k_point() {
        let c = cfg(
            "[potential cos]\nfamily = trig\nterms = 1:2\nshift = 3\n[experiment]\nm_cut = 8\nk_points = 2\nbeta = 2\nmu = 10\ndirections = 0, 0\ncutoffs = 4\ntol.trace = 1e-12\n",
            Experiment::Trace,
        );
        let out = run(&c).unwrap();
        assert!(!out.report.passed);
        let check = &out.report.checks[0];
        assert!(!check.passed);
        assert!(check.detail.as_deref().unwrap().contains("worst k-point"));
    }

    #[test]
    fn numerical_errors_are_collected() {
        let c = cfg(
            "[potential cos]\nfamily = trig\nterms = 1:2\nshift = 3\n[experiment]\nm_cut = 4\nk = 0\nband = 40\ncutoffs = 2, 3\n",
            Experiment::Sumrule,
        );
        let out = run(&c).unwrap();
        assert!(!out.report.passed);
        assert!(!out.report.errors.is_empty());
    }

    #[test]
    fn trace_without_contour_is_a_config_error() {
        let c = cfg(
            "[potential cos]\nfamily = trig\nterms = 1:2\n[experiment]\nm_cut = 4\ndirections = 0\ncutoffs = 2\n",
            Experiment::Trace,
        );
        assert!(matches!(run(&c), Err(Error::Config(_))));
    }
}
