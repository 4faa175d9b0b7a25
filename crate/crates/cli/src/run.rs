//! Orchestration of one command: engines, checks, and file emission.

use crate::config::{Command, ConfigError, Format, Operator, RunConfig};
use crate::svg::Plot;
use serde::Serialize;
use serde_json::json;
use spectral_core::discretize::{self, Boundary, Normalization, OperatorPencil};
use spectral_core::graph::{self, LimitGraph, SpectralCurve, DEFAULT_SAMPLES};
use spectral_core::linalg::Spectrum;
use spectral_core::profiles::{Profile, ProfileKind};
use spectral_core::quantize::{self, CouetteConstants, Prediction, DEFAULT_C};
use spectral_core::{phase, verify, Complex64, SignConvention};
use std::fmt::Debug;
use std::path::PathBuf;
use thiserror::Error;

/// Relative tolerance of the coarse/fine spurious-mode filter.
pub const FILTER_TOL: f64 = 1e-6;
/// Smallest share of predictions a `compare` run must match.
pub const MATCH_THRESHOLD: f64 = 0.9;
/// Arclength cap for traced Stokes lines.
pub const STOKES_LENGTH: f64 = 6.0;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{module}::{name}: {message}")]
    Numeric { module: &'static str, name: String, message: String },
    #[error("IoError: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 64,
            _ => 1,
        }
    }

    fn numeric<E: Debug + std::fmt::Display>(module: &'static str, e: E) -> RunError {
        let debug = format!("{e:?}");
        let name = debug.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("").to_string();
        RunError::Numeric { module, name, message: e.to_string() }
    }
}

macro_rules! numeric_from {
    ($($ty:ty => $module:literal),* $(,)?) => {
        $(impl From<$ty> for RunError {
            fn from(e: $ty) -> Self {
                RunError::numeric($module, e)
            }
        })*
    };
}

numeric_from! {
    spectral_core::profiles::ProfileError => "profiles",
    spectral_core::airy::AiryError => "airy",
    spectral_core::phase::PhaseError => "phase",
    spectral_core::graph::GraphError => "graph",
    spectral_core::quantize::QuantizeError => "quantize",
    spectral_core::discretize::DiscretizeError => "discretize",
    spectral_core::linalg::LinalgError => "linalg",
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// 0 on success, 2 when a `compare` run misses its thresholds.
    pub status: i32,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// Coefficient of `i y''` for the model problem at a given `ε`.
pub fn coupling(profile: &Profile, eps: f64) -> f64 {
    Normalization::for_profile(profile).coupling(eps)
}

/// Coefficient of `i y''` of the run's leading-order model problem.
fn model_coupling(cfg: &RunConfig) -> Option<f64> {
    cfg.operator.map(|op| match op {
        Operator::Model { eps } => coupling(&cfg.profile, eps),
        Operator::OrrSommerfeld { alpha, reynolds } => 1.0 / (alpha * reynolds),
    })
}

/// Build the pencil of the configured operator at degree `n`.
pub fn pencil(cfg: &RunConfig, n: usize) -> Result<OperatorPencil, discretize::DiscretizeError> {
    match cfg.operator {
        Some(Operator::Model { eps }) => {
            discretize::assemble_model(&cfg.profile, coupling(&cfg.profile, eps), n, Boundary::Dirichlet, cfg.sign_convention)
        }
        Some(Operator::OrrSommerfeld { alpha, reynolds }) => {
            discretize::assemble_os(&cfg.profile, alpha, reynolds, n, cfg.sign_convention)
        }
        None => Err(discretize::DiscretizeError::InvalidParameter("no operator configured".into())),
    }
}

/// Filtered spectrum of the configured operator.
pub fn solve(cfg: &RunConfig) -> Result<Spectrum, RunError> {
    let n = cfg.n.ok_or_else(|| ConfigError("missing field: n".into()))?;
    Ok(discretize::filtered_spectrum(|m| pencil(cfg, m), n, FILTER_TOL)?)
}

/// The spectrum as seen in the `plus_i` frame, where graphs and
/// predictions live.
pub fn plus_frame(spectrum: &Spectrum, sign: SignConvention) -> Spectrum {
    if sign == SignConvention::PlusI {
        return spectrum.clone();
    }
    let mut rows: Vec<_> = spectrum.eigenvalues.iter().map(|z| z.conj()).zip(spectrum.flags.iter().copied()).collect();
    rows.sort_by(|a, b| b.0.im.total_cmp(&a.0.im).then(a.0.re.total_cmp(&b.0.re)));
    let (eigenvalues, flags) = rows.into_iter().unzip();
    Spectrum { eigenvalues, flags, meta: spectrum.meta.clone() }
}

/// Curves to test the spectrum against, and the model graph used for
/// counting.
pub struct Curves {
    pub curves: Vec<SpectralCurve>,
    pub graph: LimitGraph,
}

pub fn curves(cfg: &RunConfig) -> Result<Curves, RunError> {
    let linear = matches!(cfg.profile.kind, ProfileKind::Linear);
    let graph = graph::build_limit_graph(&cfg.profile, cfg.depth, DEFAULT_SAMPLES)?;
    let curves = match cfg.operator {
        Some(Operator::OrrSommerfeld { alpha, reynolds }) if linear => {
            graph::couette_os_curves(1.0 / (alpha * reynolds), alpha, cfg.depth, DEFAULT_SAMPLES)?
        }
        _ => graph.curves.clone(),
    };
    Ok(Curves { curves, graph })
}

pub struct Predicted {
    pub predictions: Vec<Prediction>,
    pub constants: Option<CouetteConstants>,
}

pub fn predictions(cfg: &RunConfig, graph: &LimitGraph) -> Result<Predicted, RunError> {
    let linear = matches!(cfg.profile.kind, ProfileKind::Linear);
    match cfg.operator {
        Some(Operator::Model { eps }) if linear => {
            let (predictions, k) = quantize::predict_model_couette(eps, cfg.sigma, cfg.depth, DEFAULT_C)?;
            Ok(Predicted { predictions, constants: Some(k) })
        }
        Some(Operator::Model { eps }) => Ok(Predicted {
            predictions: quantize::predict_wkb(&cfg.profile, eps, graph, cfg.delta, DEFAULT_C)?,
            constants: None,
        }),
        Some(Operator::OrrSommerfeld { alpha, reynolds }) if linear => {
            let predictions = quantize::predict_os_couette(alpha, reynolds, cfg.sigma, cfg.depth, DEFAULT_C)?;
            let constants = quantize::couette_constants(1.0 / (alpha * reynolds), cfg.sigma)?;
            Ok(Predicted { predictions, constants: Some(constants) })
        }
        Some(Operator::OrrSommerfeld { .. }) => {
            Err(ConfigError(format!("predictions for Orr-Sommerfeld need the linear profile, not {}", cfg.profile.name())).into())
        }
        None => Err(ConfigError("missing field: eps (or alpha and reynolds)".into()).into()),
    }
}

/// Probes at a quarter, half, three quarters and the end of every retained,
/// unmirrored curve.
pub fn counting_probes(graph: &LimitGraph) -> Vec<Complex64> {
    graph
        .retained()
        .filter(|c| !c.mirrored && c.samples.len() > 1)
        .flat_map(|c| {
            let last = c.samples.len() - 1;
            (1..=4).map(move |j| c.samples[last * j / 4])
        })
        .collect()
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

struct Writer<'a> {
    cfg: &'a RunConfig,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn put(&mut self, name: &str, body: &str) -> Result<(), RunError> {
        std::fs::create_dir_all(&self.cfg.out)?;
        let path = self.cfg.out.join(name);
        std::fs::write(&path, body)?;
        self.files.push(path);
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), RunError> {
        if !self.cfg.wants(Format::Csv) {
            return Ok(());
        }
        let mut body = header.join(",");
        body.push('\n');
        for r in rows {
            body.push_str(&r.join(","));
            body.push('\n');
        }
        self.put(name, &body)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        if !self.cfg.wants(Format::Json) {
            return Ok(());
        }
        let mut body = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        body.push('\n');
        self.put(name, &body)
    }

    fn svg(&mut self, name: &str, plot: Plot, title: &str) -> Result<(), RunError> {
        if !self.cfg.wants(Format::Svg) {
            return Ok(());
        }
        self.put(name, &plot.finish(title))
    }
}

fn title(cfg: &RunConfig) -> String {
    let op = match cfg.operator {
        Some(Operator::Model { eps }) => format!(" eps={eps}"),
        Some(Operator::OrrSommerfeld { alpha, reynolds }) => format!(" alpha={alpha} R={reynolds}"),
        None => String::new(),
    };
    let n = cfg.n.map(|n| format!(" n={n}")).unwrap_or_default();
    format!("{} {}{op}{n}", cfg.command.as_str(), cfg.profile.name())
}

fn plot(cfg: &RunConfig) -> Plot {
    Plot::new(cfg.profile.range().strip(), cfg.depth)
}

fn spectrum_rows(s: &Spectrum) -> Vec<Vec<String>> {
    s.eigenvalues.iter().zip(&s.flags).map(|(z, f)| vec![num(z.re), num(z.im), f.label().to_string()]).collect()
}

fn draw_curves(p: &mut Plot, curves: &[SpectralCurve], knots: &[Complex64]) {
    p.axes();
    for c in curves {
        p.curve(c);
    }
    for k in knots {
        p.marker(*k, "knot");
    }
}

/// Execute one configured command.
pub fn run(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let mut w = Writer { cfg, files: Vec::new() };
    let (status, summary) = match cfg.command {
        Command::Portrait => portrait(cfg, &mut w)?,
        Command::Graph => limit_graph(cfg, &mut w)?,
        Command::Predict => predict(cfg, &mut w)?,
        Command::Compare => compare(cfg, &mut w)?,
        Command::Stokes => stokes(cfg, &mut w)?,
    };
    Ok(Outcome { status, files: w.files, summary })
}

fn portrait(cfg: &RunConfig, w: &mut Writer) -> Result<(i32, String), RunError> {
    let (spectrum, curves) = rayon::join(|| solve(cfg), || curves(cfg));
    let (spectrum, curves) = (spectrum?, curves?);
    let kept = spectrum.kept();
    let checked = plus_frame(&spectrum, cfg.sign_convention).kept();
    let violations = match cfg.operator {
        Some(Operator::Model { .. }) => verify::semistrip_violations(&checked, cfg.profile.range().strip(), SignConvention::PlusI, 1e-8).len(),
        _ => 0,
    };
    w.csv("spectrum.csv", &["re", "im", "flag"], spectrum_rows(&spectrum))?;
    w.json(
        "spectrum.json",
        &json!({
            "meta": spectrum.meta,
            "kept": kept.len(),
            "semistrip_violations": violations,
            "symmetry_defect": verify::symmetry_defect(&checked),
            "eigenvalues": spectrum.eigenvalues.iter().zip(&spectrum.flags)
                .map(|(z, f)| json!({"re": z.re, "im": z.im, "flag": f.label()}))
                .collect::<Vec<_>>(),
        }),
    )?;
    let mut p = plot(cfg);
    let knots: Vec<Complex64> = curves.graph.knots.iter().map(|k| k.value).collect();
    draw_curves(&mut p, &curves.curves, &knots);
    for z in plus_frame(&spectrum, cfg.sign_convention).kept() {
        p.eigenvalue(z);
    }
    w.svg("portrait.svg", p, &title(cfg))?;
    Ok((0, format!("{} eigenvalues kept of {}", kept.len(), spectrum.len())))
}

fn limit_graph(cfg: &RunConfig, w: &mut Writer) -> Result<(i32, String), RunError> {
    let c = curves(cfg)?;
    let rows = c.curves.iter().enumerate().flat_map(|(j, curve)| {
        curve.samples.iter().zip(&curve.phase).enumerate().map(move |(i, (z, ph))| {
            vec![
                j.to_string(),
                curve.tag.as_str().to_string(),
                curve.excluded.to_string(),
                curve.mirrored.to_string(),
                i.to_string(),
                num(z.re),
                num(z.im),
                num(*ph),
            ]
        })
    });
    w.csv("graph.csv", &["curve", "tag", "excluded", "mirrored", "index", "re", "im", "phase"], rows)?;
    w.json(
        "graph.json",
        &json!({
            "profile": c.graph.profile,
            "family": c.graph.family,
            "knots": c.graph.knots,
            "endpoints": c.graph.endpoints,
            "depth": c.graph.depth,
            "curves": c.curves,
        }),
    )?;
    let mut p = plot(cfg);
    let knots: Vec<Complex64> = c.graph.knots.iter().map(|k| k.value).collect();
    draw_curves(&mut p, &c.curves, &knots);
    w.svg("graph.svg", p, &title(cfg))?;
    let retained = c.curves.iter().filter(|c| !c.excluded).count();
    Ok((0, format!("{retained} retained curves, {} knots", knots.len())))
}

fn prediction_rows(preds: &[Prediction]) -> Vec<Vec<String>> {
    preds
        .iter()
        .map(|p| {
            vec![
                p.tag.as_str().to_string(),
                p.k.to_string(),
                p.mirrored.to_string(),
                num(p.mu.re),
                num(p.mu.im),
                num(p.radius),
                num(p.phase_value),
            ]
        })
        .collect()
}

fn predict(cfg: &RunConfig, w: &mut Writer) -> Result<(i32, String), RunError> {
    let c = curves(cfg)?;
    let pr = predictions(cfg, &c.graph)?;
    w.csv("predictions.csv", &["tag", "k", "mirrored", "re", "im", "radius", "phase"], prediction_rows(&pr.predictions))?;
    w.json("predictions.json", &json!({"constants": pr.constants, "predictions": pr.predictions}))?;
    let mut p = plot(cfg);
    let knots: Vec<Complex64> = c.graph.knots.iter().map(|k| k.value).collect();
    draw_curves(&mut p, &c.curves, &knots);
    for q in &pr.predictions {
        p.disk(q.mu, q.radius);
    }
    w.svg("predictions.svg", p, &title(cfg))?;
    Ok((0, format!("{} predictions", pr.predictions.len())))
}

/// Full comparison of a computed spectrum with predictions and curves.
pub fn compare_report(cfg: &RunConfig, spectrum: &Spectrum, c: &Curves, pr: &Predicted) -> verify::MatchReport {
    let checked = plus_frame(spectrum, cfg.sign_convention);
    let exempt: Vec<(Complex64, f64)> = pr.constants.iter().map(|k| (k.knot_center, k.knot_radius)).collect();
    let outside: Vec<Prediction> = pr
        .predictions
        .iter()
        .filter(|p| pr.constants.as_ref().map_or(true, |k| !k.in_knot_disk(p.mu)))
        .cloned()
        .collect();
    let mut report = verify::match_predictions(&checked, &outside, 1.0);
    let check = verify::check_curves(&checked, &c.curves, cfg.tau, cfg.depth, &exempt);
    if let Some(h) = model_coupling(cfg) {
        let probes = counting_probes(&c.graph);
        report = report.with_counting(verify::compare_counting(&checked, &c.graph, h, &probes, cfg.tau));
    }
    report.meta.sigma = Some(cfg.sigma);
    report.constants.sigma = Some(cfg.sigma);
    report.constants.c_used = Some(DEFAULT_C);
    report.with_graph(check)
}

fn compare(cfg: &RunConfig, w: &mut Writer) -> Result<(i32, String), RunError> {
    let (spectrum, rest) = rayon::join(
        || solve(cfg),
        || -> Result<(Curves, Predicted), RunError> {
            let c = curves(cfg)?;
            let pr = predictions(cfg, &c.graph)?;
            Ok((c, pr))
        },
    );
    let (spectrum, (c, pr)) = (spectrum?, rest?);
    let report = compare_report(cfg, &spectrum, &c, &pr);
    w.csv("spectrum.csv", &["re", "im", "flag"], spectrum_rows(&spectrum))?;
    w.json("report.json", &report)?;
    let mut p = plot(cfg);
    let knots: Vec<Complex64> = c.graph.knots.iter().map(|k| k.value).collect();
    draw_curves(&mut p, &c.curves, &knots);
    for q in &pr.predictions {
        p.disk(q.mu, q.radius.max(verify::DISCRETIZATION_FLOOR));
    }
    for z in plus_frame(&spectrum, cfg.sign_convention).kept() {
        p.eigenvalue(z);
    }
    w.svg("compare.svg", p, &title(cfg))?;
    let rate = report.match_rate();
    let ok = report.graph.passed() && rate >= MATCH_THRESHOLD;
    let summary = format!(
        "tau={} max distance {:.3e}, {} off-graph; {:.1}% of {} predictions matched",
        cfg.tau,
        report.graph.max_distance,
        report.graph.violations.len(),
        100.0 * rate,
        report.pairs.len() + report.unmatched_predictions.len()
    );
    Ok((if ok { 0 } else { 2 }, summary))
}

fn stokes(cfg: &RunConfig, w: &mut Writer) -> Result<(i32, String), RunError> {
    let lambda = cfg.lambda.ok_or_else(|| ConfigError("missing field: lambda".into()))?;
    let complexes = phase::trace_stokes(&cfg.profile, lambda, STOKES_LENGTH)?;
    let label = |i: usize, tag: &str| if complexes.len() == 1 { tag.to_string() } else { format!("tp{i}_{tag}") };
    let mut rows = Vec::new();
    for (i, sc) in complexes.iter().enumerate() {
        for line in &sc.lines {
            for z in &line.points {
                rows.push(vec![label(i, line.tag.as_str()), num(z.re), num(z.im)]);
            }
        }
    }
    w.csv("stokes.csv", &["line_tag", "re_z", "im_z"], rows)?;
    w.json("stokes.json", &json!({"lambda": lambda, "complexes": complexes}))?;
    let mut p = Plot::window((-2.0, 2.0), (-2.0, 2.0));
    p.axes();
    p.polyline(&[Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0)], "interval");
    for sc in &complexes {
        p.marker(sc.turning_point, "turning_point");
        for line in &sc.lines {
            p.polyline(&line.points, "stokes");
        }
    }
    w.svg("stokes.svg", p, &title(cfg))?;
    Ok((0, format!("{} turning points", complexes.len())))
}
