//! Confronts computed spectra with predictions and limit graphs.

use crate::discretize::PencilParams;
use crate::graph::{CurveTag, LimitGraph, SpectralCurve};
use crate::linalg::Spectrum;
use crate::profiles::Profile;
use crate::quantize::{self, Prediction};
use crate::SignConvention;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

/// Lower bound on every trust radius used for matching.
pub const DISCRETIZATION_FLOOR: f64 = 1e-6;
/// Largest integer offset a counting fit may use.
pub const MAX_OFFSET: i64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pair {
    pub prediction: Prediction,
    pub eigenvalue: Complex64,
    pub distance: f64,
    pub within_radius: bool,
}

/// A trust disk that holds more than one eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessViolation {
    pub prediction: Prediction,
    pub eigenvalues: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct GraphCheck {
    pub tau: f64,
    pub max_distance: f64,
    /// Per kept eigenvalue, in spectrum order.
    pub distances: Vec<f64>,
    pub violations: Vec<Complex64>,
    pub exempted: usize,
}

impl GraphCheck {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountRow {
    pub tag: CurveTag,
    pub probe: Complex64,
    pub predicted: f64,
    pub counted: usize,
    pub offset_fit: i64,
    /// `counted - predicted - offset_fit`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct CountingTable {
    pub tau: f64,
    pub rows: Vec<CountRow>,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct ReportMeta {
    pub profile: Option<Profile>,
    pub params: Option<PencilParams>,
    pub n: Option<usize>,
    pub sigma: Option<f64>,
    pub sign_convention: SignConvention,
}

impl ReportMeta {
    pub fn of(spectrum: &Spectrum) -> ReportMeta {
        match &spectrum.meta.pencil {
            Some(p) => ReportMeta {
                profile: Some(p.profile),
                params: Some(p.params),
                n: Some(p.n),
                sigma: None,
                sign_convention: p.sign_convention,
            },
            None => ReportMeta::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constants {
    pub sigma: Option<f64>,
    #[serde(rename = "C_used")]
    pub c_used: Option<f64>,
    pub sign_convention: SignConvention,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchReport {
    pub meta: ReportMeta,
    pub pairs: Vec<Pair>,
    pub unmatched_predictions: Vec<Prediction>,
    pub unmatched_eigenvalues: Vec<Complex64>,
    pub uniqueness_violations: Vec<UniquenessViolation>,
    pub graph: GraphCheck,
    pub counting: CountingTable,
    pub constants: Constants,
}

impl MatchReport {
    /// Share of predictions matched inside their trust disk.
    pub fn match_rate(&self) -> f64 {
        let total = self.pairs.len() + self.unmatched_predictions.len();
        if total == 0 {
            return 1.0;
        }
        self.pairs.iter().filter(|p| p.within_radius).count() as f64 / total as f64
    }

    pub fn with_graph(mut self, graph: GraphCheck) -> Self {
        self.graph = graph;
        self
    }

    pub fn with_counting(mut self, counting: CountingTable) -> Self {
        self.counting = counting;
        self
    }
}

/// [`match_within`] with the default floor.
pub fn match_predictions(spectrum: &Spectrum, predictions: &[Prediction], slack: f64) -> MatchReport {
    match_within(spectrum, predictions, slack, DISCRETIZATION_FLOOR)
}

/// Greedy nearest-neighbour pairing of predictions with the kept
/// eigenvalues, by increasing distance. A pair is inside when its distance
/// is at most `max(slack·radius, floor)`.
pub fn match_within(spectrum: &Spectrum, predictions: &[Prediction], slack: f64, floor: f64) -> MatchReport {
    let values = spectrum.kept();
    let disk = |p: &Prediction| (slack * p.radius).max(floor);
    let mut candidates: Vec<(f64, usize, usize)> = Vec::with_capacity(values.len() * predictions.len());
    for (i, p) in predictions.iter().enumerate() {
        for (j, z) in values.iter().enumerate() {
            candidates.push(((p.mu - z).norm(), i, j));
        }
    }
    candidates.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.cmp(&b.1))
            .then(values[a.2].re.total_cmp(&values[b.2].re))
            .then(values[a.2].im.total_cmp(&values[b.2].im))
    });
    let mut used_p = vec![false; predictions.len()];
    let mut used_e = vec![false; values.len()];
    let mut pairs = Vec::new();
    for (d, i, j) in candidates {
        if used_p[i] || used_e[j] {
            continue;
        }
        used_p[i] = true;
        used_e[j] = true;
        let p = &predictions[i];
        pairs.push(Pair { prediction: p.clone(), eigenvalue: values[j], distance: d, within_radius: d <= disk(p) });
    }
    pairs.sort_by(|a, b| a.prediction.mu.im.total_cmp(&b.prediction.mu.im).reverse().then(a.prediction.mu.re.total_cmp(&b.prediction.mu.re)));
    let uniqueness_violations = predictions
        .iter()
        .filter_map(|p| {
            let inside: Vec<Complex64> = values.iter().copied().filter(|z| (p.mu - z).norm() <= disk(p)).collect();
            (inside.len() > 1).then(|| UniquenessViolation { prediction: p.clone(), eigenvalues: inside })
        })
        .collect();
    let meta = ReportMeta::of(spectrum);
    let sign_convention = meta.sign_convention;
    MatchReport {
        meta,
        pairs,
        unmatched_predictions: predictions.iter().zip(&used_p).filter(|(_, u)| !**u).map(|(p, _)| p.clone()).collect(),
        unmatched_eigenvalues: values.iter().zip(&used_e).filter(|(_, u)| !**u).map(|(z, _)| *z).collect(),
        uniqueness_violations,
        graph: GraphCheck::default(),
        counting: CountingTable::default(),
        constants: Constants { sigma: None, c_used: None, sign_convention },
    }
}

/// Distance from `z` to a set of curves.
pub fn curves_distance<'a>(curves: impl IntoIterator<Item = &'a SpectralCurve>, z: Complex64) -> f64 {
    curves.into_iter().map(|c| c.distance(z)).fold(f64::INFINITY, f64::min)
}

/// Distance of every kept eigenvalue to the retained curves of `graph`.
pub fn graph_distance(spectrum: &Spectrum, graph: &LimitGraph) -> Vec<f64> {
    spectrum.kept().into_iter().map(|z| graph.distance(z)).collect()
}

/// τ test of the kept eigenvalues with `|Im λ| <= depth` against `curves`.
/// Eigenvalues inside one of the `exempt` disks `(centre, radius)` are
/// skipped.
pub fn check_curves(
    spectrum: &Spectrum,
    curves: &[SpectralCurve],
    tau: f64,
    depth: f64,
    exempt: &[(Complex64, f64)],
) -> GraphCheck {
    let retained: Vec<&SpectralCurve> = curves.iter().filter(|c| !c.excluded).collect();
    let values = spectrum.kept();
    let distances: Vec<f64> = values.iter().map(|&z| curves_distance(retained.iter().copied(), z)).collect();
    let mut check = GraphCheck { tau, distances: distances.clone(), ..GraphCheck::default() };
    for (z, d) in values.into_iter().zip(distances) {
        if z.im.abs() > depth {
            continue;
        }
        if exempt.iter().any(|(c, r)| (z - c).norm() <= *r) {
            check.exempted += 1;
            continue;
        }
        check.max_distance = check.max_distance.max(d);
        if d > tau {
            check.violations.push(z);
        }
    }
    check
}

/// [`check_curves`] on the retained curves of a limit graph.
pub fn check_graph(spectrum: &Spectrum, graph: &LimitGraph, tau: f64, exempt: &[(Complex64, f64)]) -> GraphCheck {
    check_curves(spectrum, &graph.curves, tau, graph.depth, exempt)
}

/// Curves whose end meets the start of `curves[target]`, transitively.
fn upstream(curves: &[&SpectralCurve], target: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    let mut stack = vec![target];
    while let Some(t) = stack.pop() {
        let start = curves[t].start();
        for (j, c) in curves.iter().enumerate() {
            if j != target && !out.contains(&j) && c.samples.len() > 1 && (c.end() - start).norm() < 1e-8 {
                out.push(j);
                stack.push(j);
            }
        }
    }
    out
}

/// Eigenvalue counts in the curvilinear strips of half-width `tau` along the
/// retained curves, against the main term `phase/(π√h)`, `h` the coefficient
/// of `i y''`. Each kept eigenvalue belongs to its nearest curve; a count at
/// a probe includes the curves feeding into the probe's curve. One integer
/// offset in `[-3, 3]` is fitted per curve.
pub fn compare_counting(spectrum: &Spectrum, graph: &LimitGraph, coupling: f64, probes: &[Complex64], tau: f64) -> CountingTable {
    let quantum = PI * coupling.sqrt();
    let curves: Vec<&SpectralCurve> = graph.retained().collect();
    let mut owned: Vec<Vec<f64>> = vec![Vec::new(); curves.len()];
    for z in spectrum.kept() {
        let (mut best, mut dist) = (usize::MAX, tau);
        for (j, c) in curves.iter().enumerate() {
            let d = c.distance(z);
            if d <= dist {
                best = j;
                dist = d;
            }
        }
        if best != usize::MAX {
            owned[best].push(curves[best].phase_near(z).0);
        }
    }
    let mut rows: Vec<(usize, CountRow)> = Vec::new();
    for &probe in probes {
        let Some((j, _)) = curves
            .iter()
            .enumerate()
            .map(|(j, c)| (j, c.distance(probe)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
        else {
            continue;
        };
        let phase = curves[j].phase_near(probe).0;
        let below = owned[j].iter().filter(|&&p| p <= phase).count();
        let feeding: usize = upstream(&curves, j).into_iter().map(|u| owned[u].len()).sum();
        // Exact main term where available; the sampled phase otherwise.
        let predicted = quantize::counting_function(&graph.profile, curves[j].tag, probe, coupling).unwrap_or(phase / quantum);
        rows.push((
            j,
            CountRow {
                tag: curves[j].tag,
                probe,
                predicted,
                counted: below + feeding,
                offset_fit: 0,
                residual: 0.0,
            },
        ));
    }
    for j in 0..curves.len() {
        let diffs: Vec<f64> = rows.iter().filter(|r| r.0 == j).map(|r| r.1.counted as f64 - r.1.predicted).collect();
        if diffs.is_empty() {
            continue;
        }
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let offset = (mean.round() as i64).clamp(-MAX_OFFSET, MAX_OFFSET);
        for (_, row) in rows.iter_mut().filter(|r| r.0 == j) {
            row.offset_fit = offset;
            row.residual = row.counted as f64 - row.predicted - offset as f64;
        }
    }
    let rows: Vec<CountRow> = rows.into_iter().map(|r| r.1).collect();
    let max_residual = rows.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
    CountingTable { tau, rows, max_residual }
}

/// Kept eigenvalues inside the disk `(centre, radius)`.
pub fn disk_population(spectrum: &Spectrum, centre: Complex64, radius: f64) -> usize {
    spectrum.kept().iter().filter(|z| (*z - centre).norm() <= radius).count()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryAudit {
    /// `max_z min_w |w + conj z|` over the kept eigenvalues.
    pub max_defect: f64,
    /// Matched pairs whose mirrored prediction is unpaired or paired with an
    /// eigenvalue farther than `tol` from the mirrored eigenvalue.
    pub broken_pairs: usize,
}

/// Defect of the spectrum under `λ ↦ -conj(λ)`.
pub fn symmetry_defect(values: &[Complex64]) -> f64 {
    values
        .iter()
        .map(|z| {
            let m = Complex64::new(-z.re, z.im);
            values.iter().map(|w| (w - m).norm()).fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Symmetry audit of a spectrum and its pairing for the Couette families.
pub fn symmetry_audit(spectrum: &Spectrum, report: &MatchReport, tol: f64) -> SymmetryAudit {
    let max_defect = symmetry_defect(&spectrum.kept());
    let mirror = |z: Complex64| Complex64::new(-z.re, z.im);
    let broken_pairs = report
        .pairs
        .iter()
        .filter(|p| p.within_radius)
        .filter(|p| {
            let target = mirror(p.prediction.mu);
            match report.pairs.iter().find(|q| (q.prediction.mu - target).norm() <= 1e-12 * (1.0 + target.norm())) {
                Some(q) => !q.within_radius || (q.eigenvalue - mirror(p.eigenvalue)).norm() > tol,
                None => true,
            }
        })
        .count();
    SymmetryAudit { max_defect, broken_pairs }
}

/// Eigenvalues outside the semistrip `{Im λ < 0, a < Re λ < b}` (conjugated
/// for [`SignConvention::MinusI`]), with slack `tol`.
pub fn semistrip_violations(values: &[Complex64], strip: (f64, f64), sign: SignConvention, tol: f64) -> Vec<Complex64> {
    values
        .iter()
        .copied()
        .filter(|z| {
            let w = match sign {
                SignConvention::PlusI => *z,
                SignConvention::MinusI => z.conj(),
            };
            w.im > tol || w.re < strip.0 - tol || w.re > strip.1 + tol
        })
        .collect()
}
