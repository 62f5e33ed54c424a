//! File formats.
//!
//! Problems, boundary conditions, spectra, and Atkinson data travel as JSON
//! with matrices stored as flat row-major arrays of `[re, im]` pairs; the
//! shapes are implied by `d` and checked on load.  Spectra and branch traces
//! also have CSV forms for plotting.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::atkinson::AtkinsonProblem;
use crate::classify::JumpPrediction;
use crate::error::{Error, Result};
use crate::numkernel::{CMatrix, InertiaSignature, Tolerances};
use crate::perturb::{BranchFate, BranchTrace, JumpReport};
use crate::problem::{BoundaryChart, BoundaryCondition, BoundaryRaw, SLEquation};
use crate::spectrum::Spectrum;

/// Flat row-major `[re, im]` pairs.
pub type MatrixData = Vec<[f64; 2]>;

pub fn matrix_to_data(m: &CMatrix) -> MatrixData {
    let mut out = Vec::with_capacity(m.rows() * m.cols());
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let z = m[(i, j)];
            out.push([z.re, z.im]);
        }
    }
    out
}

pub fn matrix_from_data(data: &[[f64; 2]], rows: usize, cols: usize, label: &str) -> Result<CMatrix> {
    if data.len() != rows * cols {
        return Err(Error::Validation(format!(
            "{label} must hold {rows}x{cols} = {} entries, got {}",
            rows * cols,
            data.len()
        )));
    }
    Ok(CMatrix::from_fn(rows, cols, |i, j| {
        let [re, im] = data[i * cols + j];
        Complex64::new(re, im)
    }))
}

fn matrices_from_data(
    data: &[MatrixData],
    expected: usize,
    d: usize,
    label: &str,
) -> Result<Vec<CMatrix>> {
    if data.len() != expected {
        return Err(Error::Validation(format!(
            "{label} must list {expected} matrices, got {}",
            data.len()
        )));
    }
    data.iter()
        .enumerate()
        .map(|(i, m)| matrix_from_data(m, d, d, &format!("{label}[{i}]")))
        .collect()
}

#[derive(Serialize, Deserialize, Clone)]
pub struct ChartFile {
    #[serde(rename = "K")]
    pub k: Vec<usize>,
    #[serde(rename = "S")]
    pub s: MatrixData,
}

impl ChartFile {
    pub fn from_chart(chart: &BoundaryChart) -> Self {
        ChartFile {
            k: chart.k().to_vec(),
            s: matrix_to_data(chart.s()),
        }
    }

    pub fn chart(&self, d: usize, tols: &Tolerances) -> Result<BoundaryChart> {
        let s = matrix_from_data(&self.s, 2 * d, 2 * d, "S")?;
        BoundaryChart::new(self.k.clone(), s, tols)
    }
}

#[derive(Serialize, Deserialize, Clone)]
pub struct RawBcFile {
    #[serde(rename = "A")]
    pub a: MatrixData,
    #[serde(rename = "B")]
    pub b: MatrixData,
}

/// Either `{"raw": {"A", "B"}}` or `{"chart": {"K", "S"}}`.
#[derive(Serialize, Deserialize, Clone)]
pub enum BcFile {
    #[serde(rename = "raw")]
    Raw(RawBcFile),
    #[serde(rename = "chart")]
    Chart(ChartFile),
}

impl BcFile {
    pub fn from_condition(bc: &BoundaryCondition) -> Self {
        match bc {
            BoundaryCondition::Raw(raw) => BcFile::Raw(RawBcFile {
                a: matrix_to_data(raw.a()),
                b: matrix_to_data(raw.b()),
            }),
            BoundaryCondition::Chart(chart) => BcFile::Chart(ChartFile::from_chart(chart)),
        }
    }

    pub fn condition(&self, d: usize, tols: &Tolerances) -> Result<BoundaryCondition> {
        match self {
            BcFile::Raw(rawf) => {
                let a = matrix_from_data(&rawf.a, 2 * d, 2 * d, "A")?;
                let b = matrix_from_data(&rawf.b, 2 * d, 2 * d, "B")?;
                Ok(BoundaryCondition::Raw(BoundaryRaw::new(a, b, tols)?))
            }
            BcFile::Chart(chartf) => Ok(BoundaryCondition::Chart(chartf.chart(d, tols)?)),
        }
    }
}

/// `{"d", "N", "Pinv", "Q", "W"}` with an optional embedded `"bc"`.
#[derive(Serialize, Deserialize, Clone)]
pub struct ProblemFile {
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "Pinv")]
    pub pinv: Vec<MatrixData>,
    #[serde(rename = "Q")]
    pub q: Vec<MatrixData>,
    #[serde(rename = "W")]
    pub w: Vec<MatrixData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bc: Option<BcFile>,
}

impl ProblemFile {
    pub fn from_equation(eq: &SLEquation, bc: Option<&BoundaryCondition>) -> Self {
        ProblemFile {
            d: eq.d(),
            n: eq.n(),
            pinv: (0..=eq.n()).map(|j| matrix_to_data(eq.pinv(j))).collect(),
            q: (1..=eq.n()).map(|i| matrix_to_data(eq.q(i))).collect(),
            w: (1..=eq.n()).map(|i| matrix_to_data(eq.w(i))).collect(),
            bc: bc.map(BcFile::from_condition),
        }
    }

    pub fn equation(&self, tols: &Tolerances) -> Result<SLEquation> {
        SLEquation::new(
            self.d,
            self.n,
            matrices_from_data(&self.pinv, self.n + 1, self.d, "Pinv")?,
            matrices_from_data(&self.q, self.n, self.d, "Q")?,
            matrices_from_data(&self.w, self.n, self.d, "W")?,
            tols,
        )
    }

    pub fn boundary(&self, tols: &Tolerances) -> Result<Option<BoundaryCondition>> {
        self.bc.as_ref().map(|bc| bc.condition(self.d, tols)).transpose()
    }
}

/// `{"d", "N", "partition", "What", "Qhat", "Pinvhat"}` plus optional `"bc"`.
#[derive(Serialize, Deserialize, Clone)]
pub struct AtkinsonFile {
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub partition: Vec<f64>,
    #[serde(rename = "What")]
    pub what: Vec<MatrixData>,
    #[serde(rename = "Qhat")]
    pub qhat: Vec<MatrixData>,
    #[serde(rename = "Pinvhat")]
    pub pinvhat: Vec<MatrixData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bc: Option<BcFile>,
}

impl AtkinsonFile {
    pub fn from_problem(ap: &AtkinsonProblem, bc: Option<&BoundaryCondition>) -> Self {
        AtkinsonFile {
            d: ap.d(),
            n: ap.n(),
            partition: ap.partition().to_vec(),
            what: (0..=ap.n()).map(|i| matrix_to_data(ap.what(i))).collect(),
            qhat: (0..=ap.n()).map(|i| matrix_to_data(ap.qhat(i))).collect(),
            pinvhat: (1..=ap.n()).map(|j| matrix_to_data(ap.pinvhat(j))).collect(),
            bc: bc.map(BcFile::from_condition),
        }
    }

    pub fn problem(&self, tols: &Tolerances) -> Result<AtkinsonProblem> {
        if self.pinvhat.len() != self.n {
            return Err(Error::Validation(format!(
                "Pinvhat must list {} matrices, got {}",
                self.n,
                self.pinvhat.len()
            )));
        }
        AtkinsonProblem::new(
            self.d,
            self.partition.clone(),
            matrices_from_data(&self.what, self.n + 1, self.d, "What")?,
            matrices_from_data(&self.qhat, self.n + 1, self.d, "Qhat")?,
            matrices_from_data(&self.pinvhat, self.n, self.d, "Pinvhat")?,
            tols,
        )
    }

    pub fn boundary(&self, tols: &Tolerances) -> Result<Option<BoundaryCondition>> {
        self.bc.as_ref().map(|bc| bc.condition(self.d, tols)).transpose()
    }
}

#[derive(Serialize, Deserialize, Clone, Copy)]
pub struct SpectrumEntry {
    pub lambda: f64,
    pub mult: usize,
}

/// `{"eigenvalues": [{"lambda", "mult"}…]}`, CSV form `lambda,mult`.
#[derive(Serialize, Deserialize, Clone)]
pub struct SpectrumFile {
    pub eigenvalues: Vec<SpectrumEntry>,
}

impl SpectrumFile {
    pub fn from_spectrum(spec: &Spectrum) -> Self {
        SpectrumFile {
            eigenvalues: spec
                .items()
                .iter()
                .map(|&(lambda, mult)| SpectrumEntry { lambda, mult })
                .collect(),
        }
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("lambda,mult\n");
        for e in &self.eigenvalues {
            out.push_str(&format!("{},{}\n", e.lambda, e.mult));
        }
        out
    }
}

/// Which singular set a path or classification lives in.
#[derive(Serialize, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SpaceTag {
    Bc,
    Eq,
    Atkinson,
}

/// Input for `trace` and `jump`: the problem, the chart of the singular
/// point, the signature the path should carry at `t > 0`, and the ladder
/// geometry.  `problem` drives the `bc`/`eq` spaces, `atkinson` its own.
#[derive(Serialize, Deserialize, Clone)]
pub struct PathSpecFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atkinson: Option<AtkinsonFile>,
    pub space: SpaceTag,
    pub chart: ChartFile,
    /// `[r_minus, r_zero, r_plus]` at `t > 0`.
    pub target: [usize; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_steps: Option<usize>,
}

impl PathSpecFile {
    pub fn target_signature(&self) -> InertiaSignature {
        InertiaSignature::new(self.target[0], self.target[1], self.target[2])
    }
}

/// Output of the classify subcommands.
#[derive(Serialize, Deserialize, Clone)]
pub struct ClassifyReportFile {
    pub layer: usize,
    /// `[r_minus, r_zero, r_plus]`.
    pub inertia: [usize; 3],
    pub classifier: MatrixData,
}

impl ClassifyReportFile {
    pub fn new(layer: usize, inertia: InertiaSignature, classifier: &CMatrix) -> Self {
        ClassifyReportFile {
            layer,
            inertia: [inertia.r_minus, inertia.r_zero, inertia.r_plus],
            classifier: matrix_to_data(classifier),
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Copy)]
pub struct PredictionData {
    pub n_down: usize,
    pub n_up: usize,
    pub index_shift: usize,
}

impl From<JumpPrediction> for PredictionData {
    fn from(p: JumpPrediction) -> Self {
        PredictionData {
            n_down: p.n_down,
            n_up: p.n_up,
            index_shift: p.index_shift,
        }
    }
}

pub fn fate_token(fate: BranchFate) -> String {
    match fate {
        BranchFate::DivergesDown => "down".into(),
        BranchFate::DivergesUp => "up".into(),
        BranchFate::ConvergesTo(m) => format!("->{m}"),
    }
}

/// Output of `jump`.
#[derive(Serialize, Deserialize, Clone)]
pub struct JumpReportFile {
    pub pass: bool,
    pub predicted: PredictionData,
    pub observed: PredictionData,
    pub fates: Vec<String>,
    pub endpoint: SpectrumFile,
}

impl JumpReportFile {
    pub fn from_report(report: &JumpReport) -> Self {
        JumpReportFile {
            pass: report.pass,
            predicted: report.predicted.into(),
            observed: report.observed.into(),
            fates: report.fates.iter().map(|&f| fate_token(f)).collect(),
            endpoint: SpectrumFile::from_spectrum(&report.endpoint),
        }
    }
}

/// Branch rows `(t, n, lambda, flag)`; `flags` labels each branch, empty
/// strings for a bare trace.
pub fn trace_csv(trace: &BranchTrace, flags: Option<&[String]>) -> String {
    let mut out = String::from("t,n,lambda,flag\n");
    for (k, &t) in trace.ts().iter().enumerate() {
        for n in 1..=trace.count() {
            let flag = flags.map_or("", |f| f[n - 1].as_str());
            out.push_str(&format!("{t},{n},{},{flag}\n", trace.branch(n)[k]));
        }
    }
    out
}

/// JSON form of a branch trace.
#[derive(Serialize, Deserialize, Clone)]
pub struct TraceFile {
    pub ts: Vec<f64>,
    pub branches: Vec<Vec<f64>>,
}

impl TraceFile {
    pub fn from_trace(trace: &BranchTrace) -> Self {
        TraceFile {
            ts: trace.ts().to_vec(),
            branches: (1..=trace.count()).map(|n| trace.branch(n).to_vec()).collect(),
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::vibrating_string;

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn matrix_codec_round_trip() {
        let m = CMatrix::from_fn(2, 3, |i, j| Complex64::new(i as f64, j as f64 - 1.0));
        let data = matrix_to_data(&m);
        assert_eq!(data.len(), 6);
        assert_eq!(data[1], [0.0, 0.0]);
        assert_eq!(data[5], [1.0, 1.0]);
        let back = matrix_from_data(&data, 2, 3, "m").unwrap();
        assert!((&back - &m).max_abs() == 0.0);
        assert!(matrix_from_data(&data, 3, 3, "m").is_err());
    }

    #[test]
    fn problem_file_round_trip() {
        let t = tols();
        let (eq, _) = vibrating_string(&[1.0; 5], &[1.0; 4], &t).unwrap();
        let bc = BoundaryCondition::Raw(
            BoundaryRaw::new(CMatrix::identity(2), CMatrix::zeros(2, 2), &t).unwrap(),
        );
        let file = ProblemFile::from_equation(&eq, Some(&bc));
        let text = to_json(&file).unwrap();
        let parsed: ProblemFile = serde_json::from_str(&text).unwrap();
        let eq2 = parsed.equation(&t).unwrap();
        assert_eq!(eq2.n(), 4);
        for j in 0..=4 {
            assert!((&eq2.pinv(j).clone() - eq.pinv(j)).max_abs() == 0.0);
        }
        match parsed.boundary(&t).unwrap().unwrap() {
            BoundaryCondition::Raw(raw) => {
                assert!((&raw.a().clone() - &CMatrix::identity(2)).max_abs() == 0.0)
            }
            _ => panic!("expected a raw condition"),
        }
    }

    #[test]
    fn bc_file_json_shape() {
        let t = tols();
        let chart = BoundaryChart::new(vec![1], CMatrix::zeros(2, 2), &t).unwrap();
        let file = BcFile::from_condition(&BoundaryCondition::Chart(chart));
        let text = serde_json::to_string(&file).unwrap();
        assert!(text.starts_with("{\"chart\""), "{text}");
        assert!(text.contains("\"K\":[1]"), "{text}");
        let back: BcFile = serde_json::from_str(&text).unwrap();
        match back.condition(1, &t).unwrap() {
            BoundaryCondition::Chart(c) => assert_eq!(c.k(), &[1]),
            _ => panic!("expected a chart"),
        }
    }

    #[test]
    fn spectrum_csv_shape() {
        let file = SpectrumFile {
            eigenvalues: vec![
                SpectrumEntry { lambda: 0.5, mult: 2 },
                SpectrumEntry { lambda: 2.0, mult: 1 },
            ],
        };
        assert_eq!(file.csv(), "lambda,mult\n0.5,2\n2,1\n");
    }

    #[test]
    fn path_spec_parses_with_defaults() {
        let text = r#"{
            "space": "bc",
            "chart": {"K": [], "S": [[0,0],[0,0],[0,0],[0,0]]},
            "target": [0, 0, 1],
            "problem": {"d": 1, "N": 2,
                "Pinv": [[[1,0]],[[1,0]],[[1,0]]],
                "Q": [[[0,0]],[[0,0]]],
                "W": [[[1,0]],[[1,0]]]}
        }"#;
        let spec: PathSpecFile = serde_json::from_str(text).unwrap();
        assert!(spec.t_max.is_none());
        assert_eq!(spec.target_signature(), InertiaSignature::new(0, 0, 1));
        assert!(matches!(spec.space, SpaceTag::Bc));
        let eq = spec.problem.unwrap().equation(&tols()).unwrap();
        assert_eq!(eq.n(), 2);
    }
}
