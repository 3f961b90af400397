//! File formats: sample data ingestion, model serialization, and plot-ready
//! curve tables.
//!
//! The model file is structured text with one `key: value` pair per line.
//! Floating-point values are rendered in the shortest decimal form that
//! round-trips exactly, so `parse(serialize(m)) == m` bitwise.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gof;
use crate::ocp::{OcpErlangSpec, OneCutPointRep};
use crate::ph::{ErlangSpec, Measures, PhaseTypeRep};

/// Current model-file format version.
pub const FORMAT_VERSION: u32 = 1;

const HEADER: &str = "ocpph-model";

/// The four serializable model kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    PhErlang(ErlangSpec),
    OcpErlang(OcpErlangSpec),
    PhGeneral {
        alpha: Vec<f64>,
        t: Array2<f64>,
    },
    OcpGeneral {
        cut_point: f64,
        alpha: Vec<f64>,
        t1: Array2<f64>,
        t2: Array2<f64>,
    },
}

impl ModelKind {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ModelKind::PhErlang(_) => "ph-erlang",
            ModelKind::OcpErlang(_) => "ocp-erlang",
            ModelKind::PhGeneral { .. } => "ph-general",
            ModelKind::OcpGeneral { .. } => "ocp-general",
        }
    }
}

/// A versioned, serializable model description.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub format_version: u32,
    pub model: ModelKind,
}

impl ModelFile {
    pub fn new(model: ModelKind) -> Self {
        Self { format_version: FORMAT_VERSION, model }
    }

    /// Render as structured text with exact decimal round-trip.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{HEADER}");
        let _ = writeln!(out, "format_version: {}", self.format_version);
        let _ = writeln!(out, "kind: {}", self.model.kind_name());
        match &self.model {
            ModelKind::PhErlang(spec) => {
                let _ = writeln!(out, "phases: {}", spec.phases());
                let _ = writeln!(out, "rate: {}", spec.rate());
            }
            ModelKind::OcpErlang(spec) => {
                let _ = writeln!(out, "cut_point: {}", spec.cut_point());
                let _ = writeln!(out, "phases: {}", spec.phases());
                let _ = writeln!(out, "rate1: {}", spec.rate1());
                let _ = writeln!(out, "rate2: {}", spec.rate2());
            }
            ModelKind::PhGeneral { alpha, t } => {
                let _ = writeln!(out, "order: {}", alpha.len());
                let _ = writeln!(out, "alpha: {}", join_floats(alpha));
                for row in t.rows() {
                    let _ = writeln!(out, "t_row: {}", join_floats(row.as_slice().unwrap()));
                }
            }
            ModelKind::OcpGeneral { cut_point, alpha, t1, t2 } => {
                let _ = writeln!(out, "cut_point: {cut_point}");
                let _ = writeln!(out, "order: {}", alpha.len());
                let _ = writeln!(out, "alpha: {}", join_floats(alpha));
                for row in t1.rows() {
                    let _ = writeln!(out, "t1_row: {}", join_floats(row.as_slice().unwrap()));
                }
                for row in t2.rows() {
                    let _ = writeln!(out, "t2_row: {}", join_floats(row.as_slice().unwrap()));
                }
            }
        }
        out
    }

    /// Parse the structured-text form. Errors carry the offending line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut fields = ParsedFields::default();
        let mut saw_header = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !saw_header {
                if line != HEADER {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("expected `{HEADER}` header, found `{line}`"),
                    });
                }
                saw_header = true;
                continue;
            }
            let Some((key, value)) = line.split_once(':') else {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected `key: value`, found `{line}`"),
                });
            };
            fields.set(key.trim(), value.trim(), line_no)?;
        }
        if !saw_header {
            return Err(Error::Parse { line: 1, message: "empty model file".into() });
        }
        fields.build()
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.serialize())?;
        Ok(())
    }

    /// Validate and instantiate the represented distribution.
    pub fn instantiate(&self) -> Result<Model> {
        match &self.model {
            ModelKind::PhErlang(spec) => Ok(Model::Ph(spec.rep())),
            ModelKind::OcpErlang(spec) => Ok(Model::Ocp(spec.rep())),
            ModelKind::PhGeneral { alpha, t } => {
                Ok(Model::Ph(PhaseTypeRep::new(alpha.clone(), t.clone())?))
            }
            ModelKind::OcpGeneral { cut_point, alpha, t1, t2 } => Ok(Model::Ocp(
                OneCutPointRep::new(*cut_point, alpha.clone(), t1.clone(), t2.clone())?,
            )),
        }
    }
}

fn join_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Default)]
struct ParsedFields {
    format_version: Option<u32>,
    kind: Option<String>,
    cut_point: Option<f64>,
    phases: Option<usize>,
    rate: Option<f64>,
    rate1: Option<f64>,
    rate2: Option<f64>,
    order: Option<usize>,
    alpha: Option<Vec<f64>>,
    t_rows: Vec<Vec<f64>>,
    t1_rows: Vec<Vec<f64>>,
    t2_rows: Vec<Vec<f64>>,
}

impl ParsedFields {
    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let parse_f64 = |v: &str| -> Result<f64> {
            v.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("`{v}` is not a number"),
            })
        };
        let parse_floats = |v: &str| -> Result<Vec<f64>> {
            v.split_whitespace().map(parse_f64).collect()
        };
        match key {
            "format_version" => {
                self.format_version = Some(value.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("`{value}` is not a version integer"),
                })?)
            }
            "kind" => self.kind = Some(value.to_string()),
            "cut_point" => self.cut_point = Some(parse_f64(value)?),
            "phases" => {
                self.phases = Some(value.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("`{value}` is not a phase count"),
                })?)
            }
            "rate" => self.rate = Some(parse_f64(value)?),
            "rate1" => self.rate1 = Some(parse_f64(value)?),
            "rate2" => self.rate2 = Some(parse_f64(value)?),
            "order" => {
                self.order = Some(value.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("`{value}` is not an order"),
                })?)
            }
            "alpha" => self.alpha = Some(parse_floats(value)?),
            "t_row" => self.t_rows.push(parse_floats(value)?),
            "t1_row" => self.t1_rows.push(parse_floats(value)?),
            "t2_row" => self.t2_rows.push(parse_floats(value)?),
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown field `{other}`"),
                })
            }
        }
        Ok(())
    }

    fn build(self) -> Result<ModelFile> {
        let version = self
            .format_version
            .ok_or_else(|| Error::InvalidInput("model file lacks format_version".into()))?;
        if version != FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported format_version {version}; this build reads version {FORMAT_VERSION}"
            )));
        }
        let kind = self
            .kind
            .ok_or_else(|| Error::InvalidInput("model file lacks kind".into()))?;
        let missing = |f: &str| Error::InvalidInput(format!("kind {kind} requires field `{f}`"));
        let model = match kind.as_str() {
            "ph-erlang" => ModelKind::PhErlang(ErlangSpec::new(
                self.phases.ok_or_else(|| missing("phases"))?,
                self.rate.ok_or_else(|| missing("rate"))?,
            )?),
            "ocp-erlang" => ModelKind::OcpErlang(OcpErlangSpec::new(
                self.cut_point.ok_or_else(|| missing("cut_point"))?,
                self.phases.ok_or_else(|| missing("phases"))?,
                self.rate1.ok_or_else(|| missing("rate1"))?,
                self.rate2.ok_or_else(|| missing("rate2"))?,
            )?),
            "ph-general" => {
                let order = self.order.ok_or_else(|| missing("order"))?;
                let alpha = self.alpha.ok_or_else(|| missing("alpha"))?;
                let t = rows_to_matrix(&self.t_rows, order, "t_row")?;
                ModelKind::PhGeneral { alpha, t }
            }
            "ocp-general" => {
                let order = self.order.ok_or_else(|| missing("order"))?;
                let alpha = self.alpha.ok_or_else(|| missing("alpha"))?;
                let t1 = rows_to_matrix(&self.t1_rows, order, "t1_row")?;
                let t2 = rows_to_matrix(&self.t2_rows, order, "t2_row")?;
                ModelKind::OcpGeneral {
                    cut_point: self.cut_point.ok_or_else(|| missing("cut_point"))?,
                    alpha,
                    t1,
                    t2,
                }
            }
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown model kind `{other}`; expected ph-erlang, ocp-erlang, ph-general, or ocp-general"
                )))
            }
        };
        Ok(ModelFile { format_version: version, model })
    }
}

fn rows_to_matrix(rows: &[Vec<f64>], order: usize, what: &str) -> Result<Array2<f64>> {
    if rows.len() != order {
        return Err(Error::InvalidInput(format!(
            "expected {order} `{what}` lines, found {}",
            rows.len()
        )));
    }
    let mut t = Array2::<f64>::zeros((order, order));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != order {
            return Err(Error::InvalidInput(format!(
                "`{what}` line {} has {} entries, expected {order}",
                i + 1,
                row.len()
            )));
        }
        for (j, &v) in row.iter().enumerate() {
            t[[i, j]] = v;
        }
    }
    Ok(t)
}

/// An instantiated (validated) distribution behind either representation.
#[derive(Debug, Clone)]
pub enum Model {
    Ph(PhaseTypeRep),
    Ocp(OneCutPointRep),
}

impl Model {
    pub fn measures_at(&self, x: f64) -> Result<Measures> {
        match self {
            Model::Ph(rep) => rep.measures_at(x),
            Model::Ocp(rep) => rep.measures_at(x),
        }
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        match self {
            Model::Ph(rep) => rep.pdf(x),
            Model::Ocp(rep) => rep.pdf(x),
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        match self {
            Model::Ph(rep) => rep.cdf(x),
            Model::Ocp(rep) => rep.cdf(x),
        }
    }

    pub fn reliability(&self, x: f64) -> Result<f64> {
        match self {
            Model::Ph(rep) => rep.reliability(x),
            Model::Ocp(rep) => rep.reliability(x),
        }
    }

    pub fn mean(&self) -> Result<f64> {
        match self {
            Model::Ph(rep) => rep.mean(),
            Model::Ocp(rep) => rep.mean(),
        }
    }

    pub fn second_moment(&self) -> Result<f64> {
        match self {
            Model::Ph(rep) => rep.moment(2),
            Model::Ocp(rep) => rep.second_moment(),
        }
    }

    pub fn sd(&self) -> Result<f64> {
        match self {
            Model::Ph(rep) => rep.sd(),
            Model::Ocp(rep) => rep.sd(),
        }
    }

    pub fn char_fn(&self, t: f64) -> Result<Complex64> {
        match self {
            Model::Ph(rep) => rep.char_fn(t),
            Model::Ocp(rep) => rep.char_fn(t),
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        match self {
            Model::Ph(rep) => rep.quantile(p),
            Model::Ocp(rep) => rep.quantile(p),
        }
    }

    pub fn sample(&self, count: usize, seed: u64) -> Dataset {
        match self {
            Model::Ph(rep) => rep.sample(count, seed),
            Model::Ocp(rep) => rep.sample(count, seed),
        }
    }
}

/// Read one observation per line; blank lines and `#` comments are ignored,
/// values must be nonnegative. Parse failures carry the line number.
pub fn read_samples(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_samples(&text)
}

/// The text-level half of [`read_samples`], split out for direct testing.
pub fn parse_samples(text: &str) -> Result<Dataset> {
    let mut values = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("`{line}` is not a decimal value"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("`{line}` is not finite"),
            });
        }
        if v < 0.0 {
            return Err(Error::Domain(format!(
                "negative observation {v} at line {line_no}"
            )));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::InvalidInput("file contains no observations".into()));
    }
    Dataset::new(values)
}

/// One row of a curves table.
#[derive(Debug, Clone, Copy)]
pub struct CurveRow {
    pub x: f64,
    pub measures: Measures,
    pub empirical: Option<EmpiricalColumns>,
}

/// Empirical overlay columns, present when a dataset accompanies the model.
#[derive(Debug, Clone, Copy)]
pub struct EmpiricalColumns {
    pub ecdf: f64,
    pub emp_cum_hazard: f64,
    pub kde: f64,
    pub kernel_hazard: f64,
}

/// Plot-ready table of model measures over a strictly increasing grid.
#[derive(Debug, Clone)]
pub struct CurvesTable {
    pub rows: Vec<CurveRow>,
}

impl CurvesTable {
    /// Evaluate all measures on `points` equally spaced x values in
    /// `[xmin, xmax]`, adding empirical columns when `data` is given.
    pub fn evaluate(
        model: &Model,
        xmin: f64,
        xmax: f64,
        points: usize,
        data: Option<&Dataset>,
    ) -> Result<Self> {
        if !(xmin >= 0.0 && xmin.is_finite()) {
            return Err(Error::Domain(format!("xmin must be >= 0, got {xmin}")));
        }
        if !(xmax > xmin) {
            return Err(Error::InvalidInput(format!(
                "xmin ({xmin}) must be strictly below xmax ({xmax})"
            )));
        }
        if points < 2 {
            return Err(Error::InvalidInput("need at least 2 grid points".into()));
        }
        let step = (xmax - xmin) / (points - 1) as f64;
        let mut rows = Vec::with_capacity(points);
        for i in 0..points {
            let x = if i + 1 == points { xmax } else { xmin + step * i as f64 };
            let measures = model.measures_at(x)?;
            let empirical = match data {
                Some(d) => Some(EmpiricalColumns {
                    ecdf: gof::ecdf(d, x),
                    emp_cum_hazard: gof::empirical_cum_hazard(d, x),
                    kde: gof::kde_density(d, x, None)?,
                    kernel_hazard: gof::kernel_hazard(d, x, None)?,
                }),
                None => None,
            };
            rows.push(CurveRow { x, measures, empirical });
        }
        Ok(Self { rows })
    }

    /// Comma-separated rendering with the documented header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let has_empirical = self.rows.first().is_some_and(|r| r.empirical.is_some());
        out.push_str("x,pdf,cdf,reliability,hazard,cum_hazard");
        if has_empirical {
            out.push_str(",ecdf,emp_cum_hazard,kde,kernel_hazard");
        }
        out.push('\n');
        for row in &self.rows {
            let m = &row.measures;
            let _ = write!(
                out,
                "{},{},{},{},{},{}",
                row.x, m.pdf, m.cdf, m.reliability, m.hazard, m.cum_hazard
            );
            if let Some(e) = &row.empirical {
                let _ = write!(out, ",{},{},{},{}", e.ecdf, e.emp_cum_hazard, e.kde, e.kernel_hazard);
            }
            out.push('\n');
        }
        out
    }
}
