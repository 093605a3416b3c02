//! File formats: potential JSON, curve CSV/JSON, spectral reports.
//!
//! Floats are written with 17 significant digits so that every value reads back bit-identically.

use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;
use serde_json::Value;

use crate::closing::ClosureReport;
use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::reconstruct::CurveSamples;
use crate::spectral::{OrderReport, SpectralSample};

/// JSON formatter printing every `f64` as `d.dddddddddddddddde±x`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExactFloats;

impl Formatter for ExactFloats {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes with [`ExactFloats`].
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, ExactFloats);
    value.serialize(&mut ser).map_err(|e| Error::InvalidInput(format!("serialization: {e}")))?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("JSON output is UTF-8"))
}

/// On-disk form of a potential.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialFile {
    #[serde(rename = "T")]
    pub period: f64,
    #[serde(default)]
    pub theta: f64,
    /// `[k, Re q̂_k, Im q̂_k]`.
    pub modes: Vec<(i64, f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Value>,
}

impl PotentialFile {
    pub fn from_potential(q: &Potential) -> Self {
        PotentialFile {
            period: q.period(),
            theta: q.theta(),
            modes: q.modes().map(|(k, c)| (k, c.re, c.im)).collect(),
            warning: None,
            provenance: None,
        }
    }

    pub fn potential(&self) -> Result<Potential> {
        let kmax = self.modes.iter().map(|m| m.0.unsigned_abs() as usize).max().unwrap_or(0);
        let mut q = Potential::zero(self.period, self.theta, kmax);
        let mut seen = std::collections::HashSet::new();
        for &(k, re, im) in &self.modes {
            if !seen.insert(k) {
                return Err(Error::InvalidInput(format!("mode {k} listed twice")));
            }
            if !re.is_finite() || !im.is_finite() {
                return Err(Error::InvalidInput(format!("mode {k} is not finite")));
            }
            q.set_mode(k, crate::sl2::C64::new(re, im));
        }
        if !(self.period > 0.0) || !self.period.is_finite() || !self.theta.is_finite() {
            return Err(Error::InvalidInput(format!("bad period {} or theta {}", self.period, self.theta)));
        }
        Ok(q)
    }
}

pub fn read_potential(text: &str) -> Result<PotentialFile> {
    serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("potential file: {e}")))
}

pub fn write_potential(file: &PotentialFile) -> Result<String> {
    to_json(file)
}

/// Coordinates used for curve export.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chart {
    Hyperboloid,
    Ball,
}

/// CSV with header `t,x0,x1,x2,x3,b1,b2,b3`; `chart` selects which block is written.
pub fn curve_csv(curve: &CurveSamples, chart: Option<Chart>) -> String {
    let (hyp, ball) = match chart {
        None => (true, true),
        Some(Chart::Hyperboloid) => (true, false),
        Some(Chart::Ball) => (false, true),
    };
    let mut header = vec!["t"];
    if hyp {
        header.extend(["x0", "x1", "x2", "x3"]);
    }
    if ball {
        header.extend(["b1", "b2", "b3"]);
    }
    let mut out = header.join(",");
    out.push('\n');
    for (t, p) in curve.times().iter().zip(curve.points()) {
        let mut row = vec![format!("{t:.16e}")];
        if hyp {
            row.extend(p.hyperboloid().iter().map(|x| format!("{x:.16e}")));
        }
        if ball {
            row.extend(p.ball().iter().map(|x| format!("{x:.16e}")));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct CurveJson<'a> {
    t: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    hyperboloid: Option<Vec<[f64; 4]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ball: Option<Vec<[f64; 3]>>,
    endpoint_gap: f64,
}

pub fn curve_json(curve: &CurveSamples, chart: Option<Chart>) -> Result<String> {
    let hyp = chart != Some(Chart::Ball);
    let ball = chart != Some(Chart::Hyperboloid);
    to_json(&CurveJson {
        t: curve.times(),
        hyperboloid: hyp.then(|| curve.points().iter().map(|p| p.hyperboloid()).collect()),
        ball: ball.then(|| curve.points().iter().map(|p| p.ball()).collect()),
        endpoint_gap: curve.endpoint_gap(),
    })
}

/// Spectral analysis of one potential.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralReport {
    pub k: Vec<i64>,
    pub lambda_k: Vec<crate::sl2::C64>,
    pub z_k: Vec<crate::sl2::C64>,
    pub order_reports: Vec<OrderReport>,
    pub closure: Option<ClosureReport>,
}

impl SpectralReport {
    pub fn new(samples: &[SpectralSample], order_reports: Vec<OrderReport>, closure: Option<ClosureReport>) -> Self {
        SpectralReport {
            k: samples.iter().map(|s| s.k).collect(),
            lambda_k: samples.iter().map(|s| s.lambda_k).collect(),
            z_k: samples.iter().map(|s| s.z_k).collect(),
            order_reports,
            closure,
        }
    }
}
