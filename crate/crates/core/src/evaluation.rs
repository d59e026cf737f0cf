//! Rate–distortion bookkeeping: RD points and curves, Bjøntegaard-delta
//! bitrate, ingestion of external RD points and export for plotting.
//!
//! BD-rate uses the classic cubic fit of `log10(bpp)` against quality,
//! integrated over the overlap of the two quality ranges. MS-SSIM curves
//! are fitted in raw MS-SSIM units.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::{read_file, write_atomic};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Psnr,
    MsSsim,
}

impl Metric {
    /// Shortest quality overlap accepted by [`bd_rate`].
    pub fn min_overlap(self) -> f64 {
        match self {
            Metric::Psnr => 0.5,
            Metric::MsSsim => 0.005,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Psnr => "psnr",
            Metric::MsSsim => "ms_ssim",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RDPoint {
    pub bpp: f64,
    pub quality: f64,
    pub label: String,
    pub metric: Metric,
}

impl RDPoint {
    pub fn new(label: impl Into<String>, metric: Metric, bpp: f64, quality: f64) -> Result<Self> {
        let p = Self {
            bpp,
            quality,
            label: label.into(),
            metric,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bpp > 0.0 && self.bpp.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "`{}`: bpp must be positive and finite, got {}",
                self.label, self.bpp
            )));
        }
        let ok = match self.metric {
            Metric::Psnr => self.quality.is_finite(),
            Metric::MsSsim => self.quality > 0.0 && self.quality <= 1.0,
        };
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "`{}`: {} value {} out of range",
                self.label, self.metric, self.quality
            )));
        }
        Ok(())
    }
}

/// At least four points of one codec and metric, strictly increasing in
/// both bpp and quality.
#[derive(Clone, Debug, PartialEq)]
pub struct RDCurve {
    pub codec: String,
    pub metric: Metric,
    pub points: Vec<RDPoint>,
}

pub const MIN_CURVE_POINTS: usize = 4;

impl RDCurve {
    /// Sorts `points` by bpp and validates the result.
    pub fn new(codec: impl Into<String>, metric: Metric, mut points: Vec<RDPoint>) -> Result<Self> {
        let codec = codec.into();
        if points.len() < MIN_CURVE_POINTS {
            return Err(Error::TooFewPoints {
                codec,
                found: points.len(),
                required: MIN_CURVE_POINTS,
            });
        }
        for p in &points {
            p.validate()?;
            if p.metric != metric || p.label != codec {
                return Err(Error::InvalidArgument(format!(
                    "point `{}` ({}) does not belong to curve `{codec}` ({metric})",
                    p.label, p.metric
                )));
            }
        }
        points.sort_by(|a, b| a.bpp.total_cmp(&b.bpp));
        for w in points.windows(2) {
            let detail = if w[1].bpp <= w[0].bpp {
                format!("bpp {} repeats", w[1].bpp)
            } else if w[1].quality <= w[0].quality {
                format!(
                    "quality {} at bpp {} does not exceed {} at bpp {}",
                    w[1].quality, w[1].bpp, w[0].quality, w[0].bpp
                )
            } else {
                continue;
            };
            return Err(Error::NonMonotone {
                codec,
                metric: metric.to_string(),
                detail,
            });
        }
        Ok(Self { codec, metric, points })
    }

    /// Convenience constructor from `(bpp, quality)` pairs.
    pub fn from_pairs(codec: &str, metric: Metric, pairs: &[(f64, f64)]) -> Result<Self> {
        let pts = pairs
            .iter()
            .map(|&(b, q)| RDPoint::new(codec, metric, b, q))
            .collect::<Result<Vec<_>>>()?;
        Self::new(codec, metric, pts)
    }

    fn quality_range(&self) -> (f64, f64) {
        (self.points[0].quality, self.points[self.points.len() - 1].quality)
    }
}

/// Least-squares cubic `log10(bpp) ≈ p((q − center)/scale)`.
struct CubicFit {
    coef: [f64; 4],
    center: f64,
    scale: f64,
}

impl CubicFit {
    fn new(curve: &RDCurve) -> Result<Self> {
        let n = curve.points.len() as f64;
        let center = curve.points.iter().map(|p| p.quality).sum::<f64>() / n;
        let var = curve.points.iter().map(|p| (p.quality - center).powi(2)).sum::<f64>() / n;
        let scale = var.sqrt();
        if !(scale > 0.0) {
            return Err(Error::DegenerateFit(format!("`{}` has no quality spread", curve.codec)));
        }
        let mut a = [[0.0f64; 5]; 4];
        for p in &curve.points {
            let u = (p.quality - center) / scale;
            let y = p.bpp.log10();
            let pw = [1.0, u, u * u, u * u * u];
            for i in 0..4 {
                for j in 0..4 {
                    a[i][j] += pw[i] * pw[j];
                }
                a[i][4] += pw[i] * y;
            }
        }
        let coef = solve4(a).ok_or_else(|| {
            Error::DegenerateFit(format!("singular normal equations for `{}`", curve.codec))
        })?;
        Ok(Self { coef, center, scale })
    }

    /// `∫_lo^hi p((q − center)/scale) dq`.
    fn integral(&self, lo: f64, hi: f64) -> f64 {
        let anti = |q: f64| {
            let u = (q - self.center) / self.scale;
            let c = &self.coef;
            u * (c[0] + u * (c[1] / 2.0 + u * (c[2] / 3.0 + u * c[3] / 4.0)))
        };
        self.scale * (anti(hi) - anti(lo))
    }
}

/// Gaussian elimination with partial pivoting on an augmented 4×5 system.
fn solve4(mut a: [[f64; 5]; 4]) -> Option<[f64; 4]> {
    let norm = a.iter().flat_map(|r| r[..4].iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-12 * norm {
            return None;
        }
        a.swap(col, piv);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..5 {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    let mut x = [0.0; 4];
    for i in (0..4).rev() {
        let s: f64 = (i + 1..4).map(|k| a[i][k] * x[k]).sum();
        x[i] = (a[i][4] - s) / a[i][i];
    }
    Some(x)
}

/// Average bitrate difference of `test` relative to `reference` at equal
/// quality, in percent; negative means `test` needs fewer bits.
pub fn bd_rate(reference: &RDCurve, test: &RDCurve) -> Result<f64> {
    if reference.metric != test.metric {
        return Err(Error::InvalidArgument(format!(
            "cannot compare a {} curve with a {} curve",
            reference.metric, test.metric
        )));
    }
    let (r0, r1) = reference.quality_range();
    let (t0, t1) = test.quality_range();
    let (lo, hi) = (r0.max(t0), r1.min(t1));
    let required = reference.metric.min_overlap();
    if !(hi - lo >= required) {
        return Err(Error::DisjointRange {
            overlap: hi - lo,
            required,
        });
    }
    let fr = CubicFit::new(reference)?;
    let ft = CubicFit::new(test)?;
    let avg = (ft.integral(lo, hi) - fr.integral(lo, hi)) / (hi - lo);
    Ok((10f64.powf(avg) - 1.0) * 100.0)
}

/// Key used in `bd_rates.json`.
pub fn bd_key(test: &str, reference: &str, metric: Metric) -> String {
    format!("{test}_vs_{reference}_{metric}")
}

/// BD-rate results keyed by [`bd_key`].
pub type BdTable = BTreeMap<String, f64>;

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    codec: String,
    metric: Metric,
    bpp: f64,
    quality: f64,
}

fn parse_curves(bytes: &[u8]) -> Result<Vec<RDCurve>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let header = reader.headers()?.clone();
    let expected = ["codec", "metric", "bpp", "quality"];
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::MalformedRow {
            row: 1,
            detail: format!("header must be `codec,metric,bpp,quality`, got `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut groups: BTreeMap<(String, Metric), Vec<RDPoint>> = BTreeMap::new();
    for (i, rec) in reader.deserialize::<CsvRow>().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::MalformedRow {
            row,
            detail: e.to_string(),
        })?;
        let p = RDPoint::new(rec.codec.clone(), rec.metric, rec.bpp, rec.quality).map_err(|e| Error::MalformedRow {
            row,
            detail: e.to_string(),
        })?;
        groups.entry((rec.codec, rec.metric)).or_default().push(p);
    }
    groups
        .into_iter()
        .map(|((codec, metric), pts)| RDCurve::new(codec, metric, pts))
        .collect()
}

/// Curves from a CSV with header `codec,metric,bpp,quality`, grouped by
/// `(codec, metric)` and returned in that sort order.
pub fn ingest_external_rd(path: &Path) -> Result<Vec<RDCurve>> {
    parse_curves(&read_file(path)?)
}

fn curves_csv(curves: &[RDCurve]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for c in curves {
        for p in &c.points {
            w.serialize(CsvRow {
                codec: c.codec.clone(),
                metric: c.metric,
                bpp: p.bpp,
                quality: p.quality,
            })?;
        }
    }
    if curves.is_empty() {
        w.write_record(["codec", "metric", "bpp", "quality"])?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv buffer: {e}")))
}

pub struct ExportedFiles {
    pub rd_curves: PathBuf,
    pub bd_rates: PathBuf,
}

/// Write `rd_curves.csv` and `bd_rates.json` into `dir`.
pub fn export_results(curves: &[RDCurve], bd_table: &BdTable, dir: &Path) -> Result<ExportedFiles> {
    let rd_curves = dir.join("rd_curves.csv");
    let bd_rates = dir.join("bd_rates.json");
    write_atomic(&rd_curves, &curves_csv(curves)?)?;
    let mut json = serde_json::to_vec_pretty(bd_table)?;
    json.push(b'\n');
    write_atomic(&bd_rates, &json)?;
    Ok(ExportedFiles { rd_curves, bd_rates })
}
