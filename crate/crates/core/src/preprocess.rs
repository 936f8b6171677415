//! Time-series conditioning: smoothing, time derivatives, peak sets and
//! column normalization.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;
use crate::Matrix;

/// Named columns sampled at strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    t: Vec<f64>,
    columns: Vec<(String, Vec<f64>)>,
}

impl TimeSeries {
    pub fn new(t: Vec<f64>, columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if let Some(k) = t.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "time", index: k });
        }
        for k in 1..t.len() {
            if t[k] <= t[k - 1] {
                return Err(Error::NonMonotoneTime(k));
            }
        }
        for (_, col) in &columns {
            if col.len() != t.len() {
                return Err(Error::DimensionMismatch {
                    expected: t.len(),
                    found: col.len(),
                    context: "time-series column length",
                });
            }
            if let Some(k) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    context: "time-series column",
                    index: k,
                });
            }
        }
        Ok(TimeSeries { t, columns })
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn columns(&self) -> &[(String, Vec<f64>)] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::UnknownName(name.into()))
    }

    /// Multiplies a column by a physical scale factor.
    pub fn scale_column(&mut self, name: &str, factor: f64) -> Result<()> {
        let col = self
            .columns
            .iter_mut()
            .find(|(k, _)| k == name)
            .ok_or_else(|| Error::UnknownName(name.into()))?;
        for v in &mut col.1 {
            *v *= factor;
        }
        Ok(())
    }

    /// Rows `range` of every column.
    pub fn slice(&self, start: usize, end: usize) -> TimeSeries {
        TimeSeries {
            t: self.t[start..end].to_vec(),
            columns: self
                .columns
                .iter()
                .map(|(k, v)| (k.clone(), v[start..end].to_vec()))
                .collect(),
        }
    }
}

fn smooth_once(values: &[f64], kernel: &[f64]) -> Vec<f64> {
    let n = values.len();
    let half = kernel.len() / 2;
    let mut num = Vec::with_capacity(kernel.len());
    let mut den = Vec::with_capacity(kernel.len());
    (0..n)
        .map(|k| {
            num.clear();
            den.clear();
            for (m, w) in kernel.iter().enumerate() {
                let idx = k as isize + m as isize - half as isize;
                if idx >= 0 && (idx as usize) < n {
                    num.push(w * values[idx as usize]);
                    den.push(*w);
                }
            }
            pairwise_sum(&num) / pairwise_sum(&den)
        })
        .collect()
}

/// Smooths every column with a truncated Gaussian kernel.
///
/// `sigma` is measured in samples. Near the ends the kernel is renormalized
/// over the samples that exist.
pub fn gaussian_filter(series: &TimeSeries, window: usize, sigma: f64, passes: usize) -> Result<TimeSeries> {
    if window.is_multiple_of(2) {
        return Err(Error::param("window", "must be odd"));
    }
    if window > series.len() {
        return Err(Error::param("window", "longer than the series"));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::param("sigma", "must be finite and positive"));
    }
    let half = (window / 2) as f64;
    let kernel: Vec<f64> = (0..window)
        .map(|m| {
            let d = m as f64 - half;
            libm::exp(-0.5 * d * d / (sigma * sigma))
        })
        .collect();
    let mut out = series.clone();
    for _ in 0..passes {
        for (_, col) in &mut out.columns {
            *col = smooth_once(col, &kernel);
        }
    }
    Ok(out)
}

/// Backward differences of `column`, named `d{column}_dt`.
///
/// The first sample is dropped: the result keeps `t[1..]` and every original
/// column on those rows, with the derivative column appended.
pub fn backward_euler_derivative(series: &TimeSeries, column: &str) -> Result<TimeSeries> {
    if series.len() < 2 {
        return Err(Error::TooFew {
            what: "samples",
            required: 2,
            found: series.len(),
        });
    }
    let v = series.column(column)?;
    let t = series.t();
    let d: Vec<f64> = (1..t.len()).map(|k| (v[k] - v[k - 1]) / (t[k] - t[k - 1])).collect();
    let mut out = series.slice(1, series.len());
    out.columns.push((format!("d{column}_dt"), d));
    Ok(out)
}

/// Strict interior extrema of `values`, as indices into it.
fn extrema(values: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let (mut maxima, mut minima) = (Vec::new(), Vec::new());
    for k in 1..values.len().saturating_sub(1) {
        let (a, b, c) = (values[k - 1], values[k], values[k + 1]);
        if a < b && b > c {
            maxima.push(k);
        } else if a > b && b < c {
            minima.push(k);
        }
    }
    (maxima, minima)
}

/// Indices of strict local maxima and minima, endpoints excluded.
///
/// Each pass after the first keeps the maxima of the previous maxima and the
/// minima of the previous minima (upper and lower envelopes), mapped back to
/// original indices. An envelope with fewer than three points yields nothing.
pub fn find_peaks(values: &[f64], passes: usize) -> Result<Vec<usize>> {
    if values.len() < 3 {
        return Err(Error::TooFew {
            what: "samples for peak finding",
            required: 3,
            found: values.len(),
        });
    }
    if passes == 0 {
        return Err(Error::param("passes", "at least one pass is required"));
    }
    let (mut maxima, mut minima) = extrema(values);
    for _ in 1..passes {
        let sub: Vec<f64> = maxima.iter().map(|&k| values[k]).collect();
        maxima = extrema(&sub).0.into_iter().map(|k| maxima[k]).collect();
        let sub: Vec<f64> = minima.iter().map(|&k| values[k]).collect();
        minima = extrema(&sub).1.into_iter().map(|k| minima[k]).collect();
    }
    let mut all = maxima;
    all.extend(minima);
    all.sort_unstable();
    Ok(all)
}

/// Column scale convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NormKind {
    /// Unit Euclidean norm over the samples.
    #[default]
    L2,
    /// Unit maximum absolute value.
    MaxAbs,
}

/// Diagonal scales with `X~ = X N_X` and `y~ = y N_y`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormalizationPair {
    pub nx: Vec<f64>,
    pub ny: Vec<f64>,
}

fn scale_columns(m: &Matrix, s: &[f64]) -> Matrix {
    let mut out = m.clone();
    for (c, f) in s.iter().enumerate() {
        out.column_mut(c).scale_mut(*f);
    }
    out
}

impl NormalizationPair {
    pub fn identity(p: usize, d: usize) -> Self {
        NormalizationPair {
            nx: alloc::vec![1.0; p],
            ny: alloc::vec![1.0; d],
        }
    }

    pub fn apply_x(&self, x: &Matrix) -> Matrix {
        scale_columns(x, &self.nx)
    }

    pub fn unapply_x(&self, x: &Matrix) -> Matrix {
        let inv: Vec<f64> = self.nx.iter().map(|v| 1.0 / v).collect();
        scale_columns(x, &inv)
    }

    pub fn apply_y(&self, y: &Matrix) -> Matrix {
        scale_columns(y, &self.ny)
    }

    pub fn unapply_y(&self, y: &Matrix) -> Matrix {
        let inv: Vec<f64> = self.ny.iter().map(|v| 1.0 / v).collect();
        scale_columns(y, &inv)
    }

    /// `gamma~ = N_X^-1 gamma N_y`.
    pub fn normalize_coeffs(&self, gamma: &Matrix) -> Matrix {
        let mut out = gamma.clone();
        for r in 0..out.nrows() {
            for c in 0..out.ncols() {
                out[(r, c)] = out[(r, c)] / self.nx[r] * self.ny[c];
            }
        }
        out
    }

    /// `gamma = N_X gamma~ N_y^-1`.
    pub fn denormalize_coeffs(&self, gamma: &Matrix) -> Matrix {
        let mut out = gamma.clone();
        for r in 0..out.nrows() {
            for c in 0..out.ncols() {
                out[(r, c)] = out[(r, c)] * self.nx[r] / self.ny[c];
            }
        }
        out
    }
}

fn column_scales(m: &Matrix, kind: NormKind, label: &dyn Fn(usize) -> String) -> Result<Vec<f64>> {
    (0..m.ncols())
        .map(|c| {
            let col: Vec<f64> = m.column(c).iter().copied().collect();
            let size = match kind {
                NormKind::L2 => {
                    let sq: Vec<f64> = col.iter().map(|v| v * v).collect();
                    libm::sqrt(pairwise_sum(&sq))
                }
                NormKind::MaxAbs => col.iter().fold(0.0f64, |a, v| a.max(v.abs())),
            };
            if size == 0.0 || !size.is_finite() {
                Err(Error::ZeroColumn(label(c)))
            } else {
                Ok(1.0 / size)
            }
        })
        .collect()
}

/// Scales every column of `x` and `y` to unit size.
///
/// `labels` names the columns of `x` in zero-column errors.
pub fn scale_and_normalize(
    x: &Matrix,
    y: &Matrix,
    kind: NormKind,
    labels: &[String],
) -> Result<(Matrix, Matrix, NormalizationPair)> {
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: y.nrows(),
            context: "target rows",
        });
    }
    let nx = column_scales(x, kind, &|c| labels.get(c).cloned().unwrap_or_else(|| format!("column {c}")))?;
    let ny = column_scales(y, kind, &|c| format!("target {c}"))?;
    let pair = NormalizationPair { nx, ny };
    Ok((pair.apply_x(x), pair.apply_y(y), pair))
}
