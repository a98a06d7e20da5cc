//! Least squares, linear prediction and evaluation metrics.

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, DELAY_THRESHOLD_MINUTES};

/// Normal matrices with a larger 1-norm condition estimate are treated as
/// singular.
pub const MAX_CONDITION: f64 = 1e12;

pub const INTERCEPT_NAME: &str = "(intercept)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub intercept: Option<f64>,
    pub feature_names: Vec<String>,
}

impl LinearModel {
    pub fn new(
        coefficients: Vec<f64>,
        intercept: Option<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let model = LinearModel {
            coefficients,
            intercept,
            feature_names,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.coefficients.len() != self.feature_names.len() {
            return Err(Error::InvalidModel(format!(
                "{} coefficients for {} feature names",
                self.coefficients.len(),
                self.feature_names.len()
            )));
        }
        if self
            .coefficients
            .iter()
            .chain(self.intercept.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidModel("non-finite linear coefficient".into()));
        }
        Ok(())
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        predict_linear(self, x)
    }
}

/// `intercept + sum(beta_i * x_i)`.
pub fn predict_linear(model: &LinearModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.coefficients.len() {
        return Err(Error::arg(format!(
            "expected {} features, got {}",
            model.coefficients.len(),
            x.len()
        )));
    }
    let dot: f64 = model.coefficients.iter().zip(x).map(|(b, v)| b * v).sum();
    Ok(model.intercept.unwrap_or(0.0) + dot)
}

/// Gaussian elimination with complete pivoting: `P A Q = L U`.
#[derive(Debug, Clone)]
struct FullPivotLu {
    lu: Vec<Vec<f64>>,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

impl FullPivotLu {
    fn factor(mut a: Vec<Vec<f64>>) -> Self {
        let n = a.len();
        let mut rows: Vec<usize> = (0..n).collect();
        let mut cols: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (mut pr, mut pc, mut best) = (k, k, -1.0);
            for (i, row) in a.iter().enumerate().skip(k) {
                for (j, v) in row.iter().enumerate().skip(k) {
                    if v.abs() > best {
                        best = v.abs();
                        pr = i;
                        pc = j;
                    }
                }
            }
            a.swap(k, pr);
            rows.swap(k, pr);
            if pc != k {
                for row in a.iter_mut() {
                    row.swap(k, pc);
                }
                cols.swap(k, pc);
            }
            let pivot = a[k][k];
            if pivot == 0.0 {
                continue;
            }
            let (upper, lower) = a.split_at_mut(k + 1);
            let pivot_row = &upper[k];
            for row in lower.iter_mut() {
                let factor = row[k] / pivot;
                row[k] = factor;
                for j in k + 1..n {
                    row[j] -= factor * pivot_row[j];
                }
            }
        }
        FullPivotLu { lu: a, rows, cols }
    }

    fn pivots(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.cols
            .iter()
            .enumerate()
            .map(|(k, &c)| (c, self.lu[k][k]))
    }

    fn is_singular(&self) -> bool {
        self.pivots().any(|(_, p)| p == 0.0)
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut w: Vec<f64> = self.rows.iter().map(|&r| b[r]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[i][j] * w[j]).sum();
            w[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[i][j] * w[j]).sum();
            w[i] = (w[i] - s) / self.lu[i][i];
        }
        let mut x = vec![0.0; n];
        for (k, &c) in self.cols.iter().enumerate() {
            x[c] = w[k];
        }
        x
    }

    /// `||A||_1 * ||A^-1||_1` with the inverse formed column by column.
    fn condition(&self, a: &[Vec<f64>]) -> f64 {
        let n = a.len();
        let norm = |m: &dyn Fn(usize, usize) -> f64| {
            (0..n)
                .map(|j| (0..n).map(|i| m(i, j).abs()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        let a_norm = norm(&|i, j| a[i][j]);
        let inverse: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                self.solve(&e)
            })
            .collect();
        let inv_norm = norm(&|i, j| inverse[j][i]);
        a_norm * inv_norm
    }
}

/// Least-squares fit of `y` on the columns of `x`, optionally with an
/// intercept, through the normal equations.
///
/// Columns are scaled to unit length before the normal matrix is formed and
/// the solution gets one step of iterative refinement against the original
/// residual. `feature_names` may be empty, in which case `x1..xk` are used.
pub fn fit_ols(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    with_intercept: bool,
    feature_names: &[&str],
) -> Result<LinearModel> {
    let (n, k) = x.dim();
    if y.len() != n {
        return Err(Error::arg(format!(
            "{n} design rows but {} targets",
            y.len()
        )));
    }
    let names: Vec<String> = if feature_names.is_empty() {
        (1..=k).map(|i| format!("x{i}")).collect()
    } else if feature_names.len() == k {
        feature_names.iter().map(|s| s.to_string()).collect()
    } else {
        return Err(Error::arg(format!(
            "{k} columns but {} names",
            feature_names.len()
        )));
    };
    let p = k + usize::from(with_intercept);
    if p == 0 {
        return Err(Error::arg("nothing to fit: no columns and no intercept"));
    }
    if n < p {
        return Err(Error::InsufficientData {
            what: "rows",
            needed: p,
            got: n,
        });
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::arg("design or target contains non-finite values"));
    }

    // Design column j: the intercept (if any) comes last.
    let col = |i: usize, j: usize| if j < k { x[[i, j]] } else { 1.0 };
    let column_name = |j: usize| {
        if j < k {
            names[j].clone()
        } else {
            INTERCEPT_NAME.to_string()
        }
    };

    let scale: Vec<f64> = (0..p)
        .map(|j| (0..n).map(|i| col(i, j) * col(i, j)).sum::<f64>().sqrt())
        .collect();
    if let Some(j) = scale.iter().position(|&s| s == 0.0) {
        return Err(Error::SingularDesign {
            condition: f64::INFINITY,
            columns: vec![column_name(j)],
        });
    }

    let mut gram = vec![vec![0.0; p]; p];
    for i in 0..n {
        for a in 0..p {
            let va = col(i, a) / scale[a];
            for b in a..p {
                gram[a][b] += va * col(i, b) / scale[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[a][b] = gram[b][a];
        }
    }
    let scaled_xt = |r: &dyn Fn(usize) -> f64| -> Vec<f64> {
        (0..p)
            .map(|j| (0..n).map(|i| col(i, j) * r(i)).sum::<f64>() / scale[j])
            .collect()
    };

    let lu = FullPivotLu::factor(gram.clone());
    let condition = if lu.is_singular() {
        f64::INFINITY
    } else {
        lu.condition(&gram)
    };
    if condition.is_nan() || condition > MAX_CONDITION {
        let largest = lu.pivots().map(|(_, v)| v.abs()).fold(0.0, f64::max);
        let mut offending: Vec<String> = lu
            .pivots()
            .filter(|(_, v)| v.abs() <= largest / MAX_CONDITION)
            .map(|(c, _)| column_name(c))
            .collect();
        if offending.is_empty() {
            let (c, _) = lu
                .pivots()
                .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .expect("at least one column");
            offending.push(column_name(c));
        }
        return Err(Error::SingularDesign {
            condition,
            columns: offending,
        });
    }

    let rhs = scaled_xt(&|i| y[i]);
    let mut z = lu.solve(&rhs);
    let fitted = |z: &[f64], i: usize| (0..p).map(|j| col(i, j) / scale[j] * z[j]).sum::<f64>();
    let correction = lu.solve(&scaled_xt(&|i| y[i] - fitted(&z, i)));
    for (zj, d) in z.iter_mut().zip(correction) {
        *zj += d;
    }

    let beta: Vec<f64> = z.iter().zip(&scale).map(|(zj, s)| zj / s).collect();
    let intercept = with_intercept.then(|| beta[k]);
    LinearModel::new(beta[..k].to_vec(), intercept, names)
}

fn check_lengths(y: &[f64], y_hat: &[f64]) -> Result<()> {
    if y.len() != y_hat.len() {
        return Err(Error::arg(format!(
            "{} observations but {} predictions",
            y.len(),
            y_hat.len()
        )));
    }
    if y.len() < 2 {
        return Err(Error::InsufficientData {
            what: "observations",
            needed: 2,
            got: y.len(),
        });
    }
    Ok(())
}

/// Explained-variance R-squared, `sum (y_hat - y_mean)^2 / sum (y - y_mean)^2`.
///
/// This equals `1 - SSE/SST` only for least-squares fits with an intercept
/// scored on their own training data; other predictors can exceed 1.
pub fn r_squared(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_lengths(y, y_hat)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let total: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if total == 0.0 {
        return Err(Error::UndefinedVariance);
    }
    let explained: f64 = y_hat.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok(explained / total)
}

/// `1 - (1 - r2)(n - 1)/(n - k - 1)` for `n` observations and `k` predictors.
pub fn adjusted_r_squared(r2: f64, n: usize, k: usize) -> Result<f64> {
    if n <= k + 1 {
        return Err(Error::DegreesOfFreedom { n, k });
    }
    Ok(1.0 - (1.0 - r2) * (n - 1) as f64 / (n - k - 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub r_squared: f64,
    pub adjusted_r_squared: f64,
    pub mse: f64,
    pub mae: f64,
    /// Agreement of the delayed / on-time call at the 15 minute threshold.
    pub accuracy: f64,
    pub n: usize,
    pub k: usize,
}

pub fn evaluate(y: &[f64], y_hat: &[f64], k: usize) -> Result<MetricReport> {
    check_lengths(y, y_hat)?;
    let n = y.len();
    let r2 = r_squared(y, y_hat)?;
    let adjusted = adjusted_r_squared(r2, n, k)?;
    let nf = n as f64;
    let mse = y
        .iter()
        .zip(y_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / nf;
    let mae = y.iter().zip(y_hat).map(|(a, b)| (a - b).abs()).sum::<f64>() / nf;
    let agree = y
        .iter()
        .zip(y_hat)
        .filter(|(a, b)| (**a > DELAY_THRESHOLD_MINUTES) == (**b > DELAY_THRESHOLD_MINUTES))
        .count();
    Ok(MetricReport {
        r_squared: r2,
        adjusted_r_squared: adjusted,
        mse,
        mae,
        accuracy: agree as f64 / nf,
        n,
        k,
    })
}
