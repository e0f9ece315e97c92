use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{ProblemError, DEGENERATE_CURVATURE};
use crate::geometry::Domain;
use crate::rng::RandomStream;
use crate::vector;

/// Relative residual required of the eigen-decomposition and the normal-equation solve.
const SOLVE_TOLERANCE: f64 = 1e-10;

/// Empirical risk `1/(2N) Σ (x_iᵀθ − y_i)²` with its Gram matrix
/// `A = XᵀX/N` diagonalized once at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    rows: Vec<Vec<f64>>,
    targets: Vec<f64>,
    /// Row-major `d × d` Gram matrix.
    gram: Vec<f64>,
    theta_star: Vec<f64>,
    eig_min: f64,
    eig_max: f64,
}

impl LeastSquares {
    pub fn new(rows: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self, ProblemError> {
        let n = rows.len();
        if n == 0 {
            return Err(ProblemError::InvalidParameter("design matrix has no rows".into()));
        }
        if targets.len() != n {
            return Err(ProblemError::DimensionMismatch {
                what: "targets",
                expected: n,
                actual: targets.len(),
            });
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(ProblemError::InvalidParameter("design matrix has no columns".into()));
        }
        for row in &rows {
            if row.len() != d {
                return Err(ProblemError::DimensionMismatch {
                    what: "design row",
                    expected: d,
                    actual: row.len(),
                });
            }
            if !vector::all_finite(row) {
                return Err(ProblemError::InvalidParameter("design entries must be finite".into()));
            }
        }
        if !vector::all_finite(&targets) {
            return Err(ProblemError::InvalidParameter("targets must be finite".into()));
        }

        let x = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
        let y = DVector::from_column_slice(&targets);
        let a = x.transpose() * &x / n as f64;
        let b = x.transpose() * &y / n as f64;

        let (eig_min, eig_max) = extreme_eigenvalues(&a)?;
        if eig_min <= DEGENERATE_CURVATURE {
            return Err(ProblemError::Degenerate(eig_min));
        }
        let theta_star = solve_normal_equations(&a, &b)?;

        Ok(Self {
            rows,
            targets,
            gram: a.transpose().as_slice().to_vec(),
            theta_star: theta_star.as_slice().to_vec(),
            eig_min,
            eig_max,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eig_min
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eig_max
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let sum: f64 = self
            .rows
            .iter()
            .zip(&self.targets)
            .map(|(x, y)| {
                let r = vector::dot(x, theta) - y;
                r * r
            })
            .sum();
        sum / (2.0 * self.rows.len() as f64)
    }

    /// Full gradient `A(θ − θ*)`.
    pub fn gradient_into(&self, theta: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.gram[i * d..(i + 1) * d];
            *o = row
                .iter()
                .zip(theta)
                .zip(&self.theta_star)
                .map(|((a, t), s)| a * (t - s))
                .sum();
        }
    }

    /// Average of per-row gradients `x_i(x_iᵀθ − y_i)` over `batch_size`
    /// rows drawn uniformly with replacement; unbiased for the full gradient.
    pub fn minibatch_gradient_into(&self, theta: &[f64], batch_size: usize, rng: &mut RandomStream, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for _ in 0..batch_size {
            let i = rng.index_below(self.rows.len());
            let x = &self.rows[i];
            let r = vector::dot(x, theta) - self.targets[i];
            for (o, xk) in out.iter_mut().zip(x) {
                *o += xk * r;
            }
        }
        let inv = 1.0 / batch_size as f64;
        out.iter_mut().for_each(|o| *o *= inv);
    }

    /// Upper bound on `E‖g_b − ∇f‖²` for a batch of `b` rows sampled with
    /// replacement: `(1/b)·(1/N) Σ ‖x_i‖² · max_{θ∈D} (x_iᵀθ − y_i)²`.
    pub fn minibatch_variance_bound(&self, domain: &Domain, batch_size: usize) -> f64 {
        let total: f64 = self
            .rows
            .iter()
            .zip(&self.targets)
            .map(|(x, &y)| {
                let worst = max_abs_affine(domain, x, y);
                vector::norm_sq(x) * worst * worst
            })
            .sum();
        total / (self.rows.len() as f64 * batch_size as f64)
    }
}

/// `max_{θ∈D} |xᵀθ − y|`.
fn max_abs_affine(domain: &Domain, x: &[f64], y: f64) -> f64 {
    match domain {
        Domain::Ball { center, radius } => (vector::dot(x, center) - y).abs() + radius * vector::norm(x),
        Domain::Box { lower, upper } => {
            let (lo, hi) = x
                .iter()
                .zip(lower)
                .zip(upper)
                .fold((0.0, 0.0), |(lo, hi), ((&xk, &l), &u)| {
                    let (a, b) = (xk * l, xk * u);
                    (lo + a.min(b), hi + a.max(b))
                });
            (hi - y).abs().max((lo - y).abs())
        }
    }
}

fn extreme_eigenvalues(a: &DMatrix<f64>) -> Result<(f64, f64), ProblemError> {
    let eig = SymmetricEigen::new(a.clone());
    let scale = a.norm().max(f64::MIN_POSITIVE);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let residual = (a * v - v * lambda).norm();
        if residual > SOLVE_TOLERANCE * scale {
            return Err(ProblemError::Solve(format!(
                "eigenpair {k} residual {residual:e} exceeds tolerance"
            )));
        }
    }
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((min, max))
}

fn solve_normal_equations(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, ProblemError> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| ProblemError::Solve("Gram matrix is not positive definite".into()))?;
    let mut x = chol.solve(b);
    // One round of iterative refinement.
    let r = b - a * &x;
    x += chol.solve(&r);
    let residual = (a * &x - b).norm();
    let scale = b.norm() + a.norm() * x.norm();
    if residual > SOLVE_TOLERANCE * scale.max(f64::MIN_POSITIVE) {
        return Err(ProblemError::Solve(format!(
            "normal-equation residual {residual:e} exceeds tolerance"
        )));
    }
    Ok(x)
}

/// Parses headerless `x_1, …, x_d, y` rows.
pub(super) fn read_csv<R: std::io::Read>(reader: R) -> Result<(Vec<Vec<f64>>, Vec<f64>), ProblemError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    let mut width = None;
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| ProblemError::Parse {
            row,
            col: 0,
            message: e.to_string(),
        })?;
        let values = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>().map_err(|_| ProblemError::Parse {
                    row,
                    col: c + 1,
                    message: format!("not a number: {cell:?}"),
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if values.len() < 2 {
            return Err(ProblemError::Parse {
                row,
                col: values.len(),
                message: "need at least one feature column and a target column".into(),
            });
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(ProblemError::Parse {
                    row,
                    col: values.len(),
                    message: format!("expected {w} columns"),
                })
            }
            _ => {}
        }
        let (y, x) = values.split_last().expect("at least two columns");
        targets.push(*y);
        rows.push(x.to_vec());
    }
    let d = width.map_or(0, |w| w - 1);
    if rows.len() < d + 1 || rows.is_empty() {
        return Err(ProblemError::Parse {
            row: rows.len(),
            col: 0,
            message: format!("need at least {} rows for {d} features", d + 1),
        });
    }
    Ok((rows, targets))
}
