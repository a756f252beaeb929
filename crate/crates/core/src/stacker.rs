//! Closed-form optimal linear stacking.
//!
//! For outputs `f0 ≡ 1, f1, …, fK` and targets `y`, the squared error of
//! `Σ θ_j f_j` is minimised by the solution of the Gram system
//! `[⟨f_s, f_t⟩] Θ = [⟨f_s, y⟩]`. The Gram matrix is positive definite
//! exactly when the outputs are linearly independent, so the system is
//! solved with a Cholesky factorisation.

use serde::{Deserialize, Serialize};

use nalgebra::{DMatrix, DVector};

use crate::data::{dot, rmse, sse, AssumptionReport, OutputVector};
use crate::error::{Error, Result};

/// A Cholesky pivot below this fraction of its diagonal entry counts as a
/// dependent column.
pub const PIVOT_RELATIVE_TOLERANCE: f64 = 1e-10;

/// Diagonal jitter (relative to the trace) for the single retry.
pub const JITTER: f64 = 1e-12;

/// Max-norm distance below which `Θ*` counts as a standard basis vector.
pub const UNIT_VECTOR_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramSystem {
    /// Row-major `(K+1)×(K+1)` matrix of pairwise inner products.
    pub gram: Vec<f64>,
    pub rhs: Vec<f64>,
    pub k: usize,
}

impl GramSystem {
    pub fn dim(&self) -> usize {
        self.k + 1
    }

    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.gram[s * self.dim() + t]
    }

    /// Frobenius norm of the Gram matrix.
    pub fn norm(&self) -> f64 {
        self.gram.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn trace(&self) -> f64 {
        (0..self.dim()).map(|j| self.get(j, j)).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StackSolution {
    /// `θ0` multiplies the constant-one output.
    pub theta: Vec<f64>,
    pub sse: f64,
    pub rmse: f64,
    pub is_unit_vector: bool,
    /// Loss gradient at `e_{j*}`, the best single output.
    pub gradient_at_best_unit: Vec<f64>,
    /// `j*`, lowest index on ties.
    pub best_unit: usize,
    pub best_unit_sse: f64,
}

impl StackSolution {
    /// Strict improvement over every single output by more than `tol`.
    pub fn improves_on_best(&self, tol: f64) -> bool {
        self.sse < self.best_unit_sse - tol
    }
}

fn check_lengths(outputs: &[OutputVector], targets: &[f64]) -> Result<()> {
    if outputs.is_empty() {
        return Err(Error::Dataset("stacking needs at least the bias output".into()));
    }
    for o in outputs {
        if o.len() != targets.len() {
            return Err(Error::Dimension {
                what: "output vector",
                expected: targets.len(),
                got: o.len(),
            });
        }
    }
    Ok(())
}

/// Assembles `gram[s][t] = ⟨f_s, f_t⟩` and `rhs[s] = ⟨f_s, y⟩`.
/// `outputs[0]` must be the constant-one bias output.
pub fn build_gram_system(outputs: &[OutputVector], targets: &[f64]) -> Result<GramSystem> {
    check_lengths(outputs, targets)?;
    if outputs[0].iter().any(|&v| v != 1.0) {
        return Err(Error::Dataset(
            "the first stacked output must be the constant-one bias".into(),
        ));
    }
    let m = outputs.len();
    let mut gram = vec![0.0; m * m];
    for s in 0..m {
        for t in s..m {
            let v = dot(&outputs[s], &outputs[t]);
            gram[s * m + t] = v;
            gram[t * m + s] = v;
        }
    }
    let rhs = outputs.iter().map(|f| dot(f, targets)).collect();
    Ok(GramSystem { gram, rhs, k: m - 1 })
}

/// In-place lower Cholesky factor; on failure returns the offending column.
fn cholesky(a: &[f64], m: usize, jitter: f64) -> std::result::Result<Vec<f64>, usize> {
    let mut l = vec![0.0; m * m];
    for j in 0..m {
        let diag = a[j * m + j] + jitter;
        let mut pivot = diag;
        for p in 0..j {
            pivot -= l[j * m + p] * l[j * m + p];
        }
        if !(pivot.is_finite() && diag > 0.0 && pivot > PIVOT_RELATIVE_TOLERANCE * diag) {
            return Err(j);
        }
        let d = pivot.sqrt();
        l[j * m + j] = d;
        for i in j + 1..m {
            let mut v = a[i * m + j];
            for p in 0..j {
                v -= l[i * m + p] * l[j * m + p];
            }
            l[i * m + j] = v / d;
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &[f64], m: usize, b: &[f64]) -> Vec<f64> {
    let mut z = b.to_vec();
    for i in 0..m {
        for p in 0..i {
            z[i] -= l[i * m + p] * z[p];
        }
        z[i] /= l[i * m + i];
    }
    for i in (0..m).rev() {
        for p in i + 1..m {
            z[i] -= l[p * m + i] * z[p];
        }
        z[i] /= l[i * m + i];
    }
    z
}

/// Minimum-norm least squares on the design matrix itself.
fn svd_least_squares(outputs: &[OutputVector], targets: &[f64]) -> Result<Vec<f64>> {
    let f = DMatrix::from_fn(targets.len(), outputs.len(), |i, j| outputs[j][i]);
    let theta = f
        .svd(true, true)
        .solve(&DVector::from_column_slice(targets), 0.0)
        .map_err(|_| Error::NonFinite("least-squares solve"))?;
    Ok(theta.iter().copied().collect())
}

/// `Σ_j θ_j f_j` evaluated on every record.
pub fn combine(theta: &[f64], outputs: &[OutputVector]) -> Vec<f64> {
    let n = outputs.first().map_or(0, OutputVector::len);
    let mut g = vec![0.0; n];
    for (t, f) in theta.iter().zip(outputs) {
        for (gi, fi) in g.iter_mut().zip(f.iter()) {
            *gi += t * fi;
        }
    }
    g
}

/// Loss of each single output `e_j`, i.e. `E(f_j)`.
pub fn unit_losses(outputs: &[OutputVector], targets: &[f64]) -> Vec<f64> {
    outputs.iter().map(|f| sse(f, targets)).collect()
}

/// Index and loss of the best single output, lowest index on ties.
pub fn best_unit(outputs: &[OutputVector], targets: &[f64]) -> (usize, f64) {
    unit_losses(outputs, targets)
        .into_iter()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |best, (j, l)| if l < best.1 { (j, l) } else { best },
        )
}

/// `∂E/∂θ_s = 2(Σ_j θ_j ⟨f_s, f_j⟩ − ⟨f_s, y⟩)` for every `s`.
pub fn loss_gradient(theta: &[f64], outputs: &[OutputVector], targets: &[f64]) -> Result<Vec<f64>> {
    check_lengths(outputs, targets)?;
    if theta.len() != outputs.len() {
        return Err(Error::Dimension {
            what: "theta",
            expected: outputs.len(),
            got: theta.len(),
        });
    }
    let residual: Vec<f64> = combine(theta, outputs)
        .iter()
        .zip(targets)
        .map(|(g, y)| g - y)
        .collect();
    Ok(outputs.iter().map(|f| 2.0 * dot(&residual, f)).collect())
}

/// Solves the Gram system for `Θ*` and fills in the diagnostics.
///
/// If the factorisation fails, dependent outputs are reported by the rank
/// test. Otherwise it is retried once with `1e-12 × trace` added to the
/// diagonal, and then solved by SVD.
pub fn solve_optimal_theta(sys: &GramSystem, outputs: &[OutputVector], targets: &[f64]) -> Result<StackSolution> {
    check_lengths(outputs, targets)?;
    let m = sys.dim();
    if outputs.len() != m {
        return Err(Error::Dimension {
            what: "stacked outputs",
            expected: m,
            got: outputs.len(),
        });
    }
    let theta = match cholesky(&sys.gram, m, 0.0) {
        Ok(l) => cholesky_solve(&l, m, &sys.rhs),
        Err(_) => {
            // The rank test decides: jitter must not rescue a dependent
            // system, and a near-collinear independent one is still solved.
            if let Some(component) = AssumptionReport::first_dependent(outputs) {
                return Err(Error::LinearDependence { component });
            }
            match cholesky(&sys.gram, m, JITTER * sys.trace()) {
                Ok(l) => cholesky_solve(&l, m, &sys.rhs),
                Err(_) => svd_least_squares(outputs, targets)?,
            }
        }
    };
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("optimal theta"));
    }

    let loss = sse(&combine(&theta, outputs), targets);
    let (j_star, best_sse) = best_unit(outputs, targets);
    let mut unit = vec![0.0; m];
    unit[j_star] = 1.0;
    let gradient_at_best_unit = loss_gradient(&unit, outputs, targets)?;
    let is_unit_vector = (0..m).any(|j| {
        theta
            .iter()
            .enumerate()
            .all(|(i, t)| (t - if i == j { 1.0 } else { 0.0 }).abs() <= UNIT_VECTOR_TOLERANCE)
    });
    Ok(StackSolution {
        theta,
        sse: loss,
        rmse: rmse(loss, targets.len()),
        is_unit_vector,
        gradient_at_best_unit,
        best_unit: j_star,
        best_unit_sse: best_sse,
    })
}

/// Builds and solves the Gram system in one step.
pub fn stack(outputs: &[OutputVector], targets: &[f64]) -> Result<StackSolution> {
    let sys = build_gram_system(outputs, targets)?;
    solve_optimal_theta(&sys, outputs, targets)
}
