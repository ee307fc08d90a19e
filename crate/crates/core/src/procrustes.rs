//! Orthogonal maps: closed-form Procrustes and the coupling-weighted update used
//! inside the alignment loop.

use nalgebra::{DMatrix, SVD};

use crate::linalg;
use crate::ot::TransportPlan;

/// Maximum `|W^T W - I|_F` accepted for an [`OrthogonalMap`].
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ProcrustesError {
    #[error("shape mismatch: {left:?} vs {right:?}")]
    Shape {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("no rows to fit")]
    Empty,
    #[error("row weight {index} is not strictly positive ({value})")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("singular value decomposition did not converge")]
    Svd,
    #[error("matrix is not orthogonal: |W^T W - I|_F = {0:.3e}")]
    NotOrthogonal(f64),
    #[error("step size must be non-negative and finite, got {0}")]
    StepSize(f64),
}

/// A `d x d` orthogonal matrix acting on row vectors from the right.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalMap {
    matrix: DMatrix<f64>,
}

impl OrthogonalMap {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self, ProcrustesError> {
        if !matrix.is_square() {
            return Err(ProcrustesError::Shape {
                left: matrix.shape(),
                right: (matrix.nrows(), matrix.nrows()),
            });
        }
        let err = linalg::orthogonality_error(&matrix);
        if !(err <= ORTHOGONALITY_TOLERANCE) {
            return Err(ProcrustesError::NotOrthogonal(err));
        }
        Ok(Self { matrix })
    }

    /// Wraps a matrix read from disk; callers report the orthogonality error.
    pub fn from_matrix_unchecked(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `X W`.
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        x * &self.matrix
    }

    pub fn orthogonality_error(&self) -> f64 {
        linalg::orthogonality_error(&self.matrix)
    }
}

/// The orthogonal polar factor `U V^T` of `m = U S V^T`.
pub fn nearest_orthogonal(m: &DMatrix<f64>) -> Result<OrthogonalMap, ProcrustesError> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(ProcrustesError::NonFinite("cross-covariance"));
    }
    let svd = SVD::try_new(m.clone(), true, true, f64::EPSILON, 0).ok_or(ProcrustesError::Svd)?;
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(ProcrustesError::Svd),
    };
    OrthogonalMap::new(u * v_t)
}

/// `argmin_{W orthogonal} sum_i w_i |x_i W - y_i|^2`, the polar factor of `X^T diag(w) Y`.
pub fn procrustes_closed_form(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    row_weights: Option<&[f64]>,
) -> Result<OrthogonalMap, ProcrustesError> {
    if x.shape() != y.shape() {
        return Err(ProcrustesError::Shape {
            left: x.shape(),
            right: y.shape(),
        });
    }
    if x.nrows() == 0 {
        return Err(ProcrustesError::Empty);
    }
    let m = match row_weights {
        None => x.tr_mul(y),
        Some(w) => {
            if w.len() != x.nrows() {
                return Err(ProcrustesError::Shape {
                    left: (w.len(), 1),
                    right: (x.nrows(), 1),
                });
            }
            if let Some((index, &value)) = w.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
                return Err(ProcrustesError::NonPositiveWeight { index, value });
            }
            let mut wy = y.clone();
            for (i, &wi) in w.iter().enumerate() {
                let mut row = wy.row_mut(i);
                row *= wi;
            }
            x.tr_mul(&wy)
        }
    };
    nearest_orthogonal(&m)
}

/// `Cx^T P Cy`, the coupling-weighted cross-covariance of two anchor sets.
pub fn coupling_cross_covariance(
    cx: &DMatrix<f64>,
    cy: &DMatrix<f64>,
    plan: &DMatrix<f64>,
) -> Result<DMatrix<f64>, ProcrustesError> {
    if plan.shape() != (cx.nrows(), cy.nrows()) || cx.ncols() != cy.ncols() {
        return Err(ProcrustesError::Shape {
            left: plan.shape(),
            right: (cx.nrows(), cy.nrows()),
        });
    }
    Ok(cx.tr_mul(&(plan * cy)))
}

/// `trace(W^T Cx^T P Cy)`, the quantity both update modes increase.
pub fn alignment_objective(w: &OrthogonalMap, cross_covariance: &DMatrix<f64>) -> f64 {
    w.matrix().dot(cross_covariance)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateMode {
    /// `W <- polar(W + lr * Cx^T P Cy)`.
    Gradient,
    /// `W <- polar(Cx^T P Cy)`.
    ClosedForm,
}

pub fn coupling_procrustes_update(
    w: &OrthogonalMap,
    cx: &DMatrix<f64>,
    cy: &DMatrix<f64>,
    plan: &TransportPlan,
    lr: f64,
    mode: UpdateMode,
) -> Result<OrthogonalMap, ProcrustesError> {
    let m = coupling_cross_covariance(cx, cy, &plan.matrix)?;
    if m.nrows() != w.dim() {
        return Err(ProcrustesError::Shape {
            left: m.shape(),
            right: w.matrix().shape(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(ProcrustesError::NonFinite("gradient"));
    }
    match mode {
        UpdateMode::ClosedForm => nearest_orthogonal(&m),
        UpdateMode::Gradient => {
            if !(lr >= 0.0 && lr.is_finite()) {
                return Err(ProcrustesError::StepSize(lr));
            }
            nearest_orthogonal(&(w.matrix() + m * lr))
        }
    }
}
