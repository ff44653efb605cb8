//! Polynomial graph filters `h(A) = Σ_ℓ h_ℓ A^ℓ` and the named filters
//! built from them.

use nalgebra::{DMatrix, DVector};

use crate::error::{bad_params, Error, Result};
use crate::graph::{bottom_eigenbasis, truncated_eigenbasis, ShiftKind, ShiftOperator};

/// Condition-number ceiling for [`fit_coefficients`].
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    #[default]
    None,
    /// Evaluate the polynomial in `A / |λ_max|`.
    ByLambdaMax,
}

#[derive(Debug, Clone)]
pub struct GraphFilter<'a> {
    coefficients: Vec<f64>,
    shift: &'a ShiftOperator,
    normalization: Normalization,
}

impl<'a> GraphFilter<'a> {
    pub fn new(shift: &'a ShiftOperator, coefficients: Vec<f64>, normalization: Normalization) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(bad_params("a graph filter needs at least one coefficient"));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("filter coefficients"));
        }
        Ok(Self {
            coefficients,
            shift,
            normalization,
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn shift(&self) -> &'a ShiftOperator {
        self.shift
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn shift_scale(&self) -> Result<f64> {
        match self.normalization {
            Normalization::None => Ok(1.0),
            Normalization::ByLambdaMax => {
                let lm = self.shift.lambda_max()?;
                if lm == 0.0 {
                    Ok(1.0)
                } else {
                    Ok(1.0 / lm)
                }
            }
        }
    }

    /// `h(λ)`, with `λ` an eigenvalue of the unnormalized shift.
    pub fn response(&self, lambda: f64) -> Result<f64> {
        let x = lambda * self.shift_scale()?;
        Ok(self.coefficients.iter().rev().fold(0.0, |acc, &h| acc * x + h))
    }

    /// `h(A)·signal` by Horner's rule: `L - 1` sparse products, no matrix
    /// powers formed.
    pub fn apply(&self, signal: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.shift.len();
        if signal.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: signal.nrows(),
            });
        }
        let scale = self.shift_scale()?;
        let last = *self.coefficients.last().unwrap();
        let mut acc = signal * last;
        for &h in self.coefficients.iter().rev().skip(1) {
            let mut next = self.shift.apply(&acc);
            if scale != 1.0 {
                next *= scale;
            }
            next += signal * h;
            acc = next;
        }
        Ok(acc)
    }
}

pub fn apply_filter(filter: &GraphFilter<'_>, signal: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    filter.apply(signal)
}

/// `I - A` on a transition shift; response `1 - λ`.
pub fn haar_highpass(shift: &ShiftOperator) -> Result<GraphFilter<'_>> {
    if shift.kind() != ShiftKind::Transition {
        return Err(Error::WrongShiftKind {
            required: ShiftKind::Transition.name(),
            actual: shift.kind().name(),
        });
    }
    GraphFilter::new(shift, vec![1.0, -1.0], Normalization::None)
}

/// `I + A/|λ_max|`; response `1 + λ/|λ_max|`.
pub fn haar_lowpass(shift: &ShiftOperator) -> Result<GraphFilter<'_>> {
    shift.lambda_max()?;
    GraphFilter::new(shift, vec![1.0, 1.0], Normalization::ByLambdaMax)
}

/// Which eigenvectors span an ideal low-pass band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LowpassBasis {
    /// Orthonormal eigenvectors of the symmetric form of the shift (for a
    /// transition shift this is the normalized adjacency).
    #[default]
    Orthonormal,
    /// Right eigenvectors of `D⁻¹W` (transition shifts only); the band
    /// projector is then `V_(b)·Ṽ_(b)ᵀ` with `Ṽ` the dual rows of `V⁻¹`.
    Transition,
}

/// Projection onto the `b` lowest graph frequencies.
#[derive(Debug, Clone)]
pub struct IdealLowPass {
    bandwidth: usize,
    basis: DMatrix<f64>,
    /// Equal to `basis` for the orthonormal convention.
    dual: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

impl IdealLowPass {
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// `V_(b)`, one eigenvector per column.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn dual(&self) -> &DMatrix<f64> {
        &self.dual
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.basis.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.nrows() == 0
    }

    pub fn is_orthonormal(&self) -> bool {
        self.basis == self.dual
    }

    pub fn project(&self, signal: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if signal.nrows() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: signal.nrows(),
            });
        }
        Ok(&self.basis * (self.dual.transpose() * signal))
    }
}

pub fn ideal_lowpass(shift: &ShiftOperator, b: usize) -> Result<IdealLowPass> {
    ideal_lowpass_with(shift, b, LowpassBasis::Orthonormal)
}

pub fn ideal_lowpass_with(shift: &ShiftOperator, b: usize, which: LowpassBasis) -> Result<IdealLowPass> {
    if which == LowpassBasis::Transition && shift.kind() != ShiftKind::Transition {
        return Err(Error::WrongShiftKind {
            required: ShiftKind::Transition.name(),
            actual: shift.kind().name(),
        });
    }
    // Laplacian frequencies grow with the eigenvalue; every other shift has
    // its smooth end at the top of the spectrum.
    let eig = if shift.kind() == ShiftKind::Laplacian {
        bottom_eigenbasis(shift, b)?
    } else {
        truncated_eigenbasis(shift, b)?
    };
    let (basis, dual) = match which {
        LowpassBasis::Orthonormal => (eig.vectors.clone(), eig.vectors),
        LowpassBasis::Transition => {
            let mut basis = eig.vectors.clone();
            let mut dual = eig.vectors;
            for (i, &d) in shift.degrees().iter().enumerate() {
                let s = d.sqrt();
                basis.row_mut(i).scale_mut(1.0 / s);
                dual.row_mut(i).scale_mut(s);
            }
            (basis, dual)
        }
    };
    Ok(IdealLowPass {
        bandwidth: b,
        basis,
        dual,
        eigenvalues: eig.values,
    })
}

#[derive(Debug, Clone)]
pub struct FittedFilter<'a> {
    pub filter: GraphFilter<'a>,
    /// `‖V·h - c‖₂` over the constraints.
    pub residual: f64,
    pub condition_number: f64,
}

/// Least-squares coefficients `h` with `Σ_ℓ h_ℓ λ_i^ℓ ≈ c_i`.
pub fn fit_coefficients<'a>(
    shift: &'a ShiftOperator,
    target_response: &[(f64, f64)],
    length: usize,
) -> Result<FittedFilter<'a>> {
    if length == 0 || target_response.is_empty() {
        return Err(bad_params("need at least one constraint and one coefficient"));
    }
    let m = target_response.len();
    let vander = DMatrix::from_fn(m, length, |i, l| target_response[i].0.powi(l as i32));
    let rhs = DVector::from_iterator(m, target_response.iter().map(|&(_, c)| c));
    let svd = vander.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if cond.is_nan() || cond >= MAX_CONDITION {
        return Err(Error::IllConditioned(cond));
    }
    let h = svd.solve(&rhs, 0.0).map_err(|e| bad_params(e.to_string()))?;
    let residual = (&vander * &h - rhs).norm();
    Ok(FittedFilter {
        filter: GraphFilter::new(shift, h.iter().copied().collect(), Normalization::None)?,
        residual,
        condition_number: cond,
    })
}
