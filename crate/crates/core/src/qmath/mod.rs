//! Dense complex linear algebra over labeled tensor-product spaces.
//!
//! Subsystems are always stored in lexicographic label order; constructors accept any
//! order and permute. Complex entries are interleaved `f64` pairs (`Complex64`).

mod labeled;
pub mod linalg;
mod matrix;
pub mod pauli;
pub mod random;

use thiserror::Error;

pub use labeled::{link_vector, tensor, tensor_operators, tensor_vectors, LabeledOperator, LabeledVector, Space, Tensor};
pub use matrix::CMatrix;
pub use num_complex::Complex64 as C64;

/// Absolute tolerance for hermiticity / positivity decisions.
pub const TOL: f64 = 1e-10;

/// Threshold behind the cached hermitian flag of [`LabeledOperator`].
pub const HERMITIAN_FLAG_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QmathError {
    #[error("duplicate subsystem label `{0}`")]
    DuplicateLabel(String),
    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),
    #[error("subsystem `{0}` has dimension zero")]
    ZeroDimension(String),
    #[error("subsystem `{0}` has mismatched dimensions")]
    DimensionMismatch(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("label sets differ: {0:?} vs {1:?}")]
    LabelSetMismatch(Vec<String>, Vec<String>),
    #[error("operands live on different spaces: {0} vs {1}")]
    SpaceMismatch(String, String),
    #[error("link vector dimension must be at least 1")]
    ZeroLinkDimension,
    #[error("vector has zero norm")]
    ZeroNorm,
    #[error("non-finite amplitude")]
    NonFinite,
    #[error("matrix is not {0}")]
    NotStructured(&'static str),
    #[error("eigendecomposition failed")]
    Eigen,
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Standard single-qubit matrices.
pub mod gates {
    use super::{c, cr, CMatrix};

    pub fn id2() -> CMatrix {
        CMatrix::identity(2)
    }

    pub fn pauli_x() -> CMatrix {
        CMatrix::from_rows([[cr(0.0), cr(1.0)], [cr(1.0), cr(0.0)]])
    }

    pub fn pauli_y() -> CMatrix {
        CMatrix::from_rows([[cr(0.0), c(0.0, -1.0)], [c(0.0, 1.0), cr(0.0)]])
    }

    pub fn pauli_z() -> CMatrix {
        CMatrix::from_rows([[cr(1.0), cr(0.0)], [cr(0.0), cr(-1.0)]])
    }

    pub fn hadamard() -> CMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        CMatrix::from_rows([[cr(s), cr(s)], [cr(s), cr(-s)]])
    }

    /// |k⟩⟨k| on a qubit.
    pub fn proj(k: usize) -> CMatrix {
        let mut m = CMatrix::zeros(2, 2);
        m[(k, k)] = cr(1.0);
        m
    }

    /// CNOT with the first factor as control.
    pub fn cnot() -> CMatrix {
        let mut m = CMatrix::zeros(4, 4);
        for (r, col) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
            m[(r, col)] = cr(1.0);
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::gates::*;
    use super::*;

    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn identity_tensor_identity() {
        let a = LabeledOperator::single("a", id2()).unwrap();
        let b = LabeledOperator::single("b", id2()).unwrap();
        let ab = tensor(&[&a, &b]).unwrap();
        assert_eq!(ab.matrix(), &CMatrix::identity(4));
    }

    #[test]
    fn z_tensor_z() {
        let a = LabeledOperator::single("a", pauli_z()).unwrap();
        let b = LabeledOperator::single("b", pauli_z()).unwrap();
        let ab = tensor(&[&a, &b]).unwrap();
        assert_eq!(ab.matrix(), &CMatrix::diag(&[cr(1.0), cr(-1.0), cr(-1.0), cr(1.0)]));
    }

    #[test]
    fn control_zero_times_diagonal_ancilla() {
        let c0 = LabeledVector::qubit("c", [cr(1.0), cr(0.0)]);
        let d = LabeledVector::qubit("a", [cr(S), cr(S)]);
        let v = tensor(&[&c0, &d]).unwrap();
        let amps = v.amplitudes_in(&["c", "a"]).unwrap();
        let want = [S, S, 0.0, 0.0];
        for (x, w) in amps.iter().zip(want) {
            assert!((x - cr(w)).norm() < 1e-15);
        }
        // canonical order is (a, c)
        assert_eq!(v.space().labels(), &["a".to_string(), "c".to_string()]);
        assert!((v.amplitudes()[2] - cr(S)).norm() < 1e-15);
    }

    #[test]
    fn duplicate_label_is_named() {
        let a = LabeledOperator::single("a", id2()).unwrap();
        let err = tensor(&[&a, &a]).unwrap_err();
        assert_eq!(err, QmathError::DuplicateLabel("a".into()));
    }

    #[test]
    fn bell_reduction_is_maximally_mixed() {
        let phi = LabeledVector::new(&["s", "a"], &[2, 2], vec![cr(S), cr(0.0), cr(0.0), cr(S)]).unwrap();
        let rho_s = phi.to_density().partial_trace(&["s"]).unwrap();
        assert!(rho_s.matrix().max_abs_diff(&CMatrix::identity(2).scale_real(0.5)) < 1e-15);
    }

    #[test]
    fn keep_all_is_identity_map() {
        let phi = LabeledVector::new(&["s", "a"], &[2, 2], vec![cr(S), cr(0.0), c(0.0, 0.5), cr(0.5)]).unwrap();
        let rho = phi.to_density();
        assert_eq!(rho.partial_trace(&["a", "s"]).unwrap(), rho);
    }

    #[test]
    fn unknown_label_rejected() {
        let rho = LabeledOperator::single("s", id2()).unwrap();
        assert_eq!(rho.partial_trace(&["q"]).unwrap_err(), QmathError::UnknownLabel("q".into()));
    }

    #[test]
    fn link_vector_definition() {
        let l = link_vector("x", "y", 2).unwrap();
        let amps: Vec<f64> = l.amplitudes().iter().map(|z| z.re).collect();
        assert_eq!(amps, vec![1.0, 0.0, 0.0, 1.0]);
        assert!((l.norm().powi(2) - 2.0).abs() < 1e-15);
        assert_eq!(link_vector("x", "y", 0).unwrap_err(), QmathError::ZeroLinkDimension);
    }

    #[test]
    fn operator_order_permutation_round_trip() {
        let m = CMatrix::from_fn(4, 4, |i, j| c(i as f64, j as f64));
        let op = LabeledOperator::new(&["z", "b"], &[2, 2], m.clone()).unwrap();
        assert_eq!(op.matrix_in(&["z", "b"]).unwrap(), m);
        assert_ne!(op.matrix(), &m);
    }

    #[test]
    fn partial_transpose_of_product() {
        let a = LabeledOperator::single("a", pauli_y()).unwrap();
        let b = LabeledOperator::single("b", pauli_x()).unwrap();
        let ab = tensor(&[&a, &b]).unwrap();
        let want = tensor(&[&LabeledOperator::single("a", pauli_y().transpose()).unwrap(), &b]).unwrap();
        assert!(ab.partial_transpose(&["a"]).unwrap().max_abs_diff(&want).unwrap() < 1e-15);
    }
}
