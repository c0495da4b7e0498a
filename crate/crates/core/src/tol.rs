use crate::scalar::{num, Scalar};

/// Central tolerance record. Every predicate in the crate reads its
/// thresholds from here; the defaults below are the ones all tests pin.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances<T: Scalar> {
    /// Max allowed |A - A^T| entry for a covariance matrix.
    pub sym: T,
    /// Slack on nu_1 >= 1 for physicality.
    pub phys: T,
    /// Slack on |det - 1| for purity.
    pub pure_det: T,
    /// Slack on nu_1(PT) >= 1 for the PPT separability test.
    pub sep: T,
    /// Max magnitude of an x-p cross entry for a de-cross-correlated state.
    pub dcc: T,
    /// Max allowed ||K Omega K^T - Omega|| entry for a symplectic matrix.
    pub symplectic: T,
    /// Max allowed ||K K^T - I|| entry for a passive matrix.
    pub passive: T,
    /// Eigenvalue floor below which a matrix counts as not positive definite.
    pub pos_def: T,
    /// Max reconstruction error for spectral/decomposition round trips.
    pub recon: T,
}

impl<T: Scalar> Default for Tolerances<T> {
    fn default() -> Self {
        Self {
            sym: num(1e-10),
            phys: num(1e-9),
            pure_det: num(1e-8),
            sep: num(1e-9),
            dcc: num(1e-8),
            symplectic: num(1e-10),
            passive: num(1e-10),
            pos_def: num(1e-12),
            recon: num(1e-9),
        }
    }
}
