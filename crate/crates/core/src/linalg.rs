//! Complex matrix products routed through real GEMM kernels.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Complex matrix kept as separate real and imaginary parts.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct SplitMatrix {
    pub re: DMatrix<f64>,
    pub im: DMatrix<f64>,
}

impl SplitMatrix {
    pub fn from_complex(m: &DMatrix<Complex64>) -> Self {
        SplitMatrix { re: m.map(|z| z.re), im: m.map(|z| z.im) }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.re[(i, j)], self.im[(i, j)])
    }

    /// `self · rhs`.
    pub fn mul(&self, rhs: &SplitMatrix) -> SplitMatrix {
        SplitMatrix { re: &self.re * &rhs.re - &self.im * &rhs.im, im: &self.re * &rhs.im + &self.im * &rhs.re }
    }
}
