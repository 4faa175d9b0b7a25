//! Spectral portraits of non-self-adjoint operators of the form
//! `iε y'' + q(x) y = λ y` on `[-1, 1]` and of the Orr–Sommerfeld problem.
//!
//! The crate is split by concern:
//!
//! * [`profiles`]: velocity profiles `q` and their turning points
//! * [`airy`]: the Airy function, its rotations and zeros
//! * [`phase`]: phase integrals, `Q`/`Q±`, Stokes lines
//! * [`graph`]: limit spectral curves and knot points
//! * [`quantize`]: asymptotic eigenvalue predictions and counting functions
//! * [`discretize`]: Chebyshev collocation of the model and Orr–Sommerfeld problems
//! * [`linalg`]: dense complex eigenvalue solvers
//! * [`verify`]: matching of predictions, graph distances and counting

pub mod airy;
pub mod discretize;
pub mod graph;
pub mod linalg;
pub mod phase;
pub mod profiles;
pub mod quantize;
pub mod verify;

mod roots;

pub use num_complex::Complex64;

/// Sign in front of the second-derivative term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    /// `+iε y''`: spectra in the lower half-plane.
    PlusI,
    /// `-iε y''`: the conjugate spectrum.
    MinusI,
}

impl SignConvention {
    pub fn factor(self) -> f64 {
        match self {
            SignConvention::PlusI => 1.0,
            SignConvention::MinusI => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SignConvention::PlusI => "plus_i",
            SignConvention::MinusI => "minus_i",
        }
    }
}

impl Default for SignConvention {
    fn default() -> Self {
        SignConvention::PlusI
    }
}
