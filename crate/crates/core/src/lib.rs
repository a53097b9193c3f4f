//! γ-relative calculus on the semiaxis, weighted moduli of smoothness and
//! constructive upper bounds of weighted γ-K-functionals under Laguerre
//! weights.

pub mod approx;
pub mod bell;
pub mod calculus;
pub mod error;
pub mod gamma;
pub mod harness;
pub mod kfunctional;
pub mod modulus;
pub mod partition;
pub mod quadrature;
pub mod steklov;
pub mod weight;

pub use error::{Error, Result};
pub use gamma::{GammaFunction, GammaKind, GammaSpec, InverseDerivative};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/gamma.md")]
    mod gamma {}
    #[doc = include_str!("../../../book/src/calculus.md")]
    mod calculus {}
    #[doc = include_str!("../../../book/src/moduli.md")]
    mod moduli {}
    #[doc = include_str!("../../../book/src/kfunctional.md")]
    mod kfunctional {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
