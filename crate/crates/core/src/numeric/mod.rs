//! Scalar root finding and Gauss-Legendre quadrature.

pub mod quad;
pub mod roots;

pub use quad::GaussLegendre;
pub use roots::bisect;
