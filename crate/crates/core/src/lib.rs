//! Numerical lab for the iteration `a^{(i+1)} = F(T - r^i(a^{(i)}))`:
//! periodic grid fields with spectral `C^k` norms, a toy quadratic problem
//! with oscillatory remainders, the iteration driver, the constant ledger,
//! and empirical checks of the remainder bounds and decay rates.

mod error;
pub mod gridfield;
pub mod iteration;
pub mod ledger;
pub mod par;
pub mod problem;
mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use gridfield::{GridFunction, NormVector};
pub use par::Execution;
