pub mod bubbling;
pub mod error;
pub mod field;
pub mod flow;
pub mod frac;
pub mod grid;
pub mod harness;
pub mod spectral;
pub mod variational;

pub use error::{Error, Result};
pub use field::{Field, SPHERE_TOL};
pub use grid::{chordal_distance, CircleGrid, Grid, LineGrid};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    mod spectral {}
    #[doc = include_str!("../../../book/src/offdiagonal.md")]
    mod offdiagonal {}
    #[doc = include_str!("../../../book/src/flow.md")]
    mod flow {}
    #[doc = include_str!("../../../book/src/bubbling.md")]
    mod bubbling {}
    #[doc = include_str!("../../../book/src/variational.md")]
    mod variational {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
