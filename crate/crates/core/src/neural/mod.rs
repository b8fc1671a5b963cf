//! Dense networks, reverse-mode gradients, an adaptive-moment optimizer,
//! a finite-difference gradient check and a flat binary checkpoint format.

mod adam;
pub mod checkpoint;
pub mod gradcheck;
mod mlp;

pub use adam::Adam;
pub use gradcheck::{
    analytic_gradients, compare_with_finite_differences, finite_difference_check, GradCheck,
};
pub use mlp::{Dense, Gradients, Head, Mlp, Tape};
