//! Renormalization toolkit for complex polynomials.
//!
//! External rays and Böttcher coordinates, cut families and avoiding sets,
//! carrots, and the carrot surgery that lowers the degree of a polynomial
//! while keeping the dynamics on the avoiding set.

pub mod angle;
pub mod avoiding;
pub mod bottcher;
pub mod carrot;
pub mod cuts;
pub mod cycles;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod koenigs;
pub mod poly;
pub mod render;
pub mod roots;
pub mod scene;
pub mod surgery;
pub mod verify;

/// A point of the complex plane.
pub type ComplexPoint = num_complex::Complex64;

pub use angle::{tuple_orbit, Angle, TupleOrbit};
pub use error::{Error, Result};
pub use poly::{escape_time, green_potential, EscapeResult, Polynomial};
