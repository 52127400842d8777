//! Validated numerics for computer-assisted proofs about periodic orbits of
//! the Rössler system: interval arithmetic, a Taylor/Lohner integrator,
//! rigorous return maps, covering relations, interval Newton proofs and the
//! proof cases that tie them together into certificates.

pub mod cases;
pub mod certificate;
pub mod covering;
pub mod explore;
pub mod field;
pub mod integrator;
pub mod interval;
pub mod newton;
pub mod numeric;
pub mod planemap;
pub mod poincare;
