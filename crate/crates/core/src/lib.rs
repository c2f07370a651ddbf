//! Poisson geometry of principal bundles, evaluated numerically.
//!
//! The crate works on trivialized principal bundles `P = M x G` over a box or over
//! a group, with `G` a matrix Lie group. It provides the momentum map of the
//! lifted action, the dual Atiyah sequence `T*(P/G) -> T*P/G -> P x_G g*`, the
//! tangent and cotangent VB-groupoids over the pair groupoid `P x P` together with
//! their duals, Poisson brackets on `T*Q`, `g*`, `T*P/G` and products, symplectic
//! leaves of `T*P/G`, semidirect products and the heavy top, and a fixed-step
//! integrator for Hamiltonian flows. Every construction comes with a seeded
//! verification suite returning a [`report::SuiteReport`].

pub mod bundle;
pub mod dynamics;
pub mod groupoid;
pub mod liealg;
pub mod linalg;
pub mod poisson;
pub mod report;
pub mod rng;
pub mod runner;
pub mod semidirect;
