//! Engine crate for `krflow`: a small laboratory for geometric flows on
//! Kähler surfaces.
//!
//! Two engines live here, deliberately decoupled:
//!
//! * an **exact-rational cohomology engine** ([`lattice`], [`classflow`]):
//!   intersection theory on a declared surface lattice, maximal existence
//!   times, singularity classification, and the surface minimal-model
//!   (blow-down) iteration, all in `BigRational` arithmetic so that every
//!   verdict is bit-reproducible;
//! * a **periodic-grid flow solver** ([`fields`], [`flow`], [`diagnostics`]):
//!   the scalar potential flow `φ̇ = log(det(ω̂_t + ∂∂̄φ)/Ω) − νφ` in one
//!   complex dimension on `[0,1)²`, with reference-metric families, explicit
//!   fourth-order time stepping, and a monitor suite that evaluates
//!   maximum-principle style estimates along trajectories.
//!
//! Grid kernels are data-parallel via `rayon` when the `parallel` feature
//! (default) is enabled; the sequential fallbacks are always compiled and are
//! compared against the parallel paths in `benches/field_ops.rs`.

pub mod classflow;
pub mod diagnostics;
pub mod fields;
pub mod flow;
pub mod lattice;
pub mod rational;
