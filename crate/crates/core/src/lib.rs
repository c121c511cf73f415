//! Model of a microfluidic molecular-communication link with a graphene
//! bioFET receiver.
//!
//! A transmitter releases rectangular concentration pulses of single-stranded
//! DNA into a pressure-driven microfluidic channel (on-off keying); a
//! functionalized graphene field-effect transistor at the channel floor
//! captures the ligands on immobilized probes and transduces surface binding
//! into a drain-source current change. The crate models that chain end to
//! end:
//!
//! * [`physchem`] — channel hydrodynamics (hydraulic diameter, mean velocity,
//!   Reynolds number) and receiver electrostatics (Debye screening, electric
//!   double layer and quantum capacitances, screened molecular charge, probe
//!   surface density).
//! * [`lambertw`] — principal branch of the Lambert W function, the special
//!   function both branches of the pulse response are expressed through.
//! * [`kinetics`] — Langmuir adsorption: equilibrium isotherm, occupancy, and
//!   exponential association/dissociation transients, plus the
//!   current-per-molecule transduction constant.
//! * [`pulse`] — the finite-pulse surface-binding response under combined
//!   transport and reaction limitation, written in closed form via Lambert W.
//! * [`fitting`] — damped least-squares parameter estimation (isotherm,
//!   kinetics, transport) with finite-difference Jacobians.
//! * [`txrx`] — the communication layer: seeded bit generation, pulse-train
//!   synthesis by linear superposition, noise injection, moving-mean
//!   filtering, decision sampling, difference detection, bit error rate.
//! * [`config`] / [`io`] — one flat TOML experiment configuration with units
//!   in the key names, CSV trace artifacts, and a reproducibility manifest.
//!
//! # Determinism
//!
//! Every stochastic step is seeded and every artifact writer is
//! timestamp-free, so a given configuration reproduces its output files byte
//! for byte. With the default `parallel` feature, time grids and seed sweeps
//! fan out across threads and are merged in deterministic order; results are
//! identical to the sequential fallback (`--no-default-features`).

pub mod config;
pub mod consts;
pub mod fitting;
pub mod io;
pub mod kinetics;
pub mod lambertw;
pub mod physchem;
pub mod pulse;
pub mod txrx;
pub mod units;
