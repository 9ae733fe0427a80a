//! Operator-algebra laboratory on `M_n(C)`.
//!
//! Observables are hermitian matrices; a measurement context is a maximal
//! abelian subalgebra given by a canonical orthonormal basis, and its
//! characters are the basis columns. A [`PhysicalState`] is a dispersion-free
//! valuation defined on a chain of contexts, extended one context at a time.
//! Quantum states act as probability measures over such valuations, and the
//! GNS construction recovers the defining representation from a vector state.

pub mod algebra;
pub mod cli;
pub mod context;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod gns;
pub mod models;
pub mod physical_state;
pub mod postulates;
pub mod random;
pub mod statistics;

pub use algebra::{
    commutator, make_unity, pauli_x, pauli_y, pauli_z, spectrum, spin_xz, AlgebraElement, CMatrix,
    CVector, Observable, SpectralPoint,
};
pub use context::{
    characters_of, context_from, context_of, rotated_context, Character, MeasurementContext,
};
pub use ensemble::{
    born_measure, expectation, quantum_state, sample_relevant_set, QuantumState, SamplingPlan,
    SpectralMeasure,
};
pub use error::{Error, Result};
pub use experiments::{run_chsh, run_epr_bohm, singlet_correlator, ChshAngles, ChshResult};
pub use gns::{gns_construct, state_norm, GnsReport};
pub use models::Model;
pub use physical_state::{extend_coordinates, realize_state, separate, PhysicalState, TrialCounter};
pub use postulates::{PostulateReport, PostulateSuite};
pub use statistics::{verify_quantum_average, ConvergenceReport};
