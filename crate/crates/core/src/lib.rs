//! Local counterdiabatic (CD) driving on spin systems.
//!
//! The crate builds variational adiabatic gauge potentials (AGPs) in a
//! Lanczos-orthonormalized Krylov operator space, augments annealing paths
//! with extra controls built from even nested commutators, optimizes the
//! control amplitudes against final-state fidelity, and checks a six-pulse
//! Floquet realization of the augmented CD Hamiltonian.
//!
//! Everything is dense and exact-diagonalization sized: full chains up to a
//! dozen spins, symmetry sectors for larger chains, and the (N+1)-dimensional
//! Dicke space for the collective model.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agp;
pub mod basis;
pub mod dynamics;
pub mod error;
pub mod floquet;
pub mod iterative;
pub mod linalg;
pub mod models;
pub mod operator;
pub mod optimize;
pub mod spectra;
pub mod state;

pub use error::{Error, Result};

pub use num_complex::Complex64 as C64;

/// Dense complex matrix used for every operator.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex vector used for every state.
pub type CVector = nalgebra::DVector<C64>;

pub use agp::{
    action_from_lanczos, action_value, agp_gammas, assemble_agp, exact_agp, krylov_basis, lsq_agp_oracle,
    variational_agp, ActionReport, AgpSolution, KrylovData, LsqAgp, Termination,
};
pub use basis::{BasisMode, Parity, SpinBasis};
pub use dynamics::{
    evolve, evolve_cd, evolve_fast_limit, fidelity, ground_state, EvolutionConfig, EvolutionResult, StoredTrajectory,
    TrajectoryPoint, WeightPolicy,
};
pub use floquet::{
    first_order_alpha, floquet_period_propagator, magnus_coefficients, pulse_strengths, target_cd_hamiltonian,
    verify_floquet_match, FloquetPoint, MagnusCoefficients, PulseSequence,
};
pub use iterative::{iterative_gs_protocol, IterationRecord, IterativeOutcome};
pub use models::{
    annealing_hamiltonian, augmented_hamiltonian, build_controls, commutator_controls, first_commutator,
    hamiltonian_derivative, lambda_schedule, make_model, named_control, parity_resolved_ground_state, schedule_point,
    AnnealingProblem, ControlSet, ControlTerm, ModelKind, ModelSpec, NamedControl, Schedule, ScheduleMode,
};
pub use operator::{
    build_collective_ops, build_operator, op_inner, op_norm, project_to_sector, sector_isometry, Axis,
    InnerProductWeight, OperatorMatrix, PauliStringTerm,
};
pub use optimize::{
    beta_scan, optimize_controls, powell_minimize, BetaScan, OptimizationResult, OptimizationSpec, PowellOptions,
    ScanGrid,
};
pub use spectra::{fit_curve, gs_excitation_data, ExcitationDatum, SpectrumFit};
pub use state::StateVector;
