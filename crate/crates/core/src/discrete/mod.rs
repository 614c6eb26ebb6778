//! Exact repeated-interaction dynamics with indirect measurement: the
//! interaction unitary and its blocks, the Kraus channel, the two
//! conditional maps and the Markov-chain trajectory engine.

mod channel;
mod trajectory;

pub use crate::model::{ModelSpec, ReferenceState};
pub use channel::{
    build_total_hamiltonian, build_unitary, kraus_channel, measurement_superops, InteractionUnitary, KrausChannel,
    MeasurementSuperops,
};
pub use trajectory::{
    run_discrete, step_density, step_density_with, step_pure, step_pure_with, DiscreteModel, DiscreteState,
    DiscreteTrajectory, InitialState, Step, MIN_BRANCH_PROBABILITY, NORMALIZATION_TOL,
};
