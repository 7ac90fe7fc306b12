mod env;
mod equivalence;
mod qtable;
mod trainer;

pub use env::TrainingEnv;
pub use equivalence::{masked_future_arrivals, masked_urgent_arrivals, EquivalenceClasses, EquivalenceRule, LossMask};
pub use qtable::{boltzmann_probabilities, boltzmann_select, interpolate_phi, q_update, QTable, TemperatureSchedule};
pub use trainer::{Algorithm, Checkpoint, CurvePoint, Environment, RngState, Step, TrainConfig, Trainer, TrainingOutcome};
