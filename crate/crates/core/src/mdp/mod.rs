//! Rolling-generation request scheduling as a finite MDP.
//!
//! At every decision epoch the receiver requests packets of the most urgent
//! generation (whose deadline closes the interval) and of the generations
//! after it. The state is the urgent generation's rank vector.

mod laws;
pub(crate) mod model;
mod policy;
mod solve;
mod spaces;
mod table;

pub use laws::{arrival_pmf, expected_reward, transition_pmf, ArrivalLaw, RewardModel};
pub use model::{LinkModel, ScenarioModel};
pub use policy::{Policy, PolicyEntry};
pub use solve::{evaluate_policy, value_iteration, ValueIteration};
pub use spaces::{compositions, ActionSpace, PacketType, RequestVector, StateSpace};
pub use table::{ActionChoice, TabularMdp};
pub use solve::q_values;
pub(crate) use solve::argmax;
