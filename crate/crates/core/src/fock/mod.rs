//! Truncated multimode bosonic Fock spaces, operators and states.

mod op;
mod space;
mod state;

pub use op::{annihilation, creation, embed, number, parity, total_number, LinearOp};
pub use space::FockSpace;
pub use state::{expectation, project_pair, DensityOp, Expect, Ket};
