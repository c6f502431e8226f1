//! Revenue-aware proactive scheduling of live-streaming requests onto
//! crowdsourced edge servers, plus the baselines and a cycle-driven simulator.

pub mod analysis;
pub mod baselines;
pub mod flow;
pub mod harness;
pub mod lp;
pub mod predictor;
pub mod prescheduler;
pub mod revenue;
pub mod rng;
pub mod scheduler;
pub mod workload;
