//! Deterministic agent-based simulator of an energy-rationed economy.
//!
//! Actors produce, trade and transport goods that carry their embodied
//! energy with them. Every acquisition of embodied energy counts toward the
//! buyer's weekly total, which is taxed progressively above a tax-free
//! allowance; pollution is capped per player per week with tradable rights.
//! Regions carry their own regimes and regimes can be changed mid-run by
//! scheduled policy events.
//!
//! All state is integer-valued (kWh, pollution units, cents, weeks) so the
//! global energy journal balances exactly and runs are bit-reproducible.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! report emission live in the `energetics` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod agents;
pub mod digest;
pub mod engine;
pub mod error;
pub mod goods;
pub mod ids;
pub mod ledger;
pub mod market;
pub mod metrics;
pub mod policy;
pub mod production;
pub mod ratio;
pub mod scenario;
pub mod world;

pub(crate) mod serde_seq;

pub use agents::{Action, Strategy, StrategyKind};
pub use engine::{run, step_week, EngineAbort, Phase, RunReport};
pub use error::{Rejection, ScenarioError};
pub use goods::{GoodKind, ItemLot, LotKey};
pub use ids::{ActorId, DebtId, FacilityId, InnovationId, RegionId, SiteId};
pub use ledger::{ledger_balance, Account, EnergyDebt, LedgerEntry};
pub use metrics::MetricsRow;
pub use ratio::Ratio;
pub use scenario::Scenario;
pub use world::{new_world, World};
