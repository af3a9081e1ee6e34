//! CSMA with successive interference cancellation (CSMA-SIC).
//!
//! Two engines over the same network model:
//!
//! * an analytical one: staged SIC decoding ([`phy`]), feasible link sets and the
//!   capacity region ([`setspace`]), and the product-form Markov chain with its
//!   stationary law and link throughputs ([`ctmc`]);
//! * a continuous-time event-driven simulator of the distributed protocol
//!   ([`sim`]) with per-node channel/transmission tables ([`localstate`]) and
//!   gradient adaptation of the backoff rates ([`adapt`]).
//!
//! The math is generic over [`Real`] (`f32` or `f64`); the aliases below fix `f64`.

pub mod adapt;
pub mod cli;
pub mod ctmc;
pub mod localstate;
pub mod phy;
pub mod scalar;
pub mod setspace;
pub mod sim;

pub use scalar::Real;

pub type PhyConfig = phy::PhyConfig<f64>;
pub type Topology = phy::NetworkTopology<f64>;
pub type Channel = phy::ChannelMatrix<f64>;
pub type Rates = ctmc::RateParams<f64>;
pub type SteadyState = ctmc::SteadyState<f64>;
pub type CoeffTable = localstate::CoeffTable<f64>;
pub type TxTable = localstate::TxTable<f64>;

pub type Topology32 = phy::NetworkTopology<f32>;
pub type Channel32 = phy::ChannelMatrix<f32>;
pub type Rates32 = ctmc::RateParams<f32>;
