//! Deterministic clearing engine for two-sided peer-to-peer energy auctions.
//!
//! Sealed offers and bids are sorted into a canonical book, winners are
//! found at the breakeven point, energy is allocated greedily, and the
//! resulting trades are priced under one of nine payment mechanisms. All
//! money is exact rational arithmetic; identical inputs produce
//! byte-identical outputs.
//!
//! The engine is generic over the scalar type. [`Rational`] (arbitrary
//! precision) is the default; [`Rational64`] and [`Rational128`] trade
//! range for speed on bounded inputs.

pub mod clearing;
pub mod io;
pub mod mechanisms;
pub mod metrics;
pub mod orderbook;
pub mod runner;
pub mod scalar;

pub use clearing::{Perspective, PerspectiveChoice};
pub use mechanisms::Mechanism;
pub use orderbook::{Participation, RawOrder, Side};
pub use scalar::Scalar;

/// Default scalar: arbitrary-precision rational, never overflows.
pub type Rational = num_rational::BigRational;
/// Machine-word rational; fast, panics on overflow.
pub type Rational64 = num_rational::Ratio<i64>;
/// Wider fixed-size rational.
pub type Rational128 = num_rational::Ratio<i128>;

/// Engine types over the default scalar.
pub type Offer = orderbook::Offer<Rational>;
pub type Bid = orderbook::Bid<Rational>;
pub type Order = orderbook::Order<Rational>;
pub type OrderBook = orderbook::OrderBook<Rational>;
pub type Determination = clearing::Determination<Rational>;
pub type TradeLedger = clearing::TradeLedger;
pub type Settlement = mechanisms::Settlement<Rational>;
pub type MarketIndices = metrics::MarketIndices<Rational>;
pub type MarketConfig = runner::MarketConfig<Rational>;
