//! Order types, validation, and the canonical order book.
//!
//! Sellers are sorted by ascending reservation price, buyers by descending
//! bid; ties break by submission sequence, then identifier, so the ordering
//! is total and the book deterministic for any input order.

use crate::scalar::{parse_decimal, DecimalError, Scalar};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Side {
    Sell,
    Buy,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Sell => "sell",
            Side::Buy => "buy",
        })
    }
}

/// Whether a participant accepts a partial fill at the margin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Participation {
    #[default]
    Fractional,
    NonFractional,
}

impl fmt::Display for Participation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Participation::Fractional => "fractional",
            Participation::NonFractional => "nonfractional",
        })
    }
}

/// Unvalidated order record as read from an input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawOrder {
    pub id: String,
    pub side: String,
    pub energy_wh: i64,
    pub price: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participation: Option<String>,
}

/// A validated sell order: `energy_wh` at reservation price `price` per kWh.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Offer<S> {
    pub seller_id: String,
    pub energy_wh: u64,
    pub price: S,
    pub participation: Participation,
    pub sequence: usize,
}

/// A validated buy order: `energy_wh` demanded at bid `price` per kWh.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bid<S> {
    pub buyer_id: String,
    pub energy_wh: u64,
    pub price: S,
    pub participation: Participation,
    pub sequence: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Order<S> {
    Sell(Offer<S>),
    Buy(Bid<S>),
}

impl<S> Order<S> {
    pub fn id(&self) -> &str {
        match self {
            Order::Sell(o) => &o.seller_id,
            Order::Buy(b) => &b.buyer_id,
        }
    }

    pub fn side(&self) -> Side {
        match self {
            Order::Sell(_) => Side::Sell,
            Order::Buy(_) => Side::Buy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrderError {
    #[error("order {id}: side must be \"sell\" or \"buy\", got {side:?}")]
    UnknownSide { id: String, side: String },
    #[error("order {id}: energy must be a positive number of Wh, got {energy_wh}")]
    NonPositiveQuantity { id: String, energy_wh: i64 },
    #[error("order {id}: negative price {price}")]
    NegativePrice { id: String, price: String },
    #[error("order {id}: malformed price {price:?} ({source})")]
    MalformedPrice {
        id: String,
        price: String,
        source: DecimalError,
    },
    #[error("order {id}: participation must be \"fractional\" or \"nonfractional\", got {participation:?}")]
    UnknownParticipation { id: String, participation: String },
    #[error("duplicate {side} id {id:?}")]
    DuplicateId { id: String, side: Side },
    #[error("total {side} energy overflows the book")]
    EnergyOverflow { side: Side },
}

/// Validates one raw record into a typed order. `sequence` is the submission
/// index used for tie-breaking.
pub fn validate_order<S: Scalar>(raw: &RawOrder, sequence: usize) -> Result<Order<S>, OrderError> {
    let id = raw.id.clone();
    let side = match raw.side.as_str() {
        "sell" => Side::Sell,
        "buy" => Side::Buy,
        other => {
            return Err(OrderError::UnknownSide {
                id,
                side: other.to_string(),
            })
        }
    };
    if raw.energy_wh <= 0 {
        return Err(OrderError::NonPositiveQuantity {
            id,
            energy_wh: raw.energy_wh,
        });
    }
    let price: S = match parse_decimal(&raw.price) {
        Ok(p) => p,
        Err(source) => {
            return Err(OrderError::MalformedPrice {
                id,
                price: raw.price.clone(),
                source,
            })
        }
    };
    if price < S::zero() {
        return Err(OrderError::NegativePrice {
            id,
            price: raw.price.clone(),
        });
    }
    let participation = match raw.participation.as_deref() {
        None => Participation::Fractional,
        Some("fractional") => Participation::Fractional,
        Some("nonfractional") => Participation::NonFractional,
        Some(other) => {
            return Err(OrderError::UnknownParticipation {
                id,
                participation: other.to_string(),
            })
        }
    };
    let energy_wh = raw.energy_wh as u64;
    Ok(match side {
        Side::Sell => Order::Sell(Offer {
            seller_id: id,
            energy_wh,
            price,
            participation,
            sequence,
        }),
        Side::Buy => Order::Buy(Bid {
            buyer_id: id,
            energy_wh,
            price,
            participation,
            sequence,
        }),
    })
}

/// Canonically ordered market: sellers by ascending price, buyers by
/// descending price. Construction is the only way to obtain one, so the
/// ordering invariants always hold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderBook<S> {
    sellers: Vec<Offer<S>>,
    buyers: Vec<Bid<S>>,
}

impl<S: Scalar> OrderBook<S> {
    pub fn sellers(&self) -> &[Offer<S>] {
        &self.sellers
    }

    pub fn buyers(&self) -> &[Bid<S>] {
        &self.buyers
    }

    /// Seller count.
    pub fn n(&self) -> usize {
        self.sellers.len()
    }

    /// Buyer count.
    pub fn m(&self) -> usize {
        self.buyers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sellers.is_empty() && self.buyers.is_empty()
    }

    pub fn seller_by_id(&self, id: &str) -> Option<&Offer<S>> {
        self.sellers.iter().find(|o| o.seller_id == id)
    }

    pub fn buyer_by_id(&self, id: &str) -> Option<&Bid<S>> {
        self.buyers.iter().find(|b| b.buyer_id == id)
    }
}

/// Builds the canonical book from individually valid orders.
pub fn build_book<S: Scalar>(
    offers: Vec<Offer<S>>,
    bids: Vec<Bid<S>>,
) -> Result<OrderBook<S>, OrderError> {
    let mut seen = BTreeSet::new();
    let mut total: u64 = 0;
    for offer in &offers {
        if !seen.insert(offer.seller_id.clone()) {
            return Err(OrderError::DuplicateId {
                id: offer.seller_id.clone(),
                side: Side::Sell,
            });
        }
        total = total
            .checked_add(offer.energy_wh)
            .ok_or(OrderError::EnergyOverflow { side: Side::Sell })?;
    }
    seen.clear();
    total = 0;
    for bid in &bids {
        if !seen.insert(bid.buyer_id.clone()) {
            return Err(OrderError::DuplicateId {
                id: bid.buyer_id.clone(),
                side: Side::Buy,
            });
        }
        total = total
            .checked_add(bid.energy_wh)
            .ok_or(OrderError::EnergyOverflow { side: Side::Buy })?;
    }
    let mut sellers = offers;
    let mut buyers = bids;
    sellers.sort_by(|a, b| {
        a.price
            .cmp(&b.price)
            .then_with(|| a.sequence.cmp(&b.sequence))
            .then_with(|| a.seller_id.cmp(&b.seller_id))
    });
    buyers.sort_by(|a, b| {
        b.price
            .cmp(&a.price)
            .then_with(|| a.sequence.cmp(&b.sequence))
            .then_with(|| a.buyer_id.cmp(&b.buyer_id))
    });
    Ok(OrderBook { sellers, buyers })
}

/// Splits mixed orders into (offers, bids) preserving encounter order.
pub fn split_orders<S>(orders: Vec<Order<S>>) -> (Vec<Offer<S>>, Vec<Bid<S>>) {
    let mut offers = Vec::new();
    let mut bids = Vec::new();
    for order in orders {
        match order {
            Order::Sell(o) => offers.push(o),
            Order::Buy(b) => bids.push(b),
        }
    }
    (offers, bids)
}
