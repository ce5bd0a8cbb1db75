//! Performance indices computed from settlements.
//!
//! Revenue and cost saving come straight from the priced trades. The
//! satisfaction indices compare realized income (cost) against the player's
//! expectation at its submitted price, weighting by the full offered or
//! demanded quantity, so a partially served winner scores lower.

use crate::mechanisms::Settlement;
use crate::orderbook::OrderBook;
use crate::scalar::{wh_to_kwh, Scalar};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("{id:?} is not a settled seller of this market")]
    UnknownSeller { id: String },
    #[error("{id:?} is not a settled buyer of this market")]
    UnknownBuyer { id: String },
}

/// Income above reservation for one settled seller, currency.
pub fn revenue<S: Scalar>(settlement: &Settlement<S>, seller_id: &str) -> Result<S, MetricsError> {
    let rank = seller_rank(settlement, seller_id)?;
    Ok(settlement.revenue_per_seller[rank].clone())
}

/// Cost below bid for one settled buyer, currency.
pub fn cost_saving<S: Scalar>(
    settlement: &Settlement<S>,
    buyer_id: &str,
) -> Result<S, MetricsError> {
    let rank = buyer_rank(settlement, buyer_id)?;
    Ok(settlement.saving_per_buyer[rank].clone())
}

/// Total revenue plus total cost saving.
pub fn trc<S: Scalar>(settlement: &Settlement<S>) -> S {
    let total = settlement
        .revenue_per_seller
        .iter()
        .chain(settlement.saving_per_buyer.iter())
        .fold(S::zero(), |a, v| a + v.clone());
    debug_assert_eq!(total, settlement.trc);
    total
}

/// Matched-surplus closed form: Σ (bid − reservation) × kWh over the ledger.
/// Equals `trc` whenever both sides of every trade share one price.
pub fn trc_closed_form<S: Scalar>(book: &OrderBook<S>, ledger: &crate::clearing::TradeLedger) -> S {
    ledger.trades.iter().fold(S::zero(), |acc, t| {
        let spread =
            book.buyers()[t.buyer].price.clone() - book.sellers()[t.seller].price.clone();
        acc + spread * wh_to_kwh(t.energy_wh)
    })
}

/// What the intermediary keeps: Σ (buyer price − seller price) × kWh.
pub fn budget_balance<S: Scalar>(settlement: &Settlement<S>) -> S {
    let total = settlement.trades.iter().fold(S::zero(), |acc, t| {
        let margin = t.buyer_price.clone() - t.seller_price.clone();
        acc + margin * wh_to_kwh(t.energy_wh)
    });
    debug_assert_eq!(total, settlement.auctioneer_surplus);
    total
}

/// Seller satisfaction: realized income over the income expected from
/// selling the full offer at its reservation price. `Ok(None)` when the
/// reservation price is zero (no expectation to compare against).
pub fn ssi<S: Scalar>(
    settlement: &Settlement<S>,
    book: &OrderBook<S>,
    seller_id: &str,
) -> Result<Option<S>, MetricsError> {
    let rank = seller_rank(settlement, seller_id)?;
    let offer = book
        .seller_by_id(seller_id)
        .ok_or_else(|| MetricsError::UnknownSeller { id: seller_id.to_string() })?;
    if offer.price.is_zero() {
        return Ok(None);
    }
    let income = settlement
        .trades
        .iter()
        .filter(|t| t.seller == rank)
        .fold(S::zero(), |acc, t| {
            acc + t.seller_price.clone() * S::from_int(t.energy_wh as i64)
        });
    let expected = offer.price.clone() * S::from_int(offer.energy_wh as i64);
    Ok(Some(income / expected))
}

/// Buyer satisfaction: cost expected from filling the full demand at its own
/// bid over realized cost. `Ok(None)` when nothing was bought or the
/// realized cost is zero.
pub fn bsi<S: Scalar>(
    settlement: &Settlement<S>,
    book: &OrderBook<S>,
    buyer_id: &str,
) -> Result<Option<S>, MetricsError> {
    let rank = buyer_rank(settlement, buyer_id)?;
    let bid = book
        .buyer_by_id(buyer_id)
        .ok_or_else(|| MetricsError::UnknownBuyer { id: buyer_id.to_string() })?;
    let cost = settlement
        .trades
        .iter()
        .filter(|t| t.buyer == rank)
        .fold(S::zero(), |acc, t| {
            acc + t.buyer_price.clone() * S::from_int(t.energy_wh as i64)
        });
    if cost.is_zero() {
        return Ok(None);
    }
    let expected = bid.price.clone() * S::from_int(bid.energy_wh as i64);
    Ok(Some(expected / cost))
}

/// Quantity-weighted satisfaction sums, kept un-divided so results from
/// several blocks can be pooled before taking the ratio. Players whose index
/// is undefined are excluded together with their weight and head count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MtiParts<S> {
    pub buyer_weighted_sum: S,
    pub defined_buyers: u64,
    pub seller_weighted_sum: S,
    pub defined_sellers: u64,
}

impl<S: Scalar> Default for MtiParts<S> {
    fn default() -> Self {
        MtiParts {
            buyer_weighted_sum: S::zero(),
            defined_buyers: 0,
            seller_weighted_sum: S::zero(),
            defined_sellers: 0,
        }
    }
}

impl<S: Scalar> MtiParts<S> {
    pub fn absorb(&mut self, other: MtiParts<S>) {
        self.buyer_weighted_sum = self.buyer_weighted_sum.clone() + other.buyer_weighted_sum;
        self.defined_buyers += other.defined_buyers;
        self.seller_weighted_sum = self.seller_weighted_sum.clone() + other.seller_weighted_sum;
        self.defined_sellers += other.defined_sellers;
    }

    /// Mean buyer satisfaction over mean seller satisfaction, `None` when
    /// either side is empty or the seller mean is zero.
    pub fn ratio(&self) -> Option<S> {
        if self.defined_buyers == 0 || self.defined_sellers == 0 {
            return None;
        }
        let buyer_mean =
            self.buyer_weighted_sum.clone() / S::from_int(self.defined_buyers as i64);
        let seller_mean =
            self.seller_weighted_sum.clone() / S::from_int(self.defined_sellers as i64);
        if seller_mean.is_zero() {
            return None;
        }
        Some(buyer_mean / seller_mean)
    }
}

pub fn mti_parts<S: Scalar>(
    settlement: &Settlement<S>,
    book: &OrderBook<S>,
) -> Result<MtiParts<S>, MetricsError> {
    let mut parts: MtiParts<S> = MtiParts::default();
    for (rank, id) in settlement.seller_ids.iter().enumerate() {
        if let Some(value) = ssi(settlement, book, id)? {
            let weight = S::from_int(settlement.ledger.sold_per_seller[rank] as i64);
            parts.seller_weighted_sum = parts.seller_weighted_sum.clone() + value * weight;
            parts.defined_sellers += 1;
        }
    }
    for (rank, id) in settlement.buyer_ids.iter().enumerate() {
        if let Some(value) = bsi(settlement, book, id)? {
            let weight = S::from_int(settlement.ledger.bought_per_buyer[rank] as i64);
            parts.buyer_weighted_sum = parts.buyer_weighted_sum.clone() + value * weight;
            parts.defined_buyers += 1;
        }
    }
    Ok(parts)
}

/// Market tendency: above 1 the market favors buyers, below 1 sellers.
/// `None` when no energy traded or the seller-side mean is zero.
pub fn mti<S: Scalar>(
    settlement: &Settlement<S>,
    book: &OrderBook<S>,
) -> Result<Option<S>, MetricsError> {
    Ok(mti_parts(settlement, book)?.ratio())
}

/// Everything the market report carries about one settlement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarketIndices<S> {
    pub trc: S,
    pub total_revenue: S,
    pub total_saving: S,
    pub budget_surplus: S,
    pub mti: Option<S>,
    pub ssi: BTreeMap<String, Option<S>>,
    pub bsi: BTreeMap<String, Option<S>>,
}

pub fn compute_indices<S: Scalar>(
    settlement: &Settlement<S>,
    book: &OrderBook<S>,
) -> Result<MarketIndices<S>, MetricsError> {
    let mut ssi_map = BTreeMap::new();
    for id in &settlement.seller_ids {
        ssi_map.insert(id.clone(), ssi(settlement, book, id)?);
    }
    let mut bsi_map = BTreeMap::new();
    for id in &settlement.buyer_ids {
        bsi_map.insert(id.clone(), bsi(settlement, book, id)?);
    }
    Ok(MarketIndices {
        trc: trc(settlement),
        total_revenue: settlement.total_revenue.clone(),
        total_saving: settlement.total_saving.clone(),
        budget_surplus: budget_balance(settlement),
        mti: mti(settlement, book)?,
        ssi: ssi_map,
        bsi: bsi_map,
    })
}

fn seller_rank<S>(settlement: &Settlement<S>, id: &str) -> Result<usize, MetricsError> {
    settlement
        .seller_ids
        .iter()
        .position(|s| s == id)
        .ok_or_else(|| MetricsError::UnknownSeller { id: id.to_string() })
}

fn buyer_rank<S>(settlement: &Settlement<S>, id: &str) -> Result<usize, MetricsError> {
    settlement
        .buyer_ids
        .iter()
        .position(|b| b == id)
        .ok_or_else(|| MetricsError::UnknownBuyer { id: id.to_string() })
}
