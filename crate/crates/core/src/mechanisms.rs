//! The nine payment mechanisms and settlement construction.
//!
//! A settlement prices every ledger trade on the seller side and the buyer
//! side. Strongly budget balanced mechanisms use one price per trade for
//! both sides, so the intermediary holds nothing; VCG pays sellers more than
//! buyers pay (deficit), trade reduction and McAfee's reduction branch keep
//! a non-negative margin instead.

use crate::clearing::{
    allocate, determine, Determination, Perspective, PerspectiveChoice, TradeLedger,
};
use crate::orderbook::{build_book, OrderBook};
use crate::scalar::{wh_to_kwh, Scalar};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Mechanism {
    /// Midpoint of the matched reservation price and bid, per trade.
    Proposed,
    /// Every trade at the last winning bid.
    Uniform,
    /// Every trade at the matched buyer's own bid.
    PayAsBid,
    /// Every trade at the first losing bid.
    Vickrey,
    /// Every trade at the bid ranked just below the matched buyer's.
    Gsp,
    /// Every trade at the mean of all winning prices.
    Average,
    /// Sellers paid from the buyer boundary, buyers charged from the seller
    /// boundary; runs a deficit.
    Vcg,
    /// Drops the marginal winner pair and prices at the dropped boundary.
    TradeReduction,
    /// Mean of the first losing prices when it clears the boundary, else
    /// trade reduction.
    Mcafee,
}

impl Mechanism {
    /// Fixed reporting order.
    pub const ALL: [Mechanism; 9] = [
        Mechanism::Proposed,
        Mechanism::Uniform,
        Mechanism::PayAsBid,
        Mechanism::Vickrey,
        Mechanism::Gsp,
        Mechanism::Average,
        Mechanism::Vcg,
        Mechanism::TradeReduction,
        Mechanism::Mcafee,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Proposed => "proposed",
            Mechanism::Uniform => "uniform",
            Mechanism::PayAsBid => "pay_as_bid",
            Mechanism::Vickrey => "vickrey",
            Mechanism::Gsp => "gsp",
            Mechanism::Average => "average",
            Mechanism::Vcg => "vcg",
            Mechanism::TradeReduction => "trade_reduction",
            Mechanism::Mcafee => "mcafee",
        }
    }

    pub fn from_name(name: &str) -> Option<Mechanism> {
        Mechanism::ALL.into_iter().find(|m| m.name() == name)
    }

    /// Strong budget balance: both sides see the same price on every trade.
    /// `None` for McAfee, whose balance depends on the branch taken.
    pub fn is_sbb(self) -> Option<bool> {
        match self {
            Mechanism::Proposed
            | Mechanism::Uniform
            | Mechanism::PayAsBid
            | Mechanism::Vickrey
            | Mechanism::Gsp
            | Mechanism::Average => Some(true),
            Mechanism::Vcg | Mechanism::TradeReduction => Some(false),
            Mechanism::Mcafee => None,
        }
    }

    /// May settle fewer winners than determination admits.
    pub fn reduces_trade(self) -> bool {
        matches!(self, Mechanism::TradeReduction | Mechanism::Mcafee)
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One trade with its two-sided prices, currency per kWh.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PricedTrade<S> {
    pub seller: usize,
    pub buyer: usize,
    pub energy_wh: u64,
    /// What the seller receives per kWh.
    pub seller_price: S,
    /// What the buyer pays per kWh.
    pub buyer_price: S,
}

/// A fully priced market outcome. Per-player money vectors are indexed by
/// winner rank, aligned with the ledger and the id vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settlement<S> {
    pub mechanism: Mechanism,
    pub ledger: TradeLedger,
    /// Ids of the settled sellers, by rank.
    pub seller_ids: Vec<String>,
    pub buyer_ids: Vec<String>,
    pub trades: Vec<PricedTrade<S>>,
    /// Income above reservation per settled seller, currency.
    pub revenue_per_seller: Vec<S>,
    /// Cost below bid per settled buyer, currency.
    pub saving_per_buyer: Vec<S>,
    pub total_revenue: S,
    pub total_saving: S,
    /// Total revenue plus total saving.
    pub trc: S,
    /// What the intermediary keeps: positive = gain, negative = deficit.
    pub auctioneer_surplus: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SettleError {
    #[error("determination or ledger does not match this book (stale inputs)")]
    StaleInputs,
    #[error("price assignment does not align with the ledger trades")]
    MismatchedPrices,
}

/// Settlement-time choices. The perspective applies when a reducing
/// mechanism re-allocates over the shrunken winner set.
#[derive(Debug, Clone, Copy, Default)]
pub struct SettleOptions {
    pub perspective: PerspectiveChoice,
}

impl<S: Scalar> Settlement<S> {
    pub fn empty(mechanism: Mechanism, perspective: Perspective) -> Self {
        Settlement {
            mechanism,
            ledger: TradeLedger::empty(perspective),
            seller_ids: Vec::new(),
            buyer_ids: Vec::new(),
            trades: Vec::new(),
            revenue_per_seller: Vec::new(),
            saving_per_buyer: Vec::new(),
            total_revenue: S::zero(),
            total_saving: S::zero(),
            trc: S::zero(),
            auctioneer_surplus: S::zero(),
        }
    }

    /// Prices a ledger with an explicit per-trade (seller, buyer) price
    /// assignment and derives all money fields. Every mechanism reduces to
    /// this; it is public so tests can drive arbitrary assignments.
    pub fn with_trade_prices(
        mechanism: Mechanism,
        book: &OrderBook<S>,
        ledger: TradeLedger,
        prices: Vec<(S, S)>,
    ) -> Result<Self, SettleError> {
        let l = ledger.sold_per_seller.len();
        let k = ledger.bought_per_buyer.len();
        if l > book.n() || k > book.m() {
            return Err(SettleError::StaleInputs);
        }
        if prices.len() != ledger.trades.len() {
            return Err(SettleError::MismatchedPrices);
        }
        let mut revenue = vec![S::zero(); l];
        let mut saving = vec![S::zero(); k];
        let mut surplus = S::zero();
        let mut trades = Vec::with_capacity(ledger.trades.len());
        for (trade, (seller_price, buyer_price)) in ledger.trades.iter().zip(prices) {
            if trade.seller >= l || trade.buyer >= k {
                return Err(SettleError::StaleInputs);
            }
            let kwh: S = wh_to_kwh(trade.energy_wh);
            let reservation = &book.sellers()[trade.seller].price;
            let bid = &book.buyers()[trade.buyer].price;
            revenue[trade.seller] = revenue[trade.seller].clone()
                + (seller_price.clone() - reservation.clone()) * kwh.clone();
            saving[trade.buyer] =
                saving[trade.buyer].clone() + (bid.clone() - buyer_price.clone()) * kwh.clone();
            surplus = surplus + (buyer_price.clone() - seller_price.clone()) * kwh;
            trades.push(PricedTrade {
                seller: trade.seller,
                buyer: trade.buyer,
                energy_wh: trade.energy_wh,
                seller_price,
                buyer_price,
            });
        }
        let total_revenue = revenue.iter().fold(S::zero(), |a, v| a + v.clone());
        let total_saving = saving.iter().fold(S::zero(), |a, v| a + v.clone());
        let trc = total_revenue.clone() + total_saving.clone();
        Ok(Settlement {
            mechanism,
            seller_ids: book.sellers()[..l].iter().map(|o| o.seller_id.clone()).collect(),
            buyer_ids: book.buyers()[..k].iter().map(|b| b.buyer_id.clone()).collect(),
            ledger,
            trades,
            revenue_per_seller: revenue,
            saving_per_buyer: saving,
            total_revenue,
            total_saving,
            trc,
            auctioneer_surplus: surplus,
        })
    }
}

/// Midpoint price per ledger trade: mean of the matched reservation price
/// and bid, identical on both sides.
pub fn price_proposed<S: Scalar>(book: &OrderBook<S>, ledger: &TradeLedger) -> Vec<S> {
    let two = S::from_int(2);
    ledger
        .trades
        .iter()
        .map(|t| {
            (book.sellers()[t.seller].price.clone() + book.buyers()[t.buyer].price.clone())
                / two.clone()
        })
        .collect()
}

/// The last winning bid, applied to every trade on both sides.
pub fn price_uniform<S: Scalar>(det: &Determination<S>) -> Option<S> {
    det.boundary_buyer_price.clone()
}

/// The matched buyer's own bid per trade; buyers save nothing.
pub fn price_pay_as_bid<S: Scalar>(book: &OrderBook<S>, ledger: &TradeLedger) -> Vec<S> {
    ledger
        .trades
        .iter()
        .map(|t| book.buyers()[t.buyer].price.clone())
        .collect()
}

/// The first losing bid, applied to every trade; falls back to the last
/// winning bid when every bid won.
pub fn price_vickrey<S: Scalar>(det: &Determination<S>) -> Option<S> {
    if det.l == 0 {
        return None;
    }
    det.next_buyer_price
        .clone()
        .or_else(|| det.boundary_buyer_price.clone())
}

/// The bid ranked just below the matched buyer's, per trade; the last-ranked
/// buyer falls back to its own bid when no lower bid exists.
pub fn price_gsp<S: Scalar>(book: &OrderBook<S>, ledger: &TradeLedger) -> Vec<S> {
    ledger
        .trades
        .iter()
        .map(|t| {
            let next = t.buyer + 1;
            if next < book.m() {
                book.buyers()[next].price.clone()
            } else {
                book.buyers()[t.buyer].price.clone()
            }
        })
        .collect()
}

/// Grand mean of all winning reservation prices and bids.
pub fn price_average<S: Scalar>(book: &OrderBook<S>, det: &Determination<S>) -> Option<S> {
    if det.l == 0 {
        return None;
    }
    let sum = book.sellers()[..det.l]
        .iter()
        .map(|o| &o.price)
        .chain(book.buyers()[..det.k].iter().map(|b| &b.price))
        .fold(S::zero(), |a, p| a + p.clone());
    Some(sum / S::from_int((det.l + det.k) as i64))
}

/// Seller and buyer price levels. Sellers receive the smaller of the buyer
/// boundary and the next reservation price; buyers pay the larger of the
/// seller boundary and the next bid. Never profitable for the intermediary.
pub fn price_vcg<S: Scalar>(det: &Determination<S>) -> Option<(S, S)> {
    let boundary_seller = det.boundary_seller_price.clone()?;
    let boundary_buyer = det.boundary_buyer_price.clone()?;
    let seller_level = match &det.next_seller_price {
        Some(next) => boundary_buyer.clone().min(next.clone()),
        None => boundary_buyer.clone(),
    };
    let buyer_level = match &det.next_buyer_price {
        Some(next) => boundary_seller.clone().max(next.clone()),
        None => boundary_seller,
    };
    Some((seller_level, buyer_level))
}

/// Settles over the winner set shrunk by one on each side, priced at the
/// dropped boundary: sellers receive the old seller boundary, buyers pay the
/// old buyer boundary. Margin is never negative.
pub fn settle_trade_reduction<S: Scalar>(
    book: &OrderBook<S>,
    det: &Determination<S>,
    options: &SettleOptions,
) -> Result<Settlement<S>, SettleError> {
    if *det != determine(book) {
        return Err(SettleError::StaleInputs);
    }
    reduced_settlement(book, det, options, Mechanism::TradeReduction)
}

/// Prices all winners at the mean of the first losing prices when that mean
/// lies between the boundary prices (strongly balanced); otherwise settles
/// exactly like trade reduction.
pub fn settle_mcafee<S: Scalar>(
    book: &OrderBook<S>,
    det: &Determination<S>,
    ledger: &TradeLedger,
    options: &SettleOptions,
) -> Result<Settlement<S>, SettleError> {
    if *det != determine(book) || allocate(book, det, ledger.perspective).as_ref() != Ok(ledger) {
        return Err(SettleError::StaleInputs);
    }
    if det.l == 0 {
        return Ok(Settlement::empty(Mechanism::Mcafee, ledger.perspective));
    }
    if let (Some(next_seller), Some(next_buyer)) =
        (&det.next_seller_price, &det.next_buyer_price)
    {
        let p0 = (next_seller.clone() + next_buyer.clone()) / S::from_int(2);
        let lo = det.boundary_seller_price.as_ref().expect("winners exist");
        let hi = det.boundary_buyer_price.as_ref().expect("winners exist");
        if *lo <= p0 && p0 <= *hi {
            let prices = ledger.trades.iter().map(|_| (p0.clone(), p0.clone())).collect();
            return Settlement::with_trade_prices(
                Mechanism::Mcafee,
                book,
                ledger.clone(),
                prices,
            );
        }
    }
    reduced_settlement(book, det, options, Mechanism::Mcafee)
}

/// Re-clears the book restricted to the first l−1 sellers and k−1 buyers.
/// The restriction preserves sort order, so ranks still index the original
/// book's prefix.
fn reduced_settlement<S: Scalar>(
    book: &OrderBook<S>,
    det: &Determination<S>,
    options: &SettleOptions,
    mechanism: Mechanism,
) -> Result<Settlement<S>, SettleError> {
    if det.l <= 1 {
        let perspective = match options.perspective {
            PerspectiveChoice::Auto | PerspectiveChoice::Buyer => Perspective::Buyer,
            PerspectiveChoice::Seller => Perspective::Seller,
        };
        return Ok(Settlement::empty(mechanism, perspective));
    }
    let offers = book.sellers()[..det.l - 1].to_vec();
    let bids = book.buyers()[..det.k - 1].to_vec();
    let reduced = build_book(offers, bids).expect("prefix of a valid book stays valid");
    let reduced_det = determine(&reduced);
    // Every remaining pair still crosses, so the whole prefix wins again.
    debug_assert_eq!(reduced_det.l, det.l - 1);
    let perspective = options.perspective.resolve(&reduced_det);
    let ledger = allocate(&reduced, &reduced_det, perspective).expect("fresh determination");
    let seller_price = det.boundary_seller_price.clone().expect("winners exist");
    let buyer_price = det.boundary_buyer_price.clone().expect("winners exist");
    let prices = ledger
        .trades
        .iter()
        .map(|_| (seller_price.clone(), buyer_price.clone()))
        .collect();
    Settlement::with_trade_prices(mechanism, &reduced, ledger, prices)
}

/// Prices the ledger under the given mechanism. The determination and ledger
/// must come from this book; reducing mechanisms re-determine and
/// re-allocate internally over the shrunken winner set.
pub fn settle<S: Scalar>(
    book: &OrderBook<S>,
    det: &Determination<S>,
    ledger: &TradeLedger,
    mechanism: Mechanism,
    options: &SettleOptions,
) -> Result<Settlement<S>, SettleError> {
    if *det != determine(book) || allocate(book, det, ledger.perspective).as_ref() != Ok(ledger) {
        return Err(SettleError::StaleInputs);
    }
    if det.l == 0 {
        return Ok(Settlement::empty(mechanism, ledger.perspective));
    }
    let both = |price: S| (price.clone(), price);
    let prices: Vec<(S, S)> = match mechanism {
        Mechanism::Proposed => price_proposed(book, ledger).into_iter().map(both).collect(),
        Mechanism::Uniform => {
            let level = price_uniform(det).expect("winners exist");
            ledger.trades.iter().map(|_| both(level.clone())).collect()
        }
        Mechanism::PayAsBid => price_pay_as_bid(book, ledger).into_iter().map(both).collect(),
        Mechanism::Vickrey => {
            let level = price_vickrey(det).expect("winners exist");
            ledger.trades.iter().map(|_| both(level.clone())).collect()
        }
        Mechanism::Gsp => price_gsp(book, ledger).into_iter().map(both).collect(),
        Mechanism::Average => {
            let level = price_average(book, det).expect("winners exist");
            ledger.trades.iter().map(|_| both(level.clone())).collect()
        }
        Mechanism::Vcg => {
            let (seller_level, buyer_level) = price_vcg(det).expect("winners exist");
            ledger
                .trades
                .iter()
                .map(|_| (seller_level.clone(), buyer_level.clone()))
                .collect()
        }
        Mechanism::TradeReduction => return settle_trade_reduction(book, det, options),
        Mechanism::Mcafee => return settle_mcafee(book, det, ledger, options),
    };
    Settlement::with_trade_prices(mechanism, book, ledger.clone(), prices)
}
