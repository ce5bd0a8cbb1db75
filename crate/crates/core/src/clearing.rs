//! Winner determination at the breakeven point and greedy allocation.
//!
//! Determination keeps the largest prefix of the book in which the l-th
//! highest bid still meets the l-th lowest reservation price, so winner
//! counts are equal on both sides. Allocation then matches cheapest supply
//! to highest demand as a fractional knapsack, from whichever side of the
//! market is scarcer.

use crate::orderbook::{OrderBook, Participation};
use crate::scalar::Scalar;
use thiserror::Error;

/// Winner counts and the boundary/next prices of the sorted book.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Determination<S> {
    /// Winning seller count.
    pub l: usize,
    /// Winning buyer count; equal to `l` by construction.
    pub k: usize,
    /// Reservation price of the last winning seller, `None` when no trade.
    pub boundary_seller_price: Option<S>,
    /// Bid of the last winning buyer.
    pub boundary_buyer_price: Option<S>,
    /// Reservation price of the first losing seller, when one exists.
    pub next_seller_price: Option<S>,
    /// Bid of the first losing buyer, when one exists.
    pub next_buyer_price: Option<S>,
    /// Total energy offered by winners, Wh.
    pub total_supply: u64,
    /// Total energy demanded by winners, Wh.
    pub total_demand: u64,
}

impl<S> Determination<S> {
    pub fn is_empty(&self) -> bool {
        self.l == 0
    }
}

/// Finds the largest l with `bid[l] >= reservation[l]`. Zero when the best
/// bid does not meet the best offer; an empty market is a valid zero
/// determination.
pub fn determine<S: Scalar>(book: &OrderBook<S>) -> Determination<S> {
    let limit = book.n().min(book.m());
    let mut l = 0;
    while l < limit && book.buyers()[l].price >= book.sellers()[l].price {
        l += 1;
    }
    Determination {
        l,
        k: l,
        boundary_seller_price: (l > 0).then(|| book.sellers()[l - 1].price.clone()),
        boundary_buyer_price: (l > 0).then(|| book.buyers()[l - 1].price.clone()),
        next_seller_price: (l < book.n()).then(|| book.sellers()[l].price.clone()),
        next_buyer_price: (l < book.m()).then(|| book.buyers()[l].price.clone()),
        total_supply: book.sellers()[..l].iter().map(|o| o.energy_wh).sum(),
        total_demand: book.buyers()[..l].iter().map(|b| b.energy_wh).sum(),
    }
}

/// Which side's order drives the greedy fill.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Perspective {
    Buyer,
    Seller,
}

/// The scarcer side is served in full, so allocation runs from the other
/// side's viewpoint. Buyer perspective is canonical on equal totals (the two
/// ledgers coincide there).
pub fn select_perspective<S>(det: &Determination<S>) -> Perspective {
    if det.total_supply > det.total_demand {
        Perspective::Seller
    } else {
        Perspective::Buyer
    }
}

/// Caller preference for the allocation perspective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PerspectiveChoice {
    #[default]
    Auto,
    Buyer,
    Seller,
}

impl PerspectiveChoice {
    pub fn resolve<S>(self, det: &Determination<S>) -> Perspective {
        match self {
            PerspectiveChoice::Auto => select_perspective(det),
            PerspectiveChoice::Buyer => Perspective::Buyer,
            PerspectiveChoice::Seller => Perspective::Seller,
        }
    }
}

/// One matched quantity. `seller` and `buyer` are ranks into the sorted
/// book, not identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Trade {
    pub seller: usize,
    pub buyer: usize,
    pub energy_wh: u64,
}

/// The quantity matrix of an allocation, in sparse form. Trades are sorted
/// by seller rank, then buyer rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TradeLedger {
    pub perspective: Perspective,
    pub trades: Vec<Trade>,
    /// Energy sold per winning seller rank; length = winner count.
    pub sold_per_seller: Vec<u64>,
    /// Energy bought per winning buyer rank.
    pub bought_per_buyer: Vec<u64>,
    /// Winning supply left unsold, Wh.
    pub unsold: u64,
    /// Winning demand left unserved, Wh.
    pub unserved: u64,
}

impl TradeLedger {
    pub fn empty(perspective: Perspective) -> Self {
        TradeLedger {
            perspective,
            trades: Vec::new(),
            sold_per_seller: Vec::new(),
            bought_per_buyer: Vec::new(),
            unsold: 0,
            unserved: 0,
        }
    }

    pub fn total_traded_wh(&self) -> u64 {
        self.trades.iter().map(|t| t.energy_wh).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ClearingError {
    #[error("determination does not match this book (stale inputs)")]
    StaleDetermination,
}

/// Greedy fill of primary-side needs, in book order, from counter-side
/// capacity, in book order. The first primary participant whose need exceeds
/// the remaining counter total is marginal: fractional takes the remainder,
/// nonfractional takes nothing; every later primary takes nothing.
fn greedy_fill(
    primary: &[(u64, Participation)],
    counter: &[u64],
) -> (Vec<(usize, usize, u64)>, Vec<u64>, Vec<u64>) {
    let mut remaining: u64 = counter.iter().sum();
    let mut filled_primary = vec![0u64; primary.len()];
    let mut filled_counter = vec![0u64; counter.len()];
    let mut trades = Vec::new();
    let mut ci = 0usize;
    let mut counter_left = counter.first().copied().unwrap_or(0);
    for (pi, (need, participation)) in primary.iter().enumerate() {
        let marginal = *need > remaining;
        let take = if marginal {
            match participation {
                Participation::Fractional => remaining,
                Participation::NonFractional => 0,
            }
        } else {
            *need
        };
        filled_primary[pi] = take;
        remaining -= take;
        let mut want = take;
        while want > 0 {
            // counter_left > 0 here: capacity is reloaded eagerly below and
            // want never exceeds the remaining total.
            let lot = want.min(counter_left);
            trades.push((pi, ci, lot));
            filled_counter[ci] += lot;
            counter_left -= lot;
            want -= lot;
            if counter_left == 0 && ci + 1 < counter.len() {
                ci += 1;
                counter_left = counter[ci];
            }
        }
        if marginal {
            break;
        }
    }
    (trades, filled_primary, filled_counter)
}

/// Allocates winning energy greedily under the given perspective. The
/// determination must have been computed from this exact book.
pub fn allocate<S: Scalar>(
    book: &OrderBook<S>,
    det: &Determination<S>,
    perspective: Perspective,
) -> Result<TradeLedger, ClearingError> {
    if *det != determine(book) {
        return Err(ClearingError::StaleDetermination);
    }
    let sellers = &book.sellers()[..det.l];
    let buyers = &book.buyers()[..det.k];
    let (mut trades, sold, bought) = match perspective {
        Perspective::Buyer => {
            let needs: Vec<_> = buyers.iter().map(|b| (b.energy_wh, b.participation)).collect();
            let capacity: Vec<_> = sellers.iter().map(|o| o.energy_wh).collect();
            let (raw, bought, sold) = greedy_fill(&needs, &capacity);
            let trades = raw
                .into_iter()
                .map(|(j, i, wh)| Trade { seller: i, buyer: j, energy_wh: wh })
                .collect::<Vec<_>>();
            (trades, sold, bought)
        }
        Perspective::Seller => {
            let needs: Vec<_> = sellers.iter().map(|o| (o.energy_wh, o.participation)).collect();
            let capacity: Vec<_> = buyers.iter().map(|b| b.energy_wh).collect();
            let (raw, sold, bought) = greedy_fill(&needs, &capacity);
            let trades = raw
                .into_iter()
                .map(|(i, j, wh)| Trade { seller: i, buyer: j, energy_wh: wh })
                .collect::<Vec<_>>();
            (trades, sold, bought)
        }
    };
    trades.sort_by_key(|t| (t.seller, t.buyer));
    let traded: u64 = sold.iter().sum();
    Ok(TradeLedger {
        perspective,
        trades,
        sold_per_seller: sold,
        bought_per_buyer: bought,
        unsold: det.total_supply - traded,
        unserved: det.total_demand - traded,
    })
}
