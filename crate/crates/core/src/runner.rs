//! Slot orchestration: config, block partitioning, policy screens, and the
//! all-mechanism comparison.

use crate::clearing::{allocate, determine, Determination, PerspectiveChoice, TradeLedger};
use crate::mechanisms::{settle, Mechanism, SettleError, SettleOptions, Settlement};
use crate::metrics::{compute_indices, mti_parts, MarketIndices, MetricsError, MtiParts};
use crate::orderbook::{build_book, split_orders, Order, OrderBook, OrderError, Side};
use crate::scalar::{parse_decimal, DecimalError, Scalar};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

/// Orders with no block assignment clear together under this name.
pub const DEFAULT_BLOCK: &str = "default";

/// Market-wide knobs. The feed-in tariff and grid price bound what rational
/// participants would accept from the regulated alternative; orders outside
/// those bounds still clear but are flagged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarketConfig<S> {
    pub fit: Option<S>,
    pub grid_price: Option<S>,
    /// Order id to block name. When present, unmapped orders are rejected.
    pub block_map: Option<BTreeMap<String, String>>,
    pub default_mechanism: Mechanism,
    pub perspective_override: PerspectiveChoice,
}

impl<S> Default for MarketConfig<S> {
    fn default() -> Self {
        MarketConfig {
            fit: None,
            grid_price: None,
            block_map: None,
            default_mechanism: Mechanism::Proposed,
            perspective_override: PerspectiveChoice::Auto,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    // Sources are not repeated in the messages; reporters walk the chain.
    #[error("cannot read {path}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config JSON")]
    Json(#[from] serde_json::Error),
    #[error("config {field}: bad price {text:?}")]
    Price {
        field: &'static str,
        text: String,
        #[source]
        source: DecimalError,
    },
    #[error("config: unknown mechanism {name:?}")]
    UnknownMechanism { name: String },
    #[error("config: unknown perspective {name:?} (expected auto, buyer or seller)")]
    UnknownPerspective { name: String },
    #[error("config: fit {fit} exceeds grid_price {grid}")]
    InvertedBounds { fit: String, grid: String },
}

/// Price fields accept either a JSON string or a plain number; strings keep
/// full precision.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PriceLiteral {
    Text(String),
    Number(serde_json::Number),
}

impl PriceLiteral {
    fn into_text(self) -> String {
        match self {
            PriceLiteral::Text(s) => s,
            PriceLiteral::Number(n) => n.to_string(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    fit: Option<PriceLiteral>,
    grid_price: Option<PriceLiteral>,
    block_map: Option<BTreeMap<String, String>>,
    default_mechanism: Option<String>,
    perspective_override: Option<String>,
}

pub fn parse_config<S: Scalar>(text: &str) -> Result<MarketConfig<S>, ConfigError> {
    let raw: RawConfig = serde_json::from_str(text)?;
    let parse_price = |field: &'static str, literal: PriceLiteral| {
        let text = literal.into_text();
        parse_decimal::<S>(&text).map_err(|source| ConfigError::Price { field, text, source })
    };
    let fit = raw.fit.map(|p| parse_price("fit", p)).transpose()?;
    let grid_price = raw
        .grid_price
        .map(|p| parse_price("grid_price", p))
        .transpose()?;
    if let (Some(f), Some(g)) = (&fit, &grid_price) {
        if f > g {
            return Err(ConfigError::InvertedBounds {
                fit: f.to_decimal_string(crate::io::PRICE_DECIMALS),
                grid: g.to_decimal_string(crate::io::PRICE_DECIMALS),
            });
        }
    }
    let default_mechanism = match raw.default_mechanism {
        None => Mechanism::Proposed,
        Some(name) => {
            Mechanism::from_name(&name).ok_or(ConfigError::UnknownMechanism { name })?
        }
    };
    let perspective_override = match raw.perspective_override.as_deref() {
        None | Some("auto") => PerspectiveChoice::Auto,
        Some("buyer") => PerspectiveChoice::Buyer,
        Some("seller") => PerspectiveChoice::Seller,
        Some(other) => {
            return Err(ConfigError::UnknownPerspective { name: other.to_string() })
        }
    };
    Ok(MarketConfig {
        fit,
        grid_price,
        block_map: raw.block_map,
        default_mechanism,
        perspective_override,
    })
}

pub fn load_config<S: Scalar>(path: &Path) -> Result<MarketConfig<S>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

/// An order kept out of the auction, with the reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub id: String,
    pub side: Side,
    pub reason: String,
}

/// Groups orders by block. Without a block map everything lands in
/// [`DEFAULT_BLOCK`]; with one, unmapped orders are rejected.
pub fn partition_blocks<S>(
    orders: Vec<Order<S>>,
    config: &MarketConfig<S>,
) -> (BTreeMap<String, Vec<Order<S>>>, Vec<Rejection>) {
    let mut blocks: BTreeMap<String, Vec<Order<S>>> = BTreeMap::new();
    let mut rejections = Vec::new();
    for order in orders {
        match &config.block_map {
            None => blocks.entry(DEFAULT_BLOCK.to_string()).or_default().push(order),
            Some(map) => match map.get(order.id()) {
                Some(block) => blocks.entry(block.clone()).or_default().push(order),
                None => rejections.push(Rejection {
                    id: order.id().to_string(),
                    side: order.side(),
                    reason: "no block assignment".to_string(),
                }),
            },
        }
    }
    (blocks, rejections)
}

fn screen<S: Scalar>(
    book: &OrderBook<S>,
    config: &MarketConfig<S>,
    block: &str,
    warnings: &mut Vec<String>,
) {
    if let Some(fit) = &config.fit {
        for offer in book.sellers() {
            if offer.price < *fit {
                warnings.push(format!(
                    "block {block}: offer {} at {} undercuts the feed-in tariff {}",
                    offer.seller_id,
                    offer.price.to_decimal_string(crate::io::PRICE_DECIMALS),
                    fit.to_decimal_string(crate::io::PRICE_DECIMALS),
                ));
            }
        }
    }
    if let Some(grid) = &config.grid_price {
        for bid in book.buyers() {
            if bid.price > *grid {
                warnings.push(format!(
                    "block {block}: bid {} at {} exceeds the grid price {}",
                    bid.buyer_id,
                    bid.price.to_decimal_string(crate::io::PRICE_DECIMALS),
                    grid.to_decimal_string(crate::io::PRICE_DECIMALS),
                ));
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Book(#[from] OrderError),
    #[error(transparent)]
    Clearing(#[from] crate::clearing::ClearingError),
    #[error(transparent)]
    Settle(#[from] SettleError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// One block, fully cleared and settled.
#[derive(Debug)]
pub struct BlockOutcome<S: Scalar> {
    pub book: OrderBook<S>,
    pub determination: Determination<S>,
    pub ledger: TradeLedger,
    pub settlement: Settlement<S>,
    pub indices: MarketIndices<S>,
}

/// A cleared slot: every block settled under one mechanism.
#[derive(Debug)]
pub struct SlotResult<S: Scalar> {
    pub slot: String,
    pub mechanism: Mechanism,
    pub blocks: BTreeMap<String, BlockOutcome<S>>,
    pub warnings: Vec<String>,
    pub rejections: Vec<Rejection>,
}

/// Clears and settles one slot. `mechanism` overrides the configured
/// default when present.
pub fn run_slot<S: Scalar>(
    orders: Vec<Order<S>>,
    config: &MarketConfig<S>,
    mechanism: Option<Mechanism>,
    slot: &str,
) -> Result<SlotResult<S>, RunnerError> {
    let mechanism = mechanism.unwrap_or(config.default_mechanism);
    let options = SettleOptions { perspective: config.perspective_override };
    let (blocks, rejections) = partition_blocks(orders, config);
    let mut warnings = Vec::new();
    let mut outcomes = BTreeMap::new();
    for (name, orders) in blocks {
        let (offers, bids) = split_orders(orders);
        let book = build_book(offers, bids)?;
        screen(&book, config, &name, &mut warnings);
        let determination = determine(&book);
        let ledger = allocate(&book, &determination, options.perspective.resolve(&determination))?;
        let settlement = settle(&book, &determination, &ledger, mechanism, &options)?;
        let indices = compute_indices(&settlement, &book)?;
        outcomes.insert(
            name,
            BlockOutcome { book, determination, ledger, settlement, indices },
        );
    }
    Ok(SlotResult {
        slot: slot.to_string(),
        mechanism,
        blocks: outcomes,
        warnings,
        rejections,
    })
}

/// One comparison line: totals summed over blocks, satisfaction pooled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparisonRow<S> {
    pub mechanism: Mechanism,
    pub total_revenue: S,
    pub total_saving: S,
    pub trc: S,
    pub budget_surplus: S,
    pub mti: Option<S>,
}

#[derive(Debug)]
pub struct Comparison<S> {
    pub rows: Vec<ComparisonRow<S>>,
    pub warnings: Vec<String>,
    pub rejections: Vec<Rejection>,
}

/// Settles the same books under every mechanism, in declaration order.
/// Books and base allocations are built once; reducing mechanisms shrink
/// their own copies internally.
pub fn compare_mechanisms<S: Scalar>(
    orders: Vec<Order<S>>,
    config: &MarketConfig<S>,
) -> Result<Comparison<S>, RunnerError> {
    let options = SettleOptions { perspective: config.perspective_override };
    let (blocks, rejections) = partition_blocks(orders, config);
    let mut warnings = Vec::new();
    let mut prepared = Vec::new();
    for (name, orders) in blocks {
        let (offers, bids) = split_orders(orders);
        let book = build_book(offers, bids)?;
        screen(&book, config, &name, &mut warnings);
        let determination = determine(&book);
        let ledger = allocate(&book, &determination, options.perspective.resolve(&determination))?;
        prepared.push((book, determination, ledger));
    }
    let mut rows = Vec::with_capacity(Mechanism::ALL.len());
    for mechanism in Mechanism::ALL {
        let mut row = ComparisonRow {
            mechanism,
            total_revenue: S::zero(),
            total_saving: S::zero(),
            trc: S::zero(),
            budget_surplus: S::zero(),
            mti: None,
        };
        let mut parts = MtiParts::default();
        for (book, determination, ledger) in &prepared {
            let settlement = settle(book, determination, ledger, mechanism, &options)?;
            row.total_revenue = row.total_revenue + settlement.total_revenue.clone();
            row.total_saving = row.total_saving + settlement.total_saving.clone();
            row.trc = row.trc + settlement.trc.clone();
            row.budget_surplus = row.budget_surplus + settlement.auctioneer_surplus.clone();
            parts.absorb(mti_parts(&settlement, book)?);
        }
        row.mti = parts.ratio();
        rows.push(row);
    }
    Ok(Comparison { rows, warnings, rejections })
}
