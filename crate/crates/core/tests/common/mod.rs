//! Shared fixtures for the integration suites.
#![allow(dead_code)]

use p2p_market::orderbook::{build_book, split_orders, validate_order, Order, RawOrder};
use p2p_market::{OrderBook, Rational};

/// Path to the checked-in sixteen-order sample market.
pub const SAMPLE_ORDERS: &str =
    concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/sample_orders.csv");

pub fn rational(text: &str) -> Rational {
    p2p_market::scalar::parse_decimal(text).unwrap()
}

pub fn raw(id: &str, side: &str, energy_wh: i64, price: &str) -> RawOrder {
    RawOrder {
        id: id.to_string(),
        side: side.to_string(),
        energy_wh,
        price: price.to_string(),
        participation: None,
    }
}

/// The worked sixteen-order market: eight sellers against eight buyers,
/// five winners per side, 700 Wh crossing.
pub fn reference_orders() -> Vec<Order<Rational>> {
    let specs = [
        ("S1", "sell", 200, "10.0"),
        ("S2", "sell", 150, "10.5"),
        ("S3", "sell", 100, "11.0"),
        ("S4", "sell", 150, "12.0"),
        ("S5", "sell", 100, "12.1"),
        ("S6", "sell", 100, "12.5"),
        ("S7", "sell", 150, "13.0"),
        ("S8", "sell", 100, "13.2"),
        ("B1", "buy", 150, "14.0"),
        ("B2", "buy", 150, "13.5"),
        ("B3", "buy", 200, "13.0"),
        ("B4", "buy", 100, "12.5"),
        ("B5", "buy", 100, "12.2"),
        ("B6", "buy", 100, "12.0"),
        ("B7", "buy", 100, "11.5"),
        ("B8", "buy", 100, "11.0"),
    ];
    specs
        .iter()
        .enumerate()
        .map(|(seq, (id, side, wh, price))| {
            validate_order(&raw(id, side, *wh, price), seq).expect("fixture orders are valid")
        })
        .collect()
}

pub fn reference_book() -> OrderBook {
    let (offers, bids) = split_orders(reference_orders());
    build_book(offers, bids).expect("fixture book builds")
}
