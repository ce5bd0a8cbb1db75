//! Order files in, trades/report/comparison files out.
//!
//! Orders arrive as CSV (`id,side,energy_wh,price,participation`) or the
//! JSON equivalent. All emitted files are UTF-8 with deterministic content:
//! money rendered to 4 decimals, prices to 2, map keys sorted.

use crate::clearing::{Determination, TradeLedger};
use crate::mechanisms::Settlement;
use crate::metrics::MarketIndices;
use crate::orderbook::{validate_order, Order, OrderBook, RawOrder, Side};
use crate::runner::ComparisonRow;
use crate::scalar::Scalar;
use serde_json::{json, Value};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write as _};
use std::path::Path;
use thiserror::Error;

pub const MONEY_DECIMALS: u32 = 4;
pub const PRICE_DECIMALS: u32 = 2;

#[derive(Debug, Error)]
pub enum IoError {
    // Sources are not repeated in the messages; reporters walk the chain.
    #[error("cannot read {path}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: unsupported extension (expected .csv or .json)")]
    UnknownFormat { path: String },
    #[error("cannot parse {path}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: invalid JSON")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("order {id}: price has no finite decimal form")]
    UnrepresentablePrice { id: String },
}

/// One problem with one input record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// 0-based record index in the input file.
    pub record: usize,
    /// 1-based line number, when the format provides one.
    pub line: Option<u64>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "record {} (line {}): {}", self.record, line, self.message),
            None => write!(f, "record {}: {}", self.record, self.message),
        }
    }
}

/// Validated orders plus everything wrong with the rest of the file.
#[derive(Debug)]
pub struct LoadOutcome<S> {
    pub orders: Vec<Order<S>>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Reads and validates an order file, dispatching on the extension. Records
/// that fail validation become diagnostics; the rest load normally. The
/// submission sequence is the record index.
pub fn load_orders<S: Scalar>(path: &Path) -> Result<LoadOutcome<S>, IoError> {
    match extension_of(path)?.as_str() {
        "csv" => load_csv(path),
        "json" => load_json(path),
        _ => Err(IoError::UnknownFormat {
            path: path.display().to_string(),
        }),
    }
}

fn extension_of(path: &Path) -> Result<String, IoError> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .ok_or_else(|| IoError::UnknownFormat {
            path: path.display().to_string(),
        })
}

fn load_csv<S: Scalar>(path: &Path) -> Result<LoadOutcome<S>, IoError> {
    let file = File::open(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let wrap = |source: csv::Error| IoError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers().map_err(wrap)?.clone();
    let mut outcome = LoadOutcome {
        orders: Vec::new(),
        diagnostics: Vec::new(),
    };
    for (record, row) in reader.records().enumerate() {
        match row {
            Err(e) => {
                let line = e.position().map(|p| p.line());
                outcome.diagnostics.push(Diagnostic {
                    record,
                    line,
                    message: format!("malformed row: {e}"),
                });
            }
            Ok(row) => {
                let line = row.position().map(|p| p.line());
                match row.deserialize::<RawOrder>(Some(&headers)) {
                    Err(e) => outcome.diagnostics.push(Diagnostic {
                        record,
                        line,
                        message: format!("malformed row: {e}"),
                    }),
                    Ok(raw) => collect_order(&raw, record, line, &mut outcome),
                }
            }
        }
    }
    Ok(outcome)
}

fn load_json<S: Scalar>(path: &Path) -> Result<LoadOutcome<S>, IoError> {
    let file = File::open(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let values: Vec<Value> =
        serde_json::from_reader(BufReader::new(file)).map_err(|source| IoError::Json {
            path: path.display().to_string(),
            source,
        })?;
    let mut outcome = LoadOutcome {
        orders: Vec::new(),
        diagnostics: Vec::new(),
    };
    for (record, value) in values.into_iter().enumerate() {
        match serde_json::from_value::<RawOrder>(value) {
            Err(e) => outcome.diagnostics.push(Diagnostic {
                record,
                line: None,
                message: format!("malformed record: {e}"),
            }),
            Ok(raw) => collect_order(&raw, record, None, &mut outcome),
        }
    }
    Ok(outcome)
}

fn collect_order<S: Scalar>(
    raw: &RawOrder,
    record: usize,
    line: Option<u64>,
    outcome: &mut LoadOutcome<S>,
) {
    match validate_order(raw, record) {
        Err(e) => outcome.diagnostics.push(Diagnostic {
            record,
            line,
            message: e.to_string(),
        }),
        Ok(order) => {
            let duplicate = outcome
                .orders
                .iter()
                .any(|o| o.side() == order.side() && o.id() == order.id());
            if duplicate {
                outcome.diagnostics.push(Diagnostic {
                    record,
                    line,
                    message: format!("duplicate {} id {:?}", order.side(), order.id()),
                });
            } else {
                outcome.orders.push(order);
            }
        }
    }
}

/// Writes orders back out as CSV at full price precision, so a written book
/// re-parses to an identical one.
pub fn write_orders_csv<S: Scalar>(path: &Path, orders: &[Order<S>]) -> Result<(), IoError> {
    let wrap = |source: csv::Error| IoError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    w.write_record(["id", "side", "energy_wh", "price", "participation"])
        .map_err(wrap)?;
    for order in orders {
        let (id, side, wh, price, participation) = match order {
            Order::Sell(o) => (
                &o.seller_id,
                Side::Sell,
                o.energy_wh,
                &o.price,
                o.participation,
            ),
            Order::Buy(b) => (
                &b.buyer_id,
                Side::Buy,
                b.energy_wh,
                &b.price,
                b.participation,
            ),
        };
        let price = price
            .to_exact_decimal_string()
            .ok_or_else(|| IoError::UnrepresentablePrice { id: id.clone() })?;
        w.write_record([
            id.as_str(),
            &side.to_string(),
            &wh.to_string(),
            &price,
            &participation.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|source| IoError::Write {
        path: path.display().to_string(),
        source,
    })
}

/// Serializes a bare allocation: `seller_id,buyer_id,energy_wh`.
pub fn write_ledger_csv<S: Scalar, W: std::io::Write>(
    out: W,
    book: &OrderBook<S>,
    ledger: &TradeLedger,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["seller_id", "buyer_id", "energy_wh"])?;
    for trade in &ledger.trades {
        w.write_record([
            book.sellers()[trade.seller].seller_id.as_str(),
            book.buyers()[trade.buyer].buyer_id.as_str(),
            &trade.energy_wh.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Serializes priced trades: `seller_id,buyer_id,energy_wh,seller_price,buyer_price`.
pub fn write_trades_csv<S: Scalar, W: std::io::Write>(
    out: W,
    settlement: &Settlement<S>,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    trades_header(&mut w)?;
    trade_rows(&mut w, settlement)?;
    w.flush()?;
    Ok(())
}

/// Same file with the trades of several settlements under one header, in
/// the order given (one settlement per block).
pub fn write_trades_csv_file<'a, S, I>(path: &Path, settlements: I) -> Result<(), IoError>
where
    S: Scalar + 'a,
    I: IntoIterator<Item = &'a Settlement<S>>,
{
    let wrap = |source: csv::Error| IoError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    trades_header(&mut w).map_err(wrap)?;
    for settlement in settlements {
        trade_rows(&mut w, settlement).map_err(wrap)?;
    }
    w.flush().map_err(|source| IoError::Write {
        path: path.display().to_string(),
        source,
    })
}

fn trades_header<W: std::io::Write>(w: &mut csv::Writer<W>) -> csv::Result<()> {
    w.write_record([
        "seller_id",
        "buyer_id",
        "energy_wh",
        "seller_price",
        "buyer_price",
    ])
}

fn trade_rows<S: Scalar, W: std::io::Write>(
    w: &mut csv::Writer<W>,
    settlement: &Settlement<S>,
) -> csv::Result<()> {
    for trade in &settlement.trades {
        w.write_record([
            settlement.seller_ids[trade.seller].as_str(),
            settlement.buyer_ids[trade.buyer].as_str(),
            &trade.energy_wh.to_string(),
            &trade.seller_price.to_decimal_string(PRICE_DECIMALS),
            &trade.buyer_price.to_decimal_string(PRICE_DECIMALS),
        ])?;
    }
    Ok(())
}

fn money<S: Scalar>(v: &S) -> Value {
    Value::String(v.to_decimal_string(MONEY_DECIMALS))
}

fn price_value<S: Scalar>(v: &S) -> Value {
    Value::String(v.to_decimal_string(PRICE_DECIMALS))
}

fn optional_index<S: Scalar>(v: &Option<S>) -> Value {
    match v {
        Some(x) => Value::String(x.to_decimal_string(MONEY_DECIMALS)),
        None => Value::Null,
    }
}

fn index_map<S: Scalar>(map: &std::collections::BTreeMap<String, Option<S>>) -> Value {
    Value::Object(
        map.iter()
            .map(|(id, v)| (id.clone(), optional_index(v)))
            .collect(),
    )
}

fn money_map<S: Scalar>(ids: &[String], amounts: &[S]) -> Value {
    Value::Object(
        ids.iter()
            .zip(amounts)
            .map(|(id, v)| (id.clone(), money(v)))
            .collect(),
    )
}

/// One block's slice of the market report.
pub fn block_report<S: Scalar>(
    slot: &str,
    block: &str,
    determination: &Determination<S>,
    settlement: &Settlement<S>,
    indices: &MarketIndices<S>,
) -> Value {
    let trades: Vec<Value> = settlement
        .trades
        .iter()
        .map(|t| {
            json!({
                "seller_id": settlement.seller_ids[t.seller],
                "buyer_id": settlement.buyer_ids[t.buyer],
                "energy_wh": t.energy_wh,
                "seller_price": price_value(&t.seller_price),
                "buyer_price": price_value(&t.buyer_price),
            })
        })
        .collect();
    json!({
        "slot": slot,
        "block": block,
        "mechanism": settlement.mechanism.name(),
        "determination": {
            "L": determination.l,
            "K": determination.k,
            "r_L": determination.boundary_seller_price.as_ref().map(price_value).unwrap_or(Value::Null),
            "b_K": determination.boundary_buyer_price.as_ref().map(price_value).unwrap_or(Value::Null),
        },
        "trades": trades,
        "totals": {
            "revenue": money(&settlement.total_revenue),
            "saving": money(&settlement.total_saving),
            "trc": money(&settlement.trc),
            "surplus": money(&settlement.auctioneer_surplus),
        },
        "revenue": money_map(&settlement.seller_ids, &settlement.revenue_per_seller),
        "saving": money_map(&settlement.buyer_ids, &settlement.saving_per_buyer),
        "indices": {
            "trc": money(&indices.trc),
            "total_revenue": money(&indices.total_revenue),
            "total_saving": money(&indices.total_saving),
            "budget_surplus": money(&indices.budget_surplus),
            "mti": optional_index(&indices.mti),
            "ssi": index_map(&indices.ssi),
            "bsi": index_map(&indices.bsi),
        },
        "unsold": settlement.ledger.unsold,
        "unserved": settlement.ledger.unserved,
    })
}

/// Writes the report: a single object for one block, an array otherwise.
pub fn write_report_json(path: &Path, mut blocks: Vec<Value>) -> Result<(), IoError> {
    let document = if blocks.len() == 1 {
        blocks.remove(0)
    } else {
        Value::Array(blocks)
    };
    write_pretty_json(path, &document)
}

pub fn write_pretty_json(path: &Path, document: &Value) -> Result<(), IoError> {
    let wrap = |source: std::io::Error| IoError::Write {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(wrap)?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, document).map_err(|e| IoError::Write {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    })?;
    out.write_all(b"\n").map_err(wrap)?;
    out.flush().map_err(wrap)
}

/// `mechanism,total_revenue,total_saving,trc,budget_surplus,mti`; the mti
/// cell is empty when undefined.
pub fn write_comparison_csv<S: Scalar, W: std::io::Write>(
    out: W,
    rows: &[ComparisonRow<S>],
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "mechanism",
        "total_revenue",
        "total_saving",
        "trc",
        "budget_surplus",
        "mti",
    ])?;
    for row in rows {
        let mti = row
            .mti
            .as_ref()
            .map(|v| v.to_decimal_string(MONEY_DECIMALS))
            .unwrap_or_default();
        w.write_record([
            row.mechanism.name(),
            &row.total_revenue.to_decimal_string(MONEY_DECIMALS),
            &row.total_saving.to_decimal_string(MONEY_DECIMALS),
            &row.trc.to_decimal_string(MONEY_DECIMALS),
            &row.budget_surplus.to_decimal_string(MONEY_DECIMALS),
            &mti,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn comparison_json<S: Scalar>(rows: &[ComparisonRow<S>]) -> Value {
    Value::Array(
        rows.iter()
            .map(|row| {
                json!({
                    "mechanism": row.mechanism.name(),
                    "total_revenue": money(&row.total_revenue),
                    "total_saving": money(&row.total_saving),
                    "trc": money(&row.trc),
                    "budget_surplus": money(&row.budget_surplus),
                    "mti": optional_index(&row.mti),
                })
            })
            .collect(),
    )
}
