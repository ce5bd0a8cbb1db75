//! Acceptance gate: one test per criterion, each printing a verdict line.
//! Run with `--nocapture` to see the lines for passing criteria too.

mod common;

use common::{rational, reference_book, SAMPLE_ORDERS};
use num_bigint::BigInt;
use p2p_market::clearing::{allocate, determine, select_perspective, Perspective, TradeLedger};
use p2p_market::mechanisms::{settle, SettleOptions};
use p2p_market::metrics::{mti, trc_closed_form};
use p2p_market::orderbook::{build_book, Bid, Offer, OrderBook as GenericBook, Participation};
use p2p_market::{Mechanism, OrderBook, Rational, Scalar, Settlement};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::process::Command;

fn verdict(criterion: u32, description: &str, pass: bool) {
    let tag = if pass { "[PASS]" } else { "[FAIL]" };
    println!("{tag} criterion {criterion}: {description}");
    assert!(pass, "criterion {criterion}: {description}");
}

fn cents(c: i64) -> Rational {
    Rational::new(BigInt::from(c), BigInt::from(100))
}

fn reference_ledger(book: &OrderBook) -> TradeLedger {
    let det = determine(book);
    allocate(book, &det, select_perspective(&det)).unwrap()
}

fn settle_reference(mechanism: Mechanism) -> Settlement {
    let book = reference_book();
    let det = determine(&book);
    let ledger = reference_ledger(&book);
    settle(&book, &det, &ledger, mechanism, &SettleOptions::default()).unwrap()
}

#[test]
fn criterion_01_breakeven_determination() {
    let book = reference_book();
    let det = determine(&book);
    let pass = det.l == 5
        && det.k == 5
        && det.boundary_seller_price == Some(rational("12.1"))
        && det.boundary_buyer_price == Some(rational("12.2"))
        && det.total_supply == 700
        && det.total_demand == 700;
    verdict(
        1,
        "five winners per side, boundary prices 12.10 and 12.20",
        pass,
    );
}

#[test]
fn criterion_02_greedy_allocation() {
    let book = reference_book();
    let ledger = reference_ledger(&book);
    let got: Vec<(&str, &str, u64)> = ledger
        .trades
        .iter()
        .map(|t| {
            (
                book.sellers()[t.seller].seller_id.as_str(),
                book.buyers()[t.buyer].buyer_id.as_str(),
                t.energy_wh,
            )
        })
        .collect();
    let want = vec![
        ("S1", "B1", 150),
        ("S1", "B2", 50),
        ("S2", "B2", 100),
        ("S2", "B3", 50),
        ("S3", "B3", 100),
        ("S4", "B3", 50),
        ("S4", "B4", 100),
        ("S5", "B5", 100),
    ];
    let pass = got == want && ledger.unsold == 0 && ledger.unserved == 0;
    verdict(
        2,
        "the eight-trade ledger with nothing unsold or unserved",
        pass,
    );
}

#[test]
fn criterion_03_midpoint_prices() {
    let settlement = settle_reference(Mechanism::Proposed);
    let want: Vec<Rational> = ["12.00", "11.75", "12.00", "11.75", "12.00", "12.50", "12.25", "12.15"]
        .iter()
        .map(|s| rational(s))
        .collect();
    let pass = settlement.trades.len() == want.len()
        && settlement
            .trades
            .iter()
            .zip(&want)
            .all(|(t, w)| t.seller_price == *w && t.buyer_price == *w);
    verdict(3, "per-trade midpoint prices match the worked example", pass);
}

#[test]
fn criterion_04_mechanism_price_levels() {
    let book = reference_book();
    let uniform = settle_reference(Mechanism::Uniform);
    let mut pass = uniform.trades.len() == 8;
    pass &= uniform
        .trades
        .iter()
        .all(|t| t.seller_price == rational("12.2") && t.buyer_price == rational("12.2"));

    let vickrey = settle_reference(Mechanism::Vickrey);
    pass &= vickrey
        .trades
        .iter()
        .all(|t| t.seller_price == rational("12.0") && t.buyer_price == rational("12.0"));

    let average = settle_reference(Mechanism::Average);
    pass &= average
        .trades
        .iter()
        .all(|t| t.seller_price == rational("12.08") && t.buyer_price == rational("12.08"));

    let vcg = settle_reference(Mechanism::Vcg);
    pass &= vcg
        .trades
        .iter()
        .all(|t| t.seller_price == rational("12.2") && t.buyer_price == rational("12.1"));

    let reduction = settle_reference(Mechanism::TradeReduction);
    pass &= reduction.seller_ids.len() == 4
        && reduction.buyer_ids.len() == 4
        && reduction.trades.len() == 7
        && reduction
            .trades
            .iter()
            .all(|t| t.seller_price == rational("12.1") && t.buyer_price == rational("12.2"))
        && reduction.ledger.total_traded_wh() == 600;

    let pay_as_bid = settle_reference(Mechanism::PayAsBid);
    let bid_levels = ["14.0", "13.5", "13.0", "12.5", "12.2"];
    pass &= pay_as_bid.trades.iter().all(|t| {
        let own_bid = &book.buyers()[t.buyer].price;
        t.seller_price == *own_bid
            && t.buyer_price == *own_bid
            && *own_bid == rational(bid_levels[t.buyer])
    });

    let gsp = settle_reference(Mechanism::Gsp);
    let next_levels = ["13.5", "13.0", "12.5", "12.2", "12.0"];
    pass &= gsp.trades.iter().all(|t| {
        t.seller_price == rational(next_levels[t.buyer])
            && t.buyer_price == rational(next_levels[t.buyer])
    });

    let mcafee = settle_reference(Mechanism::Mcafee);
    pass &= mcafee.trades == reduction.trades
        && mcafee.ledger == reduction.ledger
        && mcafee.seller_ids == reduction.seller_ids
        && mcafee.buyer_ids == reduction.buyer_ids
        && mcafee.total_revenue == reduction.total_revenue
        && mcafee.total_saving == reduction.total_saving;

    verdict(
        4,
        "uniform 12.20, vickrey 12.00, average 12.08, vcg 12.20/12.10, reduction 12.10/12.20 over 4+4 traders, pay-as-bid and next-bid schedules, mcafee equal to reduction",
        pass,
    );
}

#[test]
fn criterion_05_money_totals() {
    let all: Vec<Settlement> = Mechanism::ALL.iter().map(|m| settle_reference(*m)).collect();
    let by = |m: Mechanism| all.iter().find(|s| s.mechanism == m).unwrap();

    let proposed = by(Mechanism::Proposed);
    let mut pass = proposed.total_revenue == rational("0.755")
        && proposed.total_saving == rational("0.755")
        && proposed.trc == rational("1.510");

    for m in [
        Mechanism::Proposed,
        Mechanism::Uniform,
        Mechanism::PayAsBid,
        Mechanism::Vickrey,
        Mechanism::Gsp,
        Mechanism::Average,
    ] {
        pass &= by(m).trc == rational("1.510");
    }

    let vcg = by(Mechanism::Vcg);
    let reduction = by(Mechanism::TradeReduction);
    let mcafee = by(Mechanism::Mcafee);
    pass &= vcg.trc == rational("1.580")
        && reduction.trc == rational("1.440")
        && mcafee.trc == rational("1.440");
    pass &= all.iter().all(|s| s.trc <= vcg.trc)
        && all.iter().all(|s| s.trc >= reduction.trc);

    pass &= by(Mechanism::PayAsBid).total_saving == Rational::from_integer(0.into());
    pass &= vcg.auctioneer_surplus == rational("-0.070")
        && reduction.auctioneer_surplus == rational("0.060");

    verdict(
        5,
        "totals 0.755/0.755/1.510 under midpoint pricing, 1.510 for every balanced mechanism, 1.580 vcg maximum, 1.440 reduction minimum, surpluses -0.070 and +0.060",
        pass,
    );
}

fn random_market(
    rng: &mut ChaCha8Rng,
    max_side: usize,
    max_wh: u64,
    mixed_participation: bool,
) -> OrderBook {
    let n = rng.random_range(1..=max_side);
    let m = rng.random_range(1..=max_side);
    let pick = |rng: &mut ChaCha8Rng| {
        if mixed_participation && rng.random_bool(0.2) {
            Participation::NonFractional
        } else {
            Participation::Fractional
        }
    };
    let offers = (0..n)
        .map(|i| Offer {
            seller_id: format!("S{i}"),
            energy_wh: rng.random_range(1..=max_wh),
            price: cents(rng.random_range(0..=2000)),
            participation: pick(rng),
            sequence: i,
        })
        .collect();
    let bids = (0..m)
        .map(|j| Bid {
            buyer_id: format!("B{j}"),
            energy_wh: rng.random_range(1..=max_wh),
            price: cents(rng.random_range(0..=2000)),
            participation: pick(rng),
            sequence: n + j,
        })
        .collect();
    build_book(offers, bids).unwrap()
}

#[test]
fn criterion_06_balance_and_rationality_hold_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut crossing = 0u32;
    for _ in 0..1000 {
        let book = random_market(&mut rng, 20, 500, true);
        let det = determine(&book);
        let ledger = allocate(&book, &det, select_perspective(&det)).unwrap();
        let settlement =
            settle(&book, &det, &ledger, Mechanism::Proposed, &SettleOptions::default()).unwrap();
        assert_eq!(
            settlement.total_revenue, settlement.total_saving,
            "seller revenue must equal buyer saving under midpoint pricing",
        );
        for trade in &settlement.trades {
            crossing += 1;
            let reservation = &book.sellers()[trade.seller].price;
            let bid = &book.buyers()[trade.buyer].price;
            assert_eq!(trade.seller_price, trade.buyer_price);
            assert!(*reservation <= trade.seller_price && trade.seller_price <= *bid);
        }
    }
    verdict(
        6,
        &format!(
            "midpoint totals balanced and every price within its own spread on 1000 random markets ({crossing} trades)"
        ),
        crossing > 0,
    );
}

#[test]
fn criterion_07_trc_is_price_assignment_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let book = random_market(&mut rng, 10, 300, true);
        let det = determine(&book);
        let ledger = allocate(&book, &det, select_perspective(&det)).unwrap();
        let closed_form = trc_closed_form(&book, &ledger);
        for _ in 0..2 {
            let prices: Vec<(Rational, Rational)> = ledger
                .trades
                .iter()
                .map(|_| {
                    let level = cents(rng.random_range(0..=3000));
                    (level.clone(), level)
                })
                .collect();
            let settlement = Settlement::with_trade_prices(
                Mechanism::Proposed,
                &book,
                ledger.clone(),
                prices,
            )
            .unwrap();
            assert_eq!(settlement.trc, closed_form);
            assert_eq!(settlement.auctioneer_surplus, Rational::from_integer(0.into()));
        }
    }
    verdict(
        7,
        "total gain equals the closed form under arbitrary balanced price assignments on 1000 random markets",
        true,
    );
}

#[test]
fn criterion_08_market_tendency() {
    let book = reference_book();
    let values: Vec<(Mechanism, Rational)> = Mechanism::ALL
        .iter()
        .map(|m| {
            let settlement = settle_reference(*m);
            let value = mti(&settlement, &book).unwrap().expect("market traded");
            (*m, value)
        })
        .collect();
    let get = |m: Mechanism| values.iter().find(|(x, _)| *x == m).unwrap().1.clone();
    let one = Rational::from_integer(1.into());
    let distance = |v: &Rational| {
        let d = v.clone() - one.clone();
        if d < Rational::from_integer(0.into()) { -d } else { d }
    };

    let proposed = get(Mechanism::Proposed);
    verdict(
        8,
        "tendency of the midpoint mechanism lies within [0.98, 1.02]",
        rational("0.98") <= proposed && proposed <= rational("1.02"),
    );

    let pay_as_bid = get(Mechanism::PayAsBid);
    verdict(
        8,
        "pay-as-bid has the minimum tendency over all nine mechanisms",
        values.iter().all(|(_, v)| pay_as_bid <= *v),
    );

    let vickrey = get(Mechanism::Vickrey);
    verdict(
        8,
        "vickrey has the maximum tendency over all nine mechanisms",
        values.iter().all(|(_, v)| vickrey >= *v),
    );

    // Known red: the uniform-at-next-bid level lands nearer to 1 than the
    // midpoint rule on this market (0.9955 versus 0.9874), so the strictness
    // clause cannot hold. Kept as specified rather than weakened.
    let strictly_nearest = values
        .iter()
        .filter(|(m, _)| m.is_sbb() == Some(true) && *m != Mechanism::Proposed)
        .all(|(_, v)| distance(&proposed) < distance(v));
    verdict(
        8,
        &format!(
            "midpoint tendency strictly nearest to 1 among balanced mechanisms (proposed {}, vickrey {})",
            proposed.to_decimal_string(4),
            vickrey.to_decimal_string(4),
        ),
        strictly_nearest,
    );
}

#[test]
fn criterion_09_perspectives_agree_on_balanced_markets() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let book = random_market(&mut rng, 12, 200, true);
        let det = determine(&book);
        let book = if det.total_supply == det.total_demand {
            book
        } else {
            // Quantities do not steer the breakeven scan, so topping up the
            // last winner on the lighter side balances the winner set while
            // keeping the same winners.
            let mut offers = book.sellers().to_vec();
            let mut bids = book.buyers().to_vec();
            if det.total_supply > det.total_demand {
                bids[det.k - 1].energy_wh += det.total_supply - det.total_demand;
            } else {
                offers[det.l - 1].energy_wh += det.total_demand - det.total_supply;
            }
            build_book(offers, bids).unwrap()
        };
        let det = determine(&book);
        assert_eq!(det.total_supply, det.total_demand);
        let from_buyers = allocate(&book, &det, Perspective::Buyer).unwrap();
        let from_sellers = allocate(&book, &det, Perspective::Seller).unwrap();
        assert_eq!(from_buyers.trades, from_sellers.trades);
        assert_eq!(from_buyers.sold_per_seller, from_sellers.sold_per_seller);
        assert_eq!(from_buyers.bought_per_buyer, from_sellers.bought_per_buyer);
        assert_eq!(from_buyers.unsold, 0);
        assert_eq!(from_buyers.unserved, 0);
    }
    verdict(
        9,
        "buyer- and seller-perspective ledgers identical on 1000 balanced random markets",
        true,
    );
}

type TinyBook = GenericBook<p2p_market::Rational64>;

fn tiny_book(sellers: &[(i64, u64)], buyers: &[(i64, u64)]) -> TinyBook {
    let offers = sellers
        .iter()
        .enumerate()
        .map(|(i, (price, wh))| Offer {
            seller_id: format!("S{i}"),
            energy_wh: *wh,
            price: p2p_market::Rational64::from_integer(*price),
            participation: Participation::Fractional,
            sequence: i,
        })
        .collect();
    let bids = buyers
        .iter()
        .enumerate()
        .map(|(j, (price, wh))| Bid {
            buyer_id: format!("B{j}"),
            energy_wh: *wh,
            price: p2p_market::Rational64::from_integer(*price),
            participation: Participation::Fractional,
            sequence: sellers.len() + j,
        })
        .collect();
    build_book(offers, bids).unwrap()
}

/// Exhaustive search over integral winner-set allocations, cell by cell.
fn best_allocation_value(sellers: &[(i64, u64)], buyers: &[(i64, u64)]) -> i64 {
    fn dfs(
        cell: usize,
        sellers: &[(i64, u64)],
        buyers: &[(i64, u64)],
        row_left: &mut [i64],
        col_left: &mut [i64],
    ) -> i64 {
        if cell == sellers.len() * buyers.len() {
            return 0;
        }
        let i = cell / buyers.len();
        let j = cell % buyers.len();
        let weight = buyers[j].0 - sellers[i].0;
        let mut best = i64::MIN;
        for amount in 0..=row_left[i].min(col_left[j]) {
            row_left[i] -= amount;
            col_left[j] -= amount;
            let rest = dfs(cell + 1, sellers, buyers, row_left, col_left);
            row_left[i] += amount;
            col_left[j] += amount;
            best = best.max(weight * amount + rest);
        }
        best
    }
    let mut row_left: Vec<i64> = sellers.iter().map(|(_, wh)| *wh as i64).collect();
    let mut col_left: Vec<i64> = buyers.iter().map(|(_, wh)| *wh as i64).collect();
    dfs(0, sellers, buyers, &mut row_left, &mut col_left)
}

fn greedy_matches_brute_force(sellers: &[(i64, u64)], buyers: &[(i64, u64)]) {
    let book = tiny_book(sellers, buyers);
    let det = determine(&book);
    let ledger = allocate(&book, &det, select_perspective(&det)).unwrap();
    let value = trc_closed_form(&book, &ledger);
    let winner_sellers: Vec<(i64, u64)> = book.sellers()[..det.l]
        .iter()
        .map(|o| (o.price.to_integer(), o.energy_wh))
        .collect();
    let winner_buyers: Vec<(i64, u64)> = book.buyers()[..det.k]
        .iter()
        .map(|b| (b.price.to_integer(), b.energy_wh))
        .collect();
    let best = best_allocation_value(&winner_sellers, &winner_buyers);
    assert_eq!(
        value,
        p2p_market::Rational64::new(best, 1000),
        "greedy fell short of the exhaustive optimum on {sellers:?} / {buyers:?}",
    );
}

#[test]
fn criterion_10_greedy_is_optimal_on_tiny_markets() {
    let mut combos = Vec::new();
    for price in 1..=3i64 {
        for wh in 1..=3u64 {
            combos.push((price, wh));
        }
    }
    let mut sides: Vec<Vec<(i64, u64)>> = combos.iter().map(|c| vec![*c]).collect();
    for a in &combos {
        for b in &combos {
            sides.push(vec![*a, *b]);
        }
    }
    let mut checked = 0u32;
    for sellers in &sides {
        for buyers in &sides {
            greedy_matches_brute_force(sellers, buyers);
            checked += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..250 {
        let random_side = |rng: &mut ChaCha8Rng| -> Vec<(i64, u64)> {
            (0..3)
                .map(|_| (rng.random_range(1..=5), rng.random_range(1..=3)))
                .collect()
        };
        let sellers = random_side(&mut rng);
        let buyers = random_side(&mut rng);
        greedy_matches_brute_force(&sellers, &buyers);
        checked += 1;
    }
    verdict(
        10,
        &format!("greedy value equals the exhaustive optimum on {checked} tiny markets"),
        checked > 0,
    );
}

#[test]
fn criterion_11_cli_comparison_is_reproducible() {
    let expected = "\
mechanism,total_revenue,total_saving,trc,budget_surplus,mti
proposed,0.7550,0.7550,1.5100,0.0000,0.9874
uniform,0.8550,0.6550,1.5100,0.0000,0.9632
pay_as_bid,1.5100,0.0000,1.5100,0.0000,0.8281
vickrey,0.7150,0.7950,1.5100,0.0000,0.9955
gsp,1.2100,0.3000,1.5100,0.0000,0.8851
average,0.7710,0.7390,1.5100,0.0000,0.9824
vcg,0.8550,0.7250,1.5800,-0.0700,0.9711
trade_reduction,0.7850,0.6550,1.4400,0.0600,0.9668
mcafee,0.7850,0.6550,1.4400,0.0600,0.9668
";
    let run = || -> Vec<u8> {
        let dir = tempfile::tempdir().unwrap();
        let status = Command::new(env!("CARGO_BIN_EXE_p2p-market"))
            .args(["compare", "--input", SAMPLE_ORDERS, "--format", "csv"])
            .arg("--output")
            .arg(dir.path())
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(dir.path().join("comparison.csv")).unwrap()
    };
    let first = run();
    let second = run();
    let pass = first == second && first == expected.as_bytes();
    verdict(
        11,
        "compare emits the nine-row table byte-identically across runs",
        pass,
    );
}
