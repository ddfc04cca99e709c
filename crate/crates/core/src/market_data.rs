//! Tick files, millisecond aggregation and classification of midprice moves.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hawkes_model::MarkedEvent;

pub const HEADER: [&str; 7] = ["ts_ms", "bid_px", "bid_qty", "ask_px", "ask_qty", "trade_px", "trade_qty"];
const MS_PER_HOUR: f64 = 3_600_000.0;

/// One line of a tick file: best quotes after an update, plus an optional trade.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    /// Milliseconds since the window start.
    pub ts_ms: u64,
    pub bid_px: f64,
    pub bid_qty: f64,
    pub ask_px: f64,
    pub ask_qty: f64,
    pub trade_px: Option<f64>,
    pub trade_qty: Option<f64>,
}

impl TickRecord {
    fn traded(&self) -> f64 {
        self.trade_qty.unwrap_or(0.0)
    }
}

/// Classified midprice moves of one trading window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayWindow {
    pub label: String,
    pub events: Vec<MarkedEvent>,
    /// Window length in hours.
    pub horizon: f64,
    pub tick_size: f64,
    /// Midprice at the window start.
    pub p0: f64,
    /// Average size of the best queues.
    pub mean_queue: f64,
}

impl DayWindow {
    pub fn trades(&self) -> impl Iterator<Item = &MarkedEvent> {
        self.events.iter().filter(|e| e.is_trade())
    }

    pub fn quotes(&self) -> impl Iterator<Item = &MarkedEvent> {
        self.events.iter().filter(|e| !e.is_trade())
    }

    /// Midprice right after each event.
    pub fn prices(&self) -> Vec<f64> {
        let mut p = self.p0;
        self.events
            .iter()
            .map(|e| {
                p += e.price_jump;
                p
            })
            .collect()
    }

    pub fn end_price(&self) -> f64 {
        self.p0 + self.events.iter().map(|e| e.price_jump).sum::<f64>()
    }

    /// Same window with event times rounded to strictly increasing milliseconds,
    /// which is what a round trip through the tick format preserves.
    pub fn quantized_ms(&self) -> DayWindow {
        let mut w = self.clone();
        for (e, ms) in w.events.iter_mut().zip(event_stamps(&self.events)) {
            e.time = ms as f64 / MS_PER_HOUR;
        }
        w
    }

    /// Tick records reproducing this window.
    pub fn to_ticks(&self) -> Vec<TickRecord> {
        let half = self.tick_size / 2.0;
        let qty = self.mean_queue;
        let book = |m: i64| -> (f64, f64) {
            let w = if m.rem_euclid(2) == 1 { 1 } else { 2 };
            ((m - w) as f64 * half, (m + w) as f64 * half)
        };
        let mut m = (self.p0 / half).round() as i64;
        let (bid, ask) = book(m);
        let mut out = vec![TickRecord { ts_ms: 0, bid_px: bid, bid_qty: qty, ask_px: ask, ask_qty: qty, trade_px: None, trade_qty: None }];
        for (e, ms) in self.events.iter().zip(event_stamps(&self.events)) {
            let (pre_bid, pre_ask) = book(m);
            m += (e.price_jump / half).round() as i64;
            let (bid, ask) = book(m);
            let (trade_px, trade_qty) = if e.is_trade() {
                (Some(if e.is_buy() { pre_ask } else { pre_bid }), Some(e.volume))
            } else {
                (None, None)
            };
            out.push(TickRecord { ts_ms: ms, bid_px: bid, bid_qty: qty, ask_px: ask, ask_qty: qty, trade_px, trade_qty });
        }
        out
    }
}

fn event_stamps(events: &[MarkedEvent]) -> Vec<u64> {
    let mut last = 0u64;
    events
        .iter()
        .map(|e| {
            let ms = ((e.time * MS_PER_HOUR).round() as u64).max(last + 1);
            last = ms;
            ms
        })
        .collect()
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    let raw = rec.get(i).ok_or_else(|| Error::Parse { line, msg: format!("missing column {}", HEADER[i]) })?;
    raw.trim().parse().map_err(|_| Error::Parse { line, msg: format!("bad {} value {raw:?}", HEADER[i]) })
}

fn opt_field(rec: &csv::StringRecord, i: usize, line: usize) -> Result<Option<f64>> {
    match rec.get(i).map(str::trim) {
        None | Some("") => Ok(None),
        Some(_) => field(rec, i, line).map(Some),
    }
}

/// Parses a tick CSV with the standard header.
pub fn parse_ticks(bytes: impl Read) -> Result<Vec<TickRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(bytes);
    let header = reader.headers().map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != HEADER {
        return Err(Error::Parse { line: 1, msg: format!("expected header {}", HEADER.join(",")) });
    }
    let mut out: Vec<TickRecord> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse { line: e.position().map_or(0, |p| p.line() as usize), msg: e.to_string() })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() < 5 {
            return Err(Error::Parse { line, msg: format!("expected 7 columns, found {}", rec.len()) });
        }
        let r = TickRecord {
            ts_ms: field(&rec, 0, line)?,
            bid_px: field(&rec, 1, line)?,
            bid_qty: field(&rec, 2, line)?,
            ask_px: field(&rec, 3, line)?,
            ask_qty: field(&rec, 4, line)?,
            trade_px: opt_field(&rec, 5, line)?,
            trade_qty: opt_field(&rec, 6, line)?,
        };
        if r.bid_px >= r.ask_px {
            return Err(Error::Parse { line, msg: format!("crossed book: bid {} >= ask {}", r.bid_px, r.ask_px) });
        }
        if r.bid_qty < 0.0 || r.ask_qty < 0.0 || r.traded() < 0.0 {
            return Err(Error::Parse { line, msg: "negative quantity".into() });
        }
        if let Some(prev) = out.last() {
            if r.ts_ms < prev.ts_ms {
                return Err(Error::Parse { line, msg: format!("timestamp {} before {}", r.ts_ms, prev.ts_ms) });
            }
        }
        out.push(r);
    }
    Ok(out)
}

/// Writes records in the tick CSV format.
pub fn write_ticks(records: &[TickRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(HEADER).map_err(io)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.ts_ms.to_string(),
            r.bid_px.to_string(),
            r.bid_qty.to_string(),
            r.ask_px.to_string(),
            r.ask_qty.to_string(),
            opt(r.trade_px),
            opt(r.trade_qty),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

/// Collapses records sharing a millisecond: last book state wins, volumes add up.
/// The net price change of the stamp is then measured against the previous stamp.
pub fn aggregate_ms(records: &[TickRecord]) -> Vec<TickRecord> {
    let mut out: Vec<TickRecord> = Vec::with_capacity(records.len());
    for r in records {
        match out.last_mut() {
            Some(last) if last.ts_ms == r.ts_ms => {
                let volume = last.traded() + r.traded();
                let px = r.trade_px.or(last.trade_px);
                *last = TickRecord { trade_px: px, trade_qty: (volume > 0.0).then_some(volume), ..r.clone() };
            }
            _ => out.push(r.clone()),
        }
    }
    out
}

fn mid_half_ticks(r: &TickRecord, tick_size: f64) -> i64 {
    ((r.bid_px + r.ask_px) / tick_size).round() as i64
}

/// Emits one event per stamp where the midprice moved. Stamps with executed volume
/// are trade-driven; the event side is the sign of the move.
pub fn classify_events(aggregated: &[TickRecord], tick_size: f64, horizon: f64, label: &str) -> DayWindow {
    let half = tick_size / 2.0;
    let mut events = Vec::new();
    let mut prev = aggregated.first().map(|r| mid_half_ticks(r, tick_size));
    let p0 = prev.map_or(0.0, |m| m as f64 * half);
    for r in aggregated.iter().skip(1) {
        let m = mid_half_ticks(r, tick_size);
        let dm = m - prev.expect("first record seen");
        prev = Some(m);
        if dm == 0 {
            continue;
        }
        let time = r.ts_ms as f64 / MS_PER_HOUR;
        let jump = dm as f64 * half;
        let volume = r.traded();
        events.push(if volume > 0.0 { MarkedEvent::trade(time, jump, volume) } else { MarkedEvent::quote(time, jump) });
    }
    let n = aggregated.len().max(1) as f64;
    let mean_queue = aggregated.iter().map(|r| 0.5 * (r.bid_qty + r.ask_qty)).sum::<f64>() / n;
    DayWindow { label: label.to_string(), events, horizon, tick_size, p0, mean_queue }
}

/// Parse, aggregate and classify one tick file.
pub fn load_window(bytes: impl Read, tick_size: f64, horizon: f64, label: &str) -> Result<DayWindow> {
    let recs = parse_ticks(bytes)?;
    Ok(classify_events(&aggregate_ms(&recs), tick_size, horizon, label))
}

/// Summary statistics of a set of windows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub mean_midprice: f64,
    pub tick_size: f64,
    pub changes_per_hour: f64,
    pub trade_fraction: f64,
    pub m1: f64,
    pub m2_over_m1sq: f64,
    pub mean_queue: f64,
    /// Mean absolute price jump of trades.
    pub m_bar: f64,
}

pub fn compute_stats(windows: &[DayWindow]) -> Result<DatasetStats> {
    if windows.is_empty() {
        return Err(Error::Empty("no windows".into()));
    }
    let (mut n_ev, mut n_tr, mut sum_mid, mut v1, mut v2, mut jumps, mut hours, mut queue) = (0usize, 0usize, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for w in windows {
        for (e, p) in w.events.iter().zip(w.prices()) {
            n_ev += 1;
            sum_mid += p;
            if e.is_trade() {
                n_tr += 1;
                v1 += e.volume;
                v2 += e.volume * e.volume;
                jumps += e.price_jump.abs();
            }
        }
        hours += w.horizon;
        queue += w.mean_queue;
    }
    if n_tr == 0 {
        return Err(Error::Empty("no trade events".into()));
    }
    let m1 = v1 / n_tr as f64;
    Ok(DatasetStats {
        mean_midprice: if n_ev > 0 { sum_mid / n_ev as f64 } else { windows[0].p0 },
        tick_size: windows[0].tick_size,
        changes_per_hour: n_ev as f64 / hours,
        trade_fraction: n_tr as f64 / n_ev.max(1) as f64,
        m1,
        m2_over_m1sq: (v2 / n_tr as f64) / (m1 * m1),
        mean_queue: queue / windows.len() as f64,
        m_bar: jumps / n_tr as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(ts: u64, bid: f64, ask: f64, trade: Option<f64>) -> TickRecord {
        TickRecord { ts_ms: ts, bid_px: bid, bid_qty: 100.0, ask_px: ask, ask_qty: 100.0, trade_px: trade.map(|_| ask), trade_qty: trade }
    }

    #[test]
    fn header_only_is_empty() {
        assert!(parse_ticks(HEADER.join(",").as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn quote_line_has_no_trade() {
        let s = format!("{}\n5,10.0,100,10.005,200,,\n", HEADER.join(","));
        let r = parse_ticks(s.as_bytes()).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].trade_qty, None);
        assert_eq!(r[0].ask_qty, 200.0);
    }

    #[test]
    fn crossed_book_names_line() {
        let s = format!("{}\n5,10.0,100,10.005,200,,\n6,10.01,100,10.005,200,,\n", HEADER.join(","));
        match parse_ticks(s.as_bytes()) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("crossed"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_monotone_time_rejected() {
        let s = format!("{}\n5,10.0,100,10.005,200,,\n4,10.0,100,10.005,200,,\n", HEADER.join(","));
        assert!(parse_ticks(s.as_bytes()).is_err());
    }

    #[test]
    fn volumes_on_same_ms_add_up() {
        let recs = vec![rec(1, 10.0, 10.005, Some(100.0)), rec(1, 10.0, 10.01, Some(200.0))];
        let agg = aggregate_ms(&recs);
        assert_eq!(agg.len(), 1);
        assert_eq!(agg[0].trade_qty, Some(300.0));
        assert_eq!(agg[0].ask_px, 10.01);
    }

    #[test]
    fn offsetting_moves_cancel() {
        let recs = vec![rec(0, 10.0, 10.005, None), rec(5, 10.0, 10.01, None), rec(5, 10.0, 10.005, None)];
        let w = classify_events(&aggregate_ms(&recs), 0.005, 2.0, "d");
        assert!(w.events.is_empty());
    }

    #[test]
    fn classification_rules() {
        let recs = vec![
            rec(0, 10.0, 10.005, None),
            rec(10, 10.0, 10.01, Some(50.0)),
            rec(20, 10.0, 10.01, Some(70.0)),
            rec(30, 10.005, 10.01, None),
        ];
        let w = classify_events(&aggregate_ms(&recs), 0.005, 2.0, "d");
        assert_eq!(w.events.len(), 2);
        assert!(w.events[0].is_trade());
        assert!((w.events[0].price_jump - 0.0025).abs() < 1e-15);
        assert!(!w.events[1].is_trade());
        assert!((w.end_price() - 10.0075).abs() < 1e-12);
    }

    #[test]
    fn stats_by_hand() {
        let w = DayWindow {
            label: "d".into(),
            events: vec![MarkedEvent::trade(0.1, 0.0025, 1.0), MarkedEvent::trade(0.2, -0.0025, 3.0), MarkedEvent::quote(0.3, 0.0025)],
            horizon: 2.0,
            tick_size: 0.005,
            p0: 10.0,
            mean_queue: 5.0,
        };
        let s = compute_stats(&[w]).unwrap();
        assert_eq!(s.m1, 2.0);
        assert!((s.m2_over_m1sq - 1.25).abs() < 1e-15);
        assert!((s.trade_fraction - 2.0 / 3.0).abs() < 1e-15);
        assert!(compute_stats(&[]).is_err());
    }
}
