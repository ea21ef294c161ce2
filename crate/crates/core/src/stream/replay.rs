//! Timed replay of a recorded stream.

use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use super::RawSlot;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Speed {
    /// Wall time runs `factor` times faster than stream time.
    Factor(f64),
    Unlimited,
}

impl Speed {
    pub fn new(factor: f64) -> crate::Result<Self> {
        if factor.is_infinite() && factor > 0.0 {
            Ok(Speed::Unlimited)
        } else if factor > 0.0 {
            Ok(Speed::Factor(factor))
        } else {
            Err(crate::Error::Config(format!(
                "replay speed must be > 0, got {factor}"
            )))
        }
    }
}

/// Emits `slots` in order, sleeping so that slot `i` leaves at
/// `(t_i - t_0) / speed` after the start. Deadlines are absolute, so
/// scheduler jitter does not accumulate. Stops early when `sink` returns
/// false; returns the number of slots emitted.
pub fn replay<I, F>(slots: I, speed: Speed, mut sink: F) -> usize
where
    I: IntoIterator<Item = RawSlot>,
    F: FnMut(RawSlot) -> bool,
{
    let start = Instant::now();
    let mut t0 = None;
    let mut emitted = 0;
    for slot in slots {
        if let Speed::Factor(factor) = speed {
            let first = *t0.get_or_insert(slot.timestamp);
            let offset = ((slot.timestamp - first) / factor).max(0.0);
            let deadline = start + Duration::from_secs_f64(offset);
            let now = Instant::now();
            if deadline > now {
                thread::sleep(deadline - now);
            }
        }
        emitted += 1;
        if !sink(slot) {
            break;
        }
    }
    emitted
}

/// Replays on a background thread; the receiver sees slots in order and
/// disconnects after the last one.
pub fn replay_channel(slots: Vec<RawSlot>, speed: Speed) -> mpsc::Receiver<RawSlot> {
    let (tx, rx) = mpsc::sync_channel(1024);
    thread::spawn(move || {
        replay(slots, speed, |s| tx.send(s).is_ok());
    });
    rx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slots(n: u64, rate: f64) -> Vec<RawSlot> {
        (0..n)
            .map(|i| RawSlot {
                n: i,
                timestamp: i as f64 / rate,
                values: vec![Some(i as f64)],
                ground_truth: None,
            })
            .collect()
    }

    #[test]
    fn real_time_spacing() {
        let start = Instant::now();
        let mut seen = Vec::new();
        replay(slots(10, 25.0), Speed::Factor(1.0), |s| {
            seen.push(s.n);
            true
        });
        let elapsed = start.elapsed().as_secs_f64();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
        assert!((0.36..0.5).contains(&elapsed), "{elapsed}");
    }

    #[test]
    fn unlimited_injects_no_delay() {
        let start = Instant::now();
        let count = replay(slots(100_000, 25.0), Speed::Unlimited, |_| true);
        assert_eq!(count, 100_000);
        assert!(start.elapsed() < Duration::from_millis(500));
    }

    #[test]
    fn sink_can_stop_early() {
        let count = replay(slots(10, 25.0), Speed::Unlimited, |s| s.n < 3);
        assert_eq!(count, 4);
    }

    #[test]
    fn rejects_non_positive_speed() {
        assert!(Speed::new(0.0).is_err());
        assert!(Speed::new(-1.0).is_err());
        assert_eq!(Speed::new(f64::INFINITY).unwrap(), Speed::Unlimited);
    }

    #[test]
    fn channel_preserves_order() {
        let rx = replay_channel(slots(50, 1000.0), Speed::Factor(10.0));
        let got: Vec<u64> = rx.iter().map(|s| s.n).collect();
        assert_eq!(got, (0..50).collect::<Vec<_>>());
    }
}
