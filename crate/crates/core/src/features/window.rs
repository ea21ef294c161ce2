use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::Fft;

use crate::nint;

/// The six window statistics, ordered Q1, Q2, Q3, avg, std, F.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub values: [f64; 6],
}

impl Metrics {
    pub fn q(&self, j: usize) -> f64 {
        self.values[j - 1]
    }

    pub fn avg(&self) -> f64 {
        self.values[3]
    }

    pub fn std(&self) -> f64 {
        self.values[4]
    }

    pub fn f(&self) -> f64 {
        self.values[5]
    }
}

/// Sliding window over the last `w` present values of one channel.
///
/// Running sums are kept relative to a shift (the window mean at the last
/// resync) to limit cancellation, and rebuilt from the buffer every `w`
/// evictions.
#[derive(Debug, Clone)]
pub struct WindowState {
    capacity: usize,
    buf: Vec<f64>,
    head: usize,
    shift: f64,
    sum: f64,
    sumsq: f64,
    evictions: usize,
    cached: Option<Metrics>,
}

impl WindowState {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "window length must be positive");
        Self {
            capacity,
            buf: Vec::with_capacity(capacity),
            head: 0,
            shift: 0.0,
            sum: 0.0,
            sumsq: 0.0,
            evictions: 0,
            cached: None,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.buf.len() == self.capacity
    }

    /// Appends a present value; `None` leaves the window untouched.
    pub fn update(&mut self, value: Option<f64>) {
        let Some(x) = value else { return };
        if self.buf.is_empty() {
            self.shift = x;
        }
        let d = x - self.shift;
        if self.buf.len() < self.capacity {
            self.buf.push(x);
        } else {
            let old = self.buf[self.head] - self.shift;
            self.sum -= old;
            self.sumsq -= old * old;
            self.buf[self.head] = x;
            self.head = (self.head + 1) % self.capacity;
            self.evictions += 1;
        }
        self.sum += d;
        self.sumsq += d * d;
        self.cached = None;
        if self.evictions >= self.capacity {
            self.resync();
        }
    }

    fn resync(&mut self) {
        self.evictions = 0;
        self.shift = self.buf.iter().sum::<f64>() / self.buf.len() as f64;
        self.sum = 0.0;
        self.sumsq = 0.0;
        for &x in &self.buf {
            let d = x - self.shift;
            self.sum += d;
            self.sumsq += d * d;
        }
    }

    /// Window contents, oldest first.
    pub fn contents(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.buf.len());
        if self.is_full() {
            out.extend_from_slice(&self.buf[self.head..]);
            out.extend_from_slice(&self.buf[..self.head]);
        } else {
            out.extend_from_slice(&self.buf);
        }
        out
    }

    /// Sum and sum of squares of the contents, from the running accumulators.
    pub fn running_sums(&self) -> (f64, f64) {
        let n = self.buf.len() as f64;
        let sum = self.sum + n * self.shift;
        let sumsq = self.sumsq + 2.0 * self.shift * self.sum + n * self.shift * self.shift;
        (sum, sumsq)
    }

    pub fn mean(&self) -> f64 {
        self.shift + self.sum / self.buf.len() as f64
    }

    /// Population standard deviation from the running sums.
    pub fn std(&self) -> f64 {
        let n = self.buf.len() as f64;
        let m = self.sum / n;
        (self.sumsq / n - m * m).max(0.0).sqrt()
    }

    /// True when the last computed metrics are still valid.
    pub fn is_cached(&self) -> bool {
        self.cached.is_some()
    }

    /// Metrics of a full window, computed at most once per update.
    pub fn metrics(&mut self, fft: &dyn Fft<f64>, scratch: &mut FftScratch) -> Option<Metrics> {
        if !self.is_full() {
            return None;
        }
        if let Some(m) = self.cached {
            return Some(m);
        }
        let w = self.capacity;
        scratch.sorted.clear();
        scratch.sorted.extend_from_slice(&self.buf);
        scratch.sorted.sort_unstable_by(f64::total_cmp);
        let q = |j: usize| scratch.sorted[(nint((j * w) as f64 / 4.0) as usize).min(w - 1)];
        let (q1, q2, q3) = (q(1), q(2), q(3));

        // a circular shift of the input only changes bin phases, so the ring
        // can be transformed in storage order
        scratch.complex.clear();
        scratch
            .complex
            .extend(self.buf.iter().map(|&x| Complex::new(x, 0.0)));
        let needed = fft.get_inplace_scratch_len();
        if scratch.work.len() < needed {
            scratch.work.resize(needed, Complex::new(0.0, 0.0));
        }
        fft.process_with_scratch(&mut scratch.complex, &mut scratch.work[..needed]);
        let f = scratch.complex.iter().map(|c| c.norm()).fold(0.0, f64::max);

        let m = Metrics {
            values: [q1, q2, q3, self.mean(), self.std(), f],
        };
        self.cached = Some(m);
        Some(m)
    }
}

/// Reusable buffers for metric computation.
#[derive(Debug, Default)]
pub struct FftScratch {
    sorted: Vec<f64>,
    complex: Vec<Complex<f64>>,
    work: Vec<Complex<f64>>,
}

/// Forward FFT plans keyed by length.
pub struct FftPlans {
    planner: rustfft::FftPlanner<f64>,
    plans: Vec<(usize, Arc<dyn Fft<f64>>)>,
}

impl Default for FftPlans {
    fn default() -> Self {
        Self {
            planner: rustfft::FftPlanner::new(),
            plans: Vec::new(),
        }
    }
}

impl FftPlans {
    pub fn get(&mut self, len: usize) -> Arc<dyn Fft<f64>> {
        if let Some((_, p)) = self.plans.iter().find(|(l, _)| *l == len) {
            return p.clone();
        }
        let plan = self.planner.plan_fft_forward(len);
        self.plans.push((len, plan.clone()));
        plan
    }
}

impl std::fmt::Debug for FftPlans {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPlans")
            .field(
                "lengths",
                &self.plans.iter().map(|(l, _)| *l).collect::<Vec<_>>(),
            )
            .finish()
    }
}

/// Metrics of an arbitrary full window, for callers without a [`WindowState`].
pub fn compute_metrics(values: &[f64]) -> Option<Metrics> {
    if values.is_empty() {
        return None;
    }
    let mut state = WindowState::new(values.len());
    for &v in values {
        state.update(Some(v));
    }
    let mut plans = FftPlans::default();
    let plan = plans.get(values.len());
    state.metrics(plan.as_ref(), &mut FftScratch::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absent_leaves_state_unchanged() {
        let mut s = WindowState::new(3);
        s.update(None);
        assert!(s.is_empty());
        for v in [1.0, 2.0, 3.0, 4.0] {
            s.update(Some(v));
        }
        assert_eq!(s.contents(), vec![2.0, 3.0, 4.0]);
        s.update(None);
        assert_eq!(s.contents(), vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn quartiles_and_mean() {
        let m = compute_metrics(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(&m.values[..4], &[2.0, 3.0, 4.0, 2.5]);
    }

    #[test]
    fn constant_window() {
        let m = compute_metrics(&[2.5; 16]).unwrap();
        assert_eq!(m.avg(), 2.5);
        assert_eq!(m.std(), 0.0);
        assert!((m.f() - 40.0).abs() < 1e-12);
    }

    #[test]
    fn partial_window_has_no_metrics() {
        let mut s = WindowState::new(4);
        s.update(Some(1.0));
        let mut plans = FftPlans::default();
        assert!(s
            .metrics(plans.get(4).as_ref(), &mut FftScratch::default())
            .is_none());
    }

    #[test]
    fn cache_invalidated_by_update() {
        let mut s = WindowState::new(2);
        let mut plans = FftPlans::default();
        let plan = plans.get(2);
        let mut scratch = FftScratch::default();
        s.update(Some(1.0));
        s.update(Some(3.0));
        assert_eq!(s.metrics(plan.as_ref(), &mut scratch).unwrap().avg(), 2.0);
        assert!(s.is_cached());
        s.update(None);
        assert!(s.is_cached());
        s.update(Some(5.0));
        assert!(!s.is_cached());
        assert_eq!(s.metrics(plan.as_ref(), &mut scratch).unwrap().avg(), 4.0);
    }
}
