//! Deterministic synthetic Nordic-walking sessions.
//!
//! Six IMUs (left/right wrist, ankle, pole) each carry a tri-axial
//! accelerometer at 12.5 Hz, gyroscope at 25 Hz and magnetometer at 10 Hz.
//! The master slot clock runs at 25 Hz; slower sensors are absent between
//! their samples. Each class is a distinct movement regime:
//!
//! * `c0` correct: 0.8 Hz arm swing, poles strike the ground once per cycle.
//! * `c1` cheating (running): 1.6 Hz, strong ankle motion, poles held off the ground.
//! * `c2` incorrect (dragging poles): 0.5 Hz, weak swing, continuous pole vibration.
//!
//! Every IMU gets a seeded random orientation per session, so axis-level
//! signals differ between seeds while the class structure does not.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{
    Axis, ClassLabel, ClassSet, Location, Position, RawSlot, Sensor, SensorAddress, Stream,
    StreamDescriptor,
};
use crate::{Error, Result};

pub const ACCEL_HZ: f64 = 12.5;
pub const GYRO_HZ: f64 = 25.0;
pub const MAG_HZ: f64 = 10.0;

/// Relative amplitude of the fifth swing harmonic on the primary axis.
const HARMONIC: f64 = 0.3;

/// Movement regime of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassRegime {
    pub swing_hz: f64,
    /// Amplitude gain for wrist, ankle and pole IMUs.
    pub gain: [f64; 3],
    /// Peak of the once-per-cycle pole ground contact on the accelerometer.
    pub pole_spike: f64,
    /// Amplitude of the high-frequency pole vibration caused by dragging.
    pub drag_vibration: f64,
}

impl ClassRegime {
    pub fn nordic_defaults() -> Vec<ClassRegime> {
        vec![
            ClassRegime {
                swing_hz: 0.8,
                gain: [1.0, 0.05, 0.3],
                pole_spike: 1.0,
                drag_vibration: 0.0,
            },
            ClassRegime {
                swing_hz: 1.6,
                gain: [0.05, 2.0, 0.05],
                pole_spike: 0.0,
                drag_vibration: 0.0,
            },
            ClassRegime {
                swing_hz: 0.5,
                gain: [0.05, 0.05, 0.05],
                pole_spike: 0.0,
                drag_vibration: 2.0,
            },
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub schedule: Vec<(ClassLabel, f64)>,
    pub regimes: Vec<ClassRegime>,
    /// Noise standard deviation relative to each sensor's scale.
    pub noise: f64,
    pub random_orientation: bool,
}

impl SyntheticConfig {
    pub fn new(seed: u64, schedule: Vec<(ClassLabel, f64)>) -> Self {
        Self {
            seed,
            schedule,
            regimes: ClassRegime::nordic_defaults(),
            noise: 0.03,
            random_orientation: true,
        }
    }
}

/// Schedule whose class durations follow the reference burst proportions
/// (30722 : 33330 : 30296), scaled to `total_s` and played in `rounds`
/// passes over the three classes.
pub fn proportional_schedule(total_s: f64, rounds: usize) -> Vec<(ClassLabel, f64)> {
    let weights = [30722.0, 33330.0, 30296.0];
    let sum: f64 = weights.iter().sum();
    let rounds = rounds.max(1);
    let mut out = Vec::new();
    for _ in 0..rounds {
        for (i, w) in weights.iter().enumerate() {
            out.push((ClassLabel(i as u8), total_s * w / sum / rounds as f64));
        }
    }
    out
}

pub fn descriptor() -> StreamDescriptor {
    let mut rates = BTreeMap::new();
    rates.insert(Sensor::Accelerometer16g, ACCEL_HZ);
    rates.insert(Sensor::Gyroscope, GYRO_HZ);
    rates.insert(Sensor::Magnetometer, MAG_HZ);
    StreamDescriptor::new(
        SensorAddress::nordic_set(),
        rates,
        ClassSet::nordic_practice(),
    )
}

/// Whether a sensor at `rate` produces a sample at master slot `n`.
/// Over `N` slots this yields exactly `floor(N * rate / master)` samples.
pub fn sample_due(n: u64, rate: f64, master: f64) -> bool {
    // rates are multiples of 0.5 Hz; work in half-hertz units to stay exact
    let r = (rate * 2.0).round() as u64;
    let m = (master * 2.0).round() as u64;
    ((n + 1) * r) / m > (n * r) / m
}

type Rotation = [[f64; 3]; 3];

fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation {
    // uniform unit quaternion
    let q: [f64; 4] = {
        let mut q = [0.0; 4];
        let mut norm: f64 = 0.0;
        for v in q.iter_mut() {
            *v = rng.sample(StandardNormal);
            norm += *v * *v;
        }
        let norm = norm.sqrt().max(1e-12);
        q.map(|v| v / norm)
    };
    let [w, x, y, z] = q;
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

fn rotate(r: &Rotation, v: [f64; 3]) -> [f64; 3] {
    [
        r[0][0] * v[0] + r[0][1] * v[1] + r[0][2] * v[2],
        r[1][0] * v[0] + r[1][1] * v[1] + r[1][2] * v[2],
        r[2][0] * v[0] + r[2][1] * v[1] + r[2][2] * v[2],
    ]
}

fn sensor_scale(sensor: Sensor) -> f64 {
    match sensor {
        Sensor::Accelerometer16g => 1.0,
        Sensor::Gyroscope => 2.0,
        _ => 0.5,
    }
}

fn location_slot(location: Location) -> usize {
    match location {
        Location::Wrist => 0,
        Location::Ankle => 1,
        _ => 2,
    }
}

/// Body-frame sensor vector of one IMU for a regime at swing phase `phase`.
fn body_vector(
    sensor: Sensor,
    location: Location,
    regime: &ClassRegime,
    phase: f64,
    t: f64,
) -> [f64; 3] {
    let a = regime.gain[location_slot(location)];
    let scale = sensor_scale(sensor);
    let mut v = match sensor {
        Sensor::Accelerometer16g => [
            a * (phase.sin() + HARMONIC * (5.0 * phase).sin()),
            0.5 * a * (2.0 * phase + 0.3).sin(),
            0.3 * a * phase.cos(),
        ],
        Sensor::Gyroscope => [
            a * (phase.cos() + HARMONIC * (5.0 * phase).cos()),
            0.4 * a * phase.sin(),
            0.25 * a * (2.0 * phase).cos(),
        ],
        _ => [
            0.6 * a * (phase + 1.0).sin(),
            0.6 * a * (phase + 1.0).cos(),
            0.3 * a * (2.0 * phase).sin(),
        ],
    };
    if location == Location::Pole && sensor == Sensor::Accelerometer16g {
        if regime.pole_spike > 0.0 {
            v[2] += regime.pole_spike * phase.cos().max(0.0).powi(16);
        }
        if regime.drag_vibration > 0.0 {
            let vib = regime.drag_vibration * (TAU * 3.1 * t).sin();
            v[0] += vib;
            v[1] += 0.5 * vib;
        }
    }
    if location == Location::Pole && sensor == Sensor::Gyroscope && regime.drag_vibration > 0.0 {
        v[0] += 0.6 * regime.drag_vibration * (TAU * 2.3 * t + 0.4).sin();
    }
    v.map(|x| x * scale)
}

fn axis_index(axis: Axis) -> usize {
    match axis {
        Axis::X => 0,
        Axis::Y => 1,
        _ => 2,
    }
}

/// Generates the stream for `config`. Identical configs give bit-identical streams.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Stream> {
    if config.schedule.is_empty() {
        return Err(Error::Config("synthetic schedule is empty".into()));
    }
    for (label, duration) in &config.schedule {
        if !(*duration > 0.0) || !duration.is_finite() {
            return Err(Error::Config(format!(
                "segment for {label} has non-positive duration {duration}"
            )));
        }
        if label.index() >= config.regimes.len() {
            return Err(Error::Config(format!("no regime configured for {label}")));
        }
    }

    let descriptor = descriptor();
    let master = descriptor.master_rate();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // one orientation per IMU, keyed by (position, location)
    let imus: Vec<(Position, Location)> = descriptor
        .addresses
        .iter()
        .map(|a| (a.position, a.location))
        .fold(Vec::new(), |mut acc, k| {
            if !acc.contains(&k) {
                acc.push(k);
            }
            acc
        });
    let rotations: Vec<Rotation> = imus
        .iter()
        .map(|_| {
            if config.random_orientation {
                random_rotation(&mut rng)
            } else {
                [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
            }
        })
        .collect();

    // segment lengths round each class's cumulative duration, so every
    // class total is within half a slot of its requested duration
    let mut bounds = Vec::with_capacity(config.schedule.len());
    let mut class_time = vec![0.0; config.regimes.len()];
    let mut start = 0;
    for (label, duration) in &config.schedule {
        let before = (class_time[label.index()] * master).round() as u64;
        class_time[label.index()] += duration;
        let after = (class_time[label.index()] * master).round() as u64;
        let end = start + (after - before);
        bounds.push((*label, start, end));
        start = end;
    }
    let total = bounds.last().map(|b| b.2).unwrap_or(0);

    let mut slots = Vec::with_capacity(total as usize);
    let mut phase = 0.0;
    let mut segment = 0;
    for n in 0..total {
        while n >= bounds[segment].2 {
            segment += 1;
        }
        let label = bounds[segment].0;
        let regime = &config.regimes[label.index()];
        let t = n as f64 / master;
        phase = (phase + TAU * regime.swing_hz / master) % TAU;

        let mut values = vec![None; descriptor.addresses.len()];
        for (i, address) in descriptor.addresses.iter().enumerate() {
            let rate = descriptor.rates[&address.sensor];
            if !sample_due(n, rate, master) {
                continue;
            }
            let imu = imus
                .iter()
                .position(|k| *k == (address.position, address.location))
                .unwrap();
            let side = if address.position == Position::Right {
                PI
            } else {
                0.0
            };
            let lag = if address.location == Location::Pole {
                0.2
            } else {
                0.0
            };
            let body = body_vector(
                address.sensor,
                address.location,
                regime,
                phase + side + lag,
                t,
            );
            let world = rotate(&rotations[imu], body);
            let noise: f64 = rng.sample(StandardNormal);
            values[i] = Some(
                world[axis_index(address.axis)]
                    + config.noise * sensor_scale(address.sensor) * noise,
            );
        }
        slots.push(RawSlot {
            n,
            timestamp: t,
            values,
            ground_truth: Some(label),
        });
    }
    Ok(Stream::new(descriptor, slots))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_class_schedule() {
        let stream =
            generate_synthetic(&SyntheticConfig::new(42, vec![(ClassLabel(0), 60.0)])).unwrap();
        assert_eq!(stream.len(), 1500);
        assert!(stream
            .slots
            .iter()
            .all(|s| s.ground_truth == Some(ClassLabel(0))));
        assert!(stream.slots.iter().all(RawSlot::has_any));
        assert_eq!(stream.descriptor.addresses.len(), 54);
        assert_eq!(stream.descriptor.r_min, 10.0);
        assert_eq!(stream.descriptor.r_max, 25.0);
    }

    #[test]
    fn zero_duration_is_config_error() {
        let err =
            generate_synthetic(&SyntheticConfig::new(1, vec![(ClassLabel(0), 0.0)])).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = generate_synthetic(&SyntheticConfig::new(1, vec![])).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn deterministic_for_seed() {
        let cfg = SyntheticConfig::new(7, vec![(ClassLabel(1), 5.0), (ClassLabel(2), 5.0)]);
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&SyntheticConfig::new(8, cfg.schedule.clone())).unwrap();
        assert_ne!(a.slots, c.slots);
    }

    #[test]
    fn multi_rate_presence_counts() {
        let seconds = 37.0;
        let stream =
            generate_synthetic(&SyntheticConfig::new(3, vec![(ClassLabel(0), seconds)])).unwrap();
        for (i, address) in stream.descriptor.addresses.iter().enumerate() {
            let count = stream
                .slots
                .iter()
                .filter(|s| s.values[i].is_some())
                .count() as f64;
            let expected = stream.descriptor.rates[&address.sensor] * seconds;
            assert!(
                (count - expected).abs() <= 1.0,
                "{address}: {count} vs {expected}"
            );
        }
    }

    #[test]
    fn proportional_schedule_counts_within_one_slot() {
        let schedule = proportional_schedule(600.0, 2);
        let stream = generate_synthetic(&SyntheticConfig::new(11, schedule.clone())).unwrap();
        let counts = stream.class_counts();
        for c in 0..3 {
            let requested: f64 = schedule
                .iter()
                .filter(|(l, _)| l.index() == c)
                .map(|(_, d)| d * 25.0)
                .sum();
            assert!(
                (counts[c] as f64 - requested).abs() <= 1.0,
                "class {c}: {} vs {requested}",
                counts[c]
            );
        }
        // proportions follow 30722 : 33330 : 30296
        let ratio = counts[1] as f64 / counts[0] as f64;
        assert!((ratio - 33330.0 / 30722.0).abs() < 1e-3);
    }
}
