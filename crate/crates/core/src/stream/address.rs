use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::Error;

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Error> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($name), " `{}`"),
                        other
                    ))),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

named_enum!(
    /// Body side.
    Position { Left => "left", Right => "right", None => "none" }
);

named_enum!(Location {
    Wrist => "wrist",
    Ankle => "ankle",
    Pole => "pole",
    Hand => "hand",
    Chest => "chest",
});

named_enum!(Sensor {
    Accelerometer16g => "accelerometer16g",
    Accelerometer6g => "accelerometer6g",
    Gyroscope => "gyroscope",
    Magnetometer => "magnetometer",
    HeartRate => "heart_rate",
    Temperature => "temperature",
});

named_enum!(Axis { X => "x", Y => "y", Z => "z", Scalar => "scalar" });

impl Sensor {
    pub fn is_scalar(self) -> bool {
        matches!(self, Sensor::HeartRate | Sensor::Temperature)
    }

    /// Word used in explanation texts.
    pub fn display_word(self) -> &'static str {
        match self {
            Sensor::Accelerometer16g => "accelerometer",
            Sensor::Accelerometer6g => "6g accelerometer",
            Sensor::Gyroscope => "gyroscope",
            Sensor::Magnetometer => "magnetometer",
            Sensor::HeartRate => "heart rate sensor",
            Sensor::Temperature => "temperature sensor",
        }
    }
}

/// One scalar channel `(p, l, s, a)`. String form: `{position}-{location}-{sensor}-{axis}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SensorAddress {
    pub position: Position,
    pub location: Location,
    pub sensor: Sensor,
    pub axis: Axis,
}

impl SensorAddress {
    /// Rejects scalar sensors with a spatial axis and vice versa.
    pub fn new(
        position: Position,
        location: Location,
        sensor: Sensor,
        axis: Axis,
    ) -> crate::Result<Self> {
        if sensor.is_scalar() != (axis == Axis::Scalar) {
            return Err(Error::Config(format!(
                "sensor {sensor} cannot carry axis {axis}"
            )));
        }
        Ok(Self {
            position,
            location,
            sensor,
            axis,
        })
    }

    /// Left/right wrists, ankles and poles, each with a tri-axial
    /// accelerometer, gyroscope and magnetometer: 54 channels.
    pub fn nordic_set() -> Vec<SensorAddress> {
        let mut out = Vec::with_capacity(54);
        for &position in &[Position::Left, Position::Right] {
            for &location in &[Location::Wrist, Location::Ankle, Location::Pole] {
                for &sensor in &[
                    Sensor::Accelerometer16g,
                    Sensor::Gyroscope,
                    Sensor::Magnetometer,
                ] {
                    for &axis in &[Axis::X, Axis::Y, Axis::Z] {
                        out.push(SensorAddress {
                            position,
                            location,
                            sensor,
                            axis,
                        });
                    }
                }
            }
        }
        out
    }

    /// PAMAP2 channels in file column order: heart rate, then hand, chest and
    /// ankle IMUs (temperature, 16g and 6g accelerometers, gyroscope,
    /// magnetometer). 40 channels.
    pub fn pamap2_set() -> Vec<SensorAddress> {
        let mut out = Vec::with_capacity(40);
        out.push(SensorAddress {
            position: Position::None,
            location: Location::Chest,
            sensor: Sensor::HeartRate,
            axis: Axis::Scalar,
        });
        for &location in &[Location::Hand, Location::Chest, Location::Ankle] {
            out.push(SensorAddress {
                position: Position::None,
                location,
                sensor: Sensor::Temperature,
                axis: Axis::Scalar,
            });
            for &sensor in &[
                Sensor::Accelerometer16g,
                Sensor::Accelerometer6g,
                Sensor::Gyroscope,
                Sensor::Magnetometer,
            ] {
                for &axis in &[Axis::X, Axis::Y, Axis::Z] {
                    out.push(SensorAddress {
                        position: Position::None,
                        location,
                        sensor,
                        axis,
                    });
                }
            }
        }
        out
    }

    /// Packed 10-bit identifier, stable across runs.
    pub fn code(self) -> u16 {
        (self.position as u16) << 8
            | (self.location as u16) << 5
            | (self.sensor as u16) << 2
            | self.axis as u16
    }
}

impl fmt::Display for SensorAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}-{}-{}-{}",
            self.position, self.location, self.sensor, self.axis
        )
    }
}

impl FromStr for SensorAddress {
    type Err = Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        let parts: Vec<&str> = s.split('-').collect();
        if parts.len() != 4 {
            return Err(Error::Config(format!("invalid sensor address `{s}`")));
        }
        SensorAddress::new(
            parts[0].parse()?,
            parts[1].parse()?,
            parts[2].parse()?,
            parts[3].parse()?,
        )
    }
}

impl Serialize for SensorAddress {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SensorAddress {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_sizes() {
        assert_eq!(SensorAddress::nordic_set().len(), 54);
        assert_eq!(SensorAddress::pamap2_set().len(), 40);
    }

    #[test]
    fn scalar_sensors_carry_scalar_axis() {
        for a in SensorAddress::pamap2_set()
            .iter()
            .chain(SensorAddress::nordic_set().iter())
        {
            assert_eq!(a.sensor.is_scalar(), a.axis == Axis::Scalar, "{a}");
        }
        assert!(
            SensorAddress::new(Position::None, Location::Chest, Sensor::HeartRate, Axis::X)
                .is_err()
        );
        assert!(SensorAddress::new(
            Position::Left,
            Location::Wrist,
            Sensor::Gyroscope,
            Axis::Scalar
        )
        .is_err());
    }

    #[test]
    fn string_form_round_trips() {
        let a: SensorAddress = "right-wrist-accelerometer16g-z".parse().unwrap();
        assert_eq!(a.position, Position::Right);
        assert_eq!(a.sensor, Sensor::Accelerometer16g);
        assert_eq!(a.to_string(), "right-wrist-accelerometer16g-z");
        let hr: SensorAddress = "none-chest-heart_rate-scalar".parse().unwrap();
        assert_eq!(hr.sensor, Sensor::HeartRate);
    }

    #[test]
    fn codes_are_unique() {
        let mut all = SensorAddress::nordic_set();
        all.extend(SensorAddress::pamap2_set());
        let mut codes: Vec<u16> = all.iter().map(|a| a.code()).collect();
        codes.sort_unstable();
        codes.dedup();
        assert_eq!(codes.len(), 94);
    }
}
