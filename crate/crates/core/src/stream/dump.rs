//! Plain-text slot dump: one slot per line, `n timestamp label addr=v ...`.
//!
//! Absent values are omitted and an unlabelled slot carries `-`. A short
//! `#` header records the descriptor so a dump loads back into the same
//! stream.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;

use super::{ClassLabel, ClassSet, RawSlot, Sensor, SensorAddress, Stream, StreamDescriptor};
use crate::{Error, Result};

pub fn write_dump(stream: &Stream) -> String {
    let d = &stream.descriptor;
    let mut out = String::new();
    out.push_str("# rates");
    for (sensor, rate) in &d.rates {
        write!(out, " {sensor}={rate}").unwrap();
    }
    out.push_str("\n# classes");
    for name in d.classes.names() {
        write!(out, " {name}").unwrap();
    }
    out.push_str("\n# addresses");
    for a in &d.addresses {
        write!(out, " {a}").unwrap();
    }
    out.push('\n');
    for slot in &stream.slots {
        write_slot(&mut out, d, slot);
        out.push('\n');
    }
    out
}

pub fn write_slot(out: &mut String, descriptor: &StreamDescriptor, slot: &RawSlot) {
    write!(out, "{} {}", slot.n, slot.timestamp).unwrap();
    match slot.ground_truth {
        Some(l) => write!(out, " {l}").unwrap(),
        None => out.push_str(" -"),
    }
    for (i, v) in slot.present() {
        write!(out, " {}={v}", descriptor.addresses[i]).unwrap();
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn read_dump<R: BufRead>(reader: R) -> Result<Stream> {
    let mut rates: BTreeMap<Sensor, f64> = BTreeMap::new();
    let mut classes: Option<ClassSet> = None;
    let mut addresses: Option<Vec<SensorAddress>> = None;
    let mut slots: Vec<RawSlot> = Vec::new();
    let mut descriptor: Option<StreamDescriptor> = None;

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            let mut parts = header.split_whitespace();
            match parts.next() {
                Some("rates") => {
                    for p in parts {
                        let (s, r) = p
                            .split_once('=')
                            .ok_or_else(|| parse_err(line_no, format!("bad rate `{p}`")))?;
                        let sensor: Sensor = s
                            .parse()
                            .map_err(|e: Error| parse_err(line_no, e.to_string()))?;
                        let rate: f64 = r
                            .parse()
                            .map_err(|_| parse_err(line_no, format!("bad rate `{p}`")))?;
                        rates.insert(sensor, rate);
                    }
                }
                Some("classes") => classes = Some(ClassSet::new(parts)),
                Some("addresses") => {
                    addresses = Some(
                        parts
                            .map(|a| {
                                a.parse()
                                    .map_err(|e: Error| parse_err(line_no, e.to_string()))
                            })
                            .collect::<Result<_>>()?,
                    )
                }
                _ => {}
            }
            continue;
        }
        let d = match &descriptor {
            Some(d) => d,
            None => {
                let addresses = addresses
                    .take()
                    .ok_or_else(|| parse_err(line_no, "slot before `# addresses` header"))?;
                let classes = classes.take().unwrap_or_else(ClassSet::nordic_practice);
                descriptor.insert(StreamDescriptor::new(addresses, rates.clone(), classes))
            }
        };
        let mut fields = line.split_whitespace();
        let n: u64 = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| parse_err(line_no, "missing slot index"))?;
        let timestamp: f64 = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| parse_err(line_no, "missing timestamp"))?;
        let ground_truth = match fields.next() {
            Some("-") => None,
            Some(l) => Some(
                l.parse::<ClassLabel>()
                    .map_err(|e| parse_err(line_no, e.to_string()))?,
            ),
            None => return Err(parse_err(line_no, "missing label")),
        };
        let mut values = vec![None; d.addresses.len()];
        for f in fields {
            let (a, v) = f
                .split_once('=')
                .ok_or_else(|| parse_err(line_no, format!("bad value `{f}`")))?;
            let address: SensorAddress = a
                .parse()
                .map_err(|e: Error| parse_err(line_no, e.to_string()))?;
            let idx = d
                .address_index(&address)
                .ok_or_else(|| parse_err(line_no, format!("address {address} not in header")))?;
            values[idx] = Some(
                v.parse()
                    .map_err(|_| parse_err(line_no, format!("bad value `{f}`")))?,
            );
        }
        if slots.last().is_some_and(|s| s.n >= n) {
            return Err(parse_err(line_no, "slot indices must strictly increase"));
        }
        slots.push(RawSlot {
            n,
            timestamp,
            values,
            ground_truth,
        });
    }
    let descriptor = descriptor.ok_or_else(|| Error::EmptyStream("dump holds no slots".into()))?;
    Ok(Stream::new(descriptor, slots))
}

pub fn read_dump_file(path: &std::path::Path) -> Result<Stream> {
    let file = std::fs::File::open(path)?;
    read_dump(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::synthetic::{generate_synthetic, SyntheticConfig};

    #[test]
    fn dump_round_trips() {
        let cfg = SyntheticConfig::new(5, vec![(ClassLabel(0), 2.0), (ClassLabel(2), 2.0)]);
        let stream = generate_synthetic(&cfg).unwrap();
        let text = write_dump(&stream);
        let back = read_dump(text.as_bytes()).unwrap();
        assert_eq!(back, stream);
    }

    #[test]
    fn slot_line_omits_absent_values() {
        let stream =
            generate_synthetic(&SyntheticConfig::new(1, vec![(ClassLabel(1), 1.0)])).unwrap();
        let mut line = String::new();
        write_slot(&mut line, &stream.descriptor, &stream.slots[0]);
        assert!(line.starts_with("0 0 c1 "));
        // slot 0 carries only gyroscope channels (25 Hz)
        assert_eq!(line.matches('=').count(), 18);
        assert!(!line.contains("magnetometer"));
    }

    #[test]
    fn rejects_unknown_address() {
        let text = "# addresses left-wrist-gyroscope-x\n0 0 c0 left-wrist-gyroscope-y=1\n";
        assert!(matches!(
            read_dump(text.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
