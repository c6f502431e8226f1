use super::{ContentCategory, Platform, Request, RequestTrace, WorkloadError};
use std::io::Write;
use std::path::Path;

const COLUMNS: [&str; 6] = [
    "cycle",
    "location",
    "content",
    "platform",
    "peak",
    "bitrate_class",
];

/// Reads a trace CSV (`cycle,location,content,platform,peak,bitrate_class`)
/// with 1-based locations in `1..=locations`.
pub fn load_trace(path: &Path, locations: usize) -> Result<RequestTrace, WorkloadError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let mut index = [0usize; 6];
    for (slot, name) in index.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| WorkloadError::MissingColumn(name.to_string()))?;
    }

    let mut requests = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let field = |col: usize| record.get(index[col]).unwrap_or("");
        let bad = |message: String| WorkloadError::BadRow { row, message };

        let cycle: u32 = field(0)
            .parse()
            .map_err(|_| bad(format!("bad cycle `{}`", field(0))))?;
        let location: usize = field(1)
            .parse()
            .map_err(|_| bad(format!("bad location `{}`", field(1))))?;
        if location == 0 || location > locations {
            return Err(bad(format!("location {location} outside 1..={locations}")));
        }
        let content: ContentCategory = field(2).parse().map_err(bad)?;
        let platform: Platform = field(3).parse().map_err(bad)?;
        let peak = match field(4) {
            "0" => false,
            "1" => true,
            other => return Err(bad(format!("peak must be 0 or 1, got `{other}`"))),
        };
        let bitrate_class: u8 = field(5)
            .parse()
            .map_err(|_| bad(format!("bad bitrate_class `{}`", field(5))))?;
        if let Some(prev) = requests.last().map(|r: &Request| r.cycle) {
            if cycle < prev {
                return Err(bad(format!("cycle {cycle} after cycle {prev}")));
            }
        }
        requests.push(Request {
            cycle,
            location: (location - 1) as u16,
            content,
            platform,
            peak,
            bitrate_class,
        });
    }
    let horizon = requests.last().map_or(0, |r| r.cycle as usize + 1);
    RequestTrace::new(requests, horizon, locations)
}

pub fn write_trace<W: Write>(trace: &RequestTrace, out: W) -> Result<(), WorkloadError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(COLUMNS)?;
    for r in &trace.requests {
        writer.write_record([
            r.cycle.to_string(),
            (r.location + 1).to_string(),
            r.content.to_string(),
            r.platform.to_string(),
            u8::from(r.peak).to_string(),
            r.bitrate_class.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn save_trace(trace: &RequestTrace, path: &Path) -> Result<(), WorkloadError> {
    let file = std::fs::File::create(path)?;
    write_trace(trace, std::io::BufWriter::new(file))
}
