//! File formats: timestamp streams as CSV or compact binary, analysis
//! tables as CSV, reports as JSON, and the run manifest.
//!
//! Floats in CSV use Rust's shortest round-trip formatting, so written files
//! are bit-reproducible and parse back to the exact same values.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detection::TimestampStream;
use crate::error::{Error, Result};
use crate::spdc::PairEvent;

/// Magic prefix of the binary timestamp format.
pub const STREAM_MAGIC: &[u8; 4] = b"MPTS";
/// Version written by this crate; readers reject anything newer.
pub const STREAM_VERSION: u16 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn sha256_hex_of_file(path: &Path) -> Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    Ok(out)
}

/// Write one detector stream as CSV: comment headers carrying the stream
/// metadata, then a `channel_id,t_s` row per click.
pub fn write_stream_csv(
    path: &Path,
    stream: &TimestampStream,
    scenario_sha256: Option<&str>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    if let Some(hash) = scenario_sha256 {
        writeln!(w, "# scenario_sha256={hash}")?;
    }
    writeln!(w, "# channel={}", stream.channel_id)?;
    writeln!(w, "# duration_s={}", stream.duration_s)?;
    writeln!(w, "channel_id,t_s")?;
    for &t in &stream.times_s {
        writeln!(w, "{},{}", stream.channel_id, t)?;
    }
    w.flush()?;
    Ok(())
}

/// Read timestamp streams from CSV, one stream per channel id found.
///
/// Accepts files written by [`write_stream_csv`] as well as plain
/// `channel_id,t_s` tables from other tools: comment headers are optional
/// and a missing duration falls back to the last timestamp per channel.
pub fn read_stream_csv(path: &Path) -> Result<Vec<TimestampStream>> {
    Ok(read_stream_csv_with_hash(path)?.0)
}

/// CSV reader that also returns the `scenario_sha256` header if present.
pub fn read_stream_csv_with_hash(
    path: &Path,
) -> Result<(Vec<TimestampStream>, Option<String>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut duration: Option<f64> = None;
    let mut scenario_hash: Option<String> = None;
    let mut order: Vec<String> = Vec::new();
    let mut per_channel: std::collections::HashMap<String, Vec<f64>> =
        std::collections::HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((key, value)) = rest.trim().split_once('=') {
                match key.trim() {
                    "duration_s" => {
                        duration = Some(value.trim().parse().map_err(|_| {
                            Error::malformed(path, format!("bad duration_s `{value}`"))
                        })?);
                    }
                    "scenario_sha256" => scenario_hash = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            continue;
        }
        let (channel, t_raw) = line.split_once(',').ok_or_else(|| {
            Error::malformed(path, format!("line {}: expected `channel_id,t_s`", lineno + 1))
        })?;
        if channel == "channel_id" {
            continue;
        }
        let t: f64 = t_raw.trim().parse().map_err(|_| {
            Error::malformed(path, format!("line {}: bad timestamp `{t_raw}`", lineno + 1))
        })?;
        let channel = channel.trim().to_string();
        if !per_channel.contains_key(&channel) {
            order.push(channel.clone());
        }
        per_channel.entry(channel).or_default().push(t);
    }
    let mut streams = Vec::new();
    for channel in order {
        let times = per_channel.remove(&channel).unwrap();
        let dur = duration.unwrap_or_else(|| times.last().copied().unwrap_or(0.0));
        streams.push(
            TimestampStream::new(&channel, times, dur)
                .map_err(|e| Error::malformed(path, e.to_string()))?,
        );
    }
    if streams.is_empty() {
        return Err(Error::malformed(path, "no timestamp rows found"));
    }
    Ok((streams, scenario_hash))
}

/// Read a stream file of either format, sniffing the binary magic.
pub fn read_stream_any(path: &Path) -> Result<(Vec<TimestampStream>, Option<String>)> {
    let mut head = [0u8; 4];
    let is_binary = File::open(path)?
        .read_exact(&mut head)
        .map(|_| &head == STREAM_MAGIC)
        .unwrap_or(false);
    if is_binary {
        let (stream, hash) = read_stream_binary(path)?;
        Ok((vec![stream], hash))
    } else {
        read_stream_csv_with_hash(path)
    }
}

/// Write one detector stream in the compact binary layout:
/// magic `MPTS`, u16 version, u16 flags, length-prefixed channel id,
/// f64 duration, length-prefixed scenario hash, u64 count, then the
/// timestamps as little-endian f64 seconds.
pub fn write_stream_binary(
    path: &Path,
    stream: &TimestampStream,
    scenario_sha256: Option<&str>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(STREAM_MAGIC)?;
    w.write_all(&STREAM_VERSION.to_le_bytes())?;
    w.write_all(&0u16.to_le_bytes())?;
    let channel = stream.channel_id.as_bytes();
    w.write_all(&(channel.len() as u32).to_le_bytes())?;
    w.write_all(channel)?;
    w.write_all(&stream.duration_s.to_le_bytes())?;
    let hash = scenario_sha256.unwrap_or("").as_bytes();
    w.write_all(&(hash.len() as u32).to_le_bytes())?;
    w.write_all(hash)?;
    w.write_all(&(stream.times_s.len() as u64).to_le_bytes())?;
    for &t in &stream.times_s {
        w.write_all(&t.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Read one binary stream written by [`write_stream_binary`], returning the
/// stream and the embedded scenario hash if one was recorded.
pub fn read_stream_binary(path: &Path) -> Result<(TimestampStream, Option<String>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::malformed(path, "file shorter than its header"))?;
    if &magic != STREAM_MAGIC {
        return Err(Error::malformed(path, "not a timestamp stream (bad magic)"));
    }
    let version = read_u16(&mut r, path)?;
    if version > STREAM_VERSION {
        return Err(Error::malformed(
            path,
            format!("stream version {version} is newer than supported {STREAM_VERSION}"),
        ));
    }
    let _flags = read_u16(&mut r, path)?;
    let channel_len = read_u32(&mut r, path)? as usize;
    let channel = read_string(&mut r, channel_len, path)?;
    let duration_s = read_f64(&mut r, path)?;
    let hash_len = read_u32(&mut r, path)? as usize;
    let hash = read_string(&mut r, hash_len, path)?;
    let count = read_u64(&mut r, path)? as usize;
    let mut times = Vec::with_capacity(count.min(1 << 24));
    for _ in 0..count {
        times.push(read_f64(&mut r, path)?);
    }
    let stream = TimestampStream::new(&channel, times, duration_s)
        .map_err(|e| Error::malformed(path, e.to_string()))?;
    Ok((stream, if hash.is_empty() { None } else { Some(hash) }))
}

fn read_exact_buf<const N: usize>(r: &mut impl Read, path: &Path) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|_| Error::malformed(path, "truncated stream file"))?;
    Ok(buf)
}

fn read_u16(r: &mut impl Read, path: &Path) -> Result<u16> {
    Ok(u16::from_le_bytes(read_exact_buf::<2>(r, path)?))
}

fn read_u32(r: &mut impl Read, path: &Path) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact_buf::<4>(r, path)?))
}

fn read_u64(r: &mut impl Read, path: &Path) -> Result<u64> {
    Ok(u64::from_le_bytes(read_exact_buf::<8>(r, path)?))
}

fn read_f64(r: &mut impl Read, path: &Path) -> Result<f64> {
    Ok(f64::from_le_bytes(read_exact_buf::<8>(r, path)?))
}

fn read_string(r: &mut impl Read, len: usize, path: &Path) -> Result<String> {
    if len > 1 << 20 {
        return Err(Error::malformed(path, "unreasonable string length"));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)
        .map_err(|_| Error::malformed(path, "truncated stream file"))?;
    String::from_utf8(buf).map_err(|_| Error::malformed(path, "string field is not UTF-8"))
}

/// Write pair events as CSV for inspection or external processing.
pub fn write_events_csv(path: &Path, events: &[PairEvent]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t_s,lambda_s_nm,lambda_i_nm,pump_index,metasurface_index")?;
    for e in events {
        writeln!(
            w,
            "{},{},{},{},{}",
            e.t_emit_s, e.lambda_s_nm, e.lambda_i_nm, e.pump_index, e.metasurface_index
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Write a coincidence histogram as `delay_ps,counts` rows.
pub fn write_histogram_csv(
    path: &Path,
    hist: &crate::correlations::CoincidenceHistogram,
    scenario_sha256: Option<&str>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    if let Some(hash) = scenario_sha256 {
        writeln!(w, "# scenario_sha256={hash}")?;
    }
    writeln!(w, "# bin_width_ps={}", hist.bin_width_ps)?;
    writeln!(w, "# duration_s={}", hist.duration_s)?;
    writeln!(w, "delay_ps,counts")?;
    for (i, &c) in hist.counts.iter().enumerate() {
        writeln!(w, "{},{}", hist.bin_center_ps(i), c)?;
    }
    w.flush()?;
    Ok(())
}

/// Write a reconstructed or model spectrum as `lambda_nm,intensity` rows.
pub fn write_spectrum_csv(
    path: &Path,
    lambda_nm: &[f64],
    intensity: &[f64],
    headers: &[(&str, String)],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (key, value) in headers {
        writeln!(w, "# {key}={value}")?;
    }
    writeln!(w, "lambda_nm,intensity")?;
    for (l, v) in lambda_nm.iter().zip(intensity) {
        writeln!(w, "{l},{v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Serialize any report as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes)?;
    Ok(())
}

/// One output file of a run, hashed for reproducibility checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Index of everything a run wrote. Produced last, so a complete manifest
/// implies a complete run. Contains no timestamps: two runs of the same
/// scenario and seed produce byte-identical manifests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario_name: String,
    pub scenario_sha256: String,
    pub seed: u64,
    pub schema_version: u32,
    pub crate_version: String,
    pub stream_format: String,
    pub files: Vec<ManifestFile>,
}

impl Manifest {
    pub fn new(
        scenario_name: &str,
        scenario_sha256: &str,
        seed: u64,
        schema_version: u32,
        stream_format: &str,
    ) -> Self {
        Manifest {
            scenario_name: scenario_name.to_string(),
            scenario_sha256: scenario_sha256.to_string(),
            seed,
            schema_version,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            stream_format: stream_format.to_string(),
            files: Vec::new(),
        }
    }

    /// Read an existing `manifest.json` so a later command can extend it.
    pub fn load(dir: &Path) -> Result<Option<Manifest>> {
        let path = dir.join("manifest.json");
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path)?;
        let manifest =
            serde_json::from_str(&text).map_err(|e| Error::malformed(&path, e.to_string()))?;
        Ok(Some(manifest))
    }

    /// Merge another command's file list into this manifest: entries with the
    /// same path are replaced by the newer hash.
    pub fn absorb_existing(&mut self, older: Manifest) {
        for file in older.files {
            if !self.files.iter().any(|f| f.path == file.path) {
                self.files.push(file);
            }
        }
    }

    /// Hash `path` and record it under its name relative to `base`.
    pub fn add_file(&mut self, base: &Path, path: &Path) -> Result<()> {
        let relative = path
            .strip_prefix(base)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/");
        let bytes = std::fs::metadata(path)?.len();
        self.files.push(ManifestFile {
            path: relative,
            sha256: sha256_hex_of_file(path)?,
            bytes,
        });
        Ok(())
    }

    /// Write the manifest itself (sorted by path) as `manifest.json`.
    pub fn write(&mut self, dir: &Path) -> Result<()> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        write_json(&dir.join("manifest.json"), self)
    }
}
