//! On-disk formats for series, masks, parameter maps and T10 maps.
//!
//! A study directory holds one raw little-endian `f32` volume per frame,
//! named `<name>_t<k>.f32`, plus a `series.meta` descriptor with
//! `key=value` lines: `dims`, `spacing_mm`, `timestamps_s`, `tr_s`,
//! `flip_angles_deg`, `r1`, `htc`. Optional variable-flip-angle scans
//! live beside the dynamic frames as `<name>_a<k>.f32`, one per leading
//! calibration angle. Masks are a one-line `dims=nx,ny,nz` header
//! followed by packed 0/1 bytes. Parameter and T10 maps keep their f64
//! channels as raw bits, so NaN patterns round-trip bit-exactly.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::relaxometry::T10Map;
use crate::volume::{AcquisitionParams, Dims, ParameterMap, TimeSeries, Volume3D, VoxelMask};

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn fmt_f64_list(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_f64(path: &Path, key: &str, raw: &str) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(path, format!("bad float for key '{key}': '{raw}'")))
}

fn parse_f64_list(path: &Path, key: &str, raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(path, format!("bad float in list '{key}': '{tok}'")))
        })
        .collect()
}

fn parse_dims(path: &Path, raw: &str) -> Result<Dims> {
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::parse(path, format!("dims needs 3 entries, got '{raw}'")));
    }
    let mut out = [0usize; 3];
    for (slot, tok) in out.iter_mut().zip(&parts) {
        *slot = tok
            .parse::<usize>()
            .map_err(|_| Error::parse(path, format!("bad dim '{tok}'")))?;
    }
    Ok((out[0], out[1], out[2]))
}

struct SeriesMeta {
    dims: Dims,
    spacing_mm: (f64, f64, f64),
    timestamps_s: Vec<f64>,
    acq: AcquisitionParams,
}

fn load_series_meta(path: &Path) -> Result<SeriesMeta> {
    let text = String::from_utf8(read_file(path)?)
        .map_err(|_| Error::parse(path, "descriptor is not valid UTF-8"))?;
    let mut dims = None;
    let mut spacing = None;
    let mut timestamps = None;
    let mut tr_s = None;
    let mut flip = None;
    let mut r1 = None;
    let mut htc = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, format!("expected key=value, got '{line}'")))?;
        match key.trim() {
            "dims" => dims = Some(parse_dims(path, value)?),
            "spacing_mm" => {
                let v = parse_f64_list(path, "spacing_mm", value)?;
                if v.len() != 3 {
                    return Err(Error::parse(path, "spacing_mm needs 3 entries"));
                }
                spacing = Some((v[0], v[1], v[2]));
            }
            "timestamps_s" => timestamps = Some(parse_f64_list(path, "timestamps_s", value)?),
            "tr_s" => tr_s = Some(parse_f64(path, "tr_s", value)?),
            "flip_angles_deg" => flip = Some(parse_f64_list(path, "flip_angles_deg", value)?),
            "r1" => r1 = Some(parse_f64(path, "r1", value)?),
            "htc" => htc = Some(parse_f64(path, "htc", value)?),
            _ => {} // tolerate unknown keys
        }
    }
    let missing = |key: &str| Error::parse(path, format!("missing key '{key}'"));
    let acq = AcquisitionParams {
        tr_s: tr_s.ok_or_else(|| missing("tr_s"))?,
        flip_angles_deg: flip.ok_or_else(|| missing("flip_angles_deg"))?,
        r1: r1.ok_or_else(|| missing("r1"))?,
        htc: htc.ok_or_else(|| missing("htc"))?,
    };
    acq.validate()?;
    Ok(SeriesMeta {
        dims: dims.ok_or_else(|| missing("dims"))?,
        spacing_mm: spacing.ok_or_else(|| missing("spacing_mm"))?,
        timestamps_s: timestamps.ok_or_else(|| missing("timestamps_s"))?,
        acq,
    })
}

fn load_volume_f32(path: &Path, dims: Dims, spacing_mm: (f64, f64, f64)) -> Result<Volume3D> {
    let bytes = read_file(path)?;
    let n = dims.0 * dims.1 * dims.2;
    if bytes.len() != n * 4 {
        return Err(Error::parse(
            path,
            format!("expected {} bytes for dims {:?}, found {}", n * 4, dims, bytes.len()),
        ));
    }
    let mut data = Vec::with_capacity(n);
    for chunk in bytes.chunks_exact(4) {
        data.push(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64);
    }
    Volume3D::new(dims, spacing_mm, data)
}

fn save_volume_f32(path: &Path, volume: &Volume3D) -> Result<()> {
    let mut bytes = Vec::with_capacity(volume.len() * 4);
    for &v in volume.data() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    write_file(path, &bytes)
}

/// Find the unique volume stem `<name>` such that `<name>_t0.f32` exists.
fn discover_series_name(dir: &Path) -> Result<String> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let file_name = entry.file_name();
        let file_name = file_name.to_string_lossy();
        if let Some(stem) = file_name.strip_suffix("_t0.f32") {
            names.push(stem.to_string());
        }
    }
    names.sort();
    match names.len() {
        0 => Err(Error::parse(dir, "no '<name>_t0.f32' volume found")),
        1 => Ok(names.pop().expect("one element")),
        _ => Err(Error::parse(
            dir,
            format!("ambiguous series: multiple volume stems {names:?}"),
        )),
    }
}

/// Load a dynamic study from a directory (see module docs for layout).
pub fn load_timeseries(dir: &Path) -> Result<(TimeSeries, AcquisitionParams)> {
    let meta = load_series_meta(&dir.join("series.meta"))?;
    let name = discover_series_name(dir)?;
    let mut volumes = Vec::with_capacity(meta.timestamps_s.len());
    for k in 0..meta.timestamps_s.len() {
        let path = dir.join(format!("{name}_t{k}.f32"));
        volumes.push(load_volume_f32(&path, meta.dims, meta.spacing_mm)?);
    }
    let series = TimeSeries::new(volumes, meta.timestamps_s)?;
    Ok((series, meta.acq))
}

/// Write a dynamic study (volumes as f32 plus `series.meta`).
///
/// Intensities are quantized to f32 on disk; a series whose values are
/// all f32-representable round-trips exactly.
pub fn save_timeseries(
    dir: &Path,
    name: &str,
    series: &TimeSeries,
    acq: &AcquisitionParams,
) -> Result<()> {
    acq.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let dims = series.dims();
    let spacing = series.spacing_mm();
    let meta = format!(
        "dims={},{},{}\nspacing_mm={}\ntimestamps_s={}\ntr_s={}\nflip_angles_deg={}\nr1={}\nhtc={}\n",
        dims.0,
        dims.1,
        dims.2,
        fmt_f64_list(&[spacing.0, spacing.1, spacing.2]),
        fmt_f64_list(series.timestamps_s()),
        acq.tr_s,
        fmt_f64_list(&acq.flip_angles_deg),
        acq.r1,
        acq.htc,
    );
    write_file(&dir.join("series.meta"), meta.as_bytes())?;
    for (k, volume) in series.volumes().iter().enumerate() {
        save_volume_f32(&dir.join(format!("{name}_t{k}.f32")), volume)?;
    }
    Ok(())
}

/// Load the variable-flip-angle calibration scans stored beside a series
/// (`<name>_a<k>.f32`, one per leading entry of `flip_angles_deg`).
/// Returns the scans in angle order plus the study's acquisition params.
pub fn load_vfa_set(dir: &Path) -> Result<(Vec<Volume3D>, AcquisitionParams)> {
    let meta = load_series_meta(&dir.join("series.meta"))?;
    let name = discover_series_name(dir)?;
    let n_cal = meta.acq.flip_angles_deg.len().saturating_sub(1);
    if n_cal < 2 {
        return Err(Error::InvalidParam(format!(
            "study lists {} flip angles; VFA needs at least two calibration angles plus the dynamic angle",
            meta.acq.flip_angles_deg.len()
        )));
    }
    let mut volumes = Vec::with_capacity(n_cal);
    for k in 0..n_cal {
        let path = dir.join(format!("{name}_a{k}.f32"));
        volumes.push(load_volume_f32(&path, meta.dims, meta.spacing_mm)?);
    }
    Ok((volumes, meta.acq))
}

/// Write VFA calibration scans beside an already-saved series.
pub fn save_vfa_set(dir: &Path, name: &str, volumes: &[Volume3D]) -> Result<()> {
    for (k, volume) in volumes.iter().enumerate() {
        save_volume_f32(&dir.join(format!("{name}_a{k}.f32")), volume)?;
    }
    Ok(())
}

/// Load a `.mask` file (header `dims=nx,ny,nz`, then packed 0/1 bytes).
pub fn load_mask(path: &Path) -> Result<VoxelMask> {
    let bytes = read_file(path)?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::parse(path, "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| Error::parse(path, "header is not valid UTF-8"))?;
    let dims_str = header
        .trim()
        .strip_prefix("dims=")
        .ok_or_else(|| Error::parse(path, format!("expected 'dims=nx,ny,nz' header, got '{header}'")))?;
    let dims = parse_dims(path, dims_str)?;
    let body = &bytes[newline + 1..];
    let n = dims.0 * dims.1 * dims.2;
    if body.len() != n {
        return Err(Error::parse(
            path,
            format!("expected {n} mask bytes for dims {dims:?}, found {}", body.len()),
        ));
    }
    let mut bits = Vec::with_capacity(n);
    for (i, &b) in body.iter().enumerate() {
        match b {
            0 => bits.push(false),
            1 => bits.push(true),
            other => {
                return Err(Error::parse(path, format!("mask byte at voxel {i} is {other}, not 0/1")))
            }
        }
    }
    VoxelMask::new(dims, bits)
}

/// Write a `.mask` file.
pub fn save_mask(path: &Path, mask: &VoxelMask) -> Result<()> {
    let dims = mask.dims();
    let mut bytes = format!("dims={},{},{}\n", dims.0, dims.1, dims.2).into_bytes();
    bytes.extend(mask.bits().iter().map(|&b| b as u8));
    write_file(path, &bytes)
}

const PMAP_MAGIC: &str = "pmap";
const T10_MAGIC: &str = "t10map";

fn write_f64_channel(out: &mut Vec<u8>, values: &[f64]) {
    for &v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn read_f64_channel(bytes: &[u8], n: usize, offset: &mut usize) -> Vec<f64> {
    let mut values = Vec::with_capacity(n);
    for chunk in bytes[*offset..*offset + n * 8].chunks_exact(8) {
        values.push(f64::from_le_bytes(chunk.try_into().expect("8-byte chunk")));
    }
    *offset += n * 8;
    values
}

fn parse_map_header<'a>(path: &Path, bytes: &'a [u8], magic: &str) -> Result<(Dims, &'a [u8])> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::parse(path, "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| Error::parse(path, "header is not valid UTF-8"))?;
    let rest = header
        .trim()
        .strip_prefix(magic)
        .and_then(|r| r.trim_start().strip_prefix("dims="))
        .ok_or_else(|| Error::parse(path, format!("expected '{magic} dims=nx,ny,nz', got '{header}'")))?;
    Ok((parse_dims(path, rest)?, &bytes[newline + 1..]))
}

/// Write a fitted parameter map. The four f64 channels (ktrans, ve, kep,
/// mse) are stored as raw little-endian bits followed by one converged
/// byte per voxel, so the file round-trips bit-exactly.
pub fn save_parameter_map(map: &ParameterMap, path: &Path) -> Result<()> {
    let dims = map.dims();
    let mut bytes = format!("{PMAP_MAGIC} dims={},{},{}\n", dims.0, dims.1, dims.2).into_bytes();
    write_f64_channel(&mut bytes, map.ktrans());
    write_f64_channel(&mut bytes, map.ve());
    write_f64_channel(&mut bytes, map.kep());
    write_f64_channel(&mut bytes, map.mse());
    bytes.extend(map.converged().iter().map(|&b| b as u8));
    write_file(path, &bytes)
}

/// Load a parameter map written by [`save_parameter_map`].
pub fn load_parameter_map(path: &Path) -> Result<ParameterMap> {
    let bytes = read_file(path)?;
    let (dims, body) = parse_map_header(path, &bytes, PMAP_MAGIC)?;
    let n = dims.0 * dims.1 * dims.2;
    if body.len() != n * 33 {
        return Err(Error::parse(
            path,
            format!("expected {} body bytes for dims {dims:?}, found {}", n * 33, body.len()),
        ));
    }
    let mut offset = 0;
    let ktrans = read_f64_channel(body, n, &mut offset);
    let ve = read_f64_channel(body, n, &mut offset);
    let kep = read_f64_channel(body, n, &mut offset);
    let mse = read_f64_channel(body, n, &mut offset);
    let mut converged = Vec::with_capacity(n);
    for (i, &b) in body[offset..].iter().enumerate() {
        match b {
            0 => converged.push(false),
            1 => converged.push(true),
            other => {
                return Err(Error::parse(
                    path,
                    format!("converged byte at voxel {i} is {other}, not 0/1"),
                ))
            }
        }
    }
    ParameterMap::from_channels(dims, ktrans, ve, kep, mse, converged)
}

/// Write a T10 map (t10_s then m0 channels, raw f64 bits).
pub fn save_t10_map(map: &T10Map, path: &Path) -> Result<()> {
    let dims = map.dims();
    let mut bytes = format!("{T10_MAGIC} dims={},{},{}\n", dims.0, dims.1, dims.2).into_bytes();
    write_f64_channel(&mut bytes, map.t10_s());
    write_f64_channel(&mut bytes, map.m0());
    write_file(path, &bytes)
}

/// Load a T10 map written by [`save_t10_map`].
pub fn load_t10_map(path: &Path) -> Result<T10Map> {
    let bytes = read_file(path)?;
    let (dims, body) = parse_map_header(path, &bytes, T10_MAGIC)?;
    let n = dims.0 * dims.1 * dims.2;
    if body.len() != n * 16 {
        return Err(Error::parse(
            path,
            format!("expected {} body bytes for dims {dims:?}, found {}", n * 16, body.len()),
        ));
    }
    let mut offset = 0;
    let t10_s = read_f64_channel(body, n, &mut offset);
    let m0 = read_f64_channel(body, n, &mut offset);
    T10Map::new(dims, t10_s, m0)
}

/// Write a two-column CSV curve (time in minutes, value).
pub fn save_curve_csv(path: &Path, header: &str, t_min: &[f64], values: &[f64]) -> Result<()> {
    if t_min.len() != values.len() {
        return Err(Error::InvalidParam(format!(
            "curve CSV needs equal lengths, got {} times and {} values",
            t_min.len(),
            values.len()
        )));
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let write = |out: &mut std::io::BufWriter<fs::File>, line: String| {
        out.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))
    };
    write(&mut out, format!("{header}\n"))?;
    for (t, v) in t_min.iter().zip(values) {
        write(&mut out, format!("{t},{v}\n"))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Load a two-column CSV curve; returns (times, values) and skips the
/// header line.
pub fn load_curve_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    std::io::BufReader::new(file)
        .read_to_string(&mut text)
        .map_err(|e| Error::io(path, e))?;
    let mut t = Vec::new();
    let mut v = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(path, format!("line {} is not 'time,value'", i + 1)))?;
        t.push(parse_f64(path, "time", a)?);
        v.push(parse_f64(path, "value", b)?);
    }
    Ok((t, v))
}
