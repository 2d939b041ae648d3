//! File formats: PFM depth, two-channel gradient files, masks, images,
//! lightings, colour maps and CSV statistics.
//!
//! Rasters are row-major with row 0 at the top. Float files store rows
//! bottom to top, as PFM does; pixels outside the domain are NaN.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::{GrayImage, ImageBuffer, Luma, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, DomainMask};
use crate::error::{Error, Result};
use crate::field::{DepthMap, GradientField};
use crate::scalar::Real;

/// Row-major float raster.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Interleaved channels, row 0 at the top.
    pub data: Vec<f32>,
}

fn write_floats<W: Write>(out: &mut W, r: &Raster) -> Result<()> {
    let row_len = r.width * r.channels;
    for y in (0..r.height).rev() {
        for v in &r.data[y * row_len..(y + 1) * row_len] {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_floats<R: Read>(input: &mut R, width: usize, height: usize, channels: usize, little: bool) -> Result<Vec<f32>> {
    let row_len = width * channels;
    let mut bytes = vec![0u8; row_len * height * 4];
    input.read_exact(&mut bytes)?;
    let mut data = vec![0.0f32; row_len * height];
    for (i, chunk) in bytes.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (stored_row, col) = (i / row_len, i % row_len);
        data[(height - 1 - stored_row) * row_len + col] = v;
    }
    Ok(data)
}

fn header_line<R: BufRead>(input: &mut R) -> Result<String> {
    let mut line = String::new();
    if input.read_line(&mut line)? == 0 {
        return Err(Error::Parse("unexpected end of header".into()));
    }
    Ok(line.trim().to_string())
}

fn parse_dims(line: &str) -> Result<(usize, usize)> {
    let mut it = line.split_whitespace().map(str::parse::<usize>);
    match (it.next(), it.next(), it.next()) {
        (Some(Ok(w)), Some(Ok(h)), None) if w > 0 && h > 0 => Ok((w, h)),
        _ => Err(Error::Parse(format!("bad dimensions line {line:?}"))),
    }
}

/// Single-channel little-endian PFM.
pub fn write_pfm<W: Write>(out: W, r: &Raster) -> Result<()> {
    if r.channels != 1 {
        return Err(Error::InvalidArgument("PFM depth files are single-channel".into()));
    }
    let mut out = BufWriter::new(out);
    write!(out, "Pf\n{} {}\n-1.0\n", r.width, r.height)?;
    write_floats(&mut out, r)?;
    out.flush()?;
    Ok(())
}

pub fn read_pfm<R: Read>(input: R) -> Result<Raster> {
    let mut input = BufReader::new(input);
    let magic = header_line(&mut input)?;
    if magic != "Pf" {
        return Err(Error::Parse(format!("expected single-channel PFM, found {magic:?}")));
    }
    let (width, height) = parse_dims(&header_line(&mut input)?)?;
    let scale: f64 = header_line(&mut input)?
        .parse()
        .map_err(|e| Error::Parse(format!("bad PFM scale: {e}")))?;
    let data = read_floats(&mut input, width, height, 1, scale < 0.0)?;
    Ok(Raster { width, height, channels: 1, data })
}

/// Two-channel gradient file: header `Gf` then `<width> <height>`, followed
/// by little-endian `(p, q)` float pairs.
pub fn write_gradient_file<W: Write>(out: W, r: &Raster) -> Result<()> {
    if r.channels != 2 {
        return Err(Error::InvalidArgument("gradient files are two-channel".into()));
    }
    let mut out = BufWriter::new(out);
    write!(out, "Gf\n{} {}\n", r.width, r.height)?;
    write_floats(&mut out, r)?;
    out.flush()?;
    Ok(())
}

pub fn read_gradient_file<R: Read>(input: R) -> Result<Raster> {
    let mut input = BufReader::new(input);
    let magic = header_line(&mut input)?;
    if magic != "Gf" {
        return Err(Error::Parse(format!("expected gradient file, found {magic:?}")));
    }
    let (width, height) = parse_dims(&header_line(&mut input)?)?;
    let data = read_floats(&mut input, width, height, 2, true)?;
    Ok(Raster { width, height, channels: 2, data })
}

/// Depth raster over the domain's rectangle, NaN outside.
pub fn depth_raster<T: Real>(domain: &Domain, depth: &DepthMap<T>) -> Raster {
    let values: Vec<f32> = depth.values.iter().map(|v| v.as_f64() as f32).collect();
    Raster { width: domain.width(), height: domain.height(), channels: 1, data: domain.scatter(&values, f32::NAN) }
}

pub fn gradient_raster<T: Real>(domain: &Domain, g: &GradientField<T>) -> Raster {
    let p = domain.scatter(&g.p.iter().map(|v| v.as_f64() as f32).collect::<Vec<_>>(), f32::NAN);
    let q = domain.scatter(&g.q.iter().map(|v| v.as_f64() as f32).collect::<Vec<_>>(), f32::NAN);
    let data = p.iter().zip(&q).flat_map(|(&a, &b)| [a, b]).collect();
    Raster { width: domain.width(), height: domain.height(), channels: 2, data }
}

/// Mask of the finite cells of a raster (all channels finite).
pub fn finite_mask(r: &Raster) -> Result<DomainMask> {
    let inside = r.data.chunks_exact(r.channels).map(|c| c.iter().all(|v| v.is_finite())).collect();
    DomainMask::new(r.width, r.height, inside)
}

/// Reads a gradient file restricted to `mask`, or to its finite cells.
pub fn load_gradient<T: Real>(path: &Path, mask: Option<DomainMask>) -> Result<(Domain, GradientField<T>)> {
    let r = read_gradient_file(File::open(path)?)?;
    let mask = match mask {
        Some(m) => {
            if (m.width(), m.height()) != (r.width, r.height) {
                return Err(Error::InvalidMask(format!(
                    "mask is {}×{} but the gradient is {}×{}",
                    m.width(),
                    m.height(),
                    r.width,
                    r.height
                )));
            }
            m
        }
        None => finite_mask(&r)?,
    };
    let domain = Domain::new(mask)?;
    let mut g = GradientField::zeros(domain.len());
    for k in 0..domain.len() {
        let c = domain.cell_of(k);
        let (p, q) = (r.data[2 * c], r.data[2 * c + 1]);
        if !p.is_finite() || !q.is_finite() {
            let (x, y) = domain.pixel_of(k);
            return Err(Error::Parse(format!("non-finite gradient at ({x}, {y}) inside the mask")));
        }
        g.p[k] = T::lit(p as f64);
        g.q[k] = T::lit(q as f64);
    }
    Ok((domain, g))
}

pub fn save_gradient<T: Real>(path: &Path, domain: &Domain, g: &GradientField<T>) -> Result<()> {
    write_gradient_file(File::create(path)?, &gradient_raster(domain, g))
}

pub fn save_depth<T: Real>(path: &Path, domain: &Domain, depth: &DepthMap<T>) -> Result<()> {
    write_pfm(File::create(path)?, &depth_raster(domain, depth))
}

/// Loads a depth PFM onto `domain`'s pixels.
pub fn load_depth<T: Real>(path: &Path, domain: &Domain) -> Result<DepthMap<T>> {
    let r = read_pfm(File::open(path)?)?;
    if (r.width, r.height) != (domain.width(), domain.height()) {
        return Err(Error::DimensionMismatch { expected: domain.width() * domain.height(), got: r.data.len() });
    }
    Ok(DepthMap::new(domain.gather(&r.data).into_iter().map(|v| T::lit(v as f64)).collect()))
}

/// Grey-level mask image; values above 127 are inside.
pub fn load_mask(path: &Path) -> Result<DomainMask> {
    let img = image::open(path)?.to_luma8();
    let (w, h) = img.dimensions();
    DomainMask::new(w as usize, h as usize, img.pixels().map(|p| p.0[0] > 127).collect())
}

pub fn save_mask(path: &Path, mask: &DomainMask) -> Result<()> {
    let img = GrayImage::from_fn(mask.width() as u32, mask.height() as u32, |x, y| {
        Luma([if mask.is_inside(x as usize, y as usize) { 255 } else { 0 }])
    });
    img.save(path)?;
    Ok(())
}

/// Grey-level image in `[0, 255]`, row-major.
pub fn load_gray(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let img = image::open(path)?.to_luma32f();
    let (w, h) = img.dimensions();
    Ok((w as usize, h as usize, img.pixels().map(|p| p.0[0] as f64 * 255.0).collect()))
}

/// Writes values clamped to `[0, 255]` as an 8-bit image.
pub fn save_gray(path: &Path, width: usize, height: usize, values: &[f64]) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::DimensionMismatch { expected: width * height, got: values.len() });
    }
    let img = GrayImage::from_fn(width as u32, height as u32, |x, y| {
        Luma([values[y as usize * width + x as usize].round().clamp(0.0, 255.0) as u8])
    });
    img.save(path)?;
    Ok(())
}

/// One `lx ly lz` per line; blank lines and `#` comments are skipped.
pub fn parse_lightings(text: &str) -> Result<Vec<[f64; 3]>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            let v: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("bad lighting {l:?}: {e}"))))
                .collect::<Result<_>>()?;
            match v[..] {
                [x, y, z] if (x * x + y * y + z * z) > 0.0 => Ok([x, y, z]),
                _ => Err(Error::Parse(format!("lighting line must hold three components, not all zero: {l:?}"))),
            }
        })
        .collect()
}

pub fn format_lightings(lights: &[[f64; 3]]) -> String {
    lights.iter().map(|l| format!("{} {} {}\n", l[0], l[1], l[2])).collect()
}

/// RGB encoding `(n + 1)/2` of unit normals; black outside the domain.
pub fn save_normal_map<T: Real>(path: &Path, domain: &Domain, normals: &[[T; 3]]) -> Result<()> {
    let mut img: RgbImage = ImageBuffer::new(domain.width() as u32, domain.height() as u32);
    for (k, n) in normals.iter().enumerate() {
        let (x, y) = domain.pixel_of(k);
        let c = |v: T| ((v.as_f64() + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8;
        img.put_pixel(x as u32, y as u32, Rgb([c(n[0]), c(n[1]), c(n[2])]));
    }
    img.save(path)?;
    Ok(())
}

/// Colour for `t ∈ [0, 1]`: blue at 0 through cyan, green and yellow to red at 1.
pub fn error_color(t: f64) -> [u8; 3] {
    let t = if t.is_nan() { 1.0 } else { t.clamp(0.0, 1.0) };
    let to8 = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    [to8(4.0 * t - 2.0), to8((4.0 * t).min(4.0 - 4.0 * t)), to8(2.0 - 4.0 * t)]
}

/// Absolute error map, blue at 0 and red at `cap` or above; white outside.
pub fn save_error_map(path: &Path, domain: &Domain, errors: &[f64], cap: f64) -> Result<()> {
    if !(cap > 0.0) {
        return Err(Error::InvalidArgument(format!("error cap must be positive, got {cap}")));
    }
    let mut img: RgbImage = ImageBuffer::from_pixel(domain.width() as u32, domain.height() as u32, Rgb([255; 3]));
    for (k, e) in errors.iter().enumerate() {
        let (x, y) = domain.pixel_of(k);
        img.put_pixel(x as u32, y as u32, Rgb(error_color(e.abs() / cap)));
    }
    img.save(path)?;
    Ok(())
}

/// One row of a solver statistics table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub size: usize,
    pub preconditioner: String,
    pub tau: f64,
    pub alpha: f64,
    pub iterations: usize,
    pub seconds: f64,
    pub final_residual: f64,
}

pub fn write_csv<W: Write, S: Serialize>(out: W, rows: &[S]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read, S: for<'de> Deserialize<'de>>(input: R) -> Result<Vec<S>> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_colours_span_blue_to_red() {
        assert_eq!(error_color(0.0), [0, 0, 255]);
        assert_eq!(error_color(1.0), [255, 0, 0]);
        assert_eq!(error_color(7.0), [255, 0, 0]);
        assert_eq!(error_color(0.25), [0, 255, 255]);
        assert_eq!(error_color(0.5), [0, 255, 0]);
        assert_eq!(error_color(0.75), [255, 255, 0]);
    }

    #[test]
    fn lightings_parse() {
        let l = parse_lightings("# lights\n0 0 1\n\n 0.5 0 1 # tilted\n").unwrap();
        assert_eq!(l, vec![[0.0, 0.0, 1.0], [0.5, 0.0, 1.0]]);
        assert!(parse_lightings("1 2\n").is_err());
        assert!(parse_lightings("0 0 0\n").is_err());
        assert!(parse_lightings("a b c\n").is_err());
        assert_eq!(parse_lightings(&format_lightings(&l)).unwrap(), l);
    }

    #[test]
    fn pfm_rows_are_stored_bottom_up() {
        let r = Raster { width: 2, height: 2, channels: 1, data: vec![1.0, 2.0, 3.0, 4.0] };
        let mut buf = Vec::new();
        write_pfm(&mut buf, &r).unwrap();
        let header = b"Pf\n2 2\n-1.0\n";
        assert_eq!(&buf[..header.len()], header);
        let first = f32::from_le_bytes(buf[header.len()..header.len() + 4].try_into().unwrap());
        assert_eq!(first, 3.0);
        assert_eq!(read_pfm(&buf[..]).unwrap(), r);
    }

    #[test]
    fn big_endian_pfm_reads() {
        let mut buf = b"Pf\n1 1\n1.0\n".to_vec();
        buf.extend_from_slice(&2.5f32.to_be_bytes());
        assert_eq!(read_pfm(&buf[..]).unwrap().data, vec![2.5]);
    }

    #[test]
    fn malformed_headers_fail() {
        assert!(read_pfm(&b"P5\n2 2\n"[..]).is_err());
        assert!(read_pfm(&b"Pf\n2\n-1\n"[..]).is_err());
        assert!(read_gradient_file(&b"Gf\n2 2\n\0\0"[..]).is_err());
    }
}
