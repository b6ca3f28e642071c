//! Reading and writing point clouds as ASCII PLY or XYZ text.
//!
//! The PLY support is deliberately a subset: ASCII format, a single `vertex`
//! element whose `x`, `y`, `z` properties are `float` or `double`. Extra
//! scalar vertex properties are skipped; list properties and non-vertex
//! elements are rejected. Coordinates are written with Rust's shortest
//! round-trip float formatting, so `write` then `load` reproduces a cloud
//! bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Point3;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Supported on-disk cloud encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    /// ASCII PLY, `vertex` element only.
    PlyAscii,
    /// Plain `x y z` per line; `#` starts a comment line.
    Xyz,
}

impl CloudFormat {
    /// Guesses the format from a file extension (`ply`, `xyz`, or `txt`).
    pub fn from_extension(path: &Path) -> Option<CloudFormat> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("ply") => Some(CloudFormat::PlyAscii),
            Some("xyz") | Some("txt") => Some(CloudFormat::Xyz),
            _ => None,
        }
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads a cloud from disk. Parse failures name the offending 1-based line.
pub fn load_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        lines.push((i + 1, line));
    }
    let points = match format {
        CloudFormat::PlyAscii => parse_ply(path, &lines)?,
        CloudFormat::Xyz => parse_xyz(path, &lines)?,
    };
    if points.is_empty() {
        return Err(parse_err(path, lines.len(), "file contains no points"));
    }
    PointCloud::from_points(points)
}

/// Writes a cloud to disk. Errors on an empty cloud rather than producing a
/// file that `load_cloud` would reject.
pub fn write_cloud(cloud: &PointCloud, path: &Path, format: CloudFormat) -> Result<()> {
    if cloud.is_empty() {
        return Err(Error::InvalidArgument(
            "refusing to write an empty cloud".into(),
        ));
    }
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let result = match format {
        CloudFormat::PlyAscii => write_ply(&mut w, cloud),
        CloudFormat::Xyz => write_xyz(&mut w, cloud),
    };
    result.and_then(|_| w.flush()).map_err(|e| io_err(path, e))
}

fn write_ply(w: &mut impl Write, cloud: &PointCloud) -> std::io::Result<()> {
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", cloud.len())?;
    writeln!(w, "property float x")?;
    writeln!(w, "property float y")?;
    writeln!(w, "property float z")?;
    writeln!(w, "end_header")?;
    for p in cloud.points() {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    Ok(())
}

fn write_xyz(w: &mut impl Write, cloud: &PointCloud) -> std::io::Result<()> {
    for p in cloud.points() {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    Ok(())
}

/// Scalar PLY property types we can skip over in ASCII rows.
const SCALAR_TYPES: &[&str] = &[
    "char", "int8", "uchar", "uint8", "short", "int16", "ushort", "uint16", "int", "int32",
    "uint", "uint32", "float", "float32", "double", "float64",
];

const COORDINATE_TYPES: &[&str] = &["float", "float32", "double", "float64"];

fn parse_ply(path: &Path, lines: &[(usize, String)]) -> Result<Vec<Point3<f64>>> {
    let mut iter = lines.iter();

    let (ln, magic) = iter
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file, expected `ply`"))?;
    if magic.trim() != "ply" {
        return Err(parse_err(path, *ln, "expected `ply` magic"));
    }

    let mut vertex_count: Option<usize> = None;
    // Position of each scalar property within a vertex row, by name.
    let mut property_names: Vec<String> = Vec::new();
    let mut property_types: Vec<String> = Vec::new();
    let mut saw_format = false;
    let mut header_end_line = 0;

    for (ln, raw) in iter.by_ref() {
        let line = raw.trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("format") => {
                let rest: Vec<&str> = tokens.collect();
                if rest != ["ascii", "1.0"] {
                    return Err(parse_err(path, *ln, "only `format ascii 1.0` is supported"));
                }
                saw_format = true;
            }
            Some("comment") => continue,
            Some("element") => {
                let name = tokens.next().unwrap_or("");
                if name != "vertex" {
                    return Err(parse_err(
                        path,
                        *ln,
                        format!("unsupported element `{name}` (only `vertex` is supported)"),
                    ));
                }
                if vertex_count.is_some() {
                    return Err(parse_err(path, *ln, "duplicate vertex element"));
                }
                let count: usize = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| parse_err(path, *ln, "bad vertex count"))?;
                vertex_count = Some(count);
            }
            Some("property") => {
                if vertex_count.is_none() {
                    return Err(parse_err(path, *ln, "property before any element"));
                }
                let ty = tokens.next().unwrap_or("");
                if ty == "list" {
                    return Err(parse_err(path, *ln, "list properties are not supported"));
                }
                if !SCALAR_TYPES.contains(&ty) {
                    return Err(parse_err(path, *ln, format!("unknown property type `{ty}`")));
                }
                let name = tokens
                    .next()
                    .ok_or_else(|| parse_err(path, *ln, "property is missing a name"))?;
                property_names.push(name.to_string());
                property_types.push(ty.to_string());
            }
            Some("end_header") => {
                header_end_line = *ln;
                break;
            }
            Some(other) => {
                return Err(parse_err(
                    path,
                    *ln,
                    format!("unexpected header keyword `{other}`"),
                ));
            }
            None => continue,
        }
    }

    if header_end_line == 0 {
        return Err(parse_err(path, lines.len(), "missing `end_header`"));
    }
    if !saw_format {
        return Err(parse_err(path, header_end_line, "missing `format` line"));
    }
    let vertex_count =
        vertex_count.ok_or_else(|| parse_err(path, header_end_line, "missing vertex element"))?;

    let mut coord_pos = [usize::MAX; 3];
    for (i, name) in property_names.iter().enumerate() {
        let slot = match name.as_str() {
            "x" => 0,
            "y" => 1,
            "z" => 2,
            _ => continue,
        };
        if !COORDINATE_TYPES.contains(&property_types[i].as_str()) {
            return Err(parse_err(
                path,
                header_end_line,
                format!("property `{name}` must be float or double"),
            ));
        }
        coord_pos[slot] = i;
    }
    if coord_pos.contains(&usize::MAX) {
        return Err(parse_err(
            path,
            header_end_line,
            "vertex element must declare x, y and z",
        ));
    }

    let mut points = Vec::with_capacity(vertex_count);
    for (ln, raw) in iter.by_ref() {
        if points.len() == vertex_count {
            // Tolerate trailing blank lines only.
            if !raw.trim().is_empty() {
                return Err(parse_err(path, *ln, "trailing data after the last vertex"));
            }
            continue;
        }
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != property_names.len() {
            return Err(parse_err(
                path,
                *ln,
                format!(
                    "expected {} values per vertex, found {}",
                    property_names.len(),
                    tokens.len()
                ),
            ));
        }
        let mut coords = [0.0f64; 3];
        for (slot, &pos) in coord_pos.iter().enumerate() {
            coords[slot] = parse_coordinate(path, *ln, tokens[pos])?;
        }
        points.push(Point3::new(coords[0], coords[1], coords[2]));
    }
    if points.len() < vertex_count {
        return Err(parse_err(
            path,
            lines.last().map_or(header_end_line, |(ln, _)| *ln),
            format!("expected {vertex_count} vertices, found {}", points.len()),
        ));
    }
    Ok(points)
}

fn parse_xyz(path: &Path, lines: &[(usize, String)]) -> Result<Vec<Point3<f64>>> {
    let mut points = Vec::new();
    for (ln, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 3 {
            return Err(parse_err(
                path,
                *ln,
                format!("expected 3 coordinates, found {}", tokens.len()),
            ));
        }
        let x = parse_coordinate(path, *ln, tokens[0])?;
        let y = parse_coordinate(path, *ln, tokens[1])?;
        let z = parse_coordinate(path, *ln, tokens[2])?;
        points.push(Point3::new(x, y, z));
    }
    Ok(points)
}

fn parse_coordinate(path: &Path, line: usize, token: &str) -> Result<f64> {
    let value: f64 = token
        .parse()
        .map_err(|_| parse_err(path, line, format!("`{token}` is not a number")))?;
    if !value.is_finite() {
        return Err(parse_err(path, line, format!("`{token}` is not finite")));
    }
    Ok(value)
}
