//! PLY point clouds in ASCII, binary little-endian or binary big-endian
//! encoding. The `vertex` element must carry `x`, `y`, `z` and an
//! `intensity` (or `reflectance`) property.
//!
//! Intensities are mapped linearly onto `[0, 255]` from a declared range:
//! a `comment intensity_range <lo> <hi>` header line, else the full range of
//! a `uchar` property, else the observed min/max.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{collect_finite, Loaded};
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, ATTRIBUTE_PEAK};

const INTENSITY_NAMES: [&str; 2] = ["intensity", "reflectance"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Ascii,
    Binary { little: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn decode(self, b: &[u8], little: bool) -> f64 {
        macro_rules! num {
            ($t:ty, $n:expr) => {{
                let arr: [u8; $n] = b[..$n].try_into().unwrap();
                (if little { <$t>::from_le_bytes(arr) } else { <$t>::from_be_bytes(arr) }) as f64
            }};
        }
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => num!(i16, 2),
            Scalar::U16 => num!(u16, 2),
            Scalar::I32 => num!(i32, 4),
            Scalar::U32 => num!(u32, 4),
            Scalar::F32 => num!(f32, 4),
            Scalar::F64 => num!(f64, 8),
        }
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Scalar(Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    kind: Kind,
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug)]
struct Header {
    format: Format,
    elements: Vec<Element>,
    intensity_range: Option<(f64, f64)>,
    /// Byte offset of the first data byte.
    data_start: usize,
    /// Lines in the header, for ASCII line numbering.
    lines: usize,
}

fn parse_error(location: String, detail: impl Into<String>) -> Error {
    Error::Parse {
        location,
        detail: detail.into(),
    }
}

fn at_line(n: usize) -> String {
    format!("line {n}")
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut intensity_range = None;
    loop {
        line_no += 1;
        let Some(nl) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            return Err(parse_error(at_line(line_no), "header ends without 'end_header'"));
        };
        let raw = &bytes[pos..pos + nl];
        pos += nl + 1;
        let line = std::str::from_utf8(raw)
            .map_err(|_| parse_error(at_line(line_no), "header is not valid UTF-8"))?
            .trim_end_matches('\r');
        let words: Vec<&str> = line.split_whitespace().collect();
        if line_no == 1 {
            if line.trim() != "ply" {
                return Err(parse_error(at_line(1), "missing 'ply' magic"));
            }
            continue;
        }
        let err = |d: String| parse_error(at_line(line_no), d);
        match words.as_slice() {
            [] => {}
            ["end_header"] => break,
            ["format", f, version] => {
                if *version != "1.0" {
                    return Err(err(format!("unsupported PLY version {version}")));
                }
                format = Some(match *f {
                    "ascii" => Format::Ascii,
                    "binary_little_endian" => Format::Binary { little: true },
                    "binary_big_endian" => Format::Binary { little: false },
                    other => return Err(err(format!("unknown format '{other}'"))),
                });
            }
            ["comment", "intensity_range", lo, hi] => {
                let (lo, hi) = (lo.parse::<f64>(), hi.parse::<f64>());
                match (lo, hi) {
                    (Ok(lo), Ok(hi)) if lo.is_finite() && hi.is_finite() && hi > lo => {
                        intensity_range = Some((lo, hi))
                    }
                    _ => return Err(err("bad intensity_range comment".into())),
                }
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", name, count] => {
                let count = count
                    .parse::<usize>()
                    .map_err(|_| err(format!("bad element count '{count}'")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            ["property", rest @ ..] => {
                let Some(element) = elements.last_mut() else {
                    return Err(err("property before any element".into()));
                };
                let scalar = |t: &str| Scalar::parse(t).ok_or_else(|| err(format!("unknown type '{t}'")));
                let prop = match rest {
                    ["list", count, item, name] => Property {
                        name: name.to_string(),
                        kind: Kind::List {
                            count: scalar(count)?,
                            item: scalar(item)?,
                        },
                    },
                    [t, name] => Property {
                        name: name.to_string(),
                        kind: Kind::Scalar(scalar(t)?),
                    },
                    _ => return Err(err(format!("malformed property line '{line}'"))),
                };
                element.props.push(prop);
            }
            _ => return Err(err(format!("unrecognized header line '{line}'"))),
        }
    }
    let format = format.ok_or_else(|| parse_error("header".into(), "missing 'format' line"))?;
    Ok(Header {
        format,
        elements,
        intensity_range,
        data_start: pos,
        lines: line_no,
    })
}

/// Positions of x, y, z and intensity within the vertex element.
struct VertexLayout {
    element: usize,
    columns: [usize; 4],
    intensity_type: Scalar,
}

fn vertex_layout(h: &Header) -> Result<VertexLayout> {
    let element = h
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| parse_error("header".into(), "no 'vertex' element"))?;
    let props = &h.elements[element].props;
    let find = |names: &[&str], label: &str| -> Result<(usize, Scalar)> {
        let i = props
            .iter()
            .position(|p| names.contains(&p.name.as_str()))
            .ok_or_else(|| parse_error("header".into(), format!("vertex element has no '{label}' property")))?;
        match props[i].kind {
            Kind::Scalar(s) => Ok((i, s)),
            Kind::List { .. } => Err(parse_error("header".into(), format!("property '{label}' must be a scalar"))),
        }
    };
    let (x, _) = find(&["x"], "x")?;
    let (y, _) = find(&["y"], "y")?;
    let (z, _) = find(&["z"], "z")?;
    let (a, intensity_type) = find(&INTENSITY_NAMES, "intensity")?;
    Ok(VertexLayout {
        element,
        columns: [x, y, z, a],
        intensity_type,
    })
}

fn read_ascii(text: &[u8], h: &Header, layout: &VertexLayout) -> Result<Vec<[f64; 4]>> {
    let text = std::str::from_utf8(text).map_err(|e| {
        parse_error(format!("byte offset {}", h.data_start + e.valid_up_to()), "data is not valid UTF-8")
    })?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (h.lines + i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let mut out = Vec::new();
    for (e_idx, element) in h.elements.iter().enumerate().take(layout.element + 1) {
        let wanted = e_idx == layout.element;
        if wanted {
            out.reserve(element.count.min(1 << 20));
        }
        for _ in 0..element.count {
            let Some((n, line)) = lines.next() else {
                return Err(parse_error(
                    "end of file".into(),
                    format!("expected {} '{}' rows", element.count, element.name),
                ));
            };
            let mut tokens = line.split_whitespace();
            let mut next = |what: &str| -> Result<f64> {
                let t = tokens
                    .next()
                    .ok_or_else(|| parse_error(at_line(n), format!("missing value for '{what}'")))?;
                t.parse::<f64>()
                    .map_err(|_| parse_error(at_line(n), format!("bad number '{t}' for '{what}'")))
            };
            let mut row = [0.0; 4];
            for (p_idx, p) in element.props.iter().enumerate() {
                match p.kind {
                    Kind::Scalar(_) => {
                        let v = next(&p.name)?;
                        if let Some(c) = layout.columns.iter().position(|&c| c == p_idx) {
                            row[c] = v;
                        }
                    }
                    Kind::List { .. } => {
                        let count = next(&p.name)?;
                        if !(count >= 0.0 && count.fract() == 0.0) {
                            return Err(parse_error(at_line(n), format!("bad list length {count}")));
                        }
                        for _ in 0..count as usize {
                            next(&p.name)?;
                        }
                    }
                }
            }
            if tokens.next().is_some() {
                return Err(parse_error(at_line(n), "extra values on row"));
            }
            if wanted {
                out.push(row);
            }
        }
    }
    Ok(out)
}

fn read_binary(bytes: &[u8], h: &Header, layout: &VertexLayout, little: bool) -> Result<Vec<[f64; 4]>> {
    let mut pos = h.data_start;
    let mut take = |s: Scalar, what: &str| -> Result<f64> {
        let end = pos + s.size();
        let chunk = bytes.get(pos..end).ok_or_else(|| {
            parse_error(format!("byte offset {pos}"), format!("unexpected end of data reading '{what}'"))
        })?;
        pos = end;
        Ok(s.decode(chunk, little))
    };
    let mut out = Vec::new();
    for (e_idx, element) in h.elements.iter().enumerate().take(layout.element + 1) {
        let wanted = e_idx == layout.element;
        if wanted {
            out.reserve(element.count.min(1 << 20));
        }
        for _ in 0..element.count {
            let mut row = [0.0; 4];
            for (p_idx, p) in element.props.iter().enumerate() {
                match p.kind {
                    Kind::Scalar(s) => {
                        let v = take(s, &p.name)?;
                        if let Some(c) = layout.columns.iter().position(|&c| c == p_idx) {
                            row[c] = v;
                        }
                    }
                    Kind::List { count, item } => {
                        let n = take(count, &p.name)?;
                        if n < 0.0 {
                            return Err(parse_error("data".into(), format!("negative list length {n}")));
                        }
                        for _ in 0..n as usize {
                            take(item, &p.name)?;
                        }
                    }
                }
            }
            if wanted {
                out.push(row);
            }
        }
    }
    Ok(out)
}

/// Parses PLY bytes; `source` names the input in warnings.
pub fn parse_ply(bytes: &[u8], source: &str) -> Result<Loaded> {
    let h = parse_header(bytes)?;
    let layout = vertex_layout(&h)?;
    let rows = match h.format {
        Format::Ascii => read_ascii(&bytes[h.data_start..], &h, &layout)?,
        Format::Binary { little } => read_binary(bytes, &h, &layout, little)?,
    };

    let (lo, hi) = match h.intensity_range {
        Some(r) => r,
        None if layout.intensity_type == Scalar::U8 => (0.0, ATTRIBUTE_PEAK),
        None => rows
            .iter()
            .map(|r| r[3])
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v))),
    };
    // The gain is exactly 1 for a declared [0, 255] range, keeping rewrites lossless.
    let gain = ATTRIBUTE_PEAK / (hi - lo);
    let scale = |v: f64| {
        if hi > lo {
            ((v - lo) * gain).clamp(0.0, ATTRIBUTE_PEAK)
        } else {
            // Constant intensity: keep it if already in range.
            v.clamp(0.0, ATTRIBUTE_PEAK)
        }
    };
    collect_finite(rows.into_iter().map(|r| ([r[0], r[1], r[2]], scale(r[3]))), source)
}

pub fn load_ply(path: impl AsRef<Path>) -> Result<Loaded> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    parse_ply(&bytes, &path.display().to_string())
}

/// Writes `double` x, y, z and intensity with a declared `[0, 255]`
/// intensity range, so reading the file back is exact.
pub fn write_ply<W: Write>(mut out: W, pc: &PointCloud, encoding: PlyEncoding) -> Result<()> {
    let format = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    write!(
        out,
        "ply\nformat {format} 1.0\ncomment intensity_range 0 255\nelement vertex {}\n\
         property double x\nproperty double y\nproperty double z\nproperty double intensity\nend_header\n",
        pc.len()
    )?;
    match encoding {
        PlyEncoding::Ascii => {
            for (p, a) in pc.iter() {
                writeln!(out, "{} {} {} {}", p.x, p.y, p.z, a)?;
            }
        }
        PlyEncoding::BinaryLittleEndian => {
            let mut buf = Vec::with_capacity(pc.len() * 32);
            for (p, a) in pc.iter() {
                for v in [p.x, p.y, p.z, a] {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
            out.write_all(&buf)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CartesianPoint;
    use proptest::prelude::*;

    const MINIMAL: &str = "ply\nformat ascii 1.0\ncomment intensity_range 0 255\nelement vertex 3\n\
        property float x\nproperty float y\nproperty float z\nproperty uchar intensity\nend_header\n\
        0 0 0 10\n1.5 -2 3.25 200\n-4 5 6 255\n";

    fn parse(s: &[u8]) -> Result<Loaded> {
        parse_ply(s, "test")
    }

    #[test]
    fn minimal_ascii() {
        let l = parse(MINIMAL.as_bytes()).unwrap();
        assert_eq!(l.cloud.points()[1], CartesianPoint::new(1.5, -2.0, 3.25));
        assert_eq!(l.cloud.attributes(), &[10.0, 200.0, 255.0]);
    }

    fn binary(little: bool) -> Vec<u8> {
        let fmt = if little { "binary_little_endian" } else { "binary_big_endian" };
        let mut b = format!(
            "ply\nformat {fmt} 1.0\nelement vertex 3\nproperty float x\nproperty float y\n\
             property float z\nproperty uchar intensity\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n"
        )
        .into_bytes();
        for (x, y, z, i) in [(0.0f32, 0.0f32, 0.0f32, 10u8), (1.5, -2.0, 3.25, 200), (-4.0, 5.0, 6.0, 255)] {
            for v in [x, y, z] {
                b.extend(if little { v.to_le_bytes() } else { v.to_be_bytes() });
            }
            b.push(i);
        }
        b.push(3);
        for v in [0i32, 1, 2] {
            b.extend(if little { v.to_le_bytes() } else { v.to_be_bytes() });
        }
        b
    }

    #[test]
    fn binary_matches_ascii() {
        let a = parse(MINIMAL.as_bytes()).unwrap();
        assert_eq!(parse(&binary(true)).unwrap(), a);
        assert_eq!(parse(&binary(false)).unwrap(), a);
    }

    #[test]
    fn missing_intensity_is_named() {
        let s = MINIMAL.replace("property uchar intensity\n", "").replace(" 10\n", "\n");
        let err = parse(s.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("intensity"), "{err}");
    }

    #[test]
    fn errors_carry_locations() {
        let s = MINIMAL.replace("1.5 -2", "1.5 oops");
        let err = parse(s.as_bytes()).unwrap_err();
        assert!(matches!(&err, Error::Parse { location, .. } if location == "line 11"), "{err}");

        let err = parse(b"ply\nformat ascii 1.0\nelement vertex 1\nproperty floaty x\nend_header\n").unwrap_err();
        assert!(matches!(&err, Error::Parse { location, .. } if location == "line 4"), "{err}");

        let mut b = binary(true);
        b.truncate(b.len() - 20);
        let err = parse(&b).unwrap_err();
        assert!(matches!(&err, Error::Parse { location, .. } if location.starts_with("byte offset")), "{err}");

        assert!(parse(b"plx\n").is_err());
        assert!(parse(b"ply\nformat ascii 1.0\n").is_err());
    }

    #[test]
    fn observed_range_rescales() {
        let s = "ply\nformat ascii 1.0\nelement vertex 3\nproperty double x\nproperty double y\n\
                 property double z\nproperty float intensity\nend_header\n0 0 0 0.5\n1 0 0 1.5\n2 0 0 1.0\n";
        let l = parse(s.as_bytes()).unwrap();
        assert_eq!(l.cloud.attributes(), &[0.0, 255.0, 127.5]);
    }

    #[test]
    fn non_finite_rows_are_dropped() {
        let s = MINIMAL.replace("element vertex 3", "element vertex 4") + "nan 0 0 1\n";
        let l = parse(s.as_bytes()).unwrap();
        assert_eq!((l.cloud.len(), l.dropped), (3, 1));
    }

    proptest! {
        #[test]
        fn write_read_round_trip(
            rows in prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64, -10.0..10.0f64, 0.0..=255.0f64), 0..100),
            bin in any::<bool>(),
        ) {
            let pc = PointCloud::new(
                rows.iter().map(|r| CartesianPoint::new(r.0, r.1, r.2)).collect(),
                rows.iter().map(|r| r.3).collect(),
            ).unwrap();
            let mut buf = Vec::new();
            let enc = if bin { PlyEncoding::BinaryLittleEndian } else { PlyEncoding::Ascii };
            write_ply(&mut buf, &pc, enc).unwrap();
            prop_assert_eq!(parse(&buf).unwrap().cloud, pc);
        }

        #[test]
        fn garbage_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..300)) {
            let mut b = b"ply\nformat binary_little_endian 1.0\nelement vertex 5\nproperty float x\n\
                property float y\nproperty float z\nproperty ushort intensity\nend_header\n".to_vec();
            b.extend(bytes);
            let _ = parse(&b);
        }
    }
}
