//! PLY point clouds. Writing always produces binary little-endian float
//! x/y/z with optional uchar red/green/blue; reading accepts ascii and both
//! binary encodings with arbitrary scalar or list properties, keeping only the
//! vertex positions and colors.

use crate::error::{Error, Result};
use crate::fusion::PointCloud;

pub fn write_ply(cloud: &PointCloud) -> Vec<u8> {
    let colored = cloud.colors.is_some();
    let mut header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n",
        cloud.points.len()
    );
    if colored {
        header.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    header.push_str("end_header\n");
    let stride = if colored { 15 } else { 12 };
    let mut out = Vec::with_capacity(header.len() + stride * cloud.points.len());
    out.extend_from_slice(header.as_bytes());
    for (i, p) in cloud.points.iter().enumerate() {
        for c in p {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
        if let Some(colors) = &cloud.colors {
            out.extend_from_slice(&colors[i]);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
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
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Encoding {
    Ascii,
    LittleEndian,
    BigEndian,
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
    encoding: Encoding,
    ascii_tokens: Option<std::str::SplitAsciiWhitespace<'a>>,
}

impl<'a> Cursor<'a> {
    fn read(&mut self, ty: Scalar) -> Result<f64> {
        if self.encoding == Encoding::Ascii {
            let tok = self
                .ascii_tokens
                .as_mut()
                .and_then(Iterator::next)
                .ok_or_else(|| Error::Format("truncated ascii PLY body".into()))?;
            return tok
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("invalid PLY value '{tok}'")));
        }
        let n = ty.size();
        let end = self.pos + n;
        if end > self.data.len() {
            return Err(Error::Format("truncated binary PLY body".into()));
        }
        let mut buf = [0u8; 8];
        buf[..n].copy_from_slice(&self.data[self.pos..end]);
        self.pos = end;
        if self.encoding == Encoding::BigEndian {
            buf[..n].reverse();
        }
        Ok(match ty {
            Scalar::I8 => buf[0] as i8 as f64,
            Scalar::U8 => buf[0] as f64,
            Scalar::I16 => i16::from_le_bytes([buf[0], buf[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([buf[0], buf[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(buf),
        })
    }
}

fn header_end(bytes: &[u8]) -> Option<usize> {
    const MARK: &[u8] = b"end_header";
    let mut i = 0;
    while i + MARK.len() <= bytes.len() {
        if &bytes[i..i + MARK.len()] == MARK && (i == 0 || bytes[i - 1] == b'\n') {
            let mut j = i + MARK.len();
            if bytes.get(j) == Some(&b'\r') {
                j += 1;
            }
            return (bytes.get(j) == Some(&b'\n')).then_some(j + 1);
        }
        i += 1;
    }
    None
}

pub fn read_ply(bytes: &[u8]) -> Result<PointCloud> {
    let body_start = header_end(bytes).ok_or_else(|| Error::Format("PLY header has no end_header".into()))?;
    let header = std::str::from_utf8(&bytes[..body_start])
        .map_err(|_| Error::Format("PLY header is not ASCII".into()))?;
    let mut lines = header.lines().map(str::trim);
    if lines.next() != Some("ply") {
        return Err(Error::Format("missing 'ply' magic".into()));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [] | ["comment", ..] | ["obj_info", ..] | ["end_header"] => {}
            ["format", fmt, _version] => {
                encoding = Some(match *fmt {
                    "ascii" => Encoding::Ascii,
                    "binary_little_endian" => Encoding::LittleEndian,
                    "binary_big_endian" => Encoding::BigEndian,
                    other => return Err(Error::Format(format!("unknown PLY format '{other}'"))),
                })
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| Error::Format(format!("invalid element count '{count}'")))?,
                properties: Vec::new(),
            }),
            ["property", "list", count, item, _name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::Format("property before element".into()))?;
                let count = Scalar::parse(count).ok_or_else(|| Error::Format(format!("unknown type '{count}'")))?;
                let item = Scalar::parse(item).ok_or_else(|| Error::Format(format!("unknown type '{item}'")))?;
                el.properties.push(Property::List { count, item });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::Format("property before element".into()))?;
                let ty = Scalar::parse(ty).ok_or_else(|| Error::Format(format!("unknown type '{ty}'")))?;
                el.properties.push(Property::Scalar {
                    name: name.to_string(),
                    ty,
                });
            }
            _ => return Err(Error::Format(format!("unrecognized PLY header line '{line}'"))),
        }
    }
    let encoding = encoding.ok_or_else(|| Error::Format("PLY header lacks a format line".into()))?;
    let body = &bytes[body_start..];
    let mut cursor = Cursor {
        data: body,
        pos: 0,
        encoding,
        ascii_tokens: if encoding == Encoding::Ascii {
            Some(
                std::str::from_utf8(body)
                    .map_err(|_| Error::Format("ascii PLY body is not UTF-8".into()))?
                    .split_ascii_whitespace(),
            )
        } else {
            None
        },
    };

    for el in &elements {
        if el.name != "vertex" {
            if el.properties.is_empty() {
                continue;
            }
            // skip elements stored before the vertices
            for _ in 0..el.count {
                for p in &el.properties {
                    match *p {
                        Property::Scalar { ty, .. } => {
                            cursor.read(ty)?;
                        }
                        Property::List { count, item } => {
                            let n = cursor.read(count)?;
                            if !(n >= 0.0 && n <= u32::MAX as f64) {
                                return Err(Error::Format("invalid PLY list length".into()));
                            }
                            for _ in 0..n as usize {
                                cursor.read(item)?;
                            }
                        }
                    }
                }
            }
            continue;
        }
        let find = |names: &[&str]| {
            el.properties.iter().position(|p| matches!(p, Property::Scalar { name, .. } if names.contains(&name.as_str())))
        };
        let (ix, iy, iz) = match (find(&["x"]), find(&["y"]), find(&["z"])) {
            (Some(x), Some(y), Some(z)) => (x, y, z),
            _ => return Err(Error::Format("vertex element lacks x/y/z".into())),
        };
        let color_idx = match (
            find(&["red", "diffuse_red", "r"]),
            find(&["green", "diffuse_green", "g"]),
            find(&["blue", "diffuse_blue", "b"]),
        ) {
            (Some(r), Some(g), Some(b)) => Some([r, g, b]),
            _ => None,
        };
        // reject absurd counts before allocating
        let min_size: usize = el
            .properties
            .iter()
            .map(|p| match (encoding, p) {
                (Encoding::Ascii, _) => 1,
                (_, Property::Scalar { ty, .. }) => ty.size(),
                (_, Property::List { count, .. }) => count.size(),
            })
            .sum();
        if el.count.saturating_mul(min_size) > body.len() {
            return Err(Error::Format("PLY vertex count exceeds payload".into()));
        }
        let mut points = Vec::with_capacity(el.count);
        let mut colors = color_idx.map(|_| Vec::with_capacity(el.count));
        let mut row = vec![0.0f64; el.properties.len()];
        for _ in 0..el.count {
            for (k, p) in el.properties.iter().enumerate() {
                row[k] = match *p {
                    Property::Scalar { ty, .. } => cursor.read(ty)?,
                    Property::List { count, item } => {
                        let n = cursor.read(count)?;
                        if !(n >= 0.0 && n <= u32::MAX as f64) {
                            return Err(Error::Format("invalid PLY list length".into()));
                        }
                        for _ in 0..n as usize {
                            cursor.read(item)?;
                        }
                        0.0
                    }
                };
            }
            points.push([row[ix], row[iy], row[iz]]);
            if let (Some(cols), Some([r, g, b])) = (colors.as_mut(), color_idx) {
                cols.push([row[r] as u8, row[g] as u8, row[b] as u8]);
            }
        }
        return PointCloud::new(points, colors);
    }
    Err(Error::Format("PLY has no vertex element".into()))
}

pub fn read_ply_file(path: &std::path::Path) -> Result<PointCloud> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_ply(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn write_ply_file(path: &std::path::Path, cloud: &PointCloud) -> Result<()> {
    std::fs::write(path, write_ply(cloud)).map_err(|e| Error::io(path, e))
}
