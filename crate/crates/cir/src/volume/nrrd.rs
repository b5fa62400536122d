//! Reader/writer for a strict NRRD subset: dimension 3, scalar integer types
//! (uint8/int16/uint16), raw or gzip encoding, attached payload, diagonal
//! space directions, little-endian. Anything else is an explicit error.

use super::{MaskVolume, VolumeError};
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NrrdEncoding {
    Raw,
    Gzip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    U8,
    I16,
    U16,
}

impl ScalarType {
    fn parse(s: &str) -> Option<ScalarType> {
        match s {
            "uint8" | "uchar" | "uint8_t" | "unsigned char" => Some(ScalarType::U8),
            "int16" | "short" | "int16_t" | "signed short" | "short int" => Some(ScalarType::I16),
            "uint16" | "ushort" | "uint16_t" | "unsigned short" => Some(ScalarType::U16),
            _ => None,
        }
    }

    fn bytes(self) -> usize {
        match self {
            ScalarType::U8 => 1,
            _ => 2,
        }
    }
}

struct Header {
    dimension: usize,
    sizes: Vec<usize>,
    scalar: ScalarType,
    encoding: NrrdEncoding,
    spacing: [f64; 3],
    origin: [f64; 3],
    alphabet: Option<Vec<u8>>,
    endian_little: bool,
}

fn unsupported(msg: impl Into<String>) -> VolumeError {
    VolumeError::UnsupportedHeaderField(msg.into())
}

/// Parse a vector like `(0.7,0,0)`; `none` is not accepted here.
fn parse_vector(s: &str) -> Result<[f64; 3], VolumeError> {
    let trimmed = s.trim();
    let inner = trimmed
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| unsupported(format!("malformed vector '{s}'")))?;
    let parts: Vec<&str> = inner.split(',').collect();
    if parts.len() != 3 {
        return Err(unsupported(format!("vector '{s}' is not 3-dimensional")));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p
            .trim()
            .parse::<f64>()
            .map_err(|_| unsupported(format!("bad vector component '{p}'")))?;
    }
    Ok(out)
}

fn parse_header(text: &str) -> Result<Header, VolumeError> {
    let mut lines = text.lines();
    let magic = lines.next().ok_or_else(|| unsupported("empty header"))?;
    if !magic.starts_with("NRRD000") {
        return Err(unsupported(format!("bad magic '{magic}'")));
    }

    let mut fields: BTreeMap<String, String> = BTreeMap::new();
    let mut key_values: BTreeMap<String, String> = BTreeMap::new();
    for line in lines {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() {
            break;
        }
        if line.starts_with('#') {
            continue;
        }
        if let Some((k, v)) = line.split_once(":=") {
            key_values.insert(k.trim().to_string(), v.trim().to_string());
        } else if let Some((k, v)) = line.split_once(": ") {
            fields.insert(k.trim().to_lowercase(), v.trim().to_string());
        } else if let Some(k) = line.strip_suffix(':') {
            fields.insert(k.trim().to_lowercase(), String::new());
        } else {
            return Err(unsupported(format!("unparsable header line '{line}'")));
        }
    }

    // Fields that change how the payload must be interpreted are rejected;
    // purely descriptive ones are ignored.
    const IGNORED: &[&str] = &[
        "content",
        "space",
        "space units",
        "kinds",
        "centers",
        "centerings",
        "measurement frame",
        "min",
        "max",
        "oldmin",
        "old min",
        "oldmax",
        "old max",
    ];
    for key in fields.keys() {
        match key.as_str() {
            "dimension" | "sizes" | "type" | "encoding" | "endian" | "space directions"
            | "space origin" | "spacings" => {}
            k if IGNORED.contains(&k) => {}
            other => return Err(unsupported(format!("field '{other}'"))),
        }
    }

    let dimension: usize = fields
        .get("dimension")
        .ok_or_else(|| unsupported("missing 'dimension'"))?
        .parse()
        .map_err(|_| unsupported("bad 'dimension'"))?;
    if dimension != 3 {
        return Err(unsupported(format!("dimension {dimension} (only 3 supported)")));
    }

    let sizes: Vec<usize> = fields
        .get("sizes")
        .ok_or_else(|| unsupported("missing 'sizes'"))?
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| unsupported("bad 'sizes'")))
        .collect::<Result<_, _>>()?;
    if sizes.len() != 3 || sizes.contains(&0) {
        return Err(unsupported("'sizes' must list 3 positive counts"));
    }

    let scalar = ScalarType::parse(
        fields
            .get("type")
            .ok_or_else(|| unsupported("missing 'type'"))?,
    )
    .ok_or_else(|| unsupported(format!("type '{}'", fields["type"])))?;

    let encoding = match fields
        .get("encoding")
        .ok_or_else(|| unsupported("missing 'encoding'"))?
        .as_str()
    {
        "raw" => NrrdEncoding::Raw,
        "gzip" | "gz" => NrrdEncoding::Gzip,
        other => return Err(unsupported(format!("encoding '{other}'"))),
    };

    let endian_little = match fields.get("endian").map(String::as_str) {
        Some("little") => true,
        Some(other) => return Err(unsupported(format!("endian '{other}'"))),
        None => {
            if scalar.bytes() > 1 {
                return Err(unsupported("multi-byte type requires 'endian: little'"));
            }
            true
        }
    };

    let mut spacing = [1.0; 3];
    if let Some(dirs) = fields.get("space directions") {
        let vecs: Vec<&str> = dirs.split_whitespace().collect();
        if vecs.len() != 3 {
            return Err(unsupported("'space directions' must list 3 vectors"));
        }
        for (axis, v) in vecs.iter().enumerate() {
            let d = parse_vector(v)?;
            for (c, comp) in d.iter().enumerate() {
                if c == axis {
                    if !(comp.is_finite() && *comp > 0.0) {
                        return Err(unsupported("space directions must be positive diagonal"));
                    }
                    spacing[axis] = *comp;
                } else if *comp != 0.0 {
                    return Err(unsupported("non-diagonal space directions"));
                }
            }
        }
    } else if let Some(sp) = fields.get("spacings") {
        let parts: Vec<&str> = sp.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(unsupported("'spacings' must list 3 values"));
        }
        for (axis, p) in parts.iter().enumerate() {
            let v: f64 = p.parse().map_err(|_| unsupported("bad 'spacings'"))?;
            if !(v.is_finite() && v > 0.0) {
                return Err(unsupported("spacings must be positive"));
            }
            spacing[axis] = v;
        }
    }

    let origin = match fields.get("space origin") {
        Some(o) => parse_vector(o)?,
        None => [0.0; 3],
    };

    let alphabet = match key_values.get("label_alphabet") {
        Some(v) => {
            let codes: Vec<u8> = v
                .split_whitespace()
                .map(|t| t.parse::<u8>().map_err(|_| unsupported("bad label_alphabet")))
                .collect::<Result<_, _>>()?;
            Some(codes)
        }
        None => None,
    };

    Ok(Header {
        dimension,
        sizes,
        scalar,
        encoding,
        spacing,
        origin,
        alphabet,
        endian_little,
    })
}

/// Read a mask volume from an NRRD file.
///
/// Without a `label_alphabet` key-value pair, nonzero voxels are mapped to
/// label 1; with one, values are kept and validated against the alphabet.
pub fn read_nrrd(path: impl AsRef<Path>) -> Result<MaskVolume, VolumeError> {
    let bytes = fs::read(path)?;
    // header ends at the first blank line
    let mut header_end = None;
    for i in 0..bytes.len().saturating_sub(1) {
        if bytes[i] == b'\n' && bytes[i + 1] == b'\n' {
            header_end = Some(i + 2);
            break;
        }
        if i + 2 < bytes.len() && bytes[i] == b'\n' && bytes[i + 1] == b'\r' && bytes[i + 2] == b'\n'
        {
            header_end = Some(i + 3);
            break;
        }
    }
    let header_end = header_end.ok_or_else(|| unsupported("missing blank line after header"))?;
    let header_text = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| unsupported("header is not valid UTF-8"))?;
    let header = parse_header(header_text)?;
    debug_assert_eq!(header.dimension, 3);

    let payload = match header.encoding {
        NrrdEncoding::Raw => bytes[header_end..].to_vec(),
        NrrdEncoding::Gzip => {
            let mut out = Vec::new();
            GzDecoder::new(&bytes[header_end..])
                .read_to_end(&mut out)
                .map_err(VolumeError::Io)?;
            out
        }
    };

    let n = header.sizes[0] * header.sizes[1] * header.sizes[2];
    let expected_bytes = n * header.scalar.bytes();
    if payload.len() != expected_bytes {
        return Err(VolumeError::SizeMismatch {
            expected: expected_bytes,
            actual: payload.len(),
        });
    }

    let raw_values: Vec<i64> = match header.scalar {
        ScalarType::U8 => payload.iter().map(|&b| b as i64).collect(),
        ScalarType::I16 => payload
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as i64)
            .collect(),
        ScalarType::U16 => payload
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]) as i64)
            .collect(),
    };
    debug_assert!(header.endian_little);

    let (labels, alphabet) = match header.alphabet {
        Some(alpha) => {
            let mut labels = Vec::with_capacity(n);
            for v in raw_values {
                let code = u8::try_from(v).map_err(|_| VolumeError::InvalidLabel(v))?;
                if !alpha.contains(&code) {
                    return Err(VolumeError::InvalidLabel(v));
                }
                labels.push(code);
            }
            (labels, alpha)
        }
        None => (
            raw_values.iter().map(|&v| u8::from(v != 0)).collect(),
            vec![0, 1],
        ),
    };

    MaskVolume::new(
        (header.sizes[0], header.sizes[1], header.sizes[2]),
        header.spacing,
        header.origin,
        labels,
        alphabet,
    )
}

/// Write a mask volume as NRRD with raw encoding.
pub fn write_nrrd(vol: &MaskVolume, path: impl AsRef<Path>) -> Result<(), VolumeError> {
    write_nrrd_with(vol, path, NrrdEncoding::Raw, &[])
}

/// Write a mask volume as NRRD, choosing the payload encoding and optionally
/// embedding extra `key:=value` pairs (e.g. pipeline parameters).
pub fn write_nrrd_with(
    vol: &MaskVolume,
    path: impl AsRef<Path>,
    encoding: NrrdEncoding,
    key_values: &[(String, String)],
) -> Result<(), VolumeError> {
    let (nx, ny, nz) = vol.dims();
    let [sx, sy, sz] = vol.spacing();
    let [ox, oy, oz] = vol.origin();
    let mut header = String::new();
    header.push_str("NRRD0005\n");
    header.push_str("type: uint8\n");
    header.push_str("dimension: 3\n");
    header.push_str("space: left-posterior-superior\n");
    header.push_str(&format!("sizes: {nx} {ny} {nz}\n"));
    header.push_str(&format!(
        "space directions: ({sx},0,0) (0,{sy},0) (0,0,{sz})\n"
    ));
    header.push_str("kinds: domain domain domain\n");
    match encoding {
        NrrdEncoding::Raw => header.push_str("encoding: raw\n"),
        NrrdEncoding::Gzip => header.push_str("encoding: gzip\n"),
    }
    header.push_str(&format!("space origin: ({ox},{oy},{oz})\n"));
    let alpha: Vec<String> = vol.label_alphabet().iter().map(|c| c.to_string()).collect();
    header.push_str(&format!("label_alphabet:={}\n", alpha.join(" ")));
    for (k, v) in key_values {
        header.push_str(&format!("{k}:={v}\n"));
    }
    header.push('\n');

    let mut file = fs::File::create(path)?;
    file.write_all(header.as_bytes())?;
    match encoding {
        NrrdEncoding::Raw => file.write_all(vol.labels())?,
        NrrdEncoding::Gzip => {
            let mut enc = GzEncoder::new(&mut file, flate2::Compression::default());
            enc.write_all(vol.labels())?;
            enc.finish()?;
        }
    }
    Ok(())
}
