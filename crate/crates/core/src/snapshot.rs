//! "VKB1" binary snapshots of sampled fields and basis containers.
//!
//! Field snapshot layout:
//!
//! ```text
//! b"VKB1" | u32 LE header length | UTF-8 JSON header | f64 LE data
//! ```
//!
//! The header is `{"domain", "n", "h", "inside_count", "value_kind"}`. Data
//! are `(re, im)` pairs in component-major order: all cells of `c0`, then
//! `c1`, and so on (one component for scalar fields). Cells appear in the
//! grid's row-major order restricted to inside cells.
//!
//! A basis container uses the same magic and length prefix, with a JSON
//! manifest carrying `"container": "basis"` and `"member_count"`, followed by
//! `member_count` concatenated field snapshots on a common grid.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::biquat::{Biquaternion, Complex};
use crate::error::{Result, VekuaError};
use crate::grid::{BiquatField, DomainGrid, DomainSpec, ScalarField};

pub const MAGIC: &[u8; 4] = b"VKB1";
/// Largest accepted JSON header or manifest.
pub const MAX_HEADER_BYTES: usize = 1 << 20;
/// Largest grid resolution accepted by the decoders.
pub const MAX_N: usize = 256;
/// Largest member count accepted in a basis container.
pub const MAX_MEMBERS: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Biquaternion,
    Scalar,
}

impl ValueKind {
    fn components(self) -> usize {
        match self {
            ValueKind::Biquaternion => 4,
            ValueKind::Scalar => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotHeader {
    pub domain: DomainSpec,
    pub n: usize,
    pub h: [f64; 3],
    pub inside_count: usize,
    pub value_kind: ValueKind,
}

impl SnapshotHeader {
    fn for_grid(grid: &DomainGrid, value_kind: ValueKind) -> Self {
        SnapshotHeader {
            domain: grid.spec().clone(),
            n: grid.n(),
            h: grid.h(),
            inside_count: grid.len(),
            value_kind,
        }
    }

    fn data_len(&self) -> Option<usize> {
        self.inside_count
            .checked_mul(self.value_kind.components())?
            .checked_mul(16)
    }
}

/// A decoded field of either kind.
#[derive(Clone, Debug)]
pub enum Snapshot {
    Biquaternion(BiquatField),
    Scalar(ScalarField),
}

impl Snapshot {
    pub fn grid(&self) -> &Arc<DomainGrid> {
        match self {
            Snapshot::Biquaternion(f) => f.grid(),
            Snapshot::Scalar(f) => f.grid(),
        }
    }
}

fn format_err(msg: impl Into<String>) -> VekuaError {
    VekuaError::Format(msg.into())
}

fn write_prefixed_json<T: Serialize>(out: &mut Vec<u8>, value: &T) -> Result<()> {
    let json = serde_json::to_vec(value)?;
    if json.len() > MAX_HEADER_BYTES {
        return Err(format_err("header exceeds size limit"));
    }
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    Ok(())
}

/// Splits `bytes` into the JSON header slice and the remainder.
fn read_prefixed_json(bytes: &[u8]) -> Result<(&[u8], &[u8])> {
    if bytes.len() < 8 {
        return Err(format_err("truncated before header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(format_err("bad magic"));
    }
    let len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if len > MAX_HEADER_BYTES {
        return Err(format_err(format!("header length {len} exceeds limit")));
    }
    let rest = &bytes[8..];
    if rest.len() < len {
        return Err(format_err("truncated header"));
    }
    Ok(rest.split_at(len))
}

fn write_components<I: Iterator<Item = Complex>>(out: &mut Vec<u8>, values: I) {
    for z in values {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
}

fn read_complex(data: &[u8], idx: usize) -> Result<Complex> {
    let off = 16 * idx;
    let re = f64::from_le_bytes(data[off..off + 8].try_into().unwrap());
    let im = f64::from_le_bytes(data[off + 8..off + 16].try_into().unwrap());
    if !(re.is_finite() && im.is_finite()) {
        return Err(format_err("non-finite value"));
    }
    Ok(Complex::new(re, im))
}

fn encode_with(grid: &DomainGrid, kind: ValueKind, out: &mut Vec<u8>) -> Result<()> {
    write_prefixed_json(out, &SnapshotHeader::for_grid(grid, kind))
}

/// Serializes a biquaternion field.
pub fn encode_field(field: &BiquatField) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(64 * field.len() + 256);
    encode_with(field.grid(), ValueKind::Biquaternion, &mut out)?;
    for k in 0..4 {
        write_components(&mut out, field.values().iter().map(|v| v.c[k]));
    }
    Ok(out)
}

/// Serializes a scalar field.
pub fn encode_scalar_field(field: &ScalarField) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(16 * field.len() + 256);
    encode_with(field.grid(), ValueKind::Scalar, &mut out)?;
    write_components(&mut out, field.values().iter().copied());
    Ok(out)
}

/// Checks a header for plausibility before any grid is built.
fn check_header(header: &SnapshotHeader) -> Result<()> {
    header.domain.validate()?;
    if header.n < crate::grid::MIN_CELLS_PER_AXIS || header.n > MAX_N {
        return Err(format_err(format!("grid resolution {} out of range", header.n)));
    }
    let cells = header.n.pow(3);
    if header.inside_count == 0 || header.inside_count > cells {
        return Err(format_err("inside count out of range"));
    }
    let expected = header.domain.volume() / header.h.iter().product::<f64>();
    let slack = 2.0 * std::f64::consts::PI * (header.n * header.n) as f64 + 8.0;
    if !expected.is_finite() || (header.inside_count as f64 - expected).abs() > slack {
        return Err(format_err("inside count inconsistent with domain"));
    }
    Ok(())
}

fn grid_for(header: &SnapshotHeader, cached: Option<&Arc<DomainGrid>>) -> Result<Arc<DomainGrid>> {
    if let Some(g) = cached {
        if g.n() == header.n && *g.spec() == header.domain {
            return Ok(Arc::clone(g));
        }
    }
    let grid = DomainGrid::new(header.domain.clone(), header.n)?;
    let h = grid.h();
    if (0..3).any(|k| (h[k] - header.h[k]).abs() > 1e-12 * h[k]) {
        return Err(format_err("spacing inconsistent with domain and resolution"));
    }
    if grid.len() != header.inside_count {
        return Err(format_err(format!(
            "header declares {} inside cells, grid has {}",
            header.inside_count,
            grid.len()
        )));
    }
    Ok(grid)
}

/// Decodes one snapshot at the start of `bytes`, returning it with the number
/// of bytes consumed.
fn decode_prefix(bytes: &[u8], cached: Option<&Arc<DomainGrid>>) -> Result<(Snapshot, usize)> {
    let (json, rest) = read_prefixed_json(bytes)?;
    let header: SnapshotHeader = serde_json::from_slice(json)?;
    check_header(&header)?;
    let data_len = header
        .data_len()
        .ok_or_else(|| format_err("data length overflow"))?;
    if rest.len() < data_len {
        return Err(format_err("truncated data"));
    }
    let data = &rest[..data_len];
    let grid = grid_for(&header, cached)?;
    let count = header.inside_count;
    let snap = match header.value_kind {
        ValueKind::Biquaternion => {
            let mut values = vec![Biquaternion::ZERO; count];
            for k in 0..4 {
                for (c, v) in values.iter_mut().enumerate() {
                    v.c[k] = read_complex(data, k * count + c)?;
                }
            }
            Snapshot::Biquaternion(BiquatField::new(&grid, values)?)
        }
        ValueKind::Scalar => {
            let values = (0..count)
                .map(|c| read_complex(data, c))
                .collect::<Result<Vec<_>>>()?;
            Snapshot::Scalar(ScalarField::new(&grid, values)?)
        }
    };
    Ok((snap, 8 + json.len() + data_len))
}

/// Decodes a complete field snapshot; trailing bytes are an error.
pub fn decode_snapshot(bytes: &[u8]) -> Result<Snapshot> {
    let (snap, used) = decode_prefix(bytes, None)?;
    if used != bytes.len() {
        return Err(format_err("trailing bytes after snapshot"));
    }
    Ok(snap)
}

/// Decodes a snapshot that must hold a biquaternion field.
pub fn decode_field(bytes: &[u8]) -> Result<BiquatField> {
    match decode_snapshot(bytes)? {
        Snapshot::Biquaternion(f) => Ok(f),
        Snapshot::Scalar(_) => Err(format_err("expected a biquaternion field")),
    }
}

/// Serializes a basis container. `manifest` must be a JSON object; the
/// `container` and `member_count` keys are set here.
pub fn encode_container(manifest: &serde_json::Value, members: &[BiquatField]) -> Result<Vec<u8>> {
    let mut manifest = manifest.clone();
    let obj = manifest
        .as_object_mut()
        .ok_or_else(|| format_err("manifest must be a JSON object"))?;
    obj.insert("container".into(), "basis".into());
    obj.insert("member_count".into(), members.len().into());
    if let Some(first) = members.first() {
        for m in &members[1..] {
            crate::grid::same_grid(first.grid(), m.grid())?;
        }
    }
    let mut out = Vec::new();
    write_prefixed_json(&mut out, &manifest)?;
    for m in members {
        out.extend_from_slice(&encode_field(m)?);
    }
    Ok(out)
}

/// Decodes a basis container into its manifest and members.
pub fn decode_container(bytes: &[u8]) -> Result<(serde_json::Value, Vec<BiquatField>)> {
    let (json, mut rest) = read_prefixed_json(bytes)?;
    let manifest: serde_json::Value = serde_json::from_slice(json)?;
    if manifest.get("container").and_then(|v| v.as_str()) != Some("basis") {
        return Err(format_err("not a basis container"));
    }
    let count = manifest
        .get("member_count")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| format_err("missing member_count"))? as usize;
    if count > MAX_MEMBERS {
        return Err(format_err("member count exceeds limit"));
    }
    let mut members: Vec<BiquatField> = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let cached = members.first().map(|m| m.grid());
        let (snap, used) = decode_prefix(rest, cached)?;
        match snap {
            Snapshot::Biquaternion(f) => {
                if let Some(first) = members.first() {
                    crate::grid::same_grid(first.grid(), f.grid())
                        .map_err(|_| format_err("members on different grids"))?;
                }
                members.push(f);
            }
            Snapshot::Scalar(_) => return Err(format_err("basis members must be biquaternion fields")),
        }
        rest = &rest[used..];
    }
    if !rest.is_empty() {
        return Err(format_err("trailing bytes after container"));
    }
    Ok((manifest, members))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn field(grid: &Arc<DomainGrid>, s: f64) -> BiquatField {
        BiquatField::sample(grid, |x| {
            Biquaternion::new(
                Complex::new(x[0] * s, x[1]),
                Complex::new(-x[2], s),
                Complex::new(x[0] * x[1], 0.25),
                Complex::new(s * s, x[2] - x[0]),
            )
        })
    }

    #[test]
    fn header_layout() {
        let g = DomainGrid::new(DomainSpec::unit_ball(), 8).unwrap();
        let f = field(&g, 1.0);
        let bytes = encode_field(&f).unwrap();
        assert_eq!(&bytes[..4], b"VKB1");
        let len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let header: serde_json::Value = serde_json::from_slice(&bytes[8..8 + len]).unwrap();
        assert_eq!(header["value_kind"], "biquaternion");
        assert_eq!(header["inside_count"], g.len());
        assert_eq!(header["domain"]["kind"], "ball");
        assert_eq!(bytes.len(), 8 + len + 64 * g.len());
        // First data pair is (re, im) of c0 at the first inside cell.
        let re = f64::from_le_bytes(bytes[8 + len..16 + len].try_into().unwrap());
        assert_eq!(re, f.values()[0].c[0].re);
        // c1 starts after all c0 pairs.
        let off = 8 + len + 16 * g.len();
        let re1 = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        assert_eq!(re1, f.values()[0].c[1].re);
    }

    #[test]
    fn field_roundtrip_is_bit_exact() {
        let g = DomainGrid::new(DomainSpec::unit_box(), 9).unwrap();
        let f = field(&g, 0.3);
        let back = decode_field(&encode_field(&f).unwrap()).unwrap();
        assert_eq!(back.values(), f.values());
        assert_eq!(back.grid().len(), g.len());
    }

    #[test]
    fn scalar_roundtrip() {
        let g = DomainGrid::new(DomainSpec::unit_ball(), 10).unwrap();
        let f = ScalarField::sample(&g, |x| Complex::new(x[0], -x[1]));
        match decode_snapshot(&encode_scalar_field(&f).unwrap()).unwrap() {
            Snapshot::Scalar(s) => assert_eq!(s.values(), f.values()),
            Snapshot::Biquaternion(_) => panic!("wrong kind"),
        }
    }

    #[test]
    fn container_roundtrip() {
        let g = DomainGrid::new(DomainSpec::unit_ball(), 8).unwrap();
        let members: Vec<_> = (0..3).map(|i| field(&g, i as f64)).collect();
        let manifest = serde_json::json!({"gram_residual": 1e-13});
        let bytes = encode_container(&manifest, &members).unwrap();
        let (m, back) = decode_container(&bytes).unwrap();
        assert_eq!(m["member_count"], 3);
        assert_eq!(m["container"], "basis");
        assert_eq!(back.len(), 3);
        for (a, b) in back.iter().zip(&members) {
            assert_eq!(a.values(), b.values());
        }
        assert!(Arc::ptr_eq(back[0].grid(), back[2].grid()));
    }

    #[test]
    fn rejects_corruption() {
        let g = DomainGrid::new(DomainSpec::unit_ball(), 8).unwrap();
        let bytes = encode_field(&field(&g, 1.0)).unwrap();
        assert!(decode_field(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_field(&extra).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_field(&bad).is_err());
        let mut huge = bytes.clone();
        huge[4..8].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(decode_field(&huge).is_err());
        let mut nan = bytes.clone();
        let n = nan.len();
        nan[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(decode_field(&nan).is_err());
        assert!(decode_container(&bytes).is_err());
    }

    #[test]
    fn rejects_inconsistent_header() {
        let g = DomainGrid::new(DomainSpec::unit_ball(), 8).unwrap();
        let f = field(&g, 1.0);
        let mut header = SnapshotHeader::for_grid(&g, ValueKind::Biquaternion);
        header.inside_count += 1;
        let mut bytes = Vec::new();
        write_prefixed_json(&mut bytes, &header).unwrap();
        for k in 0..4 {
            write_components(&mut bytes, f.values().iter().map(|v| v.c[k]));
        }
        bytes.extend_from_slice(&[0u8; 64]);
        assert!(decode_field(&bytes).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn random_fields_roundtrip(seed in any::<u64>(), n in 8usize..12) {
            let g = DomainGrid::new(DomainSpec::unit_ball(), n).unwrap();
            let mut s = seed;
            let mut next = || {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                f64::from_bits((s >> 12) | 0x3ff0_0000_0000_0000) - 1.5
            };
            let values = (0..g.len())
                .map(|_| Biquaternion::new(
                    Complex::new(next(), next()), Complex::new(next(), next()),
                    Complex::new(next(), next()), Complex::new(next(), next())))
                .collect();
            let f = BiquatField::new(&g, values).unwrap();
            let back = decode_field(&encode_field(&f).unwrap()).unwrap();
            prop_assert_eq!(back.values(), f.values());
        }

        #[test]
        fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
            let _ = decode_snapshot(&bytes);
            let _ = decode_container(&bytes);
        }
    }
}
