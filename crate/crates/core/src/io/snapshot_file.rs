use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::fom::{EulerParams, Field, SnapshotSet, Source};
use crate::numkit::DenseMatrix;
use crate::{Error, Result};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"PODSNAP1";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    source: Source,
    nt: usize,
    ndof: usize,
    fields: Vec<Field>,
    times: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    params: Option<EulerParams>,
}

/// `PODSNAP1`, a little-endian `u32` header length, the JSON header, then
/// `nt × ndof` little-endian `f64` values in row-major order.
pub fn encode_snapshots(s: &SnapshotSet) -> Result<Vec<u8>> {
    let header = Header {
        version: SNAPSHOT_VERSION,
        source: s.source,
        nt: s.n_t(),
        ndof: s.n_dof(),
        fields: s.fields().to_vec(),
        times: s.times().to_vec(),
        params: s.params,
    };
    let json = serde_json::to_vec(&header)?;
    let len = u32::try_from(json.len()).map_err(|_| Error::Format { offset: 8, detail: "header exceeds 4 GiB".into() })?;
    let mut out = Vec::with_capacity(12 + json.len() + 8 * s.n_t() * s.n_dof());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&json);
    for v in s.data().as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_snapshots(bytes: &[u8]) -> Result<SnapshotSet> {
    let fail = |offset: usize, detail: String| Error::Format { offset, detail };
    if bytes.len() < 12 {
        return Err(fail(bytes.len(), format!("file of {} bytes is too short for a snapshot header", bytes.len())));
    }
    if &bytes[..8] != SNAPSHOT_MAGIC {
        return Err(fail(0, "missing PODSNAP1 magic".into()));
    }
    let len = u32::from_le_bytes(bytes[8..12].try_into().expect("four bytes")) as usize;
    let body = 12 + len;
    if bytes.len() < body {
        return Err(fail(8, format!("header length {len} overruns the file ({} bytes)", bytes.len())));
    }
    let header: Header = serde_json::from_slice(&bytes[12..body]).map_err(|e| fail(12 + e.column().saturating_sub(1), format!("header: {e}")))?;
    if header.version != SNAPSHOT_VERSION {
        return Err(fail(12, format!("unsupported version {}", header.version)));
    }
    let expected = header.nt.checked_mul(header.ndof).and_then(|n| n.checked_mul(8)).ok_or_else(|| fail(12, "nt·ndof overflows".into()))?;
    let payload = &bytes[body..];
    if payload.len() != expected {
        return Err(fail(body, format!("payload has {} bytes, nt·ndof·8 = {expected}", payload.len())));
    }
    if header.times.len() != header.nt {
        return Err(fail(12, format!("{} times for nt = {}", header.times.len(), header.nt)));
    }
    let values: Vec<f64> = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes"))).collect();
    let data = DenseMatrix::from_vec(header.nt, header.ndof, values)?;
    let set = SnapshotSet::new(header.times, data, header.fields, header.source).map_err(|e| fail(12, e.to_string()))?;
    Ok(match header.params {
        Some(p) => set.with_params(p),
        None => set,
    })
}

pub fn save_snapshots(path: &Path, s: &SnapshotSet) -> Result<()> {
    std::fs::write(path, encode_snapshots(s)?)?;
    Ok(())
}

pub fn load_snapshots(path: &Path) -> Result<SnapshotSet> {
    decode_snapshots(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SnapshotSet {
        let data = DenseMatrix::from_fn(3, 4, |i, j| (i as f64 + 0.1) * (j as f64 - 1.7) / 3.0);
        SnapshotSet::new(vec![0.0, 0.1, 0.30000000000000004], data, vec![Field::new("rho", 2), Field::new("e", 2)], Source::Euler)
            .unwrap()
            .with_params(EulerParams::new(2.25, 3.5).unwrap())
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let s = sample();
        let bytes = encode_snapshots(&s).unwrap();
        let back = decode_snapshots(&bytes).unwrap();
        assert_eq!(back, s);
        assert_eq!(encode_snapshots(&back).unwrap(), bytes);
        assert_eq!(&bytes[..8], b"PODSNAP1");
        let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        assert_eq!(bytes.len(), 12 + len + 3 * 4 * 8);
    }

    #[test]
    fn corrupt_files_report_offsets() {
        let bytes = encode_snapshots(&sample()).unwrap();
        assert!(matches!(decode_snapshots(&bytes[..5]), Err(Error::Format { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_snapshots(&bad), Err(Error::Format { offset: 0, .. })));
        let truncated = &bytes[..bytes.len() - 8];
        match decode_snapshots(truncated) {
            Err(Error::Format { offset, detail }) => {
                assert_eq!(offset, bytes.len() - 96);
                assert!(detail.contains("payload"));
            }
            other => panic!("{other:?}"),
        }
    }
}
