//! Dense matrix block format: a small text header followed by row-major
//! little-endian f64 data. Shared by node features, embeddings, and model
//! checkpoints.
//!
//! Layout:
//!
//! ```text
//! clustrec-matrix v1\n
//! rows=<R>\n
//! cols=<C>\n
//! <key>=<value>\n   (zero or more metadata lines)
//! end\n
//! <R*C little-endian f64 values>
//! ```

use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatrixCodecError {
    #[error("malformed matrix block: {0}")]
    Malformed(String),
    #[error("payload length {got} does not match rows*cols*8 = {want}")]
    LengthMismatch { got: usize, want: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixBlock {
    pub rows: usize,
    pub cols: usize,
    pub meta: Vec<(String, String)>,
    /// Row-major values, rows*cols entries.
    pub data: Vec<f64>,
}

impl MatrixBlock {
    pub fn from_array(a: &Array2<f64>, meta: Vec<(String, String)>) -> Self {
        MatrixBlock {
            rows: a.nrows(),
            cols: a.ncols(),
            meta,
            data: a.iter().copied().collect(),
        }
    }

    pub fn to_array(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.rows, self.cols), self.data.clone())
            .expect("rows*cols matches data length")
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"clustrec-matrix v1\n");
        out.extend_from_slice(format!("rows={}\n", self.rows).as_bytes());
        out.extend_from_slice(format!("cols={}\n", self.cols).as_bytes());
        for (k, v) in &self.meta {
            debug_assert!(!k.contains('\n') && !v.contains('\n'));
            out.extend_from_slice(format!("{k}={v}\n").as_bytes());
        }
        out.extend_from_slice(b"end\n");
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Strict decode: the input must contain exactly one block.
    pub fn decode(bytes: &[u8]) -> Result<MatrixBlock, MatrixCodecError> {
        let (block, consumed) = MatrixBlock::decode_prefix(bytes)?;
        if consumed != bytes.len() {
            return Err(MatrixCodecError::LengthMismatch {
                got: bytes.len() - consumed + block.data.len() * 8,
                want: block.data.len() * 8,
            });
        }
        Ok(block)
    }

    /// Streaming decode: reads one block from the front of `bytes` and
    /// returns it with the number of bytes consumed. Trailing data is
    /// left for the caller.
    pub fn decode_prefix(bytes: &[u8]) -> Result<(MatrixBlock, usize), MatrixCodecError> {
        let bad = |m: &str| MatrixCodecError::Malformed(m.to_string());

        // split the text header from the binary payload at the "end" line
        let mut offset = 0usize;
        let mut lines: Vec<&str> = Vec::new();
        loop {
            let rest = &bytes[offset.min(bytes.len())..];
            let nl = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| bad("missing end marker"))?;
            let line =
                std::str::from_utf8(&rest[..nl]).map_err(|_| bad("non-utf8 header line"))?;
            offset += nl + 1;
            if line == "end" {
                break;
            }
            lines.push(line);
            if lines.len() > 1024 {
                return Err(bad("header too long"));
            }
        }

        let mut it = lines.into_iter();
        if it.next() != Some("clustrec-matrix v1") {
            return Err(bad("missing magic line"));
        }
        let mut rows: Option<usize> = None;
        let mut cols: Option<usize> = None;
        let mut meta = Vec::new();
        for line in it {
            let (k, v) = line.split_once('=').ok_or_else(|| bad("header line without ="))?;
            match k {
                "rows" => rows = Some(v.parse().map_err(|_| bad("bad rows"))?),
                "cols" => cols = Some(v.parse().map_err(|_| bad("bad cols"))?),
                _ => meta.push((k.to_string(), v.to_string())),
            }
        }
        let rows = rows.ok_or_else(|| bad("missing rows"))?;
        let cols = cols.ok_or_else(|| bad("missing cols"))?;
        let count = rows
            .checked_mul(cols)
            .ok_or_else(|| bad("dimension overflow"))?;
        let want = count
            .checked_mul(8)
            .ok_or_else(|| bad("dimension overflow"))?;
        let payload = &bytes[offset..];
        if payload.len() < want {
            return Err(MatrixCodecError::LengthMismatch {
                got: payload.len(),
                want,
            });
        }
        let data: Vec<f64> = payload[..want]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok((
            MatrixBlock {
                rows,
                cols,
                meta,
                data,
            },
            offset + want,
        ))
    }
}
