//! Flat binary checkpoint format for network parameters.
//!
//! All integers are little-endian `u32`, all values little-endian IEEE-754
//! `f64`:
//!
//! ```text
//! magic    8 bytes  "DAYAHDNN"
//! version  u32      1
//! kind     u32 length, then UTF-8 bytes (e.g. "mlp", "lstm", "spnn")
//! count    u32      number of tensors
//! tensor   u32 name length, UTF-8 name,
//!          u32 ndim, ndim × u32 dims,
//!          product(dims) × f64 values (row-major)
//! ```

use nalgebra::{DMatrix, DVector};

use super::{Activation, LstmLayer, LstmParams, MinMax, MlpParams};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"DAYAHDNN";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        Self {
            name: name.into(),
            dims,
            data,
        }
    }

    pub fn vector(name: impl Into<String>, data: Vec<f64>) -> Self {
        let n = data.len();
        Self::new(name, vec![n], data)
    }

    fn matrix(name: impl Into<String>, m: &DMatrix<f64>) -> Self {
        let data = (0..m.nrows()).flat_map(|r| m.row(r).iter().copied().collect::<Vec<_>>()).collect();
        Self::new(name, vec![m.nrows(), m.ncols()], data)
    }

    fn to_matrix(&self) -> Result<DMatrix<f64>> {
        match self.dims[..] {
            [r, c] => Ok(DMatrix::from_row_slice(r, c, &self.data)),
            _ => Err(Error::Format(format!("tensor `{}` is not a matrix", self.name))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub tensors: Vec<Tensor>,
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_str(out: &mut Vec<u8>, s: &str) -> Result<()> {
    put_u32(out, s.len())?;
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("checkpoint truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Format("non UTF-8 name in checkpoint".into()))
    }
}

impl Checkpoint {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION as usize)?;
        put_str(&mut out, &self.kind)?;
        put_u32(&mut out, self.tensors.len())?;
        for t in &self.tensors {
            put_str(&mut out, &t.name)?;
            put_u32(&mut out, t.dims.len())?;
            for &d in &t.dims {
                put_u32(&mut out, d)?;
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Format("not a checkpoint (bad magic bytes)".into()));
        }
        let version = r.u32()?;
        if version != VERSION as usize {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let kind = r.string()?;
        let count = r.u32()?;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name = r.string()?;
            let ndim = r.u32()?;
            let dims = (0..ndim).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
            let n = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| Error::Format(format!("tensor `{name}` is too large")))?;
            let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Format("tensor too large".into()))?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect();
            tensors.push(Tensor { name, dims, data });
        }
        if r.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after the last tensor".into()));
        }
        Ok(Self { kind, tensors })
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Format(format!("checkpoint has no tensor `{name}`")))
    }

    fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::Format(format!("expected a `{kind}` checkpoint, found `{}`", self.kind)))
        }
    }
}

fn activation_code(a: Activation) -> f64 {
    match a {
        Activation::Tanh => 0.0,
        Activation::Relu => 1.0,
        Activation::Identity => 2.0,
    }
}

fn activation_from_code(v: f64) -> Result<Activation> {
    match v as i64 {
        0 => Ok(Activation::Tanh),
        1 => Ok(Activation::Relu),
        2 => Ok(Activation::Identity),
        _ => Err(Error::Format(format!("unknown activation code {v}"))),
    }
}

/// Tensors `activation`, then `w{l}` `(out, in)` and `b{l}` per layer.
pub fn mlp_tensors(p: &MlpParams) -> Vec<Tensor> {
    let mut t = vec![Tensor::vector("activation", vec![activation_code(p.activation)])];
    for (l, (w, b)) in p.weights.iter().zip(&p.biases).enumerate() {
        t.push(Tensor::new(format!("w{l}"), vec![b.len(), w.len() / b.len()], w.clone()));
        t.push(Tensor::vector(format!("b{l}"), b.clone()));
    }
    t
}

pub fn mlp_from_checkpoint(c: &Checkpoint) -> Result<MlpParams> {
    let activation = activation_from_code(c.get("activation")?.data[0])?;
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    let mut sizes = Vec::new();
    for l in 0.. {
        let Ok(w) = c.get(&format!("w{l}")) else { break };
        let b = c.get(&format!("b{l}"))?;
        let [out, inp] = w.dims[..] else {
            return Err(Error::Format(format!("w{l} is not a matrix")));
        };
        if sizes.is_empty() {
            sizes.push(inp);
        }
        sizes.push(out);
        weights.push(w.data.clone());
        biases.push(b.data.clone());
    }
    let mut p = MlpParams::zeros(&sizes, activation)?;
    if p.weights.iter().zip(&weights).any(|(a, b)| a.len() != b.len())
        || p.biases.iter().zip(&biases).any(|(a, b)| a.len() != b.len())
    {
        return Err(Error::Format("inconsistent MLP tensor shapes".into()));
    }
    p.weights = weights;
    p.biases = biases;
    Ok(p)
}

pub fn encode_mlp(p: &MlpParams) -> Result<Vec<u8>> {
    Checkpoint {
        kind: "mlp".into(),
        tensors: mlp_tensors(p),
    }
    .encode()
}

pub fn decode_mlp(bytes: &[u8]) -> Result<MlpParams> {
    let c = Checkpoint::decode(bytes)?;
    c.expect_kind("mlp")?;
    mlp_from_checkpoint(&c)
}

/// Tensors `meta` = `[steps, norm.min, norm.max]`, then `wx{l}`, `wh{l}`,
/// `b{l}` per recurrent layer, then `head_w`, `head_b`.
pub fn encode_lstm(p: &LstmParams) -> Result<Vec<u8>> {
    let mut t = vec![Tensor::vector("meta", vec![p.steps as f64, p.norm.min, p.norm.max])];
    for (l, layer) in p.layers.iter().enumerate() {
        t.push(Tensor::matrix(format!("wx{l}"), &layer.wx));
        t.push(Tensor::matrix(format!("wh{l}"), &layer.wh));
        t.push(Tensor::vector(format!("b{l}"), layer.b.iter().copied().collect()));
    }
    t.push(Tensor::matrix("head_w", &p.head_w));
    t.push(Tensor::vector("head_b", p.head_b.iter().copied().collect()));
    Checkpoint {
        kind: "lstm".into(),
        tensors: t,
    }
    .encode()
}

pub fn decode_lstm(bytes: &[u8]) -> Result<LstmParams> {
    let c = Checkpoint::decode(bytes)?;
    c.expect_kind("lstm")?;
    let meta = &c.get("meta")?.data;
    if meta.len() != 3 {
        return Err(Error::Format("meta tensor must hold 3 values".into()));
    }
    let mut layers = Vec::new();
    for l in 0.. {
        let Ok(wx) = c.get(&format!("wx{l}")) else { break };
        let wx = wx.to_matrix()?;
        let wh = c.get(&format!("wh{l}"))?.to_matrix()?;
        let b = DVector::from_vec(c.get(&format!("b{l}"))?.data.clone());
        layers.push(LstmLayer {
            input: wx.ncols(),
            hidden: wh.ncols(),
            wx,
            wh,
            b,
        });
    }
    if layers.is_empty() {
        return Err(Error::Format("checkpoint has no recurrent layers".into()));
    }
    let p = LstmParams {
        layers,
        head_w: c.get("head_w")?.to_matrix()?,
        head_b: DVector::from_vec(c.get("head_b")?.data.clone()),
        steps: meta[0] as usize,
        norm: MinMax {
            min: meta[1],
            max: meta[2],
        },
    };
    p.forward(&[DMatrix::zeros(p.input_width(), 1); 1])
        .map_err(|e| Error::Format(format!("inconsistent LSTM tensors: {e}")))?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mlp_round_trip_is_bit_exact() {
        let p = MlpParams::init(&[15, 7, 3, 1], Activation::Relu, 5).unwrap();
        let bytes = encode_mlp(&p).unwrap();
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(decode_mlp(&bytes).unwrap(), p);
    }

    #[test]
    fn lstm_round_trip_is_bit_exact() {
        let mut p = LstmParams::init(96, &[6, 4], 96, 10, 1).unwrap();
        p.norm = MinMax { min: 0.25, max: 7.5 };
        let bytes = encode_lstm(&p).unwrap();
        assert_eq!(decode_lstm(&bytes).unwrap(), p);
    }

    #[test]
    fn corrupt_input_rejected() {
        let p = MlpParams::init(&[2, 1], Activation::Tanh, 5).unwrap();
        let bytes = encode_mlp(&p).unwrap();
        assert!(matches!(decode_mlp(&bytes[..bytes.len() - 3]), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_mlp(&bad), Err(Error::Format(_))));
        assert!(matches!(decode_lstm(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn layout_is_documented_header() {
        let c = Checkpoint {
            kind: "x".into(),
            tensors: vec![Tensor::new("t", vec![1, 2], vec![1.0, -2.0])],
        };
        let b = c.encode().unwrap();
        let mut expected = MAGIC.to_vec();
        expected.extend(1u32.to_le_bytes());
        expected.extend(1u32.to_le_bytes());
        expected.push(b'x');
        expected.extend(1u32.to_le_bytes());
        expected.extend(1u32.to_le_bytes());
        expected.push(b't');
        expected.extend(2u32.to_le_bytes());
        expected.extend(1u32.to_le_bytes());
        expected.extend(2u32.to_le_bytes());
        expected.extend(1.0f64.to_le_bytes());
        expected.extend((-2.0f64).to_le_bytes());
        assert_eq!(b, expected);
    }
}
