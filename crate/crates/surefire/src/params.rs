//! Versioned little-endian parameter files.
//!
//! ```text
//! magic      b"SFPARAMS"
//! version    u32 (1)
//! config     [u8; 32]  sha-256 of the run config
//! seed       u64
//! input      3 x u32   height, width, channels
//! convs      u32 count, then (kernel u32, filters u32) per layer
//! hidden     u32 count, then units u32 per layer
//! outputs    u32
//! value head u8 (0 or 1)
//! params     u64 count, then that many f64
//! ```

use std::io::{Read, Write};

use surefire_core::nn::{Architecture, ConvSpec, Network, Tensor};

pub const MAGIC: &[u8; 8] = b"SFPARAMS";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ParamsError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a parameter file (bad magic)")]
    Magic,
    #[error("unsupported parameter file version {0}")]
    Version(u32),
    #[error("architecture mismatch: file has {found:?}, expected {expected:?}")]
    Architecture { found: Box<Architecture>, expected: Box<Architecture> },
    #[error("corrupt parameter file: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamsHeader {
    pub config_hash: [u8; 32],
    pub seed: u64,
    pub architecture: Architecture,
}

pub fn write_params<W: Write>(mut out: W, network: &Network, config_hash: [u8; 32], seed: u64) -> std::io::Result<()> {
    let arch = network.architecture();
    let u32_of = |v: usize| u32::try_from(v).expect("architecture dimension fits in u32");
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&config_hash)?;
    out.write_all(&seed.to_le_bytes())?;
    for d in arch.input {
        out.write_all(&u32_of(d).to_le_bytes())?;
    }
    out.write_all(&u32_of(arch.convs.len()).to_le_bytes())?;
    for c in &arch.convs {
        out.write_all(&u32_of(c.kernel).to_le_bytes())?;
        out.write_all(&u32_of(c.filters).to_le_bytes())?;
    }
    out.write_all(&u32_of(arch.hidden.len()).to_le_bytes())?;
    for &h in &arch.hidden {
        out.write_all(&u32_of(h).to_le_bytes())?;
    }
    out.write_all(&u32_of(arch.outputs).to_le_bytes())?;
    out.write_all(&[u8::from(arch.value_head)])?;
    out.write_all(&(network.param_count() as u64).to_le_bytes())?;
    for t in network.params() {
        for v in t.data() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()
}

struct Cursor<R>(R);

impl<R: Read> Cursor<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], ParamsError> {
        let mut buf = [0; N];
        self.0.read_exact(&mut buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => ParamsError::Corrupt("truncated".into()),
            _ => ParamsError::Io(e),
        })?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32, ParamsError> {
        self.bytes().map(u32::from_le_bytes)
    }

    fn dim(&mut self) -> Result<usize, ParamsError> {
        Ok(self.u32()? as usize)
    }

    fn u64(&mut self) -> Result<u64, ParamsError> {
        self.bytes().map(u64::from_le_bytes)
    }
}

/// Reads a parameter file, rejecting it unless its architecture equals `expected`.
pub fn read_params<R: Read>(source: R, expected: &Architecture) -> Result<(ParamsHeader, Network), ParamsError> {
    let mut r = Cursor(source);
    if &r.bytes::<8>()? != MAGIC {
        return Err(ParamsError::Magic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(ParamsError::Version(version));
    }
    let config_hash = r.bytes::<32>()?;
    let seed = r.u64()?;
    let input = [r.dim()?, r.dim()?, r.dim()?];
    // Counts are bounded before allocating so a corrupt file cannot request gigabytes.
    let conv_count = r.dim()?;
    if conv_count > 64 {
        return Err(ParamsError::Corrupt(format!("{conv_count} conv layers")));
    }
    let mut convs = Vec::with_capacity(conv_count);
    for _ in 0..conv_count {
        convs.push(ConvSpec { kernel: r.dim()?, filters: r.dim()? });
    }
    let hidden_count = r.dim()?;
    if hidden_count > 64 {
        return Err(ParamsError::Corrupt(format!("{hidden_count} hidden layers")));
    }
    let hidden = (0..hidden_count).map(|_| r.dim()).collect::<Result<Vec<_>, _>>()?;
    let outputs = r.dim()?;
    let value_head = match r.bytes::<1>()?[0] {
        0 => false,
        1 => true,
        b => return Err(ParamsError::Corrupt(format!("value-head flag {b}"))),
    };
    let architecture = Architecture { input, convs, hidden, outputs, value_head };
    if &architecture != expected {
        return Err(ParamsError::Architecture { found: Box::new(architecture), expected: Box::new(expected.clone()) });
    }
    let shapes = architecture.param_shapes();
    let total: usize = shapes.iter().map(|s| s.iter().product::<usize>()).sum();
    let count = r.u64()?;
    if count != total as u64 {
        return Err(ParamsError::Corrupt(format!("{count} parameters, architecture needs {total}")));
    }
    let mut params = Vec::with_capacity(shapes.len());
    for shape in &shapes {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| r.bytes::<8>().map(f64::from_le_bytes)).collect::<Result<Vec<_>, _>>()?;
        params.push(Tensor::from_vec(shape, data).map_err(|e| ParamsError::Corrupt(e.to_string()))?);
    }
    if r.0.read(&mut [0u8; 1])? != 0 {
        return Err(ParamsError::Corrupt("trailing bytes".into()));
    }
    let network =
        Network::from_params(architecture.clone(), params).map_err(|e| ParamsError::Corrupt(e.to_string()))?;
    Ok((ParamsHeader { config_hash, seed, architecture }, network))
}
