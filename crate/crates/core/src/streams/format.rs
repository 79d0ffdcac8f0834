use std::io::{BufRead, Read, Write};

use super::{Item, StreamError};

pub const MAGIC: &[u8; 4] = b"NDL1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryHeader {
    pub t: u64,
    pub n: u64,
    pub p: f64,
}

/// One decimal integer per line.
pub fn write_text<W: Write>(mut w: W, items: &[Item]) -> Result<(), StreamError> {
    for x in items {
        writeln!(w, "{x}")?;
    }
    Ok(())
}

/// Reads one integer per line; blank lines and lines starting with `#` are skipped.
pub fn read_text<R: BufRead>(r: R) -> Result<Vec<Item>, StreamError> {
    let mut items = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let x = line.parse().map_err(|e| StreamError::Format(format!("line {}: {e}", lineno + 1)))?;
        items.push(x);
    }
    Ok(items)
}

/// Magic, `t`, `n`, `p`, then the items, all little-endian. Negative items
/// (coin streams) are stored in two's complement.
pub fn write_binary<W: Write>(mut w: W, t: u64, p: f64, items: &[Item]) -> Result<(), StreamError> {
    w.write_all(MAGIC)?;
    w.write_all(&t.to_le_bytes())?;
    w.write_all(&(items.len() as u64).to_le_bytes())?;
    w.write_all(&p.to_le_bytes())?;
    for &x in items {
        w.write_all(&(x as u64).to_le_bytes())?;
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, StreamError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => StreamError::Format("truncated".into()),
        _ => StreamError::Io(e),
    })?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_binary<R: Read>(mut r: R) -> Result<(BinaryHeader, Vec<Item>), StreamError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| StreamError::Format("missing magic".into()))?;
    if &magic != MAGIC {
        return Err(StreamError::Format(format!("bad magic {magic:?}")));
    }
    let t = read_u64(&mut r)?;
    let n = read_u64(&mut r)?;
    let p = f64::from_bits(read_u64(&mut r)?);
    let mut items = Vec::with_capacity(n.min(1 << 24) as usize);
    for _ in 0..n {
        items.push(read_u64(&mut r)? as Item);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(StreamError::Format("trailing bytes".into()));
    }
    Ok((BinaryHeader { t, n, p }, items))
}
