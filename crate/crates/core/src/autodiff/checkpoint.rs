//! Checkpoint file format: magic "CGCKPT1", then one record per parameter in
//! name order — u32 name length, name bytes, u32 rank, u64 dims, f64 payload,
//! all little-endian. Round-trips preserve exact bit patterns.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::mlp::ParamStore;
use super::tensor::Tensor;
use crate::{Error, Result};

const MAGIC: &[u8; 7] = b"CGCKPT1";

pub fn save(store: &ParamStore, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    for (name, t) in store.iter() {
        let nb = name.as_bytes();
        w.write_all(&(nb.len() as u32).to_le_bytes())?;
        w.write_all(nb)?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for &v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ParamStore> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 7];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Checkpoint(format!("{}: truncated header", path.display())))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "{}: bad magic {:?}",
            path.display(),
            magic
        )));
    }
    let mut store = ParamStore::new();
    loop {
        let mut len4 = [0u8; 4];
        match r.read_exact(&mut len4) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let name_len = u32::from_le_bytes(len4) as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Checkpoint("non-utf8 parameter name".into()))?;
        let mut rank4 = [0u8; 4];
        r.read_exact(&mut rank4)?;
        let rank = u32::from_le_bytes(rank4) as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let mut d8 = [0u8; 8];
            r.read_exact(&mut d8)?;
            shape.push(u64::from_le_bytes(d8) as usize);
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut v8 = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut v8)?;
            data.push(f64::from_le_bytes(v8));
        }
        store.insert(&name, Tensor::from_vec(shape, data));
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let mut store = ParamStore::new();
        // Include values whose bit patterns are easy to corrupt (subnormals,
        // negative zero, extremes).
        store.insert(
            "a.w0",
            Tensor::matrix(2, 3, vec![1.0, -0.0, 1e-310, f64::MAX, -1e-15, 0.3]),
        );
        store.insert("a.b0", Tensor::vector(vec![42.0]));
        save(&store, &path).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(back.names(), store.names());
        for name in store.names() {
            let x = store.get(&name);
            let y = back.get(&name);
            assert_eq!(x.shape(), y.shape());
            for (a, b) in x.data().iter().zip(y.data()) {
                assert_eq!(a.to_bits(), b.to_bits(), "{name}");
            }
        }
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"NOTCKPTxxxx").unwrap();
        assert!(load(&path).is_err());
    }
}
