use candle_core::{DType, Device, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Ordered, seeded collection of trainable tensors for one sub-network.
///
/// Initialization draws from a ChaCha stream so that a fixed seed always
/// yields the same weights regardless of platform or thread count.
#[derive(Debug)]
pub struct ParamStore {
    dtype: DType,
    device: Device,
    rng: ChaCha8Rng,
    entries: Vec<(String, Var)>,
}

impl ParamStore {
    pub fn new(seed: u64, dtype: DType) -> Self {
        Self {
            dtype,
            device: Device::Cpu,
            rng: ChaCha8Rng::seed_from_u64(seed),
            entries: Vec::new(),
        }
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    fn insert(&mut self, name: &str, values: Vec<f64>, shape: &[usize]) -> Result<Var> {
        if self.entries.iter().any(|(n, _)| n == name) {
            return Err(Error::Config(format!("duplicate parameter name `{name}`")));
        }
        let t = Tensor::from_vec(values, shape, &self.device)?.to_dtype(self.dtype)?;
        let var = Var::from_tensor(&t)?;
        self.entries.push((name.to_string(), var.clone()));
        Ok(var)
    }

    /// Uniform in `[-bound, bound]`.
    pub fn uniform(&mut self, name: &str, shape: &[usize], bound: f64) -> Result<Var> {
        let n: usize = shape.iter().product();
        let values = (0..n)
            .map(|_| self.rng.random_range(-bound..=bound))
            .collect();
        self.insert(name, values, shape)
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f64) -> Result<Var> {
        let n: usize = shape.iter().product();
        self.insert(name, vec![value; n], shape)
    }

    pub fn entries(&self) -> &[(String, Var)] {
        &self.entries
    }

    pub fn vars(&self) -> Vec<Var> {
        self.entries.iter().map(|(_, v)| v.clone()).collect()
    }

    pub fn num_params(&self) -> usize {
        self.entries.iter().map(|(_, v)| v.elem_count()).sum()
    }

    /// SHA-256 over names, shapes and the raw little-endian values.
    pub fn fingerprint(&self) -> Result<String> {
        let mut hasher = Sha256::new();
        for (name, var) in &self.entries {
            hasher.update(name.as_bytes());
            for d in var.dims() {
                hasher.update((*d as u64).to_le_bytes());
            }
            match var.dtype() {
                DType::F64 => {
                    for v in var.flatten_all()?.to_vec1::<f64>()? {
                        hasher.update(v.to_le_bytes());
                    }
                }
                _ => {
                    for v in var.flatten_all()?.to_dtype(DType::F32)?.to_vec1::<f32>()? {
                        hasher.update(v.to_le_bytes());
                    }
                }
            }
        }
        Ok(format!("{:x}", hasher.finalize()))
    }

    /// Overwrites every parameter from `lookup`, checking shapes.
    pub fn load_with(&self, mut lookup: impl FnMut(&str) -> Option<Tensor>) -> Result<()> {
        for (name, var) in &self.entries {
            let t = lookup(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))?;
            if t.dims() != var.dims() {
                return Err(Error::Checkpoint(format!(
                    "parameter `{name}` has shape {:?}, expected {:?}",
                    t.dims(),
                    var.dims()
                )));
            }
            var.set(&t.to_dtype(self.dtype)?)?;
        }
        Ok(())
    }
}

/// Name-scoped view used while constructing layers.
pub struct Scope<'a> {
    store: &'a mut ParamStore,
    prefix: String,
}

impl<'a> Scope<'a> {
    pub fn new(store: &'a mut ParamStore, prefix: impl Into<String>) -> Self {
        Self {
            store,
            prefix: prefix.into(),
        }
    }

    pub fn sub(&mut self, name: impl AsRef<str>) -> Scope<'_> {
        let prefix = if self.prefix.is_empty() {
            name.as_ref().to_string()
        } else {
            format!("{}.{}", self.prefix, name.as_ref())
        };
        Scope {
            store: self.store,
            prefix,
        }
    }

    fn full(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        }
    }

    pub fn uniform(&mut self, name: &str, shape: &[usize], bound: f64) -> Result<Var> {
        let full = self.full(name);
        self.store.uniform(&full, shape, bound)
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f64) -> Result<Var> {
        let full = self.full(name);
        self.store.constant(&full, shape, value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_weights() {
        let build = || {
            let mut s = ParamStore::new(9, DType::F32);
            s.uniform("a", &[3, 4], 0.5).unwrap();
            s.constant("b", &[2], 0.25).unwrap();
            s
        };
        let (a, b) = (build(), build());
        assert_eq!(a.fingerprint().unwrap(), b.fingerprint().unwrap());
        assert_eq!(a.num_params(), 14);
        let mut c = ParamStore::new(10, DType::F32);
        c.uniform("a", &[3, 4], 0.5).unwrap();
        c.constant("b", &[2], 0.25).unwrap();
        assert_ne!(a.fingerprint().unwrap(), c.fingerprint().unwrap());
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::new(0, DType::F64);
        let mut scope = Scope::new(&mut s, "enc");
        scope.constant("w", &[1], 0.0).unwrap();
        assert!(scope.constant("w", &[1], 0.0).is_err());
        assert_eq!(s.entries()[0].0, "enc.w");
    }
}
