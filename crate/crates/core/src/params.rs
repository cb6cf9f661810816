//! Named parameter store, Adam optimizer, and checkpoint I/O.
//!
//! Parameters live outside any tape. A forward pass binds them as leaves
//! with [`ParamSet::bind`], and [`ParamSet::accumulate`] harvests the
//! gradients back after `Tape::backward`.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SeanError};
use crate::tape::{Gradients, Tape, Var};
use crate::tensor::Tensor;

/// One learnable tensor with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

/// Ordered collection of named parameters. Order is the binding and
/// checkpoint order, so it must be construction-deterministic.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    params: Vec<Param>,
    index: HashMap<String, usize>,
}

/// Handle to one parameter within a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(usize);

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter; names must be unique.
    pub fn register(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(
            !self.index.contains_key(&name),
            "params: duplicate parameter name {name}"
        );
        let grad = Tensor::zeros(value.shape());
        let id = self.params.len();
        self.index.insert(name.clone(), id);
        self.params.push(Param { name, value, grad });
        ParamId(id)
    }

    /// Xavier-uniform matrix `rows x cols`, seeded by the caller's RNG.
    pub fn register_xavier(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        rng: &mut ChaCha8Rng,
    ) -> ParamId {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        self.register(name, Tensor::matrix(rows, cols, data))
    }

    /// Uniform vector in `[-bound, bound]`.
    pub fn register_uniform_vec(
        &mut self,
        name: impl Into<String>,
        len: usize,
        bound: f64,
        rng: &mut ChaCha8Rng,
    ) -> ParamId {
        let data = (0..len).map(|_| rng.gen_range(-bound..bound)).collect();
        self.register(name, Tensor::vector(data))
    }

    pub fn register_zeros_vec(&mut self, name: impl Into<String>, len: usize) -> ParamId {
        self.register(name, Tensor::zeros(&[len]))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].grad
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Binds every parameter as a differentiable leaf, in registration order.
    pub fn bind(&self, tape: &Tape) -> Binding {
        let vars = self
            .params
            .iter()
            .map(|p| tape.leaf(p.value.clone()))
            .collect();
        Binding { vars }
    }

    /// Adds the tape gradients of a binding into the parameter gradients.
    pub fn accumulate(&mut self, binding: &Binding, grads: &Gradients) {
        for (param, &var) in self.params.iter_mut().zip(binding.vars.iter()) {
            if let Some(g) = grads.wrt(var) {
                param.grad.add_assign(g);
            }
        }
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}

/// Tape leaves for one forward pass, aligned with `ParamSet` order.
pub struct Binding {
    vars: Vec<Var>,
}

impl Binding {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }
}

/// Adam optimizer state: per-parameter moments plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Standard defaults with the given learning rate.
    pub fn new(params: &ParamSet, lr: f64) -> Self {
        Self {
            m: params.params.iter().map(|p| Tensor::zeros(p.value.shape())).collect(),
            v: params.params.iter().map(|p| Tensor::zeros(p.value.shape())).collect(),
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update from the accumulated gradients; clears them afterwards.
///
/// Panics if the state was initialized against a different parameter set.
pub fn adam_step(params: &mut ParamSet, state: &mut AdamState) {
    assert_eq!(
        params.len(),
        state.m.len(),
        "adam: state holds {} moment tensors for {} parameters",
        state.m.len(),
        params.len()
    );
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for (i, p) in params.params.iter_mut().enumerate() {
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        let g = p.grad.data();
        let x = p.value.data_mut();
        for j in 0..x.len() {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            x[j] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
        p.grad.fill(0.0);
    }
}

const CKPT_MAGIC: &[u8; 8] = b"SEANCKPT";
const CKPT_VERSION: u16 = 1;

/// Writes all parameters: magic bytes, version u16, then per parameter
/// name length (u64 LE) + UTF-8 name, rank (u64 LE), dims (u64 LE each),
/// row-major f64 LE data. Round-trips bit-exactly.
pub fn write_checkpoint(path: &Path, params: &ParamSet) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CKPT_MAGIC);
    buf.extend_from_slice(&CKPT_VERSION.to_le_bytes());
    for p in &params.params {
        let name = p.name.as_bytes();
        buf.extend_from_slice(&(name.len() as u64).to_le_bytes());
        buf.extend_from_slice(name);
        buf.extend_from_slice(&(p.value.rank() as u64).to_le_bytes());
        for &d in p.value.shape() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &x in p.value.data() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Reads a checkpoint into `(name, tensor)` records in file order.
pub fn read_checkpoint(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut pos = 0usize;

    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if *pos + n > bytes.len() {
            return Err(SeanError::Checkpoint(format!(
                "truncated at byte {} (wanted {n} more)",
                *pos
            )));
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    let take_u64 = |pos: &mut usize| -> Result<u64> {
        let s = take(pos, 8)?;
        Ok(u64::from_le_bytes(s.try_into().unwrap()))
    };

    if take(&mut pos, 8)? != CKPT_MAGIC {
        return Err(SeanError::Checkpoint("bad magic bytes".into()));
    }
    let version = u16::from_le_bytes(take(&mut pos, 2)?.try_into().unwrap());
    if version != CKPT_VERSION {
        return Err(SeanError::Checkpoint(format!(
            "unsupported version {version}"
        )));
    }

    let mut records = Vec::new();
    while pos < bytes.len() {
        let name_len = take_u64(&mut pos)? as usize;
        let name = String::from_utf8(take(&mut pos, name_len)?.to_vec())
            .map_err(|_| SeanError::Checkpoint("parameter name is not UTF-8".into()))?;
        let rank = take_u64(&mut pos)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(take_u64(&mut pos)? as usize);
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()));
        }
        records.push((name, Tensor::new(shape, data)));
    }
    Ok(records)
}

/// Loads checkpoint records into an existing parameter set. Every record
/// must match a registered parameter's name and shape, and vice versa.
pub fn load_into(params: &mut ParamSet, records: Vec<(String, Tensor)>) -> Result<()> {
    if records.len() != params.len() {
        return Err(SeanError::Checkpoint(format!(
            "checkpoint has {} parameters, model expects {}",
            records.len(),
            params.len()
        )));
    }
    for (name, tensor) in records {
        let id = params.id_of(&name).ok_or_else(|| {
            SeanError::Checkpoint(format!("unknown parameter {name} in checkpoint"))
        })?;
        if params.value(id).shape() != tensor.shape() {
            return Err(SeanError::Checkpoint(format!(
                "parameter {name}: shape {:?} in checkpoint, {:?} in model",
                tensor.shape(),
                params.value(id).shape()
            )));
        }
        *params.value_mut(id) = tensor;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn two_param_set() -> ParamSet {
        let mut ps = ParamSet::new();
        ps.register("a", Tensor::vector(vec![1.0, -2.0]));
        ps.register("b", Tensor::matrix(2, 2, vec![0.5, 0.25, -0.125, 3.0]));
        ps
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut ps = two_param_set();
        let before = ps.value(ps.id_of("a").unwrap()).clone();
        let mut adam = AdamState::new(&ps, 0.1);
        adam_step(&mut ps, &mut adam);
        assert!(before.bits_eq(ps.value(ps.id_of("a").unwrap())));
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn first_adam_step_moves_against_gradient_sign() {
        let mut ps = ParamSet::new();
        let id = ps.register("w", Tensor::vector(vec![0.0, 0.0]));
        ps.params[id.0].grad = Tensor::vector(vec![100.0, -50.0]);
        let mut adam = AdamState::new(&ps, 0.01);
        adam_step(&mut ps, &mut adam);
        let w = ps.value(id).data().to_vec();
        // bias-corrected first step: -lr * g/|g| in the large-|g| limit
        assert!((w[0] + 0.01).abs() < 1e-8);
        assert!((w[1] - 0.01).abs() < 1e-8);
    }

    #[test]
    fn adam_is_deterministic() {
        let run = || {
            let mut ps = two_param_set();
            let mut adam = AdamState::new(&ps, 0.05);
            for step in 0..10 {
                for (_, p) in ps.params.iter_mut().enumerate() {
                    for (j, g) in p.grad.data_mut().iter_mut().enumerate() {
                        *g = ((step + j) as f64).sin();
                    }
                }
                adam_step(&mut ps, &mut adam);
            }
            ps
        };
        let (a, b) = (run(), run());
        for (pa, pb) in a.params.iter().zip(b.params.iter()) {
            assert!(pa.value.bits_eq(&pb.value));
        }
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut ps = ParamSet::new();
        ps.register_xavier("layer0.w_q", 5, 7, &mut rng);
        ps.register_uniform_vec("layer0.b", 13, 0.3, &mut rng);
        ps.register("scalarish", Tensor::scalar(-0.0));
        write_checkpoint(&path, &ps).unwrap();

        let mut restored = ps.clone();
        for p in &mut restored.params {
            p.value.fill(9.9);
        }
        load_into(&mut restored, read_checkpoint(&path).unwrap()).unwrap();
        for (pa, pb) in ps.params.iter().zip(restored.params.iter()) {
            assert!(pa.value.bits_eq(&pb.value), "mismatch in {}", pa.name);
        }
    }

    #[test]
    fn checkpoint_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"NOTSEAN!rest").unwrap();
        assert!(read_checkpoint(&path).is_err());
    }

    #[test]
    fn bind_and_accumulate_harvests_gradients() {
        let mut ps = ParamSet::new();
        let id = ps.register("x", Tensor::vector(vec![2.0, 3.0]));
        let tape = Tape::new();
        let binding = ps.bind(&tape);
        let loss = tape.sum(tape.mul(binding.var(id), binding.var(id)));
        let grads = tape.backward(loss);
        ps.accumulate(&binding, &grads);
        assert_eq!(ps.grad(id).data(), &[4.0, 6.0]); // d(x^2)/dx = 2x
    }
}
