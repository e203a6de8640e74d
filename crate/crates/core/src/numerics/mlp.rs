use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NumericsError, check_len};
use crate::scalar::Scalar;

/// Norms below this are treated as a zero vector by the unit-norm head.
pub const NORM_FLOOR: f64 = 1e-12;

/// Parameters of `x -> w2 · relu(w1 · x + b1) + b2`.
///
/// All four tensors live in one flat buffer in the order `w1, b1, w2, b2`;
/// matrices are row-major (`w1` is `hidden × in`, `w2` is `out × hidden`).
/// Dimensions are fixed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<T> {
    in_dim: usize,
    hidden: usize,
    out_dim: usize,
    data: Vec<T>,
}

/// Network input: a dense vector, or a 0/1 indicator vector given by the
/// positions of its ones (evaluated sparsely).
#[derive(Debug, Clone, Copy)]
pub enum MlpInput<'a, T> {
    Dense(&'a [T]),
    Indicator { dim: usize, active: &'a [usize] },
}

impl<T> MlpInput<'_, T> {
    pub fn dim(&self) -> usize {
        match self {
            MlpInput::Dense(x) => x.len(),
            MlpInput::Indicator { dim, .. } => *dim,
        }
    }
}

impl<'a, T> From<&'a [T]> for MlpInput<'a, T> {
    fn from(x: &'a [T]) -> Self {
        MlpInput::Dense(x)
    }
}

impl<'a, T> From<&'a Vec<T>> for MlpInput<'a, T> {
    fn from(x: &'a Vec<T>) -> Self {
        MlpInput::Dense(x)
    }
}

impl<'a, T, const N: usize> From<&'a [T; N]> for MlpInput<'a, T> {
    fn from(x: &'a [T; N]) -> Self {
        MlpInput::Dense(x)
    }
}

/// Intermediate values of one forward pass, kept for backpropagation.
/// `(pre-activations, activations, linear output)`.
type AffineOutputs<T> = (Vec<T>, Vec<T>, Vec<T>);

#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    pub pre: Vec<T>,
    pub act: Vec<T>,
    pub raw: Vec<T>,
    /// Final output; equals `raw` when the head is linear.
    pub output: Vec<T>,
    /// `‖raw‖₂`.
    pub norm: T,
    /// Denominator actually used by the unit-norm head (`norm + floor`).
    /// `None` for a linear head.
    pub denom: Option<T>,
}

impl<T: Scalar> MlpParams<T> {
    pub fn zeros(in_dim: usize, hidden: usize, out_dim: usize) -> Self {
        let len = Self::param_count(in_dim, hidden, out_dim);
        Self {
            in_dim,
            hidden,
            out_dim,
            data: vec![T::zero(); len],
        }
    }

    /// Uniform initialization in `[-1/√fan_in, 1/√fan_in]` for every weight
    /// and bias of a layer.
    pub fn init_uniform<R: Rng + ?Sized>(in_dim: usize, hidden: usize, out_dim: usize, rng: &mut R) -> Self {
        let mut params = Self::zeros(in_dim, hidden, out_dim);
        let b_in = (1.0 / in_dim.max(1) as f64).sqrt();
        let b_hidden = (1.0 / hidden.max(1) as f64).sqrt();
        let (first, second) = params.data.split_at_mut(hidden * in_dim + hidden);
        for v in first.iter_mut() {
            *v = T::lit((2.0 * rng.random::<f64>() - 1.0) * b_in);
        }
        for v in second.iter_mut() {
            *v = T::lit((2.0 * rng.random::<f64>() - 1.0) * b_hidden);
        }
        params
    }

    pub fn from_parts(
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
        w1: &[T],
        b1: &[T],
        w2: &[T],
        b2: &[T],
    ) -> Result<Self, NumericsError> {
        check_len("w1", hidden * in_dim, w1.len())?;
        check_len("b1", hidden, b1.len())?;
        check_len("w2", out_dim * hidden, w2.len())?;
        check_len("b2", out_dim, b2.len())?;
        let mut data = Vec::with_capacity(Self::param_count(in_dim, hidden, out_dim));
        data.extend_from_slice(w1);
        data.extend_from_slice(b1);
        data.extend_from_slice(w2);
        data.extend_from_slice(b2);
        Ok(Self {
            in_dim,
            hidden,
            out_dim,
            data,
        })
    }

    pub fn param_count(in_dim: usize, hidden: usize, out_dim: usize) -> usize {
        hidden * in_dim + hidden + out_dim * hidden + out_dim
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.in_dim, self.hidden, self.out_dim)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.in_dim == other.in_dim && self.hidden == other.hidden && self.out_dim == other.out_dim
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    fn offsets(&self) -> [usize; 4] {
        let b1 = self.hidden * self.in_dim;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.out_dim * self.hidden;
        [0, b1, w2, b2]
    }

    pub fn w1(&self) -> &[T] {
        let o = self.offsets();
        &self.data[o[0]..o[1]]
    }

    pub fn b1(&self) -> &[T] {
        let o = self.offsets();
        &self.data[o[1]..o[2]]
    }

    pub fn w2(&self) -> &[T] {
        let o = self.offsets();
        &self.data[o[2]..o[3]]
    }

    pub fn b2(&self) -> &[T] {
        let o = self.offsets();
        &self.data[o[3]..]
    }

    /// Mutable views of `(w1, b1, w2, b2)`.
    pub fn parts_mut(&mut self) -> (&mut [T], &mut [T], &mut [T], &mut [T]) {
        let o = self.offsets();
        let (w1, rest) = self.data.split_at_mut(o[1]);
        let (b1, rest) = rest.split_at_mut(o[2] - o[1]);
        let (w2, b2) = rest.split_at_mut(o[3] - o[2]);
        (w1, b1, w2, b2)
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }

    /// Hidden pre-activations, activations and the linear output.
    fn affine_pass(&self, input: MlpInput<'_, T>) -> Result<AffineOutputs<T>, NumericsError> {
        check_len("mlp input", self.in_dim, input.dim())?;
        let (w1, b1, w2, b2) = (self.w1(), self.b1(), self.w2(), self.b2());
        let in_dim = self.in_dim;
        let mut pre = b1.to_vec();
        match input {
            MlpInput::Dense(x) => {
                for (h, p) in pre.iter_mut().enumerate() {
                    let row = &w1[h * in_dim..(h + 1) * in_dim];
                    *p += row.iter().zip(x).map(|(&w, &v)| w * v).sum::<T>();
                }
            }
            MlpInput::Indicator { active, .. } => {
                check_indices(active, in_dim)?;
                for (h, p) in pre.iter_mut().enumerate() {
                    let row = &w1[h * in_dim..(h + 1) * in_dim];
                    *p += active.iter().map(|&i| row[i]).sum::<T>();
                }
            }
        }
        let act: Vec<T> = pre.iter().map(|&p| if p > T::zero() { p } else { T::zero() }).collect();
        let mut raw = Vec::with_capacity(self.out_dim);
        for (o, &bias) in b2.iter().enumerate() {
            let row = &w2[o * self.hidden..(o + 1) * self.hidden];
            let s: T = row.iter().zip(&act).map(|(&w, &a)| w * a).sum();
            raw.push(s + bias);
        }
        Ok((pre, act, raw))
    }

    /// Linear-head forward pass: `w2 · relu(w1 · x + b1) + b2`.
    pub fn forward_linear<'a>(&self, input: impl Into<MlpInput<'a, T>>) -> Result<Vec<T>, NumericsError> {
        Ok(self.affine_pass(input.into())?.2)
    }

    /// Inference forward pass with the unit-norm head. Fails when the
    /// pre-normalization vector is (numerically) zero.
    pub fn forward<'a>(&self, input: impl Into<MlpInput<'a, T>>) -> Result<Vec<T>, NumericsError> {
        let (_, _, raw) = self.affine_pass(input.into())?;
        let norm = l2_norm(&raw);
        if !(norm >= T::lit(NORM_FLOOR)) {
            return Err(NumericsError::DegenerateOutput {
                norm: norm.to_f64_lossy(),
                floor: NORM_FLOOR,
            });
        }
        Ok(raw.iter().map(|&v| v / norm).collect())
    }

    /// Training forward pass with the unit-norm head; the norm floor is added
    /// to the denominator so the zero vector stays differentiable.
    pub fn forward_train<'a>(&self, input: impl Into<MlpInput<'a, T>>) -> Result<ForwardCache<T>, NumericsError> {
        let (pre, act, raw) = self.affine_pass(input.into())?;
        let norm = l2_norm(&raw);
        let denom = norm + T::lit(NORM_FLOOR);
        let output = raw.iter().map(|&v| v / denom).collect();
        Ok(ForwardCache {
            pre,
            act,
            raw,
            output,
            norm,
            denom: Some(denom),
        })
    }

    /// Linear-head forward pass keeping intermediates.
    pub fn forward_linear_cached<'a>(&self, input: impl Into<MlpInput<'a, T>>) -> Result<ForwardCache<T>, NumericsError> {
        let (pre, act, raw) = self.affine_pass(input.into())?;
        let norm = l2_norm(&raw);
        Ok(ForwardCache {
            pre,
            act,
            output: raw.clone(),
            raw,
            norm,
            denom: None,
        })
    }

    /// Accumulates `∂loss/∂θ` into `grads`, given `grad_out = ∂loss/∂output`
    /// for the forward pass recorded in `cache`.
    pub fn backward<'a>(
        &self,
        input: impl Into<MlpInput<'a, T>>,
        cache: &ForwardCache<T>,
        grad_out: &[T],
        grads: &mut MlpParams<T>,
    ) -> Result<(), NumericsError> {
        let input = input.into();
        check_len("mlp input", self.in_dim, input.dim())?;
        check_len("output gradient", self.out_dim, grad_out.len())?;
        check_len("forward cache", self.out_dim, cache.raw.len())?;
        if !self.same_shape(grads) {
            return Err(NumericsError::DimensionMismatch {
                what: "gradient buffer",
                expected: self.data.len(),
                actual: grads.data.len(),
            });
        }
        if let Some(i) = grad_out.iter().position(|v| !v.is_finite()) {
            return Err(NumericsError::NonFinite {
                what: "output gradient",
                index: i,
            });
        }

        // Through the unit-norm head: y = z / (r + floor), r = ‖z‖.
        let grad_raw: Vec<T> = match cache.denom {
            None => grad_out.to_vec(),
            Some(s) => {
                let r = cache.norm;
                let zg: T = cache.raw.iter().zip(grad_out).map(|(&z, &g)| z * g).sum();
                let coef = if r > T::zero() { zg / (r * s * s) } else { T::zero() };
                cache
                    .raw
                    .iter()
                    .zip(grad_out)
                    .map(|(&z, &g)| g / s - z * coef)
                    .collect()
            }
        };

        let hidden = self.hidden;
        let in_dim = self.in_dim;
        let w2 = self.w2();
        let mut grad_act = vec![T::zero(); hidden];
        {
            let (_, _, gw2, gb2) = grads.parts_mut();
            for (o, &g) in grad_raw.iter().enumerate() {
                if g == T::zero() {
                    continue;
                }
                gb2[o] += g;
                let w_row = &w2[o * hidden..(o + 1) * hidden];
                let gw_row = &mut gw2[o * hidden..(o + 1) * hidden];
                for h in 0..hidden {
                    gw_row[h] += g * cache.act[h];
                    grad_act[h] += g * w_row[h];
                }
            }
        }
        let (gw1, gb1, _, _) = grads.parts_mut();
        for h in 0..hidden {
            if !(cache.pre[h] > T::zero()) {
                continue;
            }
            let g = grad_act[h];
            if g == T::zero() {
                continue;
            }
            gb1[h] += g;
            let row = &mut gw1[h * in_dim..(h + 1) * in_dim];
            match input {
                MlpInput::Dense(x) => {
                    for (w, &v) in row.iter_mut().zip(x) {
                        *w += g * v;
                    }
                }
                MlpInput::Indicator { active, .. } => {
                    for &i in active {
                        row[i] += g;
                    }
                }
            }
        }
        Ok(())
    }

    /// Gradient of `⟨loss_tail, f(x)⟩` w.r.t. the parameters, through the
    /// unit-norm head in training mode.
    pub fn gradient<'a>(&self, input: impl Into<MlpInput<'a, T>>, loss_tail: &[T]) -> Result<MlpParams<T>, NumericsError> {
        let input = input.into();
        check_len("output gradient", self.out_dim, loss_tail.len())?;
        let cache = self.forward_train(input)?;
        let mut grads = self.zeros_like();
        self.backward(input, &cache, loss_tail, &mut grads)?;
        Ok(grads)
    }

    pub fn to_document(&self) -> ParamsDocument {
        let strings = |s: &[T]| s.iter().map(|v| v.to_string()).collect();
        ParamsDocument {
            format_version: ParamsDocument::VERSION,
            scalar: T::TAG.to_string(),
            in_dim: self.in_dim,
            hidden: self.hidden,
            out_dim: self.out_dim,
            w1: strings(self.w1()),
            b1: strings(self.b1()),
            w2: strings(self.w2()),
            b2: strings(self.b2()),
        }
    }

    pub fn from_document(doc: &ParamsDocument) -> Result<Self, NumericsError> {
        if doc.format_version != ParamsDocument::VERSION {
            return Err(NumericsError::Format(format!(
                "unsupported format_version {}",
                doc.format_version
            )));
        }
        if doc.scalar != T::TAG {
            return Err(NumericsError::Format(format!(
                "document holds {} values, expected {}",
                doc.scalar,
                T::TAG
            )));
        }
        let parse = |what: &str, v: &[String]| -> Result<Vec<T>, NumericsError> {
            v.iter()
                .map(|s| {
                    s.parse::<T>()
                        .map_err(|_| NumericsError::Format(format!("{what}: cannot parse {s:?}")))
                })
                .collect()
        };
        let params = Self::from_parts(
            doc.in_dim,
            doc.hidden,
            doc.out_dim,
            &parse("w1", &doc.w1)?,
            &parse("b1", &doc.b1)?,
            &parse("w2", &doc.w2)?,
            &parse("b2", &doc.b2)?,
        )?;
        if let Some(i) = params.first_non_finite() {
            return Err(NumericsError::NonFinite {
                what: "parameter document",
                index: i,
            });
        }
        Ok(params)
    }
}

/// Serialized form of [`MlpParams`]: explicit dimensions, layer order
/// `w1, b1, w2, b2`, row-major matrices, each value as a shortest
/// round-trip decimal string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsDocument {
    pub format_version: u32,
    pub scalar: String,
    pub in_dim: usize,
    pub hidden: usize,
    pub out_dim: usize,
    pub w1: Vec<String>,
    pub b1: Vec<String>,
    pub w2: Vec<String>,
    pub b2: Vec<String>,
}

impl ParamsDocument {
    pub const VERSION: u32 = 1;
}

fn check_indices(active: &[usize], dim: usize) -> Result<(), NumericsError> {
    match active.iter().find(|&&i| i >= dim) {
        Some(&i) => Err(NumericsError::Domain(format!("indicator position {i} outside input dimension {dim}"))),
        None => Ok(()),
    }
}

pub(crate) fn l2_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_like(in_dim: usize, hidden: usize, out_dim: usize) -> MlpParams<f64> {
        let mut p = MlpParams::zeros(in_dim, hidden, out_dim);
        let (w1, _, w2, _) = p.parts_mut();
        for i in 0..hidden.min(in_dim) {
            w1[i * in_dim + i] = 1.0;
        }
        for o in 0..out_dim.min(hidden) {
            w2[o * hidden + o] = 1.0;
        }
        p
    }

    /// Straight-line restatement of the forward formula, used as an oracle.
    #[allow(clippy::needless_range_loop)]
    fn reference_forward(p: &MlpParams<f64>, x: &[f64]) -> Vec<f64> {
        let (n_in, n_h, n_out) = (p.in_dim(), p.hidden(), p.out_dim());
        let mut h = vec![0.0; n_h];
        for j in 0..n_h {
            let mut s = p.b1()[j];
            for i in 0..n_in {
                s += p.w1()[j * n_in + i] * x[i];
            }
            h[j] = s.max(0.0);
        }
        let mut z = vec![0.0; n_out];
        for o in 0..n_out {
            let mut s = p.b2()[o];
            for j in 0..n_h {
                s += p.w2()[o * n_h + j] * h[j];
            }
            z[o] = s;
        }
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        z.iter().map(|v| v / norm).collect()
    }

    #[test]
    fn zero_params_are_degenerate() {
        let p = MlpParams::<f64>::zeros(4, 3, 2);
        let err = p.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap_err();
        assert!(matches!(err, NumericsError::DegenerateOutput { .. }));
    }

    #[test]
    fn identity_like_maps_basis_vector_to_itself() {
        let p = identity_like(5, 6, 3);
        let y = p.forward(&[1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(y, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let p = identity_like(5, 6, 3);
        assert!(matches!(
            p.forward(&[1.0, 0.0]),
            Err(NumericsError::DimensionMismatch { .. })
        ));
        assert!(p.gradient(&[0.0; 5], &[1.0]).is_err());
    }

    #[test]
    fn seeded_forward_matches_reference_and_is_reproducible() {
        let make = || MlpParams::<f64>::init_uniform(8, 16, 4, &mut ChaCha8Rng::seed_from_u64(42));
        let (a, b) = (make(), make());
        assert_eq!(a, b);
        let x = vec![1.0; 8];
        let y = a.forward(&x).unwrap();
        assert_eq!(y, b.forward(&x).unwrap());
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        for (u, v) in y.iter().zip(reference_forward(&a, &x)) {
            assert!((u - v).abs() < 1e-14, "{u} vs {v}");
        }
    }

    #[test]
    fn zero_loss_tail_gives_zero_gradient() {
        let p = MlpParams::<f64>::init_uniform(6, 8, 3, &mut ChaCha8Rng::seed_from_u64(1));
        let g = p.gradient(&[0.3; 6], &[0.0; 3]).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dead_relu_rows_get_no_gradient() {
        let mut p = MlpParams::<f64>::init_uniform(4, 5, 3, &mut ChaCha8Rng::seed_from_u64(3));
        {
            let (w1, b1, _, _) = p.parts_mut();
            // unit 2 is dead for every nonnegative input
            for i in 0..4 {
                w1[2 * 4 + i] = -1.0;
            }
            b1[2] = -0.5;
        }
        let batch = [[0.1, 0.5, 0.9, 0.2], [1.0, 1.0, 0.0, 0.3], [0.0, 0.2, 0.4, 0.8]];
        for x in &batch {
            let g = p.gradient(x, &[1.0, -2.0, 0.5]).unwrap();
            assert!(g.w1()[8..12].iter().all(|&v| v == 0.0));
            assert_eq!(g.b1()[2], 0.0);
        }
    }

    #[test]
    fn indicator_input_matches_dense() {
        let p = MlpParams::<f64>::init_uniform(12, 7, 3, &mut ChaCha8Rng::seed_from_u64(4));
        let active = [1usize, 4, 11];
        let mut dense = vec![0.0; 12];
        for &i in &active {
            dense[i] = 1.0;
        }
        let sparse = MlpInput::Indicator { dim: 12, active: &active };
        let a = p.forward(&dense).unwrap();
        let b = p.forward(sparse).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-15);
        }
        let tail = [0.3, -1.0, 0.7];
        let ga = p.gradient(&dense, &tail).unwrap();
        let gb = p.gradient(sparse, &tail).unwrap();
        for (u, v) in ga.as_slice().iter().zip(gb.as_slice()) {
            assert!((u - v).abs() < 1e-14);
        }
        let bad = MlpInput::Indicator { dim: 12, active: &[12] };
        assert!(p.forward(bad).is_err());
    }

    #[test]
    fn document_round_trip_is_bit_exact() {
        let p = MlpParams::<f64>::init_uniform(7, 5, 3, &mut ChaCha8Rng::seed_from_u64(9));
        let json = serde_json::to_string(&p.to_document()).unwrap();
        let back: ParamsDocument = serde_json::from_str(&json).unwrap();
        let q = MlpParams::<f64>::from_document(&back).unwrap();
        assert!(p.as_slice().iter().zip(q.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn document_rejects_wrong_scalar_and_length() {
        let p = MlpParams::<f32>::init_uniform(3, 2, 2, &mut ChaCha8Rng::seed_from_u64(9));
        let mut doc = p.to_document();
        assert!(MlpParams::<f64>::from_document(&doc).is_err());
        doc.b1.pop();
        assert!(MlpParams::<f32>::from_document(&doc).is_err());
    }
}
