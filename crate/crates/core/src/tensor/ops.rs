use std::sync::Arc;

use super::tape::GradSink;
use super::{mismatch, Tensor, TensorError, Var};

/// `out[m,n] += a[m,k] * b[k,n]`
fn gemm_nn(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += av * bv;
            }
        }
    }
}

/// `out[m,k] += g[m,n] * b[k,n]^T`
fn gemm_nt(g: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let gr = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let br = &b[p * n..(p + 1) * n];
            out[i * k + p] += gr.iter().zip(br).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

/// `out[k,n] += a[m,k]^T * g[m,n]`
fn gemm_tn(a: &[f64], g: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let gr = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            for (o, &gv) in out[p * n..(p + 1) * n].iter_mut().zip(gr) {
                *o += av * gv;
            }
        }
    }
}

impl<'t> Var<'t> {
    pub(crate) fn record(
        &self,
        parents: &[Var<'t>],
        out: Tensor,
        rule: impl Fn(&[f64], &mut GradSink) + 'static,
    ) -> Var<'t> {
        for p in parents {
            assert!(std::ptr::eq(p.tape, self.tape), "operands belong to different tapes");
        }
        let req = parents.iter().any(Var::requires_grad);
        self.tape.push(out, req, Some(Box::new(rule)))
    }

    fn same_shape(&self, other: &Var<'t>, op: &'static str) -> Result<(), TensorError> {
        let (a, b) = (self.shape(), other.shape());
        if a != b {
            return Err(mismatch(op, &a, &b));
        }
        Ok(())
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        self.same_shape(&other, "add")?;
        let (a, b) = (self.value(), other.value());
        let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
        let out = Tensor::new(a.shape().to_vec(), data)?;
        let (ia, ib) = (self.id, other.id);
        Ok(self.record(&[self, other], out, move |g, s| {
            s.add(ia, g);
            s.add(ib, g);
        }))
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        self.same_shape(&other, "sub")?;
        let (a, b) = (self.value(), other.value());
        let data = a.data().iter().zip(b.data()).map(|(x, y)| x - y).collect();
        let out = Tensor::new(a.shape().to_vec(), data)?;
        let (ia, ib) = (self.id, other.id);
        Ok(self.record(&[self, other], out, move |g, s| {
            s.add(ia, g);
            if s.wants(ib) {
                let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                s.add(ib, &neg);
            }
        }))
    }

    /// Elementwise product.
    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        self.same_shape(&other, "mul")?;
        let (a, b) = (self.value(), other.value());
        let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::new(a.shape().to_vec(), data)?;
        let (ia, ib) = (self.id, other.id);
        Ok(self.record(&[self, other], out, move |g, s| {
            if s.wants(ia) {
                let d: Vec<f64> = g.iter().zip(b.data()).map(|(g, b)| g * b).collect();
                s.add(ia, &d);
            }
            if s.wants(ib) {
                let d: Vec<f64> = g.iter().zip(a.data()).map(|(g, a)| g * a).collect();
                s.add(ib, &d);
            }
        }))
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        let a = self.value();
        let out = Tensor::new(a.shape().to_vec(), a.data().iter().map(|v| v * c).collect())
            .expect("same shape");
        let ia = self.id;
        self.record(&[self], out, move |g, s| {
            let d: Vec<f64> = g.iter().map(|v| v * c).collect();
            s.add(ia, &d);
        })
    }

    /// Adds a vector along the last axis of `self`.
    pub fn add_bias(self, bias: Var<'t>) -> Result<Var<'t>, TensorError> {
        let (x, b) = (self.value(), bias.value());
        let n = *x.shape().last().expect("non-empty shape");
        if b.shape() != [n] {
            return Err(mismatch("add_bias", x.shape(), b.shape()));
        }
        let data = x
            .data()
            .chunks(n)
            .flat_map(|row| row.iter().zip(b.data()).map(|(v, w)| v + w))
            .collect();
        let out = Tensor::new(x.shape().to_vec(), data)?;
        let (ix, ib) = (self.id, bias.id);
        Ok(self.record(&[self, bias], out, move |g, s| {
            s.add(ix, g);
            if s.wants(ib) {
                let slot = s.slot(ib);
                for row in g.chunks(n) {
                    for (o, v) in slot.iter_mut().zip(row) {
                        *o += v;
                    }
                }
            }
        }))
    }

    /// `[m,k] x [k,n] -> [m,n]`
    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        let (a, b) = (self.value(), other.value());
        let (sa, sb) = (a.shape(), b.shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(mismatch("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut data = vec![0.0; m * n];
        gemm_nn(a.data(), b.data(), &mut data, m, k, n);
        let out = Tensor::new(vec![m, n], data)?;
        let (ia, ib) = (self.id, other.id);
        Ok(self.record(&[self, other], out, move |g, s| {
            if s.wants(ia) {
                gemm_nt(g, b.data(), s.slot(ia), m, k, n);
            }
            if s.wants(ib) {
                gemm_tn(a.data(), g, s.slot(ib), m, k, n);
            }
        }))
    }

    /// Batched matmul `[B,m,k] x [B,k,n] -> [B,m,n]`.
    pub fn bmm(self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        let (a, b) = (self.value(), other.value());
        let (sa, sb) = (a.shape(), b.shape());
        if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] || sa[2] != sb[1] {
            return Err(mismatch("bmm", sa, sb));
        }
        let (batch, m, k, n) = (sa[0], sa[1], sa[2], sb[2]);
        let mut data = vec![0.0; batch * m * n];
        for bi in 0..batch {
            gemm_nn(
                &a.data()[bi * m * k..(bi + 1) * m * k],
                &b.data()[bi * k * n..(bi + 1) * k * n],
                &mut data[bi * m * n..(bi + 1) * m * n],
                m,
                k,
                n,
            );
        }
        let out = Tensor::new(vec![batch, m, n], data)?;
        let (ia, ib) = (self.id, other.id);
        Ok(self.record(&[self, other], out, move |g, s| {
            for bi in 0..batch {
                let gb = &g[bi * m * n..(bi + 1) * m * n];
                if s.wants(ia) {
                    let slot = &mut s.slot(ia)[bi * m * k..(bi + 1) * m * k];
                    gemm_nt(gb, &b.data()[bi * k * n..(bi + 1) * k * n], slot, m, k, n);
                }
                if s.wants(ib) {
                    let slot = &mut s.slot(ib)[bi * k * n..(bi + 1) * k * n];
                    gemm_tn(&a.data()[bi * m * k..(bi + 1) * m * k], gb, slot, m, k, n);
                }
            }
        }))
    }

    pub fn relu(self) -> Var<'t> {
        let a = self.value();
        let out = Tensor::new(a.shape().to_vec(), a.data().iter().map(|v| v.max(0.0)).collect())
            .expect("same shape");
        let ia = self.id;
        self.record(&[self], out, move |g, s| {
            let d: Vec<f64> = g
                .iter()
                .zip(a.data())
                .map(|(g, x)| if *x > 0.0 { *g } else { 0.0 })
                .collect();
            s.add(ia, &d);
        })
    }

    /// GELU, tanh approximation.
    pub fn gelu(self) -> Var<'t> {
        const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
        const A: f64 = 0.044_715;
        let a = self.value();
        let out = Tensor::new(
            a.shape().to_vec(),
            a.data()
                .iter()
                .map(|&x| 0.5 * x * (1.0 + (C * (x + A * x * x * x)).tanh()))
                .collect(),
        )
        .expect("same shape");
        let ia = self.id;
        self.record(&[self], out, move |g, s| {
            let d: Vec<f64> = g
                .iter()
                .zip(a.data())
                .map(|(g, &x)| {
                    let t = (C * (x + A * x * x * x)).tanh();
                    let dt = (1.0 - t * t) * C * (1.0 + 3.0 * A * x * x);
                    g * (0.5 * (1.0 + t) + 0.5 * x * dt)
                })
                .collect();
            s.add(ia, &d);
        })
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t>, TensorError> {
        let a = self.value();
        let out = (*a).clone().reshaped(shape)?;
        let ia = self.id;
        Ok(self.record(&[self], out, move |g, s| s.add(ia, g)))
    }

    /// `out[i] = self[indices[i]]`, reshaped to `shape`. Repeated indices
    /// accumulate in the backward pass.
    pub fn gather(self, indices: Arc<[usize]>, shape: &[usize]) -> Result<Var<'t>, TensorError> {
        let a = self.value();
        if shape.iter().product::<usize>() != indices.len() {
            return Err(TensorError::InvalidShape {
                shape: shape.to_vec(),
                len: indices.len(),
            });
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= a.numel()) {
            return Err(TensorError::IndexOutOfBounds { index: bad, len: a.numel() });
        }
        let data = indices.iter().map(|&i| a.data()[i]).collect();
        let out = Tensor::new(shape.to_vec(), data)?;
        let ia = self.id;
        Ok(self.record(&[self], out, move |g, s| {
            if s.wants(ia) {
                let slot = s.slot(ia);
                for (&i, v) in indices.iter().zip(g) {
                    slot[i] += v;
                }
            }
        }))
    }

    /// Swaps the two axes of a matrix.
    pub fn transpose(self) -> Result<Var<'t>, TensorError> {
        let shape = self.shape();
        if shape.len() != 2 {
            return Err(mismatch("transpose", &shape, &[0, 0]));
        }
        let (r, c) = (shape[0], shape[1]);
        let idx: Arc<[usize]> = (0..c).flat_map(|j| (0..r).map(move |i| i * c + j)).collect();
        self.gather(idx, &[c, r])
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(parts: &[Var<'t>], axis: usize) -> Result<Var<'t>, TensorError> {
        let first = parts.first().expect("concat of nothing").shape();
        if axis >= first.len() {
            return Err(mismatch("concat", &first, &[axis]));
        }
        let outer: usize = first[..axis].iter().product();
        let inner: usize = first[axis + 1..].iter().product();
        let mut extents = Vec::with_capacity(parts.len());
        for p in parts {
            let s = p.shape();
            if s.len() != first.len() || s[..axis] != first[..axis] || s[axis + 1..] != first[axis + 1..] {
                return Err(mismatch("concat", &first, &s));
            }
            extents.push(s[axis]);
        }
        let total: usize = extents.iter().sum();
        let values: Vec<_> = parts.iter().map(Var::value).collect();
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (v, &e) in values.iter().zip(&extents) {
                data.extend_from_slice(&v.data()[o * e * inner..(o + 1) * e * inner]);
            }
        }
        let mut shape = first.clone();
        shape[axis] = total;
        let out = Tensor::new(shape, data)?;
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        Ok(parts[0].record(parts, out, move |g, s| {
            let mut offset = 0;
            for (&id, &e) in ids.iter().zip(&extents) {
                if s.wants(id) {
                    let slot = s.slot(id);
                    for o in 0..outer {
                        let src = &g[o * total * inner + offset * inner..][..e * inner];
                        for (d, v) in slot[o * e * inner..(o + 1) * e * inner].iter_mut().zip(src) {
                            *d += v;
                        }
                    }
                }
                offset += e;
            }
        }))
    }

    pub fn sum(self) -> Var<'t> {
        let a = self.value();
        let n = a.numel();
        let ia = self.id;
        self.record(&[self], Tensor::scalar(a.data().iter().sum()), move |g, s| {
            s.add(ia, &vec![g[0]; n]);
        })
    }

    pub fn mean(self) -> Var<'t> {
        let n = self.value().numel();
        self.sum().scale(1.0 / n as f64)
    }

    /// Mean over the first axis of a matrix: `[r, c] -> [c]`.
    pub fn mean_rows(self) -> Result<Var<'t>, TensorError> {
        let a = self.value();
        let shape = a.shape();
        if shape.len() != 2 {
            return Err(mismatch("mean_rows", shape, &[0, 0]));
        }
        let (r, c) = (shape[0], shape[1]);
        let mut data = vec![0.0; c];
        for row in a.data().chunks(c) {
            for (d, v) in data.iter_mut().zip(row) {
                *d += v / r as f64;
            }
        }
        let ia = self.id;
        Ok(self.record(&[self], Tensor::new(vec![c], data)?, move |g, s| {
            if s.wants(ia) {
                let slot = s.slot(ia);
                for row in slot.chunks_mut(c) {
                    for (d, v) in row.iter_mut().zip(g) {
                        *d += v / r as f64;
                    }
                }
            }
        }))
    }
}
