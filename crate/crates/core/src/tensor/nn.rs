use super::{mismatch, Tensor, TensorError, Var};

const LAYER_NORM_EPS: f64 = 1e-5;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based keep decision for element `index` under `seed`.
pub fn dropout_keep(seed: u64, index: u64, p: f64) -> bool {
    let bits = splitmix64(splitmix64(seed) ^ index);
    let u = (bits >> 11) as f64 / (1u64 << 53) as f64;
    u >= p
}

impl<'t> Var<'t> {
    /// Cross-correlation of `[N,C,H,W]` with `[F,C,k,k]` plus a per-filter bias,
    /// stride 1, zero padding `pad` on every side.
    pub fn conv2d(self, weight: Var<'t>, bias: Var<'t>, pad: usize) -> Result<Var<'t>, TensorError> {
        let (x, w, b) = (self.value(), weight.value(), bias.value());
        let (sx, sw) = (x.shape().to_vec(), w.shape().to_vec());
        if sx.len() != 4 || sw.len() != 4 || sx[1] != sw[1] || sw[2] != sw[3] || b.shape() != [sw[0]] {
            return Err(mismatch("conv2d", &sx, &sw));
        }
        let (n, c, h, wd) = (sx[0], sx[1], sx[2], sx[3]);
        let (f, k) = (sw[0], sw[2]);
        if h + 2 * pad < k || wd + 2 * pad < k {
            return Err(mismatch("conv2d", &sx, &sw));
        }
        let (oh, ow) = (h + 2 * pad - k + 1, wd + 2 * pad - k + 1);
        // For each output coordinate, the valid kernel range along one axis.
        let span = move |o: usize, len: usize| {
            let lo = pad.saturating_sub(o);
            let hi = (len + pad - o).min(k);
            (lo, hi)
        };
        let mut out = vec![0.0; n * f * oh * ow];
        let (xd, wdat) = (x.data(), w.data());
        for ni in 0..n {
            for fi in 0..f {
                let plane = &mut out[(ni * f + fi) * oh * ow..][..oh * ow];
                plane.fill(b.data()[fi]);
                for ci in 0..c {
                    let xp = &xd[(ni * c + ci) * h * wd..][..h * wd];
                    let kp = &wdat[(fi * c + ci) * k * k..][..k * k];
                    for oy in 0..oh {
                        let (ky0, ky1) = span(oy, h);
                        for ox in 0..ow {
                            let (kx0, kx1) = span(ox, wd);
                            let mut acc = 0.0;
                            for ky in ky0..ky1 {
                                let row = (oy + ky - pad) * wd;
                                for kx in kx0..kx1 {
                                    acc += kp[ky * k + kx] * xp[row + ox + kx - pad];
                                }
                            }
                            plane[oy * ow + ox] += acc;
                        }
                    }
                }
            }
        }
        let out = Tensor::new(vec![n, f, oh, ow], out)?;
        let (ix, iw, ib) = (self.id, weight.id, bias.id);
        Ok(self.record(&[self, weight, bias], out, move |g, s| {
            let (xd, wdat) = (x.data(), w.data());
            if s.wants(ib) {
                let slot = s.slot(ib);
                for ni in 0..n {
                    for fi in 0..f {
                        slot[fi] += g[(ni * f + fi) * oh * ow..][..oh * ow].iter().sum::<f64>();
                    }
                }
            }
            let (want_x, want_w) = (s.wants(ix), s.wants(iw));
            let mut gx = if want_x { vec![0.0; xd.len()] } else { Vec::new() };
            let mut gw = if want_w { vec![0.0; wdat.len()] } else { Vec::new() };
            for ni in 0..n {
                for fi in 0..f {
                    let gp = &g[(ni * f + fi) * oh * ow..][..oh * ow];
                    for ci in 0..c {
                        let xoff = (ni * c + ci) * h * wd;
                        let koff = (fi * c + ci) * k * k;
                        for oy in 0..oh {
                            let (ky0, ky1) = span(oy, h);
                            for ox in 0..ow {
                                let gv = gp[oy * ow + ox];
                                if gv == 0.0 {
                                    continue;
                                }
                                let (kx0, kx1) = span(ox, wd);
                                for ky in ky0..ky1 {
                                    let row = xoff + (oy + ky - pad) * wd;
                                    for kx in kx0..kx1 {
                                        let xi = row + ox + kx - pad;
                                        if want_w {
                                            gw[koff + ky * k + kx] += gv * xd[xi];
                                        }
                                        if want_x {
                                            gx[xi] += gv * wdat[koff + ky * k + kx];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            if want_x {
                s.add(ix, &gx);
            }
            if want_w {
                s.add(iw, &gw);
            }
        }))
    }

    /// Non-overlapping `k x k` max pooling of `[N,C,H,W]`. Ties send the
    /// gradient to the first maximum in row-major order.
    pub fn maxpool2d(self, k: usize) -> Result<Var<'t>, TensorError> {
        let x = self.value();
        let sx = x.shape().to_vec();
        if sx.len() != 4 {
            return Err(mismatch("maxpool2d", &sx, &[0, 0, 0, 0]));
        }
        if k == 0 || sx[2] % k != 0 || sx[3] % k != 0 {
            return Err(TensorError::IndivisibleShape {
                op: "maxpool2d",
                shape: sx,
                by: k,
            });
        }
        let (planes, h, w) = (sx[0] * sx[1], sx[2], sx[3]);
        let (oh, ow) = (h / k, w / k);
        let mut out = Vec::with_capacity(planes * oh * ow);
        let mut argmax = Vec::with_capacity(planes * oh * ow);
        for p in 0..planes {
            let base = p * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + oy * k * w + ox * k;
                    for dy in 0..k {
                        for dx in 0..k {
                            let i = base + (oy * k + dy) * w + ox * k + dx;
                            if x.data()[i] > x.data()[best] {
                                best = i;
                            }
                        }
                    }
                    out.push(x.data()[best]);
                    argmax.push(best);
                }
            }
        }
        let out = Tensor::new(vec![sx[0], sx[1], oh, ow], out)?;
        let ix = self.id;
        Ok(self.record(&[self], out, move |g, s| {
            if s.wants(ix) {
                let slot = s.slot(ix);
                for (&i, v) in argmax.iter().zip(g) {
                    slot[i] += v;
                }
            }
        }))
    }

    /// Softmax over the last axis. Entries of `-inf` get exactly zero weight;
    /// every row needs at least one finite entry.
    pub fn softmax(self) -> Var<'t> {
        let x = self.value();
        let n = *x.shape().last().expect("non-empty shape");
        let mut y = Vec::with_capacity(x.numel());
        for row in x.data().chunks(n) {
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
            let z: f64 = e.iter().sum();
            y.extend(e.into_iter().map(|v| v / z));
        }
        let out = Tensor::new(x.shape().to_vec(), y.clone()).expect("same shape");
        let ix = self.id;
        self.record(&[self], out, move |g, s| {
            if s.wants(ix) {
                let slot = s.slot(ix);
                for ((gr, yr), dr) in g.chunks(n).zip(y.chunks(n)).zip(slot.chunks_mut(n)) {
                    let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                    for ((d, gv), yv) in dr.iter_mut().zip(gr).zip(yr) {
                        *d += yv * (gv - dot);
                    }
                }
            }
        })
    }

    /// Normalizes each row of the last axis (epsilon 1e-5), then applies `gamma * x + beta`.
    pub fn layer_norm(self, gamma: Var<'t>, beta: Var<'t>) -> Result<Var<'t>, TensorError> {
        let (x, ga, be) = (self.value(), gamma.value(), beta.value());
        let n = *x.shape().last().expect("non-empty shape");
        if ga.shape() != [n] || be.shape() != [n] {
            return Err(mismatch("layer_norm", x.shape(), ga.shape()));
        }
        let rows = x.numel() / n;
        let mut xhat = Vec::with_capacity(x.numel());
        let mut inv_std = Vec::with_capacity(rows);
        for row in x.data().chunks(n) {
            let mu = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std.push(is);
            xhat.extend(row.iter().map(|v| (v - mu) * is));
        }
        let y = xhat
            .chunks(n)
            .flat_map(|r| r.iter().zip(ga.data()).zip(be.data()).map(|((h, g), b)| h * g + b))
            .collect();
        let out = Tensor::new(x.shape().to_vec(), y)?;
        let (ix, ig, ib) = (self.id, gamma.id, beta.id);
        Ok(self.record(&[self, gamma, beta], out, move |g, s| {
            if s.wants(ig) {
                let slot = s.slot(ig);
                for (gr, hr) in g.chunks(n).zip(xhat.chunks(n)) {
                    for ((d, gv), hv) in slot.iter_mut().zip(gr).zip(hr) {
                        *d += gv * hv;
                    }
                }
            }
            if s.wants(ib) {
                let slot = s.slot(ib);
                for gr in g.chunks(n) {
                    for (d, gv) in slot.iter_mut().zip(gr) {
                        *d += gv;
                    }
                }
            }
            if s.wants(ix) {
                let slot = s.slot(ix);
                for r in 0..rows {
                    let gr = &g[r * n..(r + 1) * n];
                    let hr = &xhat[r * n..(r + 1) * n];
                    let dh: Vec<f64> = gr.iter().zip(ga.data()).map(|(a, b)| a * b).collect();
                    let mean_dh = dh.iter().sum::<f64>() / n as f64;
                    let mean_dhh = dh.iter().zip(hr).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                    for j in 0..n {
                        slot[r * n + j] += inv_std[r] * (dh[j] - mean_dh - hr[j] * mean_dhh);
                    }
                }
            }
        }))
    }

    /// Inverted dropout with a counter-based mask; identity when not training or `p == 0`.
    pub fn dropout(self, p: f64, training: bool, seed: u64) -> Result<Var<'t>, TensorError> {
        if !(0.0..1.0).contains(&p) {
            return Err(TensorError::InvalidProbability(p));
        }
        if !training || p == 0.0 {
            return Ok(self);
        }
        let x = self.value();
        let keep_scale = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..x.numel() as u64)
            .map(|i| if dropout_keep(seed, i, p) { keep_scale } else { 0.0 })
            .collect();
        let y = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let out = Tensor::new(x.shape().to_vec(), y)?;
        let ix = self.id;
        Ok(self.record(&[self], out, move |g, s| {
            let d: Vec<f64> = g.iter().zip(&mask).map(|(a, b)| a * b).collect();
            s.add(ix, &d);
        }))
    }
}
