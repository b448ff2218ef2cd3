//! Building blocks: valid 2-D convolution, spatial and channel max-pooling,
//! fully connected layers and center cropping. Feature maps carry a batch
//! axis so a whole mini-batch runs through one matrix product per layer.

use super::real::{gemm, Layout, Real};
use crate::error::{Error, Result};

/// A batch of feature maps, layout `[n][h][w][c]` (channels fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T> {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<T>,
}

impl<T: Real> FeatureMap<T> {
    /// A single zero map.
    pub fn zeros(h: usize, w: usize, c: usize) -> Self {
        Self::batch_zeros(1, h, w, c)
    }

    pub fn batch_zeros(n: usize, h: usize, w: usize, c: usize) -> Self {
        Self {
            n,
            h,
            w,
            c,
            data: vec![T::ZERO; n * h * w * c],
        }
    }

    /// A single map from `h·w·c` values.
    pub fn from_data(h: usize, w: usize, c: usize, data: Vec<T>) -> Result<Self> {
        Self::from_batch_data(1, h, w, c, data)
    }

    pub fn from_batch_data(n: usize, h: usize, w: usize, c: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * h * w * c {
            return Err(Error::Config(format!(
                "feature map {n}x{h}x{w}x{c} needs {} values, got {}",
                n * h * w * c,
                data.len()
            )));
        }
        Ok(Self { n, h, w, c, data })
    }

    /// Concatenates batches of equal per-sample shape along the batch axis.
    pub fn stack<'a, I>(maps: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a FeatureMap<T>>,
        T: 'a,
    {
        let mut iter = maps.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::Config("cannot stack an empty list".into()))?;
        let mut out = first.clone();
        for m in iter {
            if m.shape() != first.shape() {
                return Err(Error::Config(format!(
                    "cannot stack {:?} with {:?}",
                    m.shape(),
                    first.shape()
                )));
            }
            out.n += m.n;
            out.data.extend_from_slice(&m.data);
        }
        Ok(out)
    }

    /// Per-sample shape `(h, w, c)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.h, self.w, self.c)
    }

    pub fn sample_len(&self) -> usize {
        self.h * self.w * self.c
    }

    pub fn sample(&self, s: usize) -> &[T] {
        let l = self.sample_len();
        &self.data[s * l..(s + 1) * l]
    }

    #[inline]
    pub fn at_in(&self, s: usize, y: usize, x: usize) -> &[T] {
        let o = ((s * self.h + y) * self.w + x) * self.c;
        &self.data[o..o + self.c]
    }

    #[inline]
    pub fn at_in_mut(&mut self, s: usize, y: usize, x: usize) -> &mut [T] {
        let o = ((s * self.h + y) * self.w + x) * self.c;
        &mut self.data[o..o + self.c]
    }

    /// Cell of the first map in the batch.
    #[inline]
    pub fn at(&self, y: usize, x: usize) -> &[T] {
        self.at_in(0, y, x)
    }

    #[inline]
    pub fn at_mut(&mut self, y: usize, x: usize) -> &mut [T] {
        self.at_in_mut(0, y, x)
    }
}

/// Convolution weights `[out][ky][kx][in]` and biases `[out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub kernel: usize,
    pub stride: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Conv2d<T> {
    pub fn zeros(kernel: usize, stride: usize, in_channels: usize, out_channels: usize) -> Self {
        Self {
            kernel,
            stride,
            in_channels,
            out_channels,
            weight: vec![T::ZERO; out_channels * kernel * kernel * in_channels],
            bias: vec![T::ZERO; out_channels],
        }
    }

    /// Valid-padding output size along one axis.
    pub fn output_size(&self, input: usize) -> Result<usize> {
        if input < self.kernel || self.stride == 0 || self.kernel == 0 {
            return Err(Error::Config(format!(
                "kernel {} with stride {} does not fit input {input}",
                self.kernel, self.stride
            )));
        }
        Ok((input - self.kernel) / self.stride + 1)
    }

    fn check_input(&self, input: &FeatureMap<T>) -> Result<(usize, usize)> {
        if input.c != self.in_channels {
            return Err(Error::Config(format!(
                "convolution expects {} channels, got {}",
                self.in_channels, input.c
            )));
        }
        Ok((self.output_size(input.h)?, self.output_size(input.w)?))
    }

    fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1
    }

    /// Gathers every receptive field into an `(n·oh·ow) × (k·k·cin)` matrix.
    /// Returns `None` for 1×1 stride-1 kernels, where the input already has
    /// that layout.
    fn im2col(&self, input: &FeatureMap<T>, oh: usize, ow: usize) -> Option<Vec<T>> {
        if self.is_pointwise() {
            return None;
        }
        let k = self.kernel;
        let mut cols = Vec::with_capacity(input.n * oh * ow * k * k * self.in_channels);
        for s in 0..input.n {
            for oy in 0..oh {
                for ox in 0..ow {
                    for ky in 0..k {
                        for kx in 0..k {
                            cols.extend_from_slice(input.at_in(
                                s,
                                oy * self.stride + ky,
                                ox * self.stride + kx,
                            ));
                        }
                    }
                }
            }
        }
        Some(cols)
    }

    /// Pre-activation output.
    pub fn forward(&self, input: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        let (oh, ow) = self.check_input(input)?;
        let rows = input.n * oh * ow;
        let kk = self.kernel * self.kernel * self.in_channels;
        let cout = self.out_channels;
        let mut out = FeatureMap::batch_zeros(input.n, oh, ow, cout);
        for cell in out.data.chunks_exact_mut(cout) {
            cell.copy_from_slice(&self.bias);
        }
        let cols = self.im2col(input, oh, ow);
        let a = cols.as_deref().unwrap_or(&input.data);
        // out[R × cout] += cols[R × K] · Wᵀ
        gemm(
            a,
            Layout::row_major(rows, kk),
            &self.weight,
            Layout::row_major(cout, kk).transposed(),
            T::ONE,
            &mut out.data,
            Layout::row_major(rows, cout),
        );
        Ok(out)
    }

    /// Accumulates parameter gradients (summed over the batch) into `grad`
    /// and returns the gradient with respect to `input` when requested.
    pub fn backward(
        &self,
        input: &FeatureMap<T>,
        grad_out: &FeatureMap<T>,
        grad: &mut Conv2d<T>,
        want_input_grad: bool,
    ) -> Result<Option<FeatureMap<T>>> {
        let (oh, ow) = self.check_input(input)?;
        if grad_out.shape() != (oh, ow, self.out_channels) || grad_out.n != input.n {
            return Err(Error::Config("convolution gradient shape mismatch".into()));
        }
        let (k, cin, cout) = (self.kernel, self.in_channels, self.out_channels);
        let rows = input.n * oh * ow;
        let kk = k * k * cin;
        for cell in grad_out.data.chunks_exact(cout) {
            for (b, g) in grad.bias.iter_mut().zip(cell) {
                *b += *g;
            }
        }
        let cols = self.im2col(input, oh, ow);
        let a = cols.as_deref().unwrap_or(&input.data);
        // dW[cout × K] += Gᵀ[cout × R] · cols[R × K]
        gemm(
            &grad_out.data,
            Layout::row_major(rows, cout).transposed(),
            a,
            Layout::row_major(rows, kk),
            T::ONE,
            &mut grad.weight,
            Layout::row_major(cout, kk),
        );
        if !want_input_grad {
            return Ok(None);
        }
        // dcols[R × K] = G[R × cout] · W[cout × K], then scatter back
        let mut dcols = vec![T::ZERO; rows * kk];
        gemm(
            &grad_out.data,
            Layout::row_major(rows, cout),
            &self.weight,
            Layout::row_major(cout, kk),
            T::ZERO,
            &mut dcols,
            Layout::row_major(rows, kk),
        );
        if self.is_pointwise() {
            return Ok(Some(FeatureMap::from_batch_data(
                input.n, input.h, input.w, cin, dcols,
            )?));
        }
        let mut grad_in = FeatureMap::batch_zeros(input.n, input.h, input.w, cin);
        let mut taps = dcols.chunks_exact(cin);
        for s in 0..input.n {
            for oy in 0..oh {
                for ox in 0..ow {
                    for ky in 0..k {
                        for kx in 0..k {
                            let src = taps.next().expect("one row per tap");
                            let dst = grad_in.at_in_mut(
                                s,
                                oy * self.stride + ky,
                                ox * self.stride + kx,
                            );
                            for (d, v) in dst.iter_mut().zip(src) {
                                *d += *v;
                            }
                        }
                    }
                }
            }
        }
        Ok(Some(grad_in))
    }
}

/// Spatial max-pool result with the flat input index of every maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooled<T> {
    pub output: FeatureMap<T>,
    pub argmax: Vec<usize>,
}

/// Per-channel spatial max-pool; the first maximum in scan order wins ties.
pub fn maxpool_forward<T: Real>(
    input: &FeatureMap<T>,
    kernel: usize,
    stride: usize,
) -> Result<Pooled<T>> {
    if input.h < kernel || input.w < kernel || stride == 0 || kernel == 0 {
        return Err(Error::Config(format!(
            "pool kernel {kernel} does not fit {}x{}",
            input.h, input.w
        )));
    }
    let oh = (input.h - kernel) / stride + 1;
    let ow = (input.w - kernel) / stride + 1;
    let c = input.c;
    let mut output = FeatureMap::batch_zeros(input.n, oh, ow, c);
    let mut argmax = vec![0; output.data.len()];
    let flat = |s: usize, y: usize, x: usize| ((s * input.h + y) * input.w + x) * c;
    for s in 0..input.n {
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let mut best_idx = flat(s, oy * stride, ox * stride) + ch;
                    let mut best = input.data[best_idx];
                    for ky in 0..kernel {
                        for kx in 0..kernel {
                            let idx = flat(s, oy * stride + ky, ox * stride + kx) + ch;
                            if input.data[idx] > best {
                                best = input.data[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    let o = ((s * oh + oy) * ow + ox) * c + ch;
                    output.data[o] = best;
                    argmax[o] = best_idx;
                }
            }
        }
    }
    Ok(Pooled { output, argmax })
}

/// Routes each output gradient to the input element that won the max.
pub fn maxpool_backward<T: Real>(input_len: usize, argmax: &[usize], grad_out: &[T]) -> Vec<T> {
    let mut g = vec![T::ZERO; input_len];
    for (&idx, &go) in argmax.iter().zip(grad_out) {
        g[idx] += go;
    }
    g
}

/// Max over consecutive channel windows of one vector; trailing channels
/// that do not fill one of the `outputs` windows are ignored.
pub fn channel_pool_forward<T: Real>(
    input: &[T],
    window: usize,
    stride: usize,
    outputs: usize,
) -> Result<(Vec<T>, Vec<usize>)> {
    if window == 0 || stride == 0 || outputs == 0 || (outputs - 1) * stride + window > input.len() {
        return Err(Error::Config(format!(
            "channel pool of {outputs} windows (size {window}, stride {stride}) exceeds {} channels",
            input.len()
        )));
    }
    let mut out = Vec::with_capacity(outputs);
    let mut arg = Vec::with_capacity(outputs);
    for j in 0..outputs {
        let start = j * stride;
        let mut best = start;
        for i in start + 1..start + window {
            if input[i] > input[best] {
                best = i;
            }
        }
        out.push(input[best]);
        arg.push(best);
    }
    Ok((out, arg))
}

/// Dense layer `y = W x + b` with `W` stored row-major `[out][in]`.
/// Inputs may hold several rows (one per sample).
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Linear<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weight: vec![T::ZERO; inputs * outputs],
            bias: vec![T::ZERO; outputs],
        }
    }

    /// `x` is `[n × inputs]`; returns `[n × outputs]`.
    pub fn forward(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len() % self.inputs, 0, "input is not a whole number of rows");
        let n = x.len() / self.inputs;
        let mut y: Vec<T> = (0..n).flat_map(|_| self.bias.iter().copied()).collect();
        gemm(
            x,
            Layout::row_major(n, self.inputs),
            &self.weight,
            Layout::row_major(self.outputs, self.inputs).transposed(),
            T::ONE,
            &mut y,
            Layout::row_major(n, self.outputs),
        );
        y
    }

    /// Accumulates parameter gradients (summed over rows) and returns `∂/∂x`.
    pub fn backward(&self, x: &[T], grad_out: &[T], grad: &mut Linear<T>) -> Vec<T> {
        let n = x.len() / self.inputs;
        assert_eq!(grad_out.len(), n * self.outputs, "gradient row count mismatch");
        for row in grad_out.chunks_exact(self.outputs) {
            for (b, g) in grad.bias.iter_mut().zip(row) {
                *b += *g;
            }
        }
        gemm(
            grad_out,
            Layout::row_major(n, self.outputs).transposed(),
            x,
            Layout::row_major(n, self.inputs),
            T::ONE,
            &mut grad.weight,
            Layout::row_major(self.outputs, self.inputs),
        );
        let mut gx = vec![T::ZERO; n * self.inputs];
        gemm(
            grad_out,
            Layout::row_major(n, self.outputs),
            &self.weight,
            Layout::row_major(self.outputs, self.inputs),
            T::ZERO,
            &mut gx,
            Layout::row_major(n, self.inputs),
        );
        gx
    }
}

/// Applies tanh in place.
pub fn tanh_inplace<T: Real>(v: &mut [T]) {
    T::tanh_slice(v);
}

/// Multiplies an upstream gradient by `1 − a²` where `a = tanh(pre)`.
pub fn tanh_backward<T: Real>(activation: &[T], grad: &mut [T]) {
    for (g, a) in grad.iter_mut().zip(activation) {
        *g *= T::ONE - *a * *a;
    }
}

/// Center crop of every map to `size × size` (offset rounds down).
pub fn center_crop<T: Real>(input: &FeatureMap<T>, size: usize) -> FeatureMap<T> {
    if input.h == size && input.w == size {
        return input.clone();
    }
    let (oy, ox) = ((input.h - size) / 2, (input.w - size) / 2);
    let mut out = FeatureMap::batch_zeros(input.n, size, size, input.c);
    for s in 0..input.n {
        for y in 0..size {
            for x in 0..size {
                out.at_in_mut(s, y, x).copy_from_slice(input.at_in(s, y + oy, x + ox));
            }
        }
    }
    out
}

/// Adds a cropped gradient back into the full-size accumulator.
pub fn center_crop_backward<T: Real>(grad_crop: &FeatureMap<T>, full: &mut FeatureMap<T>) {
    let (oy, ox) = ((full.h - grad_crop.h) / 2, (full.w - grad_crop.w) / 2);
    for s in 0..grad_crop.n {
        for y in 0..grad_crop.h {
            for x in 0..grad_crop.w {
                let src = grad_crop.at_in(s, y, x);
                for (a, b) in full.at_in_mut(s, y + oy, x + ox).iter_mut().zip(src) {
                    *a += *b;
                }
            }
        }
    }
}

/// Concatenates maps of equal batch and spatial size along channels.
pub fn concat_channels<T: Real>(parts: &[&FeatureMap<T>]) -> FeatureMap<T> {
    let (n, h, w) = (parts[0].n, parts[0].h, parts[0].w);
    let c: usize = parts.iter().map(|p| p.c).sum();
    let mut data = Vec::with_capacity(n * h * w * c);
    for cell in 0..n * h * w {
        for p in parts {
            data.extend_from_slice(&p.data[cell * p.c..(cell + 1) * p.c]);
        }
    }
    FeatureMap { n, h, w, c, data }
}

/// Splits a channel-concatenated gradient into per-part maps.
pub fn split_channels<T: Real>(grad: &FeatureMap<T>, widths: &[usize]) -> Vec<FeatureMap<T>> {
    let cells = grad.n * grad.h * grad.w;
    let mut parts: Vec<FeatureMap<T>> = widths
        .iter()
        .map(|&c| FeatureMap {
            n: grad.n,
            h: grad.h,
            w: grad.w,
            c,
            data: Vec::with_capacity(cells * c),
        })
        .collect();
    for cell in grad.data.chunks_exact(grad.c) {
        let mut off = 0;
        for p in parts.iter_mut() {
            p.data.extend_from_slice(&cell[off..off + p.c]);
            off += p.c;
        }
    }
    parts
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::loss::finite_difference;

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn random_map(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> FeatureMap<f64> {
        FeatureMap::from_data(h, w, c, (0..h * w * c).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn identity_one_by_one_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let input = random_map(&mut rng, 4, 5, 3);
        let mut conv = Conv2d::zeros(1, 1, 3, 3);
        for k in 0..3 {
            conv.weight[k * 3 + k] = 1.0;
        }
        assert_eq!(conv.forward(&input).unwrap(), input);
    }

    #[test]
    fn valid_output_sizes() {
        let conv = Conv2d::<f64>::zeros(3, 1, 2, 4);
        let out = conv.forward(&FeatureMap::zeros(7, 7, 2)).unwrap();
        assert_eq!(out.shape(), (5, 5, 4));
        let strided = Conv2d::<f64>::zeros(3, 2, 2, 4);
        assert_eq!(strided.output_size(7).unwrap(), 3);
        assert!(conv.forward(&FeatureMap::zeros(2, 2, 2)).is_err());
        assert!(conv.forward(&FeatureMap::zeros(7, 7, 3)).is_err());
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let input = random_map(&mut rng, 5, 5, 3);
        for stride in [1, 2] {
            let mut conv = Conv2d::zeros(2, stride, 3, 4);
            conv.weight.iter_mut().for_each(|w| *w = rng.random_range(-0.5..0.5));
            conv.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
            let out = conv.forward(&input).unwrap();
            let upstream = random_map(&mut rng, out.h, out.w, out.c);
            let objective = |c: &Conv2d<f64>, x: &FeatureMap<f64>| -> f64 {
                dot(&c.forward(x).unwrap().data, &upstream.data)
            };
            let mut grad = Conv2d::zeros(2, stride, 3, 4);
            let gin = conv.backward(&input, &upstream, &mut grad, true).unwrap().unwrap();

            let fd_w = finite_difference(
                |w| {
                    let mut c = conv.clone();
                    c.weight.copy_from_slice(w);
                    objective(&c, &input)
                },
                &conv.weight,
                1e-6,
            );
            let fd_b = finite_difference(
                |b| {
                    let mut c = conv.clone();
                    c.bias.copy_from_slice(b);
                    objective(&c, &input)
                },
                &conv.bias,
                1e-6,
            );
            let fd_x = finite_difference(
                |x| objective(&conv, &FeatureMap::from_data(5, 5, 3, x.to_vec()).unwrap()),
                &input.data,
                1e-6,
            );
            for (a, b) in grad
                .weight
                .iter()
                .chain(&grad.bias)
                .chain(&gin.data)
                .zip(fd_w.iter().chain(&fd_b).chain(&fd_x))
            {
                let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-3);
                assert!(rel < 1e-6, "analytic {a} vs numeric {b}");
            }
        }
    }

    #[test]
    fn batched_conv_matches_per_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_map(&mut rng, 4, 4, 3);
        let b = random_map(&mut rng, 4, 4, 3);
        let mut conv = Conv2d::zeros(2, 1, 3, 5);
        conv.weight.iter_mut().for_each(|w| *w = rng.random_range(-1.0..1.0));
        let both = FeatureMap::stack([&a, &b]).unwrap();
        let out = conv.forward(&both).unwrap();
        assert_eq!(out.n, 2);
        let sa = conv.forward(&a).unwrap();
        let sb = conv.forward(&b).unwrap();
        for (x, y) in out.data.iter().zip(sa.data.iter().chain(&sb.data)) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn maxpool_constant_input_routes_to_first() {
        let input = FeatureMap::from_data(2, 2, 3, vec![0.5f64; 12]).unwrap();
        let p = maxpool_forward(&input, 2, 1).unwrap();
        assert_eq!(p.output.shape(), (1, 1, 3));
        assert_eq!(p.output.data, vec![0.5; 3]);
        let g = maxpool_backward(12, &p.argmax, &[1.0, 2.0, 3.0]);
        assert_eq!(&g[..3], &[1.0, 2.0, 3.0]);
        assert!(g[3..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn maxpool_table_row_shape() {
        let input = FeatureMap::<f64>::zeros(2, 2, 828);
        let p = maxpool_forward(&input, 2, 1).unwrap();
        assert_eq!(p.output.shape(), (1, 1, 828));
    }

    #[test]
    fn channel_pool_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut v: Vec<f64> = (0..828).map(|i| i as f64).collect();
        // distinct values in shuffled order
        for i in (1..v.len()).rev() {
            let j = rng.random_range(0..=i);
            v.swap(i, j);
        }
        let (out, arg) = channel_pool_forward(&v, 20, 20, 40).unwrap();
        assert_eq!(out.len(), 40);
        for j in 0..40 {
            let scan = v[j * 20..j * 20 + 20].iter().cloned().fold(f64::MIN, f64::max);
            assert_eq!(out[j], scan);
            assert_eq!(v[arg[j]], scan);
        }
        assert!(arg.iter().all(|&a| a < 800));
        assert!(channel_pool_forward(&v, 20, 20, 42).is_err());
    }

    #[test]
    fn linear_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut lin = Linear::<f64>::zeros(5, 4);
        lin.weight.iter_mut().for_each(|w| *w = rng.random_range(-1.0..1.0));
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let up: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut g = Linear::zeros(5, 4);
        let gx = lin.backward(&x, &up, &mut g);
        let fd = finite_difference(|x| dot(&lin.forward(x), &up), &x, 1e-6);
        for (a, b) in gx.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-8);
        }
        assert_eq!(g.bias, up);
    }

    #[test]
    fn crop_and_concat_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_map(&mut rng, 5, 5, 2);
        let c = center_crop(&a, 4);
        assert_eq!(c.at(0, 0), a.at(0, 0));
        assert_eq!(c.at(3, 3), a.at(3, 3));
        let c3 = center_crop(&a, 3);
        assert_eq!(c3.at(0, 0), a.at(1, 1));
        let b = random_map(&mut rng, 4, 4, 3);
        let cat = concat_channels(&[&c, &b]);
        let parts = split_channels(&cat, &[2, 3]);
        assert_eq!(parts[0], c);
        assert_eq!(parts[1], b);
        let mut full = FeatureMap::zeros(5, 5, 2);
        center_crop_backward(&c, &mut full);
        assert_eq!(full.at(4, 4), &[0.0, 0.0]);
        assert_eq!(full.at(2, 2), a.at(2, 2));
    }
}
