//! Three-view orientation network: parameters, forward trace and exact
//! reverse-mode gradients of the axial angle loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::Architecture;
use super::layers::{
    center_crop, center_crop_backward, channel_pool_forward, concat_channels, maxpool_backward,
    maxpool_forward, split_channels, tanh_backward, tanh_inplace, Conv2d, FeatureMap, Linear,
    Pooled,
};
use super::patch::PatchSample;
use super::real::Real;
use crate::error::{Error, Result};
use crate::loss::axial_angle_atan2;
use crate::vec3::Vec3;

/// Pre-normalization norms below this fall back to +x.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Weights of one view branch.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch<T> {
    pub conv1: Conv2d<T>,
    pub dense: Vec<Conv2d<T>>,
    pub conv6: Conv2d<T>,
    pub head: Linear<T>,
}

/// Network parameters. Each of the three views has its own branch.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    arch: Architecture,
    pub branches: Vec<Branch<T>>,
    pub output: Linear<T>,
}

/// A named parameter tensor. `weight` is false for biases, which the L2
/// penalty skips.
#[derive(Debug)]
pub struct ParamRef<'a, T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [T],
    pub weight: bool,
}

/// Dropout during a forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dropout {
    Off,
    /// Drop probability and the seed of the mask generator.
    On { rate: f64, seed: u64 },
}

/// Batched activations of one view branch.
#[derive(Debug, Clone)]
struct BranchTrace<T> {
    input: FeatureMap<T>,
    /// `acts[0]` is conv1, `acts[i + 1]` is dense layer `i` (post-tanh).
    acts: Vec<FeatureMap<T>>,
    dense_inputs: Vec<FeatureMap<T>>,
    mask: Option<Vec<T>>,
    dropped: FeatureMap<T>,
    conv6: FeatureMap<T>,
    pool: Pooled<T>,
    /// Flat indices into `pool.output.data`.
    channel_argmax: Vec<usize>,
    /// `[n × pooled]`
    pooled: Vec<T>,
    /// `[n × branch_out]`
    head: Vec<T>,
}

/// Everything the backward pass needs from a batched forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    branches: Vec<BranchTrace<T>>,
    /// `[n × 3·branch_out]`
    concat: Vec<T>,
    /// Post-tanh outputs before normalization, `[n × 3]`.
    raw: Vec<T>,
    raw_norms: Vec<f64>,
    pub predictions: Vec<Vec3>,
    pub degenerate: Vec<bool>,
}

/// Per-sample loss from [`Network::backward`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleLoss {
    /// Axial angle in radians (no L2 term).
    pub angle: f64,
    /// True when the gradient was undefined and a zero gradient was used.
    pub degenerate: bool,
}

fn glorot<T: Real>(rng: &mut ChaCha8Rng, data: &mut [T], fan_in: usize, fan_out: usize) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for w in data.iter_mut() {
        *w = T::from_f64(rng.random_range(-limit..limit));
    }
}

impl<T: Real> Network<T> {
    /// All-zero parameters (also the gradient accumulator layout).
    pub fn zeros(arch: &Architecture) -> Result<Self> {
        arch.shape_trace()?;
        let branch = Branch {
            conv1: Conv2d::zeros(arch.conv1.kernel, 1, arch.shells, arch.conv1.filters),
            dense: arch
                .dense
                .iter()
                .enumerate()
                .map(|(i, d)| Conv2d::zeros(d.kernel, 1, arch.dense_inputs(i), d.filters))
                .collect(),
            conv6: Conv2d::zeros(arch.conv6.kernel, 1, arch.conv6_inputs(), arch.conv6.filters),
            head: Linear::zeros(arch.pooled, arch.branch_out),
        };
        Ok(Self {
            arch: arch.clone(),
            branches: vec![branch.clone(), branch.clone(), branch],
            output: Linear::zeros(3 * arch.branch_out, 3),
        })
    }

    /// Glorot-uniform weights and zero biases.
    pub fn init(arch: &Architecture, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for b in net.branches.iter_mut() {
            let convs = std::iter::once(&mut b.conv1)
                .chain(b.dense.iter_mut())
                .chain(std::iter::once(&mut b.conv6));
            for c in convs {
                let area = c.kernel * c.kernel;
                glorot(&mut rng, &mut c.weight, area * c.in_channels, area * c.out_channels);
            }
            glorot(&mut rng, &mut b.head.weight, b.head.inputs, b.head.outputs);
        }
        let (i, o) = (net.output.inputs, net.output.outputs);
        glorot(&mut rng, &mut net.output.weight, i, o);
        Ok(net)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    /// Parameter tensors in a fixed order.
    pub fn params(&self) -> Vec<ParamRef<'_, T>> {
        let mut out = Vec::new();
        for (v, b) in self.branches.iter().enumerate() {
            let mut convs: Vec<(String, &Conv2d<T>)> = vec![(format!("view{v}.conv1"), &b.conv1)];
            for (i, d) in b.dense.iter().enumerate() {
                convs.push((format!("view{v}.conv{}", i + 2), d));
            }
            convs.push((format!("view{v}.conv{}", b.dense.len() + 2), &b.conv6));
            for (name, c) in convs {
                out.push(ParamRef {
                    name: format!("{name}.weight"),
                    shape: vec![c.out_channels, c.kernel, c.kernel, c.in_channels],
                    data: c.weight.as_slice(),
                    weight: true,
                });
                out.push(ParamRef {
                    name: format!("{name}.bias"),
                    shape: vec![c.out_channels],
                    data: c.bias.as_slice(),
                    weight: false,
                });
            }
            out.push(ParamRef {
                name: format!("view{v}.dense.weight"),
                shape: vec![b.head.outputs, b.head.inputs],
                data: b.head.weight.as_slice(),
                weight: true,
            });
            out.push(ParamRef {
                name: format!("view{v}.dense.bias"),
                shape: vec![b.head.outputs],
                data: b.head.bias.as_slice(),
                weight: false,
            });
        }
        out.push(ParamRef {
            name: "output.weight".into(),
            shape: vec![self.output.outputs, self.output.inputs],
            data: self.output.weight.as_slice(),
            weight: true,
        });
        out.push(ParamRef {
            name: "output.bias".into(),
            shape: vec![self.output.outputs],
            data: self.output.bias.as_slice(),
            weight: false,
        });
        out
    }

    /// Mutable parameter slices in the same order as [`Network::params`].
    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        for b in self.branches.iter_mut() {
            let convs = std::iter::once(&mut b.conv1)
                .chain(b.dense.iter_mut())
                .chain(std::iter::once(&mut b.conv6));
            for c in convs {
                out.push(&mut c.weight);
                out.push(&mut c.bias);
            }
            out.push(&mut b.head.weight);
            out.push(&mut b.head.bias);
        }
        out.push(&mut self.output.weight);
        out.push(&mut self.output.bias);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.data.len()).sum()
    }

    /// Σ w² over weights (biases excluded).
    pub fn weight_sq_sum(&self) -> f64 {
        self.params()
            .iter()
            .filter(|p| p.weight)
            .flat_map(|p| p.data.iter())
            .map(|w| w.to_f64() * w.to_f64())
            .sum()
    }

    /// Adds `other` element-wise.
    pub fn add_assign(&mut self, other: &Self) {
        let src = other.params();
        for (dst, s) in self.params_mut().into_iter().zip(src) {
            for (a, b) in dst.iter_mut().zip(s.data) {
                *a += *b;
            }
        }
    }

    /// Multiplies every parameter by `k`.
    pub fn scale(&mut self, k: T) {
        for p in self.params_mut() {
            p.iter_mut().for_each(|v| *v *= k);
        }
    }

    /// Adds the L2 penalty gradient `2·l2·w` to a gradient accumulator.
    pub fn add_l2_gradient(&self, l2: f64, grad: &mut Self) {
        let k = T::from_f64(2.0 * l2);
        let src = self.params();
        for (g, p) in grad.params_mut().into_iter().zip(src) {
            if p.weight {
                for (gi, wi) in g.iter_mut().zip(p.data) {
                    *gi += k * *wi;
                }
            }
        }
    }

    /// Converts element type (used to run f64 checks on f32 parameters).
    pub fn cast<U: Real>(&self) -> Network<U> {
        let mut out = Network::<U>::zeros(&self.arch).expect("architecture already validated");
        for (dst, src) in out.params_mut().into_iter().zip(self.params()) {
            for (a, b) in dst.iter_mut().zip(src.data) {
                *a = U::from_f64(b.to_f64());
            }
        }
        out
    }

    fn check_sample(&self, sample: &PatchSample) -> Result<()> {
        let p = self.arch.patch;
        for view in &sample.views {
            if view.shape() != (p, p, self.arch.shells) || view.n != 1 {
                return Err(Error::Config(format!(
                    "patch is {:?}, network expects {p}x{p}x{}",
                    view.shape(),
                    self.arch.shells
                )));
            }
        }
        Ok(())
    }

    fn branch_forward(
        &self,
        b: &Branch<T>,
        input: FeatureMap<T>,
        rngs: &mut [Option<(ChaCha8Rng, f64)>],
    ) -> Result<BranchTrace<T>> {
        let n = input.n;
        let mut first = b.conv1.forward(&input)?;
        tanh_inplace(&mut first.data);
        let mut acts = vec![first];
        let mut dense_inputs = Vec::with_capacity(b.dense.len());
        for conv in &b.dense {
            let size = acts.last().expect("nonempty").h;
            let cropped: Vec<FeatureMap<T>> = acts.iter().map(|a| center_crop(a, size)).collect();
            let refs: Vec<&FeatureMap<T>> = cropped.iter().collect();
            let x = concat_channels(&refs);
            let mut y = conv.forward(&x)?;
            tanh_inplace(&mut y.data);
            dense_inputs.push(x);
            acts.push(y);
        }
        let block = acts.last().expect("nonempty");
        let mut dropped = block.clone();
        let mask = if rngs.iter().any(|r| r.is_some()) {
            let len = block.sample_len();
            let mut mask = vec![T::ONE; block.data.len()];
            for (s, r) in rngs.iter_mut().enumerate() {
                if let Some((rng, rate)) = r {
                    let keep = T::from_f64(1.0 / (1.0 - *rate));
                    for m in &mut mask[s * len..(s + 1) * len] {
                        *m = if rng.random::<f64>() < *rate { T::ZERO } else { keep };
                    }
                }
            }
            dropped.data.iter_mut().zip(&mask).for_each(|(v, m)| *v *= *m);
            Some(mask)
        } else {
            None
        };
        let mut conv6 = b.conv6.forward(&dropped)?;
        tanh_inplace(&mut conv6.data);
        let pool = maxpool_forward(&conv6, self.arch.pool_kernel, 1)?;
        let c6 = pool.output.sample_len();
        let mut pooled = Vec::with_capacity(n * self.arch.pooled);
        let mut channel_argmax = Vec::with_capacity(n * self.arch.pooled);
        for s in 0..n {
            let (vals, args) = channel_pool_forward(
                pool.output.sample(s),
                self.arch.channel_window,
                self.arch.channel_window,
                self.arch.pooled,
            )?;
            pooled.extend(vals);
            channel_argmax.extend(args.into_iter().map(|a| a + s * c6));
        }
        let mut head = b.head.forward(&pooled);
        tanh_inplace(&mut head);
        Ok(BranchTrace {
            input,
            acts,
            dense_inputs,
            mask,
            dropped,
            conv6,
            pool,
            channel_argmax,
            pooled,
            head,
        })
    }

    /// Forward pass over a batch keeping intermediate activations.
    /// `dropout[i]` applies to `samples[i]`; each sample's mask depends only
    /// on its own seed.
    pub fn forward_batch(
        &self,
        samples: &[&PatchSample],
        dropout: &[Dropout],
    ) -> Result<ForwardTrace<T>> {
        if samples.is_empty() || samples.len() != dropout.len() {
            return Err(Error::Config(
                "forward pass needs one dropout setting per sample and at least one sample".into(),
            ));
        }
        for s in samples {
            self.check_sample(s)?;
        }
        let mut rngs = dropout
            .iter()
            .map(|d| match *d {
                Dropout::On { rate, .. } if !(0.0..1.0).contains(&rate) => Err(Error::Config(
                    format!("dropout rate {rate} outside [0, 1)"),
                )),
                Dropout::On { rate, seed } if rate > 0.0 => {
                    Ok(Some((ChaCha8Rng::seed_from_u64(seed), rate)))
                }
                _ => Ok(None),
            })
            .collect::<Result<Vec<_>>>()?;
        let n = samples.len();
        let mut branches = Vec::with_capacity(3);
        for (v, b) in self.branches.iter().enumerate() {
            let view = &samples[0].views[v];
            let mut data = Vec::with_capacity(n * view.data.len());
            for s in samples {
                data.extend(s.views[v].data.iter().map(|&x| T::from_f64(x as f64)));
            }
            let input = FeatureMap::from_batch_data(n, view.h, view.w, view.c, data)?;
            branches.push(self.branch_forward(b, input, &mut rngs)?);
        }
        let width = self.arch.branch_out;
        let mut concat = Vec::with_capacity(n * 3 * width);
        for s in 0..n {
            for b in &branches {
                concat.extend_from_slice(&b.head[s * width..(s + 1) * width]);
            }
        }
        let mut raw = self.output.forward(&concat);
        tanh_inplace(&mut raw);
        let mut raw_norms = Vec::with_capacity(n);
        let mut predictions = Vec::with_capacity(n);
        let mut degenerate = Vec::with_capacity(n);
        for o in raw.chunks_exact(3) {
            let r = [o[0].to_f64(), o[1].to_f64(), o[2].to_f64()];
            let norm = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
            raw_norms.push(norm);
            if norm < DEGENERATE_NORM {
                predictions.push([1.0, 0.0, 0.0]);
                degenerate.push(true);
            } else {
                predictions.push(r.map(|c| c / norm));
                degenerate.push(false);
            }
        }
        Ok(ForwardTrace {
            branches,
            concat,
            raw,
            raw_norms,
            predictions,
            degenerate,
        })
    }

    /// Single-sample forward pass keeping intermediate activations.
    pub fn forward_trace(&self, sample: &PatchSample, dropout: Dropout) -> Result<ForwardTrace<T>> {
        self.forward_batch(&[sample], &[dropout])
    }

    /// Unit-norm orientation prediction (inference mode) and degenerate flag.
    pub fn predict(&self, sample: &PatchSample) -> Result<(Vec3, bool)> {
        let t = self.forward_trace(sample, Dropout::Off)?;
        Ok((t.predictions[0], t.degenerate[0]))
    }

    /// Inference over many samples, one batched pass per `batch` samples.
    pub fn predict_batch(&self, samples: &[&PatchSample], batch: usize) -> Result<Vec<(Vec3, bool)>> {
        let mut out = Vec::with_capacity(samples.len());
        for chunk in samples.chunks(batch.max(1)) {
            let t = self.forward_batch(chunk, &vec![Dropout::Off; chunk.len()])?;
            out.extend(t.predictions.into_iter().zip(t.degenerate));
        }
        Ok(out)
    }

    /// Accumulates Σ ∂θ/∂params over the batch into `grad` (no L2 term).
    /// Samples whose loss gradient is undefined contribute nothing and are
    /// flagged.
    pub fn backward(
        &self,
        trace: &ForwardTrace<T>,
        targets: &[Vec3],
        grad: &mut Network<T>,
    ) -> Result<Vec<SampleLoss>> {
        let n = trace.predictions.len();
        if targets.len() != n {
            return Err(Error::Config(format!("{} targets for {n} samples", targets.len())));
        }
        let mut losses = Vec::with_capacity(n);
        let mut g_raw = vec![T::ZERO; 3 * n];
        for s in 0..n {
            let y = trace.predictions[s];
            let (angle, g_y, flagged) = axial_angle_atan2(&targets[s], &y)?;
            let degenerate = flagged || trace.degenerate[s];
            losses.push(SampleLoss {
                angle: angle.radians(),
                degenerate,
            });
            if degenerate {
                continue;
            }
            // y = o/|o|  ⇒  ∂/∂o = (g − y(y·g))/|o|
            let g = g_y.d_theta_d_w;
            let yg = y[0] * g[0] + y[1] * g[1] + y[2] * g[2];
            for k in 0..3 {
                g_raw[3 * s + k] = T::from_f64((g[k] - y[k] * yg) / trace.raw_norms[s]);
            }
        }
        if losses.iter().all(|l| l.degenerate) {
            return Ok(losses);
        }
        tanh_backward(&trace.raw, &mut g_raw);
        let g_concat = self.output.backward(&trace.concat, &g_raw, &mut grad.output);
        let width = self.arch.branch_out;
        for (v, bt) in trace.branches.iter().enumerate() {
            let mut g_head = Vec::with_capacity(n * width);
            for s in 0..n {
                let row = &g_concat[s * 3 * width..(s + 1) * 3 * width];
                g_head.extend_from_slice(&row[v * width..(v + 1) * width]);
            }
            self.branch_backward(&self.branches[v], bt, g_head, &mut grad.branches[v])?;
        }
        Ok(losses)
    }

    fn branch_backward(
        &self,
        b: &Branch<T>,
        t: &BranchTrace<T>,
        mut g: Vec<T>,
        grad: &mut Branch<T>,
    ) -> Result<()> {
        tanh_backward(&t.head, &mut g);
        let g_pooled = b.head.backward(&t.pooled, &g, &mut grad.head);
        let mut g_spatial = vec![T::ZERO; t.pool.output.data.len()];
        for (&idx, &gv) in t.channel_argmax.iter().zip(&g_pooled) {
            g_spatial[idx] += gv;
        }
        let mut g6 = FeatureMap::from_batch_data(
            t.conv6.n,
            t.conv6.h,
            t.conv6.w,
            t.conv6.c,
            maxpool_backward(t.conv6.data.len(), &t.pool.argmax, &g_spatial),
        )?;
        tanh_backward(&t.conv6.data, &mut g6.data);
        let mut g_block = b
            .conv6
            .backward(&t.dropped, &g6, &mut grad.conv6, true)?
            .expect("input gradient requested");
        if let Some(mask) = &t.mask {
            g_block.data.iter_mut().zip(mask).for_each(|(v, m)| *v *= *m);
        }

        let mut g_acts: Vec<FeatureMap<T>> = t
            .acts
            .iter()
            .map(|a| FeatureMap::batch_zeros(a.n, a.h, a.w, a.c))
            .collect();
        *g_acts.last_mut().expect("nonempty") = g_block;
        for i in (0..b.dense.len()).rev() {
            let mut g_out = std::mem::replace(&mut g_acts[i + 1], FeatureMap::batch_zeros(0, 0, 0, 0));
            tanh_backward(&t.acts[i + 1].data, &mut g_out.data);
            let g_in = b.dense[i]
                .backward(&t.dense_inputs[i], &g_out, &mut grad.dense[i], true)?
                .expect("input gradient requested");
            let widths: Vec<usize> = t.acts[..=i].iter().map(|a| a.c).collect();
            for (j, part) in split_channels(&g_in, &widths).iter().enumerate() {
                center_crop_backward(part, &mut g_acts[j]);
            }
        }
        let mut g1 = std::mem::replace(&mut g_acts[0], FeatureMap::batch_zeros(0, 0, 0, 0));
        tanh_backward(&t.acts[0].data, &mut g1.data);
        b.conv1.backward(&t.input, &g1, &mut grad.conv1, false)?;
        Ok(())
    }

    /// Per-sample shapes of every intermediate activation of one branch;
    /// used to confirm the runtime stack matches the declared trace.
    pub fn activation_shapes(&self, sample: &PatchSample) -> Result<Vec<(usize, usize, usize)>> {
        let t = self.forward_trace(sample, Dropout::Off)?;
        let b = &t.branches[0];
        let mut shapes = vec![b.input.shape()];
        shapes.extend(b.acts.iter().map(|a| a.shape()));
        shapes.push(b.dropped.shape());
        shapes.push(b.conv6.shape());
        shapes.push(b.pool.output.shape());
        shapes.push((1, 1, b.pooled.len()));
        shapes.push((1, 1, b.head.len()));
        shapes.push((1, 1, t.concat.len()));
        shapes.push((1, 1, t.raw.len()));
        Ok(shapes)
    }
}
