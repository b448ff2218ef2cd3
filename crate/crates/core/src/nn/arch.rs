//! Layer layout of the orientation network and its shape trace.

use crate::error::{Error, Result};

/// Shell count of the reference architecture.
pub const REFERENCE_SHELLS: usize = 69;

/// Kernel size and filter count of one convolution (stride is always 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub kernel: usize,
    pub filters: usize,
}

impl ConvSpec {
    pub const fn new(kernel: usize, filters: usize) -> Self {
        Self { kernel, filters }
    }
}

/// Per-view branch layout plus the shared output layer.
///
/// Each branch runs `conv1`, the dense block, dropout, `conv6`, a spatial
/// max-pool, a channel max-pool to `pooled` values and a dense layer to
/// `branch_out`. The three branch outputs are concatenated and mapped to a
/// 3-vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub patch: usize,
    pub shells: usize,
    pub conv1: ConvSpec,
    pub dense: Vec<ConvSpec>,
    pub conv6: ConvSpec,
    pub pool_kernel: usize,
    /// Window and stride of the channel max-pool.
    pub channel_window: usize,
    pub pooled: usize,
    pub branch_out: usize,
}

/// One row of the shape trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerShape {
    pub name: String,
    /// Input spatial size and channel count (channel-only layers use 1×1).
    pub input: (usize, usize, usize),
    pub kernel: Option<usize>,
    pub stride: Option<usize>,
    pub output: (usize, usize, usize),
}

fn scaled(depth: usize, shells: usize) -> usize {
    (depth * shells).div_ceil(REFERENCE_SHELLS)
}

impl Architecture {
    /// The reference layout for `shells` input channels.
    ///
    /// With 69 shells this is exactly the published table. For other shell
    /// counts conv1 uses two filters per shell and every later depth is
    /// scaled by `shells / 69`, rounded up.
    pub fn table1(shells: usize) -> Result<Self> {
        if shells == 0 {
            return Err(Error::Config("shell count must be positive".into()));
        }
        let s = |d| scaled(d, shells);
        let conv6 = ConvSpec::new(2, s(828));
        let pooled = 40;
        if conv6.filters < pooled {
            return Err(Error::Config(format!(
                "{shells} shells give {} conv6 channels, fewer than the {pooled} pooled outputs",
                conv6.filters
            )));
        }
        let arch = Self {
            patch: 7,
            shells,
            conv1: ConvSpec::new(3, 2 * shells),
            dense: vec![
                ConvSpec::new(2, s(207)),
                ConvSpec::new(1, s(207)),
                ConvSpec::new(1, s(414)),
                ConvSpec::new(2, s(1656)),
            ],
            conv6,
            pool_kernel: 2,
            channel_window: conv6.filters / pooled,
            pooled,
            branch_out: 10,
        };
        arch.shape_trace()?;
        Ok(arch)
    }

    /// A tiny layout (3×3 patches, 2 shells) for exhaustive gradient checks.
    /// It keeps every structural feature: a spatially shrinking dense layer,
    /// center cropping, both pools and the output normalization.
    pub fn shrunken() -> Self {
        Self {
            patch: 3,
            shells: 2,
            conv1: ConvSpec::new(1, 4),
            dense: vec![ConvSpec::new(2, 3), ConvSpec::new(1, 3)],
            conv6: ConvSpec::new(1, 8),
            pool_kernel: 2,
            channel_window: 2,
            pooled: 4,
            branch_out: 3,
        }
    }

    /// Input channel count of dense layer `i`: conv1 plus all earlier dense
    /// outputs.
    pub fn dense_inputs(&self, i: usize) -> usize {
        self.conv1.filters + self.dense[..i].iter().map(|d| d.filters).sum::<usize>()
    }

    fn last_block_filters(&self) -> usize {
        self.dense.last().map_or(self.conv1.filters, |d| d.filters)
    }

    pub fn conv6_inputs(&self) -> usize {
        self.last_block_filters()
    }

    /// Layer-by-layer shapes; errors when a kernel does not fit.
    pub fn shape_trace(&self) -> Result<Vec<LayerShape>> {
        fn shrink(size: usize, k: usize, name: &str) -> Result<usize> {
            if k == 0 || k > size {
                return Err(Error::Config(format!(
                    "{name}: kernel {k} does not fit {size}x{size}"
                )));
            }
            Ok(size - k + 1)
        }
        if self.patch == 0 || self.shells == 0 {
            return Err(Error::Config("patch size and shell count must be positive".into()));
        }
        if self.channel_window == 0
            || self.pooled == 0
            || (self.pooled - 1) * self.channel_window + self.channel_window > self.conv6.filters
        {
            return Err(Error::Config(format!(
                "channel pool of {} windows of {} exceeds {} channels",
                self.pooled, self.channel_window, self.conv6.filters
            )));
        }
        let mut rows = Vec::new();
        let p = self.patch;
        rows.push(LayerShape {
            name: "Input".into(),
            input: (p, p, self.shells),
            kernel: None,
            stride: None,
            output: (p, p, self.shells),
        });
        let mut size = shrink(p, self.conv1.kernel, "Conv 1")?;
        rows.push(LayerShape {
            name: "Conv 1".into(),
            input: (p, p, self.shells),
            kernel: Some(self.conv1.kernel),
            stride: Some(1),
            output: (size, size, self.conv1.filters),
        });
        for (i, d) in self.dense.iter().enumerate() {
            let name = format!("Conv {} - Dense", i + 2);
            let out = shrink(size, d.kernel, &name)?;
            rows.push(LayerShape {
                name,
                input: (size, size, self.dense_inputs(i)),
                kernel: Some(d.kernel),
                stride: Some(1),
                output: (out, out, d.filters),
            });
            size = out;
        }
        let block = self.last_block_filters();
        rows.push(LayerShape {
            name: "Dropout".into(),
            input: (size, size, block),
            kernel: None,
            stride: None,
            output: (size, size, block),
        });
        let out = shrink(size, self.conv6.kernel, "Conv 6")?;
        rows.push(LayerShape {
            name: format!("Conv {}", self.dense.len() + 2),
            input: (size, size, block),
            kernel: Some(self.conv6.kernel),
            stride: Some(1),
            output: (out, out, self.conv6.filters),
        });
        size = out;
        let out = shrink(size, self.pool_kernel, "Max. Pool 1")?;
        if out != 1 {
            return Err(Error::Config(format!(
                "spatial pool leaves {out}x{out}; the branch head expects 1x1"
            )));
        }
        rows.push(LayerShape {
            name: "Max. Pool 1".into(),
            input: (size, size, self.conv6.filters),
            kernel: Some(self.pool_kernel),
            stride: Some(1),
            output: (1, 1, self.conv6.filters),
        });
        rows.push(LayerShape {
            name: "Max. Pool 2".into(),
            input: (1, 1, self.conv6.filters),
            kernel: Some(self.channel_window),
            stride: Some(self.channel_window),
            output: (1, 1, self.pooled),
        });
        rows.push(LayerShape {
            name: "Dense".into(),
            input: (1, 1, self.pooled),
            kernel: None,
            stride: None,
            output: (1, 1, self.branch_out),
        });
        rows.push(LayerShape {
            name: "Concat".into(),
            input: (1, 1, self.branch_out),
            kernel: None,
            stride: None,
            output: (1, 1, 3 * self.branch_out),
        });
        rows.push(LayerShape {
            name: "FC Output".into(),
            input: (1, 1, 3 * self.branch_out),
            kernel: None,
            stride: None,
            output: (1, 1, 3),
        });
        Ok(rows)
    }

    /// Total trainable scalar count.
    pub fn parameter_count(&self) -> usize {
        let conv = |k: usize, cin: usize, cout: usize| k * k * cin * cout + cout;
        let mut branch = conv(self.conv1.kernel, self.shells, self.conv1.filters);
        for (i, d) in self.dense.iter().enumerate() {
            branch += conv(d.kernel, self.dense_inputs(i), d.filters);
        }
        branch += conv(self.conv6.kernel, self.conv6_inputs(), self.conv6.filters);
        branch += self.pooled * self.branch_out + self.branch_out;
        3 * branch + 3 * self.branch_out * 3 + 3
    }
}
