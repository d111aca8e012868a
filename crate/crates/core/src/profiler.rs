//! Static complexity analysis.
//!
//! The network's generic forward pass is run under a tracer whose
//! variables are shapes; every convolution and elementwise operation it
//! meets becomes one row of a [`CostReport`]. Convolutions count
//! `Hout·Wout·Cout·Cin·k²` MACs and two FLOPs per MAC; elementwise ops
//! (ReLU, sigmoid, add, subtract, multiply, pooling, resize) count one
//! FLOP per output element and no MACs. Activations are the output
//! element counts of convolutions. Slicing, concatenation and pixel
//! shuffle move memory only and are not counted.

use std::fmt::Write as _;

use crate::error::{shape_err, Result};
use crate::model::Fdan;
use crate::nn::kernels::window_out;
use crate::nn::Graph;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostRow {
    pub name: String,
    pub kind: &'static str,
    pub params: u64,
    pub macs: u64,
    pub flops: u64,
    pub activations: u64,
    pub out_dims: [usize; 4],
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CostTotals {
    pub params: u64,
    pub macs: u64,
    pub flops: u64,
    pub activations: u64,
}

#[derive(Clone, Debug)]
pub struct CostReport {
    pub rows: Vec<CostRow>,
    pub totals: CostTotals,
    pub input_hw: (usize, usize),
    pub scale: usize,
}

/// LR input size whose `scale`× output is a 3840×2160 frame, as `(H, W)`.
pub fn native_lr_resolution(scale: usize) -> (usize, usize) {
    (2160 / scale, 3840 / scale)
}

struct Tracer {
    rows: Vec<CostRow>,
    context: String,
}

fn numel(d: [usize; 4]) -> u64 {
    d.iter().map(|&v| v as u64).product()
}

impl Tracer {
    fn elementwise(&mut self, kind: &'static str, dims: [usize; 4]) -> [usize; 4] {
        self.rows.push(CostRow {
            name: format!("{}/{kind}", self.context),
            kind,
            params: 0,
            macs: 0,
            flops: numel(dims),
            activations: 0,
            out_dims: dims,
        });
        dims
    }

    fn same(a: &[usize; 4], b: &[usize; 4]) -> Result<()> {
        if a != b {
            return Err(shape_err!("operand dims differ: {a:?} vs {b:?}"));
        }
        Ok(())
    }
}

impl Graph for Tracer {
    type Elem = f32;
    type Var = [usize; 4];

    fn dims(&self, v: &[usize; 4]) -> [usize; 4] {
        *v
    }

    fn conv2d(
        &mut self,
        name: &str,
        x: &[usize; 4],
        weight: &[usize; 4],
        bias: Option<&[usize; 4]>,
        stride: usize,
        pad: usize,
    ) -> Result<[usize; 4]> {
        let [n, cin, h, w] = *x;
        let [cout, wcin, k, _] = *weight;
        if cin != wcin {
            return Err(shape_err!("{name}: weight expects {wcin} channels, input has {cin}"));
        }
        let oh = window_out(h, k, stride, pad).ok_or_else(|| shape_err!("{name}: window does not fit"))?;
        let ow = window_out(w, k, stride, pad).ok_or_else(|| shape_err!("{name}: window does not fit"))?;
        let out = [n, cout, oh, ow];
        let macs = numel(out) * (cin * k * k) as u64;
        self.context = name.to_owned();
        self.rows.push(CostRow {
            name: name.to_owned(),
            kind: "conv",
            params: numel(*weight) + bias.map_or(0, |b| numel(*b)),
            macs,
            flops: 2 * macs,
            activations: numel(out),
            out_dims: out,
        });
        Ok(out)
    }

    fn relu(&mut self, x: &[usize; 4]) -> Result<[usize; 4]> {
        Ok(self.elementwise("relu", *x))
    }

    fn sigmoid(&mut self, x: &[usize; 4]) -> Result<[usize; 4]> {
        Ok(self.elementwise("sigmoid", *x))
    }

    fn add(&mut self, a: &[usize; 4], b: &[usize; 4]) -> Result<[usize; 4]> {
        Self::same(a, b)?;
        Ok(self.elementwise("add", *a))
    }

    fn sub(&mut self, a: &[usize; 4], b: &[usize; 4]) -> Result<[usize; 4]> {
        Self::same(a, b)?;
        Ok(self.elementwise("sub", *a))
    }

    fn mul(&mut self, a: &[usize; 4], b: &[usize; 4]) -> Result<[usize; 4]> {
        Self::same(a, b)?;
        Ok(self.elementwise("mul", *a))
    }

    fn channel_slice(&mut self, x: &[usize; 4], start: usize, end: usize) -> Result<[usize; 4]> {
        let [n, c, h, w] = *x;
        if start >= end || end > c {
            return Err(shape_err!("channel range {start}..{end} invalid for {c} channels"));
        }
        Ok([n, end - start, h, w])
    }

    fn concat(&mut self, xs: &[[usize; 4]]) -> Result<[usize; 4]> {
        let [n, _, h, w] = *xs.first().ok_or_else(|| shape_err!("empty concat"))?;
        let mut c = 0;
        for x in xs {
            if (x[0], x[2], x[3]) != (n, h, w) {
                return Err(shape_err!("concat operands disagree: {x:?}"));
            }
            c += x[1];
        }
        Ok([n, c, h, w])
    }

    fn pixel_shuffle(&mut self, x: &[usize; 4], s: usize) -> Result<[usize; 4]> {
        let [n, c, h, w] = *x;
        if c % (s * s) != 0 {
            return Err(shape_err!("pixel shuffle by {s} needs channels divisible by {}", s * s));
        }
        Ok([n, c / (s * s), h * s, w * s])
    }

    fn max_pool(&mut self, x: &[usize; 4], kernel: usize, stride: usize) -> Result<[usize; 4]> {
        let [n, c, h, w] = *x;
        let oh = window_out(h, kernel, stride, 0).ok_or_else(|| shape_err!("pool window too large"))?;
        let ow = window_out(w, kernel, stride, 0).ok_or_else(|| shape_err!("pool window too large"))?;
        Ok(self.elementwise("maxpool", [n, c, oh, ow]))
    }

    fn resize_bilinear(&mut self, x: &[usize; 4], out_h: usize, out_w: usize) -> Result<[usize; 4]> {
        Ok(self.elementwise("resize", [x[0], x[1], out_h, out_w]))
    }
}

/// Exact learnable parameter count, `Σ k²·Cin·Cout + Cout`.
pub fn count_params(model: &Fdan) -> u64 {
    model.conv_layers().iter().map(|l| l.spec.param_count()).sum()
}

/// Per-layer costs for one `(height, width)` input image.
pub fn profile(model: &Fdan, height: usize, width: usize) -> Result<CostReport> {
    let mut tracer = Tracer {
        rows: Vec::new(),
        context: "input".into(),
    };
    let params = model.param_dims();
    model.forward(&mut tracer, &params, &[1, 3, height, width])?;
    let totals = tracer.rows.iter().fold(CostTotals::default(), |t, r| CostTotals {
        params: t.params + r.params,
        macs: t.macs + r.macs,
        flops: t.flops + r.flops,
        activations: t.activations + r.activations,
    });
    Ok(CostReport {
        rows: tracer.rows,
        totals,
        input_hw: (height, width),
        scale: model.scale(),
    })
}

/// `(flops, macs)` for one `(height, width)` input.
pub fn count_flops(model: &Fdan, height: usize, width: usize) -> Result<(u64, u64)> {
    let t = profile(model, height, width)?.totals;
    Ok((t.flops, t.macs))
}

pub fn count_activations(model: &Fdan, height: usize, width: usize) -> Result<u64> {
    Ok(profile(model, height, width)?.totals.activations)
}

/// FLOPs of the reconstruction conv alone.
pub fn reconstruction_flops(report: &CostReport) -> u64 {
    report
        .rows
        .iter()
        .filter(|r| r.name == "reconstruct" && r.kind == "conv")
        .map(|r| r.flops)
        .sum()
}

/// Thousands with two decimals, truncated: `142_248` → `"142.24"`.
pub fn kilo_truncated(v: u64) -> String {
    format!("{}.{:02}", v / 1000, (v % 1000) / 10)
}

/// `1234567` → `"1,234,567"`.
pub fn thousands(v: u64) -> String {
    let s = v.to_string();
    let mut out = String::new();
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

impl CostReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("layer,kind,params,macs,flops,activations,out_channels,out_height,out_width\n");
        for r in &self.rows {
            let [_, c, h, w] = r.out_dims;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{c},{h},{w}",
                r.name, r.kind, r.params, r.macs, r.flops, r.activations
            );
        }
        let t = &self.totals;
        let _ = writeln!(
            s,
            "total,,{},{},{},{},,,",
            t.params, t.macs, t.flops, t.activations
        );
        s
    }

    pub fn summary(&self) -> String {
        let t = &self.totals;
        let (h, w) = self.input_hw;
        format!(
            "scale x{} input {w}x{h}: params {} ({}K), FLOPs {:.2}G, MACs {:.2}G, activations {:.2}G",
            self.scale,
            thousands(t.params),
            kilo_truncated(t.params),
            t.flops as f64 / 1e9,
            t.macs as f64 / 1e9,
            t.activations as f64 / 1e9,
        )
    }
}
