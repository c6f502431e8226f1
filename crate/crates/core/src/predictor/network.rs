//! Dense encoder → GRU → decoder network with hand-written backpropagation
//! through time.

use crate::rng::SimRng;
use ndarray::{Array1, Array2, ArrayView1, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Trainable parameters. `D` is the flattened matrix size, `H` the latent width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    /// H × D
    pub w_e: Array2<f64>,
    pub b_e: Array1<f64>,
    /// Update gate: input H × H, recurrent H × H, bias H.
    pub w_z: Array2<f64>,
    pub u_z: Array2<f64>,
    pub b_z: Array1<f64>,
    /// Reset gate.
    pub w_r: Array2<f64>,
    pub u_r: Array2<f64>,
    pub b_r: Array1<f64>,
    /// Candidate state.
    pub w_h: Array2<f64>,
    pub u_h: Array2<f64>,
    pub b_h: Array1<f64>,
    /// D × H
    pub w_d: Array2<f64>,
    pub b_d: Array1<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn uniform(rng: &mut SimRng, rows: usize, cols: usize) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..bound))
}

/// Adds the outer product `a ⊗ b` into `m`.
fn add_outer(m: &mut Array2<f64>, a: &Array1<f64>, b: ArrayView1<f64>) {
    for (mut row, &ai) in m.rows_mut().into_iter().zip(a) {
        if ai != 0.0 {
            row.scaled_add(ai, &b);
        }
    }
}

/// Values kept from the forward pass of one window.
pub struct Trace {
    inputs: Vec<Array1<f64>>,
    enc_pre: Vec<Array1<f64>>,
    enc: Vec<Array1<f64>>,
    h_prev: Vec<Array1<f64>>,
    z: Vec<Array1<f64>>,
    r: Vec<Array1<f64>>,
    cand: Vec<Array1<f64>>,
    h_last: Array1<f64>,
    out_pre: Array1<f64>,
    pub output: Array1<f64>,
}

impl Weights {
    pub fn zeros(d: usize, h: usize) -> Self {
        let m = |r, c| Array2::zeros((r, c));
        let v = |n| Array1::zeros(n);
        Self {
            w_e: m(h, d),
            b_e: v(h),
            w_z: m(h, h),
            u_z: m(h, h),
            b_z: v(h),
            w_r: m(h, h),
            u_r: m(h, h),
            b_r: v(h),
            w_h: m(h, h),
            u_h: m(h, h),
            b_h: v(h),
            w_d: m(d, h),
            b_d: v(d),
        }
    }

    /// Glorot-uniform matrices (decoder scaled down by 10), small positive
    /// encoder bias and the decoder bias set to `output_bias`, so outputs
    /// with non-zero mean start in the active region of the ReLU.
    pub fn init(d: usize, h: usize, output_bias: &Array1<f64>, rng: &mut SimRng) -> Self {
        let mut w = Self::zeros(d, h);
        w.w_e = uniform(rng, h, d);
        w.w_z = uniform(rng, h, h);
        w.u_z = uniform(rng, h, h);
        w.w_r = uniform(rng, h, h);
        w.u_r = uniform(rng, h, h);
        w.w_h = uniform(rng, h, h);
        w.u_h = uniform(rng, h, h);
        w.w_d = uniform(rng, d, h) * 0.1;
        w.b_e.fill(0.1);
        w.b_d.assign(output_bias);
        w
    }

    pub fn input_dim(&self) -> usize {
        self.w_e.ncols()
    }

    pub fn latent(&self) -> usize {
        self.w_e.nrows()
    }

    /// Every parameter array, in a fixed order.
    pub fn arrays(&self) -> [ndarray::ArrayViewD<'_, f64>; 13] {
        [
            self.w_e.view().into_dyn(),
            self.b_e.view().into_dyn(),
            self.w_z.view().into_dyn(),
            self.u_z.view().into_dyn(),
            self.b_z.view().into_dyn(),
            self.w_r.view().into_dyn(),
            self.u_r.view().into_dyn(),
            self.b_r.view().into_dyn(),
            self.w_h.view().into_dyn(),
            self.u_h.view().into_dyn(),
            self.b_h.view().into_dyn(),
            self.w_d.view().into_dyn(),
            self.b_d.view().into_dyn(),
        ]
    }

    pub fn arrays_mut(&mut self) -> [ndarray::ArrayViewMutD<'_, f64>; 13] {
        [
            self.w_e.view_mut().into_dyn(),
            self.b_e.view_mut().into_dyn(),
            self.w_z.view_mut().into_dyn(),
            self.u_z.view_mut().into_dyn(),
            self.b_z.view_mut().into_dyn(),
            self.w_r.view_mut().into_dyn(),
            self.u_r.view_mut().into_dyn(),
            self.b_r.view_mut().into_dyn(),
            self.w_h.view_mut().into_dyn(),
            self.u_h.view_mut().into_dyn(),
            self.b_h.view_mut().into_dyn(),
            self.w_d.view_mut().into_dyn(),
            self.b_d.view_mut().into_dyn(),
        ]
    }

    pub const NAMES: [&'static str; 13] = [
        "w_e", "b_e", "w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h", "w_d", "b_d",
    ];

    pub fn is_finite(&self) -> bool {
        self.arrays().iter().all(|a| a.iter().all(|v| v.is_finite()))
    }

    pub fn squared_norm(&self) -> f64 {
        self.arrays().iter().map(|a| a.iter().map(|v| v * v).sum::<f64>()).sum()
    }

    /// self += scale · other
    pub fn add_scaled(&mut self, other: &Weights, scale: f64) {
        for (mut dst, src) in self.arrays_mut().into_iter().zip(other.arrays()) {
            dst.scaled_add(scale, &src);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for mut a in self.arrays_mut() {
            a.mapv_inplace(|v| v * factor);
        }
    }

    /// Runs the window (each entry already normalized and flattened).
    pub fn forward(&self, window: &[Array1<f64>]) -> Trace {
        let h_dim = self.latent();
        let mut trace = Trace {
            inputs: Vec::with_capacity(window.len()),
            enc_pre: Vec::with_capacity(window.len()),
            enc: Vec::with_capacity(window.len()),
            h_prev: Vec::with_capacity(window.len()),
            z: Vec::with_capacity(window.len()),
            r: Vec::with_capacity(window.len()),
            cand: Vec::with_capacity(window.len()),
            h_last: Array1::zeros(h_dim),
            out_pre: Array1::zeros(0),
            output: Array1::zeros(0),
        };
        let mut h = Array1::zeros(h_dim);
        for x in window {
            let a = self.w_e.dot(x) + &self.b_e;
            let e = a.mapv(relu);
            let z = (self.w_z.dot(&e) + self.u_z.dot(&h) + &self.b_z).mapv(sigmoid);
            let r = (self.w_r.dot(&e) + self.u_r.dot(&h) + &self.b_r).mapv(sigmoid);
            let rh = &r * &h;
            let c = (self.w_h.dot(&e) + self.u_h.dot(&rh) + &self.b_h).mapv(f64::tanh);
            let mut next = Array1::zeros(h_dim);
            Zip::from(&mut next)
                .and(&z)
                .and(&h)
                .and(&c)
                .for_each(|n, &zi, &hi, &ci| *n = (1.0 - zi) * hi + zi * ci);
            trace.inputs.push(x.clone());
            trace.enc_pre.push(a);
            trace.enc.push(e);
            trace.h_prev.push(h);
            trace.z.push(z);
            trace.r.push(r);
            trace.cand.push(c);
            h = next;
        }
        trace.out_pre = self.w_d.dot(&h) + &self.b_d;
        trace.output = trace.out_pre.mapv(relu);
        trace.h_last = h;
        trace
    }

    /// Squared error of a trace against `target`, averaged over entries.
    pub fn loss(trace: &Trace, target: &Array1<f64>) -> f64 {
        let d = target.len() as f64;
        trace
            .output
            .iter()
            .zip(target)
            .map(|(y, t)| (y - t) * (y - t))
            .sum::<f64>()
            / d
    }

    /// Adds the gradient of [`Weights::loss`] into `grad`.
    pub fn backward(&self, trace: &Trace, target: &Array1<f64>, grad: &mut Weights) {
        let d = target.len() as f64;
        let mut d_out = Array1::zeros(target.len());
        Zip::from(&mut d_out)
            .and(&trace.output)
            .and(target)
            .and(&trace.out_pre)
            .for_each(|g, &y, &t, &o| *g = if o > 0.0 { 2.0 * (y - t) / d } else { 0.0 });
        add_outer(&mut grad.w_d, &d_out, trace.h_last.view());
        grad.b_d += &d_out;
        let mut dh = self.w_d.t().dot(&d_out);

        for t in (0..trace.inputs.len()).rev() {
            let (z, r, c, h) = (&trace.z[t], &trace.r[t], &trace.cand[t], &trace.h_prev[t]);
            let e = &trace.enc[t];
            // h' = (1 − z)·h + z·c
            let d_cand_pre = Zip::from(&dh).and(z).and(c).map_collect(|&g, &zi, &ci| g * zi * (1.0 - ci * ci));
            let d_z_pre = Zip::from(&dh)
                .and(z)
                .and(c)
                .and(h)
                .map_collect(|&g, &zi, &ci, &hi| g * (ci - hi) * zi * (1.0 - zi));
            let mut dh_prev = Zip::from(&dh).and(z).map_collect(|&g, &zi| g * (1.0 - zi));

            let rh = r * h;
            add_outer(&mut grad.w_h, &d_cand_pre, e.view());
            add_outer(&mut grad.u_h, &d_cand_pre, rh.view());
            grad.b_h += &d_cand_pre;
            let d_rh = self.u_h.t().dot(&d_cand_pre);
            dh_prev += &(&d_rh * r);
            let d_r_pre = Zip::from(&d_rh).and(h).and(r).map_collect(|&g, &hi, &ri| g * hi * ri * (1.0 - ri));

            add_outer(&mut grad.w_z, &d_z_pre, e.view());
            add_outer(&mut grad.u_z, &d_z_pre, h.view());
            grad.b_z += &d_z_pre;
            dh_prev += &self.u_z.t().dot(&d_z_pre);

            add_outer(&mut grad.w_r, &d_r_pre, e.view());
            add_outer(&mut grad.u_r, &d_r_pre, h.view());
            grad.b_r += &d_r_pre;
            dh_prev += &self.u_r.t().dot(&d_r_pre);

            let de = self.w_z.t().dot(&d_z_pre) + self.w_r.t().dot(&d_r_pre) + self.w_h.t().dot(&d_cand_pre);
            let d_enc_pre = Zip::from(&de)
                .and(&trace.enc_pre[t])
                .map_collect(|&g, &a| if a > 0.0 { g } else { 0.0 });
            add_outer(&mut grad.w_e, &d_enc_pre, trace.inputs[t].view());
            grad.b_e += &d_enc_pre;
            dh = dh_prev;
        }
    }
}
