//! Single-layer LSTM with cached forward tapes and exact backpropagation
//! through time. Gate order in the stacked weights is input, forget, cell,
//! output; each step reads `u = [x; h_prev]`.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    /// `4H × (I + H)`
    pub w: Array2<f64>,
    /// `4H`; the forget block starts at 1.
    pub b: Array1<f64>,
}

impl LstmParams {
    pub fn new<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (input + 2 * hidden) as f64).sqrt();
        let w = Array2::from_shape_fn((4 * hidden, input + hidden), |_| rng.gen_range(-bound..bound));
        let mut b = Array1::zeros(4 * hidden);
        b.slice_mut(s![hidden..2 * hidden]).fill(1.0);
        LstmParams { w, b }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            w: Array2::zeros((4 * hidden, input + hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.b.len() / 4
    }

    pub fn input(&self) -> usize {
        self.w.ncols() - self.hidden()
    }
}

/// Activations needed by [`backward`]: step inputs, post-activation gates
/// and cell states (row 0 of `c` is the zero initial state).
pub(crate) struct Tape {
    u: Array2<f64>,
    gates: Array2<f64>,
    c: Array2<f64>,
}

/// Runs the cell from zero state over the rows of `xs`, returning every
/// hidden state (`T × H`).
pub(crate) fn forward(p: &LstmParams, xs: ArrayView2<f64>) -> (Array2<f64>, Tape) {
    let (t_len, n_in) = xs.dim();
    let h = p.hidden();
    let mut u = Array2::zeros((t_len, n_in + h));
    let mut gates = Array2::zeros((t_len, 4 * h));
    let mut c = Array2::<f64>::zeros((t_len + 1, h));
    let mut hs = Array2::zeros((t_len, h));
    for t in 0..t_len {
        u.slice_mut(s![t, ..n_in]).assign(&xs.row(t));
        if t > 0 {
            let prev = hs.row(t - 1).to_owned();
            u.slice_mut(s![t, n_in..]).assign(&prev);
        }
        let a = p.w.dot(&u.row(t)) + &p.b;
        for k in 0..h {
            let (i, f, g, o) = (sigmoid(a[k]), sigmoid(a[h + k]), a[2 * h + k].tanh(), sigmoid(a[3 * h + k]));
            gates[[t, k]] = i;
            gates[[t, h + k]] = f;
            gates[[t, 2 * h + k]] = g;
            gates[[t, 3 * h + k]] = o;
            let ct: f64 = f * c[[t, k]] + i * g;
            c[[t + 1, k]] = ct;
            hs[[t, k]] = o * ct.tanh();
        }
    }
    (hs, Tape { u, gates, c })
}

/// Backpropagates `dhs` (loss gradient w.r.t. each hidden state) through the
/// tape, accumulating into `grad` and returning the input gradients.
pub(crate) fn backward(p: &LstmParams, tape: &Tape, dhs: ArrayView2<f64>, grad: &mut LstmParams) -> Array2<f64> {
    let t_len = dhs.nrows();
    let h = p.hidden();
    let n_in = p.input();
    let mut da = Array2::zeros((t_len, 4 * h));
    let mut dxs = Array2::zeros((t_len, n_in));
    let mut dh_next = Array1::<f64>::zeros(h);
    let mut dc_next = Array1::<f64>::zeros(h);
    for t in (0..t_len).rev() {
        for k in 0..h {
            let (i, f, g, o) = (
                tape.gates[[t, k]],
                tape.gates[[t, h + k]],
                tape.gates[[t, 2 * h + k]],
                tape.gates[[t, 3 * h + k]],
            );
            let tc = tape.c[[t + 1, k]].tanh();
            let dh = dhs[[t, k]] + dh_next[k];
            let dc = dc_next[k] + dh * o * (1.0 - tc * tc);
            da[[t, k]] = dc * g * i * (1.0 - i);
            da[[t, h + k]] = dc * tape.c[[t, k]] * f * (1.0 - f);
            da[[t, 2 * h + k]] = dc * i * (1.0 - g * g);
            da[[t, 3 * h + k]] = dh * tc * o * (1.0 - o);
            dc_next[k] = dc * f;
        }
        let du = p.w.t().dot(&da.row(t));
        dxs.row_mut(t).assign(&du.slice(s![..n_in]));
        dh_next.assign(&du.slice(s![n_in..]));
    }
    general_mat_mul(1.0, &da.t(), &tape.u, 1.0, &mut grad.w);
    grad.b += &da.sum_axis(Axis(0));
    dxs
}

/// Final hidden states for a padded batch (`B × T × I` as one `B·T × I`
/// matrix, row `b·T + t`). Rows at or past a sequence's length leave its
/// state untouched; `reverse` consumes each sequence from its last real
/// token backwards.
pub(crate) fn forward_masked_final(
    p: &LstmParams,
    xs: ArrayView2<f64>,
    lengths: &[usize],
    max_len: usize,
    reverse: bool,
) -> Array2<f64> {
    let b_len = lengths.len();
    let h = p.hidden();
    let n_in = p.input();
    let mut hs = Array2::<f64>::zeros((b_len, h));
    let mut cs = Array2::<f64>::zeros((b_len, h));
    let mut u = Array2::<f64>::zeros((b_len, n_in + h));
    let mut a = Array2::<f64>::zeros((b_len, 4 * h));
    let order: Vec<usize> = if reverse {
        (0..max_len).rev().collect()
    } else {
        (0..max_len).collect()
    };
    for t in order {
        for b in 0..b_len {
            u.slice_mut(s![b, ..n_in]).assign(&xs.row(b * max_len + t));
        }
        u.slice_mut(s![.., n_in..]).assign(&hs);
        general_mat_mul(1.0, &u, &p.w.t(), 0.0, &mut a);
        for b in 0..b_len {
            if t >= lengths[b] {
                continue;
            }
            for k in 0..h {
                let (i, f, g, o) = (
                    sigmoid(a[[b, k]] + p.b[k]),
                    sigmoid(a[[b, h + k]] + p.b[h + k]),
                    (a[[b, 2 * h + k]] + p.b[2 * h + k]).tanh(),
                    sigmoid(a[[b, 3 * h + k]] + p.b[3 * h + k]),
                );
                let ct = f * cs[[b, k]] + i * g;
                cs[[b, k]] = ct;
                hs[[b, k]] = o * ct.tanh();
            }
        }
    }
    hs
}
