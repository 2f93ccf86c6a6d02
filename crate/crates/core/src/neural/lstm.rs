//! Single LSTM layer: forward recurrence and exact BPTT.
//!
//! Gate pre-activations are stacked in rows of 4H in the fixed order
//! [input, forget, candidate, output]. The recurrence is the standard one:
//! i, f, o are sigmoids of affine maps of (x_t, h_{t-1}), g is a tanh,
//! c_t = f ⊙ c_{t-1} + i ⊙ g, h_t = o ⊙ tanh(c_t).

/// Weights of one LSTM layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub input_size: usize,
    pub hidden_size: usize,
    /// 4H x input_size, row-major.
    pub w_input: Vec<f64>,
    /// 4H x H, row-major.
    pub w_recurrent: Vec<f64>,
    /// 4H.
    pub bias: Vec<f64>,
}

impl LstmLayer {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        LstmLayer {
            input_size,
            hidden_size,
            w_input: vec![0.0; 4 * hidden_size * input_size],
            w_recurrent: vec![0.0; 4 * hidden_size * hidden_size],
            bias: vec![0.0; 4 * hidden_size],
        }
    }
}

/// Post-activation state of one layer over a whole sequence, kept for BPTT.
/// All arrays are T x H, row-major; layer inputs are T x D.
#[derive(Debug, Clone)]
pub struct LayerCache {
    pub inputs: Vec<f64>,
    pub gate_i: Vec<f64>,
    pub gate_f: Vec<f64>,
    pub gate_g: Vec<f64>,
    pub gate_o: Vec<f64>,
    pub cell: Vec<f64>,
    pub tanh_cell: Vec<f64>,
    pub hidden: Vec<f64>,
    pub steps: usize,
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Runs the layer over `steps` timesteps of `input` (steps x D, row-major)
/// starting from zero state, returning the full cache.
pub(crate) fn layer_forward(layer: &LstmLayer, input: &[f64], steps: usize) -> LayerCache {
    let h = layer.hidden_size;
    let d = layer.input_size;
    debug_assert_eq!(input.len(), steps * d);

    let mut cache = LayerCache {
        inputs: input.to_vec(),
        gate_i: vec![0.0; steps * h],
        gate_f: vec![0.0; steps * h],
        gate_g: vec![0.0; steps * h],
        gate_o: vec![0.0; steps * h],
        cell: vec![0.0; steps * h],
        tanh_cell: vec![0.0; steps * h],
        hidden: vec![0.0; steps * h],
        steps,
    };

    let mut pre = vec![0.0; 4 * h];
    for t in 0..steps {
        let x = &input[t * d..(t + 1) * d];
        let h_prev_row = if t == 0 { None } else { Some(&cache.hidden[(t - 1) * h..t * h]) };

        for r in 0..4 * h {
            let mut acc = layer.bias[r];
            let wi = &layer.w_input[r * d..(r + 1) * d];
            for (w, xv) in wi.iter().zip(x) {
                acc += w * xv;
            }
            if let Some(h_prev) = h_prev_row {
                let wr = &layer.w_recurrent[r * h..(r + 1) * h];
                for (w, hv) in wr.iter().zip(h_prev) {
                    acc += w * hv;
                }
            }
            pre[r] = acc;
        }

        let row = t * h;
        for j in 0..h {
            let i_g = sigmoid(pre[j]);
            let f_g = sigmoid(pre[h + j]);
            let g_g = pre[2 * h + j].tanh();
            let o_g = sigmoid(pre[3 * h + j]);
            let c_prev = if t == 0 { 0.0 } else { cache.cell[row - h + j] };
            let c = f_g * c_prev + i_g * g_g;
            let tc = c.tanh();
            cache.gate_i[row + j] = i_g;
            cache.gate_f[row + j] = f_g;
            cache.gate_g[row + j] = g_g;
            cache.gate_o[row + j] = o_g;
            cache.cell[row + j] = c;
            cache.tanh_cell[row + j] = tc;
            cache.hidden[row + j] = o_g * tc;
        }
    }
    cache
}

/// BPTT through one layer. `d_hidden` is the loss gradient on this layer's
/// hidden outputs (steps x H); gradients accumulate into `grad` and the
/// gradient with respect to the layer inputs (steps x D) is returned.
pub(crate) fn layer_backward(
    layer: &LstmLayer,
    cache: &LayerCache,
    d_hidden: &[f64],
    grad: &mut LstmLayer,
) -> Vec<f64> {
    let h = layer.hidden_size;
    let d = layer.input_size;
    let steps = cache.steps;
    debug_assert_eq!(d_hidden.len(), steps * h);

    let mut d_input = vec![0.0; steps * d];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut d_pre = vec![0.0; 4 * h];

    for t in (0..steps).rev() {
        let row = t * h;
        for j in 0..h {
            let dh = d_hidden[row + j] + dh_next[j];
            let o_g = cache.gate_o[row + j];
            let tc = cache.tanh_cell[row + j];
            let dc = dh * o_g * (1.0 - tc * tc) + dc_next[j];

            let i_g = cache.gate_i[row + j];
            let f_g = cache.gate_f[row + j];
            let g_g = cache.gate_g[row + j];
            let c_prev = if t == 0 { 0.0 } else { cache.cell[row - h + j] };

            d_pre[j] = dc * g_g * i_g * (1.0 - i_g);
            d_pre[h + j] = dc * c_prev * f_g * (1.0 - f_g);
            d_pre[2 * h + j] = dc * i_g * (1.0 - g_g * g_g);
            d_pre[3 * h + j] = dh * tc * o_g * (1.0 - o_g);

            dc_next[j] = dc * f_g;
        }

        let x = &cache.inputs[t * d..(t + 1) * d];
        let h_prev_row = if t == 0 { None } else { Some(&cache.hidden[row - h..row]) };
        for r in 0..4 * h {
            let dp = d_pre[r];
            if dp == 0.0 {
                continue;
            }
            grad.bias[r] += dp;
            let gw = &mut grad.w_input[r * d..(r + 1) * d];
            for (g, xv) in gw.iter_mut().zip(x) {
                *g += dp * xv;
            }
            if let Some(h_prev) = h_prev_row {
                let gr = &mut grad.w_recurrent[r * h..(r + 1) * h];
                for (g, hv) in gr.iter_mut().zip(h_prev) {
                    *g += dp * hv;
                }
            }
        }

        // dh_next = W_rec^T d_pre; d_input[t] = W_in^T d_pre.
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        let dx = &mut d_input[t * d..(t + 1) * d];
        for r in 0..4 * h {
            let dp = d_pre[r];
            if dp == 0.0 {
                continue;
            }
            let wr = &layer.w_recurrent[r * h..(r + 1) * h];
            for (acc, w) in dh_next.iter_mut().zip(wr) {
                *acc += w * dp;
            }
            let wi = &layer.w_input[r * d..(r + 1) * d];
            for (acc, w) in dx.iter_mut().zip(wi) {
                *acc += w * dp;
            }
        }
    }
    d_input
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_keep_hidden_at_zero() {
        // Gates sit at 0.5 but the candidate is tanh(0) = 0, so the cell and
        // hidden state never move.
        let layer = LstmLayer::zeros(1, 4);
        let cache = layer_forward(&layer, &[0.3, -0.7, 1.1], 3);
        assert!(cache.hidden.iter().all(|&v| v == 0.0));
        assert!(cache.gate_i.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn output_shape_matches_hidden_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut layer = LstmLayer::zeros(1, 4);
        for w in layer.w_input.iter_mut().chain(&mut layer.w_recurrent) {
            *w = rng.random_range(-0.5..0.5);
        }
        let cache = layer_forward(&layer, &[0.1, 0.2, 0.3, 0.4, 0.5], 5);
        assert_eq!(cache.hidden.len(), 5 * 4);
    }

    /// Independent scalar recurrence, written without any shared indexing
    /// helpers, used as the oracle for a 2-unit layer.
    fn scalar_oracle(layer: &LstmLayer, xs: &[f64]) -> Vec<[f64; 2]> {
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let mut h = [0.0f64; 2];
        let mut c = [0.0f64; 2];
        let mut out = Vec::new();
        for &x in xs {
            let mut nh = [0.0f64; 2];
            let mut nc = [0.0f64; 2];
            for j in 0..2 {
                let pre = |gate: usize| {
                    layer.bias[gate * 2 + j]
                        + layer.w_input[gate * 2 + j] * x
                        + layer.w_recurrent[(gate * 2 + j) * 2] * h[0]
                        + layer.w_recurrent[(gate * 2 + j) * 2 + 1] * h[1]
                };
                let i_g = sig(pre(0));
                let f_g = sig(pre(1));
                let g_g = pre(2).tanh();
                let o_g = sig(pre(3));
                nc[j] = f_g * c[j] + i_g * g_g;
                nh[j] = o_g * nc[j].tanh();
            }
            h = nh;
            c = nc;
            out.push(h);
        }
        out
    }

    #[test]
    fn matches_scalar_recurrence_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut layer = LstmLayer::zeros(1, 2);
        for w in layer
            .w_input
            .iter_mut()
            .chain(&mut layer.w_recurrent)
            .chain(&mut layer.bias)
        {
            *w = rng.random_range(-1.0..1.0);
        }
        let xs = [0.4, -1.2, 0.9];
        let cache = layer_forward(&layer, &xs, 3);
        let oracle = scalar_oracle(&layer, &xs);
        for t in 0..3 {
            for j in 0..2 {
                let got = cache.hidden[t * 2 + j];
                let want = oracle[t][j];
                assert!(
                    (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                    "t={t} j={j}: {got} vs {want}"
                );
            }
        }
    }
}
