//! LSTM cell and one-direction sequence passes with backpropagation through time.

use super::BiLstmError;

/// Parameters of one LSTM direction. Gate blocks are stacked in the order
/// forget, input, candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub d_in: usize,
    pub hidden: usize,
    /// `4H × d_in`, row-major.
    pub w: Vec<f64>,
    /// `4H × H`, row-major.
    pub u: Vec<f64>,
    /// `4H`.
    pub b: Vec<f64>,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl LstmParams {
    pub fn zeros(d_in: usize, hidden: usize) -> Self {
        LstmParams {
            d_in,
            hidden,
            w: vec![0.0; 4 * hidden * d_in],
            u: vec![0.0; 4 * hidden * hidden],
            b: vec![0.0; 4 * hidden],
        }
    }

    /// Pre-activations `W x + U h + b`.
    fn preact(&self, x: &[f64], h: &[f64], z: &mut [f64]) {
        let (d, hd) = (self.d_in, self.hidden);
        for r in 0..4 * hd {
            let wr = &self.w[r * d..(r + 1) * d];
            let ur = &self.u[r * hd..(r + 1) * hd];
            let mut s = self.b[r];
            for j in 0..d {
                s += wr[j] * x[j];
            }
            for j in 0..hd {
                s += ur[j] * h[j];
            }
            z[r] = s;
        }
    }
}

/// One step: returns `(h_t, c_t)`.
pub fn lstm_cell(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    p: &LstmParams,
) -> Result<(Vec<f64>, Vec<f64>), BiLstmError> {
    let hd = p.hidden;
    if x.len() != p.d_in || h_prev.len() != hd || c_prev.len() != hd {
        return Err(BiLstmError::ShapeMismatch(format!(
            "cell expects x:{} h:{hd} c:{hd}, got x:{} h:{} c:{}",
            p.d_in,
            x.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    let mut z = vec![0.0; 4 * hd];
    p.preact(x, h_prev, &mut z);
    let mut h = vec![0.0; hd];
    let mut c = vec![0.0; hd];
    for j in 0..hd {
        let f = sigmoid(z[j]);
        let i = sigmoid(z[hd + j]);
        let g = z[2 * hd + j].tanh();
        let o = sigmoid(z[3 * hd + j]);
        c[j] = f * c_prev[j] + i * g;
        h[j] = o * c[j].tanh();
    }
    Ok((h, c))
}

/// Activations of a pass over a sequence, indexed by processing step.
#[derive(Debug, Clone)]
pub(crate) struct DirectionCache {
    pub steps: usize,
    pub reverse: bool,
    /// `(steps + 1) × H`; row 0 is the zero initial state.
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    /// `steps × 4H` gate activations (f, i, g, o).
    pub gates: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

impl DirectionCache {
    /// Hidden state that belongs to original time index `t`.
    pub fn h_at(&self, t: usize, hidden: usize) -> &[f64] {
        let s = if self.reverse { self.steps - 1 - t } else { t };
        &self.h[(s + 1) * hidden..(s + 2) * hidden]
    }
}

/// Run one direction over `xs` (`steps × d_in`).
pub(crate) fn run_direction(p: &LstmParams, xs: &[f64], steps: usize, reverse: bool) -> DirectionCache {
    let (d, hd) = (p.d_in, p.hidden);
    let mut cache = DirectionCache {
        steps,
        reverse,
        h: vec![0.0; (steps + 1) * hd],
        c: vec![0.0; (steps + 1) * hd],
        gates: vec![0.0; steps * 4 * hd],
        tanh_c: vec![0.0; steps * hd],
    };
    let mut z = vec![0.0; 4 * hd];
    for s in 0..steps {
        let t = if reverse { steps - 1 - s } else { s };
        let x = &xs[t * d..(t + 1) * d];
        let (h_prev, rest) = cache.h.split_at_mut((s + 1) * hd);
        let h_prev = &h_prev[s * hd..];
        p.preact(x, h_prev, &mut z);
        let (c_prev, c_rest) = cache.c.split_at_mut((s + 1) * hd);
        let c_prev = &c_prev[s * hd..];
        let gates = &mut cache.gates[s * 4 * hd..(s + 1) * 4 * hd];
        for j in 0..hd {
            let f = sigmoid(z[j]);
            let i = sigmoid(z[hd + j]);
            let g = z[2 * hd + j].tanh();
            let o = sigmoid(z[3 * hd + j]);
            gates[j] = f;
            gates[hd + j] = i;
            gates[2 * hd + j] = g;
            gates[3 * hd + j] = o;
            let c = f * c_prev[j] + i * g;
            let tc = c.tanh();
            c_rest[j] = c;
            cache.tanh_c[s * hd + j] = tc;
            rest[j] = o * tc;
        }
    }
    cache
}

/// Accumulate parameter gradients into `grads` and input gradients into `dx`
/// given `dh` (`steps × H`, by original time) flowing into the hidden outputs.
pub(crate) fn backprop_direction(
    p: &LstmParams,
    cache: &DirectionCache,
    xs: &[f64],
    dh: &[f64],
    grads: &mut LstmParams,
    dx: &mut [f64],
) {
    let (d, hd) = (p.d_in, p.hidden);
    let steps = cache.steps;
    let mut dh_next = vec![0.0; hd];
    let mut dc_next = vec![0.0; hd];
    let mut dz = vec![0.0; 4 * hd];
    for s in (0..steps).rev() {
        let t = if cache.reverse { steps - 1 - s } else { s };
        let gates = &cache.gates[s * 4 * hd..(s + 1) * 4 * hd];
        let c_prev = &cache.c[s * hd..(s + 1) * hd];
        let h_prev = &cache.h[s * hd..(s + 1) * hd];
        for j in 0..hd {
            let (f, i, g, o) = (gates[j], gates[hd + j], gates[2 * hd + j], gates[3 * hd + j]);
            let tc = cache.tanh_c[s * hd + j];
            let dhj = dh[t * hd + j] + dh_next[j];
            let dc = dhj * o * (1.0 - tc * tc) + dc_next[j];
            dz[j] = dc * c_prev[j] * f * (1.0 - f);
            dz[hd + j] = dc * g * i * (1.0 - i);
            dz[2 * hd + j] = dc * i * (1.0 - g * g);
            dz[3 * hd + j] = dhj * tc * o * (1.0 - o);
            dc_next[j] = dc * f;
        }
        let x = &xs[t * d..(t + 1) * d];
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        let dxt = &mut dx[t * d..(t + 1) * d];
        for r in 0..4 * hd {
            let g = dz[r];
            if g == 0.0 {
                continue;
            }
            grads.b[r] += g;
            let wr = &p.w[r * d..(r + 1) * d];
            let gw = &mut grads.w[r * d..(r + 1) * d];
            for j in 0..d {
                gw[j] += g * x[j];
                dxt[j] += g * wr[j];
            }
            let ur = &p.u[r * hd..(r + 1) * hd];
            let gu = &mut grads.u[r * hd..(r + 1) * hd];
            for j in 0..hd {
                gu[j] += g * h_prev[j];
                dh_next[j] += g * ur[j];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_parameters_give_zero_state() {
        let p = LstmParams::zeros(3, 2);
        let (h, c) = lstm_cell(&[1.0, -2.0, 0.5], &[0.0; 2], &[0.0; 2], &p).unwrap();
        assert_eq!(h, vec![0.0; 2]);
        assert_eq!(c, vec![0.0; 2]);
    }

    #[test]
    fn saturated_forget_gate_keeps_memory() {
        let mut p = LstmParams::zeros(1, 2);
        p.b[0] = 50.0;
        p.b[1] = 50.0;
        let (_, c) = lstm_cell(&[0.0], &[0.0; 2], &[0.7, -0.3], &p).unwrap();
        assert!((c[0] - 0.7).abs() < 1e-12);
        assert!((c[1] + 0.3).abs() < 1e-12);
    }

    #[test]
    fn shape_is_checked() {
        let p = LstmParams::zeros(3, 2);
        assert!(lstm_cell(&[1.0], &[0.0; 2], &[0.0; 2], &p).is_err());
    }
}
