// SPDX-License-Identifier: MIT OR Apache-2.0

//! Trainable families. Parameters live in one flat vector; each family
//! knows its layout and computes forward passes and input-gradient
//! back-propagation by hand.

use rand::Rng;

/// Shape-aware view of a family's flat parameter vector.
pub trait Network {
    fn num_params(&self) -> usize;

    /// Named blocks `(name, shape)` in storage order.
    fn layout(&self) -> Vec<(&'static str, Vec<usize>)>;

    fn init<R: Rng>(&self, rng: &mut R) -> Vec<f64>;

    fn forward(&self, params: &[f64], input: &[f64]) -> f64;

    /// Adds `scale * d(output)/d(params)` into `grad`.
    fn backward(&self, params: &[f64], input: &[f64], scale: f64, grad: &mut [f64]);
}

fn uniform_fill<R: Rng>(rng: &mut R, out: &mut [f64], bound: f64) {
    for v in out {
        *v = rng.random_range(-bound..=bound);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `y = b + sum(W * x)` over the flattened window.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub inputs: usize,
}

impl Network for Linear {
    fn num_params(&self) -> usize {
        self.inputs + 1
    }

    fn layout(&self) -> Vec<(&'static str, Vec<usize>)> {
        vec![("weight", vec![self.inputs]), ("bias", vec![1])]
    }

    fn init<R: Rng>(&self, _rng: &mut R) -> Vec<f64> {
        vec![0.0; self.num_params()]
    }

    fn forward(&self, params: &[f64], input: &[f64]) -> f64 {
        params[self.inputs] + dot(&params[..self.inputs], input)
    }

    fn backward(&self, _params: &[f64], input: &[f64], scale: f64, grad: &mut [f64]) {
        for (g, x) in grad[..self.inputs].iter_mut().zip(input) {
            *g += scale * x;
        }
        grad[self.inputs] += scale;
    }
}

/// One tanh hidden layer over the flattened window, linear output.
#[derive(Debug, Clone, Copy)]
pub struct Mlp {
    pub inputs: usize,
    pub hidden: usize,
}

impl Mlp {
    // offsets: W1 [H x I], b1 [H], w2 [H], b2
    fn offsets(&self) -> (usize, usize, usize) {
        let w1 = self.hidden * self.inputs;
        (w1, w1 + self.hidden, w1 + 2 * self.hidden)
    }

    fn hidden_activations(&self, params: &[f64], input: &[f64]) -> Vec<f64> {
        let (b1, _, _) = self.offsets();
        (0..self.hidden)
            .map(|j| {
                let row = &params[j * self.inputs..(j + 1) * self.inputs];
                (params[b1 + j] + dot(row, input)).tanh()
            })
            .collect()
    }
}

impl Network for Mlp {
    fn num_params(&self) -> usize {
        self.hidden * self.inputs + 2 * self.hidden + 1
    }

    fn layout(&self) -> Vec<(&'static str, Vec<usize>)> {
        vec![
            ("hidden.weight", vec![self.hidden, self.inputs]),
            ("hidden.bias", vec![self.hidden]),
            ("output.weight", vec![self.hidden]),
            ("output.bias", vec![1]),
        ]
    }

    fn init<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut p = vec![0.0; self.num_params()];
        let (b1, w2, _) = self.offsets();
        uniform_fill(rng, &mut p[..b1], 1.0 / (self.inputs as f64).sqrt());
        uniform_fill(rng, &mut p[w2..w2 + self.hidden], 1.0 / (self.hidden as f64).sqrt());
        p
    }

    fn forward(&self, params: &[f64], input: &[f64]) -> f64 {
        let (_, w2, b2) = self.offsets();
        let h = self.hidden_activations(params, input);
        params[b2] + dot(&params[w2..w2 + self.hidden], &h)
    }

    fn backward(&self, params: &[f64], input: &[f64], scale: f64, grad: &mut [f64]) {
        let (b1, w2, b2) = self.offsets();
        let h = self.hidden_activations(params, input);
        grad[b2] += scale;
        for j in 0..self.hidden {
            grad[w2 + j] += scale * h[j];
            let da = scale * params[w2 + j] * (1.0 - h[j] * h[j]);
            grad[b1 + j] += da;
            for (g, x) in grad[j * self.inputs..(j + 1) * self.inputs].iter_mut().zip(input) {
                *g += da * x;
            }
        }
    }
}

/// Single gated recurrent cell (update and reset gates) run over the
/// window one step at a time; the final state feeds a linear output.
///
/// ```text
/// z = sigmoid(Wz x + Uz h + bz)
/// r = sigmoid(Wr x + Ur h + br)
/// n = tanh(Wn x + Un (r * h) + bn)
/// h' = (1 - z) * n + z * h
/// ```
#[derive(Debug, Clone, Copy)]
pub struct Gru {
    pub steps: usize,
    pub dims: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, Copy)]
struct GateOffsets {
    w: usize,
    u: usize,
    b: usize,
}

struct StepCache {
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
}

impl Gru {
    fn gate_size(&self) -> usize {
        self.hidden * self.dims + self.hidden * self.hidden + self.hidden
    }

    // gate order: update (z), reset (r), candidate (n)
    fn gate(&self, g: usize) -> GateOffsets {
        let base = g * self.gate_size();
        let w = base;
        let u = w + self.hidden * self.dims;
        let b = u + self.hidden * self.hidden;
        GateOffsets { w, u, b }
    }

    fn head(&self) -> usize {
        3 * self.gate_size()
    }

    fn preact(&self, params: &[f64], g: GateOffsets, x: &[f64], h: &[f64], j: usize) -> f64 {
        let (d, hd) = (self.dims, self.hidden);
        params[g.b + j]
            + dot(&params[g.w + j * d..g.w + (j + 1) * d], x)
            + dot(&params[g.u + j * hd..g.u + (j + 1) * hd], h)
    }

    fn run(&self, params: &[f64], input: &[f64]) -> (Vec<f64>, Vec<StepCache>) {
        let hd = self.hidden;
        let (gz, gr, gn) = (self.gate(0), self.gate(1), self.gate(2));
        let mut h = vec![0.0; hd];
        let mut cache = Vec::with_capacity(self.steps);
        for t in 0..self.steps {
            let x = &input[t * self.dims..(t + 1) * self.dims];
            let z: Vec<f64> = (0..hd).map(|j| sigmoid(self.preact(params, gz, x, &h, j))).collect();
            let r: Vec<f64> = (0..hd).map(|j| sigmoid(self.preact(params, gr, x, &h, j))).collect();
            let rh: Vec<f64> = r.iter().zip(&h).map(|(a, b)| a * b).collect();
            let n: Vec<f64> = (0..hd).map(|j| self.preact(params, gn, x, &rh, j).tanh()).collect();
            let next: Vec<f64> = (0..hd).map(|j| (1.0 - z[j]) * n[j] + z[j] * h[j]).collect();
            cache.push(StepCache {
                h_prev: std::mem::replace(&mut h, next),
                z,
                r,
                n,
            });
        }
        (h, cache)
    }

    fn accumulate_gate(&self, grad: &mut [f64], g: GateOffsets, da: &[f64], x: &[f64], h_in: &[f64]) {
        let (d, hd) = (self.dims, self.hidden);
        for j in 0..hd {
            if da[j] == 0.0 {
                continue;
            }
            grad[g.b + j] += da[j];
            for (gw, xv) in grad[g.w + j * d..g.w + (j + 1) * d].iter_mut().zip(x) {
                *gw += da[j] * xv;
            }
            for (gu, hv) in grad[g.u + j * hd..g.u + (j + 1) * hd].iter_mut().zip(h_in) {
                *gu += da[j] * hv;
            }
        }
    }

    /// `U^T da` for gate `g`.
    fn back_through_u(&self, params: &[f64], g: GateOffsets, da: &[f64]) -> Vec<f64> {
        let hd = self.hidden;
        let mut out = vec![0.0; hd];
        for j in 0..hd {
            let row = &params[g.u + j * hd..g.u + (j + 1) * hd];
            for (o, u) in out.iter_mut().zip(row) {
                *o += da[j] * u;
            }
        }
        out
    }
}

impl Network for Gru {
    fn num_params(&self) -> usize {
        self.head() + self.hidden + 1
    }

    fn layout(&self) -> Vec<(&'static str, Vec<usize>)> {
        let (d, hd) = (self.dims, self.hidden);
        vec![
            ("update.input_weight", vec![hd, d]),
            ("update.state_weight", vec![hd, hd]),
            ("update.bias", vec![hd]),
            ("reset.input_weight", vec![hd, d]),
            ("reset.state_weight", vec![hd, hd]),
            ("reset.bias", vec![hd]),
            ("candidate.input_weight", vec![hd, d]),
            ("candidate.state_weight", vec![hd, hd]),
            ("candidate.bias", vec![hd]),
            ("output.weight", vec![hd]),
            ("output.bias", vec![1]),
        ]
    }

    fn init<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut p = vec![0.0; self.num_params()];
        let bound = 1.0 / (self.hidden as f64).sqrt();
        for g in 0..3 {
            let o = self.gate(g);
            uniform_fill(rng, &mut p[o.w..o.b], bound);
        }
        let head = self.head();
        uniform_fill(rng, &mut p[head..head + self.hidden], bound);
        p
    }

    fn forward(&self, params: &[f64], input: &[f64]) -> f64 {
        let (h, _) = self.run(params, input);
        let head = self.head();
        params[head + self.hidden] + dot(&params[head..head + self.hidden], &h)
    }

    fn backward(&self, params: &[f64], input: &[f64], scale: f64, grad: &mut [f64]) {
        let hd = self.hidden;
        let head = self.head();
        let (h_last, cache) = self.run(params, input);
        grad[head + hd] += scale;
        for j in 0..hd {
            grad[head + j] += scale * h_last[j];
        }
        let mut dh: Vec<f64> = params[head..head + hd].iter().map(|v| v * scale).collect();
        let (gz, gr, gn) = (self.gate(0), self.gate(1), self.gate(2));

        for (t, step) in cache.iter().enumerate().rev() {
            let x = &input[t * self.dims..(t + 1) * self.dims];
            let hp = &step.h_prev;
            let mut dh_prev: Vec<f64> = (0..hd).map(|j| dh[j] * step.z[j]).collect();

            let dan: Vec<f64> = (0..hd)
                .map(|j| dh[j] * (1.0 - step.z[j]) * (1.0 - step.n[j] * step.n[j]))
                .collect();
            let daz: Vec<f64> = (0..hd)
                .map(|j| dh[j] * (hp[j] - step.n[j]) * step.z[j] * (1.0 - step.z[j]))
                .collect();

            let rh: Vec<f64> = step.r.iter().zip(hp).map(|(a, b)| a * b).collect();
            self.accumulate_gate(grad, gn, &dan, x, &rh);
            let drh = self.back_through_u(params, gn, &dan);
            let dar: Vec<f64> = (0..hd)
                .map(|j| drh[j] * hp[j] * step.r[j] * (1.0 - step.r[j]))
                .collect();
            for j in 0..hd {
                dh_prev[j] += drh[j] * step.r[j];
            }

            self.accumulate_gate(grad, gz, &daz, x, hp);
            self.accumulate_gate(grad, gr, &dar, x, hp);
            let from_z = self.back_through_u(params, gz, &daz);
            let from_r = self.back_through_u(params, gr, &dar);
            for j in 0..hd {
                dh_prev[j] += from_z[j] + from_r[j];
            }
            dh = dh_prev;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn fd_check<N: Network>(net: &N, input: &[f64]) {
        let params = net.init(&mut seed::rng(5));
        let mut grad = vec![0.0; net.num_params()];
        net.backward(&params, input, 1.0, &mut grad);
        let h = 1e-6;
        for i in 0..net.num_params() {
            let mut p = params.clone();
            p[i] += h;
            let up = net.forward(&p, input);
            p[i] -= 2.0 * h;
            let down = net.forward(&p, input);
            let fd = (up - down) / (2.0 * h);
            assert!(
                (fd - grad[i]).abs() < 1e-6 * (1.0 + fd.abs()),
                "param {i}: {fd} vs {}",
                grad[i]
            );
        }
    }

    #[test]
    fn output_gradients_match_finite_differences() {
        let input: Vec<f64> = (0..12).map(|i| ((i * 7) % 5) as f64 / 5.0 - 0.4).collect();
        fd_check(&Linear { inputs: 12 }, &input);
        fd_check(&Mlp { inputs: 12, hidden: 5 }, &input);
        fd_check(
            &Gru {
                steps: 4,
                dims: 3,
                hidden: 4,
            },
            &input,
        );
    }

    #[test]
    fn layouts_cover_all_parameters() {
        fn total<N: Network>(n: &N) -> usize {
            n.layout().iter().map(|(_, s)| s.iter().product::<usize>()).sum()
        }
        let l = Linear { inputs: 7 };
        let m = Mlp { inputs: 7, hidden: 3 };
        let g = Gru {
            steps: 5,
            dims: 2,
            hidden: 3,
        };
        assert_eq!(total(&l), l.num_params());
        assert_eq!(total(&m), m.num_params());
        assert_eq!(total(&g), g.num_params());
    }
}
