//! Neural building blocks expressed as tape operations: a standard LSTM
//! cell, the cosine time encoder, and small MLP helpers.

use crate::tape::{Tape, Var};

/// Affine map `W x + b` for a rank-1 input.
pub fn linear(tape: &Tape, w: Var, x: Var, b: Var) -> Var {
    tape.add(tape.matmul(w, x), b)
}

/// Two-layer perceptron on a rank-1 input: tanh hidden layer, linear output.
/// With all-zero weights the output equals the output bias.
pub fn mlp2(tape: &Tape, x: Var, w1: Var, b1: Var, w2: Var, b2: Var) -> Var {
    let hidden = tape.tanh(linear(tape, w1, x, b1));
    linear(tape, w2, hidden, b2)
}

/// Parameter bindings for one LSTM cell of width `d`:
/// `w_x`, `w_h` are `[4d, d]`, `b` is `[4d]`, gate order i, f, g, o.
#[derive(Clone, Copy)]
pub struct LstmVars {
    pub w_x: Var,
    pub w_h: Var,
    pub b: Var,
}

/// Standard LSTM recurrence. Returns `(h, c_out)`.
///
/// Gates: `i = sigma(..)`, `f = sigma(..)`, candidate `g = tanh(..)`,
/// `o = sigma(..)`; `c_out = f * c_in + i * g`; `h = o * tanh(c_out)`.
pub fn lstm_cell(tape: &Tape, x: Var, h_prev: Var, c_in: Var, p: &LstmVars) -> (Var, Var) {
    let d = tape.shape(x)[0];
    assert_eq!(
        tape.shape(h_prev),
        vec![d],
        "lstm_cell: h_prev has shape {:?}, expected [{d}]",
        tape.shape(h_prev)
    );
    assert_eq!(
        tape.shape(c_in),
        vec![d],
        "lstm_cell: c_in has shape {:?}, expected [{d}]",
        tape.shape(c_in)
    );
    let pre = tape.add(
        tape.add(tape.matmul(p.w_x, x), tape.matmul(p.w_h, h_prev)),
        p.b,
    );
    let i = tape.sigmoid(tape.slice_vec(pre, 0, d));
    let f = tape.sigmoid(tape.slice_vec(pre, d, d));
    let g = tape.tanh(tape.slice_vec(pre, 2 * d, d));
    let o = tape.sigmoid(tape.slice_vec(pre, 3 * d, d));
    let c_out = tape.add(tape.mul(f, c_in), tape.mul(i, g));
    let h = tape.mul(o, tape.tanh(c_out));
    (h, c_out)
}

/// Cosine time encoding `cos(delta_t * omega + b)` with learnable
/// frequencies and phases. Every output element lies in `[-1, 1]`.
///
/// Panics on a negative `delta_t`: elapsed time can never be negative, so
/// a negative value signals a time-travel bug upstream.
pub fn time_encode(tape: &Tape, delta_t: f64, omega: Var, b: Var) -> Var {
    assert!(
        delta_t >= 0.0,
        "time_encode: negative delta_t {delta_t} (time-travel bug upstream)"
    );
    tape.cos(tape.add(tape.scale(omega, delta_t), b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn sigma(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    #[test]
    fn lstm_all_zero_params_and_inputs_give_zero_state() {
        let tape = Tape::new();
        let d = 3;
        let p = LstmVars {
            w_x: tape.constant(Tensor::zeros(&[4 * d, d])),
            w_h: tape.constant(Tensor::zeros(&[4 * d, d])),
            b: tape.constant(Tensor::zeros(&[4 * d])),
        };
        let zero = tape.constant(Tensor::zeros(&[d]));
        let (h, c) = lstm_cell(&tape, zero, zero, zero, &p);
        assert_eq!(tape.value(h).data(), &[0.0; 3]);
        assert_eq!(tape.value(c).data(), &[0.0; 3]);
    }

    #[test]
    fn lstm_matches_hand_unrolled_gates() {
        // d = 2, diagonal-ish weights chosen so every gate differs.
        let tape = Tape::new();
        let d = 2;
        let w_x_data: Vec<f64> = (0..4 * d * d).map(|i| 0.1 * (i as f64) - 0.5).collect();
        let w_h_data: Vec<f64> = (0..4 * d * d).map(|i| 0.05 * (i as f64) - 0.2).collect();
        let b_data: Vec<f64> = (0..4 * d).map(|i| 0.01 * i as f64).collect();
        let x_data = [0.3, -0.7];
        let h_data = [0.2, 0.5];
        let c_data = [-0.4, 0.9];

        let p = LstmVars {
            w_x: tape.constant(Tensor::matrix(4 * d, d, w_x_data.clone())),
            w_h: tape.constant(Tensor::matrix(4 * d, d, w_h_data.clone())),
            b: tape.constant(Tensor::vector(b_data.clone())),
        };
        let x = tape.constant(Tensor::vector(x_data.to_vec()));
        let h_prev = tape.constant(Tensor::vector(h_data.to_vec()));
        let c_in = tape.constant(Tensor::vector(c_data.to_vec()));
        let (h, c_out) = lstm_cell(&tape, x, h_prev, c_in, &p);

        // Hand-unrolled gate arithmetic.
        let mut pre = [0.0; 8];
        for (r, pre_r) in pre.iter_mut().enumerate() {
            for k in 0..d {
                *pre_r += w_x_data[r * d + k] * x_data[k] + w_h_data[r * d + k] * h_data[k];
            }
            *pre_r += b_data[r];
        }
        for j in 0..d {
            let i_g = sigma(pre[j]);
            let f_g = sigma(pre[d + j]);
            let g_g = pre[2 * d + j].tanh();
            let o_g = sigma(pre[3 * d + j]);
            let c_j = f_g * c_data[j] + i_g * g_g;
            let h_j = o_g * c_j.tanh();
            assert!((tape.value(c_out).data()[j] - c_j).abs() < 1e-14);
            assert!((tape.value(h).data()[j] - h_j).abs() < 1e-14);
        }
    }

    #[test]
    fn time_encode_zero_delta_zero_phase_is_all_ones() {
        let tape = Tape::new();
        let omega = tape.constant(Tensor::vector(vec![0.3, 1.7, -2.2]));
        let b = tape.constant(Tensor::zeros(&[3]));
        let phi = time_encode(&tape, 0.0, omega, b);
        assert_eq!(tape.value(phi).data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn time_encode_stays_in_unit_range() {
        let tape = Tape::new();
        let omega = tape.constant(Tensor::vector(vec![0.11, -3.3, 17.0, 0.0]));
        let b = tape.constant(Tensor::vector(vec![0.5, -0.25, 2.0, 9.0]));
        for dt in [0.0, 0.37, 5.5, 123.0] {
            let phi = time_encode(&tape, dt, omega, b);
            assert!(tape.value(phi).data().iter().all(|&v| (-1.0..=1.0).contains(&v)));
        }
    }

    #[test]
    #[should_panic(expected = "time-travel")]
    fn time_encode_rejects_negative_delta() {
        let tape = Tape::new();
        let omega = tape.constant(Tensor::zeros(&[2]));
        let b = tape.constant(Tensor::zeros(&[2]));
        let _ = time_encode(&tape, -1.0, omega, b);
    }

    #[test]
    fn mlp2_zero_weights_yield_output_bias() {
        let tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![4.0, -2.0]));
        let w1 = tape.constant(Tensor::zeros(&[3, 2]));
        let b1 = tape.constant(Tensor::zeros(&[3]));
        let w2 = tape.constant(Tensor::zeros(&[2, 3]));
        let b2 = tape.constant(Tensor::vector(vec![0.7, -0.9]));
        let y = mlp2(&tape, x, w1, b1, w2, b2);
        assert_eq!(tape.value(y).data(), &[0.7, -0.9]);
    }
}
