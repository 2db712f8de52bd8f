//! Channel-major 1D signal primitives and their adjoints.
//!
//! A feature map with `c` channels of length `len` is stored as a flat slice
//! where sample `t` of channel `ch` lives at `ch * len + t`.

pub(crate) const LEAKY_SLOPE: f64 = 0.3;

/// Same-padded cross-correlation. `w` is laid out `[c_out][c_in][k]`.
pub(crate) fn conv_forward(
    x: &[f64],
    c_in: usize,
    len: usize,
    w: &[f64],
    b: &[f64],
    c_out: usize,
    k: usize,
) -> Vec<f64> {
    debug_assert_eq!(x.len(), c_in * len);
    debug_assert_eq!(w.len(), c_out * c_in * k);
    let pad = (k / 2) as isize;
    let mut y = vec![0.0; c_out * len];
    for o in 0..c_out {
        let out = &mut y[o * len..(o + 1) * len];
        out.fill(b[o]);
        for c in 0..c_in {
            let xc = &x[c * len..(c + 1) * len];
            let wk = &w[(o * c_in + c) * k..(o * c_in + c + 1) * k];
            for (j, &wv) in wk.iter().enumerate() {
                let shift = j as isize - pad;
                let Some((t0, t1)) = valid_range(len, shift) else {
                    continue;
                };
                let src = &xc[(t0 as isize + shift) as usize..(t1 as isize + shift) as usize];
                for (o_t, &x_t) in out[t0..t1].iter_mut().zip(src) {
                    *o_t += wv * x_t;
                }
            }
        }
    }
    y
}

/// Accumulates weight and bias gradients and returns the input gradient
/// (skipped when `need_dx` is false).
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_backward(
    x: &[f64],
    c_in: usize,
    len: usize,
    w: &[f64],
    c_out: usize,
    k: usize,
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    need_dx: bool,
) -> Option<Vec<f64>> {
    let pad = (k / 2) as isize;
    let mut dx = need_dx.then(|| vec![0.0; c_in * len]);
    for o in 0..c_out {
        let g = &dy[o * len..(o + 1) * len];
        db[o] += g.iter().sum::<f64>();
        for c in 0..c_in {
            let xc = &x[c * len..(c + 1) * len];
            let base = (o * c_in + c) * k;
            for j in 0..k {
                let shift = j as isize - pad;
                let Some((t0, t1)) = valid_range(len, shift) else {
                    continue;
                };
                let s0 = (t0 as isize + shift) as usize;
                let s1 = (t1 as isize + shift) as usize;
                let acc: f64 = g[t0..t1].iter().zip(&xc[s0..s1]).map(|(a, b)| a * b).sum();
                dw[base + j] += acc;
                if let Some(dx) = dx.as_mut() {
                    let wv = w[base + j];
                    for (d, &gt) in dx[c * len + s0..c * len + s1].iter_mut().zip(&g[t0..t1]) {
                        *d += wv * gt;
                    }
                }
            }
        }
    }
    dx
}

/// Output positions `t` for which `t + shift` indexes into `0..len`.
#[inline]
fn valid_range(len: usize, shift: isize) -> Option<(usize, usize)> {
    let t0 = (-shift).max(0) as usize;
    let t1 = (len as isize - shift).clamp(0, len as isize) as usize;
    (t0 < t1).then_some((t0, t1))
}

pub(crate) fn leaky_relu(z: &[f64]) -> Vec<f64> {
    z.iter()
        .map(|&v| if v > 0.0 { v } else { LEAKY_SLOPE * v })
        .collect()
}

/// Multiplies `grad` in place by the LeakyReLU derivative at `z`.
pub(crate) fn leaky_relu_backward(z: &[f64], grad: &mut [f64]) {
    for (g, &v) in grad.iter_mut().zip(z) {
        if v <= 0.0 {
            *g *= LEAKY_SLOPE;
        }
    }
}

/// Keeps even-indexed samples of every channel.
pub(crate) fn decimate(x: &[f64], channels: usize, len: usize) -> Vec<f64> {
    let half = len / 2;
    let mut y = Vec::with_capacity(channels * half);
    for c in 0..channels {
        y.extend(x[c * len..(c + 1) * len].iter().step_by(2).take(half));
    }
    y
}

pub(crate) fn decimate_backward(dy: &[f64], channels: usize, len: usize) -> Vec<f64> {
    let half = len / 2;
    let mut dx = vec![0.0; channels * len];
    for c in 0..channels {
        for i in 0..half {
            dx[c * len + 2 * i] = dy[c * half + i];
        }
    }
    dx
}

/// Doubles the length by linear interpolation; the last sample is held.
pub(crate) fn upsample(x: &[f64], channels: usize, len: usize) -> Vec<f64> {
    let mut y = vec![0.0; channels * len * 2];
    for c in 0..channels {
        let xc = &x[c * len..(c + 1) * len];
        let yc = &mut y[c * 2 * len..(c + 1) * 2 * len];
        for i in 0..len {
            let next = xc[(i + 1).min(len - 1)];
            yc[2 * i] = xc[i];
            yc[2 * i + 1] = 0.5 * (xc[i] + next);
        }
    }
    y
}

pub(crate) fn upsample_backward(dy: &[f64], channels: usize, len: usize) -> Vec<f64> {
    let mut dx = vec![0.0; channels * len];
    for c in 0..channels {
        let g = &dy[c * 2 * len..(c + 1) * 2 * len];
        let d = &mut dx[c * len..(c + 1) * len];
        for i in 0..len {
            d[i] += g[2 * i] + 0.5 * g[2 * i + 1];
            d[(i + 1).min(len - 1)] += 0.5 * g[2 * i + 1];
        }
    }
    dx
}
