//! Convolution kernels: the log-domain FFT route, a direct log-domain route for short operands, and the quadratic baseline.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{fft_in_place, packed_real_product, transform_len};
use crate::numeric::{exp_mass, log_sum_exp, max_finite, CompensatedSum};
use crate::pmf::{check_dim, single_finite};

/// Negative real parts after the inverse transform may reach this fraction of
/// the scaled mass product before the result is rejected.
pub const CLAMP_REL_TOL: f64 = 1e-10;

/// Linear convolution of `exp(a)` and `exp(b)`, returned as log-masses.
///
/// Each input is shifted by its maximum before exponentiation and the maxima
/// are added back after the inverse transform, so inputs far below
/// `ln(f64::MIN_POSITIVE)` still produce finite outputs.
pub fn log_conv_exp(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyVector);
    }
    let mu_a = max_finite(a).ok_or(Error::AllZeroMass)?;
    let mu_b = max_finite(b).ok_or(Error::AllZeroMass)?;
    let out_len = check_dim(a.len() as u128 + b.len() as u128 - 1)?;

    if let Some(i) = single_finite(a) {
        return Ok(shifted(b, a[i], i, out_len));
    }
    if let Some(j) = single_finite(b) {
        return Ok(shifted(a, b[j], j, out_len));
    }

    let n = transform_len(out_len);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let (mut total_a, mut total_b) = (0.0, 0.0);
    for (z, &x) in buf.iter_mut().zip(a) {
        z.re = exp_mass(x - mu_a);
        total_a += z.re;
    }
    for (z, &x) in buf.iter_mut().zip(b) {
        z.im = exp_mass(x - mu_b);
        total_b += z.im;
    }
    packed_real_product(&mut buf)?;
    fft_in_place(&mut buf, true)?;

    let threshold = CLAMP_REL_TOL * total_a * total_b;
    let shift = mu_a + mu_b;
    buf.truncate(out_len);
    buf.into_iter()
        .map(|z| {
            let v = z.re;
            if v < -threshold {
                Err(Error::NumericalBlowup { value: v, threshold })
            } else if v <= 0.0 {
                Ok(f64::NEG_INFINITY)
            } else {
                Ok(v.ln() + shift)
            }
        })
        .collect()
}

/// Operands with at most this many entries on one side skip the FFT.
pub const DIRECT_MAX_LEN: usize = 32;

/// Log-domain convolution; picks [`log_conv_direct`] when one operand is short.
pub fn log_conv(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len().min(b.len()) <= DIRECT_MAX_LEN {
        log_conv_direct(a, b)
    } else {
        log_conv_exp(a, b)
    }
}

/// Quadratic convolution where each output is a log-sum-exp over exactly the
/// pairs that reach it, so an input only influences the outputs it feeds.
pub fn log_conv_direct(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyVector);
    }
    if max_finite(a).is_none() || max_finite(b).is_none() {
        return Err(Error::AllZeroMass);
    }
    let out_len = check_dim(a.len() as u128 + b.len() as u128 - 1)?;
    Ok((0..out_len)
        .map(|t| {
            let lo = t.saturating_sub(b.len() - 1);
            let hi = t.min(a.len() - 1);
            log_sum_exp((lo..=hi).map(|i| a[i] + b[t - i]))
        })
        .collect())
}

fn shifted(v: &[f64], weight: f64, at: usize, out_len: usize) -> Vec<f64> {
    let mut out = vec![f64::NEG_INFINITY; out_len];
    for (o, &x) in out[at..at + v.len()].iter_mut().zip(v) {
        *o = x + weight;
    }
    out
}

/// Quadratic linear-domain convolution with compensated summation per output.
pub fn naive_conv(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyVector);
    }
    for v in [a, b] {
        if let Some((index, &value)) = v.iter().enumerate().find(|(_, x)| !(**x >= 0.0)) {
            return Err(Error::NegativeMass { index, value });
        }
        if v.iter().all(|&x| x == 0.0) {
            return Err(Error::AllZeroMass);
        }
    }
    let out_len = check_dim(a.len() as u128 + b.len() as u128 - 1)?;
    Ok(direct_conv(a, b, out_len))
}

fn direct_conv(a: &[f64], b: &[f64], out_len: usize) -> Vec<f64> {
    (0..out_len)
        .map(|k| {
            let lo = k.saturating_sub(b.len() - 1);
            let hi = k.min(a.len() - 1);
            let mut acc = CompensatedSum::new();
            for i in lo..=hi {
                acc.add(a[i] * b[k - i]);
            }
            acc.value()
        })
        .collect()
}

/// FFT convolution of arbitrary real sequences (no sign restriction).
pub fn convolve_real(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyVector);
    }
    let out_len = a.len() + b.len() - 1;
    let n = transform_len(out_len);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (z, &x) in buf.iter_mut().zip(a) {
        z.re = x;
    }
    for (z, &x) in buf.iter_mut().zip(b) {
        z.im = x;
    }
    packed_real_product(&mut buf)?;
    fft_in_place(&mut buf, true)?;
    Ok(buf[..out_len].iter().map(|z| z.re).collect())
}

/// `out[i] = Σ_j g[i + j] · b[j]` for `i < g.len() - b.len() + 1`.
///
/// This is the adjoint of convolution with `b`.
pub fn correlate(g: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if b.is_empty() || g.len() < b.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot correlate length {} against length {}",
            g.len(),
            b.len()
        )));
    }
    let reversed: Vec<f64> = b.iter().rev().copied().collect();
    let full = convolve_real(g, &reversed)?;
    let start = b.len() - 1;
    Ok(full[start..start + g.len() - b.len() + 1].to_vec())
}
