//! Iterative radix-2 decimation-in-time FFT.
//!
//! Twiddle factors are stored stage by stage (`n - 1` entries in total) so the
//! inner butterfly loop walks them contiguously. Tables are cached per length
//! in a process-wide map.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64;

use crate::error::{Error, Result};

type TwiddleCache = RwLock<HashMap<usize, Arc<[Complex64]>>>;

fn cache() -> &'static TwiddleCache {
    static CACHE: OnceLock<TwiddleCache> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Forward twiddles for length `n`: stage with half-width `m` occupies
/// `[m - 1, 2m - 1)` and holds `exp(-2πi j / 2m)` for `j < m`.
fn twiddles(n: usize) -> Arc<[Complex64]> {
    if let Some(t) = cache().read().unwrap().get(&n) {
        return t.clone();
    }
    let mut table = Vec::with_capacity(n.saturating_sub(1));
    let mut m = 1;
    while m < n {
        let step = -PI / m as f64;
        table.extend((0..m).map(|j| Complex64::from_polar(1.0, step * j as f64)));
        m <<= 1;
    }
    let table: Arc<[Complex64]> = table.into();
    cache()
        .write()
        .unwrap()
        .entry(n)
        .or_insert_with(|| table.clone())
        .clone()
}

/// Smallest power of two that is `>= n` (and at least 1).
pub fn transform_len(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

fn bit_reverse_permute(buf: &mut [Complex64]) {
    let n = buf.len();
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            buf.swap(i, j);
        }
    }
}

/// In-place transform. The inverse includes the `1/n` factor.
pub fn fft_in_place(buf: &mut [Complex64], inverse: bool) -> Result<()> {
    let n = buf.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::NonPowerOfTwoLength(n));
    }
    if n == 1 {
        return Ok(());
    }
    bit_reverse_permute(buf);
    let table = twiddles(n);

    // m = 1: trivial butterflies.
    for pair in buf.chunks_exact_mut(2) {
        let (a, b) = (pair[0], pair[1]);
        pair[0] = a + b;
        pair[1] = a - b;
    }

    let mut m = 2;
    while m < n {
        let w = &table[m - 1..2 * m - 1];
        for block in buf.chunks_exact_mut(2 * m) {
            let (lo, hi) = block.split_at_mut(m);
            for ((a, b), &tw) in lo.iter_mut().zip(hi.iter_mut()).zip(w) {
                let tw = if inverse { tw.conj() } else { tw };
                let t = *b * tw;
                *b = *a - t;
                *a += t;
            }
        }
        m <<= 1;
    }

    if inverse {
        let scale = 1.0 / n as f64;
        for z in buf.iter_mut() {
            *z *= scale;
        }
    }
    Ok(())
}

/// Out-of-place wrapper around [`fft_in_place`].
pub fn fft(buf: &[Complex64], inverse: bool) -> Result<Vec<Complex64>> {
    let mut out = buf.to_vec();
    fft_in_place(&mut out, inverse)?;
    Ok(out)
}

/// Transforms two real sequences with a single complex FFT.
///
/// Packs `a + i·b`, transforms, and returns the spectrum of the product
/// `A[k]·B[k]` written back in place, ready for the inverse transform.
pub(crate) fn packed_real_product(buf: &mut [Complex64]) -> Result<()> {
    fft_in_place(buf, false)?;
    let n = buf.len();
    // A·B = (Z[k]^2 - conj(Z[n-k])^2) / 4i
    let quarter_i = Complex64::new(0.0, -0.25);
    let prod = |zk: Complex64, zn: Complex64| (zk * zk - zn.conj() * zn.conj()) * quarter_i;
    buf[0] = prod(buf[0], buf[0]);
    if n > 1 {
        buf[n / 2] = prod(buf[n / 2], buf[n / 2]);
    }
    for k in 1..n / 2 {
        let (zk, zn) = (buf[k], buf[n - k]);
        buf[k] = prod(zk, zn);
        buf[n - k] = prod(zn, zk);
    }
    Ok(())
}
