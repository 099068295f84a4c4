//! Mixed-radix complex FFT.
//!
//! Powers of two use an iterative radix-2 transform. Other sizes are factored
//! into primes: factors of two use a butterfly and every other prime factor is
//! combined with a direct O(p^2) DFT, which is fine for the small odd factors
//! found on desk-scale grids. Plans are cached per size.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::tensor::C64;

pub struct FftPlan {
    n: usize,
    factors: Vec<usize>,
    /// `exp(-2 pi i j / n)` for `j` in `0..n`.
    twiddles: Vec<C64>,
    /// Conjugated twiddles for the inverse direction.
    inverse_twiddles: Vec<C64>,
    /// Bit-reversal permutation when `n` is a power of two.
    bitrev: Option<Vec<usize>>,
}

fn factorize(mut n: usize) -> Vec<usize> {
    let mut f = Vec::new();
    while n.is_multiple_of(2) && n > 1 {
        f.push(2);
        n /= 2;
    }
    let mut p = 3;
    while p * p <= n {
        while n.is_multiple_of(p) {
            f.push(p);
            n /= p;
        }
        p += 2;
    }
    if n > 1 {
        f.push(n);
    }
    f
}

impl FftPlan {
    pub fn new(n: usize) -> FftPlan {
        assert!(n >= 1, "FFT size must be positive");
        let twiddles = (0..n)
            .map(|j| {
                let theta = -2.0 * PI * (j as f64) / (n as f64);
                C64::new(theta.cos(), theta.sin())
            })
            .collect::<Vec<C64>>();
        let inverse_twiddles = twiddles.iter().map(|t| t.conj()).collect();
        let bitrev = n.is_power_of_two().then(|| {
            let bits = n.trailing_zeros();
            (0..n).map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) }).collect()
        });
        FftPlan { n, factors: factorize(n), twiddles, inverse_twiddles, bitrev }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline(always)]
    fn table(&self, inverse: bool) -> &[C64] {
        if inverse {
            &self.inverse_twiddles
        } else {
            &self.twiddles
        }
    }

    #[inline(always)]
    fn w(&self, j: usize, inverse: bool) -> C64 {
        self.table(inverse)[j % self.n]
    }

    fn radix2(&self, input: &[C64], out: &mut [C64], bitrev: &[usize], inverse: bool) {
        let n = self.n;
        for (i, &r) in bitrev.iter().enumerate() {
            out[i] = input[r];
        }
        let table = self.table(inverse);
        let mut half = 1;
        while half < n {
            let step = n / (2 * half);
            for block in out.chunks_exact_mut(2 * half) {
                let (lo, hi) = block.split_at_mut(half);
                for k in 0..half {
                    let t = hi[k] * table[k * step];
                    let a = lo[k];
                    lo[k] = a + t;
                    hi[k] = a - t;
                }
            }
            half *= 2;
        }
    }

    /// Unnormalized transform of `input` into `output` (both length `n`).
    /// `inverse` flips the twiddle sign; no `1/n` scaling is applied.
    pub fn transform(&self, input: &[C64], output: &mut [C64], inverse: bool) {
        assert_eq!(input.len(), self.n);
        assert_eq!(output.len(), self.n);
        if let Some(bitrev) = &self.bitrev {
            self.radix2(input, output, bitrev, inverse);
            return;
        }
        let mut tmp = Vec::new();
        self.recurse(input, 0, 1, output, &self.factors, self.n, inverse, &mut tmp);
    }

    /// In-place convenience wrapper around [`FftPlan::transform`].
    pub fn process(&self, data: &mut [C64], inverse: bool, scratch: &mut Vec<C64>) {
        scratch.clear();
        scratch.extend_from_slice(data);
        self.transform(scratch, data, inverse);
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        &self,
        input: &[C64],
        offset: usize,
        stride: usize,
        out: &mut [C64],
        factors: &[usize],
        n: usize,
        inverse: bool,
        tmp: &mut Vec<C64>,
    ) {
        if n == 1 {
            out[0] = input[offset];
            return;
        }
        let p = factors[0];
        let m = n / p;
        for q in 0..p {
            self.recurse(input, offset + q * stride, stride * p, &mut out[q * m..(q + 1) * m], &factors[1..], m, inverse, tmp);
        }
        let ts = self.n / n;
        if p == 2 {
            let table = self.table(inverse);
            let (lo, hi) = out.split_at_mut(m);
            for k in 0..m {
                let t = hi[k] * table[k * ts];
                let a = lo[k];
                lo[k] = a + t;
                hi[k] = a - t;
            }
            return;
        }
        tmp.resize(p, C64::new(0.0, 0.0));
        let root = self.n / p;
        for k in 0..m {
            for q in 0..p {
                tmp[q] = out[k + q * m] * self.w(q * k * ts, inverse);
            }
            for r in 0..p {
                let mut acc = tmp[0];
                for q in 1..p {
                    acc += tmp[q] * self.w(((q * r) % p) * root, inverse);
                }
                out[k + r * m] = acc;
            }
        }
    }
}

static PLANS: OnceLock<Mutex<HashMap<usize, Arc<FftPlan>>>> = OnceLock::new();

/// Cached plan for size `n`.
pub fn plan(n: usize) -> Arc<FftPlan> {
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    Arc::clone(guard.entry(n).or_insert_with(|| Arc::new(FftPlan::new(n))))
}

/// Applies a 1-D FFT along `axis` of a row-major complex array.
pub fn fft_axis(data: &mut [C64], shape: &[usize], axis: usize, inverse: bool) {
    let n = shape[axis];
    if n == 1 {
        return;
    }
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let plan = plan(n);
    let mut line = vec![C64::new(0.0, 0.0); n];
    let mut out = vec![C64::new(0.0, 0.0); n];
    for o in 0..outer {
        let base = o * n * inner;
        for i in 0..inner {
            for k in 0..n {
                line[k] = data[base + k * inner + i];
            }
            plan.transform(&line, &mut out, inverse);
            for k in 0..n {
                data[base + k * inner + i] = out[k];
            }
        }
    }
}
