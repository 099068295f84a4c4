use super::elem::Elem;
use super::shape_ops::permute_values;
use super::{Storage, Tape, Tensor, C64};
use crate::error::{shape_err, Error, Result};

/// Axis bookkeeping for a pairwise contraction, reduced to `[M,K] x [K,N]`.
struct Plan {
    perm_a: Vec<usize>,
    perm_b: Vec<usize>,
    a_perm_shape: Vec<usize>,
    b_perm_shape: Vec<usize>,
    m: usize,
    k: usize,
    n: usize,
    out_shape: Vec<usize>,
}

fn plan(a: &[usize], b: &[usize], axes: &[(usize, usize)]) -> Result<Plan> {
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    for &(i, j) in axes {
        if i >= a.len() || j >= b.len() {
            return Err(shape_err!("contraction axes ({i},{j}) out of range for {a:?} and {b:?}"));
        }
        if used_a[i] || used_b[j] {
            return Err(shape_err!("contraction axes {axes:?} are not distinct"));
        }
        if a[i] != b[j] {
            return Err(shape_err!(
                "contracted sizes differ: axis {i} of {a:?} has {} but axis {j} of {b:?} has {}",
                a[i],
                b[j]
            ));
        }
        used_a[i] = true;
        used_b[j] = true;
    }
    let free_a: Vec<usize> = (0..a.len()).filter(|&i| !used_a[i]).collect();
    let free_b: Vec<usize> = (0..b.len()).filter(|&j| !used_b[j]).collect();
    let perm_a: Vec<usize> = free_a.iter().copied().chain(axes.iter().map(|p| p.0)).collect();
    let perm_b: Vec<usize> = axes.iter().map(|p| p.1).chain(free_b.iter().copied()).collect();
    let m = free_a.iter().map(|&i| a[i]).product();
    let k = axes.iter().map(|p| a[p.0]).product();
    let n = free_b.iter().map(|&j| b[j]).product();
    let out_shape = free_a.iter().map(|&i| a[i]).chain(free_b.iter().map(|&j| b[j])).collect();
    Ok(Plan {
        a_perm_shape: perm_a.iter().map(|&i| a[i]).collect(),
        b_perm_shape: perm_b.iter().map(|&j| b[j]).collect(),
        perm_a,
        perm_b,
        m,
        k,
        n,
        out_shape,
    })
}

/// `C = A B` with every output accumulated over the contracted index in
/// ascending order, starting from zero.
fn matmul<T: Elem>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut c = vec![T::ZERO; m * n];
    for i in 0..m {
        let row = &mut c[i * n..(i + 1) * n];
        for kk in 0..k {
            let aik = a[i * k + kk];
            let brow = &b[kk * n..(kk + 1) * n];
            for (cv, &bv) in row.iter_mut().zip(brow) {
                *cv += aik * bv;
            }
        }
    }
    c
}

fn dot_conj<T: Elem>(x: &[T], y: &[T]) -> T {
    let mut acc = [T::ZERO; 4];
    let chunks = x.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += x[4 * c + l] * y[4 * c + l].conj();
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..x.len() {
        s += x[i] * y[i].conj();
    }
    s
}

fn inverse(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// Untracked contraction on raw slices; the reference semantics of [`Tape::contract`].
pub fn contract_values<T: Elem>(
    a: &[T],
    a_shape: &[usize],
    b: &[T],
    b_shape: &[usize],
    axes: &[(usize, usize)],
) -> Result<(Vec<usize>, Vec<T>)> {
    let p = plan(a_shape, b_shape, axes)?;
    let am = permute_values(a, a_shape, &p.perm_a);
    let bm = permute_values(b, b_shape, &p.perm_b);
    Ok((p.out_shape.clone(), matmul(&am, &bm, p.m, p.k, p.n)))
}

fn backward<T: Elem>(g: &[T], am: &[T], bm: &[T], p: &Plan, needs: &[bool]) -> Vec<Option<Storage>> {
    let (m, k, n) = (p.m, p.k, p.n);
    let ga = needs[0].then(|| {
        let mut ga = vec![T::ZERO; m * k];
        for i in 0..m {
            let grow = &g[i * n..(i + 1) * n];
            for kk in 0..k {
                ga[i * k + kk] = dot_conj(grow, &bm[kk * n..(kk + 1) * n]);
            }
        }
        T::wrap(permute_values(&ga, &p.a_perm_shape, &inverse(&p.perm_a)))
    });
    let gb = needs[1].then(|| {
        let mut gb = vec![T::ZERO; k * n];
        for kk in 0..k {
            let row = &mut gb[kk * n..(kk + 1) * n];
            for i in 0..m {
                let aik = am[i * k + kk].conj();
                for (r, &gv) in row.iter_mut().zip(&g[i * n..(i + 1) * n]) {
                    *r += aik * gv;
                }
            }
        }
        T::wrap(permute_values(&gb, &p.b_perm_shape, &inverse(&p.perm_b)))
    });
    vec![ga, gb]
}

impl Tape {
    /// Sums products over the paired axes. The result has the free axes of
    /// `a` followed by the free axes of `b`. Complex products are not
    /// conjugated.
    pub fn contract(&self, a: &Tensor, b: &Tensor, axes: &[(usize, usize)]) -> Result<Tensor> {
        if a.kind() != b.kind() {
            return Err(Error::Kind("contraction between real and complex tensors".into()));
        }
        let p = plan(a.shape(), b.shape(), axes)?;
        macro_rules! run {
            ($t:ty, $x:expr, $y:expr) => {{
                let am = permute_values::<$t>($x, a.shape(), &p.perm_a);
                let bm = permute_values::<$t>($y, b.shape(), &p.perm_b);
                let c = matmul(&am, &bm, p.m, p.k, p.n);
                let out_shape = p.out_shape.clone();
                if !self.tracking(&[a, b]) {
                    return Ok(Tensor::from_parts(out_shape, <$t>::wrap(c)));
                }
                self.record(&[a, b], out_shape, <$t>::wrap(c), move |g, needs| {
                    backward::<$t>(<$t>::unwrap(g), &am, &bm, &p, needs)
                })
            }};
        }
        match (a.storage(), b.storage()) {
            (Storage::Real(x), Storage::Real(y)) => run!(f64, x, y),
            (Storage::Complex(x), Storage::Complex(y)) => run!(C64, x, y),
            _ => unreachable!(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2(v: [f64; 4]) -> Tensor {
        Tensor::from_real(&[2, 2], v.to_vec()).unwrap()
    }

    #[test]
    fn identity_and_product() {
        let t = Tape::new();
        let a = m2([1., 2., 3., 4.]);
        let i = m2([1., 0., 0., 1.]);
        assert_eq!(t.contract(&a, &i, &[(1, 0)]).unwrap().real_values().unwrap(), &[1., 2., 3., 4.]);
        let b = m2([5., 6., 7., 8.]);
        assert_eq!(t.contract(&a, &b, &[(1, 0)]).unwrap().real_values().unwrap(), &[19., 22., 43., 50.]);
    }

    #[test]
    fn full_contraction_is_rank0() {
        let t = Tape::new();
        let v = Tensor::from_real(&[3], vec![1., 2., 3.]).unwrap();
        let s = t.contract(&v, &v, &[(0, 0)]).unwrap();
        assert_eq!(s.shape(), &[] as &[usize]);
        assert_eq!(s.item().unwrap(), 14.0);
    }

    #[test]
    fn mismatched_sizes_rejected() {
        let t = Tape::new();
        let a = Tensor::full(&[2, 3], 1.0).unwrap();
        let b = Tensor::full(&[2, 3], 1.0).unwrap();
        assert!(t.contract(&a, &b, &[(1, 0)]).is_err());
        assert!(t.contract(&a, &b, &[(0, 0), (0, 1)]).is_err());
    }
}
