use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use super::{Storage, C64};

/// Scalar element types a tensor may hold.
pub trait Elem:
    Copy
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + PartialEq
    + std::fmt::Debug
    + 'static
{
    const ZERO: Self;
    const ONE: Self;
    fn conj(self) -> Self;
    fn from_f64(v: f64) -> Self;
    fn wrap(v: Vec<Self>) -> Storage;
    fn unwrap(s: &Storage) -> &[Self];
}

impl Elem for f64 {
    const ZERO: f64 = 0.0;
    const ONE: f64 = 1.0;

    #[inline(always)]
    fn conj(self) -> f64 {
        self
    }

    #[inline(always)]
    fn from_f64(v: f64) -> f64 {
        v
    }

    fn wrap(v: Vec<f64>) -> Storage {
        Storage::Real(v)
    }

    fn unwrap(s: &Storage) -> &[f64] {
        s.real()
    }
}

impl Elem for C64 {
    const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
    const ONE: C64 = C64 { re: 1.0, im: 0.0 };

    #[inline(always)]
    fn conj(self) -> C64 {
        C64::new(self.re, -self.im)
    }

    #[inline(always)]
    fn from_f64(v: f64) -> C64 {
        C64::new(v, 0.0)
    }

    fn wrap(v: Vec<C64>) -> Storage {
        Storage::Complex(v)
    }

    fn unwrap(s: &Storage) -> &[C64] {
        s.complex()
    }
}

/// Dispatches a generic expression over the element type of a storage.
macro_rules! dispatch {
    ($storage:expr, $v:ident => $body:expr) => {
        match $storage {
            $crate::tensor::Storage::Real($v) => $body,
            $crate::tensor::Storage::Complex($v) => $body,
        }
    };
}
pub(crate) use dispatch;

pub(crate) fn scaled<T: Elem>(v: &[T], c: f64) -> Vec<T> {
    let s = T::from_f64(c);
    v.iter().map(|&e| e * s).collect()
}

pub(crate) fn gather_scaled<T: Elem>(v: &[T], offsets: &[usize], c: f64) -> Vec<T> {
    let s = T::from_f64(c);
    offsets.iter().map(|&o| v[o] * s).collect()
}
