use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Floating-point element type of the network (`f32` for training runs,
/// `f64` for gradient checks).
pub trait Real:
    Copy
    + Default
    + Debug
    + PartialOrd
    + Send
    + Sync
    + Sum
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    const ZERO: Self;
    const ONE: Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn tanh(self) -> Self;
    fn sqrt(self) -> Self;

    /// Element-wise tanh over a slice.
    fn tanh_slice(v: &mut [Self]);

    /// `C ← α·A·B + β·C` for an `m×k` by `k×n` product with element strides.
    ///
    /// # Safety
    /// Every addressed element of `a`, `b` and `c` must be in bounds and `c`
    /// must not alias `a` or `b`.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

macro_rules! impl_real {
    ($t:ty, $gemm:path, $tanh_slice:path) => {
        impl Real for $t {
            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;
            #[inline]
            fn from_f64(v: f64) -> Self {
                v as $t
            }
            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
            #[inline]
            fn tanh(self) -> Self {
                <$t>::tanh(self)
            }
            #[inline]
            fn sqrt(self) -> Self {
                <$t>::sqrt(self)
            }
            fn tanh_slice(v: &mut [Self]) {
                $tanh_slice(v)
            }
            unsafe fn gemm_raw(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: *const Self,
                rsa: isize,
                csa: isize,
                b: *const Self,
                rsb: isize,
                csb: isize,
                beta: Self,
                c: *mut Self,
                rsc: isize,
                csc: isize,
            ) {
                $gemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm, tanh_f32_rational);
impl_real!(f64, matrixmultiply::dgemm, tanh_f64_std);

fn tanh_f64_std(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.tanh());
}

/// Branch-free rational tanh for single precision (odd degree-13 numerator
/// over even degree-6 denominator); a few ulp from the correctly rounded
/// result and it vectorizes, unlike `f32::tanh`.
fn tanh_f32_rational(v: &mut [f32]) {
    const CLAMP: f32 = 7.905_311;
    const A: [f32; 7] = [
        4.893_524_6e-3,
        6.372_619_3e-4,
        1.485_722_4e-5,
        5.122_297e-8,
        -8.604_671_5e-11,
        2.000_187_9e-13,
        -2.760_768_5e-16,
    ];
    const B: [f32; 4] = [4.893_525e-3, 2.268_434_6e-3, 1.185_347e-4, 1.198_258_4e-6];
    for x in v.iter_mut() {
        let t = x.clamp(-CLAMP, CLAMP);
        let t2 = t * t;
        let p = t * (A[0] + t2 * (A[1] + t2 * (A[2] + t2 * (A[3] + t2 * (A[4] + t2 * (A[5] + t2 * A[6]))))));
        let q = B[0] + t2 * (B[1] + t2 * (B[2] + t2 * B[3]));
        *x = if x.abs() < 4e-4 { *x } else { p / q };
    }
}

/// Strided view of a dense matrix: element `(i, j)` is at `i·row + j·col`.
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub rows: usize,
    pub cols: usize,
    pub row: usize,
    pub col: usize,
}

impl Layout {
    pub const fn row_major(rows: usize, cols: usize) -> Self {
        Self { rows, cols, row: cols, col: 1 }
    }

    pub const fn transposed(self) -> Self {
        Self {
            rows: self.cols,
            cols: self.rows,
            row: self.col,
            col: self.row,
        }
    }

    fn span(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            0
        } else {
            (self.rows - 1) * self.row + (self.cols - 1) * self.col + 1
        }
    }
}

/// `C ← A·B + β·C` with bounds-checked strided operands.
pub fn gemm<T: Real>(a: &[T], la: Layout, b: &[T], lb: Layout, beta: T, c: &mut [T], lc: Layout) {
    assert!(la.cols == lb.rows && la.rows == lc.rows && lb.cols == lc.cols, "gemm shape mismatch");
    assert!(la.span() <= a.len() && lb.span() <= b.len() && lc.span() <= c.len(), "gemm out of bounds");
    if lc.rows == 0 || lc.cols == 0 {
        return;
    }
    // SAFETY: spans checked above; `c` is a unique borrow so cannot alias.
    unsafe {
        T::gemm_raw(
            la.rows,
            la.cols,
            lb.cols,
            T::ONE,
            a.as_ptr(),
            la.row as isize,
            la.col as isize,
            b.as_ptr(),
            lb.row as isize,
            lb.col as isize,
            beta,
            c.as_mut_ptr(),
            lc.row as isize,
            lc.col as isize,
        )
    }
}
