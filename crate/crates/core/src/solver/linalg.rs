//! Dense LU with partial pivoting, row-major storage.

pub struct LuFactor {
    n: usize,
    a: Vec<f64>,
    piv: Vec<usize>,
}

impl LuFactor {
    /// Factors `a` in place; returns `None` on a (near-)zero pivot.
    pub fn new(mut a: Vec<f64>, n: usize) -> Option<Self> {
        debug_assert_eq!(a.len(), n * n);
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].abs();
            for r in (k + 1)..n {
                let v = a[r * n + k].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best < 1e-300 {
                return None;
            }
            piv[k] = p;
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
            }
            let pivot = a[k * n + k];
            for r in (k + 1)..n {
                let m = a[r * n + k] / pivot;
                a[r * n + k] = m;
                if m != 0.0 {
                    let (head, tail) = a.split_at_mut((r * n) + k + 1);
                    let krow = &head[k * n + k + 1..k * n + n];
                    let rrow = &mut tail[..n - k - 1];
                    for (dst, &src) in rrow.iter_mut().zip(krow) {
                        *dst -= m * src;
                    }
                }
            }
        }
        Some(Self { n, a, piv })
    }

    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        // stored multipliers refer to fully permuted rows, so apply every
        // swap before substituting
        for k in 0..n {
            b.swap(k, self.piv[k]);
        }
        for k in 0..n {
            let bk = b[k];
            if bk != 0.0 {
                for r in (k + 1)..n {
                    b[r] -= self.a[r * n + k] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut v = b[k];
            for c in (k + 1)..n {
                v -= self.a[k * n + c] * b[c];
            }
            b[k] = v / self.a[k * n + k];
        }
    }
}
