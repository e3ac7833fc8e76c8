//! Sparse symmetric matrices over grid nodes and a preconditioned conjugate
//! gradient solver restricted to a subset of free unknowns.

/// Compressed sparse row matrix with cached diagonal positions.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<Option<usize>>,
}

impl CsrMatrix {
    /// Builds the matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        let diag = (0..n)
            .map(|r| (row_ptr[r]..row_ptr[r + 1]).find(|&p| cols[p] == r))
            .collect();
        CsrMatrix {
            n,
            row_ptr,
            cols,
            vals,
            diag,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn diagonal(&self, r: usize) -> f64 {
        self.diag[r].map_or(0.0, |p| self.vals[p])
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |p| (self.cols[p], self.vals[p]))
    }

    /// `A + diag(shift)`; every row must store its diagonal entry.
    pub fn add_diagonal(&self, shift: &[f64]) -> Self {
        let mut out = self.clone();
        for (r, &d) in shift.iter().enumerate() {
            if d != 0.0 {
                let p = self.diag[r].expect("row without a diagonal entry");
                out.vals[p] += d;
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let mut s = 0.0;
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[p] * x[self.cols[p]];
            }
            y[r] = s;
        }
    }

    /// `x^T A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for r in 0..self.n {
            if x[r] == 0.0 {
                continue;
            }
            let mut s = 0.0;
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[p] * x[self.cols[p]];
            }
            acc += x[r] * s;
        }
        acc
    }

    /// `y_i = Σ_{j free} a_ij x_j` on free rows, zero elsewhere.
    fn mul_free(&self, free: &[bool], x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            if !free[r] {
                y[r] = 0.0;
                continue;
            }
            let mut s = 0.0;
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[p];
                if free[c] {
                    s += self.vals[p] * x[c];
                }
            }
            y[r] = s;
        }
    }

    /// Symmetric SOR preconditioner application `z = M^{-1} r` on the free set.
    fn ssor(&self, free: &[bool], omega: f64, r: &[f64], z: &mut [f64]) {
        for i in 0..self.n {
            if !free[i] {
                z[i] = 0.0;
                continue;
            }
            let mut s = r[i];
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = self.cols[p];
                if c < i && free[c] {
                    s -= self.vals[p] * z[c];
                }
            }
            z[i] = omega * s / self.diagonal(i);
        }
        let scale = (2.0 - omega) / omega;
        for i in 0..self.n {
            if free[i] {
                z[i] *= self.diagonal(i) * scale;
            }
        }
        for i in (0..self.n).rev() {
            if !free[i] {
                continue;
            }
            let mut s = z[i];
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = self.cols[p];
                if c > i && free[c] {
                    s -= self.vals[p] * z[c];
                }
            }
            z[i] = omega * s / self.diagonal(i);
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PcgOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
    pub omega: f64,
}

impl Default for PcgOptions {
    fn default() -> Self {
        PcgOptions {
            rel_tol: 1e-10,
            max_iter: 5000,
            omega: 1.6,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PcgStats {
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
}

/// Solves `A_ff x_f = b_f` on the free set, starting from the free entries
/// of `x`; entries of `x` outside the free set are left untouched.
pub fn pcg(a: &CsrMatrix, free: &[bool], b: &[f64], x: &mut [f64], opts: PcgOptions) -> PcgStats {
    let n = a.dim();
    let mut xf = vec![0.0; n];
    for i in 0..n {
        if free[i] {
            xf[i] = x[i];
        }
    }
    let mut r = vec![0.0; n];
    a.mul_free(free, &xf, &mut r);
    for i in 0..n {
        r[i] = if free[i] { b[i] - r[i] } else { 0.0 };
    }
    let bnorm = b
        .iter()
        .zip(free)
        .filter(|(_, &f)| f)
        .map(|(v, _)| v * v)
        .sum::<f64>()
        .sqrt();
    let norm = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>().sqrt();
    if bnorm == 0.0 && norm(&r) == 0.0 {
        copy_free(free, &xf, x);
        return PcgStats {
            iterations: 0,
            rel_residual: 0.0,
            converged: true,
        };
    }
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
    let mut z = vec![0.0; n];
    a.ssor(free, opts.omega, &r, &mut z);
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut q = vec![0.0; n];
    let mut rel = norm(&r) / scale;
    let mut it = 0;
    while it < opts.max_iter && rel > opts.rel_tol {
        a.mul_free(free, &p, &mut q);
        let pq: f64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
        if pq <= 0.0 {
            break;
        }
        let alpha = rz / pq;
        for i in 0..n {
            xf[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        rel = norm(&r) / scale;
        it += 1;
        if rel <= opts.rel_tol {
            break;
        }
        a.ssor(free, opts.omega, &r, &mut z);
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    copy_free(free, &xf, x);
    PcgStats {
        iterations: it,
        rel_residual: rel,
        converged: rel <= opts.rel_tol,
    }
}

fn copy_free(free: &[bool], src: &[f64], dst: &mut [f64]) {
    for i in 0..free.len() {
        if free[i] {
            dst[i] = src[i];
        }
    }
}

/// Solves `A u = 0` on the free set with the non-free entries of `u` as
/// Dirichlet data.
pub fn solve_dirichlet(a: &CsrMatrix, free: &[bool], u: &mut [f64], opts: PcgOptions) -> PcgStats {
    let n = a.dim();
    let mut fixed = u.to_vec();
    for i in 0..n {
        if free[i] {
            fixed[i] = 0.0;
        }
    }
    let mut b = vec![0.0; n];
    a.mul_vec(&fixed, &mut b);
    for i in 0..n {
        b[i] = if free[i] { -b[i] } else { 0.0 };
    }
    pcg(a, free, &b, u, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 0, 4.0)]);
        assert_eq!(m.diagonal(0), 3.0);
        assert_eq!(m.diagonal(1), 0.0);
        assert_eq!(m.row(1).collect::<Vec<_>>(), vec![(0, 4.0)]);
    }

    #[test]
    fn dirichlet_solve_recovers_linear_profile() {
        let n = 50;
        let a = laplace_1d(n);
        let mut free = vec![true; n];
        free[0] = false;
        free[n - 1] = false;
        let mut u = vec![0.0; n];
        u[n - 1] = 1.0;
        let stats = solve_dirichlet(&a, &free, &mut u, PcgOptions::default());
        assert!(stats.converged);
        for (i, v) in u.iter().enumerate() {
            assert!((v - i as f64 / (n - 1) as f64).abs() < 1e-9);
        }
    }
}
