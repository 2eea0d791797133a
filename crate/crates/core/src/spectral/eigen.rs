//! Symmetric eigensolvers.
//!
//! Two routes are provided: a dense one (Householder tridiagonalization
//! followed by implicit QL, the classic `tred2`/`tql2` pair) and a Lanczos
//! iteration with full reorthogonalization for extremal eigenpairs. The
//! Lanczos solver works on any symmetric operator given as a matvec closure
//! and can deflate a known orthonormal set (for example a Laplacian's null
//! space) before iterating.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Eigenvalues in ascending order with matching unit eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// Column-major: vector `j` is `vectors[j * n..(j + 1) * n]`.
    pub vectors: Vec<f64>,
    pub n: usize,
}

impl EigenPairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vector(&self, j: usize) -> &[f64] {
        &self.vectors[j * self.n..(j + 1) * self.n]
    }
}

/// Flips each vector so that its first entry with magnitude above `1e-12`
/// is positive.
pub fn canonicalize_signs(vectors: &mut [f64], n: usize) {
    if n == 0 {
        return;
    }
    for col in vectors.chunks_mut(n) {
        if let Some(&lead) = col.iter().find(|x| x.abs() > 1e-12) {
            if lead < 0.0 {
                col.iter_mut().for_each(|x| *x = -*x);
            }
        }
    }
}

/// Full eigendecomposition of a dense symmetric matrix (row-major `n × n`).
pub fn dense_symmetric_eigen(a: &[f64], n: usize) -> EigenPairs {
    assert_eq!(a.len(), n * n);
    if n == 0 {
        return EigenPairs {
            values: Vec::new(),
            vectors: Vec::new(),
            n,
        };
    }
    // Work matrix v[i][j] stored row-major.
    let mut v = a.to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e, n);
    // tred2 leaves the subdiagonal in e[1..]; tql2 expects it in e[..n-1].
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut rows: Vec<Vec<f64>> = (0..n).map(|i| v[i * n..(i + 1) * n].to_vec()).collect();
    tql2(&mut d, &mut e, &mut rows);
    let order = ascending_order(&d);
    let values = order.iter().map(|&j| d[j]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &j) in order.iter().enumerate() {
        for i in 0..n {
            vectors[col * n + i] = rows[i][j];
        }
    }
    EigenPairs { values, vectors, n }
}

fn ascending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// Householder reduction of a symmetric matrix to tridiagonal form,
/// accumulating the orthogonal transform in `v` (row-major, overwritten).
fn tred2(v: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) {
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on a symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `e` (`e[i]` couples `i` and `i + 1`, `e[m - 1]` unused).
///
/// `rows` holds any subset of the rows of the accumulated transform; each
/// row starts as the matching row of the initial basis (identity rows for a
/// plain tridiagonal problem) and receives every rotation. Eigenvalues are
/// left in `d`, unsorted.
pub(crate) fn tql2(d: &mut [f64], e: &mut [f64], rows: &mut [Vec<f64>]) {
    let n = d.len();
    if n == 0 {
        return;
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    break;
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in rows.iter_mut() {
                        let hk = row[i + 1];
                        row[i + 1] = s * row[i] + c * hk;
                        row[i] = c * row[i] - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
}

/// Which end of the spectrum a Lanczos run targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// The `k` algebraically smallest eigenvalues.
    Smallest(usize),
    /// The `k` eigenvalues of largest magnitude.
    LargestMagnitude(usize),
}

impl Target {
    fn count(self) -> usize {
        match self {
            Target::Smallest(k) | Target::LargestMagnitude(k) => k,
        }
    }

    /// Indices into ascending-sorted Ritz values.
    fn select(self, sorted: &[f64]) -> Vec<usize> {
        let m = sorted.len();
        match self {
            Target::Smallest(k) => (0..k.min(m)).collect(),
            Target::LargestMagnitude(k) => {
                let (mut lo, mut hi) = (0usize, m);
                let mut out = Vec::with_capacity(k);
                while out.len() < k.min(m) {
                    if sorted[hi - 1].abs() >= sorted[lo].abs() {
                        hi -= 1;
                        out.push(hi);
                    } else {
                        out.push(lo);
                        lo += 1;
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosConfig {
    /// Residual tolerance relative to the largest Ritz magnitude.
    pub tol: f64,
    /// Cap on the Krylov basis size per restart.
    pub max_basis: usize,
    pub max_restarts: usize,
    /// Convergence is tested every this many steps.
    pub check_every: usize,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        LanczosConfig {
            tol: 1e-8,
            max_basis: 300,
            max_restarts: 20,
            check_every: 4,
        }
    }
}

/// Extremal eigenpairs of a symmetric operator by Lanczos with full
/// reorthogonalization and explicit restarts.
///
/// `deflate` is an orthonormal set (column-major, `n` per vector) that is
/// projected out of every Krylov vector, so the result describes the
/// operator restricted to its orthogonal complement. `apply(x, y)` must
/// write `A x` into `y`. Results are sorted ascending.
pub fn lanczos<F>(apply: F, n: usize, deflate: &[f64], target: Target, cfg: &LanczosConfig, seed: u64) -> EigenPairs
where
    F: Fn(&[f64], &mut [f64]),
{
    let n_deflate = if n == 0 { 0 } else { deflate.len() / n };
    let available = n - n_deflate.min(n);
    let want = target.count().min(available);
    if want == 0 {
        return EigenPairs {
            values: Vec::new(),
            vectors: Vec::new(),
            n,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_basis = cfg.max_basis.max(want + 8).min(available);

    let mut start: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut result = None;
    for _restart in 0..=cfg.max_restarts {
        let (pairs, converged) = lanczos_pass(&apply, n, deflate, target, want, max_basis, cfg, &start, &mut rng);
        if converged || max_basis == available {
            return pairs;
        }
        // Restart from the sum of the wanted Ritz vectors.
        start.iter_mut().for_each(|x| *x = 0.0);
        for j in 0..pairs.len() {
            for (s, v) in start.iter_mut().zip(pairs.vector(j)) {
                *s += v;
            }
        }
        result = Some(pairs);
    }
    log::debug!("lanczos: not converged after {} restarts", cfg.max_restarts);
    result.expect("at least one pass")
}

fn project_out(x: &mut [f64], basis: &[f64], n: usize) {
    for q in basis.chunks_exact(n) {
        let dot = dot(q, x);
        if dot != 0.0 {
            axpy(-dot, q, x);
        }
    }
}

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Draws a random unit vector orthogonal to `deflate` and `basis`. Returns
/// `None` when the complement is numerically empty.
fn fresh_direction(n: usize, deflate: &[f64], basis: &[f64], rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    for _ in 0..4 {
        let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        for _ in 0..2 {
            project_out(&mut x, deflate, n);
            project_out(&mut x, basis, n);
        }
        let nx = norm(&x);
        if nx > 1e-8 {
            x.iter_mut().for_each(|v| *v /= nx);
            return Some(x);
        }
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn lanczos_pass<F>(
    apply: &F,
    n: usize,
    deflate: &[f64],
    target: Target,
    want: usize,
    max_basis: usize,
    cfg: &LanczosConfig,
    start: &[f64],
    rng: &mut ChaCha8Rng,
) -> (EigenPairs, bool)
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut basis: Vec<f64> = Vec::with_capacity(n * max_basis);
    let mut alpha: Vec<f64> = Vec::with_capacity(max_basis);
    let mut beta: Vec<f64> = Vec::with_capacity(max_basis);

    let mut q = start.to_vec();
    project_out(&mut q, deflate, n);
    project_out(&mut q, deflate, n);
    let nq = norm(&q);
    if nq < 1e-10 {
        q = fresh_direction(n, deflate, &[], rng).expect("non-empty complement");
    } else {
        q.iter_mut().for_each(|v| *v /= nq);
    }

    let mut w = vec![0.0; n];
    let mut converged = false;
    loop {
        basis.extend_from_slice(&q);
        let j = alpha.len();
        apply(&q, &mut w);
        let a = dot(&q, &w);
        alpha.push(a);
        axpy(-a, &q, &mut w);
        if j > 0 {
            let prev = &basis[(j - 1) * n..j * n];
            axpy(-beta[j - 1], prev, &mut w);
        }
        // Two rounds of classical Gram-Schmidt keep the basis orthogonal to
        // working precision.
        for _ in 0..2 {
            project_out(&mut w, deflate, n);
            project_out(&mut w, &basis, n);
        }
        let mut b = norm(&w);
        let m = alpha.len();

        let check = m == max_basis || (m >= want && (m - want) % cfg.check_every == 0);
        if check {
            let scale = alpha
                .iter()
                .map(|x| x.abs())
                .chain(beta.iter().map(|x| x.abs()))
                .fold(b.abs(), f64::max)
                .max(f64::MIN_POSITIVE);
            if ritz_converged(&alpha, &beta, b, target, want, cfg.tol * scale) {
                converged = true;
            }
        }
        if converged || m == max_basis {
            break;
        }
        let scale_w = alpha.iter().map(|x| x.abs()).fold(1e-300, f64::max);
        if b <= 1e-12 * scale_w {
            // Invariant subspace found: continue in a fresh direction.
            match fresh_direction(n, deflate, &basis, rng) {
                Some(x) => {
                    q = x;
                    b = 0.0;
                }
                None => {
                    converged = true;
                    break;
                }
            }
        } else {
            q.copy_from_slice(&w);
            q.iter_mut().for_each(|v| *v /= b);
        }
        beta.push(b);
    }

    let pairs = ritz_pairs(&alpha, &beta, &basis, n, target, want);
    (pairs, converged)
}

fn ritz_converged(alpha: &[f64], beta: &[f64], b_last: f64, target: Target, want: usize, abs_tol: f64) -> bool {
    let m = alpha.len();
    let mut d = alpha.to_vec();
    let mut e = vec![0.0; m];
    e[..m - 1].copy_from_slice(&beta[..m - 1]);
    let mut last = vec![vec![0.0; m]];
    last[0][m - 1] = 1.0;
    tql2(&mut d, &mut e, &mut last);
    let order = ascending_order(&d);
    let sorted: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    target
        .select(&sorted)
        .into_iter()
        .take(want)
        .all(|idx| (b_last * last[0][order[idx]]).abs() <= abs_tol)
}

fn ritz_pairs(alpha: &[f64], beta: &[f64], basis: &[f64], n: usize, target: Target, want: usize) -> EigenPairs {
    let m = alpha.len();
    let mut d = alpha.to_vec();
    let mut e = vec![0.0; m];
    e[..m - 1].copy_from_slice(&beta[..m - 1]);
    tql2(&mut d, &mut e, &mut []);
    d.sort_by(f64::total_cmp);
    let mut chosen: Vec<usize> = target.select(&d).into_iter().take(want).collect();
    chosen.sort_unstable();

    let off = &beta[..m - 1];
    let scale = alpha
        .iter()
        .chain(off)
        .fold(f64::MIN_POSITIVE, |acc, x| acc.max(x.abs()));
    let mut coefs: Vec<(f64, Vec<f64>)> = Vec::with_capacity(chosen.len());
    for &idx in &chosen {
        let lambda = d[idx];
        let mates: Vec<&[f64]> = coefs
            .iter()
            .filter(|(mu, _)| (mu - lambda).abs() <= 1e-3 * scale)
            .map(|(_, v)| v.as_slice())
            .collect();
        let y = tridiagonal_eigvec(alpha, off, lambda, &mates, scale);
        coefs.push((lambda, y));
    }

    let mut values = Vec::with_capacity(chosen.len());
    let mut vectors = vec![0.0; n * chosen.len()];
    for (col, (lambda, y)) in coefs.iter().enumerate() {
        values.push(*lambda);
        let out = &mut vectors[col * n..(col + 1) * n];
        for (k, q) in basis.chunks_exact(n).enumerate() {
            if y[k] != 0.0 {
                axpy(y[k], q, out);
            }
        }
        let nrm = norm(out);
        if nrm > 0.0 {
            out.iter_mut().for_each(|v| *v /= nrm);
        }
    }
    EigenPairs { values, vectors, n }
}

/// Unit eigenvector of the symmetric tridiagonal matrix (`diag`, `off`) for
/// the eigenvalue `lambda`, by inverse iteration with partial pivoting.
/// Components along `mates` (orthonormal vectors of nearby eigenvalues) are
/// removed at every step.
fn tridiagonal_eigvec(diag: &[f64], off: &[f64], lambda: f64, mates: &[&[f64]], scale: f64) -> Vec<f64> {
    let m = diag.len();
    if m == 1 {
        return vec![1.0];
    }
    let tiny = f64::EPSILON * scale;
    // LU of T − λI with row interchanges; U has two superdiagonals.
    let mut u0: Vec<f64> = diag.iter().map(|a| a - lambda).collect();
    let mut u1 = off.to_vec();
    let mut u2 = vec![0.0; m.saturating_sub(2)];
    let mut mult = vec![0.0; m - 1];
    let mut swapped = vec![false; m - 1];
    for i in 0..m - 1 {
        let sub = off[i];
        if u0[i].abs() >= sub.abs() {
            let piv = if u0[i] == 0.0 { tiny } else { u0[i] };
            u0[i] = piv;
            let l = sub / piv;
            mult[i] = l;
            u0[i + 1] -= l * u1[i];
        } else {
            let l = u0[i] / sub;
            mult[i] = l;
            swapped[i] = true;
            let row_i1 = u1[i];
            u0[i] = sub;
            u1[i] = u0[i + 1];
            u0[i + 1] = row_i1 - l * u1[i];
            if i + 2 < m {
                u2[i] = u1[i + 1];
                u1[i + 1] = -l * u1[i + 1];
            }
        }
    }
    if u0[m - 1] == 0.0 {
        u0[m - 1] = tiny;
    }
    let solve = |b: &mut [f64]| {
        for i in 0..m - 1 {
            if swapped[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= mult[i] * b[i];
        }
        for i in (0..m).rev() {
            let mut v = b[i];
            if i + 1 < m {
                v -= u1[i] * b[i + 1];
            }
            if i + 2 < m {
                v -= u2[i] * b[i + 2];
            }
            b[i] = v / u0[i];
        }
    };
    let mut x: Vec<f64> = (0..m).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64 / 13.0).collect();
    for _ in 0..4 {
        let nrm = norm(&x);
        x.iter_mut().for_each(|v| *v /= nrm);
        solve(&mut x);
        for mate in mates {
            let c = dot(mate, &x);
            axpy(-c, mate, &mut x);
        }
        if x.iter().any(|v| !v.is_finite()) {
            x = (0..m).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
        }
    }
    let nrm = norm(&x);
    x.iter_mut().for_each(|v| *v /= nrm);
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn random_symmetric(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let x = rng.random::<f64>() * 2.0 - 1.0;
                a[i * n + j] = x;
                a[j * n + i] = x;
            }
        }
        a
    }

    fn oracle_values(a: &[f64], n: usize) -> Vec<f64> {
        let m = DMatrix::from_row_slice(n, n, a);
        let mut v: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    fn residual(a: &[f64], n: usize, lambda: f64, x: &[f64]) -> f64 {
        (0..n)
            .map(|i| {
                let ax: f64 = (0..n).map(|j| a[i * n + j] * x[j]).sum();
                (ax - lambda * x[i]).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn dense_matches_oracle() {
        for (n, seed) in [(1, 1), (2, 2), (7, 3), (40, 4)] {
            let a = random_symmetric(n, seed);
            let pairs = dense_symmetric_eigen(&a, n);
            let expected = oracle_values(&a, n);
            for (got, want) in pairs.values.iter().zip(&expected) {
                assert!((got - want).abs() < 1e-10, "{got} vs {want}");
            }
            for j in 0..n {
                assert!(residual(&a, n, pairs.values[j], pairs.vector(j)) < 1e-9);
            }
        }
    }

    #[test]
    fn tridiagonal_ql_diagonal_input() {
        let mut d = vec![3.0, 1.0, 2.0];
        let mut e = vec![0.0; 3];
        tql2(&mut d, &mut e, &mut []);
        let mut sorted = d.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(sorted, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn lanczos_extremes_match_oracle() {
        let n = 120;
        let a = random_symmetric(n, 11);
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                y[i] = (0..n).map(|j| a[i * n + j] * x[j]).sum();
            }
        };
        let expected = oracle_values(&a, n);
        let small = lanczos(apply, n, &[], Target::Smallest(3), &LanczosConfig::default(), 5);
        for k in 0..3 {
            assert!((small.values[k] - expected[k]).abs() < 1e-7);
        }
        let big = lanczos(apply, n, &[], Target::LargestMagnitude(1), &LanczosConfig::default(), 5);
        let want = expected[0].abs().max(expected[n - 1].abs());
        assert!((big.values[0].abs() - want).abs() < 1e-7 * want);
        assert!(residual(&a, n, big.values[0], big.vector(0)) < 1e-5);
    }

    #[test]
    fn lanczos_handles_multiplicity_and_deflation() {
        // 4/3 * I on the complement of the constant vector (normalized
        // Laplacian of K4).
        let n = 4;
        let mut a = vec![-1.0 / 3.0; n * n];
        for i in 0..n {
            a[i * n + i] = 1.0;
        }
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                y[i] = (0..n).map(|j| a[i * n + j] * x[j]).sum();
            }
        };
        let null = vec![0.5; 4];
        let pairs = lanczos(apply, n, &null, Target::Smallest(3), &LanczosConfig::default(), 1);
        assert_eq!(pairs.len(), 3);
        for &v in &pairs.values {
            assert!((v - 4.0 / 3.0).abs() < 1e-10);
        }
        for i in 0..3 {
            for j in 0..3 {
                let d = dot(pairs.vector(i), pairs.vector(j));
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn sign_convention() {
        let mut v = vec![0.0, -0.6, 0.8, 1.0, 0.0];
        canonicalize_signs(&mut v[..3], 3);
        assert_eq!(&v[..3], &[0.0, 0.6, -0.8]);
    }
}
