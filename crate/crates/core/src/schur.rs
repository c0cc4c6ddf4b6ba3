//! Real Schur form `A = Q T Qᵀ` by Francis double-shift QR on the Hessenberg form.
//!
//! Exceptional shifts are applied after 10 and 30 stalled sweeps, which keeps the
//! iteration moving on matrices with many repeated eigenvalues. Diagonal blocks
//! of `T` are 1×1 for real eigenvalues and 2×2 for complex-conjugate pairs; all
//! entries below those blocks are exactly zero.

use nalgebra::{DMatrix, Hessenberg};

const MAX_SWEEPS_PER_EIGENVALUE: usize = 60;

pub(crate) struct RealSchur {
    pub q: DMatrix<f64>,
    pub t: DMatrix<f64>,
    /// `(start, size)` of every diagonal block, in order.
    pub blocks: Vec<(usize, usize)>,
}

pub(crate) fn real_schur(a: &DMatrix<f64>) -> Option<RealSchur> {
    let nn = a.nrows();
    if nn == 0 {
        return Some(RealSchur {
            q: DMatrix::zeros(0, 0),
            t: DMatrix::zeros(0, 0),
            blocks: Vec::new(),
        });
    }
    let (mut v, mut h) = Hessenberg::new(a.clone()).unpack();
    for j in 0..nn {
        for i in j + 2..nn {
            h[(i, j)] = 0.0;
        }
    }

    let eps = f64::EPSILON;
    let norm: f64 = (0..nn)
        .flat_map(|i| (i.saturating_sub(1)..nn).map(move |j| (i, j)))
        .map(|(i, j)| h[(i, j)].abs())
        .sum();
    let mut blocks = Vec::new();
    if norm == 0.0 {
        blocks.extend((0..nn).map(|k| (k, 1)));
        return Some(RealSchur { q: v, t: h, blocks });
    }

    let mut n = nn as isize - 1;
    let mut exshift = 0.0;
    let mut iter = 0;
    let (mut p, mut q, mut r, mut s, mut z);
    let (mut w, mut x, mut y);

    while n >= 0 {
        let nu = n as usize;
        let mut l = nu;
        while l > 0 {
            s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[(l, l - 1)].abs() < eps * s {
                h[(l, l - 1)] = 0.0;
                break;
            }
            l -= 1;
        }

        if l == nu {
            h[(nu, nu)] += exshift;
            blocks.push((nu, 1));
            n -= 1;
            iter = 0;
        } else if l + 1 == nu {
            let m = nu - 1;
            w = h[(nu, m)] * h[(m, nu)];
            p = (h[(m, m)] - h[(nu, nu)]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[(nu, nu)] += exshift;
            h[(m, m)] += exshift;
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                x = h[(nu, m)];
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;
                for j in m..nn {
                    let zz = h[(m, j)];
                    h[(m, j)] = q * zz + p * h[(nu, j)];
                    h[(nu, j)] = q * h[(nu, j)] - p * zz;
                }
                for i in 0..=nu {
                    let zz = h[(i, m)];
                    h[(i, m)] = q * zz + p * h[(i, nu)];
                    h[(i, nu)] = q * h[(i, nu)] - p * zz;
                }
                for i in 0..nn {
                    let zz = v[(i, m)];
                    v[(i, m)] = q * zz + p * v[(i, nu)];
                    v[(i, nu)] = q * v[(i, nu)] - p * zz;
                }
                h[(nu, m)] = 0.0;
                blocks.push((nu, 1));
                blocks.push((m, 1));
            } else {
                blocks.push((m, 2));
            }
            n -= 2;
            iter = 0;
        } else {
            x = h[(nu, nu)];
            y = 0.0;
            w = 0.0;
            if l < nu {
                y = h[(nu - 1, nu - 1)];
                w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            }
            if iter == 10 {
                exshift += x;
                for i in 0..=nu {
                    h[(i, i)] -= x;
                }
                s = h[(nu, nu - 1)].abs() + h[(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=nu {
                        h[(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            if iter > MAX_SWEEPS_PER_EIGENVALUE {
                return None;
            }

            // Look for two consecutive small subdiagonal elements.
            let mut m = nu - 2;
            loop {
                z = h[(m, m)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[(m + 1, m)] + h[(m, m + 1)];
                q = h[(m + 1, m + 1)] - z - r - s;
                r = h[(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[(m, m - 1)].abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (h[(m - 1, m - 1)].abs() + z.abs() + h[(m + 1, m + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nu {
                h[(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[(i, i - 3)] = 0.0;
                }
            }

            // Double QR step on rows l..=n and columns m..=n.
            for k in m..nu {
                let notlast = k != nu - 1;
                if k != m {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if notlast { h[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                } else {
                    x = 0.0;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[(k, k - 1)] = -s * x;
                    } else if l != m {
                        h[(k, k - 1)] = -h[(k, k - 1)];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..nn {
                        let mut pp = h[(k, j)] + q * h[(k + 1, j)];
                        if notlast {
                            pp += r * h[(k + 2, j)];
                            h[(k + 2, j)] -= pp * z;
                        }
                        h[(k, j)] -= pp * x;
                        h[(k + 1, j)] -= pp * y;
                    }
                    for i in 0..=nu.min(k + 3) {
                        let mut pp = x * h[(i, k)] + y * h[(i, k + 1)];
                        if notlast {
                            pp += z * h[(i, k + 2)];
                            h[(i, k + 2)] -= pp * r;
                        }
                        h[(i, k)] -= pp;
                        h[(i, k + 1)] -= pp * q;
                    }
                    for i in 0..nn {
                        let mut pp = x * v[(i, k)] + y * v[(i, k + 1)];
                        if notlast {
                            pp += z * v[(i, k + 2)];
                            v[(i, k + 2)] -= pp * r;
                        }
                        v[(i, k)] -= pp;
                        v[(i, k + 1)] -= pp * q;
                    }
                }
            }
        }
    }

    blocks.sort_unstable();
    for &(k, size) in &blocks {
        if k > 0 {
            h[(k, k - 1)] = 0.0;
        }
        for j in 0..k {
            for i in k..k + size {
                h[(i, j)] = 0.0;
            }
        }
    }
    Some(RealSchur { q: v, t: h, blocks })
}
