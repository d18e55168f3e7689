//! Aberth–Ehrlich simultaneous root finding and root clustering.

use crate::sphere::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MAX_SWEEPS: usize = 600;
const RESTARTS: usize = 8;

/// All roots of the polynomial with ascending `coefficients`, with multiplicity.
///
/// Trailing zero coefficients are ignored; leading zero coefficients give roots at zero.
pub fn aberth(coefficients: &[C64]) -> Vec<C64> {
    let mut c: Vec<C64> = coefficients.to_vec();
    while c.last().is_some_and(|x| *x == C64::new(0.0, 0.0)) {
        c.pop();
    }
    let mut zeros = 0;
    while c.len() > 1 && c[0] == C64::new(0.0, 0.0) {
        c.remove(0);
        zeros += 1;
    }
    let n = c.len().saturating_sub(1);
    let mut out = vec![C64::new(0.0, 0.0); zeros];
    match n {
        0 => return out,
        1 => {
            out.push(-c[0] / c[1]);
            return out;
        }
        _ => {}
    }
    let lead = c[n];
    let monic: Vec<C64> = c.iter().map(|x| x / lead).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_ab3e);
    let mut best: Option<(f64, Vec<C64>)> = None;
    for attempt in 0..RESTARTS {
        let mut z = initial_guesses(&monic, attempt, &mut rng);
        let converged = sweep(&monic, &mut z);
        let residual = worst_residual(&monic, &z);
        if converged {
            out.extend(z);
            return out;
        }
        if best.as_ref().is_none_or(|(r, _)| residual < *r) {
            best = Some((residual, z));
        }
    }
    out.extend(best.map(|b| b.1).unwrap_or_default());
    out
}

fn initial_guesses(monic: &[C64], attempt: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let n = monic.len() - 1;
    // Fujiwara-type bound on root moduli.
    let bound = (0..n)
        .map(|i| monic[i].norm().powf(1.0 / (n - i) as f64))
        .fold(0.0, f64::max)
        .max(1e-3);
    let radius = 0.5 * bound * (1.0 + 0.3 * attempt as f64);
    let offset = 0.4 + if attempt == 0 { 0.0 } else { rng.gen::<f64>() };
    (0..n)
        .map(|k| {
            let t = std::f64::consts::TAU * (k as f64 + offset) / n as f64;
            let jitter = if attempt == 0 { 1.0 } else { 1.0 + 0.2 * rng.gen::<f64>() };
            C64::from_polar(radius * jitter, t)
        })
        .collect()
}

fn horner(monic: &[C64], z: C64) -> (C64, C64) {
    let mut p = C64::new(0.0, 0.0);
    let mut dp = C64::new(0.0, 0.0);
    for &c in monic.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

fn sweep(monic: &[C64], z: &mut [C64]) -> bool {
    let n = z.len();
    let mut done = vec![false; n];
    for _ in 0..MAX_SWEEPS {
        let mut all = true;
        for i in 0..n {
            if done[i] {
                continue;
            }
            let (p, dp) = horner(monic, z[i]);
            if p == C64::new(0.0, 0.0) {
                done[i] = true;
                continue;
            }
            let ratio = p / dp;
            let mut s = C64::new(0.0, 0.0);
            for j in 0..n {
                if j != i {
                    let d = z[i] - z[j];
                    if d != C64::new(0.0, 0.0) {
                        s += d.inv();
                    }
                }
            }
            let step = ratio / (C64::new(1.0, 0.0) - ratio * s);
            if !(step.re.is_finite() && step.im.is_finite()) {
                return false;
            }
            z[i] -= step;
            if step.norm() <= 4.0 * f64::EPSILON * (1.0 + z[i].norm()) {
                done[i] = true;
            } else {
                all = false;
            }
        }
        if all {
            return true;
        }
    }
    // Slow convergence happens at multiple roots; accept when residuals are tiny.
    let scale: f64 = monic.iter().map(|c| c.norm()).sum();
    worst_residual(monic, z) < 1e-10 * scale
}

fn worst_residual(monic: &[C64], z: &[C64]) -> f64 {
    z.iter()
        .map(|&x| {
            let (p, _) = horner(monic, x);
            p.norm() / monic.iter().map(|c| c.norm()).sum::<f64>().max(1.0) / (1.0 + x.norm()).powi(monic.len() as i32 - 1)
        })
        .fold(0.0, f64::max)
}

/// A cluster of numerically coincident roots.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cluster {
    pub center: C64,
    pub multiplicity: usize,
}

/// Groups roots closer than `rel * (1 + |z|)` and refines each cluster center.
///
/// Centers of size-m clusters are polished as simple roots of the (m-1)-th derivative.
pub fn cluster(coefficients: &[C64], roots: &[C64], rel: f64) -> Vec<Cluster> {
    let n = roots.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut j = i;
        while p[j] != r {
            let next = p[j];
            p[j] = r;
            j = next;
        }
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            let tol = rel * (1.0 + roots[i].norm().max(roots[j].norm()));
            if (roots[i] - roots[j]).norm() < tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[b] = a;
                }
            }
        }
    }
    let mut groups: Vec<(usize, Vec<C64>)> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        match groups.iter_mut().find(|g| g.0 == r) {
            Some(g) => g.1.push(roots[i]),
            None => groups.push((r, vec![roots[i]])),
        }
    }
    let poly = crate::poly::ComplexPolynomial::new(coefficients.to_vec());
    groups
        .into_iter()
        .map(|(_, members)| {
            let m = members.len();
            let centroid = members.iter().sum::<C64>() / m as f64;
            let center = polish(&poly.nth_derivative(m - 1), centroid, rel);
            Cluster { center, multiplicity: m }
        })
        .collect()
}

/// Newton polish of a simple root, rejecting steps that leave the basin of the guess.
pub fn polish(p: &crate::poly::ComplexPolynomial, guess: C64, rel: f64) -> C64 {
    let mut z = guess;
    let limit = rel * (1.0 + guess.norm());
    for _ in 0..50 {
        let (v, d) = p.eval_d(z);
        if d == C64::new(0.0, 0.0) {
            break;
        }
        let step = v / d;
        let next = z - step;
        if !(next.re.is_finite() && next.im.is_finite()) || (next - guess).norm() > limit {
            break;
        }
        z = next;
        if step.norm() <= 2.0 * f64::EPSILON * (1.0 + z.norm()) {
            break;
        }
    }
    z
}

/// Sorts cluster list deterministically by real part, then imaginary part.
pub fn sort_clusters(c: &mut [Cluster]) {
    c.sort_by(|a, b| {
        a.center
            .re
            .partial_cmp(&b.center.re)
            .unwrap()
            .then(a.center.im.partial_cmp(&b.center.im).unwrap())
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::ComplexPolynomial;

    #[test]
    fn cube_roots_of_unity() {
        let p = ComplexPolynomial::from_real(&[-1.0, 0.0, 0.0, 1.0]);
        let r = p.roots();
        assert_eq!(r.len(), 3);
        for z in r {
            assert!((z.powi(3) - 1.0).norm() < 1e-13);
        }
    }

    #[test]
    fn zero_roots_are_exact() {
        let r = aberth(&[C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        assert_eq!(r.len(), 3);
        assert_eq!(r.iter().filter(|z| **z == C64::new(0.0, 0.0)).count(), 2);
    }

    #[test]
    fn triple_root_clusters() {
        let roots = [C64::new(0.5, 0.2), C64::new(0.5, 0.2), C64::new(0.5, 0.2), C64::new(-1.0, 1.0)];
        let p = ComplexPolynomial::from_roots(&roots);
        let r = p.roots();
        let mut cl = cluster(p.coefficients(), &r, 1e-4);
        sort_clusters(&mut cl);
        assert_eq!(cl.len(), 2);
        assert_eq!(cl[0].multiplicity, 1);
        assert_eq!(cl[1].multiplicity, 3);
        assert!((cl[1].center - roots[0]).norm() < 1e-12);
    }
}
