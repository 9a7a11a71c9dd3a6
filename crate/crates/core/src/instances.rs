//! Seeded random instances shared by the verification suites.

use crate::measure::Potential;
use crate::rng::KickStream;
use crate::FiniteMarkovKernel;

/// A dense random kernel: every entry positive, so irreducible and
/// aperiodic. Entries are uniform(0,1) + 0.05, rows normalized.
pub fn random_positive_kernel(stream: &KickStream, case: u64, n: usize) -> FiniteMarkovKernel {
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut row: Vec<f64> =
            (0..n).map(|j| stream.uniform(case, (7 + i * n + j) as u64) + 0.05).collect();
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
        rows.push(row);
    }
    FiniteMarkovKernel::with_line_embedding(rows).expect("positive rows are a valid kernel")
}

/// A sparse random kernel kept irreducible by a full cycle: entry `(i, i+1
/// mod n)` is always positive, other entries appear with probability 1/2.
pub fn random_irreducible_kernel(stream: &KickStream, case: u64, n: usize) -> FiniteMarkovKernel {
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = vec![0.0; n];
        row[(i + 1) % n] = stream.uniform(case, (100 + i) as u64) + 0.1;
        for j in 0..n {
            if stream.bits(case, (200 + i * n + j) as u64) % 2 == 0 {
                row[j] += stream.uniform(case, (300 + i * n + j) as u64);
            }
        }
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
        rows.push(row);
    }
    FiniteMarkovKernel::with_line_embedding(rows).expect("cycle keeps the kernel valid")
}

/// A random potential with oscillation at most `osc`.
pub fn random_potential(stream: &KickStream, case: u64, n: usize, osc: f64) -> Potential {
    let values: Vec<f64> =
        (0..n).map(|i| osc * stream.uniform(case, (400 + i) as u64)).collect();
    Potential::new(values).expect("finite values")
}

/// A random probability vector with full support.
pub fn random_probability(stream: &KickStream, case: u64, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|i| stream.uniform(case, (500 + i) as u64) + 0.01).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::graph;

    #[test]
    fn random_kernels_are_irreducible() {
        let stream = KickStream::new(1, 0);
        for case in 0..50 {
            let n = 2 + (stream.bits(case, 0) % 5) as usize;
            for kernel in [
                random_positive_kernel(&stream, case, n),
                random_irreducible_kernel(&stream, case, n),
            ] {
                let adj = graph::support_adjacency(&kernel.matrix);
                assert_eq!(graph::condense(&adj).classes.len(), 1, "case {case}");
            }
        }
    }

    #[test]
    fn random_potentials_respect_the_oscillation_cap() {
        let stream = KickStream::new(2, 0);
        for case in 0..50 {
            let p = random_potential(&stream, case, 5, 0.05);
            assert!(p.computed_oscillation() < 0.05);
        }
    }
}
