//! Spectral diagnostics, convergence-bound curves and empirical consensus.
//!
//! Two spectral-gap notions are reported side by side:
//!
//! - `rho_mixing = max(|λ₂(W)|, |λₙ(W)|)²` on the mixing matrix, and
//! - `rho_laplacian = 1 − λ₂(L)` on the normalised Laplacian `L = I − W`.
//!
//! Bounds are evaluated with unit leading constants and are meant as
//! diagnostic curves to plot next to measured consensus error, not as
//! asserted ground truth.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::rng::rng_for;
use crate::sim::{DeviceState, Point, TopologyGraph};

pub const SYMMETRY_TOL: f64 = 1e-9;
pub const RESIDUAL_TOL: f64 = 1e-8;
pub const MAX_AVERAGING_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub lambda_2: f64,
    pub lambda_n: f64,
    pub rho_mixing: f64,
    pub laplacian_lambda_2: f64,
    pub rho_laplacian: f64,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// False when `rho_mixing` reaches 1, i.e. the graph is disconnected
    /// (or periodic) and consensus is not guaranteed.
    pub contracting: bool,
}

/// Full symmetric eigendecomposition of a mixing matrix.
///
/// A single node has no non-trivial mode; its `lambda_2` and `lambda_n` are
/// reported as 0.
pub fn spectral_report(w: &DMatrix<f64>) -> Result<SpectralReport> {
    let n = w.nrows();
    if n != w.ncols() {
        return Err(Error::DimensionMismatch {
            context: "mixing matrix columns",
            expected: n,
            actual: w.ncols(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidInput("empty mixing matrix".into()));
    }
    let mut deviation = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            deviation = deviation.max((w[(i, j)] - w[(j, i)]).abs());
        }
    }
    if deviation > SYMMETRY_TOL {
        return Err(Error::Asymmetric { deviation });
    }

    let eig = SymmetricEigen::new(w.clone());
    let scale = w.norm().max(f64::MIN_POSITIVE);
    for k in 0..n {
        let v = eig.eigenvectors.column(k);
        let residual = (w * v - v * eig.eigenvalues[k]).norm();
        if residual > RESIDUAL_TOL * scale {
            return Err(Error::Eigen { residual });
        }
    }
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));

    let (lambda_2, lambda_n) = if n == 1 {
        (0.0, 0.0)
    } else {
        (eigenvalues[1], eigenvalues[n - 1])
    };
    let rho_mixing = lambda_2.abs().max(lambda_n.abs()).powi(2);
    let laplacian_lambda_2 = 1.0 - lambda_2;
    Ok(SpectralReport {
        lambda_2,
        lambda_n,
        rho_mixing,
        laplacian_lambda_2,
        rho_laplacian: 1.0 - laplacian_lambda_2,
        eigenvalues,
        contracting: rho_mixing < 1.0 - SYMMETRY_TOL,
    })
}

/// Second-largest eigenvalue of a graph's mixing matrix; 0 for one node.
pub fn lambda_2(graph: &TopologyGraph) -> Result<f64> {
    Ok(spectral_report(graph.mixing())?.lambda_2)
}

/// λ₂ of the two gossip layers of a clustered snapshot.
///
/// Intra: the largest λ₂ over the induced subgraphs of clusters with at
/// least two members (0 if there are none). Inter: λ₂ of the quotient graph
/// whose nodes are clusters, joined when any of their members are in range.
pub fn layer_lambdas(graph: &TopologyGraph, clustering: &Clustering) -> Result<(f64, f64)> {
    let mut intra = 0.0f64;
    for c in &clustering.clusters {
        if c.members.len() >= 2 {
            intra = intra.max(lambda_2(&graph.induced(&c.members))?);
        }
    }
    let k = clustering.len();
    let mut edges = Vec::new();
    for (i, j) in graph.edges() {
        let (a, b) = (clustering.cluster_of[i], clustering.cluster_of[j]);
        if a != b {
            edges.push((a.min(b), a.max(b)));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    let inter = if k < 2 {
        0.0
    } else {
        lambda_2(&TopologyGraph::from_edges(k, &edges))?
    };
    Ok((intra, inter))
}

/// Lower and upper bounds on the ε-averaging time for second eigenvalue λ:
/// `0.5·ln(1/ε)/ln(1/λ)` and `3·ln(1/ε)/ln(1/λ)`.
pub fn averaging_time_bounds(epsilon: f64, lambda: f64) -> Result<(f64, f64)> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidInput(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if lambda >= 1.0 {
        return Err(Error::Disconnected(format!(
            "averaging time undefined for lambda = {lambda}"
        )));
    }
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::InvalidInput(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    let ratio = epsilon.ln() / lambda.ln();
    Ok((0.5 * ratio, 3.0 * ratio))
}

/// Symbols of the convergence bounds. `mu` is carried as documentation only;
/// no evaluated bound uses it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceBound {
    pub t: f64,
    pub n: usize,
    pub f0_minus_fstar: f64,
    pub l_lipschitz: f64,
    pub sigma: f64,
    pub varsigma: f64,
    pub mu: f64,
    pub epsilon: f64,
    pub lambda_max: f64,
    pub c: f64,
    pub t_ave_lower: f64,
    pub t_ave_upper: f64,
    /// `exp(c · t_ave_upper · ln λ_max)`.
    pub consensus_term: f64,
}

impl ConvergenceBound {
    /// Unit problem constants, with averaging-time fields filled from
    /// `(epsilon, lambda_max)`.
    pub fn unit(t: f64, n: usize, epsilon: f64, lambda_max: f64) -> Result<Self> {
        let (lo, hi) = averaging_time_bounds(epsilon, lambda_max)?;
        Ok(Self {
            t,
            n,
            f0_minus_fstar: 1.0,
            l_lipschitz: 1.0,
            sigma: 1.0,
            varsigma: 1.0,
            mu: 0.0,
            epsilon,
            lambda_max,
            c: 1.0,
            t_ave_lower: lo,
            t_ave_upper: hi,
            consensus_term: consensus_term(hi, lambda_max, 1.0),
        })
    }
}

/// `8(f0 − f*)L/T + (8(f0 − f*) + 4L)σ/√(Tn)`.
pub fn dpsgd_rate_bound(b: &ConvergenceBound) -> f64 {
    let t = b.t.max(1.0);
    let n = b.n.max(1) as f64;
    8.0 * b.f0_minus_fstar * b.l_lipschitz / t
        + (8.0 * b.f0_minus_fstar + 4.0 * b.l_lipschitz) * b.sigma / (t * n).sqrt()
}

/// `exp(c · t_ave · ln λ)`: 1 when no averaging happens, 0 as λ → 0⁺.
pub fn consensus_term(t_ave: f64, lambda: f64, c: f64) -> f64 {
    if t_ave == 0.0 {
        1.0
    } else if lambda <= 0.0 {
        0.0
    } else {
        (c * t_ave * lambda.ln()).exp()
    }
}

/// `1/T + 1/√(nT) + exp(c·T_intra·ln λ_intra) + exp(c·T_inter·ln λ_inter)`,
/// each layer given as `(T_ave, λ_max)`.
pub fn bilayer_rate_bound(intra: (f64, f64), inter: (f64, f64), t: f64, n: usize, c: f64) -> f64 {
    let t = t.max(1.0);
    let n = n.max(1) as f64;
    1.0 / t + 1.0 / (n * t).sqrt() + consensus_term(intra.0, intra.1, c) + consensus_term(inter.0, inter.1, c)
}

/// Squared distance of each vector from the unweighted mean.
pub fn consensus_distances(vectors: &[&[f64]]) -> Vec<f64> {
    let n = vectors.len();
    if n == 0 {
        return Vec::new();
    }
    let dim = vectors[0].len();
    let mut mean = vec![0.0; dim];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v.iter()) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    vectors
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, m)| (x - m) * (x - m)).sum())
        .collect()
}

/// Mean squared distance from the mean; 0 for fewer than two vectors.
pub fn consensus_error(vectors: &[&[f64]]) -> f64 {
    if vectors.len() < 2 {
        return 0.0;
    }
    let d = consensus_distances(vectors);
    d.iter().sum::<f64>() / d.len() as f64
}

pub fn device_consensus_error(devices: &[DeviceState]) -> f64 {
    let v: Vec<&[f64]> = devices.iter().map(|d| d.params.values()).collect();
    consensus_error(&v)
}

fn scalar_error(x: &DVector<f64>) -> f64 {
    let n = x.len() as f64;
    let mean = x.sum() / n;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Consensus error after each of `steps` synchronous `x ← Wx` updates,
/// starting with the error of `x0` at index 0.
pub fn mixing_trajectory(w: &DMatrix<f64>, x0: &[f64], steps: usize) -> Vec<f64> {
    let mut x = DVector::from_column_slice(x0);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(scalar_error(&x));
    for _ in 0..steps {
        x = w * &x;
        out.push(scalar_error(&x));
    }
    out
}

/// Seeded standard-normal state scaled to unit consensus error.
pub fn unit_consensus_state(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, &[crate::rng::tag::MIXING]);
    let x = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let e = scalar_error(&x);
    if e > 0.0 {
        (x / e.sqrt()).iter().copied().collect()
    } else {
        x.iter().copied().collect()
    }
}

/// Iterations of `x ← Wx` until consensus error falls to `ε²` times its
/// initial (unit) value.
pub fn empirical_averaging_time(w: &DMatrix<f64>, epsilon: f64, seed: u64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidInput(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let n = w.nrows();
    if n < 2 {
        return Ok(0);
    }
    let mut x = DVector::from_vec(unit_consensus_state(n, seed));
    let initial = scalar_error(&x);
    let target = epsilon * epsilon * initial;
    let mut next = DVector::zeros(n);
    for t in 1..=MAX_AVERAGING_ITERATIONS {
        w.mul_to(&x, &mut next);
        std::mem::swap(&mut x, &mut next);
        if scalar_error(&x) <= target {
            return Ok(t);
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_AVERAGING_ITERATIONS,
    })
}

/// Outcome of comparing nested sparse/dense graph pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCheck {
    pub draws: usize,
    /// `(draw, rho_sparse, rho_dense)` where the denser graph mixed slower.
    pub violations: Vec<(usize, f64, f64)>,
}

/// Compare `rho_mixing` of a geometric graph against a denser supergraph on
/// the same vertices (larger radius), over `draws` seeded layouts.
/// Metropolis weights do not make this monotone in general, so callers
/// should report violations rather than fail on them.
pub fn density_monotonicity(draws: usize, n: usize, seed: u64) -> Result<DensityCheck> {
    let mut violations = Vec::new();
    for draw in 0..draws {
        let mut rng = rng_for(seed, &[draw as u64]);
        let pts: Vec<Point> = (0..n)
            .map(|_| Point::new(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)))
            .collect();
        let sparse = TopologyGraph::from_positions(&pts, 40.0);
        let dense = TopologyGraph::from_positions(&pts, 60.0);
        let rs = spectral_report(sparse.mixing())?.rho_mixing;
        let rd = spectral_report(dense.mixing())?.rho_mixing;
        if rd > rs + 1e-12 {
            violations.push((draw, rs, rd));
        }
    }
    Ok(DensityCheck { draws, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{dk_means, ClusteringConfig};
    use crate::model::{OptimiserConfig, ParamVector};

    /// Cyclic Jacobi eigenvalues for a small symmetric matrix, descending.
    fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
        let n = m.nrows();
        let mut a = m.clone();
        for _ in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[(p, q)] * a[(p, q)];
                }
            }
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        ev.sort_by(|x, y| y.total_cmp(x));
        ev
    }

    fn four_cycle() -> TopologyGraph {
        TopologyGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (0, 3)])
    }

    #[test]
    fn projector_has_zero_gap_parameter() {
        let w = DMatrix::from_element(4, 4, 0.25);
        let r = spectral_report(&w).unwrap();
        assert!(r.lambda_2.abs() < 1e-12 && r.lambda_n.abs() < 1e-12);
        assert!(r.rho_mixing < 1e-20);
        assert!((r.eigenvalues[0] - 1.0).abs() < 1e-9);
        assert!(r.contracting);
    }

    #[test]
    fn identity_is_flagged() {
        let r = spectral_report(&DMatrix::identity(5, 5)).unwrap();
        assert_eq!(r.lambda_2, 1.0);
        assert_eq!(r.rho_mixing, 1.0);
        assert!(!r.contracting);
        assert_eq!(r.laplacian_lambda_2, 0.0);
    }

    #[test]
    fn four_cycle_matches_jacobi_oracle() {
        let g = four_cycle();
        let w = g.mixing();
        // Lazy Metropolis on a 2-regular graph is I/2 + A/4.
        for i in 0..4 {
            assert_eq!(w[(i, i)], 0.5);
        }
        let oracle = jacobi_eigenvalues(w);
        for (a, b) in oracle.iter().zip([1.0, 0.5, 0.5, 0.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let r = spectral_report(w).unwrap();
        for (a, b) in r.eigenvalues.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((r.lambda_2 - 0.5).abs() < 1e-9);
        assert!(r.lambda_n.abs() < 1e-9);
        assert!((r.rho_mixing - 0.25).abs() < 1e-9);
        assert!((r.laplacian_lambda_2 - 0.5).abs() < 1e-9);
        assert!((r.rho_laplacian - 0.5).abs() < 1e-9);
    }

    #[test]
    fn random_geometric_spectra_match_oracle() {
        for seed in 0..20 {
            let mut rng = rng_for(seed, &[]);
            let pts: Vec<Point> = (0..12)
                .map(|_| Point::new(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)))
                .collect();
            let g = TopologyGraph::from_positions(&pts, 45.0);
            let r = spectral_report(g.mixing()).unwrap();
            let oracle = jacobi_eigenvalues(g.mixing());
            for (a, b) in r.eigenvalues.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-9);
            }
            assert!((r.eigenvalues[0] - 1.0).abs() < 1e-9);
            assert!(r.eigenvalues.iter().all(|&l| (-1.0 - 1e-9..=1.0 + 1e-9).contains(&l)));
        }
    }

    #[test]
    fn asymmetric_rejected() {
        let mut w = DMatrix::identity(3, 3);
        w[(0, 1)] = 1e-6;
        assert!(matches!(spectral_report(&w), Err(Error::Asymmetric { .. })));
        assert!(spectral_report(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn single_node_has_no_gap() {
        let r = spectral_report(&DMatrix::identity(1, 1)).unwrap();
        assert_eq!((r.lambda_2, r.lambda_n, r.rho_mixing), (0.0, 0.0, 0.0));
    }

    #[test]
    fn averaging_bounds_examples() {
        let (lo, hi) = averaging_time_bounds(0.3, 0.3).unwrap();
        assert!((lo - 0.5).abs() < 1e-15 && (hi - 3.0).abs() < 1e-15);
        let (lo, hi) = averaging_time_bounds(1e-3, 0.5).unwrap();
        let oracle = (1e3f64).ln() / 2f64.ln();
        assert!((lo - 0.5 * oracle).abs() < 1e-12 && (lo - 4.983).abs() < 1e-3);
        assert!((hi - 3.0 * oracle).abs() < 1e-12 && (hi - 29.90).abs() < 1e-2);
        for (e, l) in [(1e-6, 0.9), (0.5, 0.01), (0.1, 0.999)] {
            let (lo, hi) = averaging_time_bounds(e, l).unwrap();
            assert!((hi / lo - 6.0).abs() < 1e-12);
        }
        assert!(matches!(averaging_time_bounds(0.1, 1.0), Err(Error::Disconnected(_))));
        assert!(averaging_time_bounds(1.0, 0.5).is_err());
    }

    #[test]
    fn dpsgd_bound_examples() {
        let mut b = ConvergenceBound::unit(100.0, 4, 0.1, 0.5).unwrap();
        b.sigma = 0.0;
        b.f0_minus_fstar = 2.0;
        b.l_lipschitz = 3.0;
        assert!((dpsgd_rate_bound(&b) - 8.0 * 2.0 * 3.0 / 100.0).abs() < 1e-15);
        b.f0_minus_fstar = 0.0;
        assert_eq!(dpsgd_rate_bound(&b), 0.0);

        let mut u = ConvergenceBound::unit(1e4, 1, 0.1, 0.5).unwrap();
        let at_t = dpsgd_rate_bound(&u);
        u.t = 4e4;
        assert!(dpsgd_rate_bound(&u) / at_t <= 0.5);
    }

    #[test]
    fn bilayer_bound_examples() {
        let base = 1.0 / 50.0 + 1.0 / (10.0f64 * 50.0).sqrt();
        assert!((bilayer_rate_bound((5.0, 1e-300), (5.0, 0.0), 50.0, 10, 1.0) - base).abs() < 1e-12);
        assert!((bilayer_rate_bound((0.0, 0.5), (0.0, 0.7), 50.0, 10, 1.0) - (base + 2.0)).abs() < 1e-12);
        let term = consensus_term(10.0, 0.5, 1.0);
        assert!((term - 2f64.powi(-10)).abs() < 1e-15);
        assert!((term - 9.77e-4).abs() < 1e-6);
    }

    #[test]
    fn consensus_error_examples() {
        assert_eq!(consensus_error(&[&[1.0, 2.0], &[1.0, 2.0]]), 0.0);
        assert_eq!(consensus_error(&[&[0.0], &[2.0]]), 1.0);
        assert_eq!(consensus_error(&[&[5.0]]), 0.0);
        let a: Vec<Vec<f64>> = vec![vec![0.3, -1.0], vec![2.0, 0.5], vec![-0.7, 4.0]];
        let b: Vec<Vec<f64>> = a.iter().map(|v| v.iter().map(|x| x + 17.5).collect()).collect();
        let ra: Vec<&[f64]> = a.iter().map(|v| v.as_slice()).collect();
        let rb: Vec<&[f64]> = b.iter().map(|v| v.as_slice()).collect();
        assert!((consensus_error(&ra) - consensus_error(&rb)).abs() < 1e-12);
    }

    #[test]
    fn empirical_averaging_examples() {
        let proj = DMatrix::from_element(5, 5, 0.2);
        for e in [0.9, 0.1, 1e-6] {
            assert_eq!(empirical_averaging_time(&proj, e, 3).unwrap(), 1);
        }
        assert!(matches!(
            empirical_averaging_time(&DMatrix::identity(4, 4), 0.1, 0),
            Err(Error::NonConvergence { .. })
        ));
        let (lo, hi) = averaging_time_bounds(1e-3, 0.5).unwrap();
        for seed in 0..10 {
            let t = empirical_averaging_time(four_cycle().mixing(), 1e-3, seed).unwrap() as f64;
            assert!(t >= lo && t <= 10.0 * hi, "t = {t}");
        }
    }

    #[test]
    fn contraction_per_step() {
        for seed in 0..10 {
            let mut rng = rng_for(seed, &[9]);
            let pts: Vec<Point> = (0..16)
                .map(|_| Point::new(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)))
                .collect();
            let g = TopologyGraph::from_positions(&pts, 50.0);
            let r = spectral_report(g.mixing()).unwrap();
            let l = r.lambda_2.abs().max(r.lambda_n.abs());
            let traj = mixing_trajectory(g.mixing(), &unit_consensus_state(16, seed), 40);
            for w in traj.windows(2) {
                assert!(w[1] <= l * l * w[0] + 1e-12);
            }
        }
    }

    #[test]
    fn density_check_runs_and_reports() {
        let c = density_monotonicity(50, 20, 7).unwrap();
        assert_eq!(c.draws, 50);
        if !c.violations.is_empty() {
            eprintln!("denser graph mixed slower in {} of 50 draws", c.violations.len());
        }
    }

    #[test]
    fn layer_lambdas_on_two_cliques() {
        // Two triangles joined by one edge.
        let pts = [(0.0, 0.0), (1.0, 0.0), (0.5, 0.8), (10.0, 0.0), (11.0, 0.0), (10.5, 0.8)];
        let devs: Vec<DeviceState> = pts
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| {
                DeviceState::new(i, Point::new(x, y), 9.5, ParamVector::zeros(1), OptimiserConfig::sgd(0.1, 0.0))
            })
            .collect();
        let g = TopologyGraph::snapshot(&devs);
        let space = crate::clustering::GeoSpace::new(devs.iter().map(|d| d.position).collect());
        let c = crate::clustering::dk_means_from_heads(&space, &g, [0, 3].into_iter().collect(), 1, &mut rng_for(0, &[]));
        assert_eq!(c.len(), 2);
        let (intra, inter) = layer_lambdas(&g, &c).unwrap();
        let tri = lambda_2(&TopologyGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)])).unwrap();
        assert!((intra - tri).abs() < 1e-12);
        // Two-node quotient with one edge: W = [[.5,.5],[.5,.5]], λ₂ = 0.
        assert!(inter.abs() < 1e-12);

        let one = dk_means(&devs, &TopologyGraph::from_positions(&g_positions(&devs), 100.0), &ClusteringConfig::new(1), &mut rng_for(0, &[]));
        let full = TopologyGraph::from_positions(&g_positions(&devs), 100.0);
        assert_eq!(layer_lambdas(&full, &one).unwrap().1, 0.0);
    }

    fn g_positions(devs: &[DeviceState]) -> Vec<Point> {
        devs.iter().map(|d| d.position).collect()
    }
}
