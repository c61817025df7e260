//! Norm of the bilinear boundary Hamiltonian, analytic upper bounds on it,
//! and the entropy growth-rate check.
//!
//! For a particle-conserving bilinear `H_AB = Σ M_jk (c†_j c_k + h.c.)` the
//! single-particle matrix `[[0, M], [Mᵀ, 0]]` has eigenvalues `±σ_k`, the
//! singular values of `M`. Filling every positive level gives the largest
//! many-body eigenvalue, so `‖H_AB‖ = Σ σ_k`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;

use crate::linalg::hermitian_eigen_desc;
use crate::model::{build_boundary_block, pair_coupling, BoundaryBlock, LatticeSpec};
use crate::oracle::{apply_region_operator, bipartite_matrix, dense_entropy, dense_evolve, sector_bilinear, DenseHamiltonian, DenseState};
use crate::scaling::{log_fit, power_law_fit, LogFit, PowerLawFit};
use crate::{Error, Result, C64};

/// `‖H_AB‖`: the nuclear norm of the coupling block.
pub fn bilinear_norm(block: &BoundaryBlock) -> f64 {
    nuclear_norm(block.matrix())
}

/// Sum of singular values; symmetric matrices go through their eigenvalues.
pub fn nuclear_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.is_square() && *m == m.transpose() {
        return m.clone().symmetric_eigenvalues().iter().map(|v| v.abs()).sum();
    }
    m.singular_values().iter().sum()
}

/// Ratio `max/min` below which a norm series counts as size-independent.
pub const BOUNDED_RATIO: f64 = 1.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum NormClass {
    Power { mu: f64, mu_stderr: f64 },
    Logarithmic { p: f64 },
    Bounded,
}

/// `‖H_AB‖` at `ℓ = L/2` over a range of sizes, with its growth class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormScalingSeries {
    pub alpha: f64,
    pub d: usize,
    pub points: Vec<(usize, f64)>,
    pub classification: NormClass,
    pub power_fit: Option<PowerLawFit>,
    pub log_fit: Option<LogFit>,
}

/// Bounded when the series varies by less than [`BOUNDED_RATIO`]; otherwise
/// the model with the smaller residual per degree of freedom wins.
pub fn classify_norm_series(points: &[(usize, f64)]) -> Result<(NormClass, Option<PowerLawFit>, Option<LogFit>)> {
    let sizes: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let values: Vec<f64> = points.iter().map(|p| p.1).collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let power = if sizes.len() >= 4 { power_law_fit(&sizes, &values).ok() } else { None };
    let log = log_fit(&sizes, &values).ok();
    if lo > 0.0 && hi / lo < BOUNDED_RATIO {
        return Ok((NormClass::Bounded, power, log));
    }
    let class = match (&power, &log) {
        (Some(p), Some(l)) if p.identifiable && p.reduced_residual <= l.reduced_residual => {
            NormClass::Power { mu: p.mu, mu_stderr: p.stderr[1] }
        }
        (_, Some(l)) => NormClass::Logarithmic { p: l.p },
        (Some(p), None) => NormClass::Power { mu: p.mu, mu_stderr: p.stderr[1] },
        (None, None) => return Err(Error::Fit("norm series too short to classify".into())),
    };
    Ok((class, power, log))
}

/// `‖H_AB‖` at half filling and `ℓ = L/2` for each size, then classified.
pub fn norm_scaling_series(alpha: f64, sizes: &[usize]) -> Result<NormScalingSeries> {
    if sizes.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 sizes, got {}", sizes.len())));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Fit("sizes must be strictly increasing".into()));
    }
    let points = sizes
        .par_iter()
        .map(|&l| {
            let spec = LatticeSpec::new(l, alpha)?;
            Ok((l, bilinear_norm(&build_boundary_block(&spec, l / 2)?)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (classification, power_fit, log_fit) = classify_norm_series(&points)?;
    Ok(NormScalingSeries { alpha, d: 1, points, classification, power_fit, log_fit })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Bilinear,
    Interacting,
}

/// Inputs to the analytic bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParameters {
    pub alpha: f64,
    pub d: usize,
    pub g_max: f64,
}

impl BoundParameters {
    pub fn new(alpha: f64, d: usize, g_max: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::Domain(format!("dimension {d} must be 1, 2 or 3")));
        }
        if !(g_max > 0.0) || !g_max.is_finite() {
            return Err(Error::Domain(format!("g_max must be positive, got {g_max}")));
        }
        if !alpha.is_finite() {
            return Err(Error::Domain(format!("alpha must be finite, got {alpha}")));
        }
        Ok(Self { alpha, d, g_max })
    }

    /// Surface coefficient `Γ_d` of the `(d−1)`-sphere integral, `d ≥ 2`.
    pub fn surface_coefficient(&self) -> f64 {
        match self.d {
            2 => 2.0,
            3 => 2.0 * std::f64::consts::PI,
            _ => f64::NAN,
        }
    }

    /// `B(−1/2 + d/2, α + 1/2 − d/2)`.
    pub fn beta_bilinear(&self) -> f64 {
        let d = self.d as f64;
        beta(-0.5 + d / 2.0, self.alpha + 0.5 - d / 2.0)
    }

    /// `B((d−1)/2, (α−d+1)/2)`.
    pub fn beta_interacting(&self) -> f64 {
        let d = self.d as f64;
        beta((d - 1.0) / 2.0, (self.alpha - d + 1.0) / 2.0)
    }
}

/// `1 + (x^e − 1)/e`, continued by `1 + ln x` at `e = 0`.
fn growth_term(x: f64, e: f64) -> f64 {
    if e.abs() < 1e-12 {
        1.0 + x.ln()
    } else {
        1.0 + (x.powf(e) - 1.0) / e
    }
}

fn check_size(sites: usize) -> Result<f64> {
    if sites < 2 || sites % 2 != 0 {
        return Err(Error::Domain(format!("system size {sites} must be even and at least 2")));
    }
    Ok(sites as f64 / 2.0)
}

/// Upper bound on `‖H_AB‖/𝒜` for bilinear couplings.
///
/// `d = 1` evaluates `4 g_max Σ_x [Σ_y (x+y)^{−2α}]^{1/2}` with both sums over
/// `1..=L/2` directly; `d ≥ 2` uses the closed form.
pub fn lemma1_bound_bilinear(p: &BoundParameters, sites: usize) -> Result<f64> {
    let half = check_size(sites)?;
    let d = p.d as f64;
    if !(2.0 * p.alpha > d) {
        return Err(Error::Domain(format!("bilinear bound needs 2α > d, got α = {} and d = {}", p.alpha, p.d)));
    }
    if p.d == 1 {
        let n = sites / 2;
        // prefix[k] = Σ_{r=2}^{k} r^{−2α}
        let mut prefix = vec![0.0; 2 * n + 1];
        for r in 2..=2 * n {
            prefix[r] = prefix[r - 1] + (r as f64).powf(-2.0 * p.alpha);
        }
        let total: f64 = (1..=n).map(|x| (prefix[x + n] - prefix[x]).sqrt()).sum();
        return Ok(4.0 * p.g_max * total);
    }
    let coeff = (p.surface_coefficient() * p.beta_bilinear() / 2.0 / (2.0 * p.alpha - d)).sqrt();
    Ok(4.0 * p.g_max * coeff * growth_term(half, -p.alpha + d / 2.0 + 1.0))
}

/// Closed-form majorant of the `d = 1` bilinear double sum,
/// `4 g_max (2α−1)^{−1/2} [1 + ((L/2)^{3/2−α} − 1)/(3/2 − α)]`.
pub fn lemma1_bound_bilinear_closed_form(p: &BoundParameters, sites: usize) -> Result<f64> {
    let half = check_size(sites)?;
    if p.d != 1 || !(p.alpha > 0.5) {
        return Err(Error::Domain("closed form covers d = 1 with α > 1/2".into()));
    }
    Ok(4.0 * p.g_max * (2.0 * p.alpha - 1.0).powf(-0.5) * growth_term(half, 1.5 - p.alpha))
}

/// Upper bound on `‖H_AB‖/𝒜` for generic two-body couplings of strength `g`.
pub fn lemma1_bound_interacting(p: &BoundParameters, sites: usize) -> Result<f64> {
    let half = check_size(sites)?;
    let d = p.d as f64;
    if p.d == 1 {
        if !(p.alpha > 1.0) {
            return Err(Error::Domain(format!("interacting bound needs α > 1 in d = 1, got {}", p.alpha)));
        }
        let a1 = p.alpha - 1.0;
        let e = 2.0 - p.alpha;
        let tail = if e.abs() < 1e-12 { half.ln() / a1 } else { (half.powf(e) - 1.0) / (a1 * e) };
        return Ok(p.g_max * (1.0 / a1 + tail));
    }
    if !(p.alpha > d) {
        return Err(Error::Domain(format!("interacting bound needs α > d, got α = {} and d = {}", p.alpha, p.d)));
    }
    let coeff = p.surface_coefficient() * p.beta_interacting() / (2.0 * (p.alpha - d));
    Ok(p.g_max * coeff * growth_term(half, d + 1.0 - p.alpha))
}

/// `α_sc`: `d/2 + 1` for bilinear and `d + 1` for interacting couplings.
pub fn classify_threshold(d: usize, family: Family) -> Result<f64> {
    if !(1..=3).contains(&d) {
        return Err(Error::Domain(format!("dimension {d} must be 1, 2 or 3")));
    }
    let d = d as f64;
    Ok(match family {
        Family::Bilinear => d / 2.0 + 1.0,
        Family::Interacting => d + 1.0,
    })
}

/// Exponent of `L/2` in the size-dependent term of the bound; it vanishes
/// exactly at `α_sc`.
pub fn bound_size_exponent(d: usize, family: Family, alpha: f64) -> f64 {
    let d = d as f64;
    match family {
        Family::Bilinear => -alpha + d / 2.0 + 1.0,
        Family::Interacting => d + 1.0 - alpha,
    }
}

/// Floor applied to reduced-density eigenvalues before taking logarithms.
pub const LOG_EIGENVALUE_FLOOR: f64 = 1e-14;

/// `λ` as written (with `ρ_A ⊗ 1`) and with `log ρ_A ⊗ 1`, plus the rate
/// `−i ‖H_AB‖ λ` each implies. Rates are in nats per unit time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRate {
    pub lambda: C64,
    pub lambda_log: C64,
    pub norm: f64,
    pub rate_literal: f64,
    pub rate_log: f64,
}

/// `λ(ρ) = Tr(h_AB [ρ, X ⊗ 1])` for `X = ρ_A` and `X = log ρ_A`, with `A` the
/// leading `ℓ` sites of `block` and `h_AB = H_AB/‖H_AB‖`.
///
/// `v ≠ 0` adds the density-density bonds `v w_ij n_i n_j` across the cut to
/// `H_AB`; its norm is then taken within the state's particle sector.
pub fn growth_rate_lambda(state: &DenseState, block: &BoundaryBlock, v: f64) -> Result<GrowthRate> {
    let spec = block.spec();
    if spec.sites() != state.sites() {
        return Err(Error::Domain("block and state have different lattices".into()));
    }
    let ell = block.ell();
    let region: Vec<usize> = (0..ell).collect();
    let mut h_real = sector_bilinear(state.basis(), &block.single_particle_matrix())?;
    let norm = if v == 0.0 {
        bilinear_norm(block)
    } else {
        for (k, &mask) in state.basis().states().iter().enumerate() {
            let mut e = 0.0;
            for i in (0..ell).filter(|i| mask & (1 << i) != 0) {
                for j in (ell..spec.sites()).filter(|j| mask & (1 << j) != 0) {
                    e += pair_coupling(spec, i, j)?;
                }
            }
            h_real[(k, k)] += v * e;
        }
        h_real.clone().symmetric_eigenvalues().amax()
    };
    let h_ab = h_real.map(|x| C64::new(x, 0.0));
    let psi = state.amplitudes();
    let h_psi = &h_ab * psi;

    let schmidt = bipartite_matrix(state, &region)?;
    let rho_a = &schmidt * schmidt.adjoint();
    let (values, vectors) = hermitian_eigen_desc(rho_a.clone());
    let logs = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        values.len(),
        values.iter().map(|&p| C64::new(p.max(LOG_EIGENVALUE_FLOOR).ln(), 0.0)),
    ));
    let log_rho_a = &vectors * logs * vectors.adjoint();

    // Tr(H [ρ, Y]) = ⟨ψ|Y H|ψ⟩ − ⟨ψ|H Y|ψ⟩
    let trace = |op: &DMatrix<C64>| -> Result<C64> {
        let y_psi = apply_region_operator(state, &region, op)?;
        Ok(y_psi.dotc(&h_psi) - h_psi.dotc(&y_psi))
    };
    let (lambda, lambda_log) = if norm > 0.0 {
        (trace(&rho_a)? / norm, trace(&log_rho_a)? / norm)
    } else {
        (C64::new(0.0, 0.0), C64::new(0.0, 0.0))
    };
    let minus_i = C64::new(0.0, -1.0);
    Ok(GrowthRate {
        lambda,
        lambda_log,
        norm,
        rate_literal: (minus_i * norm * lambda).re,
        rate_log: (minus_i * norm * lambda_log).re,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthVariant {
    /// `−i‖H_AB‖ λ` with `ρ_A ⊗ 1`.
    Literal,
    /// `−i‖H_AB‖ λ` with `log ρ_A ⊗ 1`.
    Log,
    /// `+i‖H_AB‖ λ` with `log ρ_A ⊗ 1`.
    LogOppositeSign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRateReport {
    pub rates: GrowthRate,
    /// Central difference of `S_ℓ` in nats.
    pub finite_difference: f64,
    pub tolerance: f64,
    pub matched: Vec<GrowthVariant>,
}

/// Evolves `initial` to `t ± dt` and `t`, and compares the predicted rates
/// with the central difference of the dense entropy.
pub fn growth_rate_check(
    initial: &DenseState,
    h: &DenseHamiltonian,
    block: &BoundaryBlock,
    v: f64,
    t: f64,
    dt: f64,
    tolerance: f64,
) -> Result<GrowthRateReport> {
    if !(t >= dt && dt > 0.0) {
        return Err(Error::Domain(format!("need t ≥ dt > 0, got t = {t}, dt = {dt}")));
    }
    let region: Vec<usize> = (0..block.ell()).collect();
    let nats = std::f64::consts::LN_2;
    let before = dense_evolve(initial, h, t - dt)?;
    let now = dense_evolve(&before, h, dt)?;
    let after = dense_evolve(&now, h, dt)?;
    let fd = (dense_entropy(&after, &region)? - dense_entropy(&before, &region)?) * nats / (2.0 * dt);
    let rates = growth_rate_lambda(&now, block, v)?;
    let mut matched = Vec::new();
    if (rates.rate_literal - fd).abs() < tolerance {
        matched.push(GrowthVariant::Literal);
    }
    if (rates.rate_log - fd).abs() < tolerance {
        matched.push(GrowthVariant::Log);
    }
    if (-rates.rate_log - fd).abs() < tolerance {
        matched.push(GrowthVariant::LogOppositeSign);
    }
    Ok(GrowthRateReport { rates, finite_difference: fd, tolerance, matched })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{dense_hamiltonian, dense_neel, fock_extreme_eigenvalue};
    use proptest::prelude::*;

    fn block(l: usize, alpha: f64, ell: usize) -> BoundaryBlock {
        build_boundary_block(&LatticeSpec::new(l, alpha).unwrap(), ell).unwrap()
    }

    #[test]
    fn norm_examples() {
        assert!((bilinear_norm(&block(4, 1000.0, 2)) - 2.0).abs() < 1e-12);
        let b = block(8, 1.0, 4);
        let dense = fock_extreme_eigenvalue(&b.single_particle_matrix()).unwrap();
        assert!((bilinear_norm(&b) - dense).abs() < 1e-9);
        assert_eq!(nuclear_norm(&DMatrix::zeros(3, 5)), 0.0);
    }

    #[test]
    fn norm_matches_fock_space_for_small_lattices() {
        for l in [2, 4, 6, 8] {
            for ell in 1..=l / 2 {
                for alpha in [0.0, 0.7, 1.5, 3.0] {
                    let b = block(l, alpha, ell);
                    let dense = fock_extreme_eigenvalue(&b.single_particle_matrix()).unwrap();
                    assert!((bilinear_norm(&b) - dense).abs() < 1e-9, "L={l} ell={ell} alpha={alpha}");
                }
            }
        }
    }

    #[test]
    fn nuclear_norm_paths_agree() {
        let b = block(12, 1.3, 6);
        let svd: f64 = b.matrix().singular_values().iter().sum();
        assert!((bilinear_norm(&b) - svd).abs() < 1e-10);
    }

    #[test]
    fn norm_series_classes() {
        let sizes = [64, 128, 256, 512];
        let bounded = norm_scaling_series(3.0, &sizes).unwrap();
        assert_eq!(bounded.classification, NormClass::Bounded);
        // the doubled antipodal bond shrinks as L grows, so the norm drifts
        // down by parts in 1e5 instead of saturating from below
        let (first, last) = (bounded.points[0].1, bounded.points[3].1);
        assert!((first - last).abs() < 1e-4 * first, "{:?}", bounded.points);
        for alpha in [0.5, 1.2] {
            let s = norm_scaling_series(alpha, &sizes).unwrap();
            assert!(s.points.windows(2).all(|w| w[1].1 >= w[0].1), "{:?}", s.points);
        }
        let power = norm_scaling_series(0.5, &sizes).unwrap();
        assert!(matches!(power.classification, NormClass::Power { .. }), "{:?}", power.classification);
        assert!(norm_scaling_series(1.0, &[64, 32, 128]).is_err());
    }

    #[test]
    fn bilinear_bound_examples() {
        let p = BoundParameters::new(2.0, 1, 1.0).unwrap();
        let b2 = lemma1_bound_bilinear(&p, 64).unwrap();
        assert!(b2.is_finite() && b2 > 0.0);
        let b3 = lemma1_bound_bilinear(&BoundParameters::new(3.0, 1, 1.0).unwrap(), 64).unwrap();
        assert!(b3 < b2);
        assert!(matches!(lemma1_bound_bilinear(&BoundParameters::new(0.4, 1, 1.0).unwrap(), 64), Err(Error::Domain(_))));
        assert!(lemma1_bound_bilinear(&BoundParameters::new(0.9, 2, 1.0).unwrap(), 64).is_err());
    }

    #[test]
    fn direct_sum_matches_naive_double_sum() {
        let p = BoundParameters::new(1.7, 1, 1.3).unwrap();
        let n = 20;
        let naive: f64 = (1..=n)
            .map(|x| (1..=n).map(|y| ((x + y) as f64).powf(-3.4)).sum::<f64>().sqrt())
            .sum::<f64>()
            * 4.0
            * 1.3;
        assert!((lemma1_bound_bilinear(&p, 2 * n).unwrap() - naive).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn closed_form_majorises_direct_sum(alpha in 0.55f64..4.0, half in 1usize..600) {
            let p = BoundParameters::new(alpha, 1, 1.0).unwrap();
            let direct = lemma1_bound_bilinear(&p, 2 * half).unwrap();
            let closed = lemma1_bound_bilinear_closed_form(&p, 2 * half).unwrap();
            prop_assert!(direct <= closed * (1.0 + 1e-12));
        }
    }

    #[test]
    fn interacting_bound_examples() {
        let p = BoundParameters::new(3.0, 1, 1.0).unwrap();
        // 1/2 + (50^{-1} − 1)/(2·(−1))
        assert!((lemma1_bound_interacting(&p, 100).unwrap() - 0.99).abs() < 1e-12);
        assert!(lemma1_bound_interacting(&BoundParameters::new(1.0, 1, 1.0).unwrap(), 100).is_err());
        assert!(lemma1_bound_interacting(&BoundParameters::new(2.0, 2, 1.0).unwrap(), 100).is_err());

        let mut last = f64::INFINITY;
        for alpha in [1.5, 2.0, 3.0, 5.0, 10.0, 40.0] {
            let b = lemma1_bound_interacting(&BoundParameters::new(alpha, 1, 1.0).unwrap(), 1000).unwrap();
            assert!(b < last);
            last = b;
        }
        assert!(last > 0.0);
        // log limit at α = 2 is continuous
        let at = lemma1_bound_interacting(&BoundParameters::new(2.0, 1, 1.0).unwrap(), 64).unwrap();
        let near = lemma1_bound_interacting(&BoundParameters::new(2.0 + 1e-7, 1, 1.0).unwrap(), 64).unwrap();
        assert!((at - near).abs() < 1e-5);
    }

    #[test]
    fn interacting_bound_two_dimensions() {
        let sizes = [8, 32, 128, 512, 1024];
        let below: Vec<f64> = sizes
            .iter()
            .map(|&l| lemma1_bound_interacting(&BoundParameters::new(2.9, 2, 1.0).unwrap(), l).unwrap())
            .collect();
        let above: Vec<f64> = sizes
            .iter()
            .map(|&l| lemma1_bound_interacting(&BoundParameters::new(3.1, 2, 1.0).unwrap(), l).unwrap())
            .collect();
        assert!(below.windows(2).all(|w| w[1] > w[0]));
        assert!(below[4] / below[3] > 1.01);
        let p = BoundParameters::new(3.1, 2, 1.0).unwrap();
        // (L/2)^{-0.1} → 0 leaves 1 + 1/0.1
        let limit = p.surface_coefficient() * p.beta_interacting() / (2.0 * 1.1) * (1.0 + 1.0 / 0.1);
        assert!(above.iter().all(|&v| v < limit));
        assert!(above[4] / above[3] < below[4] / below[3]);
    }

    #[test]
    fn thresholds() {
        assert_eq!(classify_threshold(1, Family::Bilinear).unwrap(), 1.5);
        assert_eq!(classify_threshold(1, Family::Interacting).unwrap(), 2.0);
        assert_eq!(classify_threshold(3, Family::Bilinear).unwrap(), 2.5);
        assert!(classify_threshold(4, Family::Bilinear).is_err());
        for d in 1..=3 {
            for family in [Family::Bilinear, Family::Interacting] {
                let sc = classify_threshold(d, family).unwrap();
                assert_eq!(bound_size_exponent(d, family, sc), 0.0);
                assert!(bound_size_exponent(d, family, sc - 0.1) > 0.0);
                assert!(bound_size_exponent(d, family, sc + 0.1) < 0.0);
            }
        }
    }

    #[test]
    fn neel_state_has_no_growth() {
        let spec = LatticeSpec::new(6, 1.5).unwrap();
        let neel = dense_neel(&spec).unwrap();
        let b = build_boundary_block(&spec, 3).unwrap();
        let r = growth_rate_lambda(&neel, &b, 0.0).unwrap();
        assert!(r.lambda.norm() < 1e-14 && r.lambda_log.norm() < 1e-12);
        assert!(r.rate_literal.abs() < 1e-12);
    }

    #[test]
    fn lambda_is_phase_invariant_and_imaginary() {
        let spec = LatticeSpec::new(6, 1.5).unwrap();
        let h = dense_hamiltonian(&spec, 0.0).unwrap();
        let psi = dense_evolve(&dense_neel(&spec).unwrap(), &h, 0.6).unwrap();
        let b = build_boundary_block(&spec, 3).unwrap();
        let a = growth_rate_lambda(&psi, &b, 0.0).unwrap();
        let c = growth_rate_lambda(&psi.with_phase(1.234), &b, 0.0).unwrap();
        assert!((a.lambda - c.lambda).norm() < 1e-13);
        assert!((a.lambda_log - c.lambda_log).norm() < 1e-11);
        assert!(a.lambda.re.abs() < 1e-13 && a.lambda.im.abs() > 1e-6);
    }

    #[test]
    fn growth_rate_against_finite_difference() {
        for v in [0.0, 1.0] {
            let spec = LatticeSpec::new(6, 1.5).unwrap();
            let h = dense_hamiltonian(&spec, v).unwrap();
            let b = build_boundary_block(&spec, 3).unwrap();
            let report = growth_rate_check(&dense_neel(&spec).unwrap(), &h, &b, v, 0.7, 1e-5, 1e-6).unwrap();
            assert_eq!(report.matched, vec![GrowthVariant::LogOppositeSign], "V={v}: {report:?}");
        }
    }
}
