//! Renormalized point interactions for codimension-2 supports (the flat
//! 2-torus and other purely discrete 2D problems), where the diagonal
//! Green's function diverges logarithmically and the bare coupling must be
//! traded for a renormalized one at a scale μ².
//!
//! The renormalized principal function is the subtracted kernel
//!
//! ```text
//! Φ_R(E) = 1/α_R − Σ_n |φ_n(a)|² (E+μ²)/((E_n−E)(E_n+μ²))
//!          − ∫ |χ_λ(a)|² (E+μ²)/((λ−E)(λ+μ²)) dμ(λ),
//! ```
//!
//! whose terms decay like E_n^{−2}, so the sum converges absolutely where
//! the raw sum would diverge. With the convenient choice 1/α_R = 0 the bound
//! state sits exactly at E = −μ², every term carrying the factor (E+μ²).
//!
//! Changing the scale μ² → μ²' while keeping the spectrum fixed is the
//! coupling-constant flow; it is affine in 1/α_R:
//! 1/α_R' = 1/α_R + Σ_n |φ_n(a)|² [1/(E_n+μ²) − 1/(E_n+μ²')].

use num_complex::Complex64;

use crate::error::{Result, SolverError};
use crate::greens::{self, DiagonalSampler};
use crate::krein::{secular_roots, BoundState, BoundStateKind};
use crate::spectral::{BaseProblem, Point};

/// A renormalized δ interaction: support, inverse renormalized coupling
/// (zero is allowed and meaningful), and the renormalization scale μ² > 0.
#[derive(Debug, Clone, Copy)]
pub struct RenormalizedPerturbation {
    pub support: Point,
    pub inv_alpha_r: f64,
    pub mu2: f64,
}

impl RenormalizedPerturbation {
    pub fn new(support: Point, inv_alpha_r: f64, mu2: f64) -> Result<Self> {
        if !(mu2 > 0.0) || !mu2.is_finite() {
            return Err(SolverError::InvalidParameter(format!(
                "renormalization scale mu2 must be positive, got {mu2}"
            )));
        }
        if !inv_alpha_r.is_finite() {
            return Err(SolverError::InvalidParameter(
                "inverse coupling must be finite".into(),
            ));
        }
        Ok(RenormalizedPerturbation { support, inv_alpha_r, mu2 })
    }
}

pub(crate) fn check_problem(problem: &BaseProblem, support: Point) -> Result<()> {
    if support.dimension() != problem.space_dimension() {
        return Err(SolverError::DimensionMismatch(format!(
            "support dimension {} does not match problem dimension {}",
            support.dimension(),
            problem.space_dimension()
        )));
    }
    if problem.label() == "free-plane" {
        return Err(SolverError::NonRenormalizedProblem(
            "free-plane has no evaluable spectral data for the subtracted sums".into(),
        ));
    }
    Ok(())
}

/// Φ_R(E) for real E off the spectrum of H₀.
pub fn phi_renormalized(
    problem: &BaseProblem,
    rpert: &RenormalizedPerturbation,
    e: f64,
    tol: f64,
) -> Result<f64> {
    check_problem(problem, rpert.support)?;
    let sampler = DiagonalSampler::new(problem, rpert.support, tol, 0)?;
    let (s, _err) = sampler.subtracted(e, rpert.mu2)?;
    Ok(rpert.inv_alpha_r - s)
}

/// Compensated inverse coupling at scale `mu2_to` such that Φ_R is unchanged
/// as a function of E. Exact round trips: the map is affine and its own
/// inverse under swapping the scales.
pub fn coupling_flow(
    problem: &BaseProblem,
    support: Point,
    inv_alpha_r: f64,
    mu2_from: f64,
    mu2_to: f64,
    tol: f64,
) -> Result<f64> {
    check_problem(problem, support)?;
    if !(mu2_from > 0.0) || !(mu2_to > 0.0) {
        return Err(SolverError::InvalidParameter(
            "flow requires positive scales".into(),
        ));
    }
    if mu2_from == mu2_to {
        return Ok(inv_alpha_r);
    }
    let sampler = DiagonalSampler::new(problem, support, tol, 0)?;
    // S(mu2_from) − S(mu2_to) expressed through the subtracted kernel
    let (shift, _err) = sampler.subtracted(-mu2_from, mu2_to)?;
    Ok(inv_alpha_r + shift)
}

/// Bound states of the renormalized operator: roots of Φ_R with the same
/// bracket structure as the regular case (interlaced between distinct
/// levels, one extra root below the bottom when Φ_R is positive at −∞).
pub fn find_bound_states_renormalized(
    problem: &BaseProblem,
    rpert: &RenormalizedPerturbation,
    window: (f64, f64),
    tol: f64,
) -> Result<Vec<BoundState>> {
    check_problem(problem, rpert.support)?;
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(SolverError::InvalidParameter(format!("empty window ({lo}, {hi})")));
    }
    if let Some(inf) = problem.continuum_infimum() {
        if hi > inf {
            return Err(SolverError::InvalidParameter(format!(
                "window top {hi} must lie below the continuum infimum {inf}"
            )));
        }
    }
    let a = rpert.support;
    let sampler = DiagonalSampler::new(problem, a, tol, 0)?;

    // distinct levels with aggregate weight Σ_deg |φ(a)|²; a pole exists
    // whenever the aggregate is nonzero (always true on the torus)
    let mut distinct = problem.distinct_levels_below(hi);
    let fence_start = distinct.len();
    // one fence level above the window caps the last gap
    for extra in 0..64 {
        match problem.level_energy(fence_start + extra) {
            Ok(e) => {
                match distinct.last() {
                    Some(d) if (d.energy - e).abs() < 1e-9 * e.abs().max(1.0) => continue,
                    _ => {
                        distinct.push(crate::spectral::DistinctLevel {
                            energy: e,
                            first_index: fence_start + extra,
                            multiplicity: 1,
                        });
                        break;
                    }
                }
            }
            Err(_) => break,
        }
    }
    let mut poles = Vec::new();
    let mut nodes: Vec<f64> = Vec::new();
    for d in &distinct {
        let mut agg = 0.0;
        for i in d.first_index..d.first_index + d.multiplicity {
            agg += problem.eval_level(i, a)?.norm_sqr();
        }
        if agg > 1e-24 {
            poles.push(d.energy);
        } else {
            nodes.push(d.energy);
        }
    }
    let spacing = poles
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
        .min(1.0)
        .max(1e-6);

    let f = |e: f64| -> Result<f64> { Ok(rpert.inv_alpha_r - sampler.subtracted(e, rpert.mu2)?.0) };
    let df = |e: f64| -> Result<f64> { Ok(-sampler.derivative(e)?.0) };
    let secular = secular_roots(&f, Some(&df), &poles, hi, problem.continuum_infimum(), spacing, tol)?;

    let mut states: Vec<BoundState> = Vec::new();
    for r in &secular {
        let d = sampler.derivative(r.energy).map(|v| v.0).unwrap_or(f64::NAN);
        states.push(BoundState {
            label: 0,
            old_energy: None,
            energy: r.energy,
            bracket: r.bracket,
            kind: BoundStateKind::Shifted,
            normalization: d,
            residual: r.residual,
        });
    }
    for &e in &nodes {
        states.push(BoundState {
            label: 0,
            old_energy: Some(e),
            energy: e,
            bracket: (e, e),
            kind: BoundStateKind::UnchangedNode,
            normalization: 1.0,
            residual: 0.0,
        });
    }
    states.sort_by(|p, q| p.energy.partial_cmp(&q.energy).unwrap());
    let distinct_all = problem.distinct_levels_below(hi.max(states.last().map(|s| s.energy).unwrap_or(hi)) + 1.0);
    for (i, s) in states.iter_mut().enumerate() {
        s.label = i;
        if s.kind == BoundStateKind::Shifted {
            s.old_energy = distinct_all.get(i).map(|d| d.energy);
        }
    }
    if let Some(first) = states.first() {
        if first.energy < lo && first.kind == BoundStateKind::Shifted {
            return Err(SolverError::WindowTooNarrow { root: first.energy });
        }
    }
    states.retain(|s| s.energy >= lo && s.energy <= hi);
    Ok(states)
}

/// Full renormalized Green's function
/// G = G₀(x,y|E) + G₀(x,a|E) G₀(a,y|E)/Φ_R(E).
pub fn full_green_renormalized(
    problem: &BaseProblem,
    rpert: &RenormalizedPerturbation,
    x: Point,
    y: Point,
    e: Complex64,
    tol: f64,
) -> Result<Complex64> {
    check_problem(problem, rpert.support)?;
    let phi = phi_renormalized(problem, rpert, e.re, tol)?;
    if phi.abs() < 1e-13 * rpert.inv_alpha_r.abs().max(1.0) {
        return Err(SolverError::ZeroOfPhi { energy: e.re });
    }
    let a = rpert.support;
    let g0 = greens::green0(problem, x, y, e, tol)?.value;
    let gxa = greens::green0(problem, x, a, e, tol)?.value;
    let gay = greens::green0(problem, a, y, e, tol)?.value;
    Ok(g0 + gxa * gay / phi)
}

/// Residue wavefunction ψ(x) = G₀(x,a|E*)/√(Σ|φ_n(a)|²/(E_n−E*)²); the
/// normalization sum converges in 2D even though the diagonal kernel does
/// not. ψ itself diverges logarithmically at x = a, as it must.
pub fn bound_wavefunction_renormalized(
    problem: &BaseProblem,
    rpert: &RenormalizedPerturbation,
    e_star: f64,
    x: Point,
    tol: f64,
) -> Result<Complex64> {
    check_problem(problem, rpert.support)?;
    let sampler = DiagonalSampler::new(problem, rpert.support, tol, 0)?;
    let residual = (rpert.inv_alpha_r - sampler.subtracted(e_star, rpert.mu2)?.0).abs();
    let slope = sampler.derivative(e_star)?.0;
    if residual > tol.max(1e-12) * slope.abs().max(1.0) * 1e3 {
        return Err(SolverError::NotARoot { energy: e_star, residual });
    }
    let g = greens::green0(problem, x, rpert.support, Complex64::new(e_star, 0.0), tol)?.value;
    Ok(g / slope.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::UnitSystem;
    use approx::assert_relative_eq;

    fn torus() -> BaseProblem {
        let l = 2.0 * std::f64::consts::PI;
        BaseProblem::flat_torus(l, l, UnitSystem::default()).unwrap()
    }

    #[test]
    fn phi_vanishes_exactly_at_minus_mu2() {
        // with 1/alpha_R = 0 every term carries the factor (E + mu^2)
        let p = torus();
        let rp = RenormalizedPerturbation::new(Point::Plane(0.3, 1.2), 0.0, 1.0).unwrap();
        let v = phi_renormalized(&p, &rp, -1.0, 1e-9).unwrap();
        assert!(v.abs() < 1e-14, "phi_R(-mu2) = {v}");
    }

    #[test]
    fn phi_is_strictly_decreasing_below_spectrum() {
        let p = torus();
        let rp = RenormalizedPerturbation::new(Point::Plane(0.0, 0.0), 0.1, 2.0).unwrap();
        let es = [-8.0, -5.0, -3.0, -1.5, -0.7, -0.3, -0.1];
        let vals: Vec<f64> = es
            .iter()
            .map(|&e| phi_renormalized(&p, &rp, e, 1e-9).unwrap())
            .collect();
        for w in vals.windows(2) {
            assert!(w[1] < w[0], "phi_R must decrease: {vals:?}");
        }
    }

    #[test]
    fn ground_state_at_renormalization_point() {
        let p = torus();
        let rp = RenormalizedPerturbation::new(Point::Plane(1.0, -0.5), 0.0, 1.0).unwrap();
        let states = find_bound_states_renormalized(&p, &rp, (-6.0, 1.9), 1e-12).unwrap();
        assert!(!states.is_empty());
        assert!(
            (states[0].energy + 1.0).abs() < 1e-9,
            "ground state {} should be -mu2",
            states[0].energy
        );
        // excited roots interlace the distinct lattice levels 0 < 1 < ...
        assert!(states[1].energy > 0.0 && states[1].energy < 1.0);
        if states.len() > 2 {
            assert!(states[2].energy > 1.0 && states[2].energy < 2.0);
        }
    }

    #[test]
    fn constant_mode_always_shifts() {
        // |phi_0(a)|^2 = 1/(L1 L2) > 0 for every support: E here= 0 always moves
        let p = torus();
        let rp = RenormalizedPerturbation::new(Point::Plane(2.2, 0.7), 0.3, 1.5).unwrap();
        let states = find_bound_states_renormalized(&p, &rp, (-9.0, 0.9), 1e-10).unwrap();
        for s in &states {
            assert_eq!(s.kind, BoundStateKind::Shifted);
        }
        assert!(states[0].energy < 0.0);
    }

    #[test]
    fn flow_round_trip_is_exact() {
        let p = torus();
        let a = Point::Plane(0.4, 0.9);
        let inv0 = 0.2;
        let fwd = coupling_flow(&p, a, inv0, 1.0, 3.5, 1e-9).unwrap();
        let back = coupling_flow(&p, a, fwd, 3.5, 1.0, 1e-9).unwrap();
        assert_relative_eq!(back, inv0, epsilon = 1e-12);
        assert_relative_eq!(coupling_flow(&p, a, inv0, 2.0, 2.0, 1e-9).unwrap(), inv0, epsilon = 0.0);
    }

    #[test]
    fn flow_preserves_the_spectrum() {
        let p = torus();
        let a = Point::Plane(0.4, 0.9);
        let rp1 = RenormalizedPerturbation::new(a, 0.0, 1.0).unwrap();
        let inv2 = coupling_flow(&p, a, 0.0, 1.0, 2.5, 1e-9).unwrap();
        let rp2 = RenormalizedPerturbation::new(a, inv2, 2.5).unwrap();
        let s1 = find_bound_states_renormalized(&p, &rp1, (-6.0, 2.9), 1e-12).unwrap();
        let s2 = find_bound_states_renormalized(&p, &rp2, (-6.0, 2.9), 1e-12).unwrap();
        assert_eq!(s1.len(), s2.len());
        for (a, b) in s1.iter().zip(&s2) {
            assert!(
                (a.energy - b.energy).abs() < 1e-8,
                "flow moved a root: {} vs {}",
                a.energy,
                b.energy
            );
        }
    }

    #[test]
    fn subtracted_kernel_identity_on_reflectionless() {
        // 1D identity: phi_R = 1/alpha_R − [G0(a,a|E) − G0(a,a|−mu2)]
        let p = BaseProblem::reflectionless(1.0, UnitSystem::default()).unwrap();
        let a = Point::Line(0.7);
        let mu2 = 2.0;
        let rp = RenormalizedPerturbation::new(a, 0.4, mu2).unwrap();
        for i in 0..10 {
            // below E0 = -1 and inside the gap (-1, 0), away from the pole
            let e = -4.0 + 0.35 * i as f64;
            if (e + 1.0).abs() < 0.2 {
                continue;
            }
            let lhs = phi_renormalized(&p, &rp, e, 1e-9).unwrap();
            let ge = greens::green0(&p, a, a, Complex64::new(e, 0.0), 1e-11).unwrap().value.re;
            let gm = greens::green0(&p, a, a, Complex64::new(-mu2, 0.0), 1e-11)
                .unwrap()
                .value
                .re;
            let rhs = 0.4 - (ge - gm);
            assert!(
                (lhs - rhs).abs() < 2e-7,
                "identity failed at E={e}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn renormalized_pole_cancellation_on_visible_channel() {
        // at the degenerate level E_1 = 1 the cancellation is exact along the
        // channel the support couples to; x = a + half-periods makes every
        // lattice mode at x proportional to its value at a
        let l = 2.0 * std::f64::consts::PI;
        let p = torus();
        let a = Point::Plane(0.7, 1.1);
        let x = Point::Plane(0.7 + 0.5 * l, 1.1 + 0.5 * l);
        let y = Point::Plane(2.3, 0.4);
        let rp = RenormalizedPerturbation::new(a, 0.0, 1.0).unwrap();
        let mut full = Vec::new();
        let mut bare = Vec::new();
        for j in 2..=6 {
            for sign in [1.0, -1.0] {
                let e = Complex64::new(1.0 + sign * 10f64.powi(-j), 0.0);
                full.push(full_green_renormalized(&p, &rp, x, y, e, 1e-8).unwrap().norm());
                bare.push(greens::green0(&p, x, y, e, 1e-8).unwrap().value.norm());
            }
        }
        let fmax = full.iter().cloned().fold(0.0, f64::max);
        let fmin = full.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(fmax / fmin < 10.0, "full Green varied: {full:?}");
        // the bare kernel blows up like 1/|E−1|
        assert!(bare.last().unwrap() > &1e4, "bare kernel should diverge: {bare:?}");
    }

    #[test]
    fn wavefunction_diverges_logarithmically_at_support() {
        let p = torus();
        let a = Point::Plane(1.0, 1.0);
        let rp = RenormalizedPerturbation::new(a, 0.0, 1.0).unwrap();
        let v_far = bound_wavefunction_renormalized(&p, &rp, -1.0, Point::Plane(2.5, 2.0), 1e-9)
            .unwrap()
            .norm();
        let v_near = bound_wavefunction_renormalized(&p, &rp, -1.0, Point::Plane(1.0 + 1e-5, 1.0), 1e-9)
            .unwrap()
            .norm();
        assert!(v_near > 3.0 * v_far, "near {v_near} vs far {v_far}");
    }

    #[test]
    fn rejects_free_plane_and_bad_scale() {
        let fp = BaseProblem::free_plane(UnitSystem::default());
        let rp = RenormalizedPerturbation::new(Point::Plane(0.0, 0.0), 0.0, 1.0).unwrap();
        assert!(matches!(
            phi_renormalized(&fp, &rp, -1.0, 1e-9),
            Err(SolverError::NonRenormalizedProblem(_))
        ));
        assert!(RenormalizedPerturbation::new(Point::Plane(0.0, 0.0), 0.0, -1.0).is_err());
    }
}
