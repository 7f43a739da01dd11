//! N point centers: the matrix Krein formula and the recursive
//! one-center-at-a-time construction.
//!
//! The principal matrix is Φ_ij(E) = (1/α_i)δ_ij − G₀(a_i,a_j|E); bound
//! states are the zeros of det Φ(E), located by sign-tracked determinant
//! evaluation on a per-gap grid plus bisection. The full Green's function is
//!
//! ```text
//! G(x,y|E) = G₀(x,y|E) + Σ_{ij} G₀(x,a_i|E) [Φ(E)⁻¹]_{ij} G₀(a_j,y|E),
//! ```
//!
//! and the recursive route adds one center at a time,
//! G_j = G_{j−1} + G_{j−1}(·,a_j) G_{j−1}(a_j,·)/(1/α_j − G_{j−1}(a_j,a_j)),
//! which must produce the same spectrum — the two routes cross-check each
//! other in the tests.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, SolverError};
use crate::greens::{self, CutSide};
use crate::rootfind;
use crate::spectral::{BaseProblem, Point};

/// Distinct δ centers with their couplings.
#[derive(Debug, Clone)]
pub struct CenterSet {
    points: Vec<Point>,
    couplings: Vec<f64>,
}

/// Minimum allowed separation between centers.
pub const MIN_SEPARATION: f64 = 1e-9;

impl CenterSet {
    pub fn new(points: Vec<Point>, couplings: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != couplings.len() {
            return Err(SolverError::InvalidParameter(
                "need equally many centers and couplings, at least one".into(),
            ));
        }
        for (i, c) in couplings.iter().enumerate() {
            if *c == 0.0 || !c.is_finite() {
                return Err(SolverError::InvalidParameter(format!(
                    "coupling {i} must be finite and nonzero"
                )));
            }
        }
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if points[i].distance(&points[j])? < MIN_SEPARATION {
                    return Err(SolverError::InvalidParameter(format!(
                        "centers {i} and {j} closer than the minimum separation {MIN_SEPARATION}"
                    )));
                }
            }
        }
        Ok(CenterSet { points, couplings })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }
}

/// Φ(E) with bookkeeping.
#[derive(Debug, Clone)]
pub struct PrincipalMatrix {
    pub matrix: DMatrix<f64>,
    pub energy: f64,
    /// 1-norm condition estimate ‖Φ‖₁‖Φ⁻¹‖₁.
    pub condition: f64,
}

/// Assemble Φ_ij(E) = (1/α_i)δ_ij − G₀(a_i,a_j|E) at real E off σ(H₀).
pub fn phi_matrix(
    problem: &BaseProblem,
    centers: &CenterSet,
    e: f64,
    tol: f64,
) -> Result<PrincipalMatrix> {
    let n = centers.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let g = greens::green0(problem, centers.points[i], centers.points[j], Complex64::new(e, 0.0), tol)?
                .value
                .re;
            let v = if i == j { 1.0 / centers.couplings[i] - g } else { -g };
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let condition = condition_estimate(&m);
    Ok(PrincipalMatrix { matrix: m, energy: e, condition })
}

fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let norm1 = |a: &DMatrix<f64>| -> f64 {
        (0..a.ncols())
            .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    match m.clone().try_inverse() {
        Some(inv) => norm1(m) * norm1(&inv),
        None => f64::INFINITY,
    }
}

/// det Φ(E); real for real E below the spectrum.
pub fn det_phi(problem: &BaseProblem, centers: &CenterSet, e: f64, tol: f64) -> Result<f64> {
    Ok(phi_matrix(problem, centers, e, tol)?.matrix.determinant())
}

/// A multicenter bound state with the condition estimate of Φ near the root.
#[derive(Debug, Clone, Copy)]
pub struct MulticenterBoundState {
    pub energy: f64,
    pub bracket: (f64, f64),
    pub condition: f64,
}

/// Bound states as zeros of det Φ(E), by sign tracking on a refined grid
/// within each gap between poles of G₀ (old levels), plus geometric
/// refinement toward the continuum edge where the determinant can develop
/// late sign changes.
pub fn find_bound_states_multicenter(
    problem: &BaseProblem,
    centers: &CenterSet,
    window: (f64, f64),
    tol: f64,
) -> Result<Vec<MulticenterBoundState>> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(SolverError::InvalidParameter(format!("empty window ({lo}, {hi})")));
    }
    let inf = problem.continuum_infimum();
    if let Some(inf) = inf {
        if hi > inf {
            return Err(SolverError::InvalidParameter(format!(
                "window top {hi} must lie below the continuum infimum {inf}"
            )));
        }
    }
    let f = |e: f64| -> Result<f64> { det_phi(problem, centers, e, tol) };

    // segment boundaries: window ends, old levels (det has poles there), and
    // a geometric approach to the continuum edge
    let mut cuts = vec![lo, hi];
    for l in problem.levels_below(hi) {
        if l.energy > lo {
            cuts.push(l.energy);
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut roots = Vec::new();
    for seg in cuts.windows(2) {
        let (mut s_lo, mut s_hi) = (seg[0], seg[1]);
        let width = s_hi - s_lo;
        let guard = 1e-7 * width.max(1e-3);
        s_lo += guard;
        s_hi -= guard;
        if s_hi <= s_lo {
            continue;
        }
        // grid: 200 points per unit energy, at least 64 per segment,
        // plus geometric points toward the upper end (branch-point behavior)
        let n_grid = ((s_hi - s_lo) * 200.0).ceil().max(64.0) as usize;
        let mut grid: Vec<f64> = (0..=n_grid)
            .map(|i| s_lo + (s_hi - s_lo) * i as f64 / n_grid as f64)
            .collect();
        // geometric refinement toward the segment top: roots can pile up
        // against poles and the continuum branch point
        for j in 3..=10 {
            grid.push(s_hi - width * 10f64.powi(-j));
        }
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut prev: Option<(f64, f64)> = None;
        for &e in &grid {
            let v = f(e)?;
            if let Some((pe, pv)) = prev {
                if pv.signum() != v.signum() && pv != 0.0 {
                    let root = rootfind::bracketed_root(
                        &f,
                        None::<fn(f64) -> Result<f64>>,
                        pe,
                        e,
                        tol,
                    )?;
                    // Φ is singular at the root itself; conditioning at the
                    // coarse bracket endpoints diagnoses clustered centers
                    let cond = phi_matrix(problem, centers, pe, tol)?
                        .condition
                        .min(phi_matrix(problem, centers, e, tol)?.condition);
                    if cond > 1e12 {
                        return Err(SolverError::IllConditioned {
                            energy: root.value,
                            condition: cond,
                        });
                    }
                    roots.push(MulticenterBoundState {
                        energy: root.value,
                        bracket: (pe, e),
                        condition: cond,
                    });
                }
            }
            prev = Some((e, v));
        }
    }
    roots.sort_by(|a, b| a.energy.partial_cmp(&b.energy).unwrap());
    Ok(roots)
}

/// Recursive Green's function with the first `count` centers.
fn green_recursive(
    problem: &BaseProblem,
    centers: &CenterSet,
    count: usize,
    x: Point,
    y: Point,
    e: Complex64,
    tol: f64,
) -> Result<Complex64> {
    if count == 0 {
        return Ok(greens::green0(problem, x, y, e, tol)?.value);
    }
    let j = count - 1;
    let a = centers.points[j];
    let g_xy = green_recursive(problem, centers, j, x, y, e, tol)?;
    let g_xa = green_recursive(problem, centers, j, x, a, e, tol)?;
    let g_ay = green_recursive(problem, centers, j, a, y, e, tol)?;
    let g_aa = green_recursive(problem, centers, j, a, a, e, tol)?;
    let phi = 1.0 / centers.couplings[j] - g_aa;
    Ok(g_xy + g_xa * g_ay / phi)
}

/// Spectrum via the recursive construction: add centers one at a time and
/// chase the zeros of 1/α_j − G_{j−1}(a_j,a_j|E) between the poles of
/// G_{j−1}. Intended as the independent cross-check of the determinant
/// route; assumes no center sits exactly on a node of an intermediate state.
pub fn find_bound_states_recursive(
    problem: &BaseProblem,
    centers: &CenterSet,
    window: (f64, f64),
    tol: f64,
) -> Result<Vec<f64>> {
    let (lo, hi) = window;
    let mut spectrum: Vec<f64> = problem
        .levels_below(hi)
        .iter()
        .map(|l| l.energy)
        .collect();
    for j in 0..centers.len() {
        let a = centers.points[j];
        let alpha = centers.couplings[j];
        let f = |e: f64| -> Result<f64> {
            let g = green_recursive(problem, centers, j, a, a, Complex64::new(e, 0.0), tol)?;
            Ok(1.0 / alpha - g.re)
        };
        let secular = crate::krein::secular_roots(
            &f,
            None::<&fn(f64) -> Result<f64>>,
            &spectrum,
            hi,
            problem.continuum_infimum(),
            1.0,
            tol,
        )?;
        spectrum = secular
            .iter()
            .filter(|r| r.residual.is_finite())
            .map(|r| r.energy)
            .collect();
    }
    spectrum.retain(|&e| e >= lo && e <= hi);
    Ok(spectrum)
}

/// Full multicenter Green's function at complex energy.
pub fn full_green_multicenter(
    problem: &BaseProblem,
    centers: &CenterSet,
    x: Point,
    y: Point,
    e: Complex64,
    tol: f64,
) -> Result<Complex64> {
    let n = centers.len();
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let g = greens::green0(problem, centers.points[i], centers.points[j], e, tol)?.value;
            m[(i, j)] = if i == j {
                Complex64::new(1.0 / centers.couplings[i], 0.0) - g
            } else {
                -g
            };
        }
    }
    let lu = m.lu();
    let mut rhs = DMatrix::<Complex64>::zeros(n, 1);
    for j in 0..n {
        rhs[(j, 0)] = greens::green0(problem, centers.points[j], y, e, tol)?.value;
    }
    let sol = lu
        .solve(&rhs)
        .ok_or(SolverError::ZeroOfPhi { energy: e.re })?;
    let mut acc = greens::green0(problem, x, y, e, tol)?.value;
    for i in 0..n {
        let gxa = greens::green0(problem, x, centers.points[i], e, tol)?.value;
        acc += gxa * sol[(i, 0)];
    }
    Ok(acc)
}

/// Multicenter generalized eigenfunction with scattering data (free line).
#[derive(Debug, Clone)]
pub struct MulticenterScattering<'p> {
    problem: &'p BaseProblem,
    centers: CenterSet,
    weights: Vec<Complex64>,
    pub energy: f64,
    pub wavenumber: f64,
    pub reflection: Option<Complex64>,
    pub transmission: Option<Complex64>,
}

impl<'p> MulticenterScattering<'p> {
    /// η_E(x) = χ_E(x) + Σ_i G₀(x,a_i|E+i0) · [Σ_j Φ⁻¹_{ij} χ_E(a_j)].
    pub fn eval(&self, x: Point) -> Result<Complex64> {
        let mut acc = self.problem.eval_channel(0, self.wavenumber, x)?;
        for (i, w) in self.weights.iter().enumerate() {
            let g = greens::green0_boundary(
                self.problem,
                x,
                self.centers.points[i],
                self.energy,
                CutSide::Above,
            )?;
            acc += g * w;
        }
        Ok(acc)
    }
}

/// Build the multicenter scattering state for incident wavenumber `k`.
pub fn generalized_eigenfunction_multicenter<'p>(
    problem: &'p BaseProblem,
    centers: &CenterSet,
    k: f64,
) -> Result<MulticenterScattering<'p>> {
    if problem.channel_count() == 0 || !problem.has_closed_form() {
        return Err(SolverError::Unsupported {
            problem: problem.label().into(),
            reason: "scattering needs a closed-form boundary Green's function".into(),
        });
    }
    let e = problem.channel_dispersion(0, k)?;
    let n = centers.len();
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let g = greens::green0_boundary(
                problem,
                centers.points[i],
                centers.points[j],
                e,
                CutSide::Above,
            )?;
            m[(i, j)] = if i == j {
                Complex64::new(1.0 / centers.couplings[i], 0.0) - g
            } else {
                -g
            };
        }
    }
    let mut rhs = DMatrix::<Complex64>::zeros(n, 1);
    for j in 0..n {
        rhs[(j, 0)] = problem.eval_channel(0, k, centers.points[j])?;
    }
    let weights = m
        .lu()
        .solve(&rhs)
        .ok_or(SolverError::ZeroOfPhi { energy: e })?;
    let mut st = MulticenterScattering {
        problem,
        centers: centers.clone(),
        weights: weights.column(0).iter().copied().collect(),
        energy: e,
        wavenumber: k,
        reflection: None,
        transmission: None,
    };
    if problem.label() == "free-line" {
        let far = centers
            .points
            .iter()
            .map(|p| p.on_line().unwrap_or(0.0).abs())
            .fold(0.0, f64::max)
            + 40.0 / k.abs()
            + 1.0;
        let sgn = k.signum();
        let eta_in = st.eval(Point::Line(-sgn * far))?;
        let eta_out = st.eval(Point::Line(sgn * far))?;
        let inc_in = Complex64::from_polar(1.0, -k * sgn * far);
        st.reflection = Some((eta_in - inc_in) * inc_in);
        st.transmission = Some(eta_out * Complex64::from_polar(1.0, -k * sgn * far));
    }
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krein::{self, PointPerturbation};
    use crate::spectral::UnitSystem;
    use approx::assert_relative_eq;

    fn free_line() -> BaseProblem {
        BaseProblem::free_line(UnitSystem::default())
    }
    fn reflectionless() -> BaseProblem {
        BaseProblem::reflectionless(1.0, UnitSystem::default()).unwrap()
    }

    #[test]
    fn single_center_matrix_reduces_to_scalar_phi() {
        let p = free_line();
        let centers = CenterSet::new(vec![Point::Line(0.3)], vec![1.7]).unwrap();
        let pert = PointPerturbation::new(Point::Line(0.3), 1.7).unwrap();
        let m = phi_matrix(&p, &centers, -2.0, 1e-10).unwrap();
        let scalar = krein::phi(&p, &pert, Complex64::new(-2.0, 0.0), 1e-10).unwrap();
        assert_relative_eq!(m.matrix[(0, 0)], scalar.re, max_relative = 1e-13);
    }

    #[test]
    fn two_center_offdiagonal_value() {
        // free line, centers at ±1, E = −1: off-diagonal −G₀(−1,1|−1) =
        // −(1/2)e^{−2} with the 1D kernel (1/2√(−E)) e^{−√(−E)|x−y|}
        let p = free_line();
        let centers = CenterSet::new(vec![Point::Line(-1.0), Point::Line(1.0)], vec![2.0, 2.0]).unwrap();
        let m = phi_matrix(&p, &centers, -1.0, 1e-10).unwrap();
        assert_relative_eq!(m.matrix[(0, 1)], -0.5 * (-2.0f64).exp(), max_relative = 1e-12);
        assert_relative_eq!(m.matrix[(0, 1)], m.matrix[(1, 0)], max_relative = 1e-15);
    }

    #[test]
    fn coincident_centers_rejected() {
        let r = CenterSet::new(
            vec![Point::Line(0.5), Point::Line(0.5 + 1e-10)],
            vec![1.0, 1.0],
        );
        assert!(r.is_err());
    }

    #[test]
    fn hermiticity_of_phi_matrix_at_random_energies() {
        let p = reflectionless();
        let centers = CenterSet::new(
            vec![Point::Line(-0.8), Point::Line(0.4), Point::Line(1.3)],
            vec![0.7, 1.2, 0.5],
        )
        .unwrap();
        for i in 0..10 {
            let e = -4.0 + 0.27 * i as f64;
            if (e + 1.0).abs() < 0.1 {
                continue;
            }
            let m = phi_matrix(&p, &centers, e, 1e-9).unwrap();
            for a in 0..3 {
                for b in 0..3 {
                    assert_relative_eq!(m.matrix[(a, b)], m.matrix[(b, a)], max_relative = 1e-13);
                }
            }
        }
    }

    #[test]
    fn double_well_matches_analytic_secular_equations() {
        // even: κ(1+tanh κd) = α, odd: κ(1+coth κd) = α (ħ=2m=1), d = 1;
        // 30-digit roots frozen for α = 2
        let p = free_line();
        let centers =
            CenterSet::new(vec![Point::Line(-1.0), Point::Line(1.0)], vec![2.0, 2.0]).unwrap();
        let states = find_bound_states_multicenter(&p, &centers, (-9.0, -1e-9), 1e-12).unwrap();
        assert_eq!(states.len(), 2);
        assert_relative_eq!(states[0].energy, -1.229_565_072_575_795_3, epsilon = 1e-9);
        assert_relative_eq!(states[1].energy, -0.634_909_570_547_041_3, epsilon = 1e-9);
        // small αd: only the even state survives
        let weak = CenterSet::new(vec![Point::Line(-1.0), Point::Line(1.0)], vec![0.8, 0.8]).unwrap();
        let states_weak = find_bound_states_multicenter(&p, &weak, (-9.0, -1e-9), 1e-12).unwrap();
        assert_eq!(states_weak.len(), 1);
        assert_relative_eq!(states_weak[0].energy, -0.288_078_674_380_735_56, epsilon = 1e-9);
    }

    #[test]
    fn determinant_and_recursive_spectra_agree() {
        let p = free_line();
        let centers = CenterSet::new(
            vec![Point::Line(-1.2), Point::Line(0.35), Point::Line(1.9)],
            vec![1.4, 0.9, 2.2],
        )
        .unwrap();
        let window = (-12.0, -1e-9);
        let det = find_bound_states_multicenter(&p, &centers, window, 1e-12).unwrap();
        let rec = find_bound_states_recursive(&p, &centers, window, 1e-12).unwrap();
        assert_eq!(det.len(), rec.len(), "det {det:?} vs recursive {rec:?}");
        for (d, r) in det.iter().zip(&rec) {
            assert!((d.energy - r).abs() < 1e-8, "{} vs {}", d.energy, r);
        }
    }

    #[test]
    fn full_green_reduces_to_single_center_form() {
        let p = reflectionless();
        let centers = CenterSet::new(vec![Point::Line(0.9)], vec![0.6]).unwrap();
        let pert = PointPerturbation::new(Point::Line(0.9), 0.6).unwrap();
        let e = Complex64::new(-2.2, 0.0);
        let x = Point::Line(0.2);
        let y = Point::Line(-0.5);
        let g1 = full_green_multicenter(&p, &centers, x, y, e, 1e-10).unwrap();
        let g2 = krein::full_green(&p, &pert, x, y, e, 1e-10).unwrap();
        assert!((g1 - g2).norm() < 1e-12);
    }

    #[test]
    fn multicenter_pole_cancellation_on_reflectionless_base() {
        let p = reflectionless();
        let centers =
            CenterSet::new(vec![Point::Line(0.7), Point::Line(-1.1)], vec![0.8, 1.1]).unwrap();
        let x = Point::Line(0.25);
        let y = Point::Line(-0.4);
        let mut vals = Vec::new();
        for j in 2..=6 {
            for sign in [1.0, -1.0] {
                let e = Complex64::new(-(1.0 + sign * 10f64.powi(-j)), 0.0);
                vals.push(full_green_multicenter(&p, &centers, x, y, e, 1e-10).unwrap().norm());
            }
        }
        let max = vals.iter().cloned().fold(0.0, f64::max);
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min < 10.0, "variation {vals:?}");
    }

    #[test]
    fn multicenter_scattering_unitarity() {
        let p = free_line();
        let centers = CenterSet::new(
            vec![Point::Line(-0.8), Point::Line(0.6)],
            vec![1.3, 0.7],
        )
        .unwrap();
        for i in 1..=20 {
            let k = 0.2 * i as f64;
            let st = generalized_eigenfunction_multicenter(&p, &centers, k).unwrap();
            let s = st.reflection.unwrap().norm_sqr() + st.transmission.unwrap().norm_sqr();
            assert!((s - 1.0).abs() < 1e-10, "k={k}: |R|^2+|T|^2={s}");
        }
    }

    #[test]
    fn single_center_scattering_matches_krein_route() {
        let p = free_line();
        let centers = CenterSet::new(vec![Point::Line(0.4)], vec![1.9]).unwrap();
        let pert = PointPerturbation::new(Point::Line(0.4), 1.9).unwrap();
        let st_m = generalized_eigenfunction_multicenter(&p, &centers, 1.1).unwrap();
        let st_s = krein::generalized_eigenfunction(&p, &pert, 1.1).unwrap();
        for x in [-2.0, 0.1, 1.5] {
            let vm = st_m.eval(Point::Line(x)).unwrap();
            let vs = st_s.eval(Point::Line(x)).unwrap();
            assert!((vm - vs).norm() < 1e-12);
        }
        assert!((st_m.reflection.unwrap() - st_s.reflection.unwrap()).norm() < 1e-10);
    }

    #[test]
    fn weak_couplings_leave_the_wave_unchanged() {
        let p = free_line();
        let centers = CenterSet::new(
            vec![Point::Line(-0.5), Point::Line(0.5)],
            vec![1e-9, 1e-9],
        )
        .unwrap();
        let st = generalized_eigenfunction_multicenter(&p, &centers, 0.9).unwrap();
        for x in [-1.5, 0.0, 2.0] {
            let chi = Complex64::from_polar(1.0, 0.9 * x);
            assert!((st.eval(Point::Line(x)).unwrap() - chi).norm() < 1e-8);
        }
    }
}
