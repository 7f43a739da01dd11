//! Spectral-data model for the base operator H₀ and the catalog of exactly
//! known problems.
//!
//! A [`BaseProblem`] is described by its discrete levels (index, energy,
//! eigenfunction), zero or more continuum channels (dispersion λ(k), spectral
//! weight w(k) so that dμ(λ) = w(k) dk, generalized eigenfunction χ_k), and
//! optionally a closed-form Green's function with side-of-cut selection.
//!
//! Catalog:
//!
//! | label            | discrete              | continuum      | closed form |
//! |------------------|-----------------------|----------------|-------------|
//! | `free-line`      | none                  | k ∈ ℝ, e^{ikx} | yes         |
//! | `reflectionless` | E₀ = −ħ²κ²/2m         | k ∈ ℝ          | yes         |
//! | `harmonic`       | ħω(k+½), Hermite      | none           | no          |
//! | `torus`          | 2D plane-wave lattice | none           | no          |
//! | `free-plane`     | none                  | [0,∞), 2D      | yes (E < 0) |
//!
//! Spectral-measure conventions (weights w(k), with the eigenfunction
//! prefactors exactly as used in the worked examples):
//! - free line: χ_k(x) = e^{ikx}, w(k) = 1/2π;
//! - reflectionless: χ_k(x) = √(κ/2π) e^{ikx}(ik − κ tanh κx)/(κ + ik),
//!   w(k) = 1/κ.
//!
//! Both conventions are pinned by the requirement that the eigenfunction
//! expansion reproduce the closed-form Green's function and resynthesize test
//! functions; see the crate's integration tests.

use num_complex::Complex64;

use crate::error::{Result, SolverError};
use crate::special::bessel_k0;

/// Physical constants ħ and m. The crate default is ħ = 2m = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for UnitSystem {
    fn default() -> Self {
        UnitSystem { hbar: 1.0, mass: 0.5 }
    }
}

impl UnitSystem {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        if !(hbar > 0.0) || !(mass > 0.0) {
            return Err(SolverError::InvalidParameter(format!(
                "hbar and mass must be positive, got hbar={hbar}, mass={mass}"
            )));
        }
        Ok(UnitSystem { hbar, mass })
    }

    /// ħ=m=1 convention, used by the oscillator examples.
    pub fn atomic() -> Self {
        UnitSystem { hbar: 1.0, mass: 1.0 }
    }

    /// Kinetic prefactor c = ħ²/2m, so that λ(k) = c k².
    #[inline]
    pub fn kinetic(&self) -> f64 {
        self.hbar * self.hbar / (2.0 * self.mass)
    }

    /// Principal branch of √(−2mE)/ħ. The cut sits on the positive real E
    /// axis; for E just above the cut Im s < 0, so e^{−s|x−y|} is the
    /// outgoing wave e^{+ik|x−y|}.
    #[inline]
    pub fn decay_rate(&self, e: Complex64) -> Complex64 {
        (-2.0 * self.mass * e).sqrt() / self.hbar
    }
}

/// A point on the line or in the plane, matching the problem dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Point {
    Line(f64),
    Plane(f64, f64),
}

impl Point {
    pub fn dimension(&self) -> usize {
        match self {
            Point::Line(_) => 1,
            Point::Plane(_, _) => 2,
        }
    }

    /// Coordinate on the line; errors on plane points.
    pub fn on_line(&self) -> Result<f64> {
        match self {
            Point::Line(x) => Ok(*x),
            Point::Plane(_, _) => Err(SolverError::DimensionMismatch(
                "expected a 1D point".into(),
            )),
        }
    }

    pub fn on_plane(&self) -> Result<(f64, f64)> {
        match self {
            Point::Plane(x, y) => Ok((*x, *y)),
            Point::Line(_) => Err(SolverError::DimensionMismatch(
                "expected a 2D point".into(),
            )),
        }
    }

    pub fn distance(&self, other: &Point) -> Result<f64> {
        match (self, other) {
            (Point::Line(a), Point::Line(b)) => Ok((a - b).abs()),
            (Point::Plane(ax, ay), Point::Plane(bx, by)) => {
                Ok(((ax - bx).powi(2) + (ay - by).powi(2)).sqrt())
            }
            _ => Err(SolverError::DimensionMismatch(
                "points of different dimension".into(),
            )),
        }
    }
}

/// A discrete level: index in energy order, energy, multiplicity of its
/// energy within the numbering (1 except on the torus).
#[derive(Debug, Clone, Copy)]
pub struct DiscreteLevel {
    pub index: usize,
    pub energy: f64,
    pub degeneracy: usize,
}

/// Distinct discrete energy with its multiplicity and the index range of the
/// modes carrying it.
#[derive(Debug, Clone, Copy)]
pub struct DistinctLevel {
    pub energy: f64,
    pub first_index: usize,
    pub multiplicity: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct TorusMode {
    pub n1: i64,
    pub n2: i64,
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub(crate) enum ProblemKind {
    FreeLine,
    Reflectionless { kappa: f64 },
    HarmonicOscillator { omega: f64 },
    FlatTorus { l1: f64, l2: f64, modes: Vec<TorusMode> },
    FreePlane,
}

/// Immutable spectral description of H₀. All evaluators are pure functions
/// of immutable state and safe for concurrent use.
#[derive(Debug, Clone)]
pub struct BaseProblem {
    pub(crate) kind: ProblemKind,
    units: UnitSystem,
    label: String,
}

/// Number of torus modes enumerated eagerly at construction for
/// level-indexed access. Sum machinery enumerates independently by energy.
const TORUS_MODE_CACHE: usize = 4096;

impl BaseProblem {
    /// Free Hamiltonian on the line: no discrete levels, one channel with
    /// χ_k(x) = e^{ikx} and λ = ħ²k²/2m, closed-form Green's function
    /// G₀(x,y|E) = (m/ħ²s) e^{−s|x−y|}, s = √(−2mE)/ħ.
    pub fn free_line(units: UnitSystem) -> Self {
        BaseProblem { kind: ProblemKind::FreeLine, units, label: "free-line".into() }
    }

    /// Reflectionless well −(ħ²/2m)·2κ² sech²(κx): a single bound state
    /// E₀ = −ħ²κ²/2m with φ₀ = √(κ/2) sech(κx), plus a reflectionless
    /// continuum channel; closed-form Green's function from the Jost
    /// solutions e^{∓sx}(s ± κ tanh κx).
    pub fn reflectionless(kappa: f64, units: UnitSystem) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(SolverError::InvalidParameter(format!(
                "reflectionless requires kappa > 0, got {kappa}"
            )));
        }
        Ok(BaseProblem {
            kind: ProblemKind::Reflectionless { kappa },
            units,
            label: "reflectionless".into(),
        })
    }

    /// Harmonic oscillator: E_k = ħω(k+½) with Hermite-function levels,
    /// purely discrete, expansion-only Green's function.
    pub fn harmonic_oscillator(omega: f64, units: UnitSystem) -> Result<Self> {
        if !(omega > 0.0) {
            return Err(SolverError::InvalidParameter(format!(
                "harmonic oscillator requires omega > 0, got {omega}"
            )));
        }
        Ok(BaseProblem {
            kind: ProblemKind::HarmonicOscillator { omega },
            units,
            label: "harmonic".into(),
        })
    }

    /// Flat 2-torus of side lengths L₁, L₂: plane-wave modes
    /// φ_n(x) = e^{i 2π(n₁x₁/L₁ + n₂x₂/L₂)}/√(L₁L₂) with
    /// E_n = (ħ²/2m)((2πn₁/L₁)² + (2πn₂/L₂)²), enumerated by increasing
    /// energy, ties broken lexicographically in (n₁, n₂).
    pub fn flat_torus(l1: f64, l2: f64, units: UnitSystem) -> Result<Self> {
        if !(l1 > 0.0) || !(l2 > 0.0) {
            return Err(SolverError::InvalidParameter(format!(
                "torus sides must be positive, got {l1}, {l2}"
            )));
        }
        let mut modes = enumerate_torus_modes_count(l1, l2, units.kinetic(), TORUS_MODE_CACHE);
        modes.truncate(TORUS_MODE_CACHE);
        Ok(BaseProblem {
            kind: ProblemKind::FlatTorus { l1, l2, modes },
            units,
            label: "torus".into(),
        })
    }

    /// Free Hamiltonian in the plane: continuum [0, ∞) with the closed-form
    /// kernel (m/πħ²) K₀(√(−2mE)|x−y|/ħ) for real E < 0. Requests on the
    /// cut are rejected for this problem.
    pub fn free_plane(units: UnitSystem) -> Self {
        BaseProblem { kind: ProblemKind::FreePlane, units, label: "free-plane".into() }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn units(&self) -> UnitSystem {
        self.units
    }

    pub fn space_dimension(&self) -> usize {
        match self.kind {
            ProblemKind::FlatTorus { .. } | ProblemKind::FreePlane => 2,
            _ => 1,
        }
    }

    /// Bottom of the continuous spectrum, if any.
    pub fn continuum_infimum(&self) -> Option<f64> {
        match self.kind {
            ProblemKind::FreeLine | ProblemKind::Reflectionless { .. } | ProblemKind::FreePlane => {
                Some(0.0)
            }
            ProblemKind::HarmonicOscillator { .. } | ProblemKind::FlatTorus { .. } => None,
        }
    }

    /// Number of discrete levels when finite.
    pub fn discrete_count(&self) -> Option<usize> {
        match self.kind {
            ProblemKind::FreeLine | ProblemKind::FreePlane => Some(0),
            ProblemKind::Reflectionless { .. } => Some(1),
            ProblemKind::HarmonicOscillator { .. } | ProblemKind::FlatTorus { .. } => None,
        }
    }

    /// Energy of discrete level `k` (modes counted individually).
    pub fn level_energy(&self, k: usize) -> Result<f64> {
        match &self.kind {
            ProblemKind::FreeLine | ProblemKind::FreePlane => Err(SolverError::LevelOutOfRange {
                index: k,
                reason: "problem has no discrete levels".into(),
            }),
            ProblemKind::Reflectionless { kappa } => {
                if k == 0 {
                    Ok(-self.units.kinetic() * kappa * kappa)
                } else {
                    Err(SolverError::LevelOutOfRange {
                        index: k,
                        reason: "reflectionless well has a single bound state".into(),
                    })
                }
            }
            ProblemKind::HarmonicOscillator { omega } => {
                Ok(self.units.hbar * omega * (k as f64 + 0.5))
            }
            ProblemKind::FlatTorus { modes, .. } => modes
                .get(k)
                .map(|m| m.energy)
                .ok_or_else(|| SolverError::LevelOutOfRange {
                    index: k,
                    reason: format!("torus level cache holds {} modes", modes.len()),
                }),
        }
    }

    /// All discrete levels with energy ≤ `emax` (individually indexed).
    pub fn levels_below(&self, emax: f64) -> Vec<DiscreteLevel> {
        match &self.kind {
            ProblemKind::FreeLine | ProblemKind::FreePlane => Vec::new(),
            ProblemKind::Reflectionless { kappa } => {
                let e0 = -self.units.kinetic() * kappa * kappa;
                if e0 <= emax {
                    vec![DiscreteLevel { index: 0, energy: e0, degeneracy: 1 }]
                } else {
                    Vec::new()
                }
            }
            ProblemKind::HarmonicOscillator { omega } => {
                let hw = self.units.hbar * omega;
                let mut out = Vec::new();
                let mut k = 0usize;
                loop {
                    let e = hw * (k as f64 + 0.5);
                    if e > emax {
                        break;
                    }
                    out.push(DiscreteLevel { index: k, energy: e, degeneracy: 1 });
                    k += 1;
                }
                out
            }
            ProblemKind::FlatTorus { modes, .. } => {
                let mut out = Vec::new();
                for (i, m) in modes.iter().enumerate() {
                    if m.energy > emax {
                        break;
                    }
                    let deg = modes.iter().filter(|q| (q.energy - m.energy).abs() < 1e-9).count();
                    out.push(DiscreteLevel { index: i, energy: m.energy, degeneracy: deg });
                }
                out
            }
        }
    }

    /// Distinct discrete energies up to `emax`, with multiplicities.
    pub fn distinct_levels_below(&self, emax: f64) -> Vec<DistinctLevel> {
        let levels = self.levels_below(emax);
        let mut out: Vec<DistinctLevel> = Vec::new();
        for l in levels {
            match out.last_mut() {
                Some(d) if (d.energy - l.energy).abs() < 1e-9 * d.energy.abs().max(1.0) => {
                    d.multiplicity += 1;
                }
                _ => out.push(DistinctLevel {
                    energy: l.energy,
                    first_index: l.index,
                    multiplicity: 1,
                }),
            }
        }
        out
    }

    /// Pointwise eigenfunction value φ_k(x).
    pub fn eval_level(&self, k: usize, x: Point) -> Result<Complex64> {
        match &self.kind {
            ProblemKind::FreeLine | ProblemKind::FreePlane => Err(SolverError::LevelOutOfRange {
                index: k,
                reason: "problem has no discrete levels".into(),
            }),
            ProblemKind::Reflectionless { kappa } => {
                if k != 0 {
                    return Err(SolverError::LevelOutOfRange {
                        index: k,
                        reason: "reflectionless well has a single bound state".into(),
                    });
                }
                let xv = x.on_line()?;
                Ok(Complex64::new((kappa / 2.0).sqrt() / (kappa * xv).cosh(), 0.0))
            }
            ProblemKind::HarmonicOscillator { omega } => {
                let xv = x.on_line()?;
                let scale = (self.units.mass * omega / self.units.hbar).sqrt();
                let psi = hermite_functions(xv * scale, k);
                Ok(Complex64::new(scale.sqrt() * psi[k], 0.0))
            }
            ProblemKind::FlatTorus { l1, l2, modes } => {
                let (x1, x2) = x.on_plane()?;
                let m = modes.get(k).ok_or_else(|| SolverError::LevelOutOfRange {
                    index: k,
                    reason: format!("torus level cache holds {} modes", modes.len()),
                })?;
                let phase = 2.0 * std::f64::consts::PI
                    * (m.n1 as f64 * x1 / l1 + m.n2 as f64 * x2 / l2);
                Ok(Complex64::from_polar(1.0 / (l1 * l2).sqrt(), phase))
            }
        }
    }

    /// Number of continuum channels with pointwise-evaluable eigenfunctions.
    pub fn channel_count(&self) -> usize {
        match self.kind {
            ProblemKind::FreeLine | ProblemKind::Reflectionless { .. } => 1,
            _ => 0,
        }
    }

    /// Generalized eigenfunction χ_k(x) of channel `ch`.
    pub fn eval_channel(&self, ch: usize, k: f64, x: Point) -> Result<Complex64> {
        self.check_channel(ch)?;
        let xv = x.on_line()?;
        match self.kind {
            ProblemKind::FreeLine => Ok(Complex64::from_polar(1.0, k * xv)),
            ProblemKind::Reflectionless { kappa } => {
                let pref = (kappa / (2.0 * std::f64::consts::PI)).sqrt();
                let ik = Complex64::new(0.0, k);
                let num = ik - (kappa * xv).tanh() * kappa;
                let den = Complex64::new(kappa, k);
                Ok(Complex64::from_polar(pref, k * xv) * num / den)
            }
            _ => unreachable!(),
        }
    }

    /// Dispersion λ(k) = ħ²k²/2m of channel `ch`.
    pub fn channel_dispersion(&self, ch: usize, k: f64) -> Result<f64> {
        self.check_channel(ch)?;
        Ok(self.units.kinetic() * k * k)
    }

    /// Spectral weight w(k) of channel `ch`, so that dμ(λ) = w(k) dk.
    pub fn channel_weight(&self, ch: usize, _k: f64) -> Result<f64> {
        self.check_channel(ch)?;
        match self.kind {
            ProblemKind::FreeLine => Ok(1.0 / (2.0 * std::f64::consts::PI)),
            ProblemKind::Reflectionless { kappa } => Ok(1.0 / kappa),
            _ => unreachable!(),
        }
    }

    /// Limit of |χ_k(x)|² w(k) as |k| → ∞, used for truncation-tail bounds.
    pub(crate) fn channel_asymptotic_density(&self, ch: usize) -> Result<f64> {
        self.check_channel(ch)?;
        Ok(1.0 / (2.0 * std::f64::consts::PI))
    }

    fn check_channel(&self, ch: usize) -> Result<()> {
        if ch < self.channel_count() {
            Ok(())
        } else {
            Err(SolverError::LevelOutOfRange {
                index: ch,
                reason: format!("problem has {} continuum channel(s)", self.channel_count()),
            })
        }
    }

    /// Whether the catalog provides a closed-form Green's function.
    pub fn has_closed_form(&self) -> bool {
        matches!(
            self.kind,
            ProblemKind::FreeLine | ProblemKind::Reflectionless { .. } | ProblemKind::FreePlane
        )
    }

    /// Closed-form Green's function, when the catalog provides one.
    ///
    /// Free line and reflectionless: any complex E off the positive real
    /// axis; boundary values E ± i0 are reached by passing a tiny imaginary
    /// part or via `greens::green0_boundary`. Free plane: real E < 0 only.
    pub fn closed_form_green(&self, x: Point, y: Point, e: Complex64) -> Option<Result<Complex64>> {
        match &self.kind {
            ProblemKind::FreeLine | ProblemKind::Reflectionless { .. } => {
                self.closed_form_green_with_rate(x, y, self.units.decay_rate(e))
            }
            ProblemKind::FreePlane => Some(self.free_plane_kernel(x, y, e)),
            _ => None,
        }
    }

    /// Closed-form 1D kernels as functions of the decay rate s = √(−2mE)/ħ;
    /// boundary values on the cut select s = ∓i√(2mE)/ħ directly.
    pub(crate) fn closed_form_green_with_rate(
        &self,
        x: Point,
        y: Point,
        s: Complex64,
    ) -> Option<Result<Complex64>> {
        match &self.kind {
            ProblemKind::FreeLine => Some(self.free_line_kernel(x, y, s)),
            ProblemKind::Reflectionless { kappa } => Some(self.jost_kernel(*kappa, x, y, s)),
            _ => None,
        }
    }

    fn free_line_kernel(&self, x: Point, y: Point, s: Complex64) -> Result<Complex64> {
        let (xv, yv) = (x.on_line()?, y.on_line()?);
        let r = (xv - yv).abs();
        Ok(self.units.mass / (self.units.hbar * self.units.hbar) / s * (-s * r).exp())
    }

    fn jost_kernel(&self, kappa: f64, x: Point, y: Point, s: Complex64) -> Result<Complex64> {
        let (xv, yv) = (x.on_line()?, y.on_line()?);
        let (xg, xl) = if xv >= yv { (xv, yv) } else { (yv, xv) };
        let tg = (kappa * xg).tanh();
        let tl = (kappa * xl).tanh();
        // u(x_>) v(x_<) / W with u = e^{-sx}(s + k tanh kx), v = e^{sx}(s - k tanh kx),
        // W = 2s(s^2 - k^2); overall 2m/hbar^2 from the kinetic normalization.
        let num = (-s * (xg - xl)).exp() * (s + kappa * tg) * (s - kappa * tl);
        let den = 2.0 * s * (s * s - kappa * kappa);
        Ok(num / den / self.units.kinetic())
    }

    fn free_plane_kernel(&self, x: Point, y: Point, e: Complex64) -> Result<Complex64> {
        if e.im != 0.0 || e.re >= 0.0 {
            return Err(SolverError::CutViolation { energy: e.re, infimum: 0.0 });
        }
        let r = x.distance(&y)?;
        if r == 0.0 {
            return Err(SolverError::InvalidParameter(
                "free-plane kernel diverges at coincident points".into(),
            ));
        }
        let s = (-2.0 * self.units.mass * e.re).sqrt() / self.units.hbar;
        let pref = self.units.mass / (std::f64::consts::PI * self.units.hbar * self.units.hbar);
        Ok(Complex64::new(pref * bessel_k0(s * r), 0.0))
    }

    /// Torus geometry accessor (sides), for modules that need the lattice.
    pub fn torus_sides(&self) -> Option<(f64, f64)> {
        match self.kind {
            ProblemKind::FlatTorus { l1, l2, .. } => Some((l1, l2)),
            _ => None,
        }
    }
}

/// Normalized Hermite functions ψ_0..=ψ_n at u:
/// ψ₀ = π^{−1/4} e^{−u²/2}, ψ_{k+1} = u√(2/(k+1)) ψ_k − √(k/(k+1)) ψ_{k−1}.
/// With the (mω/ħ)^{1/4} prefactor these are the oscillator eigenfunctions.
pub(crate) fn hermite_functions(u: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let psi0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * u * u).exp();
    out.push(psi0);
    if n == 0 {
        return out;
    }
    out.push(std::f64::consts::SQRT_2 * u * psi0);
    for k in 1..n {
        let kf = k as f64;
        let next = u * (2.0 / (kf + 1.0)).sqrt() * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
        out.push(next);
    }
    out
}

/// Enumerate torus modes in increasing energy (ties lexicographic in
/// (n₁, n₂)) until at least `count` modes are collected.
pub(crate) fn enumerate_torus_modes_count(l1: f64, l2: f64, c: f64, count: usize) -> Vec<TorusMode> {
    // grow the energy cutoff until enough modes fit
    let mut emax = c * (2.0 * std::f64::consts::PI / l1.max(l2)).powi(2) * 4.0;
    loop {
        let modes = enumerate_torus_modes_emax(l1, l2, c, emax);
        if modes.len() >= count {
            return modes;
        }
        emax *= 2.0;
    }
}

/// Enumerate all torus modes with energy ≤ emax, sorted by (energy, n₁, n₂).
pub(crate) fn enumerate_torus_modes_emax(l1: f64, l2: f64, c: f64, emax: f64) -> Vec<TorusMode> {
    let b1 = 2.0 * std::f64::consts::PI / l1;
    let b2 = 2.0 * std::f64::consts::PI / l2;
    let n1_max = (emax / c).sqrt() / b1;
    let n2_max = (emax / c).sqrt() / b2;
    let n1_max = n1_max.floor() as i64;
    let n2_max = n2_max.floor() as i64;
    let mut modes = Vec::new();
    for n1 in -n1_max..=n1_max {
        let e1 = c * (b1 * n1 as f64).powi(2);
        if e1 > emax {
            continue;
        }
        for n2 in -n2_max..=n2_max {
            let e = e1 + c * (b2 * n2 as f64).powi(2);
            if e <= emax {
                modes.push(TorusMode { n1, n2, energy: e });
            }
        }
    }
    modes.sort_by(|a, b| {
        a.energy
            .partial_cmp(&b.energy)
            .unwrap()
            .then(a.n1.cmp(&b.n1))
            .then(a.n2.cmp(&b.n2))
    });
    modes
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn free_line_channel_is_plane_wave() {
        let p = BaseProblem::free_line(UnitSystem::default());
        let v = p.eval_channel(0, 2.0, Point::Line(0.0)).unwrap();
        assert_relative_eq!(v.re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(v.im, 0.0, epsilon = 1e-15);
        assert_eq!(p.discrete_count(), Some(0));
    }

    #[test]
    fn free_line_closed_form_diagonal() {
        // G0(0,0|-1) = (1/hbar) sqrt(m / (-2E)) = 0.5 at hbar = 2m = 1
        let p = BaseProblem::free_line(UnitSystem::default());
        let g = p
            .closed_form_green(Point::Line(0.0), Point::Line(0.0), Complex64::new(-1.0, 0.0))
            .unwrap()
            .unwrap();
        assert_relative_eq!(g.re, 0.5, max_relative = 1e-14);
        assert_relative_eq!(g.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn free_line_outgoing_boundary_value() {
        // At E = k^2 (hbar = 2m = 1, k = 1): G0(0,0|E+i0) = i m / (hbar^2 k) = i/2
        let p = BaseProblem::free_line(UnitSystem::default());
        let g = p
            .closed_form_green(Point::Line(0.0), Point::Line(0.0), Complex64::new(1.0, 1e-13))
            .unwrap()
            .unwrap();
        assert_relative_eq!(g.im, 0.5, max_relative = 1e-6);
        assert!(g.re.abs() < 1e-6);
    }

    #[test]
    fn reflectionless_level_data() {
        let p = BaseProblem::reflectionless(1.0, UnitSystem::default()).unwrap();
        assert_relative_eq!(p.level_energy(0).unwrap(), -1.0, max_relative = 1e-15);
        let phi0 = p.eval_level(0, Point::Line(0.0)).unwrap();
        assert_relative_eq!(phi0.re, 0.707_106_781_2, max_relative = 1e-9);
        assert!(p.level_energy(1).is_err());
        assert!(BaseProblem::reflectionless(-1.0, UnitSystem::default()).is_err());
    }

    #[test]
    fn reflectionless_diagonal_closed_form() {
        // G0(0,0|E) = -sqrt(-E)/(2(E+1)) for kappa = 1: at E = -4 this is 1/3
        let p = BaseProblem::reflectionless(1.0, UnitSystem::default()).unwrap();
        let g = p
            .closed_form_green(Point::Line(0.0), Point::Line(0.0), Complex64::new(-4.0, 0.0))
            .unwrap()
            .unwrap();
        assert_relative_eq!(g.re, 1.0 / 3.0, max_relative = 1e-13);
    }

    #[test]
    fn reflectionless_offdiagonal_reference() {
        // High-precision expansion value, kappa = 2, hbar = 2m = 1
        let p = BaseProblem::reflectionless(2.0, UnitSystem::default()).unwrap();
        let g = p
            .closed_form_green(Point::Line(0.6), Point::Line(-0.3), Complex64::new(-7.1, 0.0))
            .unwrap()
            .unwrap();
        assert_relative_eq!(g.re, 0.089_101_103_056_611_36, max_relative = 1e-12);
    }

    #[test]
    fn oscillator_catalog_values() {
        // hbar = m = omega = 1 for these examples
        let p = BaseProblem::harmonic_oscillator(1.0, UnitSystem::atomic()).unwrap();
        let phi0 = p.eval_level(0, Point::Line(0.0)).unwrap().re;
        assert_relative_eq!(phi0 * phi0, 0.564_189_583_5, max_relative = 1e-9);
        let phi1 = p.eval_level(1, Point::Line(0.0)).unwrap().re;
        assert!(phi1.abs() < 1e-300);
        assert_relative_eq!(p.level_energy(3).unwrap(), 3.5, max_relative = 1e-15);
        assert!(BaseProblem::harmonic_oscillator(0.0, UnitSystem::atomic()).is_err());
    }

    #[test]
    fn oscillator_eigenfunctions_are_orthonormal() {
        let p = BaseProblem::harmonic_oscillator(1.0, UnitSystem::atomic()).unwrap();
        let (xs, ws) = crate::quad::gauss_legendre(160);
        let (a, b) = (-12.0, 12.0);
        for k in 0..6usize {
            for l in k..6usize {
                let mut s = 0.0;
                for (x, w) in xs.iter().zip(&ws) {
                    let xv = 0.5 * (a + b) + 0.5 * (b - a) * x;
                    let fk = p.eval_level(k, Point::Line(xv)).unwrap().re;
                    let fl = p.eval_level(l, Point::Line(xv)).unwrap().re;
                    s += w * fk * fl;
                }
                s *= 0.5 * (b - a);
                let want = if k == l { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-6, "({k},{l}) -> {s}");
            }
        }
    }

    #[test]
    fn torus_level_structure() {
        let units = UnitSystem::default();
        let p = BaseProblem::flat_torus(2.0 * std::f64::consts::PI, 2.0 * std::f64::consts::PI, units).unwrap();
        let d = p.distinct_levels_below(1.5);
        assert_relative_eq!(d[0].energy, 0.0, epsilon = 1e-12);
        assert_eq!(d[0].multiplicity, 1);
        assert_relative_eq!(d[1].energy, 1.0, max_relative = 1e-12);
        assert_eq!(d[1].multiplicity, 4);
        // |phi_n(a)|^2 = 1/(2 pi)^2 for all modes and points
        let v = p.eval_level(7, Point::Plane(0.3, -1.1)).unwrap();
        assert_relative_eq!(v.norm_sqr(), 1.0 / (4.0 * std::f64::consts::PI * std::f64::consts::PI), max_relative = 1e-12);
    }

    #[test]
    fn free_plane_kernel_log_growth() {
        let p = BaseProblem::free_plane(UnitSystem::default());
        let r = 1e-6;
        let g = p
            .closed_form_green(Point::Plane(0.0, 0.0), Point::Plane(r, 0.0), Complex64::new(-1.0, 0.0))
            .unwrap()
            .unwrap()
            .re;
        // m / (pi hbar^2) = 1/(2 pi); assert within 1% of -ln(r)/(2 pi)
        let log_part = -(r).ln() / (2.0 * std::f64::consts::PI);
        assert!((g / log_part - 1.0).abs() < 0.01, "g = {g}, log = {log_part}");
        // symmetry
        let g2 = p
            .closed_form_green(Point::Plane(r, 0.0), Point::Plane(0.0, 0.0), Complex64::new(-1.0, 0.0))
            .unwrap()
            .unwrap()
            .re;
        assert_relative_eq!(g, g2, max_relative = 1e-14);
        // cut rejected
        assert!(p
            .closed_form_green(Point::Plane(0.0, 0.0), Point::Plane(1.0, 0.0), Complex64::new(1.0, 0.0))
            .unwrap()
            .is_err());
    }

    #[test]
    fn torus_constant_mode_value() {
        let l = 2.0 * std::f64::consts::PI;
        let p = BaseProblem::flat_torus(l, l, UnitSystem::default()).unwrap();
        let v = p.eval_level(0, Point::Plane(1.0, 2.0)).unwrap();
        assert_relative_eq!(v.re, 1.0 / l, max_relative = 1e-14);
        assert_relative_eq!(v.im, 0.0, epsilon = 1e-14);
    }
}
