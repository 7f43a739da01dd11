//! Experiment configuration: a flat TOML file with sections, every value
//! overridable from the command line. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use deltaspec::curve::{CurveShape, CurveSupport};
use deltaspec::multicenter::CenterSet;
use deltaspec::{BaseProblem, Point, UnitSystem};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub problem: ProblemSpec,
    #[serde(default)]
    pub perturbation: PerturbationSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    /// Catalog label: free-line | reflectionless | harmonic | torus | free-plane.
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec {
            label: "free-line".into(),
            kappa: None,
            omega: None,
            l1: None,
            l2: None,
            hbar: None,
            mass: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    /// point | renormalized | centers | curve.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Support coordinates: one value on the line, two in the plane.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inv_alpha_r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu2: Option<f64>,
    /// Center coordinates for the multicenter case.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub centers: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub couplings: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<CurveSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    /// circle | ellipse | polyline.
    pub shape: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub semi_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub semi_y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    /// Energy window (lo, hi) for bound-state searches and grids.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Level index for perturbative commands.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    /// Grid size for curve/energy sweeps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// Wavenumber range for scattering sweeps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_count: Option<usize>,
    /// Evaluation points for the green command.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    /// Flow target scale for renorm flow checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu2_to: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sidecar: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn units(&self) -> anyhow::Result<UnitSystem> {
        Ok(UnitSystem::new(
            self.problem.hbar.unwrap_or(1.0),
            self.problem.mass.unwrap_or(0.5),
        )?)
    }

    /// Build the catalog problem named by `label`.
    pub fn build_problem(&self) -> anyhow::Result<BaseProblem> {
        let units = self.units()?;
        let p = &self.problem;
        Ok(match p.label.as_str() {
            "free-line" => BaseProblem::free_line(units),
            "reflectionless" => BaseProblem::reflectionless(p.kappa.unwrap_or(1.0), units)?,
            "harmonic" => BaseProblem::harmonic_oscillator(p.omega.unwrap_or(1.0), units)?,
            "torus" => {
                let tau = 2.0 * std::f64::consts::PI;
                BaseProblem::flat_torus(p.l1.unwrap_or(tau), p.l2.unwrap_or(tau), units)?
            }
            "free-plane" => BaseProblem::free_plane(units),
            other => bail!("unknown problem label '{other}' (expected free-line, reflectionless, harmonic, torus, free-plane)"),
        })
    }

    pub fn support_point(&self, problem: &BaseProblem) -> anyhow::Result<Point> {
        let coords = self.perturbation.support.clone().unwrap_or_default();
        Ok(match (problem.space_dimension(), coords.len()) {
            (1, 0) => Point::Line(0.0),
            (1, 1) => Point::Line(coords[0]),
            (2, 0) => Point::Plane(0.0, 0.0),
            (2, 2) => Point::Plane(coords[0], coords[1]),
            (d, n) => bail!("support needs {d} coordinate(s), got {n}"),
        })
    }

    pub fn build_centers(&self, problem: &BaseProblem) -> anyhow::Result<CenterSet> {
        let pts = self
            .perturbation
            .centers
            .as_ref()
            .context("multicenter run needs [perturbation] centers")?;
        let couplings = self
            .perturbation
            .couplings
            .as_ref()
            .context("multicenter run needs [perturbation] couplings")?;
        let dim = problem.space_dimension();
        let mut points = Vec::new();
        for (i, c) in pts.iter().enumerate() {
            match (dim, c.len()) {
                (1, 1) => points.push(Point::Line(c[0])),
                (2, 2) => points.push(Point::Plane(c[0], c[1])),
                (d, n) => bail!("center {i} needs {d} coordinate(s), got {n}"),
            }
        }
        Ok(CenterSet::new(points, couplings.clone())?)
    }

    pub fn build_curve(&self) -> anyhow::Result<CurveSupport> {
        let spec = self
            .perturbation
            .curve
            .as_ref()
            .context("curve run needs a [perturbation.curve] table")?;
        let order = spec.order.unwrap_or(32);
        let shape = match spec.shape.as_str() {
            "circle" => CurveShape::Circle {
                center: spec.center.map(|c| (c[0], c[1])).unwrap_or((0.0, 0.0)),
                radius: spec.radius.context("circle needs a radius")?,
                phase: 0.0,
            },
            "ellipse" => CurveShape::Ellipse {
                center: spec.center.map(|c| (c[0], c[1])).unwrap_or((0.0, 0.0)),
                semi_x: spec.semi_x.context("ellipse needs semi_x")?,
                semi_y: spec.semi_y.context("ellipse needs semi_y")?,
            },
            "polyline" => CurveShape::Polyline {
                vertices: spec
                    .vertices
                    .as_ref()
                    .context("polyline needs vertices")?
                    .iter()
                    .map(|v| (v[0], v[1]))
                    .collect(),
                closed: spec.closed.unwrap_or(true),
            },
            other => bail!("unknown curve shape '{other}'"),
        };
        Ok(CurveSupport::new(shape, order)?)
    }

    pub fn tolerance(&self) -> f64 {
        self.solver.tolerance.unwrap_or(1e-10)
    }

    pub fn window_or(&self, default: (f64, f64)) -> (f64, f64) {
        self.solver
            .window
            .map(|w| (w[0], w[1]))
            .unwrap_or(default)
    }
}
