//! Experiment configuration: a plain-text file of `key = value` lines grouped
//! under `[section]` headers, overlaid on preset defaults and overridden by
//! command-line flags.
//!
//! ```text
//! # comment
//! [experiment]
//! preset = square-gaussian
//! dofs = 25
//!
//! [descent]
//! max_iters = 100
//! ```
//!
//! Lines starting with `#` or `;` are comments. Keys before the first header
//! belong to `[experiment]`.

use std::path::{Path, PathBuf};

use calderon_core::inversion::{DescentConfig, GradientMethod, ParametricDirection};
use calderon_core::regularization::{Relaxation, Smoothing};

use crate::error::CliError;

/// One `section.key = value` assignment with its origin, for messages.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub section: String,
    pub key: String,
    pub value: String,
    pub origin: String,
}

pub fn parse_config(text: &str, origin: &Path) -> Result<Vec<Entry>, CliError> {
    let mut section = "experiment".to_string();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let at = format!("{}:{}", origin.display(), i + 1);
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| CliError::Usage(format!("{at}: unterminated section header")))?
                .trim();
            if name.is_empty() {
                return Err(CliError::Usage(format!("{at}: empty section name")));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{at}: expected `key = value`")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(CliError::Usage(format!("{at}: missing key")));
        }
        out.push(Entry {
            section: section.clone(),
            key: key.to_string(),
            value: value.trim().to_string(),
            origin: at,
        });
    }
    Ok(out)
}

/// Parses `section.key=value` from a `--set` flag.
pub fn parse_override(s: &str) -> Result<Entry, CliError> {
    let (path, value) = s
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--set {s}: expected section.key=value")))?;
    let (section, key) = path
        .split_once('.')
        .ok_or_else(|| CliError::Usage(format!("--set {s}: expected section.key=value")))?;
    Ok(Entry {
        section: section.trim().to_string(),
        key: key.trim().to_string(),
        value: value.trim().to_string(),
        origin: "--set".to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    SquareConstant,
    SquareLinear,
    SquareGaussian,
    SquareDisk,
    CubeGaussian,
    ThreeRegion2d,
    OnedDemo,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::SquareConstant,
        Preset::SquareLinear,
        Preset::SquareGaussian,
        Preset::SquareDisk,
        Preset::CubeGaussian,
        Preset::ThreeRegion2d,
        Preset::OnedDemo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::SquareConstant => "square-constant",
            Preset::SquareLinear => "square-linear",
            Preset::SquareGaussian => "square-gaussian",
            Preset::SquareDisk => "square-disk",
            Preset::CubeGaussian => "cube-gaussian",
            Preset::ThreeRegion2d => "three-region-2d",
            Preset::OnedDemo => "oned-demo",
        }
    }

    pub fn parse(s: &str) -> Result<Self, CliError> {
        Self::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|p| p.name()).collect();
            CliError::Usage(format!("unknown preset {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

/// Design values of an inversion: one per element, or a total count of
/// constant regions forming an equal lattice (25 = 5x5 in the square,
/// 125 = 5x5x5 in the cube).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dofs {
    Element,
    Regions(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    /// Cells per unit length along each axis.
    pub divisions: usize,
    pub measurements: usize,
    pub dofs: Dofs,
    /// Gaussian target centre.
    pub center: Vec<f64>,
    pub seed: u64,
    pub descent: DescentConfig<f64>,
    pub disk_initial: [f64; 4],
    pub disk_blend: f64,
    pub disk_eps_r: f64,
    pub disk_direction: ParametricDirection,
    pub disk_max_iters: usize,
    pub gradcheck_samples: usize,
    pub gradcheck_rel_step: f64,
    pub gradcheck_tolerance: f64,
    pub out_dir: Option<PathBuf>,
    /// Write a conductivity snapshot every this many iterations (0: never).
    pub vtk_every: usize,
}

impl ExperimentConfig {
    pub fn for_preset(preset: Preset) -> Self {
        let mut descent = DescentConfig::<f64>::default();
        let (divisions, measurements, center) = match preset {
            Preset::CubeGaussian => (10, 3, vec![0.5, 0.5, 0.05]),
            Preset::ThreeRegion2d => (10, 1, vec![0.5, 0.5, 0.025]),
            _ => (20, 2, vec![0.5, 0.5, 0.025]),
        };
        descent.max_iters = match preset {
            Preset::SquareConstant | Preset::SquareLinear => 50,
            _ => 200,
        };
        Self {
            preset,
            divisions,
            measurements,
            dofs: Dofs::Element,
            center,
            seed: 0,
            descent,
            disk_initial: [0.25, 0.25, 0.1, 2.0],
            disk_blend: 1.0,
            disk_eps_r: 1e-3,
            disk_direction: ParametricDirection::GaussNewton,
            disk_max_iters: 100,
            gradcheck_samples: 10,
            gradcheck_rel_step: 1e-4,
            gradcheck_tolerance: 1e-3,
            out_dir: None,
            vtk_every: 0,
        }
    }

    /// Preset defaults overlaid with `entries` in order. The preset itself is
    /// taken from the last `experiment.preset` entry, else `fallback`.
    pub fn resolve(entries: &[Entry], fallback: Preset) -> Result<Self, CliError> {
        let preset = match entries
            .iter()
            .rev()
            .find(|e| e.section == "experiment" && e.key == "preset")
        {
            Some(e) => Preset::parse(&e.value).map_err(|err| CliError::Usage(format!("{}: {err}", e.origin)))?,
            None => fallback,
        };
        let mut cfg = Self::for_preset(preset);
        // smoothing is assembled after all keys are seen
        let mut smoothing = SmoothingKeys::default();
        let mut fd_step = None;
        let mut use_fd = false;
        for e in entries {
            cfg.apply(e, &mut smoothing, &mut fd_step, &mut use_fd)
                .map_err(|msg| CliError::Usage(format!("{}: {}.{}: {msg}", e.origin, e.section, e.key)))?;
        }
        if let Some(s) = smoothing.build()? {
            cfg.descent.smoothing = s;
        }
        if use_fd {
            cfg.descent.gradient = GradientMethod::FiniteDifference {
                step: fd_step.unwrap_or(1e-4),
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(
        &mut self,
        e: &Entry,
        smoothing: &mut SmoothingKeys,
        fd_step: &mut Option<f64>,
        use_fd: &mut bool,
    ) -> Result<(), String> {
        let v = e.value.as_str();
        match (e.section.as_str(), e.key.as_str()) {
            ("experiment", "preset") => {}
            ("experiment", "divisions") => self.divisions = num(v)?,
            ("experiment", "measurements") => self.measurements = num(v)?,
            ("experiment", "dofs") => {
                self.dofs = match v {
                    "element" => Dofs::Element,
                    other => Dofs::Regions(num(other)?),
                }
            }
            ("experiment", "center") => self.center = list(v)?,
            ("experiment", "seed") => self.seed = num(v)?,
            ("descent", "alpha") => self.descent.alpha = num(v)?,
            ("descent", "max_iters") => self.descent.max_iters = num(v)?,
            ("descent", "k0") => self.descent.k0 = num(v)?,
            ("descent", "k_min") => self.descent.k_min = num(v)?,
            ("descent", "cost_tol") => self.descent.cost_tol = num(v)?,
            ("descent", "param_tol") => self.descent.param_tol = num(v)?,
            ("descent", "backtracking") => self.descent.backtracking = flag(v)?,
            ("descent", "max_halvings") => self.descent.max_halvings = num(v)?,
            ("descent", "growth") => self.descent.growth = num(v)?,
            ("descent", "gradient") => {
                *use_fd = match v {
                    "adjoint" => false,
                    "fd" => true,
                    _ => return Err("expected `adjoint` or `fd`".into()),
                }
            }
            ("descent", "fd_step") => *fd_step = Some(num(v)?),
            ("descent", "smoothing") => smoothing.kind = Some(v.to_string()),
            ("descent", "lambda") => smoothing.lambda = Some(num(v)?),
            ("descent", "dtau") => smoothing.dtau = Some(num(v)?),
            ("descent", "relax_steps") => smoothing.steps = Some(num(v)?),
            ("descent", "spea_passes") => smoothing.passes = Some(num(v)?),
            ("parametric", "initial") => {
                let p: Vec<f64> = list(v)?;
                self.disk_initial = p.try_into().map_err(|_| "expected x0,y0,r0,k_disk")?;
            }
            ("parametric", "blend") => self.disk_blend = num(v)?,
            ("parametric", "eps_r") => self.disk_eps_r = num(v)?,
            ("parametric", "max_iters") => self.disk_max_iters = num(v)?,
            ("parametric", "direction") => {
                self.disk_direction = match v {
                    "gauss-newton" => ParametricDirection::GaussNewton,
                    "steepest" => ParametricDirection::Steepest,
                    _ => return Err("expected `gauss-newton` or `steepest`".into()),
                }
            }
            ("gradcheck", "samples") => self.gradcheck_samples = num(v)?,
            ("gradcheck", "rel_step") => self.gradcheck_rel_step = num(v)?,
            ("gradcheck", "tolerance") => self.gradcheck_tolerance = num(v)?,
            ("output", "dir") => self.out_dir = Some(PathBuf::from(v)),
            ("output", "vtk_every") => self.vtk_every = num(v)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        if self.divisions == 0 {
            return bad("divisions must be positive".into());
        }
        if self.center.is_empty() || self.center.len() > 3 {
            return bad("center needs 1 to 3 coordinates".into());
        }
        if let Dofs::Regions(0) = self.dofs {
            return bad("region lattice must be non-empty".into());
        }
        if !(self.gradcheck_rel_step > 0.0 && self.gradcheck_rel_step < 1.0) {
            return bad("gradcheck.rel_step must lie in (0, 1)".into());
        }
        if self.gradcheck_samples == 0 {
            return bad("gradcheck.samples must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Default)]
struct SmoothingKeys {
    kind: Option<String>,
    lambda: Option<f64>,
    dtau: Option<f64>,
    steps: Option<usize>,
    passes: Option<usize>,
}

impl SmoothingKeys {
    fn build(&self) -> Result<Option<Smoothing<f64>>, CliError> {
        let touched = self.lambda.is_some() || self.dtau.is_some() || self.steps.is_some() || self.passes.is_some();
        let kind = match (&self.kind, touched) {
            (Some(k), _) => k.as_str(),
            (None, true) => "pseudo-laplacian",
            (None, false) => return Ok(None),
        };
        Ok(Some(match kind {
            "none" => Smoothing::None,
            "spea" => Smoothing::Spea {
                passes: self.passes.unwrap_or(1),
            },
            "laplacian" => Smoothing::Laplacian {
                lambda: self.lambda.unwrap_or(1e-3),
            },
            "pseudo-laplacian" => Smoothing::PseudoLaplacian {
                lambda: self.lambda.unwrap_or(0.05),
                relaxation: Some(Relaxation {
                    dtau: self.dtau.unwrap_or(0.8),
                    steps: self.steps.unwrap_or(10),
                }),
            },
            "pseudo-laplacian-direct" => Smoothing::PseudoLaplacian {
                lambda: self.lambda.unwrap_or(0.05),
                relaxation: None,
            },
            other => {
                return Err(CliError::Usage(format!(
                    "unknown smoothing {other:?}; expected none, spea, laplacian, pseudo-laplacian or pseudo-laplacian-direct"
                )))
            }
        }))
    }
}

fn num<N: std::str::FromStr>(v: &str) -> Result<N, String> {
    v.parse().map_err(|_| format!("cannot parse {v:?}"))
}

fn flag(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got {v:?}")),
    }
}

fn list(v: &str) -> Result<Vec<f64>, String> {
    v.split(',').map(|s| num(s.trim())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Vec<Entry> {
        parse_config(text, Path::new("test.cfg")).unwrap()
    }

    #[test]
    fn sections_comments_and_defaults() {
        let e = parse("# c\ndivisions = 8\n\n[descent]\n; c\nmax_iters=7\nalpha = 0.5\n");
        assert_eq!(e.len(), 3);
        assert_eq!(e[0].section, "experiment");
        assert_eq!(e[1].origin, "test.cfg:6");
        let cfg = ExperimentConfig::resolve(&e, Preset::SquareLinear).unwrap();
        assert_eq!(cfg.preset, Preset::SquareLinear);
        assert_eq!((cfg.divisions, cfg.descent.max_iters, cfg.descent.alpha), (8, 7, 0.5));
    }

    #[test]
    fn later_entries_win() {
        let mut e = parse("[experiment]\npreset = cube-gaussian\ndofs = 125\n");
        e.push(parse_override("experiment.preset=square-gaussian").unwrap());
        e.push(parse_override("experiment.dofs=49").unwrap());
        let cfg = ExperimentConfig::resolve(&e, Preset::SquareConstant).unwrap();
        assert_eq!(cfg.preset, Preset::SquareGaussian);
        assert_eq!(cfg.dofs, Dofs::Regions(49));
    }

    #[test]
    fn errors_carry_location() {
        let err = parse_config("[descent\n", Path::new("x.cfg")).unwrap_err();
        assert!(err.to_string().contains("x.cfg:1"));
        let e = parse("[descent]\nbogus = 1\n");
        let err = ExperimentConfig::resolve(&e, Preset::SquareConstant).unwrap_err();
        assert!(err.to_string().contains("test.cfg:2"), "{err}");
        assert!(parse_override("nodot=1").is_err());
        assert!(ExperimentConfig::resolve(&parse("preset = nope\n"), Preset::SquareConstant).is_err());
    }

    #[test]
    fn smoothing_and_gradient_keys() {
        let e = parse("[descent]\nsmoothing = spea\nspea_passes = 3\ngradient = fd\nfd_step = 1e-3\n");
        let cfg = ExperimentConfig::resolve(&e, Preset::SquareConstant).unwrap();
        assert_eq!(cfg.descent.smoothing, Smoothing::Spea { passes: 3 });
        assert_eq!(cfg.descent.gradient, GradientMethod::FiniteDifference { step: 1e-3 });
    }
}
