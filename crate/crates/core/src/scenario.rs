//! Scenario files: grid plus optical parameter specification, read from
//! JSON, and the named scenarios the test suite is built around.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{build_grid, OpticalField, PhaseGrid};
use crate::space::PhaseSpace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_cells: usize,
    pub length: f64,
    pub n_per_half: usize,
    pub mu_min: f64,
}

/// One optical parameter: constant, piecewise per material region,
/// separable in the angular variables, or tabulated from a side file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSpec {
    Constant(f64),
    /// Regions as (x_end, value), covering the slab in order.
    PerMaterial(Vec<(f64, f64)>),
    /// `value(x, mu_in, mu_out) = spatial(x) * mu_in_profile[k_in] * mu_out_profile[k_out]`.
    Separable {
        spatial: Vec<(f64, f64)>,
        mu_in_profile: Vec<f64>,
        mu_out_profile: Vec<f64>,
    },
    /// Raw table loaded from a JSON file: flattened per (cell, k_in, k_out)
    /// for kernels, per (cell, ordinate) for cross-sections.
    Table(String),
}

impl ParamSpec {
    fn spatial_value(regions: &[(f64, f64)], x: f64) -> Result<f64> {
        regions
            .iter()
            .find(|r| x <= r.0)
            .or_else(|| regions.last())
            .map(|r| r.1)
            .ok_or_else(|| Error::Scenario("empty per_material spec".into()))
    }

    fn load_table(path: &str, base: Option<&Path>, expect: usize) -> Result<Vec<f64>> {
        let full = match base {
            Some(b) => b.join(path),
            None => Path::new(path).to_path_buf(),
        };
        let text = std::fs::read_to_string(&full)?;
        let data: Vec<f64> = serde_json::from_str(&text)?;
        if data.len() != expect {
            return Err(Error::Scenario(format!(
                "table {} has {} entries, expected {expect}",
                full.display(),
                data.len()
            )));
        }
        Ok(data)
    }

    fn cross_section(&self, grid: &PhaseGrid, base: Option<&Path>) -> Result<Vec<f64>> {
        let nc = grid.n_cells;
        let no = grid.n_ordinates();
        match self {
            ParamSpec::Constant(c) => Ok(vec![*c; nc * no]),
            ParamSpec::PerMaterial(regions) => {
                let mut out = Vec::with_capacity(nc * no);
                for i in 0..nc {
                    let x = (i as f64 + 0.5) * grid.cell_width;
                    let v = Self::spatial_value(regions, x)?;
                    out.extend(std::iter::repeat_n(v, no));
                }
                Ok(out)
            }
            ParamSpec::Separable { .. } => Err(Error::Scenario(
                "separable spec is for kernels, not cross-sections".into(),
            )),
            ParamSpec::Table(path) => Self::load_table(path, base, nc * no),
        }
    }

    fn kernel(&self, grid: &PhaseGrid, base: Option<&Path>) -> Result<Vec<f64>> {
        let nc = grid.n_cells;
        let no = grid.n_ordinates();
        match self {
            ParamSpec::Constant(c) => Ok(vec![*c; nc * no * no]),
            ParamSpec::PerMaterial(regions) => {
                let mut out = Vec::with_capacity(nc * no * no);
                for i in 0..nc {
                    let x = (i as f64 + 0.5) * grid.cell_width;
                    let v = Self::spatial_value(regions, x)?;
                    out.extend(std::iter::repeat_n(v, no * no));
                }
                Ok(out)
            }
            ParamSpec::Separable {
                spatial,
                mu_in_profile,
                mu_out_profile,
            } => {
                if mu_in_profile.len() != no || mu_out_profile.len() != no {
                    return Err(Error::Scenario(format!(
                        "separable profiles must have {no} entries"
                    )));
                }
                let mut out = Vec::with_capacity(nc * no * no);
                for i in 0..nc {
                    let x = (i as f64 + 0.5) * grid.cell_width;
                    let v = Self::spatial_value(spatial, x)?;
                    for kin in 0..no {
                        for kout in 0..no {
                            out.push(v * mu_in_profile[kin] * mu_out_profile[kout]);
                        }
                    }
                }
                Ok(out)
            }
            ParamSpec::Table(path) => Self::load_table(path, base, nc * no * no),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticsSpec {
    pub sigma: ParamSpec,
    pub kappa: ParamSpec,
    pub phi: ParamSpec,
}

/// Optional solver section carried by scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct NewtonSpec {
    #[serde(default)]
    pub schedule: Option<String>,
    #[serde(default)]
    pub zeta: Option<f64>,
    #[serde(default)]
    pub target: Option<f64>,
    #[serde(default)]
    pub backend: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub grid: GridSpec,
    pub optics: OpticsSpec,
    #[serde(default)]
    pub newton: Option<NewtonSpec>,
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let sc: Scenario = serde_json::from_str(&text)?;
        Ok(sc)
    }

    /// Builds the phase space; `base` resolves relative table paths.
    pub fn build_with_base(&self, base: Option<&Path>) -> Result<Arc<PhaseSpace>> {
        let grid = build_grid(
            self.grid.n_cells,
            self.grid.length,
            self.grid.n_per_half,
            self.grid.mu_min,
        )?;
        let sigma = self.optics.sigma.cross_section(&grid, base)?;
        let kappa = self.optics.kappa.kernel(&grid, base)?;
        let phi = self.optics.phi.kernel(&grid, base)?;
        let optics = OpticalField::new(&grid, sigma, kappa, phi)?;
        PhaseSpace::new(grid, optics)
    }

    pub fn build(&self) -> Result<Arc<PhaseSpace>> {
        self.build_with_base(None)
    }
}

/// Constant slab: sigma 2, scattering 0.5, fission 0.5, 16 cells x 4
/// ordinates.
pub fn scen_const() -> Scenario {
    Scenario {
        grid: GridSpec {
            n_cells: 16,
            length: 1.0,
            n_per_half: 2,
            mu_min: 0.1,
        },
        optics: OpticsSpec {
            sigma: ParamSpec::Constant(2.0),
            kappa: ParamSpec::Constant(0.5),
            phi: ParamSpec::Constant(0.5),
        },
        newton: None,
    }
}

/// Two-material slab with a strong scatterer on the left.
pub fn scen_het() -> Scenario {
    Scenario {
        grid: GridSpec {
            n_cells: 16,
            length: 1.0,
            n_per_half: 2,
            mu_min: 0.1,
        },
        optics: OpticsSpec {
            sigma: ParamSpec::PerMaterial(vec![(0.5, 3.0), (1.0, 1.5)]),
            kappa: ParamSpec::PerMaterial(vec![(0.5, 1.0), (1.0, 0.4)]),
            phi: ParamSpec::Constant(0.8),
        },
        newton: None,
    }
}

/// Reference scenario: 32 cells x 8 ordinates, mildly heterogeneous.
pub fn scen_ref() -> Scenario {
    Scenario {
        grid: GridSpec {
            n_cells: 32,
            length: 1.0,
            n_per_half: 4,
            mu_min: 0.05,
        },
        optics: OpticsSpec {
            sigma: ParamSpec::PerMaterial(vec![(0.5, 2.0), (1.0, 2.5)]),
            kappa: ParamSpec::PerMaterial(vec![(0.5, 0.5), (1.0, 0.6)]),
            phi: ParamSpec::Constant(0.8),
        },
        newton: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::check_assumptions;

    #[test]
    fn presets_build_and_pass_assumptions() {
        for sc in [scen_const(), scen_het(), scen_ref()] {
            let space = sc.build().unwrap();
            let rep = check_assumptions(space.grid(), space.optics()).unwrap();
            assert!(rep.pass, "assumptions failed: {rep:?}");
        }
    }

    #[test]
    fn json_round_trip() {
        let sc = scen_het();
        let text = serde_json::to_string_pretty(&sc).unwrap();
        let back: Scenario = serde_json::from_str(&text).unwrap();
        assert_eq!(sc, back);
    }

    #[test]
    fn table_spec_loads_from_side_file() {
        let dir = std::env::temp_dir().join(format!("crit-scen-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let grid = GridSpec {
            n_cells: 2,
            length: 1.0,
            n_per_half: 1,
            mu_min: 0.3,
        };
        let no = 2;
        let sigma: Vec<f64> = vec![2.0; grid.n_cells * no];
        let kappa: Vec<f64> = (0..grid.n_cells * no * no)
            .map(|i| 0.1 + 0.01 * i as f64)
            .collect();
        std::fs::write(
            dir.join("sigma.json"),
            serde_json::to_string(&sigma).unwrap(),
        )
        .unwrap();
        std::fs::write(
            dir.join("kappa.json"),
            serde_json::to_string(&kappa).unwrap(),
        )
        .unwrap();
        let sc = Scenario {
            grid,
            optics: OpticsSpec {
                sigma: ParamSpec::Table("sigma.json".into()),
                kappa: ParamSpec::Table("kappa.json".into()),
                phi: ParamSpec::Constant(0.4),
            },
            newton: None,
        };
        let space = sc.build_with_base(Some(&dir)).unwrap();
        assert_eq!(space.optics().kappa(1, 1, 0), kappa[(1 * no + 1) * no]);
        // Wrong length is a scenario error.
        std::fs::write(dir.join("sigma.json"), "[1.0, 2.0]").unwrap();
        assert!(matches!(
            sc.build_with_base(Some(&dir)),
            Err(Error::Scenario(_))
        ));
    }

    #[test]
    fn separable_kernel_spec() {
        let grid = GridSpec {
            n_cells: 4,
            length: 1.0,
            n_per_half: 1,
            mu_min: 0.3,
        };
        let sc = Scenario {
            grid,
            optics: OpticsSpec {
                sigma: ParamSpec::Constant(3.0),
                kappa: ParamSpec::Separable {
                    spatial: vec![(1.0, 0.5)],
                    mu_in_profile: vec![1.0, 2.0],
                    mu_out_profile: vec![0.5, 1.0],
                },
                phi: ParamSpec::Constant(0.4),
            },
            newton: None,
        };
        let space = sc.build().unwrap();
        assert!((space.optics().kappa(0, 1, 0) - 0.5 * 2.0 * 0.5).abs() < 1e-15);
        assert!((space.optics().kappa(3, 0, 1) - 0.5 * 1.0 * 1.0).abs() < 1e-15);
    }

    #[test]
    fn malformed_scenario_is_rejected() {
        let bad = r#"{ "grid": { "n_cells": 4 } }"#;
        assert!(serde_json::from_str::<Scenario>(bad).is_err());
    }
}
