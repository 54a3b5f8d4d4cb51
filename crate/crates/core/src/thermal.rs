//! Two-node equivalent thermal parameter (ETP) building model.
//!
//! The air node exchanges heat with the outdoors through `u_a` and with the
//! envelope mass through `h_m`; the mass node only couples to the air.
//! Internal and solar gains are split between the two nodes by `alpha_frac`
//! and `beta_frac`, and the heat pump feeds the air node.

use serde::{Deserialize, Serialize};

use crate::thermostat::PhysicalAction;
use crate::{Error, Result};

/// Sub-step length of the forward-Euler integrator, seconds.
pub const SUBSTEP_SECONDS: f64 = 15.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildingParams {
    /// Conductance between indoor air and ambient, W/°C.
    pub u_a: f64,
    /// Conductance between indoor air and envelope mass, W/°C.
    pub h_m: f64,
    /// Thermal mass of the air, J/°C.
    pub c_a: f64,
    /// Thermal mass of the envelope and contents, J/°C.
    pub c_m: f64,
    /// Share of internal gains delivered to the air node.
    #[serde(default = "half")]
    pub alpha_frac: f64,
    /// Share of solar gains delivered to the air node.
    #[serde(default = "half")]
    pub beta_frac: f64,
    /// Effective aperture converting irradiance (W/m²) into solar gain (W).
    #[serde(default = "default_aperture")]
    pub solar_aperture: f64,
    /// Thermal watts per electrical watt of the heat pump when heating.
    #[serde(default = "default_cop")]
    pub cop_heat: f64,
    /// Thermal watts removed per electrical watt when cooling.
    #[serde(default = "default_cop")]
    pub cop_cool: f64,
}

fn half() -> f64 {
    0.5
}

fn default_aperture() -> f64 {
    9.0
}

fn default_cop() -> f64 {
    3.0
}

pub const PRESET_NAMES: [&str; 2] = ["high_insulation", "low_insulation"];

impl BuildingParams {
    fn with_conductance(u_a: f64) -> Self {
        BuildingParams {
            u_a,
            h_m: 6863.0,
            c_a: 2.441e6,
            c_m: 9.896e6,
            alpha_frac: half(),
            beta_frac: half(),
            solar_aperture: default_aperture(),
            cop_heat: default_cop(),
            cop_cool: default_cop(),
        }
    }

    /// Tight envelope, `u_a` = 272 W/°C.
    pub fn high_insulation() -> Self {
        Self::with_conductance(272.0)
    }

    /// Leaky envelope, `u_a` = 1154 W/°C.
    pub fn low_insulation() -> Self {
        Self::with_conductance(1154.0)
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "high_insulation" => Ok(Self::high_insulation()),
            "low_insulation" => Ok(Self::low_insulation()),
            other => Err(Error::Argument(format!(
                "unknown building preset `{other}` (expected one of {})",
                PRESET_NAMES.join(", ")
            ))),
        }
    }

    /// Parses a TOML parameter file whose keys match the struct fields.
    pub fn from_toml(text: &str) -> Result<Self> {
        let params: BuildingParams = toml::from_str(text).map_err(|e| Error::Params(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("u_a", self.u_a),
            ("h_m", self.h_m),
            ("c_a", self.c_a),
            ("c_m", self.c_m),
            ("cop_heat", self.cop_heat),
            ("cop_cool", self.cop_cool),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Params(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("alpha_frac", self.alpha_frac), ("beta_frac", self.beta_frac)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Params(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.solar_aperture.is_finite() && self.solar_aperture >= 0.0) {
            return Err(Error::Params(format!(
                "solar_aperture must be non-negative, got {}",
                self.solar_aperture
            )));
        }
        Ok(())
    }

    /// Heat delivered to the air node by a physical action, W.
    /// Cooling removes heat; auxiliary resistance heating converts one to one.
    pub fn thermal_output(&self, action: &PhysicalAction) -> f64 {
        if action.cooling {
            -self.cop_cool * action.u_ph_hp
        } else {
            self.cop_heat * action.u_ph_hp + action.u_ph_aux
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildingState {
    /// Indoor air temperature, °C.
    pub t_in: f64,
    /// Envelope mass temperature, °C.
    pub t_m: f64,
}

impl BuildingState {
    pub fn new(t_in: f64, t_m: f64) -> Self {
        BuildingState { t_in, t_m }
    }

    fn is_finite(&self) -> bool {
        self.t_in.is_finite() && self.t_m.is_finite()
    }
}

/// Right-hand sides of the two ETP equations, °C/s.
pub fn derivatives(state: BuildingState, p: &BuildingParams, t_out: f64, q_i: f64, q_m: f64) -> (f64, f64) {
    let d_in = (state.t_m * p.h_m - state.t_in * (p.u_a + p.h_m) + q_i + t_out * p.u_a) / p.c_a;
    let d_m = (p.h_m * (state.t_in - state.t_m) + q_m) / p.c_m;
    (d_in, d_m)
}

/// Splits gains between air (`q_i`) and mass (`q_m`). Solar gain is the
/// irradiance times the effective aperture; the heat pump feeds the air only.
pub fn split_gains(q_g: f64, solar: f64, q_h_thermal: f64, p: &BuildingParams) -> (f64, f64) {
    let q_s = solar * p.solar_aperture;
    let q_i = p.alpha_frac * q_g + p.beta_frac * q_s + q_h_thermal;
    let q_m = (1.0 - p.alpha_frac) * q_g + (1.0 - p.beta_frac) * q_s;
    (q_i, q_m)
}

/// Number of 15 s sub-steps covering `dt` seconds.
pub fn substeps_for(dt: f64) -> usize {
    ((dt / SUBSTEP_SECONDS).round() as usize).max(1)
}

/// Advances the building by `dt` seconds with forward Euler on 15 s sub-steps
/// (60 sub-steps for the 900 s control period). Inputs are held constant.
pub fn step(
    state: BuildingState,
    p: &BuildingParams,
    t_out: f64,
    q_g: f64,
    solar: f64,
    q_h_thermal: f64,
    dt: f64,
) -> Result<BuildingState> {
    step_with_substeps(state, p, t_out, q_g, solar, q_h_thermal, dt, substeps_for(dt))
}

#[allow(clippy::too_many_arguments)]
pub fn step_with_substeps(
    state: BuildingState,
    p: &BuildingParams,
    t_out: f64,
    q_g: f64,
    solar: f64,
    q_h_thermal: f64,
    dt: f64,
    substeps: usize,
) -> Result<BuildingState> {
    let (q_i, q_m) = split_gains(q_g, solar, q_h_thermal, p);
    integrate(state, p, t_out, q_i, q_m, dt, substeps)
}

/// Euler integration with the node heat inputs given directly.
pub fn integrate(
    mut state: BuildingState,
    p: &BuildingParams,
    t_out: f64,
    q_i: f64,
    q_m: f64,
    dt: f64,
    substeps: usize,
) -> Result<BuildingState> {
    let h = dt / substeps as f64;
    for _ in 0..substeps {
        let (d_in, d_m) = derivatives(state, p, t_out, q_i, q_m);
        state.t_in += h * d_in;
        state.t_m += h * d_m;
    }
    if !state.is_finite() {
        return Err(Error::Divergence {
            context: format!("step of {dt} s with t_out {t_out}, q_i {q_i}, q_m {q_m}"),
            t_in: state.t_in,
            t_m: state.t_m,
        });
    }
    Ok(state)
}

/// The Euler step over a fixed period written as an affine map,
/// `x' = M x + N (t_out, q_i, q_m)`. Agrees with [`integrate`] to rounding
/// and is what the dynamic-programming baseline uses for its inner loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMap {
    m: [[f64; 2]; 2],
    n: [[f64; 3]; 2],
}

impl StepMap {
    pub fn new(p: &BuildingParams, dt: f64) -> Self {
        Self::with_substeps(p, dt, substeps_for(dt))
    }

    pub fn with_substeps(p: &BuildingParams, dt: f64, substeps: usize) -> Self {
        let h = dt / substeps as f64;
        // One Euler sub-step: x <- E x + G u.
        let e = [
            [1.0 - h * (p.u_a + p.h_m) / p.c_a, h * p.h_m / p.c_a],
            [h * p.h_m / p.c_m, 1.0 - h * p.h_m / p.c_m],
        ];
        let g = [[h * p.u_a / p.c_a, h / p.c_a, 0.0], [0.0, 0.0, h / p.c_m]];
        let mut m = [[1.0, 0.0], [0.0, 1.0]];
        let mut n = [[0.0; 3]; 2];
        for _ in 0..substeps {
            let mut m2 = [[0.0; 2]; 2];
            let mut n2 = [[0.0; 3]; 2];
            for r in 0..2 {
                for c in 0..2 {
                    m2[r][c] = e[r][0] * m[0][c] + e[r][1] * m[1][c];
                }
                for c in 0..3 {
                    n2[r][c] = e[r][0] * n[0][c] + e[r][1] * n[1][c] + g[r][c];
                }
            }
            m = m2;
            n = n2;
        }
        StepMap { m, n }
    }

    #[inline]
    pub fn apply(&self, s: BuildingState, t_out: f64, q_i: f64, q_m: f64) -> BuildingState {
        let u = [t_out, q_i, q_m];
        BuildingState {
            t_in: self.m[0][0] * s.t_in
                + self.m[0][1] * s.t_m
                + self.n[0][0] * u[0]
                + self.n[0][1] * u[1]
                + self.n[0][2] * u[2],
            t_m: self.m[1][0] * s.t_in
                + self.m[1][1] * s.t_m
                + self.n[1][0] * u[0]
                + self.n[1][1] * u[1]
                + self.n[1][2] * u[2],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn equilibrium_has_zero_derivatives() {
        let p = BuildingParams::low_insulation();
        let s = BuildingState::new(12.0, 12.0);
        assert_eq!(derivatives(s, &p, 12.0, 0.0, 0.0), (0.0, 0.0));
    }

    #[test]
    fn hand_evaluated_derivative() {
        let p = BuildingParams::low_insulation();
        let (d_in, d_m) = derivatives(BuildingState::new(20.0, 20.0), &p, 0.0, 0.0, 0.0);
        // (20*6863 - 20*8017) / 2.441e6
        let expected = -23080.0 / 2.441e6;
        assert!((d_in - expected).abs() < 1e-15);
        assert!((d_in + 9.455e-3).abs() < 1e-5);
        assert_eq!(d_m, 0.0);
    }

    #[test]
    fn only_source_term_survives() {
        let p = BuildingParams::high_insulation();
        let (d_in, d_m) = derivatives(BuildingState::new(18.0, 18.0), &p, 18.0, 7500.0, 0.0);
        assert!((d_in - 7500.0 / p.c_a).abs() < 1e-15);
        assert_eq!(d_m, 0.0);
    }

    #[test]
    fn gain_split_examples() {
        let p = BuildingParams::high_insulation();
        assert_eq!(split_gains(400.0, 0.0, 0.0, &p), (200.0, 200.0));
        assert_eq!(split_gains(0.0, 0.0, 7500.0, &p), (7500.0, 0.0));
    }

    #[test]
    fn equilibrium_step_is_identity() {
        let p = BuildingParams::low_insulation();
        let s = BuildingState::new(7.5, 7.5);
        assert_eq!(step(s, &p, 7.5, 0.0, 0.0, 0.0, 900.0).unwrap(), s);
    }

    #[test]
    fn cooling_step_decreases() {
        let p = BuildingParams::high_insulation();
        let s = BuildingState::new(20.0, 20.0);
        let next = step(s, &p, 0.0, 0.0, 0.0, 0.0, 900.0).unwrap();
        assert!(next.t_in < 20.0);
    }

    #[test]
    fn relaxes_to_outdoor_temperature() {
        let p = BuildingParams::high_insulation();
        let mut s = BuildingState::new(20.0, 20.0);
        for _ in 0..10_000 {
            s = step(s, &p, 10.0, 0.0, 0.0, 0.0, 900.0).unwrap();
        }
        assert!((s.t_in - 10.0).abs() < 0.05 && (s.t_m - 10.0).abs() < 0.05);
    }

    #[test]
    fn divergence_is_reported() {
        let p = BuildingParams::low_insulation();
        let err = step(BuildingState::new(20.0, 20.0), &p, 0.0, f64::INFINITY, 0.0, 0.0, 900.0);
        assert!(matches!(err, Err(Error::Divergence { .. })));
    }

    #[test]
    fn halving_substep_changes_little() {
        for p in [BuildingParams::high_insulation(), BuildingParams::low_insulation()] {
            let s = BuildingState::new(21.0, 19.0);
            let a = step_with_substeps(s, &p, -3.0, 400.0, 200.0, 7500.0, 900.0, 60).unwrap();
            let b = step_with_substeps(s, &p, -3.0, 400.0, 200.0, 7500.0, 900.0, 120).unwrap();
            let fine = step_with_substeps(s, &p, -3.0, 400.0, 200.0, 7500.0, 900.0, 15_000).unwrap();
            // Forward Euler is first order: halving the sub-step halves the error.
            let halving = (a.t_in - b.t_in).abs();
            let err = (a.t_in - fine.t_in).abs();
            assert!(halving < 0.01 && err < 0.02, "halving {halving}, error {err}");
            assert!((halving / err - 0.5).abs() < 0.1, "ratio {}", halving / err);
            assert!((a.t_m - b.t_m).abs() < 1e-3);
        }
    }

    #[test]
    fn step_map_matches_euler() {
        let p = BuildingParams::low_insulation();
        let map = StepMap::new(&p, 900.0);
        let s = BuildingState::new(19.3, 21.1);
        let (q_i, q_m) = split_gains(350.0, 120.0, 7500.0, &p);
        let a = integrate(s, &p, 2.0, q_i, q_m, 900.0, 60).unwrap();
        let b = map.apply(s, 2.0, q_i, q_m);
        assert!((a.t_in - b.t_in).abs() < 1e-10 && (a.t_m - b.t_m).abs() < 1e-10);
    }

    #[test]
    fn preset_lookup_and_file() {
        assert_eq!(BuildingParams::preset("low_insulation").unwrap().u_a, 1154.0);
        assert!(BuildingParams::preset("igloo").is_err());
        let p = BuildingParams::from_toml(
            "u_a = 272.0\nh_m = 6863.0\nc_a = 2.441e6\nc_m = 9.896e6\nalpha_frac = 0.3\n\
             beta_frac = 0.6\nsolar_aperture = 9.0\ncop_heat = 3.5\ncop_cool = 2.5\n",
        )
        .unwrap();
        assert_eq!(p.cop_heat, 3.5);
        assert!(BuildingParams::from_toml("u_a = -1.0\nh_m = 1.0\nc_a = 1.0\nc_m = 1.0\n").is_err());
    }

    fn params() -> impl Strategy<Value = BuildingParams> {
        (prop_oneof![Just(272.0), Just(1154.0)], 0.0..=1.0f64, 0.0..=1.0f64).prop_map(|(u_a, a, b)| BuildingParams {
            alpha_frac: a,
            beta_frac: b,
            ..BuildingParams::with_conductance(u_a)
        })
    }

    proptest! {
        #[test]
        fn gains_are_conserved(q_g in -1e4..1e4f64, solar in 0.0..1500.0f64, q_h in -1e4..1e4f64, p in params()) {
            let (q_i, q_m) = split_gains(q_g, solar, q_h, &p);
            let total = q_g + solar * p.solar_aperture + q_h;
            prop_assert!((q_i + q_m - total).abs() <= 1e-9 * (1.0 + total.abs()));
        }

        #[test]
        fn step_is_affine_in_inputs(
            t_in in 10.0..30.0f64, t_m in 10.0..30.0f64,
            t1 in -20.0..30.0f64, t2 in -20.0..30.0f64,
            qi1 in 0.0..8000.0f64, qi2 in 0.0..8000.0f64,
            qm1 in 0.0..3000.0f64, qm2 in 0.0..3000.0f64,
            p in params(),
        ) {
            let s = BuildingState::new(t_in, t_m);
            let zero = BuildingState::new(0.0, 0.0);
            let f = |s, t, qi, qm| integrate(s, &p, t, qi, qm, 900.0, 60).unwrap();
            let combined = f(s, t1 + t2, qi1 + qi2, qm1 + qm2);
            let a = f(s, t1, qi1, qm1);
            let b = f(zero, t2, qi2, qm2);
            let scale = 1.0 + combined.t_in.abs() + combined.t_m.abs();
            prop_assert!((combined.t_in - (a.t_in + b.t_in)).abs() < 1e-9 * scale);
            prop_assert!((combined.t_m - (a.t_m + b.t_m)).abs() < 1e-9 * scale);
        }

        #[test]
        fn colder_outside_cools_air(t in 10.0..30.0f64, dt in 0.5..30.0f64, p in params()) {
            let s = BuildingState::new(t, t);
            let next = step(s, &p, t - dt, 0.0, 0.0, 0.0, 900.0).unwrap();
            prop_assert!(next.t_in < t);
        }
    }
}
