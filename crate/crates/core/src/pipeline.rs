//! The two-stage design end to end, for a known Eve and for a suspicious
//! area, plus the benchmark schemes.
//!
//! Stage 1 sees only statistics: quantiles and path gains. Stage 2 fixes the
//! IRS, draws the realized channels for the seed and optimizes the beamformer
//! and phases against Eve's statistical model.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::channel::{mrt_design, sample_channels};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::outage::{empirical_secrecy_outage, quantiles, OutageEstimate, QuantileMethod, QuantilePair};
use crate::params::SystemParams;
use crate::placement::{
    global_search_location, maxmin_location, rate_targets, sca_location_multistart, worst_eve, PlacementResult,
    DEFAULT_SCA_EPS, MIN_EVE_DISTANCE,
};
use crate::rng::{stream, Purpose};
use crate::secrecy_sdp::{alternating_optimization, fixed_design, AoSettings, BtiLifting, Stage2Context, StageTwoSolution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeTag {
    Proposed,
    RandomLocation,
    GlobalSearch,
    Mrt,
    GaussianRandom,
}

impl SchemeTag {
    pub const ALL: [SchemeTag; 5] = [
        SchemeTag::Proposed,
        SchemeTag::RandomLocation,
        SchemeTag::GlobalSearch,
        SchemeTag::Mrt,
        SchemeTag::GaussianRandom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeTag::Proposed => "proposed",
            SchemeTag::RandomLocation => "random_location",
            SchemeTag::GlobalSearch => "global_search",
            SchemeTag::Mrt => "mrt",
            SchemeTag::GaussianRandom => "gaussian_random",
        }
    }

    /// Whether stage 1 of this scheme depends on the seed.
    pub fn random_placement(self) -> bool {
        self == SchemeTag::RandomLocation
    }
}

impl fmt::Display for SchemeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::InvalidParam {
                field: "scheme",
                reason: format!("unknown scheme {s:?}"),
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineSettings {
    pub quantile_method: QuantileMethod,
    /// Grid step for global search and the max-min placement, meters.
    pub grid_step: f64,
    pub sca_eps: f64,
    pub ao: AoSettings,
    pub lifting: BtiLifting,
    pub verify_draws: usize,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self {
            quantile_method: QuantileMethod::Analytic,
            grid_step: 0.5,
            sca_eps: DEFAULT_SCA_EPS,
            ao: AoSettings::default(),
            lifting: BtiLifting::default(),
            verify_draws: 10_000,
        }
    }
}

/// Stage-1 output: where the IRS goes and which Eve location stage 2 uses.
#[derive(Clone, Debug, PartialEq)]
pub struct Placement {
    pub result: PlacementResult,
    pub eve_loc: Vec2,
    pub quantiles: QuantilePair,
    /// `(R_B, R_E)` at which the stage-1 outage transformations are tight.
    pub rate_targets: (f64, f64),
}

/// Data-flow record of the two CSI regimes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RegimeAudit {
    /// Stage 1 consumed a channel realization.
    pub stage1_read_realization: bool,
    /// Stage 2 ended with the IRS somewhere other than the stage-1 location.
    pub stage2_moved_irs: bool,
}

#[derive(Clone, Debug)]
pub struct ScenarioResult {
    pub scheme: SchemeTag,
    pub seed: u64,
    pub placement: Placement,
    pub stage2: StageTwoSolution,
    pub empirical_outage: OutageEstimate,
    pub audit: RegimeAudit,
}

fn draw_location(p: &SystemParams, seed: u64) -> Result<Vec2> {
    let a = p.irs_area;
    let mut rng = stream(seed, Purpose::Location, 0);
    for _ in 0..1000 {
        let w = Vec2::new(
            if a.x_max > a.x_min { rng.random_range(a.x_min..=a.x_max) } else { a.x_min },
            if a.y_max > a.y_min { rng.random_range(a.y_min..=a.y_max) } else { a.y_min },
        );
        let e = match &p.eve_area {
            Some(area) => worst_eve(&w, area),
            None => p.eve_loc,
        };
        if w.dist(&e) >= MIN_EVE_DISTANCE && w.norm() > 0.0 && w.dist(&p.bob_loc) > 0.0 {
            return Ok(w);
        }
    }
    Err(Error::DegenerateGeometry("no admissible random IRS location".into()))
}

/// Stage 1 for `scheme`. With `p.eve_area` set, placements are max-min
/// against the worst Eve in the area; otherwise Eve is at `p.eve_loc`, the
/// proposed and MRT schemes use SCA and the global-search and
/// Gaussian-randomization schemes use the grid. Only the random-location
/// scheme uses `seed`.
pub fn stage_one(p: &SystemParams, scheme: SchemeTag, seed: u64, s: &PipelineSettings) -> Result<Placement> {
    p.validate()?;
    let q = quantiles(p, p.p_out, s.quantile_method)?;
    let mut result = match (scheme, &p.eve_area) {
        (SchemeTag::RandomLocation, _) => {
            let w = draw_location(p, seed)?;
            let e = p.eve_area.as_ref().map_or(p.eve_loc, |a| worst_eve(&w, a));
            let objective = crate::placement::ratio_objective(&w, &e, &q, p)?;
            let surrogate = crate::placement::sca_objective(&w, &e, &q, p)?;
            PlacementResult {
                omega_i: w,
                objective,
                surrogate,
                iterations: 0,
                trace: vec![surrogate],
                worst_eve: p.eve_area.map(|_| e),
                converged: true,
            }
        }
        (_, Some(area)) => maxmin_location(p, &q, s.grid_step, area)?,
        (SchemeTag::GlobalSearch | SchemeTag::GaussianRandom, None) => global_search_location(p, &q, s.grid_step)?,
        (_, None) => sca_location_multistart(p, &q, s.sca_eps)?,
    };
    let eve_loc = result.worst_eve.unwrap_or(p.eve_loc);
    if p.eve_area.is_some() {
        result.worst_eve = Some(eve_loc);
    }
    let rate_targets = rate_targets(&result.omega_i, &eve_loc, &q, p)?;
    Ok(Placement {
        result,
        eve_loc,
        quantiles: q,
        rate_targets,
    })
}

/// Stage 2 and verification for a fixed placement.
pub fn stage_two(
    p: &SystemParams,
    placement: &Placement,
    scheme: SchemeTag,
    seed: u64,
    s: &PipelineSettings,
) -> Result<ScenarioResult> {
    let mut p2 = p.clone();
    p2.eve_loc = placement.eve_loc;
    let omega_i = placement.result.omega_i;
    let channel = sample_channels(&p2, &omega_i, seed)?;
    let ctx = Stage2Context::new(&p2, &omega_i, &placement.eve_loc, &channel)?.with_lifting(s.lifting);
    let (f0, phi0) = mrt_design(&p2, &omega_i)?;
    let stage2 = match scheme {
        SchemeTag::Mrt => fixed_design(&ctx, &f0, &phi0)?,
        _ => {
            let mut ao = s.ao;
            ao.srocr.seed = seed;
            ao.srocr.randomization_only = scheme == SchemeTag::GaussianRandom;
            alternating_optimization(&ctx, &f0, &phi0, &ao)?
        }
    };
    let empirical_outage = empirical_secrecy_outage(
        &p2,
        &channel,
        &ctx.eve,
        &stage2.f_vec,
        &stage2.phi_vec,
        stage2.rate,
        s.verify_draws,
        seed,
    )?;
    Ok(ScenarioResult {
        scheme,
        seed,
        placement: placement.clone(),
        stage2,
        empirical_outage,
        audit: RegimeAudit {
            stage1_read_realization: false,
            stage2_moved_irs: placement.result.omega_i != omega_i,
        },
    })
}

pub fn run_benchmark_with(p: &SystemParams, scheme: SchemeTag, seed: u64, s: &PipelineSettings) -> Result<ScenarioResult> {
    let placement = stage_one(p, scheme, seed, s)?;
    stage_two(p, &placement, scheme, seed, s)
}

pub fn run_benchmark(p: &SystemParams, scheme: SchemeTag, seed: u64) -> Result<ScenarioResult> {
    run_benchmark_with(p, scheme, seed, &PipelineSettings::default())
}

/// Proposed scheme with Eve at `p.eve_loc` (any `eve_area` is ignored).
pub fn two_stage_known_eve(p: &SystemParams, seed: u64) -> Result<ScenarioResult> {
    two_stage_known_eve_with(p, seed, &PipelineSettings::default())
}

pub fn two_stage_known_eve_with(p: &SystemParams, seed: u64, s: &PipelineSettings) -> Result<ScenarioResult> {
    let mut p = p.clone();
    p.eve_area = None;
    run_benchmark_with(&p, SchemeTag::Proposed, seed, s)
}

/// Proposed scheme against the worst Eve in `p.eve_area`.
pub fn two_stage_suspicious_area(p: &SystemParams, seed: u64) -> Result<ScenarioResult> {
    two_stage_suspicious_area_with(p, seed, &PipelineSettings::default())
}

pub fn two_stage_suspicious_area_with(p: &SystemParams, seed: u64, s: &PipelineSettings) -> Result<ScenarioResult> {
    if p.eve_area.is_none() {
        return Err(Error::InvalidParam {
            field: "eve_area",
            reason: "required for the suspicious-area scenario".into(),
        });
    }
    run_benchmark_with(p, SchemeTag::Proposed, seed, s)
}
