//! Penalty-parameter schedules, curvature-failure recovery and the skip rules
//! used by the BFGS baseline.

use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::update::{spbfgs_curvature_ok, Beta, CurvaturePair};

/// How `beta_k` is proposed from the step `s_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaSchedule {
    /// `beta = +inf` on every iteration (plain BFGS).
    ConstantInfinity,
    Constant(f64),
    /// `beta = slope * ||s|| + offset`
    LinearInStep {
        slope: f64,
        offset: f64,
    },
    /// `beta = max(slope * ||s|| - intercept, 0)`
    Thresholded {
        slope: f64,
        intercept: f64,
    },
}

/// What to do when `s'y > -1/beta` fails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Recovery {
    /// Leave `H` unchanged (`beta = 0`).
    Skip,
    /// Use `beta = -1 / (c3 s'y)` with `c3 > 1`.
    ShrinkBeta { c3: f64 },
}

/// Extra admission test applied by the BFGS baseline before updating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SkipRule {
    None,
    /// Update only if `s'y > 0`.
    SkipOnNonpositive,
    /// Update only if `s'y >= eps ||s||^2`.
    EpsStepNorm {
        eps: f64,
    },
    /// Update only if `s'y >= zeta ||s|| ||y||`.
    CosineBound {
        zeta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyPolicy {
    pub schedule: BetaSchedule,
    pub recovery: Recovery,
    pub skip_rule: SkipRule,
}

/// Whether the resolved beta leads to an update or to a skipped iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateAction {
    Update,
    Skipped,
}

impl PenaltyPolicy {
    /// Pure BFGS: infinite penalty, skip on nonpositive curvature.
    pub fn bfgs() -> Self {
        PenaltyPolicy {
            schedule: BetaSchedule::ConstantInfinity,
            recovery: Recovery::Skip,
            skip_rule: SkipRule::SkipOnNonpositive,
        }
    }

    /// `beta = slope ||s|| + offset` with skip recovery.
    pub fn linear(slope: f64, offset: f64) -> Self {
        PenaltyPolicy {
            schedule: BetaSchedule::LinearInStep { slope, offset },
            recovery: Recovery::Skip,
            skip_rule: SkipRule::None,
        }
    }

    /// Slope inversely proportional to the gradient-noise bound with a
    /// `1e-10` stabilizer, i.e. `beta = (scale / eps_g) ||s|| + 1e-10`.
    /// `scale = 1` and `scale = 1e8` are the two presets used in practice.
    /// A noiseless gradient (`eps_g = 0`) yields plain BFGS.
    pub fn noise_scaled(scale: f64, eps_g: f64) -> Self {
        if eps_g == 0.0 {
            PenaltyPolicy { skip_rule: SkipRule::None, ..Self::bfgs() }
        } else {
            Self::linear(scale / eps_g, 1e-10)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        match self.schedule {
            BetaSchedule::Constant(b) if !(b >= 0.0) => return bad("constant beta must be >= 0"),
            BetaSchedule::LinearInStep { slope, offset }
                if !(slope > 0.0 && slope.is_finite()) || !(offset >= 0.0) =>
            {
                return bad("linear schedule needs slope > 0 and offset >= 0")
            }
            BetaSchedule::Thresholded { slope, intercept }
                if !(slope > 0.0 && slope.is_finite()) || !(intercept > 0.0) =>
            {
                return bad("thresholded schedule needs slope > 0 and intercept > 0")
            }
            _ => {}
        }
        if let Recovery::ShrinkBeta { c3 } = self.recovery {
            if !(c3 > 1.0) {
                return bad("shrink recovery needs c3 > 1");
            }
        }
        match self.skip_rule {
            SkipRule::EpsStepNorm { eps } if !(eps > 0.0) => bad("eps skip rule needs eps > 0"),
            SkipRule::CosineBound { zeta } if !(zeta > 0.0 && zeta < 1.0) => {
                bad("cosine skip rule needs zeta in (0, 1)")
            }
            _ => Ok(()),
        }
    }
}

pub fn propose_beta(schedule: &BetaSchedule, s: &[f64]) -> Beta {
    let raw = match *schedule {
        BetaSchedule::ConstantInfinity => return Beta::Infinite,
        BetaSchedule::Constant(b) => b,
        BetaSchedule::LinearInStep { slope, offset } => slope * norm2(s) + offset,
        BetaSchedule::Thresholded { slope, intercept } => (slope * norm2(s) - intercept).max(0.0),
    };
    if raw == f64::INFINITY {
        Beta::Infinite
    } else {
        Beta::Finite(raw)
    }
}

/// Applies the recovery rule when the proposed beta violates the SP-BFGS
/// curvature condition. Never returns `Update` with a failing condition.
pub fn resolve_beta(recovery: &Recovery, pair: &CurvaturePair, proposed: Beta) -> (Beta, UpdateAction) {
    if spbfgs_curvature_ok(pair, proposed) {
        return (proposed, UpdateAction::Update);
    }
    match *recovery {
        Recovery::Skip => (Beta::ZERO, UpdateAction::Skipped),
        Recovery::ShrinkBeta { c3 } => match shrunk_beta(pair, c3) {
            Ok(beta) if spbfgs_curvature_ok(pair, beta) => (beta, UpdateAction::Update),
            _ => (Beta::ZERO, UpdateAction::Skipped),
        },
    }
}

/// `beta = -1 / (c3 s'y)` for negative measured curvature.
pub fn shrunk_beta(pair: &CurvaturePair, c3: f64) -> Result<Beta> {
    if norm2(pair.s()) == 0.0 || norm2(pair.y()) == 0.0 {
        return Err(Error::DegenerateInput("shrink recovery needs s != 0 and y != 0"));
    }
    if !(pair.sty() < 0.0) {
        return Err(Error::DegenerateInput("shrink recovery needs s'y < 0"));
    }
    let beta = -1.0 / (c3 * pair.sty());
    Beta::new(beta).map_err(|_| Error::NonFinite("shrunk beta"))
}

pub fn baseline_skip_check(rule: &SkipRule, pair: &CurvaturePair) -> bool {
    let sty = pair.sty();
    match *rule {
        SkipRule::None => true,
        SkipRule::SkipOnNonpositive => sty > 0.0,
        SkipRule::EpsStepNorm { eps } => {
            let ns = norm2(pair.s());
            sty >= eps * ns * ns
        }
        SkipRule::CosineBound { zeta } => sty >= zeta * norm2(pair.s()) * norm2(pair.y()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(s: &[f64], y: &[f64]) -> CurvaturePair {
        CurvaturePair::new(s.to_vec(), y.to_vec()).unwrap()
    }

    #[test]
    fn linear_schedule_adds_offset() {
        let sch = BetaSchedule::LinearInStep { slope: 1.0, offset: 1e-10 };
        assert_eq!(propose_beta(&sch, &[2.0, 0.0]), Beta::Finite(2.0 + 1e-10));
        let eps_g = 0.37;
        let sch = BetaSchedule::LinearInStep { slope: 1e8 / eps_g, offset: 1e-10 };
        assert_eq!(propose_beta(&sch, &[0.0, 0.0]), Beta::Finite(1e-10));
    }

    #[test]
    fn thresholded_schedule_clamps_at_zero() {
        let sch = BetaSchedule::Thresholded { slope: 1.0, intercept: 5.0 };
        assert_eq!(propose_beta(&sch, &[3.0, 0.0]), Beta::Finite(0.0));
        assert_eq!(propose_beta(&sch, &[8.0, 0.0]), Beta::Finite(3.0));
    }

    #[test]
    fn constant_schedules() {
        assert_eq!(propose_beta(&BetaSchedule::ConstantInfinity, &[1.0]), Beta::Infinite);
        assert_eq!(propose_beta(&BetaSchedule::Constant(4.0), &[1.0]), Beta::Finite(4.0));
    }

    #[test]
    fn resolve_shrinks_beta() {
        // s'y = -2
        let p = pair(&[1.0, 0.0], &[-2.0, 1.0]);
        let (beta, action) = resolve_beta(&Recovery::ShrinkBeta { c3: 2.0 }, &p, Beta::Finite(10.0));
        assert_eq!(action, UpdateAction::Update);
        assert_eq!(beta, Beta::Finite(0.25));
        assert!(spbfgs_curvature_ok(&p, beta));
    }

    #[test]
    fn resolve_skips() {
        let p = pair(&[1.0, 0.0], &[-2.0, 1.0]);
        assert_eq!(
            resolve_beta(&Recovery::Skip, &p, Beta::Finite(10.0)),
            (Beta::ZERO, UpdateAction::Skipped)
        );
    }

    #[test]
    fn resolve_passes_through_valid_beta() {
        let p = pair(&[1.0, 0.0], &[1.0, 3.0]);
        assert_eq!(
            resolve_beta(&Recovery::Skip, &p, Beta::Finite(10.0)),
            (Beta::Finite(10.0), UpdateAction::Update)
        );
    }

    #[test]
    fn shrink_with_zero_y_falls_back_to_skip() {
        let p = pair(&[1.0, 0.0], &[0.0, 0.0]);
        assert!(shrunk_beta(&p, 2.0).is_err());
        // s'y = 0 fails only for beta = inf
        let (beta, action) = resolve_beta(&Recovery::ShrinkBeta { c3: 2.0 }, &p, Beta::Infinite);
        assert_eq!((beta, action), (Beta::ZERO, UpdateAction::Skipped));
    }

    #[test]
    fn skip_rules() {
        assert!(!baseline_skip_check(&SkipRule::SkipOnNonpositive, &pair(&[1.0, 0.0], &[0.0, 1.0])));
        assert!(baseline_skip_check(&SkipRule::EpsStepNorm { eps: 1e-8 }, &pair(&[1.0, 0.0], &[2.0, 0.0])));
        assert!(!baseline_skip_check(&SkipRule::CosineBound { zeta: 0.5 }, &pair(&[1.0, 0.0], &[0.0, 1.0])));
        assert!(baseline_skip_check(&SkipRule::None, &pair(&[1.0, 0.0], &[-1.0, 0.0])));
    }

    #[test]
    fn validation() {
        assert!(PenaltyPolicy::linear(1.0, 1e-10).validate().is_ok());
        assert!(PenaltyPolicy::linear(0.0, 1e-10).validate().is_err());
        let mut p = PenaltyPolicy::bfgs();
        p.recovery = Recovery::ShrinkBeta { c3: 1.0 };
        assert!(p.validate().is_err());
        p.recovery = Recovery::Skip;
        p.skip_rule = SkipRule::CosineBound { zeta: 1.0 };
        assert!(p.validate().is_err());
    }

    #[test]
    fn noise_scaled_presets() {
        let p = PenaltyPolicy::noise_scaled(1e8, 1e-2);
        assert_eq!(p.schedule, BetaSchedule::LinearInStep { slope: 1e10, offset: 1e-10 });
        assert_eq!(PenaltyPolicy::noise_scaled(1.0, 0.0).schedule, BetaSchedule::ConstantInfinity);
    }
}
