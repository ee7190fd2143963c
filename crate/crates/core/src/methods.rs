//! Catalog of inference methods: each yields one-sided and two-sided
//! p-values, a matching confidence interval and p-values over a whole
//! sample space.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditional::{
    blaker, conditional_ci_oddsratio, conditional_pvalue, fisher_central, fisher_irwin,
    santner_diff_bound,
};
use crate::distributions::TailMode;
use crate::error::{Error, Result};
use crate::melded::{meld_ci, meld_pvalue};
use crate::orderings::csm::{order_csm, CsmConfig, CsmVariant};
use crate::orderings::{
    order_diff, order_diff_tiebreak, order_estimate, order_fisher_midp, order_score,
    order_score_two_sided, order_wald_pooled, SampleSpaceOrdering,
};
use crate::table::{Alternative, ConfidenceInterval, EffectMeasure, Hypothesis, TwoByTwoData};
use crate::triples::{
    clamp_estimate, confidence_region, default_beta_grid, matching_ci, ConfidenceRegion,
    InferenceResult, Procedure,
};
use crate::unconditional::{
    boschloo_ordering, pvalue_table, uncond_ci, uncond_pvalue_detail, BoschlooVariant,
    CiConstruction, OrderingFamily, UnconditionalOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    /// One-sided conditional Fisher tests; two-sided requests are rejected.
    FisherOnesided,
    /// Central conditional Fisher test.
    FisherCentral,
    /// Fisher-Irwin (minimum-likelihood) conditional test.
    FisherIrwin,
    /// Blaker's conditional test.
    Blaker,
    /// Melded intervals with one-sided melded p-values.
    Melded,
    /// Unconditional, two-sided score ordering inverted as a whole.
    UncondScore,
    /// Unconditional, central combination of one-sided score tests.
    UncondScoreCentral,
    /// Unconditional, difference in proportions with Wald tie-break.
    UncondDiffTb,
    /// Unconditional, difference in proportions.
    UncondDiff,
    /// Unconditional, pooled Wald Z.
    UncondWald,
    /// Unconditional, sample estimate of the measure with tie-break.
    UncondEstimate,
    /// Unconditional, one-sided Fisher mid-p ordering.
    UncondFisherMidp,
    /// Unconditional, ordered by a conditional Fisher p-value.
    Boschloo,
    /// Unconditional, CSM ordering.
    Csm,
}

impl MethodKind {
    pub const ALL: [MethodKind; 14] = [
        MethodKind::FisherOnesided,
        MethodKind::FisherCentral,
        MethodKind::FisherIrwin,
        MethodKind::Blaker,
        MethodKind::Melded,
        MethodKind::UncondScore,
        MethodKind::UncondScoreCentral,
        MethodKind::UncondDiffTb,
        MethodKind::UncondDiff,
        MethodKind::UncondWald,
        MethodKind::UncondEstimate,
        MethodKind::UncondFisherMidp,
        MethodKind::Boschloo,
        MethodKind::Csm,
    ];

    pub fn id(self) -> &'static str {
        match self {
            MethodKind::FisherOnesided => "fisher-onesided",
            MethodKind::FisherCentral => "fisher-central",
            MethodKind::FisherIrwin => "fisher-irwin",
            MethodKind::Blaker => "blaker",
            MethodKind::Melded => "melded",
            MethodKind::UncondScore => "uncond-score",
            MethodKind::UncondScoreCentral => "uncond-score-central",
            MethodKind::UncondDiffTb => "uncond-diff-tb",
            MethodKind::UncondDiff => "uncond-diff",
            MethodKind::UncondWald => "uncond-wald",
            MethodKind::UncondEstimate => "uncond-estimate",
            MethodKind::UncondFisherMidp => "uncond-fisher-midp",
            MethodKind::Boschloo => "boschloo",
            MethodKind::Csm => "csm",
        }
    }

    pub fn is_conditional(self) -> bool {
        matches!(
            self,
            MethodKind::FisherOnesided
                | MethodKind::FisherCentral
                | MethodKind::FisherIrwin
                | MethodKind::Blaker
        )
    }

    pub fn is_unconditional(self) -> bool {
        !self.is_conditional() && self != MethodKind::Melded
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| {
                let ids: Vec<_> = MethodKind::ALL.iter().map(|k| k.id()).collect();
                Error::Domain(format!(
                    "unknown method '{s}'; supported methods: {}",
                    ids.join(", ")
                ))
            })
    }
}

/// A method together with its measure and modifiers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub kind: MethodKind,
    pub measure: EffectMeasure,
    pub mid_p: bool,
    pub berger_boos_gamma: Option<f64>,
    pub em: bool,
    pub boschloo_variant: BoschlooVariant,
    pub grid_points: usize,
    pub refine: bool,
    pub csm: CsmConfig,
}

impl MethodConfig {
    pub fn new(kind: MethodKind, measure: EffectMeasure) -> Self {
        Self {
            kind,
            measure,
            mid_p: false,
            berger_boos_gamma: None,
            em: false,
            boschloo_variant: BoschlooVariant::Irwin,
            grid_points: UnconditionalOptions::default().grid_points,
            refine: true,
            csm: CsmConfig::default(),
        }
    }

    pub fn with_mid_p(mut self, on: bool) -> Self {
        self.mid_p = on;
        self
    }

    pub fn with_berger_boos(mut self, gamma: Option<f64>) -> Self {
        self.berger_boos_gamma = gamma;
        self
    }

    pub fn with_em(mut self, on: bool) -> Self {
        self.em = on;
        self
    }

    pub fn with_boschloo_variant(mut self, v: BoschlooVariant) -> Self {
        self.boschloo_variant = v;
        self
    }
}

/// A validated method.
#[derive(Debug, Clone, PartialEq)]
pub struct Method {
    cfg: MethodConfig,
    opts: UnconditionalOptions,
}

/// A confidence interval with the region it covers, when one was computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCi {
    pub ci: ConfidenceInterval,
    pub region: Option<ConfidenceRegion>,
    /// The interval covers holes in the region or the p-value function was
    /// found to be non-monotone.
    pub holes_filled: bool,
}

impl Method {
    pub fn new(cfg: MethodConfig) -> Result<Self> {
        let k = cfg.kind;
        if cfg.berger_boos_gamma.is_some() && !k.is_unconditional() {
            return Err(Error::Unsupported(format!(
                "the Berger-Boos adjustment applies to unconditional methods, not {k}"
            )));
        }
        if cfg.em && !k.is_unconditional() {
            return Err(Error::Unsupported(format!(
                "estimate-and-maximize applies to unconditional methods, not {k}"
            )));
        }
        if cfg.mid_p && k == MethodKind::Melded {
            return Err(Error::Unsupported(
                "the melded method has no mid-p version".into(),
            ));
        }
        let opts = UnconditionalOptions {
            berger_boos_gamma: cfg.berger_boos_gamma,
            em_iterations: u32::from(cfg.em),
            mid_p: cfg.mid_p,
            grid_points: cfg.grid_points,
            refine: cfg.refine,
            ..Default::default()
        };
        opts.validate()?;
        Ok(Self { cfg, opts })
    }

    pub fn config(&self) -> &MethodConfig {
        &self.cfg
    }

    pub fn kind(&self) -> MethodKind {
        self.cfg.kind
    }

    pub fn measure(&self) -> EffectMeasure {
        self.cfg.measure
    }

    /// Descriptor including modifiers, e.g. `uncond-score [mid-p]`.
    pub fn descriptor(&self) -> String {
        let mut mods = Vec::new();
        if self.cfg.kind == MethodKind::Boschloo {
            mods.push(format!("{:?}", self.cfg.boschloo_variant).to_lowercase());
        }
        if self.cfg.mid_p {
            mods.push("mid-p".to_string());
        }
        if let Some(g) = self.cfg.berger_boos_gamma {
            mods.push(format!("berger-boos {g}"));
        }
        if self.cfg.em {
            mods.push("e+m".to_string());
        }
        if mods.is_empty() {
            self.cfg.kind.id().to_string()
        } else {
            format!("{} [{}]", self.cfg.kind.id(), mods.join(", "))
        }
    }

    /// Guaranteed validity; mid-p versions are approximate.
    pub fn is_valid(&self) -> bool {
        !self.cfg.mid_p
    }

    /// The two-sided p-value is `min(1, 2 p_less, 2 p_greater)` and the
    /// interval is central.
    pub fn is_central(&self) -> bool {
        match self.cfg.kind {
            MethodKind::FisherIrwin
            | MethodKind::Blaker
            | MethodKind::UncondScore
            | MethodKind::Csm => false,
            MethodKind::Boschloo => self.cfg.boschloo_variant == BoschlooVariant::OneSided,
            _ => true,
        }
    }

    fn mode(&self) -> TailMode {
        if self.cfg.mid_p {
            TailMode::Mid
        } else {
            TailMode::Full
        }
    }

    fn hypothesis(&self, beta0: f64, alt: Alternative) -> Result<Hypothesis> {
        Hypothesis::new(self.cfg.measure, beta0, alt)
    }

    /// Odds ratio at which conditional methods are evaluated.
    fn conditional_psi(&self, beta0: f64) -> Result<f64> {
        let m = self.cfg.measure;
        if m == EffectMeasure::OddsRatio {
            Ok(beta0)
        } else if beta0 == m.null_value() {
            Ok(1.0)
        } else {
            Err(Error::Unsupported(format!(
                "{} tests the {m} only at its equality null {}",
                self.cfg.kind,
                m.null_value()
            )))
        }
    }

    fn boschloo_psi(&self, beta0: f64) -> f64 {
        if self.cfg.measure == EffectMeasure::OddsRatio {
            beta0
        } else {
            1.0
        }
    }

    /// One-sided ordering for unconditional methods.
    pub fn ordering_one_sided(
        &self,
        n1: u32,
        n2: u32,
        beta0: f64,
        alt: Alternative,
    ) -> Result<SampleSpaceOrdering> {
        let m = self.cfg.measure;
        let o = match self.cfg.kind {
            MethodKind::UncondDiff => order_diff(n1, n2)?,
            MethodKind::UncondDiffTb => order_diff_tiebreak(n1, n2)?,
            MethodKind::UncondWald => order_wald_pooled(n1, n2)?,
            MethodKind::UncondEstimate => order_estimate(n1, n2, m)?,
            MethodKind::UncondFisherMidp => order_fisher_midp(n1, n2)?,
            MethodKind::UncondScore | MethodKind::UncondScoreCentral => {
                order_score(n1, n2, m, beta0)?
            }
            MethodKind::Boschloo => boschloo_ordering(
                n1,
                n2,
                self.boschloo_psi(beta0),
                BoschlooVariant::OneSided,
                alt,
                self.mode(),
            )?,
            MethodKind::Csm => {
                let variant = match alt {
                    Alternative::Greater => CsmVariant::TopDown,
                    _ => CsmVariant::BottomUp,
                };
                order_csm(n1, n2, variant, &self.cfg.csm)?
            }
            k => {
                return Err(Error::Unsupported(format!(
                    "{k} is not an unconditional method"
                )));
            }
        };
        Ok(o.restricted_to(m))
    }

    /// Two-sided ordering for the non-central unconditional methods.
    pub fn ordering_two_sided(&self, n1: u32, n2: u32, beta0: f64) -> Result<SampleSpaceOrdering> {
        let m = self.cfg.measure;
        let o = match self.cfg.kind {
            MethodKind::UncondScore => order_score_two_sided(n1, n2, m, beta0)?,
            MethodKind::Boschloo if self.cfg.boschloo_variant != BoschlooVariant::OneSided => {
                boschloo_ordering(
                    n1,
                    n2,
                    self.boschloo_psi(beta0),
                    self.cfg.boschloo_variant,
                    Alternative::TwoSidedMinlike,
                    self.mode(),
                )?
            }
            MethodKind::Csm => order_csm(n1, n2, CsmVariant::TwoSided, &self.cfg.csm)?,
            k => {
                return Err(Error::Unsupported(format!(
                    "{k} has no two-sided ordering; its two-sided p-value is central"
                )))
            }
        };
        Ok(o.restricted_to(m))
    }

    fn uncond_onesided(&self, data: &TwoByTwoData, beta0: f64, alt: Alternative) -> Result<f64> {
        let hyp = self.hypothesis(beta0, alt)?;
        let o = self.ordering_one_sided(data.n1, data.n2, beta0, alt)?;
        Ok(uncond_pvalue_detail(data, &hyp, &o, &self.opts)?.p)
    }

    /// p-value for `H0` against `alt`. Any two-sided alternative selects
    /// the method's own two-sided p-value.
    pub fn pvalue(&self, data: &TwoByTwoData, beta0: f64, alt: Alternative) -> Result<f64> {
        TwoByTwoData::new(data.x1, data.n1, data.x2, data.n2)?;
        self.cfg.measure.check_null(beta0)?;
        let k = self.cfg.kind;
        if alt.is_one_sided() {
            if k.is_conditional() {
                self.conditional_psi(beta0)?;
                return conditional_pvalue(data, &self.cond_hyp(beta0, alt)?, self.mode());
            }
            if k == MethodKind::Melded {
                return meld_pvalue(data, &self.hypothesis(beta0, alt)?);
            }
            return self.uncond_onesided(data, beta0, alt);
        }
        match k {
            MethodKind::FisherOnesided => Err(Error::Unsupported(
                "fisher-onesided needs alternative less or greater; use fisher-central for a two-sided test"
                    .into(),
            )),
            MethodKind::FisherCentral => fisher_central(data, self.conditional_psi(beta0)?, self.mode()),
            MethodKind::FisherIrwin => fisher_irwin(data, self.conditional_psi(beta0)?, self.mode()),
            MethodKind::Blaker => blaker(data, self.conditional_psi(beta0)?, self.mode()),
            _ if !self.is_central() => {
                let hyp = self.hypothesis(beta0, Alternative::TwoSidedMinlike)?;
                let o = self.ordering_two_sided(data.n1, data.n2, beta0)?;
                Ok(uncond_pvalue_detail(data, &hyp, &o, &self.opts)?.p)
            }
            _ => {
                let pl = self.pvalue(data, beta0, Alternative::Less)?;
                let pg = self.pvalue(data, beta0, Alternative::Greater)?;
                Ok((2.0 * pl.min(pg)).min(1.0))
            }
        }
    }

    /// Conditional tests are posed on the odds ratio.
    fn cond_hyp(&self, beta0: f64, alt: Alternative) -> Result<Hypothesis> {
        Hypothesis::new(EffectMeasure::OddsRatio, self.conditional_psi(beta0)?, alt)
    }

    /// Matching `100 level %` confidence interval.
    pub fn ci(&self, data: &TwoByTwoData, level: f64) -> Result<MethodCi> {
        TwoByTwoData::new(data.x1, data.n1, data.x2, data.n2)?;
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::Domain(format!(
                "confidence level {level} not in (0, 1)"
            )));
        }
        let m = self.cfg.measure;
        let k = self.cfg.kind;
        let plain = |ci: ConfidenceInterval| MethodCi {
            ci,
            region: None,
            holes_filled: false,
        };
        match k {
            MethodKind::Melded => Ok(plain(meld_ci(data, m, level)?)),
            MethodKind::FisherOnesided | MethodKind::FisherCentral => {
                let or = conditional_ci_oddsratio(data, level, self.mode())?;
                match m {
                    EffectMeasure::OddsRatio => Ok(plain(or)),
                    EffectMeasure::Difference => Ok(plain(ConfidenceInterval {
                        lower: -santner_diff_bound(1.0 / or.lower)?,
                        upper: santner_diff_bound(or.upper)?,
                        ..or
                    })),
                    EffectMeasure::Ratio => Err(Error::Unsupported(
                        "conditional intervals are available for the odds ratio and, through the odds ratio, the difference".into(),
                    )),
                }
            }
            MethodKind::FisherIrwin | MethodKind::Blaker => {
                if m != EffectMeasure::OddsRatio {
                    return Err(Error::Unsupported(format!(
                        "{k} intervals are available for the odds ratio only"
                    )));
                }
                let grid = default_beta_grid(data, m, 1.0 - level)?;
                let p = |b: f64| self.pvalue(data, b, Alternative::TwoSidedMinlike);
                let region = confidence_region(&p, level, &grid)?;
                let mci = matching_ci(&region)?;
                Ok(MethodCi {
                    ci: mci.ci,
                    holes_filled: mci.holes_filled,
                    region: Some(region),
                })
            }
            _ => {
                let indexed = matches!(k, MethodKind::UncondScore | MethodKind::UncondScoreCentral)
                    || (k == MethodKind::Boschloo && m == EffectMeasure::OddsRatio);
                let (n1, n2) = (data.n1, data.n2);
                let r = if self.is_central() {
                    // one ordering serves both tails unless the family is
                    // indexed or depends on the direction
                    if indexed || k == MethodKind::Csm || k == MethodKind::Boschloo {
                        self.central_ci_by_grid(data, level)?
                    } else {
                        let o =
                            self.ordering_one_sided(n1, n2, m.null_value(), Alternative::Less)?;
                        uncond_ci(
                            data,
                            m,
                            level,
                            OrderingFamily::Fixed(&o),
                            CiConstruction::Central,
                            &self.opts,
                        )?
                    }
                } else if indexed {
                    let f = |b: f64| self.ordering_two_sided(n1, n2, b);
                    uncond_ci(
                        data,
                        m,
                        level,
                        OrderingFamily::Indexed(&f),
                        CiConstruction::TwoSidedInversion,
                        &self.opts,
                    )?
                } else {
                    let o = self.ordering_two_sided(n1, n2, m.null_value())?;
                    uncond_ci(
                        data,
                        m,
                        level,
                        OrderingFamily::Fixed(&o),
                        CiConstruction::TwoSidedInversion,
                        &self.opts,
                    )?
                };
                Ok(MethodCi {
                    ci: r.ci,
                    region: r.region,
                    holes_filled: r.noncoherent,
                })
            }
        }
    }

    /// Central interval from one-sided p-values on a `beta0` grid, for
    /// orderings that change with `beta0` or with the direction.
    fn central_ci_by_grid(
        &self,
        data: &TwoByTwoData,
        level: f64,
    ) -> Result<crate::unconditional::UncondCi> {
        let m = self.cfg.measure;
        let alpha = 1.0 - level;
        let grid = default_beta_grid(data, m, alpha)?;
        let pg = |b: f64| self.pvalue(data, b, Alternative::Greater);
        let pl = |b: f64| self.pvalue(data, b, Alternative::Less);
        let rg = confidence_region(&pg, 1.0 - alpha / 2.0, &grid)?;
        let rl = confidence_region(&pl, 1.0 - alpha / 2.0, &grid)?;
        let region = rg.intersect(&rl, level);
        let mci = matching_ci(&region)?;
        Ok(crate::unconditional::UncondCi {
            ci: ConfidenceInterval {
                central: true,
                ..mci.ci
            },
            noncoherent: rg.intervals.len() > 1 || rl.intervals.len() > 1 || mci.holes_filled,
            region: Some(region),
        })
    }

    /// Estimate, interval and p-values at `beta0`.
    pub fn infer(&self, data: &TwoByTwoData, beta0: f64, level: f64) -> Result<InferenceResult> {
        let ci = self.ci(data, level)?;
        let p_less = self.pvalue(data, beta0, Alternative::Less)?;
        let p_greater = self.pvalue(data, beta0, Alternative::Greater)?;
        let p_two_sided = match self.cfg.kind {
            MethodKind::FisherOnesided => (2.0 * p_less.min(p_greater)).min(1.0),
            _ => self.pvalue(data, beta0, Alternative::TwoSidedMinlike)?,
        };
        let (estimate, estimate_clamped) = clamp_estimate(data.estimate(self.cfg.measure), &ci.ci);
        Ok(InferenceResult {
            method: self.descriptor(),
            measure: self.cfg.measure,
            beta0,
            estimate,
            estimate_clamped,
            ci: ci.ci,
            region: ci.region,
            p_less,
            p_greater,
            p_two_sided,
        })
    }

    /// p-values of every table of an `n1` by `n2` sample space, indexed
    /// `x1 * (n2 + 1) + x2`. Unconditional tables whose p-value could be at
    /// most `refine_below` are computed with full boundary refinement.
    pub fn pvalue_map(
        &self,
        n1: u32,
        n2: u32,
        beta0: f64,
        alt: Alternative,
        refine_below: Option<f64>,
    ) -> Result<Vec<f64>> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::Domain("group sizes must be at least 1".into()));
        }
        let k = self.cfg.kind;
        let cells: Vec<TwoByTwoData> = (0..=n1)
            .flat_map(|x1| (0..=n2).map(move |x2| TwoByTwoData { x1, n1, x2, n2 }))
            .collect();
        if !k.is_unconditional() {
            return cells
                .par_iter()
                .map(|d| self.pvalue(d, beta0, alt))
                .collect();
        }
        let table = |a: Alternative, o: &SampleSpaceOrdering, limit: Option<f64>| {
            pvalue_table(&self.hypothesis(beta0, a)?, o, &self.opts, limit)
        };
        if alt.is_one_sided() {
            let o = self.ordering_one_sided(n1, n2, beta0, alt)?;
            return table(alt, &o, refine_below);
        }
        if !self.is_central() {
            let o = self.ordering_two_sided(n1, n2, beta0)?;
            return table(Alternative::TwoSidedMinlike, &o, refine_below);
        }
        let half = refine_below.map(|a| a / 2.0);
        let ol = self.ordering_one_sided(n1, n2, beta0, Alternative::Less)?;
        let og = self.ordering_one_sided(n1, n2, beta0, Alternative::Greater)?;
        let pl = table(Alternative::Less, &ol, half)?;
        let pg = table(Alternative::Greater, &og, half)?;
        Ok(pl
            .iter()
            .zip(&pg)
            .map(|(a, b)| (2.0 * a.min(*b)).min(1.0))
            .collect())
    }
}

impl Procedure for Method {
    fn name(&self) -> String {
        self.descriptor()
    }

    fn measure(&self) -> EffectMeasure {
        self.cfg.measure
    }

    fn pvalue(&self, data: &TwoByTwoData, beta0: f64) -> Result<f64> {
        match self.cfg.kind {
            MethodKind::FisherOnesided => {
                let pl = Method::pvalue(self, data, beta0, Alternative::Less)?;
                let pg = Method::pvalue(self, data, beta0, Alternative::Greater)?;
                Ok((2.0 * pl.min(pg)).min(1.0))
            }
            _ => Method::pvalue(self, data, beta0, Alternative::TwoSidedMinlike),
        }
    }

    fn ci(&self, data: &TwoByTwoData, level: f64) -> Result<ConfidenceInterval> {
        Method::ci(self, data, level).map(|c| c.ci)
    }
}
