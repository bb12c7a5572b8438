//! Sufficient conditions for (weak) concavity of the cost function and
//! numerical probes of its curvature.

pub mod diagnostics;
pub mod eigen;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::instance::MatchingInstance;

pub use diagnostics::{
    find_weak_concavity_rho, numerical_hessian, one_sided_partials, probe_midpoint_concavity,
    Hessian, MidpointProbeReport, MidpointWitness, OneSidedPartials, RhoSearchReport,
};
pub use eigen::symmetric_eigenvalues;

/// Efficiencies this close to one half count as perfect pooling.
const HALF_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    ConcaveCertified,
    WeaklyConcaveCertified,
    Inconclusive,
    KnownViolationWitness,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::ConcaveCertified => "ConcaveCertified",
            Verdict::WeaklyConcaveCertified => "WeaklyConcaveCertified",
            Verdict::Inconclusive => "Inconclusive",
            Verdict::KnownViolationWitness => "KnownViolationWitness",
        })
    }
}

/// The sufficient condition behind a verdict. Serialized labels are the
/// stable identifiers used in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    /// Every patience rate is zero: cost is linear.
    #[serde(rename = "Prop1_linear")]
    InfinitePatienceLinear,
    /// One type: cost is concave everywhere.
    #[serde(rename = "Lemma1_single_type")]
    SingleType,
    /// Two types, equal patience: concave everywhere.
    #[serde(rename = "Thm2_sameTheta_N2")]
    TwoTypeSamePatience,
    /// Two types, `tau1 <= 0` or `tau2 < 0`.
    #[serde(rename = "Thm1_case_i")]
    TwoTypeTauSign,
    /// Two types, lower bound on the more impatient type's rate from `tau`.
    #[serde(rename = "Thm1_case_ii")]
    TwoTypeTauThreshold,
    /// Two types, patience ratio below three.
    #[serde(rename = "Cor1_case_i")]
    TwoTypePatienceRatio,
    /// Two types, lower bound from the cross efficiency.
    #[serde(rename = "Cor1_case_ii")]
    TwoTypeEfficiencyThreshold,
    /// All patience equal, bound from the third critical efficiency.
    #[serde(rename = "Thm3_case_i")]
    SamePatienceConcave,
    /// Patience rates differ, bound from the second critical efficiency.
    #[serde(rename = "Thm3_case_ii")]
    MixedPatienceConcave,
    /// All patience equal, bound from the fourth critical efficiency.
    #[serde(rename = "Thm4_case_i")]
    SamePatienceWeak,
    /// Patience within a factor two, bound from the third critical efficiency.
    #[serde(rename = "Thm4_case_ii")]
    BoundedRatioWeak,
    /// Three types with equal patience: weakly concave everywhere.
    #[serde(rename = "Cor3_N3_sameTheta")]
    ThreeTypeSamePatience,
    /// Two types, perfect cross efficiency and `tau1 > 0`: the region with a
    /// fully absorbed type is unbounded, so no rate floor helps.
    #[serde(rename = "Prop3_unbounded")]
    PerfectEfficiencyUnbounded,
}

impl Rule {
    pub fn label(self) -> &'static str {
        match self {
            Rule::InfinitePatienceLinear => "Prop1_linear",
            Rule::SingleType => "Lemma1_single_type",
            Rule::TwoTypeSamePatience => "Thm2_sameTheta_N2",
            Rule::TwoTypeTauSign => "Thm1_case_i",
            Rule::TwoTypeTauThreshold => "Thm1_case_ii",
            Rule::TwoTypePatienceRatio => "Cor1_case_i",
            Rule::TwoTypeEfficiencyThreshold => "Cor1_case_ii",
            Rule::SamePatienceConcave => "Thm3_case_i",
            Rule::MixedPatienceConcave => "Thm3_case_ii",
            Rule::SamePatienceWeak => "Thm4_case_i",
            Rule::BoundedRatioWeak => "Thm4_case_ii",
            Rule::ThreeTypeSamePatience => "Cor3_N3_sameTheta",
            Rule::PerfectEfficiencyUnbounded => "Prop3_unbounded",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One rule that `certify` evaluated, with the rate floors it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleCheck {
    pub rule: Rule,
    pub applies: bool,
    /// Per-type strict lower bounds on `lambda_lower` (0 = no requirement).
    pub required_lower_bounds: Vec<f64>,
    pub note: String,
}

/// Weak-concavity violation found by one-sided partials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinkWitness {
    pub lambda: Vec<f64>,
    pub coord: usize,
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityCertificate {
    pub verdict: Verdict,
    pub rule: Option<Rule>,
    /// Two-type sign quantities (only for `N = 2`, types sorted by patience).
    pub tau1: Option<f64>,
    pub tau2: Option<f64>,
    /// Critical efficiencies for `k = 1..=4`.
    pub critical_eff: BTreeMap<usize, f64>,
    pub required_lower_bounds: Vec<f64>,
    pub witness: Option<KinkWitness>,
    pub checks: Vec<RuleCheck>,
}

impl ConcavityCertificate {
    pub fn summary(&self) -> String {
        match self.rule {
            Some(r) => format!("{} ({r})", self.verdict),
            None => self.verdict.to_string(),
        }
    }
}

/// `e[i][j] = 1 - c(i,j) / (c(i) + c(j))`, with exactly one half on the diagonal.
pub fn matching_efficiency(inst: &MatchingInstance) -> Vec<Vec<f64>> {
    let n = inst.n_types();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        0.5
                    } else {
                        1.0 - inst.pair_cost[i][j] / (inst.solo_cost[i] + inst.solo_cost[j])
                    }
                })
                .collect()
        })
        .collect()
}

/// Largest `k`-th biggest efficiency over all rows (0 for `k > N`).
pub fn critical_efficiency(inst: &MatchingInstance, k: usize) -> f64 {
    critical_from_matrix(&matching_efficiency(inst), k)
}

fn critical_from_matrix(e: &[Vec<f64>], k: usize) -> f64 {
    let n = e.len();
    if k == 0 || k > n {
        return 0.0;
    }
    e.iter()
        .map(|row| {
            let mut r = row.clone();
            r.sort_by(|a, b| b.total_cmp(a));
            r[k - 1]
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `(tau1, tau2)` for two types sorted by patience.
pub fn tau_values(inst: &MatchingInstance) -> (f64, f64) {
    let (t1, t2) = (inst.theta[0], inst.theta[1]);
    let (c1, c2, c12) = (inst.solo_cost[0], inst.solo_cost[1], inst.pair_cost[0][1]);
    let tau1 = c1 * (t2 - 3.0 * t1) + 2.0 * c2 * t2 - 2.0 * c12 * t2;
    let tau2 = tau1 * tau1 - 8.0 * c1 * (2.0 * c12 - c1 - c2) * t1 * (t1 + t2);
    (tau1, tau2)
}

/// Floor on the impatient type's rate above which the two-type cost is
/// weakly concave, when `tau1 > 0`, `tau2 >= 0` and pooling is imperfect.
pub fn tau_threshold(inst: &MatchingInstance) -> Option<f64> {
    let (tau1, tau2) = tau_values(inst);
    let gap = 2.0 * inst.pair_cost[0][1] - inst.solo_cost[0] - inst.solo_cost[1];
    (tau1 > 0.0 && tau2 >= 0.0 && gap.abs() > HALF_TOL * inst.pair_cost[0][1])
        .then(|| (tau1 + tau2.sqrt()) / (4.0 * gap))
}

fn efficiency_floor(theta: f64, e: f64) -> f64 {
    theta * e / (1.0 - 2.0 * e)
}

fn is_half(e: f64) -> bool {
    (e - 0.5).abs() <= HALF_TOL
}

/// Applies the sufficient conditions in order of strength and reports the
/// first that holds on the instance's box, recording every rule it tried.
pub fn certify(inst: &MatchingInstance) -> Result<ConcavityCertificate> {
    inst.validate()?;
    let n = inst.n_types();
    let e = matching_efficiency(inst);
    let critical_eff: BTreeMap<usize, f64> =
        (1..=4).map(|k| (k, critical_from_matrix(&e, k))).collect();
    let mut cert = ConcavityCertificate {
        verdict: Verdict::Inconclusive,
        rule: None,
        tau1: None,
        tau2: None,
        critical_eff,
        required_lower_bounds: vec![0.0; n],
        witness: None,
        checks: Vec::new(),
    };
    let zeros = vec![0.0; n];

    if inst.all_theta_zero() {
        return Ok(cert.finish(
            Verdict::ConcaveCertified,
            Rule::InfinitePatienceLinear,
            zeros,
            "cost is linear",
        ));
    }
    if n == 1 {
        return Ok(cert.finish(
            Verdict::ConcaveCertified,
            Rule::SingleType,
            zeros,
            "single type",
        ));
    }
    if n == 2 {
        return certify_two(inst, cert);
    }

    // General N: per-type floors from the critical efficiencies.
    let crit = cert.critical_eff.clone();
    let same = inst.all_theta_equal();
    let (tmin, tmax) = inst
        .theta
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &t| {
            (lo.min(t), hi.max(t))
        });
    let candidates = [
        (
            Rule::SamePatienceConcave,
            Verdict::ConcaveCertified,
            same,
            3,
        ),
        (
            Rule::MixedPatienceConcave,
            Verdict::ConcaveCertified,
            !same,
            2,
        ),
        (
            Rule::SamePatienceWeak,
            Verdict::WeaklyConcaveCertified,
            same,
            4,
        ),
        (
            Rule::BoundedRatioWeak,
            Verdict::WeaklyConcaveCertified,
            tmax < 2.0 * tmin,
            3,
        ),
    ];
    for (rule, verdict, structural, k) in candidates {
        if !structural {
            continue;
        }
        let ek = crit[&k];
        if is_half(ek) {
            cert.reject(rule, vec![f64::INFINITY; n], format!("e({k}) = 0.5"));
            continue;
        }
        let floors: Vec<f64> = inst
            .theta
            .iter()
            .map(|&t| efficiency_floor(t, ek).max(0.0))
            .collect();
        let holds = inst.lambda_lower.iter().zip(&floors).all(|(lo, f)| lo > f);
        let note = format!("e({k}) = {ek}");
        if holds {
            let rule = if rule == Rule::SamePatienceWeak && n == 3 {
                Rule::ThreeTypeSamePatience
            } else {
                rule
            };
            return Ok(cert.finish(verdict, rule, floors, &note));
        }
        cert.reject(rule, floors, note);
    }
    Ok(cert)
}

impl ConcavityCertificate {
    fn finish(mut self, verdict: Verdict, rule: Rule, floors: Vec<f64>, note: &str) -> Self {
        self.checks.push(RuleCheck {
            rule,
            applies: true,
            required_lower_bounds: floors.clone(),
            note: note.to_string(),
        });
        self.verdict = verdict;
        self.rule = Some(rule);
        self.required_lower_bounds = floors;
        self
    }

    fn reject(&mut self, rule: Rule, floors: Vec<f64>, note: String) {
        self.checks.push(RuleCheck {
            rule,
            applies: false,
            required_lower_bounds: floors,
            note,
        });
    }
}

fn certify_two(
    inst: &MatchingInstance,
    mut cert: ConcavityCertificate,
) -> Result<ConcavityCertificate> {
    // Work with types sorted by patience; floors are mapped back at the end.
    let swapped = inst.theta[0] > inst.theta[1];
    let sorted = if swapped {
        inst.permuted(&[1, 0])
    } else {
        inst.clone()
    };
    let unsort = |v: [f64; 2]| {
        if swapped {
            vec![v[1], v[0]]
        } else {
            v.to_vec()
        }
    };
    let (t1, t2) = (sorted.theta[0], sorted.theta[1]);
    let (tau1, tau2) = tau_values(&sorted);
    cert.tau1 = Some(tau1);
    cert.tau2 = Some(tau2);
    let none = vec![0.0; 2];

    if t1 == t2 {
        return Ok(cert.finish(
            Verdict::ConcaveCertified,
            Rule::TwoTypeSamePatience,
            none,
            "equal patience",
        ));
    }

    let e2 = cert.critical_eff[&2];
    let note = format!("e(2) = {e2}");
    if is_half(e2) {
        cert.reject(Rule::MixedPatienceConcave, vec![f64::INFINITY; 2], note);
    } else {
        let floors: Vec<f64> = inst
            .theta
            .iter()
            .map(|&t| efficiency_floor(t, e2).max(0.0))
            .collect();
        if inst.lambda_lower.iter().zip(&floors).all(|(lo, f)| lo > f) {
            return Ok(cert.finish(
                Verdict::ConcaveCertified,
                Rule::MixedPatienceConcave,
                floors,
                &note,
            ));
        }
        cert.reject(Rule::MixedPatienceConcave, floors, note);
    }

    let note = format!("patience ratio {}", t2 / t1);
    if t2 < 3.0 * t1 {
        return Ok(cert.finish(
            Verdict::WeaklyConcaveCertified,
            Rule::TwoTypePatienceRatio,
            none,
            &note,
        ));
    }
    cert.reject(Rule::TwoTypePatienceRatio, none.clone(), note);

    let note = format!("tau1 = {tau1}, tau2 = {tau2}");
    if tau1 <= 0.0 || tau2 < 0.0 {
        return Ok(cert.finish(
            Verdict::WeaklyConcaveCertified,
            Rule::TwoTypeTauSign,
            none,
            &note,
        ));
    }
    cert.reject(Rule::TwoTypeTauSign, none, note.clone());

    let e12 = matching_efficiency(&sorted)[0][1];
    let thr = tau_threshold(&sorted);
    let eff_floor = (!is_half(e12)).then(|| t2 / (4.0 * (1.0 - 2.0 * e12)));
    for (rule, floor, note) in [
        (Rule::TwoTypeTauThreshold, thr, note),
        (
            Rule::TwoTypeEfficiencyThreshold,
            eff_floor,
            format!("e12 = {e12}"),
        ),
    ] {
        let bounds = unsort([0.0, floor.unwrap_or(f64::INFINITY).max(0.0)]);
        if floor.is_some_and(|f| sorted.lambda_lower[1] > f) {
            return Ok(cert.finish(Verdict::WeaklyConcaveCertified, rule, bounds, &note));
        }
        cert.reject(rule, bounds, note);
    }

    // No certificate. Look for a convex kink on the boundary of the region
    // where the impatient type is fully absorbed.
    let gap = 2.0 * sorted.pair_cost[0][1] - sorted.solo_cost[0] - sorted.solo_cost[1];
    let perfect = gap.abs() <= HALF_TOL * sorted.pair_cost[0][1];
    if perfect && tau1 > 0.0 {
        cert.rule = Some(Rule::PerfectEfficiencyUnbounded);
        cert.required_lower_bounds = vec![f64::INFINITY; 2];
    } else if let Some(f) = thr {
        cert.rule = Some(Rule::TwoTypeTauThreshold);
        cert.required_lower_bounds = unsort([0.0, f]);
    }
    if let Some(w) = search_absorption_kink(&sorted, tau1, tau2, gap)? {
        let (lambda, coord) = if swapped {
            (vec![w.lambda[1], w.lambda[0]], 1 - w.coord)
        } else {
            (w.lambda.clone(), w.coord)
        };
        cert.witness = Some(KinkWitness { lambda, coord, ..w });
        cert.verdict = Verdict::KnownViolationWitness;
    }
    Ok(cert)
}

/// Scans the curve `lambda1 = lambda2 + theta1` where the two-type solution
/// switches into the absorbed regime, and returns the first point inside the
/// box where the left partial in `lambda1` falls below the right one.
fn search_absorption_kink(
    sorted: &MatchingInstance,
    tau1: f64,
    tau2: f64,
    gap: f64,
) -> Result<Option<KinkWitness>> {
    let t1 = sorted.theta[0];
    let c1 = sorted.solo_cost[0];
    // Range of lambda2 on that curve with the absorbed regime reachable.
    let (lo, hi) = if gap.abs() <= HALF_TOL * sorted.pair_cost[0][1] {
        if tau1 <= 0.0 {
            return Ok(None);
        }
        (c1 * t1 * (t1 + sorted.theta[1]) / tau1, f64::INFINITY)
    } else if tau2 >= 0.0 && gap > 0.0 {
        let r = tau2.sqrt();
        ((tau1 - r) / (4.0 * gap), (tau1 + r) / (4.0 * gap))
    } else {
        return Ok(None);
    };
    let step = 1e-6;
    let margin = |l: f64| 2.0 * step * l.max(1.0);
    let l2_lo = lo
        .max(sorted.lambda_lower[1])
        .max(sorted.lambda_lower[0] - t1);
    let l2_hi = hi
        .min(sorted.lambda_upper[1])
        .min(sorted.lambda_upper[0] - t1);
    if !(l2_lo < l2_hi) {
        return Ok(None);
    }
    const PROBES: usize = 16;
    for k in 1..PROBES {
        let l2 = if l2_hi.is_finite() {
            l2_lo + (l2_hi - l2_lo) * k as f64 / PROBES as f64
        } else {
            l2_lo * (1.0 + k as f64)
        };
        let l1 = l2 + t1;
        if l1 - margin(l1) < sorted.lambda_lower[0] || l1 + margin(l1) > sorted.lambda_upper[0] {
            continue;
        }
        let p = one_sided_partials(sorted, &[l1, l2], 0, step)?;
        if p.witness {
            return Ok(Some(KinkWitness {
                lambda: vec![l1, l2],
                coord: 0,
                left: p.left,
                right: p.right,
            }));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two(theta: [f64; 2], c12: f64, lower: f64, upper: f64) -> MatchingInstance {
        MatchingInstance::two_type(theta, 1.0, 1.0, c12, [lower; 2], [upper; 2]).unwrap()
    }

    #[test]
    fn efficiency_definition() {
        let e = matching_efficiency(&two([1.0, 1.0], 1.05, 0.1, 1.0));
        assert_eq!(e[0][0], 0.5);
        assert!((e[0][1] - 0.475).abs() < 1e-15);
        let additive =
            MatchingInstance::two_type([1.0, 1.0], 1.0, 2.0, 3.0, [0.1; 2], [1.0; 2]).unwrap();
        assert_eq!(matching_efficiency(&additive)[0][1], 0.0);
    }

    #[test]
    fn critical_efficiencies() {
        let inst = two([1.0, 1.0], 1.05, 0.1, 1.0);
        assert_eq!(critical_efficiency(&inst, 1), 0.5);
        assert!((critical_efficiency(&inst, 2) - 0.475).abs() < 1e-15);
        assert_eq!(critical_efficiency(&inst, 3), 0.0);
    }

    #[test]
    fn tau_values_for_wide_patience_gap() {
        let inst = two([1.0, 8.0], 1.05, 0.1, 100.0);
        let (t1, t2) = tau_values(&inst);
        assert!((t1 - 4.2).abs() < 1e-12);
        assert!((t2 - 10.44).abs() < 1e-12);
        assert!((tau_threshold(&inst).unwrap() - 18.57).abs() < 0.01);
    }

    #[test]
    fn patience_ratio_below_three() {
        let c = certify(&two([1.0, 2.0], 1.01, 0.01, 10.0)).unwrap();
        assert_eq!(c.verdict, Verdict::WeaklyConcaveCertified);
        assert_eq!(c.rule, Some(Rule::TwoTypePatienceRatio));
    }

    #[test]
    fn tau_floor_decides() {
        let above = certify(&two([1.0, 8.0], 1.05, 18.6, 100.0)).unwrap();
        assert_eq!(above.rule, Some(Rule::TwoTypeTauThreshold));
        assert_eq!(above.verdict, Verdict::WeaklyConcaveCertified);
        assert!((above.required_lower_bounds[1] - 18.57).abs() < 0.01);

        let below = certify(&two([1.0, 8.0], 1.05, 1.0, 100.0)).unwrap();
        assert_eq!(below.verdict, Verdict::KnownViolationWitness);
        let w = below.witness.unwrap();
        assert!(w.left < w.right);
    }

    #[test]
    fn perfect_pooling_flags_unbounded_region() {
        let c = certify(&two([1.0, 8.0], 1.0, 1.0, 1e5)).unwrap();
        assert_eq!(c.rule, Some(Rule::PerfectEfficiencyUnbounded));
        assert_eq!(c.verdict, Verdict::KnownViolationWitness);
        assert_eq!(c.tau1, Some(5.0));
    }

    #[test]
    fn swapped_types_map_floors_back() {
        let c = certify(&two([8.0, 1.0], 1.05, 18.6, 100.0)).unwrap();
        assert_eq!(c.rule, Some(Rule::TwoTypeTauThreshold));
        assert_eq!(c.required_lower_bounds[1], 0.0);
        assert!(c.required_lower_bounds[0] > 18.0);
    }

    #[test]
    fn three_types_same_patience() {
        let inst = MatchingInstance::from_cost_matrix(
            vec![1.0; 3],
            vec![
                vec![1.0, 1.2, 1.1],
                vec![1.2, 1.0, 1.3],
                vec![1.1, 1.3, 1.0],
            ],
            vec![1e-3; 3],
            vec![10.0; 3],
        )
        .unwrap();
        let c = certify(&inst).unwrap();
        assert_eq!(c.verdict, Verdict::WeaklyConcaveCertified);
        assert_eq!(c.rule, Some(Rule::ThreeTypeSamePatience));
        assert_eq!(c.summary(), "WeaklyConcaveCertified (Cor3_N3_sameTheta)");
    }

    #[test]
    fn infinite_patience_and_single_type() {
        let c = certify(&two([0.0, 0.0], 1.5, 0.1, 1.0)).unwrap();
        assert_eq!(c.rule, Some(Rule::InfinitePatienceLinear));
        let one =
            MatchingInstance::new(vec![2.0], vec![1.0], vec![vec![1.0]], vec![0.1], vec![1.0])
                .unwrap();
        assert_eq!(certify(&one).unwrap().verdict, Verdict::ConcaveCertified);
    }

    #[test]
    fn critical_efficiency_monotone() {
        let inst = MatchingInstance::from_cost_matrix(
            vec![1.0; 4],
            vec![
                vec![0.70, 0.77, 0.83, 0.92],
                vec![0.77, 0.40, 0.62, 0.74],
                vec![0.83, 0.62, 0.50, 0.86],
                vec![0.92, 0.74, 0.86, 0.70],
            ],
            vec![1e-3; 4],
            vec![10.0; 4],
        )
        .unwrap();
        let e: Vec<f64> = (1..=5).map(|k| critical_efficiency(&inst, k)).collect();
        assert_eq!(e[0], 0.5);
        assert!(e.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(e[4], 0.0);
    }
}
