use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::number::{self, int, q, serde_q, to_f64, Q};
use crate::schedule::{ladder_schedule, LadderSchedule};
use crate::LedgerError;

/// Inputs of the ledger. `mu`, `tau` and `gamma` are exact; `c6` and `vmax`
/// only enter the window schedule, which involves real powers anyway.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerInput {
    pub mu: Q,
    pub tau: Q,
    pub gamma: Q,
    pub c6: f64,
    pub vmax: f64,
}

impl LedgerInput {
    pub const DEFAULT_C6: f64 = 1.0;
    pub const DEFAULT_VMAX: f64 = 1.0;

    /// `gamma` defaults to 3/5, `c6` to 1 and `vmax` to 1.
    pub fn new(mu: Q, tau: Q) -> Self {
        Self {
            mu,
            tau,
            gamma: default_gamma(),
            c6: Self::DEFAULT_C6,
            vmax: Self::DEFAULT_VMAX,
        }
    }

    pub fn validate(&self) -> Result<(), LedgerError> {
        validate_mu_tau(&self.mu, &self.tau)?;
        if !(self.gamma > number::zero() && self.gamma < q(2, 3)) {
            return Err(LedgerError::Domain {
                name: "gamma",
                reason: format!("need 0 < gamma < 2/3, got {}", self.gamma),
            });
        }
        if !(self.c6 > 0.0 && self.c6.is_finite()) {
            return Err(LedgerError::Domain {
                name: "c6",
                reason: format!("need finite c6 > 0, got {}", self.c6),
            });
        }
        if !(self.vmax >= 1.0 && self.vmax.is_finite()) {
            return Err(LedgerError::Domain {
                name: "vmax",
                reason: format!("need finite vmax >= 1, got {}", self.vmax),
            });
        }
        Ok(())
    }
}

pub fn default_gamma() -> Q {
    q(3, 5)
}

fn validate_mu_tau(mu: &Q, tau: &Q) -> Result<(), LedgerError> {
    if !number::is_positive(mu) {
        return Err(LedgerError::Domain {
            name: "mu",
            reason: format!("need mu > 0, got {mu}"),
        });
    }
    if *tau <= number::one() {
        return Err(LedgerError::Domain {
            name: "tau",
            reason: format!("need tau > 1, got {tau}"),
        });
    }
    Ok(())
}

/// `(mu + 1) / (tau - 1) < 4/9`, decided exactly.
pub fn check_shield_condition(mu: &Q, tau: &Q) -> Result<bool, LedgerError> {
    validate_mu_tau(mu, tau)?;
    Ok(shield_ratio(mu, tau) < q(4, 9))
}

fn shield_ratio(mu: &Q, tau: &Q) -> Q {
    (mu + int(1)) / (tau - int(1))
}

/// `tau > 7/4 mu + 11/4`, the compatibility bound quoted next to the
/// `nu` interval. Reported for information only.
pub fn weak_condition(mu: &Q, tau: &Q) -> bool {
    *tau > q(7, 4) * mu + q(11, 4)
}

/// Open interval `(lo, hi)` with exact endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenInterval {
    pub lo: Q,
    pub hi: Q,
}

impl OpenInterval {
    pub fn new(lo: Q, hi: Q) -> Self {
        Self { lo, hi }
    }

    pub fn is_empty(&self) -> bool {
        self.lo >= self.hi
    }

    pub fn contains(&self, x: &Q) -> bool {
        &self.lo < x && x < &self.hi
    }

    pub fn midpoint(&self) -> Q {
        number::midpoint(&self.lo, &self.hi)
    }
}

impl std::fmt::Display for OpenInterval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.lo, self.hi)
    }
}

impl Serialize for OpenInterval {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("OpenInterval", 5)?;
        st.serialize_field("lo", &self.lo.to_string())?;
        st.serialize_field("hi", &self.hi.to_string())?;
        st.serialize_field("lo_approx", &to_f64(&self.lo))?;
        st.serialize_field("hi_approx", &to_f64(&self.hi))?;
        st.serialize_field("empty", &self.is_empty())?;
        st.end()
    }
}

/// A concrete interior point of every parameter interval, chosen by
/// midpoints in dependency order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChosenTuple {
    #[serde(with = "serde_q")]
    pub eta: Q,
    #[serde(with = "serde_q")]
    pub beta: Q,
    #[serde(with = "serde_q")]
    pub c: Q,
    #[serde(with = "serde_q")]
    pub delta: Q,
    #[serde(with = "serde_q")]
    pub xi: Q,
    #[serde(with = "serde_q")]
    pub nu: Q,
    #[serde(with = "serde_q")]
    pub zeta: Q,
    #[serde(with = "serde_q")]
    pub q: Q,
}

#[derive(Debug, Clone, Serialize)]
pub struct LedgerReport {
    #[serde(with = "serde_q")]
    pub mu: Q,
    #[serde(with = "serde_q")]
    pub tau: Q,
    #[serde(with = "serde_q")]
    pub gamma: Q,
    /// `(mu + 1) / (tau - 1)`.
    #[serde(with = "serde_q")]
    pub shield_ratio: Q,
    pub shield_ok: bool,
    pub weak_condition_ok: bool,
    #[serde(with = "serde_q")]
    pub gamma_prime: Q,
    pub eta_range: OpenInterval,
    /// Beta range evaluated at the chosen eta.
    pub beta_range: OpenInterval,
    /// Delta range `(0, c)` evaluated at the chosen eta and beta.
    pub delta_range: OpenInterval,
    pub xi_range: OpenInterval,
    pub nu_range: OpenInterval,
    pub q_range: OpenInterval,
    pub chosen: Option<ChosenTuple>,
    /// Names of the intervals found empty.
    pub empty_intervals: Vec<String>,
    pub ladder: Option<LadderSchedule>,
    pub ladder_note: Option<String>,
}

impl LedgerReport {
    pub fn feasible(&self) -> bool {
        self.shield_ok && self.empty_intervals.is_empty() && self.chosen.is_some()
    }
}

/// `mu / (tau - 1)`, the ratio every interval endpoint depends on.
pub fn mu_ratio(mu: &Q, tau: &Q) -> Q {
    mu / (tau - int(1))
}

pub fn eta_range(mu: &Q, tau: &Q) -> OpenInterval {
    let r = mu_ratio(mu, tau);
    OpenInterval::new(&r / int(2), q(2, 3) - &r)
}

pub fn beta_range(mu: &Q, tau: &Q, eta: &Q) -> OpenInterval {
    let r = mu_ratio(mu, tau);
    OpenInterval::new(q(4, 3), int(2) - eta - r)
}

/// `c = 2 - eta - beta - mu/(tau-1)`, the upper end of the delta range.
pub fn c_of(mu: &Q, tau: &Q, eta: &Q, beta: &Q) -> Q {
    int(2) - eta - beta - mu_ratio(mu, tau)
}

pub fn xi_range(mu: &Q, tau: &Q) -> OpenInterval {
    OpenInterval::new(number::zero(), q(1, 4) - q(3, 8) * mu_ratio(mu, tau))
}

pub fn gamma_prime(mu: &Q, tau: &Q, gamma: &Q) -> Q {
    number::max(gamma, &shield_ratio(mu, tau))
}

/// Range of `nu` from `max{3 gamma' + 2, 2 tau/(tau-1), (mu+2)/(tau-1)} < 2 nu < 4`.
pub fn nu_range(mu: &Q, tau: &Q, gamma: &Q) -> OpenInterval {
    let gp = gamma_prime(mu, tau, gamma);
    let tm1 = tau - int(1);
    let a = int(3) * gp + int(2);
    let b = int(2) * tau / &tm1;
    let c = (mu + int(2)) / &tm1;
    let lower = number::max(&number::max(&a, &b), &c);
    OpenInterval::new(lower / int(2), int(2))
}

pub fn q_range() -> OpenInterval {
    OpenInterval::new(q(1, 2), q(2, 3))
}

/// Computes every interval, the chosen tuple and, when possible, the window
/// ladder. Fails with [`LedgerError::InfeasibleInput`] if the shield
/// condition does not hold.
pub fn compute_intervals(input: &LedgerInput) -> Result<LedgerReport, LedgerError> {
    input.validate()?;
    let (mu, tau, gamma) = (&input.mu, &input.tau, &input.gamma);
    let ratio = shield_ratio(mu, tau);
    if ratio >= q(4, 9) {
        return Err(LedgerError::InfeasibleInput {
            ratio: ratio.to_string(),
        });
    }

    let mut empty = Vec::new();
    let eta = eta_range(mu, tau);
    if eta.is_empty() {
        empty.push("eta".to_string());
    }
    let eta_star = eta.midpoint();
    let beta = beta_range(mu, tau, &eta_star);
    if beta.is_empty() {
        empty.push("beta".to_string());
    }
    let beta_star = beta.midpoint();
    let c = c_of(mu, tau, &eta_star, &beta_star);
    let delta = OpenInterval::new(number::zero(), c.clone());
    if delta.is_empty() {
        empty.push("delta".to_string());
    }
    let xi = xi_range(mu, tau);
    if xi.is_empty() {
        empty.push("xi".to_string());
    }
    let nu = nu_range(mu, tau, gamma);
    if nu.is_empty() {
        empty.push("nu".to_string());
    }
    let qr = q_range();

    let chosen = empty.is_empty().then(|| {
        let nu_star = nu.midpoint();
        ChosenTuple {
            eta: eta_star.clone(),
            beta: beta_star.clone(),
            c: c.clone(),
            delta: delta.midpoint(),
            xi: xi.midpoint(),
            zeta: q(9, 4) * &nu_star,
            nu: nu_star,
            q: qr.midpoint(),
        }
    });

    let (ladder, ladder_note) = match &chosen {
        Some(t) => match ladder_schedule(input, t) {
            Ok(s) => (Some(s), None),
            Err(e) => (None, Some(e.to_string())),
        },
        None => (None, Some("no feasible tuple".to_string())),
    };

    Ok(LedgerReport {
        mu: mu.clone(),
        tau: tau.clone(),
        gamma: gamma.clone(),
        gamma_prime: gamma_prime(mu, tau, gamma),
        shield_ratio: ratio,
        shield_ok: true,
        weak_condition_ok: weak_condition(mu, tau),
        eta_range: eta,
        beta_range: beta,
        delta_range: delta,
        xi_range: xi,
        nu_range: nu,
        q_range: qr,
        chosen,
        empty_intervals: empty,
        ladder,
        ladder_note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse_rational;

    fn p(s: &str) -> Q {
        parse_rational(s).unwrap()
    }

    #[test]
    fn shield_condition_examples() {
        assert!(check_shield_condition(&p("1"), &p("6")).unwrap());
        assert!(!check_shield_condition(&p("1"), &p("5.5")).unwrap());
        assert!(!check_shield_condition(&p("2"), &p("7.75")).unwrap());
        // Just past the boundary.
        assert!(check_shield_condition(&p("2"), &p("7.7500000000000000001")).unwrap());
    }

    #[test]
    fn shield_condition_domain() {
        assert!(check_shield_condition(&p("0"), &p("6")).is_err());
        assert!(check_shield_condition(&p("1"), &p("1")).is_err());
    }

    #[test]
    fn reference_intervals_mu1_tau6() {
        let input = LedgerInput::new(p("1"), p("6"));
        let r = compute_intervals(&input).unwrap();
        assert_eq!(r.gamma_prime, p("3/5"));
        assert_eq!(r.eta_range, OpenInterval::new(p("1/10"), p("7/15")));
        assert_eq!(r.nu_range, OpenInterval::new(p("19/10"), p("2")));
        assert_eq!(r.xi_range, OpenInterval::new(p("0"), p("1/4") - p("3/40")));
        assert!(r.empty_intervals.is_empty());
        assert!(r.feasible());
        let t = r.chosen.unwrap();
        for (name, range, value) in [
            ("eta", &r.eta_range, &t.eta),
            ("beta", &r.beta_range, &t.beta),
            ("delta", &r.delta_range, &t.delta),
            ("xi", &r.xi_range, &t.xi),
            ("nu", &r.nu_range, &t.nu),
            ("q", &r.q_range, &t.q),
        ] {
            assert!(range.contains(value), "{name} = {value} not inside {range}");
        }
        assert_eq!(t.zeta, p("9/4") * &t.nu);
        assert!(t.zeta > p("2") * &t.nu);
        assert_eq!(t.c, p("2") - &t.eta - &t.beta - p("1/5"));
        // vmax = 1 gives Intg(1) = 1.
        assert!(r.ladder.is_none());
        assert!(r.ladder_note.unwrap().contains("degenerate"));
    }

    #[test]
    fn infeasible_boundaries_are_rejected() {
        for (mu, tau) in [("1", "5.5"), ("2", "7.75"), ("1", "3")] {
            let err = compute_intervals(&LedgerInput::new(p(mu), p(tau))).unwrap_err();
            assert!(matches!(err, LedgerError::InfeasibleInput { .. }), "{mu},{tau}");
        }
    }

    #[test]
    fn weak_condition_is_reported() {
        // tau = 5.5 with mu = 1 satisfies the 7/4, 11/4 bound but not the 9/4, 13/4 one.
        assert!(weak_condition(&p("1"), &p("5.5")));
        assert!(!weak_condition(&p("1"), &p("4.5")));
        let r = compute_intervals(&LedgerInput::new(p("1"), p("6"))).unwrap();
        assert!(r.weak_condition_ok);
    }

    #[test]
    fn gamma_prime_takes_the_shield_ratio_when_larger() {
        let mut input = LedgerInput::new(p("1"), p("6"));
        input.gamma = p("1/10");
        let r = compute_intervals(&input).unwrap();
        assert_eq!(r.gamma_prime, p("2/5"));
        // 3 * 2/5 + 2 = 16/5 vs 12/5 vs 3/5.
        assert_eq!(r.nu_range.lo, p("8/5"));
    }

    #[test]
    fn json_carries_exact_endpoints() {
        let r = compute_intervals(&LedgerInput::new(p("1"), p("6"))).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["eta_range"]["lo"], "1/10");
        assert_eq!(v["eta_range"]["hi"], "7/15");
        assert_eq!(v["nu_range"]["lo"], "19/10");
        assert_eq!(v["shield_ok"], true);
    }
}
