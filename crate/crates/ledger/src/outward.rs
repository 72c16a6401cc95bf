//! Outward-rounded interval arithmetic for float-valued inputs.
//!
//! Every operation widens its result by one ulp on each side, which encloses
//! the exact result of the same operation on the enclosed reals. Verdicts are
//! three-valued: a predicate is only reported `True` or `False` when the
//! enclosure decides it.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    fn widened(lo: f64, hi: f64) -> Self {
        Self {
            lo: lo.next_down(),
            hi: hi.next_up(),
        }
    }

    pub fn add(self, o: Self) -> Self {
        Self::widened(self.lo + o.lo, self.hi + o.hi)
    }

    pub fn sub(self, o: Self) -> Self {
        Self::widened(self.lo - o.hi, self.hi - o.lo)
    }

    pub fn mul(self, o: Self) -> Self {
        let c = [
            self.lo * o.lo,
            self.lo * o.hi,
            self.hi * o.lo,
            self.hi * o.hi,
        ];
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::widened(lo, hi)
    }

    /// Division by an interval that excludes zero; otherwise the whole line.
    pub fn div(self, o: Self) -> Self {
        if o.lo <= 0.0 && o.hi >= 0.0 {
            return Self {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
            };
        }
        let c = [
            self.lo / o.lo,
            self.lo / o.hi,
            self.hi / o.lo,
            self.hi / o.hi,
        ];
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::widened(lo, hi)
    }

    pub fn max(self, o: Self) -> Self {
        Self {
            lo: self.lo.max(o.lo),
            hi: self.hi.max(o.hi),
        }
    }

    /// Certainly `self < o`?
    pub fn lt(self, o: Self) -> Verdict {
        if self.hi < o.lo {
            Verdict::True
        } else if self.lo >= o.hi {
            Verdict::False
        } else {
            Verdict::Unknown
        }
    }
}

fn c(x: f64) -> Interval {
    Interval::point(x)
}

/// Exact `n/d` enclosed by outward rounding.
fn frac(n: f64, d: f64) -> Interval {
    c(n).div(c(d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    True,
    False,
    Unknown,
}

impl Verdict {
    pub fn and(self, o: Verdict) -> Verdict {
        match (self, o) {
            (Verdict::False, _) | (_, Verdict::False) => Verdict::False,
            (Verdict::True, Verdict::True) => Verdict::True,
            _ => Verdict::Unknown,
        }
    }

    pub fn is_true(self) -> bool {
        self == Verdict::True
    }
}

/// An open interval whose endpoints are themselves enclosures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnclosedRange {
    pub lo: Interval,
    pub hi: Interval,
}

impl EnclosedRange {
    /// Certainly nonempty only if the whole lower enclosure lies below the upper one.
    pub fn nonempty(&self) -> Verdict {
        self.lo.lt(self.hi)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FloatLedgerReport {
    pub shield: Verdict,
    pub eta_range: EnclosedRange,
    pub beta_range_at_eta_mid: EnclosedRange,
    pub xi_range: EnclosedRange,
    pub nu_range: EnclosedRange,
    /// `True` only when the shield condition and the nonemptiness of every
    /// interval are certain.
    pub feasible: Verdict,
}

/// Float-input counterpart of [`crate::compute_intervals`].
///
/// Returns `None` for non-finite inputs or inputs outside `mu > 0`,
/// `tau > 1`, `0 < gamma < 2/3`.
pub fn compute_intervals_f64(mu: f64, tau: f64, gamma: f64) -> Option<FloatLedgerReport> {
    if !(mu.is_finite() && tau.is_finite() && gamma.is_finite()) {
        return None;
    }
    if !(mu > 0.0 && tau > 1.0 && gamma > 0.0 && gamma < 2.0 / 3.0) {
        return None;
    }
    let (m, t, g) = (c(mu), c(tau), c(gamma));
    let tm1 = t.sub(c(1.0));
    let ratio = m.add(c(1.0)).div(tm1);
    let shield = ratio.lt(frac(4.0, 9.0));
    let r = m.div(tm1);

    let eta_range = EnclosedRange {
        lo: r.div(c(2.0)),
        hi: frac(2.0, 3.0).sub(r),
    };
    // Beta depends on eta; evaluate it at the eta midpoint, as the exact ledger does.
    let eta_mid = eta_range.lo.add(eta_range.hi).div(c(2.0));
    let beta_range_at_eta_mid = EnclosedRange {
        lo: frac(4.0, 3.0),
        hi: c(2.0).sub(eta_mid).sub(r),
    };
    let xi_range = EnclosedRange {
        lo: c(0.0),
        hi: frac(1.0, 4.0).sub(frac(3.0, 8.0).mul(r)),
    };
    let gp = g.max(ratio);
    let lower = c(3.0)
        .mul(gp)
        .add(c(2.0))
        .max(c(2.0).mul(t).div(tm1))
        .max(m.add(c(2.0)).div(tm1));
    let nu_range = EnclosedRange {
        lo: lower.div(c(2.0)),
        hi: c(2.0),
    };
    let feasible = shield
        .and(eta_range.nonempty())
        .and(beta_range_at_eta_mid.nonempty())
        .and(xi_range.nonempty())
        .and(nu_range.nonempty());
    Some(FloatLedgerReport {
        shield,
        eta_range,
        beta_range_at_eta_mid,
        xi_range,
        nu_range,
        feasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enclosures_contain_exact_values() {
        let third = frac(1.0, 3.0);
        assert!(third.lo < 1.0 / 3.0 && 1.0 / 3.0 < third.hi);
        let x = c(0.1).add(c(0.2));
        assert!(x.lo < 0.1 + 0.2 && 0.1 + 0.2 < x.hi);
    }

    #[test]
    fn boundary_cases_are_never_certainly_feasible() {
        // Exactly on the shield boundary: exact mode rejects, float mode must not accept.
        let r = compute_intervals_f64(1.0, 5.5, 0.6).unwrap();
        assert_ne!(r.shield, Verdict::True);
        assert_ne!(r.feasible, Verdict::True);
        let r = compute_intervals_f64(2.0, 7.75, 0.6).unwrap();
        assert_ne!(r.feasible, Verdict::True);
    }

    #[test]
    fn comfortable_case_is_certain() {
        let r = compute_intervals_f64(1.0, 6.0, 0.6).unwrap();
        assert_eq!(r.shield, Verdict::True);
        assert_eq!(r.feasible, Verdict::True);
        assert!(r.eta_range.lo.lo <= 0.1 && r.eta_range.lo.hi >= 0.1);
    }

    #[test]
    fn clearly_infeasible_is_false() {
        let r = compute_intervals_f64(1.0, 3.0, 0.6).unwrap();
        assert_eq!(r.shield, Verdict::False);
        assert_eq!(r.feasible, Verdict::False);
    }

    #[test]
    fn rejects_non_finite_and_out_of_domain() {
        assert!(compute_intervals_f64(f64::NAN, 6.0, 0.6).is_none());
        assert!(compute_intervals_f64(1.0, 1.0, 0.6).is_none());
        assert!(compute_intervals_f64(1.0, 6.0, 0.7).is_none());
    }
}
