use serde::Serialize;

use crate::exact::{mu_ratio, ChosenTuple, LedgerInput};
use crate::number::{floor_u64, int, q, to_f64, Q};
use crate::LedgerError;

/// Geometric hierarchy of averaging windows `Delta_l = Delta_1 * G^(l-1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderSchedule {
    pub delta1: f64,
    pub g_factor: u64,
    pub lbar: u64,
    /// `Delta_1 ..= Delta_lbar`.
    pub schedule: Vec<f64>,
}

impl LadderSchedule {
    /// Builds `levels` windows by repeated multiplication, so that
    /// `schedule[l] == schedule[l - 1] * g_factor` holds bit for bit.
    pub fn geometric(delta1: f64, g_factor: u64, levels: u64) -> Self {
        let mut schedule = Vec::with_capacity(levels as usize);
        let mut d = delta1;
        for _ in 0..levels {
            schedule.push(d);
            d *= g_factor as f64;
        }
        Self {
            delta1,
            g_factor,
            lbar: levels,
            schedule,
        }
    }
}

/// Smallest positive integer `l` with `delta * (l - 1) > 2/3 + mu/(3(tau-1)) - c`.
pub fn lbar(mu: &Q, tau: &Q, delta: &Q, c: &Q) -> u64 {
    let target = q(2, 3) + mu_ratio(mu, tau) / int(3) - c;
    if target < int(0) {
        return 1;
    }
    // delta (l-1) > target  <=>  l - 1 > target/delta  <=>  l = floor(target/delta) + 2
    floor_u64(&(target / delta)).map_or(u64::MAX, |f| f.saturating_add(2))
}

/// First window length, growth factor and level count of the ladder.
///
/// `Delta_1 = 1 / (4 C6 V^(4/3 + mu/(3(tau-1)) + eta))` and `G = Intg(V^delta)`.
pub fn ladder_schedule(
    input: &LedgerInput,
    chosen: &ChosenTuple,
) -> Result<LadderSchedule, LedgerError> {
    if !(chosen.delta > int(0)) {
        return Err(LedgerError::Domain {
            name: "delta",
            reason: format!("need delta > 0, got {}", chosen.delta),
        });
    }
    let r = mu_ratio(&input.mu, &input.tau);
    let exponent = q(4, 3) + &r / int(3) + &chosen.eta;
    let delta1 = 1.0 / (4.0 * input.c6 * input.vmax.powf(to_f64(&exponent)));
    let g = input.vmax.powf(to_f64(&chosen.delta)).floor();
    let g_factor = if g.is_finite() && g >= 0.0 { g as u64 } else { 0 };
    if g_factor < 2 {
        return Err(LedgerError::DegenerateLadder { g_factor });
    }
    let levels = lbar(&input.mu, &input.tau, &chosen.delta, &chosen.c);
    Ok(LadderSchedule::geometric(delta1, g_factor, levels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::parse_rational;

    fn p(s: &str) -> Q {
        parse_rational(s).unwrap()
    }

    fn tuple(eta: &str, delta: &str, c: &str) -> ChosenTuple {
        ChosenTuple {
            eta: p(eta),
            beta: p("1.4"),
            c: p(c),
            delta: p(delta),
            xi: p("0.1"),
            nu: p("1.95"),
            zeta: p("4.3875"),
            q: p("7/12"),
        }
    }

    #[test]
    fn lbar_reference() {
        // 0.1 (l - 1) > 8/15  ->  l = 7
        assert_eq!(lbar(&p("1"), &p("6"), &p("0.1"), &p("0.2")), 7);
        // Exact boundary: target/delta integral must not satisfy the strict inequality.
        // target = 2/3 + 1/15 - c = 1/2 with c = 7/30; delta = 1/10 -> 5 exactly -> l = 7
        assert_eq!(lbar(&p("1"), &p("6"), &p("0.1"), &p("7/30")), 7);
        // negative target: l = 1
        assert_eq!(lbar(&p("1"), &p("6"), &p("0.1"), &p("1")), 1);
    }

    #[test]
    fn delta1_reference() {
        let mut input = LedgerInput::new(p("1"), p("6"));
        input.vmax = 10.0;
        let s = ladder_schedule(&input, &tuple("0.2", "0.5", "0.6")).unwrap();
        let expected = 10f64.powf(-1.6) / 4.0;
        assert!((s.delta1 - expected).abs() <= 1e-14 * expected);
        // Intg(10^0.5) = 3
        assert_eq!(s.g_factor, 3);
        for w in s.schedule.windows(2) {
            assert_eq!(w[1], w[0] * 3.0);
        }
        assert_eq!(s.schedule.len() as u64, s.lbar);
    }

    #[test]
    fn vmax_one_is_degenerate() {
        let input = LedgerInput::new(p("1"), p("6"));
        let err = ladder_schedule(&input, &tuple("0.2", "0.5", "0.6")).unwrap_err();
        assert_eq!(err, LedgerError::DegenerateLadder { g_factor: 1 });
    }
}
