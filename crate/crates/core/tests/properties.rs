//! Property tests for the library invariants.

use proptest::prelude::*;

use delayed_claims::closedform::{
    debt_value, equity_value, guarantee_value, risk_premium, terms,
};
use delayed_claims::model::{DebtContract, HistoryPath, MarketParams, VolSpec};
use delayed_claims::normal::std_normal_cdf;
use delayed_claims::sdde::vol_integral;

fn vol_spec_strategy() -> impl Strategy<Value = VolSpec> {
    prop_oneof![
        (0.01f64..2.0).prop_map(|sigma| VolSpec::Constant { sigma }),
        (-0.5f64..0.5, -0.01f64..0.01, 0.01f64..0.5)
            .prop_map(|(a, b, floor)| VolSpec::AffineClamped { a, b, floor }),
        (
            proptest::collection::vec(0.01f64..2.0, 2..6),
            0.01f64..0.3
        )
            .prop_map(|(gs, floor)| {
                let v_points = (0..gs.len()).map(|i| 10.0 * (i + 1) as f64).collect();
                VolSpec::Table {
                    v_points,
                    g_values: gs,
                    floor,
                }
            }),
    ]
}

proptest! {
    #[test]
    fn phi_symmetry_and_monotonicity(x in -8.0f64..8.0, y in -8.0f64..8.0) {
        let px = std_normal_cdf(x).unwrap();
        let nx = std_normal_cdf(-x).unwrap();
        prop_assert!((px + nx - 1.0).abs() < 1e-14);
        let py = std_normal_cdf(y).unwrap();
        if x <= y {
            prop_assert!(px <= py);
        } else {
            prop_assert!(py <= px);
        }
    }

    #[test]
    fn vol_eval_never_below_floor(spec in vol_spec_strategy(), v in 1e-6f64..1e6) {
        prop_assume!(spec.validate().is_ok());
        let g = spec.eval(v).unwrap();
        prop_assert!(g >= spec.floor());
        prop_assert!(g > 0.0);
    }

    #[test]
    fn path_lookup_stays_between_neighbor_nodes(
        start in 1.0f64..100.0,
        step in 0.1f64..5.0,
        n in 3usize..40,
        frac in 0.0f64..1.0,
    ) {
        // monotone increasing sample sequence
        let values: Vec<f64> = (0..n).map(|i| start + i as f64 * step).collect();
        let path = HistoryPath::new(0.0, 0.25, values.clone()).unwrap();
        let t = frac * 0.25 * (n - 1) as f64;
        let got = path.value_at(t).unwrap();
        let i = ((t / 0.25).floor() as usize).min(n - 2);
        prop_assert!(got >= values[i] - 1e-12 && got <= values[i + 1] + 1e-12);
    }

    #[test]
    fn closed_form_parities_and_bounds(
        v in 1.0f64..1e3,
        b in 1.0f64..1e3,
        r in 0.0f64..0.2,
        tau in 0.01f64..1.0,
        i in 1e-6f64..4.0,
    ) {
        let c = DebtContract { face: b, maturity: tau };
        let mkt = MarketParams { r };
        let equity = equity_value(v, &c, &mkt, 0.0, i).unwrap().value;
        let debt = debt_value(v, &c, &mkt, 0.0, i).unwrap().value;
        let guarantee = guarantee_value(v, &c, &mkt, 0.0, i).unwrap().value;
        let riskless = b * (-r * tau).exp();

        prop_assert!((equity + debt - v).abs() <= 1e-12 * v);
        prop_assert!((guarantee + debt - riskless).abs() <= 1e-12 * riskless.max(v));
        prop_assert!(debt > 0.0);
        prop_assert!(debt <= v.min(riskless) * (1.0 + 1e-12));
        prop_assert!(equity >= (v - riskless).max(0.0) - 1e-12 * v);
        prop_assert!(equity <= v * (1.0 + 1e-12));
        prop_assert!(guarantee >= -1e-12 * riskless);
    }

    #[test]
    fn premium_reprices_debt(
        v in 1.0f64..1e3,
        b in 1.0f64..1e3,
        r in 0.0f64..0.2,
        tau in 0.01f64..1.0,
        i in 1e-4f64..4.0,
    ) {
        let c = DebtContract { face: b, maturity: tau };
        let mkt = MarketParams { r };
        let tm = terms(v, &c, &mkt, 0.0, i).unwrap();
        let spread = risk_premium(&tm).unwrap();
        prop_assert!(spread >= 0.0);
        let debt = debt_value(v, &c, &mkt, 0.0, i).unwrap().value;
        let implied = b * (-(r + spread) * tau).exp();
        prop_assert!(
            (implied - debt).abs() <= 1e-12 * debt.abs().max(implied.abs()),
            "implied {implied} vs debt {debt}"
        );
    }

    #[test]
    fn vol_integral_additive_at_grid_nodes(
        level in 10.0f64..500.0,
        slope in -0.2f64..0.2,
        cut in 1usize..19,
    ) {
        let values: Vec<f64> = (0..21)
            .map(|k| level * (1.0 + slope * k as f64 / 20.0).max(0.1))
            .collect();
        let path = HistoryPath::new(-1.0, 0.05, values).unwrap();
        let vol = VolSpec::AffineClamped { a: 0.1, b: 1e-3, floor: 0.01 };
        let mid = cut as f64 * 0.05; // grid node in (0, 1)
        let full = vol_integral(&path, &vol, 1.0, 0.0, 1.0).unwrap();
        let left = vol_integral(&path, &vol, 1.0, 0.0, mid).unwrap();
        let right = vol_integral(&path, &vol, 1.0, mid, 1.0).unwrap();
        prop_assert!((left + right - full).abs() <= 1e-12 * full.max(1e-3));
    }
}
