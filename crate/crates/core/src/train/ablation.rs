//! Named training variants: loss-term ablations and the weight sensitivity grid.

use super::config::TrainConfig;
use crate::losses::LossTerm;

/// Factors applied to one default weight at a time.
pub const SENSITIVITY_FACTORS: [f64; 3] = [0.1, 1.0, 10.0];

/// A configuration with a short, file-name friendly label.
#[derive(Clone, Debug, PartialEq)]
pub struct Variant {
    pub name: String,
    pub config: TrainConfig,
}

/// The eight loss ablations: each term dropped in turn (`no_<term>`), then
/// each term alone (`only_<term>`). Everything else is taken from `base`.
pub fn loss_ablations(base: &TrainConfig) -> Vec<Variant> {
    let mut out = Vec::with_capacity(8);
    for t in LossTerm::ALL {
        let mut config = base.clone();
        for u in LossTerm::ALL {
            config.loss_weights.set_enabled(u, u != t);
        }
        out.push(Variant {
            name: format!("no_{t}"),
            config,
        });
    }
    for t in LossTerm::ALL {
        let mut config = base.clone();
        for u in LossTerm::ALL {
            config.loss_weights.set_enabled(u, u == t);
        }
        out.push(Variant {
            name: format!("only_{t}"),
            config,
        });
    }
    out
}

/// One weight at a time scaled by each of [`SENSITIVITY_FACTORS`] with all
/// terms enabled; 12 rows, the unscaled base appearing once per weight.
pub fn weight_sensitivity(base: &TrainConfig) -> Vec<Variant> {
    let mut out = Vec::with_capacity(12);
    for t in LossTerm::ALL {
        for f in SENSITIVITY_FACTORS {
            let mut config = base.clone();
            for u in LossTerm::ALL {
                config.loss_weights.set_enabled(u, true);
            }
            let w = &mut config.loss_weights;
            let slot = match t {
                LossTerm::Cyc => &mut w.cyc,
                LossTerm::Adv => &mut w.adv,
                LossTerm::Rec => &mut w.rec,
                LossTerm::Nrf => &mut w.nrf,
            };
            *slot *= f;
            out.push(Variant {
                name: format!("lambda_{t}_x{f}"),
                config,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ablations_cover_leave_one_out_and_single_terms() {
        let v = loss_ablations(&TrainConfig::default());
        assert_eq!(v.len(), 8);
        for (i, t) in LossTerm::ALL.into_iter().enumerate() {
            let drop = &v[i].config.loss_weights;
            let only = &v[4 + i].config.loss_weights;
            for u in LossTerm::ALL {
                assert_eq!(drop.enabled(u), u != t);
                assert_eq!(only.enabled(u), u == t);
            }
        }
        for x in &v {
            x.config.validate().unwrap();
        }
    }

    #[test]
    fn sensitivity_grid_scales_one_weight() {
        let base = TrainConfig::default();
        let v = weight_sensitivity(&base);
        assert_eq!(v.len(), 12);
        let lam = |c: &TrainConfig| LossTerm::ALL.map(|t| c.loss_weights.weight(t));
        let b = lam(&base);
        for (i, x) in v.iter().enumerate() {
            let got = lam(&x.config);
            let (term, factor) = (i / 3, SENSITIVITY_FACTORS[i % 3]);
            for k in 0..4 {
                let want = if k == term { b[k] * factor } else { b[k] };
                assert_eq!(got[k], want, "{}", x.name);
            }
        }
        assert_eq!(v[3].name, "lambda_adv_x0.1");
    }
}
