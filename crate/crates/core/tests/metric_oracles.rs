mod common;

use common::Planes;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ucgan::metrics::{self, default_pan_lr, IDEAL};

const TOL: f64 = 1e-9;
const INSTANCES_PER_SIZE: usize = 30;

fn close(name: &str, got: f64, want: f64) {
    assert!((got - want).abs() <= TOL * want.abs().max(1.0), "{name}: library {got} vs oracle {want}");
}

/// Reference, fused, LR MS, PAN and degraded PAN for one random instance.
struct Instance {
    reference: Planes,
    fused: Planes,
    lrms: Planes,
    pan: Planes,
    pan_lr: Planes,
}

fn instance(side: usize, rng: &mut ChaCha8Rng) -> Instance {
    let reference = common::random_planes(4, side, side, 100.0, 1000.0, rng);
    let fused = common::perturb(&reference, 40.0, rng);
    let lrms = common::random_planes(4, side / 4, side / 4, 100.0, 1000.0, rng);
    let pan = common::random_planes(1, side, side, 100.0, 1000.0, rng);
    let pan_lr = common::random_planes(1, side / 4, side / 4, 100.0, 1000.0, rng);
    Instance {
        reference,
        fused,
        lrms,
        pan,
        pan_lr,
    }
}

fn each_instance(seed: u64, mut f: impl FnMut(&Instance)) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut n = 0;
    for side in [32, 64] {
        for _ in 0..INSTANCES_PER_SIZE {
            f(&instance(side, &mut rng));
            n += 1;
        }
    }
    assert!(n >= 50);
}

#[test]
fn reference_metrics_match_oracles() {
    each_instance(11, |i| {
        let (r, f) = (common::tensor(&i.reference), common::tensor(&i.fused));
        close("sam", metrics::sam(&r, &f).unwrap(), common::sam_deg(&i.reference, &i.fused));
        close("ergas", metrics::ergas(&r, &f, 0.25).unwrap(), common::ergas(&i.reference, &i.fused, 0.25));
        close("ssim", metrics::ssim(&r, &f, 2047.0).unwrap(), common::ssim(&i.reference, &i.fused, 2047.0));
    });
}

#[test]
fn q_index_matches_oracle_for_several_blocks() {
    each_instance(12, |i| {
        let side = i.reference[0].len();
        let (r, f) = (common::tensor(&i.reference), common::tensor(&i.fused));
        for block in [8, 16, side] {
            let per_band: f64 = (0..4).map(|b| common::q_index(&i.reference[b], &i.fused[b], block)).sum::<f64>() / 4.0;
            close("q_index", metrics::q_index(&r, &f, block).unwrap(), per_band);
        }
    });
}

#[test]
fn distortion_indices_match_oracles() {
    each_instance(13, |i| {
        let (f, m) = (common::tensor(&i.fused), common::tensor(&i.lrms));
        let (p, plr) = (common::tensor(&i.pan), common::tensor(&i.pan_lr));
        close("d_lambda", metrics::d_lambda(&f, &m).unwrap(), common::d_lambda(&i.fused, &i.lrms));
        close("d_s", metrics::d_s(&f, &m, &p, Some(&plr)).unwrap(), common::d_s(&i.fused, &i.lrms, &i.pan, &i.pan_lr));
        let q = metrics::qnr(&f, &m, &p, Some(&plr)).unwrap();
        close("qnr", q.qnr, common::qnr(&i.fused, &i.lrms, &i.pan, &i.pan_lr));
        close("qnr product", q.qnr, (1.0 - q.d_lambda) * (1.0 - q.d_s));
    });
}

#[test]
fn default_degraded_pan_is_what_ds_uses() {
    each_instance(14, |i| {
        let (f, m, p) = (common::tensor(&i.fused), common::tensor(&i.lrms), common::tensor(&i.pan));
        let plr = common::planes(&default_pan_lr(&p).unwrap(), 0);
        close("d_s", metrics::d_s(&f, &m, &p, None).unwrap(), common::d_s(&i.fused, &i.lrms, &i.pan, &plr));
    });
}

#[test]
fn ideal_values_are_exact() {
    each_instance(15, |i| {
        let r = common::tensor(&i.reference);
        assert_eq!(metrics::sam(&r, &r).unwrap(), 0.0);
        assert_eq!(metrics::ergas(&r, &r, 0.25).unwrap(), 0.0);
        assert_eq!(metrics::ssim(&r, &r, 2047.0).unwrap(), 1.0);
        // Dλ = 0 when the fused image has the inter-band relations of the MS,
        // Ds = 0 when its relation to PAN is that of the MS to degraded PAN.
        let p = common::tensor(&i.pan);
        let q = metrics::qnr(&r, &r, &p, Some(&p)).unwrap();
        assert_eq!((q.d_lambda, q.d_s, q.qnr), (0.0, 0.0, 1.0));
    });
    assert_eq!(
        (IDEAL.d_lambda, IDEAL.d_s, IDEAL.qnr, IDEAL.sam_deg, IDEAL.ergas, IDEAL.ssim),
        (0.0, 0.0, 1.0, 0.0, 0.0, 1.0)
    );
}
