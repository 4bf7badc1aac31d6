//! Randomized property checks over the public surface: the front-end
//! nonlinearity, the transform, profile resolution, pilot structure, the
//! error metric, and the denoiser's resampling operators.

use chanest::airlink::{
    quantize_one_bit, PilotBook, SystemConfig, TapProfileSpec, REFERENCE_SAMPLE_RATE_HZ,
};
use chanest::bench::{nmse, nmse_linear, NMSE_FLOOR_DB};
use chanest::numerics::tensor::{upsample2x, upsample2x_adjoint};
use chanest::numerics::{derive_rng, Cx, DftPlan, Tensor};
use chanest::stage1::make_label;
use chanest::stage2::DipConfig;
use chanest::airlink::CxMat;
use proptest::prelude::*;

fn cx(re: f64, im: f64) -> Cx {
    Cx::new(re, im)
}

prop_compose! {
    fn arb_cx(mag: f64)(re in -1.0..1.0f64, im in -1.0..1.0f64) -> Cx {
        cx(re * mag, im * mag)
    }
}

proptest! {
    #[test]
    fn quantizer_alphabet_scale_and_idempotence(
        z in arb_cx(1e6),
        alpha in 1e-9..1e9f64,
    ) {
        let level = std::f64::consts::FRAC_1_SQRT_2;
        let q = quantize_one_bit(&[z]);
        prop_assert!(q[0].re.abs() == level && q[0].im.abs() == level);
        prop_assert_eq!(&quantize_one_bit(&[z * alpha]), &q);
        prop_assert_eq!(&quantize_one_bit(&q), &q);
    }

    #[test]
    fn transform_round_trips_and_preserves_energy(
        log_n in 2usize..7,
        seed in 0u64..1000,
    ) {
        let n = 1 << log_n;
        let plan = DftPlan::new(n);
        let mut rng = derive_rng(seed, "prop/dft");
        let v: Vec<Cx> = (0..n)
            .map(|_| {
                use rand::Rng;
                cx(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0))
            })
            .collect();
        let spectrum = plan.dft(&v).unwrap();
        let back = plan.idft(&spectrum).unwrap();
        for (a, b) in v.iter().zip(&back) {
            prop_assert!((a - b).norm() < 1e-10);
        }
        let e_in: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let e_out: f64 = spectrum.iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((e_in - e_out).abs() <= 1e-9 * e_in.max(1.0));
    }

    #[test]
    fn explicit_profiles_normalize_on_a_fixed_grid(
        taps in prop::collection::vec((0.0..420.0f64, -30.0..0.0f64), 1..6),
    ) {
        let spec = TapProfileSpec::Explicit {
            delays_ns: taps.iter().map(|t| t.0).collect(),
            powers_db: taps.iter().map(|t| t.1).collect(),
        };
        let system = |subcarriers: usize| SystemConfig {
            users: 1,
            antennas: 1,
            subcarriers,
            symbols_per_interval: 1,
            pilots_per_user: 1,
            snr_db: 5.0,
            seed: 0,
            tap_profile: spec.clone(),
            quantize: true,
        };
        // resolves identically at 16 and 64 subcarriers: the grid is the
        // reference sample rate, not the symbol length
        let a = system(16).resolve_taps().unwrap();
        let b = system(64).resolve_taps().unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (ta, tb) in a.iter().zip(&b) {
            prop_assert_eq!(ta.delay, tb.delay);
            prop_assert!((ta.power - tb.power).abs() < 1e-12);
        }
        let total: f64 = a.iter().map(|t| t.power).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        let period_ns = 1e9 / REFERENCE_SAMPLE_RATE_HZ;
        for tap in &a {
            prop_assert!((tap.delay as f64) < 420.0 / period_ns + 1.0);
        }
    }

    #[test]
    fn derotation_preserves_per_subcarrier_magnitude(
        res in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 8),
        phases in prop::collection::vec(0usize..4, 8),
    ) {
        let plan = DftPlan::new(8);
        let r: Vec<Cx> = res.iter().map(|&(a, b)| cx(a, b)).collect();
        let qpsk = [
            cx(std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2),
            cx(-std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2),
            cx(-std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2),
            cx(std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2),
        ];
        let x: Vec<Cx> = phases.iter().map(|&p| qpsk[p]).collect();
        let label = make_label(&plan, &r, &x).unwrap();
        let spectrum = plan.dft(&r).unwrap();
        for (l, s) in label.iter().zip(&spectrum) {
            prop_assert!((l.norm() - s.norm()).abs() < 1e-12 * s.norm().max(1.0));
        }
    }

    #[test]
    fn pilot_books_are_unit_modulus_with_exclusive_slots(
        users in 1usize..4,
        pilots in 1usize..4,
        seed in 0u64..500,
    ) {
        let cfg = SystemConfig {
            users,
            antennas: 1,
            subcarriers: 8,
            symbols_per_interval: users * pilots,
            pilots_per_user: pilots,
            snr_db: 5.0,
            seed,
            tap_profile: TapProfileSpec::Explicit {
                delays_ns: vec![0.0],
                powers_db: vec![0.0],
            },
            quantize: true,
        };
        let book = PilotBook::generate(&cfg, &mut derive_rng(seed, "prop/pilots")).unwrap();
        for user in 0..users {
            for pilot in 0..pilots {
                for z in book.symbol(user, pilot) {
                    prop_assert!((z.norm() - 1.0).abs() < 1e-12);
                }
                // slot assignment is a bijection: each slot owned by the
                // (user, pilot) that indexes it
                let slot = book.slot_index(user, pilot);
                prop_assert_eq!(book.slot_owner(slot), Some((user, pilot)));
            }
        }
    }

    #[test]
    fn training_inputs_are_scaled_signs_with_one_pair_per_pilot(
        pilots in 1usize..5,
        seed in 0u64..200,
    ) {
        use chanest::airlink::{bussgang_gain, sample_channel, transmit};
        use chanest::stage1::TrainingSet;
        let cfg = SystemConfig {
            users: 2,
            antennas: 2,
            subcarriers: 8,
            symbols_per_interval: 2 * pilots,
            pilots_per_user: pilots,
            snr_db: 5.0,
            seed,
            tap_profile: TapProfileSpec::Explicit {
                delays_ns: vec![0.0, 97.7],
                powers_db: vec![0.0, -3.0],
            },
            quantize: true,
        };
        let chan = sample_channel(&cfg, &mut derive_rng(seed, "prop/ts/c")).unwrap();
        let book = PilotBook::generate(&cfg, &mut derive_rng(seed, "prop/ts/p")).unwrap();
        let rx = transmit(&cfg, &chan, &book, &mut derive_rng(seed, "prop/ts/n")).unwrap();
        let level = std::f64::consts::FRAC_1_SQRT_2;
        for user in 0..cfg.users {
            for antenna in 0..cfg.antennas {
                let ts =
                    TrainingSet::from_interval(&rx, &book, user, antenna, bussgang_gain(&cfg))
                        .unwrap();
                prop_assert_eq!(ts.pair_count(), pilots);
                prop_assert_eq!(ts.subcarriers(), 8);
                for v in ts.inputs().data() {
                    prop_assert!(v.abs() == level, "input component {v} off the alphabet");
                }
            }
        }
    }

    #[test]
    fn error_metric_tracks_pure_scaling(
        scale in 0.1..3.0f64,
        seed in 0u64..500,
    ) {
        let mut rng = derive_rng(seed, "prop/nmse");
        let mut truth = CxMat::zeros(6, 2);
        for m in 0..2 {
            for z in truth.col_mut(m) {
                use rand::Rng;
                *z = cx(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        prop_assume!(truth.norm_sq() > 1e-6);
        prop_assert_eq!(nmse(&truth, &truth).unwrap(), NMSE_FLOOR_DB);
        let mut scaled = truth.clone();
        for m in 0..2 {
            for z in scaled.col_mut(m) {
                *z *= scale;
            }
        }
        let expected = (scale - 1.0) * (scale - 1.0);
        let got = nmse_linear(&scaled, &truth).unwrap();
        prop_assert!((got - expected).abs() < 1e-9 * expected.max(1e-12));
    }

    #[test]
    fn upsampling_and_its_adjoint_agree(
        rows in 1usize..5,
        freq in 1usize..5,
        time in 1usize..5,
        seed in 0u64..500,
    ) {
        use rand::Rng;
        let mut rng = derive_rng(seed, "prop/upsample");
        let x = Tensor::new(
            rows,
            freq * time,
            (0..rows * freq * time).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let y = Tensor::new(
            rows,
            4 * freq * time,
            (0..rows * 4 * freq * time).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let up = upsample2x(&x, freq, time).unwrap();
        let down = upsample2x_adjoint(&y, freq, time).unwrap();
        let lhs: f64 = up.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(down.data()).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
    }

    #[test]
    fn denoiser_seed_dims_double_per_upsampling_stage(
        z0 in 1usize..5,
        extra_doublings in 0usize..3,
        time_factor in 1usize..3,
    ) {
        let depth = extra_doublings + 2; // at least one upsampling stage
        let factor = 1usize << (depth - 1);
        let subcarriers = z0 * factor;
        let cfg = DipConfig {
            z0_channels: 4,
            hidden_widths: vec![4; depth],
            time_size: time_factor * factor,
            iterations: 1,
            lr: 0.01,
            seed: 0,
        };
        let (f0, t0) = cfg.z0_dims(subcarriers).unwrap();
        prop_assert_eq!(f0, z0);
        prop_assert_eq!(t0, time_factor);
        prop_assert_eq!(f0 << (depth - 1), subcarriers);
        // a symbol count the doubling chain cannot reach is rejected
        prop_assert!(cfg.z0_dims(subcarriers + 1).is_err());
    }
}

/// Normalization floor for the random-stack gradient checks. Larger than the
/// production value so the loss stays well conditioned for every draw: the
/// finite-difference truncation error grows like the inverse square of
/// `variance + eps`.
const GRAD_CHECK_NORM_EPS: f64 = 1e-2;

/// Loss of a dense bias+ReLU chain rebuilt from a flat parameter vector.
///
/// `shapes` alternates weight and bias shapes per layer. The smallest
/// `|pre-activation|` seen at any ReLU input is folded into `kink_margin`, so
/// callers can reject draws where a central difference would straddle the
/// kink and disagree with the exact one-sided derivative.
fn mlp_loss(
    shapes: &[(usize, usize)],
    p: &[f64],
    input: &Tensor,
    target: &Tensor,
    kink_margin: &mut f64,
) -> f64 {
    use chanest::numerics::tensor;
    let mut offset = 0;
    let mut mats = Vec::new();
    for &(r, c) in shapes {
        mats.push(Tensor::new(r, c, p[offset..offset + r * c].to_vec()).unwrap());
        offset += r * c;
    }
    let depth = mats.len() / 2;
    let mut x = input.clone();
    for i in 0..depth {
        let z = tensor::matmul(&mats[2 * i], &x).unwrap();
        let z = tensor::add_bias(&z, &mats[2 * i + 1]).unwrap();
        x = if i + 1 < depth {
            for v in z.data() {
                *kink_margin = kink_margin.min(v.abs());
            }
            tensor::relu(&z)
        } else {
            z
        };
    }
    // mean squared error: keeps the loss O(1) for every geometry so the
    // rounding noise of a single evaluation stays far below the gradient
    // comparison floor
    tensor::sum_squared_diff(&x, target).unwrap() / target.data().len() as f64
}

/// Loss of a generator-style stack (position-shared linear map, batch
/// normalization, ReLU, then x2 upsampling between layers) rebuilt from a
/// flat parameter vector. `shapes` holds kernel, scale, and shift shapes per
/// layer. Tracks the ReLU kink margin like [`mlp_loss`].
fn conv_stack_loss(
    shapes: &[(usize, usize)],
    p: &[f64],
    input: &Tensor,
    target: &Tensor,
    mut freq: usize,
    mut time: usize,
    kink_margin: &mut f64,
) -> f64 {
    use chanest::numerics::tensor;
    let mut offset = 0;
    let mut mats = Vec::new();
    for &(r, c) in shapes {
        mats.push(Tensor::new(r, c, p[offset..offset + r * c].to_vec()).unwrap());
        offset += r * c;
    }
    let depth = mats.len() / 3;
    let mut x = input.clone();
    for i in 0..depth {
        let z = tensor::matmul(&mats[3 * i], &x).unwrap();
        let z = tensor::batch_norm(&z, &mats[3 * i + 1], &mats[3 * i + 2], GRAD_CHECK_NORM_EPS)
            .unwrap();
        for v in z.data() {
            *kink_margin = kink_margin.min(v.abs());
        }
        let z = tensor::relu(&z);
        x = if i + 1 < depth {
            let up = tensor::upsample2x(&z, freq, time).unwrap();
            freq *= 2;
            time *= 2;
            up
        } else {
            z
        };
    }
    tensor::sum_squared_diff(&x, target).unwrap() / target.data().len() as f64
}

proptest! {
    // Two loss evaluations per parameter make these much heavier than the
    // structural properties above, so they run fewer cases.
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reverse_mode_matches_finite_differences_on_random_mlps(
        widths in prop::collection::vec(1usize..9, 1..4),
        input_width in 1usize..5,
        batch in 1usize..4,
        seed in 0u64..10_000,
    ) {
        use chanest::numerics::{finite_diff_grad, max_relative_error, Tape};
        use rand::Rng;
        let mut rng = derive_rng(seed, "prop/grad/mlp");
        let mut dims = vec![input_width];
        dims.extend(widths.iter().copied());
        let mut draw = |rows: usize, cols: usize| {
            Tensor::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
                .unwrap()
        };
        let layers: Vec<(Tensor, Tensor)> = (1..dims.len())
            .map(|i| (draw(dims[i], dims[i - 1]), draw(dims[i], 1)))
            .collect();
        let input = draw(dims[0], batch);
        let target = draw(*dims.last().unwrap(), batch);
        let mut flat: Vec<f64> = layers
            .iter()
            .flat_map(|(w, b)| w.data().iter().chain(b.data()).copied().collect::<Vec<_>>())
            .collect();
        let shapes: Vec<(usize, usize)> = layers
            .iter()
            .flat_map(|(w, b)| [(w.rows(), w.cols()), (b.rows(), b.cols())])
            .collect();

        let mut margin = f64::INFINITY;
        mlp_loss(&shapes, &flat, &input, &target, &mut margin);
        prop_assume!(margin > 1e-2);

        let mut tape = Tape::new();
        let x0 = tape.constant(input.clone());
        let mut nodes = Vec::new();
        let mut x = x0;
        for (i, (w, b)) in layers.iter().enumerate() {
            let wn = tape.param(format!("w{i}"), w.clone());
            let bn = tape.param(format!("b{i}"), b.clone());
            nodes.push(wn);
            nodes.push(bn);
            let z = tape.matmul(wn, x).unwrap();
            let z = tape.add_bias(z, bn).unwrap();
            x = if i + 1 < layers.len() { tape.relu(z) } else { z };
        }
        let t = tape.constant(target.clone());
        let sse = tape.sum_squared_diff(x, t).unwrap();
        let loss = tape.scale(sse, 1.0 / target.data().len() as f64);
        let grads = tape.backward(loss).unwrap();
        let mut ad = Vec::new();
        for n in &nodes {
            ad.extend_from_slice(grads.wrt(*n).data());
        }

        let fd = finite_diff_grad(
            &mut flat,
            |p| mlp_loss(&shapes, p, &input, &target, &mut f64::INFINITY),
            1e-5,
        );
        // the floor absorbs pure rounding noise on coordinates whose true
        // gradient is zero (dead units)
        let err = max_relative_error(&ad, &fd, 1e-4);
        prop_assert!(err < 1e-4, "worst relative gradient error {err:.3e}");
    }

    #[test]
    fn reverse_mode_matches_finite_differences_on_random_generator_stacks(
        channels in prop::collection::vec(1usize..4, 1..4),
        in_channels in 1usize..4,
        freq in 1usize..3,
        time in 2usize..4,
        seed in 0u64..10_000,
    ) {
        use chanest::numerics::{finite_diff_grad, max_relative_error, Tape};
        use rand::Rng;
        let mut rng = derive_rng(seed, "prop/grad/stack");
        let mut dims = vec![in_channels];
        dims.extend(channels.iter().copied());
        let mut draw = |rows: usize, cols: usize| {
            Tensor::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
                .unwrap()
        };
        let kernels: Vec<(Tensor, Tensor, Tensor)> = (1..dims.len())
            .map(|i| (draw(dims[i], dims[i - 1]), draw(dims[i], 1), draw(dims[i], 1)))
            .collect();
        let input = draw(dims[0], freq * time);
        let growth = 1usize << (kernels.len() - 1);
        let target = draw(*dims.last().unwrap(), freq * growth * time * growth);
        let mut flat: Vec<f64> = kernels
            .iter()
            .flat_map(|(k, s, h)| {
                k.data().iter().chain(s.data()).chain(h.data()).copied().collect::<Vec<_>>()
            })
            .collect();
        let shapes: Vec<(usize, usize)> = kernels
            .iter()
            .flat_map(|(k, s, h)| {
                [(k.rows(), k.cols()), (s.rows(), s.cols()), (h.rows(), h.cols())]
            })
            .collect();

        let mut margin = f64::INFINITY;
        conv_stack_loss(&shapes, &flat, &input, &target, freq, time, &mut margin);
        prop_assume!(margin > 1e-2);

        let mut tape = Tape::new();
        let x0 = tape.constant(input.clone());
        let mut nodes = Vec::new();
        let mut x = x0;
        let (mut f, mut t) = (freq, time);
        for (i, (k, scale, shift)) in kernels.iter().enumerate() {
            let kn = tape.param(format!("k{i}"), k.clone());
            let sn = tape.param(format!("s{i}"), scale.clone());
            let hn = tape.param(format!("h{i}"), shift.clone());
            nodes.extend([kn, sn, hn]);
            let z = tape.matmul(kn, x).unwrap();
            let z = tape.batch_norm(z, sn, hn, GRAD_CHECK_NORM_EPS).unwrap();
            let z = tape.relu(z);
            x = if i + 1 < kernels.len() {
                let up = tape.upsample2x(z, f, t).unwrap();
                f *= 2;
                t *= 2;
                up
            } else {
                z
            };
        }
        let tn = tape.constant(target.clone());
        let sse = tape.sum_squared_diff(x, tn).unwrap();
        let loss = tape.scale(sse, 1.0 / target.data().len() as f64);
        let grads = tape.backward(loss).unwrap();
        let mut ad = Vec::new();
        for n in &nodes {
            ad.extend_from_slice(grads.wrt(*n).data());
        }

        let fd = finite_diff_grad(
            &mut flat,
            |p| conv_stack_loss(&shapes, p, &input, &target, freq, time, &mut f64::INFINITY),
            1e-5,
        );
        let err = max_relative_error(&ad, &fd, 1e-4);
        prop_assert!(err < 1e-4, "worst relative gradient error {err:.3e}");
    }
}
