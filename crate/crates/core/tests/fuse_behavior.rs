//! End-to-end behavior of the fusion driver: the identity fixed point,
//! determinism, range safety, and a straight-line single-iteration trace on
//! a 2x2 instance.

use bayesfusion::em::{fuse, EmState, FusionParams};
use bayesfusion::numerics::{gradient, GradientKernels};
use bayesfusion::plane::{ImagePlane, IntensityScale};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> ImagePlane<f64> {
    let data: Vec<f64> = (0..h * w).map(|_| rng.random_range(0.0..=1.0)).collect();
    ImagePlane::from_vec(h, w, data).unwrap()
}

#[test]
fn fusing_an_image_with_itself_returns_it_bit_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let params = FusionParams::<f64>::default();
    for (h, w) in [(8, 8), (16, 12), (33, 47), (64, 64)] {
        let v = random_image(&mut rng, h, w);
        let out = fuse(&v, &v, &params).unwrap();
        for (a, b) in out.iter().zip(v.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn fuse_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let u = random_image(&mut rng, 24, 17);
    let v = random_image(&mut rng, 24, 17);
    let params = FusionParams::<f64>::default();
    let once = fuse(&u, &v, &params).unwrap();
    let twice = fuse(&u, &v, &params).unwrap();
    for (a, b) in once.iter().zip(twice.iter()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn fused_output_is_always_in_range_and_finite() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let params = FusionParams::<f64>::default();
    for _ in 0..5 {
        let u = random_image(&mut rng, 16, 16);
        let v = random_image(&mut rng, 16, 16);
        let out = fuse(&u, &v, &params).unwrap();
        assert!(out.within(0.0, 1.0));
        assert!(out.iter().all(|x| x.is_finite()));
    }
}

/// Straight-line transcription of one outer iteration (one inner sweep) on
/// the 2x2 instance u = [[1,0],[0,0]], v = 0. Every step below is spelled
/// out with scalar arithmetic and a dense linear solve; no library code from
/// the implementation under test is reused.
#[test]
fn single_iteration_trace_matches_hand_execution() {
    let u = ImagePlane::from_vec(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    let v = ImagePlane::<f64>::zeros(2, 2).unwrap();
    let params = FusionParams::<f64> {
        t_out: 1,
        t_in: 1,
        ..FusionParams::default()
    };

    // --- transcription ---
    // y = u - v; w1 = w2 = 1; h = f = x = 0; lambda = tau = 1.
    let y = [1.0, 0.0, 0.0, 0.0];
    let (lambda_g, rho) = (0.5, 0.001);

    // M-step, sweep 1.
    // x update: x = (2*1*y + rho*0) / (2*1 + 2*1 + rho).
    let x: Vec<f64> = y.iter().map(|&yv| 2.0 * yv / (4.0 + rho)).collect();
    // f update: threshold lambda_g/rho applied to grad(h) = 0 stays 0.
    let f = [0.0f64; 8];
    assert!(lambda_g / rho > 0.0);
    // h update: (I + Dx^T Dx + Dy^T Dy) h = x + Dx^T fx + Dy^T fy with f = 0.
    let (dx, dy) = {
        let mut dx = DMatrix::<f64>::zeros(4, 4);
        let mut dy = DMatrix::<f64>::zeros(4, 4);
        for i in 0..2usize {
            for j in 0..2usize {
                let r = i * 2 + j;
                dx[(r, i * 2 + (j + 1) % 2)] += 1.0;
                dx[(r, r)] -= 1.0;
                dy[(r, ((i + 1) % 2) * 2 + j)] += 1.0;
                dy[(r, r)] -= 1.0;
            }
        }
        (dx, dy)
    };
    let system = DMatrix::identity(4, 4) + dx.transpose() * &dx + dy.transpose() * &dy;
    let h_traced = system
        .lu()
        .solve(&DVector::from_vec(x.clone()))
        .expect("positive definite");

    // E-step: alpha = max(sqrt(2 (y-x)^2 / 1), eps), beta likewise with x;
    // neither feeds back into the output because the loop ends here.
    let alpha: Vec<f64> = y
        .iter()
        .zip(x.iter())
        .map(|(&yv, &xv)| (2.0 * (yv - xv) * (yv - xv)).sqrt().max(params.eps))
        .collect();

    // Output: i = x + v, clamped to [0, 1].
    let expected: Vec<f64> = x.iter().map(|&xv| xv.clamp(0.0, 1.0)).collect();

    // --- implementation under test ---
    let fused = fuse(&u, &v, &params).unwrap();
    for (got, want) in fused.iter().zip(expected.iter()) {
        assert!(
            (got - want).abs() <= 1e-10,
            "fused output {got} differs from trace {want}"
        );
    }
    // The single nonzero pixel is 2/4.001.
    assert!((fused[(0, 0)] - 2.0 / 4.001).abs() <= 1e-10);
    assert_eq!(fused[(1, 1)], 0.0);

    // Re-run the same iteration through the state API and compare the
    // intermediate quantities against the trace as well.
    let y_plane = ImagePlane::from_vec(2, 2, y.to_vec()).unwrap();
    let kernels = GradientKernels::for_shape(2, 2).unwrap();
    let mut state = EmState::init(&y_plane).unwrap();
    state.m_step(&y_plane, &kernels, &params).unwrap();
    for idx in 0..4 {
        assert!((state.x.as_slice()[idx] - x[idx]).abs() <= 1e-12);
        assert!((state.h.as_slice()[idx] - h_traced[idx]).abs() <= 1e-10);
        assert_eq!(state.f.dx.as_slice()[idx], f[idx]);
        assert_eq!(state.f.dy.as_slice()[idx], f[idx + 4]);
    }
    state.e_step(&y_plane, &params).unwrap();
    for (got, want) in state.alpha.iter().zip(alpha.iter()) {
        assert!((got - want).abs() <= 1e-12);
    }
    // The f surrogate stayed at zero: grad(h) never clears the threshold.
    let g = gradient(&state.h);
    assert!(g.dx.iter().all(|&d| d.abs() < lambda_g / rho));

    // Byte-scale run of the same instance scales the fixed point identically.
    let byte_params = FusionParams {
        scale: IntensityScale::Byte,
        ..params
    };
    let u_byte = u.map(|p| p * 255.0);
    let v_byte = v.clone();
    let fused_byte = fuse(&u_byte, &v_byte, &byte_params).unwrap();
    assert!((fused_byte[(0, 0)] - 255.0 * 2.0 / 4.001).abs() <= 1e-8);
}

#[test]
fn more_outer_iterations_pull_the_fusion_toward_the_infrared_target() {
    // On a pair whose only difference is a bright block in the infrared
    // image, the fused image must keep that block visible.
    let mut u = ImagePlane::<f64>::zeros(16, 16).unwrap();
    for i in 4..8 {
        for j in 4..8 {
            u[(i, j)] = 1.0;
        }
    }
    let v = ImagePlane::<f64>::zeros(16, 16).unwrap();
    let fused = fuse(&u, &v, &FusionParams::default()).unwrap();
    assert!(fused[(5, 5)] > 0.3, "hot target lost: {}", fused[(5, 5)]);
    assert!(
        fused[(5, 5)] > fused[(12, 12)] + 0.25,
        "target/background contrast collapsed: {} vs {}",
        fused[(5, 5)],
        fused[(12, 12)]
    );
}
