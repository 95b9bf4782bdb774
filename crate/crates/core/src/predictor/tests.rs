use super::*;
use crate::error::Error;
use crate::rng;

fn small(bands: usize, seed: u64) -> PredictorConfig {
    PredictorConfig {
        bands,
        base_width: 8,
        depth: 2,
        time_embed_dim: 16,
        seed,
        schedule: ScheduleConfig::default(),
    }
}

fn random_cube(h: usize, w: usize, b: usize, seed: u64) -> HsiCube {
    HsiCube::standard_normal(h, w, b, &mut rng::seeded(seed)).unwrap()
}

/// Gives the zero-initialized output head random weights so gradients reach
/// every layer.
fn wake_output(p: &mut NoisePredictor, seed: u64) {
    let mut r = rng::seeded(seed);
    let n = p.parameters().len();
    for (i, values) in p.parameters_mut().enumerate() {
        if i + 2 >= n {
            values.iter_mut().for_each(|v| *v = r.random_range(-0.2..0.2));
        }
    }
}

fn mse(a: &HsiCube, b: &HsiCube) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (f64::from(*x) - f64::from(*y)).powi(2))
        .sum::<f64>()
        / a.len() as f64
}

#[test]
fn init_is_deterministic() {
    let a = NoisePredictor::new(small(4, 11)).unwrap();
    let b = NoisePredictor::new(small(4, 11)).unwrap();
    let c = NoisePredictor::new(small(4, 12)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn rejects_invalid_configs() {
    let bad = [
        PredictorConfig { bands: 0, ..small(1, 0) },
        PredictorConfig { depth: 0, ..small(1, 0) },
        PredictorConfig { base_width: 4, ..small(1, 0) },
        PredictorConfig { time_embed_dim: 15, ..small(1, 0) },
    ];
    for cfg in bad {
        assert!(matches!(NoisePredictor::new(cfg), Err(Error::Argument(_))));
    }
}

#[test]
fn spatial_divisibility_is_enforced() {
    let p = NoisePredictor::new(PredictorConfig { bands: 8, ..small(8, 0) }).unwrap();
    assert!(p.predict(&random_cube(32, 32, 8, 1), 10).is_ok());
    // 20 = 5·4, so a depth-2 model accepts it
    assert!(p.predict(&random_cube(20, 20, 8, 1), 10).is_ok());
    assert!(matches!(
        p.predict(&random_cube(18, 18, 8, 1), 10),
        Err(Error::Argument(_))
    ));
    assert!(matches!(
        p.predict(&random_cube(32, 32, 7, 1), 10),
        Err(Error::Argument(_))
    ));
    assert!(p.predict(&random_cube(32, 32, 8, 1), 0).is_err());
}

/// Counts parameters by walking the architecture level by level.
fn walk_parameter_count(cfg: &PredictorConfig) -> usize {
    let e = cfg.time_embed_dim;
    let conv = |i: usize, o: usize| o * i * 3 * 3 + o;
    let norm = |c: usize| 2 * c;
    let lin = |i: usize, o: usize| o * i + o;
    let block = |i: usize, o: usize| conv(i, o) + norm(o) + lin(e, o) + conv(o, o) + norm(o);
    let mut widths = vec![cfg.base_width];
    for _ in 0..cfg.depth {
        widths.push(widths.last().unwrap() * 2);
    }
    let mut total = lin(e, e) * 2;
    let mut prev = cfg.bands;
    for &w in &widths {
        total += block(prev, w);
        prev = w;
    }
    for l in (0..cfg.depth).rev() {
        total += block(prev + widths[l], widths[l]);
        prev = widths[l];
    }
    total + conv(prev, cfg.bands)
}

#[test]
fn parameter_count_matches_architecture_walk() {
    for cfg in [
        small(4, 0),
        PredictorConfig::default(),
        PredictorConfig { depth: 3, base_width: 12, bands: 5, ..small(5, 0) },
    ] {
        let p = NoisePredictor::new(cfg).unwrap();
        assert_eq!(p.parameter_count(), walk_parameter_count(&cfg));
        assert_eq!(cfg.parameter_count(), walk_parameter_count(&cfg));
    }
}

#[test]
fn time_embedding_properties() {
    for t in [1, 35, 999, 1000] {
        let e = time_embedding(t, 64, 1000).unwrap();
        assert_eq!(e.len(), 64);
        assert!(e.iter().all(|v| (-1.0..=1.0).contains(v)));
    }
    let zero = sinusoidal_embedding(0.0, 8);
    assert_eq!(zero, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    assert!(matches!(time_embedding(3, 7, 1000), Err(Error::Argument(_))));
    assert!(matches!(time_embedding(0, 8, 1000), Err(Error::Argument(_))));

    let all: Vec<Vec<f32>> = (1..=1000).map(|t| time_embedding(t, 64, 1000).unwrap()).collect();
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            assert_ne!(all[i], all[j], "steps {} and {} collide", i + 1, j + 1);
        }
    }
}

#[test]
fn untrained_model_predicts_zero() {
    let p = NoisePredictor::new(small(3, 5)).unwrap();
    let out = p.predict(&random_cube(16, 16, 3, 2), 100).unwrap();
    assert_eq!(out.shape(), (16, 16, 3));
    assert!(out.data().iter().all(|&v| v == 0.0));
}

#[test]
fn time_conditioning_is_live() {
    let mut p = NoisePredictor::new(small(3, 5)).unwrap();
    wake_output(&mut p, 1);
    let x = random_cube(16, 16, 3, 3);
    let a = p.predict(&x, 10).unwrap();
    let b = p.predict(&x, 600).unwrap();
    let diff = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f32, f32::max);
    assert!(diff > 0.0);
}

#[test]
fn outputs_stay_finite() {
    let mut p = NoisePredictor::new(small(2, 6)).unwrap();
    wake_output(&mut p, 2);
    let mut r = rng::seeded(4);
    for i in 0..100 {
        let t = r.random_range(1..=1000);
        let scale = r.random_range(0.0f32..20.0);
        let x = random_cube(8, 8, 2, 100 + i).map(|v| v * scale);
        let out = p.predict(&x, t).unwrap();
        assert!(out.data().iter().all(|v| v.is_finite()));
    }
}

/// Central differences of the loss against analytic gradients.
#[test]
fn gradients_match_finite_differences() {
    let mut p = NoisePredictor::new(small(4, 21)).unwrap();
    wake_output(&mut p, 22);
    let x = random_cube(8, 8, 4, 23);
    let target = random_cube(8, 8, 4, 24);
    let t = 250;
    let mut grads = p.zero_gradients();
    p.accumulate_mse_gradient(&x, t, &target, 1.0, &mut grads).unwrap();

    let names = ["down0.conv1.weight", "time.fc1.weight", "up0.norm2.gain", "down2.time.weight", "out.weight"];
    let mut r = rng::seeded(25);
    for name in names {
        let k = p.parameters().iter().position(|q| q.name == name).unwrap();
        // largest-gradient entry among a few random candidates, so the check
        // is not dominated by single-precision rounding
        let idx = (0..6)
            .map(|_| r.random_range(0..p.parameters()[k].values.len()))
            .max_by(|&a, &b| grads.0[k][a].abs().total_cmp(&grads.0[k][b].abs()))
            .unwrap();
        let h = 1e-3f32;
        let original = p.params[k].values[idx];
        p.params[k].values[idx] = original + h;
        let plus = mse(&p.predict(&x, t).unwrap(), &target);
        p.params[k].values[idx] = original - h;
        let minus = mse(&p.predict(&x, t).unwrap(), &target);
        p.params[k].values[idx] = original;
        let numeric = (plus - minus) / (2.0 * f64::from(h));
        let analytic = f64::from(grads.0[k][idx]);
        let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs());
        assert!(rel < 1e-2, "{name}[{idx}]: analytic {analytic}, numeric {numeric}");
    }
}

#[test]
fn transposition_commutes_with_symmetric_kernels() {
    let mut p = NoisePredictor::new(small(3, 31)).unwrap();
    wake_output(&mut p, 32);
    for param in p.params.iter_mut().filter(|q| q.dims.len() == 4) {
        for kernel in param.values.chunks_exact_mut(9) {
            for i in 0..3 {
                for j in i + 1..3 {
                    let avg = 0.5 * (kernel[i * 3 + j] + kernel[j * 3 + i]);
                    kernel[i * 3 + j] = avg;
                    kernel[j * 3 + i] = avg;
                }
            }
        }
    }
    let x = random_cube(16, 8, 3, 33);
    let a = p.predict(&x, 40).unwrap().transpose_spatial();
    let b = p.predict(&x.transpose_spatial(), 40).unwrap();
    for (u, v) in a.data().iter().zip(b.data()) {
        assert!((u - v).abs() < 1e-4, "{u} vs {v}");
    }
}

#[test]
fn weights_round_trip() {
    let mut p = NoisePredictor::new(small(3, 41)).unwrap();
    wake_output(&mut p, 42);
    let mut first = Vec::new();
    write_weights(&mut first, &p).unwrap();
    let q = read_weights(&mut first.as_slice()).unwrap();
    assert_eq!(p, q);
    let mut second = Vec::new();
    write_weights(&mut second, &q).unwrap();
    assert_eq!(first, second);

    let x = random_cube(8, 8, 3, 43);
    let (a, b) = (p.predict(&x, 7).unwrap(), q.predict(&x, 7).unwrap());
    assert!(a.data().iter().zip(b.data()).all(|(u, v)| u.to_bits() == v.to_bits()));
}

#[test]
fn corrupt_weight_files_are_rejected() {
    let p = NoisePredictor::new(small(2, 1)).unwrap();
    let mut bytes = Vec::new();
    write_weights(&mut bytes, &p).unwrap();

    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(read_weights(&mut bad.as_slice()), Err(Error::Format(_))));

    let mut truncated = bytes.clone();
    truncated.truncate(bytes.len() - 3);
    assert!(matches!(read_weights(&mut truncated.as_slice()), Err(Error::Format(_))));

    // config says 3 bands but the tensors were built for 2
    let mut swapped = bytes.clone();
    let at = bytes.windows(7).position(|w| w == b"bands=2").unwrap();
    swapped[at + 6] = b'3';
    assert!(matches!(read_weights(&mut swapped.as_slice()), Err(Error::Format(_))));
}

#[test]
fn files_on_disk_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = NoisePredictor::new(small(2, 3)).unwrap();
    let path = dir.path().join("w.tdfw");
    save_weights(&p, &path).unwrap();
    assert_eq!(load_weights(&path).unwrap(), p);
    assert!(matches!(load_weights(dir.path().join("nope")), Err(Error::Io { .. })));
}
