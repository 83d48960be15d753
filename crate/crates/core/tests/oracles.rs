use std::collections::{BTreeMap, BTreeSet};

use egosocial_core::characterization::{characterize, CharacterizationParams, Scope};
use egosocial_core::clustering::{prototype_descriptor, ClusterSet};
use egosocial_core::features::{
    build_detection_series, dominant_expression, mean_expression, quantize_descriptor, EnvironmentReducer, Vocabulary,
};
use egosocial_core::generator::{generate_dataset, GeneratorConfig};
use egosocial_core::lstm::{lstm_forward, train, LstmParams, TrainConfig};
use egosocial_core::model::ViolationKind;
use egosocial_core::numerics::{fit_pca, fit_standardizer, Matrix};
use egosocial_core::training::{categorization_samples, detection_samples, fit_features};
use egosocial_core::{
    run_pipeline, select_social_events, validate_dataset, Category, Classifier, EventRecord, ExpressionVector,
    FaceObservation, FeatureMask, Frame, InteractionRecord, PipelineConfig, PrototypeId, Series,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix<f64> {
    let scales: Vec<f64> = (0..d).map(|j| 0.2 + 0.3 * j as f64).collect();
    Matrix::from_fn(n, d, |_, j| rng.random_range(-1.0..1.0) * scales[j])
}

fn face(track_id: u64, expr: [f64; 8], embedding: Option<Vec<f64>>) -> FaceObservation {
    FaceObservation {
        track_id,
        distance: 1.0 + track_id as f64,
        yaw: 10.0 * track_id as f64,
        pitch: -3.0,
        roll: 1.5,
        expression: ExpressionVector::new(expr).unwrap(),
        embedding,
    }
}

fn small_dataset(seed: u64) -> (Vec<EventRecord>, egosocial_core::io::GroundTruth) {
    let cfg = GeneratorConfig { seed, days: 3, events_per_day: 10, descriptor_dim: 32, ..GeneratorConfig::default() };
    generate_dataset(&cfg).unwrap()
}

#[test]
fn pca_matches_dense_eigendecomposition_when_dims_exceed_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rows = random_rows(&mut rng, 6, 15);
    let model = fit_pca(&rows, 1.0).unwrap();

    let data = nalgebra::DMatrix::from_fn(6, 15, |i, j| rows[(i, j)]);
    let mean = data.row_mean();
    let centered = nalgebra::DMatrix::from_fn(6, 15, |i, j| data[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered / 5.0;
    let eig = nalgebra::SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..15).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    assert!(model.n_components() <= 5);
    for (k, &idx) in order.iter().take(model.n_components()).enumerate() {
        assert!((model.explained_variance[k] - eig.eigenvalues[idx]).abs() < 1e-9);
        let v = eig.eigenvectors.column(idx);
        let dot: f64 = (0..15).map(|j| v[j] * model.components[(k, j)]).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-8, "component {k} misaligned: {dot}");
    }
}

#[test]
fn reconstruction_error_equals_residual_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rows = random_rows(&mut rng, 40, 8);
    let model = fit_pca(&rows, 0.8).unwrap();
    assert!(model.n_components() < 8);
    let mut err = 0.0;
    for r in rows.row_iter() {
        let back = model.reconstruct(&model.project(r).unwrap()).unwrap();
        err += r.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    err /= (rows.rows() - 1) as f64;
    assert!((err - model.residual_variance()).abs() < 1e-9 * model.total_variance);
}

#[test]
fn standardizer_matches_direct_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut rows = random_rows(&mut rng, 25, 4);
    for i in 0..25 {
        rows[(i, 2)] = 7.0;
    }
    let z = fit_standardizer(&rows);
    for j in 0..4 {
        let col = rows.column(j);
        let mean = col.iter().sum::<f64>() / 25.0;
        let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 25.0).sqrt();
        assert!((z.mean[j] - mean).abs() < 1e-12);
        for i in 0..25 {
            let expected = if std < 1e-8 { 0.0 } else { (rows[(i, j)] - mean) / std };
            assert!((z.apply(rows.row(i)).unwrap()[j] - expected).abs() < 1e-9);
        }
    }
}

#[test]
fn quantization_matches_full_sort() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let v = Vocabulary::new(64, 4096).unwrap();
    for _ in 0..5 {
        // coarse values force many magnitude ties
        let x: Vec<f64> = (0..4096).map(|_| rng.random_range(-20i32..=20) as f64 / 4.0).collect();
        let mut order: Vec<usize> = (0..4096).collect();
        order.sort_by(|&a, &b| x[b].abs().partial_cmp(&x[a].abs()).unwrap().then(a.cmp(&b)));
        let keep: BTreeSet<usize> = order[..64].iter().copied().collect();
        let expected: Vec<f64> = (0..4096).map(|i| if keep.contains(&i) { x[i] } else { 0.0 }).collect();
        assert_eq!(quantize_descriptor(&x, &v).unwrap(), expected);
    }
}

#[test]
fn mean_expression_matches_direct_average() {
    let a = [0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let b = [0.1, 0.2, 0.3, 0.1, 0.1, 0.1, 0.05, 0.05];
    let c = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
    let faces: Vec<ExpressionVector> = [a, b, c].iter().map(|p| ExpressionVector::new(*p).unwrap()).collect();
    let mean = mean_expression(&faces);
    for k in 0..8 {
        assert!((mean[k] - (a[k] + b[k] + c[k]) / 3.0).abs() < 1e-15);
    }
    assert_eq!(mean_expression(&[]), [0.125; 8]);
}

#[test]
fn detection_series_matches_per_frame_recomputation() {
    let (events, _) = small_dataset(11);
    let proto = events.iter().flat_map(|e| e.prototypes()).max_by_key(|p| p.len()).unwrap();
    let series: Series = build_detection_series(&proto, FeatureMask::Sid3).unwrap();
    assert_eq!(series.dim_labels(), ["distance", "yaw", "expression"]);
    assert_eq!(series.len(), proto.len());
    for (step, f) in series.steps().zip(proto.faces()) {
        assert_eq!(step, [f.distance, f.yaw, dominant_expression(&f.expression) as f64]);
    }
}

#[test]
fn categorization_series_matches_per_frame_recomputation() {
    let (events, _) = small_dataset(12);
    let vocab = Vocabulary::new(8, 32).unwrap();
    let env = EnvironmentReducer::<f64>::fit(&events, vocab, 0.9).unwrap();
    let event = events.iter().find(|e| e.frames.iter().filter(|f| f.faces.len() > 1).count() > 0).unwrap();
    let series = env.categorization_series(event, FeatureMask::Sic3).unwrap();
    let k = env.dim();
    assert_eq!(series.dim(), k + 8);
    for (step, frame) in series.steps().zip(&event.frames) {
        let q = quantize_descriptor(&frame.scene_descriptor, &vocab).unwrap();
        for c in 0..k {
            let z: f64 = (0..32).map(|j| (q[j] - env.pca.mean[j]) * env.pca.components[(c, j)]).sum();
            assert!((step[c] - z).abs() < 1e-10);
        }
        let n = frame.faces.len() as f64;
        for e in 0..8 {
            let expected =
                if frame.faces.is_empty() { 0.125 } else { frame.faces.iter().map(|f| f.expression.probs()[e]).sum::<f64>() / n };
            assert!((step[k + e] - expected).abs() < 1e-12);
        }
    }
    let narrow = env.categorization_series(event, FeatureMask::Sic1).unwrap();
    assert_eq!(narrow.dim(), k);
}

#[test]
fn validation_flags_minority_descriptor_dimension() {
    let make = |id: u64, dim: usize| EventRecord {
        event_id: id,
        day_index: 0,
        frames: vec![Frame { frame_index: 0, scene_descriptor: vec![0.1; dim], faces: vec![] }],
        label: None,
    };
    let events = vec![make(0, 4096), make(1, 4096), make(2, 35), make(3, 4096)];
    let report = validate_dataset(&events);
    let flagged: Vec<u64> = report
        .violations
        .iter()
        .filter(|v| v.kind == ViolationKind::DimensionMismatch)
        .map(|v| v.event_id)
        .collect();
    assert_eq!(flagged, [2]);
}

#[test]
fn selection_matches_counting_oracle() {
    let (events, _) = small_dataset(13);
    for threshold in [0.0, 0.25, 0.5, 0.9] {
        let expected: Vec<u64> = events
            .iter()
            .filter(|e| {
                let with_faces = e.frames.iter().filter(|f| !f.faces.is_empty()).count();
                !e.frames.is_empty() && with_faces as f64 >= threshold * e.frames.len() as f64
            })
            .map(|e| e.event_id)
            .collect();
        let got: Vec<u64> = select_social_events(&events, threshold).iter().map(|e| e.event_id).collect();
        assert_eq!(got, expected, "threshold {threshold}");
    }
}

#[test]
fn pipeline_matches_stagewise_oracle() {
    let (events, truth) = small_dataset(14);
    let features = fit_features::<f64>(&events, 8, 0.9).unwrap();
    let cfg = TrainConfig { hidden_dim: 4, epochs: 3, ..TrainConfig::default() };
    let det: Vec<(Series, u8)> =
        detection_samples(&events, &truth, FeatureMask::Sid2).unwrap().into_iter().map(|(_, s, y)| (s, y)).collect();
    let (detector, _) = Classifier::fit(&det, FeatureMask::Sid2, None, &cfg).unwrap();
    let cat: Vec<(Series, u8)> = categorization_samples(&events, &truth, &features.environment, FeatureMask::Sic3)
        .unwrap()
        .into_iter()
        .map(|(_, s, y)| (s, y))
        .collect();
    let (categorizer, _) = Classifier::fit(&cat, FeatureMask::Sic3, None, &cfg).unwrap();
    let config = PipelineConfig {
        detection_mask: FeatureMask::Sid2,
        detection_threshold: 0.4,
        ..PipelineConfig::default()
    };
    let got = run_pipeline(&events, &detector, &categorizer, &features.environment, &config).unwrap();

    let mut expected = Vec::new();
    for e in &events {
        let with_faces = e.frames.iter().filter(|f| !f.faces.is_empty()).count();
        if (with_faces as f64) < 0.25 * e.frames.len() as f64 {
            continue;
        }
        let series = features.environment.categorization_series(e, FeatureMask::Sic3).unwrap();
        let formal = categorizer.probability(&series).unwrap() >= 0.5;
        for p in e.prototypes() {
            let s = build_detection_series(&p, FeatureMask::Sid2).unwrap();
            if detector.probability(&s).unwrap() >= 0.4 {
                expected.push(InteractionRecord {
                    prototype_id: p.id,
                    event_id: e.event_id,
                    day_index: e.day_index,
                    category: Category::from_positive(formal),
                    frame_count: p.len(),
                    person_id: None,
                });
            }
        }
    }
    expected.sort_by_key(|r| r.prototype_id);
    assert!(!expected.is_empty());
    assert_eq!(got, expected);
}

#[test]
fn characterization_matches_filter_and_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let records: Vec<InteractionRecord> = (0..60)
        .map(|i| InteractionRecord {
            prototype_id: PrototypeId { event_id: i, track_id: i % 4 },
            event_id: i,
            day_index: rng.random_range(0..9),
            category: Category::from_positive(rng.random_bool(0.3)),
            frame_count: rng.random_range(1..40),
            person_id: None,
        })
        .collect();
    let mut groups: BTreeMap<u64, Vec<PrototypeId>> = BTreeMap::new();
    for r in &records {
        groups.entry(r.prototype_id.track_id).or_default().push(r.prototype_id);
    }
    let clusters = ClusterSet::from_clusters(groups.into_values().collect());
    let params = CharacterizationParams { dataset_days: 12, frame_period: 0.5 };

    let oracle = |selected: &[&InteractionRecord], days: usize| {
        let n = selected.len() as f64;
        let formal = selected.iter().filter(|r| r.category == Category::Formal).count() as f64;
        let informal = n - formal;
        let lengths: Vec<f64> = selected.iter().map(|r| r.frame_count as f64 * 0.5).collect();
        let mean = lengths.iter().sum::<f64>() / n;
        let sd = (lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        (formal / days as f64, informal / days as f64, formal / n, informal / n, mean, sd / n.sqrt())
    };
    let close = |r: &egosocial_core::Report, o: (f64, f64, f64, f64, f64, f64)| {
        let got = [r.f_formal, r.f_informal, r.a_formal, r.a_informal, r.duration_mean, r.duration_sem];
        let want = [o.0, o.1, o.2, o.3, o.4, o.5];
        got.iter().zip(want).all(|(g, w)| (g - w).abs() < 1e-12)
    };

    let generic = characterize::<f64>(&records, Some(&clusters), Scope::Generic, &params).unwrap();
    assert!(close(&generic, oracle(&records.iter().collect::<Vec<_>>(), 12)));
    for j in 0..clusters.len() {
        let selected: Vec<&InteractionRecord> =
            records.iter().filter(|r| clusters.clusters[j].contains(&r.prototype_id)).collect();
        let days = selected.iter().map(|r| r.day_index).collect::<BTreeSet<_>>().len();
        let person = characterize::<f64>(&records, Some(&clusters), Scope::Person(j), &params).unwrap();
        assert_eq!(person.n_days, days);
        assert!(close(&person, oracle(&selected, days)), "person {j}");
    }
}

#[test]
fn prototype_descriptor_is_normalized_mean_embedding() {
    let expr = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let event = EventRecord {
        event_id: 4,
        day_index: 0,
        frames: [[3.0, 0.0, 1.0], [1.0, 2.0, -1.0]]
            .iter()
            .enumerate()
            .map(|(i, e)| Frame {
                frame_index: i as u64,
                scene_descriptor: vec![0.0],
                faces: vec![face(2, expr, Some(e.to_vec()))],
            })
            .collect(),
        label: None,
    };
    let p = &event.prototypes()[0];
    let d = prototype_descriptor::<f64>(p).unwrap();
    let norm = (4.0f64 + 1.0 + 0.0).sqrt();
    assert!(d.iter().zip([2.0 / norm, 1.0 / norm, 0.0]).all(|(a, b)| (a - b).abs() < 1e-15));
}

#[test]
fn full_batch_loss_is_non_increasing_at_small_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let samples: Vec<(Series, u8)> = (0..16)
        .map(|i| {
            let label = (i % 2) as u8;
            let shift = if label == 1 { 0.5 } else { -0.5 };
            let rows: Vec<Vec<f64>> =
                (0..6).map(|_| (0..3).map(|_| shift + rng.random_range(-1.0..1.0)).collect()).collect();
            (Series::from_rows(&rows).unwrap(), label)
        })
        .collect();
    let cfg = TrainConfig {
        hidden_dim: 6,
        epochs: 30,
        learning_rate: 1e-3,
        lr_decay: 1.0,
        patience: None,
        validation_fraction: 0.0,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let (_, log) = train(&samples, &cfg).unwrap();
    let losses: Vec<f64> = log.epochs.iter().map(|e| e.train_loss).collect();
    eprintln!("full-batch losses: {losses:?}");
    assert!(losses.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(losses.last().unwrap() < losses.first().unwrap());
}

#[test]
fn repeated_frame_matches_iterated_cell_update() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let params = LstmParams::<f64>::init(2, 3, &mut rng);
    let x = [0.7, -1.2];
    let series = Series::from_rows(&[x; 5]).unwrap();
    let (p, _) = lstm_forward(&params, &series).unwrap();

    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    let (mut h, mut c) = (vec![0.0; 3], vec![0.0; 3]);
    for _ in 0..5 {
        let pre: Vec<f64> = (0..12)
            .map(|r| {
                params.bias[r]
                    + (0..2).map(|j| params.w_input[(r, j)] * x[j]).sum::<f64>()
                    + (0..3).map(|j| params.w_recurrent[(r, j)] * h[j]).sum::<f64>()
            })
            .collect();
        for k in 0..3 {
            c[k] = sig(pre[3 + k]) * c[k] + sig(pre[k]) * pre[6 + k].tanh();
        }
        h = (0..3).map(|k| sig(pre[9 + k]) * c[k].tanh()).collect();
    }
    let logit = params.b_out + (0..3).map(|k| params.w_out[k] * h[k]).sum::<f64>();
    assert!((p - sig(logit)).abs() < 1e-14);
}

#[test]
fn zero_recurrence_sees_only_last_frame_through_cell_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let mut params = LstmParams::<f64>::init(2, 2, &mut rng);
    params.w_recurrent = Matrix::zeros(8, 2);
    let rows = [[0.3, -0.4], [1.0, 0.2], [-0.6, 0.9]];
    let series = Series::from_rows(&rows).unwrap();
    let (_, cache) = lstm_forward(&params, &series).unwrap();

    // without recurrence every step's gates depend on that step's input alone
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    let mut c = [0.0; 2];
    for (t, x) in rows.iter().enumerate() {
        let pre = |r: usize| params.bias[r] + params.w_input[(r, 0)] * x[0] + params.w_input[(r, 1)] * x[1];
        for k in 0..2 {
            c[k] = sig(pre(2 + k)) * c[k] + sig(pre(k)) * pre(4 + k).tanh();
            assert!((cache.cells[t][k] - c[k]).abs() < 1e-14);
            assert!((cache.hidden[t][k] - sig(pre(6 + k)) * c[k].tanh()).abs() < 1e-14);
        }
    }
}

#[test]
fn generated_interaction_yaw_is_separated_by_gap() {
    let cfg = GeneratorConfig::default();
    let (events, truth) = generate_dataset(&cfg).unwrap();
    let (mut inter, mut other) = (Vec::new(), Vec::new());
    for p in events.iter().flat_map(|e| e.prototypes()) {
        let target = if truth.interacting(&p.id) == Some(true) { &mut inter } else { &mut other };
        target.extend(p.faces().map(|f| f.yaw.abs()));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let gap = mean(&other) - mean(&inter);
    assert!(gap >= cfg.yaw_gap, "class mean |yaw| gap {gap:.2} below {}", cfg.yaw_gap);
}
