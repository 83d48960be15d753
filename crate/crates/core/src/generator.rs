//! Seeded synthetic datasets with exact ground truth.
//!
//! Interacting prototypes face the wearer from close range with stable expressions.
//! Non-interacting prototypes stand further away and either look aside or, with
//! `glance_probability`, face the camera while looking down with a fluctuating
//! expression, so that distance and yaw alone do not separate the classes. Formal and
//! informal events draw their scenes from disjoint sets of places (up to
//! `venue_swap_probability`) and their interacting partners' expressions from different
//! mixes.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::GroundTruth;
use crate::model::{
    Category, EventRecord, ExpressionVector, FaceObservation, Frame, InteractionLabel, PrototypeId, N_EXPRESSIONS,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub days: usize,
    pub events_per_day: usize,
    /// Distinct identities the wearer meets.
    pub people: usize,
    pub min_prototypes: usize,
    pub max_prototypes: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    pub descriptor_dim: usize,
    pub embedding_dim: usize,
    pub places_per_category: usize,
    pub interaction_probability: f64,
    pub formal_probability: f64,
    /// Probability that an event shows nobody at all.
    pub empty_event_probability: f64,
    /// Probability that a tracked person is visible in a given frame.
    pub face_visibility: f64,
    pub glance_probability: f64,
    pub venue_swap_probability: f64,
    /// Per-component standard deviation of frame embeddings around the identity.
    pub embedding_noise: f64,
    /// Multiplier on every per-frame pose and distance noise scale.
    pub feature_noise: f64,
    pub scene_noise: f64,
    /// Minimum extra |yaw| (degrees) of people looking aside.
    pub yaw_gap: f64,
    /// Extra distance (meters) of non-interacting people.
    pub distance_gap: f64,
    /// Downward pitch (degrees) of people glancing at the camera.
    pub pitch_gap: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            days: 10,
            events_per_day: 20,
            people: 8,
            min_prototypes: 1,
            max_prototypes: 3,
            min_frames: 8,
            max_frames: 20,
            descriptor_dim: 128,
            embedding_dim: 16,
            places_per_category: 3,
            interaction_probability: 0.5,
            formal_probability: 0.4,
            empty_event_probability: 0.1,
            face_visibility: 0.85,
            glance_probability: 0.35,
            venue_swap_probability: 0.03,
            embedding_noise: 0.05,
            feature_noise: 1.0,
            scene_noise: 0.3,
            yaw_gap: 30.0,
            distance_gap: 0.8,
            pitch_gap: 20.0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("interaction_probability", self.interaction_probability),
            ("formal_probability", self.formal_probability),
            ("empty_event_probability", self.empty_event_probability),
            ("face_visibility", self.face_visibility),
            ("glance_probability", self.glance_probability),
            ("venue_swap_probability", self.venue_swap_probability),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("{name} = {p} outside [0, 1]")));
            }
        }
        let counts = [
            ("days", self.days),
            ("events_per_day", self.events_per_day),
            ("people", self.people),
            ("min_prototypes", self.min_prototypes),
            ("min_frames", self.min_frames),
            ("descriptor_dim", self.descriptor_dim),
            ("embedding_dim", self.embedding_dim),
            ("places_per_category", self.places_per_category),
        ];
        for (name, c) in counts {
            if c == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
            }
        }
        if self.max_prototypes < self.min_prototypes || self.max_frames < self.min_frames {
            return Err(Error::InvalidArgument("maximum counts must not be below minimum counts".into()));
        }
        let scales = [self.embedding_noise, self.feature_noise, self.scene_noise, self.yaw_gap, self.distance_gap, self.pitch_gap];
        if scales.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidArgument("noise scales and gaps must be finite and non-negative".into()));
        }
        Ok(())
    }
}

fn normal(rng: &mut ChaCha8Rng, mean: f64, std: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    mean + std * z
}

fn softmax(logits: &[f64; N_EXPRESSIONS]) -> [f64; N_EXPRESSIONS] {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; N_EXPRESSIONS];
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += *o;
    }
    for o in &mut out {
        *o /= sum;
    }
    out
}

/// 1-based expression index drawn from `weights` (indices 1..=len).
fn draw_expression(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i + 1;
        }
        u -= w;
    }
    weights.len()
}

fn expression_probs(rng: &mut ChaCha8Rng, dominant: usize) -> ExpressionVector {
    let mut logits = [0.0; N_EXPRESSIONS];
    for l in &mut logits {
        *l = normal(rng, 0.0, 0.5);
    }
    logits[dominant - 1] += 3.0;
    ExpressionVector::ingest(softmax(&logits))
}

const FORMAL_PARTNER_EXPRESSIONS: [f64; 3] = [0.80, 0.10, 0.10];
const INFORMAL_PARTNER_EXPRESSIONS: [f64; 3] = [0.15, 0.75, 0.10];
const FORMAL_BYSTANDER_EXPRESSIONS: [f64; N_EXPRESSIONS] = [0.5, 0.1, 0.1, 0.1, 0.1, 0.04, 0.03, 0.03];
const INFORMAL_BYSTANDER_EXPRESSIONS: [f64; N_EXPRESSIONS] = [0.25, 0.35, 0.1, 0.1, 0.08, 0.04, 0.04, 0.04];

struct PersonPlan {
    track_id: u64,
    identity: usize,
    interacting: bool,
    glancing: bool,
    base_distance: f64,
    yaw_mean: f64,
    pitch_mean: f64,
    roll_mean: f64,
    dominant: usize,
}

/// Generates a dataset and its ground truth. Output depends only on `cfg`.
pub fn generate_dataset(cfg: &GeneratorConfig) -> Result<(Vec<EventRecord>, GroundTruth)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let identities: Vec<Vec<f64>> = (0..cfg.people)
        .map(|_| {
            let v: Vec<f64> = (0..cfg.embedding_dim).map(|_| normal(&mut rng, 0.0, 1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();

    let active = (cfg.descriptor_dim / 8).clamp(1, 24);
    let make_place = |rng: &mut ChaCha8Rng| {
        let mut place = vec![0.0; cfg.descriptor_dim];
        for i in sample(rng, cfg.descriptor_dim, active.min(cfg.descriptor_dim)) {
            place[i] = rng.random_range(1.0..3.0);
        }
        place
    };
    let formal_places: Vec<Vec<f64>> = (0..cfg.places_per_category).map(|_| make_place(&mut rng)).collect();
    let informal_places: Vec<Vec<f64>> = (0..cfg.places_per_category).map(|_| make_place(&mut rng)).collect();

    let noise = cfg.feature_noise;
    let scene = Normal::new(0.0, cfg.scene_noise.max(f64::MIN_POSITIVE)).expect("valid scene noise");
    let mut events = Vec::with_capacity(cfg.days * cfg.events_per_day);
    let mut truth = GroundTruth::default();
    let mut next_frame = 0u64;

    for day in 0..cfg.days {
        for _ in 0..cfg.events_per_day {
            let event_id = events.len() as u64;
            let category = if rng.random::<f64>() < cfg.formal_probability { Category::Formal } else { Category::Informal };
            truth.events.insert(event_id, category);

            let swap = rng.random::<f64>() < cfg.venue_swap_probability;
            let places = match (category, swap) {
                (Category::Formal, false) | (Category::Informal, true) => &formal_places,
                _ => &informal_places,
            };
            let place = &places[rng.random_range(0..places.len())];
            let bystander_mix = match category {
                Category::Formal => &FORMAL_BYSTANDER_EXPRESSIONS,
                Category::Informal => &INFORMAL_BYSTANDER_EXPRESSIONS,
            };

            let n_frames = rng.random_range(cfg.min_frames..=cfg.max_frames);
            let n_people = if rng.random::<f64>() < cfg.empty_event_probability {
                0
            } else {
                rng.random_range(cfg.min_prototypes..=cfg.max_prototypes).min(cfg.people)
            };
            let chosen = sample(&mut rng, cfg.people, n_people).into_vec();
            let plans: Vec<PersonPlan> = chosen
                .into_iter()
                .enumerate()
                .map(|(k, identity)| {
                    let interacting = rng.random::<f64>() < cfg.interaction_probability;
                    let glancing = !interacting && rng.random::<f64>() < cfg.glance_probability;
                    let base_distance = rng.random_range(0.8..2.0)
                        + if interacting { 0.0 } else { cfg.distance_gap * rng.random_range(0.3..1.5) };
                    let yaw_mean = if interacting || glancing {
                        normal(&mut rng, 0.0, 10.0)
                    } else {
                        let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        side * (2.0 * cfg.yaw_gap + rng.random_range(0.0..=cfg.yaw_gap))
                    };
                    let pitch_mean = if glancing {
                        -(cfg.pitch_gap + rng.random_range(0.0..=10.0))
                    } else {
                        normal(&mut rng, 0.0, 6.0)
                    };
                    let dominant = if interacting {
                        let mix = match category {
                            Category::Formal => &FORMAL_PARTNER_EXPRESSIONS,
                            Category::Informal => &INFORMAL_PARTNER_EXPRESSIONS,
                        };
                        draw_expression(&mut rng, mix)
                    } else {
                        draw_expression(&mut rng, bystander_mix)
                    };
                    PersonPlan {
                        track_id: k as u64 + 1,
                        identity,
                        interacting,
                        glancing,
                        base_distance,
                        yaw_mean,
                        pitch_mean,
                        roll_mean: normal(&mut rng, 0.0, 5.0),
                        dominant,
                    }
                })
                .collect();

            let mut visible: Vec<Vec<bool>> = plans
                .iter()
                .map(|_| (0..n_frames).map(|_| rng.random::<f64>() < cfg.face_visibility).collect())
                .collect();
            for v in &mut visible {
                if !v.iter().any(|&b| b) {
                    v[0] = true;
                }
            }

            let mut frames = Vec::with_capacity(n_frames);
            for t in 0..n_frames {
                let gain = rng.random_range(0.7..1.3);
                let scene_descriptor: Vec<f64> =
                    place.iter().map(|&p| (p * gain + scene.sample(&mut rng)).max(0.0)).collect();
                let mut faces = Vec::new();
                for (plan, vis) in plans.iter().zip(&visible) {
                    if !vis[t] {
                        continue;
                    }
                    let dominant = if plan.interacting {
                        if rng.random::<f64>() < 0.85 { plan.dominant } else { draw_expression(&mut rng, bystander_mix) }
                    } else if plan.glancing || rng.random::<f64>() < 0.5 {
                        draw_expression(&mut rng, bystander_mix)
                    } else {
                        plan.dominant
                    };
                    let embedding = identities[plan.identity]
                        .iter()
                        .map(|&x| normal(&mut rng, x, cfg.embedding_noise))
                        .collect();
                    faces.push(FaceObservation {
                        track_id: plan.track_id,
                        distance: normal(&mut rng, plan.base_distance, 0.25 * noise).max(0.1),
                        yaw: normal(&mut rng, plan.yaw_mean, 10.0 * noise).clamp(-180.0, 180.0),
                        pitch: normal(&mut rng, plan.pitch_mean, 5.0 * noise).clamp(-90.0, 90.0),
                        roll: normal(&mut rng, plan.roll_mean, 5.0 * noise).clamp(-180.0, 180.0),
                        expression: expression_probs(&mut rng, dominant),
                        embedding: Some(embedding),
                    });
                }
                frames.push(Frame { frame_index: next_frame, scene_descriptor, faces });
                next_frame += 1;
            }

            for plan in &plans {
                let id = PrototypeId { event_id, track_id: plan.track_id };
                truth.prototypes.insert(id, InteractionLabel::from_positive(plan.interacting));
                truth.identities.insert(id, plan.identity);
            }
            events.push(EventRecord { event_id, day_index: day as u32, frames, label: None });
        }
    }
    Ok((events, truth))
}
