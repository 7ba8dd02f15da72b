//! Localization-strategy ablation on seeded adjacency scenes.
//!
//! Each run localizes a query with one strategy, detects grasps on the ROI
//! and classifies the top-1 grasp against the rendered scene:
//! `wrong_target` when its center is more than 1 cm outside every primitive
//! of the queried part, `collision` when the gripper intersects the cloud of
//! the whole frame, `success` otherwise. A failed detection is `no_grasp`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::IoError;
use crate::grasp::{collision_check, detect_grasps, GraspConfig, GraspRecord};
use crate::localization::{back_project, locate_with, GroundTruthSegmenter, Strategy, StructuringElement};
use crate::query::TargetQuery;
use crate::scalar::Real;
use crate::scene::catalog::{desk_camera, place, table, wall, Kind};
use crate::scene::{render, SceneDescription, SceneObject};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    WrongTarget,
    Collision,
    NoGrasp,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::WrongTarget => "wrong_target",
            Outcome::Collision => "collision",
            Outcome::NoGrasp => "no_grasp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationScene<T: Real> {
    pub id: String,
    #[serde(bound = "T: Real")]
    pub scene: SceneDescription<T>,
    pub queries: Vec<TargetQuery>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub scene_id: String,
    pub strategy: Strategy,
    pub target: TargetQuery,
    pub outcome: Outcome,
    /// Whether the top-1 grasp intersects the full scene cloud; `None` without a grasp.
    pub top1_collides: Option<bool>,
    pub top1: Option<GraspRecord>,
    pub candidates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub runs: usize,
    pub success: usize,
    pub wrong_target: usize,
    pub collision: usize,
    pub no_grasp: usize,
    pub success_rate: f64,
    pub wrong_target_rate: f64,
    /// Fraction of runs with a top-1 grasp whose top-1 intersects the scene.
    pub scene_collision_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub seed: u64,
    pub results: Vec<AblationResult>,
    pub summary: BTreeMap<String, StrategySummary>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AblationConfig<T: Real> {
    pub grasp: GraspConfig<T>,
    /// Dilation element; the resolution default when `None`.
    pub element: Option<StructuringElement>,
    /// Inflation of the target part when judging the top-1 center (meters).
    pub target_margin: T,
}

impl<T: Real> AblationConfig<T> {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            grasp: GraspConfig::with_seed(seed),
            element: None,
            target_margin: T::lit(0.01),
        }
    }
}

/// Runs every (scene, query, strategy) triple in suite order.
pub fn run_ablation<T: Real>(
    suite: &[AblationScene<T>],
    strategies: &[Strategy],
    config: &AblationConfig<T>,
) -> Result<AblationReport, crate::scene::SceneError> {
    let mut results = Vec::new();
    for s in suite {
        let frame = render(&s.scene)?;
        let element = config
            .element
            .unwrap_or_else(|| StructuringElement::default_for_width(frame.width()));
        let full = back_project(&frame.depth, &frame.intrinsics);
        let primitives = s.scene.placed_primitives();
        // the global ROI ignores the query, so its detection is shared
        let mut global = None;
        for query in &s.queries {
            let labels = frame.label_index.matching(query);
            for &strategy in strategies {
                let detect = || {
                    locate_with(&frame, query, &GroundTruthSegmenter, &element, strategy)
                        .ok()
                        .and_then(|loc| detect_grasps(&loc.roi, &config.grasp).ok())
                };
                let detected = if strategy == Strategy::Global {
                    global.get_or_insert_with(detect).clone()
                } else {
                    detect()
                };
                let result = match detected {
                    None => AblationResult {
                        scene_id: s.id.clone(),
                        strategy,
                        target: query.clone(),
                        outcome: Outcome::NoGrasp,
                        top1_collides: None,
                        top1: None,
                        candidates: 0,
                    },
                    Some(set) => {
                        let top = *set.top().expect("detect_grasps returns at least one candidate");
                        let on_target = primitives
                            .iter()
                            .filter(|p| labels.contains(&p.label))
                            .any(|p| p.signed_distance(&top.translation) <= config.target_margin);
                        let collides = collision_check(&top, full.points(), &config.grasp.gripper);
                        let outcome = if !on_target {
                            Outcome::WrongTarget
                        } else if collides {
                            Outcome::Collision
                        } else {
                            Outcome::Success
                        };
                        AblationResult {
                            scene_id: s.id.clone(),
                            strategy,
                            target: query.clone(),
                            outcome,
                            top1_collides: Some(collides),
                            top1: Some(GraspRecord::from_pose(&top)),
                            candidates: set.candidates.len(),
                        }
                    }
                };
                log::info!("{} {} {}: {}", s.id, query, strategy.as_str(), result.outcome.as_str());
                results.push(result);
            }
        }
    }
    let summary = strategies
        .iter()
        .map(|&st| (st.as_str().to_string(), summarize(results.iter().filter(|r| r.strategy == st))))
        .collect();
    Ok(AblationReport {
        seed: config.grasp.seed,
        results,
        summary,
    })
}

fn summarize<'a>(runs: impl Iterator<Item = &'a AblationResult>) -> StrategySummary {
    let mut s = StrategySummary {
        runs: 0,
        success: 0,
        wrong_target: 0,
        collision: 0,
        no_grasp: 0,
        success_rate: 0.0,
        wrong_target_rate: 0.0,
        scene_collision_rate: 0.0,
    };
    let (mut with_top, mut colliding) = (0usize, 0usize);
    for r in runs {
        s.runs += 1;
        match r.outcome {
            Outcome::Success => s.success += 1,
            Outcome::WrongTarget => s.wrong_target += 1,
            Outcome::Collision => s.collision += 1,
            Outcome::NoGrasp => s.no_grasp += 1,
        }
        if let Some(c) = r.top1_collides {
            with_top += 1;
            colliding += usize::from(c);
        }
    }
    let rate = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    s.success_rate = rate(s.success, s.runs);
    s.wrong_target_rate = rate(s.wrong_target, s.runs);
    s.scene_collision_rate = rate(colliding, with_top);
    s
}

impl AblationReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<12} {:>5} {:>8} {:>13} {:>10} {:>9} {:>10}",
            "strategy", "runs", "success", "wrong_target", "collision", "no_grasp", "scene_coll"
        );
        for (name, m) in &self.summary {
            let _ = writeln!(
                s,
                "{:<12} {:>5} {:>8} {:>13} {:>10} {:>9} {:>9.0}%",
                name,
                m.runs,
                format!("{}/{}", m.success, m.runs),
                m.wrong_target,
                m.collision,
                m.no_grasp,
                100.0 * m.scene_collision_rate
            );
        }
        s
    }
}

const WALL_Y: f64 = 0.3;
const DISTRACTORS: [Kind; 9] = Kind::ALL;

/// Parts targeted in the suite, with the kind's clearance from the wall
/// when the object is pushed against it at yaw 0.
const TARGETS: [(Kind, &str, f64); 7] = [
    (Kind::Mug, "body", 0.04),
    (Kind::Cup, "body", 0.035),
    (Kind::Bottle, "body", 0.03),
    (Kind::Ball, "body", 0.03),
    (Kind::Hammer, "head", 0.05),
    (Kind::Screwdriver, "handle", 0.014),
    (Kind::Pen, "body", 0.0075),
];

/// Seeded suite of `n` scenes. Each scene holds five objects on a table in
/// front of a wall: the first query's object touches the wall, the second
/// query's object stands free, the rest are distractors.
pub fn generate_suite(seed: u64, n: usize) -> Vec<AblationScene<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| loop {
            if let Some(s) = generate_scene(&mut rng, i, seed) {
                break s;
            }
        })
        .collect()
}

/// One scene, or `None` when the random layout could not be packed.
fn generate_scene(rng: &mut ChaCha8Rng, i: usize, seed: u64) -> Option<AblationScene<f64>> {
    let (wall_kind, wall_part, clearance) = TARGETS[i % TARGETS.len()];
    let mut objects: Vec<SceneObject<f64>> = Vec::new();
    let mut taken: Vec<(f64, f64, f64)> = Vec::new();
    let mut used = vec![wall_kind];

    let gap = rng.random_range(0.0..0.003);
    let x = rng.random_range(-0.15..0.15);
    let yaw = if rng.random_bool(0.5) { 0.0 } else { std::f64::consts::PI };
    objects.push(place(wall_kind, wall_kind.name(), x, WALL_Y - clearance - gap, yaw));
    taken.push((x, WALL_Y - wall_kind.footprint(), wall_kind.footprint()));

    let free = loop {
        let (k, p, _) = TARGETS[rng.random_range(0..TARGETS.len())];
        if !used.contains(&k) {
            break (k, p);
        }
    };
    used.push(free.0);
    let mut queries = vec![TargetQuery::part(wall_kind.name(), wall_part), TargetQuery::part(free.0.name(), free.1)];

    let mut pending = vec![free.0];
    while pending.len() < 4 {
        let k = DISTRACTORS[rng.random_range(0..DISTRACTORS.len())];
        if !used.contains(&k) {
            used.push(k);
            pending.push(k);
        }
    }
    for k in pending {
        let r = k.footprint();
        let (x, y) = (0..200)
            .map(|_| (rng.random_range(-0.25..0.25), rng.random_range(-0.14..0.2)))
            .find(|&(x, y): &(f64, f64)| taken.iter().all(|&(tx, ty, tr)| (x - tx).hypot(y - ty) > r + tr + 0.01))?;
        let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        taken.push((x, y, k.footprint()));
        objects.push(place(k, k.name(), x, y, yaw));
    }
    queries.dedup();
    Some(AblationScene {
        id: format!("scene_{i:02}"),
        scene: SceneDescription {
            camera: desk_camera(),
            objects,
            background: vec![table(0.6, 0.5), wall(WALL_Y, 0.6, 0.4)],
            seed: seed.wrapping_add(i as u64),
        },
        queries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    seed: u64,
    scenes: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ManifestEntry {
    id: String,
    file: String,
    queries: Vec<TargetQuery>,
}

/// Writes `manifest.json` and one scene file per entry.
pub fn save_suite<T: Real>(dir: impl AsRef<Path>, seed: u64, suite: &[AblationScene<T>]) -> Result<(), IoError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut scenes = Vec::new();
    for s in suite {
        let file = format!("{}.json", s.id);
        std::fs::write(dir.join(&file), serde_json::to_string_pretty(&s.scene)?)?;
        scenes.push(ManifestEntry {
            id: s.id.clone(),
            file,
            queries: s.queries.clone(),
        });
    }
    let manifest = Manifest { seed, scenes };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Loads a suite written by [`save_suite`]; returns the generation seed too.
pub fn load_suite<T: Real>(dir: impl AsRef<Path>) -> Result<(u64, Vec<AblationScene<T>>), IoError> {
    let dir = dir.as_ref();
    let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
    let scenes = manifest
        .scenes
        .into_iter()
        .map(|e| {
            let scene: SceneDescription<T> = serde_json::from_str(&std::fs::read_to_string(dir.join(&e.file))?)?;
            Ok(AblationScene {
                id: e.id,
                scene,
                queries: e.queries,
            })
        })
        .collect::<Result<Vec<_>, IoError>>()?;
    Ok((manifest.seed, scenes))
}
