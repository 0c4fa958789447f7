use std::f64::consts::PI;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::engine::{AgentId, AgentMessage, FrameBundle};
use crate::geometry::{DetectionSet, FovRegion, OrientedBox};
use crate::rng::{substream, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    /// Confident false boxes injected inside the ego's field of view.
    FpFlood,
    /// True objects inside the ego's field of view erased from the output.
    FnSuppress,
    /// Both, at reduced strength each.
    Mixed,
    /// Every in-view object nudged and rotated; small severities stay near epsilon.
    Subtle,
}

/// `severity` scales the attack's output-space effect; 0 means benign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub kind: AttackKind,
    pub severity: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self { kind: AttackKind::FpFlood, severity: 1.0 }
    }
}

/// False boxes per unit severity for a pure flood, counted over an area the
/// size of the ego disc; mixed attacks use two thirds. The flood covers the
/// whole world at this density.
pub const FLOOD_BOXES_PER_SEVERITY: f64 = 20.0;
/// Minimum distance between two injected boxes.
pub const FLOOD_SPACING: f64 = 3.0;
/// Fraction of in-view objects erased per unit severity (pure suppression).
pub const SUPPRESS_FRACTION_PER_SEVERITY: f64 = 0.6;
/// Displacement in meters per unit severity for the subtle attack.
pub const SUBTLE_SHIFT_PER_SEVERITY: f64 = 1.5;
pub const SUBTLE_YAW_PER_SEVERITY: f64 = 0.3;

/// Scene parameters. Lengths in meters; the world is the square
/// `[-extent/2, extent/2]^2` with the ego at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub team_size: u32,
    pub attacker_count: u32,
    pub object_count: u32,
    pub world_extent: f64,
    pub ego_fov_radius: f64,
    pub teammate_fov_radius: f64,
    pub benign_position_noise_sigma: f64,
    pub benign_yaw_noise_sigma: f64,
    pub benign_miss_rate: f64,
    pub min_separation: f64,
    pub motion_step_sigma: f64,
    pub attack: AttackConfig,
    pub frames: u32,
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            team_size: 5,
            attacker_count: 1,
            object_count: 20,
            world_extent: 80.0,
            ego_fov_radius: 35.0,
            teammate_fov_radius: 30.0,
            benign_position_noise_sigma: 0.1,
            benign_yaw_noise_sigma: 0.02,
            benign_miss_rate: 0.02,
            min_separation: 6.0,
            motion_step_sigma: 0.1,
            attack: AttackConfig::default(),
            frames: 100,
            rng_seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.team_size == 0 {
            return bad("team_size must be positive".into());
        }
        if self.attacker_count > self.team_size {
            return bad(format!("attacker_count {} > team_size {}", self.attacker_count, self.team_size));
        }
        if self.frames == 0 {
            return bad("frames must be positive".into());
        }
        for (name, v) in [
            ("world_extent", self.world_extent),
            ("ego_fov_radius", self.ego_fov_radius),
            ("teammate_fov_radius", self.teammate_fov_radius),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("benign_position_noise_sigma", self.benign_position_noise_sigma),
            ("benign_yaw_noise_sigma", self.benign_yaw_noise_sigma),
            ("min_separation", self.min_separation),
            ("motion_step_sigma", self.motion_step_sigma),
            ("attack.severity", self.attack.severity),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.benign_miss_rate) {
            return bad(format!("benign_miss_rate {} not in [0, 1)", self.benign_miss_rate));
        }
        Ok(())
    }

    pub fn ego_fov(&self) -> FovRegion {
        FovRegion { center_x: 0.0, center_y: 0.0, radius: self.ego_fov_radius }
    }

    pub fn attacker_ratio(&self) -> f64 {
        self.attacker_count as f64 / self.team_size as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Ego,
    Benign,
    Attacker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentInfo {
    pub agent_id: AgentId,
    pub x: f64,
    pub y: f64,
    pub fov_radius: f64,
    /// Hidden from the defense; for evaluation only.
    pub role: Role,
}

impl AgentInfo {
    fn sees(&self, b: &OrientedBox) -> bool {
        b.center_within(self.x, self.y, self.fov_radius)
    }
}

/// Ground truth of one frame plus what each agent can see.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimWorldFrame {
    pub frame_id: u64,
    pub ground_truth: DetectionSet,
    /// `visible[i]` indexes `ground_truth.boxes` for agent `i` (ego first).
    pub visible: Vec<Vec<usize>>,
}

/// Where an attacker nudges an in-view object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Displacement {
    pub x: f64,
    pub y: f64,
    pub dx: f64,
    pub dy: f64,
    pub dyaw: f64,
}

/// Output-space effect an adversarial message has on any fusion it joins.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AttackEffect {
    pub injected: Vec<OrientedBox>,
    /// Fused boxes centred within [`SUPPRESS_RADIUS`] of these points vanish.
    pub suppress: Vec<(f64, f64)>,
    pub displace: Vec<Displacement>,
}

/// Radius in meters of the suppression and displacement footprints.
pub const SUPPRESS_RADIUS: f64 = 2.0;

impl AttackEffect {
    pub fn is_empty(&self) -> bool {
        self.injected.is_empty() && self.suppress.is_empty() && self.displace.is_empty()
    }
}

/// What an agent shares: its honest noisy detections and, for attackers,
/// the adversarial effect riding on them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimPayload {
    pub frame_id: u64,
    pub detections: Vec<OrientedBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackEffect>,
}

pub type SimMessage = AgentMessage<SimPayload>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub config: ScenarioConfig,
    /// Ego first, then teammates `1..=S`.
    pub agents: Vec<AgentInfo>,
    pub frames: Vec<SimWorldFrame>,
}

fn far_from(x: f64, y: f64, others: &[(f64, f64)], min_dist: f64) -> bool {
    others.iter().all(|&(ox, oy)| (x - ox).hypot(y - oy) >= min_dist)
}

const PLACEMENT_ATTEMPTS: usize = 10_000;

/// Builds a seeded scene: agent layout, attacker identities, object tracks.
pub fn generate_scene(cfg: &ScenarioConfig) -> Result<Scene, SimError> {
    cfg.validate()?;
    let mut layout = substream(cfg.rng_seed, &[tag::LAYOUT]);
    let half = 0.5 * cfg.world_extent;

    let attackers: Vec<usize> = index::sample(&mut layout, cfg.team_size as usize, cfg.attacker_count as usize).into_vec();
    let mut agents = vec![AgentInfo { agent_id: 0, x: 0.0, y: 0.0, fov_radius: cfg.ego_fov_radius, role: Role::Ego }];
    for i in 0..cfg.team_size as usize {
        let angle = 2.0 * PI * i as f64 / cfg.team_size as f64 + layout.random_range(-0.3..0.3);
        let radius = half * layout.random_range(0.5..0.75);
        agents.push(AgentInfo {
            agent_id: i as AgentId + 1,
            x: radius * angle.cos(),
            y: radius * angle.sin(),
            fov_radius: cfg.teammate_fov_radius,
            role: if attackers.contains(&i) { Role::Attacker } else { Role::Benign },
        });
    }

    let mut placed: Vec<(f64, f64)> = Vec::with_capacity(cfg.object_count as usize);
    let mut attempts = 0;
    while placed.len() < cfg.object_count as usize {
        attempts += 1;
        if attempts > PLACEMENT_ATTEMPTS {
            return Err(SimError::Placement { placed: placed.len(), requested: cfg.object_count });
        }
        let x = layout.random_range(-half..half);
        let y = layout.random_range(-half..half);
        if far_from(x, y, &placed, cfg.min_separation) {
            placed.push((x, y));
        }
    }
    let mut objects: Vec<OrientedBox> = placed
        .iter()
        .map(|&(x, y)| {
            OrientedBox::new(x, y, layout.random_range(4.0..5.0), layout.random_range(1.7..2.1), layout.random_range(-PI..PI))
        })
        .collect();

    let mut motion = substream(cfg.rng_seed, &[tag::MOTION]);
    let step = Normal::new(0.0, cfg.motion_step_sigma.max(1e-12)).expect("finite sigma");
    let mut frames = Vec::with_capacity(cfg.frames as usize);
    for f in 0..cfg.frames as u64 {
        if f > 0 && cfg.motion_step_sigma > 0.0 {
            for b in &mut objects {
                // reflect at the world border
                let nx = b.center_x + step.sample(&mut motion);
                let ny = b.center_y + step.sample(&mut motion);
                b.center_x = if nx.abs() > half { b.center_x - (nx - b.center_x) } else { nx };
                b.center_y = if ny.abs() > half { b.center_y - (ny - b.center_y) } else { ny };
                b.yaw = crate::geometry::normalize_yaw(b.yaw + 0.1 * step.sample(&mut motion));
            }
        }
        let visible = agents
            .iter()
            .map(|a| (0..objects.len()).filter(|&i| a.sees(&objects[i])).collect())
            .collect();
        frames.push(SimWorldFrame { frame_id: f, ground_truth: DetectionSet::new(f, objects.clone()), visible });
    }
    Ok(Scene { config: cfg.clone(), agents, frames })
}

impl Scene {
    pub fn teammate_ids(&self) -> Vec<AgentId> {
        self.agents.iter().skip(1).map(|a| a.agent_id).collect()
    }

    pub fn attacker_ids(&self) -> Vec<AgentId> {
        self.agents.iter().filter(|a| a.role == Role::Attacker).map(|a| a.agent_id).collect()
    }

    pub fn benign_ids(&self) -> Vec<AgentId> {
        self.agents.iter().filter(|a| a.role == Role::Benign).map(|a| a.agent_id).collect()
    }

    pub fn role(&self, id: AgentId) -> Option<Role> {
        self.agents.iter().find(|a| a.agent_id == id).map(|a| a.role)
    }

    pub fn is_attacker(&self, id: AgentId) -> bool {
        self.role(id) == Some(Role::Attacker)
    }

    /// Messages every agent sends in frame `index`. Detection noise and
    /// attack effects come from per-(frame, agent) substreams, so an
    /// attacker's honest detections are identical to what it would share
    /// if it were benign.
    pub fn bundle(&self, index: usize) -> FrameBundle<SimPayload> {
        let frame = &self.frames[index];
        let mut messages: Vec<SimMessage> =
            self.agents.iter().enumerate().map(|(slot, agent)| self.message(frame, slot, agent)).collect();
        let ego = messages.remove(0);
        FrameBundle { frame_id: frame.frame_id, ego, teammates: messages }
    }

    pub fn bundles(&self) -> Vec<FrameBundle<SimPayload>> {
        (0..self.frames.len()).map(|i| self.bundle(i)).collect()
    }

    fn message(&self, frame: &SimWorldFrame, slot: usize, agent: &AgentInfo) -> SimMessage {
        let cfg = &self.config;
        let mut rng = substream(cfg.rng_seed, &[tag::DETECTION, frame.frame_id, agent.agent_id as u64]);
        let pos = Normal::new(0.0, cfg.benign_position_noise_sigma.max(1e-12)).expect("finite sigma");
        let yaw = Normal::new(0.0, cfg.benign_yaw_noise_sigma.max(1e-12)).expect("finite sigma");
        let size = Normal::new(0.0, 0.03).expect("finite sigma");
        let mut detections = Vec::with_capacity(frame.visible[slot].len());
        for &i in &frame.visible[slot] {
            let gt = &frame.ground_truth.boxes[i];
            // draw every variate so the stream stays aligned whether or not this one is missed
            let missed = rng.random::<f64>() < cfg.benign_miss_rate;
            let noisy = OrientedBox::new(
                gt.center_x + pos.sample(&mut rng),
                gt.center_y + pos.sample(&mut rng),
                (gt.length + size.sample(&mut rng)).max(0.5),
                (gt.width + size.sample(&mut rng)).max(0.5),
                gt.yaw + yaw.sample(&mut rng),
            )
            .with_score(rng.random_range(0.55..0.95));
            if !missed {
                detections.push(noisy);
            }
        }
        let attack = (agent.role == Role::Attacker && cfg.attack.severity > 0.0)
            .then(|| self.attack_effect(frame, agent.agent_id))
            .filter(|e| !e.is_empty());
        AgentMessage { agent_id: agent.agent_id, payload: SimPayload { frame_id: frame.frame_id, detections, attack } }
    }

    fn attack_effect(&self, frame: &SimWorldFrame, agent_id: AgentId) -> AttackEffect {
        let cfg = &self.config;
        let mut rng = substream(cfg.rng_seed, &[tag::ATTACK, frame.frame_id, agent_id as u64]);
        let severity = cfg.attack.severity;
        let fov = cfg.ego_fov();
        let in_view: Vec<&OrientedBox> = frame
            .ground_truth
            .boxes
            .iter()
            .filter(|b| b.center_within(fov.center_x, fov.center_y, fov.radius))
            .collect();

        let (flood, suppress_fraction) = match cfg.attack.kind {
            AttackKind::FpFlood => (FLOOD_BOXES_PER_SEVERITY * severity, 0.0),
            AttackKind::FnSuppress => (0.0, SUPPRESS_FRACTION_PER_SEVERITY * severity),
            AttackKind::Mixed => (FLOOD_BOXES_PER_SEVERITY * severity * 2.0 / 3.0, SUPPRESS_FRACTION_PER_SEVERITY * severity * 2.0 / 3.0),
            AttackKind::Subtle => (0.0, 0.0),
        };

        let mut effect = AttackEffect::default();
        let truth: Vec<(f64, f64)> = frame.ground_truth.boxes.iter().map(|b| (b.center_x, b.center_y)).collect();
        let mut fakes: Vec<(f64, f64)> = Vec::new();
        let half = 0.5 * cfg.world_extent;
        let wanted = (flood * cfg.world_extent * cfg.world_extent / (PI * fov.radius * fov.radius)).round() as usize;
        let mut attempts = 0;
        while effect.injected.len() < wanted && attempts < PLACEMENT_ATTEMPTS {
            attempts += 1;
            let (x, y) = (rng.random_range(-half..half), rng.random_range(-half..half));
            if !far_from(x, y, &truth, cfg.min_separation) || !far_from(x, y, &fakes, FLOOD_SPACING) {
                continue;
            }
            fakes.push((x, y));
            let b = OrientedBox::new(x, y, rng.random_range(4.0..5.0), rng.random_range(1.7..2.1), rng.random_range(-PI..PI))
                .with_score(rng.random_range(0.9..1.0));
            effect.injected.push(b);
        }

        let erase = (suppress_fraction.min(1.0) * in_view.len() as f64).round() as usize;
        if erase > 0 {
            let mut picked = index::sample(&mut rng, in_view.len(), erase).into_vec();
            picked.sort_unstable();
            effect.suppress = picked.iter().map(|&i| (in_view[i].center_x, in_view[i].center_y)).collect();
        }

        if cfg.attack.kind == AttackKind::Subtle {
            for b in &in_view {
                let dir = rng.random_range(-PI..PI);
                let shift = SUBTLE_SHIFT_PER_SEVERITY * severity;
                let turn = if rng.random::<bool>() { 1.0 } else { -1.0 } * SUBTLE_YAW_PER_SEVERITY * severity;
                effect.displace.push(Displacement { x: b.center_x, y: b.center_y, dx: shift * dir.cos(), dy: shift * dir.sin(), dyaw: turn });
            }
        }
        effect
    }
}
