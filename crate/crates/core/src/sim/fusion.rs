use super::scenario::{AttackEffect, SimMessage, SimPayload, SUPPRESS_RADIUS};
use super::SimError;
use crate::engine::{AgentId, FusionModel};
use crate::geometry::{normalize_yaw, rotated_iou, DetectionSet, OrientedBox};

/// Output-level late fusion of shared detections.
///
/// Boxes from different agents that overlap by more than `merge_iou` are
/// merged (mean pose); an agent contributes at most one box per cluster.
/// A merged box scores `(k - 1 + mean detector score) / n` for `k` agreeing
/// agents out of `n` fused messages, so agreement dominates the ranking and
/// a lone box keeps its own score. Attack effects carried by teammates' payloads are applied
/// to the merged output, so an attacker's influence is exactly its effect
/// on any fusion it takes part in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimFusion {
    pub merge_iou: f64,
}

impl Default for SimFusion {
    fn default() -> Self {
        Self { merge_iou: 0.5 }
    }
}

struct Cluster {
    members: Vec<AgentId>,
    lead_yaw: f64,
    sum_x: f64,
    sum_y: f64,
    sum_l: f64,
    sum_w: f64,
    sum_dyaw: f64,
    sum_score: f64,
    mean: OrientedBox,
}

impl Cluster {
    fn new(agent: AgentId, b: &OrientedBox) -> Self {
        Self {
            members: vec![agent],
            lead_yaw: b.yaw,
            sum_x: b.center_x,
            sum_y: b.center_y,
            sum_l: b.length,
            sum_w: b.width,
            sum_dyaw: 0.0,
            sum_score: b.score,
            mean: *b,
        }
    }

    fn add(&mut self, agent: AgentId, b: &OrientedBox) {
        self.members.push(agent);
        self.sum_x += b.center_x;
        self.sum_y += b.center_y;
        self.sum_l += b.length;
        self.sum_w += b.width;
        self.sum_dyaw += normalize_yaw(b.yaw - self.lead_yaw);
        self.sum_score += b.score;
        let n = self.members.len() as f64;
        self.mean = OrientedBox::new(
            self.sum_x / n,
            self.sum_y / n,
            self.sum_l / n,
            self.sum_w / n,
            self.lead_yaw + self.sum_dyaw / n,
        );
    }
}

impl SimFusion {
    pub fn merge(&self, frame_id: u64, messages: &[&SimMessage]) -> Result<DetectionSet, SimError> {
        let mut entries: Vec<(AgentId, &OrientedBox)> =
            messages.iter().flat_map(|m| m.payload.detections.iter().map(move |b| (m.agent_id, b))).collect();
        entries.sort_by(|a, b| b.1.score.total_cmp(&a.1.score));

        let mut clusters: Vec<Cluster> = Vec::new();
        for (agent, b) in entries {
            let mut best: Option<(usize, f64)> = None;
            for (i, c) in clusters.iter().enumerate() {
                if c.members.contains(&agent) {
                    continue;
                }
                let reach = c.mean.circumradius() + b.circumradius();
                if (c.mean.center_x - b.center_x).hypot(c.mean.center_y - b.center_y) > reach {
                    continue;
                }
                let iou = rotated_iou(&c.mean, b)?;
                if iou > self.merge_iou && best.is_none_or(|(_, v)| iou > v) {
                    best = Some((i, iou));
                }
            }
            match best {
                Some((i, _)) => clusters[i].add(agent, b),
                None => clusters.push(Cluster::new(agent, b)),
            }
        }
        let n = messages.len() as f64;
        let boxes = clusters
            .into_iter()
            .map(|c| {
                let k = c.members.len() as f64;
                c.mean.with_score((k - 1.0 + c.sum_score / k) / n)
            })
            .collect();
        Ok(DetectionSet::new(frame_id, boxes))
    }
}

/// Displacements first, then suppression, then injected boxes.
pub fn apply_attack(output: &mut DetectionSet, effect: &AttackEffect) {
    let near = |b: &OrientedBox, x: f64, y: f64| (b.center_x - x).hypot(b.center_y - y) <= SUPPRESS_RADIUS;
    for d in &effect.displace {
        for b in output.boxes.iter_mut().filter(|b| near(b, d.x, d.y)) {
            *b = OrientedBox::new(b.center_x + d.dx, b.center_y + d.dy, b.length, b.width, b.yaw + d.dyaw).with_score(b.score);
        }
    }
    output.boxes.retain(|b| !effect.suppress.iter().any(|&(x, y)| near(b, x, y)));
    output.boxes.extend(effect.injected.iter().copied());
}

impl FusionModel for SimFusion {
    type Payload = SimPayload;
    type Error = SimError;

    fn predict_individual(&self, ego: &SimMessage) -> Result<DetectionSet, SimError> {
        Ok(DetectionSet::new(ego.payload.frame_id, ego.payload.detections.clone()))
    }

    fn predict_fused(&self, ego: &SimMessage, teammates: &[&SimMessage]) -> Result<DetectionSet, SimError> {
        if teammates.is_empty() {
            return self.predict_individual(ego);
        }
        let mut all = Vec::with_capacity(teammates.len() + 1);
        all.push(ego);
        all.extend_from_slice(teammates);
        let mut out = self.merge(ego.payload.frame_id, &all)?;
        for effect in teammates.iter().filter_map(|m| m.payload.attack.as_ref()) {
            apply_attack(&mut out, effect);
        }
        Ok(out)
    }
}
