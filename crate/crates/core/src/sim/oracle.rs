use super::{SimState, Simulator};
use crate::geometry::{norm3, Action, Quaternion};

/// Scripted proportional guide: steers toward the centered, upright pose at
/// nominal penetration and holds still once the state is acceptable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Oracle {
    pub k_pos: f64,
    pub k_ori: f64,
    /// Cap on `|dp|` (meters).
    pub pos_cap: f64,
    /// Cap on `|d_o|`.
    pub ori_cap: f64,
}

impl Default for Oracle {
    fn default() -> Self {
        Self { k_pos: 0.3, k_ori: 0.3, pos_cap: 0.0015, ori_cap: 0.05 }
    }
}

impl Oracle {
    pub fn action(&self, sim: &Simulator, state: &SimState) -> Action {
        if sim.ground_truth_label(&state.frame) == 1 {
            return Action::ZERO;
        }
        self.steer(sim, state)
    }

    /// The proportional command without the stopping rule.
    pub fn steer(&self, sim: &Simulator, state: &SimState) -> Action {
        let frame = &state.frame;
        let goal = sim.goal_position();
        let mut dp = [0.0; 3];
        for i in 0..3 {
            dp[i] = self.k_pos * (goal[i] - frame.position[i]);
        }
        cap(&mut dp, self.pos_cap);

        let q = frame.orientation;
        let target = if q.dot(Quaternion::IDENTITY) < 0.0 {
            Quaternion::IDENTITY.scale(-1.0)
        } else {
            Quaternion::IDENTITY
        };
        let mut d_o = (target - q).scale(self.k_ori).to_array();
        cap(&mut d_o, self.ori_cap);
        Action { dp, d_o }
    }
}

fn cap<const N: usize>(v: &mut [f64; N], limit: f64) {
    let n = if N == 3 {
        norm3([v[0], v[1], v[2]])
    } else {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    };
    if n > limit {
        let s = limit / n;
        v.iter_mut().for_each(|x| *x *= s);
    }
}
