use rand::Rng;

use super::{Observation, Oracle, SimState, Simulator};
use crate::error::{Error, Result};
use crate::geometry::{action_between, Action};

/// How a demonstration ends once the guide reaches an acceptable state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// Recording stops on arrival. The arrival record carries the motion the
    /// guide was still executing, so the data never shows the probe holding still.
    Truncated,
    /// The arrival record and `n` further records hold the probe still.
    Hold(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoStep {
    pub observation: Observation,
    /// Realized motion to the next frame.
    pub action: Action,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub steps: Vec<DemoStep>,
}

/// Rolls the guide from a sampled start until the state is acceptable.
pub fn record_demonstration<R: Rng + ?Sized>(
    sim: &Simulator,
    oracle: &Oracle,
    rng: &mut R,
    truncation: Truncation,
    max_steps: usize,
) -> Result<Demonstration> {
    let mut state = SimState::new(sim.sample_start(rng));
    let mut steps = Vec::new();
    loop {
        let observation = sim.observe(&state.frame);
        let label = sim.ground_truth_label(&state.frame);
        if label == 1 {
            match truncation {
                Truncation::Truncated => {
                    let next = sim.transition(&state.frame, &oracle.steer(sim, &state))?;
                    let action = action_between(&state.frame, &next);
                    steps.push(DemoStep { observation, action, label });
                }
                Truncation::Hold(n) => {
                    for _ in 0..=n {
                        steps.push(DemoStep { observation: observation.clone(), action: Action::ZERO, label });
                    }
                }
            }
            return Ok(Demonstration { steps });
        }
        if state.step_index >= max_steps {
            return Err(Error::EpisodeDiverged { max_steps });
        }
        let next = sim.transition(&state.frame, &oracle.action(sim, &state))?;
        let action = action_between(&state.frame, &next);
        steps.push(DemoStep { observation, action, label });
        state = SimState { frame: next, step_index: state.step_index + 1 };
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn truncated_ends_on_first_acceptable_state() {
        let sim = Simulator::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let demo = record_demonstration(&sim, &Oracle::default(), &mut rng, Truncation::Truncated, 200).unwrap();
        let (last, rest) = demo.steps.split_last().unwrap();
        assert_eq!(last.label, 1);
        assert!(!last.action.is_zero());
        assert!(rest.iter().all(|s| s.label == 0));
        assert!(rest.len() >= 2);
    }

    #[test]
    fn hold_mode_appends_still_steps() {
        let sim = Simulator::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let demo = record_demonstration(&sim, &Oracle::default(), &mut rng, Truncation::Hold(10), 200).unwrap();
        let n = demo.steps.len();
        assert!(demo.steps[n - 10..].iter().all(|s| s.action.is_zero() && s.label == 1));
    }

    #[test]
    fn actions_reproduce_the_next_frame() {
        let sim = Simulator::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let demo = record_demonstration(&sim, &Oracle::default(), &mut rng, Truncation::Truncated, 200).unwrap();
        for pair in demo.steps.windows(2) {
            let f = crate::geometry::ProbeFrame::new(pair[0].observation.position, pair[0].observation.orientation);
            let g = crate::geometry::apply_action(&f, &pair[0].action, &sim.workspace()).unwrap();
            for i in 0..3 {
                assert!((g.position[i] - pair[1].observation.position[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn diverges_when_budget_too_small() {
        let sim = Simulator::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let err = record_demonstration(&sim, &Oracle::default(), &mut rng, Truncation::Truncated, 1).unwrap_err();
        assert!(matches!(err, Error::EpisodeDiverged { max_steps: 1 }));
    }
}
