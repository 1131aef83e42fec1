use proptest::prelude::*;
use usskill::geometry::{action_between, apply_action, quat_normalize, Action, ProbeFrame, Quaternion, Workspace};

fn unit_quat() -> impl Strategy<Value = Quaternion> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("away from zero", |(w, x, y, z)| (w * w + x * x + y * y + z * z).sqrt() > 0.1)
        .prop_map(|(w, x, y, z)| quat_normalize(Quaternion::new(w, x, y, z)).unwrap())
}

fn frame_in(ws: Workspace) -> impl Strategy<Value = ProbeFrame> {
    let (lo, hi) = (ws.min, ws.max);
    (lo[0]..hi[0], lo[1]..hi[1], lo[2]..hi[2], unit_quat()).prop_map(|(x, y, z, q)| ProbeFrame::new([x, y, z], q))
}

fn ws() -> Workspace {
    Workspace::centered([0.0, 0.0, -0.03], 0.15)
}

proptest! {
    #[test]
    fn normalized_quaternions_are_unit(q in unit_quat()) {
        prop_assert!((q.norm() - 1.0).abs() < 1e-12);
        prop_assert!(q.is_unit());
        let back = quat_normalize(Quaternion::from_array(q.to_array())).unwrap();
        for (a, b) in back.to_array().iter().zip(q.to_array()) {
            prop_assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn action_between_then_apply_is_identity(f in frame_in(ws()), g in frame_in(ws())) {
        let a = action_between(&f, &g);
        let h = apply_action(&f, &a, &ws()).unwrap();
        for i in 0..3 {
            prop_assert!((h.position[i] - g.position[i]).abs() < 1e-12);
        }
        for (x, y) in h.orientation.to_array().iter().zip(g.orientation.to_array()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_action_is_exact_identity(f in frame_in(ws())) {
        prop_assert_eq!(apply_action(&f, &Action::ZERO, &ws()).unwrap(), f);
    }

    #[test]
    fn applied_actions_stay_valid(
        f in frame_in(ws()),
        dp in prop::array::uniform3(-1.0..1.0f64),
        d_o in prop::array::uniform4(-0.2..0.2f64),
    ) {
        let g = apply_action(&f, &Action { dp, d_o }, &ws()).unwrap();
        prop_assert!(ws().contains(g.position));
        prop_assert!(g.orientation.is_unit());
    }

    #[test]
    fn capping_bounds_translation_and_keeps_direction(dp in prop::array::uniform3(-0.1..0.1f64), cap in 1e-4..0.05f64) {
        let a = Action { dp, d_o: [0.0; 4] }.capped(cap);
        let n = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        prop_assert!(n(a.dp) <= cap * (1.0 + 1e-12));
        if n(dp) > cap {
            prop_assert!((n(a.dp) - cap).abs() < 1e-12);
            for i in 0..3 {
                prop_assert!((a.dp[i] * n(dp) - dp[i] * n(a.dp)).abs() < 1e-12);
            }
        } else {
            prop_assert_eq!(a.dp, dp);
        }
    }

    #[test]
    fn tilt_of_axis_angle_about_horizontal_axis(angle in 0.0..3.0f64, heading in 0.0..std::f64::consts::TAU) {
        let q = Quaternion::from_axis_angle([heading.cos(), heading.sin(), 0.0], angle).unwrap();
        prop_assert!((q.tilt() - angle).abs() < 1e-6);
    }
}

#[test]
fn degenerate_quaternion_is_an_error() {
    assert!(quat_normalize(Quaternion::new(0.0, 0.0, 0.0, 0.0)).is_err());
    assert!(quat_normalize(Quaternion::new(1e-13, 0.0, 0.0, 0.0)).is_err());
}
