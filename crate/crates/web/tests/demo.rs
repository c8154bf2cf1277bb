use tree_motion_web::{ArmDemo, DiffeoDemo};

fn ee(arm: &ArmDemo) -> (f64, f64) {
    let p = arm.joint_positions();
    (p[6], p[7])
}

#[test]
fn arm_reaches_goal_with_falling_potential() {
    let mut arm = ArmDemo::try_new().unwrap();
    let mut phi = arm.potential();
    for _ in 0..400 {
        arm.try_step(50, 1e-3).unwrap();
        let next = arm.potential();
        assert!(next <= phi + 1e-6);
        phi = next;
    }
    let (x, y) = ee(&arm);
    let goal = arm.goal();
    assert!((x - goal[0]).hypot(y - goal[1]) < 1e-3, "{x} {y}");
    assert!((arm.time() - 20.0).abs() < 1e-9);
}

#[test]
fn moved_goal_is_reached() {
    let mut arm = ArmDemo::try_new().unwrap();
    arm.try_set_goal(-1.0, 1.2).unwrap();
    assert_eq!(arm.goal(), [-1.0, 1.2]);
    arm.try_step(30_000, 1e-3).unwrap();
    let (x, y) = ee(&arm);
    assert!((x + 1.0).hypot(y - 1.2) < 1e-3, "{x} {y}");
}

#[test]
fn obstacle_over_the_end_effector_is_refused() {
    let mut arm = ArmDemo::try_new().unwrap();
    let before = arm.obstacle();
    let (x, y) = ee(&arm);
    assert!(arm.try_set_obstacle(x, y, 0.2).is_err());
    assert_eq!(arm.obstacle(), before);
    arm.try_set_obstacle(-2.0, -2.0, 0.3).unwrap();
    assert_eq!(arm.obstacle(), [-2.0, -2.0, 0.3]);
}

#[test]
fn configuration_must_match_the_arm() {
    let mut arm = ArmDemo::try_new().unwrap();
    assert!(arm.try_set_configuration(&[0.0, 0.0]).is_err());
    arm.try_set_configuration(&[0.1, 0.2, 0.3]).unwrap();
    assert_eq!(arm.configuration(), [0.1, 0.2, 0.3]);
    let p = arm.joint_positions();
    assert_eq!(p.len(), 8);
    assert!((p[2] - 0.1f64.cos()).abs() < 1e-15);
}

#[test]
fn reach_velocity_points_at_goal() {
    let mut arm = ArmDemo::try_new().unwrap();
    arm.try_set_obstacle(-3.0, -3.0, 0.2).unwrap();
    let v = arm.try_ee_velocities().unwrap();
    let (x, y) = ee(&arm);
    let goal = arm.goal();
    assert!((v[0] - (goal[0] - x)).abs() < 1e-12 && (v[1] - (goal[1] - y)).abs() < 1e-12);
    // Far from the obstacle the barrier is silent.
    assert_eq!((v[2], v[3]), (0.0, 0.0));
    assert!(v[4].is_finite() && v[5].is_finite());
}

#[test]
fn diffeo_grid_round_trips() {
    let d = DiffeoDemo::new(3, 4, 32, 0.4);
    assert!(d.roundtrip_error(15, 2.0) < 1e-9);
    let grid = d.warp_grid(5, 7, 2.0);
    assert_eq!(grid.len(), 2 * 5 * 7 * 2);
    let p = d.forward(grid[0] * 0.5, 0.3);
    let back = d.inverse(p[0], p[1]);
    assert!((back[0] - grid[0] * 0.5).abs() < 1e-10 && (back[1] - 0.3).abs() < 1e-10);
    assert!(d.log_det(0.2, -0.1).is_finite());
}

#[test]
fn zero_weights_leave_the_grid_in_place() {
    let d = DiffeoDemo::new(1, 3, 16, 0.0);
    let grid = d.warp_grid(3, 3, 1.0);
    assert_eq!(&grid[..6], &[-1.0, -1.0, 0.0, -1.0, 1.0, -1.0]);
    assert_eq!(d.log_det(0.5, 0.5), 0.0);
}
