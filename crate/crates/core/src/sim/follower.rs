//! Pure-pursuit-style path tracker for a differential-drive base.

use std::f64::consts::FRAC_PI_2;

use crate::astar::GridPath;
use crate::geometry::{wrap_angle, Point2};

use super::{Pose, SimParams};

/// Closest-point search looks this many path points past the current progress.
const SEARCH_WINDOW: usize = 80;
/// Floor on the approach speed near the goal, m/s.
const MIN_APPROACH_SPEED: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    pub v: f64,
    pub omega: f64,
    /// Goal reached: the command is zero and the mission is done.
    pub finished: bool,
}

/// Tracks progress along one path. Progress never moves backwards.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathFollower {
    progress: usize,
}

impl PathFollower {
    pub fn new() -> Self {
        Self::default()
    }

    /// Index of the path point closest to the robot, as of the last command.
    pub fn progress(&self) -> usize {
        self.progress
    }

    /// Velocity command toward the path point roughly `lookahead` ahead of the
    /// closest path point. `goal` is the metric destination used for the
    /// finish test.
    pub fn command(&mut self, path: &GridPath, goal: Point2, pose: &Pose, params: &SimParams) -> Command {
        let here = Point2::new(pose.x, pose.y);
        if here.distance(&goal) <= params.goal_radius {
            return Command {
                v: 0.0,
                omega: 0.0,
                finished: true,
            };
        }
        let pts = &path.points;
        debug_assert!(!pts.is_empty());

        let end = (self.progress + SEARCH_WINDOW).min(pts.len() - 1);
        let mut closest = self.progress;
        let mut best = f64::INFINITY;
        for (i, p) in pts.iter().enumerate().take(end + 1).skip(self.progress) {
            let d = p.distance(&here);
            if d < best {
                best = d;
                closest = i;
            }
        }
        self.progress = closest;

        // Walk forward to the point whose arc distance is nearest to the lookahead.
        let mut target = closest;
        let mut arc = 0.0;
        while target + 1 < pts.len() {
            let step = pts[target].distance(&pts[target + 1]);
            if arc + step > params.lookahead {
                if (arc + step - params.lookahead) < (params.lookahead - arc) {
                    target += 1;
                }
                break;
            }
            arc += step;
            target += 1;
        }
        let aim = if target + 1 == pts.len() && pts[target].distance(&here) < params.lookahead {
            goal
        } else {
            pts[target]
        };

        let dist = aim.distance(&here).max(1e-6);
        let alpha = wrap_angle((aim.y - here.y).atan2(aim.x - here.x) - pose.theta);
        let omega = if alpha.abs() >= FRAC_PI_2 {
            params.omega_max.copysign(alpha)
        } else {
            (2.0 * params.v_max * alpha.sin() / dist).clamp(-params.omega_max, params.omega_max)
        };
        let v = (params.v_max * (1.0 - alpha.abs() / FRAC_PI_2)).max(0.0);
        let v = v.min(here.distance(&goal).max(MIN_APPROACH_SPEED));
        Command {
            v: v.clamp(0.0, params.v_max),
            omega,
            finished: false,
        }
    }
}
