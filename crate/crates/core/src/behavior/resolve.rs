use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Goal, Target, Task};
use crate::geometry::Vec2;
use crate::simworld::{container_capacity, ObjectId, WorldState, SLOT_CLEARANCE};

const MAX_DEPTH: usize = 8;

#[derive(Clone, Debug, PartialEq, thiserror::Error, Serialize, Deserialize)]
pub enum ResolveError {
    #[error("unknown object `{0}`")]
    MissingObject(ObjectId),
    #[error("`{0}` is not a drawer")]
    NotADrawer(ObjectId),
    #[error("no free table slot for `{0}`")]
    NoFreeSlot(ObjectId),
    #[error("`{0}` is empty")]
    Empty(ObjectId),
    #[error("`{0}` is no longer held")]
    NotHeld(ObjectId),
    #[error("cannot pour into `{0}`")]
    NotPourable(ObjectId),
    #[error("preconditions nest deeper than {MAX_DEPTH} levels")]
    TooDeep,
}

/// Table slots assigned to objects moved out of the way. An assignment is
/// kept while its spot stays free, so repeated resolution is stable.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Reservations {
    pub slots: BTreeMap<ObjectId, Vec2>,
}

impl Reservations {
    fn stow(&mut self, w: &WorldState, id: &str, dests: &[Vec2]) -> Result<Vec2, ResolveError> {
        let others: Vec<Vec2> = self
            .slots
            .iter()
            .filter(|(k, _)| k.as_str() != id)
            .map(|(_, v)| *v)
            .chain(dests.iter().copied())
            .collect();
        let clash = |p: &Vec2| others.iter().any(|r| (r - p).norm() < SLOT_CLEARANCE);
        if let Some(p) = self.slots.get(id) {
            if w.spot_is_free(p, &[id]) && !clash(p) {
                return Ok(*p);
            }
        }
        let near = w.objects.get(id).map(|o| o.pose.xy()).unwrap_or_else(|| w.gripper.pose.xy());
        let p = w
            .free_slot(&near, &[id], &others)
            .ok_or_else(|| ResolveError::NoFreeSlot(id.to_string()))?;
        self.slots.insert(id.to_string(), p);
        Ok(p)
    }
}

struct Resolver<'a> {
    w: &'a WorldState,
    res: &'a mut Reservations,
    /// Table destinations named by the task; never used as stow slots.
    dests: Vec<Vec2>,
    /// Subjects of unmet goals after the one being resolved.
    later: Vec<ObjectId>,
    out: Vec<Goal>,
}

impl Resolver<'_> {
    fn object(&self, id: &str) -> Result<(), ResolveError> {
        self.w.get(id).map(|_| ()).ok_or_else(|| ResolveError::MissingObject(id.to_string()))
    }

    fn push(&mut self, g: Goal, depth: usize) -> Result<(), ResolveError> {
        if depth > MAX_DEPTH {
            return Err(ResolveError::TooDeep);
        }
        if g.holds(self.w) || self.out.contains(&g) {
            return Ok(());
        }
        self.enablers(&g, depth)?;
        if !self.out.contains(&g) {
            self.out.push(g);
        }
        Ok(())
    }

    fn stow(&mut self, id: &str, depth: usize) -> Result<(), ResolveError> {
        let p = self.res.stow(self.w, id, &self.dests)?;
        self.push(Goal::Placed { object: id.to_string(), target: Target::Table(p), yaw: None }, depth + 1)
    }

    fn empty_hand_unless(&mut self, keep: Option<&str>, depth: usize) -> Result<(), ResolveError> {
        match self.w.holding() {
            Some(h) if Some(h.as_str()) != keep => {
                let h = h.clone();
                self.stow(&h, depth)
            }
            _ => Ok(()),
        }
    }

    fn open_enclosing(&mut self, id: &str, depth: usize) -> Result<(), ResolveError> {
        let w = self.w;
        let mut drawers: Vec<ObjectId> = Vec::new();
        if w.get(id).is_some_and(|o| o.is_drawer()) {
            drawers.push(id.to_string());
        }
        drawers.extend(w.enclosing_drawer(id));
        for d in drawers {
            if !w.drawer_is_open(&d) {
                self.push(Goal::DrawerOpen { drawer: d }, depth + 1)?;
            }
        }
        Ok(())
    }

    /// Everything resting on or inside `id`, moved away top-down.
    fn clear(&mut self, id: &str, keep: Option<&str>, depth: usize) -> Result<(), ResolveError> {
        let w = self.w;
        let mut above = w.stack_above(id);
        above.reverse();
        for b in above {
            if Some(b.as_str()) != keep {
                self.stow(&b, depth)?;
            }
        }
        for c in w.contents(id).into_iter().cloned().collect::<Vec<_>>() {
            if Some(c.as_str()) != keep {
                self.clear(&c, keep, depth + 1)?;
                self.stow(&c, depth)?;
            }
        }
        Ok(())
    }

    /// Moves `y` to the table when something below it is still to be
    /// moved by a later goal, so building on `y` is not undone later.
    fn free_base(&mut self, y: &str, depth: usize) -> Result<(), ResolveError> {
        let w = self.w;
        let below = w.supports_below(y);
        if below.iter().any(|s| self.later.contains(s)) && !w.get(y).is_some_and(|o| o.is_container()) {
            self.stow(y, depth)?;
        }
        Ok(())
    }

    /// Preconditions for holding `x`: empty hand, reachable and clear.
    fn graspable(&mut self, x: &str, depth: usize) -> Result<(), ResolveError> {
        self.object(x)?;
        if self.w.holding().map(String::as_str) == Some(x) {
            return Ok(());
        }
        self.empty_hand_unless(Some(x), depth)?;
        self.open_enclosing_if_inside(x, depth)?;
        self.clear(x, None, depth)
    }

    fn open_enclosing_if_inside(&mut self, x: &str, depth: usize) -> Result<(), ResolveError> {
        if let Some(d) = self.w.enclosing_drawer(x) {
            if !self.w.drawer_is_open(&d) {
                self.push(Goal::DrawerOpen { drawer: d }, depth + 1)?;
            }
        }
        Ok(())
    }

    fn enablers(&mut self, g: &Goal, depth: usize) -> Result<(), ResolveError> {
        let w = self.w;
        match g {
            Goal::Placed { object, target, .. } => {
                self.graspable(object, depth)?;
                match target {
                    Target::In(c) => {
                        self.object(c)?;
                        self.open_enclosing(c, depth)?;
                        let inside: Vec<ObjectId> =
                            w.contents(c).into_iter().filter(|o| *o != object).cloned().collect();
                        let cap = container_capacity(&w.objects[c].class);
                        if inside.len() >= cap {
                            for o in &inside[..=inside.len() - cap] {
                                self.clear(o, Some(object), depth + 1)?;
                                self.stow(o, depth)?;
                            }
                        }
                    }
                    Target::On(y) => {
                        self.object(y)?;
                        self.open_enclosing_if_inside(y, depth)?;
                        self.clear(y, Some(object), depth)?;
                        self.free_base(y, depth)?;
                    }
                    Target::Table(p) => {
                        let occupants: Vec<ObjectId> = w
                            .objects
                            .iter()
                            .filter(|(id, o)| {
                                *id != object && o.support.is_some() && (o.pose.xy() - p).norm() < SLOT_CLEARANCE
                            })
                            .map(|(id, _)| id.clone())
                            .collect();
                        for o in occupants {
                            // only the bottom of a stack sits on the table
                            if w.supports_below(&o).is_empty() && !w.stack_above(object).contains(&o) {
                                self.clear(&o, Some(object), depth + 1)?;
                                self.stow(&o, depth)?;
                            }
                        }
                    }
                }
            }
            Goal::Holding { object } => self.graspable(object, depth)?,
            Goal::DrawerOpen { drawer } | Goal::DrawerClosed { drawer } => {
                self.object(drawer)?;
                if !w.objects[drawer].is_drawer() {
                    return Err(ResolveError::NotADrawer(drawer.clone()));
                }
                self.empty_hand_unless(None, depth)?;
            }
            Goal::Poured { source, target, .. } => {
                self.object(target)?;
                let t = &w.objects[target];
                if !t.is_container() || t.is_drawer() {
                    return Err(ResolveError::NotPourable(target.clone()));
                }
                self.object(source)?;
                if w.objects[source].fill <= 0.0 {
                    return Err(ResolveError::Empty(source.clone()));
                }
                self.graspable(source, depth)?;
            }
            Goal::GripperYaw { object, .. } => {
                if w.holding() != Some(object) {
                    return Err(ResolveError::NotHeld(object.clone()));
                }
            }
            Goal::GripperAt { .. } => {}
        }
        Ok(())
    }
}

/// Goals to pursue now, in order: the task's goals up to and including
/// the first unmet one, preceded by the subgoals that make it achievable
/// from `w` (emptying the hand, opening drawers, clearing stacks and
/// occupied destinations).
pub fn resolve_preconditions(task: &Task, w: &WorldState, res: &mut Reservations) -> Result<Vec<Goal>, ResolveError> {
    let dests = task
        .goals
        .iter()
        .filter_map(|g| match g {
            Goal::Placed { target: Target::Table(p), .. } => Some(*p),
            _ => None,
        })
        .collect();
    let mut r = Resolver { w, res, dests, later: Vec::new(), out: Vec::new() };
    for (i, g) in task.goals.iter().enumerate() {
        if g.holds(w) {
            r.out.push(g.clone());
            continue;
        }
        r.later = task.goals[i + 1..]
            .iter()
            .filter(|g| !g.holds(w))
            .filter_map(|g| g.subject().cloned())
            .collect();
        r.push(g.clone(), 0)?;
        break;
    }
    Ok(r.out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::{scenes, Support};

    fn placed(o: &str, t: Target) -> Goal {
        Goal::Placed { object: o.into(), target: t, yaw: None }
    }

    fn names(goals: &[Goal]) -> Vec<String> {
        goals.iter().map(ToString::to_string).collect()
    }

    #[test]
    fn occupied_bowl_is_cleared_first() {
        let w = scenes::occupied_bowl();
        let t = Task::new("t", vec![placed("mug", Target::In("bowl".into()))]);
        let mut res = Reservations::default();
        let goals = resolve_preconditions(&t, &w, &mut res).unwrap();
        assert_eq!(goals.len(), 2);
        assert!(matches!(&goals[0], Goal::Placed { object, target: Target::Table(_), .. } if object == "cheese"));
        assert_eq!(goals[1].to_string(), "placed(mug, in bowl)");
        // stable across calls
        assert_eq!(resolve_preconditions(&t, &w, &mut res).unwrap(), goals);
    }

    #[test]
    fn closed_drawer_opened() {
        let w = scenes::tabletop();
        let t = Task::new("t", vec![placed("can", Target::In("drawer".into()))]);
        let goals = resolve_preconditions(&t, &w, &mut Reservations::default()).unwrap();
        assert_eq!(names(&goals), vec!["open(drawer)", "placed(can, in drawer)"]);
    }

    #[test]
    fn stack_cleared_top_down() {
        let w = scenes::stacked();
        let t = Task::new("t", vec![Goal::Holding { object: "spam".into() }]);
        let goals = resolve_preconditions(&t, &w, &mut Reservations::default()).unwrap();
        let subjects: Vec<&str> = goals.iter().map(|g| g.subject().unwrap().as_str()).collect();
        assert_eq!(subjects, vec!["can", "cheese", "spam"]);
        let slots: Vec<Vec2> = goals[..2]
            .iter()
            .map(|g| match g {
                Goal::Placed { target: Target::Table(p), .. } => *p,
                _ => unreachable!(),
            })
            .collect();
        assert!((slots[0] - slots[1]).norm() >= SLOT_CLEARANCE);
    }

    #[test]
    fn held_object_stowed_before_drawer() {
        let mut w = scenes::tabletop();
        w.objects.get_mut("can").unwrap().support = None;
        w.gripper.holding = Some("can".into());
        w.gripper.lifted = true;
        w.settle();
        let t = Task::new("t", vec![Goal::DrawerOpen { drawer: "drawer".into() }]);
        let goals = resolve_preconditions(&t, &w, &mut Reservations::default()).unwrap();
        assert_eq!(goals.len(), 2);
        assert_eq!(goals[0].subject().unwrap(), "can");
    }

    #[test]
    fn swap_uses_temporary_slot() {
        let w = scenes::tabletop();
        let pa = w.objects["can"].pose.xy();
        let pb = w.objects["spam"].pose.xy();
        let t = Task::new("swap", vec![placed("can", Target::Table(pb)), placed("spam", Target::Table(pa))]);
        let goals = resolve_preconditions(&t, &w, &mut Reservations::default()).unwrap();
        assert_eq!(goals.len(), 2);
        let Goal::Placed { object, target: Target::Table(tmp), .. } = &goals[0] else { panic!() };
        assert_eq!(object, "spam");
        assert!((tmp - pa).norm() >= SLOT_CLEARANCE && (tmp - pb).norm() >= SLOT_CLEARANCE);
    }

    #[test]
    fn explained_errors() {
        let w = scenes::tabletop();
        let r = |g: Goal| resolve_preconditions(&Task::new("t", vec![g]), &w, &mut Reservations::default());
        assert_eq!(r(Goal::Holding { object: "nope".into() }), Err(ResolveError::MissingObject("nope".into())));
        assert_eq!(
            r(Goal::Poured { source: "spam".into(), target: "bowl".into(), angle: 90.0 }),
            Err(ResolveError::Empty("spam".into()))
        );
        assert_eq!(r(Goal::DrawerOpen { drawer: "can".into() }), Err(ResolveError::NotADrawer("can".into())));
    }

    #[test]
    fn satisfied_goals_pass_through() {
        let w = scenes::stacked();
        let t = Task::new(
            "t",
            vec![placed("cheese", Target::On("spam".into())), placed("spam", Target::In("bowl".into()))],
        );
        let goals = resolve_preconditions(&t, &w, &mut Reservations::default()).unwrap();
        assert_eq!(goals[0], t.goals[0]);
        assert_eq!(goals.last().unwrap(), &t.goals[1]);
        assert!(goals.len() > 2);
        assert!(w.objects["cheese"].support == Some(Support::On("spam".into())));
    }
}
