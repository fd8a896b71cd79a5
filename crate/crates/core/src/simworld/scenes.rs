//! Built-in scenes used by the scenario catalog, the deictic benchmark and
//! the examples.

use super::{Support, WorldObject, WorldState, Workspace};
use crate::geometry::Vec3;

pub const GRID_SPACING: f64 = 0.2;

/// Names accepted by [`builtin`].
pub const NAMES: [&str; 6] = ["empty", "grid9", "tabletop", "occupied-bowl", "stacked", "open-drawer"];

const GRID_CLASSES: [&str; 9] = ["can", "spam", "cheese", "mug", "cube", "jar", "cup", "box", "ball"];

pub fn builtin(name: &str) -> Option<WorldState> {
    match name {
        "empty" => Some(WorldState::new(Workspace::default())),
        "grid9" => Some(grid9()),
        "tabletop" => Some(tabletop()),
        "occupied-bowl" => Some(occupied_bowl()),
        "stacked" => Some(stacked()),
        "open-drawer" => {
            let mut w = tabletop();
            w.objects.get_mut("drawer")?.open_fraction = Some(1.0);
            Some(w)
        }
        _ => None,
    }
}

/// Nine small objects on a 3×3 grid centred on the origin. Ids are the
/// class names, row-major from (−0.2, −0.2).
pub fn grid9() -> WorldState {
    let mut w = WorldState::new(Workspace::default());
    for (k, class) in GRID_CLASSES.iter().enumerate() {
        let x = (k % 3) as f64 * GRID_SPACING - GRID_SPACING;
        let y = (k / 3) as f64 * GRID_SPACING - GRID_SPACING;
        w.objects.insert((*class).into(), WorldObject::new(class, Vec3::new(x, y, 0.0)));
    }
    w.settle();
    w
}

/// Kitchen-style table: can and mug (both filled), spam, cheese, an empty
/// bowl and a closed drawer.
pub fn tabletop() -> WorldState {
    let mut w = WorldState::new(Workspace::default());
    let mut put = |id: &str, class: &str, x: f64, y: f64, fill: f64| {
        let mut o = WorldObject::new(class, Vec3::new(x, y, 0.0));
        o.fill = fill;
        w.objects.insert(id.into(), o);
    };
    put("can", "can", -0.15, 0.05, 1.0);
    put("mug", "mug", 0.05, -0.15, 1.0);
    put("spam", "spam", -0.15, -0.25, 0.0);
    put("cheese", "cheese", 0.25, -0.25, 0.0);
    put("bowl", "bowl", 0.25, 0.15, 0.0);
    put("drawer", "drawer", -0.35, 0.35, 0.0);
    w.settle();
    w
}

/// Tabletop with the cheese already in the bowl.
pub fn occupied_bowl() -> WorldState {
    let mut w = tabletop();
    w.objects.get_mut("cheese").expect("tabletop").support = Some(Support::In("bowl".into()));
    w.settle();
    w
}

/// Tabletop with can on cheese on spam.
pub fn stacked() -> WorldState {
    let mut w = tabletop();
    w.objects.get_mut("cheese").expect("tabletop").support = Some(Support::On("spam".into()));
    w.objects.get_mut("can").expect("tabletop").support = Some(Support::On("cheese".into()));
    w.settle();
    w
}
