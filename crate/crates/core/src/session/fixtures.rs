//! Gesture-sentence fixtures: one scripted demonstration per catalog
//! sentence, with the intent and complexity it must produce.

use super::script::{GestureScript, ScriptEpisode, Step};
use super::{run_session, Inbound, Mode, Outbound, SessionConfig, SessionError, SessionFile, SessionHeader};
use crate::sentence::Action;
use crate::simworld::{apply, scene_document, scenes, Primitive, WorldState};

#[derive(Clone, Debug, PartialEq)]
pub struct SentenceFixture {
    pub name: &'static str,
    pub world: WorldState,
    pub script: GestureScript,
    pub intent: &'static str,
    pub complexity: usize,
}

/// Tabletop with `object` picked up.
pub fn holding(object: &str) -> WorldState {
    let mut w = scenes::tabletop();
    for p in [
        Primitive::Approach { object: object.into() },
        Primitive::Grasp { object: object.into() },
        Primitive::Lift,
    ] {
        w = apply(&w, &p).expect("tabletop objects can be picked up");
    }
    w
}

fn open_drawer() -> WorldState {
    scenes::builtin("open-drawer").expect("built-in scene")
}

fn swipe(label: &str) -> ScriptEpisode {
    ScriptEpisode::new(vec![Step::Swipe { label: label.into(), seconds: 1.0 }])
}

pub fn sentence_fixtures() -> Vec<SentenceFixture> {
    use ScriptEpisode as E;
    let f = |name, world, episodes, intent, complexity| SentenceFixture {
        name,
        world,
        script: GestureScript::new(episodes),
        intent,
        complexity,
    };
    let flash = E::flash;
    vec![
        f("rotate-held", holding("spam"), vec![E::pose("three"), flash()], "(rotate, spam, [])", 0),
        f("place-held", holding("can"), vec![E::pinch(0.05)], "(place, can, [])", 0),
        f("move-right", scenes::grid9(), vec![swipe("swipe_right")], "(move_cartesian, -, [right])", 0),
        f("pick-can", scenes::tabletop(), vec![E::act_on("grab", "can")], "(pick, can, [])", 1),
        f("open-drawer", scenes::tabletop(), vec![E::act_on("two", "drawer")], "(open, drawer, [])", 1),
        f("close-drawer", open_drawer(), vec![E::act_on("two", "drawer")], "(close, drawer, [])", 1),
        f("pour-held", holding("can"), vec![E::pose("four"), E::point("bowl"), flash()], "(pour, can, [bowl])", 1),
        f("put-held", holding("spam"), vec![E::pose("thumbsup"), E::point("bowl"), flash()], "(put, spam, [bowl])", 1),
        f("pour-spam", scenes::tabletop(), vec![E::act_on("four", "spam"), E::point("bowl"), flash()], "(pour, spam, [bowl])", 2),
        f("swap-can-bowl", scenes::tabletop(), vec![E::act_on("five", "can"), E::point("bowl")], "(swap, can, [bowl])", 2),
        f("put-spam-drawer", scenes::tabletop(), vec![E::act_on("thumbsup", "spam"), E::point("drawer"), flash()], "(put, spam, [drawer])", 2),
        // one object and one parameter: two filled slots
        f("rotate-spam", scenes::tabletop(), vec![E::act_on("three", "spam"), E::pinch(0.1)], "(rotate, spam, [180°])", 2),
        f("pour-can-60", scenes::tabletop(), vec![E::act_on("four", "can"), E::point("bowl"), E::pinch(0.1 / 3.0)], "(pour, can, [bowl, 60°])", 3),
        f(
            "thumbsup-move",
            scenes::tabletop(),
            vec![E::pose("thumbsup"), E::point("mug"), E::point("bowl"), E::pinch(0.05)],
            "(move, mug, [bowl, 50%])",
            3,
        ),
    ]
}

/// What a fixture produced: completed sentences with their complexity and
/// the intents estimated from them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FixtureResult {
    pub sentences: Vec<(String, usize)>,
    pub intents: Vec<String>,
    pub clarifications: Vec<String>,
}

impl FixtureResult {
    pub fn matches(&self, f: &SentenceFixture) -> bool {
        self.intents == [f.intent] && self.sentences.iter().map(|s| s.1).collect::<Vec<_>>() == [f.complexity]
    }
}

/// Runs the fixture's script in high-level gesture mode.
pub fn run_fixture(f: &SentenceFixture, config: &SessionConfig) -> Result<FixtureResult, SessionError> {
    let mut file = SessionFile::new(SessionHeader {
        world: Some(scene_document(&f.world)),
        mode: Mode::HighLevelGesture,
        ..Default::default()
    });
    file.push(0.0, Inbound::Script { script: f.script.clone() });
    let (_, log) = run_session(&file, config)?;
    let mut out = FixtureResult::default();
    for m in log {
        match m.body {
            Outbound::Sentence { state: super::SentenceState::Complete, text, complexity, .. } => out.sentences.push((text, complexity)),
            Outbound::Intent { text, .. } => out.intents.push(text),
            Outbound::Clarification { reason } => out.clarifications.push(reason),
            _ => {}
        }
    }
    Ok(out)
}

/// Actions covered by the fixtures.
pub fn covered_actions() -> Vec<Action> {
    let mut v: Vec<Action> = sentence_fixtures()
        .iter()
        .filter_map(|f| f.intent.trim_start_matches('(').split(',').next()?.parse().ok())
        .collect();
    v.sort();
    v.dedup();
    v
}
