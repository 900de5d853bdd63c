//! In-memory form of an app bundle: manifest, activity layouts and logic handlers.

use std::borrow::Borrow;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Screen width in pixels. Every component must fit inside the canvas.
pub const CANVAS_WIDTH: u32 = 270;
/// Screen height in pixels.
pub const CANVAS_HEIGHT: u32 = 480;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }
    };
}

string_id!(
    /// Name of a screen (activity) in the app.
    ActivityId
);
string_id!(
    /// Name of a GUI component, unique within its activity.
    ComponentId
);

/// A location in the bundle's source files. `line` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SourceLoc {
    pub file: String,
    pub line: usize,
}

impl SourceLoc {
    pub fn new(file: impl Into<String>, line: usize) -> Self {
        Self {
            file: file.into(),
            line,
        }
    }
}

impl fmt::Display for SourceLoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file, self.line)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentType {
    Button,
    Checkbox,
    Spinner,
    TextField,
    ListItem,
    MenuItem,
}

impl ComponentType {
    pub const ALL: [ComponentType; 6] = [
        ComponentType::Button,
        ComponentType::Checkbox,
        ComponentType::Spinner,
        ComponentType::TextField,
        ComponentType::ListItem,
        ComponentType::MenuItem,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ComponentType::Button => "button",
            ComponentType::Checkbox => "checkbox",
            ComponentType::Spinner => "spinner",
            ComponentType::TextField => "text_field",
            ComponentType::ListItem => "list_item",
            ComponentType::MenuItem => "menu_item",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for ComponentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// User action on a component. Only taps are modeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Tap,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Tap => "tap",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tap" => Some(Action::Tap),
            _ => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Pixel rectangle `(x, y, w, h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bounds {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Bounds {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn fits_canvas(&self) -> bool {
        self.w >= 1
            && self.h >= 1
            && u64::from(self.x) + u64::from(self.w) <= u64::from(CANVAS_WIDTH)
            && u64::from(self.y) + u64::from(self.h) <= u64::from(CANVAS_HEIGHT)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentDecl {
    pub id: ComponentId,
    pub ctype: ComponentType,
    pub text: String,
    pub bounds: Bounds,
    pub initial_visible: bool,
    pub initial_enabled: bool,
    pub source: SourceLoc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityDecl {
    pub id: ActivityId,
    /// Path of the activity's logic file, relative to the bundle root.
    pub class_file: String,
    /// Sorted by component id.
    pub components: Vec<ComponentDecl>,
    pub source: SourceLoc,
}

impl ActivityDecl {
    pub fn component(&self, id: &str) -> Option<&ComponentDecl> {
        self.components
            .binary_search_by(|c| c.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.components[i])
    }
}

/// A reference to a component in a specific activity, e.g. `Main.btnGo`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ComponentRef {
    pub activity: ActivityId,
    pub component: ComponentId,
}

impl ComponentRef {
    pub fn new(activity: impl Into<ActivityId>, component: impl Into<ComponentId>) -> Self {
        Self {
            activity: activity.into(),
            component: component.into(),
        }
    }
}

impl From<&str> for ComponentRef {
    /// Panics if `s` is not of the form `Activity.Component`; test convenience only.
    fn from(s: &str) -> Self {
        let (a, c) = s.split_once('.').expect("expected Activity.Component");
        ComponentRef::new(a, c)
    }
}

impl fmt::Display for ComponentRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.activity, self.component)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Effect {
    Navigate(ActivityId),
    SetVisible(ComponentRef, bool),
    SetEnabled(ComponentRef, bool),
    SetText(ComponentRef, String),
    Crash(String),
    Exit,
}

impl Effect {
    pub fn is_terminal_or_navigation(&self) -> bool {
        matches!(self, Effect::Navigate(_) | Effect::Crash(_) | Effect::Exit)
    }

    pub fn target(&self) -> Option<&ComponentRef> {
        match self {
            Effect::SetVisible(r, _) | Effect::SetEnabled(r, _) | Effect::SetText(r, _) => Some(r),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EffectDecl {
    pub effect: Effect,
    pub source: SourceLoc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HandlerDecl {
    pub trigger: ComponentRef,
    pub action: Action,
    pub effects: Vec<EffectDecl>,
    pub source: SourceLoc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppBundle {
    pub app_id: String,
    pub version: String,
    pub launch_activity: ActivityId,
    /// Sorted by activity id.
    pub activities: Vec<ActivityDecl>,
    /// In file order, files visited in sorted path order.
    pub handlers: Vec<HandlerDecl>,
    /// Raw text of every source file, keyed by bundle-relative path.
    pub sources: BTreeMap<String, String>,
}

impl AppBundle {
    pub fn activity(&self, id: &str) -> Option<&ActivityDecl> {
        self.activities
            .binary_search_by(|a| a.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.activities[i])
    }

    pub fn component(&self, r: &ComponentRef) -> Option<&ComponentDecl> {
        self.activity(r.activity.as_str())?
            .component(r.component.as_str())
    }

    pub fn handler(&self, activity: &str, component: &str, action: Action) -> Option<&HandlerDecl> {
        self.handlers.iter().find(|h| {
            h.action == action
                && h.trigger.activity.as_str() == activity
                && h.trigger.component.as_str() == component
        })
    }

    pub fn component_count(&self) -> usize {
        self.activities.iter().map(|a| a.components.len()).sum()
    }

    /// Returns the source line at `loc`, if it exists.
    pub fn source_line(&self, loc: &SourceLoc) -> Option<&str> {
        self.sources
            .get(&loc.file)?
            .lines()
            .nth(loc.line.checked_sub(1)?)
    }
}
