//! Loader for the on-disk bundle format.
//!
//! A bundle directory holds:
//!
//! ```text
//! manifest.json            {"app_id": .., "version": .., "launch": <ActivityId>}
//! layouts/<Activity>.layout
//! src/<Name>.logic
//! ```
//!
//! Layout lines:
//!
//! ```text
//! activity <id> class src/<Name>.logic
//! component <id> type=<ctype> text="<text>" bounds=<x>,<y>,<w>,<h> [visible=<bool>] [enabled=<bool>]
//! ```
//!
//! Logic files are a sequence of `on tap <Activity>.<Component>:` blocks, each
//! followed by one or more indented effect lines. `#` comments and blank
//! lines are accepted in both formats.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use super::bundle::*;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("{file}:{line}: dangling reference to `{target}`")]
    DanglingReference {
        file: String,
        line: usize,
        target: String,
    },
    #[error("missing manifest.json in {0}")]
    MissingManifest(PathBuf),
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl BundleError {
    fn parse(file: &str, line: usize, message: impl Into<String>) -> Self {
        BundleError::Parse {
            file: file.to_owned(),
            line,
            message: message.into(),
        }
    }

    fn dangling(loc: &SourceLoc, target: impl Into<String>) -> Self {
        BundleError::DanglingReference {
            file: loc.file.clone(),
            line: loc.line,
            target: target.into(),
        }
    }

    /// The `(file, line)` this error points at, when it has one.
    pub fn location(&self) -> Option<SourceLoc> {
        match self {
            BundleError::Parse { file, line, .. }
            | BundleError::DanglingReference { file, line, .. } => {
                Some(SourceLoc::new(file.clone(), *line))
            }
            _ => None,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    app_id: String,
    version: String,
    launch: String,
}

const MANIFEST: &str = "manifest.json";

pub fn load_bundle(root: impl AsRef<Path>) -> Result<AppBundle, BundleError> {
    let root = root.as_ref();
    let manifest_path = root.join(MANIFEST);
    if !manifest_path.is_file() {
        return Err(BundleError::MissingManifest(root.to_path_buf()));
    }

    let mut sources = BTreeMap::new();
    let manifest_text = read(&manifest_path)?;
    let manifest: Manifest = serde_json::from_str(&manifest_text)
        .map_err(|e| BundleError::parse(MANIFEST, e.line().max(1), e.to_string()))?;
    sources.insert(MANIFEST.to_owned(), manifest_text);

    let mut activities = Vec::new();
    for rel in list_files(root, "layouts", "layout")? {
        let text = read(&root.join(&rel))?;
        activities.push(parse_layout(&rel, &text)?);
        sources.insert(rel, text);
    }

    let mut handlers = Vec::new();
    for rel in list_files(root, "src", "logic")? {
        let text = read(&root.join(&rel))?;
        handlers.extend(parse_logic(&rel, &text)?);
        sources.insert(rel, text);
    }

    activities.sort_by(|a, b| a.id.cmp(&b.id));
    let bundle = AppBundle {
        app_id: manifest.app_id,
        version: manifest.version,
        launch_activity: ActivityId::new(manifest.launch),
        activities,
        handlers,
        sources,
    };
    validate(&bundle)?;
    Ok(bundle)
}

fn read(path: &Path) -> Result<String, BundleError> {
    fs::read_to_string(path).map_err(|source| BundleError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Bundle-relative paths of `dir/*.ext`, sorted. A missing directory is empty.
fn list_files(root: &Path, dir: &str, ext: &str) -> Result<Vec<String>, BundleError> {
    let path = root.join(dir);
    if !path.is_dir() {
        return Ok(Vec::new());
    }
    let entries = fs::read_dir(&path).map_err(|source| BundleError::Io {
        path: path.clone(),
        source,
    })?;
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| BundleError::Io {
            path: path.clone(),
            source,
        })?;
        let p = entry.path();
        if p.is_file() && p.extension().is_some_and(|e| e == ext) {
            if let Some(name) = p.file_name().and_then(|n| n.to_str()) {
                out.push(format!("{dir}/{name}"));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Splits a line into whitespace-separated tokens. Double-quoted sections
/// (with `\"`, `\\` and `\n` escapes) may contain whitespace; quotes are kept
/// out of the token text and the token is flagged as having been quoted.
fn tokenize(line: &str) -> Result<Vec<String>, String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut in_token = false;
    let mut chars = line.chars();
    while let Some(c) = chars.next() {
        match c {
            '"' => {
                in_token = true;
                loop {
                    match chars.next() {
                        Some('"') => break,
                        Some('\\') => match chars.next() {
                            Some('n') => cur.push('\n'),
                            Some(e @ ('"' | '\\')) => cur.push(e),
                            Some(other) => return Err(format!("unknown escape `\\{other}`")),
                            None => return Err("unterminated string".into()),
                        },
                        Some(ch) => cur.push(ch),
                        None => return Err("unterminated string".into()),
                    }
                }
            }
            c if c.is_whitespace() => {
                if in_token {
                    tokens.push(std::mem::take(&mut cur));
                    in_token = false;
                }
            }
            c => {
                in_token = true;
                cur.push(c);
            }
        }
    }
    if in_token {
        tokens.push(cur);
    }
    Ok(tokens)
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

fn parse_bounds(s: &str) -> Option<Bounds> {
    let parts: Vec<u32> = s
        .split(',')
        .map(|p| p.parse().ok())
        .collect::<Option<_>>()?;
    match parts[..] {
        [x, y, w, h] => Some(Bounds::new(x, y, w, h)),
        _ => None,
    }
}

fn is_blank_or_comment(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

pub(crate) fn parse_layout(file: &str, text: &str) -> Result<ActivityDecl, BundleError> {
    let mut header: Option<(ActivityId, String, SourceLoc)> = None;
    let mut components: Vec<ComponentDecl> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if is_blank_or_comment(raw) {
            continue;
        }
        let err = |m: String| BundleError::parse(file, line_no, m);
        let tokens = tokenize(raw).map_err(err)?;
        match tokens[0].as_str() {
            "activity" => {
                if header.is_some() {
                    return Err(err("duplicate `activity` line".into()));
                }
                let [_, id, kw, class] = &tokens[..] else {
                    return Err(err("expected `activity <id> class <path>`".into()));
                };
                if kw != "class" || !is_ident(id) {
                    return Err(err("expected `activity <id> class <path>`".into()));
                }
                let stem = file
                    .strip_prefix("layouts/")
                    .and_then(|f| f.strip_suffix(".layout"));
                if stem != Some(id.as_str()) {
                    return Err(err(format!(
                        "activity `{id}` must be declared in layouts/{id}.layout"
                    )));
                }
                if !class.starts_with("src/") || !class.ends_with(".logic") {
                    return Err(err(format!(
                        "class file `{class}` must be src/<Name>.logic"
                    )));
                }
                header = Some((
                    ActivityId::new(id.clone()),
                    class.clone(),
                    SourceLoc::new(file, line_no),
                ));
            }
            "component" => {
                if header.is_none() {
                    return Err(err("`component` before `activity` line".into()));
                }
                components.push(parse_component(&tokens, SourceLoc::new(file, line_no))?);
            }
            other => return Err(err(format!("unknown directive `{other}`"))),
        }
    }

    let Some((id, class_file, source)) = header else {
        return Err(BundleError::parse(file, 1, "missing `activity` line"));
    };
    let mut seen = BTreeSet::new();
    for c in &components {
        if !seen.insert(c.id.clone()) {
            return Err(BundleError::parse(
                file,
                c.source.line,
                format!("duplicate component `{}`", c.id),
            ));
        }
    }
    components.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(ActivityDecl {
        id,
        class_file,
        components,
        source,
    })
}

fn parse_component(tokens: &[String], source: SourceLoc) -> Result<ComponentDecl, BundleError> {
    let err = |m: String| BundleError::parse(&source.file, source.line, m);
    let id = tokens
        .get(1)
        .filter(|t| is_ident(t))
        .ok_or_else(|| err("expected component id".into()))?;

    let mut ctype = None;
    let mut text = None;
    let mut bounds = None;
    let mut visible = None;
    let mut enabled = None;
    for tok in &tokens[2..] {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| err(format!("expected key=value, found `{tok}`")))?;
        let dup = |set: bool| {
            if set {
                Err(err(format!("duplicate attribute `{key}`")))
            } else {
                Ok(())
            }
        };
        match key {
            "type" => {
                dup(ctype.is_some())?;
                ctype = Some(
                    ComponentType::parse(value)
                        .ok_or_else(|| err(format!("unknown component type `{value}`")))?,
                );
            }
            "text" => {
                dup(text.is_some())?;
                text = Some(value.to_owned());
            }
            "bounds" => {
                dup(bounds.is_some())?;
                bounds = Some(
                    parse_bounds(value)
                        .ok_or_else(|| err(format!("malformed bounds `{value}`")))?,
                );
            }
            "visible" => {
                dup(visible.is_some())?;
                visible =
                    Some(parse_bool(value).ok_or_else(|| err(format!("bad bool `{value}`")))?);
            }
            "enabled" => {
                dup(enabled.is_some())?;
                enabled =
                    Some(parse_bool(value).ok_or_else(|| err(format!("bad bool `{value}`")))?);
            }
            _ => return Err(err(format!("unknown attribute `{key}`"))),
        }
    }

    let ctype = ctype.ok_or_else(|| err("missing `type=`".into()))?;
    let text = text.ok_or_else(|| err("missing `text=`".into()))?;
    let bounds = bounds.ok_or_else(|| err("missing `bounds=`".into()))?;
    if !bounds.fits_canvas() {
        return Err(err(format!(
            "bounds {},{},{},{} empty or outside the {CANVAS_WIDTH}x{CANVAS_HEIGHT} canvas",
            bounds.x, bounds.y, bounds.w, bounds.h
        )));
    }
    Ok(ComponentDecl {
        id: ComponentId::new(id.clone()),
        ctype,
        text,
        bounds,
        initial_visible: visible.unwrap_or(true),
        initial_enabled: enabled.unwrap_or(true),
        source,
    })
}

fn parse_component_ref(s: &str) -> Option<ComponentRef> {
    let (a, c) = s.split_once('.')?;
    (is_ident(a) && is_ident(c)).then(|| ComponentRef::new(a, c))
}

pub(crate) fn parse_logic(file: &str, text: &str) -> Result<Vec<HandlerDecl>, BundleError> {
    let mut handlers: Vec<HandlerDecl> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if is_blank_or_comment(raw) {
            continue;
        }
        let err = |m: String| BundleError::parse(file, line_no, m);
        let indented = raw.starts_with(|c: char| c.is_whitespace());
        let tokens = tokenize(raw).map_err(err)?;

        if !indented {
            let [on, action, target] = &tokens[..] else {
                return Err(err("expected `on tap <Activity>.<Component>:`".into()));
            };
            if on != "on" {
                return Err(err(format!("expected `on`, found `{on}`")));
            }
            let action = Action::parse(action)
                .ok_or_else(|| err(format!("unsupported action `{action}`")))?;
            let target = target
                .strip_suffix(':')
                .and_then(parse_component_ref)
                .ok_or_else(|| err(format!("malformed trigger `{target}`")))?;
            if let Some(h) = handlers.last() {
                if h.effects.is_empty() {
                    return Err(BundleError::parse(
                        file,
                        h.source.line,
                        "handler has no effects",
                    ));
                }
            }
            handlers.push(HandlerDecl {
                trigger: target,
                action,
                effects: Vec::new(),
                source: SourceLoc::new(file, line_no),
            });
            continue;
        }

        let Some(handler) = handlers.last_mut() else {
            return Err(err("effect line outside of an `on` block".into()));
        };
        let effect = parse_effect(&tokens).map_err(err)?;
        if let Some(prev) = handler.effects.last() {
            if prev.effect.is_terminal_or_navigation() {
                return Err(err(
                    "navigate/crash/exit must be the last effect of a handler".into(),
                ));
            }
        }
        handler.effects.push(EffectDecl {
            effect,
            source: SourceLoc::new(file, line_no),
        });
    }

    if let Some(h) = handlers.last() {
        if h.effects.is_empty() {
            return Err(BundleError::parse(
                file,
                h.source.line,
                "handler has no effects",
            ));
        }
    }
    Ok(handlers)
}

fn parse_effect(tokens: &[String]) -> Result<Effect, String> {
    let bad = || format!("malformed effect `{}`", tokens.join(" "));
    let target = |s: &str| parse_component_ref(s).ok_or_else(|| format!("malformed target `{s}`"));
    match tokens {
        [kw, activity] if kw == "navigate" && is_ident(activity) => {
            Ok(Effect::Navigate(ActivityId::new(activity.clone())))
        }
        [kw, r, kv] if kw == "set" => {
            let r = target(r)?;
            let (key, value) = kv.split_once('=').ok_or_else(bad)?;
            let value = parse_bool(value).ok_or_else(|| format!("bad bool `{value}`"))?;
            match key {
                "visible" => Ok(Effect::SetVisible(r, value)),
                "enabled" => Ok(Effect::SetEnabled(r, value)),
                _ => Err(format!("unknown property `{key}`")),
            }
        }
        [kw, r, text] if kw == "settext" => Ok(Effect::SetText(target(r)?, text.clone())),
        [kw, msg] if kw == "crash" => Ok(Effect::Crash(msg.clone())),
        [kw] if kw == "exit" => Ok(Effect::Exit),
        _ => Err(bad()),
    }
}

/// Checks every structural invariant and cross-reference of a bundle.
///
/// Loaded bundles are validated by [`load_bundle`]; bundles assembled in code
/// should be passed through here before simulation.
pub fn validate(bundle: &AppBundle) -> Result<(), BundleError> {
    let manifest_loc = || {
        let line = bundle
            .sources
            .get(MANIFEST)
            .and_then(|t| t.lines().position(|l| l.contains("\"launch\"")))
            .map_or(1, |i| i + 1);
        SourceLoc::new(MANIFEST, line)
    };

    for pair in bundle.activities.windows(2) {
        if pair[0].id >= pair[1].id {
            return Err(BundleError::parse(
                &pair[1].source.file,
                pair[1].source.line,
                format!("duplicate or unsorted activity `{}`", pair[1].id),
            ));
        }
    }
    for activity in &bundle.activities {
        for pair in activity.components.windows(2) {
            if pair[0].id >= pair[1].id {
                return Err(BundleError::parse(
                    &pair[1].source.file,
                    pair[1].source.line,
                    format!("duplicate or unsorted component `{}`", pair[1].id),
                ));
            }
        }
        for c in &activity.components {
            if !c.bounds.fits_canvas() {
                return Err(BundleError::parse(
                    &c.source.file,
                    c.source.line,
                    "bounds empty or outside the canvas",
                ));
            }
        }
        if !bundle.sources.is_empty() && !bundle.sources.contains_key(&activity.class_file) {
            return Err(BundleError::dangling(
                &activity.source,
                activity.class_file.clone(),
            ));
        }
    }
    if bundle.activity(bundle.launch_activity.as_str()).is_none() {
        return Err(BundleError::dangling(
            &manifest_loc(),
            bundle.launch_activity.to_string(),
        ));
    }

    let mut triggers = BTreeSet::new();
    for h in &bundle.handlers {
        if bundle.component(&h.trigger).is_none() {
            return Err(BundleError::dangling(&h.source, h.trigger.to_string()));
        }
        if !triggers.insert((h.trigger.clone(), h.action)) {
            return Err(BundleError::parse(
                &h.source.file,
                h.source.line,
                format!("duplicate handler for {} {}", h.action, h.trigger),
            ));
        }
        if h.effects.is_empty() {
            return Err(BundleError::parse(
                &h.source.file,
                h.source.line,
                "handler has no effects",
            ));
        }
        let last = h.effects.len() - 1;
        for (i, e) in h.effects.iter().enumerate() {
            if i != last && e.effect.is_terminal_or_navigation() {
                return Err(BundleError::parse(
                    &e.source.file,
                    e.source.line,
                    "navigate/crash/exit must be the last effect of a handler",
                ));
            }
            match &e.effect {
                Effect::Navigate(a) if bundle.activity(a.as_str()).is_none() => {
                    return Err(BundleError::dangling(&e.source, a.to_string()));
                }
                other => {
                    if let Some(r) = other.target() {
                        if bundle.component(r).is_none() {
                            return Err(BundleError::dangling(&e.source, r.to_string()));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}
