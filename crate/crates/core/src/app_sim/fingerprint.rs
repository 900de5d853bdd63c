use std::cmp::Ordering;
use std::fmt::{self, Write as _};
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use super::bundle::{AppBundle, ComponentRef};
use super::sim::{effective, SimState};

/// Identity of a full simulator state.
///
/// `canonical` lists the current activity followed by the effective
/// visibility, enabled flag and text of every declared component in the app,
/// so it captures state hidden on other screens too. `short_id` is the
/// FNV-1a 32-bit hash of `canonical` as eight lowercase hex digits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fingerprint {
    pub canonical: String,
    pub short_id: String,
}

impl Fingerprint {
    pub fn from_canonical(canonical: String) -> Self {
        let short_id = format!("{:08x}", fnv1a_32(canonical.as_bytes()));
        Self {
            canonical,
            short_id,
        }
    }

    /// The activity named in the canonical prefix.
    pub fn activity(&self) -> &str {
        self.canonical
            .strip_prefix("activity=")
            .and_then(|rest| rest.split(';').next())
            .unwrap_or("")
    }

    pub fn is_consistent(&self) -> bool {
        self.short_id == format!("{:08x}", fnv1a_32(self.canonical.as_bytes()))
    }
}

// Identity is the canonical string alone; short_id is derived from it.
impl PartialEq for Fingerprint {
    fn eq(&self, other: &Self) -> bool {
        self.canonical == other.canonical
    }
}

impl Eq for Fingerprint {}

impl Hash for Fingerprint {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.canonical.hash(state);
    }
}

impl PartialOrd for Fingerprint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Fingerprint {
    fn cmp(&self, other: &Self) -> Ordering {
        self.canonical.cmp(&other.canonical)
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.short_id)
    }
}

pub fn fnv1a_32(bytes: &[u8]) -> u32 {
    let mut hash: u32 = 0x811c_9dc5;
    for &b in bytes {
        hash ^= u32::from(b);
        hash = hash.wrapping_mul(0x0100_0193);
    }
    hash
}

fn escape_into(out: &mut String, text: &str) {
    for c in text.chars() {
        match c {
            ';' | ',' | '\\' => {
                out.push('\\');
                out.push(c);
            }
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
}

pub fn fingerprint(bundle: &AppBundle, state: &SimState) -> Fingerprint {
    let mut canonical = String::with_capacity(32 * bundle.component_count() + 16);
    let _ = write!(canonical, "activity={};", state.current_activity);
    for activity in &bundle.activities {
        for decl in &activity.components {
            let key = ComponentRef::new(activity.id.clone(), decl.id.clone());
            let (v, e, t) = effective(decl, state.overrides.get(&key));
            let _ = write!(
                canonical,
                "{}.{}:v={},e={},t=",
                activity.id,
                decl.id,
                u8::from(v),
                u8::from(e)
            );
            escape_into(&mut canonical, &t);
            canonical.push(';');
        }
    }
    Fingerprint::from_canonical(canonical)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_vectors() {
        // Published FNV-1a 32-bit test vectors.
        assert_eq!(fnv1a_32(b""), 0x811c9dc5);
        assert_eq!(fnv1a_32(b"a"), 0xe40c292c);
        assert_eq!(fnv1a_32(b"foobar"), 0xbf9cf968);
    }

    #[test]
    fn escaping() {
        let mut s = String::new();
        escape_into(&mut s, "a;b,c\\d\ne");
        assert_eq!(s, "a\\;b\\,c\\\\d\\ne");
    }

    #[test]
    fn short_id_is_eight_lower_hex() {
        let fp = Fingerprint::from_canonical("activity=Main;".into());
        assert_eq!(fp.short_id.len(), 8);
        assert!(fp
            .short_id
            .chars()
            .all(|c| matches!(c, '0'..='9' | 'a'..='f')));
        assert!(fp.is_consistent());
        assert_eq!(fp.activity(), "Main");
    }
}
