//! Named experiment settings and the string forms of CLI values.

use madprompts_core::preprocess::ProfileName;
use madprompts_core::{Label, PromptSetSelector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Preset {
    pub name: &'static str,
    pub selector: PromptSetSelector,
    pub dot_mode: bool,
    pub profile: ProfileName,
}

const fn preset(
    name: &'static str,
    selector: PromptSetSelector,
    dot_mode: bool,
    profile: ProfileName,
) -> Preset {
    Preset {
        name,
        selector,
        dot_mode,
        profile,
    }
}

use PromptSetSelector as S;

pub const PRESETS: [Preset; 10] = [
    preset("ti", S::Single, false, ProfileName::Half),
    preset("ti-no-dot", S::Single, false, ProfileName::ClipNative),
    preset("ti-dot", S::Single, true, ProfileName::ClipNative),
    preset("id", S::Id, true, ProfileName::ClipNative),
    preset("pr", S::Pr, true, ProfileName::ClipNative),
    preset("ap", S::Ap, true, ProfileName::ClipNative),
    preset("id+pr", S::IdPr, true, ProfileName::ClipNative),
    preset("id+ap", S::IdAp, true, ProfileName::ClipNative),
    preset("pr+ap", S::PrAp, true, ProfileName::ClipNative),
    preset("all", S::All, true, ProfileName::ClipNative),
];

fn squash(s: &str) -> String {
    s.chars()
        .filter(|c| !matches!(c, '+' | '_' | '-' | ' ' | '/'))
        .flat_map(char::to_lowercase)
        .collect()
}

/// Case and punctuation are ignored; `ti w/o dot` names the same preset
/// as `ti-no-dot`.
pub fn find_preset(name: &str) -> Option<Preset> {
    let key = squash(name).replace("tiwodot", "tinodot");
    PRESETS.iter().copied().find(|p| squash(p.name) == key)
}

pub fn parse_profile(s: &str) -> Option<ProfileName> {
    match s.to_ascii_lowercase().as_str() {
        "clip" | "clip-native" | "clip_native" => Some(ProfileName::ClipNative),
        "half" | "0.5" => Some(ProfileName::Half),
        _ => None,
    }
}

pub fn profile_str(p: ProfileName) -> &'static str {
    match p {
        ProfileName::ClipNative => "clip",
        ProfileName::Half => "half",
    }
}

pub fn parse_label(s: &str) -> Option<Label> {
    match squash(s).as_str() {
        "0" | "bf" | "bonafide" => Some(Label::BonaFide),
        "1" | "ma" | "attack" | "morph" => Some(Label::Attack),
        _ => None,
    }
}

/// File-name stem for one evaluation setting, e.g. `pr_ap_dot`.
pub fn run_key(selector: PromptSetSelector, dot_mode: bool, profile: ProfileName) -> String {
    let dot = if dot_mode { "dot" } else { "nodot" };
    match profile {
        ProfileName::ClipNative => format!("{}_{dot}", selector.file_key()),
        ProfileName::Half => format!("{}_{dot}_half", selector.file_key()),
    }
}
