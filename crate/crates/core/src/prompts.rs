//! Prompt vocabulary, template expansion and per-class prompt aggregation.
//!
//! Three attribute lists (identity, presentation, appearance) of 20
//! templates each describe face images. Every template carries one `{}`
//! placeholder that is filled with the ISO/IEC 20059 term for the label.
//! A class prototype is the renormalized mean of the text embeddings of
//! all expanded prompts for that class.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::backend::{BackendError, EmbeddingBackend};
use crate::embedding::{l2_normalize, Embedding, EmbeddingError, Label, UnitEmbedding, NORM_FLOOR};

pub const ATTACK_TERM: &str = "face image morphing attack";
pub const BONA_FIDE_TERM: &str = "bona-fide presentation";

/// Template used for single-prompt inference.
pub const SINGLE_TEMPLATE: &str = "{}.";

pub const IDENTITY_TEMPLATES: [&str; 20] = [
    "male {}.",
    "female {}.",
    "young {}.",
    "elderly {}.",
    "child {}.",
    "adult {}.",
    "asian {}.",
    "black {}.",
    "white {}.",
    "latino {}.",
    "middle eastern {}.",
    "indian {}.",
    "blonde {}.",
    "brunette {}.",
    "redhead {}.",
    "tall {}.",
    "short {}.",
    "thin {}.",
    "obese {}.",
    "teen {}.",
];

pub const PRESENTATION_TEMPLATES: [&str; 20] = [
    "frontal {}.",
    "profile {}.",
    "tilted {}.",
    "rotated {}.",
    "upward {}.",
    "downward {}.",
    "sideways {}.",
    "leftward {}.",
    "rightward {}.",
    "angled {}.",
    "inclined {}.",
    "declined {}.",
    "oblique {}.",
    "twisted {}.",
    "turned {}.",
    "slanted {}.",
    "offcenter {}.",
    "misaligned {}.",
    "skewed {}.",
    "asymmetric {}.",
];

pub const APPEARANCE_TEMPLATES: [&str; 20] = [
    "bearded {}.",
    "moustached {}.",
    "smiling {}.",
    "frowning {}.",
    "eyeglasses {}.",
    "sunglasses {}.",
    "wrinkled {}.",
    "balding {}.",
    "occluded {}.",
    "scarred {}.",
    "pierced {}.",
    "tanned {}.",
    "pale {}.",
    "makeup {}.",
    "freckled {}.",
    "chubby-cheeked {}.",
    "sweaty {}.",
    "dirty {}.",
    "blinking {}.",
    "tearful {}.",
];

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("malformed template {0:?}: need exactly one \"{{}}\" and lowercase text")]
    MalformedTemplate(String),
    #[error("unknown prompt set selector {0:?}")]
    UnknownSelector(String),
    #[error("{label:?} prototype: {source}")]
    Degenerate {
        label: Label,
        #[source]
        source: EmbeddingError,
    },
    #[error("prompt {prompt:?}: {source}")]
    Backend {
        prompt: String,
        #[source]
        source: BackendError,
    },
}

/// A lowercase text template with exactly one `{}` placeholder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate<'a>(&'a str);

impl<'a> PromptTemplate<'a> {
    pub fn new(text: &'a str) -> Result<Self, PromptError> {
        let well_formed =
            text.matches("{}").count() == 1 && text.chars().all(|c| !c.is_uppercase());
        if well_formed {
            Ok(Self(text))
        } else {
            Err(PromptError::MalformedTemplate(text.to_owned()))
        }
    }

    pub fn as_str(&self) -> &'a str {
        self.0
    }
}

fn label_term(label: Label) -> &'static str {
    match label {
        Label::BonaFide => BONA_FIDE_TERM,
        Label::Attack => ATTACK_TERM,
    }
}

/// Fills the placeholder with the label term. With `dot_mode` the result
/// ends in exactly one `.`; without it any trailing `.` is stripped.
pub fn expand(template: &str, label: Label, dot_mode: bool) -> Result<String, PromptError> {
    let template = PromptTemplate::new(template)?;
    let filled = template.as_str().replacen("{}", label_term(label), 1);
    let stem = filled.strip_suffix('.').unwrap_or(&filled);
    Ok(if dot_mode {
        format!("{stem}.")
    } else {
        stem.to_owned()
    })
}

/// Which prompt lists feed the class prototypes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PromptSetSelector {
    Single,
    Id,
    Pr,
    Ap,
    IdPr,
    IdAp,
    PrAp,
    All,
}

impl PromptSetSelector {
    pub const ALL_SELECTORS: [PromptSetSelector; 8] = [
        Self::Single,
        Self::Id,
        Self::Pr,
        Self::Ap,
        Self::IdPr,
        Self::IdAp,
        Self::PrAp,
        Self::All,
    ];

    /// Template lists in concatenation order (identity, presentation,
    /// appearance).
    pub fn template_lists(self) -> Vec<&'static [&'static str]> {
        const SINGLE: [&str; 1] = [SINGLE_TEMPLATE];
        let (id, pr, ap): (&[&str], &[&str], &[&str]) = (
            &IDENTITY_TEMPLATES,
            &PRESENTATION_TEMPLATES,
            &APPEARANCE_TEMPLATES,
        );
        match self {
            Self::Single => vec![&SINGLE],
            Self::Id => vec![id],
            Self::Pr => vec![pr],
            Self::Ap => vec![ap],
            Self::IdPr => vec![id, pr],
            Self::IdAp => vec![id, ap],
            Self::PrAp => vec![pr, ap],
            Self::All => vec![id, pr, ap],
        }
    }

    pub fn templates(self) -> impl Iterator<Item = &'static str> {
        self.template_lists().into_iter().flatten().copied()
    }

    /// Prompts per class.
    pub fn prompt_count(self) -> usize {
        self.template_lists().iter().map(|l| l.len()).sum()
    }

    /// Display name, e.g. `pr+ap`.
    pub fn name(self) -> &'static str {
        match self {
            Self::Single => "single",
            Self::Id => "id",
            Self::Pr => "pr",
            Self::Ap => "ap",
            Self::IdPr => "id+pr",
            Self::IdAp => "id+ap",
            Self::PrAp => "pr+ap",
            Self::All => "all",
        }
    }

    /// Filesystem-safe name, e.g. `pr_ap`.
    pub fn file_key(self) -> &'static str {
        match self {
            Self::IdPr => "id_pr",
            Self::IdAp => "id_ap",
            Self::PrAp => "pr_ap",
            other => other.name(),
        }
    }
}

impl fmt::Display for PromptSetSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PromptSetSelector {
    type Err = PromptError;

    /// Accepts `pr+ap`, `pr_ap`, `Pr_Ap`, `PrAp` and so on.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '+' | '_' | '-' | ' '))
            .flat_map(char::to_lowercase)
            .collect();
        Ok(match key.as_str() {
            "single" | "ti" => Self::Single,
            "id" => Self::Id,
            "pr" => Self::Pr,
            "ap" => Self::Ap,
            "idpr" => Self::IdPr,
            "idap" => Self::IdAp,
            "prap" => Self::PrAp,
            "all" | "idprap" => Self::All,
            _ => return Err(PromptError::UnknownSelector(s.to_owned())),
        })
    }
}

pub fn prompts_for(selector: PromptSetSelector, label: Label, dot_mode: bool) -> Vec<String> {
    selector
        .templates()
        .map(|t| expand(t, label, dot_mode).expect("built-in templates are well formed"))
        .collect()
}

/// Expanded prompts for both classes: `(bona_fide, attack)`.
pub fn build_prompt_lists(
    selector: PromptSetSelector,
    dot_mode: bool,
) -> (Vec<String>, Vec<String>) {
    (
        prompts_for(selector, Label::BonaFide, dot_mode),
        prompts_for(selector, Label::Attack, dot_mode),
    )
}

/// Every distinct prompt string used by any selector: the two single
/// prompts followed by the 120 expanded list prompts.
pub fn all_prompt_strings(dot_mode: bool) -> Vec<String> {
    let mut out = Vec::with_capacity(122);
    for label in [Label::BonaFide, Label::Attack] {
        out.extend(prompts_for(PromptSetSelector::Single, label, dot_mode));
    }
    for label in [Label::BonaFide, Label::Attack] {
        out.extend(prompts_for(PromptSetSelector::All, label, dot_mode));
    }
    out
}

/// Mean of the given embeddings, renormalized to unit length.
///
/// With `normalize_before_average` every embedding is scaled to unit
/// length before it enters the mean. A single embedding reduces to its
/// own normalization.
pub fn aggregate_embeddings(
    embeddings: &[Embedding],
    normalize_before_average: bool,
) -> Result<UnitEmbedding, EmbeddingError> {
    let Some(first) = embeddings.first() else {
        return Err(EmbeddingError::Empty);
    };
    if embeddings.len() == 1 {
        return l2_normalize(first);
    }
    let dim = first.dim();
    let mut sum = vec![0.0f64; dim];
    for e in embeddings {
        if e.dim() != dim {
            return Err(EmbeddingError::DimensionMismatch {
                left: dim,
                right: e.dim(),
            });
        }
        if normalize_before_average {
            let unit = l2_normalize(e)?;
            sum.iter_mut().zip(unit.values()).for_each(|(s, v)| *s += v);
        } else {
            sum.iter_mut().zip(e.values()).for_each(|(s, v)| *s += v);
        }
    }
    let n = embeddings.len() as f64;
    let mean = Embedding::new(sum.into_iter().map(|s| s / n).collect())?;
    if mean.norm() < NORM_FLOOR {
        return Err(EmbeddingError::ZeroNorm { norm: mean.norm() });
    }
    l2_normalize(&mean)
}

/// Unit-norm text prototypes for both classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassPrototype {
    pub bona_fide: UnitEmbedding,
    pub attack: UnitEmbedding,
    pub selector: PromptSetSelector,
    pub dot_mode: bool,
    pub prompt_count: usize,
}

impl ClassPrototype {
    pub fn dim(&self) -> usize {
        self.bona_fide.dim()
    }

    pub fn for_label(&self, label: Label) -> &UnitEmbedding {
        match label {
            Label::BonaFide => &self.bona_fide,
            Label::Attack => &self.attack,
        }
    }
}

/// Embeds every prompt of the selected lists and builds both prototypes.
pub fn aggregate(
    backend: &dyn EmbeddingBackend,
    selector: PromptSetSelector,
    dot_mode: bool,
    normalize_before_average: bool,
) -> Result<ClassPrototype, PromptError> {
    let class = |label: Label| -> Result<UnitEmbedding, PromptError> {
        let embeddings = prompts_for(selector, label, dot_mode)
            .into_iter()
            .map(|prompt| {
                backend
                    .embed_text(&prompt)
                    .map_err(|source| PromptError::Backend { prompt, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        aggregate_embeddings(&embeddings, normalize_before_average)
            .map_err(|source| PromptError::Degenerate { label, source })
    };
    Ok(ClassPrototype {
        bona_fide: class(Label::BonaFide)?,
        attack: class(Label::Attack)?,
        selector,
        dot_mode,
        prompt_count: selector.prompt_count(),
    })
}
