//! The four detection prompt templates.
//!
//! TP1 is the text-only baseline; TP2 adds one human/AI example pair with
//! the stated relationship between the two poems; IP2 adds images
//! reflecting the poems' content; IP3 additionally discloses the detailed
//! provenance of the example poems and of both images.
//!
//! The English texts are the published form and are pinned byte-for-byte
//! by golden-file tests; the Chinese texts are a faithful mirror for
//! backends that work better with Chinese instructions. Placeholders in
//! `{{...}}` are substituted by the prompt builder; the two `Image`
//! placeholders become inline attachments.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    Tp1,
    Tp2,
    Ip2,
    Ip3,
}

impl PromptKind {
    pub fn all() -> [PromptKind; 4] {
        [PromptKind::Tp1, PromptKind::Tp2, PromptKind::Ip2, PromptKind::Ip3]
    }

    /// TP2, IP2 and IP3 carry one example pair.
    pub fn needs_example(self) -> bool {
        !matches!(self, PromptKind::Tp1)
    }

    /// IP2 and IP3 attach images.
    pub fn needs_images(self) -> bool {
        matches!(self, PromptKind::Ip2 | PromptKind::Ip3)
    }

    pub fn name(self) -> &'static str {
        match self {
            PromptKind::Tp1 => "TP1",
            PromptKind::Tp2 => "TP2",
            PromptKind::Ip2 => "IP2",
            PromptKind::Ip3 => "IP3",
        }
    }
}

impl std::fmt::Display for PromptKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PromptKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tp1" => Ok(PromptKind::Tp1),
            "tp2" => Ok(PromptKind::Tp2),
            "ip2" => Ok(PromptKind::Ip2),
            "ip3" => Ok(PromptKind::Ip3),
            other => Err(format!("unknown prompt kind {other:?}")),
        }
    }
}

/// Which instruction language is sent. The default is the published form.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptLanguage {
    #[default]
    English,
    Chinese,
}

impl std::str::FromStr for PromptLanguage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "en" | "english" => Ok(PromptLanguage::English),
            "zh" | "chinese" => Ok(PromptLanguage::Chinese),
            other => Err(format!("unknown prompt language {other:?}")),
        }
    }
}

pub const PLACEHOLDER_EXAMPLE_IMAGE: &str = "{{Example of Image}}";
pub const PLACEHOLDER_EXAMPLE_HUMAN: &str = "{{Example of Human Poem}}";
pub const PLACEHOLDER_EXAMPLE_AI: &str = "{{Example of AI Poem}}";
pub const PLACEHOLDER_TARGET_IMAGE: &str = "{{Image corresponding to the Poem Text to be judged}}";
pub const PLACEHOLDER_TARGET_POEM: &str = "{{Poem text to be judged}}";

/// Persona sentence sent as the system message for all four prompts.
pub const SYSTEM_EN: &str = "You are a professional expert in analyzing modern Chinese poetry, skilled at distinguishing between human-written and AI-generated poems.";

pub const SYSTEM_ZH: &str = "你是一位分析中国现代诗歌的专业专家，擅长区分人类创作的诗歌与AI生成的诗歌。";

pub const TP1_USER_EN: &str = r#"Now, please determine whether the following modern Chinese poem was written by human or generated by AI. Output only the final judgment as either "Human" or "AI." The output format should be:
Answer: [Human or AI]

Poem Text: {{Poem text to be judged}}"#;

pub const TP2_USER_EN: &str = r#"The following are two modern Chinese poems with identical title, theme, meaning, imagery, and emotion/feeling. One is written by human, and the other is generated by AI.

Human Poem: {{Example of Human Poem}}

AI Poem: {{Example of AI Poem}}

Now, please determine whether the following modern Chinese poem was written by human or generated by AI. Output only the final judgment as either "Human" or "AI." The output format should be:
Answer: [Human or AI]

Poem Text: {{Poem text to be judged}}"#;

pub const IP2_USER_EN: &str = r#"The following is an image and two modern Chinese poems, with the image reflecting the majority of the textual content of both poems. The two poems share identical title, theme, meaning, imagery, emotion/feeling. One poem was written by human, and the other was generated by AI.

Image: {{Example of Image}}

Human Poem: {{Example of Human Poem}}

AI Poem: {{Example of AI Poem}}

The following is a new image and a new modern Chinese poem, with the image reflecting the majority of the textual content of this poems. Now, please determine whether the following modern Chinese poem was written by human or generated by AI. Please note that the object of your judgment is the "Poem Text", not the image. Output only the final judgment as either "Human" or "AI." The output format should be:
Answer: [Human or AI]

Image: {{Image corresponding to the Poem Text to be judged}}

Poem Text: {{Poem text to be judged}}"#;

pub const IP3_USER_EN: &str = r#"The following is an image and two modern Chinese poems, where the AI poem was generated by AI based on the human-written poem. The AI poem shares identical title, theme, meaning, imagery, mood/emotion, and other content with the human poem, and retains all the nouns from the human poem, differing only in its writing style. The image was also generated by AI in a realistic style based on the human poem, with particular attention paid to the poem's title, theme, meaning, imagery, and mood/emotion. It embodies all the noun elements present in the human poem.

Image: {{Example of Image}}
Human Poem: {{Example of Human Poem}}
AI Poem: {{Example of AI Poem}}

The following is a new image and a new modern Chinese poem generated by AI in a realistic style based on a human poem, with particular attention paid to the poem's title, theme, meaning, imagery, and emotion/feeling, and it embodies all the noun elements from that human poem. Now, please determine whether the following modern Chinese poem was written by human or generated by AI. Please note that the object of your judgment is the "Poem Text", not the image. Output only the final judgment as either "Human" or "AI." The output format should be:
Answer: [Human or AI]

Image: {{Image corresponding to the Poem Text to be judged}}
Poem Text: {{Poem text to be judged}}"#;

pub const TP1_USER_ZH: &str = r#"现在，请判断下面这首现代中文诗歌是由人类创作还是由AI生成。只输出最终判断结果，即“Human”或“AI”。输出格式为：
Answer: [Human or AI]

Poem Text: {{Poem text to be judged}}"#;

pub const TP2_USER_ZH: &str = r#"下面是两首标题、主题、含义、意象、情感完全相同的现代中文诗歌。其中一首由人类创作，另一首由AI生成。

Human Poem: {{Example of Human Poem}}

AI Poem: {{Example of AI Poem}}

现在，请判断下面这首现代中文诗歌是由人类创作还是由AI生成。只输出最终判断结果，即“Human”或“AI”。输出格式为：
Answer: [Human or AI]

Poem Text: {{Poem text to be judged}}"#;

pub const IP2_USER_ZH: &str = r#"下面是一张图片和两首现代中文诗歌，图片反映了这两首诗歌的大部分文字内容。这两首诗歌的标题、主题、含义、意象、情感完全相同。其中一首由人类创作，另一首由AI生成。

Image: {{Example of Image}}

Human Poem: {{Example of Human Poem}}

AI Poem: {{Example of AI Poem}}

下面是一张新的图片和一首新的现代中文诗歌，图片反映了这首诗歌的大部分文字内容。现在，请判断下面这首现代中文诗歌是由人类创作还是由AI生成。请注意，你判断的对象是“Poem Text”，而不是图片。只输出最终判断结果，即“Human”或“AI”。输出格式为：
Answer: [Human or AI]

Image: {{Image corresponding to the Poem Text to be judged}}

Poem Text: {{Poem text to be judged}}"#;

pub const IP3_USER_ZH: &str = r#"下面是一张图片和两首现代中文诗歌，其中AI诗歌是由AI基于人类创作的诗歌生成的。AI诗歌与人类诗歌的标题、主题、含义、意象、情绪等内容完全相同，并保留了人类诗歌中的全部名词，仅写作风格不同。图片同样由AI基于人类诗歌以写实风格生成，特别关注诗歌的标题、主题、含义、意象和情绪，并呈现了人类诗歌中的全部名词元素。

Image: {{Example of Image}}
Human Poem: {{Example of Human Poem}}
AI Poem: {{Example of AI Poem}}

下面是一张新的图片和一首新的现代中文诗歌，其中图片由AI基于一首人类诗歌以写实风格生成，特别关注诗歌的标题、主题、含义、意象和情感，并呈现了那首人类诗歌中的全部名词元素。现在，请判断下面这首现代中文诗歌是由人类创作还是由AI生成。请注意，你判断的对象是“Poem Text”，而不是图片。只输出最终判断结果，即“Human”或“AI”。输出格式为：
Answer: [Human or AI]

Image: {{Image corresponding to the Poem Text to be judged}}
Poem Text: {{Poem text to be judged}}"#;

/// System and user template texts for one prompt kind and language.
pub fn template(kind: PromptKind, language: PromptLanguage) -> (&'static str, &'static str) {
    match language {
        PromptLanguage::English => {
            let user = match kind {
                PromptKind::Tp1 => TP1_USER_EN,
                PromptKind::Tp2 => TP2_USER_EN,
                PromptKind::Ip2 => IP2_USER_EN,
                PromptKind::Ip3 => IP3_USER_EN,
            };
            (SYSTEM_EN, user)
        }
        PromptLanguage::Chinese => {
            let user = match kind {
                PromptKind::Tp1 => TP1_USER_ZH,
                PromptKind::Tp2 => TP2_USER_ZH,
                PromptKind::Ip2 => IP2_USER_ZH,
                PromptKind::Ip3 => IP3_USER_ZH,
            };
            (SYSTEM_ZH, user)
        }
    }
}
