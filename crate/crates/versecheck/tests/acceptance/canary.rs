//! Fixed canary inputs used by the golden-file checks: two example poems
//! sharing a title, one target poem, and two distinct valid PNGs.

use std::path::{Path, PathBuf};

use versecheck::corpus::{Authorship, ImageAsset, MediaType, Poem};
use versecheck::genkit::TINY_PNG;
use versecheck::judge::{JudgeExample, JudgeRequest, PromptKind, PromptLanguage};

/// 4x4 red PNG, distinct from the example image.
pub const CANARY_TARGET_PNG: &[u8] = &[
    0x89, 0x50, 0x4E, 0x47, 0x0D, 0x0A, 0x1A, 0x0A, 0x00, 0x00, 0x00, 0x0D, 0x49, 0x48, 0x44,
    0x52, 0x00, 0x00, 0x00, 0x04, 0x00, 0x00, 0x00, 0x04, 0x08, 0x02, 0x00, 0x00, 0x00, 0x26,
    0x93, 0x09, 0x29, 0x00, 0x00, 0x00, 0x10, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9C, 0x63, 0x38,
    0x21, 0x27, 0x07, 0x47, 0x0C, 0xC4, 0x71, 0x00, 0xB1, 0x63, 0x10, 0x41, 0x3B, 0x4B, 0x63,
    0x82, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4E, 0x44, 0xAE, 0x42, 0x60, 0x82,
];

pub fn example_human() -> Poem {
    Poem::from_plain_text(
        "canary-ex-h",
        "示例之题",
        "示例第一行\n示例第二行\n\n示例第三行",
        Authorship::Human,
    )
}

pub fn example_ai() -> Poem {
    Poem::from_plain_text(
        "canary-ex-a",
        "示例之题",
        "另写第一行\n另写第二行",
        Authorship::Ai {
            generator_id: "canary-gen".to_string(),
        },
    )
}

pub fn target_poem() -> Poem {
    Poem::from_plain_text(
        "canary-tgt",
        "目标之题",
        "目标第一行\n目标第二行\n\n目标第三行",
        Authorship::Human,
    )
}

/// Write the two canary images under `root` and return their assets.
pub fn write_canary_images(root: &Path) -> (ImageAsset, ImageAsset) {
    let images = root.join("images");
    std::fs::create_dir_all(&images).unwrap();
    std::fs::write(images.join("canary-ex.png"), TINY_PNG).unwrap();
    std::fs::write(images.join("canary-tgt.png"), CANARY_TARGET_PNG).unwrap();
    let example = ImageAsset {
        image_id: "canary-ex-img".to_string(),
        source_human_id: "canary-ex-h".to_string(),
        media_path: "images/canary-ex.png".to_string(),
        media_type: MediaType::Png,
        generator_model: "canary".to_string(),
        prompt_digest: "00".to_string(),
    };
    let target = ImageAsset {
        image_id: "canary-tgt-img".to_string(),
        source_human_id: "canary-tgt".to_string(),
        media_path: "images/canary-tgt.png".to_string(),
        media_type: MediaType::Png,
        generator_model: "canary".to_string(),
        prompt_digest: "00".to_string(),
    };
    (example, target)
}

/// Canary request for one prompt kind.
pub fn request(kind: PromptKind, language: PromptLanguage, root: &Path) -> JudgeRequest {
    let (example_image, target_image) = write_canary_images(root);
    JudgeRequest {
        kind,
        example: if kind.needs_example() {
            Some(JudgeExample {
                human_poem: example_human(),
                ai_poem: example_ai(),
                image: kind.needs_images().then_some(example_image),
            })
        } else {
            None
        },
        target_poem: target_poem(),
        target_image: kind.needs_images().then_some(target_image),
        language,
    }
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}
