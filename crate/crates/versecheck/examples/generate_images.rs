//! Generate (and cache) the image for a human poem through the mock
//! image backend.
//!
//! Usage: cargo run -p versecheck --example generate_images

use versecheck::corpus::{Authorship, Poem};
use versecheck::genkit::{build_image_prompt, request_image, MockImageBackend};

fn main() -> anyhow::Result<()> {
    let human = Poem::from_plain_text(
        "h-demo",
        "雪夜",
        "雪落在窗台上\n灯把影子焐热\n\n脚印一路向北\n像省略号没有说完",
        Authorship::Human,
    );

    println!("image prompt:\n---\n{}\n---\n", build_image_prompt(&human)?);

    let media_dir = std::env::temp_dir().join("versecheck-example-images");
    let _ = std::fs::remove_dir_all(&media_dir);
    let backend = MockImageBackend::tiny_png();

    let asset = request_image(&human, &backend, &media_dir)?;
    println!("stored image {} ({:?}) at {}", asset.image_id, asset.media_type, asset.resolved_path(&media_dir).display());
    println!("prompt digest: {}...", &asset.prompt_digest[..16]);

    let again = request_image(&human, &backend, &media_dir)?;
    assert_eq!(asset, again);
    println!("\nsecond request reused the stored image; backend calls: {}", backend.call_count());
    Ok(())
}
