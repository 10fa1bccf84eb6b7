//! Generate an AI counterpart for a human poem through a mock chat
//! backend and show the title rule and advisory warnings.
//!
//! Usage: cargo run -p versecheck --example generate_poems

use versecheck::corpus::{Authorship, Poem};
use versecheck::genkit::{build_poem_prompt, generate_poem, GenParams};
use versecheck::judge::backend::MockChatBackend;

fn main() -> anyhow::Result<()> {
    let human = Poem::from_plain_text(
        "h-demo",
        "渡口",
        "渡口的木桩\n系过多少离别\n\n水面平静\n像一封没有拆开的信",
        Authorship::Human,
    );

    println!("prompt sent to the generator:\n---\n{}\n---\n", build_poem_prompt(&human)?);

    // A well-behaved mock echoes the title followed by a new poem.
    let backend = MockChatBackend::fixed("渡口\n木桩守着渡口\n离别被缆绳系住\n\n那封信没有拆开\n摊平成水面");
    let params = GenParams::for_model("mock-generator");
    println!(
        "generation parameters: temperature {}, top_p {}",
        params.temperature, params.top_p
    );

    let out = generate_poem(&human, &params, &backend, "a-demo")?;
    println!("\ngenerated poem (authorship {:?}):", out.poem.authorship);
    println!("{}\n", out.poem.full_text());
    if out.warnings.is_empty() {
        println!("no warnings");
    } else {
        println!("warnings: {:?}", out.warnings);
    }
    Ok(())
}
