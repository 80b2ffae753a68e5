//! Prompt construction, chat-completion providers and syntax repair for
//! generated test cases.

pub mod generate;
pub mod prompt;
pub mod provider;
pub mod repair;

pub use generate::{generate, load_records, save_record, ExtractedTest, GenerationRecord};
pub use prompt::{build_user_prompt, DecodingParams, GenerationJob, PromptVariant};
pub use provider::{ChatProvider, HttpProvider, MockProvider, Pricing, ProviderConfig, ProvidersFile, ReplayProvider};
pub use repair::repair_syntax;
