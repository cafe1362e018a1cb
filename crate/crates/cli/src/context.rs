//! Shared run state: the effective configuration plus client and template
//! construction. Commands mutate `config` with their flag overrides and
//! re-validate before doing any work.

use std::path::{Path, PathBuf};

use limgen_core::chunker::{tokenizer_by_name, Tokenizer};
use limgen_core::client::{EmbeddingClient, LlmClient, MockLlmClient};
use limgen_core::config::PipelineConfig;
use limgen_core::generation::{GenerationParams, PromptSet};
use limgen_core::{Error, Result};

use crate::GlobalArgs;

pub struct RunContext {
    pub config: PipelineConfig,
    /// Replies file for scripted completions; None means a real endpoint.
    pub mock: Option<PathBuf>,
}

impl RunContext {
    pub fn new(global: &GlobalArgs) -> Result<Self> {
        let mut config = match &global.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(jobs) = global.jobs {
            config.jobs = jobs;
        }
        config.validate()?;
        Ok(RunContext {
            config,
            mock: global.mock.clone(),
        })
    }

    /// Worker cap for fan-out stages. Mock runs are forced serial so the
    /// scripted replies land on the same prompts every run.
    pub fn jobs(&self) -> usize {
        if self.mock.is_some() {
            1
        } else {
            self.config.jobs
        }
    }

    pub fn tokenizer(&self) -> Result<Box<dyn Tokenizer>> {
        tokenizer_by_name(&self.config.tokenizer)
    }

    pub fn llm_client(&self) -> Result<Box<dyn LlmClient>> {
        match &self.mock {
            Some(path) => Ok(Box::new(MockLlmClient::from_file(path)?)),
            None => Ok(Box::new(self.config.llm_client()?)),
        }
    }

    pub fn embedding_client(&self) -> Result<Box<dyn EmbeddingClient>> {
        self.config.embedding_client()
    }

    pub fn params(&self) -> GenerationParams {
        self.config.generation_params()
    }

    /// Prompt templates. An explicit `--prompts` directory must exist; the
    /// configured directory falls back to the built-in set when absent, so
    /// the pipeline runs from any working directory.
    pub fn prompts(&self, flag: Option<&Path>) -> Result<PromptSet> {
        match flag {
            Some(dir) => {
                if !dir.is_dir() {
                    return Err(Error::Config(format!(
                        "prompts directory {} does not exist",
                        dir.display()
                    )));
                }
                PromptSet::load_dir_with_fallback(dir)
            }
            None => {
                let dir = Path::new(&self.config.prompts_dir);
                if dir.is_dir() {
                    PromptSet::load_dir_with_fallback(dir)
                } else {
                    Ok(PromptSet::builtin())
                }
            }
        }
    }
}
