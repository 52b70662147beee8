//! Library half of the CLI: argument surface, config resolution, and
//! subcommand implementations, kept out of `main` so they can be tested
//! directly.

pub mod args;
pub mod commands;

use std::process::ExitCode;

/// Failures mapped onto the exit-code contract: input errors exit 2,
/// pipeline errors exit 3.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Pipeline(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) => ExitCode::from(2),
            CliError::Pipeline(_) => ExitCode::from(3),
        }
    }
}

pub fn run(cli: args::Cli) -> Result<(), CliError> {
    match &cli.command {
        args::Command::BuildKg(cmd) => commands::build_kg(cmd, cli.overrides.resolve()?),
        args::Command::Query(cmd) => commands::query(cmd, cli.overrides.resolve()?),
        args::Command::Eval(cmd) => commands::eval(cmd, cli.overrides.resolve()?),
        args::Command::Stats(cmd) => commands::stats(cmd),
    }
}

#[cfg(test)]
mod tests {
    use super::args::{Cli, ConfigOverrides};
    use clap::Parser;
    use tcrqf_core::config::{FeedbackMode, Transport};

    fn parse(argv: &[&str]) -> Cli {
        Cli::try_parse_from(argv).expect("args parse")
    }

    #[test]
    fn defaults_apply_without_file_or_flags() {
        let config = ConfigOverrides::default().resolve().unwrap();
        assert_eq!(config.max_len, 512);
        assert_eq!(config.overlap, 64);
        assert_eq!(config.i_max, 20);
        assert_eq!(config.beam_width, 3);
        assert_eq!(config.dedup_threshold, 0.2);
        assert_eq!(config.enrich_k, 5);
    }

    #[test]
    fn config_file_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "beam_width = 7\ni_max = 4\n").unwrap();
        let cli = parse(&[
            "tcrqf",
            "--config",
            path.to_str().unwrap(),
            "stats",
            "--trace-dir",
            "x",
        ]);
        let config = cli.overrides.resolve().unwrap();
        assert_eq!(config.beam_width, 7);
        assert_eq!(config.i_max, 4);
        assert_eq!(config.max_len, 512);
    }

    #[test]
    fn flags_override_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "beam_width = 7\nmax_depth = 5\n").unwrap();
        let cli = parse(&[
            "tcrqf",
            "--config",
            path.to_str().unwrap(),
            "--beam-width",
            "9",
            "stats",
            "--trace-dir",
            "x",
        ]);
        let config = cli.overrides.resolve().unwrap();
        // flag wins over file
        assert_eq!(config.beam_width, 9);
        // file wins over default
        assert_eq!(config.max_depth, 5);
        // default where neither spoke
        assert_eq!(config.overlap, 64);
    }

    #[test]
    fn enum_flags_map_to_config_values() {
        let cli = parse(&[
            "tcrqf",
            "--feedback-mode",
            "answer-driven",
            "--transport",
            "replay",
            "--replay",
            "f.jsonl",
            "stats",
            "--trace-dir",
            "x",
        ]);
        let config = cli.overrides.resolve().unwrap();
        assert_eq!(config.feedback_mode, FeedbackMode::AnswerDriven);
        assert_eq!(config.transport, Transport::Replay);
        assert_eq!(config.replay_path.as_deref(), Some("f.jsonl".as_ref()));
    }

    #[test]
    fn invalid_merged_config_is_an_input_error() {
        let cli = parse(&[
            "tcrqf",
            "--overlap",
            "600",
            "stats",
            "--trace-dir",
            "x",
        ]);
        let err = cli.overrides.resolve().unwrap_err();
        assert!(matches!(err, crate::CliError::Input(_)));
    }

    #[test]
    fn replay_transport_without_fixture_is_rejected() {
        let cli = parse(&["tcrqf", "--transport", "replay", "stats", "--trace-dir", "x"]);
        assert!(cli.overrides.resolve().is_err());
    }
}
