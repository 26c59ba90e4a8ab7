//! `iv`: scripted access to information repositories.
//!
//! Output is one record per line on stdout. Errors go to stderr as
//! `error: <Name>`; exit status is 0 on success, 1 for domain errors and
//! 2 for usage errors and malformed queries.

use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use iv_core::harness::{
    run_property_suite, run_social_scenario, Mutation, PropertyConfig, SocialOptions,
};
use iv_core::map::map_delta;
use iv_core::model::{canonical_serialize, parse_fact_lines, parse_select};
use iv_core::sync::{self, Credential};
use iv_core::{
    parse_query, policy_view, seal, Error, Hash, MapQuery, Mode, Pattern, Principal, Repo,
};

#[derive(Parser)]
#[command(
    name = "iv",
    version,
    about = "Information repositories with policy-filtered views"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RepoArg {
    /// Repository directory
    #[arg(long, env = "IV_REPO")]
    repo: PathBuf,
}

#[derive(Args)]
struct Remote {
    #[command(flatten)]
    repo: RepoArg,
    /// Master repository directory
    #[arg(long)]
    from: PathBuf,
    #[arg(long = "as")]
    principal: String,
    #[arg(long)]
    token: String,
}

#[derive(Subcommand)]
enum Command {
    /// Create a master repository
    Init {
        #[arg(long)]
        owner: String,
        dir: PathBuf,
    },
    /// Append canonical fact lines from a file, or stdin with `-`
    Add {
        #[command(flatten)]
        repo: RepoArg,
        #[arg(long)]
        author: String,
        #[arg(long, default_value = "add")]
        message: String,
        factfile: String,
    },
    /// Record a read or write grant
    Grant {
        #[command(flatten)]
        repo: RepoArg,
        #[arg(long)]
        grantee: String,
        #[arg(long, value_parser = ["read", "write"])]
        mode: String,
        #[arg(long = "pattern", required = true)]
        patterns: Vec<String>,
    },
    /// Register an access token for a principal on a master repository
    Token {
        #[command(flatten)]
        repo: RepoArg,
        #[arg(long)]
        principal: String,
        #[arg(long)]
        token: String,
    },
    /// Clone a principal's view of a master repository
    Clone {
        #[arg(long)]
        from: PathBuf,
        #[arg(long = "as")]
        principal: String,
        #[arg(long)]
        token: String,
        dest: PathBuf,
    },
    Pull(Remote),
    Push(Remote),
    /// Evaluate a query over a principal's view of the head
    Map {
        #[command(flatten)]
        repo: RepoArg,
        #[arg(long = "as")]
        principal: String,
        #[arg(long)]
        select: Option<String>,
        query: String,
    },
    /// Bindings added to a query's answer since a commit
    Watch {
        #[command(flatten)]
        repo: RepoArg,
        #[arg(long = "as")]
        principal: String,
        #[arg(long)]
        since: String,
        #[arg(long)]
        select: Option<String>,
        query: String,
    },
    Log {
        #[command(flatten)]
        repo: RepoArg,
    },
    /// Canonical fact lines of a commit's tree
    Show {
        #[command(flatten)]
        repo: RepoArg,
        commit: String,
    },
    Policies {
        #[command(flatten)]
        repo: RepoArg,
    },
    #[command(subcommand)]
    Demo(Demo),
}

#[derive(Subcommand)]
enum Demo {
    /// Social-network walkthrough with leakage scan
    Social {
        #[arg(long)]
        workdir: PathBuf,
        #[arg(long, default_value_t = 2)]
        followers: usize,
        /// Leave out the followers' comment write grant
        #[arg(long)]
        no_comment_grant: bool,
    },
    /// Randomized property suite
    Props {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long)]
        workdir: Option<PathBuf>,
        /// Break the policy view on purpose
        #[arg(long, value_parser = ["skip-owner-check"])]
        mutation: Option<String>,
    },
}

fn principal(name: &str) -> Result<Principal, Error> {
    Principal::new(name)
}

fn query(text: &str, select: Option<&str>) -> Result<MapQuery, Error> {
    let q = parse_query(text)?;
    match select {
        Some(s) => q.with_select(parse_select(s)?),
        None => Ok(q),
    }
}

fn credential(principal_name: &str, token: &str) -> Result<Credential, Error> {
    Credential::new(principal(principal_name)?, token)
}

fn head_line(out: &mut Vec<u8>, head: &Hash) {
    writeln!(out, "head {head}").unwrap();
}

fn read_input(source: &str) -> Result<String, Error> {
    let storage = |path: &Path, source: io::Error| Error::StorageFailure {
        path: path.to_path_buf(),
        source,
    };
    if source == "-" {
        let mut text = String::new();
        io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| storage(Path::new("-"), e))?;
        Ok(text)
    } else {
        std::fs::read_to_string(source).map_err(|e| storage(Path::new(source), e))
    }
}

fn write_report(workdir: &Path, text: &str) -> Result<(), Error> {
    let path = workdir.join("report.txt");
    std::fs::create_dir_all(workdir)
        .and_then(|_| std::fs::write(&path, text))
        .map_err(|source| Error::StorageFailure { path, source })
}

fn run(command: Command, out: &mut Vec<u8>) -> Result<(), Error> {
    match command {
        Command::Init { owner, dir } => {
            let repo = sync::init(&dir, &principal(&owner)?)?;
            head_line(out, &repo.head()?);
        }
        Command::Add {
            repo,
            author,
            message,
            factfile,
        } => {
            let repo = Repo::open(&repo.repo)?;
            let facts = parse_fact_lines(&read_input(&factfile)?)?;
            let head = sync::add(&repo, facts, &principal(&author)?, &message)?;
            head_line(out, &head);
        }
        Command::Grant {
            repo,
            grantee,
            mode,
            patterns,
        } => {
            let repo = Repo::open(&repo.repo)?;
            let mode: Mode = mode.parse()?;
            let patterns = patterns
                .iter()
                .map(|p| Pattern::parse(p))
                .collect::<Result<Vec<_>, _>>()?;
            let owner = repo.owner().clone();
            let head = sync::grant(&repo, &owner, &principal(&grantee)?, mode, patterns)?;
            head_line(out, &head);
        }
        Command::Token {
            repo,
            principal: p,
            token,
        } => {
            let repo = Repo::open(&repo.repo)?;
            let p = principal(&p)?;
            repo.set_token(&p, &token)?;
            writeln!(out, "token-set {p}").unwrap();
        }
        Command::Clone {
            from,
            principal: p,
            token,
            dest,
        } => {
            let master = Repo::open(&from)?;
            let local = sync::clone(&master, &credential(&p, &token)?, &dest)?;
            let head = local.head()?;
            head_line(out, &head);
            writeln!(out, "quads {}", local.resolve_facts(&head)?.len()).unwrap();
        }
        Command::Pull(r) => {
            let (local, master, cred) = open_remote(&r)?;
            let receipt = sync::pull(&local, &master, &cred)?;
            head_line(out, &receipt.new_head);
            writeln!(out, "quads {}", receipt.quads).unwrap();
        }
        Command::Push(r) => {
            let (local, master, cred) = open_remote(&r)?;
            let receipt = sync::push(&local, &master, &cred)?;
            head_line(out, &receipt.new_head);
            writeln!(out, "quads {}", receipt.quads).unwrap();
        }
        Command::Map {
            repo,
            principal: p,
            select,
            query: text,
        } => {
            let q = query(&text, select.as_deref())?;
            let repo = Repo::open(&repo.repo)?;
            let view = seal(&repo, &repo.head()?, &principal(&p)?)?;
            let mut lines: Vec<String> =
                view.map(&q).iter().map(|b| b.render(q.select())).collect();
            lines.sort();
            for l in lines {
                writeln!(out, "{l}").unwrap();
            }
        }
        Command::Watch {
            repo,
            principal: p,
            since,
            select,
            query: text,
        } => {
            let q = query(&text, select.as_deref())?;
            let repo = Repo::open(&repo.repo)?;
            let p = principal(&p)?;
            let since: Hash = since.parse()?;
            let view = |c: &Hash| -> Result<_, Error> {
                Ok(policy_view(&repo.resolve_facts(c)?, &p, repo.owner()))
            };
            let delta = map_delta(&view(&since)?, &view(&repo.head()?)?, &q);
            let mut lines: Vec<String> = delta
                .added
                .iter()
                .map(|b| format!("+ {}", b.render(q.select())))
                .chain(
                    delta
                        .removed
                        .iter()
                        .map(|b| format!("- {}", b.render(q.select()))),
                )
                .collect();
            lines.sort();
            for l in lines {
                writeln!(out, "{l}").unwrap();
            }
        }
        Command::Log { repo } => {
            let repo = Repo::open(&repo.repo)?;
            for (hash, c) in repo.log(&repo.head()?)? {
                writeln!(
                    out,
                    "{hash} seq={} author={} msg={}",
                    c.seq, c.author, c.message
                )
                .unwrap();
            }
        }
        Command::Show { repo, commit } => {
            let repo = Repo::open(&repo.repo)?;
            let facts = repo.resolve_facts(&commit.parse()?)?;
            out.extend_from_slice(&canonical_serialize(&facts));
        }
        Command::Policies { repo } => {
            let repo = Repo::open(&repo.repo)?;
            for p in sync::policies(&repo)? {
                writeln!(out, "{p}").unwrap();
            }
        }
        Command::Demo(Demo::Social {
            workdir,
            followers,
            no_comment_grant,
        }) => {
            let opts = SocialOptions {
                followers,
                comment_grant: !no_comment_grant,
            };
            let report = run_social_scenario(&workdir, &opts)?;
            let text = report.render();
            write_report(&workdir, &text)?;
            out.extend_from_slice(text.as_bytes());
            report.check()?;
        }
        Command::Demo(Demo::Props {
            seed,
            cases,
            workdir,
            mutation,
        }) => {
            let config = PropertyConfig {
                mutation: mutation.map(|_| Mutation::SkipOwnerCheck),
                ..PropertyConfig::new(seed, cases)
            };
            let report = run_property_suite(&config)?;
            let text = report.render();
            if let Some(dir) = &workdir {
                write_report(dir, &text)?;
            }
            out.extend_from_slice(text.as_bytes());
            report.check()?;
        }
    }
    Ok(())
}

fn open_remote(r: &Remote) -> Result<(Repo, Repo, Credential), Error> {
    Ok((
        Repo::open(&r.repo.repo)?,
        Repo::open(&r.from)?,
        credential(&r.principal, &r.token)?,
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = Vec::new();
    let result = run(cli.command, &mut out);
    // reports are still printed when a demo fails its checks
    let _ = io::stdout().write_all(&out);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut err = io::stderr().lock();
            match &e {
                Error::PushRejected(quads) => {
                    let _ = writeln!(err, "error: PushRejected {} quads", quads.len());
                    for q in quads {
                        let _ = writeln!(err, "error:   {q}");
                    }
                }
                other => {
                    let _ = writeln!(err, "error: {}", other.name());
                    let _ = writeln!(err, "error:   {other}");
                }
            }
            match e {
                Error::MalformedQuery(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
