//! Python bindings. Terms, facts and queries cross the boundary in their
//! canonical text form; bindings come back as `{"x": "<a>"}` dicts.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use iv_core::harness::{run_property_suite, run_social_scenario, PropertyConfig, SocialOptions};
use iv_core::model::{canonical_serialize, parse_fact_lines, parse_select};
use iv_core::sync::{self, Credential};
use iv_core::{parse_query, Binding, Error, FactSet, Hash, MapQuery, Mode, Pattern, Principal};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(
    iv,
    IvError,
    PyException,
    "Domain error; the message starts with the error name."
);

fn err(e: Error) -> PyErr {
    match &e {
        Error::PushRejected(quads) => {
            IvError::new_err(format!("PushRejected {} quads", quads.len()))
        }
        _ => IvError::new_err(format!("{}: {e}", e.name())),
    }
}

trait OrPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> OrPy<T> for iv_core::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(err)
    }
}

fn principal(name: &str) -> PyResult<Principal> {
    Principal::new(name).py_err()
}

fn query(text: &str, select: Option<&str>) -> PyResult<MapQuery> {
    let q = parse_query(text).py_err()?;
    match select {
        Some(s) => q.with_select(parse_select(s).py_err()?).py_err(),
        None => Ok(q),
    }
}

fn bindings(answers: &BTreeSet<Binding>) -> Vec<BTreeMap<String, String>> {
    answers
        .iter()
        .map(|b| {
            b.iter()
                .map(|(v, t)| (v.as_str().to_string(), t.encode()))
                .collect()
        })
        .collect()
}

fn hash(hex: &str) -> PyResult<Hash> {
    hex.parse().py_err()
}

/// An open repository directory.
#[pyclass(frozen, module = "iv")]
struct Repo {
    inner: iv_core::Repo,
}

#[pymethods]
impl Repo {
    #[staticmethod]
    fn open(path: PathBuf) -> PyResult<Self> {
        Ok(Repo {
            inner: iv_core::Repo::open(path).py_err()?,
        })
    }

    #[getter]
    fn path(&self) -> PathBuf {
        self.inner.root().to_path_buf()
    }

    #[getter]
    fn owner(&self) -> String {
        self.inner.owner().to_string()
    }

    fn head(&self) -> PyResult<String> {
        Ok(self.inner.head().py_err()?.to_hex())
    }

    /// Appends canonical fact lines; returns the new head.
    #[pyo3(signature = (lines, author, message = "add"))]
    fn add(&self, lines: &str, author: &str, message: &str) -> PyResult<String> {
        let facts = parse_fact_lines(lines).py_err()?;
        let head = sync::add(&self.inner, facts, &principal(author)?, message).py_err()?;
        Ok(head.to_hex())
    }

    fn grant(&self, grantee: &str, mode: &str, patterns: Vec<String>) -> PyResult<String> {
        let mode: Mode = mode.parse().py_err()?;
        let patterns = patterns
            .iter()
            .map(|p| Pattern::parse(p))
            .collect::<iv_core::Result<Vec<_>>>()
            .py_err()?;
        let owner = self.inner.owner().clone();
        let head =
            sync::grant(&self.inner, &owner, &principal(grantee)?, mode, patterns).py_err()?;
        Ok(head.to_hex())
    }

    fn set_token(&self, principal_name: &str, token: &str) -> PyResult<()> {
        self.inner
            .set_token(&principal(principal_name)?, token)
            .py_err()
    }

    /// `(hash, seq, author, message)` from newest to oldest.
    fn log(&self) -> PyResult<Vec<(String, u64, String, String)>> {
        let head = self.inner.head().py_err()?;
        Ok(self
            .inner
            .log(&head)
            .py_err()?
            .into_iter()
            .map(|(h, c)| (h.to_hex(), c.seq, c.author.to_string(), c.message))
            .collect())
    }

    /// Canonical fact lines of a commit, the head by default.
    #[pyo3(signature = (commit = None))]
    fn show(&self, commit: Option<&str>) -> PyResult<String> {
        let commit = match commit {
            Some(c) => hash(c)?,
            None => self.inner.head().py_err()?,
        };
        let facts = self.inner.resolve_facts(&commit).py_err()?;
        Ok(String::from_utf8(canonical_serialize(&facts)).expect("canonical form is UTF-8"))
    }

    fn policies(&self) -> PyResult<Vec<String>> {
        Ok(sync::policies(&self.inner)
            .py_err()?
            .iter()
            .map(ToString::to_string)
            .collect())
    }

    #[pyo3(signature = (principal_name, commit = None))]
    fn seal(&self, principal_name: &str, commit: Option<&str>) -> PyResult<SealedView> {
        let commit = match commit {
            Some(c) => hash(c)?,
            None => self.inner.head().py_err()?,
        };
        let view = iv_core::seal(&self.inner, &commit, &principal(principal_name)?).py_err()?;
        Ok(SealedView { inner: view })
    }

    fn audit(&self) -> PyResult<usize> {
        self.inner.audit().py_err()
    }

    fn __repr__(&self) -> String {
        format!(
            "Repo({:?}, owner={:?})",
            self.inner.root(),
            self.inner.owner().as_str()
        )
    }
}

/// Query-only view of one commit for one principal.
#[pyclass(frozen, module = "iv")]
struct SealedView {
    inner: iv_core::SealedView,
}

#[pymethods]
impl SealedView {
    #[getter]
    fn commit(&self) -> String {
        self.inner.commit().to_hex()
    }

    #[getter]
    fn principal(&self) -> String {
        self.inner.principal().to_string()
    }

    #[pyo3(name = "map", signature = (query_text, select = None))]
    fn map_query(
        &self,
        query_text: &str,
        select: Option<&str>,
    ) -> PyResult<Vec<BTreeMap<String, String>>> {
        Ok(bindings(&self.inner.map(&query(query_text, select)?)))
    }
}

#[pyfunction]
fn init(path: PathBuf, owner: &str) -> PyResult<Repo> {
    Ok(Repo {
        inner: sync::init(path, &principal(owner)?).py_err()?,
    })
}

#[pyfunction]
fn clone(master: &Repo, principal_name: &str, token: &str, dest: PathBuf) -> PyResult<Repo> {
    let cred = Credential::new(principal(principal_name)?, token).py_err()?;
    Ok(Repo {
        inner: sync::clone(&master.inner, &cred, dest).py_err()?,
    })
}

/// Returns `(new_head, quads)`.
#[pyfunction]
fn pull(
    local: &Repo,
    master: &Repo,
    principal_name: &str,
    token: &str,
) -> PyResult<(String, usize)> {
    let cred = Credential::new(principal(principal_name)?, token).py_err()?;
    let r = sync::pull(&local.inner, &master.inner, &cred).py_err()?;
    Ok((r.new_head.to_hex(), r.quads))
}

/// Returns `(new_head, quads)`.
#[pyfunction]
fn push(
    local: &Repo,
    master: &Repo,
    principal_name: &str,
    token: &str,
) -> PyResult<(String, usize)> {
    let cred = Credential::new(principal(principal_name)?, token).py_err()?;
    let r = sync::push(&local.inner, &master.inner, &cred).py_err()?;
    Ok((r.new_head.to_hex(), r.quads))
}

fn facts(lines: &str) -> PyResult<FactSet> {
    parse_fact_lines(lines).py_err()
}

#[pyfunction]
#[pyo3(signature = (lines, query_text, select = None))]
fn eval_map(
    lines: &str,
    query_text: &str,
    select: Option<&str>,
) -> PyResult<Vec<BTreeMap<String, String>>> {
    Ok(bindings(&iv_core::eval_map(
        &facts(lines)?,
        &query(query_text, select)?,
    )))
}

#[pyfunction]
#[pyo3(signature = (lines, query_text, select = None))]
fn brute_force_eval(
    lines: &str,
    query_text: &str,
    select: Option<&str>,
) -> PyResult<Vec<BTreeMap<String, String>>> {
    let answers =
        iv_core::brute_force_eval(&facts(lines)?, &query(query_text, select)?).py_err()?;
    Ok(bindings(&answers))
}

/// Canonical lines of the facts `principal_name` may read.
#[pyfunction]
fn policy_view(lines: &str, principal_name: &str, owner: &str) -> PyResult<String> {
    let view = iv_core::policy_view(
        &facts(lines)?,
        &principal(principal_name)?,
        &principal(owner)?,
    );
    Ok(String::from_utf8(canonical_serialize(&view)).expect("canonical form is UTF-8"))
}

/// Canonical re-rendering of a query.
#[pyfunction]
fn normalize_query(query_text: &str) -> PyResult<String> {
    Ok(query(query_text, None)?.to_string())
}

/// Runs the social-network demo; returns `(passed, report)`.
#[pyfunction]
#[pyo3(signature = (workdir, followers = 2, comment_grant = true))]
fn demo_social(
    py: Python<'_>,
    workdir: PathBuf,
    followers: usize,
    comment_grant: bool,
) -> PyResult<(bool, String)> {
    let opts = SocialOptions {
        followers,
        comment_grant,
    };
    let report = py
        .detach(|| run_social_scenario(&workdir, &opts))
        .py_err()?;
    Ok((report.ok(), report.render()))
}

/// Runs the randomized property suite; returns `(passed, report)`.
#[pyfunction]
#[pyo3(signature = (seed = 1, cases = 100))]
fn demo_props(py: Python<'_>, seed: u64, cases: usize) -> PyResult<(bool, String)> {
    let report = py
        .detach(|| run_property_suite(&PropertyConfig::new(seed, cases)))
        .py_err()?;
    Ok((report.ok(), report.render()))
}

#[pymodule]
fn iv(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("IvError", m.py().get_type::<IvError>())?;
    m.add_class::<Repo>()?;
    m.add_class::<SealedView>()?;
    m.add_function(wrap_pyfunction!(init, m)?)?;
    m.add_function(wrap_pyfunction!(clone, m)?)?;
    m.add_function(wrap_pyfunction!(pull, m)?)?;
    m.add_function(wrap_pyfunction!(push, m)?)?;
    m.add_function(wrap_pyfunction!(eval_map, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_eval, m)?)?;
    m.add_function(wrap_pyfunction!(policy_view, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_query, m)?)?;
    m.add_function(wrap_pyfunction!(demo_social, m)?)?;
    m.add_function(wrap_pyfunction!(demo_props, m)?)?;
    Ok(())
}
