//! Model and observable files (JSON, strict schema).

use qmstree::dense::CMatrix;
use qmstree::ising::{self, ModelSpec, VertexOverride};
use qmstree::kernel::{vector_matrix, TransitionExpectation};
use qmstree::pauli::{RegionOperator, TermRecord};
use qmstree::state::{KernelFamily, QmsHandle};
use qmstree::tree::{self, Region, Tree, VertexWord};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("malformed spec: {0}")]
    Syntax(String),
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error(transparent)]
    Model(#[from] qmstree::Error),
}

fn field(field: &str, message: impl Into<String>) -> SpecError {
    SpecError::Field {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelFile {
    IsingCompeting(IsingFile),
    Custom(CustomFile),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsingFile {
    pub beta: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub k: usize,
    pub depth: Option<usize>,
    #[serde(default)]
    pub overrides: Vec<VertexOverride>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomFile {
    pub k: usize,
    pub depth: Option<usize>,
    /// Density at the root in Pauli terms; defaults to the trace state.
    pub initial_state: Option<Vec<TermRecord>>,
    pub kernel: KernelFile,
    #[serde(default)]
    pub levels: Vec<LevelKernel>,
    #[serde(default)]
    pub vertices: Vec<KernelFile>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelKernel {
    pub level: usize,
    pub kernel: KernelFile,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelFile {
    pub target_vertex: VertexWord,
    pub amplitude: Vec<TermRecord>,
    pub weight: WeightFile,
}

/// A positive number, a list of Pauli terms on the target, or `"fixed_point"`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum WeightFile {
    Scalar(f64),
    Terms(Vec<TermRecord>),
    Keyword(String),
}

/// A parsed model ready to evaluate.
#[derive(Clone, Debug)]
pub struct Model {
    pub handle: QmsHandle,
    pub ising: Option<ModelSpec>,
    pub overrides: Vec<VertexOverride>,
    pub description: String,
}

pub const DEFAULT_NMAX: usize = ising::DEFAULT_DEPTH;
/// Default when the dense backend is requested and no depth is given.
pub const DEFAULT_DENSE_NMAX: usize = 3;

pub fn parse_model_file(text: &str) -> Result<ModelFile, SpecError> {
    serde_json::from_str(text).map_err(|e| SpecError::Syntax(e.to_string()))
}

/// Parses and builds a model. `nmax` overrides the file's depth.
pub fn parse_model_spec(text: &str, nmax: Option<usize>) -> Result<Model, SpecError> {
    parse_model_spec_with_default(text, nmax, DEFAULT_NMAX)
}

/// As [`parse_model_spec`], with `fallback` used when neither `nmax` nor the file sets a depth.
pub fn parse_model_spec_with_default(text: &str, nmax: Option<usize>, fallback: usize) -> Result<Model, SpecError> {
    match parse_model_file(text)? {
        ModelFile::IsingCompeting(f) => build_ising(f, nmax, fallback),
        ModelFile::Custom(f) => build_custom(f, nmax, fallback),
    }
}

fn check_depth(depth: Option<usize>, nmax: Option<usize>, fallback: usize) -> Result<usize, SpecError> {
    if depth == Some(0) {
        return Err(field("depth", "must be >= 1"));
    }
    Ok(nmax.or(depth).unwrap_or(fallback))
}

fn build_ising(f: IsingFile, nmax: Option<usize>, fallback: usize) -> Result<Model, SpecError> {
    if !f.beta.is_finite() || f.beta < 0.0 {
        return Err(field("beta", format!("must be a finite number >= 0, got {}", f.beta)));
    }
    if !f.j.is_finite() || f.j < 0.0 {
        return Err(field("J", format!("must be a finite number >= 0, got {}", f.j)));
    }
    if f.k != 2 {
        return Err(field(
            "k",
            format!("the competing-interaction model needs k = 2, got {}", f.k),
        ));
    }
    for (i, o) in f.overrides.iter().enumerate() {
        let name = |s: &str| format!("overrides[{i}].{s}");
        if o.vertex.max_index() > f.k {
            return Err(field(
                &name("vertex"),
                format!("{} is not a vertex of the tree", o.vertex),
            ));
        }
        if matches!(o.beta, Some(b) if !(b.is_finite() && b >= 0.0)) {
            return Err(field(&name("beta"), "must be a finite number >= 0"));
        }
        if matches!(o.j, Some(j) if !(j.is_finite() && j >= 0.0)) {
            return Err(field(&name("J"), "must be a finite number >= 0"));
        }
        if matches!(o.weight_scale, Some(s) if !(s.is_finite() && s > 0.0)) {
            return Err(field(&name("weight_scale"), "must be a positive number"));
        }
    }
    let depth = check_depth(f.depth, nmax, fallback)?;
    let m = ModelSpec {
        beta: f.beta,
        j: f.j,
        k: f.k,
        depth,
    };
    let handle = ising::build_qms_with_overrides(&m, &f.overrides)?;
    Ok(Model {
        handle,
        ising: Some(m),
        overrides: f.overrides.clone(),
        description: format!("ising_competing beta={} J={} k={}", f.beta, f.j, f.k),
    })
}

fn terms(name: &str, records: &[TermRecord]) -> Result<RegionOperator, SpecError> {
    RegionOperator::from_records(records).map_err(|e| field(name, e.to_string()))
}

fn build_kernel(name: &str, k: usize, spec: &KernelFile) -> Result<TransitionExpectation, SpecError> {
    let x = &spec.target_vertex;
    if x.max_index() > k {
        return Err(field(
            &format!("{name}.target_vertex"),
            format!("{x} is not a vertex of the tree"),
        ));
    }
    let amplitude = terms(&format!("{name}.amplitude"), &spec.amplitude)?;
    if !amplitude.region().is_subset(&tree::fork(x, k)) {
        return Err(field(
            &format!("{name}.amplitude"),
            format!("terms must live on the fork at {x}"),
        ));
    }
    let wname = format!("{name}.weight");
    let (weight, certificate) = match &spec.weight {
        WeightFile::Scalar(w) => {
            if !(w.is_finite() && *w >= 0.0) {
                return Err(field(&wname, format!("must be >= 0, got {w}")));
            }
            (CMatrix::identity(2, 2) * qmstree::pauli::C64::new(*w, 0.0), None)
        }
        WeightFile::Terms(recs) => {
            let w = terms(&wname, recs)?;
            if !w.region().is_subset(&Region::singleton(x.clone())) {
                return Err(field(&wname, format!("terms must live on {x}")));
            }
            (vector_matrix(&qmstree::kernel::site_vector(&w, x)), None)
        }
        WeightFile::Keyword(s) if s == "fixed_point" => {
            let local = amplitude.map_vertices(|v| v.strip_prefix(x).expect("fork vertex"));
            let fp = ising::solve_fixed_point(&local, k)?;
            (fp.matrix(), Some(fp.residual))
        }
        WeightFile::Keyword(s) => {
            return Err(field(
                &wname,
                format!("expected a number, terms or \"fixed_point\", got \"{s}\""),
            ));
        }
    };
    let te = TransitionExpectation::from_amplitude(x.clone(), k, amplitude, weight)?;
    Ok(match certificate {
        Some(r) => te.with_fixed_point_residual(r),
        None => te,
    })
}

fn build_custom(f: CustomFile, nmax: Option<usize>, fallback: usize) -> Result<Model, SpecError> {
    if f.k == 0 {
        return Err(field("k", "must be >= 1"));
    }
    let depth = check_depth(f.depth, nmax, fallback)?;
    if !f.kernel.target_vertex.is_root() {
        return Err(field("kernel.target_vertex", "the template kernel must target o"));
    }
    let mut family = KernelFamily::homogeneous(build_kernel("kernel", f.k, &f.kernel)?)?;
    for (i, l) in f.levels.iter().enumerate() {
        if !l.kernel.target_vertex.is_root() {
            return Err(field(
                &format!("levels[{i}].kernel.target_vertex"),
                "level templates must target o",
            ));
        }
        let te = build_kernel(&format!("levels[{i}].kernel"), f.k, &l.kernel)?;
        family = family.with_level(l.level, te)?;
    }
    for (i, spec) in f.vertices.iter().enumerate() {
        family = family.with_vertex(build_kernel(&format!("vertices[{i}]"), f.k, spec)?)?;
    }
    let root = Region::singleton(VertexWord::root());
    let initial = match &f.initial_state {
        None => RegionOperator::identity(root),
        Some(recs) => terms("initial_state", recs)?,
    };
    let handle = QmsHandle::new(
        Tree::cayley(f.k).map_err(qmstree::Error::from)?,
        &initial,
        family,
        depth,
    )
    .map_err(|e| field("initial_state", e.to_string()))?;
    Ok(Model {
        handle,
        ising: None,
        overrides: Vec::new(),
        description: format!("custom k={}", f.k),
    })
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableFile {
    pub observables: Vec<ObservableSpec>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathChoice {
    #[default]
    Nested,
    Explicit,
    Localized,
    Dense,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    pub name: Option<String>,
    pub terms: Vec<TermRecord>,
    #[serde(default)]
    pub path: PathChoice,
    /// Required for the localized path.
    pub vertex: Option<VertexWord>,
    /// Volume for the nested, explicit and dense paths; defaults to depth + 1.
    pub volume: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Observable {
    pub name: String,
    pub operator: RegionOperator,
    pub path: PathChoice,
    pub vertex: Option<VertexWord>,
    pub volume: Option<usize>,
}

pub fn parse_observables(text: &str) -> Result<Vec<Observable>, SpecError> {
    let file: ObservableFile = serde_json::from_str(text).map_err(|e| SpecError::Syntax(e.to_string()))?;
    let mut out = Vec::new();
    for (i, o) in file.observables.into_iter().enumerate() {
        let name = o.name.clone().unwrap_or_else(|| format!("observable_{i}"));
        let operator = terms(&format!("observables[{i}].terms"), &o.terms)?;
        if o.path == PathChoice::Localized && o.vertex.is_none() {
            return Err(field(
                &format!("observables[{i}].vertex"),
                "required for the localized path",
            ));
        }
        out.push(Observable {
            name,
            operator,
            path: o.path,
            vertex: o.vertex,
            volume: o.volume,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ising_examples() {
        let m = parse_model_spec(r#"{"type":"ising_competing","beta":0.0,"J":0.0,"k":2,"depth":3}"#, None).unwrap();
        assert_eq!(m.handle.n_max(), 3);
        let m = parse_model_spec(
            r#"{"type":"ising_competing","beta":0.693147,"J":0.0,"k":2,"depth":3}"#,
            None,
        )
        .unwrap();
        let alpha = ising::closed_form_alpha(&m.ising.unwrap()).unwrap();
        assert!((alpha - 0.16).abs() < 1e-6);
        let err =
            parse_model_spec(r#"{"type":"ising_competing","beta":-1,"J":0.0,"k":2,"depth":3}"#, None).unwrap_err();
        assert!(err.to_string().starts_with("beta:"), "{err}");
    }

    #[test]
    fn unknown_fields_are_named() {
        let err = parse_model_spec(r#"{"type":"ising_competing","beta":1,"J":0,"k":2,"temp":3}"#, None).unwrap_err();
        assert!(err.to_string().contains("temp"), "{err}");
        let err = parse_model_spec(r#"{"type":"potts","k":2}"#, None).unwrap_err();
        assert!(matches!(err, SpecError::Syntax(_)));
    }

    #[test]
    fn nmax_precedence() {
        let text = r#"{"type":"ising_competing","beta":1,"J":0,"k":2,"depth":4}"#;
        assert_eq!(parse_model_spec(text, Some(2)).unwrap().handle.n_max(), 2);
        let text = r#"{"type":"ising_competing","beta":1,"J":0,"k":2}"#;
        assert_eq!(parse_model_spec(text, None).unwrap().handle.n_max(), DEFAULT_NMAX);
    }

    #[test]
    fn custom_models() {
        let trace = r#"{"type":"custom","k":2,"depth":3,
            "kernel":{"target_vertex":"o","amplitude":[{"coefficient":[1,0],"letters":{}}],"weight":1}}"#;
        let m = parse_model_spec(trace, None).unwrap();
        assert!(m.ising.is_none());
        let fixed = r#"{"type":"custom","k":2,
            "kernel":{"target_vertex":"o","amplitude":[
                {"coefficient":[2.25,0],"letters":{}},
                {"coefficient":[0.75,0],"letters":{"o":"Z","1":"Z"}},
                {"coefficient":[0.75,0],"letters":{"o":"Z","2":"Z"}},
                {"coefficient":[0.25,0],"letters":{"1":"Z","2":"Z"}}],"weight":"fixed_point"}}"#;
        let m = parse_model_spec(fixed, None).unwrap();
        assert!(m.handle.certificate().is_some());
        let bad = trace.replace("\"weight\":1", "\"weight\":0.5");
        assert!(parse_model_spec(&bad, None).is_err());
        let bad = trace.replace("\"weight\":1", "\"weight\":\"auto\"");
        assert!(parse_model_spec(&bad, None)
            .unwrap_err()
            .to_string()
            .starts_with("kernel.weight"));
    }

    #[test]
    fn observables() {
        let obs = parse_observables(
            r#"{"observables":[{"name":"zz","terms":[{"coefficient":[1,0],"letters":{"o":"Z","1":"Z"}}]},
                {"terms":[{"coefficient":[1,0],"letters":{"1":"Z"}}],"path":"localized","vertex":"1"}]}"#,
        )
        .unwrap();
        assert_eq!(obs.len(), 2);
        assert_eq!(obs[1].name, "observable_1");
        assert!(parse_observables(r#"{"observables":[{"terms":[],"path":"localized"}]}"#).is_err());
    }
}
