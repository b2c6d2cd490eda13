//! `.fmu` archive writing and loading.
//!
//! Layout:
//!
//! ```text
//! modelDescription.xml
//! resources/model.yaml     registry key, construction parameters, wrapper options
//! sources/wrapper.txt      generated glue listing
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipArchive, ZipWriter};

use crate::config::{IntermediateUpdateYaml, InterruptSpec, Params};
use crate::descriptor::{parse_descriptor, serialize_descriptor, Causality, DescriptorError, ModelDescriptor};
use crate::design::{Design, DesignError, DesignRegistry};
use crate::parser::Direction;
use crate::types::map_rtl_to_fmi;

pub const DESCRIPTOR_PATH: &str = "modelDescription.xml";
pub const MODEL_PATH: &str = "resources/model.yaml";
pub const WRAPPER_PATH: &str = "sources/wrapper.txt";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PackageError {
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("bad archive: {0}")]
    BadArchive(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("interface mismatch: {0}")]
    InterfaceMismatch(String),
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error(transparent)]
    Design(DesignError),
}

impl From<DesignError> for PackageError {
    fn from(e: DesignError) -> Self {
        match e {
            DesignError::UnknownModel(k) => PackageError::UnknownModel(k),
            e => PackageError::Design(e),
        }
    }
}

/// Contents of `resources/model.yaml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelResources {
    pub registry_key: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: Params,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interrupts: Vec<InterruptSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intermediate_update: Option<IntermediateUpdateYaml>,
}

impl ModelResources {
    pub fn new(registry_key: &str) -> Self {
        ModelResources {
            registry_key: registry_key.to_string(),
            params: Params::new(),
            interrupts: Vec::new(),
            intermediate_update: None,
        }
    }
}

/// Glue listing: one `s_`-prefixed binding signal per variable and the
/// value-reference dispatch of the get/set functions.
pub fn wrapper_glue(d: &ModelDescriptor, registry_key: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "// wrapper glue for model `{}` (design `{registry_key}`)", d.model_name);
    let _ = writeln!(s, "struct {}_instance {{", d.cosim.model_identifier);
    let _ = writeln!(s, "    top_level *top;");
    for v in &d.variables {
        let _ = writeln!(
            s,
            "    signal s_{:<16} // vr {:>3}  {:<6}  {}",
            format!("{};", v.name),
            v.value_reference,
            v.causality.as_str(),
            v.fmi_type
        );
    }
    s.push_str("};\n\n");
    s.push_str("fmi3InstantiateCoSimulation:\n    top = new top_level;\n");
    for v in &d.variables {
        let _ = writeln!(s, "    top->{0}(s_{0});", v.name);
    }
    let mut by_type: BTreeMap<(&str, &str), Vec<String>> = BTreeMap::new();
    for v in &d.variables {
        let dir = match v.causality {
            Causality::Input => "Set",
            Causality::Output => "Get",
        };
        by_type
            .entry((dir, v.fmi_type.xml_name()))
            .or_default()
            .push(format!("{} -> s_{}", v.value_reference, v.name));
    }
    for ((dir, ty), rows) in by_type {
        let _ = writeln!(s, "\nfmi3{dir}{ty}:");
        for r in rows {
            let _ = writeln!(s, "    {r}");
        }
    }
    s.push_str("\nfmi3DoStep:\n    run kernel for communicationStepSize\n");
    s.push_str("\nfmi3FreeInstance:\n    delete top\n");
    s
}

fn io_err(path: &Path, e: impl fmt::Display) -> PackageError {
    PackageError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Archive bytes; identical inputs give identical bytes.
pub fn package_bytes(d: &ModelDescriptor, model: &ModelResources) -> Result<Vec<u8>, PackageError> {
    if model.registry_key.trim().is_empty() {
        return Err(PackageError::InvalidArgument("registry key must not be empty".into()));
    }
    d.validate()?;
    let yaml = serde_yaml::to_string(model).map_err(|e| PackageError::InvalidArgument(e.to_string()))?;
    let entries = [
        (DESCRIPTOR_PATH, serialize_descriptor(d)),
        (MODEL_PATH, yaml),
        (WRAPPER_PATH, wrapper_glue(d, &model.registry_key)),
    ];
    let opts = SimpleFileOptions::default()
        .compression_method(CompressionMethod::Deflated)
        .last_modified_time(DateTime::default())
        .unix_permissions(0o644);
    let mut zw = ZipWriter::new(Cursor::new(Vec::new()));
    let zerr = |e: zip::result::ZipError| PackageError::InvalidArgument(e.to_string());
    for (name, body) in entries {
        zw.start_file(name, opts).map_err(zerr)?;
        zw.write_all(body.as_bytes())
            .map_err(|e| PackageError::InvalidArgument(e.to_string()))?;
    }
    Ok(zw.finish().map_err(zerr)?.into_inner())
}

/// Writes the archive to `out_path`, creating parent directories.
pub fn package(d: &ModelDescriptor, model: &ModelResources, out_path: &Path) -> Result<PathBuf, PackageError> {
    let bytes = package_bytes(d, model)?;
    if let Some(dir) = out_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(out_path, bytes).map_err(|e| io_err(out_path, e))?;
    Ok(out_path.to_path_buf())
}

/// A loaded archive bound to its registered design.
#[derive(Clone)]
pub struct FmuArchive {
    pub descriptor: ModelDescriptor,
    pub model: ModelResources,
    /// Raw bytes of every archive entry.
    pub resources: BTreeMap<String, Vec<u8>>,
    pub wrapper_source: Option<String>,
    pub design: Arc<dyn Design>,
}

impl fmt::Debug for FmuArchive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FmuArchive")
            .field("model_name", &self.descriptor.model_name)
            .field("registry_key", &self.model.registry_key)
            .field("entries", &self.resources.keys().collect::<Vec<_>>())
            .finish()
    }
}

pub fn load(path: &Path, registry: &DesignRegistry) -> Result<FmuArchive, PackageError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    load_bytes(&bytes, registry)
}

pub fn load_bytes(bytes: &[u8], registry: &DesignRegistry) -> Result<FmuArchive, PackageError> {
    let mut zip = ZipArchive::new(Cursor::new(bytes)).map_err(|e| PackageError::BadArchive(e.to_string()))?;
    let mut resources = BTreeMap::new();
    for i in 0..zip.len() {
        let mut f = zip.by_index(i).map_err(|e| PackageError::BadArchive(e.to_string()))?;
        if f.is_dir() {
            continue;
        }
        let mut buf = Vec::new();
        f.read_to_end(&mut buf)
            .map_err(|e| PackageError::BadArchive(format!("{}: {e}", f.name())))?;
        resources.insert(f.name().to_string(), buf);
    }
    let text = |name: &str| -> Result<String, PackageError> {
        let raw = resources
            .get(name)
            .ok_or_else(|| PackageError::BadArchive(format!("missing {name}")))?;
        String::from_utf8(raw.clone()).map_err(|_| PackageError::BadArchive(format!("{name} is not UTF-8")))
    };
    let descriptor = parse_descriptor(&text(DESCRIPTOR_PATH)?)?;
    let model: ModelResources = serde_yaml::from_str(&text(MODEL_PATH)?)
        .map_err(|e| PackageError::BadArchive(format!("{MODEL_PATH}: {e}")))?;
    let wrapper_source = resources.contains_key(WRAPPER_PATH).then(|| text(WRAPPER_PATH)).transpose()?;

    let design = registry.create(&model.registry_key, &model.params)?;
    check_interface(&descriptor, design.as_ref())?;
    for irq in &model.interrupts {
        if descriptor.variable(&irq.signal).is_none() {
            return Err(PackageError::InterfaceMismatch(format!(
                "interrupt on unknown variable `{}`",
                irq.signal
            )));
        }
    }
    if let Some(u) = &model.intermediate_update {
        u.resolve().map_err(|e| PackageError::BadArchive(e.to_string()))?;
    }
    Ok(FmuArchive {
        descriptor,
        model,
        resources,
        wrapper_source,
        design,
    })
}

/// Variables and design ports must agree in name, type and direction.
pub fn check_interface(d: &ModelDescriptor, design: &dyn Design) -> Result<(), PackageError> {
    let ports = design.ports();
    let mismatch = |m: String| Err(PackageError::InterfaceMismatch(m));
    for v in &d.variables {
        let Some(p) = ports.iter().find(|p| p.spec.name == v.name) else {
            return mismatch(format!(
                "variable `{}` has no port in design `{}`",
                v.name,
                design.key()
            ));
        };
        let ty = map_rtl_to_fmi(p.spec.rtl_type).map_err(|e| PackageError::InterfaceMismatch(e.to_string()))?;
        if ty != v.fmi_type {
            return mismatch(format!("variable `{}` is {} but the port maps to {ty}", v.name, v.fmi_type));
        }
        let dir = match v.causality {
            Causality::Input => Direction::In,
            Causality::Output => Direction::Out,
        };
        if dir != p.spec.direction {
            return mismatch(format!("variable `{}` has causality {}", v.name, v.causality.as_str()));
        }
    }
    if let Some(p) = ports.iter().find(|p| d.variable(&p.spec.name).is_none()) {
        return mismatch(format!("port `{}` has no variable", p.spec.name));
    }
    Ok(())
}
