//! `modelDescription.xml` generation and parsing.

use std::collections::HashSet;
use std::fmt::Write as _;

use roxmltree::Node;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::ProjectConfig;
use crate::parser::{Direction, ModuleInterface};
use crate::time::Duration;
use crate::types::{map_rtl_to_fmi, rtl_to_fmi, FmiType, FmiValue, ValueError};

pub const FMI_VERSION: &str = "3.0";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DescriptorError {
    #[error(transparent)]
    Unsupported(#[from] ValueError),
    #[error("duplicate value reference {0}")]
    DuplicateReference(u32),
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
    #[error("output `{0}` must not carry a start value")]
    OutputStart(String),
    #[error("start value of `{name}` is {found}, variable is {expected}")]
    StartType {
        name: String,
        expected: FmiType,
        found: FmiType,
    },
    #[error("modelDescription.xml {line}:{column}: {message}")]
    Parse { line: u32, column: u32, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Causality {
    Input,
    Output,
}

impl Causality {
    pub fn as_str(self) -> &'static str {
        match self {
            Causality::Input => "input",
            Causality::Output => "output",
        }
    }
}

impl From<Direction> for Causality {
    fn from(d: Direction) -> Self {
        match d {
            Direction::In => Causality::Input,
            Direction::Out => Causality::Output,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableDescriptor {
    pub name: String,
    pub value_reference: u32,
    pub fmi_type: FmiType,
    pub causality: Causality,
    pub start: Option<FmiValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoSimAttrs {
    pub model_identifier: String,
    pub can_handle_variable_step: bool,
    pub fixed_step: Duration,
    pub can_return_early_after_intermediate_update: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelDescriptor {
    pub fmi_version: String,
    pub model_name: String,
    pub instantiation_token: String,
    pub variables: Vec<VariableDescriptor>,
    pub cosim: CoSimAttrs,
}

impl ModelDescriptor {
    pub fn variable(&self, name: &str) -> Option<&VariableDescriptor> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn by_reference(&self, vr: u32) -> Option<&VariableDescriptor> {
        self.variables.iter().find(|v| v.value_reference == vr)
    }

    /// Checks reference/name uniqueness and start-value placement.
    pub fn validate(&self) -> Result<(), DescriptorError> {
        let mut refs = HashSet::new();
        let mut names = HashSet::new();
        for v in &self.variables {
            if !refs.insert(v.value_reference) {
                return Err(DescriptorError::DuplicateReference(v.value_reference));
            }
            if !names.insert(v.name.as_str()) {
                return Err(DescriptorError::DuplicateName(v.name.clone()));
            }
            match (&v.start, v.causality) {
                (Some(_), Causality::Output) => return Err(DescriptorError::OutputStart(v.name.clone())),
                (Some(s), _) if s.ty() != v.fmi_type => {
                    return Err(DescriptorError::StartType {
                        name: v.name.clone(),
                        expected: v.fmi_type,
                        found: s.ty(),
                    })
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Deterministic token: SHA-256 over the model name and variable list,
/// formatted as a UUID.
pub fn derive_token(model_name: &str, variables: &[VariableDescriptor]) -> String {
    let mut h = Sha256::new();
    h.update(model_name.as_bytes());
    for v in variables {
        h.update(format!("\n{}:{}:{}:{}", v.name, v.value_reference, v.fmi_type.xml_name(), v.causality.as_str()));
    }
    let d = h.finalize();
    let x: String = d[..16].iter().map(|b| format!("{b:02x}")).collect();
    format!("{{{}-{}-{}-{}-{}}}", &x[..8], &x[8..12], &x[12..16], &x[16..20], &x[20..32])
}

pub fn build_descriptor(iface: &ModuleInterface, cfg: &ProjectConfig) -> Result<ModelDescriptor, DescriptorError> {
    let mut ports: Vec<_> = iface.ports.iter().collect();
    ports.sort_by_key(|p| p.declaration_index);
    let mut variables = Vec::with_capacity(ports.len());
    for (i, p) in ports.into_iter().enumerate() {
        let fmi_type = map_rtl_to_fmi(p.rtl_type)?;
        let causality = Causality::from(p.direction);
        let start = match causality {
            Causality::Output => None,
            Causality::Input => Some(match cfg.start_values.get(&p.name) {
                Some(v) => v.clone(),
                None => rtl_to_fmi(&p.rtl_type.zero())?,
            }),
        };
        variables.push(VariableDescriptor {
            name: p.name.clone(),
            value_reference: i as u32 + 1,
            fmi_type,
            causality,
            start,
        });
    }
    let d = ModelDescriptor {
        fmi_version: FMI_VERSION.to_string(),
        instantiation_token: derive_token(&cfg.model_name, &variables),
        model_name: cfg.model_name.clone(),
        variables,
        cosim: CoSimAttrs {
            model_identifier: cfg.model_name.clone(),
            can_handle_variable_step: true,
            fixed_step: cfg.step_size,
            can_return_early_after_intermediate_update: cfg.intermediate_update.is_some()
                || !cfg.interrupts.is_empty(),
        },
    };
    d.validate()?;
    Ok(d)
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

pub fn serialize_descriptor(d: &ModelDescriptor) -> String {
    let mut x = String::new();
    x.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        x,
        "<fmiModelDescription fmiVersion=\"{}\" modelName=\"{}\" instantiationToken=\"{}\">",
        escape(&d.fmi_version),
        escape(&d.model_name),
        escape(&d.instantiation_token)
    );
    let _ = writeln!(
        x,
        "  <CoSimulation modelIdentifier=\"{}\" canHandleVariableCommunicationStepSize=\"{}\" fixedInternalStepSize=\"{}\" canReturnEarlyAfterIntermediateUpdate=\"{}\"/>",
        escape(&d.cosim.model_identifier),
        d.cosim.can_handle_variable_step,
        d.cosim.fixed_step.secs_text(),
        d.cosim.can_return_early_after_intermediate_update
    );
    x.push_str("  <ModelVariables>\n");
    for v in &d.variables {
        let _ = write!(
            x,
            "    <{} name=\"{}\" valueReference=\"{}\" causality=\"{}\" variability=\"discrete\"",
            v.fmi_type.xml_name(),
            escape(&v.name),
            v.value_reference,
            v.causality.as_str()
        );
        if let Some(s) = &v.start {
            let _ = write!(x, " start=\"{}\"", escape(&s.to_text()));
        }
        x.push_str("/>\n");
    }
    x.push_str("  </ModelVariables>\n");
    x.push_str("</fmiModelDescription>\n");
    x
}

fn node_error(doc: &roxmltree::Document, node: Node, message: String) -> DescriptorError {
    let p = doc.text_pos_at(node.range().start);
    DescriptorError::Parse {
        line: p.row,
        column: p.col,
        message,
    }
}

fn attr<'a>(doc: &roxmltree::Document, node: Node<'a, '_>, name: &str) -> Result<&'a str, DescriptorError> {
    node.attribute(name).ok_or_else(|| {
        node_error(doc, node, format!("<{}> lacks attribute `{name}`", node.tag_name().name()))
    })
}

pub fn parse_descriptor(xml: &str) -> Result<ModelDescriptor, DescriptorError> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| {
        let p = e.pos();
        DescriptorError::Parse {
            line: p.row,
            column: p.col,
            message: e.to_string(),
        }
    })?;
    let err = |node: Node, message: String| node_error(&doc, node, message);
    let attr = |node: Node<'_, '_>, name: &str| attr(&doc, node, name).map(str::to_string);
    let flag = |node: Node, name: &str| match attr(node, name)?.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(err(node, format!("`{name}` must be true or false, got `{other}`"))),
    };

    let root = doc.root_element();
    if root.tag_name().name() != "fmiModelDescription" {
        return Err(err(root, format!("unexpected root element <{}>", root.tag_name().name())));
    }
    let fmi_version = attr(root, "fmiVersion")?;
    let model_name = attr(root, "modelName")?;
    let instantiation_token = attr(root, "instantiationToken")?;

    let child = |name: &str| {
        root.children()
            .find(|c| c.is_element() && c.tag_name().name() == name)
            .ok_or_else(|| err(root, format!("missing <{name}>")))
    };
    let cs = child("CoSimulation")?;
    let step_text = attr(cs, "fixedInternalStepSize")?;
    let cosim = CoSimAttrs {
        model_identifier: attr(cs, "modelIdentifier")?,
        can_handle_variable_step: flag(cs, "canHandleVariableCommunicationStepSize")?,
        fixed_step: Duration::parse_secs(&step_text)
            .ok_or_else(|| err(cs, format!("bad fixedInternalStepSize `{step_text}`")))?,
        can_return_early_after_intermediate_update: flag(cs, "canReturnEarlyAfterIntermediateUpdate")?,
    };

    let mut variables = Vec::new();
    for node in child("ModelVariables")?.children().filter(|c| c.is_element()) {
        let tag = node.tag_name().name();
        let fmi_type = FmiType::from_xml_name(tag).ok_or_else(|| err(node, format!("unknown variable type <{tag}>")))?;
        let vr_text = attr(node, "valueReference")?;
        let value_reference = vr_text
            .parse()
            .map_err(|_| err(node, format!("bad valueReference `{vr_text}`")))?;
        let causality = match attr(node, "causality")?.as_str() {
            "input" => Causality::Input,
            "output" => Causality::Output,
            other => return Err(err(node, format!("unsupported causality `{other}`"))),
        };
        let variability = attr(node, "variability")?;
        if variability != "discrete" {
            return Err(err(node, format!("unsupported variability `{variability}`")));
        }
        let start = node
            .attribute("start")
            .map(|s| FmiValue::parse_text(fmi_type, s).map_err(|e| err(node, e.to_string())))
            .transpose()?;
        variables.push(VariableDescriptor {
            name: attr(node, "name")?,
            value_reference,
            fmi_type,
            causality,
            start,
        });
    }
    let d = ModelDescriptor {
        fmi_version,
        model_name,
        instantiation_token,
        variables,
        cosim,
    };
    d.validate()?;
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use crate::parser::parse_interface;

    const ALU: &str = "SC_MODULE(alu) { sc_in<sc_uint<4>> a, b; sc_in<sc_uint<3>> op; sc_out<sc_uint<4>> result; };";

    fn alu() -> ModelDescriptor {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("alu.h"), ALU).unwrap();
        let cfg = parse_config("sources: [alu.h]\ntop_module: alu\n", dir.path()).unwrap();
        build_descriptor(&cfg.interface, &cfg).unwrap()
    }

    #[test]
    fn alu_variables() {
        let d = alu();
        assert_eq!(d.variables.len(), 4);
        assert!(d.variables.iter().all(|v| v.fmi_type == FmiType::UInt8));
        let caus: Vec<_> = d.variables.iter().map(|v| v.causality).collect();
        assert_eq!(caus, [Causality::Input, Causality::Input, Causality::Input, Causality::Output]);
        let vrs: Vec<_> = d.variables.iter().map(|v| v.value_reference).collect();
        assert_eq!(vrs, [1, 2, 3, 4]);
        assert_eq!(d.variables[0].start, Some(FmiValue::UInt8(0)));
        assert_eq!(d.variables[3].start, None);
        assert_eq!(d.cosim.fixed_step, Duration::from_ms(1));
    }

    #[test]
    fn round_trip_and_determinism() {
        let d = alu();
        let xml = serialize_descriptor(&d);
        assert_eq!(xml, serialize_descriptor(&d));
        assert_eq!(parse_descriptor(&xml).unwrap(), d);
        assert!(xml.contains("fixedInternalStepSize=\"0.001\""), "{xml}");
        assert!(xml.contains("<UInt8 name=\"result\" valueReference=\"4\" causality=\"output\" variability=\"discrete\"/>"));
    }

    #[test]
    fn logic_ports_become_booleans() {
        let iface = parse_interface("SC_MODULE(m) { sc_in<sc_logic> start; sc_out<bool> nack; };", "m").unwrap();
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("m.h"), "SC_MODULE(m) { sc_in<sc_logic> start; sc_out<bool> nack; };").unwrap();
        let cfg = parse_config("sources: [m.h]\ntop_module: m\n", dir.path()).unwrap();
        let d = build_descriptor(&iface, &cfg).unwrap();
        assert!(d.variables.iter().all(|v| v.fmi_type == FmiType::Bool));
    }

    #[test]
    fn missing_version_is_a_positioned_error() {
        let xml = serialize_descriptor(&alu()).replace("fmiVersion=\"3.0\" ", "");
        match parse_descriptor(&xml) {
            Err(DescriptorError::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("fmiVersion"));
            }
            other => panic!("{other:?}"),
        }
        match parse_descriptor("<fmiModelDescription>\n  <oops></fmiModelDescription>") {
            Err(DescriptorError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_reference_rejected() {
        let mut d = alu();
        d.variables[1].value_reference = 1;
        assert_eq!(d.validate(), Err(DescriptorError::DuplicateReference(1)));
        let xml = serialize_descriptor(&d);
        assert!(parse_descriptor(&xml).is_err());
    }

    #[test]
    fn token_depends_on_variables() {
        let d = alu();
        let mut vars = d.variables.clone();
        vars[0].name = "x".into();
        assert_ne!(derive_token("alu", &vars), d.instantiation_token);
        assert_eq!(derive_token("alu", &d.variables), d.instantiation_token);
        assert_eq!(d.instantiation_token.len(), 38);
    }
}
