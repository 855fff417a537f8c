use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("header `{header}` declares field `{field}` twice")]
    DuplicateField { header: String, field: String },
    #[error("field `{header}.{field}` has width {width}; widths must be 1..=64")]
    BadFieldWidth {
        header: String,
        field: String,
        width: usize,
    },
    #[error("header `{header}` has no field `{field}`")]
    UnknownField { header: String, field: String },
    #[error("header `{header}` value is missing field `{field}`")]
    MissingField { header: String, field: String },
    #[error("value {value} does not fit field `{field}` of {width} bits")]
    ValueOutOfRange { field: String, value: u64, width: usize },
    #[error("binding `{0}` occurs more than once")]
    DuplicateBinding(String),
    #[error("condition `{condition}` reads `{name}`, which is not bound to its left")]
    DependencyOrder { condition: String, name: String },
    #[error("condition reads unbound name `{0}`")]
    UnresolvedCondition(String),
    #[error("ill-formed format: {0}")]
    IllFormedFormat(String),
    #[error("unknown header type `{0}`")]
    UnknownHeader(String),
    #[error("schema error: {0}")]
    Schema(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("multicast group {0} is not configured")]
    UnknownGroup(u16),
    #[error("LAG {0} is not configured")]
    UnknownLag(u16),
    #[error("oracle index {index} out of range for queue of length {len}")]
    OracleOutOfRange { index: usize, len: usize },
    #[error("unsupported configuration: {0}")]
    UnsupportedConfig(String),
    #[error("admission oracle dropped a copy for always-ready port {0}")]
    PolicyViolation(u16),
    #[error("admission mask has {mask} entries for {copies} copies")]
    MaskLength { mask: usize, copies: usize },
    #[error("recirculation register already occupied")]
    RecircBusy,
    #[error("egress parser rejected a packet")]
    EgressParseFailure,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("step not enabled: {0}")]
    StepNotEnabled(&'static str),
    #[error(transparent)]
    Engine(#[from] EngineError),
}
