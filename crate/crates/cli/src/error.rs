use std::fmt;

use rul_core::dataio::DataError;
use rul_core::experiment::ExperimentError;
use rul_core::features::FeatureError;
use rul_core::model::ModelError;
use rul_core::traineval::TrainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Usage,
    Data,
    Numeric,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Usage => 2,
            Kind::Data => 3,
            Kind::Numeric => 4,
        }
    }
}

/// A failure reported as `error[<class>]: <message>` on one line.
#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub class: String,
    pub message: String,
}

impl CliError {
    pub fn new(kind: Kind, class: impl Into<String>, message: impl fmt::Display) -> Self {
        Self { kind, class: class.into(), message: message.to_string() }
    }

    pub fn usage(message: impl fmt::Display) -> Self {
        Self::new(Kind::Usage, "Usage", message)
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Self::new(Kind::Data, "Io", format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let message = self.message.replace('\n', " ");
        write!(f, "error[{}]: {message}", self.class)
    }
}

/// Enum variant name from the Debug form, e.g. `MalformedRow { .. }` -> `MalformedRow`.
fn variant<E: fmt::Debug>(e: &E) -> String {
    let dbg = format!("{e:?}");
    dbg.split(|c: char| !c.is_alphanumeric() && c != '_').next().unwrap_or("Error").to_string()
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Feature(f) => f.into(),
            DataError::Model(m) => m.into(),
            DataError::InvalidConfig(_) => Self::new(Kind::Usage, "InvalidConfig", e),
            other => Self::new(Kind::Data, variant(&other), other),
        }
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        let kind = match e {
            FeatureError::InvalidConfig(_) => Kind::Usage,
            _ => Kind::Data,
        };
        Self::new(kind, variant(&e), e)
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        let kind = match e {
            ModelError::Config(_) | ModelError::IndivisibleGrid { .. } | ModelError::OddGrid(_) => Kind::Usage,
            ModelError::Tensor(_) => Kind::Numeric,
            _ => Kind::Data,
        };
        Self::new(kind, variant(&e), e)
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Model(m) => m.into(),
            TrainError::DivergedLoss { .. } => Self::new(Kind::Numeric, "DivergedLoss", e),
            TrainError::InvalidConfig(_) => Self::new(Kind::Usage, "InvalidConfig", e),
            other => Self::new(Kind::Data, variant(&other), other),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Data(e) => e.into(),
            ExperimentError::Feature(e) => e.into(),
            ExperimentError::Model(e) => e.into(),
            ExperimentError::Train(e) => e.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classes_and_codes() {
        let e: CliError = TrainError::DivergedLoss { epoch: 1, batch: 0 }.into();
        assert_eq!((e.kind.exit_code(), e.class.as_str()), (4, "DivergedLoss"));
        let e: CliError = DataError::MissingDirectory("x".into()).into();
        assert_eq!((e.kind.exit_code(), e.class.as_str()), (3, "MissingDirectory"));
        let e: CliError = DataError::MalformedRow { file: "f.csv".into(), line: 3, reason: "bad\nfield".into() }.into();
        assert_eq!(e.class, "MalformedRow");
        assert_eq!(e.to_string().lines().count(), 1);
        let e: CliError = FeatureError::NoOnset("b".into()).into();
        assert_eq!((e.kind, e.class.as_str()), (Kind::Data, "NoOnset"));
    }
}
