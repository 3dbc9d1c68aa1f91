use crate::cae::CaeModel;
use crate::inference::InferenceModel;

/// Last good parameters retained when training aborts.
#[derive(Clone, Debug)]
pub enum Checkpoint {
    Cae(CaeModel),
    Inference(InferenceModel),
}
