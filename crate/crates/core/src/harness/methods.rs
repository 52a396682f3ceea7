use super::experiment::Experiment;
use super::grid::{EncoderMode, HeadKind, MetadataMode, MethodSpec, METHOD_GRID};
use super::model::{forest_input, TrainedModel};
use crate::blocks::{train, BlockNetwork, Combine, ConcatClassifier, History, MetaBlock};
use crate::error::{Error, Result};
use crate::forest::RandomForest;
use crate::nn::init::seeded_rng;

#[derive(Debug, Clone)]
pub struct Fitted {
    pub model: TrainedModel,
    pub history: Option<History>,
}

/// One comparison method: fits a predictor from an experiment's shared state.
pub trait Method: Send + Sync {
    fn spec(&self) -> &MethodSpec;

    fn fit(&self, exp: &Experiment) -> Result<Fitted>;
}

/// Methods 1–8: a text encoder (frozen or finetuned) feeding a dense head or
/// a forest, with or without the metadata features concatenated.
pub struct PipelineMethod {
    spec: MethodSpec,
}

impl PipelineMethod {
    pub fn new(spec: MethodSpec) -> Result<Self> {
        if !matches!(spec.metadata, MetadataMode::None | MetadataMode::Concat)
            || !matches!(spec.head, HeadKind::Dense | HeadKind::Forest)
        {
            return Err(Error::Config(format!("method {spec} is not a pipeline method")));
        }
        Ok(PipelineMethod { spec })
    }
}

impl Method for PipelineMethod {
    fn spec(&self) -> &MethodSpec {
        &self.spec
    }

    fn fit(&self, exp: &Experiment) -> Result<Fitted> {
        let id = self.spec.id;
        let with_features = self.spec.metadata == MetadataMode::Concat;
        let (encoder, encoder_history) = match self.spec.encoder {
            EncoderMode::Frozen => (exp.initial_text_block().clone(), None),
            EncoderMode::Finetuned => {
                let (text, history) = exp.finetuned_text_block()?;
                (text.clone(), Some(history.clone()))
            }
        };
        match self.spec.head {
            // finetuning already trained a dense head on the text alone
            HeadKind::Dense if self.spec.encoder == EncoderMode::Finetuned && !with_features => Ok(Fitted {
                model: TrainedModel::Text { text: encoder },
                history: encoder_history,
            }),
            HeadKind::Dense => {
                let feature_dim = if with_features { exp.feature_dim() } else { 0 };
                let mut rng = seeded_rng(exp.stream_seed(&format!("head-{id}")));
                let mut classifier = ConcatClassifier::init(encoder, feature_dim, true, &mut rng);
                let history = train(
                    &mut classifier,
                    &exp.train,
                    &exp.val,
                    &exp.train_config(&format!("head-{id}")),
                )?;
                Ok(Fitted {
                    model: TrainedModel::Dense { classifier },
                    history: Some(history),
                })
            }
            HeadKind::Forest => {
                let x = exp
                    .train
                    .iter()
                    .map(|ex| forest_input(&encoder, &ex.input, with_features))
                    .collect::<Result<Vec<_>>>()?;
                let y: Vec<usize> = exp.train.iter().map(|ex| ex.label).collect();
                let forest = RandomForest::fit(&x, &y, exp.n_classes(), &exp.forest_params(&id.to_string()))?;
                Ok(Fitted {
                    model: TrainedModel::Forest {
                        encoder,
                        with_features,
                        forest,
                    },
                    history: None,
                })
            }
            _ => unreachable!("checked in PipelineMethod::new"),
        }
    }
}

/// Methods 9–10: text and metadata blocks merged by a combine strategy and
/// trained jointly from the shared initial text block.
pub struct BlockMethod {
    spec: MethodSpec,
}

impl BlockMethod {
    pub fn new(spec: MethodSpec) -> Result<Self> {
        if spec.metadata != MetadataMode::Block || spec.head.combine().is_none() {
            return Err(Error::Config(format!("method {spec} is not a block method")));
        }
        Ok(BlockMethod { spec })
    }
}

impl Method for BlockMethod {
    fn spec(&self) -> &MethodSpec {
        &self.spec
    }

    fn fit(&self, exp: &Experiment) -> Result<Fitted> {
        let kind = self.spec.head.combine().expect("checked in BlockMethod::new");
        let c = exp.n_classes();
        let model_cfg = &exp.config.model;
        let meta = MetaBlock::init(exp.feature_dim(), c, &mut seeded_rng(exp.stream_seed("meta-block")));
        let combine = Combine::init(
            kind,
            2,
            c,
            model_cfg.combine_hidden,
            model_cfg.average_of,
            &mut seeded_rng(exp.stream_seed("combine")),
        );
        let mut network = BlockNetwork::new(exp.initial_text_block().clone(), meta, combine)?;
        let history = train(
            &mut network,
            &exp.train,
            &exp.val,
            &exp.train_config(&format!("blocks-{}", self.spec.id)),
        )?;
        Ok(Fitted {
            model: TrainedModel::Blocks { network },
            history: Some(history),
        })
    }
}

/// Methods registered by id and name, selected at runtime.
#[derive(Default)]
pub struct MethodRegistry {
    methods: Vec<Box<dyn Method>>,
}

impl MethodRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// All ten grid methods.
    pub fn standard() -> Self {
        let mut reg = Self::new();
        for spec in METHOD_GRID {
            let method: Box<dyn Method> = match spec.metadata {
                MetadataMode::Block => Box::new(BlockMethod::new(spec).expect("grid entry")),
                _ => Box::new(PipelineMethod::new(spec).expect("grid entry")),
            };
            reg.register(method).expect("grid ids and names are unique");
        }
        reg
    }

    pub fn register(&mut self, method: Box<dyn Method>) -> Result<()> {
        let spec = method.spec();
        if self
            .methods
            .iter()
            .any(|m| m.spec().id == spec.id || m.spec().name == spec.name)
        {
            return Err(Error::Config(format!("method {spec} registered twice")));
        }
        self.methods.push(method);
        Ok(())
    }

    /// Looks up by id (`"7"`) or name (`"finetuned-concat-dense"`).
    pub fn get(&self, key: &str) -> Result<&dyn Method> {
        let key = key.trim();
        self.methods
            .iter()
            .find(|m| m.spec().name == key || key.parse::<u8>().is_ok_and(|id| id == m.spec().id))
            .map(|m| m.as_ref())
            .ok_or_else(|| Error::UnknownMethod(key.to_string()))
    }

    pub fn specs(&self) -> impl Iterator<Item = &MethodSpec> {
        self.methods.iter().map(|m| m.spec())
    }

    pub fn len(&self) -> usize {
        self.methods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.methods.is_empty()
    }
}
