"""Near- vs distant-horizon classification of survey answers with multi-task PU learning."""

from .analysis import assessment_table, quantile_split, rank_agreement, welch_ttest
from .corpus import Corpus, Document, Vocabulary, build_vocabulary, load_corpus, vectorize
from .mtpu import MtpuModel, MtpuTrainConfig, build_mtpu, mtpu_train
from .net import DenseNet, NetConfig
from .purisk import PuConfig, TrainConfig, nonneg_pu_risk, pu_train, unbiased_pu_risk

__version__ = "0.1.0"
