"""Topic mining over clinical note sources with stay-length prediction."""

from .cohort import LosCategory, bin_los, compute_los
from .features import (
    FeatureMatrix,
    SmoteConfig,
    SplitSpec,
    assemble_features,
    select_source,
    smote,
    stratified_split,
)
from .learn import CLASSIFIERS, evaluate, predict, train
from .textprep import (
    DiseaseGazetteer,
    NegexLexicon,
    Phrase,
    default_negex_lexicon,
    detect_negation,
    entity_filter,
    merge_encounter,
    split_phrases,
    tokenize,
)
from .topics import (
    LdaConfig,
    TopicModel,
    coherence_cv,
    coherence_scan,
    coherence_umass,
    fit_lda,
    infer_theta,
    load_model,
    save_model,
    top_keywords,
)
from .vectorize import Vocabulary, bow_vectors, build_vocabulary, tfidf_vectors

__version__ = "0.1.0"

__all__ = [
    "CLASSIFIERS",
    "DiseaseGazetteer",
    "FeatureMatrix",
    "SmoteConfig",
    "SplitSpec",
    "LdaConfig",
    "LosCategory",
    "NegexLexicon",
    "Phrase",
    "TopicModel",
    "Vocabulary",
    "assemble_features",
    "bin_los",
    "bow_vectors",
    "build_vocabulary",
    "coherence_cv",
    "coherence_scan",
    "coherence_umass",
    "compute_los",
    "default_negex_lexicon",
    "detect_negation",
    "entity_filter",
    "evaluate",
    "fit_lda",
    "infer_theta",
    "load_model",
    "merge_encounter",
    "predict",
    "save_model",
    "select_source",
    "smote",
    "split_phrases",
    "stratified_split",
    "tfidf_vectors",
    "tokenize",
    "top_keywords",
    "train",
    "__version__",
]
