"""Programming-language identification for short code snippets.

Multinomial Naive Bayes over top-k TF-IDF bag-of-words features, trained on
code blocks mined from a Stack Exchange data dump.
"""
from .corpus import (Corpus, RawPost, Snippet, extract_snippets, filter_single_language,
                     length_stats, parse_posts_stream, read_corpus, sample_corpus, write_corpus)
from .evaluation import (compare_external, confusion, evaluate_model, metrics, subset_corpus,
                         train_test_split)
from .labels import LabelSet, default_label_set, load_aliases
from .mnb import (MnbModel, Prediction, fit, fit_with_search, grid_search_cv, kfold_split,
                  load_model, log_joint, predict, predict_text, save_model, train)
from .text import (PipelineConfig, Vocabulary, fit_vocabulary, select_top_k, term_counts,
                   tfidf_transform, tokenize, vectorize_corpus)

__version__ = "0.1.0"
