"""Corpus-level intertextuality measurement across originals and translations.

The toolkit quantifies how strongly a set of texts re-uses itself (known
verse pairs scoring higher than chapter-matched random pairs in a
multilingual embedding space) and how translation shifts that signal.
"""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    Corpus,
    Provenance,
    TestamentSpec,
    VerseRef,
    VersificationMap,
    apply_versification,
    load_corpus,
    parse_corpus,
)
from .crossrefs import (  # noqa: F401
    CrossRef,
    RawReference,
    Scope,
    filter_refs,
    fold_bidirectional,
    parse_crossrefs,
    partition,
)
from .metrics import (  # noqa: F401
    PairedSample,
    RatioResult,
    ShiftRecord,
    bootstrap_ci,
    compute_ratio_set,
    intertextuality_ratio,
    sample_baseline,
    shift_table,
)
from .store import (  # noqa: F401
    EmbeddingStore,
    cosine,
    fetch_remote,
    load_store,
    load_store_file,
    normalize,
    save_store,
    save_store_file,
)
from .translate import (  # noqa: F401
    GenerationConfig,
    PromptTemplate,
    build_prompt,
    extract_translation,
    select_exemplars,
    translate_corpus,
)
