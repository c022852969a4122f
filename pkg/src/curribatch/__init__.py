"""Interference-aware data curriculum and mini-batch scheduling for
multi-task contrastive training on precomputed embeddings."""

from .annealing import (
    AnnealConfig,
    TaskOrder,
    acceptance_probability,
    anneal,
    brute_force_order,
    propose_swap,
    tour_score,
)
from .corpus import (
    Corpus,
    InstanceTriple,
    Instructions,
    TaskDataset,
    ValidationReport,
    load_corpus,
    save_corpus,
    validate_corpus,
)
from .difficulty import (
    DEFAULT_DELTA,
    MASK_EASY,
    MASK_NOISY,
    DifficultyRecord,
    instance_difficulty,
    noise_mask,
    sort_task_instances,
    task_margins,
)
from .reports import (
    MarginHistogram,
    OrderQuality,
    UnderfittingReport,
    margin_histogram,
    order_quality,
    underfitting_report,
)
from .schedule import (
    BatchSchedule,
    MiniBatch,
    build_schedule,
    read_schedule,
    verify_schedule,
    write_schedule,
)
from .similarity import (
    SimilarityMatrix,
    TaskRepresentation,
    cosine_similarity,
    interference_risk,
    similarity_matrix,
    task_representation,
)
from .trainer import (
    ContrastiveConfig,
    LinearEncoder,
    batch_gradient,
    batch_loss,
    make_synthetic_corpus,
    train,
)

__version__ = "0.1.0"
