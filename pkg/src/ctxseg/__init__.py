"""Knowledge-driven fuzzy region classification and contextual region growing.

The pipeline over-segments a gray image into small regions, classifies each
region into fuzzy membership degrees over the domain's thematic classes, then
iteratively propagates information from confidently classified seed regions
through the region adjacency graph, merging neighbors once they agree, and
finally defuzzifies the surviving regions into a crisp label map.
"""

from .errors import (
    CtxsegError,
    DeadRegionError,
    DimensionMismatchError,
    EmptyContextError,
    FormatError,
    InvalidParameterError,
    InvalidSpecError,
    InvalidTargetSetError,
    LengthMismatchError,
    NotAdjacentError,
    ParseError,
    UnknownClassError,
    ValidationError,
)
from .fuzzy_classification import (
    PartitionMatrix,
    Tier,
    classify_graph,
    classify_region,
    distribution_gaps,
    focusing,
    predominant_class,
    separation_coefficient,
    sorted_degrees,
    tier_from_sc,
    tier_of,
)
from .knowledge_base import (
    KnowledgeBase,
    SpatialRelations,
    ThematicClass,
    ValidConfiguration,
    classes_included_in,
    classes_neighboring,
    configuration_subjects,
    load_kb,
    load_mammogram_kb,
    mammogram_kb_path,
    parse_kb,
    write_kb,
)
from .oversegmentation import (
    ingest_label_map,
    read_pgm,
    slic_oversegment,
    split_disconnected,
    write_label_map,
    write_pgm,
)
from .phantom import PhantomSpec, generate_phantom, phantom_kb, pixel_accuracy, write_phantom
from .propagation import (
    ContextCase,
    ContextKind,
    UpdateParams,
    bhattacharyya_distance,
    context_distance,
    has_converged,
    identify_configuration,
    propagate_sweep,
    update_membership,
)
from .region_graph import (
    Region,
    RegionGraph,
    build_graph,
    local_context,
    merge,
    relabeled_labels,
)
from .segmenter import (
    UNLABELED,
    DefuzzMode,
    IterationRecord,
    SegmentationResult,
    SegmenterParams,
    conditional_merge,
    defuzzify,
    quality_map,
    segment,
    write_iteration_log,
)

__version__ = "0.1.0"
