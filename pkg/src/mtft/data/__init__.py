from .csvio import (
    CsvSchema,
    DataFormatError,
    SceneDataset,
    SceneDatasetManifest,
    export_csv,
    find_split,
    ingest_csv,
    read_dataset,
    write_dataset,
)
from .filters import filter_challenging, is_challenging, maneuver_stats
from .scene import (
    Batch,
    SceneArrays,
    SceneError,
    TrajectoryScene,
    denormalize_scene,
    last_observed_index,
    make_batch,
    masked_history,
    normalize_scene,
    stack_scenes,
)
from .synth import Maneuver, parse_mix, format_mix, synth_challenging, synth_generate, synth_scene
