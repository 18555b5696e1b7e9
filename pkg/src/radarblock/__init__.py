"""Radar-aided proactive mmWave blockage prediction on synthetic FMCW scenes."""

from .sim import (
    AmbiguityError,
    Archetype,
    BlockageSequence,
    LinkModel,
    RadarConfig,
    RadarFrameCube,
    SceneObject,
    ScenarioConfig,
    blockage_indicator,
    effective_power,
    generate_dataset,
    generate_sequence,
    step_scene,
    synth_frame,
)
from .dsp import (
    FftConfig,
    RadarCube,
    RangeAngleMap,
    RangeVelocityMap,
    axis_array,
    bin_to_physical,
    radar_cube,
    range_angle_map,
    range_velocity_map,
)
from .detect import (
    CfarConfig,
    Cluster,
    Detection,
    ObjectMeasurement,
    cfar_2d,
    cfar_alpha,
    cluster_detections,
    dbscan,
    extract_measurement,
)
from .tracking import (
    AssociationConfig,
    Tracker,
    TrackState,
    UkfConfig,
    associate,
    manage,
    measure,
    predict,
    sigma_points,
    spawn_track,
    ukf_update,
)
from .predict import (
    KnnModel,
    LabelConfig,
    LabeledSample,
    build_samples,
    future_label,
    knn_fit,
    knn_predict,
    knn_scores,
    split_sequences,
    stack_states,
)
from .metrics import MetricsReport, evaluate
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    PipelineConfig,
    export_range_angle,
    frame_measurements,
    run_experiment,
    run_tracking_pipeline,
    track_sequence,
)

__version__ = "0.1.0"
