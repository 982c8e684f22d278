"""Curve clouds for laser scans.

Converts timestamped, beam-tagged point streams into polyline curve
clouds, provides the curve-specific operations (interval farthest point
sampling, geodesic grouping, curve interpolation, symmetric convolution),
assembles them into an inference-only segmentation backbone, and simulates
laser scan patterns over analytic scenes for test data.
"""

__version__ = "0.1.0"

from ._backend import active_backend, available_backends, use_backend
from ._threads import get_num_threads, set_num_threads
from .errors import (
    CurveCloudError,
    EmptyScanError,
    FormatError,
    MismatchError,
    ValidationError,
)
from .model import (
    CONVERSION_PRESETS,
    ConversionConfig,
    CurveCloud,
    GeodesicTable,
    PointCloud,
    build_curve_cloud,
    geodesic_lengths,
    permute_curves,
    reverse_curves,
    validate,
)
from .ops import (
    FeatureMap,
    GroupingConfig,
    Neighborhoods,
    SamplingConfig,
    Selection,
    SymmetricKernel,
    conv_symmetric,
    fps_1d,
    fps_euclidean,
    gradient_features,
    group_ball3d,
    group_curve,
    interpolate_curve,
)
from .layers import (
    AttentivePoolParams,
    CurveConvBlockParams,
    CurveFPParams,
    CurveSAParams,
    DenseLayer,
    GraphConvParams,
    MlpParams,
    NormStats,
    PointFPParams,
    PointSAParams,
    apply_mlp,
    attentive_pool,
    curve_conv_block,
    curve_fp,
    curve_sa,
    graph_conv,
    init_params,
    point_fp,
    point_sa,
)
from .backbone import (
    BackboneConfig,
    BackboneParams,
    EncoderStage,
    PROFILES,
    SegmentationOutput,
    ablate,
    config_from_json,
    config_to_json,
    forward,
    init_backbone_params,
    toy_profile,
    wide_profile,
)
from .simulate import (
    Box,
    Plane,
    ScanConfig,
    Scene,
    SensorPose,
    Sphere,
    pattern_stats,
    scene_from_json,
    simulate,
)
