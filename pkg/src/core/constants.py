import math

# Canonical angle range is [-HALF_PI, HALF_PI)
HALF_PI = math.pi / 2.0

# Clipped areas below this are floating-point noise at tangency
AREA_EPSILON = 1e-12

POSITIVE_IOU_THRESHOLD = 0.5
NMS_IOU_THRESHOLD = 0.5
EVAL_IOU_THRESHOLD = 0.5

# Objectness probabilities are clamped to [PROBABILITY_EPSILON, 1 - PROBABILITY_EPSILON]
PROBABILITY_EPSILON = 1e-7

DEFAULT_ASPECT_RATIO_MIN = 3.0

DETECTION_SCHEMA = "kcr.detections"
ROTATED_BOXES_SCHEMA = "kcr.rotated_boxes"
SCHEMA_VERSION = 1

# First-stage output channels of the toy predictor
RPN_CHANNELS = ("dx", "dy", "dw", "dh", "alpha", "beta", "logit")
# Second-stage output channels of the toy predictor
RCNN_CHANNELS = ("dx", "dy", "dw", "dh", "theta", "logit")

EXPERIMENT_MODES = (
    "axis_only",
    "naive_cotraining",
    "kcr_projection",
    "kcr_heuristic",
    "fully_supervised",
)
