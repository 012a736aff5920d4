class PHASE:
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


class SPLIT_MODE:
    CLASSIC = "classic"
    OOD = "ood"
    SHIFT = "shift"


DEFAULT_CUTOFFS = (20, 50)
EARLY_STOP_METRIC = "recall50"
OOD_Z_RANGE = (0.5, 0.9)
LAMBDA_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)
NUM_INTERESTS_GRID = (2, 4, 6, 8)
