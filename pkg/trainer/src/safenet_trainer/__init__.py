"""Training side of the foothold-safety segmentation network."""

from .formats import ARCHITECTURE, load_dataset, load_weights, save_weights
from .model import SegmentationUNet, parameter_count
from .train import TrainConfig, train, evaluate
from .fixtures import export_parity_fixture

__version__ = "0.1.0"
