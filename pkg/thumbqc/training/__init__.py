from thumbqc.training.config import TrainConfig, load_config  # noqa: F401
from thumbqc.training.data import ThumbnailDataset, make_loader  # noqa: F401
from thumbqc.training.gradcheck import GradCheckReport, grad_check  # noqa: F401
from thumbqc.training.loss import bce_loss  # noqa: F401
from thumbqc.training.splits import read_manifest, split_dataset, write_manifest  # noqa: F401
from thumbqc.training.trainer import EpochRecord, TrainResult, train, write_epoch_log  # noqa: F401
