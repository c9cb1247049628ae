from thumbqc.schemas.approach import Approach  # noqa: F401
from thumbqc.schemas.manifest import Label, Manifest, ManifestRecord, Split  # noqa: F401
from thumbqc.schemas.reports import BenchEntry, BenchReport, LatencyStats, SlideError, SlideVerdict  # noqa: F401
