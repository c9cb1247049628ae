from thumbqc.harness.bench import bench_model, preset_model, run_bench, single_thread  # noqa: F401
from thumbqc.harness.bundle import load_bundle, load_bundle_spec, save_bundle  # noqa: F401
from thumbqc.harness.evaluation import evaluate_manifest, group_reports, write_evaluation  # noqa: F401
from thumbqc.harness.inference import collect_inputs, infer_slides, records_from_directory, write_results  # noqa: F401
from thumbqc.harness.preprocess import export_slide, export_slides  # noqa: F401
