from .manifest import (
    DatasetManifest,
    DuplicateEntry,
    Entry,
    ManifestError,
    MissingFile,
    ParseError,
    load_manifest,
    write_manifest,
)
from .report import emit_plot_data, emit_report, plot_series, read_csv_report
from .stats import (
    EmptyScope,
    aggregate_rows,
    baseline_accuracy,
    confusion_matrix,
    defense_rate,
    escape_rate,
)
from .sweep import SweepRecord, SweepResult, run_attack_sweep
