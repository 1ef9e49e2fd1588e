"""Train small tree classifiers with scikit-learn and export them as
boxprob bundles: model.json, samples.csv, uncertainty.json, manifest.json.

The exporter talks to the engine only through its documented file
formats and command line; it never imports the engine package.
"""

from .bundle import (
    ExportBundle,
    ExportError,
    FidelityError,
    export_iris,
    export_mnist,
    write_bundle,
)
from .datasets import DatasetError

__all__ = [
    "DatasetError",
    "ExportBundle",
    "ExportError",
    "FidelityError",
    "export_iris",
    "export_mnist",
    "write_bundle",
]

__version__ = "0.1.0"
