"""Converter from the public inner-speech EEG dataset's processed epoch
derivatives to the EIT1 trial-set container, with a per-montage channel
positions table."""

__version__ = "0.1.0"

from .convert import ConversionResult, convert_subject
from .dataset import CLASS_NAMES, LABEL_MAP, DatasetError, SubjectManifest
from .fifmin import EpochsFile, FifError, read_epochs_file, write_epochs_file
from .positions import project_to_disc, schematic_positions

__all__ = [
    "CLASS_NAMES",
    "ConversionResult",
    "DatasetError",
    "EpochsFile",
    "FifError",
    "LABEL_MAP",
    "SubjectManifest",
    "convert_subject",
    "project_to_disc",
    "read_epochs_file",
    "schematic_positions",
    "write_epochs_file",
]
