"""Vibration-based damage assessment with dynamic mode decomposition."""

from .beam import BeamSpec, DamageSpec, ModalBasis, build_modal_basis, simulate, notch_damage_case
from .config import PipelineConfig, load_config
from .damage import BaselineReference, DamageReport, build_baseline, score
from .dmd import DmdModel, fit, fit_snapshots
from .features import FeatureSet, ModeMatch, match_modes
from .snapshots import SnapshotMatrix, load_csv, load_frame_sequence, write_csv

__version__ = "0.1.0"
