"""Radar point clouds from raw FMCW MIMO data cubes via Capon beamforming."""

from .array_model import (
    ArrayGeometry,
    DirectionGrid,
    DoaDirection,
    SteeringVector,
    WaveformConfig,
    angles_to_doa,
    default_geometry,
    default_waveform,
    doa_to_angles,
    phase_difference,
    steering_vector,
)
from .capon import RadarPoint, process_frame
from .config import PipelineConfig, RadarConfig, default_config, load_config, load_scene
from .fft_baseline import process_frame_fft
from .metrics import PointCloud, chamfer_distance, recovery_report, voxel_downsample
from .radar_io import read_cube, read_pointcloud, write_cube, write_pointcloud
from .scene import DataCube, Scatterer, Scene, expected_detection, simulate

__version__ = "0.1.0"
