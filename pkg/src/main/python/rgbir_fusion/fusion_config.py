"""Global constants and configuration objects for the fusion kernels"""
import os.path
from dataclasses import dataclass, field

FIXTURES_PATH = os.path.join(os.path.dirname(__file__), "../../../unittest/fixtures/")

# numerics
NORM_EPS = 1e-5
DELTA_FLOOR = 1e-4
STATE_DIM = 16

# region-aware scan
LOW_RANK = 4
CHANNEL_GROUPS = 2
SCAN_DIRECTIONS = ("h_fwd", "v_fwd")
FOUR_WAY_DIRECTIONS = ("h_fwd", "h_bwd", "v_fwd", "v_bwd")

# encoder
CEI_POOL_TARGET = (8, 8)
HIDDEN_DIM = 128
COMPLETION_SIDES = ("none", "ir", "rgb", "both")
DEFAULT_COMPLETION_SIDE = "ir"

# adapter
ADAPTER_DIM = 128
DEFAULT_RHO = 0.5
ROUTER_EXPERTS = 3

# toy backbone
STAGE_CHANNELS = (32, 64, 128)
STEM_CHANNELS = 16
INPUT_SIZE = (256, 256)
SIZE_MULTIPLE = 32
PYRAMID_LEVELS = (3, 4, 5)

# weight file format
WEIGHTS_MAGIC = b"MMDW"
WEIGHTS_VERSION = 1


@dataclass(frozen=True)
class ToyBackboneConfig:
    """Shared convolution trunk producing stride 8/16/32 feature maps"""
    stage_channels: tuple = STAGE_CHANNELS
    stem_channels: int = STEM_CHANNELS
    input_size: tuple = INPUT_SIZE
    adapter_dim: int = ADAPTER_DIM
    rho: float = DEFAULT_RHO
    seed: int = 0


@dataclass(frozen=True)
class EncoderConfig:
    """Full encoder assembly: backbone, adapters, CEI and pyramid fusion"""
    backbone: ToyBackboneConfig = field(default_factory=ToyBackboneConfig)
    hidden_dim: int = HIDDEN_DIM
    state_dim: int = STATE_DIM
    rank: int = LOW_RANK
    pool_target: tuple = CEI_POOL_TARGET
    completion_side: str = DEFAULT_COMPLETION_SIDE
    shared_cei: bool = False
    four_way_scan: bool = False
    use_adapters: bool = True
    use_cei: bool = True

    @property
    def scan_directions(self) -> tuple:
        """Directions scanned by every region-aware block"""
        return FOUR_WAY_DIRECTIONS if self.four_way_scan else SCAN_DIRECTIONS
